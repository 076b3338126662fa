"""Time steppers on the staggered mass mesh.

Two schemes are provided:

* the weighted completely conservative scheme of Popov and Samarskii
  (``step_popov_samarskii``), implicit for ``alpha > 0``;
* the explicit entropy-preserving invariant scheme for ``gamma = 3``
  (``step_explicit_gamma3``).

Both are pure functions ``Layer -> Layer``. Index conventions: node ``i``
sits at ``s_i``; cell ``i`` is the midpoint ``i + 1/2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .core import (
    BoundaryCondition,
    DomainError,
    GasModel,
    Layer,
    MassMesh,
    PrescribedPressure,
    RigidWall,
    ShapeError,
)

log = logging.getLogger(__name__)

POPOV_SAMARSKII = "popov_samarskii"
EXPLICIT_GAMMA3 = "explicit_gamma3"
SCHEMES = (POPOV_SAMARSKII, EXPLICIT_GAMMA3)


class ModelError(ValueError):
    """The gas model is not admissible for the requested scheme."""


class StepFailure(RuntimeError):
    """A time step could not be completed."""

    def __init__(self, message: str, residual: float = float("nan"), step_index: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.step_index = step_index

    def __str__(self):
        base = super().__str__()
        if self.step_index is not None:
            base = f"step {self.step_index}: {base}"
        return base


class PositivityError(StepFailure):
    pass


class MeshTanglingError(StepFailure):
    pass


@dataclass(frozen=True)
class StepConfig:
    tau: float
    alpha: float = 0.5
    solver_tol: float = 1e-13
    solver_max_iter: int = 100

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"time step must be positive, got {self.tau!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if self.solver_max_iter < 1:
            raise DomainError("solver_max_iter must be positive")


def _check_shapes(layer: Layer, mesh: MassMesh) -> float:
    if layer.n_cells != mesh.n_cells:
        raise ShapeError(f"layer has {layer.n_cells} cells, mesh has {mesh.n_cells}")
    return mesh.step


def ghost_pressures(p: np.ndarray, bc: BoundaryCondition, t: float) -> np.ndarray:
    """Cell pressures padded with one ghost value at each end.

    Rigid walls mirror the adjacent cell; prescribed pressure uses ``p_b(t)``.
    """
    left = p[0] if isinstance(bc.left, RigidWall) else bc.left.at(t)
    right = p[-1] if isinstance(bc.right, RigidWall) else bc.right.at(t)
    return np.concatenate(([left], p, [right]))


def weighted_ghost_pressures(old: Layer, new: Layer, bc: BoundaryCondition, alpha: float) -> np.ndarray:
    """``p^(alpha)`` padded with ghosts evaluated at ``t + alpha*tau``."""
    t_a = (1.0 - alpha) * old.t + alpha * new.t
    pa = alpha * new.p + (1.0 - alpha) * old.p
    return ghost_pressures(pa, bc, t_a)


def _wall_mask(n_nodes: int, bc: BoundaryCondition) -> np.ndarray:
    mask = np.zeros(n_nodes, dtype=bool)
    mask[0] = isinstance(bc.left, RigidWall)
    mask[-1] = isinstance(bc.right, RigidWall)
    return mask


def popov_samarskii_residuals(old: Layer, new: Layer, mesh: MassMesh, model: GasModel,
                              alpha: float, bc: BoundaryCondition) -> dict:
    """Residual arrays of the four scheme equations for a pair of layers.

    ``mass`` and ``energy`` are per cell, ``momentum`` and ``coordinate``
    per node. Wall nodes report ``u_hat`` itself as momentum residual.
    """
    h = _check_shapes(old, mesh)
    tau = new.t - old.t
    um = 0.5 * (old.u + new.u)
    dum = np.diff(um) / h
    pa = alpha * new.p + (1.0 - alpha) * old.p
    pg = weighted_ghost_pressures(old, new, bc, alpha)
    momentum = (new.u - old.u) / tau + np.diff(pg) / h
    walls = _wall_mask(old.u.size, bc)
    momentum[walls] = new.u[walls]
    return {
        "mass": (1.0 / new.rho - 1.0 / old.rho) / tau - dum,
        "momentum": momentum,
        "energy": (new.eps - old.eps) / tau + pa * dum,
        "coordinate": (new.x - old.x) / tau - um,
    }


def explicit_gamma3_residuals(old: Layer, new: Layer, mesh: MassMesh, bc: BoundaryCondition) -> dict:
    """Residual arrays of the four equations of the explicit ``gamma = 3`` scheme."""
    h = _check_shapes(old, mesh)
    tau = new.t - old.t
    ratio2 = (new.rho / old.rho) ** 2
    pg = ghost_pressures(old.p, bc, old.t)
    # node i uses the cell to its right; the last node borrows its left cell
    r_node = np.concatenate((ratio2, ratio2[-1:]))
    momentum = (new.u - old.u) / tau + r_node * np.diff(pg) / h
    walls = _wall_mask(old.u.size, bc)
    momentum[walls] = new.u[walls]
    return {
        "mass": new.rho * np.diff(new.x) - old.rho * np.diff(old.x),
        "momentum": momentum,
        "entropy": new.p / new.rho**3 - old.p / old.rho**3,
        "coordinate": (new.x - old.x) / tau - old.u,
    }


def _max_abs(res: dict) -> float:
    return max(float(np.max(np.abs(v))) for v in res.values())


def density_from_volume(v: np.ndarray) -> np.ndarray:
    """``1/v``, nudged by one ulp where that makes ``1/rho`` reproduce ``v`` more closely."""
    rho = 1.0 / v
    best = rho
    err = np.abs(1.0 / rho - v)
    for cand in (np.nextafter(rho, np.inf), np.nextafter(rho, 0.0)):
        e = np.abs(1.0 / cand - v)
        better = e < err
        best = np.where(better, cand, best)
        err = np.where(better, e, err)
    return best


def _positions(x: np.ndarray, velocity: np.ndarray, tau: float) -> np.ndarray:
    x_new = x + tau * velocity
    if np.any(np.diff(x_new) <= 0):
        i = int(np.argmin(np.diff(x_new)))
        raise MeshTanglingError(f"cell {i} inverted (x[{i + 1}] <= x[{i}])")
    return x_new


def step_popov_samarskii(layer: Layer, mesh: MassMesh, model: GasModel, cfg: StepConfig,
                         bc: BoundaryCondition) -> Layer:
    """Advance one step with the weighted Popov-Samarskii scheme.

    For ``alpha > 0`` the new velocity and pressure are coupled; they are
    found by fixed-point iteration on the new pressure, with the
    polytropic closure eliminating the new internal energy.
    """
    h = _check_shapes(layer, mesh)
    tau, alpha, g1 = cfg.tau, cfg.alpha, model.gamma - 1.0
    t_new = layer.t + tau
    walls = _wall_mask(layer.u.size, bc)
    p, eps, u = layer.p, layer.eps, layer.u
    # ghost pressure at t^(alpha) does not depend on the iterate
    t_a = layer.t + alpha * tau
    p_hat = p.copy()
    res = float("inf")
    for it in range(1, cfg.solver_max_iter + 1):
        pa = alpha * p_hat + (1.0 - alpha) * p
        u_hat = u - tau * np.diff(ghost_pressures(pa, bc, t_a)) / h
        u_hat[walls] = 0.0
        um = 0.5 * (u + u_hat)
        x_hat = _positions(layer.x, um, tau)
        d = tau * np.diff(um) / h
        # specific volume updated directly: avoids cancellation in x differences
        rho_hat = density_from_volume(1.0 / layer.rho + d)
        p_next = g1 * rho_hat * (eps - (1.0 - alpha) * p * d) / (1.0 + g1 * alpha * rho_hat * d)
        eps_hat = eps - (alpha * p_next + (1.0 - alpha) * p) * d
        change = float(np.max(np.abs(p_next - p_hat)))
        p_hat = p_next
        if np.any(~(rho_hat > 0)) or np.any(~(p_hat > 0)):
            raise PositivityError("density or pressure became nonpositive", residual=res)
        new = Layer(t_new, x_hat, u_hat, rho_hat, p_hat, eps_hat)
        res = _max_abs(popov_samarskii_residuals(layer, new, mesh, model, alpha, bc))
        if res <= cfg.solver_tol or change <= 4 * np.finfo(float).eps * float(np.max(p_hat)):
            log.debug("popov-samarskii step converged in %d iterations, residual %.3e", it, res)
            return new
    raise StepFailure(f"fixed-point solve did not converge in {cfg.solver_max_iter} iterations", residual=res)


def step_explicit_gamma3(layer: Layer, mesh: MassMesh, cfg: StepConfig, bc: BoundaryCondition,
                         model: Optional[GasModel] = None) -> Layer:
    """Advance one step with the explicit invariant scheme (``gamma = 3`` only).

    Update order: positions, density, pressure (entropy frozen per cell),
    velocity.
    """
    if model is not None and model.gamma != 3.0:
        raise ModelError(f"explicit invariant scheme requires gamma = 3, got {model.gamma}")
    h = _check_shapes(layer, mesh)
    tau = cfg.tau
    x_hat = _positions(layer.x, layer.u, tau)
    # mass law in specific-volume form; same as rho_hat*dx_hat = rho*dx when volumes are consistent
    rho_hat = density_from_volume(1.0 / layer.rho + tau * np.diff(layer.u) / h)
    entropy = layer.p / layer.rho**3
    p_hat = entropy * rho_hat**3
    ratio2 = (rho_hat / layer.rho) ** 2
    r_node = np.concatenate((ratio2, ratio2[-1:]))
    u_hat = layer.u - tau * r_node * np.diff(ghost_pressures(layer.p, bc, layer.t)) / h
    u_hat[_wall_mask(u_hat.size, bc)] = 0.0
    if np.any(~(rho_hat > 0)) or np.any(~(p_hat > 0)):
        raise PositivityError("density or pressure became nonpositive")
    return Layer(layer.t + tau, x_hat, u_hat, rho_hat, p_hat, p_hat / (2.0 * rho_hat))


def suggest_timestep(layer: Layer, mesh: MassMesh, model: Union[GasModel, float], courant: float) -> float:
    """Acoustic restriction ``courant * min_i h_i / sqrt(gamma p_i rho_i)`` in mass units.

    ``model`` may be a bare exponent so that the isothermal limit can be queried.
    """
    if not 0.0 < courant <= 1.0:
        raise DomainError(f"courant number must lie in (0, 1], got {courant!r}")
    gamma = model.gamma if isinstance(model, GasModel) else float(model)
    if layer.n_cells != mesh.n_cells:
        raise ShapeError("layer and mesh disagree")
    if np.any(~(layer.rho > 0)) or np.any(~(layer.p > 0)) or not gamma > 0:
        raise DomainError("timestep estimate needs positive density, pressure and gamma")
    return float(courant * np.min(mesh.h / np.sqrt(gamma * layer.p * layer.rho)))


@dataclass(frozen=True)
class StepContext:
    mesh: MassMesh
    model: GasModel
    cfg: StepConfig
    bc: BoundaryCondition
    scheme: str


Observer = Callable[[int, Layer, Layer, StepContext], object]


@dataclass
class Trajectory:
    """Stored layers plus per-step observer records."""

    layers: list
    steps: list
    mesh: MassMesh
    model: GasModel
    cfg: StepConfig
    bc: BoundaryCondition
    scheme: str = POPOV_SAMARSKII
    records: dict = field(default_factory=dict)

    @property
    def initial(self) -> Layer:
        return self.layers[0]

    @property
    def final(self) -> Layer:
        return self.layers[-1]

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)


def make_stepper(scheme: str, mesh: MassMesh, model: GasModel, cfg: StepConfig,
                 bc: BoundaryCondition) -> Callable[[Layer], Layer]:
    if scheme == POPOV_SAMARSKII:
        return lambda layer: step_popov_samarskii(layer, mesh, model, cfg, bc)
    if scheme == EXPLICIT_GAMMA3:
        if model.gamma != 3.0:
            raise ModelError(f"explicit invariant scheme requires gamma = 3, got {model.gamma}")
        return lambda layer: step_explicit_gamma3(layer, mesh, cfg, bc)
    raise ValueError(f"unknown scheme {scheme!r}")


def run(initial: Layer, mesh: MassMesh, model: GasModel, cfg: StepConfig, bc: BoundaryCondition,
        n_steps: int, observers: Union[dict, Sequence, None] = None, *,
        scheme: str = POPOV_SAMARSKII, stride: int = 1) -> Trajectory:
    """Run ``n_steps`` steps, keeping every ``stride``-th layer and the last one.

    ``observers`` maps names to callables ``f(index, old, new, ctx)``; a
    plain sequence is keyed by each callable's ``__name__``. Their return
    values are collected per step in ``Trajectory.records``.
    """
    if n_steps < 0:
        raise DomainError("n_steps must be nonnegative")
    if stride < 1:
        raise DomainError("stride must be positive")
    if observers is None:
        observers = {}
    elif not isinstance(observers, dict):
        observers = {getattr(f, "__name__", f"observer{k}"): f for k, f in enumerate(observers)}
    step = make_stepper(scheme, mesh, model, cfg, bc)
    ctx = StepContext(mesh, model, cfg, bc, scheme)
    traj = Trajectory([initial], [0], mesh, model, cfg, bc, scheme, {name: [] for name in observers})
    layer = initial
    for n in range(1, n_steps + 1):
        try:
            new = step(layer)
        except StepFailure as exc:
            exc.step_index = n
            raise
        for name, obs in observers.items():
            traj.records[name].append(obs(n, layer, new, ctx))
        if n % stride == 0 or n == n_steps:
            traj.layers.append(new)
            traj.steps.append(n)
        layer = new
    return traj


def scheme_residuals(scheme: str, old: Layer, new: Layer, mesh: MassMesh, model: GasModel,
                     alpha: float, bc: BoundaryCondition) -> dict:
    if scheme == POPOV_SAMARSKII:
        return popov_samarskii_residuals(old, new, mesh, model, alpha, bc)
    if scheme == EXPLICIT_GAMMA3:
        return explicit_gamma3_residuals(old, new, mesh, bc)
    raise ValueError(f"unknown scheme {scheme!r}")


def logarithmic_relation_residual(old: Layer, new: Layer, model: GasModel, alpha: float) -> np.ndarray:
    """Per-cell ``dp/p^(alpha) - gamma drho/rho^(alpha)``."""
    pa = alpha * new.p + (1.0 - alpha) * old.p
    ra = alpha * new.rho + (1.0 - alpha) * old.rho
    return (new.p - old.p) / pa - model.gamma * (new.rho - old.rho) / ra
