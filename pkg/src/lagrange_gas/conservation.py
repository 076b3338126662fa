"""Discrete audits, conserved densities and Noether checks.

Discrete audits measure how well a pair of consecutive layers satisfies the
conservation laws possessed by the Popov-Samarskii scheme. The continuous
densities are evaluated in gas-dynamics variables with the potential
identified with the particle position (``phi = x``), so ``phi_t = u`` and
``phi_s = 1/rho``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import BoundaryCondition, EntropyProfile, GasModel, Layer, MassMesh, ShapeError
from .schemes import Trajectory, weighted_ghost_pressures


class ApplicabilityError(ValueError):
    """A conservation law was requested outside the cases where it holds."""


# --- discrete audits ---------------------------------------------------------

def _pair_check(old: Layer, new: Layer, mesh: MassMesh) -> float:
    if old.n_cells != new.n_cells or old.n_cells != mesh.n_cells:
        raise ShapeError("layers and mesh disagree in size")
    return mesh.step


def mass_residuals(old, new, mesh, tau, variant="popov_samarskii"):
    h = _pair_check(old, new, mesh)
    vel = old.u if variant == "explicit_gamma3" else 0.5 * (old.u + new.u)
    return (1.0 / new.rho - 1.0 / old.rho) / tau - np.diff(vel) / h


def momentum_residuals(old, new, mesh, tau, alpha, bc=None):
    h = _pair_check(old, new, mesh)
    pg = weighted_ghost_pressures(old, new, bc or BoundaryCondition.walls(), alpha)
    return (new.u - old.u) / tau + np.diff(pg) / h


def energy_residuals(old, new, mesh, tau, alpha, bc=None):
    h = _pair_check(old, new, mesh)
    pg = weighted_ghost_pressures(old, new, bc or BoundaryCondition.walls(), alpha)
    p_node = 0.5 * (pg[1:] + pg[:-1])
    um = 0.5 * (old.u + new.u)

    def total(layer):
        return layer.eps + 0.25 * (layer.u[:-1] ** 2 + layer.u[1:] ** 2)

    return (total(new) - total(old)) / tau + np.diff(p_node * um) / h


def center_of_mass_residuals(old, new, mesh, tau, alpha, bc=None):
    h = _pair_check(old, new, mesh)
    pg = weighted_ghost_pressures(old, new, bc or BoundaryCondition.walls(), alpha)
    t_half = 0.5 * (old.t + new.t)
    return ((new.x - new.t * new.u) - (old.x - old.t * old.u)) / tau - t_half * np.diff(pg) / h


def work_residuals(old, new, mesh, tau, alpha):
    """Internal-energy balance ``eps_t + p^(alpha) (1/rho)_t`` per cell."""
    _pair_check(old, new, mesh)
    pa = alpha * new.p + (1.0 - alpha) * old.p
    return (new.eps - old.eps) / tau + pa * (1.0 / new.rho - 1.0 / old.rho) / tau


def _mx(a) -> float:
    return float(np.max(np.abs(a)))


def audit_mass(old: Layer, new: Layer, mesh: MassMesh, tau: float, variant: str = "popov_samarskii") -> float:
    """Discrete mass law; ``variant='explicit_gamma3'`` uses the old velocity."""
    return _mx(mass_residuals(old, new, mesh, tau, variant))


def audit_momentum(old, new, mesh, tau, alpha, bc: Optional[BoundaryCondition] = None) -> float:
    return _mx(momentum_residuals(old, new, mesh, tau, alpha, bc))


def audit_energy(old, new, mesh, tau, alpha, bc: Optional[BoundaryCondition] = None) -> float:
    return _mx(energy_residuals(old, new, mesh, tau, alpha, bc))


def audit_center_of_mass(old, new, mesh, tau, alpha, bc: Optional[BoundaryCondition] = None) -> float:
    return _mx(center_of_mass_residuals(old, new, mesh, tau, alpha, bc))


def audit_work(old, new, mesh, tau, alpha) -> float:
    return _mx(work_residuals(old, new, mesh, tau, alpha))


def audit_all(old, new, mesh, tau, alpha, bc=None, variant="popov_samarskii") -> dict:
    return {
        "mass": audit_mass(old, new, mesh, tau, variant),
        "momentum": audit_momentum(old, new, mesh, tau, alpha, bc),
        "energy": audit_energy(old, new, mesh, tau, alpha, bc),
        "center_of_mass": audit_center_of_mass(old, new, mesh, tau, alpha, bc),
        "work": audit_work(old, new, mesh, tau, alpha),
    }


def entropy_drift(trajectory, model: GasModel):
    """Per-cell ``max_t |S_i(t) - S_i(0)|`` and its global maximum."""
    layers = list(trajectory)
    s0 = layers[0].p / layers[0].rho**model.gamma
    drift = np.zeros_like(s0)
    for layer in layers[1:]:
        drift = np.maximum(drift, np.abs(layer.p / layer.rho**model.gamma - s0))
    return drift, float(drift.max()) if drift.size else 0.0


# --- continuous densities ----------------------------------------------------

# evaluator signature: f(t, s, x, u, rho, p, S, S_s, gamma)
Evaluator = Callable[..., np.ndarray]


@dataclass(frozen=True)
class DensityPair:
    """Conserved vector ``(T^t, T^s)`` in Lagrangian coordinates."""

    name: str
    Tt: Evaluator
    Ts: Evaluator
    requires_phi: bool = False
    applicable: Callable[[GasModel, EntropyProfile], Optional[str]] = field(
        default=lambda model, profile: None, repr=False)

    def check(self, model: GasModel, profile: EntropyProfile) -> None:
        why = self.applicable(model, profile)
        if why:
            raise ApplicabilityError(f"law {self.name!r} does not apply: {why}")

    def evaluate(self, t, s, x, u, rho, p, S, S_s, gamma):
        return self.Tt(t, s, x, u, rho, p, S, S_s, gamma), self.Ts(t, s, x, u, rho, p, S, S_s, gamma)


@dataclass(frozen=True)
class EulerDensityPair:
    """Conserved vector ``(eT^t, eT^x)`` in Eulerian coordinates."""

    name: str
    Tt: Evaluator
    Tx: Evaluator


def to_euler(pair: DensityPair) -> EulerDensityPair:
    """Eulerian conserved vector ``(rho T^t, rho u T^t + T^s)``."""

    def tt(t, s, x, u, rho, p, S, S_s, gamma):
        return rho * pair.Tt(t, s, x, u, rho, p, S, S_s, gamma)

    def tx(t, s, x, u, rho, p, S, S_s, gamma):
        return rho * u * pair.Tt(t, s, x, u, rho, p, S, S_s, gamma) + pair.Ts(t, s, x, u, rho, p, S, S_s, gamma)

    return EulerDensityPair(pair.name, tt, tx)


def _energy(u, rho, S, g):
    return 0.5 * u**2 + S * rho ** (g - 1.0) / (g - 1.0)


def _flux_bracket(u, rho, S, g):
    return -0.5 * u**2 + g * S * rho ** (g - 1.0) / (g - 1.0)


def _needs(gamma3=None, kind=None):
    def check(model, profile):
        if gamma3 is True and model.gamma != 3.0:
            return f"requires gamma = 3 (got {model.gamma})"
        if gamma3 is False and model.gamma == 3.0:
            return "requires gamma != 3"
        if kind is not None and profile.kind != kind:
            return f"requires a {kind} entropy profile (got {profile.kind})"
        return None

    return check


def _power_q(model, profile):
    why = _needs(True, "power")(model, profile)
    if why:
        return why
    if profile.q != -4.0:
        return f"requires q = -4 (got {profile.q})"
    return None


_LAWS = {
    "mass": DensityPair(
        "mass",
        lambda t, s, x, u, rho, p, S, Ss, g: 1.0 / rho,
        lambda t, s, x, u, rho, p, S, Ss, g: -u),
    "momentum": DensityPair(
        "momentum",
        lambda t, s, x, u, rho, p, S, Ss, g: u,
        lambda t, s, x, u, rho, p, S, Ss, g: S * rho**g),
    "energy": DensityPair(
        "energy",
        lambda t, s, x, u, rho, p, S, Ss, g: _energy(u, rho, S, g),
        lambda t, s, x, u, rho, p, S, Ss, g: S * rho**g * u),
    "center_of_mass": DensityPair(
        "center_of_mass",
        lambda t, s, x, u, rho, p, S, Ss, g: x - t * u,
        lambda t, s, x, u, rho, p, S, Ss, g: -t * S * rho**g,
        requires_phi=True),
    "T_star": DensityPair(
        "T_star",
        lambda t, s, x, u, rho, p, S, Ss, g: 2.0 * t * (0.5 * u**2 + S * rho**2 / (g - 1.0)) - x * u,
        lambda t, s, x, u, rho, p, S, Ss, g: (2.0 * t * u - x) * S * rho**3,
        True, _needs(gamma3=True)),
    "T_star2": DensityPair(
        "T_star2",
        lambda t, s, x, u, rho, p, S, Ss, g: t**2 * (0.5 * u**2 + S * rho**2 / (g - 1.0)) - t * x * u + 0.5 * x**2,
        lambda t, s, x, u, rho, p, S, Ss, g: (t**2 * u - t * x) * S * rho**3,
        True, _needs(gamma3=True)),
    "isentropic_T4": DensityPair(
        "isentropic_T4",
        lambda t, s, x, u, rho, p, S, Ss, g: ((3 * g - 1) * t * _energy(u, rho, S, g)
                                              + (g - 3) * s * u / rho - (g + 1) * x * u),
        lambda t, s, x, u, rho, p, S, Ss, g: ((3 * g - 1) * t * S * u * rho**g
                                              + (g - 3) * s * _flux_bracket(u, rho, S, g)
                                              - (g + 1) * S * x * rho**g),
        True, _needs(gamma3=False, kind="constant")),
    "isentropic_T5": DensityPair(
        "isentropic_T5",
        lambda t, s, x, u, rho, p, S, Ss, g: u / rho,
        lambda t, s, x, u, rho, p, S, Ss, g: _flux_bracket(u, rho, S, g),
        False, _needs(kind="constant")),
    "isentropic_T4_gamma3": DensityPair(
        "isentropic_T4_gamma3",
        lambda t, s, x, u, rho, p, S, Ss, g: u / rho,
        lambda t, s, x, u, rho, p, S, Ss, g: -0.5 * u**2 + g * S * rho**2 / (g - 1.0),
        False, _needs(gamma3=True, kind="constant")),
    "power_T4": DensityPair(
        "power_T4",
        # q = s S'(s) / S(s) for a power profile
        lambda t, s, x, u, rho, p, S, Ss, g: ((3 * g + 2 * (s * Ss / S) - 1) * t * _energy(u, rho, S, g)
                                              + (g - 3) * s * u / rho
                                              - (g + (s * Ss / S) + 1) * x * u),
        lambda t, s, x, u, rho, p, S, Ss, g: ((3 * g + 2 * (s * Ss / S) - 1) * t * S * u * rho**g
                                              + (g - 3) * s * _flux_bracket(u, rho, S, g)
                                              - (g + (s * Ss / S) + 1) * S * x * rho**g),
        True, _needs(gamma3=False, kind="power")),
    "power_T4_gamma3": DensityPair(
        "power_T4_gamma3",
        lambda t, s, x, u, rho, p, S, Ss, g: t * _energy(u, rho, S, g) + s * u / rho,
        lambda t, s, x, u, rho, p, S, Ss, g: t * S * u * rho**g + s * _flux_bracket(u, rho, S, g),
        False, _power_q),
    "exponential_T3": DensityPair(
        "exponential_T3",
        # q = S'(s) / S(s) for an exponential profile
        lambda t, s, x, u, rho, p, S, Ss, g: (2 * (Ss / S) * t * _energy(u, rho, S, g)
                                              - (Ss / S) * x * u + (g - 3) * u / rho),
        lambda t, s, x, u, rho, p, S, Ss, g: (2 * (Ss / S) * t * S * rho**g * u
                                              - (Ss / S) * S * x * rho**g
                                              + (g - 3) * _flux_bracket(u, rho, S, g)),
        True, _needs(gamma3=False, kind="exponential")),
}

LAW_IDS = tuple(_LAWS)


def builtin_density(law_id: str) -> DensityPair:
    try:
        return _LAWS[law_id]
    except KeyError:
        raise KeyError(f"unknown conservation law {law_id!r}; known: {', '.join(LAW_IDS)}") from None


def applicable_laws(model: GasModel, profile: EntropyProfile) -> list[str]:
    return [k for k, v in _LAWS.items() if v.applicable(model, profile) is None]


# --- Noether machinery on the potential equation -------------------------------

@dataclass(frozen=True)
class PotentialGenerator:
    """Point symmetry ``xi_t d/dt + xi_s d/ds + eta d/dphi`` of the potential equation.

    Coefficients are callables of ``(t, s, phi)``.
    """

    name: str
    xi_t: Callable
    xi_s: Callable
    eta: Callable


def _zero(t, s, phi):
    return 0.0 * t + 0.0 * s + 0.0 * phi


def _one(t, s, phi):
    return 1.0 + _zero(t, s, phi)


def Z1() -> PotentialGenerator:
    return PotentialGenerator("Z1", _zero, _zero, _one)


def Z2() -> PotentialGenerator:
    return PotentialGenerator("Z2", _one, _zero, _zero)


def Z3() -> PotentialGenerator:
    return PotentialGenerator("Z3", _zero, _zero, lambda t, s, phi: t + _zero(t, s, phi))


def kernel_X4(gamma: float) -> PotentialGenerator:
    return PotentialGenerator("X4", lambda t, s, phi: (gamma + 1.0) * t + _zero(t, s, phi), _zero,
                              lambda t, s, phi: 2.0 * phi + _zero(t, s, phi))


def Z_star() -> PotentialGenerator:
    return PotentialGenerator("Z_star", lambda t, s, phi: 2.0 * t + _zero(t, s, phi), _zero,
                              lambda t, s, phi: phi + _zero(t, s, phi))


def Z_star2() -> PotentialGenerator:
    return PotentialGenerator("Z_star2", lambda t, s, phi: t**2 + _zero(t, s, phi), _zero,
                              lambda t, s, phi: t * phi)


def Z4_isentropic(gamma: float) -> PotentialGenerator:
    g = gamma
    return PotentialGenerator("Z4_isentropic", lambda t, s, phi: (3 * g - 1) * t + _zero(t, s, phi),
                              lambda t, s, phi: (g - 3) * s + _zero(t, s, phi),
                              lambda t, s, phi: (g + 1) * phi + _zero(t, s, phi))


def Z_shift_s() -> PotentialGenerator:
    """``d/ds``: Z5 for isentropic flow, Z4 for the isentropic ``gamma = 3`` case."""
    return PotentialGenerator("Z_shift_s", _zero, _one, _zero)


def Z4_power(gamma: float, q: float) -> PotentialGenerator:
    g = gamma
    return PotentialGenerator("Z4_power", lambda t, s, phi: (3 * g + 2 * q - 1) * t + _zero(t, s, phi),
                              lambda t, s, phi: (g - 3) * s + _zero(t, s, phi),
                              lambda t, s, phi: (g + q + 1) * phi + _zero(t, s, phi))


def Z4_power_gamma3() -> PotentialGenerator:
    return PotentialGenerator("Z4_power_gamma3", lambda t, s, phi: t + _zero(t, s, phi),
                              lambda t, s, phi: s + _zero(t, s, phi), _zero)


def Z4_exponential(gamma: float, q: float) -> PotentialGenerator:
    return PotentialGenerator("Z4_exponential", lambda t, s, phi: 2 * q * t + _zero(t, s, phi),
                              lambda t, s, phi: (gamma - 3) + _zero(t, s, phi),
                              lambda t, s, phi: q * phi + _zero(t, s, phi))


def B_zero(t, s, phi):
    return _zero(t, s, phi)


def B_phi(t, s, phi):
    return phi + _zero(t, s, phi)


def B_half_phi2(t, s, phi):
    return 0.5 * phi**2 + _zero(t, s, phi)


@dataclass(frozen=True)
class NoetherSource:
    """Symmetry, divergence terms and scale factor that reproduce a builtin law."""

    generator: PotentialGenerator
    B1: Callable = B_zero
    B2: Callable = B_zero
    factor: float = 1.0


def noether_source(law_id: str, model: GasModel, profile: EntropyProfile) -> NoetherSource:
    """The variational or divergence symmetry behind ``law_id``.

    The printed densities differ from the raw Noether vector by the sign
    recorded in ``factor``.
    """
    g, q = model.gamma, profile.q
    table = {
        "momentum": lambda: NoetherSource(Z1(), factor=1.0),
        "energy": lambda: NoetherSource(Z2(), factor=-1.0),
        "center_of_mass": lambda: NoetherSource(Z3(), B_phi, factor=-1.0),
        "T_star": lambda: NoetherSource(Z_star(), factor=-1.0),
        "T_star2": lambda: NoetherSource(Z_star2(), B_half_phi2, factor=-1.0),
        "isentropic_T4": lambda: NoetherSource(Z4_isentropic(g), factor=-1.0),
        "isentropic_T5": lambda: NoetherSource(Z_shift_s(), factor=-1.0),
        "isentropic_T4_gamma3": lambda: NoetherSource(Z_shift_s(), factor=-1.0),
        "power_T4": lambda: NoetherSource(Z4_power(g, q), factor=-1.0),
        "power_T4_gamma3": lambda: NoetherSource(Z4_power_gamma3(), factor=-1.0),
        "exponential_T3": lambda: NoetherSource(Z4_exponential(g, q), factor=-1.0),
    }
    if law_id not in table:
        raise KeyError(f"law {law_id!r} has no Noether symmetry")
    builtin_density(law_id).check(model, profile)
    return table[law_id]()


def lagrangian(phi_t, phi_s, S, gamma):
    """``L = phi_t**2/2 - S phi_s**(1-gamma)/(gamma-1)``."""
    return 0.5 * phi_t**2 - S * phi_s ** (1.0 - gamma) / (gamma - 1.0)


def noether_density(generator: PotentialGenerator, model: GasModel, profile: EntropyProfile,
                    B1: Callable = B_zero, B2: Callable = B_zero) -> DensityPair:
    """Noether conserved vector, minus the divergence terms ``(B1, B2)``.

    ``dL/dphi_t = phi_t`` and ``dL/dphi_s = S phi_s**(-gamma)``.
    """
    g = model.gamma

    def parts(t, s, x, u, rho, S):
        phi_s = 1.0 / rho
        w = generator.eta(t, s, x) - generator.xi_t(t, s, x) * u - generator.xi_s(t, s, x) * phi_s
        return lagrangian(u, phi_s, S, g), w, phi_s

    def tt(t, s, x, u, rho, p, S, S_s, gamma):
        L, w, _ = parts(t, s, x, u, rho, S)
        return generator.xi_t(t, s, x) * L + w * u - B1(t, s, x)

    def ts(t, s, x, u, rho, p, S, S_s, gamma):
        L, w, phi_s = parts(t, s, x, u, rho, S)
        return generator.xi_s(t, s, x) * L + w * S * phi_s ** (-g) - B2(t, s, x)

    return DensityPair(f"noether[{generator.name}]", tt, ts, requires_phi=True)


@dataclass(frozen=True)
class SampledField:
    """Smooth synthetic potential ``phi(t, s)`` with analytic first derivatives."""

    phi: Callable
    phi_t: Callable
    phi_s: Callable
    t: np.ndarray
    s: np.ndarray

    @classmethod
    def default(cls, n: int = 9, t_range=(0.5, 1.5), s_range=(1.0, 2.0)) -> "SampledField":
        tt, ss = np.meshgrid(np.linspace(*t_range, n), np.linspace(*s_range, n), indexing="ij")
        return cls(
            lambda t, s: s + 0.1 * np.sin(t + 2.0 * s) + 0.05 * t**2,
            lambda t, s: 0.1 * np.cos(t + 2.0 * s) + 0.1 * t,
            lambda t, s: 1.0 + 0.2 * np.cos(t + 2.0 * s),
            tt.ravel(), ss.ravel())


def noether_condition_residual(generator: PotentialGenerator, B1: Callable, B2: Callable,
                               sampled_field: SampledField, model: GasModel, profile: EntropyProfile,
                               step: float = 1e-5) -> float:
    """Max-norm defect of ``X L + L (D_t xi_t + D_s xi_s) - D_t B1 - D_s B2``.

    Total derivatives of coefficient functions along the field are central
    differences with spacing ``step``; the first prolongation uses the
    standard formulae.
    """
    f = sampled_field
    t, s = f.t, f.s
    g = model.gamma
    phi, pt, ps = f.phi(t, s), f.phi_t(t, s), f.phi_s(t, s)

    def d_t(fn):
        return (fn(t + step, s, f.phi(t + step, s)) - fn(t - step, s, f.phi(t - step, s))) / (2 * step)

    def d_s(fn):
        return (fn(t, s + step, f.phi(t, s + step)) - fn(t, s - step, f.phi(t, s - step))) / (2 * step)

    gen = generator
    xt, xs = gen.xi_t(t, s, phi), gen.xi_s(t, s, phi)
    dt_xt, dt_xs, dt_eta = d_t(gen.xi_t), d_t(gen.xi_s), d_t(gen.eta)
    ds_xt, ds_xs, ds_eta = d_s(gen.xi_t), d_s(gen.xi_s), d_s(gen.eta)
    eta_t = dt_eta - pt * dt_xt - ps * dt_xs
    eta_s = ds_eta - pt * ds_xt - ps * ds_xs
    S, S_s = profile(s), profile.derivative(s)
    L = lagrangian(pt, ps, S, g)
    dL_ds = -S_s * ps ** (1.0 - g) / (g - 1.0)
    XL = xs * dL_ds + eta_t * pt + eta_s * S * ps ** (-g)
    lhs = XL + L * (dt_xt + ds_xs)
    rhs = d_t(B1) + d_s(B2)
    return float(np.max(np.abs(lhs - rhs)))


# --- divergence of continuous densities on discrete trajectories ---------------

def _cell_fields(layer: Layer):
    return 0.5 * (layer.x[1:] + layer.x[:-1]), 0.5 * (layer.u[1:] + layer.u[:-1])


def divergence_grid(pair: DensityPair, trajectory: Trajectory, profile: EntropyProfile,
                    window=(0.25, 0.75)) -> np.ndarray:
    """``D_t T^t + D_s T^s`` by central differences at cell centres.

    Rows are interior time levels, columns the cells inside ``window``
    (fractions of the mass domain). Needs every layer stored at constant step.
    """
    pair.check(trajectory.model, profile)
    layers = list(trajectory)
    if len(layers) < 3:
        raise ValueError("need at least three stored layers for central time differences")
    times = np.array([layer.t for layer in layers])
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise ValueError("layers must be equally spaced in time (run with stride 1)")
    mesh, g = trajectory.mesh, trajectory.model.gamma
    sc, h = mesh.centers, mesh.step
    S, S_s = profile(sc), profile.derivative(sc)
    tt = np.empty((len(layers), sc.size))
    ts = np.empty_like(tt)
    for j, layer in enumerate(layers):
        xc, uc = _cell_fields(layer)
        tt[j], ts[j] = pair.evaluate(layer.t, sc, xc, uc, layer.rho, layer.p, S, S_s, g)
    div = (tt[2:, 1:-1] - tt[:-2, 1:-1]) / (times[2:, None] - times[:-2, None]) \
        + (ts[1:-1, 2:] - ts[1:-1, :-2]) / (2.0 * h)
    frac = (sc[1:-1] - mesh.s[0]) / (mesh.s[-1] - mesh.s[0])
    keep = (frac >= window[0]) & (frac <= window[1])
    return div[:, keep]


@dataclass
class DivergenceReport:
    """Max residual per refinement level and the observed order between levels."""

    law: str
    rows: list = field(default_factory=list)  # (level, tau, h, max_residual, order)
    grids: list = field(default_factory=list, repr=False)

    HEADER = ("law", "refinement_level", "tau", "h", "max_residual", "order")

    @property
    def max_residuals(self) -> list:
        return [r[3] for r in self.rows]

    @property
    def orders(self) -> list:
        return [r[4] for r in self.rows[1:]]

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for level, tau, h, res, order in self.rows:
            w.writerow([self.law, level, repr(tau), repr(h), repr(res), "" if order is None else repr(order)])
        return buf.getvalue() if fh is None else ""


def divergence_residual(pair: DensityPair, trajectories: Sequence[Trajectory], profile: EntropyProfile,
                        window=(0.25, 0.75)) -> DivergenceReport:
    """Refinement study over trajectories ordered coarse to fine."""
    report = DivergenceReport(pair.name)
    prev = None
    for level, traj in enumerate(trajectories):
        grid = divergence_grid(pair, traj, profile, window)
        res = float(np.max(np.abs(grid)))
        h = traj.mesh.step
        order = None
        if prev is not None:
            prev_res, prev_h = prev
            if res > 0 and prev_res > 0:
                order = math.log(prev_res / res) / math.log(prev_h / h)
            else:
                order = math.inf if res == 0 else -math.inf
        report.rows.append((level, traj.cfg.tau, h, res, order))
        report.grids.append(grid)
        prev = (res, h)
    return report


def refined_trajectories(build: Callable[[int], "object"], n0: int, levels: int, t_final: float,
                         courant: float = 0.25, alpha: float = 0.5) -> list:
    """Runs of ``build(n)`` for ``n = n0 * 2**k`` with ``tau`` halved alongside ``h``.

    ``build`` returns a problem spec; the coarse step comes from the Courant
    estimate and is then trimmed so that ``t_final`` is hit exactly.
    """
    from .schemes import StepConfig, run, suggest_timestep

    trajs = []
    spec0 = build(n0)
    tau0 = suggest_timestep(spec0.initial_layer(), spec0.mesh, spec0.model, courant)
    steps0 = max(2, math.ceil(t_final / tau0))
    for k in range(levels):
        spec = build(n0 * 2**k)
        n_steps = steps0 * 2**k
        cfg = StepConfig(t_final / n_steps, alpha)
        trajs.append(run(spec.initial_layer(), spec.mesh, spec.model, cfg, spec.bc, n_steps))
    return trajs


def noether_cross_check(law_id: str, model: GasModel, profile: EntropyProfile,
                        rng: Optional[np.random.Generator] = None, n: int = 1000) -> float:
    """Max gap ``|T - factor*N| / (1 + |T|)`` between printed and Noether densities at random states."""
    rng = np.random.default_rng(0) if rng is None else rng
    src = noether_source(law_id, model, profile)
    printed = builtin_density(law_id)
    derived = noether_density(src.generator, model, profile, src.B1, src.B2)
    lo = 0.5 if profile.kind == "power" else -1.0
    t, s = rng.uniform(0.0, 2.0, n), rng.uniform(lo, 2.0, n)
    x, u, rho = rng.uniform(-2.0, 2.0, n), rng.uniform(-2.0, 2.0, n), rng.uniform(0.2, 3.0, n)
    S, S_s = profile(s), profile.derivative(s)
    p = S * rho**model.gamma
    a = np.array(printed.evaluate(t, s, x, u, rho, p, S, S_s, model.gamma))
    b = src.factor * np.array(derived.evaluate(t, s, x, u, rho, p, S, S_s, model.gamma))
    return float(np.max(np.abs(a - b) / (1.0 + np.abs(a))))
