"""Point symmetries, their finite flows, stencil invariants and invariance checks.

Points are dicts keyed by ``t, s, x, u, rho, p``; the Eulerian family simply
ignores ``s``. Every coefficient of ``rho`` and ``p`` depends on ``t``, ``rho``
and ``p`` only, so cell values can be mapped with their layer time alone.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields, replace as dc_replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import DomainError, GasModel, Layer, MassMesh
from .schemes import EXPLICIT_GAMMA3, POPOV_SAMARSKII, Trajectory, scheme_residuals

VARS = ("t", "s", "x", "u", "rho", "p")
EULER = "euler"
LAGRANGE = "lagrange"


def _z(pt):
    return 0.0 * np.asarray(pt["t"], dtype=float)


@dataclass(frozen=True)
class Generator:
    """Infinitesimal operator with a closed-form one-parameter flow.

    ``coefficients(pt)`` returns the components along ``VARS``;
    ``flow(pt, eps)`` is its exponential. ``projective`` marks flows that
    need ``1 - eps*t > 0``.
    """

    name: str
    system: str
    coefficients: Callable[[dict], dict]
    flow: Callable[[dict, float], dict]
    projective: bool = False

    def __call__(self, pt: dict) -> dict:
        return self.coefficients(pt)

    def at(self, eps: float) -> "FiniteTransform":
        return FiniteTransform(self, eps)


def _coeffs(**parts):
    def f(pt):
        z = _z(pt)
        return {v: (parts[v](pt) + z if v in parts else z) for v in VARS}
    return f


def _flow(**parts):
    def f(pt, e):
        return {v: (parts[v](pt, e) if v in parts else np.asarray(pt[v], dtype=float)) for v in VARS}
    return f


def _check_projective(pt, e):
    d = 1.0 - e * np.asarray(pt["t"], dtype=float)
    if np.any(d <= 0):
        raise DomainError(f"projective transform is singular: 1 - eps*t <= 0 for eps={e}")
    return d


def _projective_flow(pt, e):
    d = _check_projective(pt, e)
    t, x, u = (np.asarray(pt[k], dtype=float) for k in ("t", "x", "u"))
    return {"t": t / d, "s": np.asarray(pt["s"], dtype=float), "x": x / d, "u": u * d + e * x,
            "rho": np.asarray(pt["rho"], dtype=float) * d, "p": np.asarray(pt["p"], dtype=float) * d**3}


_PROJECTIVE_COEFFS = _coeffs(t=lambda p: p["t"] ** 2, x=lambda p: p["t"] * p["x"],
                             u=lambda p: p["x"] - p["t"] * p["u"], rho=lambda p: -p["t"] * p["rho"],
                             p=lambda p: -3.0 * p["t"] * p["p"])


def _common(system: str) -> dict:
    """The generators shared by both systems, keyed by their role."""
    lag = system == LAGRANGE
    exp = np.exp
    out = {
        "time": Generator("X1", system, _coeffs(t=lambda p: 1.0), _flow(t=lambda p, e: p["t"] + e)),
        "space": Generator("X2", system, _coeffs(x=lambda p: 1.0), _flow(x=lambda p, e: p["x"] + e)),
        "dilation": Generator(
            "X3", system,
            _coeffs(t=lambda p: p["t"], x=lambda p: p["x"], **({"s": lambda p: p["s"]} if lag else {})),
            _flow(t=lambda p, e: p["t"] * exp(e), x=lambda p, e: p["x"] * exp(e),
                  **({"s": lambda p, e: p["s"] * exp(e)} if lag else {}))),
        "galilei": Generator("X4", system, _coeffs(x=lambda p: p["t"], u=lambda p: 1.0),
                             _flow(x=lambda p, e: p["x"] + e * p["t"], u=lambda p, e: p["u"] + e)),
        "scaling": Generator(
            "X5", system,
            _coeffs(x=lambda p: p["x"], u=lambda p: p["u"], rho=lambda p: -2.0 * p["rho"],
                    **({"s": lambda p: -p["s"]} if lag else {})),
            _flow(x=lambda p, e: p["x"] * exp(e), u=lambda p, e: p["u"] * exp(e),
                  rho=lambda p, e: p["rho"] * exp(-2.0 * e),
                  **({"s": lambda p, e: p["s"] * exp(-e)} if lag else {}))),
        "thermal": Generator(
            "X6", system,
            _coeffs(rho=lambda p: p["rho"], p=lambda p: p["p"], **({"s": lambda p: p["s"]} if lag else {})),
            _flow(rho=lambda p, e: p["rho"] * exp(e), p=lambda p, e: p["p"] * exp(e),
                  **({"s": lambda p, e: p["s"] * exp(e)} if lag else {}))),
    }
    return out


def euler_generators(gamma: Optional[float] = None) -> list[Generator]:
    """``X1 ... X6``, plus the projective ``X7`` when ``gamma == 3``."""
    gens = list(_common(EULER).values())
    if gamma is not None and float(gamma) == 3.0:
        gens.append(Generator("X7", EULER, _PROJECTIVE_COEFFS, _projective_flow, projective=True))
    return gens


def lagrange_generators(gamma: Optional[float] = None) -> list[Generator]:
    """``X1 ... X6``, the mass shift ``X7``, plus the projective ``X8`` when ``gamma == 3``."""
    gens = list(_common(LAGRANGE).values())
    gens.append(Generator("X7", LAGRANGE, _coeffs(s=lambda p: 1.0), _flow(s=lambda p, e: p["s"] + e)))
    if gamma is not None and float(gamma) == 3.0:
        gens.append(Generator("X8", LAGRANGE, _PROJECTIVE_COEFFS, _projective_flow, projective=True))
    return gens


def generator(name: str, system: str = LAGRANGE) -> Generator:
    gens = lagrange_generators(3.0) if system == LAGRANGE else euler_generators(3.0)
    for g in gens:
        if g.name == name:
            return g
    raise KeyError(f"no generator {name!r} in the {system} family")


@dataclass(frozen=True)
class FiniteTransform:
    generator: Generator
    eps: float

    def __call__(self, pt: dict) -> dict:
        full = {v: pt.get(v, 0.0) for v in VARS}
        out = self.generator.flow(full, float(self.eps))
        return {k: out[k] for k in pt}

    def compose(self, other: "FiniteTransform") -> "FiniteTransform":
        if other.generator.name != self.generator.name or other.generator.system != self.generator.system:
            raise ValueError("only transforms of one generator compose into a single flow")
        return FiniteTransform(self.generator, self.eps + other.eps)


def rk4_flow(gen: Generator, pt: dict, eps: float, n_steps: int = 1000) -> dict:
    """Integrate ``dz/de = coefficients(z)`` from 0 to ``eps`` with classical RK4."""
    z = {v: np.asarray(pt.get(v, 0.0), dtype=float) + 0.0 for v in VARS}
    h = eps / n_steps

    def add(a, k, c):
        return {v: a[v] + c * k[v] for v in VARS}

    for _ in range(n_steps):
        k1 = gen.coefficients(z)
        k2 = gen.coefficients(add(z, k1, 0.5 * h))
        k3 = gen.coefficients(add(z, k2, 0.5 * h))
        k4 = gen.coefficients(add(z, k3, h))
        z = {v: z[v] + h / 6.0 * (k1[v] + 2 * k2[v] + 2 * k3[v] + k4[v]) for v in VARS}
    return {k: z[k] for k in pt}


def transform_oracle_error(gen: Generator, points: dict, eps: float, n_steps: int = 1000) -> float:
    """Max relative gap between the closed-form flow and RK4 integration."""
    tr = FiniteTransform(gen, eps)
    exact = tr(points)
    num = rk4_flow(gen, points, eps, n_steps)
    return max(float(np.max(np.abs(exact[k] - num[k]) / (1.0 + np.abs(exact[k])))) for k in points)


def default_eps_grid(gen: Generator) -> np.ndarray:
    bound = 0.2 if gen.projective else 0.5
    return np.linspace(-bound, bound, 11)


# --- acting on discrete data ----------------------------------------------------

def _map_layer(tr: FiniteTransform, layer: Layer) -> Layer:
    t = np.asarray(layer.t, dtype=float)
    nodes = tr.generator.flow({"t": t, "s": 0.0, "x": layer.x, "u": layer.u, "rho": 1.0, "p": 1.0}, tr.eps)
    cells = tr.generator.flow({"t": t, "s": 0.0, "x": 0.0, "u": 0.0, "rho": layer.rho, "p": layer.p}, tr.eps)
    rho, p = cells["rho"], cells["p"]
    # internal energy scales like p/rho; mapping it keeps the scheme's own values
    eps_int = layer.eps * (p / layer.p) * (layer.rho / rho)
    return Layer(float(nodes["t"]), nodes["x"], nodes["u"], rho, p, eps_int)


def _map_mesh(tr: FiniteTransform, mesh: MassMesh) -> MassMesh:
    out = tr.generator.flow({"t": 0.0, "s": mesh.s, "x": 0.0, "u": 0.0, "rho": 1.0, "p": 1.0}, tr.eps)
    return MassMesh(out["s"] * np.ones_like(mesh.s))


def apply_transform(tr: FiniteTransform, data):
    """Map a ``Layer``, ``MassMesh``, ``Trajectory`` or stencil window by ``tr``.

    Trajectories get their mesh mapped too. Raises ``DomainError`` for a
    projective flow whose ``1 - eps*t`` vanishes anywhere on the data.
    """
    if isinstance(data, Layer):
        return _map_layer(tr, data)
    if isinstance(data, MassMesh):
        return _map_mesh(tr, data)
    if isinstance(data, Trajectory):
        layers = [_map_layer(tr, L) for L in data.layers]
        return Trajectory(layers, list(data.steps), _map_mesh(tr, data.mesh), data.model, data.cfg,
                          data.bc, data.scheme, dict(data.records))
    if isinstance(data, (EulerWindow, LagrangeWindow)):
        return data.transformed(tr)
    raise TypeError(f"cannot transform {type(data).__name__}")


# --- stencil windows -------------------------------------------------------------

def _apply_to_layer_vars(tr, t, nodes: dict, cells: dict):
    """Map node pairs ``{name: (x, u)}`` and cell pairs ``{name: (rho, p)}`` at time ``t``."""
    out = {}
    for name, (x, u) in nodes.items():
        r = tr.generator.flow({"t": t, "s": 0.0, "x": x, "u": u, "rho": 1.0, "p": 1.0}, tr.eps)
        out[name] = (float(r["x"]), float(r["u"]))
    for name, (rho, p) in cells.items():
        r = tr.generator.flow({"t": t, "s": 0.0, "x": 0.0, "u": 0.0, "rho": rho, "p": p}, tr.eps)
        out[name] = (float(r["rho"]), float(r["p"]))
    t_new = float(tr.generator.flow({"t": t, "s": 0.0, "x": 0.0, "u": 0.0, "rho": 1.0, "p": 1.0}, tr.eps)["t"])
    return t_new, out


@dataclass(frozen=True)
class EulerWindow:
    """Two-layer Eulerian stencil around the node pair ``(x, x+)``.

    Cell values follow the staggered convention: ``rho`` sits between ``x``
    and ``x+`` and ``rho_p`` in the next cell, matching the ``+`` neighbours
    that appear in the invariants.
    """

    t: float
    t_hat: float
    x: float
    x_p: float
    x_hat: float
    x_hat_p: float
    u: float
    u_p: float
    u_hat: float
    u_hat_p: float
    rho: float
    rho_p: float
    rho_hat: float
    rho_hat_p: float
    p: float
    p_p: float
    p_hat: float
    p_hat_p: float

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "EulerWindow":
        return cls(*map(float, v))

    def transformed(self, tr: FiniteTransform) -> "EulerWindow":
        t, old = _apply_to_layer_vars(tr, self.t, {"n": (self.x, self.u), "np": (self.x_p, self.u_p)},
                                      {"c": (self.rho, self.p), "cp": (self.rho_p, self.p_p)})
        th, new = _apply_to_layer_vars(tr, self.t_hat,
                                       {"n": (self.x_hat, self.u_hat), "np": (self.x_hat_p, self.u_hat_p)},
                                       {"c": (self.rho_hat, self.p_hat), "cp": (self.rho_hat_p, self.p_hat_p)})
        return EulerWindow(t, th, old["n"][0], old["np"][0], new["n"][0], new["np"][0],
                           old["n"][1], old["np"][1], new["n"][1], new["np"][1],
                           old["c"][0], old["cp"][0], new["c"][0], new["cp"][0],
                           old["c"][1], old["cp"][1], new["c"][1], new["cp"][1])


@dataclass(frozen=True)
class LagrangeWindow:
    """The 21 stencil variables at node ``i``: ``rho`` is the cell to its right, ``rho_m`` to its left."""

    t: float
    t_hat: float
    s: float
    s_p: float
    s_m: float
    u: float
    u_p: float
    u_hat: float
    u_hat_p: float
    x: float
    x_p: float
    x_hat: float
    x_hat_p: float
    rho: float
    rho_m: float
    rho_hat: float
    rho_hat_m: float
    p: float
    p_m: float
    p_hat: float
    p_hat_m: float

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "LagrangeWindow":
        return cls(*map(float, v))

    @classmethod
    def names(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    def transformed(self, tr: FiniteTransform) -> "LagrangeWindow":
        t, old = _apply_to_layer_vars(tr, self.t, {"n": (self.x, self.u), "np": (self.x_p, self.u_p)},
                                      {"c": (self.rho, self.p), "cm": (self.rho_m, self.p_m)})
        th, new = _apply_to_layer_vars(tr, self.t_hat,
                                       {"n": (self.x_hat, self.u_hat), "np": (self.x_hat_p, self.u_hat_p)},
                                       {"c": (self.rho_hat, self.p_hat), "cm": (self.rho_hat_m, self.p_hat_m)})
        s = tr.generator.flow({"t": 0.0, "s": np.array([self.s, self.s_p, self.s_m]), "x": 0.0, "u": 0.0,
                               "rho": 1.0, "p": 1.0}, tr.eps)["s"] * np.ones(3)
        return LagrangeWindow(t, th, float(s[0]), float(s[1]), float(s[2]),
                              old["n"][1], old["np"][1], new["n"][1], new["np"][1],
                              old["n"][0], old["np"][0], new["n"][0], new["np"][0],
                              old["c"][0], old["cm"][0], new["c"][0], new["cm"][0],
                              old["c"][1], old["cm"][1], new["c"][1], new["cm"][1])


def _check_window(tau, *steps):
    if not tau > 0:
        raise DomainError("stencil needs t_hat > t")
    if any(not h > 0 for h in steps):
        raise DomainError("stencil steps must be positive")


def lagrange_window(old: Layer, new: Layer, mesh: MassMesh, i: int) -> LagrangeWindow:
    """Window at node ``i`` (needs ``1 <= i <= n_cells - 1``)."""
    n = mesh.n_cells
    if not 1 <= i <= n - 1:
        raise IndexError(f"node {i} has no full stencil on {n} cells")
    s = mesh.s
    return LagrangeWindow(old.t, new.t, s[i], s[i + 1], s[i - 1],
                          old.u[i], old.u[i + 1], new.u[i], new.u[i + 1],
                          old.x[i], old.x[i + 1], new.x[i], new.x[i + 1],
                          old.rho[i], old.rho[i - 1], new.rho[i], new.rho[i - 1],
                          old.p[i], old.p[i - 1], new.p[i], new.p[i - 1])


def euler_window(old: Layer, new: Layer, i: int) -> EulerWindow:
    """Eulerian window at node ``i`` (needs ``0 <= i <= n_cells - 2``)."""
    n = old.n_cells
    if not 0 <= i <= n - 2:
        raise IndexError(f"node {i} has no full Eulerian stencil on {n} cells")
    return EulerWindow(old.t, new.t, old.x[i], old.x[i + 1], new.x[i], new.x[i + 1],
                       old.u[i], old.u[i + 1], new.u[i], new.u[i + 1],
                       old.rho[i], old.rho[i + 1], new.rho[i], new.rho[i + 1],
                       old.p[i], old.p[i + 1], new.p[i], new.p[i + 1])


def trajectory_windows(traj: Trajectory, j: int, kind: str = LAGRANGE) -> list:
    """All full windows between stored layers ``j`` and ``j + 1``."""
    old, new = traj.layers[j], traj.layers[j + 1]
    if kind == LAGRANGE:
        return [lagrange_window(old, new, traj.mesh, i) for i in range(1, traj.mesh.n_cells)]
    return [euler_window(old, new, i) for i in range(0, old.n_cells - 1)]


# --- invariants ------------------------------------------------------------------

def _sqrt(v, what):
    if not v > 0:
        raise DomainError(f"nonpositive radicand in {what}: {v!r}")
    return float(np.sqrt(v))


def _ratio(a, b, what):
    if not b > 0 or not a > 0:
        raise DomainError(f"ratio {what} needs positive entries, got {a!r}/{b!r}")
    return a / b


def euler_invariants(w: EulerWindow) -> np.ndarray:
    """The 12 Eulerian stencil invariants in their conventional order."""
    tau = w.t_hat - w.t
    h, hh = w.x_p - w.x, w.x_hat_p - w.x_hat
    _check_window(tau, h, hh)
    q = _sqrt(_ratio(w.rho, w.p, "rho/p"), "sqrt(rho/p)")
    return np.array([
        hh / h,
        tau / h * _sqrt(w.p / w.rho, "sqrt(p/rho)"),
        q * ((w.x_hat - w.x) / tau - w.u),
        q * (w.u_p - w.u),
        q * (w.u_hat - w.u),
        q * (w.u_hat_p - w.u_hat),
        _ratio(w.p_p, w.p, "p+/p"),
        _ratio(w.p_hat, w.p, "p^/p"),
        _ratio(w.p_hat_p, w.p_hat, "p^+/p^"),
        _ratio(w.rho_hat, w.rho, "rho^/rho"),
        _ratio(w.rho_hat_p, w.rho_hat, "rho^+/rho^"),
        _ratio(w.rho_p, w.rho_hat, "rho+/rho^"),
    ])


def lagrange_invariants_general(w: LagrangeWindow) -> np.ndarray:
    """``I1 ... I14`` for the seven Lagrangian generators."""
    tau = w.t_hat - w.t
    h, hm = w.s_p - w.s, w.s - w.s_m
    _check_window(tau, h, hm)
    q = _sqrt(_ratio(w.rho, w.p, "rho/p"), "sqrt(rho/p)")
    v = (w.x_hat - w.x) / tau
    return np.array([
        hm / h,
        tau / h * _sqrt(w.rho * w.p, "sqrt(rho p)"),
        q * (v - w.u),
        q * (v - w.u_hat),
        q * (w.u_p - w.u),
        q * (w.u_hat_p - w.u_hat),
        w.rho * (w.x_p - w.x) / h,
        w.rho_hat * (w.x_hat_p - w.x_hat) / h,
        _ratio(w.rho_m, w.rho, "rho-/rho"),
        _ratio(w.rho_hat, w.rho, "rho^/rho"),
        _ratio(w.rho_hat_m, w.rho_hat, "rho^-/rho^"),
        _ratio(w.p_m, w.p, "p-/p"),
        _ratio(w.p_hat, w.p, "p^/p"),
        _ratio(w.p_hat_m, w.p_hat, "p^-/p^"),
    ])


def lagrange_invariants_gamma3(w: LagrangeWindow) -> np.ndarray:
    """``J1 ... J13``, which are also invariant under the projective generator."""
    tau = w.t_hat - w.t
    h, hm = w.s_p - w.s, w.s - w.s_m
    _check_window(tau, h, hm)
    q = _sqrt(_ratio(w.rho, w.p, "rho/p"), "sqrt(rho/p)")
    qh = _sqrt(_ratio(w.rho_hat, w.p_hat, "rho^/p^"), "sqrt(rho^/p^)")
    prod = w.rho * w.p * w.rho_hat * w.p_hat
    if not prod > 0:
        raise DomainError("nonpositive radicand in J2")
    v = (w.x_hat - w.x) / tau
    return np.array([
        hm / h,
        tau / h * prod**0.25,
        q * (v - w.u),
        qh * (v - w.u_hat),
        q * ((w.x_p - w.x) / tau + w.u_p - w.u),
        qh * (-(w.x_hat_p - w.x_hat) / tau + w.u_hat_p - w.u_hat),
        w.rho * (w.x_p - w.x) / h,
        w.rho_hat * (w.x_hat_p - w.x_hat) / h,
        _ratio(w.p_hat, w.p, "p^/p") * _ratio(w.rho, w.rho_hat, "rho/rho^") ** 3,
        _ratio(w.rho_m, w.rho, "rho-/rho"),
        _ratio(w.rho_hat_m, w.rho_hat, "rho^-/rho^"),
        _ratio(w.p_m, w.p, "p-/p"),
        _ratio(w.p_hat_m, w.p_hat, "p^-/p^"),
    ])


INVARIANT_FAMILIES = {
    "euler": (euler_invariants, EulerWindow),
    "lagrange": (lagrange_invariants_general, LagrangeWindow),
    "gamma3": (lagrange_invariants_gamma3, LagrangeWindow),
}


def family_generators(family: str) -> list[Generator]:
    """The symmetry set under which a family is invariant."""
    if family == "euler":
        return euler_generators()
    if family == "lagrange":
        return lagrange_generators()
    if family == "gamma3":
        return lagrange_generators(3.0)
    raise KeyError(family)


def jacobian_rank(family: str, w, step: float = 1e-6, rtol: float = 1e-7) -> int:
    """Numerical rank of the invariant map's Jacobian at window ``w``."""
    f, cls = INVARIANT_FAMILIES[family]
    v0 = w.as_vector()
    cols = []
    for k in range(v0.size):
        d = step * max(1.0, abs(v0[k]))
        vp, vm = v0.copy(), v0.copy()
        vp[k] += d
        vm[k] -= d
        cols.append((f(cls.from_vector(vp)) - f(cls.from_vector(vm))) / (2 * d))
    jac = np.array(cols).T
    sv = np.linalg.svd(jac, compute_uv=False)
    return int(np.sum(sv > rtol * sv[0]))


def random_lagrange_window(rng: np.random.Generator) -> LagrangeWindow:
    """A generic window with positive steps, densities and pressures."""
    t = rng.uniform(0.0, 1.0)
    s = rng.uniform(0.5, 1.5)
    h, hm = rng.uniform(0.05, 0.2, 2)
    x, dx, dxh = rng.uniform(-1, 1), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3)
    tau = rng.uniform(0.01, 0.1)
    u = rng.uniform(-1, 1, 4)
    rp = rng.uniform(0.5, 2.0, 8)
    return LagrangeWindow(t, t + tau, s, s + h, s - hm, *u, x, x + dx,
                          x + tau * rng.uniform(-1, 1), x + tau * rng.uniform(-1, 1) + dxh, *rp)


def random_euler_window(rng: np.random.Generator) -> EulerWindow:
    t = rng.uniform(0.0, 1.0)
    tau = rng.uniform(0.01, 0.1)
    x, dx, dxh = rng.uniform(-1, 1), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3)
    xh = x + tau * rng.uniform(-1, 1)
    return EulerWindow(t, t + tau, x, x + dx, xh, xh + dxh, *rng.uniform(-1, 1, 4), *rng.uniform(0.5, 2.0, 8))


def orbit_deviation(family: str, w, gen: Generator, eps: float) -> float:
    """Max relative change of the family's invariants after moving ``w`` along ``gen``."""
    f, _ = INVARIANT_FAMILIES[family]
    a = f(w)
    b = f(w.transformed(FiniteTransform(gen, eps)))
    return float(np.max(np.abs(b - a) / np.maximum(1.0, np.abs(a))))


# --- schemes written in invariants ---------------------------------------------------

def scheme_in_invariants_residual(scheme_id: str, w: LagrangeWindow, alpha: float = 0.5,
                                  model: Optional[GasModel] = None) -> np.ndarray:
    """Residuals of the scheme's four equations expressed through stencil invariants."""
    if scheme_id == POPOV_SAMARSKII:
        if model is None:
            raise ValueError("the weighted scheme needs a gas model")
        I = lagrange_invariants_general(w)
        I2, I3, I4, I5, I6, I10, I12, I13, I14 = (I[k - 1] for k in (2, 3, 4, 5, 6, 10, 12, 13, 14))
        a, g = alpha, model.gamma
        du = 0.5 * (I5 + I6)
        return np.array([
            1.0 / I10 - 1.0 - I2 * du,
            I3 - I4 + I2 * (a * (I13 - I13 * I14) + (1.0 - a) * (1.0 - I12)),
            (I13 / I10 - 1.0) / (g - 1.0) + I2 * (a * I13 + 1.0 - a) * du,
            I3 + I4,
        ])
    if scheme_id == EXPLICIT_GAMMA3:
        J = lagrange_invariants_gamma3(w)
        J2, J3, J4, J7, J8, J9, J12 = (J[k - 1] for k in (2, 3, 4, 7, 8, 9, 12))
        return np.array([J7 - J8, J4 - J2 * J9 ** -0.75 * (1.0 - J12), J9 - 1.0, J3])
    raise ValueError(f"unknown scheme {scheme_id!r}")


# --- invariant mesh criterion ---------------------------------------------------------

@dataclass(frozen=True)
class MeshWindow:
    """Two neighbouring mesh nodes on two time layers.

    ``velocity`` is the mesh speed ``(x_hat - x)/tau`` when the mesh follows
    the flow; ``None`` means the lines ``x = const`` are mesh lines.
    """

    t: float
    t_hat: float
    x: float
    x_p: float
    velocity: Optional[float] = None

    @property
    def x_hat(self) -> float:
        return self.x + (self.t_hat - self.t) * (self.velocity or 0.0)


def mesh_invariance_residual(gen: Generator, w: MeshWindow) -> float:
    """``D_{+h} xi^t + D_{+tau} xi^x`` on the window.

    For a mesh moving with the flow the time derivative of ``xi^x`` is taken
    along the moving node and the change of the mesh equation
    ``(x_hat - x)/tau = u`` is subtracted, so the value is zero whenever the
    flow maps such meshes to such meshes.
    """
    tau, h = w.t_hat - w.t, w.x_p - w.x
    if not tau > 0 or not h > 0:
        raise DomainError("mesh window needs positive tau and h")
    vel = 0.0 if w.velocity is None else float(w.velocity)

    def c(t, x):
        return gen.coefficients({"t": t, "s": 0.0, "x": x, "u": vel, "rho": 1.0, "p": 1.0})

    c0, c_right, c_up = c(w.t, w.x), c(w.t, w.x_p), c(w.t_hat, w.x_hat)
    res = (c_right["t"] - c0["t"]) / h + (c_up["x"] - c0["x"]) / tau
    if w.velocity is not None:
        res = res - vel * (c_up["t"] - c0["t"]) / tau - c0["u"]
    return float(res)


# --- invariance defect harness -----------------------------------------------------

def trajectory_defect(traj: Trajectory, alpha: Optional[float] = None) -> float:
    """Max scheme residual over consecutive stored layers, boundary momentum excluded.

    Boundary nodes are left out because prescribed boundary data are not
    carried along by the group action.
    """
    if alpha is None:
        alpha = traj.cfg.alpha
    worst = 0.0
    for old, new in zip(traj.layers[:-1], traj.layers[1:]):
        res = scheme_residuals(traj.scheme, old, new, traj.mesh, traj.model, alpha, traj.bc)
        for key, r in res.items():
            r = r[1:-1] if key == "momentum" else r
            worst = max(worst, float(np.max(np.abs(r))))
    return worst


def _check_dense(traj: Trajectory):
    if list(traj.steps) != list(range(traj.steps[0], traj.steps[0] + len(traj.steps))):
        raise ValueError("invariance harness needs every layer stored (stride 1)")


def scheme_invariance_defect(scheme_id: str, gen: Generator, eps_grid: Optional[Iterable[float]],
                             base: Trajectory) -> list[tuple[float, float]]:
    """``(eps, defect)`` pairs: scheme residual of the transformed trajectory."""
    if base.scheme != scheme_id:
        raise ValueError(f"trajectory was produced by {base.scheme!r}, not {scheme_id!r}")
    _check_dense(base)
    grid = default_eps_grid(gen) if eps_grid is None else eps_grid
    return [(float(e), trajectory_defect(apply_transform(FiniteTransform(gen, float(e)), base)))
            for e in grid]


DEFECT_HEADER = ("generator", "epsilon", "max_residual")


def write_defect_csv(path, rows: Sequence[tuple[str, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(DEFECT_HEADER)
        for name, e, d in rows:
            wr.writerow([name, repr(float(e)), repr(float(d))])


# --- kernel of the potential-equation symmetries --------------------------------------

def restricted_action(gen, t, s, x) -> np.ndarray:
    """Components along ``(t, s, x)``; works for generators and potential-equation operators."""
    if isinstance(gen, Generator):
        c = gen.coefficients({"t": t, "s": s, "x": x, "u": 0.0, "rho": 1.0, "p": 1.0})
        return np.stack([c["t"] + 0 * s, c["s"] + 0 * s, c["x"] + 0 * s])
    return np.stack([gen.xi_t(t, s, x) + 0 * s, gen.xi_s(t, s, x) + 0 * s, gen.eta(t, s, x) + 0 * s])


def express_in_generators(potential_gen, gens: Sequence[Generator], rng=None, n_points: int = 50):
    """Least-squares coefficients writing a potential-equation operator in ``gens``.

    The potential is identified with the particle position, so the action on
    ``(t, s, phi)`` is compared with the action on ``(t, s, x)``. Returns
    ``(coefficients, residual)``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    t, s, x = rng.uniform(0.1, 2.0, (3, n_points))
    target = restricted_action(potential_gen, t, s, x).ravel()
    basis = np.stack([restricted_action(g, t, s, x).ravel() for g in gens], axis=1)
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    resid = float(np.max(np.abs(basis @ coef - target)))
    return coef, resid
