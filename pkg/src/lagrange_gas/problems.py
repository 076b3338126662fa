"""Initial data for the solvers and an exact Riemann solution used as oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    BoundaryCondition,
    DomainError,
    EntropyProfile,
    GasModel,
    Layer,
    MassMesh,
    PrescribedPressure,
)


@dataclass(frozen=True)
class ProblemSpec:
    """A named initial-boundary value problem in mass coordinates.

    ``kind`` and ``params`` identify the constructor; the field functions
    are rebuilt from them, which keeps the spec serialisable.
    """

    name: str
    gamma: float
    profile: EntropyProfile
    s_min: float
    s_max: float
    n: int
    rho0: Callable = field(compare=False, repr=False)
    u0: Callable = field(compare=False, repr=False)
    p0: Callable = field(compare=False, repr=False)
    bc: BoundaryCondition = field(default_factory=BoundaryCondition.walls)
    t_final: float = 0.0
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    @property
    def model(self) -> GasModel:
        return GasModel(self.gamma)

    @property
    def mesh(self) -> MassMesh:
        return MassMesh.uniform(self.s_min, self.s_max, self.n)

    def initial_layer(self, t0: float = 0.0) -> Layer:
        """Sample the fields; positions follow from ``x_{i+1} = x_i + h_i/rho_i``."""
        mesh = self.mesh
        sc = mesh.centers
        rho = np.asarray(self.rho0(sc), dtype=float) * np.ones_like(sc)
        p = np.asarray(self.p0(sc), dtype=float) * np.ones_like(sc)
        u = np.asarray(self.u0(mesh.s), dtype=float) * np.ones_like(mesh.s)
        if np.any(rho <= 0) or np.any(p <= 0):
            raise DomainError(f"problem {self.name!r} has nonpositive initial density or pressure")
        x = np.concatenate(([0.0], np.cumsum(mesh.h / rho)))
        return Layer.from_state(t0, x, u, rho, p, self.model)

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise TypeError("custom problems carry arbitrary callables and cannot be serialised")
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        d = dict(d)
        kind = d.pop("kind")
        builders = {"constant_state": constant_state, "sod_tube": sod_tube, "smooth_wave": smooth_wave}
        if kind not in builders:
            raise ValueError(f"unknown problem kind {kind!r}")
        if "profile" in d and isinstance(d["profile"], dict):
            d["profile"] = EntropyProfile.from_dict(d["profile"])
        return builders[kind](**d)


def constant_state(rho: float, p: float, u: float, gamma: float, n: int, *,
                   s_min: float = 0.0, s_max: float = 1.0, t_final: float = 0.0) -> ProblemSpec:
    """Uniform state. Moving gas gets pressure boundaries so it can translate freely."""
    if not (rho > 0 and p > 0):
        raise DomainError("constant state needs positive density and pressure")
    bc = BoundaryCondition.walls() if u == 0 else BoundaryCondition(PrescribedPressure(p), PrescribedPressure(p))
    model = GasModel(gamma)
    profile = EntropyProfile.constant(p / rho**model.gamma)
    params = dict(rho=rho, p=p, u=u, gamma=gamma, n=n, s_min=s_min, s_max=s_max, t_final=t_final)
    return ProblemSpec("constant_state", gamma, profile, s_min, s_max, n,
                       lambda s: np.full_like(s, rho, dtype=float),
                       lambda s: np.full_like(s, u, dtype=float),
                       lambda s: np.full_like(s, p, dtype=float),
                       bc, t_final, "constant_state", params)


def sod_tube(gamma: float = 1.4, n: int = 100, *, t_final: float = 0.25) -> ProblemSpec:
    """Two-state shock tube on ``s`` in [0, 1], split at mid-mass, rigid walls."""
    if n % 2:
        raise DomainError("sod_tube needs an even number of cells")
    mid = 0.5

    def rho0(s):
        return np.where(np.asarray(s) < mid, 1.0, 0.125)

    def p0(s):
        return np.where(np.asarray(s) < mid, 1.0, 0.1)

    return ProblemSpec("sod_tube", gamma, EntropyProfile.constant(1.0), 0.0, 1.0, n,
                       rho0, lambda s: np.zeros_like(s, dtype=float), p0,
                       BoundaryCondition.walls(), t_final, "sod_tube",
                       dict(gamma=gamma, n=n, t_final=t_final))


def smooth_wave(gamma: float, profile: Optional[EntropyProfile] = None, amplitude: float = 0.1,
                n: int = 64, *, s_min: Optional[float] = None, s_max: Optional[float] = None,
                boundary: str = "pressure", t_final: float = 0.1) -> ProblemSpec:
    """One sine period of density on a resting gas with ``p = S(s) rho**gamma``.

    ``boundary='pressure'`` holds the ghost pressure at its initial value
    (evaluated at the ghost-cell centre); ``'wall'`` uses rigid walls.
    Power profiles default to ``s`` in [1, 2] so that ``s > 0``.
    """
    profile = profile or EntropyProfile.constant(1.0)
    if not 0 <= amplitude < 1:
        raise DomainError("amplitude must lie in [0, 1)")
    if s_min is None:
        s_min = 1.0 if profile.kind == "power" else 0.0
    if s_max is None:
        s_max = s_min + 1.0
    length = s_max - s_min
    g = float(gamma)

    def rho0(s):
        return 1.0 + amplitude * np.sin(2.0 * np.pi * (np.asarray(s) - s_min) / length)

    def p0(s):
        return profile(s) * rho0(s) ** g

    h = length / n
    if boundary == "pressure":
        bc = BoundaryCondition(PrescribedPressure(float(p0(s_min - 0.5 * h))),
                               PrescribedPressure(float(p0(s_max + 0.5 * h))))
    elif boundary == "wall":
        bc = BoundaryCondition.walls()
    else:
        raise ValueError(f"unknown boundary option {boundary!r}")
    profile.check_domain(np.array([s_min - 0.5 * h, s_max + 0.5 * h]))
    params = dict(gamma=gamma, profile=profile.to_dict(), amplitude=amplitude, n=n,
                  s_min=s_min, s_max=s_max, boundary=boundary, t_final=t_final)
    return ProblemSpec("smooth_wave", g, profile, s_min, s_max, n,
                       rho0, lambda s: np.zeros_like(s, dtype=float), p0,
                       bc, t_final, "smooth_wave", params)


# --- exact Riemann solver --------------------------------------------------
# Kept free of any import from the schemes so it can act as an independent oracle.

class RiemannError(RuntimeError):
    pass


@dataclass(frozen=True)
class StarState:
    p: float
    u: float
    iterations: int
    residual: float


def _pressure_function(p, rho_k, p_k, c_k, gamma):
    """Velocity jump across one wave and its derivative in the star pressure."""
    if p > p_k:  # shock
        a = 2.0 / ((gamma + 1.0) * rho_k)
        b = (gamma - 1.0) / (gamma + 1.0) * p_k
        root = math.sqrt(a / (p + b))
        f = (p - p_k) * root
        df = root * (1.0 - 0.5 * (p - p_k) / (b + p))
    else:  # rarefaction
        expo = (gamma - 1.0) / (2.0 * gamma)
        f = 2.0 * c_k / (gamma - 1.0) * ((p / p_k) ** expo - 1.0)
        df = (p / p_k) ** (-(gamma + 1.0) / (2.0 * gamma)) / (rho_k * c_k)
    return f, df


def riemann_star(gamma: float, left, right, tol: float = 1e-12, max_iter: int = 50) -> StarState:
    """Star-region pressure and velocity by Newton iteration."""
    rl, ul, pl = map(float, left)
    rr, ur, pr = map(float, right)
    if min(rl, pl, rr, pr) <= 0:
        raise DomainError("Riemann states must have positive density and pressure")
    cl, cr = math.sqrt(gamma * pl / rl), math.sqrt(gamma * pr / rr)
    if 2.0 / (gamma - 1.0) * (cl + cr) <= ur - ul:
        raise RiemannError("data generate vacuum; not supported")
    # two-rarefaction guess
    expo = (gamma - 1.0) / (2.0 * gamma)
    p = ((cl + cr - 0.5 * (gamma - 1.0) * (ur - ul)) / (cl / pl**expo + cr / pr**expo)) ** (1.0 / expo)
    p = max(p, 1e-8 * min(pl, pr))
    for it in range(1, max_iter + 1):
        fl, dfl = _pressure_function(p, rl, pl, cl, gamma)
        fr, dfr = _pressure_function(p, rr, pr, cr, gamma)
        g = fl + fr + ur - ul
        p_new = max(p - g / (dfl + dfr), 1e-12 * min(pl, pr))
        change = abs(p_new - p) / (0.5 * (p_new + p))
        p = p_new
        if change < tol:
            fl, _ = _pressure_function(p, rl, pl, cl, gamma)
            fr, _ = _pressure_function(p, rr, pr, cr, gamma)
            return StarState(p, 0.5 * (ul + ur + fr - fl), it, abs(fl + fr + ur - ul))
    raise RiemannError(f"Newton iteration for the star pressure failed after {max_iter} iterations")


def exact_riemann(gamma: float, left, right, xi):
    """Self-similar solution ``(rho, u, p)`` sampled at ``xi = (x - x0)/t``."""
    rl, ul, pl = map(float, left)
    rr, ur, pr = map(float, right)
    star = riemann_star(gamma, left, right)
    ps, us = star.p, star.u
    g = gamma
    gm, gp = (g - 1.0) / (g + 1.0), (g + 1.0) / (2.0 * g)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rho, u, p = np.empty_like(xi), np.empty_like(xi), np.empty_like(xi)
    cl, cr = math.sqrt(g * pl / rl), math.sqrt(g * pr / rr)
    for k, z in enumerate(xi):
        if z <= us:
            if ps > pl:
                sl = ul - cl * math.sqrt(gp * ps / pl + (g - 1.0) / (2.0 * g))
                if z <= sl:
                    rho[k], u[k], p[k] = rl, ul, pl
                else:
                    rho[k], u[k], p[k] = rl * (ps / pl + gm) / (gm * ps / pl + 1.0), us, ps
            else:
                c_star = cl * (ps / pl) ** ((g - 1.0) / (2.0 * g))
                if z <= ul - cl:
                    rho[k], u[k], p[k] = rl, ul, pl
                elif z >= us - c_star:
                    rho[k], u[k], p[k] = rl * (ps / pl) ** (1.0 / g), us, ps
                else:
                    fac = 2.0 / (g + 1.0) + gm / cl * (ul - z)
                    rho[k] = rl * fac ** (2.0 / (g - 1.0))
                    u[k] = 2.0 / (g + 1.0) * (cl + 0.5 * (g - 1.0) * ul + z)
                    p[k] = pl * fac ** (2.0 * g / (g - 1.0))
        else:
            if ps > pr:
                sr = ur + cr * math.sqrt(gp * ps / pr + (g - 1.0) / (2.0 * g))
                if z >= sr:
                    rho[k], u[k], p[k] = rr, ur, pr
                else:
                    rho[k], u[k], p[k] = rr * (ps / pr + gm) / (gm * ps / pr + 1.0), us, ps
            else:
                c_star = cr * (ps / pr) ** ((g - 1.0) / (2.0 * g))
                if z >= ur + cr:
                    rho[k], u[k], p[k] = rr, ur, pr
                elif z <= us + c_star:
                    rho[k], u[k], p[k] = rr * (ps / pr) ** (1.0 / g), us, ps
                else:
                    fac = 2.0 / (g + 1.0) - gm / cr * (ur - z)
                    rho[k] = rr * fac ** (2.0 / (g - 1.0))
                    u[k] = 2.0 / (g + 1.0) * (-cr + 0.5 * (g - 1.0) * ur + z)
                    p[k] = pr * fac ** (2.0 * g / (g - 1.0))
    return rho, u, p
