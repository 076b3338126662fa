"""Gas model, entropy profiles, mass mesh and the staggered time layer.

Nodes carry the particle position ``x`` and velocity ``u``; cells (the
midpoints between nodes) carry density, pressure and internal energy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain where the formula is defined."""


class ShapeError(ValueError):
    """Array dimensions of a layer and a mesh do not agree."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GasModel:
    """Polytropic gas ``p = S rho**gamma``."""

    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not np.isfinite(g) or g == 0.0 or g == 1.0:
            raise DomainError(f"gamma must be finite and not 0 or 1, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    def internal_energy(self, rho, p):
        return internal_energy(self, rho, p)

    def pressure(self, rho, eps):
        """Invert the closure: ``p = (gamma - 1) rho eps``."""
        return (self.gamma - 1.0) * np.asarray(rho, dtype=float) * eps

    def entropy(self, rho, p):
        return entropy_of(self, rho, p)


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise DomainError("density must be positive")
    return rho


def internal_energy(model: GasModel, rho, p):
    """Internal energy ``p / ((gamma - 1) rho)``; works elementwise on arrays."""
    rho = _check_rho(rho)
    out = np.asarray(p, dtype=float) / ((model.gamma - 1.0) * rho)
    return out if out.ndim else float(out)


def entropy_of(model: GasModel, rho, p):
    """Entropy function ``S = p / rho**gamma``."""
    rho = _check_rho(rho)
    out = np.asarray(p, dtype=float) / rho**model.gamma
    return out if out.ndim else float(out)


def weighted(alpha: float, y, y_hat):
    """Weighted value ``alpha*y_hat + (1 - alpha)*y`` of two time layers."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"weight alpha must lie in [0, 1], got {alpha!r}")
    return alpha * y_hat + (1.0 - alpha) * y


@dataclass(frozen=True)
class EntropyProfile:
    """One of the three classified entropy families.

    ``constant``: ``S = a0``; ``power``: ``S = a0 s**q``;
    ``exponential``: ``S = a0 exp(q s)``.
    """

    kind: str
    a0: float = 1.0
    q: float = 0.0

    KINDS = ("constant", "power", "exponential")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown entropy profile kind {self.kind!r}")
        if not self.a0 > 0:
            raise DomainError("a0 must be positive")
        if self.kind == "constant":
            object.__setattr__(self, "q", 0.0)
        elif self.q == 0:
            raise DomainError(f"{self.kind} profile needs q != 0")
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "q", float(self.q))

    @classmethod
    def constant(cls, a0: float = 1.0) -> "EntropyProfile":
        return cls("constant", a0)

    @classmethod
    def power(cls, a0: float, q: float) -> "EntropyProfile":
        return cls("power", a0, q)

    @classmethod
    def exponential(cls, a0: float, q: float) -> "EntropyProfile":
        return cls("exponential", a0, q)

    def check_domain(self, s) -> None:
        if self.kind == "power" and np.any(np.asarray(s) <= 0):
            raise DomainError("power entropy profile needs s > 0")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            out = np.full_like(s, self.a0)
        elif self.kind == "power":
            self.check_domain(s)
            out = self.a0 * s**self.q
        else:
            out = self.a0 * np.exp(self.q * s)
        return out if out.ndim else float(out)

    eval = __call__

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            out = np.zeros_like(s)
        elif self.kind == "power":
            self.check_domain(s)
            out = self.a0 * self.q * s ** (self.q - 1.0)
        else:
            out = self.a0 * self.q * np.exp(self.q * s)
        return out if out.ndim else float(out)

    def classified_triples(self) -> list[tuple[float, float, float]]:
        """Representative ``(alpha, beta, q)`` for which the classifying ODE holds."""
        if self.kind == "constant":
            return [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (2.0, -3.0, 0.0)]
        if self.kind == "power":
            return [(1.0, 0.0, self.q), (2.0, 0.0, 2 * self.q)]
        return [(0.0, 1.0, self.q), (0.0, -0.5, -0.5 * self.q)]

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "a0": self.a0}
        if self.kind != "constant":
            d["q"] = self.q
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EntropyProfile":
        return cls(d["kind"], d.get("a0", 1.0), d.get("q", 0.0))


def classifying_residual(profile: EntropyProfile, alpha: float, beta: float, q: float, s):
    """Residual ``(alpha s + beta) S'(s) - q S(s)`` of the classifying ODE."""
    return (alpha * np.asarray(s) + beta) * profile.derivative(s) - q * profile(s)


@dataclass(frozen=True)
class MassMesh:
    """Node coordinates in the mass variable ``s``."""

    s: np.ndarray

    def __post_init__(self):
        s = _frozen(self.s)
        if s.ndim != 1 or s.size < 2:
            raise ShapeError("mass mesh needs at least two nodes")
        if np.any(np.diff(s) <= 0):
            raise DomainError("mass mesh must be strictly increasing")
        object.__setattr__(self, "s", s)

    @classmethod
    def uniform(cls, s_min: float, s_max: float, n_cells: int) -> "MassMesh":
        if n_cells < 1:
            raise DomainError("need at least one cell")
        return cls(np.linspace(s_min, s_max, n_cells + 1))

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.s)

    @property
    def n_cells(self) -> int:
        return self.s.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.s[1:] + self.s[:-1])

    @property
    def uniform_flag(self) -> bool:
        h = self.h
        return bool(np.all(np.abs(h - h[0]) <= 8 * np.finfo(float).eps * np.abs(self.s).max()))

    @property
    def step(self) -> float:
        """The common step of a uniform mesh."""
        if not self.uniform_flag:
            raise DomainError("mesh is not uniform")
        return float((self.s[-1] - self.s[0]) / self.n_cells)


@dataclass(frozen=True)
class Layer:
    """One time layer of the staggered solution (read-only arrays)."""

    t: float
    x: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    p: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        for name in ("x", "u", "rho", "p", "eps"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "t", float(self.t))
        n = self.rho.size
        if self.x.shape != (n + 1,) or self.u.shape != (n + 1,):
            raise ShapeError("node arrays need one more entry than cell arrays")
        if self.p.shape != (n,) or self.eps.shape != (n,):
            raise ShapeError("cell arrays differ in length")

    @classmethod
    def from_state(cls, t, x, u, rho, p, model: GasModel) -> "Layer":
        """Build a layer, filling the internal energy from the polytropic closure."""
        return cls(t, x, u, rho, p, internal_energy(model, rho, p))

    @property
    def n_cells(self) -> int:
        return self.rho.size

    def check_physical(self) -> None:
        if np.any(~(self.rho > 0)) or np.any(~(self.p > 0)):
            raise DomainError("density and pressure must be positive")

    def closure_residual(self, model: GasModel) -> float:
        return float(np.max(np.abs(self.eps - internal_energy(model, self.rho, self.p))))

    def replace(self, **changes) -> "Layer":
        d = dict(t=self.t, x=self.x, u=self.u, rho=self.rho, p=self.p, eps=self.eps)
        d.update(changes)
        return Layer(**d)

    def to_dict(self) -> dict:
        return {"t": self.t, **{k: getattr(self, k).tolist() for k in ("x", "u", "rho", "p", "eps")}}


def volume_consistency_residual(layer: Layer, mesh: MassMesh) -> float:
    """``max_i |h_i/rho_i - (x_{i+1} - x_i)|``."""
    if layer.n_cells != mesh.n_cells:
        raise ShapeError(f"layer has {layer.n_cells} cells, mesh has {mesh.n_cells}")
    return float(np.max(np.abs(mesh.h / layer.rho - np.diff(layer.x))))


@dataclass(frozen=True)
class RigidWall:
    """Node velocity pinned to zero; the ghost pressure mirrors the adjacent cell."""


@dataclass(frozen=True)
class PrescribedPressure:
    """Ghost pressure supplied at the domain edge; ``value`` is a number or ``f(t)``."""

    value: Union[float, Callable[[float], float]]

    def at(self, t: float) -> float:
        pb = self.value(t) if callable(self.value) else float(self.value)
        if not pb > 0:
            raise DomainError(f"prescribed boundary pressure must be positive, got {pb!r} at t={t}")
        return pb


Side = Union[RigidWall, PrescribedPressure]


@dataclass(frozen=True)
class BoundaryCondition:
    left: Side = field(default_factory=RigidWall)
    right: Side = field(default_factory=RigidWall)

    @classmethod
    def walls(cls) -> "BoundaryCondition":
        return cls(RigidWall(), RigidWall())

    def to_dict(self) -> dict:
        def side(b):
            if isinstance(b, RigidWall):
                return {"kind": "wall"}
            if callable(b.value):
                raise TypeError("time-dependent boundary pressure is not serialisable")
            return {"kind": "pressure", "value": float(b.value)}

        return {"left": side(self.left), "right": side(self.right)}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundaryCondition":
        def side(b):
            kind = b.get("kind", "wall")
            if kind == "wall":
                return RigidWall()
            if kind == "pressure":
                return PrescribedPressure(float(b["value"]))
            raise ValueError(f"unknown boundary kind {kind!r}")

        return cls(side(d.get("left", {})), side(d.get("right", {})))
