"""Command-line driver: runs, invariance defects, density refinement studies.

Configuration is YAML (JSON is read as well). See README.md for the schema.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import conservation as cons
from . import symmetry as sym
from .core import DomainError, EntropyProfile, GasModel
from .problems import ProblemSpec
from .schemes import (EXPLICIT_GAMMA3, POPOV_SAMARSKII, SCHEMES, ModelError, StepConfig, StepFailure,
                      run, suggest_timestep)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

AUDIT_HEADER = ("step", "t", "mass", "momentum", "energy", "center_of_mass", "work")
ENTROPY_HEADER = ("step", "t", "max_entropy_drift")
DENSITY_HEADER = ("step", "t", "law", "total")
INVARIANT_RESIDUAL_HEADER = ("step", "t", "max_residual")
NOETHER_HEADER = ("law", "generator", "condition_residual", "cross_check")
OBSERVERS = ("audits", "entropy", "densities", "invariants")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: ProblemSpec
    scheme: str
    cfg: StepConfig
    n_steps: int
    stride: int = 1
    observers: tuple = ("audits",)
    laws: tuple = ()
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def model(self) -> GasModel:
        return self.problem.model


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping at the top level")
    return data


def _num(d: dict, key: str, default=None, kind=float):
    if key not in d or d[key] is None:
        return default
    try:
        return kind(d[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number, got {d[key]!r}") from exc


def _problem(d: dict, n: Optional[int] = None) -> ProblemSpec:
    if not isinstance(d.get("problem"), dict):
        raise ConfigError("missing 'problem' section")
    pd = dict(d["problem"])
    if n is not None:
        pd["n"] = n
    try:
        return ProblemSpec.from_dict(pd)
    except KeyError as exc:
        raise ConfigError(f"problem section is missing {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid problem: {exc}") from exc


def parse_run_config(d: dict) -> RunConfig:
    """Validate a configuration mapping and build the run description."""
    spec = _problem(d)
    scheme = d.get("scheme", POPOV_SAMARSKII)
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; choose one of {', '.join(SCHEMES)}")
    if scheme == EXPLICIT_GAMMA3 and spec.gamma != 3.0:
        raise ConfigError(f"scheme explicit_gamma3 requires gamma = 3, got {spec.gamma}")
    step = d.get("step") or {}
    if not isinstance(step, dict):
        raise ConfigError("'step' must be a mapping")
    tau = _num(step, "tau")
    try:
        if tau is None:
            courant = _num(step, "courant", 0.25)
            tau = suggest_timestep(spec.initial_layer(), spec.mesh, spec.model, courant)
        cfg = StepConfig(tau, _num(step, "alpha", 0.5), _num(step, "solver_tol", 1e-13),
                         _num(step, "solver_max_iter", 100, int))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    n_steps = _num(d, "n_steps", None, int)
    if n_steps is None:
        if not spec.t_final > 0:
            raise ConfigError("give n_steps or a positive problem t_final")
        n_steps = int(np.ceil(spec.t_final / tau - 1e-9))
    observers = tuple(d.get("observers", ["audits"]))
    unknown = set(observers) - set(OBSERVERS)
    if unknown:
        raise ConfigError(f"unknown observers {sorted(unknown)}; known: {', '.join(OBSERVERS)}")
    laws = tuple(d.get("laws", []))
    for law in laws:
        try:
            cons.builtin_density(law).check(spec.model, spec.profile)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        except cons.ApplicabilityError as exc:
            raise ConfigError(str(exc)) from exc
    stride = _num(d, "stride", 1, int)
    if stride < 1:
        raise ConfigError("stride must be positive")
    return RunConfig(spec, scheme, cfg, n_steps, stride, observers, laws, d)


# --- observers ----------------------------------------------------------------------

def _audit_observer(scheme):
    def obs(n, old, new, ctx):
        a = cons.audit_all(old, new, ctx.mesh, ctx.cfg.tau, ctx.cfg.alpha, ctx.bc, scheme)
        return [a[k] for k in AUDIT_HEADER[2:]]
    return obs


def _entropy_observer(initial):
    def obs(n, old, new, ctx):
        s0 = initial.p / initial.rho**ctx.model.gamma
        return float(np.max(np.abs(new.p / new.rho**ctx.model.gamma - s0)))
    return obs


def _density_observer(laws, profile):
    def obs(n, old, new, ctx):
        sc, h = ctx.mesh.centers, ctx.mesh.h
        S, S_s = profile(sc), profile.derivative(sc)
        xc, uc = 0.5 * (new.x[1:] + new.x[:-1]), 0.5 * (new.u[1:] + new.u[:-1])
        out = []
        for law in laws:
            tt, _ = cons.builtin_density(law).evaluate(new.t, sc, xc, uc, new.rho, new.p, S, S_s, ctx.model.gamma)
            out.append(float(np.sum(tt * h)))
        return out
    return obs


def _invariant_observer(scheme, alpha):
    def obs(n, old, new, ctx):
        worst = 0.0
        for i in range(1, ctx.mesh.n_cells):
            w = sym.lagrange_window(old, new, ctx.mesh, i)
            r = sym.scheme_in_invariants_residual(scheme, w, alpha, ctx.model)
            worst = max(worst, float(np.max(np.abs(r))))
        return worst
    return obs


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _simulate(rc: RunConfig, observers: dict, stride: Optional[int] = None):
    spec = rc.problem
    initial = spec.initial_layer()
    return initial, run(initial, spec.mesh, spec.model, rc.cfg, spec.bc, rc.n_steps, observers,
                        scheme=rc.scheme, stride=stride or rc.stride)


# --- commands -----------------------------------------------------------------------

def cmd_run(rc: RunConfig, out: Path) -> int:
    initial = rc.problem.initial_layer()
    obs = {}
    if "audits" in rc.observers:
        obs["audits"] = _audit_observer(rc.scheme)
    if "entropy" in rc.observers:
        obs["entropy"] = _entropy_observer(initial)
    if "densities" in rc.observers and rc.laws:
        obs["densities"] = _density_observer(rc.laws, rc.problem.profile)
    if "invariants" in rc.observers:
        obs["invariants"] = _invariant_observer(rc.scheme, rc.cfg.alpha)
    _, traj = _simulate(rc, obs)
    times = _times(rc, traj)
    if "audits" in obs:
        _write_csv(out / "audits.csv", AUDIT_HEADER,
                   ([n, times[n]] + r for n, r in enumerate(traj.records["audits"], 1)))
    if "entropy" in obs:
        _write_csv(out / "entropy.csv", ENTROPY_HEADER,
                   ([n, times[n], r] for n, r in enumerate(traj.records["entropy"], 1)))
    if "densities" in obs:
        _write_csv(out / "densities.csv", DENSITY_HEADER,
                   ([n, times[n], law, v] for n, r in enumerate(traj.records["densities"], 1)
                    for law, v in zip(rc.laws, r)))
    if "invariants" in obs:
        _write_csv(out / "invariant_residuals.csv", INVARIANT_RESIDUAL_HEADER,
                   ([n, times[n], r] for n, r in enumerate(traj.records["invariants"], 1)))
    final = dict(traj.final.to_dict(), step=traj.steps[-1], scheme=rc.scheme, gamma=rc.model.gamma,
                 s=rc.problem.mesh.s.tolist())
    (out / "final_state.json").write_text(json.dumps(final, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def _times(rc: RunConfig, traj) -> list:
    t0 = traj.initial.t
    return [t0 + k * rc.cfg.tau for k in range(rc.n_steps + 1)]


def cmd_invariance(rc: RunConfig, out: Path) -> int:
    section = rc.raw.get("invariance") or {}
    gens = sym.lagrange_generators(rc.model.gamma)
    names = section.get("generators")
    if names:
        known = {g.name: g for g in sym.lagrange_generators(3.0)}
        missing = [n for n in names if n not in known]
        if missing:
            raise ConfigError(f"unknown generators {missing}")
        gens = [known[n] for n in names]
    _, traj = _simulate(rc, {}, stride=1)
    rows = []
    for g in gens:
        grid = section.get("eps")
        grid = None if grid is None else [float(e) for e in grid]
        for e, d in sym.scheme_invariance_defect(rc.scheme, g, grid, traj):
            rows.append((g.name, e, d))
    sym.write_defect_csv(out / "invariance.csv", rows)
    return EXIT_OK


def cmd_audit_densities(rc: RunConfig, out: Path) -> int:
    section = rc.raw.get("densities") or {}
    laws = tuple(section.get("laws", rc.laws)) or ("momentum",)
    for law in laws:
        try:
            cons.builtin_density(law).check(rc.model, rc.problem.profile)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        except cons.ApplicabilityError as exc:
            raise ConfigError(str(exc)) from exc
    levels = _num(section, "levels", 3, int)
    n0 = _num(section, "n0", rc.problem.n, int)
    t_final = _num(section, "t_final", rc.problem.t_final or 0.1)
    courant = _num(section, "courant", 0.25)
    trajs = cons.refined_trajectories(lambda n: _problem(rc.raw, n), n0, levels, t_final, courant,
                                      rc.cfg.alpha)
    for law in laws:
        report = cons.divergence_residual(cons.builtin_density(law), trajs, rc.problem.profile)
        with open(out / f"density_{law}.csv", "w", newline="") as fh:
            report.to_csv(fh)
    return EXIT_OK


def cmd_invariants(rc: RunConfig, out: Path) -> int:
    family = "gamma3" if rc.model.gamma == 3.0 else "lagrange"
    fn, _ = sym.INVARIANT_FAMILIES[family]
    size = 13 if family == "gamma3" else 14
    prefix = "J" if family == "gamma3" else "I"
    _, traj = _simulate(rc, {})
    rows = []
    for j in range(len(traj.layers) - 1):
        for i, w in enumerate(sym.trajectory_windows(traj, j), 1):
            rows.append([traj.steps[j], i, *map(float, fn(w))])
    _write_csv(out / "invariants.csv", ("step", "node", *[f"{prefix}{k}" for k in range(1, size + 1)]), rows)
    return EXIT_OK


def cmd_noether(raw: dict, out: Path, seed: int) -> int:
    pd = raw.get("problem") or {}
    model = GasModel(_num(pd, "gamma", 1.4))
    prof = pd.get("profile")
    profile = EntropyProfile.from_dict(prof) if isinstance(prof, dict) else EntropyProfile.constant(1.0)
    rng = np.random.default_rng(seed)
    field_ = cons.SampledField.default()
    rows = []
    for law in cons.applicable_laws(model, profile):
        if law == "mass":
            continue
        src = cons.noether_source(law, model, profile)
        res = cons.noether_condition_residual(src.generator, src.B1, src.B2, field_, model, profile)
        rows.append((law, src.generator.name, res, cons.noether_cross_check(law, model, profile, rng)))
    if model.gamma != 3.0:
        k = cons.kernel_X4(model.gamma)
        rows.append(("none", k.name, cons.noether_condition_residual(k, cons.B_zero, cons.B_zero, field_,
                                                                      model, profile), ""))
    _write_csv(out / "noether.csv", NOETHER_HEADER, rows)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "invariance": cmd_invariance,
    "audit-densities": cmd_audit_densities,
    "invariants": cmd_invariants,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lagrange-gas", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=[*COMMANDS, "noether"])
    ap.add_argument("--config", required=True, help="YAML or JSON configuration file")
    ap.add_argument("--out", default="out", help="output directory (created if missing)")
    ap.add_argument("--stride", type=int, default=None, help="keep every N-th layer (overrides config)")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized checks only")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        raw = load_config(args.config)
        if args.stride is not None:
            raw["stride"] = args.stride
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "noether":
            return cmd_noether(raw, out, args.seed)
        rc = parse_run_config(raw)
        return COMMANDS[args.command](rc, out)
    except (ConfigError, ModelError, cons.ApplicabilityError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailure as exc:
        print(f"numerical failure at step {exc.step_index}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
