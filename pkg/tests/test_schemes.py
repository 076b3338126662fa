import numpy as np
import pytest

from lagrange_gas.conservation import audit_all
from lagrange_gas.core import (BoundaryCondition, DomainError, GasModel, Layer, MassMesh, PrescribedPressure,
                               volume_consistency_residual)
from lagrange_gas.problems import constant_state, smooth_wave, sod_tube
from lagrange_gas.schemes import (EXPLICIT_GAMMA3, POPOV_SAMARSKII, MeshTanglingError, ModelError, StepConfig,
                                  StepFailure, density_from_volume, explicit_gamma3_residuals,
                                  logarithmic_relation_residual, popov_samarskii_residuals, run,
                                  step_explicit_gamma3, step_popov_samarskii, suggest_timestep)
from conftest import simulate


def test_step_config_validation():
    with pytest.raises(DomainError):
        StepConfig(0.0)
    with pytest.raises(DomainError):
        StepConfig(0.1, alpha=-0.1)
    with pytest.raises(DomainError):
        StepConfig(0.1, solver_max_iter=0)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 1.0])
@pytest.mark.parametrize("gamma", [1.4, 5 / 3, 3.0])
def test_ps_constant_state_is_fixed(alpha, gamma):
    spec = constant_state(1.0, 1.0, 0.0, gamma, 10)
    L = spec.initial_layer()
    new = step_popov_samarskii(L, spec.mesh, spec.model, StepConfig(0.01, alpha), spec.bc)
    for k in ("x", "u", "rho", "p", "eps"):
        np.testing.assert_array_equal(getattr(new, k), getattr(L, k))
    assert new.t == pytest.approx(0.01)


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
def test_ps_uniform_translation(alpha):
    spec = constant_state(1.0, 1.0, 2.0, 1.4, 10)
    L = spec.initial_layer()
    new = step_popov_samarskii(L, spec.mesh, spec.model, StepConfig(0.01, alpha), spec.bc)
    np.testing.assert_allclose(new.x, L.x + 0.02, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(new.u, L.u)
    np.testing.assert_allclose(new.rho, 1.0, rtol=1e-15)
    np.testing.assert_allclose(new.p, 1.0, rtol=1e-15)


def test_ps_sod_single_step_satisfies_audits():
    spec = sod_tube(1.4, 100)
    L = spec.initial_layer()
    tau = suggest_timestep(L, spec.mesh, spec.model, 0.25)
    new = step_popov_samarskii(L, spec.mesh, spec.model, StepConfig(tau, 0.5), spec.bc)
    audits = audit_all(L, new, spec.mesh, tau, 0.5, spec.bc)
    assert max(audits.values()) <= 1e-12
    assert volume_consistency_residual(new, spec.mesh) <= 1e-13
    res = popov_samarskii_residuals(L, new, spec.mesh, spec.model, 0.5, spec.bc)
    assert max(np.max(np.abs(r)) for r in res.values()) <= 1e-12


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
def test_logarithmic_relation_holds_to_rounding(alpha):
    spec = smooth_wave(1.4, amplitude=0.1, n=32)
    tr = simulate(spec, 15, alpha=alpha)
    worst = max(np.max(np.abs(logarithmic_relation_residual(o, n, spec.model, alpha)))
                for o, n in zip(tr.layers[:-1], tr.layers[1:]))
    assert worst <= 1e-11


def test_ps_mass_audit_on_smooth_converged_step():
    spec = smooth_wave(1.4, amplitude=0.1, n=64)
    tr = simulate(spec, 10)
    for old, new in zip(tr.layers[:-1], tr.layers[1:]):
        assert audit_all(old, new, spec.mesh, new.t - old.t, 0.5, spec.bc)["mass"] <= 1e-13


def test_ps_solver_failure_reports_residual():
    spec = sod_tube(1.4, 20)
    L = spec.initial_layer()
    with pytest.raises(StepFailure) as info:
        step_popov_samarskii(L, spec.mesh, spec.model, StepConfig(0.01, 0.5, 1e-13, 1), spec.bc)
    assert info.value.residual > 0


def test_run_reports_failing_step_index():
    spec = sod_tube(1.4, 40)
    L = spec.initial_layer()
    tau = 3.0 * suggest_timestep(L, spec.mesh, spec.model, 1.0)
    with pytest.raises(StepFailure) as info:
        run(L, spec.mesh, spec.model, StepConfig(tau, 0.0), spec.bc, 200)
    assert info.value.step_index is not None and info.value.step_index >= 1


def test_explicit_requires_gamma3():
    spec = constant_state(1.0, 1.0, 0.0, 1.4, 4)
    with pytest.raises(ModelError):
        run(spec.initial_layer(), spec.mesh, spec.model, StepConfig(0.01), spec.bc, 1, scheme=EXPLICIT_GAMMA3)
    with pytest.raises(ModelError):
        step_explicit_gamma3(spec.initial_layer(), spec.mesh, StepConfig(0.01), spec.bc, spec.model)


def test_explicit_constant_and_translation():
    rest = constant_state(1.0, 1.0, 0.0, 3.0, 8)
    L = rest.initial_layer()
    new = step_explicit_gamma3(L, rest.mesh, StepConfig(0.01), rest.bc)
    for k in ("x", "u", "rho", "p"):
        np.testing.assert_array_equal(getattr(new, k), getattr(L, k))
    moving = constant_state(1.0, 1.0, 0.5, 3.0, 8)
    L = moving.initial_layer()
    new = step_explicit_gamma3(L, moving.mesh, StepConfig(0.01), moving.bc)
    np.testing.assert_allclose(new.x, L.x + 0.005, atol=1e-15)
    np.testing.assert_array_equal(new.u, L.u)
    np.testing.assert_allclose(new.rho, 1.0, rtol=1e-15)


def test_explicit_entropy_stable_on_smooth_bump():
    spec = smooth_wave(3.0, amplitude=0.1, n=64)
    tr = simulate(spec, 50, scheme=EXPLICIT_GAMMA3)
    F = tr.final
    assert np.max(np.abs(F.p / F.rho**3 - 1.0)) <= 1e-12
    res = explicit_gamma3_residuals(tr.layers[-2], F, spec.mesh, spec.bc)
    assert max(np.max(np.abs(r)) for r in res.values()) <= 1e-12


def test_explicit_mesh_tangling_is_fatal():
    spec = smooth_wave(3.0, amplitude=0.1, n=16, boundary="wall")
    L = spec.initial_layer()
    with pytest.raises(MeshTanglingError):
        run(L, spec.mesh, spec.model, StepConfig(5.0 * suggest_timestep(L, spec.mesh, spec.model, 1.0)),
            spec.bc, 500, scheme=EXPLICIT_GAMMA3)


def test_suggest_timestep():
    mesh = MassMesh.uniform(0.0, 1.0, 10)
    L = Layer(0.0, mesh.s, np.zeros(11), np.ones(10), np.ones(10), np.ones(10))
    assert suggest_timestep(L, mesh, 1.0, 1.0) == pytest.approx(0.1)
    L4 = Layer(0.0, mesh.s / 4, np.zeros(11), 4 * np.ones(10), np.ones(10), np.ones(10))
    assert suggest_timestep(L4, mesh, 1.0, 0.5) == pytest.approx(0.025)
    spec = sod_tube(1.4, 100)
    S = spec.initial_layer()
    brute = min(0.3 * h / np.sqrt(1.4 * p * r) for h, p, r in zip(spec.mesh.h, S.p, S.rho))
    assert suggest_timestep(S, spec.mesh, spec.model, 0.3) == pytest.approx(brute, rel=1e-15)


def test_run_basics_and_observers():
    spec = constant_state(1.0, 1.0, 0.0, 1.4, 6)
    L = spec.initial_layer()
    tr = run(L, spec.mesh, spec.model, StepConfig(0.01), spec.bc, 0)
    assert len(tr) == 1 and tr.final is L
    seen = []
    tr = run(L, spec.mesh, spec.model, StepConfig(0.01), spec.bc, 100,
             {"count": lambda n, o, nw, c: seen.append(n) or n}, stride=10)
    assert tr.steps == list(range(0, 101, 10))
    assert tr.records["count"] == list(range(1, 101))
    for layer in tr:
        np.testing.assert_array_equal(layer.x, L.x)


def test_steppers_are_deterministic():
    spec = sod_tube(1.4, 30)
    a = simulate(spec, 10).final
    b = simulate(spec, 10).final
    for k in ("x", "u", "rho", "p", "eps"):
        assert getattr(a, k).tobytes() == getattr(b, k).tobytes()


def test_prescribed_pressure_time_dependent():
    spec = constant_state(1.0, 1.0, 0.0, 1.4, 10)
    bc = BoundaryCondition(PrescribedPressure(lambda t: 1.0 + t), PrescribedPressure(1.0))
    L = spec.initial_layer()
    tr = run(L, spec.mesh, spec.model, StepConfig(0.01, 0.5), bc, 5)
    assert tr.final.u[0] > 0
    for old, new in zip(tr.layers[:-1], tr.layers[1:]):
        assert max(audit_all(old, new, spec.mesh, 0.01, 0.5, bc).values()) <= 1e-12


def test_density_from_volume_round_trip(rng):
    v = rng.uniform(0.1, 10.0, 10000)
    rho = density_from_volume(v)
    err = np.abs(1.0 / rho - v)
    assert np.max(err / v) <= 2.3e-16
    assert np.all(err <= np.abs(1.0 / (1.0 / v) - v))
    np.testing.assert_allclose(rho, 1.0 / v, rtol=3e-16)
