import numpy as np
import pytest

from lagrange_gas.core import BoundaryCondition, GasModel, Layer, MassMesh
from lagrange_gas.problems import smooth_wave, sod_tube
from lagrange_gas.schemes import StepConfig, run, suggest_timestep


def simulate(spec, n_steps, alpha=0.5, courant=0.25, scheme="popov_samarskii", stride=1, tau=None):
    layer = spec.initial_layer()
    if tau is None:
        tau = suggest_timestep(layer, spec.mesh, spec.model, courant)
    return run(layer, spec.mesh, spec.model, StepConfig(tau, alpha), spec.bc, n_steps,
               scheme=scheme, stride=stride)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sod_short():
    return simulate(sod_tube(1.4, 40), 30)


@pytest.fixture(scope="session")
def wave3_explicit():
    return simulate(smooth_wave(3.0, n=32), 20, scheme="explicit_gamma3")


@pytest.fixture(scope="session")
def wave3_ps():
    return simulate(smooth_wave(3.0, n=32), 20)
