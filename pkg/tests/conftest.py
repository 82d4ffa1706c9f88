import numpy as np
import pytest

from atomwalk import AtomState, ControlParams, IntegratorSettings

# Standard operating point: ground-state atom kicked along the lattice.
OMEGA_R = 1e-3
KAPPA = 0.01


@pytest.fixture
def ground_state():
    return AtomState.ground(x=0.0, p=10.0)


@pytest.fixture
def chaotic_params():
    return ControlParams(omega_r=OMEGA_R, delta=0.15, kappa=KAPPA)


@pytest.fixture
def regular_params():
    return ControlParams(omega_r=OMEGA_R, delta=1.0, kappa=KAPPA)


@pytest.fixture
def resonant_params():
    return ControlParams(omega_r=OMEGA_R, delta=0.0, kappa=KAPPA)


@pytest.fixture
def fast_settings():
    """Loose-but-sane tolerances for qualitative regime tests."""
    return IntegratorSettings(rel_tol=1e-10, abs_tol=1e-12)


def random_states(rng: np.random.Generator, n: int):
    """Valid random states spanning the physically visited region."""
    out = []
    for _ in range(n):
        vec = rng.normal(size=3)
        vec /= np.sqrt((vec**2).sum())
        out.append(
            AtomState(
                x=float(rng.uniform(-10.0, 10.0)),
                p=float(rng.uniform(-50.0, 50.0)),
                u=float(vec[0]),
                v=float(vec[1]),
                z=float(vec[2]),
            )
        )
    return out
