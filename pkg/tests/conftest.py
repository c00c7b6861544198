"""Shared fixtures and independent oracles for the test suite.

The dense helpers below rebuild physics the package also implements, on
purpose: they go through plain numpy constructions (explicit coupling lists,
``numpy.linalg.solve``) so that package results are checked against a second,
structurally different code path rather than against themselves.
"""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from heraldgate.model import SystemParams

settings.register_profile(
    "package",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("package")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260817)


@pytest.fixture
def tiny_params() -> SystemParams:
    """One qutrit, one photon max: smallest full model worth simulating."""
    return SystemParams(g_A=3.0, g_B=4.0, J=20.0, kappa=3.0,
                        gamma0=0.6, gamma1=0.4, gamma_g1=1.0, gamma_g2=1.0,
                        Delta_e1=60.0, Delta_e2=12.0, delta=0.8,
                        Omega1=1.5, Omega2=5.0, n_qutrits=1, n_max=1)


@pytest.fixture
def register_params() -> SystemParams:
    """Two qutrits with moderate couplings, for effective-level tests."""
    return SystemParams(g_A=20.0, g_B=25.0, J=60.0, kappa=8.0,
                        gamma0=0.6, gamma1=0.4, gamma_g1=1.2, gamma_g2=0.9,
                        Delta_e1=120.0, Delta_e2=35.0, delta=1.5,
                        Omega1=2.0, Omega2=7.0, n_qutrits=2)


def random_valid_params(rng: np.random.Generator,
                        n_qutrits: int | None = None) -> SystemParams:
    """Draw one parameter set from the physically sensible region.

    Cooperativities are sampled log-uniformly; everything else uniformly
    over ranges where the weak-probe hierarchy holds.
    """
    C_B = 10.0 ** rng.uniform(1.0, np.log10(500.0))
    C_A = C_B * rng.uniform(0.5, 2.0)
    lam = rng.uniform(1.0, 8.0)
    kappa = rng.uniform(0.5, 20.0)
    gamma0 = rng.uniform(0.2, 0.8)
    gamma1 = rng.uniform(0.2, 0.8)
    gamma = gamma0 + gamma1
    if n_qutrits is None:
        n_qutrits = int(rng.integers(1, 5))
    return SystemParams(
        g_A=float(np.sqrt(C_A * kappa * gamma)),
        g_B=float(np.sqrt(C_B * kappa * gamma)),
        J=float(lam * np.sqrt(C_B) * kappa),
        kappa=kappa,
        gamma0=gamma0,
        gamma1=gamma1,
        gamma_g1=float(rng.uniform(0.5, 2.0)),
        gamma_g2=float(rng.uniform(0.5, 2.0)),
        Delta_e1=float(rng.uniform(20.0, 300.0)),
        Delta_e2=float(rng.uniform(0.0, 30.0)),
        delta=float(rng.uniform(0.0, 5.0)),
        Omega1=float(rng.uniform(0.1, 5.0)),
        Omega2=float(rng.uniform(0.5, 10.0)),
        n_qutrits=n_qutrits,
    )


def dense_branch_oracle(params: SystemParams, n: int):
    """Steady scattering amplitudes of the singly excited manifold, densely.

    Builds the non-Hermitian single-excitation block for a register branch
    with ``n`` qutrits in |1> from explicit coupling lists, solves the linear
    response to the weak probe with ``numpy.linalg.solve``, and returns

        (shift, decay, amps)

    where ``shift`` has the bare probe Stark shift -Omega1^2/(4 Delta_e1)
    removed, ``decay`` sums every loss channel except the one returning to
    the herald level, and ``amps`` maps channel names to complex amplitudes.
    """
    gam = params.gamma0 + params.gamma1
    dim = 4 + n
    H = np.zeros((dim, dim), dtype=complex)
    # basis: quartit e1; quartit e2; photon in the upper / lower normal mode;
    # then one state per promoted qutrit
    H[0, 0] = params.Delta_e1 - 0.5j * params.gamma_g1
    H[1, 1] = params.Delta_e2 - 0.5j * params.gamma_g2
    H[2, 2] = 2.0 * params.J - 0.5j * params.kappa
    H[3, 3] = -0.5j * params.kappa
    H[0, 1] = H[1, 0] = 0.5 * params.Omega2
    gA = params.g_A / np.sqrt(2.0)
    H[1, 2] = H[2, 1] = gA
    H[1, 3] = H[3, 1] = gA
    gB = params.g_B / np.sqrt(2.0)
    for k in range(n):
        H[4 + k, 4 + k] = params.delta - 0.5j * gam
        H[2, 4 + k] = H[4 + k, 2] = gB
        H[3, 4 + k] = H[4 + k, 3] = -gB
    b = np.zeros(dim, dtype=complex)
    b[0] = 0.5 * params.Omega1
    x = np.linalg.solve(H, b)
    shift = -0.5 * params.Omega1 * x[0].real
    shift += params.Omega1**2 / (4.0 * params.Delta_e1)
    amps = {
        "g1": np.sqrt(params.gamma_g1) * x[0],
        "g2": np.sqrt(params.gamma_g2) * x[1],
        "plus": np.sqrt(params.kappa) * x[2],
        "minus": np.sqrt(params.kappa) * x[3],
        "q0": np.sqrt(params.gamma0) * (x[4] if n else 0.0),
        "q1": np.sqrt(params.gamma1) * (x[4] if n else 0.0),
    }
    decay = (abs(amps["plus"])**2 + abs(amps["minus"])**2 + abs(amps["g2"])**2
             + n * (abs(amps["q0"])**2 + abs(amps["q1"])**2))
    return shift, decay, amps
