"""Random system generators shared by the tests."""

import numpy as np

from delayhinf import DelaySystem, check_stability


def random_delay_free(rng, nmax=6, iomax=3, with_D=None):
    """Hurwitz state-space system; D is zero or a small random matrix."""
    n = int(rng.integers(1, nmax + 1))
    nu = int(rng.integers(1, iomax + 1))
    ny = int(rng.integers(1, iomax + 1))
    A = rng.standard_normal((n, n))
    A -= (np.max(np.linalg.eigvals(A).real) + rng.uniform(0.05, 1.0)) * np.eye(n)
    if with_D is None:
        with_D = bool(rng.integers(0, 2))
    D = 0.3 * rng.standard_normal((ny, nu)) if with_D else np.zeros((ny, nu))
    return DelaySystem.delay_free_system(
        A, rng.standard_normal((n, nu)), rng.standard_normal((ny, n)), D
    )


def random_delay_system(rng, nmax=4, mmax=3, iomax=3):
    """Exponentially stable retarded system with 1..mmax state delays."""
    while True:
        n = int(rng.integers(1, nmax + 1))
        m = int(rng.integers(1, mmax + 1))
        nu = int(rng.integers(1, iomax + 1))
        ny = int(rng.integers(1, iomax + 1))
        A0 = rng.standard_normal((n, n))
        A0 -= (np.max(np.linalg.eigvals(A0).real) + rng.uniform(0.5, 2.0)) * np.eye(n)
        A = [A0] + [0.4 / m * rng.standard_normal((n, n)) for _ in range(m)]
        tau = [float(rng.uniform(0.0, 1.0))] + list(rng.uniform(0.1, 2.0, m))
        D = 0.3 * rng.standard_normal((ny, nu)) if rng.integers(0, 2) else np.zeros((ny, nu))
        sys = DelaySystem(
            A=tuple(A), B=rng.standard_normal((n, nu)), C=rng.standard_normal((ny, n)),
            D=D, tau=tuple(tau),
        )
        if check_stability(sys).stable:
            return sys
