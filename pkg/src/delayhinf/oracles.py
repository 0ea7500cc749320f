"""Independent reference computations.

``sweep_oracle`` samples the largest singular value on a frequency grid (a
lower bound for the norm).  ``hamiltonian_oracle`` is the classical bisection
on the level for delay-free systems, using the Hamiltonian matrix whose
imaginary eigenvalues mark the level crossings.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, InstabilityError
from .levelset import TOL_AXIS
from .system import ScaledSystem, eval_transfer

__all__ = [
    "SweepResult",
    "hybrid_grid",
    "sweep_oracle",
    "hamiltonian_matrix",
    "hamiltonian_has_imaginary_eigs",
    "hamiltonian_oracle",
]


@dataclass(frozen=True)
class SweepResult:
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    argmax: float
    max: float
    all_sigmas: np.ndarray = field(default=None, repr=False)

    def write_csv(self, dest, all_values=False):
        """Write ``omega, sigma1[, sigma2, ...]``; ``dest`` is a path or text stream."""
        if hasattr(dest, "write"):
            self._write(dest, all_values)
        else:
            with open(dest, "w", newline="") as fh:
                self._write(fh, all_values)

    def _write(self, fh, all_values):
        w = csv.writer(fh, lineterminator="\n")
        k = self.all_sigmas.shape[1] if all_values else 1
        w.writerow(["omega"] + [f"sigma{i + 1}" for i in range(k)])
        for i, om in enumerate(self.grid):
            row = self.all_sigmas[i, :k] if all_values else [self.values[i]]
            w.writerow([repr(float(om))] + [repr(float(x)) for x in row])


def hybrid_grid(omega_max, npoints):
    """Half the points uniform on [0, 1], the rest log-spaced on [1, omega_max].

    ``hybrid_grid(W, 2k - 2)`` contains ``hybrid_grid(W, k)`` for even ``k``.
    """
    if npoints < 2:
        raise InputError("npoints must be >= 2")
    if omega_max <= 1.0:
        return np.linspace(0.0, omega_max, npoints)
    n_lin = npoints // 2
    n_log = npoints - n_lin
    lin = np.linspace(0.0, 1.0, max(n_lin, 2))
    logp = np.logspace(0.0, math.log10(omega_max), max(n_log, 2))
    return np.unique(np.concatenate([lin, logp]))


def sweep_oracle(sys, omega_max, npoints, grid=None):
    """``max sigma_1(G(j w))`` over a hybrid linear/log frequency grid."""
    if isinstance(sys, ScaledSystem):
        sys = sys.sys
    if omega_max <= 0:
        raise InputError("omega_max must be positive")
    w = hybrid_grid(omega_max, npoints) if grid is None else np.asarray(grid, float)
    sig = np.array([np.linalg.svd(eval_transfer(sys, x), compute_uv=False) for x in w])
    vals = sig[:, 0]
    k = int(np.argmax(vals))
    return SweepResult(grid=w, values=vals, argmax=float(w[k]), max=float(vals[k]),
                       all_sigmas=sig)


def hamiltonian_matrix(A, B, C, D, xi):
    """Hamiltonian whose imaginary eigenvalues ``jw`` mark ``sigma_k(G(jw)) = xi``.

    Standard form with ``R = D^T D - xi^2 I`` and ``S = D D^T - xi^2 I``::

        [[A - B R^-1 D^T C,   -xi B R^-1 B^T           ],
         [xi C^T S^-1 C,      -(A - B R^-1 D^T C)^T    ]]
    """
    R = D.T @ D - xi**2 * np.eye(D.shape[1])
    S = D @ D.T - xi**2 * np.eye(D.shape[0])
    F = A - B @ np.linalg.solve(R, D.T @ C)
    return np.block([
        [F, -xi * B @ np.linalg.solve(R, B.T)],
        [xi * C.T @ np.linalg.solve(S, C), -F.T],
    ])


def hamiltonian_has_imaginary_eigs(A, B, C, D, xi, tol_axis=TOL_AXIS):
    ev = np.linalg.eigvals(hamiltonian_matrix(A, B, C, D, xi))
    return bool(np.any(np.abs(ev.real) <= tol_axis * np.maximum(1.0, np.abs(ev.imag))))


def hamiltonian_oracle(sys, tol=1e-12, max_iter=500, trace=None):
    """Bisection on the level for a delay-free system (``m = 0``, ``tau_0 = 0``).

    The bracket keeps crossings at ``lo`` and none at ``hi``; ``trace`` (a list)
    receives the ``(lo, hi)`` pairs when given.
    """
    if isinstance(sys, ScaledSystem):
        sys = sys.sys
    if sys.m != 0 or sys.tau[0] != 0.0:
        raise InputError("hamiltonian_oracle needs a delay-free system")
    A, B, C, D = sys.A[0], sys.B, sys.C, sys.D
    if np.max(np.linalg.eigvals(A).real) >= 0:
        raise InstabilityError(complex(np.linalg.eigvals(A)[np.argmax(np.linalg.eigvals(A).real)]))
    sigD = float(np.linalg.norm(D, 2)) if D.size else 0.0
    g0 = float(np.linalg.norm(eval_transfer(sys, 0.0), 2))
    lo = max(g0, sigD)
    if lo == 0.0:
        return 0.0
    # lo is attained (at w = 0 or w -> inf); nudge so that D_xi is regular
    has = lambda xi: hamiltonian_has_imaginary_eigs(A, B, C, D, xi)
    hi = 2.0 * lo
    while has(hi):
        lo, hi = hi, 2.0 * hi
    if not has(lo * (1 + 1e-14)):
        # nothing above the attained lower bound
        return lo
    lo = lo * (1 + 1e-14)
    for _ in range(max_iter):
        if trace is not None:
            trace.append((lo, hi))
        if hi - lo <= tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if has(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
