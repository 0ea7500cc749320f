"""Retarded time-delay systems: storage, validation, rescaling, frequency response.

A system is

    x'(t) = A_0 x(t) + sum_{i=1}^m A_i x(t - tau_i) + B u(t)
    y(t)  = C x(t) + D u(t - tau_0)

with transfer function

    G(jw) = C (jw I - A_0 - sum_i A_i exp(-jw tau_i))^{-1} B + D exp(-jw tau_0).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, InputError, SingularResolventError, ParseError

__all__ = [
    "DelaySystem",
    "ScaledSystem",
    "StabilityEstimate",
    "load_system",
    "save_system",
    "system_from_dict",
    "system_to_dict",
    "rescale",
    "eval_transfer",
    "check_stability",
    "RCOND_MIN",
]

RCOND_MIN = 1e-14

_KEYS = ("n", "m", "A", "B", "C", "D", "tau")


def _as_matrix(value, name):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name}: not a numeric matrix ({exc})") from None
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: non-finite entry")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DelaySystem:
    """Immutable container for ``(A_0..A_m, B, C, D, tau_0..tau_m)``.

    ``tau[0]`` is the delay on the feedthrough term, ``tau[1:]`` the state delays.
    """

    A: tuple
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    tau: tuple
    delay_free: bool = False

    def __post_init__(self):
        A = tuple(_as_matrix(a, f"A[{i}]") for i, a in enumerate(self.A))
        if not A:
            raise DimensionError("A: need at least A_0")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        D = _as_matrix(self.D, "D")
        n = A[0].shape[0]
        for i, a in enumerate(A):
            if a.shape != (n, n):
                raise DimensionError(f"A[{i}]: shape {a.shape}, expected {(n, n)}")
        if B.shape[0] != n:
            raise DimensionError(f"B: {B.shape[0]} rows, expected n={n}")
        if C.shape[1] != n:
            raise DimensionError(f"C: {C.shape[1]} columns, expected n={n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(
                f"D: shape {D.shape}, expected (n_y, n_u)={(C.shape[0], B.shape[1])}"
            )
        tau = tuple(float(t) for t in self.tau)
        if len(tau) != len(A):
            raise DimensionError(f"tau: {len(tau)} delays, expected m+1={len(A)}")
        if any(not np.isfinite(t) for t in tau):
            raise InputError("tau: non-finite delay")
        if any(t < 0 for t in tau):
            raise InputError(f"tau: negative delay in {tau}")
        if max(tau) == 0.0 and not self.delay_free and len(tau) > 1:
            raise InputError("tau: all delays are zero; declare the system delay_free")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "tau", tau)
        if max(tau) == 0.0:
            object.__setattr__(self, "delay_free", True)

    @property
    def n(self):
        return self.A[0].shape[0]

    @property
    def m(self):
        return len(self.A) - 1

    @property
    def n_u(self):
        return self.B.shape[1]

    @property
    def n_y(self):
        return self.C.shape[0]

    @classmethod
    def delay_free_system(cls, A, B, C, D):
        """Plain state-space system ``(A, B, C, D)`` with no delays."""
        return cls(A=(A,), B=B, C=C, D=D, tau=(0.0,), delay_free=True)


@dataclass(frozen=True)
class ScaledSystem:
    """A system whose largest delay is 1, plus the factor used to get there.

    Frequencies map back as ``omega_original = omega_scaled / scale``.
    """

    sys: DelaySystem
    scale: float = 1.0

    def to_original_frequency(self, omega):
        return omega / self.scale

    def to_scaled_frequency(self, omega):
        return omega * self.scale


def system_from_dict(data):
    if not isinstance(data, dict):
        raise ParseError("system file must hold a JSON object")
    unknown = set(data) - set(_KEYS)
    if unknown:
        raise ParseError(f"unknown keys: {sorted(unknown)}")
    missing = [k for k in _KEYS if k not in data]
    if missing:
        raise ParseError(f"missing keys: {missing}")
    n, m = data["n"], data["m"]
    if not isinstance(n, int) or not isinstance(m, int) or n < 1 or m < 0:
        raise ParseError("n must be a positive integer and m a nonnegative integer")
    A = data["A"]
    if not isinstance(A, list) or len(A) != m + 1:
        raise DimensionError(f"A: expected a list of m+1={m + 1} matrices")
    sys = DelaySystem(
        A=tuple(A), B=data["B"], C=data["C"], D=data["D"], tau=tuple(data["tau"])
    )
    if sys.n != n:
        raise DimensionError(f"A matrices are {sys.n}x{sys.n}, but n={n}")
    return sys


def system_to_dict(sys):
    return {
        "n": sys.n,
        "m": sys.m,
        "A": [a.tolist() for a in sys.A],
        "B": sys.B.tolist(),
        "C": sys.C.tolist(),
        "D": sys.D.tolist(),
        "tau": list(sys.tau),
    }


def load_system(path):
    """Read and validate a JSON system file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return system_from_dict(data)


def save_system(sys, path):
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=1) + "\n")


def rescale(sys):
    """Dilate time so that the largest delay becomes 1.

    With ``s = max(tau)``, the delays are divided by ``s`` and ``A_0..A_m, B``
    multiplied by ``s``, so that ``G_scaled(j w s) = G(j w)``.
    """
    s = max(sys.tau)
    if s <= 0.0:
        raise InputError("rescale: all delays are zero")
    if s == 1.0:
        return ScaledSystem(sys=sys, scale=1.0)
    scaled = DelaySystem(
        A=tuple(s * a for a in sys.A),
        B=s * sys.B,
        C=sys.C,
        D=sys.D,
        tau=tuple(t / s for t in sys.tau),
    )
    return ScaledSystem(sys=scaled, scale=s)


def as_scaled(sys):
    """Rescale when there is a delay; delay-free systems pass through with scale 1."""
    if isinstance(sys, ScaledSystem):
        return sys
    if sys.delay_free:
        return ScaledSystem(sys=sys, scale=1.0)
    return rescale(sys)


def resolvent_matrix(sys, lam, state_exp=None):
    """``lam I - A_0 - sum_i A_i e_i`` with ``e_i = exp(-lam tau_i)`` unless given."""
    n = sys.n
    Rm = lam * np.eye(n, dtype=complex) - sys.A[0]
    for i in range(1, sys.m + 1):
        e = np.exp(-lam * sys.tau[i]) if state_exp is None else state_exp[i - 1]
        Rm = Rm - sys.A[i] * e
    return Rm


def solve_resolvent(Rm, rhs, what="resolvent"):
    """LU solve with a reciprocal-condition guard."""
    with warnings.catch_warnings():
        # exact singularity is reported through rcond below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(Rm, check_finite=False)
    anorm = np.linalg.norm(Rm, 1)
    rcond, _ = sla.lapack.zgecon(lu.astype(complex), anorm, norm="1")
    if not np.isfinite(rcond) or rcond < RCOND_MIN:
        raise SingularResolventError(f"{what} is singular (rcond={rcond:.3e})")
    return sla.lu_solve((lu, piv), rhs, check_finite=False)


def eval_transfer(sys, omega):
    """Frequency response ``G(j omega)`` as an ``n_y x n_u`` complex matrix.

    ``omega`` may be negative; for real data ``G(-jw) = conj(G(jw))``.
    """
    if isinstance(sys, ScaledSystem):
        sys = sys.sys
    lam = 1j * float(omega)
    X = solve_resolvent(resolvent_matrix(sys, lam), sys.B.astype(complex))
    return sys.C @ X + sys.D * np.exp(-lam * sys.tau[0])


@dataclass(frozen=True)
class StabilityEstimate:
    rightmost: complex
    N: int
    converged: bool
    margin: float = 1e-8
    eigenvalues: np.ndarray = field(default=None, repr=False)

    @property
    def stable(self):
        return self.rightmost.real < -self.margin


def _generator_eigenvalues(sys, N):
    from .spectral import barycentric_weights, cheb_points, diff_matrix, lagrange_values

    n, m = sys.n, sys.m
    state_tau = sys.tau[1:]
    h = max(state_tau, default=0.0)
    if h == 0.0:
        return np.linalg.eigvals(sum(sys.A))
    # nodes on [-h, 0], node 0 at theta = 0
    x = cheb_points(N)[::-1]
    theta = h * (x - 1.0) / 2.0
    w = barycentric_weights(N)[::-1]
    Dm = diff_matrix(x, w) * (2.0 / h)
    AN = np.zeros(((N + 1) * n, (N + 1) * n))
    AN[n:, :] = np.kron(Dm[1:], np.eye(n))
    AN[:n, :n] = sys.A[0]
    for i in range(m):
        ell = lagrange_values(theta, w, -state_tau[i])
        AN[:n, :] += np.kron(ell[None, :], sys.A[i + 1])
    return np.linalg.eigvals(AN)


def check_stability(sys, N_stab=20, margin=1e-8):
    """Rightmost characteristic root estimate from a Chebyshev discretization
    of the infinitesimal generator of ``x' = A_0 x + sum A_i x(t - tau_i)``.

    ``converged`` is False when the estimate moves by more than ``1e-6``
    (relative) between ``N_stab`` and ``N_stab + 5``.
    """
    if isinstance(sys, ScaledSystem):
        sys = sys.sys
    ev = _generator_eigenvalues(sys, N_stab)
    ev2 = _generator_eigenvalues(sys, N_stab + 5)
    r1 = ev[np.argmax(ev.real)]
    r2 = ev2[np.argmax(ev2.real)]
    converged = abs(r1.real - r2.real) <= 1e-6 * max(1.0, abs(r2))
    return StabilityEstimate(
        rightmost=complex(r1), N=N_stab, converged=bool(converged),
        margin=margin, eigenvalues=ev,
    )
