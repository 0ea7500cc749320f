"""Chebyshev spectral discretization of the delay operator.

The interval [-1, 1] is sampled at the 2N+1 Chebyshev extremal points

    theta_{N,i} = cos((N - i) pi / (2N)),   i = -N..N,

stored in increasing order so that index ``i + N`` holds ``theta_{N,i}`` and
the middle index ``N`` holds ``theta_{N,0} = 0``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.chebyshev as npcheb
import scipy.linalg as sla

from .errors import PoleError, UnreachableTargetError

__all__ = [
    "ChebGrid",
    "DiffData",
    "PNSolver",
    "DiscretizedOperator",
    "OperatorAssembler",
    "cheb_points",
    "barycentric_weights",
    "diff_matrix",
    "lagrange_values",
    "cheb_grid",
    "diff_data",
    "pn_solver",
    "assemble_L",
    "eval_pN",
    "cutoff_frequency",
    "cutoff_table",
    "choose_N",
    "DEFAULT_N",
    "DEFAULT_DELTA",
    "N_MAX",
]

DEFAULT_N = 15
DEFAULT_DELTA = 0.1
N_MAX = 60

_POLE_RCOND = 1e-15


def cheb_points(K):
    """The K+1 Chebyshev extremal points on [-1, 1], increasing, mirrored exactly."""
    if K == 0:
        return np.zeros(1)
    j = np.arange(-K, K + 1, 2)
    x = np.sin(np.pi * j / (2 * K))
    # exact mirror symmetry and an exact zero for even K
    half = (K + 1) // 2
    x[:half] = -x[::-1][:half]
    if K % 2 == 0:
        x[K // 2] = 0.0
    return x


def barycentric_weights(K):
    """Barycentric weights of the K+1 extremal points (sign pattern (-1)^k, halved ends)."""
    w = (-1.0) ** np.arange(K + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def diff_matrix(x, w):
    """Barycentric differentiation matrix; diagonal by the negative-sum trick."""
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    Dm = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(Dm, 0.0)
    np.fill_diagonal(Dm, -Dm.sum(axis=1))
    return Dm


def lagrange_values(x, w, t):
    """Values ``l_k(t)`` of all Lagrange basis polynomials at the scalar ``t``."""
    diff = t - x
    # a node hit, or so close that w / diff would overflow
    hit = np.flatnonzero(np.abs(diff) < 1e-250)
    out = np.zeros(len(x))
    if hit.size:
        out[hit[0]] = 1.0
        return out
    q = w / diff
    return q / q.sum()


@dataclass(frozen=True)
class ChebGrid:
    N: int
    theta: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def mid(self):
        return self.N


def cheb_grid(N):
    if N < 1:
        raise ValueError("N must be >= 1")
    theta = cheb_points(2 * N)
    theta.setflags(write=False)
    w = barycentric_weights(2 * N)
    w.setflags(write=False)
    return ChebGrid(N=N, theta=theta, weights=w)


@dataclass(frozen=True)
class DiffData:
    """Derivative weights ``l'_{N,k}(theta_{N,i})`` for the 2N rows ``i != 0``."""

    grid: ChebGrid
    full: np.ndarray = field(repr=False)

    @property
    def dweights(self):
        N = self.grid.N
        return np.delete(self.full, N, axis=0)

    def lagrange(self, t):
        return lagrange_values(self.grid.theta, self.grid.weights, t)


def diff_data(grid):
    full = diff_matrix(grid.theta, grid.weights)
    full.setflags(write=False)
    return DiffData(grid=grid, full=full)


@dataclass(frozen=True)
class PNSolver:
    """Chebyshev-coefficient solver for the collocation polynomial ``p_N(t; lam)``.

    ``p_N(0; lam) = 1`` and ``p_N'(theta) = lam p_N(theta)`` at the other 2N
    grid points.  In the Chebyshev basis ``p_N = sum alpha_k T_k`` this is
    ``(lam T - U) alpha = lam e_mid``; the middle equation is divided by
    ``lam`` so that ``lam = 0`` (the constant polynomial) is not special.
    """

    N: int
    T: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)

    def system_matrix(self, lam):
        Mx = lam * self.T - self.U
        Mx[self.N] = self.T[self.N]
        return Mx

    def coefficients(self, lam):
        lam = complex(lam)
        Mx = self.system_matrix(lam)
        rhs = np.zeros(2 * self.N + 1, dtype=complex)
        rhs[self.N] = 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(Mx, check_finite=False)
        rcond, _ = sla.lapack.zgecon(lu, np.linalg.norm(Mx, 1), norm="1")
        if not np.isfinite(rcond) or rcond < _POLE_RCOND:
            raise PoleError(lam)
        return sla.lu_solve((lu, piv), rhs, check_finite=False)


def pn_solver(N):
    theta = cheb_points(2 * N)
    K = 2 * N
    T = npcheb.chebvander(theta, K).astype(complex)
    dcoef = npcheb.chebder(np.eye(K + 1), axis=0)
    U = npcheb.chebval(theta, dcoef).T.astype(complex)
    U[N] = 0.0
    T.setflags(write=False)
    U.setflags(write=False)
    return PNSolver(N=N, T=T, U=U)


def eval_pN(ps, lam, points):
    """``p_N(t; lam)`` at each ``t`` in ``points`` (Clenshaw evaluation)."""
    alpha = ps.coefficients(lam)
    return npcheb.chebval(np.asarray(points, dtype=float), alpha)


@functools.lru_cache(maxsize=None)
def _cached_pn_solver(N):
    return pn_solver(N)


@dataclass(frozen=True)
class DiscretizedOperator:
    L: np.ndarray = field(repr=False)
    xi: float
    N: int


class OperatorAssembler:
    """Builds ``L_xi^N`` for one scaled system and one N.

    Every block row but the middle one is ``d_{i,k} I_{2n}`` and does not
    depend on xi, so it is formed once; :meth:`assemble` only fills the
    middle block row.
    """

    def __init__(self, sys, N, dd=None):
        self.sys = sys
        self.N = N
        self.dd = dd if dd is not None else diff_data(cheb_grid(N))
        n2 = 2 * sys.n
        size = (2 * N + 1) * n2
        base = np.kron(self.dd.full, np.eye(n2))
        base[N * n2:(N + 1) * n2, :] = 0.0
        base.setflags(write=False)
        self._base = base
        self.size = size
        self.l_neg = [self.dd.lagrange(-t) for t in sys.tau]
        self.l_pos = [self.dd.lagrange(t) for t in sys.tau]

    def middle_row(self, blocks):
        """The blocks ``a_{-N}..a_N`` concatenated horizontally."""
        sys, N = self.sys, self.N
        n2 = 2 * sys.n
        row = np.zeros((n2, self.size))
        for i in range(1, sys.m + 1):
            row += np.kron(self.l_neg[i][None, :], blocks.M[i - 1])
            row += np.kron(self.l_pos[i][None, :], blocks.Mneg[i - 1])
        row += np.kron(self.l_neg[0][None, :], blocks.N1)
        row += np.kron(self.l_pos[0][None, :], blocks.Nneg)
        row[:, N * n2:(N + 1) * n2] += blocks.M0
        return row

    def assemble(self, blocks):
        n2 = 2 * self.sys.n
        L = self._base.copy()
        L[self.N * n2:(self.N + 1) * n2, :] = self.middle_row(blocks)
        return DiscretizedOperator(L=L, xi=blocks.xi, N=self.N)


def assemble_L(blocks, dd, sys):
    """One-shot assembly of ``L_xi^N`` (see :class:`OperatorAssembler`)."""
    from .system import ScaledSystem

    if isinstance(sys, ScaledSystem):
        sys = sys.sys
    return OperatorAssembler(sys, dd.grid.N, dd).assemble(blocks)


# ---------------------------------------------------------------- cut-off


_T_SAMPLES = cheb_points(199)


def approximation_error(ps, omega, t=_T_SAMPLES):
    """``max_t |exp(j omega t) - p_N(t; j omega)|`` over the sample points."""
    try:
        p = eval_pN(ps, 1j * omega, t)
    except PoleError:
        return math.inf
    return float(np.max(np.abs(np.exp(1j * omega * t) - p)))


@functools.lru_cache(maxsize=None)
def cutoff_frequency(N, delta=DEFAULT_DELTA):
    """Smallest ``omega`` at which the approximation error of ``p_N`` reaches ``delta``.

    Geometric scan (ratio 1.05) from 1e-2 followed by 30 bisection steps.
    """
    if not 0.0 < delta:
        raise ValueError("delta must be positive")
    ps = _cached_pn_solver(N)
    lo, hi = 0.0, 1e-2
    while approximation_error(ps, hi) < delta:
        lo, hi = hi, hi * 1.05
        if hi > 1e7:
            return math.inf
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if approximation_error(ps, mid) < delta:
            lo = mid
        else:
            hi = mid
    return hi


def cutoff_table(delta=DEFAULT_DELTA, nmax=N_MAX):
    """List of ``(N, omega_c)`` for ``N = 1..nmax``."""
    return [(N, cutoff_frequency(N, delta)) for N in range(1, nmax + 1)]


def choose_N(omega_c_target=None, delta=DEFAULT_DELTA, nmax=N_MAX):
    """Smallest N whose cut-off frequency reaches the target; 15 without a target."""
    if omega_c_target is None:
        return DEFAULT_N
    if omega_c_target < 0:
        raise ValueError("omega_c target must be nonnegative")
    for N in range(1, nmax + 1):
        if cutoff_frequency(N, delta) >= omega_c_target:
            return N
    raise UnreachableTargetError(
        f"cut-off frequency {omega_c_target} not reached with N <= {nmax} "
        f"(omega_c({nmax})={cutoff_frequency(nmax, delta):.4g}); "
        "rescale the problem or raise the cap"
    )
