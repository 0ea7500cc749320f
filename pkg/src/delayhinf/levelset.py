"""Level-set prediction of the H-infinity norm on the discretized problem.

Horizontal searches (fixed level ``xi``) read off the imaginary-axis
eigenvalues of ``L_xi^N``; vertical searches (fixed ``omega``) read off the
largest real eigenvalue of ``M_N(j omega)``.  Alternating the two gives the
criss-cross iteration for ``g_max(N)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, NumericalError, SingularDxiError
from .spectral import OperatorAssembler, _cached_pn_solver, eval_pN
from .system import ScaledSystem, eval_transfer, resolvent_matrix, solve_resolvent

log = logging.getLogger(__name__)

__all__ = [
    "HBlocks",
    "MNMatrix",
    "LevelSetState",
    "Prediction",
    "build_H_blocks",
    "eval_H",
    "eval_HN",
    "dH_dlambda",
    "eval_MN",
    "lambda1",
    "imaginary_eigs",
    "predict_gmax",
    "TOL_AXIS",
]

# shared with the delay-free oracle
TOL_AXIS = 1e-7


def _unwrap(sys):
    return sys.sys if isinstance(sys, ScaledSystem) else sys


@dataclass(frozen=True)
class HBlocks:
    """The xi-dependent 2n x 2n coefficient matrices of ``H(lam, xi)``."""

    xi: float
    Dxi_inv: np.ndarray = field(repr=False)
    M0: np.ndarray = field(repr=False)
    M: tuple = field(repr=False)
    Mneg: tuple = field(repr=False)
    N1: np.ndarray = field(repr=False)
    Nneg: np.ndarray = field(repr=False)

    def norms(self):
        """Spectral norms ``(|M0|, [|M_i|], [|M_-i|], |N1|, |N_-1|)``."""
        nrm = lambda X: np.linalg.norm(X, 2)
        return (
            nrm(self.M0),
            [nrm(X) for X in self.M],
            [nrm(X) for X in self.Mneg],
            nrm(self.N1),
            nrm(self.Nneg),
        )


def _dxi_inverse(D, xi):
    Dxi = D.T @ D - xi**2 * np.eye(D.shape[1])
    smin = np.min(np.abs(np.linalg.eigvalsh(Dxi))) if Dxi.size else 1.0
    if smin <= 1e-12 * max(1.0, xi**2):
        raise SingularDxiError(f"D^T D - xi^2 I is singular at xi={xi!r}")
    # symmetric indefinite (Bunch-Kaufman) solve
    inv = sla.solve(Dxi, np.eye(Dxi.shape[0]), assume_a="sym")
    return 0.5 * (inv + inv.T)


def build_H_blocks(sys, xi):
    """Blocks ``M_0, M_{+-i}, N_{+-1}`` at level ``xi``."""
    sys = _unwrap(sys)
    if not xi > 0:
        raise ValueError("xi must be positive")
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    n = sys.n
    Di = _dxi_inverse(D, xi)
    Z = np.zeros((n, n))
    M0 = np.block([
        [A[0], -B @ Di @ B.T],
        [-C.T @ C + C.T @ D @ Di @ D.T @ C, -A[0].T],
    ])
    M = tuple(np.block([[Ai, Z], [Z, Z]]) for Ai in A[1:])
    Mneg = tuple(np.block([[Z, Z], [Z, -Ai.T]]) for Ai in A[1:])
    N1 = np.block([[Z, Z], [Z, C.T @ D @ Di @ B.T]])
    Nneg = np.block([[-B @ Di @ D.T @ C, Z], [Z, Z]])
    return HBlocks(xi=float(xi), Dxi_inv=Di, M0=M0, M=M, Mneg=Mneg, N1=N1, Nneg=Nneg)


def _H_from_factors(blocks, lam, sys, f_neg, f_pos):
    """``lam I - M0 - sum(M_i f_neg[i] + M_-i f_pos[i]) - N1 f_neg[0] - N_-1 f_pos[0]``."""
    n2 = 2 * sys.n
    H = lam * np.eye(n2, dtype=complex) - blocks.M0
    for i in range(1, sys.m + 1):
        H -= blocks.M[i - 1] * f_neg[i] + blocks.Mneg[i - 1] * f_pos[i]
    H -= blocks.N1 * f_neg[0] + blocks.Nneg * f_pos[0]
    return H


def eval_H(blocks, lam, sys):
    sys = _unwrap(sys)
    tau = np.asarray(sys.tau)
    return _H_from_factors(blocks, lam, sys, np.exp(-lam * tau), np.exp(lam * tau))


def dH_dlambda(blocks, lam, sys):
    """Derivative of ``H(lam, xi)`` with respect to ``lam``."""
    sys = _unwrap(sys)
    tau = np.asarray(sys.tau)
    n2 = 2 * sys.n
    dH = np.eye(n2, dtype=complex)
    en, ep = np.exp(-lam * tau), np.exp(lam * tau)
    for i in range(1, sys.m + 1):
        dH += tau[i] * (blocks.M[i - 1] * en[i] - blocks.Mneg[i - 1] * ep[i])
    dH += tau[0] * (blocks.N1 * en[0] - blocks.Nneg * ep[0])
    return dH


def _pn_factors(ps, lam, tau):
    pts = np.concatenate([-tau, tau])
    vals = eval_pN(ps, lam, pts)
    k = len(tau)
    return vals[:k], vals[k:]


def eval_HN(blocks, lam, ps, sys):
    """``H`` with every ``exp(+-lam tau_i)`` replaced by ``p_N(+-tau_i; lam)``."""
    sys = _unwrap(sys)
    f_neg, f_pos = _pn_factors(ps, lam, np.asarray(sys.tau))
    return _H_from_factors(blocks, lam, sys, f_neg, f_pos)


# ------------------------------------------------------------- vertical


@dataclass(frozen=True)
class MNMatrix:
    omega: float
    value: np.ndarray = field(repr=False)
    r: float
    hermitian_flag: bool

    def eigenvalues(self):
        if self.hermitian_flag:
            H = 0.5 * (self.value + self.value.conj().T)
            return np.linalg.eigvalsh(H).astype(complex)
        return np.linalg.eigvals(self.value)


def eval_MN(sys, omega, ps):
    """The 2n_u x 2n_u matrix whose eigenvalue ``xi^2`` marks curve points at ``omega``."""
    sys = _unwrap(sys)
    tau = np.asarray(sys.tau)
    lam = 1j * float(omega)
    f_neg, f_pos = _pn_factors(ps, lam, tau)
    Rm = resolvent_matrix(sys, lam, state_exp=f_neg[1:])
    Y = sys.C @ solve_resolvent(Rm, sys.B.astype(complex))
    X = sys.D.T @ Y * f_pos[0]
    r = 1.0 / abs(f_neg[0]) ** 2 - 1.0
    sr = np.sqrt(complex(r))
    DtD = sys.D.T @ sys.D
    top = X + X.conj().T + Y.conj().T @ Y + DtD
    value = np.block([[top, sr * X.conj().T], [sr * X, DtD.astype(complex)]])
    return MNMatrix(omega=float(omega), value=value, r=float(r), hermitian_flag=r >= 0.0)


def lambda1(mn):
    """Largest real eigenvalue of ``M_N`` (complex pairs are ignored)."""
    ev = mn.eigenvalues()
    real = ev[np.abs(ev.imag) <= 1e-8 * (1.0 + np.abs(ev.real))]
    if real.size == 0:
        return -math.inf
    return float(np.max(real.real))


# ----------------------------------------------------------- horizontal


def imaginary_eigs(L, tol_axis=TOL_AXIS, return_all=False):
    """Sorted nonnegative frequencies of the (numerically) imaginary eigenvalues.

    An eigenvalue counts as imaginary when ``|Re lam| <= tol_axis * max(1, |Im lam|)``.
    """
    mat = L.L if hasattr(L, "L") else L
    try:
        ev = sla.eigvals(mat, check_finite=False, overwrite_a=False)
    except sla.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from None
    on_axis = np.abs(ev.real) <= tol_axis * np.maximum(1.0, np.abs(ev.imag))
    w = np.sort(ev.imag[on_axis & (ev.imag >= -tol_axis)])
    w = np.abs(w)
    w.sort()
    out = []
    for x in w:
        if not out or x - out[-1] > 1e-8:
            out.append(float(x))
    if return_all:
        return out, ev
    return out


def _midpoints(crossings):
    """Probe frequencies between consecutive crossings.

    Geometric means, with arithmetic means for pairs that touch 0; the
    interval ``[0, w_1]`` is probed too, and a lone last crossing is followed
    by a probe at ``1.1 w_last``.
    """
    w = list(crossings)
    mids = []
    if w and w[0] > 0:
        mids.append(0.5 * w[0])
    for a, b in zip(w[:-1], w[1:]):
        mids.append(math.sqrt(a * b) if a > 0 else 0.5 * (a + b))
    if len(w) % 2 == 1:
        mids.append(1.1 * w[-1])
    return mids


@dataclass
class LevelSetState:
    xi_l: float
    crossings: list = field(default_factory=list)
    midpoints: list = field(default_factory=list)
    iterations: int = 0
    history: list = field(default_factory=list)

    def trace_lines(self):
        return "".join(json.dumps(h) + "\n" for h in self.history)


@dataclass
class Prediction:
    xi_pred: float
    xi_l: float
    crossings: list
    best_omega: float | None
    state: LevelSetState
    N: int


def predict_gmax(
    sys,
    N,
    omega_t=None,
    tol=1e-6,
    max_iter=50,
    tol_axis=TOL_AXIS,
    xi_guard=None,
):
    """Criss-cross search for ``g_max(N)`` on the scaled system ``sys``.

    Returns a :class:`Prediction` whose ``xi_pred`` is ``(xi + xi_l) / 2``
    with ``xi`` the first level without imaginary-axis eigenvalues.
    """
    ssys = sys if isinstance(sys, ScaledSystem) else ScaledSystem(sys)
    s = ssys.sys
    ps = _cached_pn_solver(N)
    asm = OperatorAssembler(s, N)
    sigD = float(np.linalg.norm(s.D, 2)) if s.D.size else 0.0

    candidates = [sigD, tol]
    best_omega = None
    try:
        g0 = float(np.linalg.norm(eval_transfer(s, 0.0), 2))
        candidates.append(g0)
        best_omega = 0.0
    except NumericalError:
        g0 = 0.0
    if omega_t is not None:
        lt = lambda1(eval_MN(s, omega_t, ps))
        candidates.append(math.sqrt(max(lt, 0.0)))
    xi_l = max(candidates)
    if omega_t is not None and xi_l == candidates[-1] and xi_l > g0:
        best_omega = float(omega_t)
    state = LevelSetState(xi_l=xi_l)
    if xi_guard is None:
        xi_guard = 1e8 * max(1.0, xi_l)

    last_crossings = []
    while True:
        if state.iterations >= max_iter:
            raise ConvergenceError(
                f"level-set iteration did not terminate in {max_iter} levels"
            )
        xi = xi_l * (1.0 + 2.0 * tol)
        if xi > xi_guard:
            raise NumericalError(
                "g_max(N) appears infinite: crossings persist as xi grows "
                "(|p_N(-tau_0; j w)| <= 1 violated?)"
            )
        try:
            blocks = build_H_blocks(s, xi)
        except SingularDxiError:
            xi = xi * (1.0 + 2.0 * tol)
            blocks = build_H_blocks(s, xi)
        crossings = imaginary_eigs(asm.assemble(blocks), tol_axis)
        state.iterations += 1
        if not crossings:
            state.history.append(
                {"xi": xi, "crossings": [], "midpoints": [], "lambda1_values": []}
            )
            break
        mids = _midpoints(crossings)
        lam1 = []
        for mu in mids:
            try:
                lam1.append(lambda1(eval_MN(s, mu, ps)))
            except NumericalError:
                lam1.append(-math.inf)
        vals = [math.sqrt(max(v, sigD**2)) for v in lam1]
        k = int(np.argmax(vals))
        new_xi_l = max(vals[k], xi)
        if vals[k] >= xi:
            best_omega = mids[k]
        state.history.append(
            {
                "xi": xi,
                "crossings": crossings,
                "midpoints": mids,
                "lambda1_values": [v if math.isfinite(v) else None for v in lam1],
            }
        )
        log.debug("level %d: xi=%.10g, %d crossings, xi_l -> %.10g",
                  state.iterations, xi, len(crossings), new_xi_l)
        last_crossings = crossings
        xi_l = new_xi_l
        state.xi_l = xi_l
        state.crossings = crossings
        state.midpoints = mids

    return Prediction(
        xi_pred=0.5 * (xi + xi_l),
        xi_l=xi_l,
        crossings=last_crossings,
        best_omega=best_omega,
        state=state,
        N=N,
    )
