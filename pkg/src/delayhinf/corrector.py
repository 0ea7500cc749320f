"""Gauss-Newton correction of predicted peaks and the full norm computation.

At a peak ``(w, xi)`` of a singular value curve, ``lam = j w`` is a double,
non-semisimple eigenvalue of ``H(lam, xi)``.  With ``v = [v1; v2]`` this gives
4n+3 real conditions on 4n+2 real unknowns:

    H(jw, xi) v = 0                                   (4n)
    c^* v - 1 = 0                                     (2)
    Im{ v2^* (I + sum A_i tau_i e^{-jw tau_i}
              + B Dxi^{-1} D^T C tau_0 e^{jw tau_0}) v1 } = 0   (1)

The conditions are consistent at a true peak, so Gauss-Newton converges
quadratically to a zero-residual solution.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, InstabilityError, NumericalError, SingularDxiError
from .levelset import (
    build_H_blocks,
    dH_dlambda,
    eval_H,
    imaginary_eigs,
    predict_gmax,
)
from .spectral import DEFAULT_DELTA, OperatorAssembler, choose_N, cutoff_frequency
from .system import ScaledSystem, as_scaled, check_stability, eval_transfer

log = logging.getLogger(__name__)

__all__ = [
    "CorrectionPoint",
    "HinfResult",
    "init_nullvector",
    "residual",
    "jacobian",
    "jordan_term",
    "gauss_newton",
    "start_frequencies",
    "start_point",
    "compute_hinf",
]

LARGE_CORRECTION = 0.1


def _unwrap(sys):
    return sys.sys if isinstance(sys, ScaledSystem) else sys


def max_workers():
    env = os.environ.get("DELAY_HINF_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@dataclass
class CorrectionPoint:
    omega: float
    xi: float
    v1: np.ndarray
    v2: np.ndarray
    ref: np.ndarray
    residual_norm: float = math.inf
    iterations: int = 0
    converged: bool = False

    @property
    def v(self):
        return np.concatenate([self.v1, self.v2])

    def pack(self):
        v = self.v
        n = len(self.v1)
        return np.concatenate(
            [v[:n].real, v[:n].imag, v[n:].real, v[n:].imag, [self.omega, self.xi]]
        )

    def unpack(self, x):
        n = len(self.v1)
        v1 = x[:n] + 1j * x[n:2 * n]
        v2 = x[2 * n:3 * n] + 1j * x[3 * n:4 * n]
        return CorrectionPoint(
            omega=float(x[4 * n]), xi=float(x[4 * n + 1]), v1=v1, v2=v2, ref=self.ref
        )


def init_nullvector(H):
    """Right singular vector of the smallest singular value of ``H``, split in halves."""
    _, _, Vh = np.linalg.svd(H)
    v = Vh[-1].conj()
    n = len(v) // 2
    return v[:n].copy(), v[n:].copy()


def _K(sys, blocks, omega):
    """``I + sum A_i tau_i e^{-jw tau_i} + B Dxi^{-1} D^T C tau_0 e^{jw tau_0}``."""
    n = sys.n
    tau = sys.tau
    K = np.eye(n, dtype=complex)
    for i in range(1, sys.m + 1):
        K += sys.A[i] * tau[i] * np.exp(-1j * omega * tau[i])
    K += sys.B @ blocks.Dxi_inv @ sys.D.T @ sys.C * (tau[0] * np.exp(1j * omega * tau[0]))
    return K


def jordan_term(pt, sys, blocks=None):
    """The scalar ``v2^* K v1`` whose imaginary part is the Jordan-chain condition."""
    sys = _unwrap(sys)
    if blocks is None:
        blocks = build_H_blocks(sys, pt.xi)
    return complex(pt.v2.conj() @ _K(sys, blocks, pt.omega) @ pt.v1)


def residual(pt, sys, blocks=None):
    """Stacked real residual of length ``4n + 3``."""
    sys = _unwrap(sys)
    if blocks is None:
        blocks = build_H_blocks(sys, pt.xi)
    v = pt.v
    Hv = eval_H(blocks, 1j * pt.omega, sys) @ v
    nv = np.vdot(pt.ref, v) - 1.0
    jt = jordan_term(pt, sys, blocks)
    return np.concatenate([Hv.real, Hv.imag, [nv.real, nv.imag, jt.imag]])


def _dblocks_dxi(sys, blocks):
    """Derivatives of ``M0``, ``N1``, ``N_-1`` with respect to xi."""
    n = sys.n
    B, C, D = sys.B, sys.C, sys.D
    Di = blocks.Dxi_inv
    dDi = 2.0 * blocks.xi * Di @ Di
    Z = np.zeros((n, n))
    dM0 = np.block([[Z, -B @ dDi @ B.T], [C.T @ D @ dDi @ D.T @ C, Z]])
    dN1 = np.block([[Z, Z], [Z, C.T @ D @ dDi @ B.T]])
    dNneg = np.block([[-B @ dDi @ D.T @ C, Z], [Z, Z]])
    return dDi, dM0, dN1, dNneg


def jacobian(pt, sys, blocks=None):
    """Analytic Jacobian of :func:`residual` w.r.t. ``(Re v1, Im v1, Re v2, Im v2, w, xi)``."""
    sys = _unwrap(sys)
    if blocks is None:
        blocks = build_H_blocks(sys, pt.xi)
    n = sys.n
    w = pt.omega
    lam = 1j * w
    tau0 = sys.tau[0]
    v = pt.v
    H = eval_H(blocks, lam, sys)
    dDi, dM0, dN1, dNneg = _dblocks_dxi(sys, blocks)
    dH_dxi = -(dM0 + dN1 * np.exp(-lam * tau0) + dNneg * np.exp(lam * tau0))

    Jc = np.empty((2 * n, 4 * n + 2), dtype=complex)
    Jc[:, 0:n] = H[:, :n]
    Jc[:, n:2 * n] = 1j * H[:, :n]
    Jc[:, 2 * n:3 * n] = H[:, n:]
    Jc[:, 3 * n:4 * n] = 1j * H[:, n:]
    Jc[:, 4 * n] = 1j * (dH_dlambda(blocks, lam, sys) @ v)
    Jc[:, 4 * n + 1] = dH_dxi @ v

    c1, c2 = pt.ref[:n].conj(), pt.ref[n:].conj()
    Jn = np.concatenate([c1, 1j * c1, c2, 1j * c2, [0.0, 0.0]])

    K = _K(sys, blocks, w)
    v1, v2 = pt.v1, pt.v2
    row_v1 = v2.conj() @ K
    Kv1 = K @ v1
    dK_dw = np.zeros((n, n), dtype=complex)
    for i in range(1, sys.m + 1):
        ti = sys.tau[i]
        dK_dw += sys.A[i] * (-1j * ti * ti) * np.exp(-1j * w * ti)
    dK_dw += sys.B @ blocks.Dxi_inv @ sys.D.T @ sys.C * (1j * tau0 * tau0 * np.exp(1j * w * tau0))
    dK_dxi = sys.B @ dDi @ sys.D.T @ sys.C * (tau0 * np.exp(1j * w * tau0))
    Jj = np.concatenate([
        row_v1.imag,
        row_v1.real,
        Kv1.imag,
        -Kv1.real,
        [(v2.conj() @ dK_dw @ v1).imag, (v2.conj() @ dK_dxi @ v1).imag],
    ])
    return np.vstack([Jc.real, Jc.imag, Jn.real[None, :], Jn.imag[None, :], Jj[None, :]])


def _h_scale(sys, pt):
    try:
        return float(np.linalg.norm(eval_H(build_H_blocks(sys, pt.xi), 1j * pt.omega, sys), 2))
    except SingularDxiError:
        return 1.0


def gauss_newton(pt0, sys, max_iter=50, rtol=1e-12, conv_tol=1e-10):
    """Solve the peak equations in the least-squares sense.

    Each step solves ``J d = -r`` by pivoted QR and halves the step while the
    residual norm grows.  Raises :class:`ConvergenceError` on failure; the
    exception carries ``rank_deficient`` when the Jacobian lost rank.
    """
    sys = _unwrap(sys)
    xi0 = pt0.xi
    pt = pt0
    x = pt.pack()
    blocks = build_H_blocks(sys, pt.xi)
    r = residual(pt, sys, blocks)
    rn = float(np.linalg.norm(r))
    hs = _h_scale(sys, pt)
    rank_deficient = False
    it = 0
    for it in range(1, max_iter + 1):
        if rn <= rtol * (1.0 + hs):
            it -= 1
            break
        J = jacobian(pt, sys, blocks)
        sv = np.linalg.svd(J, compute_uv=False)
        rank_deficient = sv[-1] < 1e-10 * sv[0]
        d, *_ = sla.lstsq(J, -r, lapack_driver="gelsy", check_finite=False)
        step = 1.0
        for _ in range(12):
            xn = x + step * d
            cand = pt.unpack(xn)
            if not 0.0 < cand.xi <= 10.0 * xi0:
                step *= 0.5
                continue
            try:
                bn = build_H_blocks(sys, cand.xi)
            except SingularDxiError:
                step *= 0.5
                continue
            rnew = residual(cand, sys, bn)
            rnn = float(np.linalg.norm(rnew))
            if rnn < rn or step < 1e-3:
                break
            step *= 0.5
        else:
            raise ConvergenceError("Gauss-Newton: xi left (0, 10 xi0] or D_xi singular")
        if not 0.0 < cand.xi <= 10.0 * xi0:
            raise ConvergenceError(f"Gauss-Newton diverged: xi={cand.xi:.6g}")
        small_step = np.linalg.norm(xn - x) <= 1e-14 * (1.0 + np.linalg.norm(x))
        x, pt, blocks, r, rn = xn, cand, bn, rnew, rnn
        hs = _h_scale(sys, pt)
        if small_step:
            break
    # the stopping test scales with |H|, which large C^T C or B B^T blocks
    # inflate; a couple of plain steps recover the last digits of xi
    for _ in range(2):
        try:
            d, *_ = sla.lstsq(jacobian(pt, sys, blocks), -r, lapack_driver="gelsy",
                              check_finite=False)
            cand = pt.unpack(x + d)
            bn = build_H_blocks(sys, cand.xi)
        except (SingularDxiError, ValueError):
            break
        rnew = residual(cand, sys, bn)
        rnn = float(np.linalg.norm(rnew))
        if not rnn < rn:
            break
        x, pt, blocks, r, rn = x + d, cand, bn, rnew, rnn
        it += 1
    pt.residual_norm = rn
    pt.iterations = it
    pt.converged = rn <= conv_tol * (1.0 + hs)
    if not pt.converged:
        exc = ConvergenceError(
            f"Gauss-Newton did not converge (residual {rn:.3e} after {it} iterations)"
        )
        exc.rank_deficient = rank_deficient
        exc.point = pt
        raise exc
    return pt


@dataclass
class HinfResult:
    norm: float
    peak_omega: float
    predicted_norm: float
    N: int
    candidates: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    prediction: object = field(default=None, repr=False)

    def to_dict(self):
        return {
            "hinf": self.norm,
            "peak_omega": self.peak_omega,
            "predicted": self.predicted_norm,
            "N": self.N,
            "candidates": [
                {
                    "omega": c["omega"],
                    "xi": c["xi"],
                    "iterations": c["iterations"],
                    "residual": c["residual"],
                }
                for c in self.candidates
            ],
            "warnings": list(self.warnings),
        }


def _start_point(sys, omega, xi, blocks):
    H = eval_H(blocks, 1j * omega, sys)
    v1, v2 = init_nullvector(H)
    ref = np.concatenate([v1, v2])
    return CorrectionPoint(omega=float(omega), xi=float(xi), v1=v1, v2=v2, ref=ref)


def _correct_one(sys, omega, xi_l, blocks):
    pt0 = _start_point(sys, omega, xi_l, blocks)
    try:
        return gauss_newton(pt0, sys), None
    except (ConvergenceError, SingularDxiError) as exc:
        return None, exc


def _dedupe(values, tol=1e-6):
    out = []
    for w in sorted(values):
        if not out or w - out[-1] > tol * (1.0 + abs(w)):
            out.append(w)
    return out


def start_frequencies(sys, pred, N, tol=1e-6):
    """Frequencies (scaled units) from which the corrector is started.

    The last crossings, the best probe frequency, and the imaginary
    eigenvalues of ``L`` at ``xi_l`` itself.  Returns ``(starts, xi, blocks)``
    with the level and blocks the starting points use.
    """
    sys = _unwrap(sys)
    xi_l = pred.xi_l
    starts = list(pred.crossings)
    if pred.best_omega is not None:
        starts.append(pred.best_omega)
    try:
        blocks = build_H_blocks(sys, xi_l)
        starts += imaginary_eigs(OperatorAssembler(sys, N).assemble(blocks))
    except SingularDxiError:
        # static gain: xi_l = sigma_1(D) exactly
        blocks = build_H_blocks(sys, xi_l * (1.0 + 2.0 * tol))
        xi_l = blocks.xi
    return _dedupe(starts), xi_l, blocks


def start_point(sys, omega, xi, blocks=None):
    """Initial :class:`CorrectionPoint`: null vector of ``H(j omega, xi)``."""
    sys = _unwrap(sys)
    if blocks is None:
        blocks = build_H_blocks(sys, xi)
    return _start_point(sys, omega, xi, blocks)


def _static_result(s, sigD, pred, N):
    try:
        at_zero = float(np.linalg.norm(eval_transfer(s, 0.0), 2)) >= sigD
    except NumericalError:
        at_zero = False
    return HinfResult(
        norm=sigD,
        peak_omega=0.0 if at_zero else math.inf,
        predicted_norm=float(pred.xi_pred),
        N=N,
        prediction=pred,
    )


def compute_hinf(sys, N=None, omega_c=None, omega_t=None, tol=1e-6,
                 check=True, N_stab=20, delta=DEFAULT_DELTA):
    """H-infinity norm of the transfer function of ``sys`` (predict, then correct).

    ``omega_c`` and ``omega_t`` are in the units of ``sys``; they are mapped to
    the rescaled problem internally, and ``peak_omega`` is mapped back.
    """
    if check:
        est = check_stability(sys, N_stab=N_stab)
        if not est.stable:
            raise InstabilityError(est.rightmost)
    ssys = as_scaled(sys)
    s = ssys.sys
    scale = ssys.scale
    if N is None:
        N = choose_N(None if omega_c is None else omega_c * scale, delta)
    wt = None if omega_t is None else omega_t * scale
    pred = predict_gmax(ssys, N, omega_t=wt, tol=tol)
    warnings = []

    xi_l = pred.xi_l
    sigD = float(np.linalg.norm(s.D, 2)) if s.D.size else 0.0
    if pred.state.iterations == 1 and xi_l <= sigD * (1.0 + 1e-15):
        # no crossings just above sigma_1(D): the supremum is sigma_1(D) itself
        return _static_result(s, sigD, pred, N)
    starts, xi_l, blocks = start_frequencies(s, pred, N, tol)

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        outcomes = list(pool.map(lambda w: _correct_one(s, w, xi_l, blocks), starts))

    points = [pt for pt, _ in outcomes if pt is not None]
    rank_trouble = any(getattr(e, "rank_deficient", False) for _, e in outcomes if e)
    for w, (pt, exc) in zip(starts, outcomes):
        if exc is not None:
            log.info("candidate at w=%.6g dropped: %s", w, exc)

    merged = []
    for pt in sorted(points, key=lambda p: abs(p.omega)):
        w = abs(pt.omega)
        if merged and abs(w - abs(merged[-1].omega)) < 1e-6 * (1.0 + w):
            if pt.xi > merged[-1].xi:
                merged[-1] = pt
            continue
        merged.append(pt)

    if merged:
        best = max(merged, key=lambda p: p.xi)
        norm, w_peak = best.xi, abs(best.omega)
    elif pred.state.iterations == 1:
        # the initial lower bound is attained and nothing lies above it
        norm = pred.xi_l
        w_peak = pred.best_omega if pred.best_omega is not None else 0.0
    else:
        pred_fine = predict_gmax(ssys, N, omega_t=wt, tol=1e-9)
        norm = pred_fine.xi_pred
        w_peak = pred_fine.best_omega if pred_fine.best_omega is not None else 0.0
        msg = "corrector failed for all candidates; reporting the predictor value at tol=1e-9"
        if rank_trouble:
            msg += " (rank-deficient Jacobian: multiple singular value at the peak?)"
        warnings.append(msg)
    if sigD > norm:
        # supremum approached as w -> infinity
        norm, w_peak = sigD, math.inf

    xi_pred = pred.xi_pred
    if abs(norm - xi_pred) > LARGE_CORRECTION * xi_pred:
        warnings.append(
            f"correction changed the prediction by more than 10% "
            f"({xi_pred:.6g} -> {norm:.6g}); the prediction may be inaccurate, increase N"
        )
    wc = cutoff_frequency(N, DEFAULT_DELTA)
    w_pred = pred.best_omega if pred.best_omega is not None else 0.0
    w_hi = max(w_pred, w_peak if math.isfinite(w_peak) else 0.0)
    if w_hi > wc:
        warnings.append(
            f"peak frequency {w_hi / scale:.6g} exceeds the cut-off frequency "
            f"{wc / scale:.6g} of N={N}; increase the cut-off frequency (or N)"
        )

    candidates = [
        {
            "omega": abs(p.omega) / scale,
            "xi": p.xi,
            "iterations": p.iterations,
            "residual": p.residual_norm,
        }
        for p in merged
    ]
    return HinfResult(
        norm=float(norm),
        peak_omega=float(w_peak / scale) if math.isfinite(w_peak) else math.inf,
        predicted_norm=float(xi_pred),
        N=N,
        candidates=candidates,
        warnings=warnings,
        prediction=pred,
    )
