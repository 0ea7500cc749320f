import math

import numpy as np
import numpy.polynomial.chebyshev as npcheb
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delayhinf.errors import PoleError, UnreachableTargetError
from delayhinf.levelset import build_H_blocks
from delayhinf.spectral import (
    OperatorAssembler,
    assemble_L,
    barycentric_weights,
    cheb_grid,
    cheb_points,
    choose_N,
    cutoff_frequency,
    cutoff_table,
    diff_data,
    diff_matrix,
    eval_pN,
    lagrange_values,
    pn_solver,
)
from delayhinf.system import as_scaled


@pytest.mark.parametrize("N", [1, 2, 7, 15, 40])
def test_grid_shape_and_symmetry(N):
    g = cheb_grid(N)
    th = g.theta
    assert len(th) == 2 * N + 1
    assert th[N] == 0.0 and th[0] == -1.0 and th[-1] == 1.0
    assert np.all(np.diff(th) > 0)
    assert np.array_equal(th, -th[::-1])
    i = np.arange(-N, N + 1)
    assert np.allclose(th, np.cos((N - i) * np.pi / (2 * N)), atol=1e-15)


def test_differentiation_of_exponential():
    g = cheb_grid(12)
    D = diff_data(g).full
    f = np.exp(2 * g.theta)
    assert np.max(np.abs(D @ f - 2 * f)) < 1e-8


def test_differentiation_exact_on_polynomials():
    x = cheb_points(10)
    D = diff_matrix(x, barycentric_weights(10))
    for k in range(11):
        c = np.zeros(k + 1)
        c[-1] = 1.0
        assert np.allclose(D @ npcheb.chebval(x, c), npcheb.chebval(x, npcheb.chebder(c)),
                           atol=1e-11)


def test_derivative_rows_drop_middle():
    dd = diff_data(cheb_grid(4))
    assert dd.dweights.shape == (8, 9)
    assert np.array_equal(dd.dweights[4], dd.full[5])


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-1.0, max_value=1.0))
def test_lagrange_partition_of_unity(t):
    g = cheb_grid(9)
    lv = lagrange_values(g.theta, g.weights, t)
    assert abs(lv.sum() - 1.0) < 1e-12
    assert abs(lv @ g.theta**3 - t**3) < 1e-12


def test_lagrange_at_node():
    g = cheb_grid(5)
    lv = lagrange_values(g.theta, g.weights, g.theta[3])
    assert np.array_equal(lv, np.eye(11)[3])


@pytest.mark.parametrize("lam", [0.0, 0.3, 2j, -1.5 + 4j, 10j])
def test_pN_collocation(lam):
    N = 10
    ps = pn_solver(N)
    alpha = ps.coefficients(lam)
    th = cheb_points(2 * N)
    p = npcheb.chebval(th, alpha)
    dp = npcheb.chebval(th, npcheb.chebder(alpha))
    assert abs(p[N] - 1.0) < 1e-12
    res = np.delete(dp - lam * p, N)
    assert np.max(np.abs(res)) <= 1e-10 * (1 + abs(lam)) * max(1.0, np.max(np.abs(p)))


def test_pN_lambda_zero_is_constant():
    ps = pn_solver(6)
    assert np.allclose(eval_pN(ps, 0.0, np.linspace(-1, 1, 7)), 1.0, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=-5, max_value=5),
    st.floats(min_value=-15, max_value=15),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_pN_grid_symmetry(re, im, tau):
    ps = pn_solver(8)
    lam = complex(re, im)
    try:
        a = eval_pN(ps, lam, [-tau])[0]
        b = eval_pN(ps, -lam, [tau])[0]
    except PoleError:
        return
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_pN_accuracy_inside_band():
    p = eval_pN(pn_solver(10), 5j, [-1.0])[0]
    assert abs(p - np.exp(-5j)) / abs(np.exp(-5j)) < 0.1


def test_pole_detection():
    # N=1: p(t) = 1 + b t + c t^2 with c (1 - lam^2 / 2) = lam^2 / 2, a pole at sqrt(2)
    ps = pn_solver(1)
    with pytest.raises(PoleError):
        ps.coefficients(math.sqrt(2.0))
    assert np.isfinite(ps.coefficients(1.0)).all()


def test_cutoff_examples():
    assert cutoff_frequency(8, 0.1) > 10.0
    vals = [cutoff_frequency(N, 0.1) for N in range(2, 21)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    # smaller delta means a narrower band
    assert cutoff_frequency(10, 0.01) < cutoff_frequency(10, 0.1)


def test_cutoff_definition():
    N, d = 10, 0.1
    wc = cutoff_frequency(N, d)
    ps = pn_solver(N)
    t = cheb_points(199)
    err = lambda w: np.max(np.abs(np.exp(1j * w * t) - eval_pN(ps, 1j * w, t)))
    assert err(0.99 * wc) < d <= err(1.01 * wc)


def test_choose_N():
    assert choose_N() == 15
    assert choose_N(10.0) <= 8
    assert cutoff_frequency(choose_N(20.0)) >= 20.0
    assert cutoff_frequency(choose_N(20.0) - 1) < 20.0
    with pytest.raises(UnreachableTargetError):
        choose_N(1e4, nmax=20)


def test_cutoff_table():
    t = cutoff_table(0.1, 5)
    assert [r[0] for r in t] == [1, 2, 3, 4, 5]


def test_operator_structure(g12):
    s = as_scaled(g12).sys
    N = 4
    asm = OperatorAssembler(s, N)
    b = build_H_blocks(s, 1.0)
    L = asm.assemble(b).L
    n2 = 2 * s.n
    assert L.shape == ((2 * N + 1) * n2,) * 2
    K = np.kron(diff_data(cheb_grid(N)).full, np.eye(n2))
    rows = np.r_[0:N * n2, (N + 1) * n2:(2 * N + 1) * n2]
    assert np.array_equal(L[rows], K[rows])
    assert np.array_equal(L, assemble_L(b, diff_data(cheb_grid(N)), s).L)
    # middle row at theta = 0 block carries M0 plus the Lagrange weights
    mid = L[N * n2:(N + 1) * n2]
    assert np.allclose(mid.reshape(n2, 2 * N + 1, n2).sum(axis=1),
                       b.M0 + sum(b.M) + sum(b.Mneg) + b.N1 + b.Nneg)


def test_repeated_assembly_leaves_base_untouched(g12):
    s = as_scaled(g12).sys
    asm = OperatorAssembler(s, 3)
    L1 = asm.assemble(build_H_blocks(s, 1.0)).L
    asm.assemble(build_H_blocks(s, 2.0))
    assert np.array_equal(L1, asm.assemble(build_H_blocks(s, 1.0)).L)


def test_cutoff_rejects_bad_delta():
    with pytest.raises(ValueError):
        cutoff_frequency(3, 0.0)
