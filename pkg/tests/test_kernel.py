import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import i1, j1

from backstepping2d import (DomainError, build_kernel_table, eval_kernel,
                            kernel_pde_residual, solve_kernel_goursat)
from backstepping2d.kernel import KernelTable, series_terms


def bessel_oracle(lam, y, xi):
    """-lam xi I1(s)/s in 50-digit arithmetic, J1 branch for lam (y^2-xi^2) < 0."""
    with mpmath.workdps(50):
        z = mpmath.mpf(lam) * (mpmath.mpf(y) ** 2 - mpmath.mpf(xi) ** 2)
        if z == 0:
            return float(-mpmath.mpf(lam) * xi / 2)
        if z > 0:
            s = mpmath.sqrt(z)
            return float(-lam * mpmath.mpf(xi) * mpmath.besseli(1, s) / s)
        s = mpmath.sqrt(-z)
        return float(-lam * mpmath.mpf(xi) * mpmath.besselj(1, s) / s)


def test_diagonal_value():
    assert eval_kernel(1.0, 0.8, 0.8) == pytest.approx(-0.4, abs=1e-15)


def test_zero_reaction():
    assert eval_kernel(0.0, 0.7, 0.3) == 0.0


def test_positive_lambda_value():
    # z = 0.75; sum = 1.096730...; K = -0.25 * sum
    assert eval_kernel(1.0, 1.0, 0.5) == pytest.approx(-0.27418147392871, abs=1e-13)
    s = math.sqrt(0.75)
    assert eval_kernel(1.0, 1.0, 0.5) == pytest.approx(-0.5 * i1(s) / s, rel=1e-14)


def test_negative_lambda_is_bessel_j_branch():
    # z = -3: K = -lam xi J1(sqrt 3)/sqrt 3
    assert eval_kernel(-4.0, 1.0, 0.5) == pytest.approx(0.66905247759524, abs=1e-13)
    s = math.sqrt(3.0)
    assert eval_kernel(-4.0, 1.0, 0.5) == pytest.approx(2.0 * j1(s) / s, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(lam=st.floats(-200, 200), y=st.floats(0, 1), frac=st.floats(0, 1))
def test_series_matches_high_precision_bessel(lam, y, frac):
    xi = y * frac
    expected = bessel_oracle(lam, y, xi)
    # for lam < 0 the series alternates; rounding is bounded by the sum of
    # absolute terms, which is the same series at |z|
    z = abs(lam * (y * y - xi * xi))
    scale = 0.5 * abs(lam) * xi * series_terms(z).sum()
    assert abs(eval_kernel(lam, y, xi) - expected) <= 1e-13 * abs(expected) + 1e-14 * scale + 1e-300


@pytest.mark.parametrize("y, xi", [(0.5, 0.6), (0.5, -0.1), (1.1, 0.5)])
def test_outside_triangle(y, xi):
    with pytest.raises(DomainError):
        eval_kernel(1.0, y, xi)


def test_continuity_across_zero_lambda():
    eps = 1e-6
    for lam in (eps, -eps):
        assert abs(eval_kernel(lam, 0.9, 0.4)) <= 1.0 * eps


@pytest.mark.parametrize("z", [-200.0, -4.0, 4.0, 200.0])
def test_series_tail_negligible_at_cap(z):
    terms = series_terms(z)
    assert abs(terms[-1]) < 1e-30 * abs(terms.sum())


@pytest.mark.parametrize("lam", [-5, -1, 0, 1, 10, 30])
@pytest.mark.parametrize("n", [9, 50, 101])
def test_table_boundary_identities(lam, n):
    diag, edge = build_kernel_table(lam, n).boundary_errors()
    assert diag <= 1e-12
    assert edge <= 1e-12


def test_zero_table():
    t = build_kernel_table(0.0, 50)
    assert not np.any(t.values)
    assert kernel_pde_residual(t) == 0.0


def test_table_entries_match_pointwise():
    t = build_kernel_table(7.5, 21)
    for j, k in [(20, 10), (13, 4), (5, 5)]:
        assert t.values[j, k] == eval_kernel(7.5, j / 20, k / 20)
    assert not np.any(np.triu(t.values, 1))


def test_quadrature_matrix_integrates_kernel_times_field():
    t = build_kernel_table(3.0, 11)
    q = t.quadrature_matrix()
    f = np.linspace(0, 1, 11) ** 2
    j = 7
    expected = np.trapezoid(t.values[j, : j + 1] * f[: j + 1], dx=t.h)
    assert q[j] @ f == pytest.approx(expected, rel=1e-14)


def test_residual_second_order():
    r1 = kernel_pde_residual(build_kernel_table(10.0, 101))
    r2 = kernel_pde_residual(build_kernel_table(10.0, 201))
    assert 3.5 <= r1 / r2 <= 4.5


def test_residual_flags_corrupted_diagonal():
    clean = build_kernel_table(10.0, 101)
    bad = clean.values.copy()
    idx = np.arange(clean.n)
    bad[idx, idx] *= -1.0
    corrupted = KernelTable(clean.lam, clean.n, bad)
    assert kernel_pde_residual(corrupted) >= 10 * kernel_pde_residual(clean)


def test_goursat_zero_lambda():
    assert not np.any(solve_kernel_goursat(0.0, 33).values)


def test_goursat_point_value():
    g = solve_kernel_goursat(1.0, 101)
    assert g.values[100, 50] == pytest.approx(-0.27418147, abs=1e-3)


def test_goursat_boundary_data():
    g = solve_kernel_goursat(10.0, 41)
    diag, edge = g.boundary_errors()
    assert edge == 0.0
    assert diag <= 1e-12


@pytest.mark.parametrize("lam", [-4.0, 1.0, 10.0])
def test_goursat_converges_second_order(lam):
    ns = (51, 101, 201)
    errs = [np.max(np.abs(solve_kernel_goursat(lam, n).values
                          - build_kernel_table(lam, n).values)) for n in ns]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.8


def test_goursat_large_lambda_still_converges():
    g = solve_kernel_goursat(200.0, 41)
    c = build_kernel_table(200.0, 41)
    rel = np.max(np.abs(g.values - c.values)) / np.max(np.abs(c.values))
    assert rel < 5e-2
