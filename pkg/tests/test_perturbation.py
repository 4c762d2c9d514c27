import csv
import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from willmore_tori.perturbation import (
    BRANCH_REF,
    SWEEP_COLUMNS,
    _branch_distance,
    branch_normalization,
    build_family,
    cutoff,
    differential,
    real_jet,
    regularized_metric,
    rows_to_csv,
    smooth_step,
    solve_conformal_constraint,
    tau,
)

OMEGA = 0.3 + 1.1j


@pytest.fixture(scope="module")
def fam():
    return build_family(OMEGA)


@given(st.floats(-1, 2))
def test_smooth_step_range_and_ends(t):
    psi, d1, _ = smooth_step(t)
    assert 0.0 <= psi <= 1.0
    if t <= 0:
        assert psi == 1.0 and d1 == 0.0
    if t >= 1:
        assert psi == 0.0 and d1 == 0.0


def test_smooth_step_monotone_and_derivatives():
    t = np.linspace(0.01, 0.99, 400)
    psi, d1, d2 = smooth_step(t)
    assert np.all(np.diff(psi) <= 0)
    h = 1e-6
    fd1 = (smooth_step(t + h)[0] - smooth_step(t - h)[0]) / (2 * h)
    fd2 = (smooth_step(t + h)[1] - smooth_step(t - h)[1]) / (2 * h)
    assert np.allclose(fd1, d1, atol=1e-6)
    assert np.allclose(fd2, d2, atol=1e-4)
    assert abs(smooth_step(0.5)[0] - 0.5) < 1e-15


def test_cutoff_levels():
    delta = 0.05
    eta = cutoff(np.array([0.0, 0.09, 0.1, 0.12, 0.15]), delta)[0]
    assert list(eta[[0, 1, 2]]) == [1.0, 1.0, 1.0]
    assert 0 < eta[3] < 1 and eta[4] == 0.0


def test_family_packing(fam):
    assert 6 * fam.delta < fam.packing_distance()
    assert len(fam.poles_ref) == 2


def test_branch_normalisation(fam):
    assert branch_normalization(fam) == pytest.approx(fam.f_scale)
    s = complex(fam.sigma)
    second = [abs(fam.block.derivs(complex(b[0] + s * b[1]), 2, check=False)[2]) for b in BRANCH_REF]
    assert fam.f_scale * fam.delta * min(second) == pytest.approx(1.0)


def test_real_jet_against_finite_differences(fam):
    f = fam.with_params(epsilon=0.1)
    rng = np.random.default_rng(0)
    # points inside the cutoff annuli, where every term contributes
    b = BRANCH_REF[rng.integers(0, 4, 6)]
    ang = rng.uniform(0, 2 * np.pi, 6)
    r = fam.delta * rng.uniform(2.1, 2.9, 6)
    x, y = b[:, 0] + r * np.cos(ang), b[:, 1] + r * np.sin(ang)
    X, X_x, X_y, X_xx, X_xy, X_yy = real_jet(f, x, y)
    h = 1e-5

    def ev(dx, dy):
        return real_jet(f, x + dx, y + dy)[0]

    scale = max(1.0, np.max(np.abs(X_x)))
    assert np.allclose((ev(h, 0) - ev(-h, 0)) / (2 * h), X_x, atol=1e-6 * scale)
    assert np.allclose((ev(0, h) - ev(0, -h)) / (2 * h), X_y, atol=1e-6 * scale)
    g = lambda dx, dy: real_jet(f, x + dx, y + dy)[1]  # noqa: E731
    s2 = max(1.0, np.max(np.abs(X_xx)))
    assert np.allclose((g(h, 0) - g(-h, 0)) / (2 * h), X_xx, atol=1e-4 * s2)
    assert np.allclose((g(0, h) - g(0, -h)) / (2 * h), X_xy, atol=1e-4 * s2)
    gy = lambda dx, dy: real_jet(f, x + dx, y + dy)[2]  # noqa: E731
    assert np.allclose((gy(0, h) - gy(0, -h)) / (2 * h), X_yy, atol=1e-4 * s2)


def test_perturbation_supported_near_branch_points(fam):
    rng = np.random.default_rng(1)
    x, y = rng.uniform(0, 1, 4000), rng.uniform(0, 1, 4000)
    a = real_jet(fam.with_params(epsilon=0.1), x, y)[0]
    b = real_jet(fam.with_params(epsilon=0.0), x, y)[0]
    far = _branch_distance(fam, x, y) >= 3 * fam.delta
    assert np.array_equal(a[far], b[far])
    assert np.any(a[~far] != b[~far])


def test_unperturbed_map_branches(fam):
    J = differential(fam.with_params(epsilon=0.0), BRANCH_REF[:, 0], BRANCH_REF[:, 1])
    assert np.max(np.abs(J)) < 1e-6 * fam.f_scale


def test_perturbation_removes_branching(fam):
    eps = 0.1
    f = fam.with_params(epsilon=eps)
    rng = np.random.default_rng(2)
    b = BRANCH_REF[rng.integers(0, 4, 200)]
    r = 2 * fam.delta * np.sqrt(rng.uniform(0, 1, 200))
    ang = rng.uniform(0, 2 * np.pi, 200)
    x, y = b[:, 0] + r * np.cos(ang), b[:, 1] + r * np.sin(ang)
    J = differential(f, x, y)
    sv = np.linalg.svd(J, compute_uv=False)
    A = np.array([[1.0, complex(fam.sigma).real], [0.0, complex(fam.sigma).imag]])
    smin_A = np.linalg.svd(A, compute_uv=False)[-1]
    assert np.min(sv[:, -1]) >= eps * smin_A * (1 - 1e-9)


def test_metric_on_inner_balls(fam):
    """Inside B_2delta the pair (c f, eps w) is conformal with factor c^2|f'|^2 + eps^2."""
    eps = 0.07
    f = fam.with_params(epsilon=eps)
    s = complex(fam.sigma)
    rng = np.random.default_rng(3)
    b = BRANCH_REF[rng.integers(0, 4, 50)]
    r = 1.9 * fam.delta * rng.uniform(0.05, 1, 50)
    ang = rng.uniform(0, 2 * np.pi, 50)
    x, y = b[:, 0] + r * np.cos(ang), b[:, 1] + r * np.sin(ang)
    J = differential(f, x, y)
    g = np.einsum("nki,nkj->nij", J, J)
    fp = fam.f_scale * fam.block.derivs(x + s * y, 1, check=False)[1]
    Ag = np.array([[1.0, s.real], [s.real, abs(s) ** 2]])
    ref = (np.abs(fp) ** 2 + eps**2)[:, None, None] * Ag
    assert np.allclose(g, ref, rtol=1e-10)
    # the regularised metric is exactly A*g there
    g11, g12, g22 = regularized_metric(f)(x, y)
    assert np.allclose(g11, 1.0) and np.allclose(g12, s.real) and np.allclose(g22, abs(s) ** 2)


@given(st.floats(0.0, 0.2))
def test_regularized_metric_positive_definite(eps):
    f = build_family(OMEGA).with_params(epsilon=eps)
    rng = np.random.default_rng(4)
    x, y = rng.uniform(0, 1, 3000), rng.uniform(0, 1, 3000)
    g11, g12, g22 = regularized_metric(f)(x, y)
    assert np.all(g11 > 0) and np.all(g11 * g22 - g12**2 > 0)


def test_tau_at_zero_epsilon_is_sigma(fam):
    for sg in (OMEGA, 0.25 + 1.15j):
        t = tau(fam.with_params(sigma=sg, epsilon=0.0), 64).estimated_modulus
        assert abs(t - sg) < 1e-3


def test_tau_continuous_in_sigma(fam):
    f = fam.with_params(epsilon=0.05)
    t0 = tau(f, 64).estimated_modulus
    t1 = tau(f.with_params(sigma=f.sigma + 1e-3), 64).estimated_modulus
    assert abs(t1 - t0) < 5e-3


def test_constraint_trivial_at_zero_epsilon(fam):
    sol = solve_conformal_constraint(fam, 0.0, grid_n=64, tol=1e-3)
    assert sol.iterations == 0
    assert sol.sigma == fam.omega.omega


def test_constraint_solve_converges(fam):
    sol = solve_conformal_constraint(fam, 0.1, grid_n=64, tol=1e-6)
    assert sol.residual <= 1e-6
    assert abs(tau(fam.with_params(sigma=sol.sigma, epsilon=0.1), 64).estimated_modulus - OMEGA) < 1e-6


def test_csv_rows():
    rows = [{c: 0.1 * i for c in SWEEP_COLUMNS} for i in range(3)]
    text = rows_to_csv(rows)
    assert text.endswith("\r\n")
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0].keys()) == SWEEP_COLUMNS
    assert float(parsed[2]["epsilon"]) == 0.2
