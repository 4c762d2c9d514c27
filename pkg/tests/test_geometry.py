import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from willmore_tori.errors import NonPositiveDefiniteMetric
from willmore_tori.geometry import (
    estimate_modulus,
    invert_real,
    linear_metric,
    mean_curvature,
    modulus_suite,
    pullback_metric,
    second_fundamental_norm,
    sphere_gauge_mean_curvature,
    surface_densities,
    tile_quadrature,
    willmore_energy,
)
from willmore_tori.immersion import build_willmore_torus, evaluate_r4, jet, real_jacobian, to_real
from willmore_tori.lattice import periodic_difference

OMEGA = 0.5 + 1.2j


@pytest.fixture(scope="module")
def torus():
    return build_willmore_torus(OMEGA, 4, seed=0)


def away_points(imm, n=8, seed=1, clearance=0.15):
    lat = imm.lattice
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        z = complex(lat.point(rng.uniform(), rng.uniform()))
        if all(abs(periodic_difference(lat, z, p)) > clearance * lat.min_period for p in imm.poles):
            out.append(z)
    return np.array(out)


def fd_derivatives(fn, z, h=1e-4):
    """Central differences up to second order of a map C -> R^n."""
    f0 = fn(z)
    fxp, fxm = fn(z + h), fn(z - h)
    fyp, fym = fn(z + 1j * h), fn(z - 1j * h)
    fpp, fpm = fn(z + h + 1j * h), fn(z + h - 1j * h)
    fmp, fmm = fn(z - h + 1j * h), fn(z - h - 1j * h)
    return (f0, (fxp - fxm) / (2 * h), (fyp - fym) / (2 * h),
            (fxp - 2 * f0 + fxm) / h**2, (fpp - fpm - fmp + fmm) / (4 * h * h),
            (fyp - 2 * f0 + fym) / h**2)


def test_mean_curvature_methods_agree(torus):
    z = away_points(torus)
    Ha = mean_curvature(torus, z, "analytic")
    # the inverted map is not harmonic, so the circle mean carries an O(step^2) error
    Hm = mean_curvature(torus, z, "mean_value", step=1e-3, points=32)
    Hf = mean_curvature(torus, z, "fd", step=1e-4)
    scale = np.max(np.linalg.norm(Ha, axis=-1))
    assert np.max(np.abs(Hm - Ha)) < 1e-4 * scale
    assert np.max(np.abs(Hf - Ha)) < 1e-4 * scale


def test_mean_value_laplacian_exact_for_harmonic_pair(torus):
    flat = torus.with_inverted(False)
    z = away_points(torus, seed=7)
    H = mean_curvature(flat, z, "mean_value", step=1e-2, points=16)
    assert np.max(np.abs(H)) < 1e-8


def test_mean_curvature_matches_generic_surface_formula(torus):
    z = away_points(torus, seed=2)
    _, X_x, X_y, X_xx, X_xy, X_yy = fd_derivatives(lambda w: evaluate_r4(torus, w), z)
    H = surface_densities(X_x, X_y, X_xx, X_xy, X_yy)["H"]
    Ha = mean_curvature(torus, z)
    assert np.max(np.abs(H - Ha)) < 1e-4 * np.max(np.abs(Ha))


def test_willmore_density_matches_jet(torus):
    z = away_points(torus, seed=3)
    j = jet(torus, z)
    H = mean_curvature(torus, z)
    assert np.allclose(0.25 * np.sum(H**2, -1) * j.lam2, j.willmore_density, rtol=1e-9)


def stereo(x):
    r2 = np.sum(x * x, -1)[..., None]
    return np.concatenate([2 * x, r2 - 1], -1) / (1 + r2)


def test_sphere_gauge_against_four_sphere(torus):
    """The target metric 4/(1+|x|^2)^2 g_euc is the round S^4 pulled back by stereographic projection."""
    z = away_points(torus, seed=4)
    _, Y_x, Y_y, Y_xx, Y_xy, Y_yy = fd_derivatives(lambda w: stereo(evaluate_r4(torus, w)), z)
    Y = stereo(evaluate_r4(torus, z))
    H5 = surface_densities(Y_x, Y_y, Y_xx, Y_xy, Y_yy)["H"]
    H_s4 = H5 + 2 * Y  # remove the curvature of the unit sphere itself
    x = evaluate_r4(torus, z)
    J = real_jacobian(torus, z)
    Hhat = sphere_gauge_mean_curvature(mean_curvature(torus, z), x, J[..., 0], J[..., 1])
    t = 1e-6
    pushed = (stereo(x + t * Hhat) - stereo(x - t * Hhat)) / (2 * t)
    assert np.max(np.abs(pushed - H_s4)) < 1e-4 * max(1.0, np.max(np.abs(H_s4)))


def test_invert_real_matches_finite_differences():
    def X(w):
        w = np.asarray(w)
        return np.stack([np.cos(w.real) + 2, np.sin(w.imag), w.real * w.imag, 0.3 + 0 * w.real], -1)

    z = np.array([0.3 + 0.2j, 1.1 - 0.4j])
    derivs = fd_derivatives(X, z, h=1e-4)
    inv = invert_real(*derivs)

    def Xi(w):
        v = X(w)
        return v / np.sum(v * v, -1)[..., None]

    ref = fd_derivatives(Xi, z, h=1e-4)
    for a, b in zip(inv, ref):
        assert np.allclose(a, b, rtol=1e-5, atol=1e-6)


@given(st.floats(0.2, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_inverted_plane_is_round_sphere(c, x, y):
    zero = np.zeros((1, 4))
    X = np.array([[x, y, 0.0, c]])
    ex = np.array([[1.0, 0, 0, 0]])
    ey = np.array([[0, 1.0, 0, 0]])
    out = surface_densities(*invert_real(X, ex, ey, zero, zero, zero)[1:])
    # a sphere of radius 1/(2c): (1/4)|H|^2 = 4c^2, and K = 4c^2
    assert out["willmore"][0] == pytest.approx(4 * c * c * out["area"][0], rel=1e-9)
    assert out["gauss"][0] == pytest.approx(4 * c * c * out["area"][0], rel=1e-9)


@pytest.mark.parametrize("levels", [0, 1, 2])
def test_tile_quadrature_exact_on_trigonometric_polynomials(levels):
    def fn(s, t):
        return {"f": np.cos(2 * np.pi * s) ** 2 + s * t + np.sin(4 * np.pi * t) * s**3}

    res = tile_quadrature(fn, 32, levels, "f")
    assert res.totals["f"] == pytest.approx(0.75, abs=1e-13)


def test_quadrature_refines_touched_tiles():
    def fn(s, t):
        return {"f": np.ones_like(s)}

    base = tile_quadrature(fn, 32, 0, "f")
    ref = tile_quadrature(fn, 32, 2, "f", touches=lambda s0, t0, h: (s0 < 0.1) & (t0 < 0.1))
    assert ref.n_tiles > base.n_tiles
    assert ref.totals["f"] == pytest.approx(1.0, abs=1e-13)


def test_gauss_bonnet_and_energy(torus):
    rep = willmore_energy(torus, grid_n=256, refine_levels=2)
    assert abs(rep.total_gauss_curvature) < 1e-3
    assert rep.willmore_energy == pytest.approx(16 * np.pi, rel=1e-3)
    assert rep.error_indicator < 1e-2 * rep.willmore_energy
    assert rep.max_conformality_residual < 1e-10


def test_second_fundamental_form_bounds_mean_curvature(torus):
    z = away_points(torus, seed=5)
    A = second_fundamental_norm(torus, z)
    H = np.linalg.norm(mean_curvature(torus, z), axis=-1)
    # |H|^2 <= 2|A|^2 for surfaces
    assert np.all(H**2 <= 2 * A**2 * (1 + 1e-9))


def test_pullback_metric_is_conformal(torus):
    for z in away_points(torus, n=3, seed=6):
        m = pullback_metric(torus, z)
        assert m.anisotropy < 1e-10
        assert m.conformal_factor_sq > 0


# ------------------------------------------------------------------ modulus
moduli = st.builds(complex, st.floats(-0.5, 0.5), st.floats(0.8, 2.0))


@given(moduli)
def test_constant_metric_is_exact(sigma):
    rep = estimate_modulus(linear_metric(sigma), grid_n=16)
    assert abs(rep.estimated_modulus - sigma) < 1e-8


def pulled_back(sigma, a=0.08, b=0.05):
    """A_sigma^* g_euc pulled back by a periodic diffeomorphism isotopic to the identity."""
    s = complex(sigma)

    def field(x, y):
        u_x = 1 + 0 * x
        u_y = 2 * np.pi * a * np.cos(2 * np.pi * y)
        v_x = 2 * np.pi * b * np.cos(2 * np.pi * x)
        v_y = 1 + 0 * x
        G = np.array([[1.0, s.real], [s.real, abs(s) ** 2]])
        g11 = G[0, 0] * u_x**2 + 2 * G[0, 1] * u_x * v_x + G[1, 1] * v_x**2
        g12 = G[0, 0] * u_x * u_y + G[0, 1] * (u_x * v_y + u_y * v_x) + G[1, 1] * v_x * v_y
        g22 = G[0, 0] * u_y**2 + 2 * G[0, 1] * u_y * v_y + G[1, 1] * v_y**2
        return g11, g12, g22

    return field


def test_diffeomorphism_invariance_converges_quadratically():
    sigma = 0.3 + 1.1j
    errs = [abs(estimate_modulus(pulled_back(sigma), grid_n=n).estimated_modulus - sigma) for n in (32, 64, 128)]
    assert errs[2] < 1e-3
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_modulus_suite():
    out = modulus_suite(0.3 + 1.1j, grid_n=64)
    assert out["pass"], out["checks"]


def test_indefinite_metric_rejected():
    with pytest.raises(NonPositiveDefiniteMetric):
        estimate_modulus(lambda x, y: (np.ones_like(x), 2 * np.ones_like(x), np.ones_like(x)), grid_n=8)
