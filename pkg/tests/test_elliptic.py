import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from willmore_tori.elliptic import (
    EllipticKernel,
    invariant_suite,
    lattice_sum_eisenstein,
    lattice_sum_wp,
    row_sum_wp,
)
from willmore_tori.errors import PoleAtInput

moduli = st.builds(complex, st.floats(-0.5, 0.5), st.floats(0.8, 2.0))
cell = st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
OMEGAS = [1j, 0.5 + 1.2j, 0.3 + 1.1j, np.exp(1j * np.pi / 3), -0.2 + 0.9j]


@pytest.fixture(scope="module", params=OMEGAS, ids=lambda w: f"{w:.3g}")
def kernel(request):
    return EllipticKernel(complex(request.param))


def grid_points(lat, n=12):
    s = (np.arange(n) + 0.37) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    return lat.point(S, T).ravel()


@given(moduli, cell)
def test_differential_equation(omega, st_):
    k = EllipticKernel(omega)
    z = k.lattice.point(*st_)
    wp, wpp, _ = k.wp_all(z)
    rhs = 4 * wp**3 - k.g2 * wp - k.g3
    assert abs(wpp**2 - rhs) <= 1e-10 * max(1.0, abs(rhs))


@given(moduli)
def test_legendre_relation(omega):
    assert EllipticKernel(omega).legendre_residual() < 1e-10


def test_special_lattices():
    assert abs(EllipticKernel(1j).g3) < 1e-10
    assert abs(EllipticKernel(np.exp(1j * np.pi / 3)).g2) < 1e-10


def test_against_row_sum(kernel):
    z = grid_points(kernel.lattice, 20)
    ref = row_sum_wp(kernel.lattice.omega2, z)
    assert np.max(np.abs(kernel.wp(z) - ref) / np.maximum(1, np.abs(ref))) < 1e-8


def test_against_box_lattice_sum():
    # the symmetric box sum converges only algebraically; compare loosely
    k = EllipticKernel(1j)
    z = grid_points(k.lattice, 4)
    ref = lattice_sum_wp(1j, z, 200)
    assert np.max(np.abs(k.wp(z) - ref)) < 1e-3


def test_invariants_against_eisenstein_sums():
    # G4 and G6 box sums converge absolutely
    k = EllipticKernel(0.3 + 1.1j)
    g2 = 60 * lattice_sum_eisenstein(0.3 + 1.1j, 4, 150)
    g3 = 140 * lattice_sum_eisenstein(0.3 + 1.1j, 6, 60)
    assert abs(k.g2 - g2) < 1e-5 * abs(g2)
    assert abs(k.g3 - g3) < 1e-8 * max(1, abs(g3))


def test_zeta_derivative_is_minus_wp(kernel):
    z = grid_points(kernel.lattice, 6)
    h = 1e-5
    fd = (kernel.zeta(z + h) - kernel.zeta(z - h)) / (2 * h)
    assert np.max(np.abs(fd + kernel.wp(z)) / (1 + np.abs(kernel.wp(z)))) < 1e-7


def test_wp_prime_by_finite_difference(kernel):
    z = grid_points(kernel.lattice, 6)
    h = 1e-5
    fd = (kernel.wp(z + h) - kernel.wp(z - h)) / (2 * h)
    ref = kernel.wp_prime(z)
    assert np.max(np.abs(fd - ref) / (1 + np.abs(ref))) < 1e-6


def test_periodicity_and_quasi_periodicity(kernel):
    z = grid_points(kernel.lattice, 6)
    for w, eta in zip(kernel.lattice.generators, kernel.quasi_periods):
        assert np.allclose(kernel.wp(z + w), kernel.wp(z), rtol=1e-10, atol=1e-10)
        assert np.allclose(kernel.zeta(z + w) - kernel.zeta(z), eta, rtol=1e-10, atol=1e-10)


def test_parity(kernel):
    z = grid_points(kernel.lattice, 6)
    assert np.allclose(kernel.wp(-z), kernel.wp(z), rtol=1e-11, atol=1e-11)
    assert np.allclose(kernel.zeta(-z), -kernel.zeta(z), rtol=1e-11, atol=1e-11)
    assert np.allclose(kernel.wp_prime(-z), -kernel.wp_prime(z), rtol=1e-10, atol=1e-10)


def test_laurent_expansion(kernel):
    c = kernel.laurent_coefficients(6)
    z = 0.05 * kernel.lattice.min_period * np.exp(1j * np.linspace(0, 6, 7))
    series = 1 / z**2 + sum(c[k - 1] * z ** (2 * k) for k in range(1, 7))
    assert np.max(np.abs(kernel.wp(z) - series)) < 1e-10


def test_half_period_values(kernel):
    e = kernel.half_period_values()
    assert abs(sum(e)) < 1e-10 * max(1, max(abs(v) for v in e))
    assert np.max(np.abs(kernel.wp_prime(np.array(kernel.half_periods())))) < 1e-8
    # the cubic 4x^3 - g2 x - g3 vanishes at the e_i
    for v in e:
        assert abs(4 * v**3 - kernel.g2 * v - kernel.g3) < 1e-9 * max(1, abs(v) ** 3)


def test_pole_at_input_raises(kernel):
    w1, w2 = kernel.lattice.generators
    for p in (0.0, w1, w1 + w2, -w2):
        with pytest.raises(PoleAtInput):
            kernel.wp(p)


@given(st.builds(complex, st.floats(-1, 1), st.floats(-1, 1)).filter(lambda c: abs(c) > 0.3))
def test_homogeneity(lam):
    # wp for the lattice lam*L at lam*z equals lam^-2 wp_L(z)
    from willmore_tori.lattice import Lattice

    omega = 0.3 + 1.1j
    base = EllipticKernel(omega)
    scaled = EllipticKernel(Lattice(lam * omega, omega1=lam))
    z = grid_points(base.lattice, 3)
    assert np.allclose(scaled.wp(lam * z), base.wp(z) / lam**2, rtol=1e-9, atol=1e-9)
    assert abs(scaled.g2 - base.g2 / lam**4) < 1e-9 * abs(base.g2 / lam**4) + 1e-9


def test_invariant_suite_passes(kernel):
    out = invariant_suite(kernel.omega)
    assert out["pass"], out
