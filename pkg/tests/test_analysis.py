import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from willmore_tori.analysis import (
    EXPECTED_POLE_ORDERS,
    FULL_NAMES,
    BranchSystem,
    CoefficientSystem,
    FunctionBasis,
    algebra_suite,
    bilinear,
    branch_suite,
    expand_in_basis,
    generic_poles,
    growth_order,
    imaginary_period_solution,
    isotropic_pair_case,
    period_integrals,
    period_oracle,
    pole_order_audit,
    real_orthonormal_frame,
    segment_integral,
    verify_branch_system,
    verify_conformality_system,
)
from willmore_tori.elliptic import EllipticKernel
from willmore_tori.errors import IllConditionedBasis, PathHitsPole

OMEGA = 0.5 + 1.2j


@pytest.fixture(scope="module")
def basis():
    k = EllipticKernel(OMEGA)
    return FunctionBasis(k, *generic_poles(k.lattice, seed=3))


vec = st.lists(st.floats(-2, 2), min_size=8, max_size=8).map(
    lambda v: np.array(v[:4]) + 1j * np.array(v[4:]))


def test_exact_relations(basis):
    z = basis.sample_points(40, seed=1)
    P1, P2, w = basis.generators(z)
    assert np.allclose(w * w, P1 + P2 + basis.alpha_w * w + basis.beta_w, rtol=1e-9, atol=1e-9)
    assert np.allclose(P1 * P2, basis.gamma_w * w + basis.delta_w, rtol=1e-9, atol=1e-9)


def test_fold_reproduces_full_products(basis):
    z = basis.sample_points(30, seed=2)
    rng = np.random.default_rng(0)
    c = rng.normal(size=10) + 1j * rng.normal(size=10)
    assert np.allclose(basis.full_elements(z) @ c, basis.elements(z) @ basis.fold(c), rtol=1e-9, atol=1e-8)


@given(vec, vec, vec, vec)
def test_expansion_equals_folded_pairings(a, b, c, d):
    k = EllipticKernel(OMEGA)
    basis = FunctionBasis(k, *generic_poles(k.lattice, seed=3))
    sys_ = CoefficientSystem(a, b, c, d)
    exp = expand_in_basis(lambda z: np.sum(sys_.derivative(basis, z) ** 2, -1), basis)
    ref = basis.fold(sys_.product_coefficients())
    assert np.max(np.abs(exp.coefficients - ref)) <= 1e-7 * max(1.0, np.max(np.abs(ref)))
    assert exp.residual < 1e-10


def test_expansion_layout(basis):
    exp = expand_in_basis(lambda z: basis.elements(z)[..., 2], basis)
    f = exp.folded()
    assert list(f) == list(FULL_NAMES)
    assert f["w^2"] is None and f["P1*P2"] is None
    assert abs(f["P1*w"] - 1) < 1e-8
    with pytest.raises(ValueError):
        expand_in_basis(lambda z: z, basis, samples=10)


def test_coincident_poles_rejected():
    k = EllipticKernel(OMEGA)
    with pytest.raises(IllConditionedBasis):
        FunctionBasis(k, 0.2 + 0.3j, 1.2 + 0.3j)


@given(st.tuples(*[st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)] * 4))
def test_isotropic_family_is_conformal(params):
    k = EllipticKernel(OMEGA)
    basis = FunctionBasis(k, *generic_poles(k.lattice, seed=3))
    s = isotropic_pair_case(basis, *params)
    rep = verify_conformality_system(s.a, s.b, s.c, s.d, basis)
    assert rep["conformal"] and rep["equations_hold"] and rep["consistent"]


@given(vec, vec, vec, vec)
def test_sampled_and_equation_verdicts_agree(a, b, c, d):
    k = EllipticKernel(OMEGA)
    basis = FunctionBasis(k, *generic_poles(k.lattice, seed=3))
    rep = verify_conformality_system(a, b, c, d, basis)
    assert rep["consistent"]
    assert rep["coefficient_mismatch"] < 1e-7


def test_bilinear_is_not_hermitian():
    v = np.array([1, 1j, 0, 0])
    assert bilinear(v, v) == 0
    assert np.vdot(v, v) == 2


def test_branch_system_double_cover():
    k = EllipticKernel(OMEGA)
    rep = verify_branch_system(np.array([1, -1j, 0, 0]), np.zeros(4), np.zeros(4), k)
    assert rep["conformal"] and rep["reduces_to_double_cover"]
    assert rep["degree"] == 2 and rep["branch_point_count"] == 4
    assert rep["periodicity_defect"] < 1e-12


def test_branch_system_requires_nonzero_leading_vector():
    with pytest.raises(ValueError):
        BranchSystem(np.zeros(4), np.ones(4), np.ones(4))


@given(st.integers(0, 10_000))
def test_real_frame_rotates_isotropic_vectors(seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    a = Q @ np.array([1, -1j, 0, 0]) * complex(*rng.normal(size=2))
    R = real_orthonormal_frame(a)
    assert np.allclose(R @ R.T, np.eye(4), atol=1e-12)
    ra = R @ a
    assert np.allclose(ra[2:], 0, atol=1e-10)
    assert abs(ra[1] + 1j * ra[0]) < 1e-10 * abs(ra[0])


def test_segment_integral_of_polynomial():
    val = segment_integral(lambda z: z**3, 0.1 + 0.2j, 0.7 - 0.4j)
    a, b = 0.1 + 0.2j, 0.8 - 0.2j
    assert abs(val - (b**4 - a**4) / 4) < 1e-14


@pytest.mark.parametrize("k", [1, 2])
def test_periods_agree_and_match_oracle(basis, k):
    pr = period_integrals(basis, k)
    assert pr["agree"]
    assert abs(pr["sigma"] - period_oracle(basis, k)) < 1e-9


def test_period_path_through_pole_rejected(basis):
    with pytest.raises(PathHitsPole):
        period_integrals(basis, 1, xi=basis.p1 - 0.3)


def test_zero_sum_forces_zero_constant(basis):
    sig = [period_integrals(basis, k)["sigma"] for k in (1, 2)]
    assert imaginary_period_solution(sig, basis.lattice.generators, 0.0) == 0
    s = 0.4 - 0.2j
    d = imaginary_period_solution(sig, basis.lattice.generators, s)
    for sg, w in zip(sig, basis.lattice.generators):
        assert abs((s * sg + d * w).real) < 1e-12


def test_growth_order_of_monomials():
    for m in (-2, -1, 1, 3):
        assert growth_order(lambda z: (z - 0.3) ** (-m), 0.3) == pytest.approx(m, abs=1e-9)


def test_pole_order_audit(basis):
    audit = pole_order_audit(basis)
    assert audit["all_match"]
    for name in FULL_NAMES:
        assert audit["orders"][name]["expected"] == list(EXPECTED_POLE_ORDERS[name])
    assert max(audit["orders"]["w^2_leading_coefficient_error"]) < 1e-3  # O(r) truncation at r = 1e-5


@pytest.mark.parametrize("omega", [1j, 0.5 + 1.2j, 0.3 + 1.1j])
def test_suites(omega):
    a = algebra_suite(omega)
    assert a["pass"], {k: v for k, v in a["checks"].items() if not v["pass"]}
    b = branch_suite(omega)
    assert b["pass"], {k: v for k, v in b["checks"].items() if not v["pass"]}
