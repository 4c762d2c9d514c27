import numpy as np
import pytest

from willmore_tori.immersion import (
    PairImmersion,
    build_double_cover,
    build_willmore_torus,
    chart_overlap_error,
    conformality_grid,
    density_report,
    evaluate_r4,
    jet,
    pole_regularity,
    preimage_count,
    real_jacobian,
    regularity_suite,
    singular_values,
    to_real,
    wirtinger_jacobian,
)
from willmore_tori.lattice import periodic_difference

OMEGA = 0.5 + 1.2j


@pytest.fixture(scope="module", params=[3, 4, 5, 6])
def torus(request):
    return build_willmore_torus(OMEGA, request.param, seed=0)


@pytest.fixture(scope="module")
def cover():
    return build_double_cover(OMEGA)


def away_points(imm, n=12, seed=1, clearance=0.1):
    lat = imm.lattice
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        z = complex(lat.point(rng.uniform(), rng.uniform()))
        if all(abs(periodic_difference(lat, z, p)) > clearance * lat.min_period for p in imm.poles):
            out.append(z)
    return np.array(out)


def test_pole_count_matches_k(torus):
    orders = sum(c.order for c in torus.pole_charts)
    _, density, info = density_report(torus)
    assert density == len(torus.poles)
    assert info["full_rank"]
    assert orders == density  # generic constructions have simple poles only


def test_chart_overlap(torus):
    assert chart_overlap_error(torus) < 1e-8


def test_poles_are_regular_points(torus):
    for r in pole_regularity(torus):
        assert np.all(r["value"] == 0.0)
        assert r["abs_dz"] < 1e-10
        assert r["abs_dzbar"] > 0
        assert r["det"] != 0


def test_conformal_and_immersed(torus):
    g = conformality_grid(torus, 64)
    assert g["max_conformality_residual"] < 1e-10
    assert g["min_singular_value"] > 0


def test_inversion_formula_away_from_poles(torus):
    z = away_points(torus)
    f = torus.component_1(z)
    h = torus.component_2(z)
    c1, c2 = torus.translation_offset
    G = np.stack([f + c1, h + c2], -1)
    F = G / np.sum(np.abs(G) ** 2, -1, keepdims=True)
    assert np.allclose(evaluate_r4(torus, z), to_real(F), rtol=1e-11, atol=1e-13)


def test_uninverted_map_is_the_pair(torus):
    z = away_points(torus, seed=2)
    flat = torus.with_inverted(False)
    c1, c2 = torus.translation_offset
    X = evaluate_r4(flat, z)
    assert np.allclose(X[:, 0] + 1j * X[:, 1], torus.component_1(z) + c1)
    assert np.allclose(X[:, 2] + 1j * X[:, 3], torus.component_2(z) + c2)


def test_wirtinger_jacobian_by_finite_difference(torus):
    z = away_points(torus, n=6, seed=3)
    h = 1e-6
    Xx = (evaluate_r4(torus, z + h) - evaluate_r4(torus, z - h)) / (2 * h)
    Xy = (evaluate_r4(torus, z + 1j * h) - evaluate_r4(torus, z - 1j * h)) / (2 * h)
    dz, dzb = wirtinger_jacobian(torus, z)
    assert np.allclose(dz, 0.5 * (Xx - 1j * Xy), rtol=1e-6, atol=1e-6)
    assert np.allclose(dzb, np.conj(dz))
    J = real_jacobian(torus, z)
    assert np.allclose(J[..., 0], Xx, rtol=1e-6, atol=1e-6)


def test_jacobian_continuous_through_charts(torus):
    # points on both sides of a chart boundary agree with finite differences too
    c = torus.pole_charts[0]
    u = c.radius * np.exp(1j * np.linspace(0, 2 * np.pi, 8, endpoint=False))
    inner = jet(torus, c.location + 0.999 * u)
    outer = jet(torus, c.location + 1.001 * u)
    scale = np.max(np.abs(inner.dbF))
    assert np.max(np.abs(inner.dbF - outer.dbF)) < 0.01 * scale


def test_singular_values_of_known_matrix():
    J = np.array([[3.0, 0.0], [0.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
    smax, smin = singular_values(J)
    assert smax == pytest.approx(3.0) and smin == pytest.approx(2.0)


def test_dict_round_trip(torus):
    back = PairImmersion.from_dict(torus.to_dict())
    z = away_points(torus, n=5, seed=4)
    assert np.array_equal(evaluate_r4(back, z), evaluate_r4(torus, z))


def test_seeded_construction_is_deterministic():
    a = build_willmore_torus(OMEGA, 4, seed=7)
    b = build_willmore_torus(OMEGA, 4, seed=7)
    assert a.to_dict() == b.to_dict()


def test_small_k_rejected():
    with pytest.raises(ValueError):
        build_willmore_torus(OMEGA, 2)


def test_regularity_suite(torus):
    out = regularity_suite(torus, grid=64)
    assert out["pass"], out["checks"]


def test_double_cover_two_preimages(cover):
    for value in (0.3 + 0.1j, -1.2 + 2.0j, 5.0):
        assert preimage_count(cover, value, starts=300) == 2


def test_double_cover_pole_is_a_branch_point(cover):
    out = regularity_suite(cover, grid=64)
    assert out["pass"], out["checks"]
    # the double pole of wp is one of the four branch points: both derivatives vanish
    assert [p["order"] for p in out["poles"]] == [2]
    assert out["poles"][0]["abs_dzbar"] < 1e-12
    _, density, _ = density_report(cover)
    assert density == 1
