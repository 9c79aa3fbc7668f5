import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from privot.covering import (AdmissibilityParams, CoveringTooLarge, WaveletBasisSpec, admissibility_check,
                             basis_dimension, covering_axis, covering_log_cardinality, covering_size,
                             delta_grid_covering, dimension_constant, identity_holder_norm, midpoint_cells,
                             nearest_cover_element, norm_constants, rate_bound, screen_covering,
                             select_resolution, synthesize)
from privot.dp import PrivacyBudget
from privot.grid import GridPotential, make_uniform_grid
from privot.semidual import empirical_semidual_unclipped, make_dataset

PARAMS = AdmissibilityParams(M=3.0, R=10.0, alpha=2.0, d=2)


def haar_1d(t):
    return np.where((t >= 0) & (t < 1), 1.0, 0.0)


def test_haar_dimensions():
    for d in (1, 2, 3):
        for J in range(4):
            assert basis_dimension(J, d) == 2 ** (J * d)
    assert dimension_constant(2, "haar") == 1.0
    for J in range(4):
        assert basis_dimension(J, 2, "db2") <= dimension_constant(2, "db2") * 2 ** (2 * J)


def test_basis_validation():
    with pytest.raises(ValueError):
        WaveletBasisSpec(-1, 1)
    with pytest.raises(ValueError):
        WaveletBasisSpec(1, 1, "sym8")


def test_zero_and_unit_coefficients():
    basis = WaveletBasisSpec(1, 1)
    grid = make_uniform_grid(-1.0, 2.0, 13, 1)
    assert np.all(synthesize(np.zeros(2), basis, grid).values == 0.0)
    x = grid.points[:, 0]
    t = np.minimum((x + 1) / 3, 1 - 1e-12)
    father = haar_1d(t) / math.sqrt(3)
    mother = (haar_1d(2 * t) - haar_1d(2 * t - 1)) / math.sqrt(3)
    np.testing.assert_allclose(synthesize([1.0, 0.0], basis, grid).values, father)
    np.testing.assert_allclose(synthesize([0.0, 1.0], basis, grid).values, mother)
    with pytest.raises(ValueError):
        synthesize(np.zeros(3), basis, grid)


@pytest.mark.parametrize("generator,cells,tol", [("haar", 64, 1e-12), ("db2", 1024, 2e-2)])
def test_parseval_on_box(generator, cells, tol):
    basis = WaveletBasisSpec(2, 1, generator)
    pts, vol = midpoint_cells(basis, cells)
    Phi = basis.design_matrix(pts)
    rng = np.random.default_rng(0)
    for _ in range(5):
        g = rng.normal(size=basis.dimension)
        assert np.sum((Phi @ g) ** 2) * vol == pytest.approx(g @ g, rel=tol)


def test_haar_orthonormal_in_2d():
    basis = WaveletBasisSpec(2, 2)
    pts, vol = midpoint_cells(basis, 16)
    Phi = basis.design_matrix(pts)
    np.testing.assert_allclose(Phi.T @ Phi * vol, np.eye(basis.dimension), atol=1e-12)


def test_covering_counts():
    assert covering_axis(1.0, 1.0).size == 2
    assert len(list(delta_grid_covering(0, 1.0, 1.0, d=1))) == 2
    assert len(list(delta_grid_covering(1, 0.5, 1.0, d=1))) == 16
    assert covering_size(2, 0.5, 1.0) == 16
    with pytest.raises(CoveringTooLarge):
        next(delta_grid_covering(2, 0.01, 1.0, d=2))
    with pytest.raises(ValueError):
        covering_axis(0.0, 1.0)


def test_covering_is_odometer_ordered():
    elems = np.array(list(delta_grid_covering(1, 1.0, 1.0, d=1)))
    axis = covering_axis(1.0, 1.0)
    np.testing.assert_array_equal(elems, np.array(list(itertools.product(axis, repeat=2))))


def test_covering_property_by_brute_force():
    basis = WaveletBasisSpec(1, 1)
    B, delta = 1.0, 0.3
    elems = np.array(list(delta_grid_covering(1, delta, B, basis)))
    rng = np.random.default_rng(1)
    for g in rng.uniform(-B, B, (100, basis.dimension)):
        nearest = elems[np.argmin(np.abs(elems - g).max(axis=1))]
        assert np.abs(nearest - g).max() <= delta
        np.testing.assert_array_equal(nearest_cover_element(g, delta, B), nearest)


@pytest.mark.parametrize("J,d,delta", [(0, 1, 0.5), (1, 1, 2.0), (1, 1, 9.0)])
def test_log_cardinality_matches_enumeration(J, d, delta):
    params = AdmissibilityParams(3.0, 10.0, 2.0, d)
    card = covering_log_cardinality(J, delta, params)
    count = sum(1 for _ in delta_grid_covering(J, delta, 2 * params.M**2, d=d))
    assert card.log_exact == pytest.approx(math.log(count), abs=1e-12)
    assert card.log_exact <= card.log_bound


def test_log_cardinality_limits():
    params = AdmissibilityParams(3.0, 10.0, 2.0, 1)
    assert covering_log_cardinality(2, 4 * 9.0, params).log_exact == 0.0
    vals = [covering_log_cardinality(2, d, params).log_exact for d in (0.01, 0.1, 1.0, 10.0)]
    assert vals == sorted(vals, reverse=True)


def test_admissibility_examples():
    grid = make_uniform_grid(-1.0, 2.0, 12, 2)
    x = grid.points
    quad = GridPotential(grid, 0.5 * np.sum(x**2, axis=1))
    assert admissibility_check(quad, PARAMS).passed
    const = admissibility_check(GridPotential(grid, np.full(grid.size, 3 * 9.0)), PARAMS)
    assert not const.passed and const.violations[0]["condition"] == "value"
    neg = admissibility_check(GridPotential(grid, -0.5 * np.sum(x**2, axis=1)), PARAMS)
    assert "hessian_lower" in [v["condition"] for v in neg.violations]
    steep = admissibility_check(GridPotential(grid, 2.0 * np.sum(x**2, axis=1)), PARAMS)
    assert "gradient" in [v["condition"] for v in steep.violations]
    with pytest.raises(ValueError):
        admissibility_check(GridPotential(make_uniform_grid(0, 1, 4, 2), np.zeros(16)), PARAMS)


@given(st.floats(0.4, 2.5), st.floats(0.4, 2.5))
def test_screening_soundness(a, b):
    grid = make_uniform_grid(-1.0, 2.0, 9, 2)
    x = grid.points
    f = GridPotential(grid, 0.5 * (a * x[:, 0] ** 2 + b * x[:, 1] ** 2))
    res = admissibility_check(f, PARAMS)
    # exact derivatives: gradient (a x1, b x2), Hessian diag(a, b)
    grad = np.linalg.norm(x * [a, b], axis=1).max()
    ok = np.abs(f.values).max() <= 18 and grad <= 3 and min(a, b) >= 1 / 3 and max(a, b) <= 3
    assert res.passed == ok


def test_param_validation():
    assert identity_holder_norm(2) == 6.0
    with pytest.raises(ValueError):
        AdmissibilityParams(2.0, 10.0, 2.0, 2)
    with pytest.raises(ValueError):
        AdmissibilityParams(3.0, 5.0, 2.0, 2)
    with pytest.raises(ValueError):
        AdmissibilityParams(3.0, 10.0, 1.0, 2)


def test_select_resolution_is_scan_argmin():
    for n, eps in [(1000, 1.0), (10**5, 0.5), (10**7, 10.0)]:
        vals = [rate_bound(J, n, eps, PARAMS.R, PARAMS.alpha, 2) for J in range(1, 31)]
        assert select_resolution(n, PrivacyBudget(eps), PARAMS) == 1 + int(np.argmin(vals))


def test_select_resolution_trends_and_errors():
    js = [select_resolution(10**5, PrivacyBudget(e), PARAMS) for e in (0.01, 0.1, 1, 10, 100)]
    assert js == sorted(js)
    smooth = AdmissibilityParams(3.0, 10.0, 200.0, 2)
    assert select_resolution(10**6, PrivacyBudget(1.0), smooth) == 1
    with pytest.raises(ValueError):
        select_resolution(1, PrivacyBudget(1.0), PARAMS)
    with pytest.raises(ValueError):
        select_resolution(10, PrivacyBudget(0.1), PARAMS)
    with pytest.raises(ValueError):
        select_resolution(10, PrivacyBudget.non_private(), PARAMS)


def _sup_norm(basis, g, J):
    """Sup over cell midpoints at twice the finest Haar resolution (exact for piecewise-constant f)."""
    pts, _ = midpoint_cells(basis, 2 ** (J + 1))
    return np.abs(basis.design_matrix(pts) @ g).max()


@pytest.mark.parametrize("d", [1, 2])
def test_norm_comparison_and_refinement(d):
    rng = np.random.default_rng(d)
    for J in (1, 2, 3):
        basis = WaveletBasisSpec(J, d)
        consts = norm_constants(d, J)
        for _ in range(20):
            g = rng.uniform(-1, 1, basis.dimension)
            f_sup = _sup_norm(basis, g, J)
            pts, _ = midpoint_cells(basis, 2 ** (J + 2))
            assert np.abs(basis.design_matrix(pts) @ g).max() == pytest.approx(f_sup)
            assert np.abs(g).max() <= np.linalg.norm(g)
            assert np.linalg.norm(g) <= consts["c1"] * f_sup * (1 + 1e-12)
            assert f_sup <= consts["c2"] * 2 ** (J * d / 2) * np.abs(g).max() * (1 + 1e-12)


def test_covering_chain_end_to_end():
    d, J, delta, B = 2, 1, 0.05, 1.0
    basis = WaveletBasisSpec(J, d)
    grid = make_uniform_grid(-0.5, 0.5, 10, d)
    c2 = norm_constants(d, J)["c2"]
    rng = np.random.default_rng(5)
    data = make_dataset(rng.uniform(-0.5, 0.5, (30, d)), rng.uniform(-0.5, 0.5, (30, d)), grid)
    Phi = basis.design_matrix(grid.points)
    for g in rng.uniform(-B, B, (100, basis.dimension)):
        h = nearest_cover_element(g, delta, B)
        assert np.abs(h - g).max() <= delta
        fg = GridPotential(grid, Phi @ g)
        fh = GridPotential(grid, Phi @ h)
        sup = np.abs(fg.values - fh.values).max()
        assert sup <= c2 * 2 ** (J * d / 2) * delta * (1 + 1e-12)
        gap = abs(empirical_semidual_unclipped(fg, data) - empirical_semidual_unclipped(fh, data))
        assert gap <= 2 * c2 * 2 ** (J * d / 2) * delta * (1 + 1e-12)


def test_screen_covering_reports_rate():
    params = AdmissibilityParams(3.0, 10.0, 2.0, 1)
    grid = make_uniform_grid(-1.0, 2.0, 8, 1)
    bare = screen_covering(0, 4.0, params, grid)
    assert bare["total"] == covering_size(1, 4.0, 18.0) and bare["accepted"] == 0
    shifted = screen_covering(0, 4.0, params, grid, bound=0.5, offset="quadratic")
    # a constant shift of |x|^2/2 keeps every derivative, so all small shifts pass
    assert shifted["acceptance_rate"] == 1.0
