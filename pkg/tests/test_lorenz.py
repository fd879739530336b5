import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from veclorenz.closed_forms import (identical_ilf, identical_lorenz, quadratic_potential,
                                    quadratic_potential_lorenz, two_point_lorenz)
from veclorenz.lorenz import (DomainError, FittedLorenz, alpha_curves, alt_gini,
                              alt_gini_from_lorenz, gini, gini_from_lorenz, gini_social,
                              gini_weights, identical_alpha_scale, ilf, ilf_from_shares, IlfGrid,
                              lorenz_map, PotentialLorenz, pseudo_sample, scalar_gini,
                              scalar_lorenz_curve)
from veclorenz.ot_solver import solve

unit = st.floats(0.0, 1.0)


@pytest.fixture(scope="module")
def identical_fit():
    return solve([[1.0, 1.0]], [1.0])


def test_lorenz_map_examples(two_point_fits, lognormal_fit):
    np.testing.assert_allclose(lorenz_map(lognormal_fit, (1, 1)), [1, 1], atol=1e-12)
    np.testing.assert_allclose(lorenz_map(two_point_fits["X_tilde"], (0.5, 0.5)), [0, 0], atol=1e-15)
    np.testing.assert_allclose(lorenz_map(two_point_fits["X"], (0.5, 0.5)), [0.25, 0.25], atol=1e-15)
    np.testing.assert_allclose(lorenz_map(lognormal_fit, (0, 0.3)), [0, 0], atol=1e-15)


def test_domain_error(lognormal_fit):
    with pytest.raises(DomainError):
        lorenz_map(lognormal_fit, (1.2, 0.5))
    with pytest.raises(DomainError):
        FittedLorenz(lognormal_fit)([[0.5, -0.1]])


@settings(max_examples=50, deadline=None)
@given(unit, unit)
def test_batch_matches_clip_route(lognormal_fit, weighted_fit, r1, r2):
    for fit in (lognormal_fit, weighted_fit):
        batch = FittedLorenz(fit)([[r1, r2]])[0]
        np.testing.assert_allclose(batch, lorenz_map(fit, (r1, r2)), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(unit, unit, st.floats(0, 0.5), st.floats(0, 0.5))
def test_monotone_in_rank(weighted_fit, r1, r2, d1, d2):
    ev = FittedLorenz(weighted_fit)
    lo, hi = ev([[r1, r2], [min(r1 + d1, 1), min(r2 + d2, 1)]])
    assert np.all(hi >= lo - 1e-14)


def test_two_point_closed_forms(two_point_fits):
    g = np.linspace(0, 1, 21)
    r = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    for kind, fit in two_point_fits.items():
        np.testing.assert_allclose(FittedLorenz(fit)(r), two_point_lorenz(kind, r), atol=1e-12)


def test_gini_weights_examples(two_point_fits, identical_fit):
    assert gini_weights(identical_fit).tolist() == [1.0]
    # (0,0) owns u1 + u2 <= 1, where (1-u1)(1-u2) integrates to 5/24
    np.testing.assert_allclose(gini_weights(two_point_fits["X_tilde"]), [5 / 6, 1 / 6], atol=1e-14)
    np.testing.assert_allclose(gini_weights(two_point_fits["X"]), [0.5, 0.5], atol=1e-14)


def test_gini_examples(two_point_fits, identical_fit):
    assert gini(identical_fit) == pytest.approx(0.0, abs=1e-15)
    assert alt_gini(identical_fit) == pytest.approx(0.0, abs=1e-15)
    assert gini(two_point_fits["X_tilde"]) == pytest.approx(2 / 3, abs=1e-12)
    assert gini(two_point_fits["X"]) == pytest.approx(0.0, abs=1e-12)


def test_gini_forms_agree(lognormal_fit, weighted_fit, two_point_fits):
    for fit in (lognormal_fit, weighted_fit, *two_point_fits.values()):
        assert gini(fit) == pytest.approx(gini_social(fit), abs=1e-9)
        assert gini(fit) == pytest.approx(gini_from_lorenz(FittedLorenz(fit)), abs=1e-6)


def test_alt_gini_from_lorenz(lognormal_fit, weighted_fit):
    for fit in (lognormal_fit, weighted_fit):
        assert alt_gini(fit) == pytest.approx(alt_gini_from_lorenz(FittedLorenz(fit)), abs=1e-6)


def test_alt_gini_monte_carlo(two_point_fits):
    fit = two_point_fits["X_tilde"]
    u = np.random.default_rng(5).random((1_000_000, 2))
    s = np.sum(u * fit.gradient_map(u), axis=1) - 1.0
    assert abs(alt_gini(fit) - s.mean()) <= 3 * s.std() / 1000


def test_alt_gini_below_marginal_average(lognormal_fit):
    x = lognormal_fit.sites
    avg = 0.5 * (scalar_gini(x[:, 0]) + scalar_gini(x[:, 1]))
    assert alt_gini(lognormal_fit) <= avg + 1e-12


def test_scalar_gini_against_pair_formula():
    rng = np.random.default_rng(6)
    x = rng.lognormal(size=300)
    pair = np.abs(x[:, None] - x[None, :]).sum() / (2 * len(x) ** 2 * x.mean())
    assert scalar_gini(x) == pytest.approx(pair, abs=1e-12)
    assert scalar_gini([1, 1, 1]) == 0.0
    assert scalar_gini([0, 2]) == pytest.approx(0.5)
    # weights act as repetition counts
    assert scalar_gini([1, 3], [2, 1]) == pytest.approx(scalar_gini([1, 1, 3]), abs=1e-15)


def test_scalar_lorenz_curve_endpoints():
    pop, share = scalar_lorenz_curve([3, 1, 2])
    assert pop[0] == share[0] == 0.0 and share[-1] == pytest.approx(1.0)
    np.testing.assert_allclose(share, [0, 1 / 6, 1 / 2, 1])


def test_scalar_reduction_under_independence():
    # a product of two discrete marginals is exactly independent
    rng = np.random.default_rng(9)
    a, b = rng.lognormal(size=5), rng.lognormal(sigma=0.5, size=4)
    wa, wb = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(4))
    a, b = a / (wa @ a), b / (wb @ b)
    pts = np.array([(x, y) for x in a for y in b])
    fit = solve(pts, np.outer(wa, wb).ravel())
    expected = 0.5 * (scalar_gini(a, wa) + scalar_gini(b, wb))
    assert gini(fit) == pytest.approx(expected, abs=1e-9)


def test_pseudo_sample_chunking():
    a = pseudo_sample(70_000, 3)
    b = pseudo_sample(70_000, 3)
    assert a.shape == (70_000, 2) and np.array_equal(a, b)
    assert not np.array_equal(a, pseudo_sample(70_000, 4))
    np.testing.assert_array_equal(pseudo_sample(1000, 3), a[:1000])


def test_ilf_identical(identical_fit):
    grid = ilf(FittedLorenz(identical_fit), resolution=101, mc_samples=100_000, seed=1)
    exact = 0.5 * (1 - np.log(0.5))
    se = np.sqrt(exact * (1 - exact) / 100_000)
    assert abs(grid.at((0.5, 0.5)) - exact) <= 3 * se
    assert grid.at((0, 0.7)) == 0.0
    assert grid.at((1, 1)) == 1.0
    assert identical_ilf(np.array([0.5, 0.9])) == pytest.approx(0.846574, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_ilf_is_a_cdf(weighted_fit, seed):
    grid = ilf(FittedLorenz(weighted_fit), resolution=41, mc_samples=5000, seed=seed)
    v = grid.values
    assert v.min() >= 0 and v.max() <= 1 and v[-1, -1] == 1.0
    assert np.all(np.diff(v, axis=0) >= 0) and np.all(np.diff(v, axis=1) >= 0)


def test_ilf_from_shares_counts():
    shares = np.array([[0.1, 0.1], [0.6, 0.2], [0.9, 0.9]])
    grid = ilf_from_shares(shares, 11)
    assert grid.at((0.5, 0.5)) == pytest.approx(1 / 3)
    assert grid.at((0.6, 0.2)) == pytest.approx(2 / 3)
    assert grid.at((0.0, 1.0)) == 0.0


def test_ilf_rejects_small_samples(identical_fit):
    with pytest.raises(ValueError):
        ilf(FittedLorenz(identical_fit), mc_samples=10)


@pytest.fixture(scope="module")
def identical_grid():
    g = np.linspace(0, 1, 201)
    z = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    return IlfGrid(g, identical_ilf(z), 10 ** 9, 0)


def test_alpha_curve_identical_right_angle(identical_grid):
    (curve,) = alpha_curves(identical_grid, [0.75])
    m = identical_alpha_scale(0.75)
    assert m * (1 - np.log(m)) == pytest.approx(0.75, abs=1e-14)
    pts = np.concatenate(curve.polylines)
    # every point sits on min(z1, z2) = m up to one grid step
    assert np.abs(np.minimum(pts[:, 0], pts[:, 1]) - m).max() <= 1 / 200
    corner = pts[np.argmin(np.abs(pts[:, 0] - pts[:, 1]))]
    np.testing.assert_allclose(corner, [m, m], atol=1 / 200)


def test_alpha_curves_shape(lognormal_fit):
    grid = ilf(FittedLorenz(lognormal_fit), resolution=81, mc_samples=20_000, seed=2)
    low, high = alpha_curves(grid, [0.5, 0.9])
    for curve in (low, high):
        for line in curve.polylines:
            assert np.all(np.diff(line[:, 0]) >= -1e-12)
            assert np.all(np.diff(line[:, 1]) <= 1e-12)
    # along any vertical line the 0.9 curve sits at or above the 0.5 curve
    a, b = np.concatenate(low.polylines), np.concatenate(high.polylines)
    for z1 in np.linspace(0.3, 0.9, 7):
        ya = np.interp(z1, *a[np.argsort(a[:, 0])].T)
        yb = np.interp(z1, *b[np.argsort(b[:, 0])].T)
        assert yb >= ya - 1e-12
    with pytest.raises(ValueError):
        alpha_curves(grid, [1.0])


def test_alpha_below_grid_minimum_is_empty(identical_grid):
    grid = IlfGrid(identical_grid.nodes, 0.5 + 0.5 * identical_grid.values, 1, 0)
    assert alpha_curves(grid, [0.2])[0].polylines == []


def test_potential_lorenz_quadratic():
    ev = PotentialLorenz(quadratic_potential)
    g = np.linspace(0, 1, 21)
    r = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    np.testing.assert_allclose(ev(r), quadratic_potential_lorenz(r), atol=1e-13)


def test_gini_from_lorenz_closed_forms():
    assert gini_from_lorenz(identical_lorenz) == pytest.approx(0.0, abs=1e-14)
    # 1 - 4 int (r1 + r2 - 1)_+^2 = 1 - 4/12
    assert gini_from_lorenz(lambda r: two_point_lorenz("X_tilde", r)) == pytest.approx(2 / 3, abs=1e-6)


def test_lognormal_scalar_gini_sampling():
    x = np.random.default_rng(8).lognormal(sigma=1.0, size=200_000)
    assert scalar_gini(x) == pytest.approx(2 * norm.cdf(1 / np.sqrt(2)) - 1, abs=5e-3)
