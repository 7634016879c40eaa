import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gamma2_quadrature, random_function
from gowerslab.grid import (
    AffineMap, Ball, Box, Ellipsoid, GridFunction, GridSpec, Union, apply_affine, random_set, rasterize,
)
from gowerslab.gowers import (
    BudgetExceeded, chain_report, chain_spread, gamma_closed_form_1d, gamma_estimate, gamma_value, gowers_norm, lp_ratio,
    normalized_ratio, tol_disc, u2_via_fourier,
)
from gowerslab.rearrange import radial_rearrangement


@pytest.fixture(scope="module")
def unit_interval():
    return rasterize(Box([0.0], [1.0]), GridSpec(1, 2.0, 1024))


def test_interval_powers(unit_interval):
    assert gowers_norm(unit_interval, 2).power_value == pytest.approx(2 / 3, abs=5e-3)
    assert gowers_norm(unit_interval, 3).power_value == pytest.approx(1 / 3, abs=1e-2)
    assert gowers_norm(unit_interval, 1).power_value == pytest.approx(1.0)


def test_zero_function():
    z = GridFunction.zeros(GridSpec(2, 1.0, 16))
    for k in (1, 2, 3, 4):
        assert gowers_norm(z, k).power_value == 0
    assert u2_via_fourier(z).power_value == 0


def test_norm_is_root_of_power(unit_interval):
    r = gowers_norm(unit_interval, 3)
    assert r.norm_value == pytest.approx(r.power_value ** (1 / 8))


def test_fourier_interval(unit_interval):
    assert u2_via_fourier(unit_interval).power_value == pytest.approx(2 / 3, abs=5e-3)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 128), (2, 32), (3, 10)]))
def test_dual_method(seed, dn):
    g = random_function(np.random.default_rng(seed), *dn)
    a = gowers_norm(g, 2).power_value
    b = u2_via_fourier(g).power_value
    assert a == pytest.approx(b, rel=1e-9)


def test_budget_and_validation():
    g = rasterize(Ball([0.0, 0.0], 0.5), GridSpec(2, 1.0, 128))
    with pytest.raises(BudgetExceeded):
        gowers_norm(g, 4, budget=1e6)
    with pytest.raises(ValueError):
        gowers_norm(g, 0)


def test_gamma_examples():
    for d in (1, 2, 3):
        assert gamma_estimate(1, d).value == 1
    assert gamma_estimate(2, 1).value == pytest.approx(2 / 3, abs=1e-3)
    assert gamma_estimate(4, 1).value == pytest.approx(2 / 15, abs=5e-3)
    assert gamma_closed_form_1d(5) == pytest.approx(2 / 3 * 2 / 4 * 2 / 5 * 2 / 6)


@pytest.mark.parametrize("d", [2, 3])
def test_gamma2_against_quadrature(d):
    assert gamma_value(2, d) == pytest.approx(gamma2_quadrature(d), rel=2e-3)


def test_gamma_decreases_in_k():
    assert gamma_value(3, 2) < gamma_value(2, 2) < 1


def test_normalized_ratio_examples(unit_interval):
    assert normalized_ratio(unit_interval, 2) == pytest.approx((2 / 3) ** 0.25, abs=2e-3)
    spec = GridSpec(1, 8.0, 2048)
    apart = rasterize(Union((Box([-5.0], [-4.0]), Box([4.0], [5.0]))), spec)
    joined = rasterize(Box([-1.0], [1.0]), spec)
    assert normalized_ratio(joined, 2) - normalized_ratio(apart, 2) > 0.01
    with pytest.raises(ValueError):
        normalized_ratio(GridFunction.zeros(spec), 2)


def test_shear_invariance():
    spec = GridSpec(2, 1.0, 256)
    ell = Ellipsoid.from_axes([0.0, 0.0], [0.45, 0.25])
    base = normalized_ratio(rasterize(ell, spec), 2)
    sheared = apply_affine(AffineMap([[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0]), ell)
    assert normalized_ratio(rasterize(sheared, spec), 2) == pytest.approx(base, abs=1e-2)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 256, 3), (2, 64, 2), (2, 48, 3)]))
def test_power_law_and_symmetrization(seed, dnk):
    d, n, k = dnk
    spec = GridSpec(d, 1.0, n)
    _, e = random_set(spec, seed, "random-boxes")
    p = gowers_norm(e, k).power_value
    bound = gamma_value(k, d) * e.measure() ** (k + 1)
    assert p <= bound * (1 + 5 * tol_disc(k, n))
    # lattice rearrangement is only approximately norm-increasing
    star = gowers_norm(radial_rearrangement(e), k).power_value
    assert p <= star * (1 + tol_disc(k, n))


def test_gaussian_beats_perturbed_gaussians():
    spec = GridSpec(1, 4.0, 512)
    x = spec.axis()
    gauss = GridFunction(spec, np.exp(-x**2))
    top = lp_ratio(gauss, 2)
    rng = np.random.default_rng(5)
    for _ in range(20):
        bump = np.exp(-x**2) * (1 + 0.3 * np.sin(rng.uniform(1, 6) * x + rng.uniform(0, 6)))
        bump[[0, -1]] = 0
        assert lp_ratio(GridFunction(spec, bump), 2) < top


def test_radial_function_has_no_gap():
    # radially nonincreasing f equals f*, a non-radial one has a strict gap
    spec = GridSpec(2, 1.0, 64)
    r = spec.radii()
    f = GridFunction(spec, np.clip(0.8 - r, 0, None))
    assert gowers_norm(f, 2).power_value == pytest.approx(gowers_norm(radial_rearrangement(f), 2).power_value)
    x, y = np.meshgrid(spec.axis(), spec.axis(), indexing="ij")
    g = GridFunction(spec, np.clip(0.5 - np.abs(x) - np.abs(y), 0, None) + np.clip(0.3 - np.hypot(x - 0.5, y), 0, None))
    assert gowers_norm(g, 2).power_value < gowers_norm(radial_rearrangement(g), 2).power_value * (1 - 1e-3)


def test_chain_ball_collapses():
    # a binary centred disc is a union of whole lattice shells, hence its own rearrangement
    e = rasterize(Ball([0.0, 0.0], 0.45), GridSpec(2, 1.0, 128), mode="binary")
    rep = chain_report(e, 2)
    assert rep.spread < 1e-8
    assert rep.is_monotone() and rep.lower_sandwich_ok() and rep.upper_sandwich_ok()


@pytest.mark.parametrize("shape", [Ellipsoid.from_axes([0.05, -0.1], [0.6, 0.3]), Ball([0.0, 0.0], 0.45)])
def test_chain_spread_shrinks_with_n(shape):
    spreads = [chain_spread(rasterize(shape, GridSpec(2, 1.0, n)), 3)[1] for n in (128, 256, 512)]
    assert spreads[0] > spreads[1] > spreads[2]


def test_chain_two_intervals_strict():
    e = rasterize(Union((Box([-1.0], [-0.5]), Box([0.5], [1.0]))), GridSpec(1, 2.0, 4096))
    rep = chain_report(e, 2)
    c = rep.terms
    assert c[0] < c[1] < c[2] and c[2] - c[0] > 0.01


def test_chain_interval_k3():
    e = rasterize(Box([0.0], [1.0]), GridSpec(1, 2.0, 1024))
    rep = chain_report(e, 3, reference="analytic")
    assert rep.gamma_prev * rep.terms[-1] == pytest.approx(1 / 3, abs=1e-2)
    assert rep.spread < 1e-2


def test_chain_rejects_k1():
    e = rasterize(Box([0.0], [1.0]), GridSpec(1, 2.0, 64))
    with pytest.raises(ValueError):
        chain_report(e, 1)


def test_chain_warns_on_fractional_mass():
    e = rasterize(Ball([0.0, 0.0], 0.05), GridSpec(2, 1.0, 32))
    with pytest.warns(UserWarning):
        chain_report(e, 2)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]), st.sampled_from([2, 3]))
def test_chain_monotone_random(seed, d, k):
    spec = GridSpec(d, 1.0, 256 if d == 1 else 48)
    _, e = random_set(spec, seed, "random-boxes")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = chain_report(e, k)
    assert rep.is_monotone(1e-8)
    assert rep.lower_sandwich_ok() and rep.upper_sandwich_ok()
