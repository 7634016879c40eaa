import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_function
from gowerslab.grid import Ball, Box, GridFunction, GridSpec, Union, rasterize
from gowerslab.rearrange import (
    Profile1D, bathtub_oracle, cumulative_F, integrate_product, layer_cake, radial_rearrangement, rearrangement_1d,
    superlevel_set,
)


def level_measure(g: GridFunction, a: float) -> float:
    return g.spec.cell_volume * np.count_nonzero(g.values > a)


def test_star_of_interval_is_centred():
    spec = GridSpec(1, 2.0, 256)
    star = radial_rearrangement(rasterize(Box([0.0], [1.0]), spec))
    ref = rasterize(Box([-0.5], [0.5]), spec)
    assert np.abs(star.values - ref.values).sum() * spec.cell_volume <= spec.cell_volume


def test_radial_input_is_fixed_point():
    spec = GridSpec(2, 1.0, 64)
    g = GridFunction(spec, np.exp(-4 * spec.radii() ** 2))
    assert np.allclose(radial_rearrangement(g).values, g.values)


def test_two_intervals_to_one():
    spec = GridSpec(1, 2.0, 512)
    two = rasterize(Union((Box([-1.5], [-1.0]), Box([0.75], [1.25]))), spec)
    star = radial_rearrangement(two)
    assert abs(star.measure() - two.measure()) <= 1e-12 * two.measure()
    assert np.abs(star.values - rasterize(Box([-0.5], [0.5]), spec).values).sum() == 0


def test_indicator_rearrangement_1d():
    spec = GridSpec(1, 2.0, 128)
    p = rearrangement_1d(rasterize(Box([0.0], [0.75]), spec))
    assert p(0.0) == 1 and p(0.7) == 1 and p(0.75) == 0 and p(5.0) == 0
    c = rearrangement_1d(GridFunction(spec, 3 * rasterize(Box([0.0], [0.5]), spec).values))
    assert c(0.49) == 3 and c(0.5) == 0


def test_tent_rearrangement():
    n = 2048
    spec = GridSpec(1, 1.5, n)
    x = spec.axis()
    p = rearrangement_1d(GridFunction(spec, np.clip(1 - np.abs(x), 0, None)))
    t = np.linspace(0, 2.2, 1001)
    assert np.max(np.abs(p(t) - np.clip(1 - t / 2, 0, None))) <= 2 / n * 3


def test_cumulative_examples():
    F = cumulative_F(Profile1D([0.0, 1.0], [1.0, 0.0], "step"))
    assert F(0.5) == 0.5 and F(1.0) == 1.0 and F(3.0) == 1.0
    tent = Profile1D(np.linspace(0, 2, 4097), np.clip(1 - np.linspace(0, 2, 4097) / 2, 0, None), "linear")
    Ft = cumulative_F(tent)
    t = np.linspace(0, 2, 33)
    assert np.allclose(Ft(t), t - t**2 / 4, atol=1e-12)
    assert Ft(1.0) == pytest.approx(0.75)
    assert cumulative_F(Profile1D.zero())(1.0) == 0
    with pytest.raises(ValueError):
        cumulative_F(Profile1D([0.0, 1.0], [1.0, 1.0]))


def test_bathtub_examples():
    spec = GridSpec(1, 2.0, 128)
    e = rasterize(Box([0.0], [0.5]), spec)
    assert bathtub_oracle(e, 0.0) == 0
    assert bathtub_oracle(e, 0.5) == pytest.approx(0.5)
    assert bathtub_oracle(e, 2.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        bathtub_oracle(e, 4.5)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 64), (2, 16), (3, 6)]))
def test_bathtub_matches_cumulative(seed, dn):
    rng = np.random.default_rng(seed)
    g = random_function(rng, *dn)
    F = cumulative_F(rearrangement_1d(g))
    for t in rng.uniform(0, g.spec.total_volume, 10):
        a, b = bathtub_oracle(g, t), float(F(t))
        assert abs(a - b) <= 1e-12 * max(abs(a), 1e-300)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 64), (2, 24)]))
def test_equimeasurability(seed, dn):
    rng = np.random.default_rng(seed)
    g = random_function(rng, *dn)
    star = radial_rearrangement(g)
    lower = rearrangement_1d(g)
    for a in rng.uniform(0, 1, 10):
        m = level_measure(g, a)
        assert level_measure(star, a) == pytest.approx(m, abs=g.spec.cell_volume)
        # |{t : f_*(t) > a}| read off the step profile
        assert g.spec.cell_volume * np.count_nonzero(lower.values > a) == m


@given(st.integers(0, 2**32 - 1))
def test_rearrangement_idempotent(seed):
    g = random_function(np.random.default_rng(seed), 2, 20)
    once = radial_rearrangement(g)
    twice = radial_rearrangement(once)
    for a in np.unique(g.values):
        assert level_measure(once, a) == level_measure(twice, a)


def test_star_is_radially_nonincreasing(rng):
    g = random_function(rng, 2, 40)
    star = radial_rearrangement(g)
    r = np.round(star.spec.radii().ravel(), 9)
    v = star.values.ravel()
    shells = np.unique(r)
    lo = np.array([v[r == s].min() for s in shells])
    hi = np.array([v[r == s].max() for s in shells])
    assert np.all(hi[1:] <= lo[:-1])


def test_superlevel_sets_and_layer_cake(rng):
    spec = GridSpec(2, 1.0, 64)
    gauss = GridFunction(spec, np.exp(-8 * spec.radii() ** 2))
    assert superlevel_set(gauss, 2.0).measure() == 0
    ind = rasterize(Ball([0, 0], 0.4), spec, mode="binary")
    assert np.array_equal(superlevel_set(ind, 0.5).values, ind.values)
    # |{exp(-8 r^2) > t}| = pi log(1/t) / 8 = 0.5
    t = np.exp(-8 * 0.5 / np.pi)
    assert superlevel_set(gauss, t).measure() == pytest.approx(0.5, abs=40 * spec.cell_volume)

    g = random_function(rng, 2, 24)
    cake = layer_cake(g)
    assert cake.is_nested()
    assert np.all(np.diff(cake.measures()) <= 0)
    assert np.allclose(cake.reconstruct().values, g.values)


def test_profile_text_roundtrip():
    p = Profile1D([0.0, 0.1, 0.3], [2.0, 1.0 / 3.0, 0.0], "linear")
    q = Profile1D.from_text(p.to_text())
    assert q.kind == "linear" and np.array_equal(p.t, q.t) and np.array_equal(p.values, q.values)
    with pytest.raises(ValueError):
        Profile1D.from_text("0 1\n1 0\n")
    with pytest.raises(ValueError):
        Profile1D([0.0, 0.0], [1.0, 0.0])


def test_integrate_product_exact():
    a = Profile1D([0.0, 1.0, 2.0], [1.0, 0.5, 0.0], "step")
    b = Profile1D([0.0, 2.0], [1.0, 0.0], "linear")
    # int_0^1 (1 - t/2)^2 + int_1^2 0.5 (1 - t/2)^2
    exact = (1 - 0.125) * 2 / 3 + 0.5 * (0.125 * 2 / 3)
    assert integrate_product([a, b], [1, 2]) == pytest.approx(exact, rel=1e-14)
