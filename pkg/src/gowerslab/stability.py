"""Near-maximizers: ellipsoid fits, delta/epsilon sweeps, exceptional sets.

``delta`` is measured on the ``2^k``-power scale,
``1 - ||E||^{2^k} / (gamma_{k,d} |E|^{k+1})``, and ``epsilon`` is
``|E Delta fit| / |E|`` for the moment-fitted ellipsoid.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .autocorr import autocorrelation, mu_density, tilde_F
from .gowers import DEFAULT_BUDGET, gamma_value, gowers_norm, tol_disc
from .grid import (
    AffineImage, AffineMap, Ball, Box, Difference, Ellipsoid, GridFunction, GridSpec, ShapeSpec, Union,
    ball_volume, random_set, rasterize, symmetric_difference,
)
from .rearrange import Profile1D, cumulative_F, radial_rearrangement, rearrangement_1d


class DegenerateSetError(ValueError):
    pass


def load_fixtures() -> dict:
    text = resources.files("gowerslab").joinpath("data/fixtures.json").read_text()
    return json.loads(text)


# ---------------------------------------------------------------------------
# ellipsoid fitting


def _moments(e: GridFunction) -> tuple[float, np.ndarray, np.ndarray]:
    w = e.values.ravel()
    pts = e.spec.centers()
    mass = w.sum()
    c = w @ pts / mass
    diff = pts - c
    cov = (diff * w[:, None]).T @ diff / mass
    return mass, c, cov


def fit_ellipsoid(e: GridFunction, refine: bool = False, refine_steps: int = 40) -> Ellipsoid:
    """Ellipsoid with the centroid and second moments of ``e`` and the same measure.

    A solid ellipsoid ``{x^T M x <= 1}`` has covariance ``M^{-1} / (d + 2)``.
    With ``refine`` the moment fit seeds a coordinate descent on the
    symmetric difference.
    """
    m = e.measure()
    if m <= 0:
        raise ValueError("cannot fit an ellipsoid to a null set")
    d, h = e.spec.d, e.spec.h
    _, c, cov = _moments(e)
    if np.linalg.eigvalsh(cov).min() <= 1e-12 * h**2:
        raise DegenerateSetError("measure-zero thickness: second-moment matrix is singular")
    # cells are boxes, not points
    cov = cov + np.eye(d) * h**2 / 12.0
    M = np.linalg.inv(cov) / (d + 2)
    vol = ball_volume(d) / np.sqrt(np.linalg.det(M))
    M = M * (vol / m) ** (2.0 / d)
    fit = Ellipsoid(c, M)
    if refine:
        fit = _refine(e, fit, refine_steps)
    return fit


def _refine(e: GridFunction, fit: Ellipsoid, steps: int) -> Ellipsoid:
    d = e.spec.d
    L = np.linalg.cholesky(fit.matrix)
    params = np.concatenate([fit.center, L[np.tril_indices(d)]])

    def build(p):
        Lp = np.zeros((d, d))
        Lp[np.tril_indices(d)] = p[d:]
        return Ellipsoid(p[:d], Lp @ Lp.T)

    def cost(p):
        try:
            return symmetric_difference(e, rasterize(build(p), e.spec, strict=False))
        except ValueError:
            return np.inf

    best = cost(params)
    step = 0.25 * e.spec.h * np.ones_like(params)
    step[d:] = 0.02 * np.abs(params[d:]).max()
    for _ in range(steps):
        improved = False
        for i in range(params.size):
            for sgn in (1, -1):
                trial = params.copy()
                trial[i] += sgn * step[i]
                c = cost(trial)
                if c < best:
                    best, params, improved = c, trial, True
                    break
        if not improved:
            step *= 0.5
    return build(params)


def fit_epsilon(e: GridFunction, fit: ShapeSpec) -> float:
    return symmetric_difference(e, rasterize(fit, e.spec, strict=False)) / e.measure()


# ---------------------------------------------------------------------------
# delta


def power_deficit(e: GridFunction, k: int, budget: float = DEFAULT_BUDGET) -> tuple[float, float]:
    """``(1 - P / P*, P)`` with ``P = ||E||^{2^k}`` and ``P* = gamma_{k,d} |E|^{k+1}``."""
    power = gowers_norm(e, k, budget).power_value
    star = gamma_value(k, e.spec.d) * e.measure() ** (k + 1)
    return 1.0 - power / star, power


@dataclass
class StabilityRecord:
    seed: int
    amplitude: float
    k: int
    d: int
    n: int
    delta: float
    delta_raw: float
    delta_norm: float
    epsilon: float
    center: list = field(default_factory=list)
    matrix: list = field(default_factory=list)
    measure: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def stability_record(
    e: GridFunction, k: int, seed: int = 0, amplitude: float = 0.0, budget: float = DEFAULT_BUDGET,
) -> StabilityRecord:
    raw, power = power_deficit(e, k, budget)
    fit = fit_ellipsoid(e)
    return StabilityRecord(
        seed=seed, amplitude=amplitude, k=k, d=e.spec.d, n=e.spec.n,
        delta=float(np.clip(raw, 0.0, 1.0)), delta_raw=float(raw),
        # norm scale: 1 - ||E|| / ||E*||
        delta_norm=float(1.0 - max(1.0 - raw, 0.0) ** (1.0 / 2**k)),
        epsilon=fit_epsilon(e, fit), center=fit.center.tolist(), matrix=fit.matrix.tolist(),
        measure=e.measure(),
    )


def stability_sweep(
    grid: GridSpec,
    amplitudes: Sequence[float],
    k: int,
    seeds: Sequence[int],
    budget: float = DEFAULT_BUDGET,
) -> list[StabilityRecord]:
    """One record per (amplitude, seed) over the perturbed-ellipsoid family."""
    if any(a < 0 for a in amplitudes):
        raise ValueError("amplitudes must be nonnegative")
    records = []
    for a in sorted(amplitudes):
        for s in sorted(seeds):
            _, e = random_set(grid, s, "perturbed-ellipsoid", amplitude=a)
            records.append(stability_record(e, k, s, a, budget))
    return records


@dataclass
class SweepSummary:
    spearman: float
    bin_delta: list
    bin_epsilon: list
    monotone: bool


def summarize_sweep(records: Sequence[StabilityRecord], bins: int = 5) -> SweepSummary:
    """Spearman correlation and epsilon averaged over delta quantile bins."""
    delta = np.array([r.delta_raw for r in records])
    eps = np.array([r.epsilon for r in records])
    rho = float(stats.spearmanr(delta, eps).statistic) if len(records) > 2 else float("nan")
    order = np.argsort(delta, kind="stable")
    groups = np.array_split(order, min(bins, len(records)))
    bd = [float(delta[g].mean()) for g in groups]
    be = [float(eps[g].mean()) for g in groups]
    return SweepSummary(rho, bd, be, bool(np.all(np.diff(be) >= 0)))


# ---------------------------------------------------------------------------
# F <= F~ and the exceptional set


def normalized_F(e: GridFunction) -> Profile1D:
    """``F`` of ``E`` dilated to unit measure: ``t -> F(m t) / m^2``."""
    m = e.measure()
    F = cumulative_F(rearrangement_1d(autocorrelation(e).values))
    return Profile1D(F.t / m, F.values / m**2, "linear")


def reference_F(e: GridFunction, reference: str = "grid") -> Profile1D:
    """``F~`` at unit measure, from the raster's own rearrangement or the continuum ball."""
    if reference == "grid":
        return normalized_F(radial_rearrangement(e))
    if reference == "analytic":
        return tilde_F(e.spec.d, 1.0)
    raise ValueError(f"unknown reference {reference!r}")


def cumulative_gap(e: GridFunction, reference: str = "grid") -> float:
    """``max_t (F(t) - F~(t))`` at unit measure; nonpositive up to discretization."""
    F, Ft = normalized_F(e), reference_F(e, reference)
    t = np.union1d(F.t, Ft.t)
    return float(np.max(F(t) - Ft(t)))


@dataclass
class ExceptionalSetReport:
    J: tuple
    delta: float
    mu_bad: float
    mu_J: float
    ratio: float
    k: int
    d: int


def exceptional_measure(
    e: GridFunction, k: int, J: tuple[float, float], delta: float, reference: str = "grid",
) -> ExceptionalSetReport:
    """``mu({s in J : F(s) <= (1 - delta^{1/2}) F~(s)})`` after dilating ``E`` to unit measure.

    ``F`` and ``F~`` are piecewise linear, so the bad set is a finite
    union of intervals found exactly; ``mu`` integrates in closed form.
    """
    d = e.spec.d
    a, b = map(float, J)
    if not (0 < a < b < 2**d):
        raise ValueError(f"J must be a compact subinterval of (0, {2**d})")
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    F, Ft = normalized_F(e), reference_F(e, reference)
    mu = mu_density(d, k, 1.0)
    knots = np.union1d(np.union1d(F.t, Ft.t), [a, b])
    knots = knots[(knots >= a) & (knots <= b)]
    g = F(knots) - (1 - np.sqrt(delta)) * Ft(knots)
    lo, hi = knots[:-1], knots[1:]
    g0, g1 = g[:-1], g[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = lo + (hi - lo) * g0 / (g0 - g1)
    bad_lo = np.where(g0 <= 0, lo, cross)
    bad_hi = np.where(g1 <= 0, hi, cross)
    none = (g0 > 0) & (g1 > 0)
    bad_lo, bad_hi = bad_lo[~none], bad_hi[~none]
    mu_bad = float(np.sum(mu.mass(bad_lo, bad_hi))) if bad_lo.size else 0.0
    mu_J = float(mu.mass(a, b))
    mu_bad = min(max(mu_bad, 0.0), mu_J)
    return ExceptionalSetReport((a, b), float(delta), mu_bad, mu_J, float(mu_bad / np.sqrt(delta)), k, d)


# ---------------------------------------------------------------------------
# catalog for the equality characterization


def ellipsoid_catalog(d: int = 2) -> dict[str, ShapeSpec]:
    if d == 1:
        return {"interval": Box([-0.3], [0.5]), "centred-interval": Ball([0.0], 0.4)}
    if d == 2:
        rot = np.array([[np.cos(0.6), -np.sin(0.6)], [np.sin(0.6), np.cos(0.6)]])
        return {
            "disc": Ball([0.0, 0.0], 0.45),
            "rotated-ellipse": Ellipsoid.from_axes([0.05, -0.1], [0.6, 0.3], rot),
            "sheared-disc": AffineImage(AffineMap([[1.0, 0.6], [0.0, 1.0]], [0.0, 0.0]), Ball([0.0, 0.0], 0.35)),
        }
    return {"ball": Ball([0.0] * 3, 0.45), "ellipsoid": Ellipsoid.from_axes([0.0] * 3, [0.6, 0.4, 0.3])}


def non_ellipsoid_catalog(d: int = 2) -> dict[str, ShapeSpec]:
    if d == 1:
        return {"two-intervals": Union((Box([-0.7], [-0.3]), Box([0.3], [0.7])))}
    if d == 2:
        return {
            "two-balls": Union((Ball([-0.45, 0.0], 0.3), Ball([0.45, 0.0], 0.3))),
            "square": Box([-0.4, -0.4], [0.4, 0.4]),
            "annulus": Difference(Ball([0.0, 0.0], 0.7), Ball([0.0, 0.0], 0.4)),
            "L-shape": Union((Box([-0.5, -0.5], [0.5, -0.1]), Box([-0.5, -0.1], [-0.1, 0.5]))),
        }
    return {"two-balls": Union((Ball([-0.45, 0, 0], 0.3), Ball([0.45, 0, 0], 0.3))), "cube": Box([-0.4] * 3, [0.4] * 3)}


def catalog_grid(d: int, n: int) -> GridSpec:
    return GridSpec(d, 1.0, n)

