"""Gowers uniformity norms of grid functions.

Conventions: ``||f||_{U_1} = |int f|`` and

    ||f||_{U_{k+1}}^{2^{k+1}} = int ||f * f(. + s)||_{U_k}^{2^k} ds,

so the recursion natively produces the ``2^k``-th power.  On a grid the
shift integral is a lattice sum weighted by the cell volume.  For
``k = 2`` the inner ``U_1`` powers form the autocorrelation, which is
evaluated for a whole batch of functions at once with zero-padded FFTs.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .autocorr import autocorrelation, fft_workers, tilde_f_star
from .grid import Ball, GridFunction, GridSpec, radius_for_measure, rasterize
from .rearrange import Profile1D, integrate_product, radial_rearrangement, rearrangement_1d

DEFAULT_BUDGET = 2e10
_CHUNK_ELEMS = 1 << 22


class BudgetExceeded(RuntimeError):
    """Estimated work exceeds the configured budget."""


def tol_disc(k: int, n: int) -> float:
    """Default discretization tolerance ``10 (k + 1) / n``."""
    return 10.0 * (k + 1) / n


@dataclass
class GowersResult:
    k: int
    power_value: float
    norm_value: float
    grid: GridSpec
    method: str = "recursive"


def _crop(values: np.ndarray) -> Optional[np.ndarray]:
    nz = np.argwhere(values != 0)
    if nz.size == 0:
        return None
    lo, hi = nz.min(axis=0), nz.max(axis=0) + 1
    return values[tuple(slice(a, b) for a, b in zip(lo, hi))]


def estimated_cost(shape: tuple[int, ...], k: int) -> float:
    """Work model ``(#shifts)^(k-2) * N log N`` on the cropped support."""
    shifts = math.prod(2 * s - 1 for s in shape)
    fft = math.prod(2 * s for s in shape)
    return float(shifts) ** max(k - 2, 0) * fft * max(math.log2(fft), 1.0)


def _shifted(G: np.ndarray, j: tuple[int, ...]) -> np.ndarray:
    """``out[b, x] = G[b, x + j]`` with zero fill."""
    out = np.zeros_like(G)
    dst, src = [slice(None)], [slice(None)]
    for ji, n in zip(j, G.shape[1:]):
        if ji >= 0:
            dst.append(slice(0, n - ji))
            src.append(slice(ji, n))
        else:
            dst.append(slice(-ji, n))
            src.append(slice(0, n + ji))
    out[tuple(dst)] = G[tuple(src)]
    return out


def _u2_batch(G: np.ndarray, cv: float) -> np.ndarray:
    # autocorrelation of every item, then the weighted sum of its squares
    shape = G.shape[1:]
    fshape = [sfft.next_fast_len(2 * s - 1, real=True) for s in shape]
    axes = tuple(range(1, G.ndim))
    spec = sfft.rfftn(G, fshape, axes=axes, workers=fft_workers())
    ac = cv * sfft.irfftn(spec.real**2 + spec.imag**2, fshape, axes=axes, workers=fft_workers())
    return cv * np.sum(ac.reshape(G.shape[0], -1) ** 2, axis=1)


def _power_batch(G: np.ndarray, k: int, cv: float) -> np.ndarray:
    B = G.shape[0]
    if k == 1:
        return (cv * G.reshape(B, -1).sum(axis=1)) ** 2
    if k == 2:
        return _u2_batch(G, cv)
    shape = G.shape[1:]
    shifts = list(itertools.product(*(range(-(s - 1), s) for s in shape)))
    per = max(1, _CHUNK_ELEMS // (B * math.prod(shape)))
    total = np.zeros(B)
    for start in range(0, len(shifts), per):
        chunk = shifts[start : start + per]
        prods = np.stack([G * _shifted(G, j) for j in chunk], axis=1)
        flat = prods.reshape(B * len(chunk), *shape)
        live = flat.reshape(flat.shape[0], -1).any(axis=1)
        vals = np.zeros(flat.shape[0])
        if live.any():
            vals[live] = _power_batch(flat[live], k - 1, cv)
        total += vals.reshape(B, len(chunk)).sum(axis=1)
    return cv * total


def gowers_norm(f: GridFunction, k: int, budget: float = DEFAULT_BUDGET) -> GowersResult:
    """``||f||_{U_k}^{2^k}`` by the inductive shift integral."""
    if k < 1:
        raise ValueError("Gowers norms need k >= 1")
    if np.any(f.values < 0):
        raise ValueError("negative values are not supported")
    core = _crop(f.values)
    if core is None:
        return GowersResult(k, 0.0, 0.0, f.spec, "recursive")
    cost = estimated_cost(core.shape, k)
    if cost > budget:
        raise BudgetExceeded(f"U_{k} on support {core.shape} costs ~{cost:.3g} > budget {budget:.3g}")
    power = float(_power_batch(core[None], k, f.spec.cell_volume)[0])
    return GowersResult(k, power, power ** (1.0 / 2**k), f.spec, "recursive")


def u2_via_fourier(f: GridFunction) -> GowersResult:
    """``||f||_{U_2}^4`` as the fourth power of the 4-norm of the padded DFT."""
    core = _crop(f.values)
    if core is None:
        return GowersResult(2, 0.0, 0.0, f.spec, "fourier-u2")
    cv = f.spec.cell_volume
    fshape = [2 * s for s in core.shape]
    F = np.fft.fftn(core, fshape, axes=tuple(range(core.ndim)))
    power = cv**3 * float(np.sum(np.abs(F) ** 4)) / math.prod(fshape)
    return GowersResult(2, power, power**0.25, f.spec, "fourier-u2")


def normalized_ratio(f: GridFunction, k: int, budget: float = DEFAULT_BUDGET) -> float:
    """``||f||_{U_k} / |f|^{(k+1)/2^k}``, invariant under affine maps."""
    m = f.measure()
    if m <= 0:
        raise ValueError("normalized ratio needs positive measure")
    return gowers_norm(f, k, budget).norm_value / m ** ((k + 1) / 2**k)


def lp_ratio(f: GridFunction, k: int, budget: float = DEFAULT_BUDGET) -> float:
    """``||f||_{U_k} / ||f||_{p_k}`` with ``p_k = 2^k / (k + 1)``."""
    p = 2**k / (k + 1)
    lp = (f.spec.cell_volume * np.sum(f.values**p)) ** (1 / p)
    return gowers_norm(f, k, budget).norm_value / lp


# ---------------------------------------------------------------------------
# gamma_{k,d}


def gamma_closed_form_1d(k: int) -> float:
    """``gamma_{k,1}``: each shift integral of ``(1 - |s|)^j`` contributes ``2 / (j + 1)``."""
    return math.prod(2.0 / (j + 1) for j in range(2, k + 1))


@dataclass
class GammaEstimate:
    k: int
    d: int
    value: float
    cells: tuple[int, ...] = ()
    raw: tuple[float, ...] = ()
    extrapolated: bool = False


_DEFAULT_CELLS = {
    (2, 1): 2048, (3, 1): 512, (4, 1): 128, (5, 1): 32,
    (2, 2): 512, (3, 2): 40, (4, 2): 12,
    (2, 3): 96, (3, 3): 12,
}


def unit_ball_grid(d: int, cells: int, margin: int = 2) -> GridSpec:
    """Grid with ``cells`` cells across the diameter of the unit-measure ball."""
    r = radius_for_measure(d, 1.0)
    h = 2 * r / cells
    n = cells + 2 * margin
    return GridSpec(d, 0.5 * n * h, n)


@functools.lru_cache(maxsize=None)
def _ball_power(k: int, d: int, cells: int, budget: float) -> float:
    grid = unit_ball_grid(d, cells)
    ball = rasterize(Ball(np.zeros(d), radius_for_measure(d, 1.0)), grid, subsamples=8 if d > 1 else 4)
    return gowers_norm(ball, k, budget).power_value / ball.measure() ** (k + 1)


def gamma_estimate(
    k: int, d: int, budget: float = DEFAULT_BUDGET, cells: Optional[int] = None, order: Optional[float] = None,
) -> GammaEstimate:
    """``gamma_{k,d}`` from the unit-measure ball at two resolutions.

    The ball's ``U_k`` power (normalized by its grid measure) is computed
    with ``cells`` and ``cells // 2`` cells across the diameter and
    Richardson-extrapolated with error order ``order`` (2 in d = 1, where
    the raster is exact, 1 otherwise).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return GammaEstimate(1, d, 1.0)
    m = cells or _DEFAULT_CELLS.get((k, d), 8)
    p = order if order is not None else (2.0 if d == 1 else 1.0)
    fine = _ball_power(k, d, m, budget)
    coarse = _ball_power(k, d, m // 2, budget)
    value = fine + (fine - coarse) / (2**p - 1)
    return GammaEstimate(k, d, value, (m // 2, m), (coarse, fine), True)


@functools.lru_cache(maxsize=None)
def gamma_value(k: int, d: int) -> float:
    """Cached default ``gamma_{k,d}``; exact in ``d = 1``."""
    if d == 1:
        return gamma_closed_form_1d(k)
    return gamma_estimate(k, d).value


# ---------------------------------------------------------------------------
# the chain


@dataclass
class ChainReport:
    k: int
    d: int
    n: int
    terms: list
    lhs: float
    rhs: float
    gamma_prev: float
    power: float
    star_power: float
    tol: float
    reference: str = "grid"

    @property
    def spread(self) -> float:
        t = np.asarray(self.terms)
        return float((t.max() - t.min()) / max(abs(t.max()), 1e-300))

    def is_monotone(self, slack: float = 1e-8) -> bool:
        t = np.asarray(self.terms)
        return bool(np.all(np.diff(t) >= -slack * np.abs(t[1:]).clip(min=1e-300)))

    def lower_sandwich_ok(self) -> bool:
        """``||E||^{2^k} <= gamma_{k-1} c_0 (1 + tol)``."""
        return self.lhs <= self.terms[0] * (1 + self.tol)

    def upper_sandwich_ok(self) -> bool:
        """``gamma_{k-1} c_k`` against ``||E*||^{2^k}``.

        For ``k = 2`` or ``d = 1`` the two agree; otherwise the slices
        ``E* cap (E* + s)`` are lenses rather than ellipsoids and only
        ``||E*||^{2^k} <= gamma_{k-1} c_k`` survives.
        """
        ck = self.terms[-1]
        if self.k == 2 or self.d == 1:
            return abs(self.rhs - ck) <= self.tol * ck
        return self.rhs <= ck * (1 + self.tol)

    def to_dict(self) -> dict:
        return {
            "k": self.k, "d": self.d, "n": self.n, "chain": list(map(float, self.terms)),
            "lhs": self.lhs, "rhs": self.rhs, "gamma_ref": self.gamma_prev,
            "power_value": self.power, "star_power_value": self.star_power,
            "tol_disc": self.tol, "reference": self.reference,
        }


def chain_terms(f_star: Profile1D, tilde_star: Profile1D, k: int) -> list[float]:
    """``c_j = int f_*^{k-j} f~_*^j`` for ``j = 0..k``."""
    return [integrate_product([f_star, tilde_star], [k - j, j]) for j in range(k + 1)]


def reference_profile(e: GridFunction, reference: str = "grid") -> Profile1D:
    """``f~_*`` for the chain: from ``E*`` on the same grid, or the continuum ball."""
    if reference == "grid":
        return rearrangement_1d(autocorrelation(radial_rearrangement(e)).values)
    if reference == "analytic":
        return tilde_f_star(e.spec.d, e.measure())
    raise ValueError(f"unknown reference {reference!r}")


def chain_spread(e: GridFunction, k: int, reference: str = "grid") -> tuple[list[float], float]:
    """Chain terms and their relative spread, without the norm recursion."""
    terms = chain_terms(rearrangement_1d(autocorrelation(e).values), reference_profile(e, reference), k)
    t = np.asarray(terms)
    return terms, float((t.max() - t.min()) / max(abs(t.max()), 1e-300))


def chain_report(
    e: GridFunction,
    k: int,
    reference: str = "grid",
    tol: Optional[float] = None,
    budget: float = DEFAULT_BUDGET,
    f_star: Optional[Profile1D] = None,
) -> ChainReport:
    """Chain ``c_0 <= ... <= c_k`` bracketing ``||E||`` and ``||E*||``.

    ``reference="grid"`` takes ``f~`` from the radial rearrangement of the
    raster itself, so a raster that is its own rearrangement gives
    identical ends.  ``reference="analytic"`` uses the continuum ball.
    A precomputed ``f_star`` (for instance read from a profile table)
    replaces the rearranged autocorrelation of ``e``.
    """
    if k < 2:
        raise ValueError("the chain needs k >= 2")
    if e.values.max(initial=0) > 1 + 1e-12:
        raise ValueError("chain_report expects an indicator-type function")
    m = e.measure()
    if m <= 0:
        raise ValueError("chain_report needs positive measure")
    frac = e.values[(e.values > 0) & (e.values < 1)].sum() / e.values.sum()
    if frac > 0.05:
        warnings.warn(f"{frac:.1%} of the mass sits in fractional boundary cells", stacklevel=2)
    if f_star is None:
        f_star = rearrangement_1d(autocorrelation(e).values)
    tilde = reference_profile(e, reference)
    gamma_prev = gamma_value(k - 1, e.spec.d)
    power = gowers_norm(e, k, budget).power_value
    if reference == "grid":
        star_power = gowers_norm(radial_rearrangement(e), k, budget).power_value
    else:
        star_power = gamma_value(k, e.spec.d) * m ** (k + 1)
    terms = chain_terms(f_star, tilde, k)
    return ChainReport(
        k, e.spec.d, e.spec.n, terms, power / gamma_prev, star_power / gamma_prev, gamma_prev,
        power, star_power, tol if tol is not None else tol_disc(k, e.spec.n), reference,
    )
