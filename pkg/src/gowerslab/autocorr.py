"""Autocorrelations ``f(s) = |E cap (E + s)|`` and their ball counterparts.

Numerical autocorrelations are zero-padded FFT correlations on the
lattice of shift vectors ``s = j h``.  The ball formulas are closed
forms for the lens volume of two balls of equal radius.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import GridExtentError, GridFunction, GridSpec, ball_volume, radius_for_measure
from .rearrange import Profile1D


def fft_workers() -> int:
    return int(os.environ.get("GWRS_THREADS", "1") or 1)


def shift_grid(spec: GridSpec) -> GridSpec:
    """Odd grid whose cell centres are the lattice shifts ``j h``, ``|j| < n``."""
    m = 2 * spec.n - 1
    return GridSpec(spec.d, 0.5 * m * spec.h, m)


def touches_boundary(values: np.ndarray) -> bool:
    for axis in range(values.ndim):
        edge = np.take(values, [0, values.shape[axis] - 1], axis=axis)
        if np.any(edge != 0):
            return True
    return False


def correlate(a: np.ndarray, b: np.ndarray, cell_volume: float) -> np.ndarray:
    """``c(j) = cell_volume * sum_x a(x) b(x + j)`` for ``|j_i| < n_i``, centred."""
    shape = [sa + sb - 1 for sa, sb in zip(a.shape, b.shape)]
    fshape = [sfft.next_fast_len(s, real=True) for s in shape]
    axes = tuple(range(a.ndim))
    A = sfft.rfftn(a, fshape, axes=axes, workers=fft_workers())
    B = sfft.rfftn(b, fshape, axes=axes, workers=fft_workers())
    full = sfft.irfftn(np.conj(A) * B, fshape, axes=axes, workers=fft_workers())
    # negative shifts wrapped to the end of the padded buffer
    idx = [np.r_[fs - (sa - 1) : fs, 0:sb] for fs, sa, sb in zip(fshape, a.shape, b.shape)]
    return cell_volume * full[np.ix_(*idx)]


@dataclass
class Autocorrelation:
    grid: GridSpec
    values: GridFunction
    source_measure: float

    def at_index(self, j) -> float:
        centre = self.grid.n // 2
        return float(self.values.values[tuple(np.atleast_1d(j) + centre)])


def autocorrelation(e: GridFunction, strict: bool = True) -> Autocorrelation:
    """``s -> int e(x) e(x + s) dx`` on the shift lattice."""
    if strict and touches_boundary(e.values):
        raise GridExtentError("support touches the grid boundary")
    sg = shift_grid(e.spec)
    vals = correlate(e.values, e.values, e.spec.cell_volume)
    peak = float(np.max(vals)) if vals.size else 0.0
    worst = float(vals.min()) if vals.size else 0.0
    if worst < -1e-9 * max(peak, 1e-300):
        raise ArithmeticError(f"autocorrelation round-off {worst:g} exceeds tolerance")
    vals = np.clip(vals, 0.0, None)
    return Autocorrelation(sg, GridFunction(sg, vals), e.measure())


# ---------------------------------------------------------------------------
# balls


def ball_autocorrelation_closed_form(d: int, radius: float, s) -> np.ndarray:
    """``|B cap (B + s)|`` for a ball of the given radius and ``|s| = s``."""
    s = np.abs(np.asarray(s, dtype=float))
    r = float(radius)
    inside = s < 2 * r
    sc = np.where(inside, s, 2 * r)
    if d == 1:
        out = 2 * r - sc
    elif d == 2:
        out = 2 * r**2 * np.arccos(sc / (2 * r)) - 0.5 * sc * np.sqrt(np.maximum(4 * r**2 - sc**2, 0.0))
    elif d == 3:
        out = math.pi * (2 * r - sc) ** 2 * (4 * r + sc) / 12.0
    else:
        raise ValueError(f"no closed form for d = {d}")
    return np.where(inside, out, 0.0)


def ball_autocorrelation_slope(d: int, radius: float, s) -> np.ndarray:
    """``d/ds |B cap (B + s)|``: minus the volume of the mid-plane cross-section."""
    s = np.abs(np.asarray(s, dtype=float))
    r = float(radius)
    inside = s < 2 * r
    rho2 = np.maximum(r**2 - 0.25 * s**2, 0.0)
    if d not in (1, 2, 3):
        raise ValueError(f"no closed form for d = {d}")
    section = ball_volume(d - 1) * rho2 ** ((d - 1) / 2) if d > 1 else np.ones_like(s)
    return np.where(inside, -section, 0.0)


def _shift_radius(d: int, t) -> np.ndarray:
    # radius u with |{s : |s| < u}| = t
    return (np.asarray(t, dtype=float) / ball_volume(d)) ** (1.0 / d)


def tilde_value(d: int, measure_E: float, t) -> np.ndarray:
    """``f~_*(t)``, the decreasing rearrangement of ``s -> |B cap (B + s)|``."""
    r = radius_for_measure(d, measure_E)
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    return ball_autocorrelation_closed_form(d, r, _shift_radius(d, t))


def tilde_slope(d: int, measure_E: float, t) -> np.ndarray:
    """Derivative of ``f~_*`` on the open support; blows up like ``t**(1/d - 1)`` at 0."""
    r = radius_for_measure(d, measure_E)
    t = np.asarray(t, dtype=float)
    u = _shift_radius(d, t)
    with np.errstate(divide="ignore"):
        du = u / (d * t)
    return ball_autocorrelation_slope(d, r, u) * du


def tilde_nodes(d: int, measure_E: float, count: int = 4096) -> np.ndarray:
    # graded towards 0 where f~_* has a t**(1/d) corner
    return 2**d * measure_E * (np.arange(count + 1) / count) ** d


def tilde_f_star(d: int, measure_E: float, count: int = 4096) -> Profile1D:
    """Linear profile of ``f~_*`` supported on ``[0, 2^d |E|]``.

    ``count`` breakpoints are graded towards zero.  Exact values are
    available from :func:`tilde_value`.
    """
    if not measure_E > 0:
        raise ValueError("measure must be positive")
    t = tilde_nodes(d, measure_E, count)
    v = tilde_value(d, measure_E, t)
    v[-1] = 0.0
    return Profile1D(t, v, "linear")


def tilde_F(d: int, measure_E: float, count: int = 4096) -> Profile1D:
    """``F~(t) = int_0^t f~_*``, exact at the breakpoints.

    Computed as the integral of the lens volume over the ball of shift
    vectors of measure ``t``, by Gauss-Legendre on each radial shell.
    """
    r = radius_for_measure(d, measure_E)
    t = tilde_nodes(d, measure_E, count)
    u = _shift_radius(d, t)
    x, w = np.polynomial.legendre.leggauss(12)
    a, b = u[:-1], u[1:]
    half = 0.5 * (b - a)
    rho = 0.5 * (a + b)[:, None] + half[:, None] * x[None, :]
    shell = d * ball_volume(d) * rho ** (d - 1)
    pieces = half * ((ball_autocorrelation_closed_form(d, r, rho) * shell) @ w)
    return Profile1D(t, np.concatenate([[0.0], np.cumsum(pieces)]), "linear")


@dataclass
class MuMeasure:
    """The measure ``-(d/dt) f~_*^{k-1}`` on ``(0, 2^d |E|)``.

    ``density`` is the derivative of the piecewise-linear interpolant of
    ``f~_*^{k-1}`` (the average of the exact density over each breakpoint
    interval), so it integrates to the exact total mass.
    ``density_at`` evaluates the closed-form density pointwise.
    """

    d: int
    k: int
    measure_E: float
    density: Profile1D
    total_mass: float

    def cdf_complement(self, t) -> np.ndarray:
        return tilde_value(self.d, self.measure_E, t) ** (self.k - 1)

    def mass(self, a, b) -> np.ndarray:
        """``mu((a, b))``."""
        return self.cdf_complement(a) - self.cdf_complement(b)

    def density_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        f = tilde_value(self.d, self.measure_E, t)
        out = -(self.k - 1) * f ** (self.k - 2) * tilde_slope(self.d, self.measure_E, t)
        return np.where((t > 0) & (t < 2**self.d * self.measure_E), out, 0.0)


def mu_density(d: int, k: int, measure_E: float = 1.0, count: int = 4096) -> MuMeasure:
    if k < 2:
        raise ValueError("mu is defined for k >= 2")
    if not measure_E > 0:
        raise ValueError("measure must be positive")
    t = tilde_nodes(d, measure_E, count)
    mu = MuMeasure(d, k, measure_E, Profile1D.zero(), float(tilde_value(d, measure_E, 0.0)) ** (k - 1))
    avg = mu.mass(t[:-1], t[1:]) / np.diff(t)
    mu.density = Profile1D(t, np.append(avg, 0.0), "step")
    return mu
