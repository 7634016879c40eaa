"""Rearrangements, the cumulative functional ``F`` and layer cakes.

On a grid everything is exact: ``f_*`` is a step function whose
plateaus have the width of one cell volume, so the bathtub identity
``F(t) = max_{|A| = t} int_A f`` holds to round-off.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .grid import GridFunction, GridSpec


@dataclass
class Profile1D:
    """Function on ``[0, inf)`` given by breakpoints.

    ``kind="step"``: value ``values[i]`` on ``[t[i], t[i+1])``.
    ``kind="linear"``: linear interpolation between breakpoints.
    Beyond the last breakpoint the last value is held.
    """

    t: np.ndarray
    values: np.ndarray
    kind: str = "step"

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).ravel()
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.kind not in ("step", "linear"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.t.size == 0 or self.t.size != self.values.size:
            raise ValueError("profile needs matching, nonempty breakpoint and value arrays")
        if self.t[0] < 0 or np.any(np.diff(self.t) <= 0):
            raise ValueError("breakpoints must be nonnegative and strictly increasing")

    @classmethod
    def zero(cls, kind: str = "step") -> "Profile1D":
        return cls(np.zeros(1), np.zeros(1), kind)

    @property
    def support_end(self) -> float:
        """Last breakpoint; the profile is constant after it."""
        return float(self.t[-1])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return np.interp(x, self.t, self.values)
        idx = np.clip(np.searchsorted(self.t, x, side="right") - 1, 0, self.t.size - 1)
        return self.values[idx]

    def is_nonincreasing(self, slack: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) <= slack))

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# profile {self.kind}\n")
        for t, v in zip(self.t, self.values):
            buf.write(f"{t:.17g}\t{v:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "Profile1D":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ValueError("profile table must start with a '# profile {step|linear}' header")
        header = lines[0].lstrip("#").split()
        if len(header) != 2 or header[0] != "profile":
            raise ValueError(f"bad profile header {lines[0]!r}")
        rows = np.array([[float(x) for x in ln.split()] for ln in lines[1:]], dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ValueError("profile rows must have two columns")
        return cls(rows[:, 0], rows[:, 1], header[1])


def integrate_product(profiles: Sequence[Profile1D], powers: Sequence[int], upper: float | None = None) -> float:
    """``int_0^upper prod_i p_i(t)**powers[i] dt`` evaluated exactly.

    On every interval between merged breakpoints each factor is a
    polynomial of degree <= 1, so Gauss-Legendre with enough nodes is
    exact.  ``upper`` defaults to the point after which some factor with
    positive power is identically zero.
    """
    active = [(p, e) for p, e in zip(profiles, powers) if e > 0]
    if not active:
        raise ValueError("need at least one factor with positive power")
    if upper is None:
        ends = [p.support_end for p, _ in active if p.values[-1] == 0]
        if not ends:
            raise ValueError("integrand does not vanish at infinity")
        upper = min(ends)
    knots = np.unique(np.concatenate([p.t for p, _ in active] + [[0.0, upper]]))
    knots = knots[(knots >= 0) & (knots <= upper)]
    if knots.size < 2:
        return 0.0
    linear_degree = sum(e for p, e in active if p.kind == "linear")
    nodes, weights = np.polynomial.legendre.leggauss(max(1, linear_degree // 2 + 1))
    a, b = knots[:-1], knots[1:]
    half = 0.5 * (b - a)
    x = 0.5 * (a + b)[:, None] + half[:, None] * nodes[None, :]
    integrand = np.ones_like(x)
    for p, e in active:
        integrand = integrand * p(x) ** e
    return float(np.sum(half * (integrand @ weights)))


def rearrangement_1d(g: GridFunction) -> Profile1D:
    """Nonincreasing rearrangement ``f_*`` as an exact step profile."""
    vals = np.sort(g.values.ravel())[::-1]
    vals = vals[vals > 0]
    cv = g.spec.cell_volume
    t = np.arange(vals.size + 1) * cv
    return Profile1D(t, np.append(vals, 0.0), "step")


def cumulative_F(p: Profile1D) -> Profile1D:
    """``F(t) = int_0^t p``.

    For step input this is exact and piecewise linear.  For linear input
    the returned linear profile is exact at the breakpoints.
    """
    widths = np.diff(p.t)
    if p.kind == "step":
        pieces = p.values[:-1] * widths
    else:
        pieces = 0.5 * (p.values[:-1] + p.values[1:]) * widths
    F = np.concatenate([[0.0], np.cumsum(pieces)])
    t = p.t
    if t[0] > 0:
        lead = p.values[0] * t[0]
        t, F = np.concatenate([[0.0], t]), np.concatenate([[0.0], F + lead])
    if p.values[-1] != 0:
        raise ValueError("cumulative profile of a non-vanishing tail is unbounded")
    return Profile1D(t, F, "linear")


def bathtub_oracle(g: GridFunction, t: float) -> float:
    """Greedy ``max int_A g`` over ``|A| = t``: fill the largest cells first."""
    cv = g.spec.cell_volume
    total = g.values.size * cv
    if t < 0 or t > total * (1 + 1e-12):
        raise ValueError(f"t = {t} outside [0, {total}]")
    if t == 0:
        return 0.0
    order = np.argsort(-g.values.ravel(), kind="stable")
    ranked = g.values.ravel()[order]
    full = min(int(t // cv), ranked.size)
    acc = cv * float(ranked[:full].sum())
    if full < ranked.size:
        acc += (t - full * cv) * float(ranked[full])
    return acc


def _integer_radii2(spec: GridSpec) -> np.ndarray:
    # squared distance to the origin in units of (h/2)^2; exact ties
    ax = 2 * np.arange(spec.n) + 1 - spec.n
    grids = np.meshgrid(*([ax] * spec.d), indexing="ij")
    return sum(a.astype(np.int64) ** 2 for a in grids)


def radial_rearrangement(g: GridFunction) -> GridFunction:
    """Symmetric decreasing rearrangement on the grid.

    Cell values sorted in decreasing order are placed in order of
    increasing distance of the cell centre from the origin; cells at the
    same distance are filled in lexicographic (row-major) order.
    """
    r2 = _integer_radii2(g.spec).ravel()
    order = np.argsort(r2, kind="stable")
    out = np.empty(r2.size)
    out[order] = np.sort(g.values.ravel())[::-1]
    return g.with_values(out.reshape(g.spec.shape))


def superlevel_set(g: GridFunction, t: float) -> GridFunction:
    return g.with_values((g.values > t).astype(float))


@dataclass
class LayerCake:
    thresholds: np.ndarray
    sets: list

    def measures(self) -> np.ndarray:
        return np.array([s.measure() for s in self.sets])

    def is_nested(self) -> bool:
        return all(np.all(b.values <= a.values) for a, b in zip(self.sets, self.sets[1:]))

    def reconstruct(self) -> GridFunction:
        """``sum_i (t_{i+1} - t_i) 1_{E_{t_i}}``; exact when the thresholds are
        ``0`` followed by every distinct positive value."""
        steps = np.diff(np.append(self.thresholds, self.thresholds[-1]))
        acc = sum(w * s.values for w, s in zip(steps, self.sets))
        return self.sets[0].with_values(acc)


def layer_cake(g: GridFunction, thresholds: Iterable[float] | None = None) -> LayerCake:
    if thresholds is None:
        thresholds = np.concatenate([[0.0], np.unique(g.values[g.values > 0])])
    th = np.asarray(list(thresholds), dtype=float)
    if np.any(np.diff(th) <= 0):
        raise ValueError("layer-cake thresholds must be strictly increasing")
    return LayerCake(th, [superlevel_set(g, t) for t in th])
