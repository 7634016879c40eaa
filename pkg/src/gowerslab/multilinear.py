"""The ``2^k``-linear form behind the Gowers norms, and slice volumes.

    T_k(f) = int int prod_{alpha in {0,1}^k} f_alpha(x_0 + alpha . x) dx dx_0

The lattice evaluator enumerates the free vertices ``x_0`` and
``x_0 + x_j`` over the supports of the corresponding entries and reads
the remaining vertices off padded lookup tables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autocorr import ball_autocorrelation_closed_form, correlate
from .gowers import BudgetExceeded
from .grid import GridFunction, GridSpec
from .rearrange import radial_rearrangement

DEFAULT_TERMS_BUDGET = 5e8
# radial quadrature nodes for the lattice slice volume, per dimension
LATTICE_CELLS = {1: 4096, 2: 400, 3: 48}


def vertices(k: int) -> list[tuple[int, ...]]:
    return list(itertools.product((0, 1), repeat=k))


@dataclass
class SetTuple:
    k: int
    entries: dict

    def __post_init__(self):
        if set(self.entries) != set(vertices(self.k)):
            raise ValueError(f"need exactly one entry per vertex of {{0,1}}^{self.k}")
        specs = {g.spec for g in self.entries.values()}
        if len(specs) != 1:
            raise ValueError("all entries must share one grid")

    @classmethod
    def constant(cls, f: GridFunction, k: int) -> "SetTuple":
        return cls(k, {a: f for a in vertices(k)})

    @property
    def spec(self) -> GridSpec:
        return next(iter(self.entries.values())).spec

    def starred(self) -> "SetTuple":
        return SetTuple(self.k, {a: radial_rearrangement(g) for a, g in self.entries.items()})


def t_form(tup: SetTuple, budget: float = DEFAULT_TERMS_BUDGET) -> float:
    """Direct lattice evaluation of ``T_k``."""
    k, spec = tup.k, tup.spec
    n, d = spec.n, spec.d
    unit = [tuple(int(i == j) for i in range(k)) for j in range(k)]
    free = [(0,) * k] + unit
    supports = [np.argwhere(tup.entries[a].values > 0) for a in free]
    count = math.prod(len(s) for s in supports)
    if count == 0:
        return 0.0
    if count > budget:
        raise BudgetExceeded(f"T_{k} needs {count:.3g} terms > budget {budget:.3g}")

    pad = k * n
    size = n + 2 * pad
    strides = np.array([size ** (d - 1 - i) for i in range(d)], dtype=np.int64)
    tables = {}
    for a, g in tup.entries.items():
        t = np.zeros((size,) * d)
        t[tuple(slice(pad, pad + n) for _ in range(d))] = g.values
        tables[a] = t.ravel()
    others = [a for a in vertices(k) if sum(a) >= 2]

    p0s = supports[0]
    base_vals = tup.entries[free[0]].values[tuple(p0s.T)]
    # products of the free-vertex values over the Cartesian product of supports
    free_vals = [tup.entries[a].values[tuple(s.T)] for a, s in zip(free[1:], supports[1:])]
    weight = np.ones([len(s) for s in supports[1:]])
    for j, v in enumerate(free_vals):
        shp = [1] * k
        shp[j] = v.size
        weight = weight * v.reshape(shp)

    total = 0.0
    for p0, v0 in zip(p0s, base_vals):
        offs = []
        for j, s in enumerate(supports[1:]):
            shp = [1] * k
            shp[j] = len(s)
            offs.append(((s - p0) @ strides).reshape(shp))
        base = (p0 + pad) @ strides
        prod = weight * v0
        for a in others:
            idx = base + sum(offs[j] for j in range(k) if a[j])
            prod = prod * tables[a][idx]
        total += float(prod.sum())
    return total * spec.cell_volume ** (k + 1)


def t_form_u2(tup: SetTuple) -> float:
    """``T_2`` as ``int C_{00,01}(s) C_{10,11}(s) ds`` with FFT cross-correlations."""
    if tup.k != 2:
        raise ValueError("the double-correlation evaluation is specific to k = 2")
    e = tup.entries
    cv = tup.spec.cell_volume
    left = correlate(e[(0, 0)].values, e[(0, 1)].values, cv)
    right = correlate(e[(1, 0)].values, e[(1, 1)].values, cv)
    return float(cv * np.sum(left * right))


def bll_compare(tup: SetTuple, budget: float = DEFAULT_TERMS_BUDGET) -> tuple[float, float]:
    """``(T_k(f), T_k(f*))`` with every entry radially rearranged."""
    return t_form(tup, budget), t_form(tup.starred(), budget)


# ---------------------------------------------------------------------------
# slice volumes L(y) = |K_y|


@dataclass
class SliceProfile:
    k: int
    d: int
    radius_B: float
    radii: np.ndarray
    volumes: np.ndarray
    stderr: np.ndarray
    estimator: str = "lattice-sum"
    seed: Optional[int] = None
    samples: int = 0

    def to_text(self) -> str:
        rows = [f"# slice-profile k={self.k} d={self.d} radius_B={self.radius_B:.17g} estimator={self.estimator}"]
        rows += [f"{r:.17g}\t{v:.17g}\t{s:.17g}" for r, v, s in zip(self.radii, self.volumes, self.stderr)]
        return "\n".join(rows) + "\n"

    def strictly_decreasing(self, n_se: float = 2.0, within: Optional[float] = None) -> bool:
        """Successive drops exceed ``n_se`` combined standard errors."""
        mask = self.radii < (self.radius_B if within is None else within)
        v, s = self.volumes[mask], self.stderr[mask]
        drops = v[:-1] - v[1:]
        return bool(np.all(drops > n_se * np.hypot(s[:-1], s[1:])) and np.all(drops > 0))

    def log_concave(self, tol: float = 1e-9) -> bool:
        """Midpoint test ``L(r_i)^2 >= L(r_{i-1}) L(r_{i+1}) (1 - tol)`` on equally spaced radii."""
        v = self.volumes
        if not np.allclose(np.diff(self.radii), self.radii[1] - self.radii[0]):
            raise ValueError("log-concavity test needs equally spaced radii")
        return bool(np.all(v[1:-1] ** 2 >= v[:-2] * v[2:] * (1 - tol)))


def _ball_quadrature(d: int, rho: float, cells: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating over the closed ball of radius ``rho``."""
    if d == 1:
        h = 2 * rho / cells
        z = -rho + (np.arange(cells) + 0.5) * h
        return z[:, None], np.full(cells, h)
    # polar / spherical product rule: Gauss-Legendre in the radius, uniform in angle
    xr, wr = np.polynomial.legendre.leggauss(cells)
    r = 0.5 * rho * (xr + 1)
    wr = 0.5 * rho * wr
    if d == 2:
        m = 2 * cells
        th = 2 * np.pi * np.arange(m) / m
        R, T = np.meshgrid(r, th, indexing="ij")
        pts = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
        w = (wr[:, None] * r[:, None] * np.full((1, m), 2 * np.pi / m)).ravel()
        return pts, w
    xz, wz = np.polynomial.legendre.leggauss(cells)
    m = 2 * cells
    ph = 2 * np.pi * np.arange(m) / m
    R, Z, P = np.meshgrid(r, xz, ph, indexing="ij")
    s = np.sqrt(1 - Z**2)
    pts = np.column_stack([(R * s * np.cos(P)).ravel(), (R * s * np.sin(P)).ravel(), (R * Z).ravel()])
    w = (wr[:, None, None] * r[:, None, None] ** 2 * wz[None, :, None] * np.full((1, 1, m), 2 * np.pi / m)).ravel()
    return pts, w


def slice_volume_lattice(d: int, radius_B: float, y: np.ndarray, cells: Optional[int] = None) -> np.ndarray:
    """``L(y)`` for ``k = 2``: ``int_B |B cap (B + y - z)| dz``.

    The innermost integral over ``x_2`` is the closed-form lens volume;
    the remaining integral runs over a quadrature lattice on ``B``.
    """
    pts, w = _ball_quadrature(d, radius_B, cells or LATTICE_CELLS[d])
    y = np.atleast_2d(np.asarray(y, dtype=float))
    out = np.empty(len(y))
    for i, yi in enumerate(y):
        dist = np.linalg.norm(pts - yi, axis=1)
        out[i] = w @ ball_autocorrelation_closed_form(d, radius_B, dist)
    return out


def slice_volume_mc(
    k: int, d: int, radius_B: float, y: np.ndarray, samples: int = 1_000_000, seed: int = 0, block: int = 200_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo ``L(y)`` with standard errors.

    ``x_j`` is drawn uniformly from the cube around ``B - y`` (the
    ``alpha = e_j`` constraint), and all ``alpha != 0`` constraints are
    tested.  Each block of samples has its own child seed; every radius
    reuses the same stream.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    alphas = np.array([a for a in vertices(k) if any(a)], dtype=float)
    vol = (2 * radius_B) ** (d * k)
    nblocks = -(-samples // block)
    seqs = np.random.SeedSequence(seed).spawn(nblocks)
    hits = np.zeros(len(y))
    done = 0
    for b, ss in enumerate(seqs):
        m = min(block, samples - done)
        u = np.random.default_rng(ss).uniform(-radius_B, radius_B, size=(m, k, d))
        for i, yi in enumerate(y):
            x = u - yi
            pts = yi + np.einsum("aj,mjd->mad", alphas, x)
            ok = np.all(np.einsum("mad,mad->ma", pts, pts) <= radius_B**2, axis=1)
            hits[i] += ok.sum()
        done += m
    p = hits / samples
    return vol * p, vol * np.sqrt(p * (1 - p) / samples)


def slice_volume_profile(
    k: int,
    d: int,
    radius_B: float,
    y_samples,
    estimator: Optional[str] = None,
    samples: int = 1_000_000,
    seed: int = 0,
    cells: Optional[int] = None,
) -> SliceProfile:
    """``L`` along the first coordinate axis at radii ``y_samples``."""
    radii = np.asarray(y_samples, dtype=float)
    y = np.zeros((radii.size, d))
    y[:, 0] = radii
    if estimator is None:
        estimator = "lattice-sum" if k == 2 else "monte-carlo"
    if estimator == "lattice-sum":
        if k != 2:
            raise ValueError("the lattice estimator covers k = 2; use monte-carlo")
        vols = slice_volume_lattice(d, radius_B, y, cells)
        return SliceProfile(k, d, radius_B, radii, vols, np.zeros_like(vols), estimator)
    if estimator == "monte-carlo":
        if samples < 1_000_000:
            raise ValueError("monte-carlo slice volumes use at least 1e6 samples")
        vols, se = slice_volume_mc(k, d, radius_B, y, samples, seed)
        return SliceProfile(k, d, radius_B, radii, vols, se, estimator, seed, samples)
    raise ValueError(f"unknown estimator {estimator!r}")


def integrate_against(profile_fn, S: GridFunction, radius_B: float, cells: Optional[int] = None) -> float:
    """``int_S L`` for a rasterized ``S`` using the lattice ``L``."""
    pts = S.spec.centers()
    vals = S.values.ravel()
    live = vals > 0
    L = profile_fn(S.spec.d, radius_B, pts[live], cells)
    return float(S.spec.cell_volume * vals[live] @ L)
