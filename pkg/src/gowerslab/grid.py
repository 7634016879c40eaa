"""Analytic shapes, regular grids and rasterization.

Every shape knows how to test membership of a batch of points, how to
bound itself, and (when it can) its exact Lebesgue measure.  Grids are
cell-centred and symmetric about the origin: the grid with half-width
``L`` and ``n`` cells per axis has centres ``-L + (i + 1/2) h`` with
``h = 2L / n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class GridExtentError(ValueError):
    """A shape or function reaches the edge of the grid."""


_UNIT_BALL = {0: 1.0, 1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}


def ball_volume(d: int, radius: float = 1.0) -> float:
    unit = _UNIT_BALL.get(d)
    if unit is None:
        unit = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return unit * radius**d


def radius_for_measure(d: int, measure: float) -> float:
    return (measure / ball_volume(d)) ** (1.0 / d)


# ---------------------------------------------------------------------------
# affine maps


@dataclass(frozen=True)
class AffineMap:
    """``x -> linear @ x + shift``."""

    linear: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.linear, dtype=float))
        b = np.atleast_1d(np.asarray(self.shift, dtype=float))
        if A.shape != (b.size, b.size):
            raise ValueError(f"linear part {A.shape} does not match shift {b.shape}")
        if abs(np.linalg.det(A)) < 1e-14:
            raise ValueError("affine map is singular")
        object.__setattr__(self, "linear", A)
        object.__setattr__(self, "shift", b)

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(np.eye(d), np.zeros(d))

    @property
    def dim(self) -> int:
        return self.shift.size

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.linear))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.linear.T + self.shift

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """``self o inner``."""
        return AffineMap(self.linear @ inner.linear, self.linear @ inner.shift + self.shift)

    def inverse(self) -> "AffineMap":
        Ainv = np.linalg.inv(self.linear)
        return AffineMap(Ainv, -Ainv @ self.shift)

    def is_identity(self) -> bool:
        return np.array_equal(self.linear, np.eye(self.dim)) and not self.shift.any()


# ---------------------------------------------------------------------------
# shapes


class ShapeSpec:
    """Base class of the analytic shape tree."""

    kind: str = ""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership of an ``(m, d)`` array of points."""
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def exact_measure(self) -> Optional[float]:
        """Exact Lebesgue measure, or ``None`` when not available in closed form."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class Ball(ShapeSpec):
    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def contains(self, points):
        diff = np.asarray(points, dtype=float) - self.center
        return np.einsum("ij,ij->i", diff, diff) <= self.radius**2

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def exact_measure(self):
        return ball_volume(self.dim, self.radius)

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class Ellipsoid(ShapeSpec):
    """``{x : (x - center)^T matrix (x - center) <= 1}`` with ``matrix`` SPD."""

    center: np.ndarray
    matrix: np.ndarray
    kind = "ellipsoid"

    def __post_init__(self):
        c = _vec(self.center)
        M = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if M.shape != (c.size, c.size):
            raise ValueError("ellipsoid matrix shape does not match center")
        if not np.allclose(M, M.T, rtol=1e-10, atol=1e-12):
            raise ValueError("ellipsoid matrix must be symmetric")
        M = 0.5 * (M + M.T)
        if np.linalg.eigvalsh(M).min() <= 0:
            raise ValueError("ellipsoid matrix must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "matrix", M)

    @classmethod
    def from_axes(cls, center, semi_axes, rotation=None) -> "Ellipsoid":
        a = _vec(semi_axes)
        R = np.eye(a.size) if rotation is None else np.asarray(rotation, dtype=float)
        return cls(center, R @ np.diag(a**-2.0) @ R.T)

    @property
    def dim(self):
        return self.center.size

    def contains(self, points):
        diff = np.asarray(points, dtype=float) - self.center
        return np.einsum("ij,jk,ik->i", diff, self.matrix, diff) <= 1.0

    def bbox(self):
        half = np.sqrt(np.diag(np.linalg.inv(self.matrix)))
        return self.center - half, self.center + half

    def exact_measure(self):
        return ball_volume(self.dim) / math.sqrt(np.linalg.det(self.matrix))

    def to_dict(self):
        return {"kind": "ellipsoid", "center": self.center.tolist(), "matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class Box(ShapeSpec):
    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo, hi = _vec(self.lo), _vec(self.hi)
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError("box requires lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    def contains(self, points):
        p = np.asarray(points, dtype=float)
        return np.all((p >= self.lo) & (p <= self.hi), axis=1)

    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def exact_measure(self):
        return float(np.prod(self.hi - self.lo))

    def to_dict(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class EmptySet(ShapeSpec):
    d: int
    kind = "empty"

    @property
    def dim(self):
        return self.d

    def contains(self, points):
        return np.zeros(np.asarray(points).shape[0], dtype=bool)

    def bbox(self):
        return np.zeros(self.d), np.zeros(self.d)

    def exact_measure(self):
        return 0.0

    def to_dict(self):
        return {"kind": "empty", "d": self.d}


def _bboxes_disjoint(a: ShapeSpec, b: ShapeSpec) -> bool:
    alo, ahi = a.bbox()
    blo, bhi = b.bbox()
    return bool(np.any(ahi <= blo) or np.any(bhi <= alo))


@dataclass(frozen=True, eq=False)
class Union(ShapeSpec):
    parts: tuple
    kind = "union"

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("union needs at least one part")
        if len({p.dim for p in parts}) != 1:
            raise ValueError("union parts must share a dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim

    def contains(self, points):
        out = self.parts[0].contains(points)
        for p in self.parts[1:]:
            out = out | p.contains(points)
        return out

    def bbox(self):
        los, his = zip(*(p.bbox() for p in self.parts))
        return np.min(los, axis=0), np.max(his, axis=0)

    def exact_measure(self):
        # exact only when the parts cannot overlap
        for i, a in enumerate(self.parts):
            for b in self.parts[i + 1 :]:
                if not _bboxes_disjoint(a, b):
                    return None
        ms = [p.exact_measure() for p in self.parts]
        return None if any(m is None for m in ms) else float(sum(ms))

    def to_dict(self):
        return {"kind": "union", "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class Difference(ShapeSpec):
    base: ShapeSpec
    removed: ShapeSpec
    kind = "difference"

    def __post_init__(self):
        if self.base.dim != self.removed.dim:
            raise ValueError("difference operands must share a dimension")

    @property
    def dim(self):
        return self.base.dim

    def contains(self, points):
        return self.base.contains(points) & ~self.removed.contains(points)

    def bbox(self):
        return self.base.bbox()

    def exact_measure(self):
        ma = self.base.exact_measure()
        if ma is None:
            return None
        if _bboxes_disjoint(self.base, self.removed):
            return ma
        a, b = self.base, self.removed
        if isinstance(a, Ball) and isinstance(b, Ball):
            if np.linalg.norm(a.center - b.center) + b.radius <= a.radius:
                return ma - b.exact_measure()
        return None

    def to_dict(self):
        return {"kind": "difference", "base": self.base.to_dict(), "removed": self.removed.to_dict()}


@dataclass(frozen=True, eq=False)
class AffineImage(ShapeSpec):
    map: AffineMap
    shape: ShapeSpec
    kind = "affine_image"

    def __post_init__(self):
        if self.map.dim != self.shape.dim:
            raise ValueError("affine map and shape dimensions differ")

    @property
    def dim(self):
        return self.shape.dim

    def contains(self, points):
        return self.shape.contains(self.map.inverse()(points))

    def bbox(self):
        lo, hi = self.shape.bbox()
        d = self.dim
        corners = np.array([[hi[j] if (i >> j) & 1 else lo[j] for j in range(d)] for i in range(2**d)])
        img = self.map(corners)
        return img.min(axis=0), img.max(axis=0)

    def exact_measure(self):
        m = self.shape.exact_measure()
        return None if m is None else abs(self.map.det) * m

    def to_dict(self):
        return {
            "kind": "affine_image",
            "linear": self.map.linear.tolist(),
            "shift": self.map.shift.tolist(),
            "shape": self.shape.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class StarShape(ShapeSpec):
    """Ball of radius ``radius`` deformed radially by a smooth random field.

    The boundary in direction ``u`` sits at
    ``radius * (1 + amplitude * g(u))`` where
    ``g(u) = sum_i w_i cos(freqs_i . u + phases_i) / sum_i |w_i|``,
    so ``|g| <= 1`` and the set stays star-shaped for ``amplitude < 1``.
    """

    center: np.ndarray
    radius: float
    amplitude: float
    freqs: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    phases: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kind = "star"

    def __post_init__(self):
        c = _vec(self.center)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=float).reshape(-1, c.size))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float).ravel())
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).ravel())
        if not (0 <= self.amplitude < 1):
            raise ValueError("star amplitude must lie in [0, 1)")
        if not self.radius > 0:
            raise ValueError("star radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def perturbation(self, directions: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(directions)
        if self.weights.size == 0 or self.amplitude == 0:
            return np.zeros(u.shape[0])
        norm = np.abs(self.weights).sum()
        return np.cos(u @ self.freqs.T + self.phases) @ self.weights / norm

    def boundary_radius(self, directions: np.ndarray) -> np.ndarray:
        return self.radius * (1.0 + self.amplitude * self.perturbation(directions))

    def contains(self, points):
        diff = np.asarray(points, dtype=float) - self.center
        r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        u = diff / np.where(r > 0, r, 1.0)[:, None]
        return r <= self.boundary_radius(u)

    def bbox(self):
        rmax = self.radius * (1 + self.amplitude)
        return self.center - rmax, self.center + rmax

    def exact_measure(self):
        d = self.dim
        if d == 1:
            return float(self.boundary_radius(np.array([[1.0], [-1.0]])).sum())
        if d == 2:
            theta = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
            r = self.boundary_radius(np.column_stack([np.cos(theta), np.sin(theta)]))
            return float(0.5 * np.mean(r**2) * 2 * np.pi)
        if d == 3:
            z, wz = np.polynomial.legendre.leggauss(128)
            phi = np.linspace(0, 2 * np.pi, 256, endpoint=False)
            Z, P = np.meshgrid(z, phi, indexing="ij")
            s = np.sqrt(1 - Z**2)
            u = np.column_stack([(s * np.cos(P)).ravel(), (s * np.sin(P)).ravel(), Z.ravel()])
            r3 = self.boundary_radius(u).reshape(Z.shape) ** 3 / 3.0
            return float((r3.mean(axis=1) * 2 * np.pi) @ wz)
        return None

    def to_dict(self):
        return {
            "kind": "star",
            "center": self.center.tolist(),
            "radius": float(self.radius),
            "amplitude": float(self.amplitude),
            "freqs": self.freqs.tolist(),
            "phases": self.phases.tolist(),
            "weights": self.weights.tolist(),
        }


def shape_from_dict(data: dict) -> ShapeSpec:
    kind = data["kind"]
    if kind == "empty":
        return EmptySet(int(data["d"]))
    if kind == "ball":
        return Ball(data["center"], float(data["radius"]))
    if kind == "ellipsoid":
        if "semi_axes" in data:
            return Ellipsoid.from_axes(data["center"], data["semi_axes"], data.get("rotation"))
        return Ellipsoid(data["center"], data["matrix"])
    if kind == "box":
        return Box(data["lo"], data["hi"])
    if kind == "union":
        return Union(tuple(shape_from_dict(p) for p in data["parts"]))
    if kind == "difference":
        return Difference(shape_from_dict(data["base"]), shape_from_dict(data["removed"]))
    if kind == "affine_image":
        return AffineImage(AffineMap(data["linear"], data["shift"]), shape_from_dict(data["shape"]))
    if kind == "star":
        return StarShape(
            data["center"], float(data["radius"]), float(data["amplitude"]),
            data.get("freqs", []), data.get("phases", []), data.get("weights", []),
        )
    raise ValueError(f"unknown shape kind {kind!r}")


def apply_affine(map: AffineMap, shape: ShapeSpec) -> ShapeSpec:
    """Image of ``shape`` under ``map``; acts analytically, never by resampling."""
    if map.dim != shape.dim:
        raise ValueError("affine map and shape dimensions differ")
    if map.is_identity():
        return shape
    if isinstance(shape, AffineImage):
        return AffineImage(map.compose(shape.map), shape.shape)
    return AffineImage(map, shape)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    d: int
    extent: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("grid dimension must be 1, 2 or 3")
        if self.n < 2:
            raise ValueError("grid needs at least two cells per axis")
        if not self.extent > 0:
            raise ValueError("grid extent must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def total_volume(self) -> float:
        return (2.0 * self.extent) ** self.d

    def axis(self) -> np.ndarray:
        return -self.extent + (np.arange(self.n) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """Cell centres as an ``(n**d, d)`` array in row-major order."""
        axes = np.meshgrid(*([self.axis()] * self.d), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)

    def radii(self) -> np.ndarray:
        axes = np.meshgrid(*([self.axis()] * self.d), indexing="ij")
        return np.sqrt(sum(a**2 for a in axes))

    def doubled(self) -> "GridSpec":
        """Grid of shift vectors: same spacing, twice the half-width."""
        return GridSpec(self.d, 2 * self.extent, 2 * self.n)


@dataclass
class GridFunction:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.spec.n**self.spec.d:
            raise ValueError(f"expected {self.spec.n ** self.spec.d} values, got {v.size}")
        v = v.reshape(self.spec.shape)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite and nonnegative")
        self.values = v

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.zeros(spec.shape))

    @property
    def is_indicator(self) -> bool:
        return bool(np.all(self.values <= 1.0))

    def measure(self) -> float:
        return measure(self)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.spec, values)


def measure(g: GridFunction) -> float:
    return float(g.spec.cell_volume * g.values.sum())


def symmetric_difference(a: GridFunction, b: GridFunction) -> float:
    """``|A Delta B|`` for indicators; L1 distance in general."""
    if a.spec != b.spec:
        raise ValueError("grid functions live on different grids")
    return float(a.spec.cell_volume * np.abs(a.values - b.values).sum())


def check_fits(shape: ShapeSpec, grid: GridSpec, strict: bool = True) -> None:
    if shape.dim != grid.d:
        raise ValueError(f"shape is {shape.dim}-dimensional, grid is {grid.d}-dimensional")
    lo, hi = shape.bbox()
    limit = grid.extent - grid.h
    if np.any(lo < -limit) or np.any(hi > limit):
        msg = f"shape bbox [{lo}, {hi}] leaves less than one cell of margin inside [-{grid.extent}, {grid.extent}]"
        if strict:
            raise GridExtentError(msg)
        warnings.warn(msg, stacklevel=3)


def rasterize(
    shape: ShapeSpec,
    grid: GridSpec,
    mode: str = "fractional",
    subsamples: int = 4,
    strict: bool = True,
) -> GridFunction:
    """Sample ``shape`` on ``grid``.

    ``binary`` tests cell centres.  ``fractional`` additionally replaces
    every cell near the boundary (one whose 3^d neighbourhood contains
    both inside and outside centres) by its occupancy over
    ``subsamples**d`` interior sample points.
    """
    if mode not in ("binary", "fractional"):
        raise ValueError(f"unknown rasterization mode {mode!r}")
    check_fits(shape, grid, strict=strict)
    inside = shape.contains(grid.centers()).reshape(grid.shape)
    values = inside.astype(float)
    if mode == "binary":
        return GridFunction(grid, values)

    pad = np.pad(inside, 1, mode="edge")
    any_in = np.zeros(grid.shape, dtype=bool)
    any_out = np.zeros(grid.shape, dtype=bool)
    for off in np.ndindex(*(3,) * grid.d):
        window = pad[tuple(slice(o, o + grid.n) for o in off)]
        any_in |= window
        any_out |= ~window
    boundary = np.argwhere(any_in & any_out)
    if len(boundary):
        s = subsamples
        sub = (np.arange(s) + 0.5) / s - 0.5
        offsets = np.stack([a.ravel() for a in np.meshgrid(*([sub] * grid.d), indexing="ij")], axis=1) * grid.h
        centres = -grid.extent + (boundary + 0.5) * grid.h
        chunk = max(1, 2_000_000 // len(offsets))
        occ = np.empty(len(boundary))
        for start in range(0, len(boundary), chunk):
            c = centres[start : start + chunk]
            pts = (c[:, None, :] + offsets[None, :, :]).reshape(-1, grid.d)
            occ[start : start + chunk] = shape.contains(pts).reshape(len(c), -1).mean(axis=1)
        values[tuple(boundary.T)] = occ
    return GridFunction(grid, values)


def random_set(
    grid: GridSpec,
    seed: int,
    model: str = "random-boxes",
    amplitude: float = 0.0,
    mode: str = "fractional",
    modes: int = 6,
) -> tuple[Optional[ShapeSpec], GridFunction]:
    """Deterministic random test instance.

    ``random-boxes`` is a union of one to four axis-parallel boxes;
    ``perturbed-ellipsoid`` is a centred ball of radius ``extent/2``
    deformed radially with relative ``amplitude``.
    """
    rng = np.random.default_rng(seed)
    d, L = grid.d, grid.extent
    usable = L - 2 * grid.h
    if model == "random-boxes":
        parts = []
        for _ in range(int(rng.integers(1, 5))):
            side = rng.uniform(0.15, 0.6, size=d) * usable
            lo = rng.uniform(-usable, usable - side)
            parts.append(Box(lo, lo + side))
        shape: ShapeSpec = parts[0] if len(parts) == 1 else Union(tuple(parts))
    elif model == "perturbed-ellipsoid":
        if not 0 <= amplitude < 0.9:
            raise ValueError("amplitude must lie in [0, 0.9)")
        # frequencies of size 2..4 keep the perturbation away from pure translation
        norms = rng.uniform(2.0, 4.0, size=modes)
        dirs = rng.normal(size=(modes, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        shape = StarShape(
            np.zeros(d), 0.5 * L, amplitude,
            dirs * norms[:, None], rng.uniform(0, 2 * np.pi, modes), rng.normal(size=modes),
        )
    else:
        raise ValueError(f"unknown random-set model {model!r}")
    return shape, rasterize(shape, grid, mode=mode)
