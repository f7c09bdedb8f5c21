"""Rectangles, multi-affine fields and rectangular grid partitions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

THRESHOLD_TOL = 1e-9


class GeometryError(ValueError):
    pass


class PointOutsideRect(GeometryError):
    pass


class OverlappingPredicates(GeometryError):
    pass


class PredicateOutsideDomain(GeometryError):
    pass


@dataclass(frozen=True, order=True)
class Facet:
    """Facet with outer normal ``sign * e_axis`` (axis is 0-based)."""

    axis: int
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise GeometryError("facet sign must be +1 or -1")

    @property
    def opposite(self) -> Facet:
        return Facet(self.axis, -self.sign)

    def normal(self, n: int) -> np.ndarray:
        e = np.zeros(n)
        e[self.axis] = self.sign
        return e

    def __str__(self):
        return f"{'+' if self.sign > 0 else '-'}e{self.axis + 1}"

    @classmethod
    def parse(cls, text: str) -> Facet:
        text = text.strip()
        if len(text) < 3 or text[0] not in "+-" or text[1] != "e":
            raise GeometryError(f"bad facet {text!r}")
        return cls(int(text[2:]) - 1, 1 if text[0] == "+" else -1)


def all_facets(n: int) -> list[Facet]:
    return [Facet(i, s) for i in range(n) for s in (-1, 1)]


@dataclass(frozen=True)
class Rect:
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if len(a) != len(b) or not a:
            raise GeometryError("rectangle corners must have equal, positive dimension")
        if not all(np.isfinite(a)) or not all(np.isfinite(b)):
            raise GeometryError("rectangle corners must be finite")
        if any(x >= y for x, y in zip(a, b)):
            raise GeometryError(f"rectangle needs a_i < b_i, got a={a}, b={b}")

    @property
    def dim(self) -> int:
        return len(self.a)

    @cached_property
    def lo(self) -> np.ndarray:
        return np.array(self.a)

    @cached_property
    def hi(self) -> np.ndarray:
        return np.array(self.b)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def contains_rect(self, other: Rect, tol: float = THRESHOLD_TOL) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def interiors_overlap(self, other: Rect, tol: float = THRESHOLD_TOL) -> bool:
        return bool(np.all(np.minimum(self.hi, other.hi) - np.maximum(self.lo, other.lo) > tol))

    def facet_offset(self, f: Facet) -> float:
        return self.b[f.axis] if f.sign > 0 else self.a[f.axis]

    def vertex(self, selector: int) -> np.ndarray:
        return np.array([self.b[i] if selector >> i & 1 else self.a[i] for i in range(self.dim)])


# Vertices are identified by an N-bit selector: bit i set means coordinate b_i.


def vertices(r: Rect) -> list[int]:
    return list(range(1 << r.dim))


def facet_vertices(r: Rect, f: Facet) -> list[int]:
    bit = 1 if f.sign > 0 else 0
    return [v for v in range(1 << r.dim) if (v >> f.axis & 1) == bit]


def facets_of_vertex(r: Rect, v: int) -> list[Facet]:
    return [Facet(i, 1 if v >> i & 1 else -1) for i in range(r.dim)]


def vertex_weights(r: Rect, x) -> np.ndarray:
    """Interpolation weights of the 2^N vertices at points ``x`` (shape (..., N))."""
    x = np.asarray(x, dtype=float)
    t = (x - r.lo) / r.widths
    n = r.dim
    out = np.ones(x.shape[:-1] + (1 << n,))
    for v in range(1 << n):
        for i in range(n):
            out[..., v] *= t[..., i] if v >> i & 1 else 1.0 - t[..., i]
    return out


def interpolate(r: Rect, vertex_values, x, check: bool = True) -> np.ndarray:
    """Multi-affine interpolation of per-vertex values (indexed by selector)."""
    x = np.asarray(x, dtype=float)
    if check and not r.contains(x, tol=1e-12):
        raise PointOutsideRect(f"{x} not in {r}")
    vals = np.asarray([vertex_values[v] for v in range(1 << r.dim)], dtype=float)
    return vertex_weights(r, x) @ vals


@dataclass(frozen=True)
class MultiAffineField:
    """h(x) = sum over exponent tuples e in {0,1}^N of c_e * prod_k x_k^e_k."""

    dim_in: int
    dim_out: int
    terms: Mapping[tuple[int, ...], tuple[float, ...]]

    def __post_init__(self):
        clean = {}
        for exps, coef in self.terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim_in or any(e not in (0, 1) for e in exps):
                raise GeometryError(f"bad exponent tuple {exps}")
            if exps in clean:
                raise GeometryError(f"duplicate exponent tuple {exps}")
            coef = tuple(float(c) for c in np.atleast_1d(coef))
            if len(coef) != self.dim_out or not all(np.isfinite(coef)):
                raise GeometryError(f"coefficient for {exps} must be {self.dim_out} finite numbers")
            clean[exps] = coef
        object.__setattr__(self, "terms", clean)

    @cached_property
    def _arrays(self):
        if not self.terms:
            return np.zeros((0, self.dim_in), dtype=bool), np.zeros((0, self.dim_out))
        exps = np.array(list(self.terms.keys()), dtype=bool)
        coefs = np.array(list(self.terms.values()))
        return exps, coefs

    def eval(self, x) -> np.ndarray:
        """Evaluate at one point (shape (N,)) or a batch (shape (k, N))."""
        x = np.asarray(x, dtype=float)
        exps, coefs = self._arrays
        mono = np.ones(x.shape[:-1] + (len(exps),))
        for k in range(self.dim_in):
            col = exps[:, k]
            if col.any():
                mono[..., col] *= x[..., k:k + 1]
        return mono @ coefs

    __call__ = eval


@dataclass(frozen=True)
class InputSet:
    """Polytope U = {u : lo <= u <= hi, G u <= g} in R^m."""

    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None
    G: tuple[tuple[float, ...], ...] = ()
    g: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        if self.lo is not None:
            return len(self.lo)
        return len(self.G[0])

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        if self.lo is not None and np.any(u < np.asarray(self.lo) - tol):
            return False
        if self.hi is not None and np.any(u > np.asarray(self.hi) + tol):
            return False
        if self.G and np.any(np.asarray(self.G) @ u > np.asarray(self.g) + tol):
            return False
        return True


@dataclass(frozen=True)
class ControlSystem:
    """xdot = h(x) + B u on the box X with u in U."""

    h: MultiAffineField
    B: np.ndarray
    U: InputSet
    X: Rect

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        object.__setattr__(self, "B", B)
        n = self.X.dim
        if self.h.dim_in != n or self.h.dim_out != n:
            raise GeometryError("drift must map R^N to R^N")
        if B.shape != (n, self.U.dim):
            raise GeometryError(f"B must have shape ({n}, {self.U.dim}), got {B.shape}")
        if not np.all(np.isfinite(B)):
            raise GeometryError("B must be finite")

    @property
    def n(self) -> int:
        return self.X.dim

    @property
    def m(self) -> int:
        return self.U.dim

    def rhs(self, x, u) -> np.ndarray:
        return self.h.eval(x) + np.asarray(u, dtype=float) @ self.B.T


def _merge_thresholds(values: Sequence[float]) -> tuple[float, ...]:
    out: list[float] = []
    for v in sorted(values):
        if not out or v - out[-1] > THRESHOLD_TOL:
            out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class PartitionGrid:
    """Grid partition of a box; cells are indexed row-major (axis 0 slowest)."""

    thresholds: tuple[tuple[float, ...], ...]
    labels: tuple[int, ...]
    _rects: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        th = tuple(tuple(float(x) for x in t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))
        for t in th:
            if len(t) < 2 or any(y - x <= 0 for x, y in zip(t, t[1:])):
                raise GeometryError("thresholds must be strictly increasing with at least 2 entries")
        if len(self.labels) != self.n_cells:
            raise GeometryError("one label per cell required")

    @property
    def dim(self) -> int:
        return len(self.thresholds)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(t) - 1 for t in self.thresholds)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def domain(self) -> Rect:
        return Rect(tuple(t[0] for t in self.thresholds), tuple(t[-1] for t in self.thresholds))

    def multi_index(self, cell: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(cell, self.shape))

    def flat_index(self, idx: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def rect(self, cell: int) -> Rect:
        r = self._rects.get(cell)
        if r is None:
            idx = self.multi_index(cell)
            r = Rect(tuple(t[i] for t, i in zip(self.thresholds, idx)),
                     tuple(t[i + 1] for t, i in zip(self.thresholds, idx)))
            self._rects[cell] = r
        return r

    def label(self, cell: int) -> int:
        return self.labels[cell]

    def cells(self) -> range:
        return range(self.n_cells)

    def neighbor(self, cell: int, f: Facet) -> int | None:
        idx = list(self.multi_index(cell))
        idx[f.axis] += f.sign
        if not 0 <= idx[f.axis] < self.shape[f.axis]:
            return None
        return self.flat_index(idx)

    def is_boundary(self, cell: int, f: Facet) -> bool:
        return self.neighbor(cell, f) is None

    def locate(self, x) -> int | None:
        """Cell containing ``x`` (lower-closed, upper-open; the top face of X is closed)."""
        x = np.asarray(x, dtype=float)
        if not self.domain.contains(x):
            return None
        idx = []
        for t, xi in zip(self.thresholds, x):
            i = int(np.searchsorted(t, xi, side="right")) - 1
            idx.append(min(max(i, 0), len(t) - 2))
        return self.flat_index(idx)

    def refined(self, thresholds: Sequence[Sequence[float]]) -> PartitionGrid:
        """Finer grid on the same domain; each new cell inherits its parent's label."""
        th = tuple(_merge_thresholds(t) for t in thresholds)
        shape = tuple(len(t) - 1 for t in th)
        # parent interval for each new interval, per axis
        parent = []
        for old, new in zip(self.thresholds, th):
            mids = (np.asarray(new[:-1]) + np.asarray(new[1:])) / 2
            parent.append(np.searchsorted(old, mids, side="right") - 1)
        labels = np.asarray(self.labels).reshape(self.shape)
        new_labels = labels[np.ix_(*parent)].reshape(-1)
        assert new_labels.size == int(np.prod(shape))
        return PartitionGrid(th, tuple(new_labels))

    def volume_of(self, cells) -> float:
        return float(sum(self.rect(c).volume for c in cells))


def initial_grid(X: Rect, predicates: Mapping[int, Sequence[Rect]], default: int) -> PartitionGrid:
    """Coarsest grid whose thresholds include every predicate box edge."""
    boxes = [(p, r) for p, rs in predicates.items() for r in rs]
    for p, r in boxes:
        if r.dim != X.dim or not X.contains_rect(r):
            raise PredicateOutsideDomain(f"predicate p{p} box {r} is not inside {X}")
    for (p, r), (q, s) in itertools.combinations(boxes, 2):
        if r.interiors_overlap(s):
            raise OverlappingPredicates(f"boxes of p{p} and p{q} overlap: {r}, {s}")
    thresholds = []
    for j in range(X.dim):
        vals = [X.a[j], X.b[j]]
        for _, r in boxes:
            vals += [r.a[j], r.b[j]]
        thresholds.append(_merge_thresholds(vals))
    shape = tuple(len(t) - 1 for t in thresholds)
    labels = []
    for idx in np.ndindex(*shape):
        center = np.array([(t[i] + t[i + 1]) / 2 for t, i in zip(thresholds, idx)])
        owner = default
        for p, r in boxes:
            if r.contains(center):
                owner = p
                break
        labels.append(owner)
    return PartitionGrid(tuple(thresholds), tuple(labels))
