"""Reach computation by evolving only the outward-flowing boundary.

The initial set is either a smooth sublevel set {l <= 0} or a polyhedron.
Its boundary is sampled, each sample is classified by the sign of the
outward derivative, and the outward part (the lifted front) is advected;
the swept tube, rasterized on a uniform grid, accumulates into the reach
set. A variant confines the evolution to a polyhedral invariant and can
report either an over- or an under-flavored grid set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as expression
from .errors import (
    AssumptionA2Violated,
    DimMismatch,
    EmptyBoundary,
    EmptyPolyhedron,
    InfeasibleFace,
    PreconditionViolated,
    StepTooCoarse,
)
from .flow import LinearDynamics, flow
from .geometry import (
    Face,
    Halfspace,
    Polyhedron,
    is_empty,
    lp_maximize,
    normalize_and_orthogonalize,
    vertices_2d,
)
from .polyapprox import overapproximate_step, propagate_tube

OUTFLOW = "outflow"
TANGENTIAL = "tangential"
INFLOW = "inflow"


# ---------------------------------------------------------------------------
# initial sets


class LevelSet:
    """Sublevel initial set {x : l(x) <= 0} with a sampling box.

    l comes as an expression string (or parsed tree); the gradient is
    symbolic. The box tells the boundary sampler where to look for the
    zero set, it does not clip the set itself.
    """

    def __init__(self, func, lo, hi):
        self.lo = np.asarray(lo, float)
        self.hi = np.asarray(hi, float)
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise DimMismatch("level-set box must have lo < hi componentwise")
        self.dim = self.lo.size
        if isinstance(func, str):
            func = expression.parse(func, self.dim)
        self.func = func
        self.grads = [func.diff(j) for j in range(self.dim)]

    def value(self, points):
        pts = np.asarray(points, float)
        out = np.asarray(self.func.eval(pts), float)
        if out.shape != pts.shape[:-1]:
            out = np.broadcast_to(out, pts.shape[:-1]).copy()
        return out

    def gradient(self, points):
        pts = np.asarray(points, float)
        cols = [
            np.broadcast_to(np.asarray(g.eval(pts), float), pts.shape[:-1])
            for g in self.grads
        ]
        return np.stack(cols, axis=-1)

    def __repr__(self):
        return f"LevelSet({self.func}, box={self.lo.tolist()}..{self.hi.tolist()})"


def _polyhedron_faces(P: Polyhedron):
    """One orthonormalized Face per non-redundant inequality row."""
    faces = []
    rows = P.ineqs
    for i in range(len(rows)):
        sides = [rows[j] for j in range(len(rows)) if j != i]
        cand = Face(
            np.array([h.normal for h in sides]).reshape(len(sides), P.dim),
            np.array([h.offset for h in sides]),
            rows[i].normal,
            rows[i].offset,
        )
        try:
            faces.append((i, normalize_and_orthogonalize(cand)))
        except InfeasibleFace:
            continue  # row never tight: no facet
    return faces


def _segment_interior_lattice(face: Face, h_b: float):
    """Points along a 2D facet, offset half a spacing from both endpoints."""
    ends = vertices_2d(face.as_polyhedron())
    if ends.shape[0] < 2:
        return ends
    a, b = ends[0], ends[-1]
    length = float(np.linalg.norm(b - a))
    n = max(1, int(math.floor(length / h_b)))
    s = (np.arange(n) + 0.5) / n
    return a * (1.0 - s[:, None]) + b * s[:, None]


def _facet_interior_lattice(face: Face, h_b: float):
    if face.dim == 2:
        return _segment_interior_lattice(face, h_b)
    P = face.as_polyhedron()
    lo, hi = P.bounding_box()
    axes = [np.arange(lo[j] + h_b / 2.0, hi[j] + 1e-12, h_b) for j in range(face.dim)]
    axes = [a if a.size else np.array([(lo[j] + hi[j]) / 2.0]) for j, a in enumerate(axes)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, face.dim)
    ak, bk = face.base_normal, face.base_offset
    mesh = mesh - np.outer(mesh @ ak - bk, ak)
    keep = np.ones(mesh.shape[0], bool)
    for i in range(face.side_offsets.size):
        keep &= mesh @ face.side_normals[i] - face.side_offsets[i] <= -h_b / 4.0
    return mesh[keep]


def _levelset_boundary_2d(ls: LevelSet, h_b: float):
    """Zero-set samples: sign changes on a scan grid, refined by normal
    projection, ordered by angle around their centroid (one closed chain)."""
    span = float(np.max(ls.hi - ls.lo))
    n = int(np.clip(math.ceil(2.0 * span / h_b), 32, 512))
    xs = np.linspace(ls.lo[0], ls.hi[0], n)
    ys = np.linspace(ls.lo[1], ls.hi[1], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    V = ls.value(np.stack([X, Y], axis=-1))

    pts = []
    flip_x = V[:-1, :] * V[1:, :] <= 0.0
    for i, j in zip(*np.nonzero(flip_x)):
        v0, v1 = V[i, j], V[i + 1, j]
        if v0 == 0.0 and v1 == 0.0:
            continue
        t = v0 / (v0 - v1) if v0 != v1 else 0.5
        pts.append([xs[i] + t * (xs[i + 1] - xs[i]), ys[j]])
    flip_y = V[:, :-1] * V[:, 1:] <= 0.0
    for i, j in zip(*np.nonzero(flip_y)):
        v0, v1 = V[i, j], V[i, j + 1]
        if v0 == 0.0 and v1 == 0.0:
            continue
        t = v0 / (v0 - v1) if v0 != v1 else 0.5
        pts.append([xs[i], ys[j] + t * (ys[j + 1] - ys[j])])
    if not pts:
        raise EmptyBoundary("level set has no zero crossing inside its box")
    pts = np.array(pts)

    dropped = 0
    refined = []
    for p in pts:
        x = p.copy()
        ok = True
        for _ in range(6):
            g = ls.gradient(x[None, :])[0]
            gg = float(g @ g)
            if not np.all(np.isfinite(g)) or gg < 1e-18:
                ok = False
                break
            x = x - float(ls.value(x[None, :])[0]) * g / gg
        if ok and np.all(np.isfinite(x)):
            refined.append(x)
        else:
            dropped += 1
    if not refined:
        raise EmptyBoundary("every boundary sample lost its gradient")
    pts = np.array(refined)

    # dedupe on an h_b/2 bucket grid, then order around the centroid
    key = np.round(pts / (h_b / 2.0)).astype(int)
    _, first = np.unique(key, axis=0, return_index=True)
    pts = pts[np.sort(first)]
    c = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0])
    return pts[np.argsort(ang, kind="stable")], dropped


def _levelset_boundary_nd(ls: LevelSet, h_b: float):
    axes = [np.arange(ls.lo[j], ls.hi[j] + 1e-12, h_b) for j in range(ls.dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, ls.dim)
    dropped = 0
    keep = []
    for p in mesh:
        x = p.copy()
        bad = False
        for _ in range(8):
            g = ls.gradient(x[None, :])[0]
            gg = float(g @ g)
            if not np.all(np.isfinite(g)) or gg < 1e-18:
                bad = True
                break
            x = x - float(ls.value(x[None, :])[0]) * g / gg
        if bad:
            dropped += 1
            continue
        if abs(float(ls.value(x[None, :])[0])) < 1e-9 and np.all(x >= ls.lo - h_b) and np.all(
            x <= ls.hi + h_b
        ):
            keep.append(x)
    if not keep:
        raise EmptyBoundary("no projected lattice point reached the zero set")
    pts = np.array(keep)
    key = np.round(pts / (h_b / 2.0)).astype(int)
    _, first = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(first)], dropped


def _split_runs(m, closed, keep):
    """Maximal kept index runs of a chain. A fully kept closed chain stays
    closed; a partially kept one is rotated to start at a drop and split
    into open runs. closed=None (unordered points) yields unordered runs."""
    idx = np.arange(m)
    keep = np.asarray(keep, bool)
    if m == 0 or not keep.any():
        return []
    if keep.all():
        return [(idx, closed)]
    open_flag = None if closed is None else False
    if closed is True:
        drop = int(np.nonzero(~keep)[0][0])
        idx = np.roll(idx, -drop)
        keep = keep[idx]
    runs, start = [], None
    for i in range(m):
        if keep[i] and start is None:
            start = i
        elif not keep[i] and start is not None:
            runs.append((idx[start:i], open_flag))
            start = None
    if start is not None:
        runs.append((idx[start:], open_flag))
    return runs


# ---------------------------------------------------------------------------
# boundary classification


@dataclass
class BoundaryFront:
    """Classified boundary samples.

    tags holds one of outflow/tangential/inflow per point; the lifted
    front (what reach evolves) is outflow plus tangential, while outflow
    alone inner-approximates the strict-outward set. chains lists
    (start, stop, closed) index ranges; closed is True for a cyclic run,
    False for an ordered open run, None for unordered samples.
    """

    points: np.ndarray
    normals: np.ndarray
    dots: np.ndarray
    tags: np.ndarray
    spacing: float
    dropped: int = 0
    chains: list = field(default_factory=list)

    @property
    def front_mask(self):
        return self.tags != INFLOW

    @property
    def outflow_points(self):
        return self.points[self.tags == OUTFLOW]

    @property
    def front_points(self):
        return self.points[self.front_mask]

    def front_chains(self):
        """Ordered point runs of the lifted front, split where inflow
        samples interrupt a chain."""
        out = []
        for start, stop, closed in self.chains:
            mask = self.front_mask[start:stop]
            pts = self.points[start:stop]
            for idxs, rclosed in _split_runs(stop - start, closed, mask):
                out.append((pts[idxs].copy(), rclosed))
        return [(p, c) for p, c in out if p.shape[0] > 0]

    def all_chains(self):
        return [
            (self.points[start:stop].copy(), closed)
            for start, stop, closed in self.chains
            if stop > start
        ]


def classify_boundary(init, dyn, h_b: float) -> BoundaryFront:
    """Sample the boundary of ``init`` and tag each sample by the sign of
    the outward derivative: normal . f above +tol is outflow, below -tol
    inflow, in between tangential (kept in the front). tol scales as
    1e-9 (1 + |f|) per sample."""
    chains = []
    dropped = 0
    if isinstance(init, LevelSet):
        if init.dim == 2:
            pts, dropped = _levelset_boundary_2d(init, h_b)
            closed = True
        else:
            pts, dropped = _levelset_boundary_nd(init, h_b)
            closed = None
        normals = init.gradient(pts)
        finite = np.all(np.isfinite(normals), axis=1) & (
            np.linalg.norm(normals, axis=1) > 1e-12
        )
        if not finite.all():
            dropped += int(np.sum(~finite))
            pts, normals = pts[finite], normals[finite]
            closed = None if closed is None else False
        if pts.shape[0] == 0:
            raise EmptyBoundary("no classifiable boundary sample survived")
        chains = [(0, pts.shape[0], closed)]
    elif isinstance(init, Polyhedron):
        if is_empty(init):
            raise EmptyBoundary("polyhedron is empty")
        parts, norm_parts = [], []
        for _, face in _polyhedron_faces(init):
            lat = _facet_interior_lattice(face, h_b)
            if lat.shape[0] == 0:
                continue
            start = sum(p.shape[0] for p in parts)
            parts.append(lat)
            norm_parts.append(np.tile(face.base_normal, (lat.shape[0], 1)))
            chains.append((start, start + lat.shape[0], False if init.dim == 2 else None))
        if not parts:
            raise EmptyBoundary("no facet produced samples; spacing too coarse?")
        pts = np.vstack(parts)
        normals = np.vstack(norm_parts)
    else:
        raise TypeError(f"unsupported initial set {type(init).__name__}")

    f = dyn.evaluate(pts)
    dots = np.einsum("ij,ij->i", normals, f)
    tol = 1e-9 * (1.0 + np.linalg.norm(f, axis=1))
    tags = np.where(dots > tol, OUTFLOW, np.where(dots < -tol, INFLOW, TANGENTIAL))
    return BoundaryFront(pts, normals, dots, tags, h_b, dropped, chains)


# ---------------------------------------------------------------------------
# grid regions


class GridRegion:
    """Occupancy grid over a fixed box with uniform cell size h.

    over mode marks every cell touched by recorded points or sets; under
    mode marks only cells certified by all-corner membership. Points
    outside the box are never marked, only counted in out_of_box.
    """

    def __init__(self, lo, hi, h: float, mode: str = "over"):
        self.lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        if self.lo.shape != hi.shape or np.any(hi <= self.lo):
            raise DimMismatch("grid box must have lo < hi componentwise")
        if h <= 0.0:
            raise ValueError("cell size must be positive")
        self.h = float(h)
        self.shape = tuple(
            max(1, int(math.ceil((hi[j] - self.lo[j]) / h - 1e-12)))
            for j in range(self.lo.size)
        )
        self.hi = self.lo + np.array(self.shape) * self.h
        if mode not in ("over", "under"):
            raise ValueError(f"unknown grid mode {mode!r}")
        self.mode = mode
        self.occupancy = np.zeros(self.shape, dtype=bool)
        self.out_of_box = 0

    @property
    def dim(self):
        return self.lo.size

    def compatible(self, other) -> bool:
        return (
            isinstance(other, GridRegion)
            and self.shape == other.shape
            and bool(np.allclose(self.lo, other.lo))
            and abs(self.h - other.h) < 1e-15
        )

    def blank(self, mode=None):
        return GridRegion(self.lo, self.hi, self.h, mode or self.mode)

    def copy(self):
        g = self.blank()
        g.occupancy = self.occupancy.copy()
        g.out_of_box = self.out_of_box
        return g

    def _indices(self, pts):
        pts = np.asarray(pts, float)
        if pts.size == 0:
            return np.zeros((0, self.dim), int), np.zeros(0, bool)
        pts = np.atleast_2d(pts)
        t = (pts - self.lo) / self.h
        shape = np.array(self.shape)
        inbox = np.all((t > -1e-9) & (t < shape + 1e-9), axis=1)
        idx = np.clip(np.floor(t).astype(int), 0, shape - 1)
        return idx, inbox

    def mark_points(self, pts):
        idx, inbox = self._indices(pts)
        self.out_of_box += int(np.sum(~inbox))
        if inbox.any():
            self.occupancy[tuple(idx[inbox].T)] = True

    def mark_segment(self, a, b):
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        d = b - a
        ts = [0.0, 1.0]
        for ax in range(self.dim):
            if abs(d[ax]) < 1e-15:
                continue
            k0 = (a[ax] - self.lo[ax]) / self.h
            k1 = (b[ax] - self.lo[ax]) / self.h
            for k in range(int(math.floor(min(k0, k1))) + 1, int(math.ceil(max(k0, k1)))):
                ts.append(float(np.clip((k - k0) / (k1 - k0), 0.0, 1.0)))
        ts = sorted(set(ts))
        mids = [a + 0.5 * (t0 + t1) * d for t0, t1 in zip(ts[:-1], ts[1:])]
        self.mark_points(np.array(mids + [a, b]))

    def mark_polyline(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        if pts.shape[0] == 1:
            self.mark_points(pts)
            return
        for i in range(pts.shape[0] - 1):
            self.mark_segment(pts[i], pts[i + 1])

    def include(self, other):
        if not self.compatible(other):
            raise DimMismatch("grid layouts differ")
        self.occupancy |= other.occupancy
        self.out_of_box += other.out_of_box

    def _window(self, lo, hi, pad_cells=0):
        i0 = np.maximum(
            np.floor((np.asarray(lo) - self.lo) / self.h - 1e-9).astype(int) - pad_cells, 0
        )
        i1 = np.minimum(
            np.ceil((np.asarray(hi) - self.lo) / self.h + 1e-9).astype(int) + pad_cells,
            np.array(self.shape),
        )
        if np.any(i1 <= i0):
            return None
        grids = np.meshgrid(*[np.arange(i0[j], i1[j]) for j in range(self.dim)], indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, self.dim)

    @staticmethod
    def _box_rows(lo, hi):
        dim = len(lo)
        rows = []
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = 1.0
            rows.append(Halfspace(e.copy(), hi[j]))
            rows.append(Halfspace(-e, -lo[j]))
        return rows

    def _cell_box_rows(self, idx):
        lo = self.lo + idx * self.h
        return self._box_rows(lo, lo + self.h)

    def _poly_window(self, P: Polyhedron):
        """Cell-index window covering the part of P inside the grid box.
        Clipping first keeps unbounded polyhedra (strips, halfplanes) legal."""
        clipped = Polyhedron(P.ineqs + tuple(self._box_rows(self.lo, self.hi)), P.eqs)
        try:
            lo, hi = clipped.bounding_box()
        except EmptyPolyhedron:
            return None
        return self._window(lo, hi)

    def cells_touching(self, P: Polyhedron):
        """Boolean mask of cells whose closed box meets the polyhedron.
        Cells whose center clears every row by the half diagonal are kept
        outright; straddling cells get an exact feasibility probe."""
        mask = np.zeros(self.shape, dtype=bool)
        idx = self._poly_window(P)
        if idx is None:
            return mask
        centers = self.lo + (idx + 0.5) * self.h
        half_diag = self.h * math.sqrt(self.dim) / 2.0
        A_ub, b_ub, A_eq, b_eq = P.matrices()
        if len(b_ub):
            norms = np.linalg.norm(A_ub, axis=1)
            resid = (centers @ A_ub.T - b_ub) / np.where(norms > 0, norms, 1.0)
            inside = np.all(resid <= 1e-12, axis=1)
            near = np.all(resid <= half_diag + 1e-9, axis=1) & ~inside
        else:
            inside = np.ones(idx.shape[0], bool)
            near = np.zeros(idx.shape[0], bool)
        if len(b_eq):
            enorm = np.linalg.norm(A_eq, axis=1)
            eresid = np.abs(centers @ A_eq.T - b_eq) / np.where(enorm > 0, enorm, 1.0)
            fail = ~np.all(eresid <= 1e-12, axis=1)
            near |= inside & fail
            inside &= ~fail
            near &= np.all(eresid <= half_diag + 1e-9, axis=1)
        mask[tuple(idx[inside].T)] = True
        for i in np.nonzero(near)[0]:
            probe = Polyhedron(P.ineqs + tuple(self._cell_box_rows(idx[i])), P.eqs)
            if not is_empty(probe):
                mask[tuple(idx[i])] = True
        return mask

    def cells_inside(self, P: Polyhedron):
        """Boolean mask of cells all of whose corners lie in the polyhedron."""
        mask = np.zeros(self.shape, dtype=bool)
        idx = self._poly_window(P)
        if idx is None:
            return mask
        ok = np.ones(idx.shape[0], bool)
        for corner in np.ndindex(*(2,) * self.dim):
            pts = self.lo + (idx + np.array(corner)) * self.h
            ok &= P.contains(pts, tol=1e-9)
        mask[tuple(idx[ok].T)] = True
        return mask

    def mark_polyhedron(self, P: Polyhedron):
        if self.mode == "over":
            self.occupancy |= self.cells_touching(P)
        else:
            self.occupancy |= self.cells_inside(P)

    def mark_levelset(self, ls: LevelSet):
        idx = self._window(ls.lo, ls.hi, pad_cells=1)
        if idx is None:
            return
        if self.mode == "over":
            hit = np.zeros(idx.shape[0], bool)
            for corner in np.ndindex(*(2,) * self.dim):
                pts = self.lo + (idx + np.array(corner)) * self.h
                hit |= ls.value(pts) <= 0.0
            hit |= ls.value(self.lo + (idx + 0.5) * self.h) <= 0.0
        else:
            hit = np.ones(idx.shape[0], bool)
            for corner in np.ndindex(*(2,) * self.dim):
                pts = self.lo + (idx + np.array(corner)) * self.h
                hit &= ls.value(pts) < 0.0
            hit &= ls.value(self.lo + (idx + 0.5) * self.h) < 0.0
        self.occupancy[tuple(idx[hit].T)] = True

    def contains_points(self, pts):
        idx, inbox = self._indices(pts)
        out = np.zeros(idx.shape[0], bool)
        if inbox.any():
            out[inbox] = self.occupancy[tuple(idx[inbox].T)]
        return out

    def count(self) -> int:
        return int(np.sum(self.occupancy))

    def cell_centers(self):
        idx = np.argwhere(self.occupancy)
        return self.lo + (idx + 0.5) * self.h

    def subset_of(self, other) -> bool:
        if not self.compatible(other):
            raise DimMismatch("grid layouts differ")
        return bool(np.all(~self.occupancy | other.occupancy))

    def symmetric_difference_count(self, other) -> int:
        if not self.compatible(other):
            raise DimMismatch("grid layouts differ")
        return int(np.sum(self.occupancy ^ other.occupancy))

    def _interior_mask(self):
        """Marked cells all of whose face neighbors are marked too."""
        occ = self.occupancy
        interior = np.ones(self.shape, bool)
        for ax in range(self.dim):
            below = np.zeros(self.shape, bool)
            above = np.zeros(self.shape, bool)
            sl_lo = [slice(None)] * self.dim
            sl_hi = [slice(None)] * self.dim
            sl_lo[ax] = slice(1, None)
            sl_hi[ax] = slice(None, -1)
            below[tuple(sl_lo)] = occ[tuple(sl_hi)]
            above[tuple(sl_hi)] = occ[tuple(sl_lo)]
            interior &= below & above
        return occ & interior

    def boundary_cell_centers(self):
        """Centers of marked cells with an unmarked (or out-of-grid)
        face neighbor."""
        if not self.occupancy.any():
            return np.zeros((0, self.dim))
        idx = np.argwhere(self.occupancy & ~self._interior_mask())
        return self.lo + (idx + 0.5) * self.h

    def interior_contains_points(self, pts):
        """Membership restricted to the eroded (non-boundary) cells."""
        idx, inbox = self._indices(pts)
        out = np.zeros(idx.shape[0], bool)
        if inbox.any():
            out[inbox] = self._interior_mask()[tuple(idx[inbox].T)]
        return out

    def mark_box(self, lo, hi):
        """Mark every cell whose closed box meets the coordinate box [lo, hi]."""
        idx = self._window(lo, hi)
        if idx is not None:
            self.occupancy[tuple(idx.T)] = True

    def hausdorff(self, other, cap_cells: int = 8) -> float:
        """Symmetric grid Hausdorff gap: largest Chebyshev cell distance
        from a marked cell to the other region, in length units. Returns
        inf beyond cap_cells and when exactly one side is empty."""
        if not self.compatible(other):
            raise DimMismatch("grid layouts differ")
        a, b = self.occupancy, other.occupancy
        if not a.any() and not b.any():
            return 0.0
        if not a.any() or not b.any():
            return math.inf
        shape = np.array(self.shape)

        def directed(A, B):
            idx = np.argwhere(A)
            remaining = np.ones(idx.shape[0], bool)
            dist = np.zeros(idx.shape[0])
            for r in range(cap_cells + 1):
                offs = [
                    np.array(o) - r
                    for o in np.ndindex(*(2 * r + 1,) * self.dim)
                    if np.max(np.abs(np.array(o) - r)) == r
                ]
                hit = np.zeros(idx.shape[0], bool)
                for o in offs:
                    nb = idx + o
                    ok = np.all((nb >= 0) & (nb < shape), axis=1)
                    if ok.any():
                        sub = np.zeros(idx.shape[0], bool)
                        sub[ok] = B[tuple(nb[ok].T)]
                        hit |= sub
                dist[remaining & hit] = r * self.h
                remaining &= ~hit
                if not remaining.any():
                    return float(np.max(dist))
            return math.inf

        return max(directed(a, b), directed(b, a))


# ---------------------------------------------------------------------------
# time grids and tubes


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing step times starting at 0."""

    times: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, float))
        if t.size < 1 or t[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if t.size > 1 and np.any(np.diff(t) <= 0.0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, tau: float, dt: float):
        if tau < 0 or dt <= 0:
            raise ValueError("need tau >= 0 and dt > 0")
        n = int(math.floor(tau / dt + 1e-9))
        times = np.arange(n + 1) * dt
        if times[-1] < tau - 1e-12:
            times = np.append(times, tau)
        return cls(times)

    def intervals(self, tau: float | None = None):
        """Consecutive (t0, t1) pairs, the last one clamped at tau."""
        out = []
        for t0, t1 in zip(self.times[:-1], self.times[1:]):
            if tau is not None:
                if t0 >= tau - 1e-12:
                    break
                t1 = min(t1, tau)
            out.append((float(t0), float(t1)))
        return out

    def delta(self, i: int) -> float:
        """Step length for iteration i; past the grid end the final step
        length repeats (open-horizon runs)."""
        d = np.diff(self.times)
        if d.size == 0:
            raise ValueError("time grid has a single point, no step length")
        return float(d[min(i, d.size - 1)])


@dataclass
class ReachTube:
    """Reach-set accumulation: one payload per time interval plus the
    cumulative grids. Payloads are GridRegions on the front path and
    tuples of Polyhedra on the linear-polyhedral path."""

    segments: list
    direction: str
    grid: TimeGrid
    initial: object
    initial_region: GridRegion | None = None
    occupancy: GridRegion | None = None
    under_occupancy: GridRegion | None = None
    under_initial_region: GridRegion | None = None
    front_collapse: bool = False
    iteration_cap: bool = False
    delta_shrunk: bool = False
    iterations: int = 0

    def region(self) -> GridRegion:
        reg = self.occupancy if self.direction == "over" else self.under_occupancy
        if reg is None:
            raise ValueError("this tube stores polyhedra, not a grid region")
        return reg

    def _initial_grid(self):
        if self.direction == "over":
            return self.initial_region
        return self.under_initial_region

    def combined_region(self) -> GridRegion:
        """Cumulative cells including the rasterized initial set."""
        reg = self.region().copy()
        init = self._initial_grid()
        if init is not None:
            reg.include(init)
        return reg

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        if self.occupancy is not None or self.under_occupancy is not None:
            hit = self.region().contains_points(pts)
            init = self._initial_grid()
            if init is not None:
                hit |= init.contains_points(pts)
            return hit
        hit = (
            self.initial.contains(pts, tol=1e-9)
            if isinstance(self.initial, Polyhedron)
            else np.zeros(pts.shape[0], bool)
        )
        for _, _, payload in self.segments:
            for P in payload:
                hit |= P.contains(pts, tol=1e-9)
        return hit


# ---------------------------------------------------------------------------
# front advection helpers


def _max_speed(dyn, pts):
    if pts.shape[0] == 0:
        return 0.0
    f = dyn.evaluate(pts)
    return float(np.max(np.linalg.norm(f, axis=1)))


def _substeps(delta, speed, h):
    return max(1, int(math.ceil(abs(delta) * speed / (0.5 * h))))


def _advect(dyn, pts, delta, nsub, h, tol):
    """Substepped flow over [0, delta]: (m, nsub+1, dim) trajectories.
    Raises StepTooCoarse when one substep moves a sample further than 2h."""
    traj = np.empty((pts.shape[0], nsub + 1, pts.shape[1]))
    traj[:, 0] = pts
    dt = delta / nsub
    cur = pts
    for s in range(nsub):
        nxt = flow(dyn, cur, dt, tol=tol)
        move = np.linalg.norm(nxt - cur, axis=1)
        if np.any(move > 2.0 * h):
            raise StepTooCoarse(
                f"a front sample moved {float(np.max(move)):.3g} in one substep "
                f"(limit {2.0 * h:.3g}); refine the time grid"
            )
        traj[:, s + 1] = nxt
        cur = nxt
    return traj


def _resample_chain(dyn, pre, pts, closed, h_b, delta, h, tol, max_rounds=6):
    """Insert flowed pre-image midpoints wherever advected neighbors drift
    more than 2 h_b apart, keeping the front h_b-dense."""
    pre = pre.copy()
    pts = pts.copy()
    for _ in range(max_rounds):
        if pts.shape[0] < 2:
            return pts
        cur = pts if closed else pts[:-1]
        nxt = np.roll(pts, -1, axis=0) if closed else pts[1:]
        gaps = np.linalg.norm(nxt - cur, axis=1)
        wide = np.nonzero(gaps > 2.0 * h_b)[0]
        if wide.size == 0:
            return pts
        mids = np.array([0.5 * (pre[i] + pre[(i + 1) % pre.shape[0]]) for i in wide])
        nsub = _substeps(delta, _max_speed(dyn, mids), h)
        moved = _advect(dyn, mids, delta, nsub, h, tol)[:, -1]
        pos = {int(i): j for j, i in enumerate(wide)}
        new_pts, new_pre = [], []
        for i in range(pts.shape[0]):
            new_pts.append(pts[i])
            new_pre.append(pre[i])
            if i in pos:
                new_pts.append(moved[pos[i]])
                new_pre.append(mids[pos[i]])
        pts = np.array(new_pts)
        pre = np.array(new_pre)
    return pts


def _inside_init_strict(init, pts):
    """Strict interior of the initial set, used when pruning advected
    front points: boundary-sliding samples must stay alive."""
    if isinstance(init, Polyhedron):
        return init.contains(pts, tol=-1e-9)
    if isinstance(init, GridRegion):
        return init.interior_contains_points(pts)
    return init.value(pts) < -1e-9


def _default_box(init, dyn, horizon, h):
    if isinstance(init, LevelSet):
        lo, hi = init.lo.copy(), init.hi.copy()
    else:
        lo, hi = init.bounding_box()
    pad = 3.0 * h
    for _ in range(2):
        axes = [np.linspace(lo[j] - pad, hi[j] + pad, 9) for j in range(lo.size)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
        pad = horizon * _max_speed(dyn, mesh) + 3.0 * h
    return lo - pad, hi + pad


def _mark_initial(init, region: GridRegion):
    if isinstance(init, LevelSet):
        region.mark_levelset(init)
    elif isinstance(init, GridRegion):
        if init.compatible(region):
            region.include(init)
        else:
            region.mark_points(init.cell_centers())
    else:
        region.mark_polyhedron(init)


def _under_initial(init, template: GridRegion):
    under = template.blank("under")
    if isinstance(init, Polyhedron):
        under.occupancy |= under.cells_inside(init)
    elif isinstance(init, GridRegion):
        # a cell set is exact: each marked cell is wholly contained
        under.mark_points(init.cell_centers())
    else:
        under.mark_levelset(init)
    return under


def _interior_lattice(init, spacing):
    if isinstance(init, LevelSet):
        lo, hi = init.lo, init.hi
    else:
        lo, hi = init.bounding_box()
    axes = [np.arange(lo[j] + spacing / 2.0, hi[j] + 1e-12, spacing) for j in range(lo.size)]
    axes = [a if a.size else np.array([(lo[j] + hi[j]) / 2.0]) for j, a in enumerate(axes)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    if isinstance(init, LevelSet):
        return mesh[init.value(mesh) < 0.0]
    return mesh[init.contains(mesh, tol=0.0)]


def _front_sweep(chains, init, dyn, intervals, cum, h, h_b, flow_tol):
    """Shared advect/prune/resample loop. Marks swept cells into cum and
    returns (segments, final chains, iterations, collapsed)."""
    segments = []
    collapsed = False
    iterations = 0
    for t0, t1 in intervals:
        if not chains:
            collapsed = True
            break
        delta = t1 - t0
        seg = cum.blank()
        advected = []
        for pts, closed in chains:
            nsub = _substeps(delta, _max_speed(dyn, pts), h)
            traj = _advect(dyn, pts, delta, nsub, h, flow_tol)
            seg.mark_points(traj.reshape(-1, pts.shape[1]))
            advected.append((pts, traj[:, -1], closed))
        nxt = []
        for pre, ends, closed in advected:
            keep = ~(cum.contains_points(ends) | _inside_init_strict(init, ends))
            for idxs, rclosed in _split_runs(pre.shape[0], closed, keep):
                if rclosed is None:
                    run = ends[idxs]
                else:
                    run = _resample_chain(
                        dyn, pre[idxs], ends[idxs], rclosed, h_b, delta, h, flow_tol
                    )
                nxt.append((run, rclosed))
        cum.include(seg)
        segments.append((t0, t1, seg))
        chains = [c for c in nxt if c[0].shape[0]]
        iterations += 1
    else:
        if not chains:
            collapsed = True
    return segments, chains, iterations, collapsed


# ---------------------------------------------------------------------------
# bounded-time reach


def _linear_poly_reach(init, dyn, tau, grid, bounds):
    """Per-face tube polyhedra for linear dynamics: every outflow face of
    the initial polyhedron contributes one enclosure per time interval,
    transported to the interval start by the exact flow map."""
    A = dyn.matrix
    outflow = []
    for i, face in _polyhedron_faces(init):
        c = A.T @ face.base_normal
        FP = face.as_polyhedron()
        A_ub, b_ub, A_eq, b_eq = FP.matrices()
        args = (
            A_ub if len(b_ub) else None,
            b_ub if len(b_ub) else None,
            A_eq if len(b_eq) else None,
            b_eq if len(b_eq) else None,
        )
        up = lp_maximize(c, *args)
        dn = lp_maximize(-c, *args)
        if up.status != "optimal" or dn.status != "optimal":
            raise AssumptionA2Violated(
                -math.inf, f"face {i} has unbounded outward derivative"
            )
        fmin, fmax = -dn.value, up.value
        if fmin > 1e-9:
            outflow.append(face)
        elif fmax >= -1e-9:
            raise AssumptionA2Violated(
                fmin, f"face {i} is neither strictly outflow nor strictly inflow"
            )

    step_cache: dict[float, list] = {}
    moved_cache: dict[tuple, list] = {}
    segments = []
    shrunk = False
    for t0, t1 in grid.intervals(tau):
        dkey = round(t1 - t0, 12)
        if dkey not in step_cache:
            results = [overapproximate_step(f, A, t1 - t0, mode=bounds) for f in outflow]
            shrunk |= any(r.delta_shrunk for r in results)
            step_cache[dkey] = [P for r in results for P in r.polyhedra]
        key = (dkey, round(t0, 12))
        if key not in moved_cache:
            if t0 == 0.0:
                moved_cache[key] = list(step_cache[dkey])
            else:
                moved_cache[key] = [
                    propagate_tube(P, A, t0, 1)[0] for P in step_cache[dkey]
                ]
        segments.append((t0, t1, tuple(moved_cache[key])))
    return ReachTube(
        segments=segments,
        direction="over",
        grid=grid,
        initial=init,
        delta_shrunk=shrunk,
    )


def _coerce_grid(grid, tau):
    if grid is None:
        if tau <= 0:
            return TimeGrid(np.array([0.0]))
        return TimeGrid.uniform(tau, tau / 8.0)
    if isinstance(grid, (int, float)):
        return TimeGrid.uniform(tau, float(grid))
    if grid.times[-1] < tau - 1e-9:
        raise ValueError("time grid ends before the horizon")
    return grid


def reach_bounded_time(
    init,
    dyn,
    tau: float,
    grid=None,
    h: float = 0.05,
    mode: str = "over",
    h_b: float | None = None,
    box=None,
    bounds: str = "conservative",
    flow_tol: float = 1e-8,
    force_front: bool = False,
) -> ReachTube:
    """Reach set over [0, tau] grown from the outward boundary front.

    Linear dynamics with a polyhedral start (over mode) get per-face tube
    polyhedra; everything else advects the classified boundary samples
    and rasterizes the swept segments on a cell-h grid over ``box``
    (auto-sized when omitted). mode "under" additionally flows an
    interior sample lattice and keeps, per interval, only cells holding
    a sample that the over sweep also reached (direction tag:
    exact-sampled). force_front skips the linear-polyhedral fast path.
    """
    if tau < 0:
        raise ValueError("horizon must be nonnegative")
    if mode not in ("over", "under"):
        raise ValueError(f"unknown mode {mode!r}")
    grid = _coerce_grid(grid, tau)
    if (
        not force_front
        and isinstance(dyn, LinearDynamics)
        and isinstance(init, Polyhedron)
        and mode == "over"
    ):
        return _linear_poly_reach(init, dyn, tau, grid, bounds)

    h_b = h_b if h_b is not None else h / 2.0
    if box is None:
        box = _default_box(init, dyn, tau, h)
    lo, hi = box
    cum = GridRegion(lo, hi, h, "over")
    init_over = cum.blank()
    _mark_initial(init, init_over)

    front = classify_boundary(init, dyn, h_b)
    segments, _, iterations, collapsed = _front_sweep(
        front.front_chains(), init, dyn, grid.intervals(tau), cum, h, h_b, flow_tol
    )
    tube = ReachTube(
        segments=segments,
        direction="over",
        grid=grid,
        initial=init,
        initial_region=init_over,
        occupancy=cum,
        front_collapse=collapsed,
        iterations=iterations,
    )
    if mode == "over":
        return tube

    # under flavor: exact interior samples gated by the over sweep
    tube.direction = "exact-sampled"
    under_cum = GridRegion(lo, hi, h, "under")
    tube.under_initial_region = _under_initial(init, under_cum)
    samples = _interior_lattice(init, h)
    prefix = init_over.copy()
    under_segments = []
    for t0, t1, seg in segments:
        prefix.include(seg)
        useg = under_cum.blank()
        if samples.shape[0]:
            delta = t1 - t0
            nsub = _substeps(delta, _max_speed(dyn, samples), h)
            traj = _advect(dyn, samples, delta, nsub, h, flow_tol)
            flat = traj.reshape(-1, samples.shape[1])
            idx, inbox = useg._indices(flat)
            ok = inbox.copy()
            ok[inbox] = prefix.occupancy[tuple(idx[inbox].T)]
            if ok.any():
                useg.occupancy[tuple(idx[ok].T)] = True
            samples = traj[:, -1]
        under_cum.include(useg)
        under_segments.append((t0, t1, useg))
    tube.segments = under_segments
    tube.under_occupancy = under_cum
    return tube


# ---------------------------------------------------------------------------
# invariant-constrained reach


def _check_inside_invariant(init, invariant, h_b):
    if isinstance(init, GridRegion):
        # cell raster: centers may legally overhang by the half diagonal
        centers = init.cell_centers()
        tol = init.h * math.sqrt(init.dim) + 1e-9
        if centers.shape[0] and not np.all(invariant.contains(centers, tol=tol)):
            raise PreconditionViolated(
                "initial region has cells outside the invariant"
            )
    elif isinstance(init, Polyhedron):
        A_ub, b_ub, A_eq, b_eq = init.matrices()
        args = (
            A_ub if len(b_ub) else None,
            b_ub if len(b_ub) else None,
            A_eq if len(b_eq) else None,
            b_eq if len(b_eq) else None,
        )
        rows = list(invariant.ineqs)
        for e in invariant.eqs:
            rows.append(e)
            rows.append(Halfspace(-e.normal, -e.offset))
        for row in rows:
            res = lp_maximize(row.normal, *args)
            if res.status == "infeasible":
                raise PreconditionViolated("initial polyhedron is empty")
            if res.status != "optimal" or res.value > row.offset + 1e-8:
                raise PreconditionViolated(
                    "initial set is not contained in the invariant"
                )
    else:
        if init.dim == 2:
            bnd, _ = _levelset_boundary_2d(init, h_b)
        else:
            bnd, _ = _levelset_boundary_nd(init, h_b)
        pts = np.vstack([bnd, _interior_lattice(init, h_b)])
        if not np.all(invariant.contains(pts, tol=1e-8)):
            raise PreconditionViolated("initial set samples leave the invariant")


def _invariant_box(init, invariant, dyn, grid, h):
    lo_q, hi_q = invariant.bounding_box()
    if isinstance(init, (LevelSet, GridRegion)):
        lo0, hi0 = init.lo, init.hi
    else:
        lo0, hi0 = init.bounding_box()
    lo = np.minimum(lo_q, lo0)
    hi = np.maximum(hi_q, hi0)
    dmax = float(np.max(np.diff(grid.times)))
    axes = [np.linspace(lo[j], hi[j], 9) for j in range(lo.size)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    pad = dmax * _max_speed(dyn, mesh) + 4.0 * h
    return lo - pad, hi + pad


def reach_invariant(
    init,
    dyn,
    invariant: Polyhedron,
    grid=None,
    h: float = 0.05,
    under_approximate: bool = False,
    max_iters: int | None = None,
    tau_max: float | None = None,
    h_b: float | None = None,
    box=None,
    literal_under: bool = False,
    flow_tol: float = 1e-8,
) -> ReachTube:
    """Reach set of trajectories that never leave a polyhedral invariant.

    Front samples whose exit shadow (reverse-flow images of escaping
    tube samples) comes within h are pruned before sweeping. The over
    flavor keeps the pruned sweep plus every swept cell still touching
    the invariant; the under flavor keeps only pruned-sweep cells
    certified inside it (literal_under records the raw escaping samples
    instead). The run stops when the front empties (front_collapse) or
    after max_iters (iteration_cap, defaulting to 10x the grid size or
    to tau_max worth of smallest steps); iterating past the grid end
    repeats its final step length. Raises PreconditionViolated when init
    is not inside the invariant."""
    if not isinstance(invariant, Polyhedron):
        raise TypeError("invariant must be a Polyhedron")
    if grid is None:
        raise ValueError("invariant-constrained reach needs a step length or time grid")
    if isinstance(grid, (int, float)):
        grid = TimeGrid(np.array([0.0, float(grid)]))
    if grid.times.size < 2:
        raise ValueError("time grid has a single point, no step length")
    if max_iters is None:
        if tau_max is not None:
            max_iters = int(math.ceil(tau_max / float(np.min(np.diff(grid.times))))) + 1
        else:
            max_iters = 10 * max(1, int(grid.times.size))
    h_b = h_b if h_b is not None else h / 2.0
    _check_inside_invariant(init, invariant, h_b)
    if box is None:
        box = _invariant_box(init, invariant, dyn, grid, h)
    lo, hi = box

    cum = GridRegion(lo, hi, h, "over")
    init_over = cum.blank()
    _mark_initial(init, init_over)
    touch_q = cum.cells_touching(invariant)
    under_cum = under_init = cert_q = None
    if under_approximate:
        under_cum = GridRegion(lo, hi, h, "under")
        under_init = _under_initial(init, under_cum)
        if not literal_under:
            cert_q = cum.cells_inside(invariant)

    if isinstance(init, GridRegion):
        # restart from a cell set: its rim cells are the front, unordered
        bnd = init.boundary_cell_centers()
        chains = [(bnd, None)] if bnd.shape[0] else []
    else:
        front = classify_boundary(init, dyn, h_b)
        chains = front.front_chains()
    tube = ReachTube(
        segments=[],
        direction="under" if under_approximate else "over",
        grid=grid,
        initial=init,
        initial_region=init_over,
        occupancy=cum,
        under_occupancy=under_cum,
        under_initial_region=under_init,
    )
    t_accum = 0.0
    for it in range(max_iters):
        if not chains:
            tube.front_collapse = True
            break
        delta = grid.delta(it)

        trajs = []
        t_full = cum.blank()
        for pts, _ in chains:
            nsub = _substeps(delta, _max_speed(dyn, pts), h)
            traj = _advect(dyn, pts, delta, nsub, h, flow_tol)
            t_full.mark_points(traj.reshape(-1, pts.shape[1]))
            trajs.append(traj)
        flat = np.vstack([t.reshape(-1, t.shape[2]) for t in trajs])
        outside = ~invariant.contains(flat, tol=1e-9)

        v_pts = None
        if outside.any():
            # exit shadow: reverse-flow images of escaping tube samples
            u = flat[outside]
            _, first = np.unique(np.floor(u / h).astype(int), axis=0, return_index=True)
            u = u[np.sort(first)]
            if u.shape[0] > 2000:
                u = u[:: int(math.ceil(u.shape[0] / 2000.0))]
            nsub = _substeps(delta, _max_speed(dyn, u), h)
            v_pts = _advect(dyn, u, -delta, nsub, h, flow_tol).reshape(-1, u.shape[1])

        t_prime = cum.blank()
        survivors = []
        for (pts, closed), traj in zip(chains, trajs):
            if v_pts is None:
                keep = np.ones(pts.shape[0], bool)
            else:
                d2 = np.min(
                    np.sum((pts[:, None, :] - v_pts[None, :, :]) ** 2, axis=2), axis=1
                )
                # ties at exactly h are structural for raster-seeded fronts
                # (cell centers sit one cell from the overhang shadow); keep them
                keep = d2 >= h * h * (1.0 - 1e-9)
            for idxs, rclosed in _split_runs(pts.shape[0], closed, keep):
                t_prime.mark_points(traj[idxs].reshape(-1, pts.shape[1]))
                survivors.append((pts[idxs], traj[idxs][:, -1], rclosed))

        over_add = cum.blank()
        over_add.occupancy = t_prime.occupancy | (t_full.occupancy & touch_q)
        over_add.out_of_box = t_full.out_of_box

        nxt = []
        for pre, ends, closed in survivors:
            keep = ~(cum.contains_points(ends) | _inside_init_strict(init, ends))
            for idxs, rclosed in _split_runs(pre.shape[0], closed, keep):
                if rclosed is None:
                    run = ends[idxs]
                else:
                    run = _resample_chain(
                        dyn, pre[idxs], ends[idxs], rclosed, h_b, delta, h, flow_tol
                    )
                nxt.append((run, rclosed))
        cum.include(over_add)

        payload = over_add
        if under_approximate:
            u_add = under_cum.blank()
            if literal_under:
                if outside.any():
                    u_add.mark_points(flat[outside])
            else:
                u_add.occupancy = t_prime.occupancy & cert_q
            under_cum.include(u_add)
            payload = u_add
        tube.segments.append((t_accum, t_accum + delta, payload))
        t_accum += delta
        tube.iterations = it + 1
        chains = [c for c in nxt if c[0].shape[0]]
    if chains:
        tube.iteration_cap = True
    elif not tube.front_collapse:
        tube.front_collapse = True
    return tube


# ---------------------------------------------------------------------------
# boundary-equivalence report


def check_boundary_equivalence(
    init,
    dyn,
    tau: float,
    h: float = 0.05,
    h_b: float | None = None,
    grid=None,
    box=None,
    flow_tol: float = 1e-8,
) -> dict:
    """Compare three sweeps of one horizon on one grid: a dense sample of
    the whole initial set (the oracle), the whole boundary, and the
    lifted front only. Reports cell counts, pairwise symmetric
    differences and grid Hausdorff gaps; passes iff the largest gap is
    at most 2h."""
    if tau <= 0:
        raise ValueError("need a positive horizon")
    h_b = h_b if h_b is not None else h / 2.0
    if box is None:
        box = _default_box(init, dyn, tau, h)
    grid = _coerce_grid(grid, tau)
    intervals = grid.intervals(tau)
    lo, hi = box

    init_over = GridRegion(lo, hi, h, "over")
    _mark_initial(init, init_over)
    front = classify_boundary(init, dyn, h_b)

    # dense oracle: every initial sample advected, nothing pruned
    full = init_over.copy()
    pts = np.vstack([_interior_lattice(init, h_b), front.points])
    for t0, t1 in intervals:
        delta = t1 - t0
        nsub = _substeps(delta, _max_speed(dyn, pts), h)
        traj = _advect(dyn, pts, delta, nsub, h, flow_tol)
        full.mark_points(traj.reshape(-1, pts.shape[1]))
        pts = traj[:, -1]

    def swept(chains):
        cum = init_over.blank()
        _front_sweep(chains, init, dyn, intervals, cum, h, h_b, flow_tol)
        cum.include(init_over)
        return cum

    regions = {
        "full": full,
        "boundary": swept(front.all_chains()),
        "outflow": swept(front.front_chains()),
    }
    pairs = [("full", "boundary"), ("full", "outflow"), ("boundary", "outflow")]
    sym = {
        f"{a}_vs_{b}": regions[a].symmetric_difference_count(regions[b]) for a, b in pairs
    }
    gaps = {f"{a}_vs_{b}": regions[a].hausdorff(regions[b]) for a, b in pairs}
    max_gap = max(gaps.values())
    return {
        "h": h,
        "h_b": h_b,
        "tau": tau,
        "cells": {name: regions[name].count() for name in regions},
        "sym_diff": sym,
        "hausdorff": gaps,
        "max_gap": max_gap,
        "passes": bool(max_gap <= 2.0 * h + 1e-12),
        "dropped_samples": front.dropped,
    }
