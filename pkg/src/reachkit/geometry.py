"""Halfspace polyhedra, faces, and the small dense LP layer under them.

All halfspaces are written ``a.x - b <= 0``; equalities ``a.x - b = 0``.
Row systems here are tiny (tens of rows, dimension <= 10), so everything
is dense and deterministic: the LP is a two-phase tableau simplex with
Bland's rule, vertex enumeration in 2D is pairwise row intersection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateNormal,
    DimMismatch,
    Empty2D,
    EmptyPolyhedron,
    EmptyPolyhedronWarning,
    InfeasibleFace,
    TooFewPoints,
    Unbounded2D,
)

# Residual below which a row counts as tight / duplicate.
TIGHT_TOL = 1e-9
# Residual below which a point still counts as feasible for a row.
FEAS_TOL = 1e-8
_PIVOT_TOL = 1e-9


class GeometryWarning(UserWarning):
    """Non-fatal degeneracy noticed during a geometric construction."""


# ---------------------------------------------------------------------------
# linear programming


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None


def _run_simplex(T, basis, cost, tol=_PIVOT_TOL):
    """Maximize cost over the tableau in place. Bland's rule, so no cycling."""
    m, ncols = T.shape[0], T.shape[1] - 1
    while True:
        reduced = cost - cost[basis] @ T[:, :ncols]
        enter = -1
        for j in range(ncols):
            if reduced[j] > tol:
                enter = j
                break
        if enter < 0:
            return "optimal"
        col = T[:, enter]
        leave, best = -1, None
        for i in range(m):
            if col[i] > tol:
                ratio = T[i, -1] / col[i]
                if (
                    best is None
                    or ratio < best - 1e-12
                    or (abs(ratio - best) <= 1e-12 and basis[i] < basis[leave])
                ):
                    best, leave = ratio, i
        if leave < 0:
            return "unbounded"
        T[leave] /= T[leave, enter]
        for i in range(m):
            if i != leave and T[i, enter] != 0.0:
                T[i] -= T[i, enter] * T[leave]
        basis[leave] = enter


def lp_maximize(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> LPResult:
    """Maximize ``c.x`` over ``A_ub x <= b_ub``, ``A_eq x = b_eq``, x free.

    Two-phase dense simplex; free variables are split x = u - w. Returns
    an LPResult whose status is one of optimal / infeasible / unbounded.
    """
    c = np.asarray(c, float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, float))
    m1, m2 = A_ub.shape[0], A_eq.shape[0]
    m = m1 + m2
    nsplit = 2 * n
    ncols = nsplit + m1 + m  # u, w, slacks, artificials

    T = np.zeros((m, ncols + 1))
    for i in range(m1):
        T[i, :n] = A_ub[i]
        T[i, n:nsplit] = -A_ub[i]
        T[i, nsplit + i] = 1.0
        T[i, -1] = b_ub[i]
    for i in range(m2):
        T[m1 + i, :n] = A_eq[i]
        T[m1 + i, n:nsplit] = -A_eq[i]
        T[m1 + i, -1] = b_eq[i]
    for i in range(m):
        if T[i, -1] < 0.0:
            T[i] *= -1.0
        T[i, nsplit + m1 + i] = 1.0
    basis = [nsplit + m1 + i for i in range(m)]

    # Phase 1: drive the artificial variables to zero.
    cost1 = np.zeros(ncols)
    cost1[nsplit + m1 :] = -1.0
    _run_simplex(T, basis, cost1)
    if -(cost1[basis] @ T[:, -1]) > 1e-7:
        return LPResult("infeasible")

    # Pivot leftover artificials out; a row with no real pivot is redundant.
    drop = []
    for i in range(m):
        if basis[i] >= nsplit + m1:
            for j in range(nsplit + m1):
                if abs(T[i, j]) > _PIVOT_TOL:
                    T[i] /= T[i, j]
                    for r in range(m):
                        if r != i and T[r, j] != 0.0:
                            T[r] -= T[r, j] * T[i]
                    basis[i] = j
                    break
            else:
                drop.append(i)
    if drop:
        keep = [i for i in range(m) if i not in drop]
        T = T[keep]
        basis = [basis[i] for i in keep]
        m = len(keep)

    T = np.hstack([T[:, : nsplit + m1], T[:, -1:]])
    cost2 = np.concatenate([c, -c, np.zeros(m1)])
    status = _run_simplex(T, basis, cost2)
    if status == "unbounded":
        return LPResult("unbounded")

    xsplit = np.zeros(nsplit + m1)
    for i, b in enumerate(basis):
        xsplit[b] = T[i, -1]
    x = xsplit[:n] - xsplit[n:nsplit]
    return LPResult("optimal", x=x, value=float(c @ x))


# ---------------------------------------------------------------------------
# core set types


@dataclass(frozen=True)
class Halfspace:
    """One row ``normal . x - offset <= 0`` (or ``= 0`` when used as equality)."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", np.asarray(self.normal, float))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return self.normal.size

    def value(self, points):
        """Signed residual ``normal . x - offset`` at one point or an (m, n) batch."""
        pts = np.asarray(points, float)
        return pts @ self.normal - self.offset

    def unit(self) -> "Halfspace":
        """Same halfspace with a unit normal."""
        nrm = float(np.linalg.norm(self.normal))
        if nrm < 1e-14:
            raise DegenerateNormal("cannot normalize a vanishing normal")
        return Halfspace(self.normal / nrm, self.offset / nrm)


@dataclass(frozen=True)
class Polyhedron:
    """Intersection of finitely many halfspaces, plus optional equality rows."""

    ineqs: tuple = ()
    eqs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ineqs", tuple(self.ineqs))
        object.__setattr__(self, "eqs", tuple(self.eqs))
        dims = {h.dim for h in self.ineqs} | {h.dim for h in self.eqs}
        if len(dims) > 1:
            raise DimMismatch(f"mixed row dimensions {sorted(dims)}")

    @property
    def dim(self) -> int:
        for h in self.ineqs + self.eqs:
            return h.dim
        return 0

    @property
    def rows(self) -> tuple:
        return self.ineqs + self.eqs

    @classmethod
    def from_inequalities(cls, A, b) -> "Polyhedron":
        A = np.atleast_2d(np.asarray(A, float))
        b = np.atleast_1d(np.asarray(b, float))
        return cls(tuple(Halfspace(A[i], b[i]) for i in range(A.shape[0])))

    @classmethod
    def box(cls, lo, hi) -> "Polyhedron":
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        n = lo.size
        rows = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            rows.append(Halfspace(e.copy(), hi[j]))
            rows.append(Halfspace(-e, -lo[j]))
        return cls(tuple(rows))

    def matrices(self):
        """(A_ub, b_ub, A_eq, b_eq) dense matrices for the LP layer."""
        n = self.dim
        A_ub = np.array([h.normal for h in self.ineqs], float).reshape(len(self.ineqs), n)
        b_ub = np.array([h.offset for h in self.ineqs], float)
        A_eq = np.array([h.normal for h in self.eqs], float).reshape(len(self.eqs), n)
        b_eq = np.array([h.offset for h in self.eqs], float)
        return A_ub, b_ub, A_eq, b_eq

    def contains(self, points, tol=TIGHT_TOL):
        """Membership of one point (bool) or an (m, n) batch (bool array)."""
        pts = np.asarray(points, float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        ok = np.ones(pts.shape[0], bool)
        for h in self.ineqs:
            ok &= h.value(pts) <= tol
        for h in self.eqs:
            ok &= np.abs(h.value(pts)) <= tol
        return bool(ok[0]) if single else ok

    def bounding_box(self):
        """Tight coordinate box (lo, hi); raises if empty or unbounded."""
        if is_empty(self):
            raise EmptyPolyhedron("bounding box of an empty polyhedron")
        n = self.dim
        A_ub, b_ub, A_eq, b_eq = self.matrices()
        lo, hi = np.zeros(n), np.zeros(n)
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            up = lp_maximize(e, A_ub, b_ub, A_eq if len(b_eq) else None, b_eq if len(b_eq) else None)
            dn = lp_maximize(-e, A_ub, b_ub, A_eq if len(b_eq) else None, b_eq if len(b_eq) else None)
            if up.status != "optimal" or dn.status != "optimal":
                raise Unbounded2D(f"polyhedron unbounded along coordinate {j}")
            hi[j], lo[j] = up.value, -dn.value
        return lo, hi


@dataclass(frozen=True)
class Face:
    """A bounded facet: side inequalities pinned to one base hyperplane.

    Side rows read ``a_i . x - b_i <= 0`` and the base row holds with
    equality, ``a_k . x - b_k = 0``. ``orthonormal`` records that every
    side normal is unit length and orthogonal to the (unit) base normal.
    """

    side_normals: np.ndarray
    side_offsets: np.ndarray
    base_normal: np.ndarray
    base_offset: float
    orthonormal: bool = False
    dropped_sides: int = field(default=0, compare=False)

    def __post_init__(self):
        sn = np.atleast_2d(np.asarray(self.side_normals, float))
        so = np.atleast_1d(np.asarray(self.side_offsets, float))
        bn = np.asarray(self.base_normal, float)
        if sn.size == 0:
            sn = sn.reshape(0, bn.size)
        if sn.shape[0] != so.size or sn.shape[1] != bn.size:
            raise DimMismatch("side/base shapes disagree")
        object.__setattr__(self, "side_normals", sn)
        object.__setattr__(self, "side_offsets", so)
        object.__setattr__(self, "base_normal", bn)
        object.__setattr__(self, "base_offset", float(self.base_offset))

    @property
    def dim(self) -> int:
        return self.base_normal.size

    @property
    def k(self) -> int:
        """Row count: number of sides plus the base."""
        return self.side_offsets.size + 1

    def as_polyhedron(self) -> Polyhedron:
        sides = tuple(
            Halfspace(self.side_normals[i], self.side_offsets[i])
            for i in range(self.side_offsets.size)
        )
        return Polyhedron(sides, (Halfspace(self.base_normal, self.base_offset),))

    def check_orthonormal(self, tol=1e-10) -> bool:
        if abs(np.linalg.norm(self.base_normal) - 1.0) > tol:
            return False
        for a in self.side_normals:
            if abs(np.linalg.norm(a) - 1.0) > tol:
                return False
            if abs(float(a @ self.base_normal)) > tol:
                return False
        return True


# ---------------------------------------------------------------------------
# predicates


def is_empty(P: Polyhedron, tol=TIGHT_TOL) -> bool:
    """Feasibility of the row system, decided by the phase-1 simplex."""
    A_ub, b_ub, A_eq, b_eq = P.matrices()
    res = lp_maximize(
        np.zeros(P.dim),
        A_ub if len(b_ub) else None,
        b_ub if len(b_ub) else None,
        A_eq if len(b_eq) else None,
        b_eq if len(b_eq) else None,
    )
    return res.status == "infeasible"


def is_bounded(P: Polyhedron) -> bool:
    """True iff every coordinate is bounded above and below over P.

    An empty polyhedron returns True by convention and emits
    EmptyPolyhedronWarning so the caller can decide.
    """
    if is_empty(P):
        warnings.warn("is_bounded called on an empty polyhedron", EmptyPolyhedronWarning)
        return True
    A_ub, b_ub, A_eq, b_eq = P.matrices()
    kw = dict(
        A_ub=A_ub if len(b_ub) else None,
        b_ub=b_ub if len(b_ub) else None,
        A_eq=A_eq if len(b_eq) else None,
        b_eq=b_eq if len(b_eq) else None,
    )
    n = P.dim
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if lp_maximize(e, **kw).status == "unbounded":
            return False
        if lp_maximize(-e, **kw).status == "unbounded":
            return False
    return True


# ---------------------------------------------------------------------------
# 2D vertex machinery


def vertices_2d(P: Polyhedron) -> np.ndarray:
    """Vertices of a bounded nonempty 2D polyhedron, counter-clockwise.

    Pairwise row intersections filtered by feasibility (residual <= 1e-8),
    deduplicated at 1e-9, anchored at the lexicographically smallest vertex.
    Degenerate inputs (a segment or a point) return 2 or 1 rows.
    """
    if P.dim != 2:
        raise DimMismatch(f"vertices_2d needs dim 2, got {P.dim}")
    if is_empty(P):
        raise Empty2D("no vertices: polyhedron is empty")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyPolyhedronWarning)
        if not is_bounded(P):
            raise Unbounded2D("no finite vertex set: polyhedron is unbounded")

    rows = P.rows
    cand = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            M = np.array([rows[i].normal, rows[j].normal])
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            p = np.linalg.solve(M, np.array([rows[i].offset, rows[j].offset]))
            if not np.all(np.isfinite(p)):
                continue
            feas = all(h.value(p) <= FEAS_TOL for h in P.ineqs) and all(
                abs(h.value(p)) <= FEAS_TOL for h in P.eqs
            )
            if feas:
                cand.append(p)
    if not cand:
        raise Empty2D("no pairwise intersection point is feasible")

    uniq: list[np.ndarray] = []
    for p in cand:
        if all(np.linalg.norm(p - q) > TIGHT_TOL for q in uniq):
            uniq.append(p)
    pts = np.array(uniq)
    if len(pts) <= 2:
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        return pts[order]

    centroid = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
    pts = pts[np.argsort(ang, kind="stable")]
    anchor = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    return np.roll(pts, -anchor, axis=0)


def convex_hull_2d(points) -> Polyhedron:
    """Minimal H-representation of the hull of 2D points, unit outward normals.

    Monotone chain; strictly collinear input degenerates to the 2-row strip
    through the points and emits GeometryWarning.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[1] != 2:
        raise DimMismatch("convex_hull_2d needs 2D points")
    if pts.shape[0] < 3:
        raise TooFewPoints(f"hull needs >= 3 points, got {pts.shape[0]}")

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    srt = pts[order]
    keep = [srt[0]]
    for p in srt[1:]:
        if np.linalg.norm(p - keep[-1]) > TIGHT_TOL:
            keep.append(p)
    srt = np.array(keep)
    if srt.shape[0] < 2:
        raise TooFewPoints("all points coincide")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in srt:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 1e-12:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in srt[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 1e-12:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]

    if len(hull) < 3:
        warnings.warn("collinear input: hull degenerates to a strip", GeometryWarning)
        d = srt[-1] - srt[0]
        d /= np.linalg.norm(d)
        nrm = np.array([d[1], -d[0]])
        off = float(nrm @ srt[0])
        return Polyhedron((Halfspace(nrm, off), Halfspace(-nrm, -off)))

    rows = []
    for i in range(len(hull)):
        v1, v2 = hull[i], hull[(i + 1) % len(hull)]
        edge = v2 - v1
        nrm = np.array([edge[1], -edge[0]])
        nrm /= np.linalg.norm(nrm)
        rows.append(Halfspace(nrm, float(nrm @ v1)))
    return Polyhedron(tuple(rows))


# ---------------------------------------------------------------------------
# composition


def intersect(polys) -> Polyhedron:
    """Concatenate row systems, dropping rows that duplicate an earlier one.

    Duplicates are detected on unit-normalized rows at tolerance 1e-9; the
    first occurrence (original scaling) is kept.
    """
    polys = list(polys)
    if not polys:
        raise ValueError("intersect needs at least one polyhedron")
    dims = {P.dim for P in polys}
    if len(dims) > 1:
        raise DimMismatch(f"mixed dimensions {sorted(dims)}")

    def dedupe(rows):
        kept, units = [], []
        for h in rows:
            u = h.unit()
            dup = any(
                np.max(np.abs(u.normal - v.normal)) <= TIGHT_TOL
                and abs(u.offset - v.offset) <= TIGHT_TOL
                for v in units
            )
            if not dup:
                kept.append(h)
                units.append(u)
        return tuple(kept)

    ineqs = dedupe([h for P in polys for h in P.ineqs])
    eqs = dedupe([h for P in polys for h in P.eqs])
    return Polyhedron(ineqs, eqs)


def normalize_and_orthogonalize(face: Face) -> Face:
    """Rewrite a face so the base normal is unit and sides are unit and
    orthogonal to it, describing the same point set.

    Side rows may be rescaled and tilted within the base hyperplane (the
    adjustment subtracts a multiple of the base equality row, which is free
    on the face). A side whose normal projects to zero is dropped when its
    residual row ``0 <= offset`` is vacuous; otherwise the face is empty in
    a way no orthonormal system expresses and DegenerateNormal is raised.
    Raises InfeasibleFace when the rewritten system has no solution.
    """
    bn = np.asarray(face.base_normal, float)
    nb = float(np.linalg.norm(bn))
    if nb < 1e-14:
        raise DegenerateNormal("base normal vanishes")
    bn = bn / nb
    bo = face.base_offset / nb

    normals, offsets, dropped = [], [], 0
    for i in range(face.side_offsets.size):
        a = np.asarray(face.side_normals[i], float)
        b = float(face.side_offsets[i])
        t = float(a @ bn)
        a = a - t * bn
        b = b - t * bo
        na = float(np.linalg.norm(a))
        if na <= 1e-12:
            if b >= -TIGHT_TOL:
                dropped += 1
                continue
            raise DegenerateNormal(f"side {i} projects to zero with offset {b:.3g} < 0")
        normals.append(a / na)
        offsets.append(b / na)

    out = Face(
        np.array(normals).reshape(len(offsets), bn.size),
        np.array(offsets),
        bn,
        bo,
        orthonormal=True,
        dropped_sides=dropped + face.dropped_sides,
    )
    if is_empty(out.as_polyhedron()):
        raise InfeasibleFace("face constraints have no common point")
    return out
