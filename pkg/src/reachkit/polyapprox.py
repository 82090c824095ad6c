"""Polyhedral over-approximation of a linear flow tube grown from one face.

Given an orthonormalized face F0 (sides a_i, base a_k) and dynamics
x' = A x whose field crosses F0 strictly outward, the tube
T0 = { e^{At} x0 : x0 in F0, 0 <= t <= Delta } is enclosed by 4k
halfspaces built from F0, its exact image F_Delta = e^{A Delta} F0, and a
vector of rotation/translation distances. The distances come in two
flavors: closed-form conservative bounds (sound whenever the outward
condition holds on [-Delta, Delta]) and lattice-sampled estimates
(refinement-monotone under-estimates, useful as a tightness probe).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionA2Violated,
    BadDeltaOrder,
    DenominatorAllDegenerate,
    DimUnsupported,
    NumericRange,
)
from .flow import expm, max_norm_over_face, operator_norm
from .geometry import (
    Face,
    Halfspace,
    Polyhedron,
    convex_hull_2d,
    intersect,
    lp_maximize,
    normalize_and_orthogonalize,
    vertices_2d,
)

_DEGEN_TOL = 1e-12
_C1_SLACK = 1e-9


# ---------------------------------------------------------------------------
# problem setup


@dataclass(frozen=True)
class StepProblem:
    """One validated tube step: face, dynamics, horizon, and derived data.

    delta_min is the LP minimum of the outward derivative over the face;
    delta0 the chosen positive margin (None when no positive margin exists
    at this horizon, in which case only shrinking the horizon helps);
    c1_min the sampled-in-t, LP-exact-in-x minimum over [-Delta, Delta].
    """

    face: Face
    matrix: np.ndarray
    delta: float
    delta_min: float
    delta0: float | None
    c1_min: float
    m0: float
    m0_mode: str
    norm_a: float
    face_delta: Face
    base_transport_norm: float
    t_samples: int = field(default=65, compare=False)

    @property
    def k(self) -> int:
        return self.face.k

    @property
    def delta1(self) -> float:
        """Margin transported to the far face: delta0 / ||a_k^T e^{-A Delta}||."""
        if self.delta0 is None:
            raise BadDeltaOrder("no positive delta0 exists at this horizon")
        return self.delta0 / self.base_transport_norm

    @classmethod
    def build(cls, face: Face, A, delta: float, delta0: float | None = None, t_samples: int = 65):
        A = np.asarray(A, float)
        if delta <= 0.0:
            raise ValueError(f"step horizon must be positive, got {delta}")
        if not face.orthonormal:
            face = normalize_and_orthogonalize(face)
        if A.shape != (face.dim, face.dim):
            raise ValueError(f"matrix shape {A.shape} does not fit dimension {face.dim}")
        dmin = check_A2(face, A)
        m0 = max_norm_over_face(face)
        m0_mode = "vertex" if face.dim == 2 else "box"
        norm_a = operator_norm(A)
        fdelta = propagate_face(face, A, delta)
        transport = float(np.linalg.norm(expm(-A.T, delta) @ face.base_normal))
        c1 = c1_minimum(face, A, delta, t_samples)
        if delta0 is None:
            chosen = c1 if c1 > _DEGEN_TOL else None
        else:
            if not 0.0 < delta0 <= dmin:
                raise BadDeltaOrder(f"delta0 must lie in (0, {dmin:.6g}], got {delta0:.6g}")
            chosen = float(delta0)
        return cls(
            face=face,
            matrix=A,
            delta=float(delta),
            delta_min=dmin,
            delta0=chosen,
            c1_min=c1,
            m0=m0,
            m0_mode=m0_mode,
            norm_a=norm_a,
            face_delta=fdelta,
            base_transport_norm=transport,
            t_samples=t_samples,
        )


def check_A2(face: Face, A) -> float:
    """LP minimum of the outward derivative a_k . A x over the face.

    Returns the minimum when positive; raises AssumptionA2Violated(delta)
    otherwise. The face must be orthonormalized.
    """
    A = np.asarray(A, float)
    P = face.as_polyhedron()
    A_ub, b_ub, A_eq, b_eq = P.matrices()
    c = A.T @ face.base_normal
    res = lp_maximize(-c, A_ub if len(b_ub) else None, b_ub if len(b_ub) else None, A_eq, b_eq)
    if res.status == "unbounded":
        raise AssumptionA2Violated(-np.inf, "outward derivative unbounded below over the face")
    if res.status != "optimal":
        raise AssumptionA2Violated(-np.inf, "face is empty, outward bound undefined")
    delta = -res.value
    if delta <= 0.0:
        raise AssumptionA2Violated(delta)
    return float(delta)


def _face_lp_min(face: Face, c):
    P = face.as_polyhedron()
    A_ub, b_ub, A_eq, b_eq = P.matrices()
    res = lp_maximize(-np.asarray(c, float), A_ub if len(b_ub) else None, b_ub if len(b_ub) else None, A_eq, b_eq)
    if res.status != "optimal":
        raise NumericRange(f"face LP ended {res.status} while scanning the time lattice")
    return -res.value


def c1_minimum(face: Face, A, delta: float, t_samples: int = 65) -> float:
    """min over t in [-Delta, Delta] (sampled) and x0 in F0 (LP-exact) of
    the transported outward derivative a_k . A e^{At} x0."""
    A = np.asarray(A, float)
    ak = face.base_normal
    best = math.inf
    for t in np.linspace(-delta, delta, t_samples):
        c = expm(A, float(t)).T @ (A.T @ ak)  # row vector a_k^T A e^{At} as a column
        best = min(best, _face_lp_min(face, c))
    return float(best)


def check_C1(prob: StepProblem, samples: int | None = None) -> bool:
    """Spot-check the outward condition along the step and its corollaries.

    True iff the sampled minimum of a_k . A e^{At} x0 over t in
    [-Delta, Delta] stays >= delta0 - 1e-9, and the base-crossing signs
    (outward after the face, inward before it) hold at the sampled times.
    """
    if prob.delta0 is None:
        return False
    nt = samples or prob.t_samples
    c1 = c1_minimum(prob.face, prob.matrix, prob.delta, nt) if samples else prob.c1_min
    if c1 < prob.delta0 - _C1_SLACK:
        return False
    ak, bk = prob.face.base_normal, prob.face.base_offset
    for t in np.linspace(0.0, prob.delta, max(3, nt // 2))[1:]:
        ct = expm(prob.matrix, float(t)).T @ ak
        if _face_lp_min(prob.face, ct) - bk < -_C1_SLACK:
            return False  # a forward point fell back through the base plane
        cm = expm(prob.matrix, float(-t)).T @ ak
        if -_face_lp_min(prob.face, -cm) - bk > _C1_SLACK:
            return False  # a backward point sits past the base plane
    return True


def select_delta(m0: float, norm_a: float, delta: float, delta0: float) -> float:
    """Largest step horizon certified by the growth bound
    m0 ||A|| (e^{||A|| D} - 1) <= delta - delta0. Infinite when the bound
    degenerates (||A|| = 0 or m0 = 0)."""
    if delta0 >= delta:
        raise BadDeltaOrder(f"delta0 {delta0:.6g} must be strictly below delta {delta:.6g}")
    if delta0 <= 0.0:
        raise BadDeltaOrder(f"delta0 must be positive, got {delta0:.6g}")
    if norm_a == 0.0 or m0 == 0.0:
        return math.inf
    return math.log1p((delta - delta0) / (m0 * norm_a)) / norm_a


def propagate_face(face: Face, A, delta: float) -> Face:
    """Exact image e^{A Delta} F0, re-orthonormalized in place.

    Normals transport through e^{-A^T Delta}; the base is renormalized and
    side rows are re-projected within the far hyperplane so the returned
    face is orthonormal and describes the image point set exactly.
    """
    A = np.asarray(A, float)
    E = expm(-A.T, delta)
    vk = E @ face.base_normal
    nk = float(np.linalg.norm(vk))
    bhat = vk / nk
    bprime = face.base_offset / nk

    normals, offsets = [], []
    for i in range(face.side_offsets.size):
        v = E @ face.side_normals[i]
        t = float(v @ bhat)
        w = v - t * bhat
        off = float(face.side_offsets[i]) - t * bprime
        nw = float(np.linalg.norm(w))
        if nw <= _DEGEN_TOL:
            # transported side collapsed onto the base direction; vacuous or empty
            if off >= -1e-9:
                continue
            raise NumericRange(f"transported side {i} degenerated with negative offset")
        normals.append(w / nw)
        offsets.append(off / nw)
    return Face(
        np.array(normals).reshape(len(offsets), face.dim),
        np.array(offsets),
        bhat,
        bprime,
        orthonormal=True,
    )


# ---------------------------------------------------------------------------
# distance vectors


@dataclass(frozen=True)
class BoundSet:
    """Rotation/translation distances for the 4k-row enclosure.

    Layout of ``l`` and ``l_prime`` (length 2k): entries 0..k-2 rotate the
    sides, entry k-1 translates the cap, entries k..2k-2 translate the
    side slabs, entry 2k-1 repeats the cap entry by convention.
    """

    l: np.ndarray
    l_prime: np.ndarray
    mode: str

    def __post_init__(self):
        object.__setattr__(self, "l", np.asarray(self.l, float))
        object.__setattr__(self, "l_prime", np.asarray(self.l_prime, float))

    @property
    def k(self) -> int:
        return self.l.size // 2

    def rotation(self, i: int) -> float:
        return float(self.l[i])

    def rotation_prime(self, i: int) -> float:
        return float(self.l_prime[i])

    @property
    def cap(self) -> float:
        return float(self.l[self.k - 1])

    @property
    def cap_prime(self) -> float:
        return float(self.l_prime[self.k - 1])

    def slab(self, i: int) -> float:
        return float(self.l[self.k + i])

    def slab_prime(self, i: int) -> float:
        return float(self.l_prime[self.k + i])


def conservative_bounds(prob: StepProblem) -> BoundSet:
    """Closed-form distance bounds, sound whenever the outward condition
    holds with margin delta0 on [-Delta, Delta]."""
    if prob.delta0 is None:
        raise BadDeltaOrder("no positive delta0 at this horizon; shrink the step")
    A = prob.matrix
    k = prob.k
    growth = prob.m0 * math.exp(prob.norm_a * prob.delta)
    d0, d1 = prob.delta0, prob.delta1

    l = np.zeros(2 * k)
    lp = np.zeros(2 * k)
    for i in range(k - 1):
        na = float(np.linalg.norm(A.T @ prob.face.side_normals[i]))
        nb = float(np.linalg.norm(A.T @ prob.face_delta.side_normals[i]))
        l[i] = growth * na / d0
        lp[i] = growth * nb / d1
        l[k + i] = prob.delta * growth * na
        lp[k + i] = prob.delta * growth * nb
    l[k - 1] = prob.delta * growth * float(np.linalg.norm(A.T @ prob.face.base_normal))
    lp[k - 1] = prob.delta * growth * float(np.linalg.norm(A.T @ prob.face_delta.base_normal))
    l[2 * k - 1] = l[k - 1]
    lp[2 * k - 1] = lp[k - 1]
    return BoundSet(l, lp, "conservative")


def _face_lattice(face: Face, target: int) -> np.ndarray:
    """Deterministic lattice on a face: endpoint linspace in 2D, a projected
    box grid filtered by the side rows in higher dimensions."""
    if face.dim == 2:
        ends = vertices_2d(face.as_polyhedron())
        if ends.shape[0] == 1:
            return ends
        s = np.linspace(0.0, 1.0, max(2, target))[:, None]
        return ends[0] * (1.0 - s) + ends[-1] * s
    P = face.as_polyhedron()
    lo, hi = P.bounding_box()
    per_axis = max(2, int(math.ceil(target ** (1.0 / face.dim))) + 1)
    axes = [np.linspace(lo[j], hi[j], per_axis) for j in range(face.dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, face.dim)
    ak, bk = face.base_normal, face.base_offset
    mesh = mesh - np.outer(mesh @ ak - bk, ak)  # project onto the base hyperplane
    keep = np.ones(mesh.shape[0], bool)
    for i in range(face.side_offsets.size):
        keep &= mesh @ face.side_normals[i] - face.side_offsets[i] <= 1e-9
    pts = mesh[keep]
    if pts.shape[0] == 0:
        raise NumericRange("face lattice came up empty; widen the sampling target")
    return pts


def sampled_bounds(prob: StepProblem, nx: int = 40, nt: int = 40) -> BoundSet:
    """Lattice-sampled distances: suprema of the defining ratios over flow
    points of the tube, denominators below 1e-12 excluded.

    Under-estimates of the true suprema; refining the lattice (nested
    point sets) can only grow each entry. Soundness claims belong to
    conservative mode, not here.
    """
    k = prob.k
    X0 = _face_lattice(prob.face, nx)
    f0, fd = prob.face, prob.face_delta

    rot = np.full(k - 1, -math.inf)
    rotp = np.full(k - 1, -math.inf)
    trans = np.full(k - 1, -math.inf)
    transp = np.full(k - 1, -math.inf)
    cap = -math.inf
    capp = -math.inf
    any_den = False
    any_denp = False

    for t in np.linspace(0.0, prob.delta, nt):
        Y = X0 @ expm(prob.matrix, float(t)).T
        den = Y @ f0.base_normal - f0.base_offset
        denp = fd.base_offset - Y @ fd.base_normal
        cap = max(cap, float(np.max(den)))
        capp = max(capp, float(np.max(denp)))
        ok = den > _DEGEN_TOL
        okp = denp > _DEGEN_TOL
        any_den |= bool(ok.any())
        any_denp |= bool(okp.any())
        for i in range(k - 1):
            num = Y @ f0.side_normals[i] - f0.side_offsets[i]
            nump = Y @ fd.side_normals[i] - fd.side_offsets[i]
            trans[i] = max(trans[i], float(np.max(num)))
            transp[i] = max(transp[i], float(np.max(nump)))
            if ok.any():
                rot[i] = max(rot[i], float(np.max(num[ok] / den[ok])))
            if okp.any():
                rotp[i] = max(rotp[i], float(np.max(nump[okp] / denp[okp])))
    if k > 1 and not any_den:
        raise DenominatorAllDegenerate("no flow sample rose above the start plane")
    if k > 1 and not any_denp:
        raise DenominatorAllDegenerate("no flow sample stayed below the far plane")

    l = np.zeros(2 * k)
    lp = np.zeros(2 * k)
    l[: k - 1] = rot
    lp[: k - 1] = rotp
    l[k - 1] = max(cap, 0.0)
    lp[k - 1] = max(capp, 0.0)
    l[k : 2 * k - 1] = np.maximum(trans, 0.0)
    lp[k : 2 * k - 1] = np.maximum(transp, 0.0)
    l[2 * k - 1] = l[k - 1]
    lp[2 * k - 1] = lp[k - 1]
    return BoundSet(l, lp, "sampled")


# ---------------------------------------------------------------------------
# row assembly


def row_groups(k: int) -> list[str]:
    """Group tag per assembled row, in emission order."""
    tags = ["rotated-start"] * (k - 1) + ["support-start", "cap-start"] + ["slab-start"] * (k - 1)
    tags += ["rotated-end"] * (k - 1) + ["support-end", "cap-end"] + ["slab-end"] * (k - 1)
    return tags


def assemble_polyhedron(prob: StepProblem, bounds: BoundSet) -> Polyhedron:
    """The 4k-row enclosure of the tube step, rows in the fixed order
    reported by row_groups(k).

    Start-side rows: sides rotated toward the flow, the supporting base
    plane, the cap pushed along the base normal, and the side slabs pushed
    outward. End-side rows repeat the pattern on the transported face.
    Rows keep the (generally non-unit) normals the construction produces;
    membership is scale-free so callers compare rows up to positive scale.
    """
    f0, fd = prob.face, prob.face_delta
    k = prob.k
    ak, bk = f0.base_normal, f0.base_offset
    gk, gkp = fd.base_normal, fd.base_offset

    rows: list[Halfspace] = []
    for i in range(k - 1):
        li = bounds.rotation(i)
        rows.append(Halfspace(f0.side_normals[i] - li * ak, f0.side_offsets[i] - li * bk))
    rows.append(Halfspace(-ak, -bk))
    rows.append(Halfspace(ak, bk + bounds.cap))
    for i in range(k - 1):
        rows.append(Halfspace(f0.side_normals[i], f0.side_offsets[i] + bounds.slab(i)))
    for i in range(k - 1):
        lip = bounds.rotation_prime(i)
        rows.append(Halfspace(fd.side_normals[i] + lip * gk, fd.side_offsets[i] + lip * gkp))
    rows.append(Halfspace(gk, gkp))
    rows.append(Halfspace(-gk, -gkp + bounds.cap_prime))
    for i in range(k - 1):
        rows.append(Halfspace(fd.side_normals[i], fd.side_offsets[i] + bounds.slab_prime(i)))
    return Polyhedron(tuple(rows))


# ---------------------------------------------------------------------------
# hull comparison enclosure


def hull_bloat_epsilon(m0: float, norm_a: float, delta: float) -> float:
    """Closed-form push-out distance covering the gap between the chord
    hull of the face pair and the curved tube."""
    x = norm_a * delta
    return m0 * (math.exp(x) - 1.0 - x - 0.375 * x * x)


def bloat_hull(face: Face, face_delta: Face, A, delta: float, eps: float | None = None) -> Polyhedron:
    """2D enclosure by the convex hull of both faces' endpoints, every row
    pushed outward by eps (default: the closed-form bloat distance)."""
    if face.dim != 2:
        raise DimUnsupported("bloat_hull is only available in two dimensions")
    if eps is None:
        eps = hull_bloat_epsilon(max_norm_over_face(face), operator_norm(np.asarray(A, float)), delta)
    pts = np.vstack([vertices_2d(face.as_polyhedron()), vertices_2d(face_delta.as_polyhedron())])
    hull = convex_hull_2d(pts)
    return Polyhedron(tuple(Halfspace(h.normal, h.offset + eps) for h in hull.ineqs))


# ---------------------------------------------------------------------------
# step driver


@dataclass
class StepResult:
    """Outcome of overapproximate_step: one entry per emitted sub-step."""

    problems: list
    bounds: list
    assembled: list
    hulls: list
    polyhedra: list
    deltas: list
    delta_shrunk: bool

    @property
    def polyhedron(self) -> Polyhedron:
        if len(self.polyhedra) != 1:
            raise ValueError("step was split; inspect .polyhedra instead")
        return self.polyhedra[0]


def overapproximate_step(
    face: Face,
    A,
    delta: float,
    mode: str = "conservative",
    delta0: float | None = None,
    nx: int = 40,
    nt: int = 40,
    t_samples: int = 65,
    use_hull: bool | None = None,
) -> StepResult:
    """Enclose the tube grown from ``face`` over one horizon of length
    ``delta``.

    Pipeline: orthonormalize, check the outward assumption, validate the
    outward condition along the step, then assemble the 4k rows from the
    chosen bound mode ("conservative" or "sampled"). When the condition
    fails at the requested horizon the step is shrunk to the certified
    bound and chained sub-steps cover the remainder (flagged
    delta_shrunk). In 2D each sub-step is intersected with the bloated
    face hull unless use_hull=False.
    """
    if mode not in ("conservative", "sampled"):
        raise ValueError(f"unknown bound mode {mode!r}")
    A = np.asarray(A, float)
    if not face.orthonormal:
        face = normalize_and_orthogonalize(face)
    if use_hull is None:
        use_hull = face.dim == 2

    result = StepResult([], [], [], [], [], [], False)
    current = face
    remaining = float(delta)
    guard = 0
    while remaining > 1e-12:
        guard += 1
        if guard > 10000:
            raise NumericRange("step chaining did not converge; horizon too aggressive")
        prob = StepProblem.build(current, A, remaining, delta0=delta0, t_samples=t_samples)
        if not check_C1(prob):
            ref = delta0 if delta0 is not None else prob.delta_min / 2.0
            certified = select_delta(prob.m0, prob.norm_a, prob.delta_min, ref)
            step = min(remaining, certified)
            if step >= remaining:
                raise NumericRange(
                    "outward condition fails inside its own certified horizon; "
                    "the time lattice and the growth bound disagree"
                )
            result.delta_shrunk = True
            prob = StepProblem.build(current, A, step, delta0=delta0, t_samples=t_samples)
            if prob.delta0 is None:
                prob = StepProblem.build(current, A, step, delta0=ref, t_samples=t_samples)
        bounds = conservative_bounds(prob) if mode == "conservative" else sampled_bounds(prob, nx, nt)
        poly = assemble_polyhedron(prob, bounds)
        hull = bloat_hull(prob.face, prob.face_delta, A, prob.delta) if use_hull else None
        result.problems.append(prob)
        result.bounds.append(bounds)
        result.assembled.append(poly)
        result.hulls.append(hull)
        result.polyhedra.append(intersect([poly, hull]) if hull is not None else poly)
        result.deltas.append(prob.delta)
        remaining -= prob.delta
        if remaining > 1e-12:
            current = prob.face_delta
    return result


def propagate_tube(P0: Polyhedron, A, delta: float, steps: int) -> list[Polyhedron]:
    """Images e^{A i Delta} P0 for i = 1..steps: normals transported through
    e^{-A^T i Delta}, offsets kept, rows renormalized to unit normals."""
    A = np.asarray(A, float)
    out = []
    for i in range(1, steps + 1):
        E = expm(-A.T, i * delta)
        ineqs = tuple(Halfspace(E @ h.normal, h.offset).unit() for h in P0.ineqs)
        eqs = tuple(Halfspace(E @ h.normal, h.offset).unit() for h in P0.eqs)
        out.append(Polyhedron(ineqs, eqs))
    return out
