"""Flow maps and the numerics under them.

Linear dynamics flow exactly through the matrix exponential (scaling and
squaring with a degree-13 Pade approximant); expression dynamics advect
with fixed-step RK4. Both paths are deterministic: step counts derive
from the requested tolerance, never from adaptive error control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as _expr
from .errors import NonFiniteState, NumericRange, UnboundedFace
from .geometry import Face, is_bounded, lp_maximize, vertices_2d

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def expm(A, t: float = 1.0) -> np.ndarray:
    """e^{A t} by scaling and squaring on the degree-13 Pade approximant."""
    A = np.asarray(A, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)) or not math.isfinite(t):
        raise NumericRange("expm input is not finite")
    M = A * t
    n = M.shape[0]
    norm1 = float(np.max(np.sum(np.abs(M), axis=0))) if n else 0.0
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA13))) if norm1 > _THETA13 else 0)
    M = M / (2.0**s)

    eye = np.eye(n)
    b = _PADE13
    M2 = M @ M
    M4 = M2 @ M2
    M6 = M2 @ M4
    U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2) + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * eye)
    V = M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2) + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * eye
    out = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        out = out @ out
    if not np.all(np.isfinite(out)):
        raise NumericRange("expm overflowed the representable range")
    return out


def operator_norm(A, rel_tol: float = 1e-12, max_iter: int = 200000) -> float:
    """Induced 2-norm via power iteration on A^T A.

    Deterministic start vector; converges to relative error well under 1e-9
    for the small matrices used here. The zero matrix returns 0.
    """
    A = np.asarray(A, float)
    M = A.T @ A
    n = M.shape[0]
    if n == 0 or float(np.max(np.abs(M))) == 0.0:
        return 0.0
    v = np.ones(n) + np.linspace(0.0, 0.1, n)  # fixed start, never an exact eigenvector tie
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ (M @ v))
        if abs(new - lam) <= rel_tol * max(abs(new), 1e-300):
            lam = new
            break
        lam = new
    return math.sqrt(max(lam, 0.0))


# ---------------------------------------------------------------------------
# dynamics


@dataclass(frozen=True)
class LinearDynamics:
    """Vector field f(x) = A x."""

    matrix: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.matrix, float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"dynamics matrix must be square, got {A.shape}")
        object.__setattr__(self, "matrix", A)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def evaluate(self, points):
        pts = np.asarray(points, float)
        return pts @ self.matrix.T

    def negated(self) -> "LinearDynamics":
        return LinearDynamics(-self.matrix)


@dataclass(frozen=True)
class ExpressionDynamics:
    """Vector field with one expression tree per component."""

    components: tuple
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != self.dim:
            raise ValueError("need one component per dimension")

    @classmethod
    def parse(cls, strings) -> "ExpressionDynamics":
        strings = list(strings)
        dim = len(strings)
        return cls(tuple(_expr.parse(s, dim) for s in strings), dim)

    def evaluate(self, points):
        pts = np.asarray(points, float)
        out = np.empty(pts.shape, float)
        for j, comp in enumerate(self.components):
            out[..., j] = comp.eval(pts)
        return out

    def negated(self) -> "ExpressionDynamics":
        return ExpressionDynamics(tuple(_expr.neg(c) for c in self.components), self.dim)


Dynamics = LinearDynamics | ExpressionDynamics


@dataclass(frozen=True)
class FlowSample:
    """A recorded flow evaluation: value = flow(origin, time) within tol."""

    origin: np.ndarray
    time: float
    value: np.ndarray
    tol: float


# ---------------------------------------------------------------------------
# integration


def rk4(dyn: Dynamics, x0, t: float, nsteps: int) -> np.ndarray:
    """Classic fixed-step RK4 over [0, t], batched over leading axes of x0."""
    x = np.array(x0, float)
    h = t / nsteps
    for _ in range(nsteps):
        k1 = dyn.evaluate(x)
        k2 = dyn.evaluate(x + 0.5 * h * k1)
        k3 = dyn.evaluate(x + 0.5 * h * k2)
        k4 = dyn.evaluate(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState("integration produced a non-finite state")
    return x


def _rk4_steps(t: float, tol: float) -> int:
    h = min(tol**0.25, abs(t) / 32.0)
    return max(1, int(math.ceil(abs(t) / h))) if h > 0 else 1


def flow(dyn: Dynamics, x0, t: float, tol: float = 1e-8) -> np.ndarray:
    """Flow map phi(x0, t). Exact (expm) for linear dynamics, RK4 otherwise.

    x0 may be one point (n,) or a batch (m, n); the result matches.
    Negative t integrates the reversed field for |t|.
    """
    x0 = np.asarray(x0, float)
    if not np.all(np.isfinite(x0)):
        raise NonFiniteState("flow start is not finite")
    if t == 0.0:
        return x0.copy()
    if isinstance(dyn, LinearDynamics):
        return x0 @ expm(dyn.matrix, t).T
    field = dyn if t > 0 else dyn.negated()
    return rk4(field, x0, abs(t), _rk4_steps(t, tol))


def reverse_flow(dyn: Dynamics, x, t: float, tol: float = 1e-8) -> np.ndarray:
    """psi(x, t): position t time units ago, i.e. the forward flow inverted."""
    return flow(dyn, x, -t, tol=tol)


def sample_flow(dyn: Dynamics, origin, t: float, tol: float = 1e-8) -> FlowSample:
    origin = np.asarray(origin, float)
    return FlowSample(origin=origin, time=float(t), value=flow(dyn, origin, t, tol=tol), tol=tol)


# ---------------------------------------------------------------------------
# face norm maximization


def max_norm_over_face(face: Face) -> float:
    """max ||x|| over a bounded face.

    Exact in 2D (the norm peaks at a vertex); in higher dimensions returns
    the certified coordinate-box upper bound ||(max_j |x_j|)_j||. Callers
    that care which regime applied should check face.dim.
    """
    P = face.as_polyhedron()
    if not is_bounded(P):
        raise UnboundedFace("norm has no maximum over an unbounded face")
    if face.dim == 2:
        verts = vertices_2d(P)
        return float(np.max(np.linalg.norm(verts, axis=1)))
    A_ub, b_ub, A_eq, b_eq = P.matrices()
    n = face.dim
    m = np.zeros(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        hi = lp_maximize(e, A_ub, b_ub, A_eq, b_eq)
        lo = lp_maximize(-e, A_ub, b_ub, A_eq, b_eq)
        m[j] = max(abs(hi.value), abs(lo.value))
    return float(np.linalg.norm(m))
