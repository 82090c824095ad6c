"""Flow-layer tests: the matrix exponential against a long Taylor sum and
scipy, RK4 against closed-form orbits and an order check, operator norm
against the SVD."""

import numpy as np
import pytest
import scipy.linalg

from reachkit.errors import NonFiniteState, NumericRange, UnboundedFace
from reachkit.flow import (
    ExpressionDynamics,
    LinearDynamics,
    expm,
    flow,
    max_norm_over_face,
    operator_norm,
    reverse_flow,
    rk4,
)
from reachkit.geometry import Face

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def taylor_expm(A, t, terms=200):
    A = np.asarray(A, float) * t
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def test_expm_matches_taylor_small_norm():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(2, 5))
        A = rng.normal(size=(n, n))
        t = float(rng.uniform(0.1, 2.0 / max(operator_norm(A), 1e-9)))
        ours = expm(A, t)
        ref = taylor_expm(A, t)
        assert np.max(np.abs(ours - ref)) <= 1e-11 * max(1.0, np.max(np.abs(ref)))


def test_expm_matches_scipy_at_large_norm():
    rng = np.random.default_rng(9)
    for _ in range(15):
        n = int(rng.integers(2, 6))
        A = rng.normal(size=(n, n))
        A *= 40.0 / max(operator_norm(A), 1e-12)  # ||A t|| around 40
        ref = scipy.linalg.expm(A)
        ours = expm(A)
        assert np.max(np.abs(ours - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_expm_rotation_is_exact_rotation():
    th = np.pi / 6
    np.testing.assert_allclose(
        expm(ROT, th),
        [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]],
        atol=1e-14,
    )


def test_expm_rejects_nonfinite():
    with pytest.raises(NumericRange):
        expm(np.array([[np.nan, 0.0], [0.0, 0.0]]))


def test_operator_norm_matches_svd():
    rng = np.random.default_rng(23)
    for _ in range(40):
        n = int(rng.integers(1, 7))
        A = rng.normal(size=(n, n))
        want = np.linalg.norm(A, 2)
        assert operator_norm(A) == pytest.approx(want, rel=1e-9)
    assert operator_norm(np.zeros((3, 3))) == 0.0
    assert operator_norm(ROT) == pytest.approx(1.0, rel=1e-12)


def test_linear_flow_is_exact_orbit():
    x0 = np.array([1.0, 0.0])
    dyn = LinearDynamics(ROT)
    for t in [0.1, 1.0, np.pi]:
        np.testing.assert_allclose(flow(dyn, x0, t), [np.cos(t), np.sin(t)], atol=1e-13)
    batch = np.array([[1.0, 0.0], [0.0, 2.0]])
    out = flow(dyn, batch, np.pi / 2)
    np.testing.assert_allclose(out, [[0.0, 1.0], [-2.0, 0.0]], atol=1e-13)


def test_rk4_rotation_accuracy_and_order():
    dyn = ExpressionDynamics.parse(["-x2", "x1"])
    x0 = np.array([1.0, 0.0])
    t = 1.0
    exact = np.array([np.cos(t), np.sin(t)])
    err = {n: np.linalg.norm(rk4(dyn, x0, t, n) - exact) for n in (32, 64)}
    ratio = err[32] / err[64]
    assert 12.0 <= ratio <= 20.0  # fourth order: halving h divides error by about 16
    assert np.linalg.norm(flow(dyn, x0, t, tol=1e-8) - exact) <= 1e-7


def test_flow_semigroup_property():
    dyn = ExpressionDynamics.parse(["x2", "-sin(x1) - 0.2*x2"])
    x0 = np.array([0.7, -0.3])
    t1, t2 = 0.4, 0.9
    a = flow(dyn, flow(dyn, x0, t1), t2)
    b = flow(dyn, x0, t1 + t2)
    assert np.linalg.norm(a - b) <= 1e-7


def test_reverse_flow_inverts_forward_flow():
    dyn = ExpressionDynamics.parse(["x1*x2", "cos(x1)"])
    x0 = np.array([0.5, 1.0])
    fwd = flow(dyn, x0, 0.8)
    back = reverse_flow(dyn, fwd, 0.8)
    assert np.linalg.norm(back - x0) <= 1e-7
    lin = LinearDynamics(ROT)
    np.testing.assert_allclose(reverse_flow(lin, flow(lin, x0, 2.0), 2.0), x0, atol=1e-12)


def test_flow_rejects_nonfinite_start():
    with pytest.raises(NonFiniteState):
        flow(LinearDynamics(ROT), np.array([np.inf, 0.0]), 1.0)


def test_max_norm_over_face_2d_exact():
    # segment [1, sqrt(2)] x {0}: the norm peaks at the far endpoint
    face = Face([[1, 0], [-1, 0]], [np.sqrt(2.0), -1.0], [0, 1], 0.0)
    assert max_norm_over_face(face) == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_max_norm_over_face_3d_box_bound_dominates_samples():
    # tilted rectangular patch in the plane x3 = 1
    face = Face(
        [[1, 1, 0], [-1, -1, 0], [1, -1, 0], [-1, 1, 0]],
        [1.0, 1.0, 1.0, 1.0],
        [0, 0, 1],
        1.0,
    )
    bound = max_norm_over_face(face)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1, 1, size=(500, 2))
    keep = (np.abs(pts[:, 0] + pts[:, 1]) <= 1.0) & (np.abs(pts[:, 0] - pts[:, 1]) <= 1.0)
    samples = np.column_stack([pts[keep], np.ones(keep.sum())])
    assert bound + 1e-9 >= np.max(np.linalg.norm(samples, axis=1))


def test_max_norm_unbounded_face_raises():
    face = Face([[1, 0]], [1.0], [0, 1], 0.0)  # half-line in the base hyperplane
    with pytest.raises(UnboundedFace):
        max_norm_over_face(face)
