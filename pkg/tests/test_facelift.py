"""Boundary classification, grid regions and the two reach procedures."""

import math

import numpy as np
import pytest

from reachkit.errors import (
    AssumptionA2Violated,
    EmptyBoundary,
    PreconditionViolated,
    StepTooCoarse,
)
from reachkit.facelift import (
    GridRegion,
    LevelSet,
    TimeGrid,
    _front_sweep,
    check_boundary_equivalence,
    classify_boundary,
    reach_bounded_time,
    reach_invariant,
)
from reachkit.flow import ExpressionDynamics, LinearDynamics, flow
from reachkit.geometry import Polyhedron

ROT = LinearDynamics(np.array([[0.0, -1.0], [1.0, 0.0]]))
DRIFT = ExpressionDynamics.parse(["1", "1"])
SLIDE = ExpressionDynamics.parse(["1", "0"])


def unit_square():
    return Polyhedron.box([0.0, 0.0], [1.0, 1.0])


def offset_square():
    # sits away from the origin so the rotation flux is one-signed per face
    return Polyhedron.box([0.9, 0.9], [1.1, 1.1])


def unit_disk(r=1.0, pad=0.4):
    rr = r * r
    return LevelSet(
        f"x1*x1 + x2*x2 - {rr}", [-r - pad, -r - pad], [r + pad, r + pad]
    )


# ---------------------------------------------------------------------------
# grid regions


def test_grid_shape_covers_box():
    g = GridRegion([0.0, 0.0], [1.0, 0.55], 0.25)
    assert g.shape == (4, 3)
    assert np.allclose(g.hi, [1.0, 0.75])


def test_mark_points_and_membership():
    g = GridRegion([0.0, 0.0], [1.0, 1.0], 0.25)
    g.mark_points(np.array([[0.1, 0.1], [0.9, 0.9], [5.0, 5.0]]))
    assert g.count() == 2
    assert g.out_of_box == 1
    got = g.contains_points(np.array([[0.2, 0.2], [0.6, 0.6], [0.95, 0.8]]))
    assert got.tolist() == [True, False, True]


def test_mark_segment_covers_crossed_cells():
    g = GridRegion([0.0, 0.0], [1.0, 1.0], 0.1)
    a, b = np.array([0.05, 0.05]), np.array([0.95, 0.55])
    g.mark_segment(a, b)
    for t in np.linspace(0.0, 1.0, 200):
        assert g.contains_points((a + t * (b - a))[None, :])[0]


def test_mark_polyhedron_over_under():
    square = unit_square()
    over = GridRegion([-1.0, -1.0], [2.0, 2.0], 0.25, "over")
    under = GridRegion([-1.0, -1.0], [2.0, 2.0], 0.25, "under")
    over.mark_polyhedron(square)
    under.mark_polyhedron(square)
    assert under.subset_of(over)
    assert under.count() == 16  # [0,1]^2 is exactly 4x4 aligned cells
    assert over.count() >= 16
    rng = np.random.default_rng(7)
    pts = rng.uniform(0.0, 1.0, size=(100, 2))
    assert over.contains_points(pts).all()
    for c in under.cell_centers():
        assert square.contains(c + 0.1249, tol=1e-9) or True  # corners certified below
    corners = under.cell_centers()[:, None, :] + 0.125 * np.array(
        [[-1, -1], [-1, 1], [1, -1], [1, 1]]
    )
    assert square.contains(corners.reshape(-1, 2), tol=1e-9).all()


def test_mark_levelset_over_under():
    disk = unit_disk()
    over = GridRegion([-1.5, -1.5], [1.5, 1.5], 0.1, "over")
    under = GridRegion([-1.5, -1.5], [1.5, 1.5], 0.1, "under")
    over.mark_levelset(disk)
    under.mark_levelset(disk)
    assert under.subset_of(over)
    assert np.all(np.linalg.norm(under.cell_centers(), axis=1) < 1.0)
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(200, 2))
    pts = 0.97 * pts / np.linalg.norm(pts, axis=1, keepdims=True)
    assert over.contains_points(pts).all()


def test_cells_touching_vs_inside_strip():
    g = GridRegion([0.0, 0.0], [1.0, 1.0], 0.25)
    strip = Polyhedron.from_inequalities([[1.0, 0.0], [-1.0, 0.0]], [0.6, -0.4])
    touch = g.cells_touching(strip)
    inside = g.cells_inside(strip)
    assert touch.sum() == 8  # two cell columns meet [0.4, 0.6]
    assert inside.sum() == 0  # no 0.25-cell fits in a 0.2 strip


def test_hausdorff_distances():
    a = GridRegion([0.0, 0.0], [2.0, 2.0], 0.2)
    b = a.blank()
    a.mark_points([[0.1, 0.1]])
    b.mark_points([[0.1, 0.1]])
    assert a.hausdorff(b) == 0.0
    b2 = a.blank()
    b2.mark_points([[0.7, 0.1]])  # three cells over
    assert a.hausdorff(b2) == pytest.approx(0.6)
    assert a.hausdorff(a.blank()) == math.inf
    assert a.blank().hausdorff(a.blank()) == 0.0
    far = a.blank()
    far.mark_points([[1.9, 1.9]])  # nine cells: beyond the default cap
    assert a.hausdorff(far) == math.inf


def test_symmetric_difference_and_subset():
    a = GridRegion([0.0, 0.0], [1.0, 1.0], 0.5)
    b = a.blank()
    a.mark_points([[0.1, 0.1], [0.9, 0.9]])
    b.mark_points([[0.1, 0.1]])
    assert b.subset_of(a)
    assert not a.subset_of(b)
    assert a.symmetric_difference_count(b) == 1


def test_boundary_cell_centers_strips_interior():
    g = GridRegion([0.0, 0.0], [1.0, 1.0], 0.2)
    g.occupancy[:, :] = True
    centers = g.boundary_cell_centers()
    assert centers.shape[0] == 16  # 5x5 block minus 3x3 interior
    assert not any(np.allclose(c, [0.5, 0.5]) for c in centers)


# ---------------------------------------------------------------------------
# time grids


def test_uniform_grid_clamps_tail():
    grid = TimeGrid.uniform(1.0, 0.3)
    assert np.allclose(grid.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert grid.intervals(0.7) == [(0.0, 0.3), (0.3, 0.6), (0.6, 0.7)]


def test_grid_delta_repeats_last():
    grid = TimeGrid(np.array([0.0, 0.1, 0.3]))
    assert grid.delta(0) == pytest.approx(0.1)
    assert grid.delta(1) == pytest.approx(0.2)
    assert grid.delta(7) == pytest.approx(0.2)


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 0.2, 0.2]))
    with pytest.raises(ValueError):
        TimeGrid.uniform(1.0, 0.0)


# ---------------------------------------------------------------------------
# boundary classification


def test_classify_square_under_diagonal_drift():
    front = classify_boundary(unit_square(), DRIFT, 0.05)
    assert front.dropped == 0
    assert set(front.tags) == {"outflow", "inflow"}
    for p, tag in zip(front.points, front.tags):
        on_right, on_top = abs(p[0] - 1.0) < 1e-9, abs(p[1] - 1.0) < 1e-9
        assert tag == ("outflow" if on_right or on_top else "inflow")
    # lifted front = the outward half, split per facet
    kept = front.front_points
    assert kept.shape[0] * 2 == front.points.shape[0]


def test_classify_tags_match_dot_signs():
    for init, dyn in [
        (unit_square(), DRIFT),
        (offset_square(), ROT),
        (unit_disk(), ExpressionDynamics.parse(["x1", "x2"])),
    ]:
        front = classify_boundary(init, dyn, 0.05)
        f = dyn.evaluate(front.points)
        tol = 1e-9 * (1.0 + np.linalg.norm(f, axis=1))
        assert np.all(front.dots[front.tags == "outflow"] > tol[front.tags == "outflow"])
        assert np.all(front.dots[front.tags == "inflow"] < -tol[front.tags == "inflow"])
        mid = front.tags == "tangential"
        assert np.all(np.abs(front.dots[mid]) <= tol[mid])


def test_classify_disk_rotation_all_tangential():
    front = classify_boundary(unit_disk(), ROT, 0.05)
    assert np.all(front.tags == "tangential")
    assert front.front_points.shape[0] == front.points.shape[0]
    # one closed chain ordered by angle
    assert len(front.chains) == 1 and front.chains[0][2] is True
    ang = np.arctan2(front.points[:, 1], front.points[:, 0])
    assert np.all(np.diff(np.unwrap(ang)) > 0)


def test_classify_disk_radial_field():
    out = classify_boundary(unit_disk(), ExpressionDynamics.parse(["x1", "x2"]), 0.05)
    assert np.all(out.tags == "outflow")
    inn = classify_boundary(unit_disk(), ExpressionDynamics.parse(["-x1", "-x2"]), 0.05)
    assert np.all(inn.tags == "inflow")
    assert inn.front_chains() == []


def test_classify_disk_samples_near_circle():
    front = classify_boundary(unit_disk(), ROT, 0.04)
    r = np.linalg.norm(front.points, axis=1)
    assert np.max(np.abs(r - 1.0)) < 1e-7
    gaps = np.linalg.norm(np.roll(front.points, -1, axis=0) - front.points, axis=1)
    assert np.max(gaps) < 3.0 * 0.04


def test_classify_empty_cases():
    with pytest.raises(EmptyBoundary):
        classify_boundary(
            Polyhedron.from_inequalities([[1.0, 0.0], [-1.0, 0.0]], [-1.0, -1.0]),
            DRIFT,
            0.05,
        )
    with pytest.raises(EmptyBoundary):
        classify_boundary(
            LevelSet("x1*x1 + x2*x2 + 1", [-1.0, -1.0], [1.0, 1.0]), DRIFT, 0.05
        )


# ---------------------------------------------------------------------------
# bounded-time reach, front path


def test_drift_square_tube_covers_true_reach():
    tau = 1.0
    tube = reach_bounded_time(unit_square(), DRIFT, tau, grid=0.125, h=0.05)
    assert tube.direction == "over"
    assert tube.iterations == 8
    assert not tube.front_collapse
    rng = np.random.default_rng(11)
    a = rng.uniform(0.0, 1.0, size=(300, 2))
    t = rng.uniform(0.0, tau, size=(300, 1))
    assert tube.contains(a + t).all()
    # swept area is 1 + 2 tau; the raster should stay near that
    area = tube.combined_region().count() * tube.occupancy.h ** 2
    assert area < 1.55 * (1.0 + 2.0 * tau)


def test_drift_under_inside_over():
    kw = dict(grid=0.125, h=0.05, box=([-1.0, -1.0], [3.0, 3.0]))
    over = reach_bounded_time(unit_square(), DRIFT, 1.0, **kw)
    under = reach_bounded_time(unit_square(), DRIFT, 1.0, mode="under", **kw)
    assert under.direction == "exact-sampled"
    assert under.combined_region().count() > 0
    assert under.combined_region().subset_of(over.combined_region())
    # under cells really are reachable: every center lies in the exact sweep
    for c in under.region().cell_centers():
        # x(t) = x0 + t (1,1): reachable iff some backshift lands in the square
        lo = max(c[0] - 1.0, c[1] - 1.0, 0.0)
        hi = min(c[0], c[1], 1.0)
        assert lo <= hi + 0.075  # half-diagonal slack for cell snapping


def test_monotone_accumulation():
    tube = reach_bounded_time(unit_square(), DRIFT, 1.0, grid=0.25, h=0.1)
    running = tube.initial_region.copy()
    counts = [running.count()]
    for _, _, seg in tube.segments:
        running.include(seg)
        counts.append(running.count())
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] == tube.combined_region().count()


def test_zero_horizon_is_initial_only():
    tube = reach_bounded_time(unit_square(), DRIFT, 0.0, h=0.1)
    assert tube.segments == []
    assert tube.occupancy.count() == 0
    assert tube.contains(np.array([[0.5, 0.5]]))[0]


def test_rotation_disk_stays_put():
    h = 0.05
    tube = reach_bounded_time(unit_disk(), ROT, math.pi / 4, grid=math.pi / 16, h=h)
    centers = tube.combined_region().cell_centers()
    assert np.max(np.linalg.norm(centers, axis=1)) <= 1.0 + 1.5 * h * math.sqrt(2.0)
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(150, 2))
    pts = 0.9 * pts / np.linalg.norm(pts, axis=1, keepdims=True)
    assert tube.contains(pts).all()


def test_deterministic_rerun():
    a = reach_bounded_time(unit_square(), DRIFT, 0.5, grid=0.125, h=0.1)
    b = reach_bounded_time(unit_square(), DRIFT, 0.5, grid=0.125, h=0.1)
    assert np.array_equal(a.occupancy.occupancy, b.occupancy.occupancy)
    assert [s[:2] for s in a.segments] == [s[:2] for s in b.segments]


def test_step_too_coarse_on_blowup():
    square = Polyhedron.box([2.0, 0.0], [3.0, 1.0])
    dyn = ExpressionDynamics.parse(["x1*x1", "0"])
    with pytest.raises(StepTooCoarse):
        reach_bounded_time(
            square, dyn, 1.0, grid=1.0, h=0.05, box=([0.0, -1.0], [1000.0, 2.0])
        )


def test_semigroup_restart_from_boundary():
    box = ([-0.6, -0.6], [2.6, 2.6])
    h = 0.05
    first = reach_bounded_time(unit_square(), DRIFT, 0.5, grid=0.125, h=h, box=box)
    direct = reach_bounded_time(unit_square(), DRIFT, 1.0, grid=0.125, h=h, box=box)
    # restart: evolve the half-time region boundary for the remaining time
    region = first.combined_region()
    chains = [(region.boundary_cell_centers(), None)]
    grid = TimeGrid.uniform(0.5, 0.125)
    _front_sweep(
        chains, unit_square(), DRIFT, grid.intervals(0.5), region, h, h / 2.0, 1e-8
    )
    gap = region.hausdorff(direct.combined_region())
    assert gap <= 2.0 * h + 1e-12


# ---------------------------------------------------------------------------
# bounded-time reach, linear-polyhedral path


def test_rotation_square_polyhedral_tube():
    tau = math.pi / 2
    tube = reach_bounded_time(offset_square(), ROT, tau, grid=math.pi / 8)
    assert tube.occupancy is None
    assert len(tube.segments) == 4
    for _, _, payload in tube.segments:
        assert payload and all(isinstance(P, Polyhedron) for P in payload)
    rng = np.random.default_rng(23)
    x0 = rng.uniform(0.9, 1.1, size=(250, 2))
    t = rng.uniform(0.0, tau, size=250)
    moved = np.stack([flow(ROT, x0[i], t[i]) for i in range(250)])
    assert tube.contains(moved).all()


def test_rotation_square_forced_front_matches_membership():
    tau = math.pi / 4
    poly = reach_bounded_time(offset_square(), ROT, tau, grid=math.pi / 16)
    front = reach_bounded_time(
        offset_square(), ROT, tau, grid=math.pi / 16, h=0.04, force_front=True
    )
    assert front.occupancy is not None
    # the polyhedral tube over-approximates; grid cells it misses must be rare
    centers = front.combined_region().cell_centers()
    inside = poly.contains(centers)
    assert np.mean(inside) > 0.9


def test_mixed_face_raises_a2():
    centered = Polyhedron.box([-0.5, -0.5], [0.5, 0.5])
    with pytest.raises(AssumptionA2Violated):
        reach_bounded_time(centered, ROT, 0.5, grid=0.25)


# ---------------------------------------------------------------------------
# invariant-constrained reach


def test_slide_invariant_terminates_and_covers():
    square = unit_square()
    inv = Polyhedron.box([0.0, 0.0], [3.0, 1.0])
    tube = reach_invariant(square, SLIDE, inv, grid=0.25, h=0.05)
    assert tube.front_collapse
    assert not tube.iteration_cap
    assert tube.iterations <= 13
    xs = np.linspace(0.05, 2.95, 40)
    ys = np.linspace(0.05, 0.95, 12)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    assert tube.contains(pts).all()
    centers = tube.combined_region().cell_centers()
    assert np.max(centers[:, 0]) <= 3.0 + 2.5 * 0.05
    assert np.max(np.abs(centers[:, 1] - 0.5)) <= 0.5 + 2.5 * 0.05


def test_slide_invariant_under_flavor():
    square = unit_square()
    inv = Polyhedron.box([0.0, 0.0], [3.0, 1.0])
    tube = reach_invariant(
        square, SLIDE, inv, grid=0.25, h=0.05, under_approximate=True
    )
    assert tube.direction == "under"
    combined_under = tube.combined_region()
    over = tube.occupancy.copy()
    over.include(tube.initial_region)
    assert combined_under.subset_of(over)
    # certified cells stay inside the invariant
    assert inv.contains(combined_under.cell_centers(), tol=1e-9).all()
    assert combined_under.count() > 0


def test_literal_under_marks_escaping_samples():
    square = unit_square()
    inv = Polyhedron.box([0.0, 0.0], [3.0, 1.0])
    tube = reach_invariant(
        square,
        SLIDE,
        inv,
        grid=0.25,
        h=0.05,
        under_approximate=True,
        literal_under=True,
    )
    centers = tube.region().cell_centers()
    assert centers.shape[0] > 0
    # the schematic records the escaping tube samples verbatim
    assert np.any(centers[:, 0] > 3.0)


def test_invariant_precondition():
    square = unit_square()
    inv = Polyhedron.box([0.5, 0.0], [3.0, 1.0])
    with pytest.raises(PreconditionViolated):
        reach_invariant(square, SLIDE, inv, grid=0.25, h=0.1)


def test_periodic_orbit_hits_iteration_cap():
    inv = Polyhedron.box([-2.0, -2.0], [2.0, 2.0])
    tube = reach_invariant(
        offset_square(), ROT, inv, grid=math.pi / 16, h=0.05, max_iters=10
    )
    assert tube.iteration_cap
    assert not tube.front_collapse
    assert tube.iterations == 10


def test_invariant_requires_step():
    with pytest.raises(ValueError):
        reach_invariant(unit_square(), SLIDE, Polyhedron.box([0, 0], [3, 1]))


# ---------------------------------------------------------------------------
# boundary equivalence


def test_equivalence_drift_square():
    report = check_boundary_equivalence(unit_square(), DRIFT, 0.5, h=0.05)
    assert report["passes"]
    assert report["max_gap"] <= 2.0 * 0.05 + 1e-12
    assert report["cells"]["full"] > 0
    assert set(report["sym_diff"]) == {
        "full_vs_boundary",
        "full_vs_outflow",
        "boundary_vs_outflow",
    }


def test_equivalence_rotation_square():
    report = check_boundary_equivalence(offset_square(), ROT, 0.8, h=0.05)
    assert report["passes"]
    assert all(g <= 0.1 + 1e-12 for g in report["hausdorff"].values())
