"""Acceptance gate: one test per reference criterion.

Each test delegates to the matching golden-suite check so pytest -v
prints a single pass/fail line per criterion; the detail string carries
the measured values and tolerances on failure.
"""

from reachkit import golden


def _run(check):
    ok, detail = check()
    assert ok, detail


def test_a1_conservative_bound_constants():
    _run(golden.check_a1)


def test_a2_assembled_halfspace_table():
    _run(golden.check_a2)


def test_a3_subsystem_vertex_list():
    _run(golden.check_a3)


def test_a4_hull_bloat_constants():
    _run(golden.check_a4)


def test_a5_containment_soundness_sweep():
    _run(golden.check_a5)


def test_a6_subsystem_boundedness():
    _run(golden.check_a6)


def test_a7_boundary_classification():
    _run(golden.check_a7)


def test_a8_boundary_sweep_equivalence():
    _run(golden.check_a8)


def test_a9_termination_behavior():
    _run(golden.check_a9)


def test_a10_mode_ordering():
    _run(golden.check_a10)


def test_a11_numerical_kernels():
    _run(golden.check_a11)


def test_a12_hybrid_semi_decision():
    _run(golden.check_a12)


def test_suite_reports_all_pass(capsys):
    assert golden.run_golden_suite() == 0
    out = capsys.readouterr().out
    assert "12/12 criteria passed" in out
