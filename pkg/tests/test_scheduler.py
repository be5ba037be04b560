"""List scheduling of fragments: placement, loads, verification."""

import pytest

from bitfrag import extract_kernel, parse
from bitfrag.dfg import OpKind
from bitfrag.fragmenter import Slot, analyze, bucket_fragment, fragment
from bitfrag.scheduler import (
    Schedule,
    ScheduleError,
    realized_slots,
    schedule,
    unit_windows,
    verify_schedule,
)
from conftest import run_pipeline


def test_prescheduled_fragments_are_pinned(sec2):
    p = run_pipeline(sec2, 3)
    assert p.n_bits == 6
    for parts in p.fragments.values():
        for f in parts:
            assert f.prescheduled
            assert p.sched.cycle_of[f.id] == f.asap_cycle
    assert p.sched.loads() == {1: 15, 2: 18, 3: 15}
    assert verify_schedule(p.sched) == []


def test_sec2_realized_ripple_slots(sec2):
    p = run_pipeline(sec2, 3)
    assert p.sched.realized[("C0", 0)] == Slot(1, 1)
    assert p.sched.realized[("C0", 5)] == Slot(1, 6)
    assert p.sched.realized[("C1", 0)] == Slot(2, 1)
    # E chains one slot behind C inside the same cycle.
    assert p.sched.realized[("E0", 0)] == Slot(1, 2)
    assert p.sched.realized[("G0", 3)] == Slot(1, 6)


def test_fig3_schedule_within_windows(fig3):
    p = run_pipeline(fig3, 3)
    assert p.n_bits == 3
    assert verify_schedule(p.sched) == []
    for parts in p.fragments.values():
        for f in parts:
            assert f.asap_cycle <= p.sched.cycle_of[f.id] <= f.alap_cycle
    assert sum(p.sched.loads().values()) == 53
    assert max(p.sched.loads().values()) <= 18


def test_balancing_splits_across_nonconsecutive_cycles(sat):
    p = run_pipeline(sat, 3)
    assert p.n_bits == 3
    # Cycle 2 is saturated by the chain, so the standalone add splits
    # around it: low half in cycle 1, high half in cycle 3.
    assert [(f.id, f.lo, f.hi) for f in p.fragments["X"]] == [
        ("X0", 0, 2),
        ("X1", 3, 5),
    ]
    assert p.sched.cycle_of["X0"] == 1
    assert p.sched.cycle_of["X1"] == 3
    assert p.sched.loads() == {1: 11, 2: 9, 3: 10}
    assert verify_schedule(p.sched) == []


def test_core_occupies_a_full_cycle(mixed):
    p = run_pipeline(mixed, 6)
    assert p.sched.cycle_of["P_core"] == 1
    assert p.sched.loads()[1] == 0
    core_slot = p.sched.realized[("P_core", 0)]
    assert core_slot == Slot(1, p.n_bits)
    assert verify_schedule(p.sched) == []


def test_determinism(fig3):
    a = run_pipeline(fig3, 3).sched
    b = run_pipeline(fig3, 3).sched
    assert a.cycle_of == b.cycle_of
    assert a.realized == b.realized


def test_unit_windows_prefer_fragment_records(fig3):
    kernel, _ = extract_kernel(fig3)
    mobility = analyze(kernel, 3, 3)
    frags, transformed = bucket_fragment(kernel, mobility)
    windows = unit_windows(transformed, analyze(transformed, 3, 3), frags)
    assert windows["B0"] == (1, 2)
    assert windows["B1"] == (2, 3)


def test_bucket_tiles_schedule_when_decoupled(sat):
    kernel, _ = extract_kernel(sat)
    mobility = analyze(kernel, 3, 3)
    frags, transformed = bucket_fragment(kernel, mobility)
    sched = schedule(transformed, frags, 3, 3)
    assert verify_schedule(sched) == []
    from bitfrag.simulator import check_equiv

    assert check_equiv(sat, sched).equivalent


def test_bucket_tiles_fail_honestly_on_coupled_chains(fig3):
    # Whole-cycle tiles cannot interleave the chained bits of this
    # design; the window intersection empties out and scheduling stops.
    kernel, _ = extract_kernel(fig3)
    mobility = analyze(kernel, 3, 3)
    frags, transformed = bucket_fragment(kernel, mobility)
    with pytest.raises(ScheduleError):
        schedule(transformed, frags, 3, 3)


def _tampered(sched: Schedule, **moves) -> Schedule:
    cycle_of = dict(sched.cycle_of, **moves)
    realized, _ = realized_slots(sched.graph, sched.n_bits, cycle_of)
    return Schedule(
        sched.graph, sched.lam, sched.n_bits, cycle_of, realized, sched.fragments
    )


def test_verify_flags_window_escape(sat):
    p = run_pipeline(sat, 3)
    bad = _tampered(p.sched, X1=1, X0=1)
    msgs = "; ".join(verify_schedule(bad))
    assert "X1: cycle 1 outside window [2, 3]" in msgs


def test_verify_flags_sibling_order(fig3):
    p = run_pipeline(fig3, 3)
    first, second = (f.id for f in p.fragments["A"][:2])
    bad = _tampered(
        p.sched,
        **{first: p.sched.cycle_of[second] + 1, second: p.sched.cycle_of[second]},
    )
    msgs = "; ".join(verify_schedule(bad))
    assert f"A: fragment {first} after its higher half {second}" in msgs


def test_verify_flags_depth_overflow(sec2):
    p = run_pipeline(sec2, 3)
    # Forcing two chained fragments into one cycle exceeds six slots.
    bad = _tampered(p.sched, C1=1)
    msgs = "; ".join(verify_schedule(bad))
    assert "deeper than" in msgs or "outside window" in msgs
    assert any("C1" in m for m in verify_schedule(bad))


def test_verify_flags_stale_slot_table(sec2):
    p = run_pipeline(sec2, 3)
    stale = dict(p.sched.realized)
    stale[("C0", 0)] = Slot(2, 1)
    bad = Schedule(
        p.sched.graph, p.sched.lam, p.sched.n_bits, dict(p.sched.cycle_of),
        stale, p.sched.fragments,
    )
    assert "recorded slots disagree with recomputation" in verify_schedule(bad)


def test_realized_slots_report_unready_operands(sec2):
    p = run_pipeline(sec2, 3)
    cycle_of = dict(p.sched.cycle_of, E0=1, E1=1, E2=1)
    _, problems = realized_slots(p.sched.graph, p.sched.n_bits, cycle_of)
    assert any("operand ready in cycle" in m for m in problems) or any(
        "deeper than" in m for m in problems
    )


def test_execution_never_exceeds_the_chaining_budget(sec2, fig3, sat):
    for graph in (sec2, fig3, sat):
        p = run_pipeline(graph, 3)
        for op in p.transformed.ops:
            if op.kind is OpKind.ADD:
                for i in range(op.width):
                    slot = p.sched.realized[(op.id, i)]
                    assert 1 <= slot.depth <= p.n_bits
