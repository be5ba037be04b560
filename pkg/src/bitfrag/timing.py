"""Delay estimation in units of one 1-bit full-adder delay.

Every ADD bit costs one delta and chains on its lower neighbour, so an
isolated w-bit add finishes after w deltas and a chain of adds after
the sink width plus one delta per crossing (plus any least-significant
bits a crossing truncates away).  NOT/SELECT glue and constants are
free; the multiplier core is an opaque unit with a configurable delay.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

from .dfg import (
    CarryBit,
    CarryRef,
    Concat,
    ConstBit,
    DataFlowGraph,
    GLUE_KINDS,
    InputBit,
    OpBit,
    OpKind,
    Operand,
    ResultRef,
    bit_deps,
)

KERNEL_ONLY = "timing runs on kernel-extracted designs, found {kind} op {id}"


class TimingError(ValueError):
    pass


@dataclass(frozen=True)
class CriticalPath:
    ops: tuple[str, ...]
    time: int


def _check_kernel(graph: DataFlowGraph) -> None:
    for op in graph.ops:
        if op.kind not in (OpKind.ADD, OpKind.MULT_CORE) and op.kind not in GLUE_KINDS:
            raise TimingError(KERNEL_ONLY.format(kind=op.kind.name.lower(), id=op.id))


def bit_arrivals(graph: DataFlowGraph, core_delay: int = 0) -> dict[tuple[str, int], int]:
    """Arrival time of every result bit, inputs and constants at 0."""
    _check_kernel(graph)
    deps = bit_deps(graph)
    arrival: dict[tuple[str, int], int] = {}

    def of(ref) -> int:
        if isinstance(ref, OpBit):
            return arrival[(ref.op, ref.bit)]
        if isinstance(ref, CarryBit):
            return arrival[(ref.op, graph.op(ref.op).width - 1)]
        return 0  # input or constant

    for op in graph.ops:
        if op.kind is OpKind.MULT_CORE:
            worst = max(
                (of(r) for i in range(op.width) for r in deps[(op.id, i)]),
                default=0,
            )
            for i in range(op.width):
                arrival[(op.id, i)] = worst + core_delay
            continue
        cost = 1 if op.kind is OpKind.ADD else 0
        for i in range(op.width):
            arrival[(op.id, i)] = cost + max(
                (of(r) for r in deps[(op.id, i)]), default=0
            )
    return arrival


def critical_path(graph: DataFlowGraph, core_delay: int = 0) -> CriticalPath:
    """Longest bit chain, reported at operation granularity.

    Backtracks the arrival recurrence from the worst bit, walking
    through glue transparently and stopping at inputs or at the opaque
    multiplier core.
    """
    _check_kernel(graph)
    deps = bit_deps(graph)
    arrival = bit_arrivals(graph, core_delay)
    if not arrival:
        return CriticalPath((), 0)

    order = {op.id: k for k, op in enumerate(graph.ops)}

    def rank(ref) -> tuple:
        # Deterministic choice among equally late producers.
        if isinstance(ref, OpBit):
            return (0, order[ref.op], ref.bit)
        if isinstance(ref, CarryBit):
            return (1, order[ref.op], 0)
        return (2, 0, 0)

    def of(ref) -> int:
        if isinstance(ref, OpBit):
            return arrival[(ref.op, ref.bit)]
        if isinstance(ref, CarryBit):
            return arrival[(ref.op, graph.op(ref.op).width - 1)]
        return 0

    time = max(arrival.values())
    start = min(
        (key for key, t in arrival.items() if t == time),
        key=lambda key: (order[key[0]], key[1]),
    )

    path: list[str] = []
    cur: tuple[str, int] | None = start
    while cur is not None:
        op = graph.op(cur[0])
        if op.kind is OpKind.MULT_CORE:
            break
        if op.kind is OpKind.ADD and (not path or path[0] != op.id):
            path.insert(0, op.id)
        producers = [r for r in deps[cur] if not isinstance(r, (InputBit, ConstBit))]
        if not producers:
            break
        best = min(producers, key=lambda r: (-of(r), rank(r)))
        if of(best) == 0 and op.kind is OpKind.ADD:
            break  # remaining chain is input-fed
        if isinstance(best, CarryBit):
            cur = (best.op, graph.op(best.op).width - 1)
        else:
            cur = (best.op, best.bit)
    return CriticalPath(tuple(path), time)


def _edge_truncations(graph: DataFlowGraph, producer: str, consumer_id: str) -> list[int]:
    """lo offsets of every reference the consumer makes to the producer."""
    out: list[int] = []

    def scan(opnd: Operand) -> None:
        src = opnd.source
        if isinstance(src, Concat):
            for part in src.parts:
                scan(part)
        elif isinstance(src, ResultRef) and src.op == producer:
            out.append(opnd.lo)
        elif isinstance(src, CarryRef) and src.op == producer:
            out.append(graph.op(producer).width - 1)

    consumer = graph.op(consumer_id)
    for opnd in consumer.operands:
        scan(opnd)
    if isinstance(consumer.carry_in, CarryRef) and consumer.carry_in.op == producer:
        out.append(graph.op(producer).width - 1)
    return out


def path_time(graph: DataFlowGraph, path: list[str] | tuple[str, ...]) -> int:
    """Ripple time of a chain of adds.

    Counts the width of the last operation, then walking backward one
    delta per crossed operation, plus the truncated low bits whenever a
    crossed operation is wider than its successor.
    """
    if not path:
        raise TimingError("empty path")
    for op_id in path:
        if graph.op(op_id).kind is not OpKind.ADD:
            raise TimingError(f"path op {op_id} is not an add")
    time = graph.op(path[-1]).width
    for i in range(len(path) - 2, -1, -1):
        here, nxt = graph.op(path[i]), graph.op(path[i + 1])
        cuts = _edge_truncations(graph, path[i], path[i + 1])
        if not cuts:
            raise TimingError(f"{nxt.id} does not consume {here.id}")
        if here.width <= nxt.width:
            time += 1
        else:
            time += 1 + max(cuts)
    return time


def estimate_cycle(graph: DataFlowGraph, lam: int, core_delay: int = 0) -> int:
    """Clock cycle in delta units for a schedule of ``lam`` cycles."""
    if lam < 1:
        raise TimingError(f"latency must be at least 1 cycle, got {lam}")
    worst = critical_path(graph, core_delay).time
    return max(1, ceil(worst / lam))
