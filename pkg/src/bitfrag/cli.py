"""Command line driver.

Parses a design, lowers it to adds, cores, and glue, fragments the adds
so a latency-bound schedule meets the width-independent cycle estimate,
and reports timing, schedule, and datapath costs.  All emissions are
deterministic byte for byte for a given input and options.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cost import costs
from .dfg import ValidationError
from .dsl import ParseError, emit, emit_dot, parse
from .fragmenter import (
    InfeasibleError,
    analyze,
    bucket_fragment,
    fragment,
)
from .kernel import KernelError, extract_kernel
from .scheduler import ScheduleError, schedule
from .simulator import SimulationError, check_equiv
from .timing import TimingError, bit_arrivals, critical_path, estimate_cycle

EMISSIONS = ("report", "transformed", "schedule", "dot", "arrivals")

_SUFFIX = {
    "report": ".json",
    "transformed": ".dfg",
    "schedule": ".schedule.txt",
    "dot": ".dot",
    "arrivals": ".arrivals.txt",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitfrag",
        description=(
            "Fragment the additive operations of a dataflow design at the "
            "bit level so a time-constrained schedule reaches a clock cycle "
            "independent of operation widths."
        ),
    )
    parser.add_argument("input", type=Path, help="design file to optimize")
    parser.add_argument(
        "--latency",
        type=int,
        required=True,
        metavar="N",
        help="schedule length in cycles",
    )
    parser.add_argument(
        "--nbits",
        type=int,
        metavar="K",
        help="bits of chaining per cycle (default: critical time / latency)",
    )
    parser.add_argument(
        "--core-delay",
        type=int,
        default=0,
        metavar="D",
        help="multiplier core delay in adder-bit units (default 0)",
    )
    parser.add_argument(
        "--emit",
        action="append",
        choices=EMISSIONS,
        metavar="WHAT",
        help=f"artifact to produce, repeatable; one of {', '.join(EMISSIONS)} "
        "(default: report)",
    )
    parser.add_argument(
        "--seed", type=int, default=0, help="seed for random equivalence vectors"
    )
    parser.add_argument(
        "--check-equiv",
        action="store_true",
        help="prove the scheduled design equivalent to the input",
    )
    parser.add_argument(
        "--bucket-fill",
        action="store_true",
        help="tile adds with the per-cycle bucket heuristic instead of "
        "per-bit windows",
    )
    parser.add_argument(
        "--out",
        type=Path,
        metavar="DIR",
        help="write artifacts into DIR instead of stdout",
    )
    return parser


def _schedule_text(sched) -> str:
    lines = []
    frag_of = {f.id: f for parts in sched.fragments.values() for f in parts}
    loads = sched.loads()
    for cycle in range(1, sched.lam + 1):
        units = [u for u in sched.cycle_of if sched.cycle_of[u] == cycle]
        lines.append(f"cycle {cycle}: {loads[cycle]} adder bits")
        for uid in units:
            op = sched.graph.op(uid)
            frag = frag_of.get(uid)
            if frag is not None:
                lines.append(
                    f"  {uid}: {frag.parent}[{frag.hi}:{frag.lo}] "
                    f"width {op.width}"
                )
            else:
                lines.append(f"  {uid}: {op.kind.name.lower()} width {op.width}")
    return "\n".join(lines) + "\n"


def _arrivals_text(graph, core_delay: int) -> str:
    table = bit_arrivals(graph, core_delay)
    lines = [f"{op}[{bit}] = {t}" for (op, bit), t in sorted(table.items())]
    return "\n".join(lines) + "\n"


def _report(design, lam, n_bits, crit, sched, cost, equiv) -> dict:
    fragments = {
        parent: [
            {
                "id": f.id,
                "lo": f.lo,
                "hi": f.hi,
                "asap": f.asap_cycle,
                "alap": f.alap_cycle,
                "cycle": sched.cycle_of[f.id],
            }
            for f in parts
        ]
        for parent, parts in sched.fragments.items()
    }
    cycles = {
        str(c): sorted(
            (u for u, uc in sched.cycle_of.items() if uc == c),
            key=lambda u: [op.id for op in sched.graph.ops].index(u),
        )
        for c in range(1, lam + 1)
    }
    report = {
        "design": design.name,
        "lambda": lam,
        "n_bits": n_bits,
        "critical_path": {"ops": list(crit.ops), "time": crit.time},
        "fragments": fragments,
        "schedule": {
            "cycles": cycles,
            "loads": {str(c): n for c, n in sorted(cost.loads.items())},
        },
        "costs": {
            "lanes": [
                {
                    "parent": lane.parent,
                    "width": lane.width,
                    "fragments": list(lane.fragment_ids),
                }
                for lane in cost.lanes
            ],
            "cores": [{"id": cid, "width": w} for cid, w in cost.cores],
            "registers": {
                "per_boundary": {
                    str(b): n for b, n in sorted(cost.stored_per_boundary.items())
                },
                "max": cost.max_stored,
                "bindings": [
                    {
                        "kind": r.kind,
                        "width": r.width,
                        "signals": list(r.signals),
                        "fan_in": r.fan_in,
                    }
                    for r in cost.registers
                ],
            },
            "port_muxes": [
                {
                    "lane": m.lane,
                    "port": m.port,
                    "fan_in": m.fan_in,
                    "width": m.width,
                }
                for m in cost.port_muxes
            ],
            "carry_fan_in": dict(cost.carry_fan_in),
        },
    }
    if equiv is not None:
        entry = {
            "strategy": equiv.strategy,
            "checked": equiv.checked,
            "equivalent": equiv.equivalent,
        }
        if not equiv.equivalent:
            entry["counterexample"] = equiv.counterexample
            entry["mismatch"] = {
                "output": equiv.mismatch[0],
                "got": equiv.mismatch[1],
                "want": equiv.mismatch[2],
            }
        report["equiv"] = entry
    return report


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    emissions = args.emit or ["report"]

    try:
        text = args.input.read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        design = parse(text)
        kernel, _trace = extract_kernel(design)
        crit = critical_path(kernel, args.core_delay)
        n_bits = args.nbits or estimate_cycle(kernel, args.latency, args.core_delay)
        mobility = analyze(kernel, n_bits, args.latency)
        tile = bucket_fragment if args.bucket_fill else fragment
        fragments, transformed = tile(kernel, mobility)
        sched = schedule(transformed, fragments, args.latency, n_bits)
        cost = costs(sched)
        equiv = None
        if args.check_equiv:
            equiv = check_equiv(design, sched, seed=args.seed)
    except (
        ParseError,
        ValidationError,
        KernelError,
        TimingError,
        InfeasibleError,
        ScheduleError,
        SimulationError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    artifacts: dict[str, str] = {}
    for what in emissions:
        if what == "report":
            payload = _report(
                design, args.latency, n_bits, crit, sched, cost, equiv
            )
            artifacts[what] = json.dumps(payload, indent=2) + "\n"
        elif what == "transformed":
            artifacts[what] = emit(transformed)
        elif what == "schedule":
            artifacts[what] = _schedule_text(sched)
        elif what == "dot":
            artifacts[what] = emit_dot(transformed)
        elif what == "arrivals":
            artifacts[what] = _arrivals_text(kernel, args.core_delay)

    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        for what, content in artifacts.items():
            path = args.out / f"{design.name}{_SUFFIX[what]}"
            path.write_text(content)
    else:
        for what in emissions:
            sys.stdout.write(artifacts[what])

    if equiv is not None and not equiv.equivalent:
        name, got, want = equiv.mismatch
        print(
            f"equivalence failed on output {name}: got {got}, expected {want} "
            f"for inputs {equiv.counterexample}",
            file=sys.stderr,
        )
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
