"""Command line front end.

Exit codes are the machine-readable verdict channel:

    0  success / both-consensus verdicts (Out0, Out1) / sweep fully classified
    1  parse or validation failure
    2  machine still running (cm-run), or did not halt within the budget
    3  NoOutput verdict / sweep found a witness / monitors flagged a trace
    4  Unknown verdict / sweep inconclusive / certificate inconclusive
    5  configuration is not initial for the protocol

All randomness sits behind --seed (default 0), so identical invocations
produce identical bytes.
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter
from pathlib import Path

from . import formats, reduction
from .core import ParseError, Protocol, UdppError, is_initial, validate_protocol
from .counter import cm_run
from .exploration import (
    ExplorationLimits,
    Verdict,
    VERDICT_BOUNDED_OK,
    VERDICT_INCONCLUSIVE,
    VERDICT_WITNESS,
    bottom_sccs,
    check_well_specification,
    classify_graph,
    concretize_path,
    cycle_through,
    explore,
    random_fair_run,
    shortest_path,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_RUNNING = 2
EXIT_WITNESS = 3
EXIT_INCONCLUSIVE = 4
EXIT_NOT_INITIAL = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"error: {message}\n")


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_protocol(path: str) -> Protocol:
    protocol = formats.parse_protocol(_read(path))
    problems = validate_protocol(protocol)
    if problems:
        raise UdppError(f"{path}: " + "; ".join(problems))
    return protocol


def _load_config(path: str, protocol: Protocol):
    config = formats.parse_configuration(_read(path))
    unknown = sorted(config.active_states() - protocol.state_set)
    if unknown:
        raise UdppError(f"{path}: unknown states {', '.join(unknown)}")
    return config


def _cmd_cm_run(args) -> int:
    machine = formats.parse_machine(_read(args.machine))
    result = cm_run(machine, args.max_steps)
    if result.halted:
        print(f"halted after {result.steps} steps")
        return EXIT_OK
    print(f"still running at {result.final}")
    return EXIT_RUNNING


def _cmd_compile(args) -> int:
    machine = formats.parse_machine(_read(args.machine))
    protocol = reduction.compile_machine(machine)
    _emit(formats.format_protocol(protocol), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    protocol = _load_protocol(args.protocol)
    config = _load_config(args.config, protocol)
    trace = random_fair_run(protocol, config, args.seed, args.steps)
    text = formats.format_trace(protocol, trace)
    if len(trace) < args.steps:
        text += f"\n# deadlock after {len(trace)} steps\n"
    else:
        text += f"\n# stopped at the step limit ({args.steps})\n"
    _emit(text, args.out)
    return EXIT_OK


def _verdict_exit(verdict: Verdict) -> int:
    if verdict in (Verdict.OUT0, Verdict.OUT1):
        return EXIT_OK
    if verdict is Verdict.NO_OUTPUT:
        return EXIT_WITNESS
    return EXIT_INCONCLUSIVE


def _print_no_output_evidence(protocol: Protocol, config, graph) -> None:
    mixed = None
    by_value: dict[int, frozenset] = {}
    for component in bottom_sccs(graph):
        values = {protocol.output[q] for node in component for q in node.active_states()}
        if len(values) != 1:
            mixed = component
            break
        by_value.setdefault(values.pop(), component)
    if mixed is not None:
        target = mixed
        print("# evidence: reachable bottom component with mixed opinions")
    else:
        target = by_value[0]
        print("# evidence: conflicting stable consensuses are reachable;")
        print("# the trace below leads into an output-0 component")
    path = shortest_path(graph, graph.root, frozenset(target))
    assert path is not None
    stem = concretize_path(protocol, config, path)
    print("# stem")
    print(formats.format_trace(protocol, stem).rstrip("\n"))
    loop = cycle_through(graph, path[-1])
    if loop is not None:
        cycle = concretize_path(protocol, stem.final, loop)
        print("# cycle")
        print(formats.format_trace(protocol, cycle).rstrip("\n"))
    else:
        print("# deadlock: the component is a single stuck configuration")


def _cmd_classify(args) -> int:
    protocol = _load_protocol(args.protocol)
    config = _load_config(args.config, protocol)
    if config.total() == 0:
        raise UdppError("classification needs at least one agent")
    if not is_initial(protocol, config):
        print("error: configuration is not initial for this protocol", file=sys.stderr)
        return EXIT_NOT_INITIAL
    if args.certificate == "sigma":
        if not args.machine:
            raise UdppError("--certificate sigma needs --machine <file>")
        machine = formats.parse_machine(_read(args.machine))
        compiled = reduction.compile_machine(machine)
        if not _same_protocol(compiled, protocol):
            raise UdppError("protocol file does not match the compiled machine")
        try:
            trace = reduction.replay_halting_run(machine, config)
        except reduction.StuckReplay as exc:
            print(f"Unknown(certificate replay failed: {exc})")
            return EXIT_INCONCLUSIVE
        oc = reduction.certificate_verdict(compiled, trace)
        print(oc.describe())
        if oc.verdict is Verdict.NO_OUTPUT:
            print(f"# certified by a scripted run of {len(trace)} steps into a deadlock")
            print("# with both opinions still present")
        return _verdict_exit(oc.verdict)
    limits = ExplorationLimits(max_nodes=args.max_nodes, max_depth=args.max_depth)
    graph = explore(protocol, config, limits)
    oc = classify_graph(protocol, graph)
    print(oc.describe())
    if oc.verdict is Verdict.NO_OUTPUT:
        _print_no_output_evidence(protocol, config, graph)
    return _verdict_exit(oc.verdict)


def _same_protocol(a: Protocol, b: Protocol) -> bool:
    return (
        set(a.states) == set(b.states)
        and a.initial == b.initial
        and dict(a.output) == dict(b.output)
        and Counter((r.pre, r.guard, r.post) for r in a.rules)
        == Counter((r.pre, r.guard, r.post) for r in b.rules)
    )


def _cmd_sweep(args) -> int:
    protocol = _load_protocol(args.protocol)
    limits = ExplorationLimits(max_nodes=args.max_nodes)
    report = check_well_specification(protocol, args.max_agents, args.max_colors, limits)
    for line in report.lines():
        print(line)
    if report.verdict == VERDICT_WITNESS:
        return EXIT_WITNESS
    if report.verdict == VERDICT_INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    assert report.verdict == VERDICT_BOUNDED_OK
    return EXIT_OK


def _witness_steps(args, machine) -> int:
    if args.k is not None:
        return args.k
    probe = cm_run(machine, args.max_steps)
    if not probe.halted:
        raise reduction.NotHalting(f"machine did not halt within {args.max_steps} steps")
    return max(probe.steps, 1)


def _cmd_witness(args) -> int:
    machine = formats.parse_machine(_read(args.machine))
    try:
        config = reduction.build_witness(machine, _witness_steps(args, machine))
    except reduction.NotHalting as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNNING
    _emit(formats.format_configuration(config) + "\n", args.out)
    return EXIT_OK


def _cmd_replay(args) -> int:
    machine = formats.parse_machine(_read(args.machine))
    protocol = reduction.compile_machine(machine)
    try:
        if args.witness:
            config = formats.parse_configuration(_read(args.witness))
        else:
            config = reduction.build_witness(machine, _witness_steps(args, machine))
    except reduction.NotHalting as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNNING
    trace = reduction.replay_halting_run(machine, config)
    oc = reduction.certificate_verdict(protocol, trace)
    text = formats.format_trace(protocol, trace)
    text += f"\n# terminal: deadlock after {len(trace)} steps\n"
    opinions = sorted({protocol.output[q] for q in trace.final.active_states()})
    text += f"# active opinions at the deadlock: {opinions}\n"
    text += f"# verdict: {oc.describe()}\n"
    _emit(text, args.out)
    return EXIT_WITNESS if oc.verdict is Verdict.NO_OUTPUT else EXIT_INCONCLUSIVE


def _cmd_monitors(args) -> int:
    machine = formats.parse_machine(_read(args.machine))
    protocol = reduction.compile_machine(machine)
    trace = formats.parse_trace(protocol, _read(args.trace))
    selected = reduction.ALL_MONITORS
    if args.only:
        selected = tuple(name.strip() for name in args.only.split(","))
        unknown = set(selected) - set(reduction.ALL_MONITORS)
        if unknown:
            raise UdppError(f"unknown monitors: {', '.join(sorted(unknown))}")
    violations = reduction.run_monitors(protocol, trace, selected)
    for violation in violations:
        print(violation)
    print(f"{len(violations)} violations")
    return EXIT_OK if not violations else EXIT_WITNESS


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="udpp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cm-run", help="run a counter machine from (1, 0, 0)")
    p.add_argument("machine")
    p.add_argument("--max-steps", type=int, default=100_000)
    p.set_defaults(func=_cmd_cm_run)

    p = sub.add_parser("compile", help="compile a counter machine into a protocol")
    p.add_argument("machine")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("simulate", help="seeded random fair run")
    p.add_argument("protocol")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("classify", help="stable-consensus verdict for one configuration")
    p.add_argument("protocol")
    p.add_argument("config")
    p.add_argument("--max-nodes", type=int, default=100_000)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--certificate", choices=["explore", "sigma"], default="explore")
    p.add_argument("--machine", help="machine file, required with --certificate sigma")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("sweep", help="classify all small initial configurations")
    p.add_argument("protocol")
    p.add_argument("--max-agents", type=int, required=True)
    p.add_argument("--max-colors", type=int, required=True)
    p.add_argument("--max-nodes", type=int, default=100_000)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("witness", help="build the halting witness configuration")
    p.add_argument("machine")
    p.add_argument("--k", type=int, default=None, help="step bound; default: steps to halt")
    p.add_argument("--max-steps", type=int, default=100_000, help="halting probe budget")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_witness)

    p = sub.add_parser("replay-sigma", help="scripted witness run down to a deadlock")
    p.add_argument("machine")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--witness", help="start from this configuration file instead of building one")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("monitors", help="run trace discipline monitors")
    p.add_argument("machine")
    p.add_argument("trace")
    p.add_argument("--only", help="comma-separated monitor names")
    p.set_defaults(func=_cmd_monitors)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UdppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
