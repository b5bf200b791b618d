"""Compiling two-counter machines into protocols whose well-specification
tracks the halting problem.

The construction simulates the machine with one control agent walking over
instruction states while two designated shadow agents own the colors that
all agents representing counter x (respectively y) must carry. Zero tests
retire the shadow's color and draw a fresh one from a reservoir of
single-use colors, so cheating leaves a wrongly colored counter agent
behind forever, and dedicated violation rules eventually catch it.

States are strings "main@tag". The tag records which initial state an agent
started in and is never rewritten by any compiled rule. Main-state naming:

    i.3       instruction 3            i'.3      zero-test intermediate
    x, y      counter value holders    xbar.+    shadow of x, command flag +
    setup.x   setup chain              R1, R2    reservoirs (the initial states)
    sink1     drains reservoirs        sink2     broadcast after a violation
    garbage   inert leftovers

Flags on shadows: "+" increment pending, "-" decrement pending, "=0" not
known nonzero, ">0" observed nonzero.
"""

from __future__ import annotations

from .core import (
    Configuration,
    Guard,
    NotEnabled,
    Protocol,
    Rule,
    StateId,
    Trace,
    TransitionInstance,
    UdppError,
    enabled_instances,
    fire,
    is_initial,
)
from .counter import (
    CmConfig,
    CounterMachine,
    Dec,
    Goto,
    Halt,
    Inc,
    cm_step,
    next_instr,
    resolve_index,
)
from .exploration import OutputClass, Verdict

TAGS = ("R1", "R2")
FLAG_PLUS, FLAG_MINUS, FLAG_ZERO, FLAG_POS = "+", "-", "=0", ">0"
FLAGS = (FLAG_PLUS, FLAG_MINUS, FLAG_ZERO, FLAG_POS)
COUNTERS = ("x", "y")
RES1, RES2 = "R1", "R2"
SINK1, SINK2, GARBAGE = "sink1", "sink2", "garbage"


class NotHalting(UdppError):
    """The machine did not halt within the requested step budget."""


class StuckReplay(UdppError):
    """A scripted step was not enabled; a compiler or witness bug."""


def instr_state(m: int) -> str:
    return f"i.{m}"


def intermediate_state(m: int) -> str:
    return f"i'.{m}"


def shadow_state(counter: str, flag: str) -> str:
    return f"{counter}bar.{flag}"


def setup_state(counter: str) -> str:
    return f"setup.{counter}"


def tagged(main: str, tag: str) -> StateId:
    return f"{main}@{tag}"


def main_of(state: StateId) -> str:
    return state.rsplit("@", 1)[0]


def tag_of(state: StateId) -> str:
    return state.rsplit("@", 1)[1]


def is_shadow(main: str) -> bool:
    return main.startswith("xbar.") or main.startswith("ybar.")


def shadow_counter(main: str) -> str:
    return main[0]


def is_instr(main: str) -> bool:
    return main.startswith("i.")


# Main-level rule family: (label, (pre, pre'), guard spec, (post, post')).
_FamilySpec = tuple[str, tuple[str, str], str, tuple[str, str]]


def _main_families(machine: CounterMachine, mains: list[str]) -> list[_FamilySpec]:
    specs: list[_FamilySpec] = []
    for c in COUNTERS:
        for flag in FLAGS:
            specs.append(
                (f"CounterColorViolation[{c},{flag}]", (shadow_state(c, flag), c), "neq", (SINK2, SINK2))
            )
    # Two x-shadows can only coexist after a duplicated setup; catching the x
    # pair is enough because a duplicated setup always duplicates x first.
    for f1 in FLAGS:
        for f2 in FLAGS:
            specs.append(
                (
                    f"ControlStateViolation[{f1},{f2}]",
                    (shadow_state("x", f1), shadow_state("x", f2)),
                    "any",
                    (SINK2, SINK2),
                )
            )
    for res in (RES1, RES2):
        specs.append((f"ConvertToSink1[{res}]", (SINK1, res), "any", (SINK1, SINK1)))
    for q in mains:
        specs.append((f"ConvertToSink2[{q}]", (SINK2, q), "any", (SINK2, SINK2)))

    entry = resolve_index(machine, 1)
    specs.append(("Setup1", (RES1, RES2), "any", (setup_state("x"), SINK1)))
    specs.append(
        ("Setup2", (setup_state("x"), RES2), "any", (setup_state("y"), shadow_state("x", FLAG_ZERO)))
    )
    specs.append(
        ("Setup3", (setup_state("y"), RES2), "any", (instr_state(entry), shadow_state("y", FLAG_ZERO)))
    )

    for c in COUNTERS:
        specs.append(
            (f"Increment[{c}]", (shadow_state(c, FLAG_PLUS), RES1), "eq", (shadow_state(c, FLAG_POS), c))
        )
        specs.append(
            (f"Decrement[{c}]", (shadow_state(c, FLAG_MINUS), c), "eq", (shadow_state(c, FLAG_ZERO), GARBAGE))
        )
        specs.append(
            (f"DetectPositive[{c}]", (shadow_state(c, FLAG_ZERO), c), "eq", (shadow_state(c, FLAG_POS), c))
        )

    for m, ins in enumerate(machine.instrs, 1):
        if isinstance(ins, Inc):
            nxt = next_instr(machine, m)
            for flag in (FLAG_ZERO, FLAG_POS):
                specs.append(
                    (
                        f"Inc[{m},{flag}]",
                        (instr_state(m), shadow_state(ins.counter, flag)),
                        "any",
                        (instr_state(nxt), shadow_state(ins.counter, FLAG_PLUS)),
                    )
                )
        elif isinstance(ins, Dec):
            nxt = next_instr(machine, m)
            target = resolve_index(machine, ins.target)
            c = ins.counter
            specs.append(
                (
                    f"Dec[{m}]",
                    (instr_state(m), shadow_state(c, FLAG_POS)),
                    "any",
                    (instr_state(nxt), shadow_state(c, FLAG_MINUS)),
                )
            )
            specs.append(
                (
                    f"ZeroTest1[{m}]",
                    (instr_state(m), shadow_state(c, FLAG_ZERO)),
                    "any",
                    (intermediate_state(m), GARBAGE),
                )
            )
            specs.append(
                (
                    f"ZeroTest2[{m}]",
                    (intermediate_state(m), RES2),
                    "any",
                    (instr_state(target), shadow_state(c, FLAG_ZERO)),
                )
            )
        elif isinstance(ins, Halt):
            specs.append(
                (f"CauseDeadlock[{m}]", (instr_state(m), SINK1), "any", (instr_state(m), GARBAGE))
            )
        # goto instructions compile to nothing; next_instr chases them away
    return specs


def compile_machine(machine: CounterMachine) -> Protocol:
    """Compile a machine into a protocol over tagged states.

    Every main-level family is lifted to all four tag pairs with tags copied
    through unchanged, and "either case" families are split into an eq and a
    neq rule. The one exception: on tag pair (R2, R2) with equal colors the
    input-violation rule replaces whatever the lifting would have produced,
    since two same-colored agents from R2 prove the input was malformed.

    Only the two reservoirs are initial, and only they carry opinion 1.
    """
    mains = _main_states(machine)
    rules: list[Rule] = []
    for p in mains:
        for p2 in mains:
            rules.append(
                Rule(
                    (tagged(p, "R2"), tagged(p2, "R2")),
                    Guard.EQ,
                    (tagged(SINK2, "R2"), tagged(SINK2, "R2")),
                    label=f"InputViolation[{p},{p2}]",
                )
            )
    for label, (pm, pm2), guard_spec, (qm, qm2) in _main_families(machine, mains):
        if guard_spec == "any":
            guards: tuple[Guard, ...] = (Guard.EQ, Guard.NEQ)
        elif guard_spec == "eq":
            guards = (Guard.EQ,)
        else:
            guards = (Guard.NEQ,)
        for guard in guards:
            for t1 in TAGS:
                for t2 in TAGS:
                    if guard is Guard.EQ and t1 == "R2" and t2 == "R2":
                        continue
                    rules.append(
                        Rule(
                            (tagged(pm, t1), tagged(pm2, t2)),
                            guard,
                            (tagged(qm, t1), tagged(qm2, t2)),
                            label=f"{label}:{guard.value}@{t1}{t2}",
                        )
                    )
    states = [tagged(main, tag) for main in mains for tag in TAGS]
    output = {s: 1 if main_of(s) in (RES1, RES2) else 0 for s in states}
    initial = (tagged(RES1, "R1"), tagged(RES2, "R2"))
    return Protocol.make(states, rules, initial, output)


def _main_states(machine: CounterMachine) -> list[str]:
    mains = [instr_state(m) for m in range(1, len(machine.instrs) + 1)]
    mains += [
        intermediate_state(m)
        for m, ins in enumerate(machine.instrs, 1)
        if isinstance(ins, Dec)
    ]
    mains += list(COUNTERS)
    mains += [shadow_state(c, flag) for c in COUNTERS for flag in FLAGS]
    mains += [setup_state(c) for c in COUNTERS]
    mains += [RES1, RES2, SINK1, SINK2, GARBAGE]
    return mains


def _halting_run_stats(machine: CounterMachine, k: int) -> tuple[int, int]:
    """(steps to halt, zero-branch count) within k steps, else NotHalting."""
    current = CmConfig(1, 0, 0)
    zero_branches = 0
    for taken in range(k + 1):
        ins = machine.instrs[current.pc - 1]
        if isinstance(ins, Halt):
            return taken, zero_branches
        if taken == k:
            break
        if isinstance(ins, Dec) and current.counter(ins.counter) == 0:
            zero_branches += 1
        following = cm_step(machine, current)
        assert following is not None
        current = following
    raise NotHalting(f"machine did not halt within {k} steps")


def build_witness(machine: CounterMachine, k: int) -> Configuration:
    """Initial configuration from which the scripted run reaches a deadlock
    with disagreeing opinions, given that the machine halts within k steps.

    Per color the witness holds 2k+7 agents in reservoir R1 and exactly one
    in R2, so no color repeats inside R2 and every color that ever becomes a
    shadow color has ample same-colored R1 backing for increments. The color
    count is 2k, raised to zero-branches+3 when 2k cannot even cover the
    three setup draws plus one fresh color per zero test (only possible for
    k <= 2).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    _, zero_branches = _halting_run_stats(machine, k)
    colors = max(2 * k, zero_branches + 3)
    counts: dict[tuple[StateId, int], int] = {}
    for color in range(colors):
        counts[(tagged(RES1, "R1"), color)] = 2 * k + 7
        counts[(tagged(RES2, "R2"), color)] = 1
    return Configuration(counts)


class _Replayer:
    """Drives one deterministic execution of a compiled protocol."""

    def __init__(self, machine: CounterMachine, start: Configuration) -> None:
        self.machine = machine
        self.protocol = compile_machine(machine)
        self.by_label = {rule.label: rule for rule in self.protocol.rules}
        self.current = start
        self.steps: list[tuple[TransitionInstance, Configuration]] = []

    def colors_in(self, state: StateId) -> list[int]:
        return [color for (q, color), _ in self.current.items() if q == state]

    def fire_label(self, label: str, d: int, e: int) -> None:
        rule = self.by_label.get(label)
        if rule is None:
            raise StuckReplay(f"compiled protocol has no rule labelled '{label}'")
        try:
            after = fire(self.protocol, self.current, TransitionInstance(rule, d, e))
        except (NotEnabled, ValueError) as exc:
            raise StuckReplay(f"scripted step '{label}' with colors ({d}, {e}): {exc}") from exc
        self.steps.append((TransitionInstance(rule, d, e), after))
        self.current = after

    def fire_family(self, family: str, tags: tuple[str, str], d: int, e: int) -> None:
        guard = "eq" if d == e else "neq"
        self.fire_label(f"{family}:{guard}@{tags[0]}{tags[1]}", d, e)

    def draw_fresh(self) -> int:
        supply = self.colors_in(tagged(RES2, "R2"))
        if not supply:
            raise StuckReplay("fresh-color reservoir R2 is exhausted")
        return supply[0]


def replay_halting_run(machine: CounterMachine, start: Configuration) -> Trace:
    """Scripted execution from a witness configuration down to a deadlock.

    Performs the setup chain, the faithful simulation of the machine until
    its halt instruction, then converts the remaining R2 agents into sink1,
    empties sink1 through the halt control agent, and finally settles any
    still-fireable nonzero detections. The terminal configuration is checked
    to enable nothing; StuckReplay on any deviation.
    """
    r = _Replayer(machine, start)
    if not is_initial(r.protocol, start):
        raise StuckReplay("start configuration occupies non-initial states")

    reservoir = r.colors_in(tagged(RES1, "R1"))
    supply = r.colors_in(tagged(RES2, "R2"))
    if not reservoir or not supply:
        raise StuckReplay("start configuration is missing a reservoir")
    control = reservoir[0]
    r.fire_family("Setup1", ("R1", "R2"), control, supply[0])
    sx = r.draw_fresh()
    r.fire_family("Setup2", ("R1", "R2"), control, sx)
    sy = r.draw_fresh()
    r.fire_family("Setup3", ("R1", "R2"), control, sy)
    shadow_color = {"x": sx, "y": sy}
    shadow_flag = {"x": FLAG_ZERO, "y": FLAG_ZERO}

    counters = {"x": 0, "y": 0}
    m = resolve_index(machine, 1)
    while True:
        ins = machine.instrs[m - 1]
        if isinstance(ins, Halt):
            break
        if isinstance(ins, Goto):
            raise StuckReplay("control agent reached an unresolved goto state")
        c = ins.counter
        s = shadow_color[c]
        if isinstance(ins, Inc):
            r.fire_family(f"Inc[{m},{shadow_flag[c]}]", ("R1", "R2"), control, s)
            r.fire_family(f"Increment[{c}]", ("R2", "R1"), s, s)
            shadow_flag[c] = FLAG_POS
            counters[c] += 1
            m = next_instr(machine, m)
        elif counters[c] > 0:
            if shadow_flag[c] == FLAG_ZERO:
                r.fire_family(f"DetectPositive[{c}]", ("R2", "R1"), s, s)
                shadow_flag[c] = FLAG_POS
            r.fire_family(f"Dec[{m}]", ("R1", "R2"), control, s)
            r.fire_family(f"Decrement[{c}]", ("R2", "R1"), s, s)
            shadow_flag[c] = FLAG_ZERO
            counters[c] -= 1
            m = next_instr(machine, m)
        else:
            if shadow_flag[c] != FLAG_ZERO:
                raise StuckReplay("shadow flag disagrees with the mirrored counter")
            r.fire_family(f"ZeroTest1[{m}]", ("R1", "R2"), control, s)
            fresh = r.draw_fresh()
            r.fire_family(f"ZeroTest2[{m}]", ("R1", "R2"), control, fresh)
            shadow_color[c] = fresh
            m = resolve_index(machine, ins.target)
    halt_at = m

    # Drain R2 so the setup chain can never restart. Every remaining R2 agent
    # has a color no sink1 agent shares (R2 colors are unique), so the neq
    # variant always applies.
    while True:
        remaining = r.colors_in(tagged(RES2, "R2"))
        if not remaining:
            break
        target = remaining[0]
        picked = None
        for tag in TAGS:
            for d in r.colors_in(tagged(SINK1, tag)):
                if d != target or tag != "R2":
                    picked = (tag, d)
                    break
            if picked:
                break
        if picked is None:
            raise StuckReplay("no sink1 agent available to absorb the R2 reservoir")
        r.fire_family(f"ConvertToSink1[{RES2}]", (picked[0], "R2"), picked[1], target)

    # Empty sink1 through the halted control agent.
    while True:
        found = None
        for tag in TAGS:
            colors = r.colors_in(tagged(SINK1, tag))
            if colors:
                found = (tag, colors[0])
                break
        if found is None:
            break
        r.fire_family(f"CauseDeadlock[{halt_at}]", ("R1", found[0]), control, found[1])

    # A counter left nonzero with its shadow flag at =0 can still be detected
    # once; settle such detections so that nothing at all remains enabled.
    for c in COUNTERS:
        if counters[c] > 0 and shadow_flag[c] == FLAG_ZERO:
            s = shadow_color[c]
            r.fire_family(f"DetectPositive[{c}]", ("R2", "R1"), s, s)
            shadow_flag[c] = FLAG_POS

    leftovers = enabled_instances(r.protocol, r.current)
    if leftovers:
        raise StuckReplay(
            f"terminal configuration still enables {len(leftovers)} instance(s), e.g. {leftovers[0]}"
        )
    return Trace(start, tuple(r.steps))


def certificate_verdict(protocol: Protocol, trace: Trace) -> OutputClass:
    """Verdict certified by one concrete run.

    A reachable deadlock whose active states carry both opinions pins the
    start configuration to NoOutput: the fair execution that reaches the
    deadlock and stutters there never converges. Anything else certifies
    nothing on its own, so the verdict stays Unknown.
    """
    final = trace.final
    if enabled_instances(protocol, final):
        return OutputClass(Verdict.UNKNOWN, "final configuration is not a deadlock")
    opinions = {protocol.output[q] for q in final.active_states()}
    if opinions == {0, 1}:
        return OutputClass(Verdict.NO_OUTPUT)
    return OutputClass(Verdict.UNKNOWN, f"deadlock is unanimous for {opinions}")


MONITOR_FRESH = "fresh-shadow-entry"
MONITOR_COUNTER = "counter-color-discipline"
MONITOR_SINK1 = "sink1-removal-discipline"
MONITOR_RESERVOIR = "reservoir-no-refill"
ALL_MONITORS = (MONITOR_FRESH, MONITOR_COUNTER, MONITOR_SINK1, MONITOR_RESERVOIR)


def _mains(rule: Rule) -> tuple[str, str, str, str]:
    return (
        main_of(rule.pre[0]),
        main_of(rule.pre[1]),
        main_of(rule.post[0]),
        main_of(rule.post[1]),
    )


def _is_increment(rule: Rule) -> bool:
    pm, pm2, qm, qm2 = _mains(rule)
    return (
        rule.guard is Guard.EQ
        and pm2 == RES1
        and qm2 in COUNTERS
        and pm == shadow_state(qm2, FLAG_PLUS)
        and qm == shadow_state(qm2, FLAG_POS)
    )


def _is_decrement(rule: Rule) -> bool:
    pm, pm2, qm, qm2 = _mains(rule)
    return (
        rule.guard is Guard.EQ
        and pm2 in COUNTERS
        and qm2 == GARBAGE
        and pm == shadow_state(pm2, FLAG_MINUS)
        and qm == shadow_state(pm2, FLAG_ZERO)
    )


def _is_sink2_broadcast(rule: Rule) -> bool:
    pm, _, qm, qm2 = _mains(rule)
    return pm == SINK2 and qm == SINK2 and qm2 == SINK2


def _is_halt_drain(rule: Rule) -> bool:
    pm, pm2, qm, qm2 = _mains(rule)
    return is_instr(pm) and pm == qm and pm2 == SINK1 and qm2 == GARBAGE


def _apply_unchecked(config: Configuration, instance: TransitionInstance) -> Configuration | None:
    """Fire without protocol membership checks; None when counts are short."""
    rule = instance.rule
    counts = dict(config.items())
    for state, color in ((rule.pre[0], instance.d), (rule.pre[1], instance.e)):
        left = counts.get((state, color), 0)
        if left < 1:
            return None
        counts[(state, color)] = left - 1
    for state, color in ((rule.post[0], instance.d), (rule.post[1], instance.e)):
        counts[(state, color)] = counts.get((state, color), 0) + 1
    return Configuration(counts)


def run_monitors(
    protocol: Protocol, trace: Trace, monitors: tuple[str, ...] = ALL_MONITORS
) -> list[str]:
    """Streaming discipline checks over a trace of a compiled protocol.

    Checked per step, one violation string each:

    - every step uses a rule of the protocol, was enabled, and produced the
      recorded configuration (forged steps fail here);
    - fresh-shadow-entry: an agent entering a shadow state comes from R2 and
      its color was never active outside the two reservoirs before;
    - counter-color-discipline: agents enter or leave a counter state only
      via the increment and decrement micro-steps, colored like the current
      shadow of that counter;
    - sink1-removal-discipline: agents leave sink1 only via the sink2
      broadcast or the halt-instruction drain;
    - reservoir-no-refill: no agent ever moves into R1 or R2.

    The last two hold on every real execution of a compiled protocol. The
    first two can be triggered by legitimate random scheduling (a premature
    zero branch is a valid fire that only later gets caught by the violation
    rules), so randomized testing normally restricts to the last two.
    """
    violations: list[str] = []
    current = trace.initial
    used_outside = {
        color for (q, color), _ in current.items() if main_of(q) not in (RES1, RES2)
    }
    for number, (instance, recorded) in enumerate(trace.steps, 1):
        rule = instance.rule
        where = f"step {number}"
        if rule not in protocol.rule_set:
            violations.append(f"{where}: rule is not part of the protocol: {rule}")
        computed = _apply_unchecked(current, instance)
        if computed is None:
            violations.append(f"{where}: instance was not enabled: {instance}")
        elif computed != recorded:
            violations.append(f"{where}: recorded configuration does not match the fired result")

        roles = (
            (main_of(rule.pre[0]), main_of(rule.post[0]), instance.d),
            (main_of(rule.pre[1]), main_of(rule.post[1]), instance.e),
        )
        for pre_main, post_main, color in roles:
            if MONITOR_FRESH in monitors and is_shadow(post_main) and not is_shadow(pre_main):
                if pre_main != RES2:
                    violations.append(
                        f"{where}: shadow state entered from '{pre_main}' instead of R2"
                    )
                elif color in used_outside:
                    violations.append(
                        f"{where}: shadow state entered with color {color}, already in play"
                    )
            if MONITOR_COUNTER in monitors:
                entering = post_main in COUNTERS and pre_main != post_main
                leaving = pre_main in COUNTERS and post_main != pre_main
                if entering or leaving:
                    which = post_main if entering else pre_main
                    ok_family = _is_increment(rule) if entering else _is_decrement(rule)
                    if not ok_family:
                        violations.append(
                            f"{where}: counter '{which}' agents moved outside the "
                            "increment/decrement micro-steps"
                        )
                    shadow_colors = {
                        col
                        for (q, col), _ in current.items()
                        if is_shadow(main_of(q)) and shadow_counter(main_of(q)) == which
                    }
                    if color not in shadow_colors:
                        violations.append(
                            f"{where}: counter '{which}' moved an agent of color {color}, "
                            f"not the shadow color"
                        )
            if MONITOR_SINK1 in monitors and pre_main == SINK1 and post_main != SINK1:
                if not (_is_sink2_broadcast(rule) or _is_halt_drain(rule)):
                    violations.append(
                        f"{where}: agent removed from sink1 by a rule that may not do so"
                    )
            if MONITOR_RESERVOIR in monitors and post_main in (RES1, RES2) and pre_main != post_main:
                violations.append(f"{where}: reservoir '{post_main}' gained an agent")

        current = recorded
        used_outside |= {
            color for (q, color), _ in current.items() if main_of(q) not in (RES1, RES2)
        }
    return violations
