"""Population protocols with unordered data: model and exact pairwise semantics.

Agents are finite-state and carry an immutable color drawn from an infinite
domain that supports only equality tests. A configuration counts agents per
(state, color) pair; a rule rewrites the states of two agents at once,
guarded by whether their colors are equal or distinct. Firing never creates,
destroys, or recolors agents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Mapping

StateId = str
ColorId = int
CountKey = tuple[StateId, ColorId]


class UdppError(Exception):
    """Base class for errors raised by this package."""


class NotEnabled(UdppError):
    """Raised by :func:`fire` when the instance is not enabled; signals a scheduler bug."""


class ParseError(UdppError):
    """Syntax error in one of the text formats; carries the 1-based line number."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class Guard(Enum):
    """Color test attached to a rule."""

    EQ = "eq"
    NEQ = "neq"

    def holds(self, d: ColorId, e: ColorId) -> bool:
        return d == e if self is Guard.EQ else d != e


@dataclass(frozen=True)
class Rule:
    """A guarded pairwise rewrite ((p, p'), guard, (q, q')).

    Role positions are meaningful: the agent matched at pre[0] moves to
    post[0] and keeps its color, likewise at position 1. Symmetric behaviour
    must be written as two explicitly swapped rules. The label is display
    metadata and does not participate in equality.
    """

    pre: tuple[StateId, StateId]
    guard: Guard
    post: tuple[StateId, StateId]
    label: str | None = field(default=None, compare=False)

    def __str__(self) -> str:
        head = f"{self.label}: " if self.label else ""
        return (
            f"{head}({self.pre[0]}, {self.pre[1]}) {self.guard.value} "
            f"({self.post[0]}, {self.post[1]})"
        )


@dataclass(frozen=True)
class TransitionInstance:
    """A rule together with the colors chosen for its two roles.

    The colors must satisfy the rule's guard; this is checked at construction
    so an instance is well-formed by definition (enabledness at a particular
    configuration is a separate question).
    """

    rule: Rule
    d: ColorId
    e: ColorId

    def __post_init__(self) -> None:
        if not self.rule.guard.holds(self.d, self.e):
            raise ValueError(
                f"colors ({self.d}, {self.e}) do not satisfy guard '{self.rule.guard.value}'"
            )

    def __str__(self) -> str:
        return f"{self.rule} @ ({self.d}, {self.e})"


class Configuration:
    """Immutable finite-support count map (state, color) -> positive count.

    Zero entries are dropped at construction, so equality and hashing are
    structural. Items iterate in sorted key order, which keeps every consumer
    deterministic. Repeated keys in the input are summed.
    """

    __slots__ = ("_counts", "_hash")

    def __init__(
        self, counts: Mapping[CountKey, int] | Iterable[tuple[CountKey, int]] = ()
    ) -> None:
        items = counts.items() if isinstance(counts, Mapping) else counts
        acc: dict[CountKey, int] = {}
        for (state, color), count in items:
            if count < 0:
                raise ValueError(f"negative count {count} for ({state}, {color})")
            if count:
                key = (state, int(color))
                acc[key] = acc.get(key, 0) + count
        self._counts: dict[CountKey, int] = dict(sorted(acc.items()))
        self._hash: int | None = None

    def __getitem__(self, key: CountKey) -> int:
        return self._counts.get(key, 0)

    def get(self, state: StateId, color: ColorId) -> int:
        return self._counts.get((state, color), 0)

    def items(self) -> Iterator[tuple[CountKey, int]]:
        return iter(self._counts.items())

    def support(self) -> int:
        """Number of (state, color) pairs with a nonzero count."""
        return len(self._counts)

    def total(self) -> int:
        """Total number of agents."""
        return sum(self._counts.values())

    def active_states(self) -> frozenset[StateId]:
        return frozenset(state for state, _ in self._counts)

    def colors(self) -> frozenset[ColorId]:
        return frozenset(color for _, color in self._counts)

    def color_histogram(self) -> dict[ColorId, int]:
        """Agents per color, ignoring states."""
        hist: dict[ColorId, int] = {}
        for (_, color), count in self._counts.items():
            hist[color] = hist.get(color, 0) + count
        return hist

    def __add__(self, other: "Configuration") -> "Configuration":
        return config_add(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self._counts == other._counts

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._counts.items()))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self._counts)

    def __repr__(self) -> str:
        return f"Configuration({self._counts!r})"


def config_add(a: Configuration, b: Configuration) -> Configuration:
    """Component-wise sum of two configurations."""
    counts = dict(a.items())
    for key, count in b.items():
        counts[key] = counts.get(key, 0) + count
    return Configuration(counts)


def singleton(state: StateId, color: ColorId) -> Configuration:
    """The configuration holding exactly one agent, at (state, color)."""
    return Configuration({(state, color): 1})


def active_states(config: Configuration) -> frozenset[StateId]:
    """States occupied by at least one agent of any color."""
    return config.active_states()


@dataclass(frozen=True)
class Protocol:
    """A protocol: declared states, rules, initial states, and 0/1 opinions.

    The output map must be total on the declared states; use
    :func:`validate_protocol` to check all structural invariants at once.
    """

    states: tuple[StateId, ...]
    rules: tuple[Rule, ...]
    initial: frozenset[StateId]
    output: Mapping[StateId, int]

    @classmethod
    def make(
        cls,
        states: Iterable[StateId],
        rules: Iterable[Rule],
        initial: Iterable[StateId],
        output: Mapping[StateId, int],
    ) -> "Protocol":
        return cls(tuple(states), tuple(rules), frozenset(initial), dict(output))

    @cached_property
    def state_set(self) -> frozenset[StateId]:
        return frozenset(self.states)

    @cached_property
    def rule_set(self) -> frozenset[Rule]:
        return frozenset(self.rules)


def validate_protocol(protocol: Protocol) -> list[str]:
    """Structural diagnostics; empty exactly when the protocol is well-formed."""
    problems: list[str] = []
    seen: set[StateId] = set()
    for state in protocol.states:
        if state in seen:
            problems.append(f"duplicate state '{state}'")
        seen.add(state)
    for state in sorted(protocol.initial - protocol.state_set):
        problems.append(f"initial state '{state}' is not declared")
    for state in protocol.states:
        if state not in protocol.output:
            problems.append(f"state '{state}' has no output value")
    for state in sorted(set(protocol.output) - protocol.state_set):
        problems.append(f"output assigned to undeclared state '{state}'")
    for state in protocol.states:
        value = protocol.output.get(state)
        if value is not None and value not in (0, 1):
            problems.append(f"output of '{state}' is {value!r}, expected 0 or 1")
    for index, rule in enumerate(protocol.rules):
        for state in (*rule.pre, *rule.post):
            if state not in protocol.state_set:
                problems.append(f"rule {index} references undeclared state '{state}'")
    return problems


def is_initial(protocol: Protocol, config: Configuration) -> bool:
    """True when every agent sits in an initial state (colors unconstrained)."""
    return config.active_states() <= protocol.initial


def enabled_instances(protocol: Protocol, config: Configuration) -> list[TransitionInstance]:
    """All enabled instances, ordered by rule position, then d, then e.

    A rule with both roles on the same (state, color) pair needs two agents
    there, so a count of one does not enable it.
    """
    colors_at: dict[StateId, list[ColorId]] = {}
    for (state, color), _count in config.items():
        colors_at.setdefault(state, []).append(color)  # sorted, items are sorted

    found: list[TransitionInstance] = []
    for rule in protocol.rules:
        p, p2 = rule.pre
        ds = colors_at.get(p)
        es = colors_at.get(p2)
        if not ds or not es:
            continue
        if rule.guard is Guard.EQ:
            if p == p2:
                for d in ds:
                    if config[(p, d)] >= 2:
                        found.append(TransitionInstance(rule, d, d))
            else:
                for d in ds:
                    if config[(p2, d)] >= 1:
                        found.append(TransitionInstance(rule, d, d))
        else:
            for d in ds:
                for e in es:
                    if d != e:
                        found.append(TransitionInstance(rule, d, e))
    return found


def fire(protocol: Protocol, config: Configuration, instance: TransitionInstance) -> Configuration:
    """Apply an enabled instance: both agents change state, neither changes color.

    Raises :class:`NotEnabled` when the instance's rule is not part of the
    protocol or the required agents are missing.
    """
    rule = instance.rule
    if rule not in protocol.rule_set:
        raise NotEnabled(f"not a rule of this protocol: {rule}")
    counts = dict(config.items())
    for state, color in ((rule.pre[0], instance.d), (rule.pre[1], instance.e)):
        left = counts.get((state, color), 0)
        if left < 1:
            raise NotEnabled(f"no agent available at ({state}, {color}) for {rule}")
        counts[(state, color)] = left - 1
    for state, color in ((rule.post[0], instance.d), (rule.post[1], instance.e)):
        counts[(state, color)] = counts.get((state, color), 0) + 1
    return Configuration(counts)


@dataclass(frozen=True)
class Trace:
    """An execution prefix: the start configuration plus each fired instance
    and the configuration it produced."""

    initial: Configuration
    steps: tuple[tuple[TransitionInstance, Configuration], ...] = ()

    @property
    def final(self) -> Configuration:
        return self.steps[-1][1] if self.steps else self.initial

    def configurations(self) -> Iterator[Configuration]:
        yield self.initial
        for _, config in self.steps:
            yield config

    def __len__(self) -> int:
        return len(self.steps)
