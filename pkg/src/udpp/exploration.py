"""Reachability graphs and output classification under fairness.

Rules observe colors only through equality tests, so bijective recolorings
commute with firing. Classification therefore works on a canonical form per
color-renaming orbit, which keeps reachability graphs small without losing
any behaviour.

Fairness fact used throughout (see README for the proof sketch): on a finite
reachability graph, the set of configurations a fair execution visits
infinitely often is exactly one bottom strongly connected component. A
deadlock counts as a singleton bottom component where the execution
stutters forever. Hence a start configuration has stable output b exactly
when every reachable bottom component is unanimous for the same b.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Hashable, Iterable, Mapping

from .core import (
    Configuration,
    Protocol,
    StateId,
    Trace,
    UdppError,
    enabled_instances,
    fire,
)

Signature = tuple[tuple[tuple[StateId, int], ...], ...]


class TruncatedGraph(UdppError):
    """Raised when an analysis needs a complete graph but got a truncated one."""


class EmptyConfiguration(UdppError):
    """Classification rejects populations with no agents."""


@dataclass(frozen=True)
class CanonicalConfig:
    """A configuration up to color renaming.

    The signature is the sorted multiset of per-color columns, each column
    being the sorted (state, count) pairs carried by one color. Two
    configurations canonicalize equal exactly when some color bijection maps
    one onto the other.
    """

    signature: Signature

    def total(self) -> int:
        return sum(n for column in self.signature for _, n in column)

    def active_states(self) -> frozenset[StateId]:
        return frozenset(q for column in self.signature for q, _ in column)

    def representative(self) -> Configuration:
        """A concrete member of the orbit, using colors 0, 1, ..."""
        return Configuration(
            {(q, i): n for i, column in enumerate(self.signature) for q, n in column}
        )

    def __str__(self) -> str:
        if not self.signature:
            return "{}"
        return "+".join(
            "{" + ",".join(f"{q}:{n}" for q, n in column) + "}" for column in self.signature
        )


def canonicalize(config: Configuration) -> CanonicalConfig:
    """Canonical form; invariant under any bijective recoloring."""
    per_color: dict[int, list[tuple[StateId, int]]] = {}
    for (state, color), count in config.items():
        per_color.setdefault(color, []).append((state, count))
    return CanonicalConfig(tuple(sorted(tuple(column) for column in per_color.values())))


@dataclass(frozen=True)
class ExplorationLimits:
    max_nodes: int = 100_000
    max_depth: int | None = None

    def __post_init__(self) -> None:
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be at least 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")


@dataclass(frozen=True)
class ReachGraph:
    """Forward closure over canonical forms.

    When truncated is False the node set is closed under firing and deadlocked
    nodes are exactly those without successors. When truncated is True some
    node went unexpanded and no closure property holds.
    """

    nodes: tuple[CanonicalConfig, ...]
    edges: Mapping[CanonicalConfig, tuple[CanonicalConfig, ...]]
    root: CanonicalConfig
    truncated: bool
    truncation_reason: str | None = None

    def successors(self, node: CanonicalConfig) -> tuple[CanonicalConfig, ...]:
        return self.edges[node]

    def __contains__(self, node: object) -> bool:
        return node in self.edges

    def __len__(self) -> int:
        return len(self.nodes)


def explore(protocol: Protocol, start: Configuration, limits: ExplorationLimits) -> ReachGraph:
    """Breadth-first closure of canonical forms under all enabled instances.

    Hitting a budget flags the graph as truncated instead of raising; the
    partial graph still records every edge between discovered, expanded nodes.
    """
    root = canonicalize(start)
    depth: dict[CanonicalConfig, int] = {root: 0}
    order: list[CanonicalConfig] = [root]
    edges: dict[CanonicalConfig, tuple[CanonicalConfig, ...]] = {}
    reasons: list[str] = []
    queue: deque[CanonicalConfig] = deque([root])
    while queue:
        node = queue.popleft()
        if limits.max_depth is not None and depth[node] >= limits.max_depth:
            if enabled_instances(protocol, node.representative()):
                if not any(r.startswith("depth") for r in reasons):
                    reasons.append(f"depth budget exceeded (max_depth={limits.max_depth})")
            edges[node] = ()
            continue
        rep = node.representative()
        seen_here: set[CanonicalConfig] = set()
        succs: list[CanonicalConfig] = []
        for inst in enabled_instances(protocol, rep):
            succ = canonicalize(fire(protocol, rep, inst))
            if succ not in depth:
                if len(depth) >= limits.max_nodes:
                    if not any(r.startswith("node") for r in reasons):
                        reasons.append(f"node budget exceeded (max_nodes={limits.max_nodes})")
                    continue
                depth[succ] = depth[node] + 1
                order.append(succ)
                queue.append(succ)
            if succ not in seen_here:
                seen_here.add(succ)
                succs.append(succ)
        edges[node] = tuple(succs)
    return ReachGraph(
        nodes=tuple(order),
        edges=edges,
        root=root,
        truncated=bool(reasons),
        truncation_reason="; ".join(reasons) if reasons else None,
    )


def _strongly_connected(
    nodes: Iterable[Hashable], successors: Callable[[Hashable], Iterable[Hashable]]
) -> list[list[Hashable]]:
    """Iterative Tarjan; components come out in reverse topological order."""
    index: dict[Hashable, int] = {}
    low: dict[Hashable, int] = {}
    on_stack: set[Hashable] = set()
    stack: list[Hashable] = []
    components: list[list[Hashable]] = []
    counter = 0
    for start in nodes:
        if start in index:
            continue
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        work: list[tuple[Hashable, Iterable]] = [(start, iter(successors(start)))]
        while work:
            v, it = work[-1]
            pushed = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    pushed = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if pushed:
                continue
            work.pop()
            if low[v] == index[v]:
                component: list[Hashable] = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    component.append(w)
                    if w == v:
                        break
                components.append(component)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return components


def bottom_sccs(graph: ReachGraph) -> list[frozenset[CanonicalConfig]]:
    """Strongly connected components with no edge leaving the component.

    A deadlock node is a singleton bottom component. Requires a complete
    graph; truncated input raises :class:`TruncatedGraph`.
    """
    if graph.truncated:
        raise TruncatedGraph(graph.truncation_reason or "graph is truncated")
    bottoms: list[frozenset[CanonicalConfig]] = []
    for component in _strongly_connected(graph.nodes, lambda n: graph.edges[n]):
        members = frozenset(component)
        if all(w in members for v in component for w in graph.edges[v]):
            bottoms.append(members)
    return bottoms


class Verdict(Enum):
    OUT0 = "Out0"
    OUT1 = "Out1"
    NO_OUTPUT = "NoOutput"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class OutputClass:
    verdict: Verdict
    reason: str | None = None

    def describe(self) -> str:
        if self.verdict is Verdict.UNKNOWN:
            return f"Unknown({self.reason})"
        return self.verdict.value


def classify_graph(protocol: Protocol, graph: ReachGraph) -> OutputClass:
    """Verdict for a fully explored graph; Unknown when it is truncated."""
    if graph.truncated:
        return OutputClass(Verdict.UNKNOWN, graph.truncation_reason or "graph is truncated")
    opinions: set[int] = set()
    for component in bottom_sccs(graph):
        values = {
            protocol.output[q] for node in component for q in node.active_states()
        }
        if len(values) != 1:
            return OutputClass(Verdict.NO_OUTPUT)
        opinions.add(values.pop())
    if opinions == {0}:
        return OutputClass(Verdict.OUT0)
    if opinions == {1}:
        return OutputClass(Verdict.OUT1)
    return OutputClass(Verdict.NO_OUTPUT)


def classify_output(
    protocol: Protocol, start: Configuration, limits: ExplorationLimits
) -> OutputClass:
    """Stable-consensus verdict for one start configuration.

    Out0/Out1 when every reachable bottom component is unanimous for the same
    opinion, NoOutput otherwise, Unknown when exploration hit a budget.
    """
    if start.total() == 0:
        raise EmptyConfiguration("cannot classify an empty population")
    return classify_graph(protocol, explore(protocol, start, limits))


def enumerate_initial_configs(protocol: Protocol, n: int, k: int) -> list[CanonicalConfig]:
    """All canonical configurations with exactly n agents on initial states
    and at most k distinct colors, without duplicates modulo recoloring."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if k < 1:
        raise ValueError("k must be at least 1")
    from itertools import combinations_with_replacement

    init_states = sorted(protocol.initial)
    palette = range(min(n, k))
    agent_kinds = [(q, c) for c in palette for q in init_states]
    seen: dict[CanonicalConfig, None] = {}
    for combo in combinations_with_replacement(agent_kinds, n):
        counts: dict[tuple[StateId, int], int] = {}
        for kind in combo:
            counts[kind] = counts.get(kind, 0) + 1
        canon = canonicalize(Configuration(counts))
        if canon not in seen:
            seen[canon] = None
    return sorted(seen, key=lambda c: c.signature)


VERDICT_WITNESS = "not-well-specified"
VERDICT_BOUNDED_OK = "well-specified-up-to-bounds"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class WellSpecReport:
    """Per-configuration verdicts for a bounded sweep, plus the overall call.

    A single NoOutput configuration is a definitive witness against
    well-specification, so it dominates any Unknown entries; Unknown without
    a witness makes the sweep inconclusive.
    """

    entries: tuple[tuple[CanonicalConfig, OutputClass], ...]
    verdict: str

    def lines(self) -> list[str]:
        out = [f"{config} {oc.describe()}" for config, oc in self.entries]
        out.append(f"verdict: {self.verdict}")
        return out


def check_well_specification(
    protocol: Protocol, max_agents: int, max_colors: int, limits: ExplorationLimits
) -> WellSpecReport:
    """Classify every canonical initial configuration within the bounds."""
    if max_agents < 1:
        raise ValueError("max_agents must be at least 1")
    entries: list[tuple[CanonicalConfig, OutputClass]] = []
    saw_witness = False
    saw_unknown = False
    for n in range(1, max_agents + 1):
        for canon in enumerate_initial_configs(protocol, n, max_colors):
            oc = classify_output(protocol, canon.representative(), limits)
            entries.append((canon, oc))
            saw_witness = saw_witness or oc.verdict is Verdict.NO_OUTPUT
            saw_unknown = saw_unknown or oc.verdict is Verdict.UNKNOWN
    if saw_witness:
        verdict = VERDICT_WITNESS
    elif saw_unknown:
        verdict = VERDICT_INCONCLUSIVE
    else:
        verdict = VERDICT_BOUNDED_OK
    return WellSpecReport(tuple(entries), verdict)


def random_fair_run(
    protocol: Protocol, start: Configuration, seed: int, max_steps: int
) -> Trace:
    """Uniform-random scheduling with a seeded generator.

    On a finite reachable set this sampling is fair with probability one.
    Stops at a deadlock or after max_steps; fully reproducible from the seed.
    """
    rng = random.Random(seed)
    steps: list[tuple] = []
    current = start
    for _ in range(max_steps):
        options = enabled_instances(protocol, current)
        if not options:
            break
        instance = options[rng.randrange(len(options))]
        current = fire(protocol, current, instance)
        steps.append((instance, current))
    return Trace(start, tuple(steps))


def shortest_path(
    graph: ReachGraph, source: CanonicalConfig, targets: frozenset[CanonicalConfig]
) -> list[CanonicalConfig] | None:
    """Shortest node path from source into targets, or None if unreachable."""
    if source in targets:
        return [source]
    parent: dict[CanonicalConfig, CanonicalConfig] = {}
    queue: deque[CanonicalConfig] = deque([source])
    seen = {source}
    while queue:
        node = queue.popleft()
        for succ in graph.edges[node]:
            if succ in seen:
                continue
            parent[succ] = node
            if succ in targets:
                path = [succ]
                while path[-1] != source:
                    path.append(parent[path[-1]])
                return list(reversed(path))
            seen.add(succ)
            queue.append(succ)
    return None


def cycle_through(graph: ReachGraph, node: CanonicalConfig) -> list[CanonicalConfig] | None:
    """A shortest nonempty cycle node -> ... -> node, or None for deadlocks."""
    best: list[CanonicalConfig] | None = None
    for succ in graph.edges[node]:
        back = shortest_path(graph, succ, frozenset([node]))
        if back is not None and (best is None or 1 + len(back) < len(best)):
            best = [node] + back
    return best


def concretize_path(
    protocol: Protocol, start: Configuration, nodes: list[CanonicalConfig]
) -> Trace:
    """Realize a canonical node path as a concrete trace from start.

    Equivariance under recoloring guarantees some enabled instance performs
    each hop, because start lies in the orbit of the path's first node.
    """
    if canonicalize(start) != nodes[0]:
        raise UdppError("start configuration does not match the path's first node")
    current = start
    steps: list[tuple] = []
    for target in nodes[1:]:
        for instance in enabled_instances(protocol, current):
            after = fire(protocol, current, instance)
            if canonicalize(after) == target:
                steps.append((instance, after))
                current = after
                break
        else:
            raise UdppError("canonical path cannot be realized; graph out of sync")
    return Trace(start, tuple(steps))
