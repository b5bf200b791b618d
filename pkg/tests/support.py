"""Shared builders and independent oracles for the test suite.

The oracles deliberately re-derive results through a different route than
the library (labeled exploration instead of canonical forms, pairwise
reachability instead of Tarjan) so that agreement is meaningful.
"""

from __future__ import annotations

import random
from collections import deque

from udpp.core import (
    Configuration,
    Guard,
    Protocol,
    Rule,
    enabled_instances,
    fire,
)
from udpp.counter import CounterMachine, Dec, Goto, Halt, Inc


def seesaw_protocol() -> Protocol:
    """Two states, two rules, never settles from mixed-color starts."""
    recruit = Rule(("p", "q"), Guard.NEQ, ("q", "q"), label="recruit")
    bounce = Rule(("q", "q"), Guard.EQ, ("p", "q"), label="bounce")
    return Protocol.make(
        states=("p", "q"),
        rules=(recruit, bounce),
        initial=("p", "q"),
        output={"p": 0, "q": 1},
    )


RED, BLUE = 0, 1


def seesaw_configs() -> tuple[Configuration, Configuration, Configuration]:
    """The three-agent start and the two configurations its run cycles through."""
    c0 = Configuration({("p", RED): 2, ("q", BLUE): 1})
    c1 = Configuration({("p", RED): 1, ("q", RED): 1, ("q", BLUE): 1})
    c2 = Configuration({("q", RED): 2, ("q", BLUE): 1})
    return c0, c1, c2


def random_protocol(rng: random.Random, max_states: int = 4, max_rules: int = 3) -> Protocol:
    n = rng.randint(1, max_states)
    states = tuple(f"s{i}" for i in range(n))
    rules = []
    for _ in range(rng.randint(0, max_rules)):
        pre = (rng.choice(states), rng.choice(states))
        post = (rng.choice(states), rng.choice(states))
        guard = rng.choice((Guard.EQ, Guard.NEQ))
        rules.append(Rule(pre, guard, post))
    initial = rng.sample(states, rng.randint(1, n))
    output = {q: rng.randint(0, 1) for q in states}
    return Protocol.make(states, rules, initial, output)


def random_config(
    rng: random.Random,
    states,
    max_agents: int = 3,
    max_colors: int = 3,
    min_agents: int = 1,
) -> Configuration:
    pool = sorted(states)
    counts: dict[tuple[str, int], int] = {}
    for _ in range(rng.randint(min_agents, max_agents)):
        key = (rng.choice(pool), rng.randrange(max_colors))
        counts[key] = counts.get(key, 0) + 1
    return Configuration(counts)


def random_machine(rng: random.Random, max_len: int = 6) -> CounterMachine:
    n = rng.randint(1, max_len)
    instrs = []
    for position in range(1, n + 1):
        kinds = ("goto", "halt") if position == n else ("inc", "dec", "goto", "halt")
        kind = rng.choice(kinds)
        if kind == "inc":
            instrs.append(Inc(rng.choice(("x", "y"))))
        elif kind == "dec":
            instrs.append(Dec(rng.choice(("x", "y")), rng.randint(1, n)))
        elif kind == "goto":
            instrs.append(Goto(rng.randint(1, n)))
        else:
            instrs.append(Halt())
    return CounterMachine(tuple(instrs))


def apply_color_map(config: Configuration, mapping: dict[int, int]) -> Configuration:
    return Configuration({(q, mapping[d]): n for (q, d), n in config.items()})


def random_color_bijection(rng: random.Random, colors, spare: int = 3) -> dict[int, int]:
    """A bijection on a superset of the given colors."""
    domain = sorted(set(colors) | set(range(spare)))
    image = domain[:]
    rng.shuffle(image)
    return dict(zip(domain, image))


def brute_force_bottom_components(nodes, successors) -> set[frozenset]:
    """Bottom SCCs by pairwise reachability; quadratic and proud of it."""
    node_list = list(nodes)
    reach: dict = {}
    for u in node_list:
        seen = {u}
        queue = deque([u])
        while queue:
            v = queue.popleft()
            for w in successors(v):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        reach[u] = seen
    bottoms: set[frozenset] = set()
    for u in node_list:
        if all(u in reach[v] for v in reach[u]):
            bottoms.add(frozenset(reach[u]))
    return bottoms


def raw_output_verdict(protocol: Protocol, start: Configuration, node_cap: int = 100_000) -> str:
    """Consensus verdict over the labeled (non-canonicalized) state space.

    Explores concrete configurations with colors kept distinct, finds the
    bottom components by pairwise reachability, and reads off the verdict.
    Returns "Out0", "Out1", or "NoOutput".
    """
    successors: dict[Configuration, list[Configuration]] = {}
    queue = deque([start])
    while queue:
        config = queue.popleft()
        if config in successors:
            continue
        nexts = []
        for instance in enabled_instances(protocol, config):
            nexts.append(fire(protocol, config, instance))
        successors[config] = nexts
        for nxt in nexts:
            if nxt not in successors:
                queue.append(nxt)
        if len(successors) > node_cap:
            raise AssertionError("oracle exploration exceeded its node cap")
    opinions = set()
    for component in brute_force_bottom_components(successors, lambda c: successors[c]):
        values = {protocol.output[q] for cfg in component for q in cfg.active_states()}
        if len(values) != 1:
            return "NoOutput"
        opinions.add(values.pop())
    if opinions == {0}:
        return "Out0"
    if opinions == {1}:
        return "Out1"
    return "NoOutput"
