import random
from collections import Counter

import pytest

from support import (
    apply_color_map,
    brute_force_bottom_components,
    random_color_bijection,
    random_config,
    random_protocol,
    raw_output_verdict,
    seesaw_configs,
)
from udpp.core import Configuration, Guard, Protocol, Rule, singleton
from udpp.exploration import (
    CanonicalConfig,
    EmptyConfiguration,
    ExplorationLimits,
    ReachGraph,
    TruncatedGraph,
    Verdict,
    bottom_sccs,
    canonicalize,
    check_well_specification,
    classify_output,
    concretize_path,
    cycle_through,
    enumerate_initial_configs,
    explore,
    random_fair_run,
    shortest_path,
)

LIMITS = ExplorationLimits(max_nodes=10_000)


def test_canonicalize_is_renaming_invariant():
    a = Configuration({("p", 7): 2, ("q", 9): 1})
    b = Configuration({("p", 3): 2, ("q", 5): 1})
    assert canonicalize(a) == canonicalize(b)


def test_canonicalize_empty():
    assert canonicalize(Configuration()) == CanonicalConfig(())
    assert str(canonicalize(Configuration())) == "{}"


def test_canonicalize_random_permutations():
    rng = random.Random(71)
    for _ in range(500):
        config = random_config(rng, ("p", "q", "r"), max_agents=5, max_colors=4)
        mapping = random_color_bijection(rng, config.colors(), spare=5)
        assert canonicalize(config) == canonicalize(apply_color_map(config, mapping))


def test_canonicalize_distinguishes_different_shapes():
    same_color = Configuration({("p", 0): 1, ("q", 0): 1})
    two_colors = Configuration({("p", 0): 1, ("q", 1): 1})
    assert canonicalize(same_color) != canonicalize(two_colors)


def test_representative_lies_in_the_orbit():
    rng = random.Random(13)
    for _ in range(100):
        config = random_config(rng, ("a", "b"), max_agents=4, max_colors=4)
        canon = canonicalize(config)
        assert canonicalize(canon.representative()) == canon
        assert canon.representative().total() == config.total()


def test_explore_seesaw_graph_exactly(seesaw, seesaw_runs):
    c0, c1, c2 = seesaw_runs
    graph = explore(seesaw, c0, LIMITS)
    n0, n1, n2 = canonicalize(c0), canonicalize(c1), canonicalize(c2)
    assert not graph.truncated
    assert graph.root == n0
    assert set(graph.nodes) == {n0, n1, n2}
    assert graph.edges == {n0: (n1,), n1: (n2,), n2: (n1,)}


def test_explore_no_rules_single_node(seesaw_runs):
    protocol = Protocol.make(("p",), (), ("p",), {"p": 1})
    graph = explore(protocol, singleton("p", 0), LIMITS)
    assert len(graph) == 1 and graph.edges[graph.root] == ()


def test_explore_reachable_set_bounded_by_assignments():
    rng = random.Random(29)
    for _ in range(20):
        protocol = random_protocol(rng)
        config = random_config(rng, protocol.states, max_agents=3, min_agents=3)
        graph = explore(protocol, config, LIMITS)
        assert not graph.truncated
        assert len(graph) <= len(protocol.states) ** 3


def test_explore_node_budget_truncates(seesaw, seesaw_runs):
    graph = explore(seesaw, seesaw_runs[0], ExplorationLimits(max_nodes=1))
    assert graph.truncated and "node budget" in graph.truncation_reason
    with pytest.raises(TruncatedGraph):
        bottom_sccs(graph)


def test_explore_exact_budget_is_not_truncated(seesaw, seesaw_runs):
    graph = explore(seesaw, seesaw_runs[0], ExplorationLimits(max_nodes=3))
    assert not graph.truncated and len(graph) == 3


def test_explore_depth_budget_truncates(seesaw, seesaw_runs):
    graph = explore(seesaw, seesaw_runs[0], ExplorationLimits(max_nodes=100, max_depth=1))
    assert graph.truncated and "depth budget" in graph.truncation_reason


def test_limits_validation():
    with pytest.raises(ValueError):
        ExplorationLimits(max_nodes=0)


def test_bottom_sccs_seesaw(seesaw, seesaw_runs):
    c0, c1, c2 = seesaw_runs
    graph = explore(seesaw, c0, LIMITS)
    assert bottom_sccs(graph) == [frozenset({canonicalize(c1), canonicalize(c2)})]


def test_bottom_sccs_deadlock_is_singleton():
    protocol = Protocol.make(("p",), (), ("p",), {"p": 1})
    graph = explore(protocol, singleton("p", 0), LIMITS)
    assert bottom_sccs(graph) == [frozenset({graph.root})]


def _synthetic_graph(edges: dict) -> ReachGraph:
    nodes = tuple(edges)
    return ReachGraph(nodes=nodes, edges={k: tuple(v) for k, v in edges.items()},
                      root=nodes[0], truncated=False)


def test_bottom_sccs_on_random_dags_are_sinks():
    rng = random.Random(59)
    for _ in range(50):
        n = rng.randint(1, 12)
        edges: dict[int, list[int]] = {}
        for i in range(n + 1):
            out: set[int] = set()
            if i < n:
                for _ in range(rng.randint(0, 3)):
                    out.add(rng.randint(i + 1, n))
            edges[i] = sorted(out)
        # edges only go upward, so the graph is acyclic and sinks are exactly
        # the bottom components
        graph = _synthetic_graph(edges)
        got = set(bottom_sccs(graph))
        sinks = {frozenset({v}) for v, out in edges.items() if not out}
        assert got == sinks
        assert got == brute_force_bottom_components(edges, lambda v: edges[v])


def test_bottom_sccs_match_brute_force_on_random_digraphs():
    rng = random.Random(61)
    for _ in range(60):
        n = rng.randint(1, 14)
        edges = {
            i: sorted({rng.randrange(n) for _ in range(rng.randint(0, 3))})
            for i in range(n)
        }
        graph = _synthetic_graph(edges)
        assert set(bottom_sccs(graph)) == brute_force_bottom_components(
            edges, lambda v: edges[v]
        )


def test_classify_seesaw_start_has_no_output(seesaw, seesaw_runs):
    assert classify_output(seesaw, seesaw_runs[0], LIMITS).verdict is Verdict.NO_OUTPUT


def test_classify_deadlocked_singleton_converges():
    protocol = Protocol.make(("p",), (), ("p",), {"p": 1})
    assert classify_output(protocol, singleton("p", 0), LIMITS).verdict is Verdict.OUT1


def test_classify_conflicting_settled_components_mean_no_output():
    # both branches settle, but on different opinions, so the start has none
    split = Protocol.make(
        ("a", "b", "c"),
        (
            Rule(("a", "a"), Guard.EQ, ("b", "b")),
            Rule(("a", "a"), Guard.EQ, ("c", "c")),
        ),
        ("a",),
        {"a": 0, "b": 0, "c": 1},
    )
    pair = Configuration({("a", 0): 2})
    assert classify_output(split, pair, LIMITS).verdict is Verdict.NO_OUTPUT
    assert raw_output_verdict(split, pair) == "NoOutput"


def test_classify_rejects_empty_population(seesaw):
    with pytest.raises(EmptyConfiguration):
        classify_output(seesaw, Configuration(), LIMITS)


def test_classify_unknown_when_truncated(seesaw, seesaw_runs):
    oc = classify_output(seesaw, seesaw_runs[0], ExplorationLimits(max_nodes=1))
    assert oc.verdict is Verdict.UNKNOWN and "node budget" in oc.reason
    assert oc.describe().startswith("Unknown(")


def test_classify_invariant_under_recoloring(seesaw):
    rng = random.Random(83)
    for _ in range(40):
        protocol = random_protocol(rng)
        config = random_config(rng, sorted(protocol.initial), max_agents=3)
        mapping = random_color_bijection(rng, config.colors())
        a = classify_output(protocol, config, LIMITS)
        b = classify_output(protocol, apply_color_map(config, mapping), LIMITS)
        assert a.verdict == b.verdict


def test_classify_agrees_with_labeled_oracle_on_seesaw(seesaw):
    # all initial configurations with up to 4 agents, colors kept distinct
    for n in range(1, 5):
        for canon in enumerate_initial_configs(seesaw, n, n):
            start = canon.representative()
            got = classify_output(seesaw, start, LIMITS)
            assert got.describe() == raw_output_verdict(seesaw, start)


def test_classify_agrees_with_labeled_oracle_on_random_protocols():
    rng = random.Random(97)
    for _ in range(30):
        protocol = random_protocol(rng)
        config = random_config(rng, sorted(protocol.initial), max_agents=3)
        got = classify_output(protocol, config, LIMITS)
        assert got.describe() == raw_output_verdict(protocol, config)


def test_settled_verdicts_pin_every_bottom_component():
    rng = random.Random(101)
    checked = 0
    while checked < 25:
        protocol = random_protocol(rng)
        config = random_config(rng, sorted(protocol.initial), max_agents=3)
        graph = explore(protocol, config, LIMITS)
        oc = classify_output(protocol, config, LIMITS)
        if oc.verdict not in (Verdict.OUT0, Verdict.OUT1):
            continue
        want = {0} if oc.verdict is Verdict.OUT0 else {1}
        for component in bottom_sccs(graph):
            for node in component:
                assert {protocol.output[q] for q in node.active_states()} == want
        checked += 1


def test_enumerate_single_state_two_agents():
    protocol = Protocol.make(("p",), (), ("p",), {"p": 0})
    configs = enumerate_initial_configs(protocol, 2, 2)
    assert len(configs) == 2  # both agents share a color, or use two colors


def test_enumerate_two_states_one_agent_one_color(seesaw):
    assert len(enumerate_initial_configs(seesaw, 1, 1)) == 2


def test_enumerate_matches_brute_force_count(seesaw):
    from itertools import product

    brute = {
        canonicalize(Configuration(Counter(assignment)))
        for assignment in product(
            [(q, d) for q in ("p", "q") for d in (0, 1)], repeat=3
        )
    }
    assert len(enumerate_initial_configs(seesaw, 3, 2)) == len(brute)


def test_enumerate_only_initial_states():
    protocol = Protocol.make(("p", "q"), (), ("p",), {"p": 0, "q": 1})
    for canon in enumerate_initial_configs(protocol, 3, 2):
        assert canon.active_states() <= {"p"}


def test_enumerate_validates_arguments(seesaw):
    with pytest.raises(ValueError):
        enumerate_initial_configs(seesaw, 0, 1)
    with pytest.raises(ValueError):
        enumerate_initial_configs(seesaw, 1, 0)


def test_sweep_seesaw_finds_the_witness(seesaw):
    report = check_well_specification(seesaw, 3, 2, LIMITS)
    assert report.verdict == "not-well-specified"
    bad = [c for c, oc in report.entries if oc.verdict is Verdict.NO_OUTPUT]
    assert canonicalize(seesaw_configs()[0]) in bad


def test_sweep_trivial_protocol_ok():
    protocol = Protocol.make(("p",), (), ("p",), {"p": 1})
    report = check_well_specification(protocol, 3, 2, LIMITS)
    assert report.verdict == "well-specified-up-to-bounds"
    assert all(oc.verdict is Verdict.OUT1 for _, oc in report.entries)


def test_sweep_two_agent_bound_classifies_everything(seesaw):
    report = check_well_specification(seesaw, 2, 2, LIMITS)
    expected = sum(
        len(enumerate_initial_configs(seesaw, n, 2)) for n in (1, 2)
    )
    assert len(report.entries) == expected
    assert all(oc.verdict is not Verdict.UNKNOWN for _, oc in report.entries)


def test_sweep_reports_inconclusive_when_budget_hit():
    # all states agree on output 1, but the one-node budget cannot classify
    # any start that has a successor, and no witness exists to settle it
    grower = Protocol.make(
        ("a", "b"),
        (Rule(("a", "a"), Guard.EQ, ("a", "b")), Rule(("a", "b"), Guard.EQ, ("a", "a"))),
        ("a",),
        {"a": 1, "b": 1},
    )
    report = check_well_specification(grower, 3, 2, ExplorationLimits(max_nodes=1))
    assert report.verdict == "inconclusive"
    assert report.lines()[-1] == "verdict: inconclusive"


def test_sweep_witness_dominates_budget_unknowns(seesaw):
    # a deadlocked mixed-opinion pair is found even at max_nodes=1, so the
    # sweep verdict is a definitive witness despite other entries being Unknown
    report = check_well_specification(seesaw, 3, 2, ExplorationLimits(max_nodes=1))
    assert report.verdict == "not-well-specified"
    verdicts = {oc.verdict for _, oc in report.entries}
    assert Verdict.UNKNOWN in verdicts and Verdict.NO_OUTPUT in verdicts


def test_sweep_report_lines_shape(seesaw):
    report = check_well_specification(seesaw, 2, 2, LIMITS)
    lines = report.lines()
    assert lines[-1].startswith("verdict: ")
    assert all(" " in line for line in lines[:-1])


def test_random_run_cycles_through_the_seesaw(seesaw, seesaw_runs):
    c0, c1, c2 = seesaw_runs
    trace = random_fair_run(seesaw, c0, seed=5, max_steps=1000)
    assert len(trace) == 1000
    seen = Counter(canonicalize(c) for c in trace.configurations())
    assert set(seen) == {canonicalize(c0), canonicalize(c1), canonicalize(c2)}
    assert seen[canonicalize(c1)] >= 10 and seen[canonicalize(c2)] >= 10


def test_random_run_stops_at_deadlock():
    protocol = Protocol.make(("p",), (), ("p",), {"p": 1})
    trace = random_fair_run(protocol, singleton("p", 0), seed=1, max_steps=50)
    assert len(trace) == 0 and trace.final == singleton("p", 0)


def test_random_run_reproducible(seesaw, seesaw_runs):
    a = random_fair_run(seesaw, seesaw_runs[0], seed=42, max_steps=100)
    b = random_fair_run(seesaw, seesaw_runs[0], seed=42, max_steps=100)
    assert a == b


def test_long_run_tail_settles_in_one_bottom_component(seesaw, seesaw_runs):
    c0, _, _ = seesaw_runs
    graph = explore(seesaw, c0, LIMITS)
    components = bottom_sccs(graph)
    trace = random_fair_run(seesaw, c0, seed=9, max_steps=10_000)
    configs = list(trace.configurations())
    tail = configs[len(configs) // 2 :]
    tail_nodes = {canonicalize(c) for c in tail}
    assert any(tail_nodes <= component for component in components)


def test_fair_runs_agree_with_bottom_components_small_scale():
    rng = random.Random(113)
    agreeing = 0
    while agreeing < 15:
        protocol = random_protocol(rng)
        config = random_config(rng, sorted(protocol.initial), max_agents=3)
        graph = explore(protocol, config, LIMITS)
        if len(graph) > 200:
            continue
        components = bottom_sccs(graph)
        trace = random_fair_run(protocol, config, seed=agreeing, max_steps=4000)
        configs = list(trace.configurations())
        tail = configs[len(configs) // 2 :] if len(trace) == 4000 else [configs[-1]]
        tail_nodes = {canonicalize(c) for c in tail}
        assert any(tail_nodes <= component for component in components)
        agreeing += 1


def test_path_helpers_realize_concrete_traces(seesaw, seesaw_runs):
    c0, c1, c2 = seesaw_runs
    graph = explore(seesaw, c0, LIMITS)
    target = frozenset({canonicalize(c2)})
    path = shortest_path(graph, graph.root, target)
    assert path is not None and len(path) == 3
    stem = concretize_path(seesaw, c0, path)
    assert canonicalize(stem.final) == canonicalize(c2)
    loop = cycle_through(graph, path[-1])
    assert loop is not None and loop[0] == loop[-1] == canonicalize(c2)
    cycle = concretize_path(seesaw, stem.final, loop)
    assert canonicalize(cycle.final) == canonicalize(c2)
