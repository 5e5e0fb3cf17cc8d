"""Core combinatorics: vertices, evolutionary sets, gauges, profiles."""

import itertools
import random
from collections import deque
from fractions import Fraction

import pytest

from delayedyule.core import (
    DEPTH_MAX,
    CapacityError,
    EvolutionarySequence,
    EvolutionarySet,
    Vertex,
    branch,
    enumerate_evolutionary_sets,
    full_frontier,
    gauge,
    generation_profile,
    is_evolutionary,
)

EPS = 2.0**-52


def V(*texts):
    return EvolutionarySet(Vertex.from_string(t) for t in texts)


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def brute_force_states(max_leaves):
    """Independent enumeration by BFS over explicit frozensets of strings."""
    start = frozenset({""})
    seen = {start}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        if len(state) >= max_leaves:
            continue
        for w in state:
            nxt = (state - {w}) | {w + "1", w + "2"}
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def gauge_exact(state, beta_exact: Fraction) -> Fraction:
    return sum(beta_exact ** v.height for v in state)


# ---------------------------------------------------------------------------
# Vertex
# ---------------------------------------------------------------------------


def test_vertex_basics():
    root = Vertex()
    assert root.height == 0 and str(root) == "" and root.parent is None
    v = Vertex((2, 1))
    assert v.height == 2
    assert str(v) == "21"
    assert v.path == (2, 1)
    assert Vertex.from_string("21") == v
    assert v.parent == Vertex((2,))
    assert v.restrict(0) == root
    assert v.restrict(1) == Vertex((2,))
    assert v.child(1) == Vertex((2, 1, 1))
    assert root.is_prefix_of(v)
    assert not root.is_prefix_of(root, strict=True)
    assert not Vertex((1,)).is_prefix_of(v)


def test_vertex_ordering_matches_string_sort():
    vs = [Vertex.from_string(t) for t in ("2", "1", "12", "", "11", "21", "111")]
    assert [str(v) for v in sorted(vs)] == sorted(str(v) for v in vs)


def test_vertex_rejects_bad_input():
    with pytest.raises(ValueError):
        Vertex((1, 3))
    with pytest.raises(ValueError):
        Vertex.from_string("10")
    with pytest.raises(CapacityError):
        Vertex((1,) * (DEPTH_MAX + 1))


def test_vertex_depth_cap_on_child():
    deep = Vertex((1,) * DEPTH_MAX)
    with pytest.raises(CapacityError):
        deep.child(1)


# ---------------------------------------------------------------------------
# is_evolutionary
# ---------------------------------------------------------------------------


def test_is_evolutionary_examples():
    assert is_evolutionary({Vertex()})
    assert not is_evolutionary({Vertex((1,))})  # mass 1/2
    assert is_evolutionary({Vertex((1,)), Vertex((2, 1)), Vertex((2, 2))})
    assert not is_evolutionary(set())


def test_is_evolutionary_against_brute_force_enumeration():
    # every subset of the depth-2 universe, cross-checked against BFS oracle
    oracle = brute_force_states(4)
    universe = [Vertex.from_string(t) for t in ("", "1", "2", "11", "12", "21", "22")]
    for r in range(len(universe) + 1):
        for combo in itertools.combinations(universe, r):
            expected = frozenset(str(v) for v in combo) in oracle
            assert is_evolutionary(set(combo)) == expected


def test_enumeration_counts_are_catalan():
    states = enumerate_evolutionary_sets(6)
    by_size = {}
    for s in states:
        by_size[len(s)] = by_size.get(len(s), 0) + 1
    assert by_size == {1: 1, 2: 1, 3: 2, 4: 5, 5: 14, 6: 42}
    assert {frozenset(s.to_strings()) for s in states} == brute_force_states(6)


# ---------------------------------------------------------------------------
# branch
# ---------------------------------------------------------------------------


def test_branch_examples():
    start = EvolutionarySet.initial()
    after = branch(start, Vertex())
    assert after == V("1", "2")
    assert branch(after, Vertex((2,))) == V("1", "21", "22")
    with pytest.raises(ValueError):
        branch(start, Vertex((1,)))


def test_branch_properties_random():
    rng = random.Random(2024)
    for _ in range(300):
        state = EvolutionarySet.initial()
        for _ in range(rng.randint(1, 60)):
            members = state.sorted_members()
            prev_len = len(state)
            state = branch(state, members[rng.randrange(len(members))])
            assert len(state) == prev_len + 1
        assert is_evolutionary(state.members)


def test_dyadic_mass_exact_along_random_branch_sequences():
    rng = random.Random(7)
    for _ in range(400):
        state = EvolutionarySet.initial()
        for _ in range(rng.randint(1, 60)):
            members = state.sorted_members()
            state = branch(state, members[rng.randrange(len(members))])
            heights = [v.height for v in state]
            hmax = max(heights)
            assert sum(1 << (hmax - h) for h in heights) == 1 << hmax


# ---------------------------------------------------------------------------
# gauge
# ---------------------------------------------------------------------------


def test_gauge_examples():
    assert gauge(EvolutionarySet.initial(), 0.3) == 1.0
    assert gauge(V("1", "21", "22"), 0.5) == 1.0
    assert gauge(V("1", "21", "22"), 1.0) == 3.0


def test_gauge_domain_errors():
    with pytest.raises(ValueError):
        gauge(EvolutionarySet.initial(), 0.0)
    with pytest.raises(ValueError):
        gauge(EvolutionarySet.initial(), 1.5)


def test_gauge_cardinality_and_exactness_random():
    rng = random.Random(99)
    for _ in range(120):
        state = EvolutionarySet.initial()
        for _ in range(rng.randint(1, 40)):
            members = state.sorted_members()
            state = branch(state, members[rng.randrange(len(members))])
        assert gauge(state, 1.0) == float(len(state))
        beta = rng.uniform(0.05, 1.0)
        exact = gauge_exact(state, Fraction(beta))
        got = gauge(state, beta)
        hmax = state.max_height
        assert abs(got - float(exact)) <= (hmax + 2) * EPS * max(float(exact), 1.0)


def test_gauge_increment_backward_error_and_exact_form():
    # float difference of gauges agrees with the closed increment at the
    # scale of the summed quantities; the closed increment itself is exact
    rng = random.Random(5)
    for _ in range(150):
        state = EvolutionarySet.initial()
        for _ in range(rng.randint(1, 45)):
            members = state.sorted_members()
            state = branch(state, members[rng.randrange(len(members))])
        beta = rng.uniform(0.05, 1.0)
        members = state.sorted_members()
        v = members[rng.randrange(len(members))]
        new = branch(state, v)
        increment = gauge(new, beta) - gauge(state, beta)
        closed = (2.0 * beta - 1.0) * beta**v.height
        scale = max(gauge(new, beta), 1.0)
        assert abs(increment - closed) <= 4.0 * EPS * scale
        exact = gauge_exact(new, Fraction(beta)) - gauge_exact(state, Fraction(beta))
        exact_closed = (2 * Fraction(beta) - 1) * Fraction(beta) ** v.height
        assert exact == exact_closed


# ---------------------------------------------------------------------------
# profiles / sequences
# ---------------------------------------------------------------------------


def test_generation_profile_examples():
    assert generation_profile(EvolutionarySet.initial()).counts == (1,)
    assert generation_profile(V("1", "21", "22")).counts == (0, 1, 2)
    prof = generation_profile(full_frontier(5)).counts
    assert prof == (0,) * 5 + (32,)


def test_profile_quotient_compatibility_with_branch():
    rng = random.Random(31)
    for _ in range(200):
        state = EvolutionarySet.initial()
        for _ in range(rng.randint(1, 40)):
            members = state.sorted_members()
            v = members[rng.randrange(len(members))]
            before = generation_profile(state)
            state = branch(state, v)
            assert generation_profile(state) == before.apply_move(v.height)


def test_sequence_moves_and_reachability():
    seq = EvolutionarySequence.initial()
    assert seq.counts == (1,)
    nxt = seq.apply_move(0)
    assert nxt.counts == (0, 2)
    assert nxt.total == seq.total + 1
    assert nxt.is_reachable()
    with pytest.raises(ValueError):
        nxt.apply_move(0)
    assert not EvolutionarySequence((2,)).is_reachable()
    assert EvolutionarySequence((0, 1, 2)).is_reachable()


def test_sequence_reachability_matches_enumeration():
    profiles = {generation_profile(s) for s in enumerate_evolutionary_sets(6)}
    # all reachable profiles with total <= 6 appear, and reachability agrees
    for counts in itertools.product(range(7), repeat=4):
        if not 1 <= sum(counts) <= 6:
            continue
        seq = EvolutionarySequence(counts)
        assert seq.is_reachable() == (seq in profiles)


def test_set_serialization_roundtrip():
    state = V("1", "21", "22")
    texts = state.to_strings()
    assert texts == ["1", "21", "22"]
    assert EvolutionarySet.from_strings(texts) == state
    with pytest.raises(ValueError):
        EvolutionarySet.from_strings(["1"])  # mass 1/2


def test_validation_rejects_non_states():
    with pytest.raises(ValueError):
        EvolutionarySet([Vertex(), Vertex((1,))])  # root is a prefix of <1>
