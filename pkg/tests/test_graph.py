import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from admgip.graph import (
    Admg, CComponent, GraphError, assemble, c_components, districts, find_almost_directed_cycle,
    find_directed_cycle, from_json, from_text, is_ancestral, to_json, to_text, topological_order,
)
from helpers import random_ancestral, random_mixed


def test_constructor_rejects_bad_edges():
    with pytest.raises(GraphError):
        Admg(3, [(0, 0)])
    with pytest.raises(GraphError):
        Admg(3, [(0, 3)])
    with pytest.raises(GraphError):
        Admg(3, [(0, 1), (0, 1)])
    with pytest.raises(GraphError):
        Admg(3, [], [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        Admg(0)


def test_directed_cycle():
    assert find_directed_cycle(Admg(3, [(0, 1), (1, 2)])) is None
    cyc = find_directed_cycle(Admg(3, [(0, 1), (1, 2), (2, 0)]))
    assert sorted(cyc) == [0, 1, 2]


def test_almost_directed_cycle():
    g = Admg(3, [(0, 1), (1, 2)], [(0, 2)])
    path, pair = find_almost_directed_cycle(g)
    assert path == [0, 1, 2] and pair == (0, 2)
    assert not is_ancestral(g)
    assert is_ancestral(Admg(3, [(0, 1)], [(1, 2)]))
    # a bidirected edge parallel to a directed one is an almost directed cycle
    assert not is_ancestral(Admg(2, [(0, 1)], [(0, 1)]))


def test_topological_order_respects_edges():
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = random_ancestral(6, rng)
        pos = {v: k for k, v in enumerate(topological_order(g))}
        assert all(pos[a] < pos[b] for a, b in g.directed)


def test_districts_and_components_roundtrip():
    g = Admg(5, [(0, 1), (3, 4)], [(1, 2), (2, 3)])
    assert sorted(map(sorted, districts(g))) == [[0], [1, 2, 3], [4]]
    comps = c_components(g)
    big = [c for c in comps if c.size == 3][0]
    assert big.parent_map() == {1: {0}, 2: frozenset(), 3: frozenset()}
    assert assemble(comps, 5) == g


def test_assemble_rejects_overlap():
    with pytest.raises(GraphError):
        assemble([CComponent.singleton(0), CComponent.singleton(0, [1]), CComponent.singleton(1)], 2)


def test_component_validation():
    with pytest.raises(GraphError):
        CComponent.make([0, 1], [], {})
    with pytest.raises(GraphError):
        CComponent.make([0], [], {0: [0]})
    c = CComponent.make([1, 0], [(1, 0)], {0: [2], 1: [3]})
    assert c.district == (0, 1) and c.bidirected == {(0, 1)}
    assert c.nodes == (0, 1, 2, 3)
    assert c.n_params == 2 * 2 + 3
    assert c.label(one_based=True) == "{3}->1 {4}->2 | 1<->2"


def test_text_format_is_one_based():
    g = Admg(3, [(0, 1)], [(1, 2)])
    text = to_text(g, comment="hello")
    assert "1 -> 2" in text and "2 <-> 3" in text and text.startswith("# hello")
    assert from_text(text) == g
    with pytest.raises(GraphError):
        from_text("1 -> 2\n")
    with pytest.raises(GraphError):
        from_text("nodes: 2\n1 - 2\n")


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2 ** 32 - 1))
def test_serialisation_roundtrip(d, seed):
    g = random_mixed(d, np.random.default_rng(seed))
    assert from_text(to_text(g)) == g
    assert from_json(to_json(g)) == g


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2 ** 32 - 1))
def test_ancestral_iff_no_cycles(d, seed):
    rng = np.random.default_rng(seed)
    g = random_mixed(d, rng)
    expect = find_directed_cycle(g) is None and find_almost_directed_cycle(g) is None
    assert is_ancestral(g) == expect
    assert is_ancestral(random_ancestral(d, rng))


def test_ancestors_descendants_consistent():
    rng = np.random.default_rng(3)
    g = random_ancestral(7, rng)
    for v in range(7):
        for a in g.ancestors(v):
            assert v in g.descendants(a)
