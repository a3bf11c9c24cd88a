from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netsac.codec import MixedRadixCodec
from netsac.envs.wireless import WirelessGridEnv
from netsac.graph import Graph, khop_neighborhood, read_edge_list, write_edge_list


@st.composite
def graphs(draw, max_n=9):
    n = draw(st.integers(1, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph(n, edges)


def test_line_neighborhood():
    assert khop_neighborhood(Graph.line(8), 3, 1).members == (2, 3, 4)


@given(graphs(), st.data())
def test_zero_hop_is_self(g, data):
    i = data.draw(st.integers(0, g.n - 1))
    assert khop_neighborhood(g, i, 0).members == (i,)


@given(graphs(), st.data())
def test_neighborhoods_nest_and_exhaust(g, data):
    i = data.draw(st.integers(0, g.n - 1))
    prev = set()
    for k in range(g.n + 1):
        cur = set(khop_neighborhood(g, i, k).members)
        assert prev <= cur and i in cur
        prev = cur
    reachable = {j for j, d in enumerate(g.distances_from(i)) if d != float("inf")}
    assert prev == reachable


@given(graphs(), st.data())
def test_neighborhood_matches_distance(g, data):
    i = data.draw(st.integers(0, g.n - 1))
    k = data.draw(st.integers(0, 4))
    dist = g.distances_from(i)
    assert khop_neighborhood(g, i, k).members == tuple(j for j in range(g.n) if dist[j] <= k)


def test_wireless_interior_user_neighbors():
    env = WirelessGridEnv.create(6, 6, 0.7, seed=0)
    g = env.conflict_graph()
    i = 2 * 6 + 3  # interior block (2, 3)
    expected = tuple(j for j in range(env.n) if set(env.access[j]) & set(env.access[i]))
    assert khop_neighborhood(g, i, 1).members == expected
    assert len(expected) == 9


@pytest.mark.parametrize(
    "edges, msg",
    [([(0, 0)], "self-loop"), ([(0, 5)], "outside"), ([(-1, 1)], "outside")],
)
def test_graph_rejects_bad_edges(edges, msg):
    with pytest.raises(ValueError, match=msg):
        Graph(3, edges)


def test_graph_edges_symmetric():
    g = Graph(3, [(1, 0), (0, 1), (2, 1)])
    assert g.edges == ((0, 1), (1, 2))
    assert g.neighbors(1) == (0, 2)


def test_khop_errors():
    with pytest.raises(IndexError):
        khop_neighborhood(Graph.line(3), 3, 1)
    with pytest.raises(ValueError):
        khop_neighborhood(Graph.line(3), 0, -1)


def test_edge_list_round_trip(tmp_path):
    g = Graph(5, [(0, 1), (1, 2), (3, 4)])
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    assert path.read_text().splitlines()[0] == "n 5"
    assert read_edge_list(path) == g


def test_edge_list_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1\n")
    with pytest.raises(ValueError, match="header"):
        read_edge_list(path)
    path.write_text("n 3\n0 1 2\n")
    with pytest.raises(ValueError, match="u v"):
        read_edge_list(path)


@pytest.mark.parametrize(
    "radices, values, index",
    [([2, 2], (1, 0), 1), ([2, 2], (0, 0), 0), ([3, 2], (2, 1), 5), ([2, 3, 4], (1, 2, 3), 1 + 2 * 2 + 3 * 6)],
)
def test_encode_examples(radices, values, index):
    codec = MixedRadixCodec(radices)
    assert codec.encode(values) == index
    assert codec.decode(index) == values


@given(st.lists(st.integers(1, 5), min_size=1, max_size=5))
def test_codec_bijection(radices):
    codec = MixedRadixCodec(radices)
    all_values = list(itertools.product(*[range(r) for r in reversed(radices)]))
    indices = [codec.encode(tuple(reversed(v))) for v in all_values]
    assert sorted(indices) == list(range(codec.size))
    for idx in range(codec.size):
        assert codec.encode(codec.decode(idx)) == idx
    flat = codec.encode_many(codec.decode_many(np.arange(codec.size)))
    assert np.array_equal(flat, np.arange(codec.size))


def test_codec_large_space_uses_python_ints():
    codec = MixedRadixCodec([1000] * 8)
    assert not codec.fits_int64
    v = np.array([[999] * 8, [1] + [0] * 7])
    idx = codec.encode_many(v)
    assert idx[0] == 1000**8 - 1 and idx[1] == 1
    assert np.array_equal(codec.decode_many(idx), v)


@pytest.mark.parametrize("values", [(2, 0), (0, -1), (0,)])
def test_codec_rejects_bad_digits(values):
    with pytest.raises(ValueError):
        MixedRadixCodec([2, 2]).encode(values)


def test_codec_rejects_bad_index():
    with pytest.raises(ValueError):
        MixedRadixCodec([2, 2]).decode(4)
