"""Shared graph builders for the test suite (networkx does the topology)."""

import networkx as nx
import numpy as np

from colorsparse.graphs import WeightedGraph


def from_nx(G, weights=None, rng=None):
    nodes = sorted(G.nodes())
    idx = {u: i for i, u in enumerate(nodes)}
    edges = [(idx[u], idx[v]) for u, v in G.edges()]
    m = len(edges)
    if weights is None:
        w = np.ones(m)
    elif weights == "random":
        w = rng.uniform(0.5, 2.0, size=m)
    else:
        w = np.asarray(weights, dtype=float)
    return WeightedGraph(len(nodes), edges, w)


def path_graph(n, **kw):
    return from_nx(nx.path_graph(n), **kw)


def cycle_graph(n, **kw):
    return from_nx(nx.cycle_graph(n), **kw)


def grid_graph(r, c, **kw):
    return from_nx(nx.convert_node_labels_to_integers(nx.grid_2d_graph(r, c)), **kw)


def complete_graph(n, **kw):
    return from_nx(nx.complete_graph(n), **kw)


def complete_bipartite(a, b, **kw):
    return from_nx(nx.complete_bipartite_graph(a, b), **kw)


def er_graph(n, p, seed, connected=True, **kw):
    for s in range(seed, seed + 200):
        G = nx.gnp_random_graph(n, p, seed=s)
        if not connected or nx.is_connected(G):
            return from_nx(G, **kw)
    raise RuntimeError("no connected sample found")


def random_bipartite(a, b, m, seed, connected=False):
    gen = np.random.default_rng(seed)
    edges = set()
    while len(edges) < m:
        u = int(gen.integers(0, a))
        v = a + int(gen.integers(0, b))
        edges.add((u, v))
    G = WeightedGraph(a + b, sorted(edges), np.ones(len(edges)))
    if connected and len(G.components()) > 1:
        return random_bipartite(a, b, m, seed + 1000, connected=True)
    return G
