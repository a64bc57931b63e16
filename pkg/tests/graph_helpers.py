"""Random graphs and brute-force oracles shared by graph tests."""

import itertools

import numpy as np

from trialinfer.graph_mcp import MCPGraph, update_after_rejection


def random_graph(rng, n=None):
    n = n or int(rng.integers(2, 6))
    w = rng.dirichlet(np.ones(n)) * (1.0 if rng.random() < 0.7 else rng.uniform(0.5, 1.0))
    w = np.where(rng.random(n) < 0.2, 0.0, w)
    G = np.zeros((n, n))
    for i in range(n):
        others = [j for j in range(n) if j != i]
        row = rng.dirichlet(np.ones(n - 1))
        row = np.where(rng.random(n - 1) < 0.3, 0.0, row)
        if row.sum() > 0 and rng.random() < 0.8:
            row = row / row.sum()
        G[i, others] = row
    hyps = [f"H{i + 1}" for i in range(n)]
    p = {h: float(10 ** rng.uniform(-4, -0.5)) for h in hyps}
    return MCPGraph(hyps, w.tolist(), G.tolist()), p


def all_rejection_orders(g, p, alpha):
    """Terminal rejected sets over every admissible rejection order (DFS)."""
    finals = set()

    def dfs(graph, removed):
        cands = [h for h in graph.hypotheses
                 if h not in removed and graph.weight(h) > 0 and p[h] <= alpha * graph.weight(h) + 1e-12]
        if not cands:
            finals.add(frozenset(removed))
            return
        for h in cands:
            dfs(update_after_rejection(graph, h, removed), removed | {h})

    dfs(g, frozenset())
    return finals


def intersection_weights(g, subset):
    """Weights of the intersection hypothesis H_J: remove the complement via the update rule."""
    removed = frozenset()
    graph = g
    for h in g.hypotheses:
        if h not in subset:
            graph = update_after_rejection(graph, h, removed)
            removed = removed | {h}
    return {h: graph.weight(h) for h in subset}


def closed_test(g, p, alpha):
    """Closed testing with weighted Bonferroni intersection tests."""
    hyps = g.hypotheses
    rejected_sets = {}
    for k in range(1, len(hyps) + 1):
        for J in itertools.combinations(hyps, k):
            w = intersection_weights(g, J)
            rejected_sets[J] = any(p[h] <= alpha * w[h] for h in J)
    return {h for h in hyps if all(r for J, r in rejected_sets.items() if h in J)}
