"""Brandes betweenness centrality on unweighted snapshots, and display sizing."""

from __future__ import annotations

from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from triarch.graph import Snapshot

# Sources are processed in fixed-size blocks; partial sums are reduced in
# block order so the result does not depend on the worker count.
SOURCE_BLOCK = 64


@dataclass(frozen=True)
class CentralityScores:
    scores: dict[str, float]
    directed: bool
    normalized: bool

    def __getitem__(self, node_id: str) -> float:
        return self.scores[node_id]

    def rows(self):
        for node_id in sorted(self.scores):
            yield node_id, repr(self.scores[node_id])


def _adjacency(s: Snapshot, directed: bool) -> list[list[int]]:
    if not directed:
        return s.undirected_neighbors()
    out: list[list[int]] = [[] for _ in range(s.n)]
    for u, v in s.edge_array:
        out[u].append(int(v))
    return out


def _accumulate(adj: list[list[int]], sources: range) -> np.ndarray:
    n = len(adj)
    total = np.zeros(n)
    for src in sources:
        sigma = [0] * n
        dist = [-1] * n
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma[src] = 1
        dist[src] = 0
        order = []
        queue = deque([src])
        while queue:
            v = queue.popleft()
            order.append(v)
            dv = dist[v] + 1
            sv = sigma[v]
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dv
                    queue.append(w)
                if dist[w] == dv:
                    sigma[w] += sv
                    preds[w].append(v)
        delta = [0.0] * n
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
        delta[src] = 0.0
        total += delta
    return total


def _block_task(args):
    adj, start, stop = args
    return _accumulate(adj, range(start, stop))


def betweenness(s: Snapshot, directed: bool = True, normalized: bool = False, workers: int = 1) -> CentralityScores:
    """Shortest-path betweenness by Brandes' dependency accumulation.

    Undirected scores count each unordered pair once. Normalization divides by
    (n-1)(n-2) for directed graphs and (n-1)(n-2)/2 for undirected ones.
    """
    n = s.n
    if n == 0:
        return CentralityScores({}, directed, normalized)
    adj = _adjacency(s, directed)
    blocks = [(start, min(start + SOURCE_BLOCK, n)) for start in range(0, n, SOURCE_BLOCK)]
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_block_task, [(adj, a, b) for a, b in blocks]))
    else:
        partials = [_accumulate(adj, range(a, b)) for a, b in blocks]
    total = np.zeros(n)
    for part in partials:
        total += part
    if not directed:
        total /= 2.0
    if normalized:
        pairs = (n - 1) * (n - 2)
        if not directed:
            pairs /= 2
        if pairs > 0:
            total /= pairs
    return CentralityScores({nid: float(total[i]) for i, nid in enumerate(s.ids)}, directed, normalized)


def size_scale(scores, min_px: float = 4.0, max_px: float = 40.0) -> dict[str, float]:
    """Map scores affinely onto [min_px, max_px]; a constant score maps to min_px."""
    if not max_px > min_px > 0:
        raise ValueError("need max_px > min_px > 0")
    if isinstance(scores, CentralityScores):
        scores = scores.scores
    if not scores:
        return {}
    lo, hi = min(scores.values()), max(scores.values())
    if hi == lo:
        return dict.fromkeys(scores, float(min_px))
    span = max_px - min_px
    return {k: min_px + (v - lo) / (hi - lo) * span for k, v in scores.items()}
