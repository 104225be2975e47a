"""Exact shortest delivery routes for candidate customer clusters.

The vehicle starts and ends at the producer (node 0) and visits every
customer of the cluster once. Cluster sizes are capacity-limited, so an
exact dynamic program over subsets is affordable and keeps costs
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

__all__ = ["Route", "shortest_route", "MAX_ROUTE_SIZE"]

MAX_ROUTE_SIZE = 12


@dataclass(frozen=True)
class Route:
    """A closed tour: producer, then order[0], ..., order[-1], then producer."""

    order: Tuple[int, ...]
    length: float


def shortest_route(inst, subset: Sequence[int]) -> Route:
    """Globally shortest tour through the subset, ties broken toward the
    lexicographically smallest visiting order.

    Accepts customer ids in any order and any iterable form; rejects
    subsets larger than MAX_ROUTE_SIZE.
    """
    ids = sorted(set(subset))
    if not ids:
        raise ValueError("empty customer subset")
    if len(ids) > MAX_ROUTE_SIZE:
        raise ValueError(f"subset of {len(ids)} customers exceeds the routing bound of {MAX_ROUTE_SIZE}")
    # Map customer id to matrix node index (customers are 1-based nodes in file order).
    node_of = {}
    for idx, c in enumerate(inst.customers):
        node_of[c.id] = idx + 1
    for cid in ids:
        if cid not in node_of:
            raise ValueError(f"unknown customer id {cid}")

    k = len(ids)
    d0 = [inst.distance(0, node_of[c]) for c in ids]
    dm = [[inst.distance(node_of[a], node_of[b]) for b in ids] for a in ids]

    if k == 1:
        return Route((ids[0],), 2.0 * d0[0])

    # h[(mask, j)] = shortest path cost from customer j through set mask back
    # to the producer; mask excludes j.
    full = (1 << k) - 1
    h: Dict[Tuple[int, int], float] = {}
    for j in range(k):
        h[(0, j)] = d0[j]
    masks_by_count = [[] for _ in range(k + 1)]
    for mask in range(1, full + 1):
        masks_by_count[mask.bit_count()].append(mask)
    for count in range(1, k):
        for mask in masks_by_count[count]:
            for j in range(k):
                if mask & (1 << j):
                    continue
                best = min(dm[j][nxt] + h[(mask & ~(1 << nxt), nxt)]
                           for nxt in range(k) if mask & (1 << nxt))
                h[(mask, j)] = best

    total = min(d0[j] + h[(full & ~(1 << j), j)] for j in range(k))

    # Reconstruct by repeatedly taking the cheapest continuation; exact
    # ties keep the first (smallest) customer, so the order is the
    # lexicographically smallest optimal one.
    order = []
    remaining = full
    cur = -1  # producer
    while remaining:
        best_j = -1
        best_cost = float("inf")
        for j in range(k):
            if not remaining & (1 << j):
                continue
            step = d0[j] if cur < 0 else dm[cur][j]
            cand = step + h[(remaining & ~(1 << j), j)]
            if cand < best_cost:
                best_cost = cand
                best_j = j
        order.append(ids[best_j])
        remaining &= ~(1 << best_j)
        cur = best_j
    return Route(tuple(order), total)
