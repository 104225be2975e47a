"""Cluster enumeration and pricing.

A cluster is a customer subset served together on a cyclic delivery
schedule. Each delivery raises every member to a base-stock level sized
for the gap until the next delivery; the vehicle load it induces is a
normal law. This module enumerates every feasible (subset, schedule)
pair under the storage and vehicle-fill chance constraints and prices
its transport, holding, and emergency cost components along with the
per-period order mean and variance profiles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .routing import MAX_ROUTE_SIZE, Route, shortest_route
from .stochastics import (
    Gaussian,
    normal_cdf,
    normal_quantile,
    partial_expectation_pos,
    round_half_up,
    sum_independent,
)

__all__ = [
    "Schedule",
    "Cluster",
    "ClusterPool",
    "base_stock",
    "storage_horizon",
    "order_distribution",
    "delivery_load",
    "check_cc2",
    "holding_cost",
    "emergency_cost",
    "price_cluster",
    "enumerate_clusters",
    "pool_to_jsonl",
    "pool_from_jsonl",
]


@dataclass(frozen=True)
class Schedule:
    """Delivery periods within the cycle, with cyclic gap structure.

    periods are 1-based and sorted. gaps[k] = (n, m) for periods[k]:
    n periods until the next delivery, m periods since the previous,
    both measured cyclically. A single delivery has n = m = T.
    """

    T: int
    periods: Tuple[int, ...]
    gaps: Tuple[Tuple[int, int], ...]

    @staticmethod
    def from_periods(periods: Sequence[int], T: int) -> "Schedule":
        ps = tuple(sorted(set(int(p) for p in periods)))
        if not ps:
            raise ValueError("schedule needs at least one delivery period")
        if ps[0] < 1 or ps[-1] > T:
            raise ValueError("delivery periods must lie in 1..T")
        k = len(ps)
        gaps = []
        for idx, t in enumerate(ps):
            nxt = ps[(idx + 1) % k]
            prv = ps[(idx - 1) % k]
            n = (nxt - t) % T or T
            m = (t - prv) % T or T
            gaps.append((n, m))
        return Schedule(T, ps, tuple(gaps))

    @property
    def longest_gap(self) -> int:
        return max(n for n, _ in self.gaps)


@dataclass(frozen=True)
class Cluster:
    """A priced (subset, schedule) pair.

    base_stocks[k][j] is the integer order-up-to level of customer
    customers[j] at delivery period schedule.periods[k]. delta[t-1] and
    lam[t-1] are the order mean and order variance the cluster places on
    period t (zero on non-delivery periods).
    """

    customers: Tuple[int, ...]
    route: Route
    schedule: Schedule
    base_stocks: Tuple[Tuple[int, ...], ...]
    cT: float
    cH: float
    cE: float
    delta: Tuple[float, ...]
    lam: Tuple[float, ...]

    @property
    def cost(self) -> float:
        return self.cT + self.cH + self.cE


@dataclass(frozen=True)
class ClusterPool:
    """Canonically ordered cluster list (sorted by subset, then schedule)."""

    T: int
    clusters: Tuple[Cluster, ...]

    @property
    def customer_ids(self) -> Tuple[int, ...]:
        ids = set()
        for c in self.clusters:
            ids.update(c.customers)
        return tuple(sorted(ids))

    def find(self, customers: Sequence[int], periods: Sequence[int]) -> int:
        """Index of the cluster with this subset and delivery-period set."""
        cs = tuple(sorted(customers))
        ps = tuple(sorted(periods))
        for idx, c in enumerate(self.clusters):
            if c.customers == cs and c.schedule.periods == ps:
                return idx
        raise KeyError(f"no cluster {cs} with schedule {ps} in the pool")


def base_stock(demand: Gaussian, n: int, alpha: float) -> int:
    """Order-up-to level covering n periods of demand at service level alpha."""
    if n < 1:
        raise ValueError("coverage gap must be at least one period")
    z = normal_quantile(alpha)
    return round_half_up(n * demand.mean + z * demand.std * math.sqrt(n))


def storage_horizon(demand: Gaussian, U: float, T: int, alpha: float) -> int:
    """Longest gap whose base stock still fits the storage capacity U (0 if none)."""
    theta = 0
    for n in range(1, T + 1):
        if base_stock(demand, n, alpha) <= U:
            theta = n
    return theta


def order_distribution(demand: Gaussian, n: int, m: int, alpha: float) -> Gaussian:
    """Law of one customer's order at a delivery with gap n ahead, m behind.

    The order tops the inventory back up to the n-period base stock after
    m periods of demand since the previous delivery; negative order mass
    is knowingly ignored (the simulator quantifies it).
    """
    if n < 1 or m < 1:
        raise ValueError("gaps must be at least one period")
    z = normal_quantile(alpha)
    mean = n * demand.mean + z * demand.std * (math.sqrt(n) - math.sqrt(m))
    return Gaussian(mean, demand.std * math.sqrt(m))


def delivery_load(demands: Sequence[Gaussian], n: int, m: int, alpha: float) -> Gaussian:
    """Law of the vehicle load at a delivery: sum of the members' orders."""
    return sum_independent([order_distribution(d, n, m, alpha) for d in demands])


def check_cc2(load: Gaussian, Q: float, gamma: float) -> bool:
    """Vehicle-fill chance constraint: P(load <= Q) >= gamma."""
    if load.std == 0.0:
        return load.mean <= Q
    return normal_cdf((Q - load.mean) / load.std) >= gamma


def holding_cost(h: float, demands: Sequence[Gaussian], schedule: Schedule,
                 base_stocks: Sequence[Sequence[int]]) -> float:
    """Expected cyclic holding cost.

    For each delivery with gap n and base stock S, day l in 0..n-1 holds
    on average half the sum of the expected positive inventory after l
    and after l+1 periods of demand.
    """
    total = 0.0
    for k, (n, _m) in enumerate(schedule.gaps):
        for j, d in enumerate(demands):
            s = float(base_stocks[k][j])
            prev = s  # zero periods of demand
            for step in range(1, n + 1):
                cur = partial_expectation_pos(
                    Gaussian(s - step * d.mean, d.std * math.sqrt(step)))
                total += 0.5 * (prev + cur)
                prev = cur
    return h * total


def emergency_cost(e: float, Q: float, alpha: float, demands: Sequence[Gaussian],
                   schedule: Schedule) -> float:
    """Expected cyclic emergency-shipment cost e * E[(load - Q)^+] per delivery."""
    total = 0.0
    for n, m in schedule.gaps:
        load = delivery_load(demands, n, m, alpha)
        total += partial_expectation_pos(Gaussian(load.mean - Q, load.std))
    return e * total


def price_cluster(inst, customers: Sequence[int], schedule: Schedule,
                  route: Optional[Route] = None) -> Cluster:
    """Assemble a fully priced Cluster for the subset and schedule."""
    ids = tuple(sorted(customers))
    by_id = {c.id: c for c in inst.customers}
    demands = [by_id[i].demand for i in ids]
    if route is None:
        route = shortest_route(inst, ids)
    base = tuple(
        tuple(base_stock(d, n, inst.alpha) for d in demands)
        for (n, _m) in schedule.gaps
    )
    cT = len(schedule.periods) * (inst.W + inst.w * route.length)
    cH = holding_cost(inst.h, demands, schedule, base)
    cE = emergency_cost(inst.e, inst.Q, inst.alpha, demands, schedule)
    delta = [0.0] * inst.T
    lam = [0.0] * inst.T
    for k, t in enumerate(schedule.periods):
        n, m = schedule.gaps[k]
        for d in demands:
            od = order_distribution(d, n, m, inst.alpha)
            delta[t - 1] += od.mean
            lam[t - 1] += od.variance
    return Cluster(ids, route, schedule, base, cT, cH, cE, tuple(delta), tuple(lam))


def _gap_bound(demands: Sequence[Gaussian], Q: float, alpha: float, gamma: float,
               T: int) -> int:
    """Longest delivery gap g any schedule of this subset could sustain.

    At fixed g the vehicle-fill margin is monotone in sqrt(m), so only
    the endpoint gaps-behind m = 1 and m = min(g, T - g) need checking
    (m = T for the single-delivery case g = T). A gap g is sustainable
    if the better endpoint passes; the exact per-period re-check later
    rejects any individual schedule that does not.
    """
    z_a = normal_quantile(alpha)
    z_g = normal_quantile(gamma)
    mu_sum = sum(d.mean for d in demands)
    sd_sum = sum(d.std for d in demands)
    var_sum = sum(d.variance for d in demands)
    bound = 0
    for g in range(1, T + 1):
        ms = (T,) if g == T else (1, min(g, T - g))
        ok = False
        for m in ms:
            margin = (Q - g * mu_sum
                      - z_a * sd_sum * (math.sqrt(g) - math.sqrt(m))
                      - z_g * math.sqrt(m * var_sum))
            if margin >= 0.0:
                ok = True
                break
        if ok:
            bound = g
    return bound


def enumerate_clusters(inst, max_subset_size: int = MAX_ROUTE_SIZE) -> ClusterPool:
    """Enumerate every feasible priced cluster.

    Subsets grow recursively and are kept when a full (every-period)
    schedule satisfies the vehicle-fill constraint; growth stops at
    subsets that fail it, which is safe because the full schedule is the
    weakest schedule and adding a customer only worsens it (superset
    pruning is disabled for gamma below one half, where that
    monotonicity argument no longer applies). For each kept subset, all
    schedules whose longest gap fits both the vehicle-fill gap bound and
    every member's storage horizon are re-verified exactly per delivery
    period and priced.
    """
    customers = sorted(inst.customers, key=lambda c: c.id)
    n = len(customers)
    if n == 0:
        return ClusterPool(inst.T, ())
    T = inst.T
    # The subset gate (drop subsets whose full schedule fails the fill
    # constraint, and prune their supersets) is provably lossless only
    # when both service quantiles are nonnegative; otherwise fall back to
    # enumerating every subset and let the exact per-period check decide.
    gate = normal_quantile(inst.gamma) >= 0.0 and normal_quantile(inst.alpha) >= 0.0

    theta = {c.id: storage_horizon(c.demand, c.U, T, inst.alpha) for c in customers}

    kept: List[Tuple[int, ...]] = []

    def full_schedule_ok(demands: List[Gaussian]) -> bool:
        return check_cc2(sum_independent(demands), inst.Q, inst.gamma)

    def grow(subset: List[int], demands: List[Gaussian], start: int) -> None:
        for idx in range(start, n):
            c = customers[idx]
            subset.append(c.id)
            demands.append(c.demand)
            ok = full_schedule_ok(demands)
            if ok or not gate:
                kept.append(tuple(subset))
            if (ok or not gate) and len(subset) < max_subset_size:
                grow(subset, demands, idx + 1)
            subset.pop()
            demands.pop()

    grow([], [], 0)

    by_id = {c.id: c for c in customers}
    # All schedules of the cycle, grouped by longest gap for the gate.
    all_schedules = [Schedule.from_periods(
        [t + 1 for t in range(T) if mask & (1 << t)], T)
        for mask in range(1, 1 << T)]

    clusters: List[Cluster] = []
    for subset in kept:
        demands = [by_id[i].demand for i in subset]
        ub = _gap_bound(demands, inst.Q, inst.alpha, inst.gamma, T)
        cap = min([ub] + [theta[i] for i in subset])
        if cap < 1:
            continue
        route = shortest_route(inst, subset)
        for sched in all_schedules:
            if sched.longest_gap > cap:
                continue
            feasible = True
            for k, (gn, gm) in enumerate(sched.gaps):
                if any(base_stock(d, gn, inst.alpha) > by_id[i].U
                       for i, d in zip(subset, demands)):
                    feasible = False
                    break
                if not check_cc2(delivery_load(demands, gn, gm, inst.alpha),
                                 inst.Q, inst.gamma):
                    feasible = False
                    break
            if feasible:
                clusters.append(price_cluster(inst, subset, sched, route))

    clusters.sort(key=lambda c: (c.customers, c.schedule.periods))
    return ClusterPool(T, tuple(clusters))


def pool_to_jsonl(pool: ClusterPool) -> str:
    """One cluster per line, for inspection and external verification."""
    lines = []
    for c in pool.clusters:
        lines.append(json.dumps({
            "customers": list(c.customers),
            "periods": list(c.schedule.periods),
            "gaps": [list(g) for g in c.schedule.gaps],
            "route": list(c.route.order),
            "route_length": c.route.length,
            "base_stocks": [list(row) for row in c.base_stocks],
            "cT": c.cT,
            "cH": c.cH,
            "cE": c.cE,
            "cost": c.cost,
            "delta": list(c.delta),
            "lambda": list(c.lam),
        }))
    return "\n".join(lines) + ("\n" if lines else "")


def pool_from_jsonl(text: str, T: int) -> ClusterPool:
    clusters = []
    for line in text.splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        sched = Schedule.from_periods(doc["periods"], T)
        clusters.append(Cluster(
            customers=tuple(doc["customers"]),
            route=Route(tuple(doc["route"]), float(doc["route_length"])),
            schedule=sched,
            base_stocks=tuple(tuple(int(x) for x in row) for row in doc["base_stocks"]),
            cT=float(doc["cT"]),
            cH=float(doc["cH"]),
            cE=float(doc["cE"]),
            delta=tuple(float(x) for x in doc["delta"]),
            lam=tuple(float(x) for x in doc["lambda"]),
        ))
    return ClusterPool(T, tuple(clusters))
