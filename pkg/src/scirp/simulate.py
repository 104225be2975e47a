"""Monte-Carlo evaluation of a schedule and purchasing policy.

Two fidelity levels. The aggregate model draws the producer's net
outflow from its continuous per-period law and prices only the
purchasing policy, so its estimate can be compared against the solver's
own average cost. The full model draws every customer's demand, tracks
customer inventories, orders, vehicle loads, and the producer's stock,
and audits the approximations behind the closed-form cluster costs:
negative raw orders, realized service levels, emergency frequency.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

__all__ = [
    "Estimate",
    "SimReport",
    "simulate_aggregate",
    "simulate_full",
    "report_to_json",
]

DEFAULT_WARMUP_CYCLES = 100
_CHUNK_CYCLES = 4096


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float


@dataclass(frozen=True)
class SimReport:
    """Per-cycle cost estimates and model-audit diagnostics."""

    mode: str
    periods: int
    cycles: int
    warmup_cycles: int
    transport: Optional[Estimate]
    holding: Optional[Estimate]
    emergency: Optional[Estimate]
    purchasing: Estimate
    neg_raw_order_freq: Optional[float]
    service: Optional[Dict[int, float]]
    emergency_freq: Optional[float]
    clamp_count: int

    @property
    def total(self) -> float:
        parts = [self.transport, self.holding, self.emergency, self.purchasing]
        return sum(p.mean for p in parts if p is not None)


def _estimate(samples: np.ndarray) -> Estimate:
    n = len(samples)
    mean = float(samples.mean()) if n else 0.0
    se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(mean, se)


def _policy_tables(policy):
    q1 = np.asarray(policy.q1)
    q2 = np.asarray(policy.q2)
    return q1, q2


def _apply_action(policy, q1_row, q2_row, omega2: float, grid_lo: int,
                  step: int, n2: int, K1: float, K2: float,
                  b1: float, b2: float):
    """Look up and apply the grid action nearest to omega2.

    Returns (next stock level, period purchasing cost, clamped flag).
    Buys and sells land on the gridpoint the policy targeted; staying
    keeps the continuous level. The shortage charge follows the sign of
    the gridpoint the action was read from, matching the cost model the
    policy was optimized under.
    """
    idx = int(math.floor((omega2 - grid_lo) / step + 0.5))
    clamped = False
    if idx < 0:
        idx = 0
        clamped = True
    elif idx >= n2:
        idx = n2 - 1
        clamped = True
    gp = grid_lo + idx * step
    cost = K2 if gp < 0 else 0.0
    q1 = int(q1_row[idx])
    q2 = int(q2_row[idx])
    if q1 > 0:
        cost += K1 + b1 * q1
        return float(gp + q1), cost, clamped
    if q2 > 0:
        cost -= b2 * q2
        return float(gp - q2), cost, clamped
    return omega2, cost, clamped


def simulate_aggregate(sel, inst, policy, periods: int, seed: int,
                       warmup_cycles: int = DEFAULT_WARMUP_CYCLES) -> SimReport:
    """Purchasing-cost estimate under continuous net-outflow draws."""
    T = inst.T
    cycles = max(1, math.ceil(periods / T))
    sup = inst.producer.supply
    means = np.array([sel.delta_profile[t] - sup.mean for t in range(T)])
    stds = np.array([math.sqrt(sel.lambda_profile[t] + sup.variance)
                     for t in range(T)])
    q1_tab, q2_tab = _policy_tables(policy)
    grid_lo = policy.w2_lo
    step = policy.step
    n2 = q1_tab.shape[1]
    p = inst.producer
    rng = np.random.default_rng(seed)

    omega = 0.0
    clamp_count = 0
    cost_samples = np.empty(cycles)
    total_cycles = warmup_cycles + cycles
    done = 0
    while done < total_cycles:
        n_c = min(_CHUNK_CYCLES, total_cycles - done)
        draws = rng.standard_normal((n_c, T)) * stds + means
        for c in range(n_c):
            cycle_cost = 0.0
            row = draws[c]
            for t in range(T):
                omega2 = omega - row[t]
                omega, cost, clamped = _apply_action(
                    policy, q1_tab[t], q2_tab[t], omega2, grid_lo, step, n2,
                    p.K1, p.K2, p.b1, p.b2)
                cycle_cost += cost
                if clamped:
                    clamp_count += 1
            k = done + c
            if k >= warmup_cycles:
                cost_samples[k - warmup_cycles] = cycle_cost
        done += n_c

    return SimReport(
        mode="aggregate",
        periods=cycles * T,
        cycles=cycles,
        warmup_cycles=warmup_cycles,
        transport=None,
        holding=None,
        emergency=None,
        purchasing=_estimate(cost_samples),
        neg_raw_order_freq=None,
        service=None,
        emergency_freq=None,
        clamp_count=clamp_count,
    )


def simulate_full(pool, sel, inst, policy, periods: int, seed: int,
                  clamp_orders: bool = True,
                  warmup_cycles: int = DEFAULT_WARMUP_CYCLES) -> SimReport:
    """Customer-level simulation of the selected clusters and the policy.

    Streams are spawned per source (supply first, then one per customer
    in file order), so adding or removing a customer leaves the others'
    sample paths untouched.
    """
    T = inst.T
    cycles = max(1, math.ceil(periods / T))
    p = inst.producer
    sup = p.supply
    clusters = [pool.clusters[cid] for cid in sel.cluster_ids]
    cust_index = {c.id: k for k, c in enumerate(inst.customers)}
    n_cust = inst.n_customers

    # Delivery plan per period: (customer slot, base stock, cluster slot).
    plan: List[List[Tuple[int, int, int]]] = [[] for _ in range(T)]
    transport_cycle = 0.0
    for ci, cl in enumerate(clusters):
        transport_cycle += cl.cT
        for k, per in enumerate(cl.schedule.periods):
            for j, cust in enumerate(cl.customers):
                plan[per - 1].append((cust_index[cust], cl.base_stocks[k][j], ci))
    active: List[List[int]] = [sorted({e[2] for e in plan[t]}) for t in range(T)]

    mus = np.array([c.demand.mean for c in inst.customers])
    sigmas = np.array([c.demand.std for c in inst.customers])

    q1_tab, q2_tab = _policy_tables(policy)
    grid_lo = policy.w2_lo
    step = policy.step
    n2 = q1_tab.shape[1]

    streams = np.random.SeedSequence(seed).spawn(n_cust + 1)
    supply_rng = np.random.default_rng(streams[0])
    cust_rngs = [np.random.default_rng(s) for s in streams[1:]]

    inv = np.array([float(bs) for bs in _initial_stocks(inst, plan, n_cust)])
    omega = 0.0
    clamp_count = 0

    hold_samples = np.empty(cycles)
    emer_samples = np.empty(cycles)
    purch_samples = np.empty(cycles)
    interval_ok = np.zeros(n_cust, dtype=bool)
    interval_open = np.zeros(n_cust, dtype=bool)
    interval_counts = np.zeros(n_cust, dtype=np.int64)
    interval_hits = np.zeros(n_cust, dtype=np.int64)
    neg_orders = 0
    order_events = 0
    emer_events = 0
    delivery_events = 0

    total_cycles = warmup_cycles + cycles
    done = 0
    while done < total_cycles:
        n_c = min(_CHUNK_CYCLES, total_cycles - done)
        demands = np.empty((n_c * T, n_cust))
        for i in range(n_cust):
            demands[:, i] = cust_rngs[i].standard_normal(n_c * T) * sigmas[i] + mus[i]
        supplies = supply_rng.standard_normal(n_c * T) * sup.std + sup.mean
        for c in range(n_c):
            in_sample = done + c >= warmup_cycles
            hold_c = 0.0
            emer_c = 0.0
            purch_c = 0.0
            for t in range(T):
                row = c * T + t
                loads = [0.0] * len(clusters)
                for slot, S, ci in plan[t]:
                    raw = S - inv[slot]
                    if in_sample:
                        order_events += 1
                        if raw < 0:
                            neg_orders += 1
                    order = max(raw, 0.0) if clamp_orders else raw
                    inv[slot] += order
                    loads[ci] += order
                    if interval_open[slot] and in_sample:
                        interval_counts[slot] += 1
                        if interval_ok[slot]:
                            interval_hits[slot] += 1
                    interval_open[slot] = True
                    interval_ok[slot] = True
                shipped = 0.0
                for ci in active[t]:
                    load = loads[ci]
                    shipped += load
                    if in_sample:
                        delivery_events += 1
                    if load > inst.Q:
                        emer_c += inst.e * (load - inst.Q)
                        if in_sample:
                            emer_events += 1
                start = inv.copy()
                inv -= demands[row]
                for i in range(n_cust):
                    hold_c += inst.h * 0.5 * (max(start[i], 0.0) + max(inv[i], 0.0))
                    if inv[i] < 0:
                        interval_ok[i] = False
                omega2 = omega + supplies[row] - shipped
                omega, cost, clamped = _apply_action(
                    policy, q1_tab[t], q2_tab[t], omega2, grid_lo, step, n2,
                    p.K1, p.K2, p.b1, p.b2)
                purch_c += cost
                if clamped:
                    clamp_count += 1
            if in_sample:
                k = done + c - warmup_cycles
                hold_samples[k] = hold_c
                emer_samples[k] = emer_c
                purch_samples[k] = purch_c
        done += n_c

    service = {}
    for c in inst.customers:
        slot = cust_index[c.id]
        n_int = int(interval_counts[slot])
        service[c.id] = float(interval_hits[slot]) / n_int if n_int else 1.0

    return SimReport(
        mode="full",
        periods=cycles * T,
        cycles=cycles,
        warmup_cycles=warmup_cycles,
        transport=Estimate(transport_cycle, 0.0),
        holding=_estimate(hold_samples),
        emergency=_estimate(emer_samples),
        purchasing=_estimate(purch_samples),
        neg_raw_order_freq=(neg_orders / order_events) if order_events else 0.0,
        service=service,
        emergency_freq=(emer_events / delivery_events) if delivery_events else 0.0,
        clamp_count=clamp_count,
    )


def _initial_stocks(inst, plan, n_cust: int) -> List[int]:
    """Start every customer at its first scheduled base stock (or zero)."""
    first = [0] * n_cust
    seen = [False] * n_cust
    for entries in plan:
        for slot, S, _ in entries:
            if not seen[slot]:
                first[slot] = S
                seen[slot] = True
    return first


def report_to_json(report: SimReport) -> str:
    def enc(est: Optional[Estimate]):
        return None if est is None else {"mean": est.mean, "se": est.se}

    doc = {
        "mode": report.mode,
        "periods": report.periods,
        "cycles": report.cycles,
        "warmup_cycles": report.warmup_cycles,
        "transport": enc(report.transport),
        "holding": enc(report.holding),
        "emergency": enc(report.emergency),
        "purchasing": enc(report.purchasing),
        "total": report.total,
        "neg_raw_order_freq": report.neg_raw_order_freq,
        "service": report.service,
        "emergency_freq": report.emergency_freq,
        "clamp_count": report.clamp_count,
    }
    return json.dumps(doc, indent=2) + "\n"
