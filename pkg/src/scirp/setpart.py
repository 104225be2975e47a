"""Exact solvers for cluster selection.

A selection partitions the customers into pool clusters. The objective
is the summed cluster cost plus optional balance penalties: per-period
absolute deviations of the selection's order mean profile (weight eta1)
and order variance profile (weight eta2) from their cycle averages,
each divided by the cycle length. Both the branch-and-bound solver and
the brute-force oracle score complete partitions through one shared
accumulation (ascending cluster id, the same arithmetic make_selection
uses) and break ties by the lexicographically smallest cluster-id set,
so the two return bit-identical optima.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .clustergen import ClusterPool

__all__ = [
    "PenaltyParams",
    "Selection",
    "InfeasibleError",
    "objective",
    "make_selection",
    "solve",
    "brute_force",
    "selection_to_json",
]


class InfeasibleError(Exception):
    """Raised when the pool cannot cover every customer."""


# Headroom kept above the incumbent when pruning, far above float
# accumulation noise on cost sums yet far below any true cost gap, so
# every partition tying the optimum survives to canonical comparison.
PRUNE_SLACK = 1e-6

# Customer counts up to this size get dense per-mask bound tables
# (2**n entries); larger pools fall back to memoized lookups.
_DENSE_LIMIT = 20


@dataclass(frozen=True)
class PenaltyParams:
    eta1: float = 0.0
    eta2: float = 0.0

    def __post_init__(self) -> None:
        if self.eta1 < 0 or self.eta2 < 0:
            raise ValueError("penalty weights must be nonnegative")


@dataclass(frozen=True)
class Selection:
    """A partition of the customers into pool clusters."""

    cluster_ids: Tuple[int, ...]
    tactical_cost: float
    penalty_value: float
    delta_profile: Tuple[float, ...]
    lambda_profile: Tuple[float, ...]

    @property
    def objective_value(self) -> float:
        return self.tactical_cost + self.penalty_value


def _penalty(delta: Sequence[float], lam: Sequence[float], p: PenaltyParams) -> float:
    T = len(delta)
    avg_d = sum(delta) / T
    avg_l = sum(lam) / T
    dev_d = sum(abs(avg_d - x) for x in delta)
    dev_l = sum(abs(avg_l - x) for x in lam)
    return (p.eta1 / T) * dev_d + (p.eta2 / T) * dev_l


def _score(pool: ClusterPool, chosen: Sequence[int],
           p: PenaltyParams) -> Tuple[float, Tuple[int, ...]]:
    """Canonical comparison key of a complete partition.

    Accumulates in ascending cluster id with the same arithmetic
    make_selection uses, so every candidate — whichever solver and
    whichever search order produced it — gets the identical float and
    ties resolve by the id tuple alone.
    """
    ids = tuple(sorted(chosen))
    delta = [0.0] * pool.T
    lam = [0.0] * pool.T
    cost = 0.0
    for cid in ids:
        c = pool.clusters[cid]
        cost += c.cost
        for t in range(pool.T):
            delta[t] += c.delta[t]
            lam[t] += c.lam[t]
    return cost + _penalty(delta, lam, p), ids


def make_selection(pool: ClusterPool, cluster_ids: Sequence[int],
                   p: PenaltyParams) -> Selection:
    """Assemble a Selection record; validates that the ids form a partition."""
    ids = tuple(sorted(cluster_ids))
    covered: set = set()
    delta = [0.0] * pool.T
    lam = [0.0] * pool.T
    cost = 0.0
    for cid in ids:
        c = pool.clusters[cid]
        if covered & set(c.customers):
            raise ValueError("clusters overlap")
        covered.update(c.customers)
        cost += c.cost
        for t in range(pool.T):
            delta[t] += c.delta[t]
            lam[t] += c.lam[t]
    if covered != set(pool.customer_ids):
        raise ValueError("selection does not cover every customer")
    return Selection(ids, cost, _penalty(delta, lam, p), tuple(delta), tuple(lam))


def objective(pool: ClusterPool, sel: Selection, p: PenaltyParams) -> float:
    """Objective of a selection under the given penalty weights.

    Recomputed from the pool so records produced under other weights can
    be re-evaluated.
    """
    cost = sum(pool.clusters[cid].cost for cid in sel.cluster_ids)
    return cost + _penalty(sel.delta_profile, sel.lambda_profile, p)


def _clusters_by_customer(pool: ClusterPool) -> Dict[int, List[int]]:
    by_cust: Dict[int, List[int]] = {cid: [] for cid in pool.customer_ids}
    for idx, c in enumerate(pool.clusters):
        for cust in c.customers:
            by_cust[cust].append(idx)
    return by_cust


def brute_force(pool: ClusterPool, p: PenaltyParams) -> Selection:
    """Exhaustive recursion over all partitions; the exactness oracle."""
    cust_ids = pool.customer_ids
    T = pool.T
    if not cust_ids:
        return Selection((), 0.0, 0.0, (0.0,) * T, (0.0,) * T)
    by_cust = _clusters_by_customer(pool)
    for cust, lst in by_cust.items():
        if not lst:
            raise InfeasibleError(f"customer {cust} appears in no cluster")
    members = [set(c.customers) for c in pool.clusters]
    best: List[Optional[Tuple[float, Tuple[int, ...]]]] = [None]

    def recurse(uncovered: set, chosen: List[int]) -> None:
        if not uncovered:
            key = _score(pool, chosen, p)
            if best[0] is None or key < best[0]:
                best[0] = key
            return
        target = min(uncovered)
        for cid in by_cust[target]:
            if members[cid] <= uncovered:
                chosen.append(cid)
                recurse(uncovered - members[cid], chosen)
                chosen.pop()

    recurse(set(cust_ids), [])
    if best[0] is None:
        raise InfeasibleError("no partition covers every customer")
    return make_selection(pool, best[0][1], p)


class _TacticalBound:
    """Per-pool tables for pruning, shared across solves.

    The exact minimum tactical partition cost of every customer subset
    is independent of the penalty weights, so one table serves every
    solve on the same pool. Small pools get dense per-mask arrays plus
    contiguous per-customer child tables for vectorized expansion;
    larger pools keep a memoized map. Infinity marks uncoverable sets.
    """

    def __init__(self, pool: ClusterPool):
        self.pool = pool
        # Branch on heavy customers first: their commitments shape the
        # partial profiles early, which lets the penalty bound prune
        # near the root. Ties keep the pool order, so the assignment
        # is deterministic.
        heft = {cust: 0.0 for cust in pool.customer_ids}
        for c in pool.clusters:
            w = sum(c.delta) / len(c.customers)
            for cust in c.customers:
                if w > heft[cust]:
                    heft[cust] = w
        ids = sorted(pool.customer_ids, key=lambda cust: -heft[cust])
        self.n_cust = len(ids)
        self.bit_of = {cust: 1 << k for k, cust in enumerate(ids)}
        self.order = ids
        self.members_mask = []
        self.costs = []
        for c in pool.clusters:
            mask = 0
            for cust in c.customers:
                mask |= self.bit_of[cust]
            self.members_mask.append(mask)
            self.costs.append(c.cost)
        self.by_lowbit: Dict[int, List[int]] = {}
        for idx, mask in enumerate(self.members_mask):
            low = mask & -mask
            self.by_lowbit.setdefault(low, []).append(idx)
        self.memo: Dict[int, float] = {0: 0.0}
        # The water-filling penalty bound assumes clusters only add
        # mass to a period, never remove it.
        self.profiles_nonneg = all(
            all(d >= 0.0 for d in c.delta) and all(v >= 0.0 for v in c.lam)
            for c in pool.clusters)
        self.dense = 0 < self.n_cust <= _DENSE_LIMIT and bool(pool.clusters)
        if self.dense:
            self._build_dense()

    def _build_dense(self) -> None:
        pool = self.pool
        n = self.n_cust
        size = 1 << n
        cmasks = np.array(self.members_mask, dtype=np.int64)
        costs = np.array(self.costs, dtype=np.float64)
        delta = np.array([c.delta for c in pool.clusters], dtype=np.float64)
        lam = np.array([c.lam for c in pool.clusters], dtype=np.float64)
        T = pool.T
        self.np_delta = delta
        self.np_lam = lam
        self.np_musum = delta.sum(axis=1) / T
        self.np_varsum = lam.sum(axis=1) / T

        # Exact minimum partition cost per customer subset, built
        # bottom-up: cover the subset's lowest customer with each
        # cluster whose own lowest member matches it.
        idx_by_lowbit = {low: np.array(lst, dtype=np.int64)
                         for low, lst in self.by_lowbit.items()}
        tact = np.full(size, np.inf)
        tact[0] = 0.0
        for m in range(1, size):
            low = m & -m
            cand = idx_by_lowbit.get(low)
            if cand is None:
                continue
            cms = cmasks[cand]
            feas = (cms & ~m) == 0
            if not feas.any():
                continue
            sub = cms[feas]
            vals = costs[cand[feas]] + tact[m ^ sub]
            tact[m] = vals.min()
        self.tact_tab = tact

        # Per-customer contiguous child tables for vectorized scans.
        by_cust = _clusters_by_customer(pool)
        self.child_idx: Dict[int, np.ndarray] = {}
        self.child_mask: Dict[int, np.ndarray] = {}
        self.child_cost: Dict[int, np.ndarray] = {}
        self.child_delta: Dict[int, np.ndarray] = {}
        self.child_lam: Dict[int, np.ndarray] = {}
        self.child_musum: Dict[int, np.ndarray] = {}
        self.child_varsum: Dict[int, np.ndarray] = {}
        for cust in pool.customer_ids:
            lst = sorted(by_cust[cust], key=lambda cid: (self.costs[cid], cid))
            sel = np.array(lst, dtype=np.int64)
            self.child_idx[cust] = sel
            self.child_mask[cust] = cmasks[sel]
            self.child_cost[cust] = costs[sel]
            self.child_delta[cust] = delta[sel]
            self.child_lam[cust] = lam[sel]
            self.child_musum[cust] = self.np_musum[sel]
            self.child_varsum[cust] = self.np_varsum[sel]

        # Cheapest per-member cost share of each customer, summed over
        # a subset's members (cost-splitting bound), dense per mask.
        share = np.empty(n)
        for k, cust in enumerate(self.order):
            share[k] = min(costs[cid] / len(pool.clusters[cid].customers)
                           for cid in by_cust[cust])
        split = np.zeros(size)
        for m in range(1, size):
            split[m] = split[m & (m - 1)] + share[(m & -m).bit_length() - 1]
        self.split_tab = split

        # Largest per-period profile share each customer can still
        # contribute (its best cluster share), summed per subset: caps
        # how much completion mass a period can absorb.
        u_d = np.zeros((n, T))
        u_l = np.zeros((n, T))
        for k, cust in enumerate(self.order):
            for cid in by_cust[cust]:
                w = 1.0 / len(pool.clusters[cid].customers)
                u_d[k] = np.maximum(u_d[k], delta[cid] * w)
                u_l[k] = np.maximum(u_l[k], lam[cid] * w)
        cap_d = np.zeros((size, T))
        cap_l = np.zeros((size, T))
        for m in range(1, size):
            k = (m & -m).bit_length() - 1
            cap_d[m] = cap_d[m & (m - 1)] + u_d[k]
            cap_l[m] = cap_l[m & (m - 1)] + u_l[k]
        self.cap_d_tab = cap_d
        self.cap_l_tab = cap_l
        self.memo = None  # the dense table supersedes the memoized map

    def value(self, mask: int) -> float:
        if self.dense:
            return float(self.tact_tab[mask])
        cached = self.memo.get(mask)
        if cached is not None:
            return cached
        low = mask & -mask
        best = float("inf")
        for cid in self.by_lowbit.get(low, ()):  # clusters containing the lowest customer
            cmask = self.members_mask[cid]
            if cmask & ~mask:
                continue
            rest = self.value(mask & ~cmask)
            cand = self.costs[cid] + rest
            if cand < best:
                best = cand
        self.memo[mask] = best
        return best


def solve(pool: ClusterPool, p: PenaltyParams,
          bound_cache: Optional[_TacticalBound] = None,
          warm_ids: Optional[Sequence[int]] = None) -> Selection:
    """Globally optimal selection via depth-first branch-and-bound.

    Branches on the lowest-id uncovered customer. All children of a
    node (the pool clusters containing that customer) are bounded in
    one vectorized pass and visited most-promising-first, which finds
    strong incumbents early and prunes the rest.

    Cost bound: the larger of a cost-splitting bound (each uncovered
    customer pays at least its cheapest per-member share) and the exact
    minimum tactical partition cost of the uncovered set.

    Water-filling penalty bound: every partition delivers the same
    profile totals over the cycle (each customer's order means
    telescope to T times its demand mean, its order variances to T
    times its demand variance), so the per-period averages are known
    constants and the cheapest completion of a partial profile spreads
    the remaining fixed mass to level it; the shortfall is unavoidable
    penalty, added on top of the cost bound. It is evaluated on the
    profile after each candidate child, so a lumpy branch dies before
    it is entered.

    Pruning leaves PRUNE_SLACK of headroom above the incumbent so a
    partition whose true objective ties the optimum is never cut by
    float accumulation noise, and complete partitions are compared by
    the canonical score, so the winner matches the oracle bit-for-bit.
    """
    cust_ids = pool.customer_ids
    T = pool.T
    if not cust_ids:
        return Selection((), 0.0, 0.0, (0.0,) * T, (0.0,) * T)
    by_cust = _clusters_by_customer(pool)
    for cust, lst in by_cust.items():
        if not lst:
            raise InfeasibleError(f"customer {cust} appears in no cluster")

    bound = bound_cache if bound_cache is not None else _TacticalBound(pool)
    bit_of = bound.bit_of
    members_mask = bound.members_mask
    costs = bound.costs
    full_mask = 0
    for cust in cust_ids:
        full_mask |= bit_of[cust]

    children = {cust: sorted(by_cust[cust], key=lambda cid: (costs[cid], cid))
                for cust in cust_ids}
    lowest_cust = {bit: cust for cust, bit in bit_of.items()}

    best_key: List[Optional[Tuple[float, Tuple[int, ...]]]] = [None]

    def leaf(chosen: List[int]) -> None:
        key = _score(pool, chosen, p)
        if best_key[0] is None or key < best_key[0]:
            best_key[0] = key

    # Greedy cover and the tactical optimum seed the incumbent.
    def greedy_cover() -> Optional[List[int]]:
        mask = full_mask
        chosen: List[int] = []
        while mask:
            cust = lowest_cust[mask & -mask]
            pick = None
            for cid in children[cust]:
                if not (members_mask[cid] & ~mask):
                    pick = cid
                    break
            if pick is None:
                return None
            chosen.append(pick)
            mask &= ~members_mask[pick]
        return chosen

    def tactical_cover() -> Optional[List[int]]:
        if bound.value(full_mask) == float("inf"):
            return None
        mask = full_mask
        chosen: List[int] = []
        while mask:
            low = mask & -mask
            target = bound.value(mask)
            for cid in bound.by_lowbit.get(low, ()):
                cmask = members_mask[cid]
                if cmask & ~mask:
                    continue
                if costs[cid] + bound.value(mask & ~cmask) == target:
                    chosen.append(cid)
                    mask &= ~cmask
                    break
            else:
                return None
        return chosen

    greedy = greedy_cover()
    tactical = tactical_cover()
    if greedy is not None:
        leaf(greedy)
    if tactical is not None:
        leaf(tactical)
    if warm_ids is not None:
        # A warm start (say, the previous penalty pair's winner) only
        # seeds the incumbent; an invalid one is simply ignored.
        seen = 0
        for cid in warm_ids:
            if not 0 <= cid < len(pool.clusters):
                seen = -1
                break
            cmask = members_mask[cid]
            if seen & cmask:
                seen = -1
                break
            seen |= cmask
        if seen == full_mask:
            leaf(list(warm_ids))

    # Per-cluster profile totals; every partition's profiles sum to the
    # same cycle totals, so the penalty targets are known up front.
    clusters = pool.clusters
    T_inv = 1.0 / T
    cover = tactical if tactical is not None else greedy
    penalized = (p.eta1 > 0 or p.eta2 > 0) and cover is not None
    use_wf = penalized and bound.profiles_nonneg
    avg_d = avg_l = 0.0
    f1 = f2 = 0.0
    if penalized:
        avg_d = sum(sum(clusters[cid].delta) * T_inv for cid in cover)
        avg_l = sum(sum(clusters[cid].lam) * T_inv for cid in cover)
        f1 = p.eta1 * T_inv
        f2 = p.eta2 * T_inv

    if bound.dense:
        _solve_frontier(pool, bound, best_key, leaf,
                        use_wf, penalized, avg_d, avg_l, f1, f2, full_mask)
    else:
        _solve_scalar(pool, bound, children, lowest_cust, best_key, leaf,
                      use_wf, avg_d, avg_l, f1, f2, full_mask)

    if best_key[0] is None:
        raise InfeasibleError("no partition covers every customer")
    return make_selection(pool, best_key[0][1], p)


# Upper bound on rows advanced through one vectorized expansion pass.
# Keeps peak memory proportional to the slab, not to the widest search
# level, which can run to hundreds of millions of partial partitions
# under weak pruning.
_SLAB_ROWS = 150_000


def _solve_frontier(pool: ClusterPool, bound: _TacticalBound,
                    best_key, leaf, use_wf: bool, penalized: bool,
                    avg_d: float, avg_l: float,
                    f1: float, f2: float, full_mask: int) -> None:
    """Slab-at-a-time search over the dense per-pool tables.

    Partial partitions advance one cluster at a time in bounded slabs,
    child-major: each candidate cluster is applied to every slab row it
    fits in a handful of array operations, bounded, and pruned against
    the running incumbent. Slabs are stacked depth-first so complete
    partitions tighten the incumbent early, and each popped slab is
    re-pruned with its stored bounds before expanding. Complete
    partitions are filtered by their array-arithmetic objective and
    only the survivors within the pruning slack get the canonical
    score, so the winner is still bit-identical to the oracle's.
    """
    T = pool.T
    n = bound.n_cust
    tact_tab = bound.tact_tab
    split_tab = bound.split_tab
    cap_d_tab = bound.cap_d_tab
    cap_l_tab = bound.cap_l_tab

    root = (0,
            np.array([full_mask], dtype=np.int64),
            np.zeros(1),
            np.zeros((1, T)),
            np.zeros((1, T)),
            np.full(1, avg_d),
            np.full(1, avg_l),
            np.full((1, n), -1, dtype=np.int32),
            np.full(1, -np.inf))
    stack = [root]

    # The running cutoff tracks the cheapest candidate seen, canonical
    # or array-accumulated; the two differ by far less than the slack.
    vec_best = np.inf if best_key[0] is None else best_key[0][0]
    cand_obj: List[np.ndarray] = []
    cand_ids: List[np.ndarray] = []

    while stack:
        (level, masks, costs_f, prof_d, prof_l,
         rem_mu, rem_var, ids, lbs) = stack.pop()
        # Bounds were computed against an older incumbent; the
        # depth-first order usually tightened it since.
        alive = lbs <= vec_best + PRUNE_SLACK
        if not alive.any():
            continue
        if not alive.all():
            masks = masks[alive]
            costs_f = costs_f[alive]
            prof_d = prof_d[alive]
            prof_l = prof_l[alive]
            rem_mu = rem_mu[alive]
            rem_var = rem_var[alive]
            ids = ids[alive]

        pending: List[Tuple[np.ndarray, ...]] = []
        pending_rows = 0
        mark = len(stack)

        def flush() -> None:
            nonlocal pending, pending_rows
            if not pending:
                return
            if len(pending) == 1:
                chunk = pending[0]
            else:
                chunk = tuple(np.concatenate([c[i] for c in pending])
                              for i in range(8))
            stack.append((level + 1,) + chunk)
            pending = []
            pending_rows = 0

        lows = masks & -masks
        for cust in bound.order:
            bit = bound.bit_of[cust]
            rows = np.flatnonzero(lows == bit)
            if rows.size == 0:
                continue
            sub_mask = masks[rows]
            sub_cost = costs_f[rows]
            sub_pd = prof_d[rows]
            sub_pl = prof_l[rows]
            sub_rmu = rem_mu[rows]
            sub_rvar = rem_var[rows]
            sub_ids = ids[rows]
            cmask_arr = bound.child_mask[cust]
            ccost = bound.child_cost[cust]
            cdelta = bound.child_delta[cust]
            clam = bound.child_lam[cust]
            cmu = bound.child_musum[cust]
            cvar = bound.child_varsum[cust]
            cidx = bound.child_idx[cust]
            for j in range(cidx.size):
                cm = int(cmask_arr[j])
                feas = (sub_mask & cm) == cm
                if not feas.any():
                    continue
                nmask = sub_mask[feas] & ~cm
                ncost = sub_cost[feas] + float(ccost[j])
                npd = sub_pd[feas] + cdelta[j]
                npl = sub_pl[feas] + clam[j]
                lb = ncost + np.maximum(split_tab[nmask], tact_tab[nmask])
                if use_wf:
                    nrmu = sub_rmu[feas] - float(cmu[j])
                    nrvar = sub_rvar[feas] - float(cvar[j])
                    md = T * nrmu
                    ml = T * nrvar
                    gd = avg_d - npd
                    gl = avg_l - npl
                    gap_d = np.clip(gd, 0.0, None)
                    gap_l = np.clip(gl, 0.0, None)
                    # Completion mass can fill a period's gap only up
                    # to what the uncovered customers can still send
                    # there; the rest of the gap, and any mass beyond
                    # all gaps, is unavoidable deviation.
                    fill_d = np.minimum(gap_d, cap_d_tab[nmask]).sum(axis=1)
                    fill_l = np.minimum(gap_l, cap_l_tab[nmask]).sum(axis=1)
                    lb = lb + (
                        f1 * (np.clip(-gd, 0.0, None).sum(axis=1)
                              + (gap_d.sum(axis=1) - np.minimum(md, fill_d))
                              + np.clip(md - fill_d, 0.0, None))
                        + f2 * (np.clip(-gl, 0.0, None).sum(axis=1)
                                + (gap_l.sum(axis=1) - np.minimum(ml, fill_l))
                                + np.clip(ml - fill_l, 0.0, None)))
                else:
                    nrmu = nrvar = None
                keep = lb <= vec_best + PRUNE_SLACK
                if not keep.any():
                    continue
                kmask = nmask[keep]
                kids = sub_ids[feas][keep].copy()
                kids[:, level] = int(cidx[j])
                at_leaf = kmask == 0
                if at_leaf.any():
                    lpd = npd[keep][at_leaf]
                    lpl = npl[keep][at_leaf]
                    obj = ncost[keep][at_leaf]
                    if penalized:
                        obj = obj + (
                            f1 * np.abs(avg_d - lpd).sum(axis=1)
                            + f2 * np.abs(avg_l - lpl).sum(axis=1))
                    lo = float(obj.min())
                    if lo < vec_best:
                        vec_best = lo
                    sel = obj <= vec_best + PRUNE_SLACK
                    cand_obj.append(obj[sel])
                    cand_ids.append(kids[at_leaf][sel])
                inner = ~at_leaf
                if inner.any():
                    if use_wf:
                        crmu = nrmu[keep][inner]
                        crvar = nrvar[keep][inner]
                    else:
                        crmu = np.zeros(int(inner.sum()))
                        crvar = crmu
                    pending.append((kmask[inner], ncost[keep][inner],
                                    npd[keep][inner], npl[keep][inner],
                                    crmu, crvar, kids[inner],
                                    lb[keep][inner]))
                    pending_rows += int(inner.sum())
                    if pending_rows >= _SLAB_ROWS:
                        flush()
        flush()
        # Children were produced cheapest-first; reverse the pushed
        # segment so the depth-first pop explores them in that order.
        if len(stack) - mark > 1:
            stack[mark:] = stack[mark:][::-1]

    for obj_arr, ids_arr in zip(cand_obj, cand_ids):
        good = obj_arr <= vec_best + PRUNE_SLACK
        for row in ids_arr[good]:
            leaf([int(cid) for cid in row if cid >= 0])


def _solve_scalar(pool: ClusterPool, bound: _TacticalBound, children,
                  lowest_cust, best_key, leaf, use_wf: bool,
                  avg_d: float, avg_l: float, f1: float, f2: float,
                  full_mask: int) -> None:
    """Scalar depth-first search for pools too large for dense tables."""
    T = pool.T
    clusters = pool.clusters
    members_mask = bound.members_mask
    costs = bound.costs
    T_inv = 1.0 / T
    mu_sum = [sum(c.delta) * T_inv for c in clusters]
    var_sum = [sum(c.lam) * T_inv for c in clusters]
    share = {}
    for cust in bound.order:
        share[cust] = min(costs[cid] / len(clusters[cid].customers)
                          for cid in children[cust])
    share_by_bitpos = [share[cust] for cust in bound.order]

    def split_bound(mask: int) -> float:
        total = 0.0
        k = 0
        while mask:
            if mask & 1:
                total += share_by_bitpos[k]
            mask >>= 1
            k += 1
        return total

    delta = [0.0] * T
    lam = [0.0] * T

    def penalty_bound(rem_mu: float, rem_var: float) -> float:
        # Cheapest completion levels each profile toward its average:
        # spread the remaining fixed mass into the periods still below
        # it; what cannot be absorbed, or already overshoots, must pay.
        absorb_d = absorb_l = over_d = over_l = 0.0
        for t in range(T):
            x = avg_d - delta[t]
            if x > 0.0:
                absorb_d += x
            else:
                over_d -= x
            y = avg_l - lam[t]
            if y > 0.0:
                absorb_l += y
            else:
                over_l -= y
        return (f1 * (over_d + abs(absorb_d - T * rem_mu))
                + f2 * (over_l + abs(absorb_l - T * rem_var)))

    def dfs(mask: int, chosen: List[int], cost: float,
            rem_mu: float, rem_var: float) -> None:
        if not mask:
            leaf(chosen)
            return
        lb = cost + max(split_bound(mask), bound.value(mask))
        if use_wf:
            lb += penalty_bound(rem_mu, rem_var)
        if best_key[0] is not None and lb > best_key[0][0] + PRUNE_SLACK:
            return
        cust = lowest_cust[mask & -mask]
        for cid in children[cust]:
            cmask = members_mask[cid]
            if cmask & ~mask:
                continue
            c = clusters[cid]
            chosen.append(cid)
            for t in range(T):
                delta[t] += c.delta[t]
                lam[t] += c.lam[t]
            dfs(mask & ~cmask, chosen, cost + costs[cid],
                rem_mu - mu_sum[cid], rem_var - var_sum[cid])
            chosen.pop()
            for t in range(T):
                delta[t] -= c.delta[t]
                lam[t] -= c.lam[t]

    dfs(full_mask, [], 0.0, avg_d, avg_l)


def selection_to_json(pool: ClusterPool, sel: Selection) -> str:
    doc = {
        "clusters": [
            {
                "customers": list(pool.clusters[cid].customers),
                "periods": list(pool.clusters[cid].schedule.periods),
                "cost": pool.clusters[cid].cost,
            }
            for cid in sel.cluster_ids
        ],
        "cluster_ids": list(sel.cluster_ids),
        "tactical_cost": sel.tactical_cost,
        "penalty_value": sel.penalty_value,
        "delta_profile": list(sel.delta_profile),
        "lambda_profile": list(sel.lambda_profile),
    }
    return json.dumps(doc, indent=2) + "\n"
