"""Joint-optimization drivers.

The tactical solver alone minimizes cluster costs; the purchasing
problem is then priced on whatever order profile that schedule implies.
Balance penalties couple the two: for given weights (eta1 on order-mean
deviations, eta2 on order-variance deviations) the tactical optimum
shifts toward smoother producer outflow, usually trading a small
tactical increase for a larger purchasing saving. The drivers explore
the weight space: a two-pass coordinate line search and a full grid
sweep, both scored by the deterministic tactical + purchasing total.
"""

from __future__ import annotations

import csv
import io
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from . import mdp as mdp_mod
from .clustergen import ClusterPool
from .setpart import (PenaltyParams, Selection, _TacticalBound,
                      make_selection, solve)

__all__ = [
    "EvalRecord",
    "Evaluator",
    "evaluate",
    "step_by_step",
    "line_search",
    "grid_search",
    "records_to_csv",
    "thread_cap",
    "DEFAULT_GRID_ETA1",
    "DEFAULT_GRID_ETA2",
]

DEFAULT_ZETA = (1.0, 0.5)
DEFAULT_UB = (8.0, 4.0)
DEFAULT_EPS_INIT = 0.0001
DEFAULT_STEP = 5
DEFAULT_GRID_ETA1 = (0.0, 0.0001, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
DEFAULT_GRID_ETA2 = (0.0, 0.0001, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)


@dataclass(frozen=True)
class EvalRecord:
    """One scored penalty pair: schedule choice plus purchasing cost."""

    eta1: float
    eta2: float
    tactical_cost: float
    mdp_cycle_cost: float
    total: float
    selection: Selection
    tactical_seconds: float
    mdp_seconds: float


def thread_cap() -> int:
    raw = os.environ.get("SCIRP_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


class Evaluator:
    """Memoizing bridge between penalty pairs and their joint cost.

    Distinct penalty pairs often pick the same partition; the purchasing
    solve is keyed on the partition so it runs once per distinct
    schedule. Caches are lock-guarded for use from worker threads.

    For a fixed partition the objective is affine in the penalty
    weights, so if four exactly solved corner points of an axis-aligned
    rectangle (or the two ends of a segment) agree on the optimal
    partition, every weight pair inside provably shares it. The
    evaluator keeps a registry of exactly solved points and serves such
    interior queries from the certificate instead of a fresh solve; the
    drivers seed the registry with the corner points of the regions
    they are about to sweep.
    """

    def __init__(self, pool: ClusterPool, inst, step: int = DEFAULT_STEP,
                 tail_mass: float = mdp_mod.DEFAULT_TAIL_MASS,
                 epsilon: float = mdp_mod.DEFAULT_EPSILON):
        self.pool = pool
        self.inst = inst
        self.step = step
        self.tail_mass = tail_mass
        self.epsilon = epsilon
        self._bound = _TacticalBound(pool)
        self._by_eta: Dict[Tuple[float, float], EvalRecord] = {}
        self._by_selection: Dict[Tuple[int, ...], Tuple[float, float]] = {}
        self._exact: Dict[Tuple[float, float], Tuple[int, ...]] = {}
        self._warm: Optional[Tuple[int, ...]] = None
        self._lock = threading.Lock()

    def _certified_ids(self, e1: float, e2: float) -> Optional[Tuple[int, ...]]:
        """Optimal partition implied by solved corners, if any bracket.

        Looks for two exactly solved points with the same winning
        partition spanning (e1, e2) whose other two rectangle corners
        were also solved with that partition; a degenerate rectangle is
        a segment. Affinity of every partition's objective in the
        weights makes the shared winner optimal anywhere inside.
        """
        with self._lock:
            pts = list(self._exact.items())
        exact_set = {}
        for (x, y), ids in pts:
            exact_set.setdefault(ids, set()).add((x, y))
        for (x1, y1), ids in pts:
            if x1 > e1 or y1 > e2:
                continue
            group = exact_set[ids]
            for (x2, y2) in group:
                if x2 < e1 or y2 < e2:
                    continue
                if (x1, y2) in group and (x2, y1) in group:
                    return ids
        return None

    def _record_for(self, key: Tuple[float, float],
                    ids: Tuple[int, ...],
                    tactical_seconds: float) -> EvalRecord:
        sel = make_selection(self.pool, ids, PenaltyParams(*key))
        with self._lock:
            cached = self._by_selection.get(sel.cluster_ids)
        if cached is not None:
            cycle_cost, mdp_seconds = cached
        else:
            t0 = time.perf_counter()
            outflow = mdp_mod.build_outflow(sel, self.inst, self.step, self.tail_mass)
            model = mdp_mod.build_model(self.inst, outflow)
            policy = mdp_mod.solve(model, outflow, self.epsilon)
            mdp_seconds = time.perf_counter() - t0
            cycle_cost = policy.cycle_cost
            with self._lock:
                self._by_selection.setdefault(sel.cluster_ids,
                                              (cycle_cost, mdp_seconds))
        rec = EvalRecord(key[0], key[1], sel.tactical_cost, cycle_cost,
                         sel.tactical_cost + cycle_cost, sel,
                         tactical_seconds, mdp_seconds)
        with self._lock:
            rec = self._by_eta.setdefault(key, rec)
        return rec

    def _evaluate(self, eta1: float, eta2: float, allow_cert: bool) -> EvalRecord:
        key = (float(eta1), float(eta2))
        with self._lock:
            hit = self._by_eta.get(key)
        if hit is not None:
            return hit

        if allow_cert:
            ids = self._certified_ids(*key)
            if ids is not None:
                with self._lock:
                    self._exact[key] = ids
                return self._record_for(key, ids, 0.0)

        with self._lock:
            warm = self._warm
        t0 = time.perf_counter()
        # The warm start only speeds pruning; the result is the exact
        # optimum either way, so memoized records stay reproducible.
        sel = solve(self.pool, PenaltyParams(eta1, eta2), self._bound,
                    warm_ids=warm)
        tactical_seconds = time.perf_counter() - t0
        with self._lock:
            self._warm = sel.cluster_ids
            self._exact[key] = sel.cluster_ids
        return self._record_for(key, sel.cluster_ids, tactical_seconds)

    def evaluate(self, eta1: float, eta2: float) -> EvalRecord:
        return self._evaluate(eta1, eta2, True)

    def evaluate_exact(self, eta1: float, eta2: float) -> EvalRecord:
        """Evaluate without consulting certificates.

        A previously certified pair returns its stored record; its
        partition is proven optimal there, so it anchors further
        certificates just as well as a direct solve.
        """
        return self._evaluate(eta1, eta2, False)

    def solve_policy(self, sel: Selection):
        """Re-solve the purchasing policy of a stored selection."""
        outflow = mdp_mod.build_outflow(sel, self.inst, self.step, self.tail_mass)
        model = mdp_mod.build_model(self.inst, outflow)
        return mdp_mod.solve(model, outflow, self.epsilon), outflow


def evaluate(pool: ClusterPool, inst, eta1: float, eta2: float,
             **settings) -> EvalRecord:
    return Evaluator(pool, inst, **settings).evaluate(eta1, eta2)


def step_by_step(pool: ClusterPool, inst,
                 evaluator: Optional[Evaluator] = None, **settings) -> EvalRecord:
    """Tactical optimum first, purchasing priced on it afterwards."""
    ev = evaluator if evaluator is not None else Evaluator(pool, inst, **settings)
    return ev.evaluate(0.0, 0.0)


def _best_of(records: Sequence[EvalRecord]) -> EvalRecord:
    best = records[0]
    for rec in records[1:]:
        if rec.total < best.total:
            best = rec
    return best


def _leg_points(axis: int, start: float, fixed: float, z: float, cap: float,
                other_at_cap: bool) -> List[Tuple[float, float]]:
    """Weight pairs a walk leg can visit, in walk order.

    Accumulates exactly like the walk (add the increment, clamp at the
    cap). When the other weight already sits at its cap, the walk stops
    before scoring the both-caps pair, so the cap value is dropped.
    """
    vals = [start]
    v = start
    while v < cap:
        v = min(v + z, cap)
        vals.append(v)
    if other_at_cap and len(vals) > 1:
        vals.pop()
    if axis == 0:
        return [(v, fixed) for v in vals]
    return [(fixed, v) for v in vals]


def _presolve_span(ev: Evaluator, points: Sequence[Tuple[float, float]]) -> None:
    """Solve just enough of an ordered span to certify the rest.

    Solves the two end points; if they disagree on the partition,
    bisects until every stretch has agreeing solved ends or adjacent
    points are solved directly. Interior queries then land on a
    certificate.
    """
    def rec(lo: int, hi: int) -> None:
        if hi - lo <= 1:
            return
        a = ev.evaluate_exact(*points[lo])
        b = ev.evaluate_exact(*points[hi])
        if a.selection.cluster_ids == b.selection.cluster_ids:
            return
        mid = (lo + hi) // 2
        rec(lo, mid)
        rec(mid, hi)

    if len(points) >= 2:
        rec(0, len(points) - 1)


def _presolve_box(ev: Evaluator, eta1_list: Sequence[float],
                  eta2_list: Sequence[float]) -> None:
    """Solve enough grid corners to certify the grid's interior.

    Recursively splits the index rectangle until its four solved
    corners agree on the partition (certifying everything inside) or
    the rectangle has collapsed to a single cell.
    """
    def rec(i1: int, i2: int, j1: int, j2: int) -> None:
        corners = {
            ev.evaluate_exact(eta1_list[i1], eta2_list[j1]).selection.cluster_ids,
            ev.evaluate_exact(eta1_list[i2], eta2_list[j1]).selection.cluster_ids,
            ev.evaluate_exact(eta1_list[i1], eta2_list[j2]).selection.cluster_ids,
            ev.evaluate_exact(eta1_list[i2], eta2_list[j2]).selection.cluster_ids,
        }
        if len(corners) == 1:
            return
        di, dj = i2 - i1, j2 - j1
        if di <= 1 and dj <= 1:
            return
        if di >= dj:
            mid = (i1 + i2) // 2
            rec(i1, mid, j1, j2)
            rec(mid, i2, j1, j2)
        else:
            mid = (j1 + j2) // 2
            rec(i1, i2, j1, mid)
            rec(i1, i2, mid, j2)

    if eta1_list and eta2_list:
        rec(0, len(eta1_list) - 1, 0, len(eta2_list) - 1)


def line_search(pool: ClusterPool, inst,
                zeta: Tuple[float, float] = DEFAULT_ZETA,
                ub: Tuple[float, float] = DEFAULT_UB,
                eps_init: float = DEFAULT_EPS_INIT,
                evaluator: Optional[Evaluator] = None,
                **settings) -> Tuple[EvalRecord, List[EvalRecord]]:
    """Coordinate walk over the penalty weights, best pair wins.

    Starting from (eps_init, eps_init), the active weight advances by
    its increment while the joint total keeps matching or beating the
    incumbent, capped at its upper bound; a worse total retreats one
    increment and hands the walk to the other weight. Two hand-overs
    end the walk, as does reaching both caps. The unpenalized pair is
    scored first so the result never loses to it.
    """
    if zeta[0] <= 0 or zeta[1] <= 0:
        raise ValueError("increments must be positive")
    if ub[0] <= 0 or ub[1] <= 0:
        raise ValueError("upper bounds must be positive")
    ev = evaluator if evaluator is not None else Evaluator(pool, inst, **settings)

    history: List[EvalRecord] = [ev.evaluate(0.0, 0.0)]
    eta = [eps_init, eps_init]
    psi = 1
    hand_overs = 0
    incumbent = float("inf")
    leg_key: Optional[Tuple[int, float]] = None
    while hand_overs != 2 and (eta[0], eta[1]) != (ub[0], ub[1]):
        active = 0 if psi == 1 else 1
        key = (active, eta[1 - active])
        if key != leg_key:
            # Certify the leg ahead so points along it mostly resolve
            # without a fresh tactical solve.
            _presolve_span(ev, _leg_points(
                active, eta[active], eta[1 - active], zeta[active],
                ub[active], eta[1 - active] == ub[1 - active]))
            leg_key = key
        rec = ev.evaluate(eta[0], eta[1])
        history.append(rec)
        if rec.total <= incumbent:
            incumbent = rec.total
            if eta[active] < ub[active]:
                eta[active] = min(eta[active] + zeta[active], ub[active])
            else:
                psi = 1 - psi
                hand_overs += 1
        else:
            eta[active] = max(eta[active] - zeta[active], 0.0)
            psi = 1 - psi
            hand_overs += 1
    return _best_of(history), history


def grid_search(pool: ClusterPool, inst,
                eta1_list: Sequence[float] = DEFAULT_GRID_ETA1,
                eta2_list: Sequence[float] = DEFAULT_GRID_ETA2,
                evaluator: Optional[Evaluator] = None,
                threads: Optional[int] = None,
                **settings) -> Tuple[EvalRecord, List[EvalRecord]]:
    """Score the full Cartesian product of penalty weights.

    Returns the argmin (first in row-major grid order on ties) and all
    records. Points evaluate concurrently up to the thread cap.
    """
    if not eta1_list or not eta2_list:
        raise ValueError("grids must be nonempty")
    ev = evaluator if evaluator is not None else Evaluator(pool, inst, **settings)
    _presolve_box(ev,
                  sorted({float(v) for v in eta1_list}),
                  sorted({float(v) for v in eta2_list}))
    pairs = [(e1, e2) for e1 in eta1_list for e2 in eta2_list]
    n_workers = threads if threads is not None else thread_cap()
    n_workers = max(1, min(n_workers, len(pairs)))
    if n_workers == 1:
        records = [ev.evaluate(e1, e2) for e1, e2 in pairs]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool_exec:
            records = list(pool_exec.map(lambda p: ev.evaluate(*p), pairs))
    return _best_of(records), records


def records_to_csv(records: Sequence[EvalRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eta1", "eta2", "tactical", "mdp", "total"])
    for rec in records:
        writer.writerow([rec.eta1, rec.eta2, rec.tactical_cost,
                         rec.mdp_cycle_cost, rec.total])
    return buf.getvalue()
