"""Cyclic average-cost purchasing model for the producer.

Each period the producer's storage level absorbs a random net outflow
(deliveries to customers minus supply), then a buy/sell decision moves
it back into [0, capacity]. Buys pay a fixed cost plus a unit price,
sells earn a smaller unit price, and a period that starts with negative
stock pays a shortage charge. The long-run optimum is found by relative
value iteration on the cyclic chain; the result is a deterministic
policy table plus the average cost per period (gain).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .stochastics import DiscreteDistribution, Gaussian, discretize

__all__ = [
    "OutflowModel",
    "MdpModel",
    "Policy",
    "PeriodShape",
    "build_outflow",
    "build_model",
    "action_cost",
    "solve",
    "extract_sS",
    "policy_to_json",
    "shape_table_to_csv",
]

DEFAULT_TAIL_MASS = 1e-6
DEFAULT_EPSILON = 0.1
MAX_SWEEPS = 10 ** 6


@dataclass(frozen=True)
class OutflowModel:
    """Per-period net outflow of producer stock, discretized on the step grid."""

    T: int
    distributions: Tuple[DiscreteDistribution, ...]

    def __post_init__(self) -> None:
        if len(self.distributions) != self.T:
            raise ValueError("need one outflow distribution per period")
        steps = {d.step for d in self.distributions}
        if len(steps) != 1:
            raise ValueError("outflow distributions must share one step")

    @property
    def step(self) -> int:
        return self.distributions[0].step

    @property
    def max_support(self) -> int:
        return max(d.max_value for d in self.distributions)

    @property
    def min_support(self) -> int:
        return min(d.min_value for d in self.distributions)


@dataclass(frozen=True)
class MdpModel:
    """State grids and cost parameters of the purchasing problem."""

    T: int
    capacity: int
    step: int
    w2_lo: int
    w2_hi: int
    K1: float
    K2: float
    b1: float
    b2: float
    per_period_cost_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.capacity <= 0 or self.step <= 0:
            raise ValueError("capacity and step must be positive")
        if self.capacity % self.step != 0:
            raise ValueError("step must divide the storage capacity")
        if self.w2_lo % self.step != 0 or self.w2_hi % self.step != 0:
            raise ValueError("post-outflow range must lie on the step grid")
        if self.w2_lo > 0 or self.w2_hi < self.capacity:
            raise ValueError("post-outflow range must cover [0, capacity]")

    @property
    def n1(self) -> int:
        """Number of storage gridpoints in [0, capacity]."""
        return self.capacity // self.step + 1

    @property
    def n2(self) -> int:
        """Number of post-outflow gridpoints in [w2_lo, w2_hi]."""
        return (self.w2_hi - self.w2_lo) // self.step + 1


def build_outflow(sel, inst, step: int, tail_mass: float = DEFAULT_TAIL_MASS) -> OutflowModel:
    """Net outflow per period: deliveries minus supply, independent normals."""
    sup = inst.producer.supply
    dists = []
    for t in range(inst.T):
        mean = sel.delta_profile[t] - sup.mean
        var = sel.lambda_profile[t] + sup.variance
        dists.append(discretize(Gaussian(mean, math.sqrt(var)), step, tail_mass))
    return OutflowModel(inst.T, tuple(dists))


def build_model(inst, outflow: OutflowModel,
                per_period_cost_offset: float = 0.0) -> MdpModel:
    """Size the state grids to cover every reachable post-outflow level."""
    p = inst.producer
    cap = int(p.capacity)
    if cap != p.capacity:
        raise ValueError("storage capacity must be an integer on the kg grid")
    step = outflow.step
    w2_lo = min(0, -outflow.max_support)
    w2_hi = max(cap, cap - outflow.min_support)
    return MdpModel(inst.T, cap, step, w2_lo, w2_hi,
                    p.K1, p.K2, p.b1, p.b2, per_period_cost_offset)


def action_cost(model: MdpModel, omega2: float, q1: float, q2: float) -> float:
    """Immediate cost of buying q1 / selling q2 at post-outflow level omega2."""
    if q1 < 0 or q2 < 0:
        raise ValueError("quantities must be nonnegative")
    if q1 > 0 and q2 > 0:
        raise ValueError("cannot buy and sell in the same period")
    post = omega2 + q1 - q2
    if post < 0 or post > model.capacity:
        raise ValueError("action must restore storage into [0, capacity]")
    cost = model.b1 * q1 - model.b2 * q2
    if q1 > 0:
        cost += model.K1
    if omega2 < 0:
        cost += model.K2
    return cost


@dataclass(frozen=True)
class Policy:
    """Greedy policy table with the gain certified by value iteration."""

    T: int
    step: int
    capacity: int
    w2_lo: int
    q1: np.ndarray
    q2: np.ndarray
    gain: float
    cycle_cost: float
    v1: np.ndarray
    sweeps: int
    residual_span: float

    @property
    def n2(self) -> int:
        return self.q1.shape[1]

    def index_of(self, omega2: float) -> Tuple[int, bool]:
        """Nearest grid index for a post-outflow level; flags out-of-grid clamps."""
        idx = int(math.floor((omega2 - self.w2_lo) / self.step + 0.5))
        if idx < 0:
            return 0, True
        if idx >= self.n2:
            return self.n2 - 1, True
        return idx, False

    def action(self, t: int, omega2: float) -> Tuple[int, int]:
        """Grid action at the nearest gridpoint to omega2 (1-based period)."""
        idx, _ = self.index_of(omega2)
        return int(self.q1[t - 1, idx]), int(self.q2[t - 1, idx])

    def grid_value(self, idx: int) -> int:
        return self.w2_lo + idx * self.step


def _sweep(model: MdpModel, outflow: OutflowModel, v1: np.ndarray,
           record: bool = False):
    """One backward pass over the cycle.

    Returns the updated start-of-cycle value vector and, when record is
    set, the greedy action tables. Periods later in the cycle use values
    already updated in this pass; period T wraps onto the incoming v1.
    """
    n1 = model.n1
    n2 = model.n2
    step = model.step
    base = model.w2_lo // step
    grid1 = np.arange(n1, dtype=np.float64) * step
    w2_vals = np.arange(n2, dtype=np.float64) * step + model.w2_lo
    i_arr = np.arange(n2) + base
    stay_ok = (i_arr >= 0) & (i_arr <= n1 - 1)
    buy_ok = i_arr <= n1 - 2
    sell_ok = i_arr >= 1
    stay_idx = np.clip(i_arr, 0, n1 - 1)
    buy_from = np.clip(i_arr + 1, 0, n1 - 1)
    sell_upto = np.clip(i_arr - 1, 0, n1 - 1)
    pen = np.where(w2_vals < 0, model.K2, 0.0)
    inf = np.inf

    q1_tab = np.zeros((model.T, n2), dtype=np.int64) if record else None
    q2_tab = np.zeros((model.T, n2), dtype=np.int64) if record else None

    vnext = v1
    for t in range(model.T, 0, -1):
        bb = model.b1 * grid1 + vnext
        ss = model.b2 * grid1 + vnext
        sfx = np.minimum.accumulate(bb[::-1])[::-1]
        pfx = np.minimum.accumulate(ss)

        stay = np.where(stay_ok, vnext[stay_idx], inf)
        buy = np.where(buy_ok, model.K1 - model.b1 * w2_vals + sfx[buy_from], inf)
        sell = np.where(sell_ok, -model.b2 * w2_vals + pfx[sell_upto], inf)
        y = pen + model.per_period_cost_offset + np.minimum(stay, np.minimum(buy, sell))

        if record:
            # Ties keep the smallest buy target and the largest sell target.
            buy_arg = np.empty(n1, dtype=np.int64)
            best = inf
            arg = n1 - 1
            for i in range(n1 - 1, -1, -1):
                if bb[i] <= best:
                    best = bb[i]
                    arg = i
                buy_arg[i] = arg
            sell_arg = np.empty(n1, dtype=np.int64)
            best = inf
            arg = 0
            for i in range(n1):
                if ss[i] <= best:
                    best = ss[i]
                    arg = i
                sell_arg[i] = arg
            for j in range(n2):
                s_c = stay[j]
                se_c = sell[j]
                b_c = buy[j]
                if s_c <= se_c and s_c <= b_c:
                    continue
                if se_c <= b_c:
                    target = sell_arg[sell_upto[j]]
                    q2_tab[t - 1, j] = int(w2_vals[j]) - target * step
                else:
                    target = buy_arg[buy_from[j]]
                    q1_tab[t - 1, j] = target * step - int(w2_vals[j])

        dist = outflow.distributions[t - 1]
        pmf = np.asarray(dist.masses, dtype=np.float64)
        c0 = (-dist.origin - model.w2_lo) // step
        vnext = np.convolve(y, pmf)[c0:c0 + n1]

    return vnext, q1_tab, q2_tab


def solve(model: MdpModel, outflow: OutflowModel,
          epsilon: float = DEFAULT_EPSILON, max_sweeps: int = MAX_SWEEPS) -> Policy:
    """Relative value iteration until the per-cycle value change flattens.

    The stopping rule bounds the spread of the one-cycle value change
    below epsilon; the midpoint of that change is the certified expected
    cycle cost and gain is the per-period share. Values are re-anchored
    at zero storage after every pass to avoid drift.
    """
    if model.T != outflow.T or model.step != outflow.step:
        raise ValueError("model and outflow disagree on cycle length or step")
    if -outflow.max_support < model.w2_lo or model.capacity - outflow.min_support > model.w2_hi:
        raise ValueError("state grid does not cover the outflow supports")
    v1 = np.zeros(model.n1)
    sweeps = 0
    while True:
        record = False
        new_v1, q1_tab, q2_tab = _sweep(model, outflow, v1, record=False)
        sweeps += 1
        diff = new_v1 - v1
        span = float(diff.max() - diff.min())
        if span < epsilon:
            new_v1, q1_tab, q2_tab = _sweep(model, outflow, v1, record=True)
            diff = new_v1 - v1
            span = float(diff.max() - diff.min())
            if span < epsilon:
                cycle_cost = float(diff.max() + diff.min()) / 2.0
                v_out = new_v1 - new_v1[0]
                return Policy(model.T, model.step, model.capacity, model.w2_lo,
                              q1_tab, q2_tab, cycle_cost / model.T, cycle_cost,
                              v_out, sweeps, span)
        if sweeps >= max_sweeps:
            raise RuntimeError("value iteration did not converge; "
                               "check the outflow model")
        v1 = new_v1 - new_v1[0]


@dataclass(frozen=True)
class PeriodShape:
    """Reorder summary of one period's policy row."""

    t: int
    shape: str
    s: float
    S: Optional[int]


def extract_sS(policy: Policy) -> Tuple[PeriodShape, ...]:
    """Classify each period's buy rule.

    A row is reorder-point shaped when the states that buy are exactly
    those below one threshold and every buy lands on one common level:
    then s is the lowest non-buying grid level and S the common level.
    Rows with no buys are degenerate (s is -inf, S undefined); anything
    else is flagged as non-sS with the boundary buy recorded.
    """
    out = []
    for t in range(1, policy.T + 1):
        q1_row = policy.q1[t - 1]
        buys = np.nonzero(q1_row > 0)[0]
        if buys.size == 0:
            out.append(PeriodShape(t, "degenerate", float("-inf"), None))
            continue
        hi = int(buys.max())
        contiguous = buys.size == hi + 1
        targets = {policy.grid_value(int(j)) + int(q1_row[j]) for j in buys}
        s_level = float(policy.grid_value(hi) + policy.step)
        if contiguous and len(targets) == 1:
            out.append(PeriodShape(t, "sS", s_level, targets.pop()))
        else:
            top_target = policy.grid_value(hi) + int(q1_row[hi])
            out.append(PeriodShape(t, "non-sS", s_level, top_target))
    return tuple(out)


def policy_to_json(policy: Policy) -> str:
    doc = {
        "T": policy.T,
        "step": policy.step,
        "capacity": policy.capacity,
        "gain": policy.gain,
        "cycle_cost": policy.cycle_cost,
        "sweeps": policy.sweeps,
        "residual_span": policy.residual_span,
        "actions": [
            {
                "t": t,
                "omega2": policy.grid_value(j),
                "q1": int(policy.q1[t - 1, j]),
                "q2": int(policy.q2[t - 1, j]),
            }
            for t in range(1, policy.T + 1)
            for j in range(policy.n2)
            if policy.q1[t - 1, j] or policy.q2[t - 1, j]
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def shape_table_to_csv(shapes: Sequence[PeriodShape]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "shape", "s", "S"])
    for rec in shapes:
        writer.writerow([rec.t, rec.shape,
                         "" if rec.s == float("-inf") else rec.s,
                         "" if rec.S is None else rec.S])
    return buf.getvalue()
