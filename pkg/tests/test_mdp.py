import json
import math

import numpy as np
import pytest

from scirp.mdp import (
    MdpModel,
    OutflowModel,
    Policy,
    action_cost,
    build_model,
    build_outflow,
    extract_sS,
    policy_to_json,
    shape_table_to_csv,
    solve,
)
from scirp.stochastics import DiscreteDistribution


def flat_outflow(T=7, value=0):
    dists = tuple(DiscreteDistribution(value, 5, (1.0,)) for _ in range(T))
    return OutflowModel(T, dists)


def noisy_outflow(T=7):
    # two-point draw {0, 10}: enough randomness for the sweep to settle
    dists = tuple(DiscreteDistribution(0, 5, (0.5, 0.0, 0.5)) for _ in range(T))
    return OutflowModel(T, dists)


def small_model(**kw):
    defaults = dict(T=7, capacity=100, step=5, w2_lo=-50, w2_hi=150,
                    K1=10.0, K2=50.0, b1=3.0, b2=1.0, per_period_cost_offset=0.0)
    defaults.update(kw)
    return MdpModel(**defaults)


def test_model_validation():
    with pytest.raises(ValueError):
        small_model(step=7)  # step must divide the capacity
    with pytest.raises(ValueError):
        small_model(w2_lo=-52)  # grid alignment
    with pytest.raises(ValueError):
        small_model(w2_hi=80)  # grid must cover the capacity
    with pytest.raises(ValueError):
        small_model(w2_lo=5)  # grid must reach zero


def test_action_cost_components():
    m = small_model()
    assert action_cost(m, 20, 0, 0) == 0.0
    assert action_cost(m, 20, 10, 0) == pytest.approx(10.0 + 3.0 * 10)
    assert action_cost(m, 20, 0, 15) == pytest.approx(-1.0 * 15)
    assert action_cost(m, -10, 15, 0) == pytest.approx(10.0 + 50.0 + 3.0 * 15)
    # worked numbers: fixed order cost 1000, shortage charge 2500, 60 kg at 10
    big = MdpModel(T=7, capacity=4500, step=5, w2_lo=-500, w2_hi=5000,
                   K1=1000.0, K2=2500.0, b1=10.0, b2=2.0,
                   per_period_cost_offset=0.0)
    assert action_cost(big, -55, 60, 0) == pytest.approx(4100.0)


def test_action_cost_rejects_inadmissible():
    m = small_model()
    with pytest.raises(ValueError):
        action_cost(m, 20, 10, 5)  # both directions at once
    with pytest.raises(ValueError):
        action_cost(m, 20, 0, 30)  # target below zero
    with pytest.raises(ValueError):
        action_cost(m, 90, 20, 0)  # target above capacity
    with pytest.raises(ValueError):
        action_cost(m, 120, 0, 0)  # staying above capacity
    with pytest.raises(ValueError):
        action_cost(m, 20, -5, 0)


def test_zero_outflow_stays_put():
    out = flat_outflow()
    m = small_model(w2_lo=0, w2_hi=100)
    pol = solve(m, out)
    assert pol.gain == pytest.approx(0.0, abs=1e-9)
    assert pol.cycle_cost == pytest.approx(0.0, abs=1e-9)
    q1 = np.asarray(pol.q1)
    q2 = np.asarray(pol.q2)
    # from any reachable nonnegative level, doing nothing is optimal
    assert np.all(q1 == 0)
    assert np.all(q2[:, : m.n1] == 0)


def test_cost_offset_shifts_gain_linearly():
    out = noisy_outflow()
    base = small_model(w2_lo=-50, w2_hi=150)
    shifted = small_model(w2_lo=-50, w2_hi=150, per_period_cost_offset=13.25)
    p0 = solve(base, out)
    p1 = solve(shifted, out)
    assert p1.gain == pytest.approx(p0.gain + 13.25, abs=1e-6)
    assert p1.cycle_cost == pytest.approx(p0.cycle_cost + 13.25 * 7, abs=1e-5)
    assert np.array_equal(p1.q1, p0.q1) and np.array_equal(p1.q2, p0.q2)


def test_outflow_from_selection(appendix, main_selection):
    out = build_outflow(main_selection, appendix, step=5)
    assert out.T == 7
    means = []
    for d in out.distributions:
        masses = np.asarray(d.masses)
        pts = d.origin + d.step * np.arange(len(masses))
        assert masses.sum() == pytest.approx(1.0, abs=1e-9)
        means.append(float((pts * masses).sum()))
    want = [1089.21, 448.90, 1051.10, 660.79, 1000.0, 700.0, 1000.0]
    for got, delta_t in zip(means, want):
        assert got == pytest.approx(delta_t - 850.0, abs=0.05)


def test_solved_policy_invariants(appendix, appendix_policy):
    pol = appendix_policy
    assert pol.residual_span < 0.1
    assert pol.sweeps >= 2
    assert pol.gain == pytest.approx(pol.cycle_cost / 7)
    # relative values live on the storage grid [0, capacity], anchored at 0
    assert len(pol.v1) == pol.capacity // pol.step + 1
    assert pol.v1[0] == pytest.approx(0.0, abs=1e-12)


def test_policy_actions_admissible(appendix, appendix_policy):
    pol = appendix_policy
    cap = pol.capacity
    count = 0
    for t in range(1, 8):
        for i in range(pol.n2):
            w = pol.grid_value(i)
            q1, q2 = pol.action(t, w)
            assert q1 >= 0 and q2 >= 0
            assert q1 == 0 or q2 == 0
            assert 0 <= w + q1 - q2 <= cap
            count += 1
    assert count >= 1000


def test_sell_back_to_capacity_from_above(appendix_policy):
    pol = appendix_policy
    cap = pol.capacity
    for t in range(1, 8):
        for w in (cap + 5, cap + 50, pol.grid_value(pol.n2 - 1)):
            q1, q2 = pol.action(t, w)
            assert q1 == 0
            assert q2 == w - cap


def test_index_lookup_and_clamping(appendix_policy):
    pol = appendix_policy
    i, clamped = pol.index_of(0.0)
    assert not clamped
    assert pol.grid_value(i) == 0.0
    i2, _ = pol.index_of(2.4)
    assert pol.grid_value(i2) == 0.0
    i3, _ = pol.index_of(2.6)
    assert pol.grid_value(i3) == 5.0
    lo = pol.grid_value(0)
    i4, clamped4 = pol.index_of(lo - 1000.0)
    assert clamped4 and i4 == 0
    hi = pol.grid_value(pol.n2 - 1)
    i5, clamped5 = pol.index_of(hi + 1000.0)
    assert clamped5 and i5 == pol.n2 - 1


def make_policy(q1_rows, q2_rows, step=5, w2_lo=0, capacity=None):
    q1 = np.asarray(q1_rows, dtype=np.int64)
    q2 = np.asarray(q2_rows, dtype=np.int64)
    n2 = q1.shape[1]
    cap = capacity if capacity is not None else w2_lo + step * (n2 - 1)
    return Policy(T=q1.shape[0], step=step, capacity=cap, w2_lo=w2_lo,
                  q1=q1, q2=q2, gain=0.0, cycle_cost=0.0,
                  v1=np.zeros(cap // step + 1), sweeps=1, residual_span=0.0)


def test_extract_sS_shapes():
    # buy region = lowest three levels, common target 25: an (s,S) period
    q1 = [[25, 20, 15, 0, 0, 0, 0]]
    q2 = [[0] * 7]
    shapes = extract_sS(make_policy(q1, q2))
    assert shapes[0].shape == "sS"
    assert shapes[0].s == 15.0  # lowest level from which no order is placed
    assert shapes[0].S == 25.0
    # no buying at all: degenerate
    shapes = extract_sS(make_policy([[0] * 7], q2))
    assert shapes[0].shape == "degenerate"
    assert shapes[0].S is None
    # hole in the buy region: not (s,S)
    shapes = extract_sS(make_policy([[25, 0, 15, 0, 0, 0, 0]], q2))
    assert shapes[0].shape == "non-sS"
    # differing order-up-to targets: not (s,S)
    shapes = extract_sS(make_policy([[25, 30, 0, 0, 0, 0, 0]], q2))
    assert shapes[0].shape == "non-sS"


def test_extract_sS_on_solved_policy(appendix_policy):
    shapes = extract_sS(appendix_policy)
    assert len(shapes) == 7
    assert all(sh.shape == "sS" for sh in shapes)
    assert shapes[0].t == 1
    for sh in shapes:
        assert sh.S is not None
        assert sh.s < sh.S


def test_policy_serialization(appendix_policy):
    doc = json.loads(policy_to_json(appendix_policy))
    assert doc["T"] == 7
    assert doc["step"] == 5
    assert doc["gain"] == pytest.approx(appendix_policy.gain)
    csv_text = shape_table_to_csv(extract_sS(appendix_policy))
    lines = csv_text.strip().splitlines()
    assert lines[0] == "t,shape,s,S"
    assert len(lines) == 8


def test_outflow_model_validation():
    with pytest.raises(ValueError):
        OutflowModel(2, (DiscreteDistribution(0, 5, (1.0,)),))
    with pytest.raises(ValueError):
        OutflowModel(2, (DiscreteDistribution(0, 5, (1.0,)),
                         DiscreteDistribution(0, 2, (1.0,))))
