import math
from types import SimpleNamespace

import pytest

from scirp.search import (
    EvalRecord,
    Evaluator,
    evaluate,
    grid_search,
    line_search,
    records_to_csv,
    step_by_step,
)


class StubEvaluator:
    """Scripted objective over the penalty plane, with call accounting."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = []
        self.exact_calls = []

    def evaluate(self, eta1, eta2):
        self.calls.append((eta1, eta2))
        total = self.fn(eta1, eta2)
        return EvalRecord(eta1=eta1, eta2=eta2, tactical_cost=total,
                          mdp_cycle_cost=0.0, total=total, selection=None,
                          tactical_seconds=0.0, mdp_seconds=0.0)

    def evaluate_exact(self, eta1, eta2):
        # presolve probes; the scripted plane has one partition everywhere
        self.exact_calls.append((eta1, eta2))
        total = self.fn(eta1, eta2)
        return EvalRecord(eta1=eta1, eta2=eta2, tactical_cost=total,
                          mdp_cycle_cost=0.0, total=total,
                          selection=SimpleNamespace(cluster_ids=(0,)),
                          tactical_seconds=0.0, mdp_seconds=0.0)


def test_walk_on_flat_objective():
    ev = StubEvaluator(lambda e1, e2: 100.0)
    best, history = line_search(None, None, evaluator=ev)
    assert best.total == 100.0
    # ties keep the earliest record: the unpenalized pair
    assert (best.eta1, best.eta2) == (0.0, 0.0)
    assert history[0].eta1 == 0.0 and history[0].eta2 == 0.0
    e1_values = [e1 for e1, _ in ev.calls]
    assert max(e1_values) == 8.0  # first coordinate walked to its cap
    assert ev.calls[-1][0] == 8.0
    assert ev.calls[-1][1] == pytest.approx(3.5001)
    # the walk ends when both weights sit at their caps
    assert len(history) == len(ev.calls)


def test_walk_on_unimodal_objective():
    # best total at eta1 = 3.0001; flat afterwards in eta2
    def fn(e1, e2):
        return 50.0 + abs(e1 - 3.0001) + 0.0 * e2
    ev = StubEvaluator(fn)
    best, history = line_search(None, None, evaluator=ev)
    assert best.eta1 == pytest.approx(3.0001)
    assert best.total == pytest.approx(50.0, abs=1e-9)
    # overshoot to 4.0001 rejected, then retreat by one increment
    overshoot = [i for i, (e1, _) in enumerate(ev.calls)
                 if e1 == pytest.approx(4.0001)]
    assert overshoot
    idx = overshoot[0]
    assert ev.calls[idx + 1][0] == pytest.approx(3.0001)
    assert ev.calls[idx + 1][1] == pytest.approx(0.0001)


def test_walk_rejects_bad_settings():
    ev = StubEvaluator(lambda e1, e2: 1.0)
    with pytest.raises(ValueError):
        line_search(None, None, zeta=(0.0, 0.5), evaluator=ev)
    with pytest.raises(ValueError):
        line_search(None, None, ub=(8.0, -1.0), evaluator=ev)


def test_second_weight_can_improve():
    # improvement only along eta2: eta1 worsens immediately
    def fn(e1, e2):
        return 100.0 + 5.0 * e1 - min(e2, 2.0)
    ev = StubEvaluator(fn)
    best, history = line_search(None, None, evaluator=ev)
    assert best.eta2 >= 2.0
    assert best.total == pytest.approx(100.0 + 5.0 * best.eta1 - 2.0)


def test_best_of_prefers_first_minimum():
    seen = []

    def fn(e1, e2):
        # strictly improving then flat: several records tie at 90
        total = max(90.0, 100.0 - 10.0 * e1)
        seen.append((e1, e2, total))
        return total
    ev = StubEvaluator(fn)
    best, history = line_search(None, None, evaluator=ev)
    firsts = [r for r in history if r.total == 90.0]
    assert best is firsts[0]


def test_real_evaluator_on_worked_example(appendix, appendix_pool):
    ev = Evaluator(appendix_pool, appendix)
    rec = ev.evaluate(0.0, 0.0)
    assert rec.tactical_cost == pytest.approx(3796.6090017960373, abs=1e-6)
    assert rec.total == pytest.approx(rec.tactical_cost + rec.mdp_cycle_cost)
    assert rec.selection is not None
    # memoized: the same pair returns the cached record
    assert ev.evaluate(0.0, 0.0) is rec
    # penalties never enter the comparison total
    rec2 = ev.evaluate(3.0, 2.0)
    assert rec2.total == pytest.approx(rec2.tactical_cost + rec2.mdp_cycle_cost)
    assert rec2.tactical_seconds >= 0.0 and rec2.mdp_seconds >= 0.0


def test_step_by_step_equals_unpenalized(appendix, appendix_pool):
    ev = Evaluator(appendix_pool, appendix)
    sbs = step_by_step(appendix_pool, appendix, evaluator=ev)
    rec = ev.evaluate(0.0, 0.0)
    assert sbs.total == pytest.approx(rec.total)
    assert sbs.selection.cluster_ids == rec.selection.cluster_ids
    free = evaluate(appendix_pool, appendix, 0.0, 0.0)
    assert free.total == pytest.approx(rec.total)


def test_line_search_beats_step_by_step(appendix, appendix_pool):
    ev = Evaluator(appendix_pool, appendix)
    best, history = line_search(appendix_pool, appendix, evaluator=ev)
    sbs = step_by_step(appendix_pool, appendix, evaluator=ev)
    assert best.total <= sbs.total + 1e-9
    assert history[0].eta1 == 0.0 and history[0].eta2 == 0.0
    assert all(r.total >= best.total - 1e-9 for r in history)


def test_grid_search_ordering_and_threads(appendix, appendix_pool):
    ev = Evaluator(appendix_pool, appendix)
    e1s = (0.0, 1.0)
    e2s = (0.0, 0.5)
    best1, recs1 = grid_search(appendix_pool, appendix, eta1_list=e1s,
                               eta2_list=e2s, evaluator=ev, threads=1)
    pairs = [(r.eta1, r.eta2) for r in recs1]
    assert pairs == [(a, b) for a in e1s for b in e2s]
    best2, recs2 = grid_search(appendix_pool, appendix, eta1_list=e1s,
                               eta2_list=e2s, evaluator=ev, threads=2)
    assert [(r.eta1, r.eta2, r.total) for r in recs2] == \
        [(r.eta1, r.eta2, r.total) for r in recs1]
    assert best1.total == min(r.total for r in recs1)
    assert best2.total == best1.total


def test_records_csv(appendix, appendix_pool):
    ev = Evaluator(appendix_pool, appendix)
    recs = [ev.evaluate(0.0, 0.0), ev.evaluate(1.0, 0.5)]
    text = records_to_csv(recs)
    lines = text.strip().splitlines()
    assert lines[0].startswith("eta1,eta2,")
    assert len(lines) == 3
