import numpy as np
import pytest

from scirp.clustergen import enumerate_clusters
from scirp.setpart import (
    InfeasibleError,
    PenaltyParams,
    Selection,
    brute_force,
    make_selection,
    objective,
    selection_to_json,
    solve,
)

from conftest import tiny_instance


def test_penalty_params_validate():
    with pytest.raises(ValueError):
        PenaltyParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        PenaltyParams(0.0, -0.5)
    p = PenaltyParams(1.0, 0.5)
    assert (p.eta1, p.eta2) == (1.0, 0.5)


def test_make_selection_validates_partition(appendix_pool):
    p = PenaltyParams(0.0, 0.0)
    i12 = appendix_pool.find((1, 2), (1, 4, 6))
    i3 = appendix_pool.find((3,), (2, 3, 5, 7))
    i123 = appendix_pool.find((1, 2, 3), (1, 2, 3, 4, 5, 6, 7))
    sel = make_selection(appendix_pool, [i12, i3], p)
    assert sel.cluster_ids == tuple(sorted((i12, i3)))
    with pytest.raises(ValueError):
        make_selection(appendix_pool, [i12], p)  # customer 3 uncovered
    with pytest.raises(ValueError):
        make_selection(appendix_pool, [i12, i123], p)  # overlap
    with pytest.raises(ValueError):
        make_selection(appendix_pool, [i12, i3, i3], p)  # duplicate


def test_uncoverable_pool_is_infeasible(appendix_pool):
    from scirp.clustergen import ClusterPool
    # Only overlapping pair subsets survive: no exact partition of {1,2,3}.
    kept = tuple(c for c in appendix_pool.clusters
                 if c.customers in ((1, 2), (2, 3)))
    crippled = ClusterPool(appendix_pool.T, kept)
    with pytest.raises(InfeasibleError):
        solve(crippled, PenaltyParams(0.0, 0.0))
    with pytest.raises(InfeasibleError):
        brute_force(crippled, PenaltyParams(0.0, 0.0))


def test_selection_costs_and_penalty(appendix_pool):
    p0 = PenaltyParams(0.0, 0.0)
    i12 = appendix_pool.find((1, 2), (1, 4, 6))
    i3 = appendix_pool.find((3,), (2, 3, 5, 7))
    sel = make_selection(appendix_pool, [i12, i3], p0)
    assert sel.tactical_cost == pytest.approx(3796.6090017960373, abs=1e-6)
    assert sel.penalty_value == 0.0
    assert sel.objective_value == pytest.approx(sel.tactical_cost)

    p = PenaltyParams(2.0, 0.25)
    sel_p = make_selection(appendix_pool, [i12, i3], p)
    T = appendix_pool.T
    delta = sel_p.delta_profile
    lam = sel_p.lambda_profile
    avg_d = sum(delta) / T
    avg_l = sum(lam) / T
    want = (2.0 / T) * sum(abs(avg_d - d) for d in delta) \
        + (0.25 / T) * sum(abs(avg_l - v) for v in lam)
    assert sel_p.penalty_value == pytest.approx(want, abs=1e-9)
    assert objective(appendix_pool, sel_p, p) == pytest.approx(
        sel_p.objective_value, abs=1e-9)


def test_profiles_are_summed_cluster_profiles(appendix_pool):
    p0 = PenaltyParams(0.0, 0.0)
    i12 = appendix_pool.find((1, 2), (1, 4, 6))
    i3 = appendix_pool.find((3,), (2, 3, 5, 7))
    sel = make_selection(appendix_pool, [i12, i3], p0)
    c12 = appendix_pool.clusters[i12]
    c3 = appendix_pool.clusters[i3]
    for t in range(appendix_pool.T):
        assert sel.delta_profile[t] == pytest.approx(c12.delta[t] + c3.delta[t])
        assert sel.lambda_profile[t] == pytest.approx(c12.lam[t] + c3.lam[t])


def test_worked_example_optimum(appendix_pool):
    p0 = PenaltyParams(0.0, 0.0)
    best = solve(appendix_pool, p0)
    oracle = brute_force(appendix_pool, p0)
    assert best.cluster_ids == oracle.cluster_ids
    assert best.objective_value == pytest.approx(oracle.objective_value, abs=1e-9)
    assert best.tactical_cost == pytest.approx(3796.6090017960373, abs=1e-6)
    subsets = sorted(tuple(appendix_pool.clusters[i].customers)
                     for i in best.cluster_ids)
    assert subsets == [(1, 2), (3,)]


def test_solver_matches_oracle_under_penalties(appendix_pool):
    for eta in ((1.0, 0.5), (8.0, 4.0)):
        p = PenaltyParams(*eta)
        a = solve(appendix_pool, p)
        b = brute_force(appendix_pool, p)
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-9)
        assert a.cluster_ids == b.cluster_ids


def test_solver_matches_oracle_on_random_instances():
    rng = np.random.default_rng(41)
    for k in range(3):
        inst = tiny_instance(100 + k, int(rng.integers(3, 6)))
        pool = enumerate_clusters(inst)
        eta = (float(rng.uniform(0, 4)), float(rng.uniform(0, 2)))
        p = PenaltyParams(*eta)
        a = solve(pool, p)
        b = brute_force(pool, p)
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-9)
        assert a.cluster_ids == b.cluster_ids


def test_bound_cache_reuse(appendix_pool):
    from scirp.setpart import _TacticalBound
    cache = _TacticalBound(appendix_pool)
    a = solve(appendix_pool, PenaltyParams(0.0, 0.0), bound_cache=cache)
    b = solve(appendix_pool, PenaltyParams(3.0, 2.0), bound_cache=cache)
    assert a.cluster_ids == solve(appendix_pool, PenaltyParams(0.0, 0.0)).cluster_ids
    assert b.cluster_ids == solve(appendix_pool, PenaltyParams(3.0, 2.0)).cluster_ids
    assert a.objective_value <= b.objective_value


def test_selection_json(appendix_pool, main_selection):
    import json
    text = selection_to_json(appendix_pool, main_selection)
    doc = json.loads(text)
    assert doc["tactical_cost"] == pytest.approx(3796.6090017960373, abs=1e-6)
    assert len(doc["clusters"]) == 2
    subsets = sorted(tuple(c["customers"]) for c in doc["clusters"])
    assert subsets == [(1, 2), (3,)]
