import itertools

import numpy as np
import pytest

from scirp.instance import Customer, Gaussian, Instance, Producer, load_instance
from scirp.routing import MAX_ROUTE_SIZE, shortest_route


def matrix_instance(d):
    """Wrap a distance matrix in a minimal instance; node k = customer k."""
    n = len(d) - 1
    customers = tuple(
        Customer(id=i + 1, demand=Gaussian(100.0, 10.0), U=1000.0, x=None, y=None)
        for i in range(n))
    producer = Producer(supply=Gaussian(100.0 * n, 10.0), capacity=4500,
                        K1=1.0, K2=1.0, b1=2.0, b2=1.0)
    return Instance(T=7, customers=customers, producer=producer, W=100.0, w=20.0,
                    h=0.05, e=10.0, Q=1000.0, alpha=0.95, gamma=0.9,
                    distances=tuple(tuple(row) for row in d))


def brute_route(inst, subset):
    ids = sorted(subset)
    node = {c.id: k + 1 for k, c in enumerate(inst.customers)}
    best = None
    best_order = None
    for perm in itertools.permutations(ids):
        length = inst.distance(0, node[perm[0]])
        for a, b in zip(perm, perm[1:]):
            length += inst.distance(node[a], node[b])
        length += inst.distance(node[perm[-1]], 0)
        key = (length, perm)
        if best is None or key < (best, best_order):
            best, best_order = length, perm
    return best, best_order


def test_worked_example_routes():
    inst = load_instance("appendix_a")
    r12 = shortest_route(inst, [1, 2])
    assert r12.length == 12.0
    r3 = shortest_route(inst, [3])
    assert r3.length == 6.0
    assert r3.order == (3,)


def test_singleton_and_pair():
    d = [[0, 2, 7], [2, 0, 3], [7, 3, 0]]
    inst = matrix_instance(d)
    assert shortest_route(inst, [1]).length == 4.0
    r = shortest_route(inst, [2, 1]).length
    assert r == 2 + 3 + 7


def test_validation():
    inst = matrix_instance([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        shortest_route(inst, [])
    with pytest.raises(ValueError):
        shortest_route(inst, [5])
    big = matrix_instance(np.zeros((MAX_ROUTE_SIZE + 2, MAX_ROUTE_SIZE + 2)))
    with pytest.raises(ValueError):
        shortest_route(big, list(range(1, MAX_ROUTE_SIZE + 2)))


def test_against_permutation_brute_force():
    rng = np.random.default_rng(23)
    for _ in range(60):
        n = int(rng.integers(2, 9))
        raw = rng.uniform(1.0, 50.0, (n + 1, n + 1))
        d = np.triu(raw, 1)
        d = d + d.T
        inst = matrix_instance(d)
        size = int(rng.integers(1, min(n, 8) + 1))
        subset = list(rng.choice(np.arange(1, n + 1), size=size, replace=False))
        route = shortest_route(inst, subset)
        want, _ = brute_route(inst, subset)
        assert route.length == pytest.approx(want, abs=1e-9)


def test_lexicographic_tie_break():
    # Symmetric square: both orientations tie; the smaller order wins.
    d = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
    inst = matrix_instance(d)
    r = shortest_route(inst, [2, 1])
    assert r.order == (1, 2)
    assert r.length == 3.0
