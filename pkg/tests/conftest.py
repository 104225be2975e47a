"""Shared fixtures: the worked three-customer example and seeded random
instances sized so the exhaustive oracles stay affordable."""

import math

import numpy as np
import pytest

from scirp.clustergen import base_stock, enumerate_clusters
from scirp.instance import Customer, Gaussian, Instance, Producer, load_instance
from scirp.mdp import build_model, build_outflow, solve as solve_mdp
from scirp.setpart import PenaltyParams, make_selection


@pytest.fixture(scope="session")
def appendix():
    return load_instance("appendix_a")


@pytest.fixture(scope="session")
def appendix_pool(appendix):
    return enumerate_clusters(appendix)


@pytest.fixture(scope="session")
def main_selection(appendix_pool):
    ids = [appendix_pool.find((1, 2), (1, 4, 6)),
           appendix_pool.find((3,), (2, 3, 5, 7))]
    return make_selection(appendix_pool, ids, PenaltyParams(0.0, 0.0))


@pytest.fixture(scope="session")
def alt_selection(appendix_pool):
    ids = [appendix_pool.find((1, 2), (1, 4, 6)),
           appendix_pool.find((3,), (1, 3, 5, 7))]
    return make_selection(appendix_pool, ids, PenaltyParams(0.0, 0.0))


@pytest.fixture(scope="session")
def appendix_policy(appendix, main_selection):
    outflow = build_outflow(main_selection, appendix, step=5)
    model = build_model(appendix, outflow)
    return solve_mdp(model, outflow)


def tiny_instance(seed, n, theta2_count=None, T=7):
    """Random instance whose storage horizons are forced to 1 or 2 periods.

    theta2_count customers (default: all for n <= 4, one otherwise) get a
    two-period horizon; the rest get one period. Keeps the exhaustive
    partition-times-schedule enumeration small enough to use as an oracle.
    """
    rng = np.random.default_rng(seed)
    if theta2_count is None:
        theta2_count = n if n <= 4 else 1
    mus = rng.uniform(100.0, 300.0, n)
    sigmas = 0.1 * mus
    xs = rng.uniform(0.0, 10.0, n)
    ys = rng.uniform(0.0, 10.0, n)
    thetas = np.array([2] * theta2_count + [1] * (n - theta2_count))
    rng.shuffle(thetas)
    alpha, gamma = 0.95, 0.9
    z_g = 1.2815515655446004
    customers = []
    for i in range(n):
        g = Gaussian(float(mus[i]), float(sigmas[i]))
        # Storage exactly at the target-horizon base stock pins the horizon.
        U = float(base_stock(g, int(thetas[i]), alpha))
        customers.append(Customer(id=i + 1, demand=g, U=U, x=float(xs[i]), y=float(ys[i])))
    pair_landmark = 0.0
    order = np.argsort(mus)[::-1]
    if n >= 2:
        a, b = order[0], order[1]
        mean2 = 2.0 * (mus[a] + mus[b])
        std2 = math.sqrt(2.0 * (sigmas[a] ** 2 + sigmas[b] ** 2))
        pair_landmark = mean2 + z_g * std2
    else:
        pair_landmark = 2.0 * mus[0] + z_g * sigmas[0] * math.sqrt(2.0)
    Q = 1.15 * pair_landmark
    mu_p = float(mus.sum())
    producer = Producer(supply=Gaussian(mu_p, 0.15 * mu_p), capacity=4500,
                        K1=3000.0, K2=15000.0, b1=25.0, b2=2.0)
    return Instance(T=T, customers=tuple(customers), producer=producer,
                    W=100.0, w=20.0, h=0.05, e=10.0, Q=Q,
                    alpha=alpha, gamma=gamma, distances=None)
