"""Problem-instance data model: validation, random generation, scaling, JSON I/O.

An instance bundles the cycle length, the customer demand laws and storage
capacities, the producer's supply law and market prices, the cost and
service-level parameters, and the travel distances (either an explicit
matrix with node 0 as the producer, or per-customer coordinates with the
Euclidean metric; the matrix wins if both are present).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .stochastics import Gaussian, normal_quantile, round_half_up

__all__ = [
    "Customer",
    "Producer",
    "Instance",
    "BASE_DEFAULTS",
    "validate",
    "generate",
    "scale",
    "instance_to_json",
    "instance_from_json",
    "load_instance",
    "fixture_path",
]

# Base-system parameter defaults (overridable per instance).
BASE_DEFAULTS: Dict[str, float] = {
    "W": 100.0,
    "w": 20.0,
    "e": 10.0,
    "Q": 1000.0,
    "h": 0.05,
    "alpha": 0.95,
    "gamma": 0.9,
    "U": 1000.0,
    "capacity": 4500,
    "K1": 3000.0,
    "K2": 15000.0,
    "b1": 25.0,
    "b2": 2.0,
}

# Demand-uncertainty levels: sigma_i = u * mu_i with u uniform in the range.
UNCERTAINTY_LEVELS: Dict[str, Tuple[float, float]] = {
    "L": (0.025, 0.05),
    "H": (0.02, 0.1),
}


@dataclass(frozen=True)
class Customer:
    id: int
    demand: Gaussian
    U: float
    x: Optional[float] = None
    y: Optional[float] = None


@dataclass(frozen=True)
class Producer:
    supply: Gaussian
    capacity: int
    K1: float
    K2: float
    b1: float
    b2: float


@dataclass(frozen=True)
class Instance:
    T: int
    customers: Tuple[Customer, ...]
    producer: Producer
    W: float
    w: float
    h: float
    e: float
    Q: float
    alpha: float
    gamma: float
    # distances[i][j] with node 0 = producer, node k = customers[k-1]
    distances: Optional[Tuple[Tuple[float, ...], ...]] = None

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    def has_distances(self) -> bool:
        if self.distances is not None:
            return True
        return all(c.x is not None and c.y is not None for c in self.customers)

    def distance(self, i: int, j: int) -> float:
        """Travel distance between nodes i and j (0 = producer)."""
        if self.distances is not None:
            return self.distances[i][j]

        def coords(k: int) -> Tuple[float, float]:
            if k == 0:
                return (0.0, 0.0)
            c = self.customers[k - 1]
            if c.x is None or c.y is None:
                raise ValueError(f"customer {c.id} has no coordinates and no distance matrix is set")
            return (c.x, c.y)

        ax, ay = coords(i)
        bx, by = coords(j)
        return math.hypot(ax - bx, ay - by)


def validate(inst: Instance) -> List[str]:
    """Check all structural invariants and feasibility screens.

    Returns a list of violation messages; an empty list means the
    instance is usable. Never raises.
    """
    v: List[str] = []
    if inst.T < 1 or inst.T != int(inst.T):
        v.append("T must be a positive integer")
    if not (0.0 < inst.alpha < 1.0):
        v.append("alpha must lie in (0, 1)")
    if not (0.0 < inst.gamma < 1.0):
        v.append("gamma must lie in (0, 1)")
    for name in ("W", "w", "h", "e"):
        if getattr(inst, name) < 0:
            v.append(f"{name} must be nonnegative")
    if inst.Q <= 0:
        v.append("Q must be positive")

    p = inst.producer
    if p.capacity <= 0:
        v.append("producer capacity must be positive")
    if p.b2 > p.b1:
        v.append("sell price b2 must not exceed buy price b1")
    if p.K1 < 0 or p.K2 < 0:
        v.append("fixed purchase costs must be nonnegative")
    if p.supply.std < 0:
        v.append("supply std must be nonnegative")

    seen_ids = set()
    for c in inst.customers:
        if c.id in seen_ids:
            v.append(f"duplicate customer id {c.id}")
        seen_ids.add(c.id)
        if c.id < 1:
            v.append(f"customer id {c.id} must be >= 1")
        if c.demand.mean <= 0:
            v.append(f"customer {c.id}: demand mean must be positive")
        if c.U <= 0:
            v.append(f"customer {c.id}: storage capacity must be positive")

    if inst.distances is not None:
        n = inst.n_customers + 1
        d = inst.distances
        if len(d) != n or any(len(row) != n for row in d):
            v.append(f"distance matrix must be {n}x{n}")
        else:
            if any(d[i][i] != 0 for i in range(n)):
                v.append("distance matrix diagonal must be zero")
            pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
            if any(d[i][j] != d[j][i] for i, j in pairs):
                v.append("distance matrix must be symmetric")
            if any(d[i][j] < 0 for i, j in pairs):
                v.append("distances must be nonnegative")
    elif not inst.has_distances():
        v.append("no distance information: provide a matrix or coordinates for every customer")

    # Feasibility screens: a singleton cluster delivered every period must
    # satisfy the vehicle-fill chance constraint, and the one-period
    # base-stock level must fit the customer's storage.
    if 0.0 < inst.alpha < 1.0 and 0.0 < inst.gamma < 1.0:
        z_a = normal_quantile(inst.alpha)
        z_g = normal_quantile(inst.gamma)
        for c in inst.customers:
            if c.demand.mean <= 0:
                continue
            if c.demand.mean + z_g * c.demand.std > inst.Q:
                v.append(f"customer {c.id}: singleton daily delivery violates the vehicle-fill constraint")
            s1 = round_half_up(c.demand.mean + z_a * c.demand.std)
            if s1 > c.U:
                v.append(f"customer {c.id}: one-period base stock {s1} exceeds storage capacity {c.U}")
    return v


def generate(seed: int, n_customers: int, T: int, level: str = "L",
             params: Optional[Dict[str, float]] = None) -> Instance:
    """Draw a random instance of the base system.

    Coordinates are uniform on [0, 10]^2, demand means uniform on
    [100, 400], demand stds a uniform multiple of the mean per the
    uncertainty level, supply mean equals total demand mean and supply
    std is 0.15 of it. All remaining parameters come from BASE_DEFAULTS
    unless overridden. Deterministic in (seed, n_customers, T, level,
    params).
    """
    if n_customers < 1:
        raise ValueError("need at least one customer")
    if level not in UNCERTAINTY_LEVELS:
        raise ValueError(f"unknown uncertainty level {level!r}")
    p = dict(BASE_DEFAULTS)
    if params:
        unknown = set(params) - set(BASE_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        p.update(params)
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 10.0, n_customers)
    ys = rng.uniform(0.0, 10.0, n_customers)
    mus = rng.uniform(100.0, 400.0, n_customers)
    u_lo, u_hi = UNCERTAINTY_LEVELS[level]
    us = rng.uniform(u_lo, u_hi, n_customers)
    customers = tuple(
        Customer(
            id=i + 1,
            demand=Gaussian(float(mus[i]), float(us[i] * mus[i])),
            U=float(p["U"]),
            x=float(xs[i]),
            y=float(ys[i]),
        )
        for i in range(n_customers)
    )
    mu_p = float(mus.sum())
    producer = Producer(
        supply=Gaussian(mu_p, 0.15 * mu_p),
        capacity=int(p["capacity"]),
        K1=float(p["K1"]),
        K2=float(p["K2"]),
        b1=float(p["b1"]),
        b2=float(p["b2"]),
    )
    return Instance(
        T=T,
        customers=customers,
        producer=producer,
        W=float(p["W"]),
        w=float(p["w"]),
        h=float(p["h"]),
        e=float(p["e"]),
        Q=float(p["Q"]),
        alpha=float(p["alpha"]),
        gamma=float(p["gamma"]),
        distances=None,
    )


def scale(inst: Instance, m_s: float, m_p: float, m_d: float) -> Instance:
    """Scenario multipliers, applied in order.

    m_s rescales the supply law (mean and std together), m_p then
    rescales the supply std alone, m_d rescales every customer demand
    std. (1, 1, 1) is the identity.
    """
    if m_s < 0 or m_p < 0 or m_d < 0:
        raise ValueError("multipliers must be nonnegative")
    sup = inst.producer.supply
    sup = Gaussian(m_s * sup.mean, m_s * sup.std)
    sup = Gaussian(sup.mean, m_p * sup.std)
    producer = replace(inst.producer, supply=sup)
    customers = tuple(
        replace(c, demand=Gaussian(c.demand.mean, m_d * c.demand.std))
        for c in inst.customers
    )
    return replace(inst, producer=producer, customers=customers)


def instance_to_json(inst: Instance) -> str:
    """Serialize to the on-disk JSON schema (stable key order, no timestamp)."""
    doc = {
        "T": inst.T,
        "alpha": inst.alpha,
        "gamma": inst.gamma,
        "W": inst.W,
        "w": inst.w,
        "h": inst.h,
        "e": inst.e,
        "Q": inst.Q,
        "producer": {
            "mu": inst.producer.supply.mean,
            "sigma": inst.producer.supply.std,
            "capacity": inst.producer.capacity,
            "K1": inst.producer.K1,
            "K2": inst.producer.K2,
            "b1": inst.producer.b1,
            "b2": inst.producer.b2,
        },
        "customers": [
            {
                "id": c.id,
                "mu": c.demand.mean,
                "sigma": c.demand.std,
                "U": c.U,
                **({"x": c.x, "y": c.y} if c.x is not None and c.y is not None else {}),
            }
            for c in inst.customers
        ],
        "distances": [list(row) for row in inst.distances] if inst.distances is not None else None,
    }
    return json.dumps(doc, indent=2) + "\n"


def instance_from_json(text: str) -> Instance:
    doc = json.loads(text)
    prod = doc["producer"]
    producer = Producer(
        supply=Gaussian(float(prod["mu"]), float(prod["sigma"])),
        capacity=int(prod["capacity"]),
        K1=float(prod["K1"]),
        K2=float(prod["K2"]),
        b1=float(prod["b1"]),
        b2=float(prod["b2"]),
    )
    customers = tuple(
        Customer(
            id=int(c["id"]),
            demand=Gaussian(float(c["mu"]), float(c["sigma"])),
            U=float(c["U"]),
            x=float(c["x"]) if "x" in c and c["x"] is not None else None,
            y=float(c["y"]) if "y" in c and c["y"] is not None else None,
        )
        for c in doc["customers"]
    )
    distances = doc.get("distances")
    return Instance(
        T=int(doc["T"]),
        customers=customers,
        producer=producer,
        W=float(doc["W"]),
        w=float(doc["w"]),
        h=float(doc["h"]),
        e=float(doc["e"]),
        Q=float(doc["Q"]),
        alpha=float(doc["alpha"]),
        gamma=float(doc["gamma"]),
        distances=tuple(tuple(float(x) for x in row) for row in distances) if distances is not None else None,
    )


def fixture_path(name: str):
    """Resource path of a packaged fixture file (e.g. 'appendix_a.json')."""
    return resources.files("scirp").joinpath("data", name)


def load_instance(path_or_name: str) -> Instance:
    """Load an instance from a file path, falling back to packaged fixtures."""
    import os

    if os.path.exists(path_or_name):
        with open(path_or_name, "r", encoding="utf-8") as fh:
            return instance_from_json(fh.read())
    name = path_or_name if path_or_name.endswith(".json") else path_or_name + ".json"
    res = fixture_path(name)
    if res.is_file():
        return instance_from_json(res.read_text(encoding="utf-8"))
    raise FileNotFoundError(f"instance not found: {path_or_name}")
