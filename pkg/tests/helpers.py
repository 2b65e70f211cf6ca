"""Shared test fixtures: small documents, random networks, independent oracles.

The oracles here deliberately avoid ``mvdcflow.admittance`` so that they
check the solvers against a separate assembly of the KCL equations.
"""

from __future__ import annotations

import itertools
import math
from typing import Any

import numpy as np

from mvdcflow.netmodel import Network, load_network


def two_bus_doc(load_w: float = 1e6, r_ohm: float = 0.001, vs: float = 5000.0, breakers: int = 2) -> dict[str, Any]:
    """Source at ``vs`` feeding one constant-power load through ``r_ohm``."""
    return {
        "name": "twobus",
        "pole_model": False,
        "buses": [
            {"id": 1, "name": "SRC", "kind": "voltage_controlled", "nominal_v": vs, "params": {"setpoint_v": vs}},
            {"id": 2, "name": "LOAD", "kind": "constant_power", "nominal_v": vs,
             "params": {"power_w": load_w, "role": "load"}},
        ],
        "branches": [{"id": 1, "from": 1, "to": 2, "length_m": 1000.0, "conductor": "C", "breakers": breakers}],
        "conductors": [{"name": "C", "r_ohm_per_km": r_ohm, "ampacity_a": 1000.0}],
        "dispatch": {"voltage_controlled_buses": [1]},
    }


def two_bus(load_w: float = 1e6, **kw: Any) -> Network:
    return load_network(two_bus_doc(load_w, **kw))


def quadratic_root(vs: float, r: float, p: float) -> float:
    """High-voltage root of ``v**2 - vs v + p r = 0``."""
    return (vs + math.sqrt(vs * vs - 4.0 * p * r)) / 2.0


def random_network_doc(rng: np.random.Generator, n_bus: int, load_fraction: float = 0.3,
                       n_vc: int = 1, vs: float = 5000.0) -> dict[str, Any]:
    """Connected random network: spanning tree plus a few chords.

    Loads are sized as ``load_fraction`` of a crude transfer limit so most
    draws stay well inside the solvable region. Some non-VC buses are
    generators, some junctions.
    """
    ids = list(range(1, n_bus + 1))
    edges: list[tuple[int, int]] = []
    for k in range(2, n_bus + 1):
        edges.append((int(rng.integers(1, k)), k))
    for _ in range(int(rng.integers(0, n_bus // 2 + 1))):
        a, b = sorted(int(x) for x in rng.choice(ids, 2, replace=False))
        if (a, b) not in edges and (b, a) not in edges:
            edges.append((a, b))
    r_per_m = rng.uniform(1e-5, 5e-4, len(edges))
    lengths = rng.uniform(5.0, 60.0, len(edges))
    r_max = float(np.max(r_per_m * lengths))
    # keep every load well below the vs**2 / (4 R_path) collapse limit
    p_scale = load_fraction * vs * vs / (4.0 * r_max * n_bus)
    vc = set(int(x) for x in rng.choice(ids, n_vc, replace=False))
    buses = []
    for b in ids:
        if b in vc:
            setpoint = vs * (1.0 + 0.01 * rng.uniform(-1, 1)) if n_vc > 1 else vs
            buses.append({"id": b, "name": f"V{b}", "kind": "voltage_controlled", "nominal_v": vs,
                          "params": {"setpoint_v": setpoint}})
            continue
        u = rng.uniform()
        if u < 0.15:
            buses.append({"id": b, "name": f"J{b}", "kind": "junction", "nominal_v": vs})
        else:
            role = "generator" if u < 0.3 else "load"
            buses.append({"id": b, "name": f"P{b}", "kind": "constant_power", "nominal_v": vs,
                          "params": {"power_w": float(rng.uniform(0.1, 1.0) * p_scale), "role": role}})
    conductors = [{"name": f"C{i}", "r_ohm_per_km": float(r_per_m[i] * 1000.0), "ampacity_a": 1000.0}
                  for i in range(len(edges))]
    branches = [{"id": i + 1, "from": a, "to": b, "length_m": float(lengths[i]), "conductor": f"C{i}"}
                for i, (a, b) in enumerate(edges)]
    return {"name": f"random{n_bus}", "pole_model": False, "buses": buses, "branches": branches,
            "conductors": conductors, "dispatch": {"voltage_controlled_buses": sorted(vc)}}


def random_network(rng: np.random.Generator, n_bus: int, **kw: Any) -> Network:
    return load_network(random_network_doc(rng, n_bus, **kw))


def _kcl(net: Network, free: list[int], fixed: dict[int, float], v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """KCL residual and Jacobian assembled branch by branch."""
    pos = {b: i for i, b in enumerate(free)}
    full = dict(fixed)
    full.update({b: v[i] for b, i in pos.items()})
    f = np.zeros(len(free))
    jac = np.zeros((len(free), len(free)))
    for br in net.branches:
        g = 1.0 / (br.length * net.conductor(br).resistance_per_meter)
        for a, c in ((br.from_bus, br.to_bus), (br.to_bus, br.from_bus)):
            if a in pos:
                f[pos[a]] += g * (full[a] - full[c])
                jac[pos[a], pos[a]] += g
                if c in pos:
                    jac[pos[a], pos[c]] -= g
    for b, i in pos.items():
        p = net.bus(b).injection
        f[i] -= p / v[i]
        jac[i, i] += p / v[i] ** 2
    return f, jac


def newton_oracle(net: Network, grid: tuple[float, ...] = (0.6, 0.8, 0.95, 1.05), tol: float = 1e-10) -> dict[int, float]:
    """Brute-force operating point: damped Newton from every grid start.

    Returns the root with the highest minimum voltage (the normal operating
    point), as a bus id -> voltage map over all buses.
    """
    fixed = {b.id: float(b.setpoint) for b in net.buses if b.kind.value == "voltage_controlled"}
    free = sorted(b.id for b in net.buses if b.id not in fixed)
    vs = max(fixed.values())
    roots: list[np.ndarray] = []
    for start in itertools.product(grid, repeat=len(free)):
        v = np.array(start) * vs
        for _ in range(200):
            f, jac = _kcl(net, free, fixed, v)
            if np.max(np.abs(f)) < tol * vs:
                roots.append(v.copy())
                break
            try:
                step = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError:
                break
            t = 1.0
            norm0 = np.linalg.norm(f)
            while t > 1e-6:
                trial = v + t * step
                if np.all(trial > 0) and np.linalg.norm(_kcl(net, free, fixed, trial)[0]) < norm0:
                    break
                t /= 2
            v = v + t * step
            if np.any(v <= 0):
                break
    if not roots:
        raise RuntimeError("oracle found no root")
    best = max(roots, key=lambda r: (float(np.min(r)), float(np.sum(r))))
    out = dict(fixed)
    out.update({b: float(best[i]) for i, b in enumerate(free)})
    return dict(sorted(out.items()))


# Architecture #1 left/right mirror
BUS_MIRROR = {1: 4, 2: 3, 3: 2, 4: 1, 5: 7, 6: 6, 7: 5, **{k: 29 - k for k in range(8, 22)}}


def mirror_branch(net: Network, branch_id: int) -> int:
    br = net.branch(branch_id)
    return net.branch_between(BUS_MIRROR[br.from_bus], BUS_MIRROR[br.to_bus]).id
