"""Partitioned admittance system for the fixed-point DC solvers.

Buses split into voltage-controlled buses (fixed voltage) and the remaining
``n_L`` free buses. For the free block::

    Y v = k + p / v

with ``Y`` the free-bus conductance matrix (self terms include every
incident branch, off-diagonals are ``-y_nk``), ``k`` the current pushed in by
voltage-controlled neighbours and ``p`` the net injected power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netmodel import BusKind, Network, NetworkError, components

__all__ = ["AdmittancePartition", "IslandError", "build_partition", "kcl_residual"]


class IslandError(NetworkError):
    """Some free buses cannot reach any voltage-controlled bus."""

    def __init__(self, buses: list[int]):
        self.buses = buses
        super().__init__(f"buses {buses}", "unenergized island: no voltage-controlled bus reachable")


@dataclass(frozen=True)
class AdmittancePartition:
    """The ``n_L x n_L`` system ``Y v = k + diag(v)^-1 p``.

    Attributes:
        load_bus_index: Free bus id -> row position (ascending bus id).
        Y: Free-bus conductance matrix [S], symmetric.
        k: Current injected by voltage-controlled neighbours [A].
        p: Net injected power per free bus [W].
        v_fixed: Voltage-controlled bus id -> setpoint [V].
        nominal: Nominal voltage per free bus [V].
        neighbours: Per free row, (bus id, admittance) pairs of every
            adjacent bus, fixed or free.
    """

    load_bus_index: dict[int, int]
    Y: np.ndarray
    k: np.ndarray
    p: np.ndarray
    v_fixed: dict[int, float]
    nominal: np.ndarray
    neighbours: tuple[tuple[tuple[int, float], ...], ...]

    @property
    def bus_ids(self) -> list[int]:
        return list(self.load_bus_index)

    @property
    def size(self) -> int:
        return len(self.load_bus_index)

    @property
    def self_admittance(self) -> np.ndarray:
        return np.diag(self.Y).copy()

    def full_voltages(self, v: np.ndarray) -> dict[int, float]:
        """Merge solved free-bus voltages with the fixed setpoints."""
        out = dict(self.v_fixed)
        out.update({b: float(v[i]) for b, i in self.load_bus_index.items()})
        return dict(sorted(out.items()))

    def listing(self) -> str:
        """Plain-text dump for debugging."""
        lines = [f"n_L = {self.size}, n_V = {len(self.v_fixed)}"]
        lines.append("fixed: " + ", ".join(f"{b}={v:.6g} V" for b, v in self.v_fixed.items()))
        for b, i in self.load_bus_index.items():
            row = " ".join(f"{x:12.6g}" for x in self.Y[i])
            lines.append(f"bus {b:>4} | k={self.k[i]:14.8g} p={self.p[i]:14.8g} | {row}")
        return "\n".join(lines)


def build_partition(net: Network) -> AdmittancePartition:
    """Assemble ``Y``, ``k`` and ``p`` for ``net``.

    Raises:
        IslandError: if a free bus has no path to a voltage-controlled bus.
    """
    v_fixed = {
        b.id: float(b.setpoint)
        for b in sorted(net.buses, key=lambda b: b.id)
        if b.kind is BusKind.VOLTAGE_CONTROLLED
    }
    free = sorted(b.id for b in net.buses if b.id not in v_fixed)
    index = {b: i for i, b in enumerate(free)}

    for comp in components((b.id for b in net.buses), net.branches):
        if not any(b in v_fixed for b in comp):
            raise IslandError(comp)

    n = len(free)
    Y = np.zeros((n, n))
    k = np.zeros(n)
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for br in net.branches:
        y = net.admittance(br)
        for a, c in ((br.from_bus, br.to_bus), (br.to_bus, br.from_bus)):
            if a not in index:
                continue
            i = index[a]
            Y[i, i] += y
            adj[i].append((c, y))
            if c in index:
                Y[i, index[c]] -= y
            else:
                k[i] += y * v_fixed[c]
    p = np.array([net.bus(b).injection for b in free], dtype=float)
    nominal = np.array([net.bus(b).nominal_voltage for b in free], dtype=float)
    return AdmittancePartition(
        load_bus_index=index,
        Y=Y,
        k=k,
        p=p,
        v_fixed=v_fixed,
        nominal=nominal,
        neighbours=tuple(tuple(a) for a in adj),
    )


def kcl_residual(part: AdmittancePartition, v: np.ndarray) -> np.ndarray:
    """Per free bus: current leaving into the network minus injected current [A].

    ``sum_k y_nk (v_n - v_k) - p_n / v_n``, evaluated neighbour by neighbour
    (fixed and free), so it does not reuse ``Y`` or ``k``.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (part.size,):
        raise ValueError(f"expected {part.size} voltages, got shape {v.shape}")
    if np.any(v <= 0):
        bad = [b for b, i in part.load_bus_index.items() if v[i] <= 0]
        raise ValueError(f"nonpositive voltage at buses {bad}")
    full = part.full_voltages(v)
    out = np.empty(part.size)
    for b, i in part.load_bus_index.items():
        flow = sum(y * (v[i] - full[c]) for c, y in part.neighbours[i])
        out[i] = flow - part.p[i] / v[i]
    return out
