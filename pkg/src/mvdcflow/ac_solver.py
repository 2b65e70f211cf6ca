"""Newton-Raphson AC power flow for the 10 kVac comparison study.

The AC study reuses the DC network topology. Each cable becomes a series
impedance ``n (R + jX)`` where ``n`` is the number of conductors in the
circuit loop. Powers are device totals: per-pole DC powers are multiplied by
the pole count.

Bus roles follow the network's ``ac`` section. The configured slack bus (or
its fallback) is the angle reference, and every other source is a PV bus at
the AC voltage and PV power. Motors are PQ loads at the configured power
factor. A network that already carries contingency dispatch uses the
contingency PV power.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .netmodel import AcParameters, BusKind, Network, NetworkError, components

__all__ = [
    "AcBusKind",
    "AcBusSpec",
    "AcBranch",
    "AcStudy",
    "AcOptions",
    "AcSolution",
    "AcConvergenceError",
    "SingularJacobianError",
    "ac_study_from_network",
    "dc_limit_study",
    "solve_newton_raphson",
    "solve_ac",
]

log = logging.getLogger(__name__)


class AcBusKind(str, Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"


@dataclass(frozen=True)
class AcBusSpec:
    """One AC bus. ``p`` and ``q`` are net injections [W, var]."""

    id: int
    kind: AcBusKind
    voltage_setpoint: float
    p: float = 0.0
    q: float = 0.0


@dataclass(frozen=True)
class AcBranch:
    id: int
    from_bus: int
    to_bus: int
    impedance: complex


@dataclass(frozen=True)
class AcStudy:
    buses: tuple[AcBusSpec, ...]
    branches: tuple[AcBranch, ...]
    frequency: float = 60.0

    def __post_init__(self) -> None:
        ids = {b.id for b in self.buses}
        for comp in components(ids, self.branches):  # type: ignore[arg-type]
            slacks = [b for b in comp if self.bus(b).kind is AcBusKind.SLACK]
            if len(slacks) != 1:
                raise NetworkError(f"buses {comp}", f"AC island needs exactly one slack bus, found {len(slacks)}")

    def bus(self, bus_id: int) -> AcBusSpec:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)


@dataclass(frozen=True)
class AcOptions:
    """Newton-Raphson controls. ``tolerance`` is the mismatch bound [W / var]."""

    tolerance: float = 1e-3
    max_iterations: int = 30

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


class AcConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: list[float]):
        self.trace = trace
        super().__init__(message)


class SingularJacobianError(AcConvergenceError):
    pass


@dataclass(frozen=True)
class AcSolution:
    """Converged AC operating point.

    ``currents`` are complex phasors [A] flowing from ``from_bus`` to
    ``to_bus``. :meth:`current_angle` reports the angle of the reversed
    phasor (to-bus towards from-bus), which is how the published tables
    quote branch current angles.
    """

    study: AcStudy
    bus_ids: tuple[int, ...]
    voltage: np.ndarray = field(repr=False)
    currents: dict[int, complex]
    loss: float
    reactive_loss: float
    max_mismatch: float
    iterations: int
    trace: tuple[float, ...]
    converged: bool = True

    @property
    def magnitude(self) -> dict[int, float]:
        return {b: float(abs(v)) for b, v in zip(self.bus_ids, self.voltage)}

    @property
    def magnitude_kv(self) -> dict[int, float]:
        return {b: v / 1000.0 for b, v in self.magnitude.items()}

    @property
    def angle(self) -> dict[int, float]:
        return {b: float(np.angle(v)) for b, v in zip(self.bus_ids, self.voltage)}

    def current_magnitude(self, branch_id: int) -> float:
        return float(abs(self.currents[branch_id]))

    def current_angle(self, branch_id: int) -> float:
        return float(np.angle(-self.currents[branch_id]))

    def injections(self) -> dict[int, complex]:
        """Complex power [VA] injected at each bus by the solved flows."""
        Y = _ybus(self.study, {b: i for i, b in enumerate(self.bus_ids)})
        s = self.voltage * np.conj(Y @ self.voltage)
        return {b: complex(x) for b, x in zip(self.bus_ids, s)}


def _loop_impedance(net: Network, params: AcParameters, branch_id: int) -> complex:
    br = net.branch(branch_id)
    r = net.resistance(br)
    x = params.reactance_per_meter.get(br.conductor, 0.0) * br.length
    return params.conductors_per_circuit * complex(r, x)


def _pick_slack(net: Network, comp: list[int], params: AcParameters) -> int:
    for cand in (params.slack_bus, params.slack_fallback):
        # a failed EEU stays in the graph as a junction and cannot hold the angle
        if cand is not None and cand in comp and net.bus(cand).is_source:
            return cand
    vc = [b for b in comp if net.bus(b).kind is BusKind.VOLTAGE_CONTROLLED]
    if vc:
        return min(vc)
    sources = [b for b in comp if net.bus(b).is_source]
    if not sources:
        raise NetworkError(f"buses {comp}", "AC island has no source to act as slack")
    return min(sources)


def ac_study_from_network(net: Network, params: AcParameters | None = None) -> AcStudy:
    """Assign slack/PV/PQ roles per the dispatch rules in ``params``.

    ``params`` defaults to ``net.ac``. Load powers are scaled by the pole
    count so the AC study sees device totals.
    """
    params = params or net.ac
    if params is None:
        raise NetworkError(net.name, "network has no 'ac' section")
    if not 0 < params.power_factor <= 1:
        raise NetworkError("ac", "power_factor must be in (0, 1]")
    tan_phi = float(np.tan(np.arccos(params.power_factor)))
    scale = net.pole_count
    pv_power = params.pv_contingency_power if net.contingency_dispatch else params.pv_power
    if pv_power is not None and net.contingency_dispatch and params.pv_contingency_power is not None:
        pv_power *= net.scenario.load_scale

    specs: dict[int, AcBusSpec] = {}
    for comp in components((b.id for b in net.buses), net.branches):
        slack = _pick_slack(net, comp, params)
        for bid in comp:
            bus = net.bus(bid)
            if bid == slack:
                specs[bid] = AcBusSpec(bid, AcBusKind.SLACK, params.voltage)
            elif bus.is_source:
                p = pv_power if pv_power is not None else scale * max(bus.injection, 0.0)
                specs[bid] = AcBusSpec(bid, AcBusKind.PV, params.voltage, p=p)
            else:
                p = scale * bus.injection
                q = p * tan_phi if bus.is_load else 0.0
                specs[bid] = AcBusSpec(bid, AcBusKind.PQ, params.voltage, p=p, q=q)
    for bid, over in params.bus_overrides.items():
        if bid not in specs:
            continue
        cur = specs[bid]
        specs[bid] = replace(
            cur,
            kind=AcBusKind(over.get("kind", cur.kind.value)),
            voltage_setpoint=float(over.get("voltage_v", cur.voltage_setpoint)),
            p=float(over.get("p_w", cur.p)),
            q=float(over.get("q_var", cur.q)),
        )
    branches = tuple(
        AcBranch(br.id, br.from_bus, br.to_bus, _loop_impedance(net, params, br.id)) for br in net.branches
    )
    return AcStudy(tuple(specs[b] for b in sorted(specs)), branches, params.frequency)


def dc_limit_study(net: Network) -> AcStudy:
    """The AC study that must reproduce the DC solution exactly.

    Zero reactance, unity power factor, a single conductor per circuit and
    per-pole powers, with the voltage-controlled bus as slack at its DC
    setpoint. Each island needs exactly one voltage-controlled bus: in a
    purely resistive network a PV bus has no first-order angle control of
    its real power, so extra voltage-controlled buses cannot be mapped.
    """
    specs = []
    for bus in sorted(net.buses, key=lambda b: b.id):
        if bus.kind is BusKind.VOLTAGE_CONTROLLED:
            specs.append(AcBusSpec(bus.id, AcBusKind.SLACK, float(bus.setpoint)))
        else:
            specs.append(AcBusSpec(bus.id, AcBusKind.PQ, bus.nominal_voltage, p=bus.injection))
    branches = tuple(AcBranch(br.id, br.from_bus, br.to_bus, complex(net.resistance(br), 0.0)) for br in net.branches)
    return AcStudy(tuple(specs), branches)


def _ybus(study: AcStudy, index: dict[int, int]) -> np.ndarray:
    n = len(index)
    Y = np.zeros((n, n), dtype=complex)
    for br in study.branches:
        y = 1.0 / br.impedance
        i, j = index[br.from_bus], index[br.to_bus]
        Y[i, i] += y
        Y[j, j] += y
        Y[i, j] -= y
        Y[j, i] -= y
    return Y


def solve_newton_raphson(study: AcStudy, opts: AcOptions | None = None) -> AcSolution:
    """Polar Newton-Raphson with an analytic Jacobian, flat start.

    Raises:
        SingularJacobianError: the Jacobian cannot be factored.
        AcConvergenceError: the mismatch is still above tolerance after
            ``max_iterations``; the per-iteration trace is attached.
    """
    opts = opts or AcOptions()
    bus_ids = tuple(b.id for b in study.buses)
    index = {b: i for i, b in enumerate(bus_ids)}
    Y = _ybus(study, index)
    kinds = [b.kind for b in study.buses]
    pvpq = np.array([i for i, k in enumerate(kinds) if k is not AcBusKind.SLACK], dtype=int)
    pq = np.array([i for i, k in enumerate(kinds) if k is AcBusKind.PQ], dtype=int)
    s_spec = np.array([complex(b.p, b.q) for b in study.buses])

    vm = np.array([b.voltage_setpoint for b in study.buses], dtype=float)
    va = np.zeros(len(bus_ids))
    trace: list[float] = []

    def mismatch(V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ibus = Y @ V
        d = V * np.conj(ibus) - s_spec
        return np.r_[d.real[pvpq], d.imag[pq]], ibus

    it = 0
    while True:
        V = vm * np.exp(1j * va)
        f, ibus = mismatch(V)
        worst = float(np.max(np.abs(f))) if f.size else 0.0
        trace.append(worst)
        if worst < opts.tolerance:
            break
        if it >= opts.max_iterations:
            raise AcConvergenceError(
                f"AC power flow did not converge in {opts.max_iterations} iterations "
                f"(max mismatch {worst:.3g} W)",
                trace,
            )
        it += 1
        dS_dva = 1j * np.diag(V) @ np.conj(np.diag(ibus) - Y @ np.diag(V))
        vnorm = V / np.abs(V)
        dS_dvm = np.diag(V) @ np.conj(Y @ np.diag(vnorm)) + np.diag(np.conj(ibus) * vnorm)
        J = np.block(
            [
                [dS_dva.real[np.ix_(pvpq, pvpq)], dS_dvm.real[np.ix_(pvpq, pq)]],
                [dS_dva.imag[np.ix_(pq, pvpq)], dS_dvm.imag[np.ix_(pq, pq)]],
            ]
        )
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(f"singular Jacobian at iteration {it}", trace) from exc
        if not np.all(np.isfinite(dx)):
            raise SingularJacobianError(f"singular Jacobian at iteration {it}", trace)
        va[pvpq] += dx[: pvpq.size]
        vm[pq] += dx[pvpq.size :]
        if np.any(vm <= 0):
            raise AcConvergenceError(f"nonpositive voltage magnitude at iteration {it}", trace)

    currents = {}
    loss = 0.0
    qloss = 0.0
    for br in study.branches:
        i = (V[index[br.from_bus]] - V[index[br.to_bus]]) / br.impedance
        currents[br.id] = complex(i)
        loss += abs(i) ** 2 * br.impedance.real
        qloss += abs(i) ** 2 * br.impedance.imag
    return AcSolution(study, bus_ids, V, currents, float(loss), float(qloss), trace[-1], it, tuple(trace))


def solve_ac(net: Network, opts: AcOptions | None = None) -> AcSolution:
    """Build the AC study for ``net`` and solve it."""
    return solve_newton_raphson(ac_study_from_network(net), opts)
