"""Single-contingency screening, re-dispatch and breaker-failure checks.

Three outage kinds are enumerated:

* branch loss: one cable removed;
* busbar loss: a non-source bus and every cable touching it removed;
* EEU loss: a source stops injecting. Its bus stays in the network as a
  passive junction, so power can still pass through it.

After the outage, islands without load are de-energized and islands with
load but no source have their load shed. If any source ended up lost, the
surviving constant-power generators move to the contingency dispatch.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

from .ac_solver import AcConvergenceError, AcOptions, solve_ac
from .admittance import build_partition
from .dc_solvers import SOLVERS, ConvergenceError, SolveOptions, branch_currents, total_loss
from .netmodel import Bus, BusKind, ConductorSpec, Network, NetworkError, components, validate

__all__ = [
    "CaseKind",
    "ContingencyCase",
    "CaseOutcome",
    "CaseResult",
    "SummaryRow",
    "StudyReport",
    "IsolationResult",
    "enumerate_cases",
    "assess_case",
    "apply_case",
    "evaluate",
    "run_study",
    "mlp",
    "cbf_check",
    "TIE_RTOL",
]

log = logging.getLogger(__name__)

TIE_RTOL = 1e-6


class CaseKind(str, Enum):
    NORMAL = "normal"
    BRANCH = "branch_loss"
    BUSBAR = "busbar_loss"
    EEU = "eeu_loss"


@dataclass(frozen=True)
class ContingencyCase:
    kind: CaseKind
    element: int | None = None

    @property
    def key(self) -> str:
        return self.kind.value if self.element is None else f"{self.kind.value}:{self.element}"

    def describe(self, net: Network) -> str:
        """Human label, e.g. ``"Loss of cable 2-6"``."""
        if self.kind is CaseKind.NORMAL:
            return "Normal operation"
        if self.kind is CaseKind.BRANCH:
            br = net.branch(self.element)
            return f"Loss of cable {br.from_bus}-{br.to_bus}"
        if self.kind is CaseKind.BUSBAR:
            return f"Loss of busbar {self.element}"
        return f"Failure of {net.bus(self.element).name}"


NORMAL = ContingencyCase(CaseKind.NORMAL)


def enumerate_cases(net: Network) -> list[ContingencyCase]:
    """Branch losses, then busbar losses of non-source buses, then EEU losses."""
    out = [ContingencyCase(CaseKind.BRANCH, br.id) for br in sorted(net.branches, key=lambda b: b.id)]
    buses = sorted(net.buses, key=lambda b: b.id)
    out += [ContingencyCase(CaseKind.BUSBAR, b.id) for b in buses if not b.is_source]
    out += [ContingencyCase(CaseKind.EEU, b.id) for b in buses if b.is_source]
    return out


@dataclass(frozen=True)
class CaseOutcome:
    """Post-contingency state before any power flow is run.

    ``network`` is the energized remainder (possibly empty). ``shed_load``
    is in the network's power units (per pole under the pole model) and
    includes loads on removed buses.
    """

    case: ContingencyCase
    network: Network
    removed_buses: tuple[int, ...]
    removed_branches: tuple[int, ...]
    deenergized_buses: tuple[int, ...]
    shed_buses: tuple[int, ...]
    shed_load: float
    lost_sources: tuple[int, ...]
    redispatched: bool
    feasible: bool
    reason: str = ""


def _junction(bus: Bus) -> Bus:
    return Bus(bus.id, bus.name, BusKind.JUNCTION, bus.nominal_voltage)


def assess_case(net: Network, case: ContingencyCase) -> CaseOutcome:
    """Apply ``case`` to ``net``, split islands and re-dispatch generators."""
    buses = {b.id: b for b in net.buses}
    branches = {br.id: br for br in net.branches}
    removed_buses: list[int] = []
    removed_branches: list[int] = []
    shed: list[int] = []

    if case.kind is CaseKind.BRANCH:
        if case.element not in branches:
            raise KeyError(f"unknown branch {case.element}")
        removed_branches.append(case.element)
    elif case.kind is CaseKind.BUSBAR:
        if case.element not in buses:
            raise KeyError(f"unknown bus {case.element}")
        removed_buses.append(case.element)
        removed_branches += [br.id for br in net.branches if br.touches(case.element)]
        if buses[case.element].is_load:
            shed.append(case.element)
    elif case.kind is CaseKind.EEU:
        if case.element not in buses or not buses[case.element].is_source:
            raise KeyError(f"bus {case.element} is not a source")
        buses[case.element] = _junction(buses[case.element])
    for b in removed_buses:
        del buses[b]
    for br in removed_branches:
        del branches[br]

    deenergized: list[int] = []
    feasible, reason = True, ""
    keep: set[int] = set()
    for comp in components(buses, branches.values()):
        members = [buses[b] for b in comp]
        has_load = any(b.is_load for b in members)
        if not has_load:
            deenergized += comp
        elif not any(b.is_source for b in members):
            deenergized += comp
            shed += [b.id for b in members if b.is_load]
            feasible, reason = False, f"no source reaches buses {comp}"
        elif not any(b.kind is BusKind.VOLTAGE_CONTROLLED for b in members):
            deenergized += comp
            shed += [b.id for b in members if b.is_load]
            feasible, reason = False, f"no voltage-controlled bus in island {comp}"
        else:
            keep.update(comp)

    lost = tuple(sorted(b.id for b in net.buses if b.is_source and (b.id not in keep or not buses[b.id].is_source)))
    redispatch = bool(lost) and net.dispatch.contingency_cp_generator_power > 0
    new_buses = []
    for bid in sorted(keep):
        b = buses[bid]
        if redispatch and b.kind is BusKind.CONSTANT_POWER and b.role == "generator":
            b = replace(b, power=net.dispatch.contingency_cp_generator_power * net.scenario.load_scale)
        new_buses.append(b)
    remainder = replace(
        net,
        buses=tuple(new_buses),
        branches=tuple(br for bid, br in sorted(branches.items()) if br.from_bus in keep),
        dispatch=replace(
            net.dispatch,
            voltage_controlled_buses=tuple(
                b for b in net.dispatch.voltage_controlled_buses
                if b in keep and buses[b].kind is BusKind.VOLTAGE_CONTROLLED
            ),
        ),
        contingency_dispatch=net.contingency_dispatch or redispatch,
    )
    remainder = validate(remainder, require_connected=False)
    shed_load = sum(net.bus(b).power for b in shed)
    return CaseOutcome(
        case=case,
        network=remainder,
        removed_buses=tuple(removed_buses),
        removed_branches=tuple(sorted(removed_branches)),
        deenergized_buses=tuple(sorted(deenergized)),
        shed_buses=tuple(sorted(shed)),
        shed_load=float(shed_load),
        lost_sources=lost,
        redispatched=redispatch,
        feasible=feasible,
        reason=reason,
    )


def apply_case(net: Network, case: ContingencyCase) -> Network:
    """The energized post-contingency network for ``case``."""
    return assess_case(net, case).network


def mlp(current: float, conductor: ConductorSpec) -> float:
    """Maximum line loading [%]: ``|I| / ampacity * 100``."""
    if not conductor.ampacity > 0:
        raise ValueError("ampacity must be > 0")
    return abs(current) / conductor.ampacity * 100.0


@dataclass(frozen=True)
class CaseResult:
    """Power flow outcome of one case.

    ``status`` is ``"ok"``, ``"infeasible"`` (load was islanded from every
    voltage-controlled source) or ``"diverged"``. An infeasible case still
    reports the flow on its energized remainder.
    """

    case: ContingencyCase
    label: str
    status: str
    converged: bool
    iterations: int
    currents: dict[int, float]
    mlp: dict[int, float]
    max_current: float
    max_current_branch: int | None
    max_mlp: float
    voltages: dict[int, float]
    min_voltage: float
    min_voltage_bus: int | None
    per_pole_loss: float
    total_loss: float
    shed_load: float
    shed_buses: tuple[int, ...]
    lost_sources: tuple[int, ...]
    message: str = ""

    def max_mlp_branches(self, rtol: float = TIE_RTOL) -> list[int]:
        return sorted(b for b, m in self.mlp.items() if _ties(m, self.max_mlp, rtol))


def _ties(a: float, b: float, rtol: float) -> bool:
    return math.isclose(a, b, rel_tol=rtol, abs_tol=1e-12)


def _empty_result(outcome: CaseOutcome, label: str, status: str, message: str) -> CaseResult:
    return CaseResult(
        case=outcome.case,
        label=label,
        status=status,
        converged=status != "diverged",
        iterations=0,
        currents={},
        mlp={},
        max_current=0.0,
        max_current_branch=None,
        max_mlp=0.0,
        voltages={},
        min_voltage=float("nan"),
        min_voltage_bus=None,
        per_pole_loss=0.0,
        total_loss=0.0,
        shed_load=outcome.shed_load,
        shed_buses=outcome.shed_buses,
        lost_sources=outcome.lost_sources,
        message=message,
    )


def evaluate(
    outcome: CaseOutcome,
    label: str,
    solver: str = "zbus",
    opts: SolveOptions | None = None,
    ac_opts: AcOptions | None = None,
) -> CaseResult:
    """Run the power flow on an assessed case and collect its metrics."""
    net = outcome.network
    status = "ok" if outcome.feasible else "infeasible"
    if not net.buses:
        return _empty_result(outcome, label, status, outcome.reason)
    try:
        if solver == "ac":
            sol = solve_ac(net, ac_opts)
            currents = {b: sol.current_magnitude(b) for b in sol.currents}
            voltages = sol.magnitude
            loss = sol.loss
            per_pole = loss / net.pole_count
            converged, iterations = True, sol.iterations
        else:
            dc = SOLVERS[solver](build_partition(net), opts)
            voltages = dc.voltages()
            currents = branch_currents(net, voltages)
            loss = total_loss(net, currents)
            per_pole = loss / net.pole_count
            converged, iterations = dc.converged, dc.iterations
    except (ConvergenceError, AcConvergenceError, NetworkError) as exc:
        return _empty_result(outcome, label, "diverged", str(exc))
    if not converged:
        status = "diverged"
    loading = {b: mlp(i, net.conductor(net.branch(b))) for b, i in currents.items()}
    worst_i = max(currents, key=lambda b: (abs(currents[b]), -b), default=None)
    low_bus = min(voltages, key=lambda b: (voltages[b], b))
    return CaseResult(
        case=outcome.case,
        label=label,
        status=status,
        converged=converged,
        iterations=iterations,
        currents=currents,
        mlp=loading,
        max_current=abs(currents[worst_i]) if worst_i is not None else 0.0,
        max_current_branch=worst_i,
        max_mlp=max(loading.values(), default=0.0),
        voltages=voltages,
        min_voltage=voltages[low_bus],
        min_voltage_bus=low_bus,
        per_pole_loss=per_pole,
        total_loss=loss,
        shed_load=outcome.shed_load,
        shed_buses=outcome.shed_buses,
        lost_sources=outcome.lost_sources,
        message=outcome.reason,
    )


@dataclass(frozen=True)
class Location:
    """A (case, branch) pair where an extreme loading occurs."""

    case_index: int | None  # None for the normal case
    branch: int
    label: str
    cause: str


@dataclass(frozen=True)
class SummaryRow:
    """One conductor's line of the worst-case summary."""

    conductor: str
    loss: float | None
    normal_mlp: float
    normal_locations: tuple[str, ...]
    worst_mlp: float
    worst_locations: tuple[str, ...]
    worst_causes: tuple[str, ...]


@dataclass(frozen=True)
class StudyReport:
    network_name: str
    scenario: str
    solver: str
    normal: CaseResult
    cases: tuple[CaseResult, ...]
    worst_mlp: tuple[Location, ...]
    worst_voltage: tuple[Location, ...]
    summary: tuple[SummaryRow, ...]
    branch_labels: dict[int, str] = field(repr=False, default_factory=dict)

    def result(self, key: str) -> CaseResult:
        for r in self.cases:
            if r.case.key == key:
                return r
        raise KeyError(key)


def _branch_label(net: Network, branch_id: int) -> str:
    br = net.branch(branch_id)
    return f"{br.from_bus}-{br.to_bus}"


def _conductor_order(net: Network) -> list[str]:
    seen: dict[str, None] = {}
    for br in sorted(net.branches, key=lambda b: (net.tier(b) != "eeu", b.id)):
        seen.setdefault(br.conductor, None)
    return list(seen)


def _summarize(net: Network, normal: CaseResult, results: list[CaseResult], cases: list[ContingencyCase]) -> list[SummaryRow]:
    rows = []
    for i, cond in enumerate(_conductor_order(net)):
        ids = {br.id for br in net.branches if br.conductor == cond}
        n_vals = {b: m for b, m in normal.mlp.items() if b in ids}
        n_max = max(n_vals.values(), default=0.0)
        n_loc = tuple(_branch_label(net, b) for b in sorted(n_vals) if _ties(n_vals[b], n_max, TIE_RTOL))
        w_max = max((m for r in results if r.converged for b, m in r.mlp.items() if b in ids), default=0.0)
        hits = sorted(
            (b, k)
            for k, r in enumerate(results)
            if r.converged
            for b, m in r.mlp.items()
            if b in ids and _ties(m, w_max, TIE_RTOL)
        )
        rows.append(
            SummaryRow(
                conductor=cond,
                loss=normal.total_loss if i == 0 else None,
                normal_mlp=n_max,
                normal_locations=n_loc,
                worst_mlp=w_max,
                worst_locations=tuple(dict.fromkeys(_branch_label(net, b) for b, _ in hits)),
                worst_causes=tuple(dict.fromkeys(results[k].label for _, k in hits)),
            )
        )
    return rows


def run_study(
    net: Network,
    solver: str = "zbus",
    opts: SolveOptions | None = None,
    ac_opts: AcOptions | None = None,
    workers: int = 1,
    cases: Iterable[ContingencyCase] | None = None,
) -> StudyReport:
    """Solve the normal case and every single contingency.

    ``solver`` is ``"zbus"``, ``"monotone"`` or ``"ac"``. With ``workers > 1``
    cases run on a thread pool; results are collected in enumeration order,
    so the report does not depend on completion order.
    """
    if solver not in (*SOLVERS, "ac"):
        raise ValueError(f"unknown solver {solver!r}")
    case_list = list(enumerate_cases(net) if cases is None else cases)

    def run(case: ContingencyCase) -> CaseResult:
        outcome = CaseOutcome(NORMAL, net, (), (), (), (), 0.0, (), False, True) if case is NORMAL else assess_case(net, case)
        return evaluate(outcome, case.describe(net), solver, opts, ac_opts)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, [NORMAL, *case_list]))
    else:
        results = [run(c) for c in (NORMAL, *case_list)]
    normal, results = results[0], results[1:]

    top = max((r.max_mlp for r in results if r.converged), default=0.0)
    worst = tuple(
        Location(k, b, _branch_label(net, b), r.label)
        for k, r in enumerate(results)
        if r.converged and r.mlp
        for b in r.max_mlp_branches()
        if _ties(r.max_mlp, top, TIE_RTOL)
    )
    worst = tuple(sorted(worst, key=lambda loc: (loc.branch, loc.case_index)))
    vals = [r.min_voltage for r in results if r.converged and r.voltages]
    low = min(vals, default=float("nan"))
    worst_v = tuple(
        Location(k, -1, str(r.min_voltage_bus), r.label)
        for k, r in enumerate(results)
        if r.converged and r.voltages and _ties(r.min_voltage, low, TIE_RTOL)
    )
    return StudyReport(
        network_name=net.name,
        scenario=net.scenario.name,
        solver=solver,
        normal=normal,
        cases=tuple(results),
        worst_mlp=worst,
        worst_voltage=worst_v,
        summary=tuple(_summarize(net, normal, results, case_list)),
        branch_labels={br.id: _branch_label(net, br.id) for br in net.branches},
    )


# -- breaker failure ---------------------------------------------------------


@dataclass(frozen=True)
class IsolationResult:
    """Outcome of a fault with one stuck breaker.

    ``opened`` lists (branch id, bus id) breaker positions that tripped.
    """

    isolated: bool
    faulted_bus: int
    stuck: tuple[int, int]
    opened: tuple[tuple[int, int], ...]
    energized_buses: tuple[int, ...]
    deenergized_buses: tuple[int, ...]
    note: str = ""


def cbf_check(net: Network, faulted_bus: int, stuck_breaker: tuple[int, int]) -> IsolationResult:
    """Simulate clearing a bus fault when one adjacent breaker fails to open.

    Every branch touching the fault is cleared by its breaker nearest the
    fault. The stuck breaker's duty passes to the far-end breaker of the same
    branch, or, if that end has none, to every other breaker at the far bus.
    The fault is isolated when no source other than the faulted bus can
    reach it through closed branches.

    Raises:
        ValueError: the stuck breaker is not a breaker at the faulted bus.
    """
    branch_id, end = stuck_breaker
    if faulted_bus not in net.bus_by_id:
        raise ValueError(f"unknown bus {faulted_bus}")
    if branch_id not in net.branch_by_id:
        raise ValueError(f"unknown branch {branch_id}")
    stuck_br = net.branch(branch_id)
    if end != faulted_bus or not stuck_br.touches(faulted_bus) or faulted_bus not in stuck_br.breakers:
        raise ValueError(f"branch {branch_id} has no breaker at bus {faulted_bus} adjacent to the fault")

    opened: list[tuple[int, int]] = []

    def trip_far_bus(far: int, exclude: int) -> None:
        for other in net.incident(far):
            if other.id != exclude and far in other.breakers:
                opened.append((other.id, far))

    for br in sorted(net.incident(faulted_bus), key=lambda b: b.id):
        far = br.other(faulted_bus)
        if br.id == branch_id:
            if far in br.breakers:
                opened.append((br.id, far))
            else:
                trip_far_bus(far, br.id)
        elif faulted_bus in br.breakers:
            opened.append((br.id, faulted_bus))
        elif far in br.breakers:
            opened.append((br.id, far))
        else:
            trip_far_bus(far, br.id)

    open_ids = {b for b, _ in opened}
    closed = [br for br in net.branches if br.id not in open_ids]
    comps = components(net.bus_by_id, closed)
    fault_comp = next(c for c in comps if faulted_bus in c)
    isolated = not any(net.bus(b).is_source for b in fault_comp if b != faulted_bus)
    energized = sorted(
        b for c in comps if faulted_bus not in c and any(net.bus(x).is_source for x in c) for b in c
    )
    dead = sorted(set(net.bus_by_id) - set(energized))
    note = "" if isolated else "fault still fed through branches " + ", ".join(
        _branch_label(net, br.id) for br in closed if br.touches(faulted_bus)
    )
    return IsolationResult(
        isolated=isolated,
        faulted_bus=faulted_bus,
        stuck=(branch_id, end),
        opened=tuple(sorted(set(opened))),
        energized_buses=tuple(energized),
        deenergized_buses=tuple(dead),
        note=note,
    )
