"""Network data model, validation and the built-in Architecture #1 case.

A :class:`Network` is immutable. Every operation that changes a network
(scenario scaling, conductor swaps, contingencies) returns a new instance.

Bus powers are stored per pole when ``pole_model`` is set: a bipolar
+/-V system is represented by one pole at V carrying half of each device's
total power.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "BusKind",
    "Bus",
    "Branch",
    "ConductorSpec",
    "DispatchPolicy",
    "Scenario",
    "AcParameters",
    "Network",
    "NetworkError",
    "TAKEOFF",
    "CRUISE",
    "CONDUCTOR_PAIRS",
    "load_network",
    "parse_network",
    "serialize_network",
    "builtin_architecture1",
    "apply_scenario",
    "with_conductors",
    "count_breakers",
    "total_cable_length",
    "components",
]


class NetworkError(ValueError):
    """Invalid network document or network state.

    ``element`` names the offending element (e.g. ``"branch 7"``) and
    ``rule`` the violated constraint.
    """

    def __init__(self, element: str, rule: str):
        self.element = element
        self.rule = rule
        super().__init__(f"{element}: {rule}")


class BusKind(str, enum.Enum):
    VOLTAGE_CONTROLLED = "voltage_controlled"
    CONSTANT_POWER = "constant_power"
    JUNCTION = "junction"


@dataclass(frozen=True)
class Bus:
    """A network node.

    Attributes:
        id: Unique integer id.
        name: Display name.
        kind: Voltage-controlled, constant-power or junction.
        nominal_voltage: Nominal voltage [V], used for flat starts.
        setpoint: Voltage setpoint [V] (voltage-controlled buses only).
        power: Power magnitude [W] (constant-power buses only).
        role: ``"generator"`` or ``"load"`` for constant-power buses.
    """

    id: int
    name: str
    kind: BusKind
    nominal_voltage: float
    setpoint: float | None = None
    power: float = 0.0
    role: str | None = None

    @property
    def injection(self) -> float:
        """Net injected power [W]; generation positive, load negative."""
        if self.kind is not BusKind.CONSTANT_POWER:
            return 0.0
        return self.power if self.role == "generator" else -self.power

    @property
    def is_source(self) -> bool:
        return self.kind is BusKind.VOLTAGE_CONTROLLED or (
            self.kind is BusKind.CONSTANT_POWER and self.role == "generator"
        )

    @property
    def is_load(self) -> bool:
        return self.kind is BusKind.CONSTANT_POWER and self.role == "load"


@dataclass(frozen=True)
class Branch:
    """A cable between two buses.

    ``breakers`` lists the bus ids at whose end of the cable a circuit
    breaker sits (zero, one or both ends).
    """

    id: int
    from_bus: int
    to_bus: int
    length: float
    conductor: str
    breakers: tuple[int, ...] = ()
    tier: str | None = None

    @property
    def breaker_ends(self) -> int:
        return len(self.breakers)

    def other(self, bus: int) -> int:
        return self.to_bus if bus == self.from_bus else self.from_bus

    def touches(self, bus: int) -> bool:
        return bus == self.from_bus or bus == self.to_bus


@dataclass(frozen=True)
class ConductorSpec:
    name: str
    resistance_per_meter: float
    ampacity: float


@dataclass(frozen=True)
class DispatchPolicy:
    """Generator dispatch rules.

    Constant-power generators run at ``normal_cp_generator_power`` until any
    source is lost, then every surviving one moves to
    ``contingency_cp_generator_power``. Powers are per pole when the network
    uses the pole model, and are rated at a load scale of 1.
    """

    normal_cp_generator_power: float
    contingency_cp_generator_power: float
    voltage_controlled_buses: tuple[int, ...]
    slack_fallback: int | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    load_scale: float

    def __post_init__(self) -> None:
        if not self.load_scale > 0:
            raise NetworkError(f"scenario {self.name!r}", "load_scale must be > 0")


TAKEOFF = Scenario("takeoff", 1.0)
CRUISE = Scenario("cruise", 0.3)


@dataclass(frozen=True)
class AcParameters:
    """Optional AC comparison-study settings carried by a network file."""

    frequency: float = 60.0
    voltage: float = 10_000.0
    conductors_per_circuit: int = 2
    power_factor: float = 1.0
    slack_bus: int | None = None
    slack_fallback: int | None = None
    pv_power: float | None = None
    pv_contingency_power: float | None = None
    reactance_per_meter: Mapping[str, float] = field(default_factory=dict)
    bus_overrides: Mapping[int, Mapping[str, Any]] = field(default_factory=dict)


@dataclass(frozen=True)
class Network:
    """Immutable bus/branch network plus conductor catalog and dispatch."""

    name: str
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    conductors: tuple[ConductorSpec, ...]
    dispatch: DispatchPolicy
    scenario: Scenario = TAKEOFF
    pole_model: bool = True
    ac: AcParameters | None = None
    contingency_dispatch: bool = False
    description: str = ""
    calibration: Mapping[str, Any] = field(default_factory=dict)

    @cached_property
    def bus_by_id(self) -> dict[int, Bus]:
        return {b.id: b for b in self.buses}

    @cached_property
    def branch_by_id(self) -> dict[int, Branch]:
        return {br.id: br for br in self.branches}

    @cached_property
    def conductor_by_name(self) -> dict[str, ConductorSpec]:
        return {c.name: c for c in self.conductors}

    @property
    def pole_count(self) -> int:
        return 2 if self.pole_model else 1

    def bus(self, bus_id: int) -> Bus:
        return self.bus_by_id[bus_id]

    def branch(self, branch_id: int) -> Branch:
        return self.branch_by_id[branch_id]

    def conductor(self, branch: Branch) -> ConductorSpec:
        return self.conductor_by_name[branch.conductor]

    def resistance(self, branch: Branch) -> float:
        return branch.length * self.conductor(branch).resistance_per_meter

    def admittance(self, branch: Branch) -> float:
        return 1.0 / self.resistance(branch)

    def incident(self, bus_id: int) -> list[Branch]:
        return [br for br in self.branches if br.touches(bus_id)]

    def degree(self, bus_id: int) -> int:
        return len(self.incident(bus_id))

    def branch_between(self, a: int, b: int) -> Branch:
        for br in self.branches:
            if {br.from_bus, br.to_bus} == {a, b}:
                return br
        raise KeyError(f"no branch between {a} and {b}")

    def tier(self, branch: Branch) -> str:
        """``"eeu"`` for source-to-busbar cables, ``"feeder"`` otherwise."""
        if branch.tier:
            return branch.tier
        ends = (self.bus(branch.from_bus), self.bus(branch.to_bus))
        return "eeu" if any(b.is_source for b in ends) else "feeder"

    @property
    def total_load(self) -> float:
        return sum(b.power for b in self.buses if b.is_load)


def components(bus_ids: Iterable[int], branches: Iterable[Branch]) -> list[list[int]]:
    """Connected components as sorted id lists, ordered by smallest id."""
    ids = sorted(bus_ids)
    pos = {b: i for i, b in enumerate(ids)}
    rows, cols = [], []
    for br in branches:
        if br.from_bus in pos and br.to_bus in pos:
            rows.append(pos[br.from_bus])
            cols.append(pos[br.to_bus])
    n = len(ids)
    if n == 0:
        return []
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    groups: dict[int, list[int]] = {}
    for bus_id, label in zip(ids, labels):
        groups.setdefault(int(label), []).append(bus_id)
    return sorted(groups.values(), key=lambda g: g[0])


# -- validation -------------------------------------------------------------


def validate(net: Network, require_connected: bool = True) -> Network:
    """Check every structural invariant; return ``net`` unchanged."""
    seen: set[int] = set()
    for bus in net.buses:
        if bus.id in seen:
            raise NetworkError(f"bus {bus.id}", "duplicate bus id")
        seen.add(bus.id)
        if bus.kind is BusKind.VOLTAGE_CONTROLLED:
            if bus.setpoint is None or not bus.setpoint > 0:
                raise NetworkError(f"bus {bus.id}", "voltage setpoint must be > 0")
        elif bus.kind is BusKind.CONSTANT_POWER:
            if bus.role not in ("generator", "load"):
                raise NetworkError(f"bus {bus.id}", "role must be 'generator' or 'load'")
            if not np.isfinite(bus.power) or bus.power < 0:
                raise NetworkError(f"bus {bus.id}", "power must be finite and >= 0")
        elif bus.power != 0.0:
            raise NetworkError(f"bus {bus.id}", "junction carries no injected power")
        if not bus.nominal_voltage > 0:
            raise NetworkError(f"bus {bus.id}", "nominal voltage must be > 0")

    for cond in net.conductors:
        if not cond.resistance_per_meter > 0:
            raise NetworkError(f"conductor {cond.name}", "resistance per meter must be > 0")
        if not cond.ampacity > 0:
            raise NetworkError(f"conductor {cond.name}", "ampacity must be > 0")

    branch_ids: set[int] = set()
    pairs: set[frozenset[int]] = set()
    for br in net.branches:
        where = f"branch {br.id}"
        if br.id in branch_ids:
            raise NetworkError(where, "duplicate branch id")
        branch_ids.add(br.id)
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                raise NetworkError(where, f"references unknown bus {end}")
        if br.from_bus == br.to_bus:
            raise NetworkError(where, "self-loop (from_bus == to_bus)")
        pair = frozenset((br.from_bus, br.to_bus))
        if pair in pairs:
            raise NetworkError(where, "parallel branch between the same buses")
        pairs.add(pair)
        if not br.length > 0:
            raise NetworkError(where, "length must be > 0")
        if br.conductor not in net.conductor_by_name:
            raise NetworkError(where, f"unknown conductor {br.conductor!r}")
        r = net.resistance(br)
        if not (np.isfinite(r) and r > 0 and np.isfinite(1.0 / r)):
            raise NetworkError(where, "resistance must be finite and > 0")
        for end in br.breakers:
            if end not in (br.from_bus, br.to_bus):
                raise NetworkError(where, f"breaker at bus {end} which is not a branch end")
        if len(set(br.breakers)) != len(br.breakers):
            raise NetworkError(where, "at most one breaker per branch end")

    for bus_id in net.dispatch.voltage_controlled_buses:
        if bus_id not in seen:
            raise NetworkError("dispatch", f"voltage-controlled bus {bus_id} does not exist")
    if net.dispatch.contingency_cp_generator_power < net.dispatch.normal_cp_generator_power:
        raise NetworkError("dispatch", "contingency generator power below normal power")

    comps = components(seen, net.branches)
    if require_connected and len(comps) > 1:
        raise NetworkError(
            "network", f"graph is disconnected into {len(comps)} parts: {comps}"
        )
    for comp in comps:
        kinds = [net.bus(b) for b in comp]
        if any(b.kind is BusKind.CONSTANT_POWER for b in kinds) and not any(
            b.kind is BusKind.VOLTAGE_CONTROLLED for b in kinds
        ):
            raise NetworkError(
                f"buses {comp}", "no voltage-controlled bus in this connected part"
            )
    return net


# -- (de)serialization ------------------------------------------------------


def _require(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise NetworkError(where, f"missing required key {key!r}")
    return obj[key]


def _parse_bus(doc: Mapping[str, Any]) -> Bus:
    where = f"bus {doc.get('id', '?')}"
    bus_id = _require(doc, "id", where)
    if not isinstance(bus_id, int) or isinstance(bus_id, bool):
        raise NetworkError(where, "id must be an integer")
    try:
        kind = BusKind(_require(doc, "kind", where))
    except ValueError:
        raise NetworkError(where, f"unknown kind {doc['kind']!r}") from None
    params = doc.get("params", {})
    nominal = float(doc.get("nominal_v", params.get("setpoint_v", 0.0)))
    if kind is BusKind.VOLTAGE_CONTROLLED:
        setpoint = float(_require(params, "setpoint_v", where))
        return Bus(bus_id, doc.get("name", str(bus_id)), kind, nominal or setpoint, setpoint=setpoint)
    if kind is BusKind.CONSTANT_POWER:
        return Bus(
            bus_id,
            doc.get("name", str(bus_id)),
            kind,
            nominal,
            power=float(_require(params, "power_w", where)),
            role=_require(params, "role", where),
        )
    return Bus(bus_id, doc.get("name", str(bus_id)), kind, nominal)


def _parse_breakers(value: Any, frm: int, to: int, where: str) -> tuple[int, ...]:
    if isinstance(value, bool):
        raise NetworkError(where, "breakers must be 0, 1, 2 or a list of bus ids")
    if isinstance(value, int):
        if value not in (0, 1, 2):
            raise NetworkError(where, "breakers must be 0, 1 or 2")
        return ((), (frm,), (frm, to))[value]
    if isinstance(value, list):
        return tuple(int(v) for v in value)
    raise NetworkError(where, "breakers must be 0, 1, 2 or a list of bus ids")


def _parse_branch(doc: Mapping[str, Any]) -> Branch:
    where = f"branch {doc.get('id', '?')}"
    frm = int(_require(doc, "from", where))
    to = int(_require(doc, "to", where))
    return Branch(
        id=int(_require(doc, "id", where)),
        from_bus=frm,
        to_bus=to,
        length=float(_require(doc, "length_m", where)),
        conductor=str(_require(doc, "conductor", where)),
        breakers=_parse_breakers(doc.get("breakers", 0), frm, to, where),
        tier=doc.get("tier"),
    )


def _parse_ac(doc: Mapping[str, Any] | None) -> AcParameters | None:
    if doc is None:
        return None
    reactance = {k: float(v) / 1000.0 for k, v in doc.get("reactance_ohm_per_km", {}).items()}
    overrides = {int(k): dict(v) for k, v in doc.get("bus_overrides", {}).items()}
    return AcParameters(
        frequency=float(doc.get("frequency_hz", 60.0)),
        voltage=float(doc.get("voltage_v", 10_000.0)),
        conductors_per_circuit=int(doc.get("conductors_per_circuit", 2)),
        power_factor=float(doc.get("power_factor", 1.0)),
        slack_bus=doc.get("slack_bus"),
        slack_fallback=doc.get("slack_fallback"),
        pv_power=doc.get("pv_power_w"),
        pv_contingency_power=doc.get("pv_contingency_power_w"),
        reactance_per_meter=reactance,
        bus_overrides=overrides,
    )


def parse_network(doc: Mapping[str, Any], require_connected: bool = True) -> Network:
    """Build and validate a :class:`Network` from a decoded JSON document.

    Post-contingency networks may legitimately be split into islands; pass
    ``require_connected=False`` to accept them.
    """
    if not isinstance(doc, Mapping):
        raise NetworkError("document", "top level must be a JSON object")
    for key in ("buses", "branches", "conductors"):
        _require(doc, key, "document")
    buses = tuple(_parse_bus(b) for b in doc["buses"])
    branches = tuple(_parse_branch(b) for b in doc["branches"])
    conductors = []
    for c in doc["conductors"]:
        where = f"conductor {c.get('name', '?')}"
        conductors.append(
            ConductorSpec(
                name=str(_require(c, "name", where)),
                resistance_per_meter=float(_require(c, "r_ohm_per_km", where)) / 1000.0,
                ampacity=float(_require(c, "ampacity_a", where)),
            )
        )
    d = doc.get("dispatch", {})
    dispatch = DispatchPolicy(
        normal_cp_generator_power=float(d.get("normal_cp_generator_w", 0.0)),
        contingency_cp_generator_power=float(
            d.get("contingency_cp_generator_w", d.get("normal_cp_generator_w", 0.0))
        ),
        voltage_controlled_buses=tuple(d.get("voltage_controlled_buses", ())),
        slack_fallback=d.get("slack_fallback"),
    )
    s = doc.get("scenario", {"name": "takeoff", "load_scale": 1.0})
    net = Network(
        name=str(doc.get("name", "network")),
        buses=buses,
        branches=branches,
        conductors=tuple(conductors),
        dispatch=dispatch,
        scenario=Scenario(str(s.get("name", "custom")), float(s.get("load_scale", 1.0))),
        pole_model=bool(doc.get("pole_model", True)),
        ac=_parse_ac(doc.get("ac")),
        contingency_dispatch=bool(doc.get("contingency_dispatch", False)),
        description=str(doc.get("description", "")),
        calibration=dict(doc.get("calibration", {})),
    )
    return validate(net, require_connected=require_connected)


def load_network(
    source: str | Path | Mapping[str, Any], require_connected: bool = True
) -> Network:
    """Load a network from a JSON file path, JSON text, or decoded mapping."""
    if isinstance(source, Mapping):
        return parse_network(source, require_connected)
    text = str(source)
    if text.lstrip().startswith("{"):
        payload = text
    else:
        path = Path(source)
        try:
            payload = path.read_text()
        except OSError as exc:
            raise NetworkError(str(path), f"cannot read file ({exc.strerror})") from exc
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise NetworkError("document", f"invalid JSON: {exc}") from exc
    return parse_network(doc, require_connected)


def _bus_doc(bus: Bus) -> dict[str, Any]:
    params: dict[str, Any] = {}
    if bus.kind is BusKind.VOLTAGE_CONTROLLED:
        params = {"setpoint_v": bus.setpoint}
    elif bus.kind is BusKind.CONSTANT_POWER:
        params = {"power_w": bus.power, "role": bus.role}
    return {
        "id": bus.id,
        "name": bus.name,
        "kind": bus.kind.value,
        "nominal_v": bus.nominal_voltage,
        "params": params,
    }


def serialize_network(net: Network) -> dict[str, Any]:
    """Inverse of :func:`parse_network`."""
    doc: dict[str, Any] = {
        "name": net.name,
        "description": net.description,
        "pole_model": net.pole_model,
        "buses": [_bus_doc(b) for b in net.buses],
        "branches": [
            {
                "id": br.id,
                "from": br.from_bus,
                "to": br.to_bus,
                "length_m": br.length,
                "conductor": br.conductor,
                "breakers": list(br.breakers),
                "tier": br.tier,
            }
            for br in net.branches
        ],
        "conductors": [
            {
                "name": c.name,
                "r_ohm_per_km": c.resistance_per_meter * 1000.0,
                "ampacity_a": c.ampacity,
            }
            for c in net.conductors
        ],
        "dispatch": {
            "normal_cp_generator_w": net.dispatch.normal_cp_generator_power,
            "contingency_cp_generator_w": net.dispatch.contingency_cp_generator_power,
            "voltage_controlled_buses": list(net.dispatch.voltage_controlled_buses),
            "slack_fallback": net.dispatch.slack_fallback,
        },
        "scenario": {"name": net.scenario.name, "load_scale": net.scenario.load_scale},
        "contingency_dispatch": net.contingency_dispatch,
        "calibration": dict(net.calibration),
    }
    if net.ac is not None:
        ac = net.ac
        doc["ac"] = {
            "frequency_hz": ac.frequency,
            "voltage_v": ac.voltage,
            "conductors_per_circuit": ac.conductors_per_circuit,
            "power_factor": ac.power_factor,
            "slack_bus": ac.slack_bus,
            "slack_fallback": ac.slack_fallback,
            "pv_power_w": ac.pv_power,
            "pv_contingency_power_w": ac.pv_contingency_power,
            "reactance_ohm_per_km": {k: v * 1000.0 for k, v in ac.reactance_per_meter.items()},
            "bus_overrides": {str(k): dict(v) for k, v in ac.bus_overrides.items()},
        }
    return doc


# -- built-in case ----------------------------------------------------------

CONDUCTOR_PAIRS: dict[str, dict[str, str]] = {
    "helens_pansy": {"eeu": "Helens", "feeder": "Pansy"},
    "mazama_poppy": {"eeu": "Mazama", "feeder": "Poppy"},
}


def builtin_architecture1(conductors: str = "helens_pansy") -> Network:
    """Architecture #1: 4 EEUs, 3 busbars, 14 motors, 34 cables.

    Cable lengths and conductor data come from the shipped calibration
    file ``data/architecture1.json``. ``conductors`` selects the cable pair
    (see :data:`CONDUCTOR_PAIRS`).
    """
    text = resources.files("mvdcflow.data").joinpath("architecture1.json").read_text()
    net = load_network(text)
    return with_conductors(net, conductors)


def with_conductors(net: Network, pair: str | Mapping[str, str]) -> Network:
    """Reassign conductors by tier, e.g. ``{"eeu": "Mazama", "feeder": "Poppy"}``."""
    mapping = CONDUCTOR_PAIRS[pair] if isinstance(pair, str) else dict(pair)
    branches = tuple(
        replace(br, conductor=mapping.get(net.tier(br), br.conductor)) for br in net.branches
    )
    return validate(replace(net, branches=branches), require_connected=False)


def apply_scenario(net: Network, scenario: Scenario) -> Network:
    """Scale every constant-power load by ``scenario.load_scale``.

    Generators and voltage setpoints are left alone. Scales compose: the
    returned network records the cumulative load scale.
    """
    if not scenario.load_scale > 0:
        raise NetworkError(f"scenario {scenario.name!r}", "load_scale must be > 0")
    buses = tuple(
        replace(b, power=b.power * scenario.load_scale) if b.is_load else b for b in net.buses
    )
    total = net.scenario.load_scale * scenario.load_scale
    name = scenario.name if net.scenario.load_scale == 1.0 else "custom"
    return replace(net, buses=buses, scenario=Scenario(name, total))


def count_breakers(net: Network) -> int:
    return sum(br.breaker_ends for br in net.branches)


def total_cable_length(net: Network, tier: str = "all") -> float:
    """Sum of cable lengths [m] in ``tier`` (``"eeu"``, ``"feeder"`` or ``"all"``)."""
    tier = {"eeu_tier": "eeu", "feeder_tier": "feeder"}.get(tier, tier)
    if tier not in ("eeu", "feeder", "all"):
        raise ValueError(f"unknown tier {tier!r}")
    return float(
        sum(br.length for br in net.branches if tier == "all" or net.tier(br) == tier)
    )
