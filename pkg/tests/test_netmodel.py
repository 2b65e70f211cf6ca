from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import two_bus, two_bus_doc
from mvdcflow.netmodel import (
    CRUISE,
    TAKEOFF,
    BusKind,
    NetworkError,
    Scenario,
    apply_scenario,
    builtin_architecture1,
    count_breakers,
    load_network,
    serialize_network,
    total_cable_length,
    with_conductors,
)


def test_minimal_two_bus_document_loads() -> None:
    net = two_bus()
    assert len(net.buses) == 2
    assert len(net.branches) == 1
    assert net.bus(1).kind is BusKind.VOLTAGE_CONTROLLED
    assert net.bus(2).injection == -1e6


def test_load_from_text_and_path(tmp_path) -> None:
    doc = two_bus_doc()
    path = tmp_path / "net.json"
    path.write_text(json.dumps(doc))
    assert load_network(path) == load_network(json.dumps(doc)) == load_network(doc)


def test_arch1_counts(arch1) -> None:
    assert len(arch1.buses) == 21
    assert len(arch1.branches) == 34


def test_arch1_branch_set(arch1) -> None:
    pairs = {(br.from_bus, br.to_bus) for br in arch1.branches}
    expected = {(1, 5), (2, 5), (2, 6), (3, 6), (3, 7), (4, 7)}
    expected |= {(5, k) for k in range(8, 15)} | {(6, k) for k in range(8, 22)} | {(7, k) for k in range(15, 22)}
    assert pairs == expected


def test_arch1_bus_kinds(arch1) -> None:
    assert [arch1.bus(b).kind for b in (1, 4)] == [BusKind.VOLTAGE_CONTROLLED] * 2
    assert all(arch1.bus(b).setpoint == 5000.0 for b in (1, 4))
    assert all(arch1.bus(b).role == "generator" and arch1.bus(b).power == 3.332e6 for b in (2, 3))
    assert all(arch1.bus(b).kind is BusKind.JUNCTION for b in (5, 6, 7))
    assert all(arch1.bus(b).is_load and arch1.bus(b).power == 0.8925e6 for b in range(8, 22))


def test_bus6_degree(arch1) -> None:
    assert arch1.degree(6) == 16


def test_motor_buses_have_degree_two(arch1) -> None:
    assert all(arch1.degree(b) == 2 for b in range(8, 22))


def test_total_motor_load(arch1) -> None:
    assert arch1.total_load == pytest.approx(12.495e6)
    assert arch1.total_load * arch1.pole_count == pytest.approx(24.99e6)


def test_cable_tier_lengths(arch1) -> None:
    assert total_cable_length(arch1, "eeu_tier") == pytest.approx(68.0, abs=0.5)
    assert total_cable_length(arch1, "feeder_tier") == pytest.approx(466.0, abs=0.5)
    assert total_cable_length(arch1, "all") == pytest.approx(534.0, abs=1.0)


def test_cable_length_empty_network() -> None:
    doc = two_bus_doc()
    net = load_network(doc)
    empty = net.__class__(name="empty", buses=(), branches=(), conductors=net.conductors, dispatch=net.dispatch)
    assert total_cable_length(empty, "all") == 0.0
    assert count_breakers(empty) == 0


def test_unknown_tier_rejected(arch1) -> None:
    with pytest.raises(ValueError):
        total_cable_length(arch1, "middle")


def test_breaker_count_arch1(arch1) -> None:
    assert count_breakers(arch1) == 68


def test_breaker_count_32_branch_network() -> None:
    # a ring of 32 two-breaker cables around one source
    buses = [{"id": 1, "name": "S", "kind": "voltage_controlled", "nominal_v": 5000, "params": {"setpoint_v": 5000}}]
    buses += [{"id": i, "name": f"J{i}", "kind": "junction", "nominal_v": 5000} for i in range(2, 33)]
    branches = [{"id": i, "from": i, "to": i % 32 + 1, "length_m": 10, "conductor": "C", "breakers": 2} for i in range(1, 33)]
    doc = {"buses": buses, "branches": branches, "conductors": [{"name": "C", "r_ohm_per_km": 0.1, "ampacity_a": 100}]}
    assert count_breakers(load_network(doc)) == 64


def test_dangling_reference() -> None:
    doc = two_bus_doc()
    doc["branches"][0]["to"] = 99
    with pytest.raises(NetworkError) as err:
        load_network(doc)
    assert "branch 1" in str(err.value)
    assert "99" in str(err.value)


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d["branches"][0].update(length_m=0.0), "length"),
        (lambda d: d["branches"][0].update(length_m=-3.0), "length"),
        (lambda d: d["conductors"][0].update(r_ohm_per_km=0.0), "resistance"),
        (lambda d: d["branches"][0].update(to=1), "self"),
        (lambda d: d["buses"][1].update(id=1), "duplicate"),
        (lambda d: d["buses"][0]["params"].update(setpoint_v=-1.0), "setpoint"),
        (lambda d: d["branches"][0].update(conductor="Nope"), "conductor"),
        (lambda d: d.pop("buses"), "buses"),
    ],
)
def test_validation_errors(mutate, fragment) -> None:
    doc = two_bus_doc()
    mutate(doc)
    with pytest.raises(NetworkError) as err:
        load_network(doc)
    assert fragment in str(err.value).lower()


def test_disconnected_graph_rejected() -> None:
    doc = two_bus_doc()
    doc["buses"].append({"id": 3, "name": "X", "kind": "junction", "nominal_v": 5000})
    with pytest.raises(NetworkError, match="disconnected"):
        load_network(doc)


def test_load_island_without_source_rejected() -> None:
    doc = two_bus_doc()
    doc["buses"].append({"id": 3, "name": "L3", "kind": "constant_power", "nominal_v": 5000,
                         "params": {"power_w": 10.0, "role": "load"}})
    with pytest.raises(NetworkError):
        load_network(doc, require_connected=False)


def test_invalid_json_text() -> None:
    with pytest.raises(NetworkError, match="invalid JSON"):
        load_network("{not json")


def test_missing_file(tmp_path) -> None:
    with pytest.raises(NetworkError, match="cannot read"):
        load_network(tmp_path / "absent.json")


def test_round_trip_two_bus() -> None:
    net = two_bus()
    assert load_network(serialize_network(net)) == net


def test_round_trip_arch1(arch1) -> None:
    again = load_network(json.dumps(serialize_network(arch1)))
    assert again == arch1
    assert again.ac == arch1.ac


def test_cruise_scales_loads(arch1) -> None:
    cruise = apply_scenario(arch1, CRUISE)
    assert cruise.bus(8).power == pytest.approx(267.75e3)
    assert cruise.bus(2).power == arch1.bus(2).power
    assert cruise.bus(1).setpoint == arch1.bus(1).setpoint
    assert cruise.scenario.name == "cruise"
    assert arch1.bus(8).power == 0.8925e6  # input untouched


def test_takeoff_is_identity(arch1) -> None:
    assert apply_scenario(arch1, TAKEOFF) == arch1


def test_two_bus_half_scale() -> None:
    assert apply_scenario(two_bus(), Scenario("custom", 0.5)).bus(2).power == pytest.approx(0.5e6)


@pytest.mark.parametrize("scale", [0.0, -0.3])
def test_nonpositive_scale_rejected(scale) -> None:
    with pytest.raises(NetworkError):
        Scenario("custom", scale)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.05, 5.0), b=st.floats(0.05, 5.0))
def test_scenarios_compose(a, b) -> None:
    net = two_bus()
    twice = apply_scenario(apply_scenario(net, Scenario("a", a)), Scenario("b", b))
    once = apply_scenario(net, Scenario("ab", a * b))
    assert twice.bus(2).power == pytest.approx(once.bus(2).power, rel=1e-12)
    assert twice.scenario.load_scale == pytest.approx(a * b, rel=1e-12)


def test_with_conductors_swaps_by_tier(arch1) -> None:
    mp = with_conductors(arch1, "mazama_poppy")
    assert {mp.branch(1).conductor, mp.branch(7).conductor} == {"Mazama", "Poppy"}
    assert builtin_architecture1("mazama_poppy") == mp


def test_builtin_carries_calibration_note(arch1) -> None:
    assert arch1.calibration.get("status") == "approximate"
