from __future__ import annotations

import numpy as np
import pytest

from helpers import quadratic_root, random_network, two_bus
from mvdcflow.ac_solver import (
    AcBranch,
    AcBusKind,
    AcBusSpec,
    AcConvergenceError,
    AcOptions,
    AcStudy,
    SingularJacobianError,
    ac_study_from_network,
    dc_limit_study,
    solve_ac,
    solve_newton_raphson,
)
from mvdcflow.contingency import CaseKind, ContingencyCase, apply_case
from mvdcflow.dc_solvers import SolveOptions, solve_network
from mvdcflow.netmodel import NetworkError


@pytest.fixture(scope="module")
def hp(arch1):
    return solve_ac(arch1)


@pytest.fixture(scope="module")
def mp(arch1_mp):
    return solve_ac(arch1_mp)


def test_mismatch_below_criterion(hp, mp) -> None:
    for sol in (hp, mp):
        assert sol.converged
        assert sol.max_mismatch < 1e-3
        assert sol.trace[-1] == sol.max_mismatch
        # quadratic convergence: each step shrinks the mismatch sharply
        assert all(b < a for a, b in zip(sol.trace, sol.trace[1:]))


def test_bus_roles(arch1) -> None:
    study = ac_study_from_network(arch1)
    assert study.bus(1).kind is AcBusKind.SLACK
    assert [study.bus(b).kind for b in (2, 3, 4)] == [AcBusKind.PV] * 3
    assert study.bus(2).p == pytest.approx(6.25e6)
    motor = study.bus(8)
    assert motor.kind is AcBusKind.PQ
    assert motor.p == pytest.approx(-1.785e6)
    assert motor.q / motor.p == pytest.approx(np.tan(np.arccos(0.851)))


def test_helens_bus8_magnitude(hp) -> None:
    assert hp.magnitude_kv[8] == pytest.approx(9.9972, abs=0.001)


def test_helens_bus14(hp) -> None:
    assert hp.magnitude_kv[14] == pytest.approx(9.9983, abs=0.001)
    assert hp.angle[14] == pytest.approx(-0.00011, abs=0.0001)


def test_helens_current_1_5(hp) -> None:
    assert hp.current_magnitude(1) == pytest.approx(633.0, rel=0.02)


def test_mazama_current_2_6(mp, arch1_mp) -> None:
    bid = arch1_mp.branch_between(2, 6).id
    assert mp.current_magnitude(bid) == pytest.approx(694.0, rel=0.02)


def test_mazama_loss(mp) -> None:
    assert mp.loss == pytest.approx(5.34e3, rel=0.15)


@pytest.mark.parametrize("pair", ["helens_pansy", "mazama_poppy"])
def test_ac_loss_exceeds_dc(pair: str) -> None:
    from mvdcflow.netmodel import builtin_architecture1

    net = builtin_architecture1(pair)
    assert solve_ac(net).loss > solve_network(net).loss


def test_slack_power_balances_losses(hp) -> None:
    s = hp.injections()
    assert sum(s.values()).real == pytest.approx(hp.loss, rel=1e-6)


def test_two_bus_dc_limit() -> None:
    net = two_bus()
    sol = solve_newton_raphson(dc_limit_study(net), AcOptions(tolerance=1e-6))
    assert sol.magnitude[2] == pytest.approx(quadratic_root(5000.0, 0.001, 1e6), rel=1e-9)
    assert abs(sol.angle[2]) < 1e-12


@pytest.mark.parametrize("seed", range(25))
def test_dc_limit_matches_dc(seed: int) -> None:
    rng = np.random.default_rng(500 + seed)
    net = random_network(rng, int(rng.integers(3, 16)))
    dc = solve_network(net, opts=SolveOptions(tolerance=1e-10)).voltages
    ac = solve_newton_raphson(dc_limit_study(net)).magnitude
    for b, v in dc.items():
        assert ac[b] == pytest.approx(v, rel=1e-6)


def test_dc_limit_rejects_two_vc_buses(arch1) -> None:
    with pytest.raises(NetworkError, match="slack"):
        dc_limit_study(arch1)


def test_slack_falls_back_when_bus1_lost(arch1) -> None:
    for case in (ContingencyCase(CaseKind.BUSBAR, 1), ContingencyCase(CaseKind.EEU, 1)):
        study = ac_study_from_network(apply_case(arch1, case))
        assert study.bus(2).kind is AcBusKind.SLACK
        assert solve_newton_raphson(study).max_mismatch < 1e-3


def test_pv_redispatch_after_eeu_loss(arch1) -> None:
    study = ac_study_from_network(apply_case(arch1, ContingencyCase(CaseKind.EEU, 2)))
    assert study.bus(1).kind is AcBusKind.SLACK
    assert study.bus(2).kind is AcBusKind.PQ
    assert study.bus(3).p == pytest.approx(8.33e6)
    assert study.bus(4).p == pytest.approx(8.33e6)


def test_non_convergence_carries_trace(arch1) -> None:
    with pytest.raises(AcConvergenceError) as err:
        solve_ac(arch1, AcOptions(max_iterations=1))
    assert len(err.value.trace) == 2
    assert err.value.trace[-1] > 1e-3


def test_resistive_pv_bus_is_singular() -> None:
    study = AcStudy(
        (AcBusSpec(1, AcBusKind.SLACK, 5000.0), AcBusSpec(2, AcBusKind.PV, 5000.0, p=1e3)),
        (AcBranch(1, 1, 2, complex(0.01, 0.0)),),
    )
    with pytest.raises(SingularJacobianError):
        solve_newton_raphson(study)


def test_study_needs_one_slack_per_island() -> None:
    with pytest.raises(NetworkError):
        AcStudy((AcBusSpec(1, AcBusKind.PQ, 1.0), AcBusSpec(2, AcBusKind.PQ, 1.0)), (AcBranch(1, 1, 2, 1j),))


@pytest.mark.parametrize("kwargs", [{"tolerance": 0.0}, {"max_iterations": 0}])
def test_invalid_ac_options(kwargs) -> None:
    with pytest.raises(ValueError):
        AcOptions(**kwargs)


def test_current_angle_reports_reversed_phasor(hp) -> None:
    assert hp.current_angle(1) == pytest.approx(float(np.angle(-hp.currents[1])))
