"""DC and AC power flow, contingency screening and reporting for bipolar
MVDC aircraft propulsion networks."""

from .admittance import AdmittancePartition, IslandError, build_partition, kcl_residual
from .dc_solvers import (
    CertificateVerdict,
    ConvergenceError,
    DcSolution,
    FeasibilityError,
    NetworkSolution,
    SolveOptions,
    VoltageCollapseError,
    branch_currents,
    certificate,
    solve_monotone,
    solve_network,
    solve_zbus,
    total_loss,
)
from .netmodel import (
    CRUISE,
    TAKEOFF,
    Network,
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

__version__ = "0.1.0"

__all__ = [
    "AdmittancePartition",
    "CertificateVerdict",
    "ConvergenceError",
    "CRUISE",
    "DcSolution",
    "FeasibilityError",
    "IslandError",
    "Network",
    "NetworkError",
    "NetworkSolution",
    "Scenario",
    "SolveOptions",
    "TAKEOFF",
    "VoltageCollapseError",
    "apply_scenario",
    "branch_currents",
    "build_partition",
    "builtin_architecture1",
    "certificate",
    "count_breakers",
    "kcl_residual",
    "load_network",
    "serialize_network",
    "solve_monotone",
    "solve_network",
    "solve_zbus",
    "total_cable_length",
    "total_loss",
    "with_conductors",
]
