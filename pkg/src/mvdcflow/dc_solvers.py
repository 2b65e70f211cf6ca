"""Fixed-point DC power flow: Z-bus iteration, monotone mapping, certificate.

Both solvers work on an :class:`~mvdcflow.admittance.AdmittancePartition`.

* Z-bus: ``v <- Y^-1 (k + p / v)``, with ``Y`` Cholesky-factored once.
* Monotone mapping: in ``u = v**2`` space,
  ``u_n <- sqrt(u_n) (sum_k y_nk sqrt(u_k) + k_n) / y'_n + p_n / y'_n``.

The certificate checks ``r_min**2 >= 4 alpha`` with
``alpha = ||Y^-1||_q ||p||_q`` and reports the radius interval
``((r_min - sqrt(r_min**2 - 4 alpha)) / 2, r_min - sqrt(alpha))``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .admittance import AdmittancePartition, build_partition, kcl_residual
from .netmodel import Network

__all__ = [
    "SolveOptions",
    "CertificateVerdict",
    "DcSolution",
    "NetworkSolution",
    "ConvergenceError",
    "VoltageCollapseError",
    "FeasibilityError",
    "solve_zbus",
    "solve_monotone",
    "certificate",
    "branch_currents",
    "total_loss",
    "bus_injections",
    "residual_bound",
    "max_residual",
    "solve_network",
    "SOLVERS",
]

log = logging.getLogger(__name__)

COLLAPSE_FRACTION = 1e-3
DEFAULT_RELATIVE_TOL = 1e-6


class ConvergenceError(RuntimeError):
    """A fixed-point iteration failed in a way that has no valid iterate."""

    def __init__(self, message: str, iterations: int = 0, bus: int | None = None):
        self.iterations = iterations
        self.bus = bus
        super().__init__(message)


class VoltageCollapseError(ConvergenceError):
    pass


class FeasibilityError(ConvergenceError):
    """The monotone mapping produced a negative squared voltage."""


@dataclass(frozen=True)
class SolveOptions:
    """Iteration controls.

    ``tolerance`` [V] bounds the largest voltage change of the final step;
    ``None`` means ``1e-6`` times the largest nominal voltage.
    ``initial_guess`` is a warm start in free-bus order; ``None`` is a flat
    start at nominal voltage.
    """

    tolerance: float | None = None
    max_iterations: int = 200
    initial_guess: tuple[float, ...] | None = None
    certificate_norm: float = 2
    certificate_interpretation: str = "yinv"

    def __post_init__(self) -> None:
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.certificate_interpretation not in ("yinv", "yinv2"):
            raise ValueError("certificate_interpretation must be 'yinv' or 'yinv2'")

    def tol_for(self, part: AdmittancePartition) -> float:
        if self.tolerance is not None:
            return self.tolerance
        scale = max([*part.nominal, *part.v_fixed.values(), 1.0])
        return DEFAULT_RELATIVE_TOL * scale


@dataclass(frozen=True)
class CertificateVerdict:
    r_vec: np.ndarray
    r_min: float
    r_max: float
    alpha: float
    radius_interval: tuple[float, float]
    holds: bool
    interpretation: str
    norm_q: float


@dataclass(frozen=True)
class DcSolution:
    """Converged (or last) free-bus voltages plus iteration diagnostics."""

    v: np.ndarray
    iterations: int
    final_step: float
    converged: bool
    certificate: CertificateVerdict | None
    method: str
    partition: AdmittancePartition = field(repr=False)

    def voltages(self) -> dict[int, float]:
        """All bus voltages (fixed and solved) keyed by bus id."""
        return self.partition.full_voltages(self.v)


def _initial(part: AdmittancePartition, opts: SolveOptions) -> np.ndarray:
    if opts.initial_guess is None:
        return part.nominal.astype(float).copy()
    v0 = np.asarray(opts.initial_guess, dtype=float)
    if v0.shape != (part.size,):
        raise ValueError(f"initial guess must have {part.size} entries")
    if np.any(v0 <= 0):
        raise ValueError("initial guess must be strictly positive")
    return v0.copy()


def _check_collapse(part: AdmittancePartition, v: np.ndarray, it: int) -> None:
    low = v < COLLAPSE_FRACTION * part.nominal
    if np.any(low):
        bus = part.bus_ids[int(np.argmax(low))]
        raise VoltageCollapseError(
            f"voltage collapse at bus {bus} (iteration {it}, v = {v[part.load_bus_index[bus]]:.6g} V)",
            iterations=it,
            bus=bus,
        )


def _factor(part: AdmittancePartition):
    try:
        return cho_factor(part.Y)
    except LinAlgError as exc:
        raise ConvergenceError(f"admittance matrix is not positive definite: {exc}") from exc


def certificate(
    part: AdmittancePartition, norm_q: float = 2, interpretation: str = "yinv"
) -> CertificateVerdict:
    """Existence/uniqueness test for the Z-bus fixed point.

    ``interpretation="yinv"`` uses ``r = Y^-1 k`` (the no-load voltages);
    ``"yinv2"`` uses ``r = Y^-2 k``.
    """
    if part.size == 0:
        return CertificateVerdict(np.zeros(0), np.inf, np.inf, 0.0, (0.0, np.inf), True, interpretation, norm_q)
    c = _factor(part)
    Z = cho_solve(c, np.eye(part.size))
    if interpretation == "yinv":
        r = Z @ part.k
    elif interpretation == "yinv2":
        r = Z @ (Z @ part.k)
    else:
        raise ValueError(f"unknown interpretation {interpretation!r}")
    ord_ = np.inf if np.isinf(norm_q) else norm_q
    alpha = float(np.linalg.norm(Z, ord=ord_) * np.linalg.norm(part.p, ord=ord_))
    r_abs = np.abs(r)
    r_min, r_max = float(r_abs.min()), float(r_abs.max())
    disc = r_min**2 - 4.0 * alpha
    if disc >= 0:
        lower = (r_min - np.sqrt(disc)) / 2.0
        upper = r_min - np.sqrt(alpha)
        holds = bool(lower < upper) or alpha == 0.0
    else:
        lower = upper = float("nan")
        holds = False
    return CertificateVerdict(r, r_min, r_max, alpha, (float(lower), float(upper)), holds, interpretation, norm_q)


def solve_zbus(part: AdmittancePartition, opts: SolveOptions | None = None) -> DcSolution:
    """Z-bus fixed-point iteration ``v <- Y^-1 (k + p / v)``."""
    opts = opts or SolveOptions()
    cert = certificate(part, opts.certificate_norm, opts.certificate_interpretation)
    if part.size == 0:
        return DcSolution(np.zeros(0), 0, 0.0, True, cert, "zbus", part)
    tol = opts.tol_for(part)
    c = _factor(part)
    v = _initial(part, opts)
    step = np.inf
    for it in range(1, opts.max_iterations + 1):
        v_new = cho_solve(c, part.k + part.p / v)
        _check_collapse(part, v_new, it)
        step = float(np.max(np.abs(v_new - v)))
        v = v_new
        if step < tol:
            return DcSolution(v, it, step, True, cert, "zbus", part)
    log.warning("zbus did not converge in %d iterations (last step %.3g V)", opts.max_iterations, step)
    return DcSolution(v, opts.max_iterations, step, False, cert, "zbus", part)


def solve_monotone(part: AdmittancePartition, opts: SolveOptions | None = None) -> DcSolution:
    """Monotone mapping iteration in squared-voltage space.

    The map contracts much more slowly than the Z-bus iteration, so it stops
    when the estimated distance to the fixed point, ``step / (1 - rate)`` with
    ``rate`` the ratio of successive voltage steps, drops below tolerance.
    """
    opts = opts or SolveOptions()
    cert = certificate(part, opts.certificate_norm, opts.certificate_interpretation)
    if part.size == 0:
        return DcSolution(np.zeros(0), 0, 0.0, True, cert, "monotone", part)
    tol = opts.tol_for(part)
    y_self = np.diag(part.Y)
    # y_nk / y'_n with positive branch admittances, k_n / y'_n and p_n / y'_n
    coupling = (np.diag(y_self) - part.Y) / y_self[:, None]
    k_scaled = part.k / y_self
    p_scaled = part.p / y_self
    # squared collapse floor; the per-bus check only runs once the minimum gets close
    floor_sq = float((COLLAPSE_FRACTION * part.nominal).max()) ** 2
    v = _initial(part, opts)
    step = prev = np.inf
    for it in range(1, opts.max_iterations + 1):
        u_new = v * (coupling @ v + k_scaled) + p_scaled
        u_min = u_new.min()
        if u_min < 0:
            bus = part.bus_ids[int(np.argmax(u_new < 0))]
            raise FeasibilityError(
                f"mapping left feasible region at bus {bus} (iteration {it})", iterations=it, bus=bus
            )
        v_new = np.sqrt(u_new)
        if u_min < floor_sq:
            _check_collapse(part, v_new, it)
        prev, step = step, float(np.abs(v_new - v).max())
        v = v_new
        if step == 0.0:
            return DcSolution(v, it, step, True, cert, "monotone", part)
        # the map contracts slowly, so bound the remaining error rather than the last step
        rate = step / prev
        if rate < 1.0 and step / (1.0 - rate) < tol:
            return DcSolution(v, it, step, True, cert, "monotone", part)
    log.warning("monotone mapping did not converge in %d iterations (last step %.3g V)", opts.max_iterations, step)
    return DcSolution(v, opts.max_iterations, step, False, cert, "monotone", part)


SOLVERS = {"zbus": solve_zbus, "monotone": solve_monotone}


def residual_bound(part: AdmittancePartition, v: np.ndarray, tol: float) -> float:
    """Documented bound [A] on the KCL residual max-norm of a converged iterate.

    Both solvers stop within about ``tol`` of the fixed point, and the KCL
    Jacobian has infinity norm at most ``||Y||_inf + max|p| / v_min**2``, so
    the residual is below twice ``tol`` times that figure.
    """
    if part.size == 0:
        return 0.0
    v_min = float(np.min(v)) - tol
    if v_min <= 0:
        return float("inf")
    jac = np.abs(part.Y).sum(axis=1).max() + np.abs(part.p).max() / v_min**2
    return float(2.0 * tol * jac)


def max_residual(sol: DcSolution) -> float:
    """Largest absolute KCL residual [A] at the solution."""
    if sol.partition.size == 0:
        return 0.0
    return float(np.max(np.abs(kcl_residual(sol.partition, sol.v))))


def branch_currents(net: Network, full_v: dict[int, float]) -> dict[int, float]:
    """Signed branch currents [A], positive from ``from_bus`` to ``to_bus``."""
    return {
        br.id: (full_v[br.from_bus] - full_v[br.to_bus]) / net.resistance(br) for br in net.branches
    }


def total_loss(net: Network, currents: dict[int, float]) -> float:
    """Ohmic loss [W] of the whole system (both poles under the pole model)."""
    per_pole = sum(i * i * net.resistance(net.branch(bid)) for bid, i in currents.items())
    return net.pole_count * per_pole


def bus_injections(net: Network, full_v: dict[int, float], currents: dict[int, float]) -> dict[int, float]:
    """Per-bus power [W] leaving into the network (per pole)."""
    out = {b.id: 0.0 for b in net.buses}
    for br in net.branches:
        i = currents[br.id]
        out[br.from_bus] += full_v[br.from_bus] * i
        out[br.to_bus] -= full_v[br.to_bus] * i
    return out


@dataclass(frozen=True)
class NetworkSolution:
    """A DC solution mapped back onto a network."""

    network: Network
    dc: DcSolution
    voltages: dict[int, float]
    currents: dict[int, float]
    loss: float

    @property
    def per_pole_loss(self) -> float:
        return self.loss / self.network.pole_count

    @property
    def converged(self) -> bool:
        return self.dc.converged

    def injections(self) -> dict[int, float]:
        return bus_injections(self.network, self.voltages, self.currents)


def solve_network(net: Network, method: str = "zbus", opts: SolveOptions | None = None) -> NetworkSolution:
    """Partition, solve and post-process ``net`` in one call."""
    try:
        solver = SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown solver {method!r}; choose from {sorted(SOLVERS)}") from None
    part = build_partition(net)
    sol = solver(part, opts)
    full = sol.voltages()
    currents = branch_currents(net, full)
    return NetworkSolution(net, sol, full, currents, total_loss(net, currents))
