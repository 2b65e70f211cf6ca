"""
A source, a cable and a constant-power load
===========================================

The smallest network the solvers accept has a closed-form answer, so it is a
good place to see what each piece does before moving to a full aircraft
system.
"""

import math

from mvdcflow import load_network
from mvdcflow.admittance import build_partition
from mvdcflow.dc_solvers import ConvergenceError, SolveOptions, certificate, solve_network

# A 5 kV source feeds 1 MW through one milliohm. The document is plain JSON,
# here written as a dict.
doc = {
    "name": "twobus",
    "pole_model": False,
    "buses": [
        {"id": 1, "name": "SRC", "kind": "voltage_controlled", "nominal_v": 5000, "params": {"setpoint_v": 5000}},
        {"id": 2, "name": "LOAD", "kind": "constant_power", "nominal_v": 5000,
         "params": {"power_w": 1e6, "role": "load"}},
    ],
    "branches": [{"id": 1, "from": 1, "to": 2, "length_m": 1000, "conductor": "C", "breakers": 2}],
    "conductors": [{"name": "C", "r_ohm_per_km": 0.001, "ampacity_a": 1000}],
}
net = load_network(doc)

# The load voltage solves v**2 - Vs v + P R = 0; the operating point is the
# larger root.
exact = (5000 + math.sqrt(5000**2 - 4 * 1e6 * 0.001)) / 2
print(f"closed form      : {exact:.9f} V")

# The free-bus system Y v = k + p / v is a 1x1 problem here.
part = build_partition(net)
print(part.listing())

for method in ("zbus", "monotone"):
    sol = solve_network(net, method, SolveOptions(tolerance=1e-9, max_iterations=100_000))
    print(f"{method:<9}: {sol.voltages[2]:.9f} V after {sol.dc.iterations} iterations")

# The certificate bounds the solution radius before any iteration runs.
cert = certificate(part)
lo, hi = cert.radius_interval
print(f"certificate holds: {cert.holds}  (r_min={cert.r_min:g}, alpha={cert.alpha:g}, interval {lo:.5f} .. {hi:.2f})")

# Ask for 10 GW and there is no real root. The certificate says so up front
# and both solvers stop with a diagnostic instead of returning nonsense.
overload = load_network({**doc, "buses": [doc["buses"][0], {**doc["buses"][1], "params": {"power_w": 1e10, "role": "load"}}]})
print("10 GW certificate holds:", certificate(build_partition(overload)).holds)
for method in ("zbus", "monotone"):
    try:
        solve_network(overload, method)
    except ConvergenceError as exc:
        print(f"{method}: {type(exc).__name__}: {exc}")
