"""
The same network at 10 kVac
===========================

Swap the DC system for a 60 Hz AC one with the same cables and motors, solve
it with Newton-Raphson and compare losses.
"""

from mvdcflow import builtin_architecture1, solve_network
from mvdcflow.ac_solver import AcOptions, dc_limit_study, solve_ac, solve_newton_raphson
from mvdcflow.netmodel import load_network

for pair in ("helens_pansy", "mazama_poppy"):
    net = builtin_architecture1(pair)
    ac = solve_ac(net, AcOptions(tolerance=1e-3))
    dc = solve_network(net)
    print(f"{pair}: AC loss {ac.loss / 1e3:.2f} kW vs DC {dc.loss / 1e3:.2f} kW "
          f"({ac.iterations} Newton steps, mismatch {ac.max_mismatch:.1e} W)")

net = builtin_architecture1()
ac = solve_ac(net)
print("bus 8 :", f"{ac.magnitude_kv[8]:.4f} kV at {ac.angle[8]:+.5f} rad")
print("bus 14:", f"{ac.magnitude_kv[14]:.4f} kV at {ac.angle[14]:+.5f} rad")
print("I(1-5):", f"{ac.current_magnitude(1):.0f} A at {ac.current_angle(1):.2f} rad")

# With no reactance, unity power factor and per-pole powers the AC equations
# collapse to the DC ones. A radial feeder with one source checks that.
doc = {
    "name": "radial",
    "pole_model": False,
    "buses": [{"id": 1, "name": "S", "kind": "voltage_controlled", "nominal_v": 5000, "params": {"setpoint_v": 5000}}]
    + [{"id": k, "name": f"L{k}", "kind": "constant_power", "nominal_v": 5000,
        "params": {"power_w": 2e5 * k, "role": "load"}} for k in range(2, 6)],
    "branches": [{"id": k, "from": k, "to": k + 1, "length_m": 40, "conductor": "C"} for k in range(1, 5)],
    "conductors": [{"name": "C", "r_ohm_per_km": 0.2, "ampacity_a": 500}],
}
radial = load_network(doc)
dc_v = solve_network(radial).voltages
ac_v = solve_newton_raphson(dc_limit_study(radial)).magnitude
print("DC limit max relative difference:", f"{max(abs(ac_v[b] / v - 1) for b, v in dc_v.items()):.1e}")
