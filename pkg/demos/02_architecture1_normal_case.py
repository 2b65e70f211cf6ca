"""
Architecture #1 under normal operation
======================================

Four energy units feed 14 fan motors through three busbars. The bipolar
+/-5 kV system is solved as a single 5 kV pole carrying half of each device's
power, and losses are doubled at the end.
"""

from mvdcflow import builtin_architecture1, count_breakers, solve_network, total_cable_length
from mvdcflow.report import dc_report, render_table

net = builtin_architecture1()
print(f"{net.name}: {len(net.buses)} buses, {len(net.branches)} branches, {count_breakers(net)} breakers")
print(f"cable: {total_cable_length(net, 'eeu'):.0f} m EEU tier, {total_cable_length(net, 'feeder'):.0f} m feeder tier")

sol = solve_network(net)
print(render_table(dc_report(sol, {"solver": "zbus"})))

# Each motor draws 0.8925 MW per pole, so the two feeders into a motor bus
# carry P / V between them.
for m in (8, 14, 21):
    into = sum(sol.currents[br.id] for br in net.incident(m))
    print(f"bus {m}: feeders carry {into:.2f} A, P/V = {net.bus(m).power / sol.voltages[m]:.2f} A")

# The two constant-power units push their dispatch into the busbars.
for g in (2, 3):
    out = sum(sol.currents[br.id] for br in net.incident(g))
    print(f"EEU{g} output: {out:.1f} A")

print(f"loss: {sol.per_pole_loss / 1e3:.3f} kW per pole, {sol.loss / 1e3:.3f} kW total")
