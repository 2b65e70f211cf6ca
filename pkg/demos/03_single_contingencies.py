"""
Every single contingency
========================

Lose one cable, one busbar or one energy unit at a time, re-dispatch the
survivors and check that every motor is still served and no cable is
overloaded.
"""

from collections import Counter

from mvdcflow import builtin_architecture1
from mvdcflow.contingency import CaseKind, ContingencyCase, assess_case, cbf_check, run_study

net = builtin_architecture1()
study = run_study(net)

print(f"{len(study.cases)} cases:", dict(Counter(r.case.kind.value for r in study.cases)))
print("statuses:", dict(Counter(r.status for r in study.cases)))

# Only losing a motor's own busbar drops that motor.
shed = [(r.label, r.shed_load) for r in study.cases if r.shed_load]
print(f"{len(shed)} cases shed load, e.g. {shed[0][0]} sheds {shed[0][1] / 1e3:.1f} kW per pole")

# Losing EEU2 turns bus 2 into a pass-through junction; EEU3 goes to full
# output and EEU1 picks up the rest through cable 1-5.
eeu2 = study.result("eeu_loss:2")
print(f"Failure of EEU2: I(1-5) = {eeu2.currents[1]:.1f} A, MLP {eeu2.max_mlp:.2f}%")

for row in study.summary:
    print(f"{row.conductor:>7}: normal {row.normal_mlp:.2f}% at {' & '.join(row.normal_locations)}, "
          f"worst {row.worst_mlp:.2f}% at {' / '.join(row.worst_locations)} ({' / '.join(row.worst_causes)})")

# A busbar loss cascades to every cable on it.
out = assess_case(net, ContingencyCase(CaseKind.BUSBAR, 5))
print("busbar 5 lost: removed branches", out.removed_branches, "de-energized", out.deenergized_buses)

# Breaker failure: a fault on bus 6 with the bus-6 breaker of cable 2-6 stuck.
b26 = net.branch_between(2, 6).id
res = cbf_check(net, 6, (b26, 6))
print(f"fault at bus 6, stuck breaker on 2-6: isolated={res.isolated}")
print("breakers opened (branch, bus):", res.opened)
