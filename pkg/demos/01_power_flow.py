"""Solve the bundled IEEE 30-bus case and score one reactive-dispatch plan.

Shows the basic evaluation path: load a case, run the Newton-Raphson power
flow, and read off the two objectives (active loss, load-voltage deviation)
plus the dependent-variable constraint report.
"""

import numpy as np

from morpd import (
    current_controls,
    evaluate,
    load_bundled_case,
    solve,
)

case = load_bundled_case("ieee30")
print(f"case {case.name}: {case.n_bus} buses, {len(case.branches)} branches, "
      f"{len(case.generators)} generators")

sol = solve(case)
print(f"\npower flow converged in {sol.iterations} mismatch evaluations "
      f"(max mismatch {sol.max_mismatch:.2e} p.u.)")
print(f"slack generation {sol.p_slack:.2f} MW")
print(f"voltage profile: {sol.v.min():.4f} .. {sol.v.max():.4f} p.u.")

# score the operating point the case file ships with
u = current_controls(case)
obj, vio = evaluate(case, u)
print(f"\nbase operating point: Ploss = {obj.p_loss:.3f} MW, VD = {obj.vd:.3f}")
print(f"constraint excess: {vio.total:.4f} "
      f"(reactive {vio.q_gen:.4f}, voltage {vio.voltage:.4f}, loading {vio.branch:.4f})")

# a lightly different plan: switch in every capacitor bank at bus 24
u2 = u.__class__(gen_v=u.gen_v, tap_steps=u.tap_steps,
                 shunt_banks=(u.shunt_banks[0], u.shunt_banks[1], 20))
obj2, vio2 = evaluate(case, u2)
print(f"\nwith bus-24 capacitors fully in: Ploss = {obj2.p_loss:.3f} MW, "
      f"VD = {obj2.vd:.3f}, excess {vio2.total:.4f}")
