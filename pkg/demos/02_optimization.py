"""Run the classification-preselection optimizer on the IEEE 30-bus case.

A reduced budget keeps this demo around ten seconds; the full study
configuration is population 100 with 10000 evaluations (see README).
"""

from morpd import load_bundled_case
from morpd.moea import MoeaParams, run

case = load_bundled_case("ieee30")
params = MoeaParams(n=40, eval_budget=2400, seed=17)

front, report = run(case, params)

print(f"{report.evaluations} evaluations over {report.generations} generations")
print(f"archive holds {len(front)} feasible non-dominated plans\n")

objs = front.objectives()
print(f"loss range      {objs[:, 0].min():7.3f} .. {objs[:, 0].max():7.3f} MW")
print(f"deviation range {objs[:, 1].min():7.3f} .. {objs[:, 1].max():7.3f}")

print("\ntrade-off curve (every fifth archive member):")
print(f"{'Ploss MW':>10} {'VD':>8}")
for m in front.members[::5]:
    print(f"{m.objectives.p_loss:10.3f} {m.objectives.vd:8.3f}")

best_loss = min(front.members, key=lambda m: m.objectives.p_loss)
print(f"\nlowest-loss plan: Ploss = {best_loss.objectives.p_loss:.3f} MW with "
      f"generator voltages {[round(v, 4) for v in best_loss.u.gen_v]}")
