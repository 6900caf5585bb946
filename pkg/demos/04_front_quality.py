"""Judge an optimizer front against a weighted-sum reference front.

The reference front comes from repeated single-objective DE runs on a
weighted sum of the two objectives; GD measures convergence toward it,
IGD convergence plus coverage, and spread the distribution uniformity.
Budgets here are kept small so the demo finishes in under a minute.
"""

from morpd import load_bundled_case
from morpd.metrics import build_reference_front, metric_report
from morpd.moea import MoeaParams, run

case = load_bundled_case("ieee30")

print("building a small weighted-sum reference front ...")
reference = build_reference_front(case, n_weights=7, per_run_budget=800,
                                  pop_size=24, seed=23)
print(f"{len(reference)} reference points, "
      f"loss {reference[:, 0].min():.2f}..{reference[:, 0].max():.2f} MW")

print("\nrunning the multi-objective optimizer at increasing budgets ...")
for budget in (300, 1200, 4800):
    front, _ = run(case, MoeaParams(n=30, eval_budget=budget, seed=29))
    rep = metric_report(front.objectives(), reference)
    print(f"budget {budget:5d}: GD = {rep.gd:.4f}  spread = {rep.spread:.4f}  "
          f"IGD = {rep.igd:.4f}  (front size {rep.n_approx})")

print("\nGD reads convergence toward the reference, IGD adds coverage of it,")
print("and spread rewards an evenly spaced trade-off curve (all: lower is better)")
