"""Nonlinear decay rate against the localization of the initial perturbation.

Run: python3 demos/localization_map.py   (about 15 s)
"""

from pulledfront import front, model, operator, simulate

m = model.fisher_kpp()
ss = model.find_spreading_speed(m)
fr = front.solve_front(m, ss, L=200, n=8192)
op = operator.build_operator(m, ss, fr)

rs = [2.0, 1.0, 0.0]
ss_ = [-2.0, -1.5, -3.0]
res = simulate.localization_sweep(op, fr, rs, ss_)
print("   r     s   regime      predicted  fitted")
for row in res["rows"]:
    print(f"{row['r']:4.1f}  {row['s']:4.1f}   {row['regime']:<10}  {row['best_rate']:.3f}      "
          f"{row['exponent']:.3f}")
print("exponents ordered by regime:", res["ordered"])
