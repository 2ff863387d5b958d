"""Spreading speeds, critical fronts and their tails for the example models.

Run: python3 demos/front_and_speed.py
"""

import numpy as np

from pulledfront import front, model

for m in (model.fisher_kpp(), model.extended_fkpp(0.1), model.bistable(0.4)):
    ss = model.find_spreading_speed(m)
    print(f"{m.name:>20}: c* = {ss.c_star:.8f}  eta* = {ss.eta_star:.8f}  alpha = {ss.alpha:.8f}")

# the Fisher-KPP front decays like (a + b x) exp(-x); b is the signature of a pulled front
m = model.fisher_kpp()
ss = model.find_spreading_speed(m)
fr = front.solve_front(m, ss, L=100, n=8192)
a, b, res = front.front_decay_fit(fr)
print(f"\nFisher-KPP front: residual {fr.residual:.1e}, monotone {fr.monotone}")
print(f"tail fit q exp(x) = {a:.4f} + {b:.4f} x  (relative misfit {res:.1e})")

# at mu = 1/3 the bistable front loses the linear prefactor
mb = model.bistable(1 / 3)
sb = model.find_spreading_speed(mb)
fb = front.solve_front(mb, sb, L=100, n=4001)
a, b, _ = front.front_decay_fit(fb)
print(f"bistable mu = 1/3 tail: {a:.4f} + {b:.2e} x")

psi = front.compute_psi(fr, m, ss)
x = psi.x
for xv in (-20, 0, 20, 60):
    print(f"psi({xv:>3}) = {np.interp(xv, x, psi.psi):9.4f}")
