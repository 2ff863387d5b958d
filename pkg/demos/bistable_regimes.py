"""Pulled, resonant and pushed behaviour in the bistable family.

Run: python3 demos/bistable_regimes.py
"""

import warnings

from pulledfront import front, model, operator

for mu in (0.2, 1 / 3, 0.4):
    m = model.bistable(mu)
    ss = model.find_spreading_speed(m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fr = front.solve_front(m, ss, L=100, n=4001)
    rep = operator.eigen_scan(operator.build_operator(m, ss, fr))
    flagged = ", ".join(f"{z.real:.5f}" for z in rep.flagged) or "none"
    print(f"mu = {mu:.3f}: c_lin = {ss.c_star:.5f}, monotone front {fr.monotone}, "
          f"flagged eigenvalues {flagged}, resonance score {rep.resonance['score']:.1e} -> {rep.regime}")
