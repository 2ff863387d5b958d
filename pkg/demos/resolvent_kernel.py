"""Pieces of the resolvent kernel near the branch point for the extended model.

Run: python3 demos/resolvent_kernel.py
"""

import numpy as np

from pulledfront import kernel, model

m = model.extended_fkpp(0.1)
ss = model.find_spreading_speed(m)
sym = kernel.shift_symbol(m, ss)
print("shifted symbol coefficients:", np.round(sym.c_coeffs, 6))
_, beta, beta_closed = kernel.pole_data(sym)
print(f"pole coefficient beta: extrapolated {complex(beta).real:.8f}, closed form {complex(beta_closed).real:.8f}")

x = np.array([-20.0, -5.0, 0.5, 5.0, 20.0])
for g in (0.1, 0.01):
    kd = kernel.eval_kernel_pieces(kernel.frobenius_projections(sym, g), sym, x)
    print(f"\ngamma = {g}")
    for name in ("heat", "c_minus_heat", "c_tilde", "h", "total"):
        print(f"  {name:>13}: " + " ".join(f"{v.real:+.5e}" for v in getattr(kd, name)[0]))

rep = kernel.check_kernel_lemmas(sym, [0.1 * 2.0 ** -j for j in range(5)])
print("\nsup-ratios of the kernel bounds along gamma halvings:")
for key, vals in rep.ratios.items():
    print(f"  {key:>16}: " + " ".join(f"{v:.4f}" for v in vals))
