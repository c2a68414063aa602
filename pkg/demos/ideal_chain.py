"""Open versus Dirichlet truncation of the linear chain b_n = n.

Run with ``python3 demos/ideal_chain.py``. Prints the slowest open-chain
modes, then the autocorrelation phi_0(t) of three truncations: the open
chain at l = 20, a naive Dirichlet cut at l = 20 and a long Dirichlet
reference at l = 400. The short Dirichlet chain bounces back from its end
around t ~ 3.6; the open chain keeps decaying like the long reference.
"""

import numpy as np

from openkrylov.open_chain import autocorrelation, build_liouvillian, evolve, linear_coefficients, spectrum

l = 20
b = linear_coefficients(400)
modes = spectrum(build_liouvillian(b[: l + 1], l, "open"))
print("slowest open-chain modes (b_n = n, l = 20):")
for m in modes[:5]:
    print(f"  omega = {m.omega.real:+8.4f} {m.omega.imag:+8.4f}i   {m.cls:9s}  <n> = {m.mean_position:5.2f}")

t = np.linspace(0, 5, 11)
series = {
    "open l=20": autocorrelation(evolve(build_liouvillian(b[: l + 1], l, "open"), t)),
    "dirichlet l=20": autocorrelation(evolve(build_liouvillian(b[:l], l, "dirichlet"), t)),
    "dirichlet l=400": autocorrelation(evolve(build_liouvillian(b, 400, "dirichlet"), t)),
}
print("\n   t  " + "".join(f"{k:>17s}" for k in series))
for i, tt in enumerate(t):
    print(f"{tt:4.1f}  " + "".join(f"{v[i]:17.6f}" for v in series.values()))
