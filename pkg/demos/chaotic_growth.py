"""Linear growth of Lanczos coefficients in the chaotic Ising chain.

The fitted slope lambda of b_n sets the universal decay rate 2 lambda,
which reappears as the band of open-chain eigenvalues around Im(omega) = -2 lambda.
Takes about half a minute with the default string cap.
"""

import sys

import numpy as np

from openkrylov import RingGeometry, TruncationPolicy, build_chaotic, build_seed, fit_growth_rate, lanczos_run
from openkrylov.open_chain import build_liouvillian, spectrum

cap = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
depth = 30
n = RingGeometry(64).required_sites(depth, 1)
chain = lanczos_run(build_chaotic(n), build_seed("chaotic_O0", n), depth,
                    TruncationPolicy(max_strings=cap), RingGeometry(n))
print("b_n:", np.array2string(chain.b, precision=3, max_line_width=100))
lam, c = fit_growth_rate(chain.b, 10, 30)
print(f"fit b_n ~ {lam:.3f} n + {c:.3f}  ->  2 lambda = {2 * lam:.3f}")

modes = spectrum(build_liouvillian(chain.b, depth, "open"))
im = np.array([m.omega.imag for m in modes])
print(f"open-chain spectrum at l = {depth}: median Im(omega) = {np.median(im):.3f}, "
      f"perpetual modes: {sum(m.cls == 'perpetual' for m in modes)}")
