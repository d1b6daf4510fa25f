"""
The linear equation as a yardstick
==================================

For phi = c x the weighted solution is a Mittag-Leffler function of
s = t^rho / rho.  We compare the Picard solver with it across the
Riemann-Liouville (beta = 0) and Caputo (beta = 1) ends, and then with
the classical direct path for rho = 1.
"""
import numpy as np

import hkfde

# phi = c x inherits the s^(gamma-1) singularity of x, so the weight
# t^(rho(1-gamma)) is what makes it bounded at 0
print(f"{'alpha':>6} {'beta':>5} {'rho':>5} {'c':>5} {'max err':>10}")
for alpha, beta, rho, c in [(0.5, 0.0, 1.0, -1.0), (0.5, 1.0, 1.0, -1.0),
                              (0.3, 0.5, 2.0, 1.0), (0.8, 0.25, 0.5, -2.0)]:
    p = hkfde.FhkParams(alpha, beta, rho)
    T = rho ** (1 / rho)  # s runs over [0, 1]
    prob = hkfde.CauchyProblem(p, 1.0, lambda t, x, c=c: c * x, lam=rho * (1 - p.gamma), horizon=T)
    rep = hkfde.picard_solve(prob, hkfde.SolveOptions(N=512, grade=3.0, tol=1e-12, max_iter=400))
    ref = hkfde.linear_solution(p, 1.0, c, rep.traj.grid)
    print(f"{alpha:6.2f} {beta:5.2f} {rho:5.2f} {c:5.1f} {np.max(np.abs(rep.traj.y - ref.y)):10.2e}")

###############################################################################
# Caputo relaxation: E_{1/2}(-sqrt(t)) = exp(t) erfc(sqrt(t)).

from scipy.special import erfc

p = hkfde.FhkParams(0.5, 1.0, 1.0)
g = hkfde.SGrid.uniform(4.0, 8)
print(np.max(np.abs(hkfde.linear_solution(p, 1.0, -1.0, g).y - np.exp(g.t) * erfc(np.sqrt(g.t)))))

###############################################################################
# For rho = 1 and lambda = 0 an independent direct discretisation exists.

prob = hkfde.CauchyProblem(hkfde.FhkParams(0.6, 1.0, 1.0), 0.5, lambda t, x: np.sin(x) + t)
rep = hkfde.picard_solve(prob, hkfde.SolveOptions(N=64, tol=1e-13))
direct = hkfde.classical_reduction_solve(prob, rep.traj.t, tol=1e-13)
print("direct vs general:", np.max(np.abs(direct.y - rep.traj.y)))

###############################################################################
# Mittag-Leffler values come with an honest truncation bound.

r = hkfde.ml_series(0.5, 1.0, -3.0)
print(r.value, r.truncation, r.tail_bound)
