"""
Continuation past the local interval
====================================

alpha = 1/2, beta = 1/4, rho = 2 and

    phi(t, x) = exp(-t^2 x sin t) / (sqrt(t) (1 - t)),

singular at t = 1.  A local solution on [0, 0.1] is extended step by step
to t = 0.9, and the result is checked against the envelope bound built
from |phi| <= 1 / (sqrt(t)(1 - t)) for x > 0.
"""
import numpy as np

import hkfde

p = hkfde.FhkParams(alpha=0.5, beta=0.25, rho=2.0)
rhs = hkfde.compile_rhs("exp(-t^2 * x * sin(t)) / (sqrt(t) * (1 - t))")
prob = hkfde.CauchyProblem(p, 1.0, rhs, lam=0.5, horizon=0.9)

local = hkfde.picard_solve(prob, hkfde.SolveOptions(N=256, grade=2.0), interval=0.1)
print("local:", local.converged, local.iterations, f"{local.residual:.2e}")

rep = hkfde.continue_solution(prob, local, hkfde.ContinuationOptions(target_T=0.9))
print("classification:", rep.classification, "after", len(rep.steps), "steps")
hs = [st.h_step for st in rep.steps]
print(f"step lengths in [{min(hs):.3g}, {max(hs):.3g}]")

traj = rep.traj
print("min x on (0, 0.9]:", np.min(traj.x[1:]))
print("stitched residual:", hkfde.stitched_residual(prob, traj))

###############################################################################
# The blow-up functional stays small, so nothing suggests escape before t = 1.

print("max |Phi|:", np.nanmax(np.abs(rep.phi_trace)))

env = hkfde.envelope_bound(prob, traj, lambda t: 1 / (np.sqrt(t) * (1 - t)))
print("envelope dominates |y|:", bool(np.all(env >= np.abs(traj.y))))
for t, y, b in zip(traj.t[::len(traj.t) // 8], traj.y[::len(traj.t) // 8], env[::len(traj.t) // 8]):
    print(f"  t={t:.3f}  y={y:.6f}  bound={b:.6f}")
