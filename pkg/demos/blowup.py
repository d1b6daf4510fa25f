"""
Escape in finite time
=====================

x^2 forcing with beta = 1 (so x is bounded at t = 0) blows up.  The
continuation tracks the blow-up functional and classifies the run.  A
decaying right-hand side, by contrast, is carried to the target and a
Gronwall-type certificate bounds it.
"""
import numpy as np

import hkfde

p = hkfde.FhkParams(0.5, 1.0, 1.0)

grow = hkfde.CauchyProblem(p, 1.0, lambda t, x: x**2, horizon=10.0)
local = hkfde.picard_solve(grow, hkfde.SolveOptions(N=128, grade=2.0), interval=0.05)
rep = hkfde.continue_solution(grow, local,
                              hkfde.ContinuationOptions(target_T=10.0, blowup_threshold=1e6))
print(rep.classification, f"Phi = {rep.phi_trace[-1]:.3g} at t = {rep.phi_t[-1]:.6f}")

# with the default threshold of 1e8 double precision gives out first
rep = hkfde.continue_solution(grow, local, hkfde.ContinuationOptions(target_T=10.0))
print(rep.classification, "-", rep.message)

###############################################################################
# With beta = 0 the same forcing is not even locally admissible:
# x ~ t^(-1/2) makes x^2 non-integrable, and Picard diverges.

rl = hkfde.CauchyProblem(hkfde.FhkParams(0.5, 0.0, 1.0), 1.0, lambda t, x: x**2,
                         lam=0.5, horizon=1.0)
rep = hkfde.picard_solve(rl, hkfde.SolveOptions(N=128), interval=1e-3)
print("beta = 0:", rep.converged, "-", rep.message)

###############################################################################
# Decay: |phi| <= 1 * |x| gives a certificate whose bound dominates |y|.

decay = hkfde.CauchyProblem(p, 1.0, lambda t, x: -x, horizon=10.0)
local = hkfde.picard_solve(decay, hkfde.SolveOptions(N=128, grade=2.0), interval=0.05)
rep = hkfde.continue_solution(decay, local, hkfde.ContinuationOptions(target_T=10.0))
print(rep.classification, "x(10) =", rep.traj.x[-1])

cert = hkfde.check_global_certificate(decay, lambda t: 1 + 0 * t, lambda u: u,
                                      lambda t: 0 * t, rep.traj)
print("holds", cert.holds, "dominates", cert.dominates,
      f"bound at 10 = {cert.bound_trace[-1]:.4g}")
