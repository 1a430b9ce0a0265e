"""Solve the default instance and walk through what comes out.

A sensor watches x(t+1) = a x(t) + w(t) and may send its sample over a
two-state Markov channel (good state delivers, bad state drops). Each probe
costs lambda and its ACK/NACK reveals the channel state; in between, the
belief b that the channel is good drifts toward its stationary value. The
solver value-iterates the discounted cost on an (error, belief) grid and
extracts a per-error belief threshold: transmit exactly when b >= b_star(|e|).
"""

import numpy as np

from gesched import (ModelParams, SolverConfig, extract_thresholds, solve,
                     stationary_belief)

params = ModelParams()  # a=0.9, p01=0.3, p11=0.8, lambda=1, beta=0.9
config = SolverConfig(n_error=201, n_belief=51)  # half the default density

print("model:", params)
print("stationary belief:", round(stationary_belief(params), 4))
print()

sol = solve(params, config)
print(f"converged in {sol.value.iteration} sweeps, "
      f"residual {sol.value.residual:.2e}, "
      f"sup-norm error bound {sol.error_bound:.2e}, "
      f"{sol.wall_seconds:.2f}s")

# the value function on a few grid slices
bg = sol.value.belief_grid
eg = sol.value.error_grid
print("\nV(e, b) samples (rows e, columns b):")
b_cols = [0, bg.idx_p01, bg.idx_stationary, bg.idx_p11, len(bg.points) - 1]
header = "  e \\ b " + "".join(f"{bg.points[j]:>9.2f}" for j in b_cols)
print(header)
for e_val in (0.0, 1.0, 2.5, 5.0, 10.0):
    i = int(round(e_val / eg.h))
    row = "".join(f"{sol.value.core_values[i, j]:>9.2f}" for j in b_cols)
    print(f"  {eg.core_points[i]:>5.1f} " + row)

# the policy in threshold form
profile = extract_thresholds(sol.q)
print("\ntransmit iff b >= b_star(|e|):")
for e_val in (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0):
    th = profile.threshold_at(e_val)
    shown = "never" if np.isinf(th) else f"{th:.3f}"
    print(f"  |e| = {e_val:>5.1f}  ->  b_star = {shown}")

print("""
Reading the table: small errors are not worth a probe at any belief (the
reset would hardly help), while large errors should be sent even through a
channel that is probably bad. The threshold drops monotonically in |e|,
which is the structural property the verifier certifies on every run.""")
