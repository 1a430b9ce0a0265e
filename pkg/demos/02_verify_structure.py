"""Run the structural certification and show what it guards.

Every claim the scheduler relies on (evenness of the value function, the
fold to nonnegative errors, monotonicity, concavity in the belief, the
mixing inequality, the suffix shape of the transmit sets, kernel mass, and
the reset-vs-drift integral inequalities) is checked numerically on the
solved tables. The same battery also has to fail on corrupted tables, which
is demonstrated at the end so a silent always-pass bug cannot hide.
"""

import numpy as np

from gesched import ModelParams, SolverConfig, solve
from gesched.solver import ValueTable
from gesched import verify

params = ModelParams()
config = SolverConfig(e_max=8.0, n_error=161, n_belief=41)

report = verify.run_all(params, config, n_random_triples=5000, seed=7)
print(report.to_text())

# now corrupt a table on purpose and watch the right check trip
folded = solve(params, config)
eg, bg = folded.value.error_grid, folded.value.belief_grid
values = folded.value.values + bg.points[None, :]  # push V upward in b
broken = ValueTable(values=values, error_grid=eg, belief_grid=bg,
                    mode="folded", iteration=folded.value.iteration,
                    residual=folded.value.residual)
res = verify.verify_monotone_belief(broken)
print("after adding +b to every row:")
print(" ", res.line())
assert not res.passed

res = verify.verify_monotone_belief(folded.value)
print("untouched table:")
print(" ", res.line())
