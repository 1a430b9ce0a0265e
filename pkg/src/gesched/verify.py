"""Numerical certification of the structural properties of a solved instance.

Each check measures the worst violation of one property over the reported
grid block and passes iff it is within tolerance:

  value_even_in_error              V(e,b) = V(-e,b) on the signed grid
  fold_equivalence                 signed-grid solve = mirrored half-line solve
  value_monotone_in_error          V nondecreasing in |e|
  value_monotone_in_belief         V nonincreasing in b
  value_concave_in_belief          V concave along b (slope differences)
  belief_mixing_inequality         (1-t) lam + t V(e,x) + (1-t) V(e,y) >= V(e, tx+(1-t)y)
  threshold_structure              per-error transmit sets are belief suffixes
  kernel_mass                      pre-normalization quadrature mass in [1-1e-6, 1]
  kernel_shift_monotone            E_e[V(., T(b))] nondecreasing in the source e
  reset_dominates_drift            E_reset[V(., p11)] <= E_e[V(., p01)]
  reset_dominates_drift_same_belief  same with a common belief column

Integral checks use the solver's renormalized probability rules, so they hold
exactly for the discretized model whenever they hold for the continuous one;
a failure therefore indicates a real defect rather than truncation noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grids import interp_columns
from .model import ModelParams, SolverConfig
from .solver import BackupOperator, PolicyTable, QTable, Solution, ValueTable, solve

DEFAULT_TOL = 1e-6
CONCAVITY_REL_TOL = 1e-8
MIXING_TOL = 1e-5
MASS_TOL = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_violation: float
    tolerance: float
    worst_location: str = ""
    note: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        loc = f" at {self.worst_location}" if self.worst_location else ""
        return (f"{status}  {self.name}: worst violation {self.worst_violation:.3e} "
                f"(tol {self.tolerance:.1e}){loc}")


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def to_text(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append("overall: " + ("pass" if self.overall else "FAIL"))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "format": "gesched-verification",
            "overall": self.overall,
            "checks": [{
                "name": c.name,
                "passed": bool(c.passed),
                "worst_violation": float(c.worst_violation),
                "tolerance": float(c.tolerance),
                "worst_location": c.worst_location,
                "note": c.note,
            } for c in self.checks],
        }


def _loc(error_grid, belief_grid, i, j) -> str:
    return f"(e={error_grid.core_points[i]:.6g}, b={belief_grid.points[j]:.6g})"


def verify_evenness(value: ValueTable, q: QTable | None = None,
                    tol: float = DEFAULT_TOL) -> CheckResult:
    """V (and the q tables, if given) are even in the signed error.

    Fault probe: the odd table V = e^3 must fail, worst at the largest |e|.
    """
    if value.mode != "original":
        raise ValueError("evenness is a signed-grid property")
    worst, where = 0.0, ""
    tables = [("value", value.values)]
    if q is not None:
        tables += [("q_idle", q.q_idle), ("q_transmit", q.q_transmit)]
    core = value.error_grid.core
    for name, tab in tables:
        diff = np.abs(tab - tab[::-1])[core]
        d = float(diff.max())
        if d >= worst:
            i, j = np.unravel_index(diff.argmax(), diff.shape)
            worst, where = d, f"{name} {_loc(value.error_grid, value.belief_grid, i, j)}"
    return CheckResult("value_even_in_error", worst <= tol, worst, tol, where)


def verify_fold_equivalence(original: Solution, folded: Solution,
                            tol: float = DEFAULT_TOL) -> CheckResult:
    """Signed-grid tables restricted to e >= 0 match the half-line tables.

    Values and q tables must agree within tol, policies exactly.
    Fault probe: solving the two modes with mismatched beta must fail.
    """
    half = len(folded.value.values)
    take = slice(len(original.value.values) - half, None)
    worst, where = 0.0, ""
    for name, a, b in [("value", original.value.values[take], folded.value.values),
                       ("q_idle", original.q.q_idle[take], folded.q.q_idle),
                       ("q_transmit", original.q.q_transmit[take], folded.q.q_transmit)]:
        diff = np.abs(a - b)[folded.value.error_grid.core]
        d = float(diff.max())
        if d >= worst:
            i, j = np.unravel_index(diff.argmax(), diff.shape)
            worst, where = d, f"{name} {_loc(folded.value.error_grid, folded.value.belief_grid, i, j)}"
    mismatches = int(np.sum(original.policy.transmit[take] != folded.policy.transmit))
    passed = worst <= tol and mismatches == 0
    note = f"policy mismatches: {mismatches}"
    return CheckResult("fold_equivalence", passed, worst, tol, where, note)


def verify_monotone_error(value: ValueTable, tol: float = DEFAULT_TOL) -> CheckResult:
    """V nondecreasing along |e| at every belief.

    Fault probe: the decreasing table V = (e_max - e)^2 must fail.
    """
    v = value.values[value.error_grid.core]
    drops = -(np.diff(v, axis=0))
    worst = float(drops.max())
    i, j = np.unravel_index(drops.argmax(), drops.shape)
    return CheckResult("value_monotone_in_error", worst <= tol, worst, tol,
                       _loc(value.error_grid, value.belief_grid, i + 1, j))


def verify_monotone_belief(value: ValueTable, tol: float = DEFAULT_TOL) -> CheckResult:
    """V nonincreasing along b at every error.

    Fault probe: the increasing table V = e^2 + b must fail.
    """
    v = value.values[value.error_grid.core]
    rises = np.diff(v, axis=1)
    worst = float(rises.max())
    i, j = np.unravel_index(rises.argmax(), rises.shape)
    return CheckResult("value_monotone_in_belief", worst <= tol, worst, tol,
                       _loc(value.error_grid, value.belief_grid, i, j + 1))


def verify_concave_belief(value: ValueTable,
                          rel_tol: float = CONCAVITY_REL_TOL) -> CheckResult:
    """Belief slopes nonincreasing (concavity on the nonuniform grid).

    Fault probe: the convex table V = (b - 1/2)^2 must fail.
    """
    v = value.values[value.error_grid.core]
    pts = value.belief_grid.points
    slopes = np.diff(v, axis=1) / np.diff(pts)[None, :]
    increases = np.diff(slopes, axis=1)
    worst = float(increases.max())
    tol = rel_tol * max(1.0, float(np.abs(v).max()))
    i, j = np.unravel_index(increases.argmax(), increases.shape)
    return CheckResult("value_concave_in_belief", worst <= tol, worst, tol,
                       _loc(value.error_grid, value.belief_grid, i, j + 1),
                       note=f"relative tol {rel_tol:g} on scale {max(1.0, float(np.abs(v).max())):.6g}")


def verify_mixing_inequality(value: ValueTable, params: ModelParams,
                             tol: float = MIXING_TOL, n_random: int = 10000,
                             seed: int = 0) -> CheckResult:
    """(1-t) lam + t V(e,x) + (1-t) V(e,y) >= V(e, t x + (1-t) y) for x >= y.

    Swept over all belief-grid triples (x, y, t) plus n_random uniform ones;
    the mixed point is evaluated by the table's own interpolation.
    Fault probe: the sharply concave tent V = (10 lam + 1) min(b, 1-b) must
    fail (at x=1, y=0, t=1/2 the slack lam/2 cannot pay for the kink).
    """
    v = value.values[value.error_grid.core]
    bg = value.belief_grid
    pts = bg.points
    lam = params.lam
    worst = 0.0
    where = ""

    X, Y = np.meshgrid(pts, pts, indexing="ij")
    keep = X >= Y
    xs, ys = X[keep], Y[keep]
    ix, iy = np.searchsorted(pts, xs), np.searchsorted(pts, ys)
    for t in pts:
        z = t * xs + (1.0 - t) * ys
        margin = ((1.0 - t) * lam + t * v[:, ix] + (1.0 - t) * v[:, iy]
                  - interp_columns(v, z, bg))
        m = float(margin.min())
        if -m > worst:
            worst = -m
            i, k = np.unravel_index(margin.argmin(), margin.shape)
            where = (f"(e={value.error_grid.core_points[i]:.6g}, x={xs[k]:.6g}, "
                     f"y={ys[k]:.6g}, t={t:.6g})")

    rng = np.random.default_rng(seed)
    for start in range(0, n_random, 2000):
        m_chunk = min(2000, n_random - start)
        xy = np.sort(rng.random((m_chunk, 2)), axis=1)
        ys_r, xs_r = xy[:, 0], xy[:, 1]
        ts = rng.random(m_chunk)
        z = ts * xs_r + (1.0 - ts) * ys_r
        margin = ((1.0 - ts) * lam + ts * interp_columns(v, xs_r, bg)
                  + (1.0 - ts) * interp_columns(v, ys_r, bg)
                  - interp_columns(v, z, bg))
        m = float(margin.min())
        if -m > worst:
            worst = -m
            i, k = np.unravel_index(margin.argmin(), margin.shape)
            where = (f"(e={value.error_grid.core_points[i]:.6g}, x={xs_r[k]:.6g}, "
                     f"y={ys_r[k]:.6g}, t={ts[k]:.6g})")
    return CheckResult("belief_mixing_inequality", worst <= tol, worst, tol, where,
                       note=f"grid triples + {n_random} random")


def verify_threshold(policy: PolicyTable, tol: float = 0.0) -> CheckResult:
    """Each error row's transmit set is a suffix along the belief axis.

    Fault probe: a policy transmitting only on an interior belief band
    (idle on both ends of a row) must fail.
    """
    rows = policy.transmit[policy.error_grid.core]
    # a row is a suffix iff it never steps from 1 back to 0
    steps_down = (np.diff(rows.astype(np.int8), axis=1) < 0)
    bad_rows = int(np.sum(steps_down.any(axis=1)))
    where = ""
    if bad_rows:
        i = int(np.nonzero(steps_down.any(axis=1))[0][0])
        where = f"error row e={policy.error_grid.core_points[i]:.6g}"
    return CheckResult("threshold_structure", bad_rows <= tol, float(bad_rows), tol,
                       where, note="violation counts non-suffix rows")


def verify_kernel_mass(solution: Solution, tol: float = MASS_TOL) -> CheckResult:
    """Pre-normalization quadrature mass within [1 - tol, 1] on the reported block.

    Fault probe: a solve with pad_sigmas = 0 (kernel tail cut at the grid
    edge) must fail, worst at e = e_max.
    """
    masses = solution.raw_masses[solution.value.error_grid.core]
    lo, hi = float(masses.min()), float(masses.max())
    worst = max(1.0 - tol - lo, hi - 1.0, 0.0)
    passed = lo >= 1.0 - tol and hi <= 1.0
    i = int(masses.argmin() if 1.0 - lo >= hi - 1.0 else masses.argmax())
    return CheckResult("kernel_mass", passed, worst, tol,
                       f"e={solution.value.error_grid.core_points[i]:.6g}",
                       note=f"mass range [{lo:.12g}, {hi:.12g}]")


def _drift_integrals(value: ValueTable, params: ModelParams, op: BackupOperator):
    """E_e[V(., T(b))] for every state row and grid belief."""
    pts = value.belief_grid.points
    tb = pts * params.p11 + (1.0 - pts) * params.p01
    v_tb = interp_columns(value.values, tb, value.belief_grid)
    return op.W @ v_tb


def verify_lemma_shift(value: ValueTable, params: ModelParams,
                       op: BackupOperator, tol: float = DEFAULT_TOL) -> CheckResult:
    """The drift expectation E_e[V(., T(b))] is nondecreasing in the source e.

    Checked for every ordered pair of reported grid errors via a running max.
    Fault probe: a table decreasing in e, V = (top - e)^2 over the full
    padded grid, must fail.
    """
    g = _drift_integrals(value, params, op)[value.error_grid.core]
    viol = np.maximum.accumulate(g[:-1], axis=0) - g[1:]
    worst = float(viol.max())
    i, j = np.unravel_index(viol.argmax(), viol.shape)
    return CheckResult("kernel_shift_monotone", worst <= tol, worst, tol,
                       _loc(value.error_grid, value.belief_grid, i + 1, j))


def verify_lemma_reset(value: ValueTable, params: ModelParams,
                       op: BackupOperator, tol: float = DEFAULT_TOL) -> CheckResult:
    """Reset-then-good is never dearer than drift-then-bad: for every grid e

      E_reset[V(., p11)] <= E_e[V(., p01)]

    Fault probe: the belief-increasing table V = 1 + b must fail (reset
    lands on the dearer p11 column while drift keeps the cheap p01 one).
    """
    bg = value.belief_grid
    core = value.error_grid.core
    reset = float(op.w0 @ value.values[:, bg.idx_p11])
    drift = op.W[core] @ value.values[:, bg.idx_p01]
    worst = float((reset - drift).max())
    i = int((reset - drift).argmax())
    return CheckResult("reset_dominates_drift", worst <= tol, worst, tol,
                       f"e={value.error_grid.core_points[i]:.6g}")


def verify_lemma_reset_same_belief(value: ValueTable, params: ModelParams,
                                   op: BackupOperator,
                                   tol: float = DEFAULT_TOL) -> CheckResult:
    """Same-belief variant: E_reset[V(., b)] <= E_e[V(., b)] for every grid e, b.

    Fault probe: the error-decreasing table V = (top - e)^2 must fail (the
    reset mass sits at small e where such a table is most expensive).
    """
    core = value.error_grid.core
    margin = (op.w0[None, :] - op.W[core]) @ value.values
    worst = float(margin.max())
    i, j = np.unravel_index(margin.argmax(), margin.shape)
    return CheckResult("reset_dominates_drift_same_belief", worst <= tol, worst,
                       tol, _loc(value.error_grid, value.belief_grid, i, j))


def run_all(params: ModelParams, config: SolverConfig,
            n_random_triples: int = 10000, seed: int = 0) -> VerificationReport:
    """Solve both modes and run every check; slow parts reuse one operator."""
    report = VerificationReport()
    folded = solve(params, config, "folded")
    original = solve(params, config, "original")
    op = BackupOperator(params, config, "folded", warn_drift=False)

    report.add(verify_evenness(original.value, original.q))
    report.add(verify_fold_equivalence(original, folded))
    report.add(verify_monotone_error(folded.value))
    report.add(verify_monotone_belief(folded.value))
    report.add(verify_concave_belief(folded.value))
    report.add(verify_mixing_inequality(folded.value, params,
                                        n_random=n_random_triples, seed=seed))
    report.add(verify_threshold(folded.policy))
    report.add(verify_kernel_mass(folded))
    report.add(verify_lemma_shift(folded.value, params, op))
    report.add(verify_lemma_reset(folded.value, params, op))
    report.add(verify_lemma_reset_same_belief(folded.value, params, op))
    return report


def export_report_json(report: VerificationReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_json_dict(), fh, indent=1)
        fh.write("\n")


def export_report_text(report: VerificationReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_text())
