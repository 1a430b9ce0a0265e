"""Discounted-cost value iteration on the (error, belief) grid.

The Bellman operator for the folded state (e, b), e = |error|:

  q_idle(e, b)     = e^2 + beta * E[ V(|a e + w|, T(b)) ]
  q_transmit(e, b) = e^2 + lam
                   + beta * ( b * E[V(|w|, p11)] + (1-b) * E[V(|a e + w|, p01)] )

with T(b) = b p11 + (1-b) p01. Expectations over the noise are the
renormalized trapezoid rules from grids; belief lookups at p01/p11 are exact
grid hits and T(b) is evaluated by linear interpolation. The original
(signed-error) mode runs the same operator on the symmetric grid with the
unfolded kernel. V is updated as min(q_idle, q_transmit) from V = 0; since
the rules are probability vectors the sweep is a beta-contraction in sup norm.

A transmission is chosen only when it is strictly better (ties idle). The
per-error transmit set along the belief axis is required to be a suffix;
extract_thresholds raises StructureViolation otherwise rather than guessing.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .grids import (BeliefGrid, ErrorGrid, build_belief_grid, build_error_grid,
                    interp_columns, interp_weights, mirror_error_grid,
                    quadrature_matrix)
from .model import ModelParams, SolverConfig, validate, validate_config

NEVER = np.inf  # threshold sentinel: the row never transmits

_CSV_FMT = "%.12g"


class NonConvergence(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"value iteration stopped at residual {residual:.3e} "
            f"after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


class StructureViolation(RuntimeError):
    """The transmit set along the belief axis is not a suffix."""

    def __init__(self, e_index: int, row):
        super().__init__(
            f"non-suffix transmit pattern at error row {e_index}: {row}")
        self.e_index = e_index


@dataclass(frozen=True)
class ValueTable:
    values: np.ndarray          # (n_states, n_beliefs), full padded support
    error_grid: ErrorGrid
    belief_grid: BeliefGrid
    mode: str
    iteration: int
    residual: float

    @property
    def core_values(self) -> np.ndarray:
        return self.values[self.error_grid.core]


@dataclass(frozen=True)
class QTable:
    q_idle: np.ndarray
    q_transmit: np.ndarray
    error_grid: ErrorGrid
    belief_grid: BeliefGrid
    mode: str


@dataclass(frozen=True)
class PolicyTable:
    transmit: np.ndarray        # int8, 1 = transmit
    error_grid: ErrorGrid
    belief_grid: BeliefGrid
    mode: str
    tie_rule: str = "idle"


@dataclass(frozen=True)
class ThresholdProfile:
    """Per-error belief threshold: transmit iff b >= b_star (NEVER = never)."""

    b_star: np.ndarray
    error_grid: ErrorGrid

    def threshold_at(self, e_abs):
        """Threshold at arbitrary |e|, linear in e between grid rows.

        Where exactly one bracketing row is NEVER the nearer row's value is
        used (a finite/NEVER pair has no meaningful interpolant); inputs
        beyond the padded support clamp to the last row.
        """
        pts = self.error_grid.points
        if self.error_grid.mode != "folded":
            raise ValueError("threshold lookup expects a folded-grid profile")
        e_abs = np.abs(np.asarray(e_abs, dtype=float))
        idx = np.clip(np.searchsorted(pts, e_abs, side="right") - 1, 0, len(pts) - 2)
        frac = np.clip((e_abs - pts[idx]) / (pts[idx + 1] - pts[idx]), 0.0, 1.0)
        left, right = self.b_star[idx], self.b_star[idx + 1]
        both = np.isfinite(left) & np.isfinite(right)
        # blend only finite pairs; inf * 0 would poison np.where's dead branch
        safe_l = np.where(both, left, 0.0)
        safe_r = np.where(both, right, 0.0)
        out = np.where(both, safe_l * (1.0 - frac) + safe_r * frac,
                       np.where(frac < 0.5, left, right))
        return out if out.ndim else float(out)


@dataclass
class Solution:
    """solve() output: tables plus convergence diagnostics."""

    value: ValueTable
    q: QTable
    policy: PolicyTable
    params: ModelParams
    config: SolverConfig
    residuals: np.ndarray       # sup-norm change per sweep, residuals[0] after sweep 1
    raw_masses: np.ndarray      # pre-normalization quadrature mass per state
    wall_seconds: float

    @property
    def error_bound(self) -> float:
        """Distance of the last iterate to the fixed point, residual*beta/(1-beta)."""
        beta = self.params.beta
        return float(self.residuals[-1]) * beta / (1.0 - beta)


class BackupOperator:
    """Precomputed discretization of one Bellman sweep."""

    def __init__(self, params: ModelParams, config: SolverConfig,
                 mode: str = "folded", warn_drift: bool = True):
        self.params = validate(params)
        self.config = validate_config(config)
        self.mode = mode
        self.error_grid = build_error_grid(config, params, mode)
        self.belief_grid = build_belief_grid(config, params)
        self.W, self.raw_masses = quadrature_matrix(self.error_grid, params,
                                                    warn_drift=warn_drift)
        self.w0 = self.W[self.error_grid.zero_index]
        b = self.belief_grid.points
        tb = b * params.p11 + (1.0 - b) * params.p01
        self._tb_idx, self._tb_frac = interp_weights(self.belief_grid, tb)
        self._e_sq = self.error_grid.points ** 2

    def q_tables(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p, bg = self.params, self.belief_grid
        v = np.asarray(values, dtype=float)
        # V at T(b) for every grid belief, then one matrix product per branch.
        v_tb = v[:, self._tb_idx] * (1.0 - self._tb_frac) + v[:, self._tb_idx + 1] * self._tb_frac
        drift_tb = self.W @ v_tb                      # E[V(., T(b))] per state
        drift_p01 = self.W @ v[:, bg.idx_p01]         # E[V(., p01)] per state
        reset_p11 = float(self.w0 @ v[:, bg.idx_p11])  # E[V(reset, p11)]
        b = bg.points[None, :]
        e_sq = self._e_sq[:, None]
        q_idle = e_sq + p.beta * drift_tb
        q_tx = e_sq + p.lam + p.beta * (b * reset_p11 + (1.0 - b) * drift_p01[:, None])
        return q_idle, q_tx

    def sweep(self, values: np.ndarray):
        q_idle, q_tx = self.q_tables(values)
        return np.minimum(q_idle, q_tx), q_idle, q_tx


def backup_q0(values: np.ndarray, e_index: int, b_index: int,
              op: BackupOperator) -> float:
    """Idle branch at one grid state (reference implementation for tests)."""
    v = np.asarray(values, dtype=float)
    p, bg = op.params, op.belief_grid
    tb = float(bg.points[b_index] * p.p11 + (1.0 - bg.points[b_index]) * p.p01)
    idx, frac = interp_weights(bg, tb)
    v_tb = v[:, int(idx)] * (1.0 - float(frac)) + v[:, int(idx) + 1] * float(frac)
    e = op.error_grid.points[e_index]
    return float(e * e + p.beta * (op.W[e_index] @ v_tb))


def backup_q1(values: np.ndarray, e_index: int, b_index: int,
              op: BackupOperator) -> float:
    """Transmit branch at one grid state (reference implementation for tests)."""
    v = np.asarray(values, dtype=float)
    p, bg = op.params, op.belief_grid
    b = float(bg.points[b_index])
    reset = float(op.w0 @ v[:, bg.idx_p11])
    drift = float(op.W[e_index] @ v[:, bg.idx_p01])
    e = op.error_grid.points[e_index]
    return float(e * e + p.lam + p.beta * (b * reset + (1.0 - b) * drift))


def vi_step(values: np.ndarray, op: BackupOperator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Bellman sweep: (new values, q_idle, q_transmit)."""
    new, q_idle, q_tx = op.sweep(values)
    return new, q_idle, q_tx


def solve(params: ModelParams, config: SolverConfig,
          mode: str = "folded") -> Solution:
    """Value-iterate to the configured tolerance from V = 0.

    Raises NonConvergence if max_iterations is hit first. Iterates from zero
    are nondecreasing; that is asserted every sweep as a cheap integrity check.
    """
    t0 = time.perf_counter()
    op = BackupOperator(params, config, mode)
    v = np.zeros((len(op.error_grid.points), len(op.belief_grid.points)))
    residuals = []
    q_idle = q_tx = None
    for _ in range(config.max_iterations):
        new, q_idle, q_tx = op.sweep(v)
        if np.min(new - v) < -1e-10:
            raise RuntimeError("value iterates from zero must be nondecreasing")
        residual = float(np.max(np.abs(new - v)))
        residuals.append(residual)
        v = new
        if residual <= config.vi_tolerance:
            break
    else:
        raise NonConvergence(residuals[-1], config.max_iterations)

    grids = dict(error_grid=op.error_grid, belief_grid=op.belief_grid, mode=mode)
    value = ValueTable(values=v, iteration=len(residuals),
                       residual=residuals[-1], **grids)
    q = QTable(q_idle=q_idle, q_transmit=q_tx, **grids)
    policy = extract_policy(q)
    return Solution(value=value, q=q, policy=policy, params=op.params,
                    config=op.config, residuals=np.asarray(residuals),
                    raw_masses=op.raw_masses,
                    wall_seconds=time.perf_counter() - t0)


def extract_policy(q: QTable) -> PolicyTable:
    """Transmit exactly where it is strictly cheaper; ties idle."""
    transmit = (q.q_transmit < q.q_idle).astype(np.int8)
    return PolicyTable(transmit=transmit, error_grid=q.error_grid,
                       belief_grid=q.belief_grid, mode=q.mode)


def extract_thresholds(q: QTable) -> ThresholdProfile:
    """Per-error belief thresholds from the q-tables (folded mode).

    The transmit set of each row must be a suffix of the belief grid; a
    non-suffix row raises StructureViolation. Rows that never transmit get
    the NEVER sentinel, never a fabricated number.
    """
    if q.mode != "folded":
        raise ValueError("thresholds are extracted from the folded tables")
    transmit = q.q_transmit < q.q_idle
    pts = q.belief_grid.points
    b_star = np.full(transmit.shape[0], NEVER)
    for i, row in enumerate(transmit):
        hits = np.nonzero(row)[0]
        if len(hits) == 0:
            continue
        first = hits[0]
        if not row[first:].all():
            raise StructureViolation(i, row.astype(int))
        b_star[i] = pts[first]
    return ThresholdProfile(b_star=b_star, error_grid=q.error_grid)


def _mirror_rows(values: np.ndarray) -> np.ndarray:
    return np.concatenate([values[::-1][:-1], values], axis=0)


def unfold(obj):
    """Map a folded-grid table onto the symmetric signed-error grid."""
    if isinstance(obj, ValueTable):
        grid = mirror_error_grid(obj.error_grid)
        return ValueTable(values=_mirror_rows(obj.values), error_grid=grid,
                          belief_grid=obj.belief_grid, mode="original",
                          iteration=obj.iteration, residual=obj.residual)
    if isinstance(obj, QTable):
        grid = mirror_error_grid(obj.error_grid)
        return QTable(q_idle=_mirror_rows(obj.q_idle),
                      q_transmit=_mirror_rows(obj.q_transmit),
                      error_grid=grid, belief_grid=obj.belief_grid,
                      mode="original")
    if isinstance(obj, PolicyTable):
        grid = mirror_error_grid(obj.error_grid)
        return PolicyTable(transmit=_mirror_rows(obj.transmit), error_grid=grid,
                           belief_grid=obj.belief_grid, mode="original",
                           tie_rule=obj.tie_rule)
    if isinstance(obj, ThresholdProfile):
        grid = mirror_error_grid(obj.error_grid)
        return ThresholdProfile(b_star=_mirror_rows(obj.b_star), error_grid=grid)
    raise TypeError(f"cannot unfold {type(obj).__name__}")


def export_table_csv(table: ValueTable, path) -> None:
    """Reported block as CSV: header row = belief grid, first column = error grid."""
    _write_grid_csv(path, table.error_grid, table.belief_grid, table.core_values)


def _write_grid_csv(path, error_grid, belief_grid, core_values):
    header = "e," + ",".join(_CSV_FMT % b for b in belief_grid.points)
    rows = []
    for e, row in zip(error_grid.core_points, np.asarray(core_values)):
        rows.append(_CSV_FMT % e + "," + ",".join(_CSV_FMT % x for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        fh.write("\n".join(rows) + "\n")


def export_q_csv(q: QTable, path) -> None:
    """Long-format q tables on the reported block: e, b, q_idle, q_transmit, transmit."""
    core = q.error_grid.core
    es = q.error_grid.core_points
    bs = q.belief_grid.points
    qi, qt = q.q_idle[core], q.q_transmit[core]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("e,b,q_idle,q_transmit,transmit\n")
        for i, e in enumerate(es):
            for j, b in enumerate(bs):
                fh.write("%s,%s,%s,%s,%d\n" % (
                    _CSV_FMT % e, _CSV_FMT % b, _CSV_FMT % qi[i, j],
                    _CSV_FMT % qt[i, j], 1 if qt[i, j] < qi[i, j] else 0))


def export_thresholds_csv(profile: ThresholdProfile, path) -> None:
    """Reported block thresholds: e, b_star with `never` for the sentinel."""
    core = profile.error_grid.core
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("e,b_star\n")
        for e, th in zip(profile.error_grid.core_points, profile.b_star[core]):
            fh.write("%s,%s\n" % (_CSV_FMT % e,
                                  "never" if not np.isfinite(th) else _CSV_FMT % th))


def solution_summary(sol: Solution) -> dict:
    """Self-describing snapshot of a solve (params, config, convergence, tables)."""
    from . import __version__ as _version
    from .model import config_mapping
    core = sol.value.error_grid.core
    b_star = None
    try:
        profile = extract_thresholds(sol.q) if sol.value.mode == "folded" else None
    except StructureViolation:
        profile = None
    if profile is not None:
        b_star = ["never" if not np.isfinite(x) else float(x)
                  for x in profile.b_star[core]]
    return {
        "format": "gesched-solution",
        "version": _version,
        "mode": sol.value.mode,
        "configuration": config_mapping(sol.params, sol.config),
        "iterations": int(sol.value.iteration),
        "residual": float(sol.value.residual),
        "error_bound": sol.error_bound,
        "quadrature_mass_range": [float(sol.raw_masses[core].min()),
                                  float(sol.raw_masses[core].max())],
        "error_grid": [float(x) for x in sol.value.error_grid.core_points],
        "belief_grid": [float(x) for x in sol.value.belief_grid.points],
        "values": np.asarray(sol.value.core_values).tolist(),
        "thresholds": b_star,
    }


def export_solution_json(sol: Solution, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(solution_summary(sol), fh, indent=1)
        fh.write("\n")
