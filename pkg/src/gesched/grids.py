"""Grids, quadrature rules, and belief interpolation.

Error grids come in two modes. "folded" covers the half-line [0, e_max];
"original" is its symmetric mirror on [-e_max, e_max]. Both carry an
integration extension ("padding") beyond e_max up to
L = max(e_max, |a| e_max + pad_sigmas): one-step kernels from reported states
then keep all but O(1e-11) of their mass on the node set, so renormalizing the
quadrature weights into a probability vector removes conditioning bias from
the reported block. Tables are solved on the full padded support and exported
on the canonical block.

Quadrature is trapezoid-on-grid: nodes collocated with grid points (the value
table is only known there), weights = trapezoid weight times kernel density,
renormalized to sum to one. Pre-normalization row sums are tracked with
math.fsum and a drift warning fires if any reported row loses more than 1e-6
of mass (signals e_max/pad_sigmas too small for the given a).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import gaussian_pdf
from .model import ModelParams, SolverConfig, stationary_belief

MASS_DRIFT_TOL = 1e-6

# Distinguished beliefs replace a uniform point lying within this distance,
# so exact inserts never create degenerate cells next to a uniform point.
_BELIEF_MERGE_TOL = 1e-9


@dataclass(frozen=True)
class ErrorGrid:
    """Uniformly spaced error grid with an integration extension.

    points   full node array (canonical block plus padding)
    h        spacing
    mode     "folded" ([0, L]) or "original" ([-L, L])
    n_pad    padding nodes per side beyond the canonical block
    """

    points: np.ndarray
    h: float
    mode: str
    n_pad: int

    @property
    def core(self) -> slice:
        """Index slice of the canonical (reported) block."""
        if self.mode == "folded":
            return slice(0, len(self.points) - self.n_pad)
        return slice(self.n_pad, len(self.points) - self.n_pad)

    @property
    def core_points(self) -> np.ndarray:
        return self.points[self.core]

    @property
    def n_core(self) -> int:
        c = self.core
        return c.stop - c.start

    @property
    def zero_index(self) -> int:
        """Index of the node at 0 (exact in both modes)."""
        return 0 if self.mode == "folded" else (len(self.points) - 1) // 2


@dataclass(frozen=True)
class BeliefGrid:
    """Belief nodes on [0, 1] containing p01, p11, and the stationary belief exactly."""

    points: np.ndarray
    idx_p01: int
    idx_p11: int
    idx_stationary: int


@dataclass(frozen=True)
class QuadratureRule:
    """Renormalized expectation rule for one source state.

    weights sum to one; raw_mass is the pre-normalization sum (a fsum), i.e.
    the kernel mass actually captured by the node set.
    """

    nodes: np.ndarray
    weights: np.ndarray
    raw_mass: float


def build_error_grid(config: SolverConfig, params: ModelParams,
                     mode: str = "folded") -> ErrorGrid:
    if mode not in ("folded", "original"):
        raise ValueError(f"unknown error grid mode {mode!r}")
    h = config.e_max / (config.n_error - 1)
    support = max(config.e_max, abs(params.a) * config.e_max + config.pad_sigmas)
    n_pad = max(0, math.ceil((support - config.e_max) / h - 1e-12))
    core = np.linspace(0.0, config.e_max, config.n_error)
    pad = config.e_max + h * np.arange(1, n_pad + 1)
    half = np.concatenate([core, pad])
    if mode == "folded":
        points = half
    else:
        # Mirror the folded array so +/- pairs and the shared half are bitwise equal.
        points = np.concatenate([-half[::-1][:-1], half])
    return ErrorGrid(points=points, h=h, mode=mode, n_pad=n_pad)


def mirror_error_grid(folded: ErrorGrid) -> ErrorGrid:
    """The original-mode grid sharing the folded grid's nodes on [0, L]."""
    if folded.mode != "folded":
        raise ValueError("expected a folded grid")
    half = folded.points
    points = np.concatenate([-half[::-1][:-1], half])
    return ErrorGrid(points=points, h=folded.h, mode="original", n_pad=folded.n_pad)


def build_belief_grid(config: SolverConfig, params: ModelParams) -> BeliefGrid:
    points = list(np.linspace(0.0, 1.0, config.n_belief))
    for value in (params.p01, params.p11, stationary_belief(params)):
        nearest = min(range(len(points)), key=lambda i: abs(points[i] - value))
        if abs(points[nearest] - value) <= _BELIEF_MERGE_TOL:
            points[nearest] = value
        else:
            points.append(value)
            points.sort()
    arr = np.asarray(points, dtype=float)
    if np.any(np.diff(arr) <= 0.0):
        raise ValueError("belief grid is not strictly increasing")

    def exact_index(value):
        hits = np.nonzero(arr == value)[0]
        if len(hits) != 1:
            raise ValueError(f"belief {value} not uniquely on the grid")
        return int(hits[0])

    return BeliefGrid(points=arr,
                      idx_p01=exact_index(params.p01),
                      idx_p11=exact_index(params.p11),
                      idx_stationary=exact_index(stationary_belief(params)))


def build_grids(config: SolverConfig, params: ModelParams,
                mode: str = "folded") -> tuple[ErrorGrid, BeliefGrid]:
    return build_error_grid(config, params, mode), build_belief_grid(config, params)


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    w = np.empty(len(points))
    w[1:-1] = 0.5 * (points[2:] - points[:-2])
    w[0] = 0.5 * (points[1] - points[0])
    w[-1] = 0.5 * (points[-1] - points[-2])
    return w


def _kernel_matrix(grid: ErrorGrid, params: ModelParams) -> np.ndarray:
    """K[i, k] = transition density from state points[i] to node points[k]."""
    x = grid.points[None, :]
    m = params.a * grid.points[:, None]
    if grid.mode == "folded":
        return gaussian_pdf(x - m) + gaussian_pdf(x + m)
    return gaussian_pdf(x - m)


def quadrature_matrix(grid: ErrorGrid, params: ModelParams,
                      warn_drift: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """All per-state rules at once: (weights matrix, raw masses).

    weights[i] is the renormalized expectation rule for source state
    grid.points[i]; raw_mass[i] its pre-normalization fsum.
    """
    raw = _kernel_matrix(grid, params) * trapezoid_weights(grid.points)[None, :]
    masses = np.array([math.fsum(row.tolist()) for row in raw])
    if warn_drift:
        core_masses = masses[grid.core]
        lo, hi = core_masses.min(), core_masses.max()
        if lo < 1.0 - MASS_DRIFT_TOL or hi > 1.0 + MASS_DRIFT_TOL:
            warnings.warn(
                f"quadrature mass drift on the reported block: range "
                f"[{lo:.9g}, {hi:.9g}]; e_max or pad_sigmas too small",
                RuntimeWarning, stacklevel=2)
    return raw / masses[:, None], masses


def quadrature_for(e: float, grid: ErrorGrid, params: ModelParams) -> QuadratureRule:
    """The rule for one grid state (e must be a grid point)."""
    hits = np.nonzero(grid.points == e)[0]
    if len(hits) != 1:
        raise ValueError(f"{e} is not a grid point")
    i = int(hits[0])
    raw = _kernel_matrix(grid, params)[i] * trapezoid_weights(grid.points)
    mass = math.fsum(raw.tolist())
    return QuadratureRule(nodes=grid.points, weights=raw / mass, raw_mass=mass)


def interp_weights(belief_grid: BeliefGrid, b) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear interpolation stencil on the belief grid.

    Returns (left indices, right fractions) so that a table row V gives
    V[idx]*(1-frac) + V[idx+1]*frac. Exact grid hits produce frac 0 or 1.
    """
    b = np.asarray(b, dtype=float)
    if np.any(b < 0.0) or np.any(b > 1.0):
        raise ValueError("belief outside [0, 1]")
    pts = belief_grid.points
    idx = np.clip(np.searchsorted(pts, b, side="right") - 1, 0, len(pts) - 2)
    frac = (b - pts[idx]) / (pts[idx + 1] - pts[idx])
    return idx, frac


def interp_belief(values: np.ndarray, e_index: int, b, belief_grid: BeliefGrid):
    """Value table row e_index evaluated at off-grid beliefs b."""
    idx, frac = interp_weights(belief_grid, b)
    row = np.asarray(values)[e_index]
    out = row[idx] * (1.0 - frac) + row[idx + 1] * frac
    return out if np.ndim(out) else float(out)


def interp_columns(values: np.ndarray, b, belief_grid: BeliefGrid) -> np.ndarray:
    """All rows of a table evaluated at beliefs b: shape (n_rows, len(b))."""
    idx, frac = interp_weights(belief_grid, b)
    v = np.asarray(values)
    return v[:, idx] * (1.0 - frac) + v[:, idx + 1] * frac
