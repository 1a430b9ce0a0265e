"""One-step dynamics: belief recursion, error recursion, cost, and kernels.

Everything here is a pure function of (state, action, outcome) and ModelParams,
vectorized over numpy arrays. The Gaussian density is normalized (integrates
to one), so the transition kernels below are probability densities.
"""

from __future__ import annotations

import math

import numpy as np

from .model import ModelParams

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gaussian_pdf(z):
    """Standard normal density, exp(-z^2/2)/sqrt(2*pi)."""
    z = np.asarray(z, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return out if out.ndim else float(out)


def belief_next_no_tx(b, params: ModelParams):
    """Belief propagated one step with no probe: T(b) = b p11 + (1-b) p01."""
    b = np.asarray(b, dtype=float)
    if np.any(b < 0.0) or np.any(b > 1.0):
        raise ValueError("belief outside [0, 1]")
    out = b * params.p11 + (1.0 - b) * params.p01
    return out if out.ndim else float(out)


def belief_next_tx(ack, params: ModelParams):
    """Belief after a probe: the acknowledgment reveals the channel state."""
    ack = np.asarray(ack)
    out = np.where(ack.astype(bool), params.p11, params.p01)
    return out if out.ndim else float(out)


def error_next(e, u, c, w, params: ModelParams):
    """Error recursion: resets to the noise on a delivered probe, drifts otherwise."""
    e = np.asarray(e, dtype=float)
    delivered = np.asarray(u, dtype=bool) & (np.asarray(c) == 1)
    out = np.where(delivered, w, params.a * e + w)
    return out if out.ndim else float(out)


def instantaneous_cost(e, u, params: ModelParams):
    """Per-step cost e^2 + lam*u."""
    e = np.asarray(e, dtype=float)
    out = e * e + params.lam * np.asarray(u, dtype=float)
    return out if out.ndim else float(out)


def kernel_no_ack(e_plus, e, params: ModelParams):
    """Signed-error transition density without a delivered probe: phi(e+ - a e)."""
    e_plus = np.asarray(e_plus, dtype=float)
    e = np.asarray(e, dtype=float)
    out = gaussian_pdf(e_plus - params.a * e)
    return out if np.ndim(out) else float(out)


def folded_kernel_no_ack(e_plus, e, params: ModelParams):
    """Transition density of |error| without a delivered probe.

    Folding the signed kernel onto the half-line gives
    phi(e+ - a e) + phi(e+ + a e) for e+, e >= 0; it integrates to one over
    [0, inf) for any e. At e = 0 it reduces to 2*phi(e+), which is also the
    density after a delivered probe (error resets to the raw noise).
    """
    e_plus = np.asarray(e_plus, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(e_plus < 0.0) or np.any(e < 0.0):
        raise ValueError("folded kernel arguments must be nonnegative")
    m = params.a * e
    out = gaussian_pdf(e_plus - m) + gaussian_pdf(e_plus + m)
    return out if np.ndim(out) else float(out)
