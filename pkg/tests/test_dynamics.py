"""Primitive kernels, belief updates, and the error recursion."""

import numpy as np
import pytest
from scipy.integrate import quad

from gesched.dynamics import (belief_next_no_tx, belief_next_tx, error_next,
                              folded_kernel_no_ack, gaussian_pdf,
                              instantaneous_cost, kernel_no_ack)
from gesched.model import ModelParams


def test_gaussian_pdf_known_values():
    # standard normal density at a few hand points
    assert abs(gaussian_pdf(0.0) - 0.3989422804014327) < 1e-15
    assert abs(gaussian_pdf(1.0) - 0.24197072451914337) < 1e-15
    assert abs(gaussian_pdf(-1.0) - gaussian_pdf(1.0)) < 1e-15
    x = np.array([0.0, 1.0, 2.0])
    out = gaussian_pdf(x)
    assert out.shape == (3,)
    assert isinstance(gaussian_pdf(0.0), float)


def test_gaussian_pdf_integrates_to_one():
    val, err = quad(gaussian_pdf, -np.inf, np.inf)
    assert abs(val - 1.0) < 1e-10


def test_kernel_no_ack_is_shifted_gaussian():
    p = ModelParams()
    # density of a*e + w at e_plus, so a Gaussian centered at a*e
    assert abs(kernel_no_ack(1.8, 2.0, p) - gaussian_pdf(0.0)) < 1e-15
    val, _ = quad(lambda ep: kernel_no_ack(ep, 3.0, p), -np.inf, np.inf)
    assert abs(val - 1.0) < 1e-10


def test_folded_kernel_definition_and_mass():
    p = ModelParams()
    e = 2.0
    for ep in (0.0, 0.5, 1.8, 5.0):
        want = gaussian_pdf(ep - p.a * e) + gaussian_pdf(ep + p.a * e)
        assert abs(folded_kernel_no_ack(ep, e, p) - want) < 1e-15
    # folding preserves probability mass on the half line
    val, _ = quad(lambda ep: folded_kernel_no_ack(ep, e, p), 0, np.inf)
    assert abs(val - 1.0) < 1e-10
    # at e_plus = 0, e = 1 the two branches coincide: 2 * phi(0.9)
    from scipy.stats import norm
    assert abs(folded_kernel_no_ack(0.0, 1.0, p) - 2 * norm.pdf(0.9)) < 1e-14


def test_folded_kernel_rejects_negative_args():
    p = ModelParams()
    with pytest.raises(ValueError):
        folded_kernel_no_ack(-0.1, 1.0, p)
    with pytest.raises(ValueError):
        folded_kernel_no_ack(1.0, -0.1, p)


def test_belief_updates():
    p = ModelParams()
    assert belief_next_tx(1, p) == p.p11
    assert belief_next_tx(0, p) == p.p01
    assert abs(belief_next_no_tx(0.5, p) - (0.5 * 0.8 + 0.5 * 0.3)) < 1e-15
    # T contracts toward the stationary point
    bbar = 0.6
    assert abs(belief_next_no_tx(bbar, p) - bbar) < 1e-15
    b = 0.1
    for _ in range(50):
        b = belief_next_no_tx(b, p)
    assert abs(b - bbar) < 1e-12
    with pytest.raises(ValueError):
        belief_next_no_tx(1.2, p)


def test_error_recursion():
    p = ModelParams()
    # reset happens only when a transmission goes through
    assert error_next(2.0, 1, 1, 0.3, p) == 0.3
    assert abs(error_next(2.0, 1, 0, 0.3, p) - (0.9 * 2.0 + 0.3)) < 1e-15
    assert abs(error_next(2.0, 0, 1, 0.3, p) - (0.9 * 2.0 + 0.3)) < 1e-15


def test_instantaneous_cost():
    p = ModelParams(lam=2.0)
    assert instantaneous_cost(3.0, 0, p) == 9.0
    assert instantaneous_cost(3.0, 1, p) == 11.0
    assert instantaneous_cost(-3.0, 0, p) == 9.0
