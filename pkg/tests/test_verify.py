"""Structural checks: pass on real solves, fail on the documented corruptions."""

import dataclasses
import json

import numpy as np
import pytest

from gesched import verify
from gesched.grids import build_belief_grid, build_error_grid
from gesched.model import ModelParams, SolverConfig
from gesched.solver import BackupOperator, ValueTable, solve

P = ModelParams()
CFG = SolverConfig(e_max=6.0, n_error=61, n_belief=11)


@pytest.fixture(scope="module")
def folded():
    return solve(P, CFG, "folded")


@pytest.fixture(scope="module")
def original():
    return solve(P, CFG, "original")


@pytest.fixture(scope="module")
def op():
    return BackupOperator(P, CFG, "folded", warn_drift=False)


def table(values_fn, mode="folded"):
    """Synthetic ValueTable from a function of (e_points, b_points)."""
    eg = build_error_grid(CFG, P, mode)
    bg = build_belief_grid(CFG, P)
    values = values_fn(eg.points[:, None], bg.points[None, :])
    values = np.broadcast_to(values, (len(eg.points), len(bg.points))).copy()
    return ValueTable(values=values, error_grid=eg, belief_grid=bg,
                      mode=mode, iteration=1, residual=0.0)


def test_report_aggregation_and_export(tmp_path):
    rep = verify.VerificationReport()
    rep.add(verify.CheckResult("alpha", True, 0.0, 1e-6))
    assert rep.overall
    rep.add(verify.CheckResult("bravo", False, 0.5, 1e-6, "(e=1, b=0)"))
    assert not rep.overall
    text = rep.to_text()
    assert "pass  alpha" in text and "FAIL  bravo" in text
    assert text.strip().endswith("overall: FAIL")

    jpath = tmp_path / "r.json"
    verify.export_report_json(rep, jpath)
    with open(jpath) as fh:
        doc = json.load(fh)
    assert doc["overall"] is False
    assert doc["checks"][1]["name"] == "bravo"
    assert doc["checks"][1]["worst_violation"] == 0.5
    tpath = tmp_path / "r.txt"
    verify.export_report_text(rep, tpath)
    assert "overall: FAIL" in tpath.read_text()


def test_run_all_passes_at_small_grid():
    rep = verify.run_all(P, CFG, n_random_triples=2000, seed=1)
    assert rep.overall
    assert len(rep.checks) == 11
    # worst violation is reported even when passing
    for c in rep.checks:
        assert np.isfinite(c.worst_violation)
        assert c.tolerance >= 0.0


def test_evenness_pass_and_fault(original):
    good = verify.verify_evenness(original.value, original.q)
    assert good.passed
    # V = e^2 is exactly even on the bitwise-symmetric grid
    sq = table(lambda e, b: e ** 2 + 0.0 * b, mode="original")
    assert verify.verify_evenness(sq).worst_violation == 0.0
    # fault probe: the odd table V = e^3
    odd = table(lambda e, b: e ** 3 + 0.0 * b, mode="original")
    bad = verify.verify_evenness(odd)
    assert not bad.passed
    # worst at the largest |e| of the reported block
    assert f"e={CFG.e_max:g}" in bad.worst_location or \
        f"e=-{CFG.e_max:g}" in bad.worst_location


def test_evenness_rejects_folded_table(folded):
    with pytest.raises(ValueError):
        verify.verify_evenness(folded.value)


def test_fold_equivalence_pass_and_fault(folded, original):
    good = verify.verify_fold_equivalence(original, folded)
    assert good.passed
    assert "policy mismatches: 0" in good.note
    # fault probe: mismatched beta between the two solves
    p2 = dataclasses.replace(P, beta=0.85)
    other = solve(p2, CFG, "original")
    bad = verify.verify_fold_equivalence(other, folded)
    assert not bad.passed


def test_monotone_error_pass_and_fault(folded):
    assert verify.verify_monotone_error(folded.value).passed
    # constants trivially pass with zero violation
    const = table(lambda e, b: 7.0 + 0.0 * e + 0.0 * b)
    assert verify.verify_monotone_error(const).worst_violation == 0.0
    # fault probe: decreasing in e
    top = CFG.e_max
    dec = table(lambda e, b: (top - e) ** 2 + 0.0 * b)
    assert not verify.verify_monotone_error(dec).passed


def test_monotone_belief_pass_and_fault(folded):
    assert verify.verify_monotone_belief(folded.value).passed
    # fault probe: increasing in b
    inc = table(lambda e, b: e ** 2 + b)
    assert not verify.verify_monotone_belief(inc).passed


def test_concavity_pass_and_fault(folded):
    assert verify.verify_concave_belief(folded.value).passed
    # affine in b is concave to machine precision
    aff = table(lambda e, b: e ** 2 * (1.0 - b))
    assert verify.verify_concave_belief(aff).worst_violation < 1e-12
    # fault probe: convex parabola in b
    cvx = table(lambda e, b: (b - 0.5) ** 2 + 0.0 * e)
    assert not verify.verify_concave_belief(cvx).passed


def test_mixing_pass_and_fault(folded):
    assert verify.verify_mixing_inequality(folded.value, P,
                                           n_random=2000).passed
    # affine case: margin reduces to (1 - t) * lam >= 0
    aff = table(lambda e, b: e ** 2 * (1.0 - b))
    res = verify.verify_mixing_inequality(aff, P, n_random=2000)
    assert res.passed and res.worst_violation == 0.0
    # fault probe: sharp tent, kink too deep for the lam/2 slack
    k = 10.0 * P.lam + 1.0
    tent = table(lambda e, b: k * np.minimum(b, 1.0 - b) + 0.0 * e)
    bad = verify.verify_mixing_inequality(tent, P, n_random=2000)
    assert not bad.passed
    assert bad.worst_violation >= (k - P.lam) / 2.0 - 1e-9


def test_threshold_pass_and_fault(folded):
    assert verify.verify_threshold(folded.policy).passed
    tr = folded.policy.transmit.copy()
    tr[5] = 0
    tr[5, 4:7] = 1  # interior band, idle on both ends
    broken = dataclasses.replace(folded.policy, transmit=tr)
    bad = verify.verify_threshold(broken)
    assert not bad.passed
    assert bad.worst_violation == 1.0  # one corrupted row


def test_kernel_mass_pass_and_fault(folded):
    assert verify.verify_kernel_mass(folded).passed
    # fault probe: no tail padding, kernel cut at the grid edge
    cfg0 = dataclasses.replace(CFG, pad_sigmas=0.0)
    with pytest.warns(RuntimeWarning):
        clipped = solve(P, cfg0, "folded")
    bad = verify.verify_kernel_mass(clipped)
    assert not bad.passed
    assert f"e={CFG.e_max:g}" in bad.worst_location


def test_lemma_shift_pass_and_fault(folded, op):
    assert verify.verify_lemma_shift(folded.value, P, op).passed
    # constants give exact equality thanks to the renormalized rows
    const = table(lambda e, b: 3.0 + 0.0 * e + 0.0 * b)
    res = verify.verify_lemma_shift(const, P, op)
    assert res.passed and res.worst_violation <= 1e-12
    # fault probe: decreasing in e over the whole padded support
    top = float(op.error_grid.points[-1])
    dec = table(lambda e, b: (top - e) ** 2 + 0.0 * b)
    assert not verify.verify_lemma_shift(dec, P, op).passed


def test_lemma_reset_pass_and_fault(folded, op):
    assert verify.verify_lemma_reset(folded.value, P, op).passed
    const = table(lambda e, b: 3.0 + 0.0 * e + 0.0 * b)
    res = verify.verify_lemma_reset(const, P, op)
    assert res.passed and res.worst_violation <= 1e-12
    # fault probe: V = 1 + b charges the rosier reset belief more
    inc = table(lambda e, b: 1.0 + b + 0.0 * e)
    bad = verify.verify_lemma_reset(inc, P, op)
    assert not bad.passed
    assert abs(bad.worst_violation - (P.p11 - P.p01)) < 1e-9


def test_lemma_reset_same_belief_pass_and_fault(folded, op):
    assert verify.verify_lemma_reset_same_belief(folded.value, P, op).passed
    # fault probe: expensive near zero, cheap far out
    top = float(op.error_grid.points[-1])
    dec = table(lambda e, b: (top - e) ** 2 + 0.0 * b)
    assert not verify.verify_lemma_reset_same_belief(dec, P, op).passed
