import json
import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusdecomp import (HypothesisError, ParamSet, RejectedInputError,
                         bootstrap_diagnostic, decompose, extract_granules_for_coefficient,
                         final_bootstrap_diagnostic, initial_dimension_report, make_measure)
from torusdecomp.decompose import final_spectrum_check, iteration_log_rows, walk_coefficients
from torusdecomp.granulation import GranuleFamily, verify_family
from torusdecomp.measure import GridMeasure, walk_power
from torusdecomp.multipliers import MultiplierSet, generate

Q16 = 2 ** 16
S16 = generate("full", 16)


def low_freq_recheck(mu1, S, k, L, tau):
    """max over 0 < |n| < L^tau of the walk-convolved coefficient, by a direct sum."""
    w = walk_power(mu1, S, k).weights
    j = np.arange(mu1.Q)
    top = 0.0
    n = 1
    while n < L ** tau:
        for m in (n, -n):
            top = max(top, abs(np.sum(w * np.exp(-2j * np.pi * ((m * j) % mu1.Q) / mu1.Q))))
        n += 1
    return top


# parameters


def test_param_defaults_and_derived():
    p = ParamSet()
    assert p.c_tilde_max == pytest.approx(16 ** 0.25)
    assert p.eps0 == pytest.approx(0.5 / 60)
    assert p.threshold == pytest.approx(16 ** -0.2)
    assert p.budget() == min(math.ceil(16 ** (34 * 2 * 0.2)), 10_000)
    M, N = p.schedule(-3)
    assert M == 48 and N == pytest.approx(16 ** 1.125 * 3)


@pytest.mark.parametrize("bad", [{"tau": 0.3}, {"k": 0}, {"alpha_ini": 0.95},
                                 {"loop_criterion": "other"}, {"lam": 1.5}])
def test_param_validation(bad):
    with pytest.raises(RejectedInputError):
        ParamSet(**bad)


# initial dimension


def test_initial_dimension_dirac():
    rep = initial_dimension_report(make_measure("dirac", 2 ** 14, index=0), S16, 1, 1, 0.9)
    assert rep["count"] >= len(S16) * 0.9 / 2 and rep["holds"]


def test_initial_dimension_singleton():
    rep = initial_dimension_report(make_measure("dirac", 2 ** 14, index=0),
                                   MultiplierSet(16, [20]), 1, 3, 0.9)
    assert rep["count"] >= 1


def test_initial_dimension_guard():
    with pytest.raises(RejectedInputError):
        initial_dimension_report(make_measure("uniform", 2 ** 12), S16, 1, 1, 0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_initial_dimension_checks_exact(seed):
    rng = np.random.default_rng(seed)
    Q = 2 ** 14
    x = int(rng.integers(0, 64))
    w = np.zeros(Q)
    w[x * Q // 64] = 0.97
    w += 0.03 / Q
    mu = GridMeasure(Q, w)
    S = generate("random", 16, beta=0.8, seed=seed)
    a = int(rng.integers(1, 4))
    top = abs(walk_coefficients(mu, S, 1, [a])[0])
    if top <= 0.3:
        return
    rep = initial_dimension_report(mu, S, 1, a, min(0.9, top * 0.99))
    assert all(r["holds"] for r in rep["checks"] if r["exact"])


# bootstrap diagnostics


def test_bootstrap_rho_large_branch():
    mu = make_measure("dirac", 2 ** 14, index=0)
    tr = bootstrap_diagnostic(mu, S16, 1, 56, 4, 0.5, ParamSet(L=16, rho_const=1e-3))
    assert tr.branch == "rho-large" and tr.exact_ok
    assert tr.counts["E2"] > 0


def test_bootstrap_bsg_branch_on_rational_atoms():
    w = np.zeros(2 ** 14)
    w[::2 ** 11] = 1 / 8
    tr = bootstrap_diagnostic(GridMeasure(2 ** 14, w), S16, 1, 56, 4, 0.5, ParamSet(L=16))
    assert tr.branch == "bsg-projection" and tr.exact_ok
    assert tr.increment_met is not None
    assert "increment_met" in tr.flags
    json.dumps(tr.as_dict(), default=float)


def test_bootstrap_guard():
    with pytest.raises(RejectedInputError):
        bootstrap_diagnostic(make_measure("uniform", 2 ** 14), S16, 1, 56, 4, 0.5,
                             ParamSet(L=16))
    with pytest.raises(RejectedInputError):
        bootstrap_diagnostic(make_measure("dirac", 2 ** 14, index=0), S16, 1, 64, 2, 0.5,
                             ParamSet(L=16))


def test_final_bootstrap_dirac():
    out = final_bootstrap_diagnostic(make_measure("dirac", 2 ** 14, index=0), S16, 1, 56, 4,
                                     0.5)
    assert out["conclusion"]["met"]
    assert out["conclusion"]["margin"] > 10
    assert out["flags"]["density_bounds_sound"]
    assert out["directional"]["holds"]


def test_final_bootstrap_bound_inverse_in_c_tilde():
    mu = make_measure("dirac", 2 ** 14, index=0)
    p = ParamSet(L=16, lam=0.9)
    runs = [final_bootstrap_diagnostic(mu, S, 1, 56, 4, 0.5, p, check_density=False)
            ["conclusion"] for S in (S16, generate("progression", 16, step=4))]
    assert runs[1]["c_tilde"] > runs[0]["c_tilde"]
    assert runs[0]["bound"] * runs[0]["c_tilde"] == pytest.approx(
        runs[1]["bound"] * runs[1]["c_tilde"])


def test_final_bootstrap_guard():
    with pytest.raises(RejectedInputError):
        final_bootstrap_diagnostic(make_measure("uniform", 2 ** 14), S16, 1, 56, 4, 0.5)


# granule extraction


def test_extract_dirac():
    fam = extract_granules_for_coefficient(make_measure("dirac", Q16, index=0), S16, 1, 1,
                                           0.5, ParamSet())
    assert fam.points == [0] and fam.captured_mass == 1


def test_extract_two_atoms():
    w = np.full(Q16, 0.1 / Q16)
    w[0] += 0.45
    w[Q16 // 2] += 0.45
    mu = GridMeasure(Q16, w)
    fam = extract_granules_for_coefficient(mu, S16, 1, 2, 0.5, ParamSet())
    assert {0, Q16 // 2} <= set(fam.points)
    assert fam.captured_mass >= 0.85
    assert verify_family(fam, mu)["ok"]
    info = fam.trace.info
    assert info["reference_mass"] == pytest.approx(0.5 ** 66)
    assert info["schedule"]["M"] == 32


def test_extract_guard_on_uniform():
    with pytest.raises(HypothesisError):
        extract_granules_for_coefficient(make_measure("uniform", Q16), S16, 1, 1, 0.5,
                                         ParamSet())


# decomposition


def test_decompose_uniform():
    mu = make_measure("uniform", Q16)
    res = decompose(mu, S16, ParamSet())
    assert res.status == "converged" and res.ell == 0
    assert res.mu2.mass == 0 and np.array_equal(res.mu1.weights, mu.weights)


def test_decompose_dirac():
    mu = make_measure("dirac", Q16, index=0)
    res = decompose(mu, S16, ParamSet())
    assert res.status == "converged" and res.ell == 1
    assert res.mu1.mass == 0 and np.array_equal(res.mu2.weights, mu.weights)


def test_decompose_heavy_atom():
    mu = make_measure("mixture", Q16, components=[(0.7, {"kind": "dirac", "index": 0}),
                                                  (0.3, {"kind": "uniform"})])
    res = decompose(mu, S16, ParamSet())
    assert res.status == "converged" and res.ell >= 1
    assert np.array_equal(res.mu1.weights + res.mu2.weights, mu.weights)
    region = np.zeros(Q16, bool)
    for fam in res.families:
        region |= fam.region()
        assert verify_family(fam, mu)["separated"]
    assert not np.any(res.mu1.weights[region])
    masses = [row["remaining_mass"] for row in res.log]
    assert all(b <= a for a, b in zip(masses, masses[1:]))
    assert low_freq_recheck(res.mu1, S16, 1, 16, 0.2) <= 16 ** -0.2
    assert res.ell <= res.budget


def test_decompose_plain_criterion_reports_failure():
    # the plain loop test fires on the atom, but the walk spreads it, so the
    # extraction hypothesis on the walk coefficient fails
    mu = make_measure("mixture", Q16, components=[(0.7, {"kind": "dirac", "index": Q16 // 3}),
                                                  (0.3, {"kind": "uniform"})])
    res = decompose(mu, S16, ParamSet(loop_criterion="plain"))
    assert res.status == "extraction_failed" and res.ell == 0
    assert res.error["error"] == "HypothesisError"
    assert np.array_equal(res.mu1.weights, mu.weights)


def test_decompose_budget_exhausted(monkeypatch):
    # the package re-exports the function under the module's name
    dec = sys.modules["torusdecomp.decompose"]

    class Trace:
        def __init__(self, t):
            self.info = {"t": t}

    def one_point(mu, S, k, a, t, params):
        # a family holding only the heaviest remaining grid point
        j = int(np.argmax(mu.weights))
        return GranuleFamily(mu.Q, [j], 1.0, 0.5 / mu.Q, float(mu.weights[j]), Trace(t))

    monkeypatch.setattr(dec, "extract_granules_for_coefficient", one_point)
    w = np.full(Q16, 0.3 / Q16)
    w[:8] += 0.7 / 8
    res = decompose(GridMeasure(Q16, w), S16, ParamSet(max_iterations=3))
    assert res.status == "budget_exhausted" and res.ell == 3 == res.budget
    assert [row["remaining_mass"] for row in res.log] == sorted(
        (row["remaining_mass"] for row in res.log), reverse=True)


def test_decompose_preconditions():
    mu = make_measure("uniform", Q16)
    with pytest.raises(RejectedInputError):
        decompose(mu, MultiplierSet(16, [16, 17, 18]), ParamSet())
    with pytest.raises(RejectedInputError):
        decompose(mu, generate("full", 8), ParamSet())
    with pytest.raises(RejectedInputError) as exc:
        decompose(mu, MultiplierSet(16, [16, 17, 18, 19, 20]), ParamSet())
    assert "certificate" in exc.value.context
    with pytest.raises(RejectedInputError):
        decompose(make_measure("uniform", 64), S16, ParamSet())


def test_result_json_and_log():
    mu = make_measure("dirac", Q16, index=0)
    res = decompose(mu, S16, ParamSet())
    data = json.loads(json.dumps(res.to_json()))
    assert data["status"] == "converged" and data["mu2"]["weights"]["sparse"] == [[0, 1.0]]
    rows = iteration_log_rows(res)
    assert rows[0] == ("ell", "a", "t", "family_size", "captured_mass", "remaining_mass",
                       "max_coeff")
    assert len(rows) == res.ell + 1
    assert final_spectrum_check(res.mu1, S16, res.params) == 0
