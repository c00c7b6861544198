"""Gate tunings, phase maps, analytic laws, and the engine stack.

Numeric regressions were frozen from runs of this package cross-checked
against the independent dense oracle in conftest; the tuning arithmetic
tests recompute the closed formulas inline.
"""

from dataclasses import replace

import numpy as np
import pytest

from heraldgate import effective, gates
from heraldgate.gates import (
    GateReport,
    apply_tuning,
    conditional_phase_map,
    correction_unitary,
    cz_asymptotic_scaling,
    cz_success,
    gate_metrics,
    gate_metrics_full,
    gate_target_state,
    report_csv_row,
    toffoli_metrics,
    toffoli_sums,
    tune,
    tune_cz,
    tune_toffoli,
)
from heraldgate.model import params_from_groups


def groups(C_B=100.0, lam=5.0, N=2, **kw):
    kw.setdefault("kappa", 10.0)
    kw.setdefault("Delta_e1", 150.0)
    kw.setdefault("Omega1", 2.0)
    kw.setdefault("Omega2", 2.0)
    return params_from_groups(C_B=C_B, lam=lam, n_qutrits=N, **kw)


# ---------------------------------------------------------------------------
# tunings


def test_toffoli_tuning_arithmetic():
    p = groups()
    spec = tune_toffoli(p)
    G = 5.0 * np.sqrt(100.0)
    R = np.sqrt(0.5 * (1.0 / G**2 + 1.0 / 100.0 + 1.0 / 100.0))
    assert spec.kind == "toffoli"
    assert spec.delta == 0.0
    assert spec.tuning_scale == pytest.approx(R, rel=1e-14)
    assert spec.Delta_e2 == pytest.approx(100.0 * (R + 1.0 / G), rel=1e-14)
    assert spec.correction_phases is None


def test_toffoli_duration_sets_pi_phase():
    p = groups()
    spec = tune_toffoli(p)
    shift_1 = effective.branch_rates(apply_tuning(p, spec), 1, "taylor").shift
    assert spec.duration * abs(shift_1) == pytest.approx(np.pi, abs=1e-12)


def test_cz_tuning_arithmetic():
    # device-style group values, gamma units
    q = params_from_groups(C_B=170.0, lam=1.84, kappa=0.6, Delta_e1=42.0,
                           Omega1=7.0, Omega2=8.7, n_qutrits=2)
    spec = tune_cz(q)
    G = 1.84 * np.sqrt(170.0)
    D = np.sqrt(0.5 * (1.0 / G**2 + 1.0 / 170.0))
    assert spec.tuning_scale == pytest.approx(D, rel=1e-14)
    assert spec.delta == pytest.approx(1.0 / (2.0 * (2.0 * D + 1.0 / G)), rel=1e-14)
    assert spec.Delta_e2 == pytest.approx(170.0 * (D + 1.0 / G), rel=1e-14)
    assert spec.duration == pytest.approx(375.7659205738532, rel=1e-12)


def test_cz_duration_and_corrections_from_shifts():
    q = params_from_groups(C_B=170.0, lam=1.84, kappa=0.6, Delta_e1=42.0,
                           Omega1=7.0, Omega2=8.7, n_qutrits=2)
    spec = tune_cz(q)
    tuned = apply_tuning(q, spec)
    sh = [effective.branch_rates(tuned, n, "taylor").shift for n in (0, 1, 2)]
    curvature = sh[2] - 2.0 * sh[1] + sh[0]
    assert spec.duration * abs(curvature) == pytest.approx(np.pi, abs=1e-12)
    assert spec.correction_phases[0] == pytest.approx(sh[0] * spec.duration / 2.0)
    assert spec.correction_phases[1] == pytest.approx(
        (2.0 * sh[1] - sh[0]) * spec.duration / 2.0)


def test_tuning_requires_a_drive():
    dead = replace(groups(), Omega1=0.0)
    with pytest.raises(ValueError, match="shift vanished"):
        tune(dead, "toffoli")
    with pytest.raises(ValueError, match="phase-degenerate"):
        tune(dead, "cz")
    with pytest.raises(ValueError, match="unknown gate kind"):
        tune(groups(), "iswap")


# ---------------------------------------------------------------------------
# register helpers and phase maps


def test_gate_target_states():
    t3 = gate_target_state("toffoli", 3)
    assert t3.shape == (8,)
    assert np.linalg.norm(t3) == pytest.approx(1.0)
    assert t3[0] == pytest.approx(-1.0 / np.sqrt(8.0))
    assert np.all(t3[1:].real > 0)
    cz = gate_target_state("cz", 2)
    assert cz[3] == pytest.approx(-0.5) and cz[0] == pytest.approx(0.5)
    with pytest.raises(ValueError, match="2 qubits"):
        gate_target_state("cz", 3)
    with pytest.raises(ValueError, match="unknown gate kind"):
        gate_target_state("cnot", 2)


def test_correction_unitary_structure():
    q = params_from_groups(C_B=170.0, lam=1.84, kappa=0.6, Delta_e1=42.0,
                           Omega1=7.0, Omega2=8.7, n_qutrits=2)
    spec = tune_cz(q)
    U = correction_unitary(spec, 2)
    f0, f1 = spec.correction_phases
    want = np.exp(1j * np.array([2 * f0, f0 + f1, f0 + f1, 2 * f1]))
    np.testing.assert_allclose(U.diagonal(), want, atol=1e-15)
    assert np.count_nonzero(U - np.diag(U.diagonal())) == 0
    # a spec without corrections maps to the identity
    toff = tune_toffoli(groups())
    np.testing.assert_array_equal(correction_unitary(toff, 3), np.eye(8))


def test_cz_phase_map_is_pi_on_11_only():
    q = params_from_groups(C_B=170.0, lam=1.84, kappa=0.6, Delta_e1=42.0,
                           Omega1=7.0, Omega2=8.7, n_qutrits=2)
    pm = conditional_phase_map(q, "cz")
    assert pm[0] == 0.0
    assert abs(pm[1]) < 1e-12 and abs(pm[2]) < 1e-12
    assert abs(pm[3]) == pytest.approx(np.pi, abs=1e-12)


def test_toffoli_phase_map_is_pi_on_empty_branch():
    # the n-independence of the shifts for n >= 1 improves with C_B
    p = groups(C_B=1e8, N=3)
    pm = conditional_phase_map(p, "toffoli")
    assert abs(pm[0]) == pytest.approx(np.pi, abs=1e-6)
    assert np.abs(pm[1:]).max() < 1e-6


# ---------------------------------------------------------------------------
# analytic laws


def test_binomial_sums_limits():
    P, F = toffoli_sums(np.zeros(5), 321.0)
    assert P == pytest.approx(1.0, abs=1e-12)
    assert F == pytest.approx(1.0, abs=1e-12)
    assert cz_success(0.0, 55.0) == 1.0
    # one branch fully decayed: P = 1 - C(N,n)/2^N for that branch
    decays = np.array([0.0, 1e9, 0.0])
    P, _ = toffoli_sums(decays, 1.0)
    assert P == pytest.approx(1.0 - 0.5, rel=1e-12)
    with pytest.raises(ValueError, match="branch decays"):
        toffoli_sums(np.zeros(3), 1.0, N=3)


def test_toffoli_headline_regression():
    rep = toffoli_metrics(groups(C_B=1e3, N=20))
    assert rep.success_probability == pytest.approx(0.8933220750827089, rel=1e-12)
    assert 1.0 - rep.conditional_fidelity == pytest.approx(2.062347458697822e-06,
                                                           rel=1e-9)
    assert rep.duration == pytest.approx(2259959.8741685357, rel=1e-12)
    assert rep.provenance == "analytic-asymptotic"


def test_toffoli_asymptotic_law_converges():
    gaps = {}
    for cb in (1e3, 1e4):
        rep = toffoli_metrics(groups(C_B=cb, N=20))
        gaps[cb] = (
            abs(rep.scaling["P_asymptotic"] - rep.success_probability)
            / (1.0 - rep.success_probability),
            abs(rep.scaling["F_asymptotic"] - rep.conditional_fidelity)
            / (1.0 - rep.conditional_fidelity),
        )
    assert gaps[1e4][0] < 0.05 and gaps[1e4][1] < 0.01
    assert gaps[1e4][0] < gaps[1e3][0]
    assert gaps[1e4][1] < gaps[1e3][1]


def test_register_size_cap():
    with pytest.raises(ValueError, match="N = 30"):
        toffoli_metrics(groups(), N=31)


def test_drive_strength_cancels_in_success():
    base = groups(C_B=200.0, lam=3.0, N=4)
    P1 = toffoli_metrics(base).success_probability
    P2 = toffoli_metrics(replace(base, Omega1=4.0)).success_probability
    assert abs(P1 - P2) <= 1e-12


def test_cz_scaling_factor_limit():
    d = np.sqrt(0.5)
    limit = 2.0 * d + 3.0 / (4.0 * d) + 1.0 / (16.0 * d**3)
    rel_20 = abs(cz_asymptotic_scaling(20.0) - limit) / limit
    rel_200 = abs(cz_asymptotic_scaling(200.0) - limit) / limit
    assert rel_20 < 0.025
    assert rel_200 < 0.0025


def test_cz_duration_minimizer_near_interference_sweet_spot():
    lams = np.linspace(1.0, 4.0, 61)
    durs = [tune_cz(groups(lam=float(v))).duration for v in lams]
    best = lams[int(np.argmin(durs))]
    assert 1.7 <= best <= 2.0


# ---------------------------------------------------------------------------
# engines


def test_effective_success_matches_binomial_sum():
    # same decays, regrouped: the no-jump norm is exactly the binomial sum
    for cb in (50.0, 1e4):
        p = groups(C_B=cb, N=3)
        ana = gate_metrics(p, "toffoli", engine="analytic")
        eff = gate_metrics(p, "toffoli", engine="effective")
        assert abs(ana.success_probability - eff.success_probability) < 1e-12
        assert eff.provenance == "effective-closed-form"
    # the residual branch phases vanish with cooperativity
    assert abs(ana.conditional_fidelity - eff.conditional_fidelity) < 1e-7


def test_full_engine_small_register():
    p = params_from_groups(C_B=50.0, lam=2.0, kappa=2.0, Delta_e1=50.0,
                           Omega1=8.0, Omega2=10.0, gamma0=0.6, gamma1=0.4,
                           n_qutrits=1, n_max=1)
    full = gate_metrics_full(p, "toffoli", rate_method="exact")
    ana = gate_metrics(p, "toffoli", engine="analytic", rate_method="exact")
    assert abs(full.success_probability - ana.success_probability) < 0.03
    assert full.conditional_fidelity > 0.95
    assert full.provenance == "full-ME"
    d = full.diagnostics
    # the scattered photon populated the cutoff level, so the run must have
    # been repeated with the cutoff raised by one
    assert d["n_max"] == 2
    assert d["top_fock"] < 1e-4
    assert d["trace_error"] < 1e-7
    assert d["herm_error"] < 1e-9


def test_full_engine_register_cap():
    with pytest.raises(ValueError, match="limited to 3"):
        gate_metrics_full(groups(N=4), "toffoli")


def test_engine_dispatch_validation():
    with pytest.raises(ValueError, match="unknown engine"):
        gate_metrics(groups(), "toffoli", engine="magic")
    with pytest.raises(ValueError, match="unknown gate kind"):
        gate_metrics(groups(), "cnot", engine="analytic")


# ---------------------------------------------------------------------------
# report type


def test_report_bounds_are_enforced():
    with pytest.raises(ValueError, match="success_probability"):
        GateReport(kind="cz", success_probability=1.7, conditional_fidelity=0.5,
                   duration=1.0, provenance="analytic-asymptotic")
    with pytest.raises(ValueError, match="conditional_fidelity"):
        GateReport(kind="cz", success_probability=0.5, conditional_fidelity=-0.2,
                   duration=1.0, provenance="analytic-asymptotic")


def test_report_csv_row_fields():
    p = groups()
    rep = toffoli_metrics(p)
    row = report_csv_row(rep, p).split(",")
    assert len(row) == 9
    assert row[0] == "toffoli"
    assert int(row[1]) == 2
    assert float(row[2]) == pytest.approx(100.0)
    assert row[-1] == "analytic-asymptotic"
