"""Acceptance criteria, one test per criterion, tolerances pinned.

Each test prints one ``ACCEPTANCE <n> <PASS|FAIL>`` line (visible with
``pytest -s`` or in the captured output of failures).

Criterion 3 is expected to fail at desk scale: at alpha = 2.4 the flow
is still in its preasymptotic phase at every affordable horizon (see
the measured evidence in the failure message).  The test asserts the
stated numbers anyway; the red result is the honest outcome.
"""

import json
import math
import os

import numpy as np
import pytest

from densflow import cli
from densflow import embeddings as emb
from densflow import harness as hn
from densflow import regime as rg
from densflow import solver as sv
from densflow.density import DensityProfile
from densflow.geometry import Exponents, ManifoldProfile

from conftest import CONFIG_DIR, config

E322 = Exponents(3, 2.0, 2.0)
EUC3 = ManifoldProfile.euclidean(3)


def _report(n, ok, detail=""):
    print(f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def test_criterion_1_porous_medium_oracle(pme_setup, pme_record):
    cfg, geom, dens, exps = pme_setup
    rep_sup = hn.decay_experiment(geom, dens, exps, cfg.run_kwargs(),
                                  tol=0.05, record=pme_record)
    rep_ifc = hn.propagation_experiment(geom, dens, exps, cfg.run_kwargs(),
                                        tol=0.04, record=pme_record)
    elapsed = pme_record.meta["elapsed_s"]
    sup_rate = -rep_sup.measured.exponent
    ifc_rate = rep_ifc.measured.exponent
    detail = (f"sup {sup_rate:.4f} (0.600±0.05) iface {ifc_rate:.4f} "
              f"(0.200±0.04) runtime {elapsed:.0f}s (<=180s)")
    ok = (abs(sup_rate - 0.600) <= 0.05 and abs(ifc_rate - 0.200) <= 0.04
          and rep_sup.verdict == hn.PASS and rep_ifc.verdict == hn.PASS
          and elapsed <= 180.0)
    assert _report(1, ok, detail), detail


def test_criterion_2_weighted_subcritical(weighted_setup, weighted_record):
    cfg, geom, dens, exps = weighted_setup
    rep_sup = hn.decay_experiment(geom, dens, exps, cfg.run_kwargs(),
                                  tol=0.07, record=weighted_record)
    rep_ifc = hn.propagation_experiment(geom, dens, exps, cfg.run_kwargs(),
                                        tol=0.05, record=weighted_record)
    audit = hn.mass_conservation_audit(weighted_record, tol=1e-9)
    sup_rate = -rep_sup.measured.exponent
    ifc_rate = rep_ifc.measured.exponent
    detail = (f"sup {sup_rate:.4f} (2/3±0.07) iface {ifc_rate:.4f} "
              f"(1/3±0.05) mass drift {audit.max_drift:.2e} (<=1e-9)")
    ok = (abs(sup_rate - 2.0 / 3.0) <= 0.07 and abs(ifc_rate - 1.0 / 3.0) <= 0.05
          and rep_sup.verdict == hn.PASS and rep_ifc.verdict == hn.PASS
          and audit.verdict == hn.PASS)
    assert _report(2, ok, detail), detail


def test_criterion_3_universal_bound(universal_result):
    """Expected red at desk scale; see notes in the failure message."""
    rep, _records = universal_result
    lo = rep.extras["exponent_low_mass"]
    hi = rep.extras["exponent_high_mass"]
    ratio = rep.extras["sup_ratio_last"]
    detail = (f"exponents {lo:.4f}/{hi:.4f} (1.00±0.15) sup ratio "
              f"{ratio:.3f} (<=1.25) verdict {rep.verdict}")
    ok = rep.verdict == hn.PASS
    _report(3, ok, detail)
    assert ok, (
        f"{detail}. Desk-scale evidence: at alpha=2.4 the measured decay "
        "exponent is resolution-stable at ~0.62 (750/1500/3000 cells agree "
        "to 4 digits) and drifts toward 1 by only ~0.05 per time decade "
        "(local slopes -0.598 over [1,3] to -0.649 over [30,90]); the sup "
        "ratio ~2.3 matches the preasymptotic mass scaling 10^0.4.  "
        "Reaching the universal regime needs t beyond any explicit-scheme "
        "horizon; see notes/decisions.md for the full analysis.")


def test_criterion_4_regime_classification():
    expected = {
        "classify_alpha1p0.cfg": "Subcritical",
        "classify_alpha2p2.cfg": "SupercriticalDecay",
        "classify_alpha2p4.cfg": "SupercriticalDecay",
        "classify_alpha2p8.cfg": "InterfaceBlowUp",
    }
    got = {}
    for name in expected:
        rep = rg.classify_regime(EUC3, config(name).density(), E322)
        got[name] = rep.regime
        assert rep.alpha_star == 2.5  # exact arithmetic
    ok = got == expected
    assert _report(4, ok, f"{sorted(got.values())}"), (got, expected)


def test_criterion_5_z0_matches_analytic_inversion():
    dens = DensityProfile.power_law(0.0)
    mass = 0.7
    worst = 0.0
    for t in np.geomspace(1e-3, 1e6, 20):
        z_num = rg.z0(EUC3, dens, E322, float(t), mass)
        z_exact = (3.0 * t * mass / (4.0 * math.pi)) ** 0.2
        worst = max(worst, abs(z_num / z_exact - 1.0))
    ok = worst <= 1e-8
    assert _report(5, ok, f"worst rel err {worst:.2e} (<=1e-8, 20 values)"), worst


def test_criterion_6_hardy_suite():
    grid4k = sv.build_grid(EUC3, 3.0, 4000)
    tent = emb.tent_function(grid4k, EUC3, r0=1.0)
    tent_ratio = emb.hardy_ratio(tent, E322)

    maxima = {}
    for n in (2000, 4000):
        g = sv.build_grid(EUC3, 3.0, n)
        best = 0.0
        for idx in range(1000):
            f = emb.random_test_function(g, EUC3, idx, seed=42)
            if f.support_cells == 0:
                continue
            r = emb.hardy_ratio(f, E322)
            assert np.isfinite(r)
            best = max(best, r)
        maxima[n] = best
    shift = abs(maxima[4000] - maxima[2000]) / maxima[2000]
    detail = (f"tent {tent_ratio:.4f} (1.00±0.01) suite max "
              f"{maxima[4000]:.4f} shift {shift:.3%} (<2%)")
    ok = abs(tent_ratio - 1.0) <= 0.01 and shift < 0.02
    assert _report(6, ok, detail), detail


def test_criterion_7_profile_ode_exponents():
    prof = emb.solve_profile_ode(emb.euclidean_iso_G(3), 2.0)
    exp_a = prof.fitted_exponent_A()
    exp_b = prof.fitted_exponent_B()
    rep = prof.sandwich_report()
    detail = (f"A exponent {exp_a:.5f} (4.000±0.005) B exponent {exp_b:.5f} "
              f"(3.000±0.005) sandwich {rep['sofeef_lower'] and rep['sofeef_upper']}")
    ok = (abs(exp_a - 4.0) <= 0.005 and abs(exp_b - 3.0) <= 0.005
          and rep["sofeef_lower"] and rep["sofeef_upper"]
          and rep["derivative_lower"] and rep["derivative_upper"])
    assert _report(7, ok, detail), detail


def test_criterion_8_scheme_properties(pme_record, weighted_record,
                                       universal_result, scaling_pair):
    _, universal_records = universal_result
    records = [pme_record, weighted_record, *universal_records, *scaling_pair]
    ok = True
    notes = []

    for rec in records:
        if rec.final_u is not None and np.any(rec.final_u < 0):
            ok = False
            notes.append("negative value")
        sups = [s.sup for s in rec.unflagged()]
        if not all(b <= a * (1 + 1e-12) for a, b in zip(sups, sups[1:])):
            ok = False
            notes.append("sup not monotone")
        ifc = [s.interface for s in rec.unflagged()]
        dr = rec.grid.dr
        if not all(b >= a - dr * 1.0000001 for a, b in zip(ifc, ifc[1:])):
            ok = False
            notes.append("interface not monotone")

    rec1, rec2 = scaling_pair
    by_t1 = {round(math.log2(s.t), 9): s.sup for s in rec1.samples if s.t > 0}
    worst = 0.0
    matched = 0
    for s in rec2.samples:
        if s.t <= 0:
            continue
        key = round(math.log2(2.0 * s.t), 9)
        if key in by_t1 and by_t1[key] > 0:
            worst = max(worst, abs(s.sup / (2.0 * by_t1[key]) - 1.0))
            matched += 1
    if matched < 10 or worst > 0.01:
        ok = False
        notes.append(f"scaling covariance worst {worst:.2e} over {matched} pairs")
    detail = f"{len(records)} records; scaling worst {worst:.2e} ({matched} pairs)"
    assert _report(8, ok, detail + " " + ";".join(notes)), notes


def test_criterion_9_determinism(tmp_path):
    cfg_path = os.path.join(CONFIG_DIR, "determinism_small.cfg")
    outs = []
    for tag in ("a", "b"):
        out = str(tmp_path / tag)
        assert cli.main(["solve", "--config", cfg_path, "--out", out]) == 0
        outs.append(out)
    csv_a = open(os.path.join(outs[0], "run.csv"), "rb").read()
    csv_b = open(os.path.join(outs[1], "run.csv"), "rb").read()
    field_a = open(os.path.join(outs[0], "field_final.csv"), "rb").read()
    field_b = open(os.path.join(outs[1], "field_final.csv"), "rb").read()
    ok = csv_a == csv_b and field_a == field_b
    assert _report(9, ok, f"{len(csv_a)} CSV bytes byte-identical"), "outputs differ"


def test_blowup_signature_probe():
    # companion to criterion 4: the stated desk-scale substitute for the
    # unbounded-support conclusion
    cfg = config("blowup_probe.cfg")
    probe = hn.blowup_probe(cfg.geometry(), cfg.density(), cfg.exponents(),
                            cfg.run_kwargs(),
                            n_doublings=cfg["experiment.blowup_doublings"])
    assert probe["is_verification"] is False
    assert probe["formal_subcritical_denominator"] < 0
    for entry in probe["doublings"]:
        assert entry["central_mass_decreasing"]
        assert entry["central_mass_last"] < 0.5 * entry["central_mass_first"]
        assert entry["loglog_curvature"] > 0  # accelerating in log-log
    print("ACCEPTANCE blow-up-signature PASS "
          f"curvature {[round(d['loglog_curvature'], 3) for d in probe['doublings']]}")
