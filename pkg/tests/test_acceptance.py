"""End-to-end acceptance checks, one reported line per criterion.

Tolerances are pinned as module constants. Run with ``pytest -v`` to see the
summary block, or directly with ``python tests/test_acceptance.py``.
"""

import math
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import unitary_group

from spinbus.donors import (MechanicalMode, ensemble_coupling, gradient_coupling, load_species,
                            lowest_field_transition, transition_gradient)
from spinbus.gates import (QuantumChannel, avg_gate_fidelity, choi_from_kraus, choi_series, kraus_from_choi,
                           optimal_gate_search, sqrt_iswap)
from spinbus.harness import load_config, run
from spinbus.harness.integrity import integrity_checks
from spinbus.models import SystemSpec, TwoQubitSpec, dispersive_gate_time
from spinbus.spectra import analytic_shift, eigen_shift, simulated_shift, threshold_search

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# criterion 1
C1_TOL = 0.05
C1_MIN_RATIO = 20
# criterion 3
C3_TOL = 0.10
C3_RATIO_SPREAD = 0.03
# criterion 4
C4_REFERENCE = 3e3
C4_FACTOR = 2.0
C4_SPLIT_SMALL = 0.25
C4_SPLIT_LARGE = 0.10
C4_TARGET = 200.0
# criterion 5
C5_MIN_FIDELITY = 0.99
C5_TIME_TOL = 0.20
# criterion 6
C6_SLACK = 1e-3
C6_PEAK_RANGE = (3.0, 7.0)
# criterion 7
C7_TOL = 1e-3
C7_CHANNELS = 20
C7_SAMPLES = 200_000
# criterion 8
C8_BI_RATIO = 0.93
C8_BI_TOL = 0.01


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_dispersive_analytics(acceptance):
    wm, lam = 1e6, 1e3
    ok_formula = math.isclose(analytic_shift(lam, 0.9e6, wm), 2.368, abs_tol=5e-4)
    worst = 0.0
    for dR in (-4e5, -2e5, -1e5, -5e4, -2e4, 2e4, 5e4, 1e5, 2e5):
        assert abs(dR) / lam >= C1_MIN_RATIO
        spec = SystemSpec(omega_m=wm, Omega_R=wm + dR, lam=lam, n_fock=8)
        # the upper-branch pull is the negative of the closed form
        worst = max(worst, rel(-eigen_shift(spec), analytic_shift(lam, wm + dR, wm)))
    passed = ok_formula and worst < C1_TOL
    acceptance(1, "dispersive analytics", passed,
               f"max relative deviation {worst:.2e} (limit {C1_TOL}); closed form at 0.9 MHz = "
               f"{analytic_shift(lam, 0.9e6, wm):.4f} Hz")
    assert passed


def test_criterion_2_resonance_locus(acceptance):
    cfg = load_config(CONFIGS / "eigen_map.toml")
    table = run(cfg)
    om, dn = np.array(sorted(set(cfg.grid["Omega_R"]))), np.array(sorted(set(cfg.grid["delta_nu"])))
    assert len(om) == 41 and len(dn) == 41
    cell = om[1] - om[0]
    mag = {}
    for a, b, s, st in table.rows:
        mag[(a, b)] = abs(s) if st == "ok" else -1.0
    wm = cfg.system["omega_m"]
    misses, checked = [], 0
    for b in dn:
        if b >= wm:
            continue
        target = math.sqrt(wm ** 2 - b ** 2)
        if not om[0] <= target <= om[-1]:
            continue
        col = np.array([mag[(a, b)] for a in om])
        checked += 1
        a_max = om[int(np.argmax(col))]
        if abs(a_max - target) > cell + 1e-6:
            misses.append((b, a_max, target))
    passed = checked > 0 and not misses
    acceptance(2, "resonance locus", passed,
               f"{checked} detuning columns checked, {len(misses)} off the resonance curve by more than one cell")
    assert passed


def test_criterion_3_full_dynamics_shift(acceptance):
    lam, dR = 1e3, -2e4
    spec = SystemSpec.with_reference_rates(1e5, 1e5 + dR, lam, n_fock=8)
    sim, eig = simulated_shift(spec), eigen_shift(spec)
    agree = rel(sim, eig)
    normalized = []
    for wm in (5e4, 1e5, 2e5):
        s = SystemSpec.with_reference_rates(wm, wm + dR, lam, n_fock=8)
        normalized.append(-simulated_shift(s) / analytic_shift(lam, wm + dR, wm))
    spread = (max(normalized) - min(normalized)) / np.mean(normalized)
    passed = agree < C3_TOL and spread < C3_RATIO_SPREAD
    acceptance(3, "full-dynamics shift", passed,
               f"simulated {sim:.3f} Hz vs eigen {eig:.3f} Hz (deviation {agree:.3f}, limit {C3_TOL}); "
               f"shift/closed form at omega_m/lam = 50/100/200: {', '.join(f'{v:.4f}' for v in normalized)} "
               f"(spread {spread:.1e}, limit {C3_RATIO_SPREAD})")
    assert passed


@pytest.mark.slow
def test_criterion_4_readout_threshold(acceptance):
    wm = 1e6
    templates = {0.0: SystemSpec.with_reference_rates(wm, wm, 1.0, n_fock=8, n_th=0.0),
                 3.0: SystemSpec.with_reference_rates(wm, wm, 1.0, n_fock=24, n_th=3.0)}
    lam = {}
    for nth, tpl in templates.items():
        for dR in (400.0, 4e3, 320e3):
            pt = threshold_search(tpl, dR, 0.0, C4_TARGET, lam_bounds=(100.0, 40e3), rel_tol=0.02)
            assert pt.status == "ok", (nth, dR, pt.status)
            lam[nth, dR] = pt.lam_min
    main = lam[3.0, 4e3]
    in_band = C4_REFERENCE / C4_FACTOR <= main <= C4_REFERENCE * C4_FACTOR
    small = rel(lam[3.0, 400.0], lam[0.0, 400.0])
    large = rel(lam[3.0, 320e3], lam[0.0, 320e3])
    small_regime = 400.0 / max(lam[0.0, 400.0], lam[3.0, 400.0]) <= 2
    large_regime = 320e3 / max(lam[0.0, 320e3], lam[3.0, 320e3]) >= 20
    passed = in_band and small > C4_SPLIT_SMALL and large < C4_SPLIT_LARGE and small_regime and large_regime
    acceptance(4, "readout threshold", passed,
               f"lam_min(n_th=3, delta_R=4 kHz) = {main:.0f} Hz (band {C4_REFERENCE / C4_FACTOR:.0f}-"
               f"{C4_REFERENCE * C4_FACTOR:.0f}); n_th split {small:.2f} at delta_R=400 Hz "
               f"(ratio {400.0 / lam[3.0, 400.0]:.2f}), {large:.3f} at delta_R=320 kHz "
               f"(ratio {320e3 / lam[3.0, 320e3]:.1f})")
    assert passed


def test_criterion_5_gate_formation(acceptance):
    lam, dR = 1e3, -1e4
    spec = TwoQubitSpec.symmetric(1e6, dR, lam, n_th=0.0, gamma_pct=0.0)
    r = optimal_gate_search(spec)
    t_ref = abs(dR) / (2 * lam ** 2)
    dt = rel(r.optimal_time, t_ref)
    passed = r.fidelity >= C5_MIN_FIDELITY and dt < C5_TIME_TOL
    acceptance(5, "gate formation", passed,
               f"F = {r.fidelity:.5f} (uncompensated {r.fidelity_uncompensated:.5f}) at t_opt = "
               f"{r.optimal_time * 1e3:.4f} ms, {dt:.3f} from {t_ref * 1e3:.3f} ms")
    assert passed


@pytest.mark.slow
def test_criterion_6_fidelity_structure(acceptance):
    cfg = load_config(CONFIGS / "gate_sweep.toml")
    table = run(cfg)
    ratios = np.array(table.column("detuning_ratio"))
    F = np.array(table.column("fidelity"))
    k = int(np.argmax(F))
    interior = 0 < k < len(F) - 1 and C6_PEAK_RANGE[0] <= abs(ratios[k]) <= C6_PEAK_RANGE[1]

    gcfg = load_config(CONFIGS / "gamma_sweep.toml")
    g = run(gcfg)
    order = np.argsort(g.column("gamma_pct"))
    Fg = np.array(g.column("fidelity"))[order]
    monotone = bool(np.all(np.diff(Fg) <= 1e-12))

    worst = -np.inf
    for lam in (1e4, 2e4):
        for r in (-2.0, -5.0, -8.0):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                f0 = optimal_gate_search(TwoQubitSpec.symmetric(1e6, r * lam, lam, n_th=0.0)).fidelity
                f1 = optimal_gate_search(TwoQubitSpec.symmetric(1e6, r * lam, lam, n_th=1.0)).fidelity
            worst = max(worst, f1 - f0)
    thermal = worst <= C6_SLACK
    passed = interior and monotone and thermal
    acceptance(6, "fidelity structure", passed,
               f"max F = {F[k]:.4f} at delta_R/lam = {ratios[k]:g} (interior {interior}); gamma sweep "
               f"{', '.join(f'{v:.4f}' for v in Fg)} (monotone {monotone}); max F(n_th=1) - F(n_th=0) = "
               f"{worst:.2e} (slack {C6_SLACK})")
    assert passed


def _haar(kraus, U, n, rng):
    psi = rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    tgt = psi @ U.T
    return float(sum(np.abs(np.einsum("ni,ij,nj->n", tgt.conj(), K, psi)) ** 2 for K in kraus).mean())


def test_criterion_7_channel_oracles(acceptance):
    rng = np.random.default_rng(2024)
    U = sqrt_iswap()
    worst, bad = 0.0, 0
    channels = []
    for _ in range(C7_CHANNELS):
        rank = int(rng.integers(1, 6))
        V = unitary_group.rvs(4 * rank, random_state=rng)[:, :4]
        ks = [V[4 * j:4 * j + 4] for j in range(rank)]
        ch = QuantumChannel(choi_from_kraus(ks))
        channels.append(ch)
        worst = max(worst, abs(avg_gate_fidelity(ch, U) - _haar(ks, U, C7_SAMPLES, rng)))
    spec = TwoQubitSpec.symmetric(1e6, -5e4, 1e4, n_th=1.0)
    channels += [QuantumChannel(J) for J in choi_series(spec, np.linspace(0, 2 * dispersive_gate_time(spec), 11))]
    for ch in channels:
        v = ch.violations()
        ks = kraus_from_choi(ch)
        comp = np.abs(sum(K.conj().T @ K for K in ks) - np.eye(4)).max()
        if v["hermiticity"] > 1e-10 or v["min_eigenvalue"] < -1e-7 or v["tp_error"] > 1e-6 or comp > 1e-6:
            bad += 1
    depol = avg_gate_fidelity(QuantumChannel(np.eye(16) / 4), U)
    passed = worst < C7_TOL and depol == 0.25 and bad == 0
    acceptance(7, "channel oracles", passed,
               f"closed form vs Haar average max difference {worst:.1e} (limit {C7_TOL}); depolarizing F = "
               f"{depol!r}; {bad} of {len(channels)} channels violate CP/TP/completeness")
    assert passed


def test_criterion_8_donor_physics(acceptance):
    p, bi = load_species("phosphorus"), load_species("bismuth")
    g_p = transition_gradient(p, 0.35)
    B, tr = lowest_field_transition(bi, 9.7e9)
    ratio = transition_gradient(bi, B, tr) / p.gamma_e
    ens = ensemble_coupling(200.0, 225)
    lam = gradient_coupling(p, MechanicalMode(100e-15), 1e6, 0.35)
    checks = {
        "I=0 gradient": g_p == 28e9,
        "bismuth ratio": abs(ratio - C8_BI_RATIO) <= C8_BI_TOL,
        "ensemble": ens == 3000.0,
        "gradient coupling": math.isclose(lam, 2800.0, rel_tol=1e-12),
    }
    passed = all(checks.values())
    acceptance(8, "donor physics", passed,
               f"I=0 gradient {g_p:.6g} Hz/T; bismuth {tr} at {B * 1e3:.2f} mT: gradient "
               f"{ratio:.4f} gamma_e (target {C8_BI_RATIO} +/- {C8_BI_TOL}); ensemble {ens!r} Hz; "
               f"gradient coupling {lam:.6g} Hz; failing: {[k for k, v in checks.items() if not v] or 'none'}")
    assert passed


@pytest.mark.slow
def test_criterion_9_integrity_suite(acceptance):
    failures, names = [], []
    for path in sorted(CONFIGS.glob("*.toml")):
        names.append(path.stem)
        for c in integrity_checks(load_config(path)):
            if not c.passed:
                failures.append(f"{path.stem}: {c.line()}")
    passed = not failures
    acceptance(9, "integrity suite", passed,
               f"{len(names)} configs ({', '.join(names)}); " + ("; ".join(failures) or "all checks pass"))
    assert passed


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
