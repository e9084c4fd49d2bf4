import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinbus.donors import (DonorSpecies, FieldProfile, MechanicalMode, ensemble_coupling, esr_transitions,
                            gradient_coupling, interp, labeled_levels, load_profile, load_species,
                            lowest_field_transition, spin_hamiltonian, strain_coupling, transition_frequency,
                            transition_gradient, zero_point_displacement)
from spinbus.errors import InvalidParameterError, ProfileParseError, ProfileRangeError, StencilError


@pytest.fixture(scope="module")
def bismuth():
    return load_species("bismuth")


@pytest.fixture(scope="module")
def phosphorus():
    return load_species("phosphorus")


def test_bundled_species(bismuth, phosphorus):
    assert bismuth.I == 4.5 and bismuth.n_levels == 20
    assert phosphorus.I == 0 and phosphorus.n_levels == 2
    assert load_species("phosphorus_hf").I == 0.5


def test_species_file_errors(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("name = x\ngamma_e = 1e9\nI = 1/2\nfoo = 3\n")
    with pytest.raises(ProfileParseError, match=":4:"):
        load_species(p)
    p.write_text("name = x\ngamma_e = abc\n")
    with pytest.raises(ProfileParseError, match=":2:"):
        load_species(p)
    p.write_text("name = x\ngamma_e = 1e9\n")
    with pytest.raises(ProfileParseError, match="missing"):
        load_species(p)
    with pytest.raises(FileNotFoundError):
        load_species("unobtainium")


def test_species_validation():
    with pytest.raises(InvalidParameterError):
        DonorSpecies("x", 1e9, 0, 0.3, 0, 0)
    with pytest.raises(InvalidParameterError):
        DonorSpecies("x", -1e9, 0, 0.5, 0, 0)


def test_spinless_nucleus_splitting(phosphorus):
    for B in (0.01, 0.35, 1.2):
        e = np.linalg.eigvalsh(spin_hamiltonian(phosphorus, B).matrix)
        assert math.isclose(e[1] - e[0], 28e9 * B, rel_tol=1e-14)
    H = spin_hamiltonian(phosphorus, 0.5).matrix
    assert np.allclose(H, 0.5 * 28e9 * 0.5 * np.diag([1, -1]))


def test_bismuth_zero_field_multiplets(bismuth):
    e = np.linalg.eigvalsh(spin_hamiltonian(bismuth, 0.0).matrix)
    A, I = bismuth.A_hf, bismuth.I
    lower, upper = e[:9], e[9:]
    assert np.ptp(lower) < 1e-3 and np.ptp(upper) < 1e-3
    assert math.isclose(upper[0] - lower[0], A * (I + 0.5), rel_tol=1e-12)
    # F = I - 1/2 at -A(I+1)/2, F = I + 1/2 at +A I/2
    assert math.isclose(lower[0], -A * (I + 1) / 2, rel_tol=1e-12)
    assert math.isclose(upper[0], A * I / 2, rel_tol=1e-12)


def test_hamiltonian_rejects_negative_field(bismuth):
    with pytest.raises(InvalidParameterError):
        spin_hamiltonian(bismuth, -0.1)


def test_labels_cover_spectrum(bismuth):
    for B in (0.0, 0.05, 0.4):
        lv = labeled_levels(bismuth, B)
        assert len(lv) == 20
        assert np.allclose(sorted(lv.values()), np.linalg.eigvalsh(spin_hamiltonian(bismuth, B).matrix))


def test_levels_continuous_in_field(bismuth):
    Bs = np.linspace(0.001, 0.5, 1001)
    dB = Bs[1] - Bs[0]
    E = np.array([np.linalg.eigvalsh(spin_hamiltonian(bismuth, b).matrix) for b in Bs])
    slope = 0.5 * (bismuth.gamma_e + bismuth.gamma_n * 2 * bismuth.I)
    assert np.abs(np.diff(E, axis=0)).max() <= 2 * slope * dB


def test_spinless_gradient_exact(phosphorus):
    for B in (1e-3, 0.3, 2.0):
        assert transition_gradient(phosphorus, B) == 28e9


def test_bismuth_paschen_back_limit(bismuth):
    ge, gn = bismuth.gamma_e, bismuth.gamma_n
    for tr in esr_transitions(bismuth):
        g = transition_gradient(bismuth, 50.0, tr)
        assert abs(g - ge) < 0.01 * ge
    # the nuclear Zeeman term shifts both ESR levels equally, so the asymptote is gamma_e
    for tr in esr_transitions(bismuth):
        assert abs(transition_gradient(bismuth, 500.0, tr) - ge) < 0.1 * gn


def test_bismuth_gradients_differ_at_low_field(bismuth):
    gs = [transition_gradient(bismuth, 0.1, tr) for tr in esr_transitions(bismuth)]
    assert np.ptp(gs) > 0.05 * bismuth.gamma_e


def test_gradient_matches_slope(bismuth):
    B, tr = lowest_field_transition(bismuth, 9.7e9)
    g = transition_gradient(bismuth, B, tr)
    h = 1e-4
    slope = (transition_frequency(bismuth, B + h, tr) - transition_frequency(bismuth, B - h, tr)) / (2 * h)
    assert math.isclose(g, slope, rel_tol=1e-6)
    assert math.isclose(transition_frequency(bismuth, B, tr), 9.7e9, rel_tol=1e-10)


def test_gradient_stencil_errors(bismuth):
    with pytest.raises(InvalidParameterError):
        transition_gradient(bismuth, 0.0)
    with pytest.raises(StencilError):
        transition_gradient(bismuth, 5e-7)


def test_unknown_transition(bismuth):
    with pytest.raises(InvalidParameterError):
        transition_frequency(bismuth, 0.1, ((0.5, 9.0), (-0.5, 9.0)))


def test_zero_point_displacement():
    m, f = 1e-15, 1e6
    x = zero_point_displacement(m, f)
    assert math.isclose(x, math.sqrt(1.054571817e-34 / (2 * m * 2 * math.pi * f)), rel_tol=1e-9)
    MechanicalMode(x, f, m)
    MechanicalMode(1.04 * x, f, m)
    with pytest.raises(InvalidParameterError):
        MechanicalMode(1.2 * x, f, m)
    with pytest.raises(InvalidParameterError):
        MechanicalMode(0.0)


def test_gradient_coupling_arithmetic(phosphorus):
    mode = MechanicalMode(100e-15)
    assert math.isclose(gradient_coupling(phosphorus, mode, 1e6, 0.35), 2800.0, rel_tol=1e-12)
    assert gradient_coupling(phosphorus, mode, 0.0, 0.35) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(1e3, 1e7), st.floats(1.5, 10))
def test_couplings_linear(value, k):
    p = load_species("phosphorus")
    mode = MechanicalMode(1e-13)
    assert math.isclose(gradient_coupling(p, mode, k * value, 0.3), k * gradient_coupling(p, mode, value, 0.3),
                        rel_tol=1e-12)
    s = value * 1e-15
    assert math.isclose(strain_coupling(p, k * s), k * strain_coupling(p, s), rel_tol=1e-12)


def test_strain_coupling(bismuth):
    assert strain_coupling(bismuth, 0.0) == 0.0
    assert abs(strain_coupling(bismuth, 1.82e-8) - 400.0) < 1.0
    with pytest.raises(InvalidParameterError):
        strain_coupling(bismuth, float("nan"))


def test_ensemble_coupling():
    assert ensemble_coupling(123.0, 1) == 123.0
    assert ensemble_coupling(100.0, 4) == 200.0
    assert ensemble_coupling(200.0, 225) == 3000.0
    for n in (0, 2.5, -3):
        with pytest.raises(InvalidParameterError):
            ensemble_coupling(1.0, n)


@given(st.integers(1, 10000))
def test_ensemble_square_linear(n):
    assert math.isclose(ensemble_coupling(7.0, n) ** 2, 49.0 * n, rel_tol=1e-12)


# --- profiles --------------------------------------------------------------------

def write_profile(tmp_path, rows, header="# test\n"):
    p = tmp_path / "profile.txt"
    p.write_text(header + "".join(f"{x} {y}\n" for x, y in rows))
    return p


def test_profile_exact_at_knots(tmp_path):
    xs = np.linspace(1e-8, 4e-7, 9)
    ys = 1e6 / (1 + xs / 1e-7)
    prof = load_profile(write_profile(tmp_path, zip(xs, ys)), "gradient")
    for x, y in zip(xs, ys):
        assert interp(prof, x) == y
    assert prof.note == "test"


def test_profile_linear_midpoint(tmp_path):
    xs = np.array([0.0, 1.0, 2.0, 3.0])
    prof = load_profile(write_profile(tmp_path, zip(xs, 2 * xs + 1)), "strain")
    assert math.isclose(interp(prof, 1.5), 4.0, rel_tol=1e-12)
    assert np.allclose(interp(prof, [0.5, 2.5]), [2.0, 6.0])


def test_profile_range_error(tmp_path):
    prof = load_profile(write_profile(tmp_path, [(0.0, 1.0), (1.0, 2.0)]), "strain")
    with pytest.raises(ProfileRangeError):
        interp(prof, 1.0001)
    with pytest.raises(ProfileRangeError):
        interp(prof, -1e-9)


def test_profile_parse_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("# c\n0 1\n1 x\n")
    with pytest.raises(ProfileParseError, match="line 3"):
        load_profile(p, "gradient")
    p.write_text("0 1\n1 2 3\n")
    with pytest.raises(ProfileParseError, match="line 2"):
        load_profile(p, "gradient")
    p.write_text("0 1\n1 2\n1 3\n")
    with pytest.raises(ProfileParseError, match="line 3"):
        load_profile(p, "gradient")
    with pytest.raises(InvalidParameterError):
        load_profile(p, "temperature")
    with pytest.raises(ProfileParseError):
        FieldProfile(np.array([0.0, 1.0]), np.array([1.0, np.inf]), "strain")


def test_bundled_magnet_profile(phosphorus):
    prof = load_profile("magnet_310nm", "gradient")
    assert np.all(np.diff(prof.distance) > 0)
    assert "stand-in" in prof.note
    lam = gradient_coupling(phosphorus, MechanicalMode(100e-15), interp(prof, 50e-9), 0.35)
    assert lam >= 3000.0
