"""Smoke tests for the ionchain python module."""

import json
import math

import pytest

import ionchain as ic


CA = ic.IonSpecies("Ca40", 40.0, 1)
FZ = ic.Frequency.from_khz(2.95, 0.13)


def test_version():
    assert ic.__version__


def test_length_scale():
    l = ic.length_scale(CA, ic.Frequency.from_khz(2.95))
    assert l.um == pytest.approx(216.23024747533, rel=1e-9)


def test_frequency_units():
    f = ic.Frequency.from_khz(2.95, 0.13)
    assert f.rad_per_s == pytest.approx(2 * math.pi * 2950.0)
    assert f.khz == pytest.approx(2.95)
    with pytest.raises(ValueError):
        ic.Frequency.from_khz(-1.0)


def test_species_registry():
    reg = ic.SpeciesRegistry()
    assert reg.contains("Ca40")
    assert reg.get("Ca40").mass_amu == 40.0
    with pytest.raises(ValueError):
        reg.get("nope")


def test_chain_laws():
    l = ic.length_scale(CA, ic.Frequency.from_khz(2.95))
    assert ic.min_spacing_dubin(155, l).um == pytest.approx(24.329230986, rel=1e-9)
    assert ic.min_spacing_james(155, l).um == pytest.approx(26.028083301, rel=1e-9)
    assert ic.half_length(155, l).um == pytest.approx(2828.273102, rel=1e-8)
    assert ic.homogeneity_dispersion(30, 155) == pytest.approx(0.016649323621, rel=1e-9)
    assert ic.central_count_for_dispersion(155, 0.02) == 32


def test_inversions():
    l = ic.length_scale(CA, FZ)
    dubin = ic.estimate_n_dubin(ic.Length.from_um(24.1, 0.2), l)
    assert dubin.n_int == 157
    james = ic.estimate_n_james(ic.Length.from_um(24.1, 0.2), l)
    assert 176 <= james.n_int <= 179
    with pytest.raises(ValueError):
        ic.estimate_n_dubin(ic.Length.from_um(1e6), l)


def test_equilibrium_solver():
    cfg = ic.solve_equilibrium(5)
    assert cfg.n_ions == 5
    pos = cfg.positions
    assert pos == sorted(pos)
    for i in range(5):
        assert pos[i] == pytest.approx(-pos[4 - i], abs=1e-10)
    assert ic.min_spacing_numeric(cfg) == pytest.approx(0.822100757, rel=1e-8)
    assert ic.chain_energy(pos) > 0
    grad = ic.chain_gradient(pos)
    assert max(abs(g) for g in grad) < 1e-11


def test_zigzag_threshold():
    assert ic.zigzag_critical_ratio(2).critical_ratio == pytest.approx(1.0, abs=1e-10)
    assert ic.zigzag_critical_ratio(10).critical_ratio == pytest.approx(0.047347914, rel=1e-6)


def test_frame_pipeline_round_trip():
    mag, pixel, psf = 11.58, 13e-6, 2.0e-6
    span = 1024 * pixel / mag
    ions = [span / 2 + (i - 4.5) * 28e-6 for i in range(10)]
    frame = ic.generate_synthetic_frame(ions, mag, pixel, psf, 200.0)
    assert not frame.clipped_ions
    init = ic.detect_peaks(frame.profile, 50.0)
    assert len(init) == 10
    fitted = ic.fit_multigaussian(frame.profile, init)
    for peak, z in zip(fitted.peaks, ions):
        assert peak.center_px == pytest.approx(mag * z / pixel, abs=0.01)


def test_stitch_two_frames():
    mag, pixel, psf = 11.58, 13e-6, 2.0e-6
    ions = [i * 30e-6 for i in range(30)]
    frames = []
    for nominal, true in ((-130e-6, -130e-6), (470e-6, 473e-6)):
        frame = ic.generate_synthetic_frame(ions, mag, pixel, psf, 150.0,
                                            frame_offset_m=true, background=2.0)
        profile = ic.FluorescenceProfile(frame.profile.intensities, pixel, nominal)
        fitted = ic.fit_multigaussian(profile, ic.detect_peaks(profile, 40.0))
        frames.append(ic.FramePeaks(profile, fitted))
    stitched = ic.stitch_frames(frames, mag)
    assert stitched.total_count == 30
    assert stitched.fitted_offsets_m[1] == pytest.approx(473e-6, rel=1e-3)


def test_estimate_report():
    report = ic.estimate_report(ic.Length.from_um(24.1, 0.2), CA, FZ)
    assert report.dubin.n_int == 157
    assert report.dominant == ic.UncertaintySource.axial_frequency
    assert 0.040 < report.rel_sigma_total < 0.055
    payload = json.loads(report.to_json())
    assert payload["schema_version"] == 1
    assert payload["dubin"]["n"] == 157
    assert payload["inputs"]["species"]["name"] == "Ca40"


def test_trap_model():
    trap = ic.TrapModel(omega_z=ic.Frequency.from_khz(2.95, 0.13),
                        omega_x=ic.Frequency.from_khz(157.0, 1.0))
    fr = ic.radial_frequency(trap)
    assert fr.khz == pytest.approx(156.9861419, rel=1e-8)
    rf = ic.omega_x_from_vrf(1000.0, ic.TrapModel())
    assert not rf.degenerate
    assert rf.omega_x.khz == pytest.approx(78.5)
    assert ic.omega_x_from_vrf(0.0, ic.TrapModel()).degenerate


def test_central_average_and_window():
    samples = ic.spacings_with_midpoints(ic.solve_equilibrium(155), 216.23e-6)
    n_a = ic.choose_n_central(samples, 0.0167, 155)
    assert n_a == 30
    avg = ic.average_central_spacing(samples, n_a)
    assert avg.mean.um == pytest.approx(25.0934, rel=1e-4)


def test_density_fit():
    samples = ic.spacings_with_midpoints(ic.solve_equilibrium(155), 216.23e-6)
    fit = ic.fit_density_profile(samples, 155)
    cfg = ic.solve_equilibrium(155)
    extent = (cfg.positions[-1] - cfg.positions[0]) * 216.23e-6
    assert 2 * fit.params.half_length.meters > extent
