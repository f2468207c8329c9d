import math

import numpy as np
import pytest

from hypercluster import apparatus, qcore, states, verify
from hypercluster.apparatus import MeasurementSetting, PhotonSetting
from hypercluster.states import NoiseParams


def same_up_to_phase(a, b, atol=1e-12):
    k = np.flatnonzero(np.abs(b) > 1e-9)[0]
    phase = a.flat[k] / b.flat[k]
    return abs(abs(phase) - 1) < atol and np.allclose(a, phase * b, atol=atol)


def test_setting_for_polarization_x():
    s = apparatus.setting_for("X_A")
    assert s.a.theta_q == pytest.approx(math.pi / 4)
    assert s.a.theta_h == pytest.approx(math.pi / 8)
    assert apparatus.setting_for("X_A", alternate=True).a.theta_h == pytest.approx(3 * math.pi / 8)


def test_setting_for_path_observables():
    s = apparatus.setting_for("y_B")
    assert s.b.bs_present and s.b.phi == pytest.approx(math.pi / 2)
    assert not s.a.bs_present
    assert apparatus.setting_for("x_A").a.phi == pytest.approx(0.0)
    assert not apparatus.setting_for("z_A").a.bs_present


def test_setting_for_rejects_unknown_observable():
    with pytest.raises(ValueError):
        apparatus.setting_for("W_A")


def test_beam_splitter_routes_path_superpositions():
    u = apparatus.path_unitary(0.0, True)
    plus = np.array([1, 1]) / math.sqrt(2)
    minus = np.array([1, -1]) / math.sqrt(2)
    assert abs((u @ plus)[0]) ** 2 == pytest.approx(1.0)
    assert abs((u @ minus)[1]) ** 2 == pytest.approx(1.0)
    phi = 0.7
    u = apparatus.path_unitary(phi, True)
    assert abs((u @ np.array([1, np.exp(-1j * phi)]) / math.sqrt(2))[0]) ** 2 == pytest.approx(1.0)


def test_no_beam_splitter_is_identity():
    assert np.array_equal(apparatus.path_unitary(1.3, False), np.eye(2))


def test_half_wave_plate_on_axis():
    assert same_up_to_phase(apparatus.waveplate_jones("half", 0.0), np.diag([1, -1]).astype(complex))
    with pytest.raises(ValueError):
        apparatus.waveplate_jones("full", 0.0)


def test_optics_are_unitary(rng):
    for _ in range(100):
        t = rng.uniform(-2 * math.pi, 2 * math.pi, size=4)
        for m in (
            apparatus.waveplate_jones("quarter", t[0]),
            apparatus.waveplate_jones("half", t[1]),
            apparatus.bs_transform(t[2], t[3]),
        ):
            assert np.allclose(m.conj().T @ m, np.eye(len(m)), atol=1e-12)


def test_photon_setting_wraps_angles():
    assert PhotonSetting(theta_q=2 * math.pi + 0.1).theta_q == pytest.approx(0.1)
    with pytest.raises(ValueError):
        PhotonSetting(phi=float("inf"))
    with pytest.raises(ValueError):
        MeasurementSetting(delay_x=float("nan"))


def test_maximally_mixed_outcomes_uniform():
    probs = apparatus.outcome_probabilities(qcore.maximally_mixed(), apparatus.setting_for("X_Ax_AY_By_B"))
    assert np.allclose(probs.probs, 1 / 16)
    assert sum(probs.as_dict().values()) == pytest.approx(1.0)


@pytest.mark.parametrize("alternate", [False, True])
def test_parity_route_matches_matrix_route(rng, alternate):
    for _ in range(200):
        rho = qcore.random_density(rng)
        for label in verify.TABLE_ORDER:
            direct = qcore.expectation(rho, label)
            assert apparatus.measured_expectation(rho, label, alternate) == pytest.approx(direct, abs=1e-9)


def test_alternate_hwp_swaps_ports():
    for label in ("X_A", "Y_B", "Z_A"):
        e0 = apparatus.port_eigenvalues(label, apparatus.setting_for(label))
        e1 = apparatus.port_eigenvalues(label, apparatus.setting_for(label, alternate=True))
        assert np.array_equal(e0, -e1)


def test_port_eigenvalues_reject_mismatched_setting():
    with pytest.raises(ValueError):
        apparatus.port_eigenvalues("X_A", apparatus.setting_for("Z_A"))


def test_signed_observable_flips_parity():
    rho = qcore.density(states.cluster_state())
    assert apparatus.measured_expectation(rho, "-Y_AY_Bz_B") == pytest.approx(1.0)


def test_coherence_envelope():
    tau, fwhm = apparatus.coherence_envelope(6.0, 728.0)
    assert tau == pytest.approx(150.0, rel=1e-9)
    assert fwhm == pytest.approx(tau * 1e-15 * 299_792_458.0 * 1e6)
    assert apparatus.coherence_envelope(12.0)[0] == pytest.approx(tau / 2)
    assert apparatus.envelope(0.0, fwhm) == 1.0
    assert apparatus.envelope(fwhm / 2, fwhm) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        apparatus.coherence_envelope(0.0)


def test_ideal_scan_dip_and_peak():
    rho = qcore.density(states.cluster_state())
    assert apparatus.delay_scan(rho, "H", [0.0], pair=("l", "r"))[0] == pytest.approx(0.0, abs=1e-12)
    assert apparatus.delay_scan(rho, "H", [0.0], pair=("l", "l"))[0] == pytest.approx(2.0)
    assert apparatus.delay_scan(rho, "H", [5000.0], baseline=3.0)[0] == pytest.approx(3.0)


def test_h_and_v_traces_are_complementary():
    rho = qcore.density(states.cluster_state())
    x = np.linspace(-200, 200, 81)
    for pair in (("l", "r"), ("l", "l")):
        total = apparatus.delay_scan(rho, "H", x, pair=pair) + apparatus.delay_scan(rho, "V", x, pair=pair)
        assert np.allclose(total, 2.0, atol=1e-12)


def test_ideal_visibility_is_one():
    rho = qcore.density(states.cluster_state())
    assert apparatus.scan_visibility(rho, "H") == pytest.approx(1.0, abs=1e-9)
    assert apparatus.scan_visibility(rho, "V") == pytest.approx(1.0, abs=1e-9)


def test_visibility_follows_path_coherence():
    for mu in (0.2, 0.6, 0.9):
        rho = states.apply_noise(states.cluster_state(), NoiseParams(0.8, mu, 0.0))
        assert apparatus.scan_visibility(rho) == pytest.approx(2 * mu * 0.8 / 1.8, abs=1e-12)


def test_scan_without_interference_is_flat():
    rho = states.apply_noise(states.cluster_state(), NoiseParams(1.0, 0.0, 0.0))
    assert np.allclose(apparatus.delay_scan(rho, "H", np.linspace(-50, 50, 11)), 1.0)


def test_scan_rejects_bad_input():
    rho = qcore.density(states.cluster_state())
    with pytest.raises(ValueError):
        apparatus.delay_scan(rho, "D", [0.0])
    with pytest.raises(ValueError):
        apparatus.delay_scan(rho, "H", [float("nan")])


def test_fit_scan_recovers_shape():
    rho = states.apply_noise(states.cluster_state(), NoiseParams(0.9, 0.85, 0.0))
    x = np.linspace(-150, 150, 121)
    vis, fwhm = apparatus.fit_scan(x, apparatus.delay_scan(rho, "H", x, fwhm_um=40.0))
    near = apparatus.delay_scan(rho, "H", [0.0])[0]
    assert vis == pytest.approx(near - 1.0, abs=1e-6)
    assert fwhm == pytest.approx(40.0, rel=1e-6)


def test_scan_csv_layout():
    rows = apparatus.scan_table(qcore.density(states.cluster_state()), [-10.0, 0.0, 10.0])
    text = apparatus.scan_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == "delta_x_um,rate_H,rate_V"
    assert len(lines) == 4
    assert lines[2] == "0,0,2"
