import numpy as np
import pytest

from hypercluster import qcore, states, verify
from hypercluster.qcore import I2, PauliString
from hypercluster.states import NoiseParams

POL_ONLY = ("Z_AZ_B", "X_AX_Bz_B", "Y_AY_Bz_B", "X_Az_AX_B", "Y_Az_AY_B")
COHERENCE = ("Z_Ax_Ax_B", "x_AZ_Bx_B", "Z_Ay_Ay_B", "X_Ax_AY_By_B", "Y_Ax_AX_By_B")


def twirl_polarization(rho):
    """Average over all two-qubit Paulis on the polarization slots."""
    acc = np.zeros_like(rho)
    for a in "IXYZ":
        for b in "IXYZ":
            p = PauliString(a + b + "II").matrix()
            acc += p @ rho @ p
    return acc / 16


def dephase_paths(rho):
    """Keep only blocks diagonal in the path basis."""
    acc = np.zeros_like(rho)
    for k in range(4):
        proj = np.kron(np.eye(4), np.diag(np.eye(4)[k]))
        acc += proj @ rho @ proj
    return acc


def noise_oracle(psi, v, mu, z):
    rho = qcore.density(psi)
    rho = v * rho + (1 - v) * twirl_polarization(rho)
    rho = mu * rho + (1 - mu) * dephase_paths(rho)
    leak = np.kron(np.eye(4) / 4, np.diag([0.5, 0, 0, 0.5]))
    return (1 - z) * rho + z * leak


def test_bell_fragments():
    s = 1 / np.sqrt(2)
    # polarization fragment in slot order (B, A); phi- is symmetric so the order is moot
    assert np.allclose(states.bell_state("phi-", "polarization"), [s, 0, 0, -s])
    assert np.allclose(states.bell_state("psi+", "momentum"), [0, s, s, 0])
    assert qcore.overlap(states.bell_state("phi+"), states.bell_state("phi-")) < 1e-15
    assert np.allclose(states.bell_state("Φ−"), states.bell_state("phi-"))
    with pytest.raises(ValueError):
        states.bell_state("chi")
    with pytest.raises(ValueError):
        states.bell_state("phi+", "spin")


def test_psi_minus_sign_is_kept_per_photon():
    pol = states.bell_state("psi-", "polarization")
    path = states.bell_state("psi-", "momentum")
    # |0>_A|1>_B carries the minus sign in both orderings
    assert pol[2] < 0 and path[1] < 0


def test_hyperentangled_correlations():
    xi = states.hyperentangled_state()
    assert qcore.expectation(xi, "Z_AZ_B") == pytest.approx(1.0)
    assert qcore.expectation(xi, "z_Az_B") == pytest.approx(-1.0)
    assert verify.witness(xi).value == pytest.approx(1.0, abs=1e-12)


def test_hw_gate_makes_cluster_state():
    xi = states.hyperentangled_state()
    assert qcore.overlap(states.apply_hw_cp(xi), states.cluster_state()) == pytest.approx(1.0, abs=1e-12)
    assert qcore.overlap(states.apply_hw_cp(states.apply_hw_cp(xi)), xi) == pytest.approx(1.0, abs=1e-12)


def test_hw_gate_is_controlled_z_on_a_photon():
    cz = 0.5 * (np.eye(16) + PauliString("IZII").matrix() + PauliString("IIZI").matrix()
                - PauliString("IZZI").matrix())
    assert np.allclose(states.hw_cp_matrix(), cz)


def test_hw_gate_preserves_inner_products(rng):
    u = states.hw_cp_matrix()
    assert np.allclose(u.conj().T @ u, np.eye(16))
    for _ in range(50):
        a, b = qcore.random_state(rng), qcore.random_state(rng)
        assert np.vdot(states.apply_hw_cp(a), states.apply_hw_cp(b)) == pytest.approx(np.vdot(a, b), abs=1e-12)


def test_cluster_state_amplitudes():
    c4 = states.cluster_state()
    nonzero = {"".join(map(str, qcore.basis_bits(k))): c4[k] for k in np.flatnonzero(np.abs(c4) > 1e-12)}
    assert nonzero == pytest.approx({"0010": 0.5, "1110": 0.5, "0001": 0.5, "1101": -0.5})


@pytest.mark.parametrize("label, lam", verify.STABILIZERS)
def test_cluster_eigenvalue_equations(label, lam):
    c4 = states.cluster_state()
    op = PauliString.parse(label).matrix()
    assert np.linalg.norm(op @ c4 - lam * c4) < 1e-10


def test_logical_map():
    assert qcore.overlap(states.logical_map(states.cluster_state()), states.reference_linear_cluster()) == pytest.approx(1.0)
    assert np.allclose(states.logical_map(qcore.basis_state("0000")), qcore.basis_state("0010"))


def test_reference_cluster_is_a_graph_state():
    # Hadamards on the two end qubits give the +1 eigenstate of the line generators
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    graph = qcore.tensor4([h, I2, I2, h]) @ states.reference_linear_cluster()
    for g in ("XZII", "ZXZI", "IZXZ", "IIZX"):
        assert np.allclose(PauliString(g).matrix() @ graph, graph)


def test_photon_ket_matches_slot_order():
    # |V r>_A |H l>_B : q1 = B pol H, q2 = A pol V, q3 = A path r, q4 = B path l
    assert np.allclose(states.photon_ket("V", "r", "H", "l"), qcore.basis_state("0110"))


def test_noise_identity_point():
    rho = states.apply_noise(states.cluster_state(), NoiseParams.ideal())
    assert np.allclose(rho, qcore.density(states.cluster_state()), atol=1e-15)


def test_full_polarization_noise_kills_polarization_correlations():
    rho = states.apply_noise(states.cluster_state(), NoiseParams(0.0, 0.37, 0.0))
    assert qcore.expectation(rho, "X_Az_AX_B") == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("v, mu, z", [(0.9, 0.8, 0.0), (0.7, 0.95, 0.1), (0.3, 0.2, 0.6), (1.0, 0.0, 1.0)])
def test_noise_matches_channel_oracle(v, mu, z):
    c4 = states.cluster_state()
    assert np.allclose(states.apply_noise(c4, NoiseParams(v, mu, z)), noise_oracle(c4, v, mu, z), atol=1e-14)


@pytest.mark.parametrize("v, mu, z", [(0.9, 0.8, 0.0), (0.85, 0.9, 0.05), (0.5, 0.3, 0.4)])
def test_noise_closed_forms(v, mu, z):
    rho = states.apply_noise(states.cluster_state(), NoiseParams(v, mu, z))
    c4 = states.cluster_state()
    for label in POL_ONLY:
        ideal = qcore.expectation(c4, label)
        assert qcore.expectation(rho, label) == pytest.approx((1 - z) * v * ideal, abs=1e-12)
    for label in COHERENCE:
        ideal = qcore.expectation(c4, label)
        assert qcore.expectation(rho, label) == pytest.approx((1 - z) * v * mu * ideal, abs=1e-12)
    assert qcore.expectation(rho, "z_Az_B") == pytest.approx(-(1 - 2 * z), abs=1e-12)


def test_noise_output_is_physical(rng):
    c4 = states.cluster_state()
    for _ in range(1000):
        rho = states.apply_noise(c4, NoiseParams(*rng.uniform(0, 1, size=3)))
        assert abs(np.trace(rho).real - 1) < 1e-12
        assert np.allclose(rho, rho.conj().T)
        assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_noise_params_validation():
    for bad in [(-0.1, 1, 0), (1, 1.1, 0), (1, 1, float("nan"))]:
        with pytest.raises(ValueError):
            NoiseParams(*bad)
    p = NoiseParams(np.float64(0.5), 1, 0)
    assert type(p.v_pol) is float
    assert p.as_dict() == {"v_pol": 0.5, "mu_mom": 1.0, "z_err": 0.0}


def test_sector_conditioning_of_cluster():
    rho = qcore.density(states.cluster_state())
    assert states.sector_probability(rho, "rl") == pytest.approx(0.5)
    for sector, kind in (("rl", "phi+"), ("lr", "phi-")):
        pol = states.sector_polarization_state(rho, sector)
        assert np.allclose(pol, qcore.density(states.bell_state(kind)), atol=1e-12)
        assert np.allclose(states.sector_target(sector), states.bell_state(kind))


@pytest.mark.parametrize("v, mu, z", [(0.9, 0.9, 0.0), (0.6, 0.1, 0.3)])
def test_sector_fidelity_closed_form(v, mu, z):
    rho = states.apply_noise(states.cluster_state(), NoiseParams(v, mu, z))
    for sector in ("rl", "lr"):
        f = qcore.fidelity(states.sector_polarization_state(rho, sector), states.sector_target(sector))
        assert f == pytest.approx((1 + 3 * v) / 4, abs=1e-12)


def test_sector_conditioning_errors():
    with pytest.raises(ValueError):
        states.sector_polarization_state(qcore.basis_state("0000"), "rl")
    with pytest.raises(ValueError):
        states.sector_polarization_state(qcore.density(states.cluster_state()), "ll")
