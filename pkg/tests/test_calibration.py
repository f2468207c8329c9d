import json

import numpy as np
import pytest
from scipy.optimize import minimize

from hypercluster import calibration, qcore, states
from hypercluster.calibration import Target
from hypercluster.states import NoiseParams

POL_ONLY = ("Z_AZ_B", "X_Az_AX_B", "Y_Az_AY_B", "X_AX_Bz_B", "Y_AY_Bz_B")
COHERENCE = ("Z_Ax_Ax_B", "x_AZ_Bx_B", "Z_Ay_Ay_B", "X_Ax_AY_By_B", "Y_Ax_AX_By_B")


def closed_form_table_fit(targets):
    """The table model is linear in a = (1-z)v, b = (1-z)v mu and z separately."""
    c4 = states.cluster_state()
    vals = {t.observable: t.value for t in targets}
    a = np.mean([vals[o] * qcore.expectation(c4, o) for o in POL_ONLY])
    b = np.mean([vals[o] * qcore.expectation(c4, o) for o in COHERENCE])
    z = (1 + vals["z_Az_B"]) / 2
    return a / (1 - z), b / a, z


def test_bundled_tables():
    table = calibration.table1_targets()
    assert len(table) == 11
    assert {t.observable for t in table} == set(POL_ONLY + COHERENCE + ("z_Az_B",))
    assert [t.observable for t in calibration.reported_targets()] == list(calibration.DERIVED_KEYS)


def test_ideal_targets_give_noiseless_point():
    fit = calibration.calibrate_noise(calibration.ideal_targets())
    assert fit.params.v_pol == pytest.approx(1.0, abs=1e-6)
    assert fit.params.mu_mom == pytest.approx(1.0, abs=1e-6)
    assert fit.params.z_err == pytest.approx(0.0, abs=1e-6)
    assert np.max(np.abs(fit.residuals)) < 1e-6


def test_table_fit_matches_closed_form():
    targets = calibration.table1_targets()
    fit = calibration.calibrate_noise(targets)
    v, mu, z = closed_form_table_fit(targets)
    assert fit.params.v_pol == pytest.approx(v, abs=1e-7)
    assert fit.params.mu_mom == pytest.approx(mu, abs=1e-7)
    assert fit.params.z_err == pytest.approx(z, abs=1e-7)
    assert fit.converged


def test_table_fit_sanity_anchors():
    fit = calibration.calibrate_noise(calibration.table1_targets())
    assert 0.90 <= fit.params.v_pol <= 0.93
    assert 0.88 <= fit.params.mu_mom <= 0.92
    assert np.max(np.abs(fit.residuals)) <= 0.05


def test_full_fit_agrees_with_direct_search(calibrated):
    targets = calibrated.targets
    keys = [t.observable for t in targets]
    values = np.array([t.value for t in targets])

    def cost(x):
        if np.any(x < 0) or np.any(x > 1):
            return 1e3
        return float(np.sum((calibration.model_values(NoiseParams(*x), keys) - values) ** 2))

    best = minimize(cost, [0.8, 0.8, 0.05], method="Nelder-Mead",
                    options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
    got = np.array([calibrated.params.v_pol, calibrated.params.mu_mom, calibrated.params.z_err])
    assert cost(got) <= best.fun + 1e-12
    assert got[:2] == pytest.approx(best.x[:2], abs=1e-4)


def test_full_fit_reproduces_reported_numbers(calibrated):
    residuals = calibrated.residual_map()
    assert max(abs(residuals[t.observable]) for t in calibration.table1_targets()) <= 0.05
    assert abs(residuals["fidelity_rl"]) <= 0.02
    assert abs(residuals["fidelity_lr"]) <= 0.02
    assert abs(residuals["visibility"]) <= 0.04


def test_model_values_closed_forms():
    p = NoiseParams(0.9, 0.8, 0.02)
    vals = calibration.model_values(p, ["fidelity_rl", "visibility", "z_Az_B"])
    assert vals[0] == pytest.approx((1 + 3 * 0.9) / 4)
    assert vals[2] == pytest.approx(-(1 - 2 * 0.02))


def test_result_serialization(calibrated):
    doc = calibrated.as_dict()
    json.dumps(doc)
    assert set(doc["params"]) == {"v_pol", "mu_mom", "z_err"}
    assert len(doc["targets"]) == 14


def test_too_few_targets():
    with pytest.raises(ValueError):
        calibration.calibrate_noise(calibration.table1_targets()[:10])


def test_load_targets(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps([{"observable": "Z_AZ_B", "value": 0.9}, {"observable": "visibility", "value": 0.8}]))
    assert calibration.load_targets(path) == [Target("Z_AZ_B", 0.9), Target("visibility", 0.8)]
    path.write_text(json.dumps([{"value": 0.9}]))
    with pytest.raises(ValueError):
        calibration.load_targets(path)
    path.write_text(json.dumps([{"observable": "Q_Q", "value": 0.9}]))
    with pytest.raises(ValueError):
        calibration.load_targets(path)
