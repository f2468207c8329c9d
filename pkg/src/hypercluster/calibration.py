"""Least-squares fit of the noise model to measured correlation values.

Targets are read from JSON documents shaped as a list of
``{"observable": str, "value": float, "sigma": float}``. ``observable`` is a
Pauli product in the experiment's notation (``"X_Az_AX_B"``) or one of the
derived quantities ``fidelity_rl``, ``fidelity_lr`` and ``visibility``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import apparatus, qcore, states
from .states import NoiseParams

DERIVED_KEYS = ("fidelity_rl", "fidelity_lr", "visibility")


@dataclass(frozen=True)
class Target:
    observable: str
    value: float
    sigma: float = 0.0

    def as_dict(self) -> dict:
        return {"observable": self.observable, "value": self.value, "sigma": self.sigma}


@dataclass(frozen=True)
class CalibrationResult:
    params: NoiseParams
    targets: tuple[Target, ...]
    model_values: tuple[float, ...]
    converged: bool
    message: str = ""

    @property
    def residuals(self) -> np.ndarray:
        return np.array([m - t.value for m, t in zip(self.model_values, self.targets)])

    def residual_map(self) -> dict[str, float]:
        return {t.observable: float(r) for t, r in zip(self.targets, self.residuals)}

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "converged": self.converged,
            "message": self.message,
            "targets": [
                {**t.as_dict(), "model": float(m), "residual": float(m - t.value)}
                for t, m in zip(self.targets, self.model_values)
            ],
        }


def parse_targets(doc: Sequence[dict]) -> list[Target]:
    out = []
    for entry in doc:
        try:
            name = str(entry["observable"])
            value = float(entry["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed target entry {entry!r}") from exc
        if name not in DERIVED_KEYS:
            qcore.PauliString.parse(name)  # validate early
        out.append(Target(name, value, float(entry.get("sigma", 0.0))))
    return out


def load_targets(path: str | Path) -> list[Target]:
    with open(path) as fh:
        return parse_targets(json.load(fh))


def _bundled(name: str) -> list[Target]:
    text = resources.files("hypercluster.data").joinpath(name).read_text()
    return parse_targets(json.loads(text))


def table1_targets() -> list[Target]:
    """The eleven measured correlation values bundled with the package."""
    return _bundled("table1.json")


def reported_targets() -> list[Target]:
    """Sector tomography fidelities and the average delay-scan visibility."""
    return _bundled("reported.json")


def default_targets() -> list[Target]:
    return table1_targets() + reported_targets()


def ideal_targets() -> list[Target]:
    psi = states.cluster_state()
    return [Target(t.observable, qcore.expectation(psi, t.observable)) for t in table1_targets()]


def model_value(rho: np.ndarray, key: str) -> float:
    """Model prediction for one target on a 16x16 density matrix."""
    if key == "fidelity_rl":
        return qcore.fidelity(states.sector_polarization_state(rho, "rl"), states.sector_target("rl"))
    if key == "fidelity_lr":
        return qcore.fidelity(states.sector_polarization_state(rho, "lr"), states.sector_target("lr"))
    if key == "visibility":
        return apparatus.scan_visibility(rho, "H")
    return qcore.expectation(rho, key)


def model_values(params: NoiseParams, keys: Iterable[str]) -> np.ndarray:
    rho = states.apply_noise(states.cluster_state(), params)
    return np.array([model_value(rho, k) for k in keys])


def calibrate_noise(targets: Sequence[Target] | None = None, x0=(0.95, 0.95, 0.01)) -> CalibrationResult:
    """Equal-weight least squares over (v_pol, mu_mom, z_err) in the unit box.

    The default target set is the eleven table correlations plus the two
    sector fidelities and the scan visibility.
    """
    targets = tuple(default_targets() if targets is None else targets)
    table_like = [t for t in targets if t.observable not in DERIVED_KEYS]
    if len(table_like) < 11:
        raise ValueError(f"need at least the 11 table observables, got {len(table_like)}")
    keys = [t.observable for t in targets]
    values = np.array([t.value for t in targets])

    def residual(x):
        return model_values(NoiseParams(*np.clip(x, 0.0, 1.0)), keys) - values

    fit = least_squares(
        residual, np.asarray(x0, float), bounds=([0, 0, 0], [1, 1, 1]), method="dogbox",
        xtol=1e-15, ftol=1e-15, gtol=1e-15,
    )
    params = NoiseParams(*np.clip(fit.x, 0.0, 1.0))
    if not fit.success:
        warnings.warn(f"noise calibration did not converge: {fit.message}", RuntimeWarning)
    return CalibrationResult(
        params=params,
        targets=targets,
        model_values=tuple(float(v) for v in model_values(params, keys)),
        converged=bool(fit.success),
        message=str(fit.message),
    )
