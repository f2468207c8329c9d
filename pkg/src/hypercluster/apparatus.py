"""Analysis optics: glass plates, beam splitter, wave plates, PBS and the delay scan.

Wave-plate angles are measured from the vertical direction. Each photon's
analyzer is a QWP followed by a HWP and a PBS whose transmitted (H) port is
outcome bit 0. With the beam splitter in place, the path outcome bit is 0
for the primed l' output and 1 for r'; without it, 0 for l and 1 for r.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from . import qcore
from .qcore import DIM, I2, PauliString, as_observable, tensor4

TWO_PI = 2.0 * math.pi
SPEED_OF_LIGHT = 299_792_458.0  # m/s

# time-bandwidth constant tying a 6 nm filter at 728 nm to a 150 fs coherence time
_REF_BANDWIDTH_NM = 6.0
_REF_WAVELENGTH_NM = 728.0
_REF_COHERENCE_FS = 150.0


def _bandwidth_hz(bandwidth_nm: float, wavelength_nm: float) -> float:
    return SPEED_OF_LIGHT * bandwidth_nm * 1e-9 / (wavelength_nm * 1e-9) ** 2


TIME_BANDWIDTH = _REF_COHERENCE_FS * 1e-15 * _bandwidth_hz(_REF_BANDWIDTH_NM, _REF_WAVELENGTH_NM)


@dataclass(frozen=True)
class PhotonSetting:
    theta_q: float = 0.0
    theta_h: float = 0.0
    phi: float = 0.0
    bs_present: bool = False

    def __post_init__(self):
        for name in ("theta_q", "theta_h", "phi"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val % TWO_PI)


@dataclass(frozen=True)
class MeasurementSetting:
    a: PhotonSetting = field(default_factory=PhotonSetting)
    b: PhotonSetting = field(default_factory=PhotonSetting)
    delay_x: float = 0.0  # micrometres

    def __post_init__(self):
        if not math.isfinite(self.delay_x):
            raise ValueError("delay must be finite")


@dataclass(frozen=True)
class OutcomeProbabilities:
    """Born-rule probabilities indexed ``probs[pol_B, pol_A, path_A, path_B]``."""

    probs: np.ndarray

    def __getitem__(self, outcome):
        return self.probs[outcome]

    def as_dict(self) -> dict[tuple[int, int, int, int], float]:
        return {qcore.basis_bits(k): float(p) for k, p in enumerate(self.probs.reshape(DIM))}


def waveplate_jones(kind: str, theta: float) -> np.ndarray:
    """Jones matrix of a retarder whose fast axis sits at ``theta`` from vertical.

    Basis is (H, V). The fast-axis component is unchanged and the slow-axis
    component picks up the retardance (pi/2 quarter, pi half).
    """
    retardance = {"quarter": math.pi / 2, "half": math.pi}.get(kind)
    if retardance is None:
        raise ValueError(f"kind must be 'quarter' or 'half', got {kind!r}")
    fast = np.array([math.sin(theta), math.cos(theta)], dtype=complex)
    slow = np.array([math.cos(theta), -math.sin(theta)], dtype=complex)
    return np.outer(fast, fast) + np.exp(1j * retardance) * np.outer(slow, slow)


def analyzer_unitary(theta_q: float, theta_h: float) -> np.ndarray:
    """Light meets the QWP first, then the HWP."""
    return waveplate_jones("half", theta_h) @ waveplate_jones("quarter", theta_q)


def path_unitary(phi: float, bs_present: bool) -> np.ndarray:
    """Glass phase plus beam splitter for one photon, (l, r) -> (l', r').

    (|l> + e^{-i phi}|r>)/sqrt2 exits in l', (|l> - e^{-i phi}|r>)/sqrt2 in r'.
    """
    if not bs_present:
        return I2.copy()
    e = np.exp(1j * phi)
    return np.array([[1, e], [1, -e]], dtype=complex) / math.sqrt(2.0)


def bs_transform(phi_a: float, phi_b: float) -> np.ndarray:
    """Two independent single-photon beam-splitter transforms on slots q3, q4."""
    return tensor4([I2, I2, path_unitary(phi_a, True), path_unitary(phi_b, True)])


def _slot_unitaries(setting: MeasurementSetting) -> list[np.ndarray]:
    return [
        analyzer_unitary(setting.b.theta_q, setting.b.theta_h),
        analyzer_unitary(setting.a.theta_q, setting.a.theta_h),
        path_unitary(setting.a.phi, setting.a.bs_present),
        path_unitary(setting.b.phi, setting.b.bs_present),
    ]


def setting_unitary(setting: MeasurementSetting) -> np.ndarray:
    """Full 16x16 unitary applied before the detectors read out the computational basis."""
    return tensor4(_slot_unitaries(setting))


# (QWP, (HWP, alternate HWP)) angles; the alternate HWP angle swaps the PBS ports
_POL_ANGLES = {
    "X": (math.pi / 4, (math.pi / 8, 3 * math.pi / 8)),
    "Y": (0.0, (math.pi / 8, 3 * math.pi / 8)),
    "Z": (0.0, (0.0, math.pi / 4)),
    "I": (0.0, (0.0, math.pi / 4)),
}
_PATH_PHASE = {"X": 0.0, "Y": math.pi / 2}


def _photon_setting(pol: str, mom: str, alternate: bool) -> PhotonSetting:
    theta_q, hwp = _POL_ANGLES[pol]
    bs = mom in _PATH_PHASE
    return PhotonSetting(
        theta_q=theta_q,
        theta_h=hwp[1 if alternate else 0],
        phi=_PATH_PHASE.get(mom, 0.0),
        bs_present=bs,
    )


def setting_for(observable: PauliString | str, alternate: bool = False) -> MeasurementSetting:
    """Analyzer configuration that measures a product of local Pauli operators.

    ``alternate`` picks the second HWP angle, which exchanges the PBS ports.
    """
    obs = as_observable(observable)
    pol_b, pol_a, mom_a, mom_b = obs.labels
    return MeasurementSetting(
        a=_photon_setting(pol_a, mom_a, alternate),
        b=_photon_setting(pol_b, mom_b, alternate),
    )


def port_eigenvalues(observable: PauliString | str, setting: MeasurementSetting) -> np.ndarray:
    """Eigenvalue carried by outcome bit 0 of each slot, shape (4,).

    Entries are +1 or -1 for slots in the observable's support and 0
    elsewhere. Raises ValueError if the setting does not measure that slot's
    Pauli eigenbasis.
    """
    obs = as_observable(observable)
    signs = np.zeros(4)
    for k, (letter, u) in enumerate(zip(obs.labels, _slot_unitaries(setting))):
        if letter == "I":
            continue
        # Heisenberg picture: port-0 projector pulled back through the optics
        proj0 = u.conj().T @ np.diag([1.0, 0.0]) @ u
        pauli = qcore.PAULI[letter]
        if np.allclose(proj0, (I2 + pauli) / 2, atol=1e-12):
            signs[k] = 1.0
        elif np.allclose(proj0, (I2 - pauli) / 2, atol=1e-12):
            signs[k] = -1.0
        else:
            raise ValueError(f"setting does not measure {letter} on slot q{k + 1}")
    return signs


def outcome_probabilities(rho: np.ndarray, setting: MeasurementSetting) -> OutcomeProbabilities:
    rho = qcore.to_density(rho)
    u = setting_unitary(setting)
    p = np.real(np.einsum("ij,jk,ik->i", u, rho, u.conj()))
    p = np.clip(p, 0.0, None)
    return OutcomeProbabilities((p / p.sum()).reshape(2, 2, 2, 2))


def outcome_parities(observable: PauliString | str, setting: MeasurementSetting) -> np.ndarray:
    """Eigenvalue attached to each of the 16 detector outcomes, shape (2, 2, 2, 2)."""
    obs = as_observable(observable)
    signs = port_eigenvalues(obs, setting)
    parity = np.full((2, 2, 2, 2), obs.coefficient)
    for k in obs.support:
        shape = [1, 1, 1, 1]
        shape[k] = 2
        parity = parity * np.array([signs[k], -signs[k]]).reshape(shape)
    return parity


def expectation_from_probabilities(
    probs: OutcomeProbabilities, observable: PauliString | str, setting: MeasurementSetting
) -> float:
    return float(np.sum(probs.probs * outcome_parities(observable, setting)))


def measured_expectation(rho: np.ndarray, observable: PauliString | str, alternate: bool = False) -> float:
    """Expectation of an observable as the apparatus would record it."""
    setting = setting_for(observable, alternate=alternate)
    return expectation_from_probabilities(outcome_probabilities(rho, setting), observable, setting)


# -- delay scan -----------------------------------------------------------

def coherence_envelope(filter_bandwidth: float, center_wavelength: float = 728.0) -> tuple[float, float]:
    """Coherence time (fs) and the matching FWHM path length (um) of a Gaussian filter."""
    if filter_bandwidth <= 0:
        raise ValueError("filter bandwidth must be positive")
    if center_wavelength <= 0:
        raise ValueError("center wavelength must be positive")
    tau = TIME_BANDWIDTH / _bandwidth_hz(filter_bandwidth, center_wavelength)
    return tau * 1e15, SPEED_OF_LIGHT * tau * 1e6


def envelope(delta_x: float | np.ndarray, fwhm_um: float) -> np.ndarray:
    """Gaussian overlap of the two-photon amplitudes, unity at zero delay."""
    delta_x = np.asarray(delta_x, dtype=float)
    return np.exp(-4.0 * math.log(2.0) * (delta_x / fwhm_um) ** 2)


def _delayed(rho: np.ndarray, g: float) -> np.ndarray:
    """Scale the r_A l_B <-> l_A r_B coherences by the temporal overlap."""
    out = rho.copy()
    paths = np.arange(DIM) & 0b11
    rl = paths == 0b10
    lr = paths == 0b01
    out[np.ix_(rl, lr)] *= g
    out[np.ix_(lr, rl)] *= g
    return out


DEFAULT_PAIR = ("l", "r")  # l'_A with r'_B: a dip for H photons of the cluster state


def _pair_rate(rho: np.ndarray, polarization: str, pair: tuple[str, str]) -> float:
    pol = {"H": 0, "V": 1}[polarization]
    port = {"l": 0, "r": 1}
    u = bs_transform(0.0, 0.0)
    p = np.real(np.diag(u @ rho @ u.conj().T)).reshape(2, 2, 2, 2)
    return float(p[pol, pol, port[pair[0]], port[pair[1]]])


def delay_scan(
    rho: np.ndarray,
    polarization: str,
    delays: Sequence[float],
    *,
    baseline: float = 1.0,
    fwhm_um: float | None = None,
    pair: tuple[str, str] = DEFAULT_PAIR,
) -> np.ndarray:
    """Coincidence rate on one BS output pair versus path delay.

    Both photons are analysed in the same linear polarization (H or V). Rates
    are normalised so that ``baseline`` is the value far from zero delay.
    """
    if polarization not in ("H", "V"):
        raise ValueError("polarization must be 'H' or 'V'")
    delays = np.asarray(delays, dtype=float)
    if not np.all(np.isfinite(delays)):
        raise ValueError("delays must be finite")
    if fwhm_um is None:
        fwhm_um = coherence_envelope(_REF_BANDWIDTH_NM, _REF_WAVELENGTH_NM)[1]
    rho = qcore.to_density(rho)
    far = _pair_rate(_delayed(rho, 0.0), polarization, pair)
    near = _pair_rate(rho, polarization, pair)
    if far <= 0:
        return np.zeros_like(delays)
    # the rate is affine in the coherence factor, so two evaluations suffice
    g = envelope(delays, fwhm_um)
    return baseline * (far + g * (near - far)) / far


def scan_visibility(rho: np.ndarray, polarization: str = "H") -> float:
    """Mean of dip and peak visibilities |R(0) - R_far| / R_far over the two pair types."""
    vis = []
    for pair in (("l", "r"), ("l", "l")):
        r0 = delay_scan(rho, polarization, [0.0], pair=pair)[0]
        vis.append(abs(r0 - 1.0))
    return float(np.mean(vis))


def scan_table(rho: np.ndarray, delays: Sequence[float], **kwargs) -> list[dict[str, float]]:
    rate_h = delay_scan(rho, "H", delays, **kwargs)
    rate_v = delay_scan(rho, "V", delays, **kwargs)
    return [
        {"delta_x_um": float(d), "rate_H": float(h), "rate_V": float(v)}
        for d, h, v in zip(delays, rate_h, rate_v)
    ]


def scan_csv(rows: list[dict[str, float]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["delta_x_um", "rate_H", "rate_V"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: f"{v:.10g}" for k, v in row.items()})
    return buf.getvalue()


def fit_scan(delays: Sequence[float], rates: Sequence[float], baseline: float = 1.0) -> tuple[float, float]:
    """Least-squares Gaussian dip/peak fit; returns (signed visibility, FWHM in um).

    Positive visibility means a peak, negative a dip.
    """
    delays = np.asarray(delays, dtype=float)
    rates = np.asarray(rates, dtype=float)

    def model(x, vis, fwhm):
        return baseline * (1.0 + vis * envelope(x, fwhm))

    i0 = int(np.argmax(np.abs(rates - baseline)))
    p0 = [rates[i0] / baseline - 1.0, max(np.ptp(delays) / 4, 1e-3)]
    popt, _ = curve_fit(model, delays, rates, p0=p0)
    return float(popt[0]), float(abs(popt[1]))

