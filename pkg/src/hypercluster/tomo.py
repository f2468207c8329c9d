"""Two-qubit polarization tomography on the path-conditioned sectors.

Counts are simulated for the standard sixteen product projectors and the
density matrix is recovered by maximizing the Poisson likelihood over
rho = T^dagger T / Tr(T^dagger T), T lower triangular with a real diagonal.

Projector labels list one letter per polarization slot in slot order, i.e.
photon B first and photon A second, with H, V, D = (H+V)/sqrt2 and
R = (H - iV)/sqrt2, L = (H + iV)/sqrt2.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from . import apparatus, qcore, states
from . import tolerances as tol

SQRT2 = math.sqrt(2.0)
POL_KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / SQRT2,
    "A": np.array([1, -1], dtype=complex) / SQRT2,
    "R": np.array([1, -1j], dtype=complex) / SQRT2,
    "L": np.array([1, 1j], dtype=complex) / SQRT2,
}
STANDARD_PROJECTORS = (
    "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
)
DEFAULT_TIME_S = 10.0
# mean coincidences per projector at unit probability in a 10 s run; sized so
# bootstrap entry errors land near 0.006 (HH/VV block) and 0.003 (the rest)
DEFAULT_MEAN_TOTAL = 20_000.0


@dataclass(frozen=True)
class CountsRecord:
    setting_id: str
    projector: str
    counts: int
    acquisition_time: float = DEFAULT_TIME_S

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be nonnegative")
        if not self.acquisition_time > 0:
            raise ValueError("acquisition time must be positive")


@dataclass
class TomographyResult:
    rho: np.ndarray
    fidelity: float
    log_likelihood: float
    iterations: int
    converged: bool = True
    fidelity_sigma: float = float("nan")
    target: str = ""
    entry_sigma_real: np.ndarray | None = None
    entry_sigma_imag: np.ndarray | None = None
    history: list[float] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        out = {
            "target": self.target,
            "fidelity": self.fidelity,
            "fidelity_sigma": self.fidelity_sigma,
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "rho_real": self.rho.real.tolist(),
            "rho_imag": self.rho.imag.tolist(),
            "note": "bootstrap errors include Poisson statistics only",
        }
        if self.entry_sigma_real is not None:
            out["sigma_real"] = self.entry_sigma_real.tolist()
            out["sigma_imag"] = self.entry_sigma_imag.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def projector_state(label: str) -> np.ndarray:
    if len(label) != 2 or any(c not in POL_KETS for c in label):
        raise ValueError(f"bad projector label {label!r}")
    return np.kron(POL_KETS[label[0]], POL_KETS[label[1]])


def projector_matrix(label: str) -> np.ndarray:
    psi = projector_state(label)
    return np.outer(psi, psi.conj())


_ANGLE_GRID = [k * math.pi / 8 for k in range(4)]


def analyzer_angles(letter: str) -> tuple[float, float]:
    """(QWP, HWP) angles from vertical that route the given polarization to the H port."""
    ket = POL_KETS[letter]
    for theta_q in (0.0, math.pi / 4):
        for theta_h in _ANGLE_GRID:
            out = apparatus.analyzer_unitary(theta_q, theta_h) @ ket
            if abs(abs(out[0]) - 1.0) < 1e-12:
                return theta_q, theta_h
    raise ValueError(f"no analyzer setting found for {letter!r}")


def setting_id(label: str) -> str:
    parts = []
    for photon, letter in zip("BA", label):
        q, h = analyzer_angles(letter)
        parts.append(f"{photon}:Q{math.degrees(q):g}H{math.degrees(h):g}")
    return " ".join(parts)


def is_informationally_complete(labels: Sequence[str]) -> bool:
    vecs = np.array([projector_matrix(l).reshape(-1) for l in labels])
    return np.linalg.matrix_rank(vecs, tol=1e-9) == 16


def simulate_counts(
    rho: np.ndarray,
    settings: Sequence[str] = STANDARD_PROJECTORS,
    mean_total: float = DEFAULT_MEAN_TOTAL,
    seed: int | np.random.SeedSequence | None = 0,
    acquisition_time: float = DEFAULT_TIME_S,
    shot_noise: bool = True,
) -> list[CountsRecord]:
    """Poisson counts with mean ``mean_total * <P|rho|P>`` for each projector.

    With ``shot_noise=False`` the counts are the rounded means themselves.
    """
    if mean_total <= 0:
        raise ValueError("mean_total must be positive")
    rho = qcore.check_density(rho, dim=4)
    if not is_informationally_complete(settings):
        warnings.warn("projector set is not informationally complete", RuntimeWarning)
    rng = np.random.default_rng(seed)
    probs = np.array([max(qcore.fidelity(rho, projector_state(l)), 0.0) for l in settings])
    counts = rng.poisson(mean_total * probs) if shot_noise else np.rint(mean_total * probs)
    return [
        CountsRecord(setting_id(l), l, int(n), acquisition_time)
        for l, n in zip(settings, counts)
    ]


# -- maximum likelihood ----------------------------------------------------

_TRIL = np.tril_indices(4, k=-1)


def params_to_t(t: np.ndarray) -> np.ndarray:
    T = np.zeros((4, 4), dtype=complex)
    T[np.diag_indices(4)] = t[:4]
    T[_TRIL] = t[4:10] + 1j * t[10:16]
    return T


def t_to_params(T: np.ndarray) -> np.ndarray:
    return np.concatenate([T.diagonal().real, T[_TRIL].real, T[_TRIL].imag])


def rho_from_params(t: np.ndarray) -> np.ndarray:
    T = params_to_t(t)
    a = T.conj().T @ T
    return a / np.trace(a).real


def _objective(t: np.ndarray, projs: np.ndarray, weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Scaled negative Poisson log-likelihood and its gradient in the 16 real parameters."""
    T = params_to_t(t)
    a = T.conj().T @ T
    m = np.real(np.einsum("kij,ji->k", projs, a))
    m = np.maximum(m, 1e-300)
    f = float(np.sum(m - weights * np.log(m)))
    g_mat = np.einsum("k,kij->ij", 1.0 - weights / m, projs)
    M = g_mat @ T.conj().T
    grad_t = 2.0 * M.T  # d f / d T_ab pairs with M_ba
    grad = np.concatenate([grad_t.diagonal().real, grad_t[_TRIL].real, -grad_t[_TRIL].imag])
    return f, grad


def _poisson_loglik(counts: np.ndarray, mu: np.ndarray) -> float:
    mu = np.maximum(mu, 1e-300)
    return float(np.sum(counts * np.log(mu) - mu - gammaln(counts + 1)))


def mle_reconstruct(
    records: Sequence[CountsRecord],
    target: np.ndarray | None = None,
    maxiter: int = tol.MLE_MAXITER,
) -> TomographyResult:
    """Maximum-likelihood two-qubit state from projector counts."""
    if len(records) < 16:
        raise ValueError(f"need at least 16 records, got {len(records)}")
    labels = [r.projector for r in records]
    if not is_informationally_complete(labels):
        warnings.warn("records do not span an informationally complete projector set", RuntimeWarning)
    counts = np.array([r.counts for r in records], dtype=float)
    if counts.sum() <= 0:
        raise ValueError("all counts are zero")
    projs = np.array([projector_matrix(l) for l in labels])

    scale = counts.sum() / 4.0
    weights = counts / scale
    t0 = t_to_params(np.sqrt(weights.sum() / len(records)) * np.eye(4, dtype=complex))

    history: list[float] = []

    def record(xk):
        history.append(-_objective(xk, projs, weights)[0])

    record(t0)
    res = minimize(
        _objective, t0, args=(projs, weights), jac=True, method="L-BFGS-B",
        callback=record, options={"ftol": max(tol.MLE_FTOL / scale, np.finfo(float).eps), "gtol": 1e-12, "maxiter": maxiter, "maxfun": 10 * maxiter},
    )
    if not res.success:
        warnings.warn(f"MLE did not converge: {res.message}", RuntimeWarning)
    rho = rho_from_params(res.x)
    T = params_to_t(res.x)
    mu = scale * np.real(np.einsum("kij,ji->k", projs, T.conj().T @ T))
    fid = qcore.fidelity(rho, target) if target is not None else float("nan")
    return TomographyResult(
        rho=rho,
        fidelity=fid,
        log_likelihood=_poisson_loglik(counts, mu),
        iterations=int(res.nit),
        converged=bool(res.success),
        history=history,
    )


def _bootstrap_replica(records, target, seq):
    rng = np.random.default_rng(seq)
    resampled = [
        CountsRecord(r.setting_id, r.projector, int(rng.poisson(r.counts)), r.acquisition_time)
        for r in records
    ]
    return mle_reconstruct(resampled, target)


def error_bars(
    records: Sequence[CountsRecord],
    replicas: int = 100,
    seed: int = 0,
    target: np.ndarray | None = None,
    workers: int = 1,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Parametric bootstrap: (fidelity sigma, entrywise sigma of Re rho, of Im rho).

    Every replica draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on ``workers``.
    """
    if replicas < 2:
        raise ValueError("need at least 2 bootstrap replicas")
    children = np.random.SeedSequence(seed).spawn(replicas)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                fits = list(pool.map(lambda s: _bootstrap_replica(records, target, s), children))
        else:
            fits = [_bootstrap_replica(records, target, s) for s in children]
    rhos = np.array([f.rho for f in fits])
    fids = np.array([f.fidelity for f in fits])
    fid_sigma = float(np.std(fids, ddof=1)) if target is not None else float("nan")
    return fid_sigma, rhos.real.std(axis=0, ddof=1), rhos.imag.std(axis=0, ddof=1)


def reconstruct_sectors(
    rho4: np.ndarray,
    mean_total: float = DEFAULT_MEAN_TOTAL,
    seed: int = 0,
    replicas: int = 100,
    workers: int = 1,
    shot_noise: bool = True,
) -> tuple[TomographyResult, TomographyResult]:
    """Tomography of the polarization state in the r_A l_B and l_A r_B sectors.

    Returns results for ("rl", "lr"), compared against Phi+ and Phi-. The
    bootstrap always resamples with Poisson noise, also for noiseless counts.
    """
    rho4 = qcore.to_density(rho4)
    seq_counts, seq_boot = np.random.SeedSequence(seed).spawn(2)
    count_seeds = seq_counts.spawn(2)
    boot_seeds = seq_boot.generate_state(2)
    results = []
    for sector, cs, bs in zip(("rl", "lr"), count_seeds, boot_seeds):
        target = states.sector_target(sector)
        rho2 = states.sector_polarization_state(rho4, sector)
        records = simulate_counts(rho2, mean_total=mean_total, seed=cs, shot_noise=shot_noise)
        res = mle_reconstruct(records, target)
        res.target = "Phi+" if sector == "rl" else "Phi-"
        if replicas:
            res.fidelity_sigma, res.entry_sigma_real, res.entry_sigma_imag = error_bars(
                records, replicas=replicas, seed=int(bs), target=target, workers=workers
            )
        results.append(res)
    return results[0], results[1]


# -- CSV I/O ------------------------------------------------------------------

CSV_FIELDS = ("setting_id", "projector", "counts", "time_s")


def write_counts_csv(records: Sequence[CountsRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow([r.setting_id, r.projector, r.counts, r.acquisition_time])


def read_counts_csv(path: str | Path) -> list[CountsRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"counts CSV missing columns {sorted(missing)}")
        return [
            CountsRecord(row["setting_id"], row["projector"], int(row["counts"]), float(row["time_s"]))
            for row in reader
        ]
