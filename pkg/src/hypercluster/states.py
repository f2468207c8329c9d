"""Bell fragments, the hyperentangled source state, the cluster state and the noise model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcore
from . import tolerances as tol
from .qcore import DIM, I2, X, tensor4

SQRT2 = np.sqrt(2.0)

# (A path, B path) bits of the two correlated mode pairs
SECTORS = {"rl": (1, 0), "lr": (0, 1)}

_BELL_AB = {
    # amplitudes over (A,B) in order 00, 01, 10, 11
    "phi+": np.array([1, 0, 0, 1]) / SQRT2,
    "phi-": np.array([1, 0, 0, -1]) / SQRT2,
    "psi+": np.array([0, 1, 1, 0]) / SQRT2,
    "psi-": np.array([0, -1, 1, 0]) / SQRT2,
}
_KIND_ALIASES = {"Φ+": "phi+", "Φ-": "phi-", "Φ−": "phi-", "ψ+": "psi+", "ψ-": "psi-", "ψ−": "psi-"}


def _normalize_kind(kind: str) -> str:
    k = _KIND_ALIASES.get(kind, kind).lower().replace("−", "-")
    if k not in _BELL_AB:
        raise ValueError(f"unknown Bell state {kind!r}")
    return k


def bell_state(kind: str, dof: str = "polarization") -> np.ndarray:
    """Two-qubit Bell fragment in the slot order used for that degree of freedom.

    Polarization fragments occupy slots (q1, q2) = (B, A); path fragments
    occupy (q3, q4) = (A, B). For psi- the A-first sign convention
    |0>_A|1>_B -> -1 is kept in both cases.
    """
    amps = _BELL_AB[_normalize_kind(kind)].astype(complex)
    if dof in ("polarization", "pol"):
        # swap to B-first ordering
        return amps.reshape(2, 2).T.reshape(4).copy()
    if dof in ("momentum", "mom", "path"):
        return amps
    raise ValueError(f"unknown degree of freedom {dof!r}")


def photon_ket(pol_a: str, path_a: str, pol_b: str, path_b: str) -> np.ndarray:
    """Basis vector |pol_a path_a>_A |pol_b path_b>_B, letters H/V and l/r."""
    pol = {"H": 0, "V": 1}
    path = {"l": 0, "r": 1}
    return qcore.basis_state([pol[pol_b], pol[pol_a], path[path_a], path[path_b]])


def hyperentangled_state() -> np.ndarray:
    """|Phi-> (x) |psi+>: polarization and path each maximally entangled, mutually separable."""
    return np.kron(bell_state("phi-", "polarization"), bell_state("psi+", "momentum"))


def hw_cp_matrix() -> np.ndarray:
    """Half-wave plate with vertical axis on the r_A mode.

    Flips the sign of A-vertical amplitudes travelling in r_A and leaves
    everything else alone, i.e. a controlled phase between slots q2 and q3.
    """
    diag = np.ones(DIM, dtype=complex)
    for b in range(DIM):
        _, pol_a, path_a, _ = qcore.basis_bits(b)
        if pol_a == 1 and path_a == 1:
            diag[b] = -1.0
    return np.diag(diag)


def apply_hw_cp(state: np.ndarray) -> np.ndarray:
    return hw_cp_matrix() @ qcore.check_state(state)


def cluster_state() -> np.ndarray:
    """The linear cluster state written out term by term in photon-mode notation."""
    return 0.5 * (
        photon_ket("H", "r", "H", "l")
        + photon_ket("V", "r", "V", "l")
        + photon_ket("H", "l", "H", "r")
        - photon_ket("V", "l", "V", "r")
    )


def reference_linear_cluster() -> np.ndarray:
    """(|0000> + |1100> + |0011> - |1111>)/2."""
    return 0.5 * (
        qcore.basis_state("0000")
        + qcore.basis_state("1100")
        + qcore.basis_state("0011")
        - qcore.basis_state("1111")
    )


def logical_map(state: np.ndarray) -> np.ndarray:
    """Bit flip on slot q3, taking the cluster state to the reference linear cluster."""
    return tensor4([I2, I2, X, I2]) @ qcore.check_state(state)


@dataclass(frozen=True)
class NoiseParams:
    """Polarization visibility, inter-sector path coherence and path leakage."""

    v_pol: float = 1.0
    mu_mom: float = 1.0
    z_err: float = 0.0

    def __post_init__(self):
        for name in ("v_pol", "mu_mom", "z_err"):
            val = float(getattr(self, name))
            if not (0.0 <= val <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {val!r}")
            object.__setattr__(self, name, val)

    @classmethod
    def ideal(cls) -> "NoiseParams":
        return cls(1.0, 1.0, 0.0)

    def as_dict(self) -> dict[str, float]:
        return {"v_pol": self.v_pol, "mu_mom": self.mu_mom, "z_err": self.z_err}


def _path_index(b: int) -> int:
    return b & 0b11


def apply_noise(state: np.ndarray, params: NoiseParams) -> np.ndarray:
    """Noisy density matrix built from a pure (or mixed) four-qubit state.

    Three channels applied in order:

    1. polarization white noise, rho -> v rho + (1 - v) I_pol/4 (x) Tr_pol rho;
    2. path dephasing, every coherence between distinct path basis states
       multiplied by mu;
    3. leakage of a fraction z into the uncorrelated path modes ll and rr,
       with unpolarized light.

    Each step is a convex mixture or Schur product with a PSD matrix, so the
    output is a valid density matrix over the whole parameter box.
    """
    rho = qcore.to_density(state)
    v, mu, z = params.v_pol, params.mu_mom, params.z_err

    path_reduced = qcore.partial_trace(rho, keep=(3, 4))
    rho = v * rho + (1.0 - v) * np.kron(np.eye(4) / 4.0, path_reduced)

    paths = np.array([_path_index(b) for b in range(DIM)])
    damp = np.where(paths[:, None] == paths[None, :], 1.0, mu)
    rho = rho * damp

    leak_paths = np.zeros((4, 4))
    leak_paths[0, 0] = leak_paths[3, 3] = 0.5
    rho = (1.0 - z) * rho + z * np.kron(np.eye(4) / 4.0, leak_paths)
    return 0.5 * (rho + rho.conj().T)


def sector_probability(rho: np.ndarray, sector: str) -> float:
    a, b = SECTORS[sector]
    idx = [pb * 8 + pa * 4 + a * 2 + b for pb in (0, 1) for pa in (0, 1)]
    return float(np.real(np.trace(np.asarray(rho)[np.ix_(idx, idx)])))


def sector_polarization_state(rho: np.ndarray, sector: str) -> np.ndarray:
    """Polarization state (slots q1, q2) conditioned on one path sector, renormalized."""
    if sector not in SECTORS:
        raise ValueError(f"sector must be one of {sorted(SECTORS)}, got {sector!r}")
    rho = qcore.to_density(rho)
    a, b = SECTORS[sector]
    idx = [pb * 8 + pa * 4 + a * 2 + b for pb in (0, 1) for pa in (0, 1)]
    block = rho[np.ix_(idx, idx)]
    p = np.trace(block).real
    if p < tol.SECTOR_MIN_PROB:
        raise ValueError(f"sector {sector} has probability {p:.3g}; cannot condition")
    return block / p


def sector_target(sector: str) -> np.ndarray:
    """Ideal polarization state of each sector: Phi+ on r_A l_B, Phi- on l_A r_B."""
    return bell_state("phi+" if sector == "rl" else "phi-", "polarization")
