"""Dense arithmetic on the 16-dimensional two-photon Hilbert space.

Qubit slots are always ordered (q1, q2, q3, q4) = (B polarization,
A polarization, A path, B path), with q1 the most significant bit of a
basis index. Polarization uses H -> 0, V -> 1 and paths use l -> 0, r -> 1.

States are plain numpy arrays: a state vector has shape (16,) and a
density matrix has shape (16, 16).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import tolerances as tol

NQUBITS = 4
DIM = 2**NQUBITS

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

# slot index (0-based) for each local operator symbol of the experiment:
# upper case = polarization, lower case = path (momentum)
_SLOT = {("pol", "A"): 1, ("pol", "B"): 0, ("mom", "A"): 2, ("mom", "B"): 3}
# slot order used when printing a label the way the experiment writes it
_PRINT_ORDER = (1, 2, 0, 3)
_TOKEN = re.compile(r"([XYZxyz])_?([AB])")


def tensor4(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of four 2x2 matrices in slot order q1 (x) q2 (x) q3 (x) q4."""
    if len(ops) != NQUBITS:
        raise ValueError(f"expected 4 single-qubit operators, got {len(ops)}")
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        op = np.asarray(op, dtype=complex)
        if op.shape != (2, 2):
            raise ValueError(f"single-qubit operator must be 2x2, got {op.shape}")
        out = np.kron(out, op)
    return out


def basis_bits(index: int) -> tuple[int, int, int, int]:
    """Decode a basis index into (q1, q2, q3, q4) bits, q1 most significant."""
    return tuple((index >> (NQUBITS - 1 - k)) & 1 for k in range(NQUBITS))


def basis_state(bits: str | Sequence[int]) -> np.ndarray:
    """Computational basis vector, e.g. ``basis_state("0010")``."""
    bits = [int(b) for b in bits]
    index = 0
    for b in bits:
        index = 2 * index + b
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[index] = 1.0
    return psi


@dataclass(frozen=True)
class PauliString:
    """Tensor product of Pauli operators over the four slots.

    ``labels`` lists the Pauli letter of each slot in slot order q1..q4, so
    the experiment's X_A z_A X_B is ``PauliString("XXZI")``.
    """

    labels: str
    coefficient: float = 1.0

    def __post_init__(self):
        labels = self.labels.upper()
        if len(labels) != NQUBITS or any(c not in PAULI for c in labels):
            raise ValueError(f"invalid Pauli labels {self.labels!r}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def parse(cls, text: str, coefficient: float = 1.0) -> "PauliString":
        """Parse either slot labels ("XXZI") or the experiment's notation ("X_Az_AX_B").

        Upper-case letters act on polarization, lower-case on path. A leading
        minus sign flips the coefficient.
        """
        text = text.strip().replace(" ", "")
        if text.startswith("-"):
            coefficient, text = -coefficient, text[1:]
        elif text.startswith("+"):
            text = text[1:]
        if len(text) == NQUBITS and "_" not in text and set(text.upper()) <= set(PAULI):
            return cls(text, coefficient)
        slots = ["I"] * NQUBITS
        pos = 0
        for m in _TOKEN.finditer(text):
            if m.start() != pos:
                break
            letter, photon = m.groups()
            dof = "pol" if letter.isupper() else "mom"
            k = _SLOT[(dof, photon)]
            if slots[k] != "I":
                raise ValueError(f"slot repeated in {text!r}")
            slots[k] = letter.upper()
            pos = m.end()
        if pos != len(text) or pos == 0:
            raise ValueError(f"cannot parse observable {text!r}")
        return cls("".join(slots), coefficient)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, c in enumerate(self.labels) if c != "I")

    def matrix(self) -> np.ndarray:
        return self.coefficient * tensor4([PAULI[c] for c in self.labels])

    def mode_label(self) -> str:
        """Render in the experiment's notation, e.g. ``X_Az_AX_B``."""
        names = {0: ("B", str.upper), 1: ("A", str.upper), 2: ("A", str.lower), 3: ("B", str.lower)}
        parts = []
        for k in _PRINT_ORDER:
            c = self.labels[k]
            if c != "I":
                photon, case = names[k]
                parts.append(f"{case(c)}_{photon}")
        body = "".join(parts) or "1"
        return ("-" if self.coefficient < 0 else "") + body

    def __str__(self) -> str:
        return self.mode_label()


def as_observable(obs: PauliString | str) -> PauliString:
    return obs if isinstance(obs, PauliString) else PauliString.parse(obs)


def is_state_vector(x: np.ndarray) -> bool:
    return np.ndim(x) == 1


def check_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (DIM,):
        raise ValueError(f"state vector must have shape ({DIM},), got {psi.shape}")
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > tol.NORM * DIM:
        raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
    return psi


def check_density(rho: np.ndarray, dim: int = DIM) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix must be {dim}x{dim}, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol.EXACT:
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol.EXACT:
        raise ValueError(f"density matrix trace is {tr!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < tol.PSD:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def density(psi: np.ndarray) -> np.ndarray:
    """Projector |psi><psi|."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def to_density(state: np.ndarray) -> np.ndarray:
    """Accept a state vector or a density matrix and return a validated density matrix."""
    if is_state_vector(state):
        return density(check_state(state))
    return check_density(state)


def expectation(state: np.ndarray, obs: PauliString | str) -> float:
    """<psi|O|psi> for a state vector, Tr[O rho] for a density matrix."""
    op = as_observable(obs).matrix()
    if is_state_vector(state):
        psi = check_state(state)
        val = np.vdot(psi, op @ psi)
    else:
        rho = check_density(state)
        val = np.einsum("ij,ji->", op, rho)
    return float(val.real)


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """Overlap <target|rho|target> of a density matrix with a pure target."""
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    return float(np.vdot(target, rho @ target).real)


def overlap(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|, the phase-insensitive state comparison."""
    return float(abs(np.vdot(a, b)))


def partial_trace(rho: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduce a 4-qubit density matrix onto the 1-based slots in ``keep``.

    The kept slots appear in increasing order in the result.
    """
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must name at least one slot")
    if any(k not in (1, 2, 3, 4) for k in keep):
        raise ValueError(f"slots must be in 1..4, got {keep}")
    rho = np.asarray(rho, dtype=complex).reshape([2] * (2 * NQUBITS))
    traced = [k - 1 for k in range(1, NQUBITS + 1) if k not in keep]
    # trace out from the highest axis down so earlier indices stay valid
    n = NQUBITS
    for ax in sorted(traced, reverse=True):
        rho = np.trace(rho, axis1=ax, axis2=ax + n)
        n -= 1
    d = 2 ** len(keep)
    return rho.reshape(d, d)


def maximally_mixed(dim: int = DIM) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def random_state(rng: np.random.Generator, dim: int = DIM) -> np.ndarray:
    """Haar-random pure state."""
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def random_density(rng: np.random.Generator, dim: int = DIM, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre matrix of the given rank."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
