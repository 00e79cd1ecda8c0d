"""Ideal qubit-level gates and the Bell-outcome correction table.

These are the abstract circuit primitives used by the teleportation
protocols; the physical realizations (number-number phase gate, spin-phonon
swaps) live in :mod:`cryomech.protocols`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
XZ = X @ Z
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CPHASE = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)

PAULI_GATES: Mapping[str, np.ndarray] = {"I": I2, "X": X, "Z": Z, "XZ": XZ}

#: Candidate recovery operations for the Bell-outcome correction table.  The
#: CPHASE + (H x H) measurement circuit leaves each branch Hadamard-rotated,
#: so the recovering local operation is a Pauli composed with a Hadamard;
#: bare Paulis are kept in the set so the search can prove they never suffice.
CORRECTION_GATES: Mapping[str, np.ndarray] = {
    **PAULI_GATES,
    "H": HADAMARD, "XH": X @ HADAMARD, "ZH": Z @ HADAMARD, "XZH": XZ @ HADAMARD,
}

OUTCOMES = ("00", "01", "10", "11")


@dataclass(frozen=True)
class CorrectionTable:
    """Total map from 2-bit Bell outcome to the recovering single-qubit gate."""

    mapping: Mapping[str, str]

    def __post_init__(self):
        missing = set(OUTCOMES) - set(self.mapping)
        if missing:
            raise ValueError(f"correction table must cover all outcomes; missing {sorted(missing)}")
        bad = [g for g in self.mapping.values() if g not in CORRECTION_GATES]
        if bad:
            raise ValueError(f"unknown correction gates {bad}")
        object.__setattr__(self, "mapping", dict(self.mapping))

    def gate(self, outcome: str) -> np.ndarray:
        return CORRECTION_GATES[self.mapping[outcome]]

    def name(self, outcome: str) -> str:
        return self.mapping[outcome]

    def to_json_dict(self) -> dict:
        return dict(self.mapping)


def qubit_subspace_gate(gate2: np.ndarray, dim: int) -> np.ndarray:
    """Extend a 2x2 gate to a dim-level mode: gate on {|0>,|1>}, identity above."""
    m = np.eye(dim, dtype=complex)
    m[:2, :2] = gate2
    return m


def phases_equal(psi: np.ndarray, phi: np.ndarray, tol: float = 1e-9) -> bool:
    """Amplitude-level equality of two state vectors up to a global phase."""
    k = int(np.argmax(np.abs(phi)))
    if abs(psi[k]) < tol:
        return False
    phase = phi[k] / psi[k]
    return bool(np.linalg.norm(psi * phase - phi) < tol * np.linalg.norm(phi) * 10 + tol)
