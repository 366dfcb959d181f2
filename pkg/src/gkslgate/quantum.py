"""Two-qubit operator algebra: Pauli and ladder matrices, target gates,
the three GRK initial states, Hilbert-Schmidt distances and density-matrix
checks.

All matrices are dense ``complex128`` numpy arrays.
"""
from __future__ import annotations

import enum

import numpy as np

TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_PSD = 1e-8

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# Ladder matrices: sigma_plus has its 1 in the lower-left entry, sigma_minus in
# the upper-right one (the reverse of the usual raising/lowering convention).
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
J4 = np.ones((4, 4), dtype=complex)


class InvalidStateError(ValueError):
    """Raised when a matrix fails a density-matrix check."""


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``a (x) b``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


class Gate(str, enum.Enum):
    CNOT = "cnot"
    SWAP = "swap"
    CZ = "cz"

    @property
    def matrix(self) -> np.ndarray:
        return gate_matrix(self)

    @classmethod
    def parse(cls, name: str) -> "Gate":
        key = name.strip().lower().replace("-", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown gate {name!r}; expected one of cnot, swap, cz") from None


_GATES = {
    Gate.CNOT: [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    Gate.SWAP: [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
    Gate.CZ: [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, -1]],
}


def gate_matrix(kind: Gate | str) -> np.ndarray:
    """Return the 4x4 computational-basis matrix of C-NOT, SWAP or C-Z."""
    if not isinstance(kind, Gate):
        kind = Gate.parse(kind)
    return np.array(_GATES[kind], dtype=complex)


def grk_initial_states() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The minimal three-state set used by the GRK gate objective."""
    rho1 = np.diag([2 / 5, 3 / 10, 1 / 5, 1 / 10]).astype(complex)
    rho2 = J4 / 4
    rho3 = I4 / 4
    return rho1, rho2.copy(), rho3.copy()


def apply_gate(u: np.ndarray | Gate | str, rho: np.ndarray) -> np.ndarray:
    """Unitary conjugation ``U rho U^dagger``."""
    if not isinstance(u, np.ndarray):
        u = gate_matrix(u)
    return u @ rho @ u.conj().T


def gate_targets(u: np.ndarray | Gate | str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tuple(apply_gate(u, rho) for rho in grk_initial_states())


def hs_dist_sq(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Hilbert-Schmidt distance ``Tr[(a-b)^dagger (a-b)]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sum(d.real**2 + d.imag**2))


def hermiticity_defect(rho: np.ndarray) -> float:
    return float(np.linalg.norm(rho - rho.conj().T))


def density_defects(rho: np.ndarray) -> tuple[float, float, float]:
    """Return (hermiticity defect, |Tr - 1|, min eigenvalue of the Hermitian part)."""
    herm = hermiticity_defect(rho)
    tr = abs(np.trace(rho) - 1.0)
    min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
    return herm, float(tr), min_eig


def is_density_matrix(rho: np.ndarray, tol_herm: float = TOL_HERM, tol_tr: float = TOL_TRACE,
                      tol_psd: float = TOL_PSD) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or not np.all(np.isfinite(rho)):
        return False
    herm, tr, min_eig = density_defects(rho)
    return herm <= tol_herm and tr <= tol_tr and min_eig >= -tol_psd


def check_density_matrix(rho: np.ndarray, tol_herm: float = TOL_HERM, tol_tr: float = TOL_TRACE,
                         tol_psd: float = TOL_PSD) -> np.ndarray:
    """Validate ``rho`` and return it as a complex array; raise InvalidStateError otherwise."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("density matrix has non-finite entries")
    herm, tr, min_eig = density_defects(rho)
    if herm > tol_herm:
        raise InvalidStateError(f"not Hermitian (defect {herm:.3e})")
    if tr > tol_tr:
        raise InvalidStateError(f"trace differs from 1 by {tr:.3e}")
    if min_eig < -tol_psd:
        raise InvalidStateError(f"not positive semidefinite (min eigenvalue {min_eig:.3e})")
    return rho


# Row-wise upper triangle, diagonal entries real, off-diagonals as (re, im).
_REAL16_LAYOUT: list[tuple[int, int, str]] = []
for _i in range(4):
    for _j in range(_i, 4):
        if _i == _j:
            _REAL16_LAYOUT.append((_i, _j, "re"))
        else:
            _REAL16_LAYOUT.extend([(_i, _j, "re"), (_i, _j, "im")])
del _i, _j


def to_real16(rho: np.ndarray) -> np.ndarray:
    """Realify a Hermitian 4x4 matrix into coordinates ``x_1..x_16``.

    Ordering: rho11, Re/Im rho12, Re/Im rho13, Re/Im rho14, rho22,
    Re/Im rho23, Re/Im rho24, rho33, Re/Im rho34, rho44.
    """
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got {rho.shape}")
    return np.array([rho[i, j].real if part == "re" else rho[i, j].imag
                     for i, j, part in _REAL16_LAYOUT])


def from_real16(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_real16`; the lower triangle is filled by conjugation."""
    x = np.asarray(x, dtype=float)
    if x.shape != (16,):
        raise ValueError(f"expected 16 coordinates, got shape {x.shape}")
    rho = np.zeros((4, 4), dtype=complex)
    for value, (i, j, part) in zip(x, _REAL16_LAYOUT):
        if part == "re":
            rho[i, j] += value
        else:
            rho[i, j] += 1j * value
    upper = np.triu(rho, 1)
    return np.diag(np.diag(rho)) + upper + upper.conj().T
