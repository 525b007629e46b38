"""Small dense matrix algebra for qubit and two-qubit operators.

Everything here works on plain ``numpy`` complex arrays of shape ``(d, d)``
with ``d`` in ``{2, 4}``. Arrays returned by this module are marked
read-only so they can be shared freely between callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

ATOL_VALID = 1e-10
ATOL_ALGEBRA = 1e-12
BLOCH_NORM_SLACK = 1e-12
PURE_TOL = 1e-9

SUPPORTED_DIMS = (2, 4)

IDENTITY2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)

for _m in (IDENTITY2, PAULI_X, PAULI_Y, PAULI_Z):
    _m.setflags(write=False)


class InvalidStateError(ValueError):
    """Raised when an array is not a valid density matrix or Bloch vector."""


class DimensionError(ValueError):
    """Raised for operators of unsupported or mismatched dimension."""


class InvalidObservableError(ValueError):
    """Raised when a matrix is not a traceless Hermitian involution."""


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


def _check_square(m: np.ndarray) -> int:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    d = m.shape[0]
    if d not in SUPPORTED_DIMS:
        raise DimensionError(f"dimension {d} not supported (use 2 or 4)")
    return d


def allclose(a: np.ndarray, b: np.ndarray, atol: float = ATOL_ALGEBRA) -> bool:
    """Absolute entrywise comparison, the only equality notion used here."""
    return bool(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0) <= atol)


def eigvalsh(m: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian 2x2 or 4x4 matrix.

    The 2x2 case uses the trace/determinant formula.
    """
    d = _check_square(np.asarray(m))
    if d == 2:
        t = float(np.real(m[0, 0] + m[1, 1]))
        diff = float(np.real(m[0, 0] - m[1, 1]))
        off = abs(m[0, 1])
        r = 0.5 * np.hypot(diff, 2 * off)
        return np.array([t / 2 - r, t / 2 + r])
    return np.linalg.eigvalsh(m)


def is_hermitian(m: np.ndarray, atol: float = ATOL_VALID) -> bool:
    return allclose(m, np.conj(np.transpose(m)), atol)


def is_density_matrix(rho: np.ndarray, atol: float = ATOL_VALID) -> bool:
    rho = np.asarray(rho)
    try:
        _check_square(rho)
    except DimensionError:
        return False
    if not is_hermitian(rho, atol):
        return False
    if abs(np.trace(rho) - 1) > atol:
        return False
    return bool(eigvalsh(rho)[0] >= -atol)


def density_matrix(rho) -> np.ndarray:
    """Validate ``rho`` and return a read-only complex copy."""
    rho = np.asarray(rho, dtype=complex)
    _check_square(rho)
    if not is_density_matrix(rho):
        raise InvalidStateError("matrix is not Hermitian, unit-trace and positive")
    return _frozen(rho)


def state_from_bloch(a) -> np.ndarray:
    """Qubit density matrix ``(I + a.sigma) / 2`` for a Bloch vector ``a``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (3,):
        raise InvalidStateError(f"Bloch vector must have 3 components, got {a.shape}")
    if np.linalg.norm(a) > 1 + BLOCH_NORM_SLACK:
        raise InvalidStateError(f"Bloch vector norm {np.linalg.norm(a):.15g} exceeds 1")
    return _frozen((IDENTITY2 + a[0] * PAULI_X + a[1] * PAULI_Y + a[2] * PAULI_Z) / 2)


def bloch_from_state(rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise DimensionError(f"Bloch vectors exist only for qubits, got shape {rho.shape}")
    a = np.array([np.real(np.trace(rho @ p)) for p in PAULIS])
    a.setflags(write=False)
    return a


def is_pure_bloch(a) -> bool:
    return abs(np.linalg.norm(a) - 1) <= PURE_TOL


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


def observable_from_direction(b) -> np.ndarray:
    """Dichotomic qubit observable ``b.sigma`` for a unit direction ``b``."""
    b = np.asarray(b, dtype=float)
    norm = np.linalg.norm(b)
    if b.shape != (3,) or abs(norm - 1) > ATOL_VALID:
        raise InvalidObservableError("direction must be a unit 3-vector")
    return _frozen(b[0] * PAULI_X + b[1] * PAULI_Y + b[2] * PAULI_Z)


def check_observable(b: np.ndarray, atol: float = ATOL_VALID) -> np.ndarray:
    """Return ``b`` as a read-only array after checking ``B = B^dagger``, ``B^2 = I``, ``tr B = 0``."""
    b = np.asarray(b, dtype=complex)
    d = _check_square(b)
    if not is_hermitian(b, atol):
        raise InvalidObservableError("observable is not Hermitian")
    if not allclose(b @ b, np.eye(d), atol):
        raise InvalidObservableError("observable does not square to the identity")
    if abs(np.trace(b)) > atol:
        raise InvalidObservableError("observable is not traceless")
    return _frozen(b)


def kraus_coefficients(lam: float) -> tuple[float, float]:
    """Coefficients ``(alpha, beta)`` of ``K_pm = alpha I pm beta B``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"unsharpness parameter must lie in [0, 1], got {lam}")
    plus = np.sqrt((1 + lam) / 2)
    minus = np.sqrt((1 - lam) / 2)
    return float((minus + plus) / 2), float((plus - minus) / 2)


@dataclass(frozen=True, eq=False)
class UnsharpSetting:
    """A dichotomic observable measured with unsharpness ``lam``.

    ``lam = 1`` is the projective measurement of ``observable``;
    ``lam = 0`` yields the trivial POVM ``{I/2, I/2}``.
    """

    observable: np.ndarray
    lam: float
    alpha: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "observable", check_observable(self.observable))
        alpha, beta = kraus_coefficients(float(self.lam))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def along(cls, direction, lam: float) -> "UnsharpSetting":
        return cls(observable_from_direction(direction), lam)

    @property
    def dim(self) -> int:
        return self.observable.shape[0]

    @cached_property
    def kraus(self) -> tuple[np.ndarray, np.ndarray]:
        return kraus_pair(self)

    @cached_property
    def povm(self) -> tuple[np.ndarray, np.ndarray]:
        return povm_element(self, 0), povm_element(self, 1)


def kraus_pair(s: UnsharpSetting) -> tuple[np.ndarray, np.ndarray]:
    """Kraus operators ``(K_+, K_-)`` with the unitary freedom set to identity."""
    eye = np.eye(s.dim)
    return (_frozen(s.alpha * eye + s.beta * s.observable),
            _frozen(s.alpha * eye - s.beta * s.observable))


def povm_element(s: UnsharpSetting, outcome: int) -> np.ndarray:
    """Effect ``(I + lam (-1)^outcome B) / 2``; outcome 0 corresponds to ``K_+``."""
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    sign = 1 - 2 * outcome
    return _frozen((np.eye(s.dim) + sign * s.lam * s.observable) / 2)


def two_qubit_anticommuting_set() -> tuple[np.ndarray, ...]:
    """Four pairwise anticommuting two-qubit involutions.

    ``XX, XY, XZ, Y1`` in tensor-product order (first factor is the first qubit).
    """
    ops = (np.kron(PAULI_X, PAULI_X), np.kron(PAULI_X, PAULI_Y),
           np.kron(PAULI_X, PAULI_Z), np.kron(PAULI_Y, IDENTITY2))
    return tuple(_frozen(o) for o in ops)
