"""Dense operators and states for qubits coupled to one truncated oscillator.

Composite ordering is always qubit(s) (x) motion, with qubit basis |0>, |1>
and Fock basis |0_m> ... |M-1_m>.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidDimensionError, InvalidParameterError, TruncationWarning

DEFAULT_FOCK_DIM = 30

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_+ = |1><0|
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()


def sigma_phi(phi: float) -> np.ndarray:
    """e^{i phi} sigma_+ + h.c. = cos(phi) sigma_x + sin(phi) sigma_y."""
    return np.array([[0, np.exp(-1j * phi)], [np.exp(1j * phi), 0]], dtype=complex)


def wrap_phase(phi: float) -> float:
    """Reduce a phase to (-pi, pi]."""
    out = -((-phi + np.pi) % (2 * np.pi) - np.pi)
    return float(out)


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex matrix on a (qubits, motion) Hilbert space.

    ``qubit_dim`` is 1 for motion-only operators and ``fock_dim`` is 1 for
    qubit-only ones.
    """

    data: np.ndarray
    qubit_dim: int = 2
    fock_dim: int = 1

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        n = self.qubit_dim * self.fock_dim
        if data.shape != (n, n):
            raise InvalidDimensionError(
                f"operator shape {data.shape} does not match dims "
                f"({self.qubit_dim}, {self.fock_dim})"
            )
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.qubit_dim, self.fock_dim)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.data, self.data.conj().T, rtol=0, atol=atol))

    def dagger(self) -> OperatorMatrix:
        return OperatorMatrix(self.data.conj().T, self.qubit_dim, self.fock_dim)

    def __add__(self, other: OperatorMatrix) -> OperatorMatrix:
        _check_same_dims(self, other)
        return OperatorMatrix(self.data + other.data, self.qubit_dim, self.fock_dim)

    def __sub__(self, other: OperatorMatrix) -> OperatorMatrix:
        _check_same_dims(self, other)
        return OperatorMatrix(self.data - other.data, self.qubit_dim, self.fock_dim)

    def __matmul__(self, other: OperatorMatrix) -> OperatorMatrix:
        _check_same_dims(self, other)
        return OperatorMatrix(self.data @ other.data, self.qubit_dim, self.fock_dim)

    def __mul__(self, scalar) -> OperatorMatrix:
        return OperatorMatrix(self.data * scalar, self.qubit_dim, self.fock_dim)

    __rmul__ = __mul__


def _check_same_dims(a: OperatorMatrix, b: OperatorMatrix) -> None:
    if a.dims != b.dims:
        raise InvalidDimensionError(f"dimension mismatch {a.dims} vs {b.dims}")


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    return a @ b - b @ a


@dataclass(frozen=True)
class DensityMatrix:
    """Density operator on qubits (x) motion."""

    data: np.ndarray
    qubit_dim: int = 2
    fock_dim: int = 1

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        n = self.qubit_dim * self.fock_dim
        if data.shape != (n, n):
            raise InvalidDimensionError(
                f"density matrix shape {data.shape} does not match dims "
                f"({self.qubit_dim}, {self.fock_dim})"
            )
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.qubit_dim, self.fock_dim)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def check(self, trace_tol: float = 1e-10, herm_tol: float = 1e-12,
              eig_tol: float = 1e-8) -> list[str]:
        """Return the list of violated invariants (empty when valid)."""
        problems = []
        tr = np.trace(self.data)
        if abs(tr - 1) > trace_tol:
            problems.append(f"trace {tr.real:.12g} deviates from 1")
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > herm_tol:
            problems.append(f"non-Hermitian by {herm:.3e}")
        hermitian_part = 0.5 * (self.data + self.data.conj().T)
        emin = np.linalg.eigvalsh(hermitian_part)[0]
        if emin < -eig_tol:
            problems.append(f"negative eigenvalue {emin:.3e}")
        return problems

    def is_valid(self, **tols) -> bool:
        return not self.check(**tols)


def fock_operators(fock_dim: int) -> tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """Truncated ladder operators ``(a, a_dagger, n)`` on the motional space."""
    if int(fock_dim) != fock_dim or fock_dim < 2:
        raise InvalidDimensionError(f"fock_dim must be an integer >= 2, got {fock_dim}")
    fock_dim = int(fock_dim)
    a = np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), k=1).astype(complex)
    ad = a.conj().T.copy()
    n = np.diag(np.arange(fock_dim, dtype=float)).astype(complex)
    return (OperatorMatrix(a, 1, fock_dim), OperatorMatrix(ad, 1, fock_dim),
            OperatorMatrix(n, 1, fock_dim))


def truncation_ok(alpha: complex, fock_dim: int) -> bool:
    return abs(alpha) ** 2 <= fock_dim / 4


def coherent_state(alpha: complex, fock_dim: int = DEFAULT_FOCK_DIM) -> np.ndarray:
    """Fock-basis amplitudes of |alpha>, renormalized after truncation.

    Warns with :class:`TruncationWarning` when ``|alpha|^2 > fock_dim / 4``.
    """
    if fock_dim < 2:
        raise InvalidDimensionError(f"fock_dim must be >= 2, got {fock_dim}")
    alpha = complex(alpha)
    if not truncation_ok(alpha, fock_dim):
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds fock_dim/4 = {fock_dim / 4:.3g}",
            TruncationWarning, stacklevel=2,
        )
    n = np.arange(fock_dim)
    if alpha == 0:
        psi = np.zeros(fock_dim, dtype=complex)
        psi[0] = 1.0
        return psi
    # log-space amplitudes avoid overflow of alpha^n / sqrt(n!)
    log_mag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    psi = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    return psi / np.linalg.norm(psi)


def thermal_populations(n_bar: float, fock_dim: int) -> np.ndarray:
    if n_bar < 0:
        raise InvalidParameterError(f"n_bar must be >= 0, got {n_bar}")
    if n_bar == 0:
        p = np.zeros(fock_dim)
        p[0] = 1.0
        return p
    ratio = n_bar / (1.0 + n_bar)
    p = ratio ** np.arange(fock_dim)
    if p[-1] / p.sum() > 1e-6:
        warnings.warn(
            f"thermal state n_bar={n_bar} poorly truncated at fock_dim={fock_dim}",
            TruncationWarning, stacklevel=3,
        )
    return p / p.sum()


def thermal_state(n_bar: float, fock_dim: int = DEFAULT_FOCK_DIM) -> DensityMatrix:
    """Thermal motional state with mean occupation ``n_bar`` (motion-only)."""
    p = thermal_populations(n_bar, fock_dim)
    return DensityMatrix(np.diag(p).astype(complex), qubit_dim=1, fock_dim=fock_dim)


def tensor_state(qubit_rho, motion_rho: DensityMatrix) -> DensityMatrix:
    """qubit (x) motion product state; ``qubit_rho`` is a ket or density matrix."""
    q = np.asarray(qubit_rho, dtype=complex)
    if q.ndim == 1:
        q = np.outer(q, q.conj())
    m = np.asarray(motion_rho, dtype=complex)
    return DensityMatrix(np.kron(q, m), qubit_dim=q.shape[0], fock_dim=m.shape[0])


def embed_qubit(op: np.ndarray, fock_dim: int) -> OperatorMatrix:
    op = np.asarray(op, dtype=complex)
    return OperatorMatrix(np.kron(op, np.eye(fock_dim)), op.shape[0], fock_dim)


def embed_motion(op, qubit_dim: int = 2) -> OperatorMatrix:
    op = np.asarray(op, dtype=complex)
    return OperatorMatrix(np.kron(np.eye(qubit_dim), op), qubit_dim, op.shape[0])


def partial_trace_motion(rho) -> np.ndarray:
    """Reduced qubit density matrix Tr_motion(rho)."""
    if isinstance(rho, DensityMatrix):
        q, m = rho.dims
        data = rho.data
    else:
        raise InvalidParameterError("partial_trace_motion needs a DensityMatrix")
    return np.einsum("imjm->ij", data.reshape(q, m, q, m))


def partial_trace_qubits(rho: DensityMatrix) -> np.ndarray:
    q, m = rho.dims
    return np.einsum("imin->mn", rho.data.reshape(q, m, q, m))


def purity(rho) -> float:
    """Tr(rho^2) for a DensityMatrix or plain matrix."""
    data = np.asarray(rho, dtype=complex)
    return float(np.real(np.vdot(data.conj().T, data)))


def expectation(rho, op) -> complex:
    return complex(np.trace(np.asarray(rho) @ np.asarray(op)))
