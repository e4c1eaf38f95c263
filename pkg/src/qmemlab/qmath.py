"""Dense complex linear algebra on qubit registers.

Operators are plain ``numpy`` arrays of dtype ``complex128``. Multi-party
registers use the convention that the leftmost tensor factor is the slowest
varying index, i.e. ``tensor(a, b)[i * db + j, k * db + l] == a[i, k] * b[j, l]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-9
NORM_ATOL = 1e-10
MAX_SVD_DIM = 4096

__all__ = [
    "ATOL",
    "DensityOperator",
    "DimensionError",
    "StateVector",
    "as_matrix",
    "dagger",
    "herm_eig",
    "is_hermitian",
    "is_positive_semidefinite",
    "is_projector",
    "partial_trace",
    "psd_sqrt",
    "spectral_norm",
    "tensor",
    "tensor_all",
]


class DimensionError(ValueError):
    """Raised when operator or register dimensions do not line up."""


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a 2-d complex128 array (no copy when already one)."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {m.shape}")
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def tensor(a, b) -> np.ndarray:
    """Kronecker product, ``a`` being the slow (outer) index."""
    return np.kron(as_matrix(a), as_matrix(b))


def tensor_all(ops: Iterable) -> np.ndarray:
    ops = list(ops)
    if not ops:
        return np.ones((1, 1), dtype=np.complex128)
    return reduce(tensor, ops)


def is_hermitian(a, tol: float = ATOL) -> bool:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_positive_semidefinite(a, tol: float = ATOL) -> bool:
    m = as_matrix(a)
    if not is_hermitian(m, tol):
        return False
    return bool(np.linalg.eigvalsh((m + dagger(m)) / 2)[0] >= -tol)


def is_projector(a, tol: float = ATOL) -> bool:
    m = as_matrix(a)
    if not is_hermitian(m, tol):
        return False
    return bool(np.linalg.norm(m @ m - m) <= tol)


def spectral_norm(a) -> float:
    """Largest singular value of ``a``.

    Computed from a full singular value decomposition; matrices are capped at
    ``MAX_SVD_DIM`` rows and columns.
    """
    m = as_matrix(a)
    if m.size == 0:
        return 0.0
    if max(m.shape) > MAX_SVD_DIM:
        raise DimensionError(
            f"spectral_norm limited to {MAX_SVD_DIM} dims, got {m.shape}"
        )
    return float(np.linalg.svd(m, compute_uv=False)[0])


def herm_eig(h, tol: float = ATOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Parameters
    ----------
    h : array_like
        Square matrix, Hermitian within ``tol`` (max-abs entrywise).
    tol : float
        Hermiticity tolerance.

    Returns
    -------
    (eigenvalues, V)
        Real eigenvalues in ascending order and a unitary ``V`` whose columns
        are the eigenvectors, so that ``h == V @ diag(eigenvalues) @ V^dagger``.

    Raises
    ------
    ValueError
        If ``h`` is not Hermitian.
    """
    m = as_matrix(h)
    if not is_hermitian(m, tol):
        raise ValueError("herm_eig requires a Hermitian matrix")
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    return w, v


def psd_sqrt(a, cutoff: float = 0.0) -> np.ndarray:
    """Principal square root of a PSD matrix; eigenvalues <= cutoff become 0."""
    w, v = herm_eig(a)
    w = np.where(w > cutoff, w, 0.0)
    return (v * np.sqrt(w)) @ dagger(v)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state of ``num_qubits`` qubits."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if self.num_qubits < 0 or amps.shape[0] != 2**self.num_qubits:
            raise DimensionError(
                f"{self.num_qubits} qubits need {2 ** self.num_qubits} amplitudes, "
                f"got {amps.shape[0]}"
            )
        if abs(np.linalg.norm(amps) - 1.0) > ATOL:
            raise ValueError("state vector is not normalized")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, np.conj(self.amplitudes))

    def density(self, dims: Sequence[int] | None = None) -> "DensityOperator":
        return DensityOperator(dims or (2,) * self.num_qubits or (1,), self.projector())


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Mixed state on a register with subsystem dimensions ``dims``.

    The constructor validates Hermiticity, unit trace and positivity at
    ``ATOL``; pass ``check=False`` only for intermediates known to be valid.
    """

    dims: tuple
    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid subsystem dims {self.dims}")
        m = as_matrix(self.matrix)
        total = int(np.prod(dims))
        if m.shape != (total, total):
            raise DimensionError(f"dims {dims} need a {total}x{total} matrix, got {m.shape}")
        if self.check:
            if not is_hermitian(m):
                raise ValueError("density operator is not Hermitian")
            if abs(np.trace(m).real - 1.0) > ATOL:
                raise ValueError(f"density operator trace {np.trace(m).real} != 1")
            if np.linalg.eigvalsh((m + dagger(m)) / 2)[0] < -ATOL:
                raise ValueError("density operator is not positive semidefinite")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expect(self, op) -> float:
        """Real part of tr(rho op)."""
        return float(np.real(np.einsum("ij,ji->", self.matrix, as_matrix(op))))


def partial_trace(rho: DensityOperator, keep: Iterable[int]) -> DensityOperator:
    """Trace out every subsystem not in ``keep``.

    Kept subsystems stay in their original order. Raises ``IndexError`` for
    indices outside ``range(len(rho.dims))``.
    """
    dims = rho.dims
    keep = sorted(set(keep))
    for k in keep:
        if not 0 <= k < len(dims):
            raise IndexError(f"subsystem {k} out of range for dims {dims}")
    drop = [i for i in range(len(dims)) if i not in keep]
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    perm = keep + drop
    t = t.transpose(perm + [p + n for p in perm])
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    dd = int(np.prod([dims[i] for i in drop])) if drop else 1
    reduced = np.trace(t.reshape(dk, dd, dk, dd), axis1=1, axis2=3)
    kept_dims = tuple(dims[i] for i in keep) or (1,)
    return DensityOperator(kept_dims, reduced, check=False)
