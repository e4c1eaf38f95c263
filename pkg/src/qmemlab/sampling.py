"""Random states and projectors for the fuzz suites."""
from __future__ import annotations

import numpy as np

from .qmath import DensityOperator


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> DensityOperator:
    """Random mixed state of the given rank (full rank by default)."""
    g = ginibre(rng, dim, rank or dim)
    rho = g @ g.conj().T
    return DensityOperator((dim,), rho / np.trace(rho).real)


def random_projector(rng: np.random.Generator, dim: int, rank: int) -> np.ndarray:
    """Orthogonal projector onto a Haar-random ``rank``-dimensional subspace."""
    q, _ = np.linalg.qr(ginibre(rng, dim, rank))
    return q @ q.conj().T


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = ginibre(rng, dim, dim)
    return (g + g.conj().T) / 2


def random_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(rng, rows, cols))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_kraus(rng: np.random.Generator, dim_in: int, dim_out: int, count: int) -> list[np.ndarray]:
    """Kraus operators cut from a random isometry, so they satisfy completeness."""
    if count * dim_out < dim_in:
        raise ValueError(f"{count} Kraus operators of output dim {dim_out} cannot cover input dim {dim_in}")
    v = random_isometry(rng, count * dim_out, dim_in)
    return [v[i * dim_out:(i + 1) * dim_out] for i in range(count)]


def random_povm(rng: np.random.Generator, dim: int, outcomes: int) -> list[np.ndarray]:
    return [k.conj().T @ k for k in random_kraus(rng, dim, dim, outcomes)]
