import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmemlab import qmath
from qmemlab.qmath import DensityOperator, StateVector, partial_trace, spectral_norm, tensor
from qmemlab.sampling import ginibre, random_density, random_hermitian, random_projector

KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
KET1 = np.array([[0, 0], [0, 1]], dtype=complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)


def kron_oracle(a, b):
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for i, j, k, l in itertools.product(range(ra), range(rb), range(ca), range(cb)):
        out[i * rb + j, k * cb + l] = a[i, k] * b[j, l]
    return out


def ptrace_oracle(m, da, db, keep_first):
    """Explicit index sums for a bipartite register."""
    if keep_first:
        out = np.zeros((da, da), dtype=complex)
        for i, k, j in itertools.product(range(da), range(da), range(db)):
            out[i, k] += m[i * db + j, k * db + j]
    else:
        out = np.zeros((db, db), dtype=complex)
        for j, l, i in itertools.product(range(db), range(db), range(da)):
            out[j, l] += m[i * db + j, i * db + l]
    return out


seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestTensor:
    def test_identity(self):
        np.testing.assert_array_equal(tensor(np.eye(2), np.eye(2)), np.eye(4))

    def test_basis_case(self):
        out = tensor(KET0, KET1)
        expected = np.zeros((4, 4))
        expected[1, 1] = 1
        np.testing.assert_array_equal(out, expected)

    def test_plus_plus_all_quarter(self):
        np.testing.assert_allclose(tensor(PLUS, PLUS), kron_oracle(PLUS, PLUS))
        np.testing.assert_allclose(tensor(PLUS, PLUS), np.full((4, 4), 0.25))

    def test_slow_index_convention(self, rng):
        a, b = ginibre(rng, 2, 3), ginibre(rng, 3, 2)
        np.testing.assert_allclose(tensor(a, b), kron_oracle(a, b))


class TestPartialTrace:
    def test_epr_marginal(self):
        phi = StateVector(2, np.array([1, 0, 0, 1]) / math.sqrt(2))
        red = partial_trace(phi.density(), [0])
        np.testing.assert_allclose(red.matrix, np.eye(2) / 2, atol=1e-15)

    def test_product_state(self):
        rho = DensityOperator((2, 2), tensor(KET0, KET1))
        np.testing.assert_allclose(partial_trace(rho, [1]).matrix, KET1)

    def test_kept_order_and_dims(self, rng):
        a, b, c = (random_density(rng, d) for d in (2, 3, 2))
        joint = DensityOperator((2, 3, 2), tensor(tensor(a.matrix, b.matrix), c.matrix))
        red = partial_trace(joint, [2, 0])
        assert red.dims == (2, 2)
        np.testing.assert_allclose(red.matrix, tensor(a.matrix, c.matrix), atol=1e-12)

    def test_against_index_oracle(self, rng):
        g = ginibre(rng, 6, 6)
        rho = DensityOperator((2, 3), g @ g.conj().T / np.trace(g @ g.conj().T).real)
        np.testing.assert_allclose(partial_trace(rho, [0]).matrix,
                                   ptrace_oracle(rho.matrix, 2, 3, True), atol=1e-12)
        np.testing.assert_allclose(partial_trace(rho, [1]).matrix,
                                   ptrace_oracle(rho.matrix, 2, 3, False), atol=1e-12)

    def test_out_of_range(self):
        rho = DensityOperator((2, 2), np.eye(4) / 4)
        with pytest.raises(IndexError):
            partial_trace(rho, [2])

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.integers(1, 4), st.integers(1, 4))
    def test_product_recovers_factor(self, seed, da, db):
        r = np.random.default_rng(seed)
        rho, sigma = random_density(r, da), random_density(r, db)
        joint = DensityOperator((da, db), tensor(rho.matrix, sigma.matrix))
        red = partial_trace(joint, [0])
        np.testing.assert_allclose(red.matrix, rho.matrix, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.lists(st.integers(1, 3), min_size=1, max_size=4), st.data())
    def test_trace_and_positivity(self, seed, dims, data):
        r = np.random.default_rng(seed)
        rho = random_density(r, int(np.prod(dims)))
        rho = DensityOperator(tuple(dims), rho.matrix)
        keep = data.draw(st.sets(st.integers(0, len(dims) - 1)))
        red = partial_trace(rho, keep)
        assert abs(np.trace(red.matrix).real - 1) <= 1e-9
        assert np.linalg.eigvalsh(red.matrix)[0] >= -1e-9


class TestSpectralNorm:
    def test_identity(self):
        assert spectral_norm(np.eye(2)) == pytest.approx(1.0, abs=1e-12)

    def test_x0_z0_single_qubit(self):
        # rank-one product |+><+|0><0| has norm |<+|0>| = 2^{-1/2}
        assert spectral_norm(PLUS @ KET0) == pytest.approx(0.7071067812, abs=1e-10)

    def test_zxz_two_qubits(self):
        from qmemlab.protocol import all_messages, basis_projector
        for x in all_messages(2):
            for z in all_messages(2):
                zz = basis_projector(z, "Z")
                assert spectral_norm(zz @ basis_projector(x, "X") @ zz) == pytest.approx(0.25, abs=1e-10)

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((3, 3))) == 0.0

    def test_dimension_cap(self):
        with pytest.raises(qmath.DimensionError):
            spectral_norm(np.zeros((1, qmath.MAX_SVD_DIM + 1)))

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.integers(1, 32))
    def test_submultiplicative(self, seed, d):
        r = np.random.default_rng(seed)
        a, b = ginibre(r, d, d), ginibre(r, d, d)
        assert spectral_norm(a @ b) <= spectral_norm(a) * spectral_norm(b) * (1 + 1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.integers(1, 16), st.data())
    def test_projector_norm_is_zero_or_one(self, seed, d, data):
        rank = data.draw(st.integers(0, d))
        p = random_projector(np.random.default_rng(seed), d, rank)
        assert np.linalg.norm(p @ p - p) <= 1e-9
        expected = 1.0 if rank else 0.0
        assert spectral_norm(p) == pytest.approx(expected, abs=1e-9)


class TestHermEig:
    def test_diagonal(self):
        w, v = qmath.herm_eig(np.diag([0.0, 1.0]))
        np.testing.assert_allclose(w, [0, 1])
        np.testing.assert_allclose(np.abs(v), np.eye(2))

    def test_projector_spectrum(self):
        w, _ = qmath.herm_eig(PLUS)
        np.testing.assert_allclose(w, [0, 1], atol=1e-15)

    def test_reconstruction(self, rng):
        h = random_hermitian(rng, 8)
        w, v = qmath.herm_eig(h)
        assert np.all(np.diff(w) >= 0)
        assert np.linalg.norm(v @ np.diag(w) @ v.conj().T - h) <= 1e-8
        np.testing.assert_allclose(v.conj().T @ v, np.eye(8), atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            qmath.herm_eig(np.array([[0, 1], [0, 0]]))

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.integers(1, 16))
    def test_density_spectrum(self, seed, d):
        w, _ = qmath.herm_eig(random_density(np.random.default_rng(seed), d).matrix)
        assert w[0] >= -1e-9 and w[-1] <= 1 + 1e-9
        assert abs(w.sum() - 1) <= 1e-9


class TestTypes:
    def test_state_vector_normalization(self):
        with pytest.raises(ValueError):
            StateVector(1, [1, 1])

    def test_state_vector_length(self):
        with pytest.raises(qmath.DimensionError):
            StateVector(2, [1, 0])

    def test_density_validation(self):
        with pytest.raises(ValueError, match="trace"):
            DensityOperator((2,), np.eye(2))
        with pytest.raises(ValueError, match="positive"):
            DensityOperator((2,), np.diag([1.5, -0.5]))
        with pytest.raises(ValueError, match="Hermitian"):
            DensityOperator((2,), np.array([[0.5, 1], [0, 0.5]]))

    def test_immutable(self):
        rho = DensityOperator((2,), np.eye(2) / 2)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1

    def test_predicates(self):
        assert qmath.is_projector(PLUS)
        assert not qmath.is_projector(np.eye(2) / 2)
        assert qmath.is_positive_semidefinite(np.eye(2) / 2)
        assert not qmath.is_positive_semidefinite(np.diag([1, -1]))
        assert not qmath.is_hermitian(np.ones((2, 3)))


def test_random_kraus_rejects_undersized(rng):
    from qmemlab.sampling import random_kraus
    with pytest.raises(ValueError):
        random_kraus(rng, 4, 1, 2)
