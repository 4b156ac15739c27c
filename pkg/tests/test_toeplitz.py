import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfrsim.toeplitz import (
    FourierConvention,
    TriangularToeplitz,
    dense_toeplitz_dft_oracle,
    envelope_cot,
    envelope_entry,
    envelope_matrix,
    reconstruct_entry,
    toeplitz_dft,
)


def random_row(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def mixed_error(a, b):
    return np.max(np.abs(a - b) / (1 + np.abs(b)))


def geometric_double_sum(rho, n, m):
    """Element (n, m) by the grouped double sum over rho and the geometric terms."""
    size = rho.size
    w = np.exp(-2j * np.pi / size)
    total = 0j
    for k in range(size):
        inner = sum(w ** (l * (n - m)) for l in range(size - k))
        total += rho[k] * w ** (-k * m) * inner
    return total / size


class TestFourierConvention:
    def test_unitary(self):
        f = FourierConvention(8).matrix()
        np.testing.assert_allclose(f @ f.conj().T, np.eye(8), atol=1e-13)

    def test_matches_numpy_ortho(self):
        x = random_row(np.random.default_rng(0), 16)
        f = FourierConvention(16)
        np.testing.assert_allclose(f.matrix() @ x, f.forward(x), atol=1e-12)
        np.testing.assert_allclose(f.matrix().conj().T @ x, f.inverse(x), atol=1e-12)


class TestToeplitzDft:
    def test_zero_row(self):
        spec = toeplitz_dft(np.zeros(8))
        assert np.all(spec.xi == 0)
        assert np.all(spec.diagonal == 0)
        assert np.all(spec.dense() == 0)

    def test_scaled_identity(self):
        c = 0.7 - 1.3j
        rho = np.zeros(8, dtype=complex)
        rho[0] = c
        spec = toeplitz_dft(rho)
        # xi is constant so every xi_m - xi_n vanishes
        np.testing.assert_allclose(spec.xi, c / np.sqrt(8))
        np.testing.assert_allclose(spec.dense(), c * np.eye(8), atol=1e-14)

    def test_random_matches_oracle(self):
        rho = random_row(np.random.default_rng(1), 16)
        assert mixed_error(toeplitz_dft(rho).dense(), dense_toeplitz_dft_oracle(rho)) < 1e-10

    def test_accepts_matrix_object(self):
        rho = random_row(np.random.default_rng(2), 8)
        np.testing.assert_array_equal(toeplitz_dft(TriangularToeplitz(rho)).xi, toeplitz_dft(rho).xi)

    def test_stacked_rows(self):
        rows = random_row(np.random.default_rng(3), 32).reshape(4, 8)
        stacked = toeplitz_dft(rows)
        for i in range(4):
            single = toeplitz_dft(rows[i])
            np.testing.assert_allclose(stacked.xi[i], single.xi)
            np.testing.assert_allclose(stacked.diagonal[i], single.diagonal)

    @pytest.mark.parametrize("bad", [[1.0], [1.0, np.nan], [np.inf, 0.0, 0.0]])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(ValueError):
            toeplitz_dft(np.array(bad))

    def test_upper_triangular_dense(self):
        b = TriangularToeplitz([0, 1, 2, 3]).dense()
        expected = np.array([[0, 1, 2, 3], [0, 0, 1, 2], [0, 0, 0, 1], [0, 0, 0, 0]])
        np.testing.assert_array_equal(b, expected)


class TestDenseOracle:
    def test_single_superdiagonal_against_double_sum(self):
        rho = np.array([0, 1, 0, 0], dtype=complex)
        oracle = dense_toeplitz_dft_oracle(rho)
        for n in range(4):
            for m in range(4):
                assert abs(oracle[n, m] - geometric_double_sum(rho, n, m)) < 1e-13

    def test_zero(self):
        assert np.all(dense_toeplitz_dft_oracle(np.zeros(4)) == 0)

    def test_trace_matches_fast_diagonal(self):
        rho = random_row(np.random.default_rng(4), 8)
        oracle = dense_toeplitz_dft_oracle(rho)
        assert abs(np.trace(oracle) - toeplitz_dft(rho).diagonal.sum()) < 1e-12
        # trace is similarity-invariant: N * rho_0
        assert abs(np.trace(oracle) - 8 * rho[0]) < 1e-12

    def test_size_cap(self):
        with pytest.raises(ValueError, match="oracle limited"):
            dense_toeplitz_dft_oracle(np.zeros(512))


class TestReconstructEntry:
    def test_diagonal_lookup(self):
        spec = toeplitz_dft(random_row(np.random.default_rng(5), 8))
        assert reconstruct_entry(spec, 3, 3) == spec.diagonal[3]

    def test_off_diagonal_matches_oracle(self):
        rho = random_row(np.random.default_rng(6), 8)
        spec = toeplitz_dft(rho)
        assert abs(reconstruct_entry(spec, 0, 1) - dense_toeplitz_dft_oracle(rho)[0, 1]) < 1e-10

    @pytest.mark.parametrize("real", [True, False])
    def test_transposed_magnitudes_agree(self, real):
        rng = np.random.default_rng(7)
        rho = rng.standard_normal(12) if real else random_row(rng, 12)
        oracle = dense_toeplitz_dft_oracle(rho)
        off = ~np.eye(12, dtype=bool)
        np.testing.assert_allclose(np.abs(oracle)[off], np.abs(oracle.T)[off], rtol=1e-9, atol=1e-12)
        spec = toeplitz_dft(rho)
        for n, m in [(0, 5), (3, 11), (7, 2)]:
            assert abs(abs(spec.entry(n, m)) - abs(spec.entry(m, n))) < 1e-12

    @pytest.mark.parametrize("n,m", [(-1, 0), (0, 8), (8, 8)])
    def test_index_range(self, n, m):
        spec = toeplitz_dft(np.zeros(8))
        with pytest.raises(IndexError):
            reconstruct_entry(spec, n, m)

    def test_diagonal_band_matches_entries(self):
        spec = toeplitz_dft(random_row(np.random.default_rng(8), 10))
        dense = spec.dense()
        rows = np.arange(10)
        for d in (-3, -1, 0, 2, 5):
            np.testing.assert_allclose(spec.diagonal_band(d), dense[rows, (rows + d) % 10], atol=1e-13)


class TestEnvelope:
    def test_zero_diagonal(self):
        assert envelope_entry(8, 2, 2) == 0

    def test_half_period(self):
        assert abs(envelope_entry(4, 2, 0) - 0.5) < 1e-15
        assert abs(envelope_cot(4, 2, 0) - 0.5) < 1e-15

    def test_cot_identity_everywhere(self):
        for n in range(16):
            for m in range(16):
                assert abs(envelope_entry(16, n, m) - envelope_cot(16, n, m)) < 1e-12

    def test_hermitian(self):
        rng = np.random.default_rng(9)
        for n, m in rng.integers(0, 32, size=(20, 2)):
            assert envelope_entry(32, n, m) == pytest.approx(np.conj(envelope_entry(32, m, n)))
        env = envelope_matrix(32)
        np.testing.assert_allclose(env, env.conj().T, atol=1e-13)

    def test_index_range(self):
        with pytest.raises(IndexError):
            envelope_entry(4, 4, 0)


rows = st.integers(min_value=2, max_value=32).flatmap(
    lambda n: st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                       min_size=n, max_size=n)
)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(rows)
    def test_oracle_equivalence(self, row):
        rho = np.array(row)
        assert mixed_error(toeplitz_dft(rho).dense(), dense_toeplitz_dft_oracle(rho)) < 1e-9 * max(1, np.abs(rho).max())

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 24), st.integers(0, 2 ** 32 - 1),
           st.complex_numbers(max_magnitude=10, allow_nan=False), st.complex_numbers(max_magnitude=10, allow_nan=False))
    def test_linearity(self, n, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        r1, r2 = random_row(rng, n), random_row(rng, n)
        combined = toeplitz_dft(alpha * r1 + beta * r2).dense()
        separate = (toeplitz_dft(r1).scale(alpha) + toeplitz_dft(r2).scale(beta)).dense()
        np.testing.assert_allclose(combined, separate, atol=1e-10 * (1 + abs(alpha) + abs(beta)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 32), st.integers(0, 2 ** 32 - 1))
    def test_hadamard_decomposition(self, n, seed):
        rho = random_row(np.random.default_rng(seed), n)
        spec = toeplitz_dft(rho)
        gamma = spec.xi[None, :] - spec.xi[:, None]
        sawtooth = np.arange(n, 0, -1)
        diag = FourierConvention(n).inverse(sawtooth * rho)
        phi = (envelope_matrix(n) * gamma + np.diag(diag)) / np.sqrt(n)
        np.testing.assert_allclose(phi, spec.dense(), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 64), st.integers(0, 2 ** 32 - 1))
    def test_trace_and_frobenius(self, n, seed):
        rho = random_row(np.random.default_rng(seed), n)
        spec = toeplitz_dft(rho)
        b = TriangularToeplitz(rho).dense()
        assert abs(spec.diagonal.sum() - np.trace(b)) < 1e-10 * n
        assert np.linalg.norm(spec.dense()) == pytest.approx(np.linalg.norm(b), rel=1e-11)
