"""Fast two-sided DFT of upper-triangular Toeplitz matrices.

For an N x N upper-triangular Toeplitz matrix ``B`` with first row ``rho``
(``B[i, j] = rho[j - i]`` for ``j >= i``) the similarity transform
``Phi = F B F^H`` with the unitary DFT matrix ``F`` is fully described by two
length-N vectors:

* ``xi = F^H rho``, which generates every off-diagonal entry through
  ``Phi[n, m] = (xi[m] - xi[n]) / (sqrt(N) * (1 - w**(n - m)))``;
* the diagonal ``F^H ([N, N-1, ..., 1] * rho) / sqrt(N)``.

Both come from one inverse FFT each, so the whole spectrum costs O(N log N)
and O(N) memory. The dense product is only built on request.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORACLE_SIZE_CAP = 256


@dataclass(frozen=True)
class FourierConvention:
    """Unitary DFT, ``F[n, m] = exp(-2j*pi*n*m/N) / sqrt(N)``."""

    n: int

    @property
    def root(self) -> complex:
        return np.exp(-2j * np.pi / self.n)

    def matrix(self) -> np.ndarray:
        k = np.arange(self.n)
        return np.exp(-2j * np.pi * np.outer(k, k) / self.n) / np.sqrt(self.n)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.fft.fft(x, norm="ortho")

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return np.fft.ifft(x, norm="ortho")


@dataclass(frozen=True)
class TriangularToeplitz:
    """Upper-triangular Toeplitz matrix stored by its first row."""

    first_row: np.ndarray

    def __post_init__(self):
        row = np.asarray(self.first_row, dtype=np.complex128).reshape(-1)
        if row.size < 2:
            raise ValueError(f"dimension must be >= 2, got {row.size}")
        if not np.all(np.isfinite(row)):
            raise ValueError("first_row contains non-finite values")
        row.setflags(write=False)
        object.__setattr__(self, "first_row", row)

    @property
    def n(self) -> int:
        return self.first_row.size

    def dense(self) -> np.ndarray:
        n = self.n
        i, j = np.indices((n, n))
        out = np.zeros((n, n), dtype=np.complex128)
        upper = j >= i
        out[upper] = self.first_row[(j - i)[upper]]
        return out


@dataclass(frozen=True)
class ToeplitzSpectrum:
    """Implicit ``F B F^H``: generator ``xi`` plus the diagonal.

    Accuracy is worst right next to the diagonal, where ``xi[m] - xi[n]``
    cancels and ``1 - w**(n-m)`` is smallest.
    """

    xi: np.ndarray
    diagonal: np.ndarray

    @property
    def n(self) -> int:
        return self.xi.shape[-1]

    def entry(self, n: int, m: int) -> complex:
        return reconstruct_entry(self, n, m)

    def dense(self) -> np.ndarray:
        """Materialize the full N x N matrix (O(N^2) memory)."""
        n = self.n
        env = envelope_matrix(n)
        gamma = self.xi[None, :] - self.xi[:, None]
        out = env * gamma / np.sqrt(n)
        out[np.diag_indices(n)] = self.diagonal
        return out

    def diagonal_band(self, offset: int) -> np.ndarray:
        """Cyclic diagonal ``d[n] = Phi[n, (n + offset) % N]`` for ``offset != 0``."""
        n = self.n
        offset %= n
        if offset == 0:
            return self.diagonal.copy()
        m = (np.arange(n) + offset) % n
        env = 1.0 / (1.0 - np.exp(2j * np.pi * offset / n))
        return env * (self.xi[..., m] - self.xi) / np.sqrt(n)

    def __add__(self, other: "ToeplitzSpectrum") -> "ToeplitzSpectrum":
        return ToeplitzSpectrum(self.xi + other.xi, self.diagonal + other.diagonal)

    def scale(self, alpha: complex) -> "ToeplitzSpectrum":
        return ToeplitzSpectrum(alpha * self.xi, alpha * self.diagonal)


def _row_of(b) -> np.ndarray:
    if isinstance(b, TriangularToeplitz):
        return b.first_row
    return TriangularToeplitz(b).first_row


def toeplitz_dft(b) -> ToeplitzSpectrum:
    """Compute ``F B F^H`` for upper-triangular Toeplitz ``B`` in O(N log N).

    ``b`` is a :class:`TriangularToeplitz` or its first row. A 2-D array is
    taken as a stack of first rows (one per symbol) and yields stacked
    generators.
    """
    if isinstance(b, np.ndarray) and b.ndim == 2:
        rho = b.astype(np.complex128, copy=False)
        if rho.shape[-1] < 2 or not np.all(np.isfinite(rho)):
            raise ValueError("first rows must have length >= 2 and be finite")
    else:
        rho = _row_of(b)
    n = rho.shape[-1]
    xi = np.fft.ifft(rho, norm="ortho", axis=-1)
    sawtooth = np.arange(n, 0, -1, dtype=np.float64)
    diagonal = np.fft.ifft(sawtooth * rho, norm="ortho", axis=-1) / np.sqrt(n)
    return ToeplitzSpectrum(xi=xi, diagonal=diagonal)


def dense_toeplitz_dft_oracle(b, size_cap: int = ORACLE_SIZE_CAP) -> np.ndarray:
    """Brute-force ``F B F^H`` with dense O(N^3) products. Verification only."""
    if not isinstance(b, TriangularToeplitz):
        b = TriangularToeplitz(b)
    if b.n > size_cap:
        raise ValueError(f"oracle limited to N <= {size_cap}, got N = {b.n}")
    f = FourierConvention(b.n).matrix()
    return f @ b.dense() @ f.conj().T


def reconstruct_entry(spec: ToeplitzSpectrum, n: int, m: int) -> complex:
    """Entry ``Phi[n, m]`` in O(1) from the stored generator."""
    size = spec.n
    if not (0 <= n < size and 0 <= m < size):
        raise IndexError(f"index ({n}, {m}) out of range for N = {size}")
    if n == m:
        return complex(spec.diagonal[n])
    return complex(envelope_entry(size, n, m) * (spec.xi[m] - spec.xi[n]) / np.sqrt(size))


def envelope_entry(n_fft: int, n: int, m: int) -> complex:
    """``1 / (1 - w**(n-m))`` off the diagonal, 0 on it; ``w = exp(-2j*pi/N)``."""
    if not (0 <= n < n_fft and 0 <= m < n_fft):
        raise IndexError(f"index ({n}, {m}) out of range for N = {n_fft}")
    if n == m:
        return 0j
    return complex(1.0 / (1.0 - np.exp(-2j * np.pi * (n - m) / n_fft)))


def envelope_cot(n_fft: int, n: int, m: int) -> complex:
    """Same envelope via ``1/(1 - exp(jz)) = (1 + j cot(z/2)) / 2``."""
    if n == m:
        return 0j
    z = -2.0 * np.pi * (n - m) / n_fft
    return complex(0.5 * (1.0 + 1j / np.tan(z / 2.0)))


def envelope_matrix(n_fft: int) -> np.ndarray:
    k = np.arange(n_fft)
    diff = k[:, None] - k[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        env = 1.0 / (1.0 - np.exp(-2j * np.pi * diff / n_fft))
    env[np.diag_indices(n_fft)] = 0.0
    return env
