"""ISI power analysis, signal-to-error ratio and Jarque-Bera normality tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .channel import ChannelRealization, OfdmConfig, PowerDelayProfile, isi_first_row
from .freqsim import check_band, reduce_band
from .toeplitz import ToeplitzSpectrum

POWER_FLOOR = 1e-300
DB_FLOOR = -3000.0


def to_db(power) -> np.ndarray:
    """``10 log10`` with powers below 1e-300 clamped to -3000 dB."""
    power = np.asarray(power, dtype=float)
    return np.where(power < POWER_FLOOR, DB_FLOOR, 10.0 * np.log10(np.maximum(power, POWER_FLOOR)))


def qam16() -> np.ndarray:
    """Gray-free 16-QAM alphabet scaled to unit average power."""
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    points = (levels[:, None] + 1j * levels[None, :]).reshape(-1)
    return points / np.sqrt(10.0)


def expected_phi_power(rho: np.ndarray, n: int, offset) -> np.ndarray | float:
    """Average ``|Phi[k, k + offset]|**2`` over rows ``k`` (cyclic).

    ``(cot(pi d / N)**2 + 1) / N**2 * sum_k |rho_k|**2 sin(pi d k / N)**2``
    with ``d = offset``. Feeding ``|rho_k|**2 = a_k`` from a power delay
    profile gives the expectation over Rayleigh fading as well.
    """
    rho = np.asarray(rho)
    if rho.shape[-1] != n:
        raise ValueError(f"rho must have length N = {n}")
    offsets = np.atleast_1d(np.asarray(offset))
    if np.any(offsets < 1) or np.any(offsets > n - 1):
        raise ValueError("offset must lie in 1 .. N-1; use the diagonal formula for offset 0")
    k = np.arange(n)
    weights = np.abs(rho) ** 2
    sines = np.sin(np.pi * np.outer(offsets, k) / n) ** 2
    cot2 = 1.0 / np.tan(np.pi * offsets / n) ** 2
    power = (cot2 + 1.0) / n ** 2 * (sines @ weights)
    return float(power[0]) if np.ndim(offset) == 0 else power


def undistorted_power(ch: ChannelRealization, u: int) -> float:
    """``E|G[n, n] s_n|**2`` for unit-power symbols: ``sum_m |h(u, m)|**2``."""
    h = ch.cir(u)
    return float(np.sum(np.abs(h) ** 2))


@dataclass(frozen=True)
class IsiPowerProfile:
    offsets: np.ndarray
    expected_power: np.ndarray
    reference_power: float

    @property
    def relative_db(self) -> np.ndarray:
        return to_db(self.expected_power / self.reference_power)


def isi_power_profile(pdp: PowerDelayProfile, cfg: OfdmConfig) -> IsiPowerProfile:
    """ISI power per subcarrier offset relative to an undistorted subcarrier.

    Uses the profile's average gains, i.e. the expectation over fading.
    """
    h_power = np.zeros(cfg.n)
    h_power[pdp.delays] = pdp.gains
    rho_power = np.abs(isi_first_row(np.sqrt(h_power), cfg.cp)) ** 2
    offsets = np.arange(1, cfg.n)
    power = expected_phi_power(np.sqrt(rho_power), cfg.n, offsets)
    return IsiPowerProfile(offsets, power, float(h_power.sum()))


def ser(reduced: np.ndarray, complete: np.ndarray) -> float:
    """Signal-to-error ratio ``20 log10(|r_reduced| / |r_reduced - r_complete|)`` in dB.

    Returns ``inf`` when both responses coincide.
    """
    reduced = np.asarray(reduced).ravel()
    complete = np.asarray(complete).ravel()
    if reduced.shape != complete.shape:
        raise ValueError("responses must have equal length")
    ref = np.linalg.norm(reduced)
    if ref == 0:
        raise ValueError("reduced response has zero norm")
    err = np.linalg.norm(reduced - complete)
    if err == 0:
        return float("inf")
    return float(20.0 * np.log10(ref / err))


@dataclass(frozen=True)
class JbResult:
    statistic: float
    p_value: float
    sample_size: int
    skewness: float = 0.0
    excess_kurtosis: float = 0.0


@dataclass(frozen=True)
class ComplexJbResult:
    real: JbResult | None
    imag: JbResult | None
    pooled: JbResult | None
    degenerate: bool = False


def jb_statistic(samples) -> tuple[float, float, float]:
    """``(JB, skewness, excess kurtosis)`` with biased (1/n) central moments.

    ``JB = n/6 (S**2 + (K - 3)**2 / 4)``. No sample-size check; a
    zero-variance sample raises ``ValueError``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    if m2 <= (np.finfo(float).eps * max(1.0, np.max(np.abs(x)))) ** 2:
        raise ValueError("degenerate sample: zero variance")
    skew = np.mean(d ** 3) / m2 ** 1.5
    excess = np.mean(d ** 4) / m2 ** 2 - 3.0
    return float(n / 6.0 * (skew ** 2 + excess ** 2 / 4.0)), float(skew), float(excess)


def jarque_bera(samples) -> JbResult:
    """Jarque-Bera normality test with the asymptotic chi-square(2) p-value."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 20:
        raise ValueError(f"Jarque-Bera needs at least 20 samples, got {x.size}")
    jb, skew, excess = jb_statistic(x)
    return JbResult(jb, float(stats.chi2.sf(jb, 2)), x.size, skew, excess)


def complex_jarque_bera(samples) -> ComplexJbResult:
    """JB on real and imaginary parts separately and on both pooled into one sample.

    A constant sample (e.g. a residual that is identically zero) is flagged
    as degenerate instead of raising.
    """
    z = np.asarray(samples, dtype=np.complex128).ravel()
    try:
        pooled = jarque_bera(np.concatenate([z.real, z.imag]))
    except ValueError:
        return ComplexJbResult(None, None, None, degenerate=True)
    parts = []
    for part in (z.real, z.imag):
        try:
            parts.append(jarque_bera(part))
        except ValueError:
            parts.append(None)
    return ComplexJbResult(parts[0], parts[1], pooled)


def residual_row(phi: ToeplitzSpectrum, b: int, row: int) -> np.ndarray:
    """Row ``row`` of ``Phi - Phi_b``."""
    n = phi.n
    if not 0 <= row < n:
        raise IndexError(f"row {row} out of range for N = {n}")
    b = check_band(b, n)
    cols = np.arange(n)
    full = np.empty(n, dtype=np.complex128)
    off = cols != row
    env = 1.0 / (1.0 - np.exp(-2j * np.pi * (row - cols[off]) / n))
    full[off] = env * (phi.xi[cols[off]] - phi.xi[row]) / np.sqrt(n)
    full[row] = phi.diagonal[row]
    dist = np.abs(row - cols)
    keep = (dist <= b) | (dist >= n - b + 1)
    return np.where(keep, 0, full)


def residual_isi_samples(phi: ToeplitzSpectrum, b: int, row: int, n_draws: int,
                         constellation: np.ndarray | None = None, seed=None,
                         chunk: int = 8192) -> np.ndarray:
    """Draws of ``sum_k [Phi - Phi_b][row, k] s_k`` with fresh i.i.d. symbols ``s`` per draw."""
    alphabet = qam16() if constellation is None else np.asarray(constellation, dtype=np.complex128)
    coeffs = residual_row(phi, b, row)
    return _linear_form_draws(coeffs[:, None], n_draws, alphabet, np.random.default_rng(seed), chunk)[:, 0]


def _linear_form_draws(coeffs: np.ndarray, n_draws: int, alphabet: np.ndarray,
                       rng: np.random.Generator, chunk: int) -> np.ndarray:
    """``S @ coeffs`` for ``n_draws`` rows ``S`` of symbols drawn uniformly from ``alphabet``."""
    out = np.empty((n_draws, coeffs.shape[1]), dtype=np.complex128)
    n = coeffs.shape[0]
    for start in range(0, n_draws, chunk):
        stop = min(start + chunk, n_draws)
        idx = rng.integers(0, alphabet.size, size=(stop - start, n))
        out[start:stop] = alphabet[idx] @ coeffs
    return out


def residual_isi_batch(phi: ToeplitzSpectrum, bands, row: int, n_draws: int,
                       constellation: np.ndarray | None = None, seed=None,
                       chunk: int = 8192) -> np.ndarray:
    """Like :func:`residual_isi_samples` for several bands sharing the same symbol draws.

    Returns shape ``(n_draws, len(bands))``.
    """
    alphabet = qam16() if constellation is None else np.asarray(constellation, dtype=np.complex128)
    coeffs = np.stack([residual_row(phi, b, row) for b in bands], axis=1)
    return _linear_form_draws(coeffs, n_draws, alphabet, np.random.default_rng(seed), chunk)


@dataclass(frozen=True)
class SerCurve:
    bands: list
    ser_db: np.ndarray


def band_energy_fraction(phi: ToeplitzSpectrum, b: int) -> float:
    """Share of ``||Phi||_F**2`` inside the band."""
    banded = reduce_band(phi, b)
    inside = np.sum(np.abs(banded.diagonals) ** 2)
    total = np.sum(np.abs(phi.diagonal) ** 2)
    for d in range(1, phi.n):
        total += np.sum(np.abs(phi.diagonal_band(d)) ** 2)
    return float(inside / total) if total > 0 else 1.0
