"""Frequency-domain transmission with a (banded) interference CFR.

A received OFDM symbol in the frequency domain is

    r_u = G s_u + Phi (s_{u-1} - W s_u) + eta_u

with ``G`` the diagonal channel frequency response, ``W`` the CP phase ramp
and ``Phi = F B F^H`` the ISI matrix. ``Phi`` is kept as a
:class:`~cfrsim.toeplitz.ToeplitzSpectrum` and reduced to a cyclic band of
half-width ``b`` for cheap products.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from math import log2

import numpy as np

from .channel import BlockMatrices, NoiseModel, OfdmConfig, PowerDelayProfile, isi_first_row
from .toeplitz import ToeplitzSpectrum, toeplitz_dft

FULL = "full"
NONE = "none"


def check_band(b, n: int):
    """Normalize a band spec: int ``0 <= b <= N/2``, ``"full"`` or ``"none"`` (Phi = 0)."""
    if b is None or b == FULL:
        return FULL
    if b == NONE:
        return NONE
    if isinstance(b, (bool, np.bool_)) or not isinstance(b, (int, np.integer)):
        raise ValueError(f"band must be an integer, 'full' or 'none', got {b!r}")
    if not 0 <= b <= n // 2:
        raise ValueError(f"band must satisfy 0 <= b <= N/2 = {n // 2}, got {b}")
    return int(b)


def band_mask(n: int, b: int) -> np.ndarray:
    """Dense mask of ``|n-m| <= b or |n-m| >= N-b+1``."""
    k = np.arange(n)
    dist = np.abs(k[:, None] - k[None, :])
    return (dist <= b) | (dist >= n - b + 1)


def _diagonal_rows(n: int, b: int, offset: int) -> np.ndarray | None:
    """Rows kept on cyclic diagonal ``offset``; ``None`` means all of them.

    Diagonals strictly inside the band are kept whole. The two edge
    diagonals ``+-b`` keep only their non-wrapping part, which is what the
    ``N - b + 1`` bound implies; at ``b = N/2`` the two halves tile the single
    antipodal diagonal exactly once.
    """
    if abs(offset) < b or b == 0:
        return None
    rows = np.arange(n)
    if offset > 0:
        return rows < n - b
    return rows >= b


@dataclass(frozen=True)
class BandedCfr:
    """Cyclic band of ``Phi`` stored as ``2b + 1`` diagonals.

    ``diagonals[i, n] = Phi[n, (n + offsets[i]) % N]`` inside the band and 0
    outside it.
    """

    diagonals: np.ndarray
    b: int

    @property
    def n(self) -> int:
        return self.diagonals.shape[-1]

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.b, self.b + 1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``Phi_band @ x``; ``x`` may carry leading batch axes matching the diagonals."""
        x = np.asarray(x, dtype=np.complex128)
        out = np.zeros(np.broadcast_shapes(x.shape, self.diagonals.shape[1:]), dtype=np.complex128)
        for i, d in enumerate(self.offsets):
            out += self.diagonals[i] * np.roll(x, -d, axis=-1)
        return out

    def entry(self, n: int, m: int) -> complex:
        size = self.n
        d = (m - n) % size
        # at b = N/2 the antipodal diagonal is split over offsets +b and -b
        return complex(sum(self.diagonals[off + self.b, n] for off in (d, d - size) if abs(off) <= self.b))

    def dense(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n, n), dtype=np.complex128)
        rows = np.arange(n)
        for i, d in enumerate(self.offsets):
            out[rows, (rows + d) % n] += self.diagonals[i]
        return out


def reduce_band(phi: ToeplitzSpectrum, b: int) -> BandedCfr:
    """Keep the cyclic band ``|n-m| <= b or |n-m| >= N-b+1`` of ``Phi``."""
    n = phi.n
    b = check_band(b, n)
    if not isinstance(b, int):
        raise ValueError("reduce_band needs an integer band")
    diagonals = np.zeros(phi.xi.shape[:-1] + (2 * b + 1, n), dtype=np.complex128)
    diagonals = np.moveaxis(diagonals, -2, 0)
    for i, d in enumerate(range(-b, b + 1)):
        diag = phi.diagonal_band(d)
        keep = _diagonal_rows(n, b, d)
        if keep is not None:
            diag = np.where(keep, diag, 0)
        diagonals[i] = diag
    return BandedCfr(diagonals, b)


def phi_full_product(rho: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact ``Phi @ x = F B F^H x`` in O(N log N) via linear correlation with ``rho``.

    ``(B z)[i] = sum_k rho[k] z[i + k]``; rows may be stacked along leading axes.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    z = np.fft.ifft(x, norm="ortho", axis=-1)
    size = 2 * n
    # correlation = convolution of z with reversed rho
    corr = np.fft.ifft(np.fft.fft(z, size, axis=-1) * np.fft.fft(rho[..., ::-1], size, axis=-1), axis=-1)
    bz = corr[..., n - 1:2 * n - 1]
    return np.fft.fft(bz, norm="ortho", axis=-1)


@dataclass(frozen=True)
class FreqDomainChannel:
    """Per-symbol frequency-domain channel: CFR diagonal, ISI spectrum, phase ramp."""

    g_diag: np.ndarray
    phi: ToeplitzSpectrum
    w_diag: np.ndarray
    rho: np.ndarray
    band: object = FULL
    banded: BandedCfr | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.g_diag.shape[-1]

    def apply_phi(self, x: np.ndarray) -> np.ndarray:
        if self.band == NONE:
            return np.zeros(np.broadcast_shapes(np.shape(x), self.g_diag.shape), dtype=np.complex128)
        if self.band == FULL:
            return phi_full_product(self.rho, x)
        return self.banded.matvec(x)

    def with_band(self, b) -> "FreqDomainChannel":
        b = check_band(b, self.n)
        banded = reduce_band(self.phi, b) if isinstance(b, int) else None
        return FreqDomainChannel(self.g_diag, self.phi, self.w_diag, self.rho, b, banded)


def phase_ramp(n: int, cp: int) -> np.ndarray:
    """Diagonal of ``W = F P^cp F^H``: ``exp(-2j pi cp k / N)``."""
    return np.exp(-2j * np.pi * cp * np.arange(n) / n)


def freq_channel_from_cir(h: np.ndarray, cp: int, b=FULL) -> FreqDomainChannel:
    """Build the frequency model from CIR(s) of shape ``(N,)`` or ``(U, N)`` without dense matrices."""
    h = np.asarray(h, dtype=np.complex128)
    n = h.shape[-1]
    g_diag = np.fft.fft(h, axis=-1)
    if h.ndim == 1:
        rho = isi_first_row(h, cp)
    else:
        rho = np.stack([isi_first_row(row, cp) for row in h])
    phi = toeplitz_dft(rho)
    return FreqDomainChannel(g_diag, phi, phase_ramp(n, cp), rho).with_band(b)


def build_freq_channel(bm: BlockMatrices, cfg: OfdmConfig | None = None, b=FULL) -> FreqDomainChannel:
    """Frequency model of one symbol's block matrices (first column of ``H``, first row of ``B``)."""
    cp = bm.cp if cfg is None else cfg.cp
    n = bm.n
    g_diag = np.fft.fft(bm.cir)
    rho = bm.first_row
    phi = toeplitz_dft(rho)
    return FreqDomainChannel(g_diag, phi, phase_ramp(n, cp), rho).with_band(b)


def freq_transmit(s_prev: np.ndarray, s_cur: np.ndarray, ch: FreqDomainChannel,
                  noise: NoiseModel | None = None) -> np.ndarray:
    """``r_u = G s_u + Phi_b (s_{u-1} - W s_u) + eta_u``.

    Noise is drawn directly per subcarrier; ``F`` is unitary so its
    statistics match time-domain noise of the same variance.
    """
    s_prev = np.asarray(s_prev, dtype=np.complex128)
    s_cur = np.asarray(s_cur, dtype=np.complex128)
    if s_prev.shape != s_cur.shape or s_cur.shape[-1] != ch.n:
        raise ValueError(f"symbols must have matching shapes ending in N = {ch.n}")
    r = ch.g_diag * s_cur + ch.apply_phi(s_prev - ch.w_diag * s_cur)
    if noise is not None:
        r = r + noise.sample(r.shape)
    return r


# --- complexity accounting -------------------------------------------------


def fft_macs(n: int, factor: float = 0.5) -> float:
    """MACs of an N-point radix-2 FFT: ``factor * N * log2(N)``."""
    return factor * n * log2(n)


@dataclass
class MacCounter:
    """Complex MAC counts per simulated OFDM symbol, summed over users.

    ``one_time`` holds setup done once per run (not part of :attr:`total`).
    """

    fft: float = 0.0
    subcarrier: float = 0.0
    banded: float = 0.0
    phi_setup: float = 0.0
    tdl: float = 0.0
    one_time: float = 0.0

    @property
    def total(self) -> float:
        return self.fft + self.subcarrier + self.banded + self.phi_setup + self.tdl

    def amortized(self, symbols: int) -> float:
        return self.total + self.one_time / symbols

    def add(self, **counts: float) -> None:
        for key, value in counts.items():
            if value < 0:
                raise ValueError("MAC counts only grow")
            setattr(self, key, getattr(self, key) + value)

    def merge(self, other: "MacCounter") -> "MacCounter":
        return MacCounter(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})


@dataclass(frozen=True)
class MacComparison:
    users: int
    freq: MacCounter
    tdl: MacCounter


def user_allocation(n: int, n_users: int) -> np.ndarray:
    """Split N subcarriers as evenly as possible between users."""
    base = np.full(n_users, n // n_users)
    base[: n % n_users] += 1
    return base


def count_macs(cfg: OfdmConfig, pdp: PowerDelayProfile, b: int, n_users: int,
               recompute_phi_each_symbol: bool = False, fft_factor: float = 0.5) -> MacComparison:
    """MAC cost per OFDM symbol of both channel models for ``n_users`` users.

    The users share the N subcarriers, each through its own channel.

    Time-domain TDL, per user: N-point IFFT of the user's subcarriers plus
    ``(N + cp) * L`` filter MACs; one shared N-point FFT at the receiver.

    Frequency model, per user holding ``N_k`` subcarriers: ``N_k`` for the
    CFR diagonal, ``N_k`` for the phase ramp and ``N_k * (2b + 1)`` for the
    banded ISI product. No FFT is needed, data stays on subcarriers.

    CFR setup per user: one FFT for the CFR diagonal, two IFFTs for the ISI
    generator and diagonal, ``N`` sawtooth weights and ``N_k * 2b`` envelope
    products for the band. It is paid once per run unless the channel is
    refreshed every symbol.
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    n = cfg.n
    b = check_band(b, n)
    if not isinstance(b, int):
        raise ValueError("complexity model needs an integer band")
    fft = fft_macs(n, fft_factor)
    alloc = user_allocation(n, n_users)

    tdl = MacCounter()
    tdl.add(fft=fft * n_users + fft, tdl=float(cfg.symbol_length * pdp.n_taps * n_users))

    freq = MacCounter()
    freq.add(subcarrier=2.0 * n, banded=float(n * (2 * b + 1)))
    setup = float(n_users * (3 * fft + n) + n * 2 * b)
    if recompute_phi_each_symbol:
        freq.add(phi_setup=setup)
    else:
        freq.add(one_time=setup)
    return MacComparison(n_users, freq, tdl)


def crossover_users(cfg: OfdmConfig, pdp: PowerDelayProfile, b: int, recompute_phi_each_symbol: bool = False,
                    max_users: int = 4096, fft_factor: float = 0.5) -> int | None:
    """Smallest user count at which the frequency model needs fewer MACs per symbol."""
    symbols = cfg.symbols_per_run
    for users in range(1, max_users + 1):
        c = count_macs(cfg, pdp, b, users, recompute_phi_each_symbol, fft_factor)
        if c.freq.amortized(symbols) < c.tdl.amortized(symbols):
            return users
    return None
