"""Time-domain channel: Rayleigh taps, tapped delay line and block matrices.

Everything here works on the sample grid. Symbols carry a cyclic prefix of
``cp`` samples; a channel whose delay span ``tau`` exceeds ``cp`` leaks the
tail of the previous symbol into the current one, which the block matrices
``H``, ``A = B P^cp`` and ``B`` capture.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import j0

from .toeplitz import TriangularToeplitz

LTE_SUBCARRIER_SPACING = 15e3
DENSE_SIZE_CAP = 256


@dataclass(frozen=True)
class OfdmConfig:
    """FFT size ``n``, cyclic prefix ``cp`` (samples) and sample interval."""

    n: int
    cp: int
    sample_interval: float = 1.0 / (512 * LTE_SUBCARRIER_SPACING)
    symbols_per_run: int = 1
    occupancy: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"FFT size must be >= 2, got {self.n}")
        if not 0 <= self.cp < self.n:
            raise ValueError(f"cyclic prefix must satisfy 0 <= cp < N, got cp={self.cp}, N={self.n}")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        if self.symbols_per_run < 1:
            raise ValueError("symbols_per_run must be >= 1")

    @classmethod
    def lte(cls, n: int, cp: int | None = None, **kwargs) -> "OfdmConfig":
        """LTE numerology: 15 kHz spacing, normal CP of ``9 * N / 128`` samples."""
        if cp is None:
            cp = lte_normal_cp(n)
        return cls(n=n, cp=cp, sample_interval=1.0 / (n * LTE_SUBCARRIER_SPACING), **kwargs)

    @property
    def symbol_length(self) -> int:
        return self.n + self.cp

    @property
    def symbol_duration(self) -> float:
        return self.symbol_length * self.sample_interval


def lte_normal_cp(n: int) -> int:
    # 144 samples at N = 2048 (non-first symbol of a slot), scaled with N
    return (9 * n) // 128


@dataclass(frozen=True)
class PowerDelayProfile:
    """Integer tap delays (samples) with linear average gains."""

    delays: np.ndarray
    gains: np.ndarray
    name: str = ""

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=np.int64).reshape(-1)
        gains = np.asarray(self.gains, dtype=np.float64).reshape(-1)
        if delays.size == 0 or delays.size != gains.size:
            raise ValueError("delays and gains must be non-empty and of equal length")
        if delays[0] < 0 or np.any(np.diff(delays) <= 0):
            raise ValueError("delays must be non-negative and strictly increasing")
        if np.any(gains <= 0):
            raise ValueError("gains must be positive")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "gains", gains)

    @property
    def n_taps(self) -> int:
        return self.delays.size

    @property
    def delay_span(self) -> int:
        return int(self.delays[-1])

    @classmethod
    def from_seconds(cls, delays_s, gains_db, sample_interval: float, name: str = "") -> "PowerDelayProfile":
        """Round delays to the nearest sample; taps landing on one sample add up in power."""
        delays = np.rint(np.asarray(delays_s, dtype=float) / sample_interval).astype(np.int64)
        power = 10.0 ** (np.asarray(gains_db, dtype=float) / 10.0)
        grid, inverse = np.unique(delays, return_inverse=True)
        merged = np.zeros(grid.size)
        np.add.at(merged, inverse, power)
        return cls(grid, merged, name)

    def normalized(self) -> "PowerDelayProfile":
        return PowerDelayProfile(self.delays, self.gains / self.gains.sum(), self.name)


@dataclass(frozen=True)
class ProfileTable:
    """A PDP as stored on disk: delays in seconds, gains in dB."""

    name: str
    delays_s: np.ndarray
    gains_db: np.ndarray

    def sampled(self, sample_interval: float) -> PowerDelayProfile:
        return PowerDelayProfile.from_seconds(self.delays_s, self.gains_db, sample_interval, self.name)


BUNDLED_PROFILES = {"cost259-ht": "cost259-ht.csv"}


def read_profile_table(source: str | os.PathLike) -> ProfileTable:
    """Load a PDP file or a bundled profile name.

    Files are CSV rows ``delay_seconds,gain_dB``; ``# name: ...`` sets the
    label and other ``#`` lines are comments. Bare names are looked up in
    the bundled assets, then in ``$CFRSIM_PDP_DIR``.
    """
    text, default_name = _profile_text(str(source))
    name = default_name
    delays, gains = [], []
    for row in csv.reader(line for line in text.splitlines()):
        if not row or not "".join(row).strip():
            continue
        first = row[0].strip()
        if first.startswith("#"):
            body = ",".join(row).lstrip("#").strip()
            if body.lower().startswith("name:"):
                name = body.split(":", 1)[1].strip()
            continue
        if len(row) != 2:
            raise ValueError(f"PDP row must have 2 columns (delay_seconds, gain_dB): {row!r}")
        delays.append(float(row[0]))
        gains.append(float(row[1]))
    if not delays:
        raise ValueError(f"PDP {source!r} has no taps")
    return ProfileTable(name, np.array(delays), np.array(gains))


def _profile_text(source: str) -> tuple[str, str]:
    path = Path(source)
    if path.is_file():
        return path.read_text(), path.stem
    key = source.lower()
    if key in BUNDLED_PROFILES:
        ref = resources.files("cfrsim.profiles").joinpath(BUNDLED_PROFILES[key])
        return ref.read_text(), key
    search = os.environ.get("CFRSIM_PDP_DIR")
    if search:
        for folder in search.split(os.pathsep):
            for candidate in (Path(folder) / source, Path(folder) / f"{source}.csv"):
                if candidate.is_file():
                    return candidate.read_text(), candidate.stem
    raise FileNotFoundError(f"power delay profile {source!r} not found")


def load_pdp(source: str | os.PathLike, cfg: OfdmConfig) -> PowerDelayProfile:
    pdp = read_profile_table(source).sampled(cfg.sample_interval)
    if pdp.delay_span >= cfg.n:
        raise ValueError(f"delay span {pdp.delay_span} samples must be shorter than N = {cfg.n}")
    return pdp


@dataclass(frozen=True)
class FadingProcess:
    """Sum-of-sinusoids Rayleigh generator with a Jakes Doppler spectrum."""

    doppler: float
    seed: int | None = None
    n_oscillators: int = 64

    def __post_init__(self):
        if self.doppler < 0:
            raise ValueError("Doppler frequency must be >= 0")
        if self.n_oscillators < 32:
            raise ValueError("need at least 32 oscillators")


@dataclass(frozen=True)
class ChannelRealization:
    """Block-fading tap coefficients, ``coeffs[u, l]`` for symbol ``u``."""

    coeffs: np.ndarray
    pdp: PowerDelayProfile
    cfg: OfdmConfig

    @property
    def n_symbols(self) -> int:
        return self.coeffs.shape[0]

    def cir(self, u: int) -> np.ndarray:
        """Length-N impulse response ``h(u, m)`` of symbol ``u``."""
        h = np.zeros(self.cfg.n, dtype=np.complex128)
        h[self.pdp.delays] = self.coeffs[u]
        return h


def generate_fading(pdp: PowerDelayProfile, fp: FadingProcess, n_symbols: int, cfg: OfdmConfig) -> ChannelRealization:
    """Draw tap coefficients at the start of each of ``n_symbols`` symbols.

    Tap ``l`` is ``sqrt(a_l / M) * sum_m exp(j(2 pi f_D t cos(alpha_m) + phi_m))``
    with arrival angles ``alpha_m = (2 pi m + theta_l) / M`` and uniform phases.
    The equally spaced angles make the time-averaged autocorrelation a
    trapezoidal rule for ``J0(2 pi f_D t)``.
    """
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    if pdp.delay_span >= cfg.n:
        raise ValueError(f"delay span {pdp.delay_span} samples must be shorter than N = {cfg.n}")
    rng = np.random.default_rng(fp.seed)
    m = fp.n_oscillators
    theta = rng.uniform(-np.pi, np.pi, size=(pdp.n_taps, 1))
    alpha = (2.0 * np.pi * np.arange(m)[None, :] + theta) / m
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(pdp.n_taps, m))
    omega = 2.0 * np.pi * fp.doppler * np.cos(alpha)
    t = np.arange(n_symbols) * cfg.symbol_duration

    coeffs = np.empty((n_symbols, pdp.n_taps), dtype=np.complex128)
    chunk = 8192
    for start in range(0, n_symbols, chunk):
        tt = t[start:start + chunk, None, None]
        coeffs[start:start + chunk] = np.exp(1j * (omega[None] * tt + phases[None])).sum(axis=2)
    coeffs *= np.sqrt(pdp.gains / m)[None, :]
    return ChannelRealization(coeffs, pdp, cfg)


def jakes_autocorrelation(gain: float, lags, doppler: float, interval: float) -> np.ndarray:
    """Target ``a * J0(2 pi p f_D T)`` for integer lags ``p``."""
    return gain * j0(2.0 * np.pi * np.asarray(lags) * doppler * interval)


@dataclass
class NoiseModel:
    """Circularly symmetric complex Gaussian noise, variance ``variance``."""

    variance: float = 0.0
    seed: int | None = None
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be >= 0")
        self.rng = np.random.default_rng(self.seed)

    def sample(self, shape) -> np.ndarray:
        if self.variance == 0:
            return np.zeros(shape, dtype=np.complex128)
        scale = np.sqrt(self.variance / 2.0)
        return scale * (self.rng.standard_normal(shape) + 1j * self.rng.standard_normal(shape))


def add_cyclic_prefix(symbols: np.ndarray, cp: int) -> np.ndarray:
    """``(U, N)`` time-domain symbols to a flat stream of ``U * (N + cp)`` samples."""
    symbols = np.atleast_2d(symbols)
    if cp == 0:
        return symbols.reshape(-1).copy()
    return np.concatenate([symbols[:, -cp:], symbols], axis=1).reshape(-1)


def remove_cyclic_prefix(stream: np.ndarray, n: int, cp: int) -> np.ndarray:
    stream = np.asarray(stream)
    if stream.size % (n + cp):
        raise ValueError(f"stream length {stream.size} is not a multiple of N + cp = {n + cp}")
    return stream.reshape(-1, n + cp)[:, cp:]


def tdl_filter(x: np.ndarray, ch: ChannelRealization, noise: NoiseModel | None = None) -> np.ndarray:
    """Tapped delay line ``y(n) = sum_l c_l(u) x(n - d_l) + w(n)``.

    ``x`` is a CP-prefixed stream starting at symbol 0; ``u`` is the symbol
    the output sample belongs to. Samples before the stream start are zero.
    Filter memory runs across symbol boundaries, which is where ISI comes from.
    """
    x = np.asarray(x, dtype=np.complex128).reshape(-1)
    seg = ch.cfg.symbol_length
    if x.size % seg:
        raise ValueError(f"stream length {x.size} is not a multiple of N + cp = {seg}")
    n_sym = x.size // seg
    if n_sym > ch.n_symbols:
        raise ValueError(f"stream has {n_sym} symbols, channel only {ch.n_symbols}")
    y = np.zeros_like(x)
    for tap, d in enumerate(ch.pdp.delays):
        c = np.repeat(ch.coeffs[:n_sym, tap], seg)
        if d == 0:
            y += c * x
        else:
            y[d:] += c[d:] * x[:-d]
    if noise is not None:
        y += noise.sample(y.shape)
    return y


def shift_matrix(n: int) -> np.ndarray:
    """Circular shift ``P`` with ``(P x)[k] = x[k - 1]``."""
    return np.roll(np.eye(n), 1, axis=0)


def isi_first_row(h: np.ndarray, cp: int) -> np.ndarray:
    """First row ``rho`` of ``B``: ``rho[k] = h[N + cp - k]`` for ``k > cp``.

    Only taps beyond the prefix survive, so for delay span ``tau`` the row is
    zero except for ``h[tau], ..., h[cp + 1]`` in its last ``tau - cp`` slots.
    """
    h = np.asarray(h, dtype=np.complex128)
    rho = np.zeros(h.size, dtype=np.complex128)
    rho[cp + 1:] = h[cp + 1:][::-1]
    return rho


def delay_span(h: np.ndarray) -> int:
    nz = np.flatnonzero(h)
    return int(nz[-1]) if nz.size else 0


@dataclass(frozen=True)
class BlockMatrices:
    """Dense per-symbol matrices ``H`` (circulant), ``B`` and its corner block ``S``."""

    H: np.ndarray
    B: np.ndarray
    S: np.ndarray
    cp: int
    v_is: int

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def A(self) -> np.ndarray:
        # A = B P^cp: column j of A is column (j + cp) mod N of B
        return np.roll(self.B, -self.cp, axis=1)

    @property
    def first_row(self) -> np.ndarray:
        return self.B[0].copy()

    @property
    def cir(self) -> np.ndarray:
        return self.H[:, 0].copy()


def build_block_matrices(ch: ChannelRealization, u: int, cfg: OfdmConfig | None = None) -> BlockMatrices:
    cfg = cfg or ch.cfg
    if not 0 <= u < ch.n_symbols:
        raise IndexError(f"symbol index {u} out of range")
    if cfg.n > DENSE_SIZE_CAP:
        raise ValueError(f"dense block matrices limited to N <= {DENSE_SIZE_CAP}")
    h = ch.cir(u)
    return block_matrices_from_cir(h, cfg.cp)


def block_matrices_from_cir(h: np.ndarray, cp: int) -> BlockMatrices:
    h = np.asarray(h, dtype=np.complex128)
    n = h.size
    k = np.arange(n)
    H = h[(k[:, None] - k[None, :]) % n]
    B = TriangularToeplitz(isi_first_row(h, cp)).dense()
    v_is = max(delay_span(h) - cp, 0)
    S = B[:v_is, n - v_is:].copy()
    return BlockMatrices(H=H, B=B, S=S, cp=cp, v_is=v_is)


def block_transmit(x_prev: np.ndarray, x_cur: np.ndarray, bm: BlockMatrices,
                   noise: NoiseModel | None = None, check: bool = False) -> np.ndarray:
    """``y_u = (H - A) x_u + B x_{u-1} + w_u`` on CP-stripped symbols."""
    x_prev = np.asarray(x_prev, dtype=np.complex128)
    x_cur = np.asarray(x_cur, dtype=np.complex128)
    if x_prev.shape != (bm.n,) or x_cur.shape != (bm.n,):
        raise ValueError(f"symbols must have length N = {bm.n}")
    y = (bm.H - bm.A) @ x_cur + bm.B @ x_prev
    if check:
        separated = bm.H @ x_cur + bm.B @ (x_prev - np.roll(x_cur, bm.cp))
        if not np.allclose(y, separated, rtol=1e-10, atol=1e-10):
            raise ArithmeticError("ISI-separated form disagrees with direct block form")
    if noise is not None:
        y = y + noise.sample(y.shape)
    return y
