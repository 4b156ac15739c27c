"""Experiment runners behind the ``cfrsim`` command.

Every Monte-Carlo loop derives one generator per realization from
``(master_seed, index)`` and results are reduced in index order, so the
output does not depend on the worker count.
"""
from __future__ import annotations

import csv
import io
import json
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    complex_jarque_bera,
    isi_power_profile,
    qam16,
    residual_isi_batch,
)
from .channel import (
    FadingProcess,
    NoiseModel,
    OfdmConfig,
    PowerDelayProfile,
    add_cyclic_prefix,
    block_matrices_from_cir,
    block_transmit,
    generate_fading,
    isi_first_row,
    remove_cyclic_prefix,
    tdl_filter,
)
from .freqsim import (
    FULL,
    NONE,
    MacCounter,
    band_mask,
    count_macs,
    crossover_users,
    freq_channel_from_cir,
    freq_transmit,
)
from .toeplitz import dense_toeplitz_dft_oracle, toeplitz_dft

SYMBOL_CHUNK = 1000


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    tables: dict[str, Table]
    summary: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    version: str = __version__

    @property
    def main(self) -> Table:
        return next(iter(self.tables.values()))

    def to_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "version": self.version,
            "wall_time_s": self.wall_time,
            "config": self.config,
            "summary": self.summary,
            "warnings": self.warnings,
            "tables": {
                name: {"header": t.header, "rows": [[_json_value(v) for v in row] for row in t.rows]}
                for name, t in self.tables.items()
            },
        }
        return json.dumps(payload, indent=2)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def version_stamp() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def realization_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _map_ordered(func, items, threads: int) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2 ** 63))


# --- power profile -----------------------------------------------------------


def run_power_profile(cfg: OfdmConfig, pdp: PowerDelayProfile) -> Table:
    """ISI power per subcarrier offset relative to the undistorted subcarrier, in dB."""
    profile = isi_power_profile(pdp, cfg)
    table = Table(["n", "offset", "power_db"])
    for off, p in zip(profile.offsets, profile.relative_db):
        table.rows.append([cfg.n, int(off), float(p)])
    return table


# --- band accuracy -----------------------------------------------------------


def _symbols(rng: np.random.Generator, shape, alphabet: np.ndarray) -> np.ndarray:
    return alphabet[rng.integers(0, alphabet.size, size=shape)]


def band_accuracy_realization(cfg: OfdmConfig, pdp: PowerDelayProfile, doppler: float, bands: list,
                              n_symbols: int, rng: np.random.Generator) -> np.ndarray:
    """SER (dB) of each reduced model against the complete ``Phi`` over one run of symbols."""
    alphabet = qam16()
    ch = generate_fading(pdp, FadingProcess(doppler, seed=_child_seed(rng)), n_symbols + 1, cfg)
    data_rng = np.random.default_rng(_child_seed(rng))
    ref_energy = np.zeros(len(bands))
    err_energy = np.zeros(len(bands))
    s_prev = _symbols(data_rng, (1, cfg.n), alphabet)
    for start in range(1, n_symbols + 1, SYMBOL_CHUNK):
        stop = min(start + SYMBOL_CHUNK, n_symbols + 1)
        s = np.concatenate([s_prev, _symbols(data_rng, (stop - start, cfg.n), alphabet)])
        h = np.zeros((stop - start, cfg.n), dtype=np.complex128)
        h[:, pdp.delays] = ch.coeffs[start:stop]
        full = freq_channel_from_cir(h, cfg.cp, FULL)
        r = freq_transmit(s[:-1], s[1:], full)
        for i, b in enumerate(bands):
            r_red = freq_transmit(s[:-1], s[1:], full.with_band(b))
            ref_energy[i] += np.sum(np.abs(r_red) ** 2)
            err_energy[i] += np.sum(np.abs(r_red - r) ** 2)
        s_prev = s[-1:]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(ref_energy / err_energy)


def run_band_accuracy(cfg: OfdmConfig, pdp: PowerDelayProfile, doppler: float, bands: list,
                      n_symbols: int, realizations: int, seed: int, threads: int = 1) -> Table:
    """Mean SER per band over seeded realizations; ``none`` is the ``Phi = 0`` baseline."""
    def one(index):
        return band_accuracy_realization(cfg, pdp, doppler, bands, n_symbols, realization_rng(seed, index))

    per_run = np.array(_map_ordered(one, range(realizations), threads))
    table = Table(["b", "ser_db", "ser_db_min", "ser_db_max"])
    for i, b in enumerate(bands):
        col = per_run[:, i]
        table.rows.append([b, float(np.mean(col)), float(np.min(col)), float(np.max(col))])
    return table


# --- normality ---------------------------------------------------------------


def normality_realization(cfg: OfdmConfig, pdp: PowerDelayProfile, bands: list, draws: int,
                          rng: np.random.Generator) -> list:
    """Pooled/real/imag JB p-values per band for one block-fading channel draw and a random row."""
    ch = generate_fading(pdp, FadingProcess(0.0, seed=_child_seed(rng)), 1, cfg)
    phi = toeplitz_dft(isi_first_row(ch.cir(0), cfg.cp))
    row = int(rng.integers(cfg.n))
    samples = residual_isi_batch(phi, bands, row, draws, seed=_child_seed(rng))
    out = []
    for i in range(len(bands)):
        res = complex_jarque_bera(samples[:, i])
        if res.degenerate:
            out.append(None)
        else:
            out.append((res.pooled.p_value,
                        res.real.p_value if res.real else float("nan"),
                        res.imag.p_value if res.imag else float("nan")))
    return out


def run_normality(cfg: OfdmConfig, pdp: PowerDelayProfile, bands: list, draws: int, realizations: int,
                  seed: int, threads: int = 1) -> tuple[Table, list[str]]:
    """Average JB p-values of the residual ISI per band (Monte-Carlo over channels)."""
    def one(index):
        return normality_realization(cfg, pdp, bands, draws, realization_rng(seed, index))

    results = _map_ordered(one, range(realizations), threads)
    table = Table(["n", "b", "p_value", "p_value_real", "p_value_imag", "degenerate"])
    warnings = []
    for i, b in enumerate(bands):
        vals = [r[i] for r in results if r[i] is not None]
        if not vals:
            table.rows.append([cfg.n, b, float("nan"), float("nan"), float("nan"), True])
            warnings.append(f"N={cfg.n} b={b}: residual is identically zero, JB undefined")
            continue
        arr = np.array(vals)
        table.rows.append([cfg.n, b, float(arr[:, 0].mean()), float(np.nanmean(arr[:, 1])),
                           float(np.nanmean(arr[:, 2])), False])
    return table, warnings


# --- complexity --------------------------------------------------------------


def run_complexity(cfg: OfdmConfig, pdp: PowerDelayProfile, b: int, max_users: int) -> tuple[Table, dict]:
    """MACs per OFDM symbol against user count for both models."""
    symbols = cfg.symbols_per_run
    table = Table(["users", "mac_freq", "mac_freq_recompute", "mac_tdl"])
    for users in range(1, max_users + 1):
        reuse = count_macs(cfg, pdp, b, users, False)
        fresh = count_macs(cfg, pdp, b, users, True)
        table.rows.append([users, reuse.freq.amortized(symbols), fresh.freq.amortized(symbols),
                           reuse.tdl.amortized(symbols)])
    summary = {
        "crossover_users": crossover_users(cfg, pdp, b, False),
        "crossover_users_recompute": crossover_users(cfg, pdp, b, True),
        "taps": pdp.n_taps,
    }
    return table, summary


# --- transmit ----------------------------------------------------------------


def run_transmit(cfg: OfdmConfig, pdp: PowerDelayProfile, doppler: float, band, n_symbols: int,
                 noise_variance: float, seed: int) -> tuple[Table, MacCounter]:
    """Send random 16-QAM symbols through the banded frequency model; per-symbol powers."""
    rng = realization_rng(seed, 0)
    alphabet = qam16()
    ch = generate_fading(pdp, FadingProcess(doppler, seed=_child_seed(rng)), n_symbols + 1, cfg)
    s = _symbols(np.random.default_rng(_child_seed(rng)), (n_symbols + 1, cfg.n), alphabet)
    noise = NoiseModel(noise_variance, seed=_child_seed(rng))
    h = np.zeros((n_symbols, cfg.n), dtype=np.complex128)
    h[:, pdp.delays] = ch.coeffs[1:]
    fch = freq_channel_from_cir(h, cfg.cp, band)
    clean = fch.g_diag * s[1:]
    isi = fch.apply_phi(s[:-1] - fch.w_diag * s[1:])
    eta = noise.sample(clean.shape)
    r = clean + isi + eta
    table = Table(["symbol", "signal_power", "isi_power", "noise_power", "rx_power"])
    for u in range(n_symbols):
        table.rows.append([u + 1, float(np.mean(np.abs(clean[u]) ** 2)), float(np.mean(np.abs(isi[u]) ** 2)),
                           float(np.mean(np.abs(eta[u]) ** 2)), float(np.mean(np.abs(r[u]) ** 2))])
    macs = MacCounter()
    macs.add(subcarrier=2.0 * cfg.n * n_symbols)
    if isinstance(fch.band, int):
        macs.add(banded=float(cfg.n * (2 * fch.band + 1) * n_symbols))
    return table, macs


# --- verify ------------------------------------------------------------------


def run_verify(n: int, seed: int, trials: int = 20) -> Table:
    """Oracle-equivalence checks at small N; one row per identity."""
    rng = realization_rng(seed, 0)
    table = Table(["check", "max_error", "tolerance", "passed"])

    def record(name, err, tol):
        table.rows.append([name, float(err), tol, bool(err < tol)])

    err = 0.0
    for _ in range(trials):
        rho = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        oracle = dense_toeplitz_dft_oracle(rho)
        err = max(err, np.max(np.abs(toeplitz_dft(rho).dense() - oracle) / (1 + np.abs(oracle))))
    record("toeplitz_dft_vs_dense_oracle", err, 1e-10)

    err_block = err_freq = err_band = 0.0
    for _ in range(trials):
        cp = int(rng.integers(0, n // 2))
        span = int(rng.integers(cp + 1, n))
        delays = np.unique(np.concatenate([[0, span], rng.integers(0, span, 3)]))
        pdp = PowerDelayProfile(delays, rng.uniform(0.1, 1.0, delays.size))
        cfg = OfdmConfig(n, cp)
        ch = generate_fading(pdp, FadingProcess(float(rng.uniform(0, 200)), seed=_child_seed(rng)), 2, cfg)
        x = (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))) / np.sqrt(2)
        y = remove_cyclic_prefix(tdl_filter(add_cyclic_prefix(x, cp), ch), n, cp)[1]
        bm = block_matrices_from_cir(ch.cir(1), cp)
        y_block = block_transmit(x[0], x[1], bm)
        err_block = max(err_block, np.max(np.abs(y - y_block)))
        s = np.fft.fft(x, norm="ortho", axis=-1)
        fch = freq_channel_from_cir(ch.cir(1), cp, n // 2)
        r = freq_transmit(s[0], s[1], fch)
        err_freq = max(err_freq, np.max(np.abs(r - np.fft.fft(y, norm="ortho"))))
        b = int(rng.integers(0, n // 2 + 1))
        dense = band_mask(n, b) * dense_toeplitz_dft_oracle(bm.first_row)
        err_band = max(err_band, np.max(np.abs(fch.with_band(b).banded.matvec(s[0]) - dense @ s[0])))
    record("block_matrices_vs_tdl", err_block, 1e-10)
    record("frequency_model_vs_tdl", err_freq, 1e-9)
    record("banded_product_vs_masked_dense", err_band, 1e-12)
    return table


def timed(func, *args, **kwargs):
    start = time.perf_counter()
    out = func(*args, **kwargs)
    return out, time.perf_counter() - start


__all__ = [
    "ExperimentReport",
    "Table",
    "run_band_accuracy",
    "run_complexity",
    "run_normality",
    "run_power_profile",
    "run_transmit",
    "run_verify",
    "NONE",
]
