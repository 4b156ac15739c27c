"""``cfrsim`` command line: configuration parsing and experiment dispatch.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .channel import OfdmConfig, load_pdp, lte_normal_cp
from .experiments import (
    ExperimentReport,
    Table,
    run_band_accuracy,
    run_complexity,
    run_normality,
    run_power_profile,
    run_transmit,
    run_verify,
    timed,
    version_stamp,
)
from .freqsim import FULL, NONE

EXPERIMENTS = ("power-profile", "band-accuracy", "normality", "complexity", "transmit", "verify")
DEFAULT_BANDS = (0, 4, 8, 16, 32)
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = "verify"
    n: int = 512
    cp: int | str = "normal-lte"
    sample_interval: float | None = None
    pdp: str = "cost259-ht"
    doppler: float = 5.0
    snr: float | None = None
    noiseless: bool = True
    bands: list | None = None
    bands_include_half: bool = False
    symbols: int = 10_000
    realizations: int = 1
    draws: int = 100_000
    users: int = 32
    seed: int = 1
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    out: str | None = None
    format: str = "csv"

    @property
    def cp_samples(self) -> int:
        return lte_normal_cp(self.n) if self.cp == "normal-lte" else int(self.cp)

    @property
    def noise_variance(self) -> float:
        if self.noiseless or self.snr is None:
            return 0.0
        return 10.0 ** (-self.snr / 10.0)

    def ofdm(self) -> OfdmConfig:
        base = OfdmConfig.lte(self.n, self.cp_samples, symbols_per_run=self.symbols)
        if self.sample_interval is None:
            return base
        return OfdmConfig(self.n, self.cp_samples, self.sample_interval, self.symbols)

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown {self.experiment!r}, choose from {', '.join(EXPERIMENTS)}")
        if self.n < 4 or self.n & (self.n - 1):
            raise ConfigError(f"n: {self.n} is not a power of two >= 4")
        if self.cp != "normal-lte":
            try:
                cp = int(self.cp)
            except (TypeError, ValueError):
                raise ConfigError(f"cp: expected an integer or 'normal-lte', got {self.cp!r}") from None
            if not 0 <= cp < self.n:
                raise ConfigError(f"cp: {cp} must satisfy 0 <= cp < n = {self.n}")
            self.cp = cp
        for name in ("symbols", "realizations", "draws", "users", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1, got {getattr(self, name)}")
        if self.doppler < 0:
            raise ConfigError(f"doppler: must be >= 0, got {self.doppler}")
        if self.sample_interval is not None and self.sample_interval <= 0:
            raise ConfigError("sample_interval: must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: expected csv or json, got {self.format!r}")
        if self.snr is not None:
            self.noiseless = False
        if self.bands is None:
            self.bands = [b for b in DEFAULT_BANDS if b <= self.n // 2]
        bands = []
        for b in self.bands:
            if b in (FULL, NONE):
                bands.append(b)
                continue
            try:
                b = int(b)
            except (TypeError, ValueError):
                raise ConfigError(f"bands: invalid value {b!r}") from None
            if not 0 <= b <= self.n // 2:
                raise ConfigError(f"bands: {b} outside 0 .. n/2 = {self.n // 2}")
            bands.append(b)
        if self.bands_include_half and self.n // 2 not in bands:
            bands.append(self.n // 2)
        if not bands:
            raise ConfigError("bands: at least one band is required")
        self.bands = bands
        return self


def _band_list(text: str) -> list:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        out.append(item if item in (FULL, NONE) else _int(item, "bands"))
    return out


def _int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name}: {text!r} is not an integer") from None


def _cp(text: str):
    return text if text == "normal-lte" else _int(text, "cp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfrsim",
        description="OFDM ISI simulation with a frequency-domain Toeplitz channel model.",
    )
    s = argparse.SUPPRESS
    parser.add_argument("experiment", nargs="?", choices=EXPERIMENTS, default=None)
    parser.add_argument("--config", default=None, help="JSON file with RunConfig keys; flags override it")
    parser.add_argument("--n", type=int, default=s, help="FFT size (power of two), default 512")
    parser.add_argument("--cp", type=_cp, default=s, help="cyclic prefix in samples or 'normal-lte'")
    parser.add_argument("--sample-interval", dest="sample_interval", type=float, default=s,
                        help="sample interval in seconds (default: N * 15 kHz LTE rate)")
    parser.add_argument("--pdp", default=s, help="PDP file or bundled name (cost259-ht)")
    parser.add_argument("--doppler", type=float, default=s, help="maximum Doppler frequency, Hz")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("--snr", type=float, default=s, help="SNR in dB (unit-power symbols)")
    noise.add_argument("--noiseless", action="store_true", default=s)
    parser.add_argument("--bands", type=_band_list, default=s, help="comma list of b, 'none' or 'full'")
    parser.add_argument("--bands-include-half", dest="bands_include_half", action="store_true", default=s,
                        help="add b = N/2 to the band list")
    parser.add_argument("--symbols", type=int, default=s)
    parser.add_argument("--realizations", type=int, default=s)
    parser.add_argument("--draws", type=int, default=s, help="JB sample size per realization")
    parser.add_argument("--users", type=int, default=s, help="largest user count for complexity")
    parser.add_argument("--seed", type=int, default=s)
    parser.add_argument("--threads", type=int, default=s)
    parser.add_argument("--out", default=s, help="output path (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=s)
    return parser


def parse_config(args: list[str] | None = None, config_file: str | os.PathLike | None = None) -> RunConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    ns = {k: v for k, v in vars(build_parser().parse_args(args)).items() if v is not None or k != "experiment"}
    path = ns.pop("config", None) or config_file
    values: dict = {}
    known = {f.name for f in fields(RunConfig)}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"config: unknown keys {', '.join(unknown)}")
        values.update(data)
    if "snr" in ns and values.get("noiseless") and "noiseless" not in ns:
        values["noiseless"] = False
    values.update(ns)
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None


def run(config: RunConfig) -> ExperimentReport:
    cfg = config.ofdm()
    exp = config.experiment
    tables: dict[str, Table] = {}
    summary: dict = {}
    warnings: list[str] = []

    def body():
        if exp == "verify":
            table = run_verify(config.n, config.seed)
            tables["verify"] = table
            summary["failed"] = [row[0] for row in table.rows if not row[3]]
            return
        pdp = load_pdp(config.pdp, cfg)
        summary["pdp"] = {"name": pdp.name, "delays": pdp.delays.tolist(), "gains": pdp.gains.tolist()}
        if exp == "power-profile":
            tables["power_profile"] = run_power_profile(cfg, pdp)
        elif exp == "band-accuracy":
            tables["band_accuracy"] = run_band_accuracy(cfg, pdp, config.doppler, config.bands, config.symbols,
                                                        config.realizations, config.seed, config.threads)
        elif exp == "normality":
            table, warns = run_normality(cfg, pdp, config.bands, config.draws, config.realizations,
                                         config.seed, config.threads)
            tables["normality"] = table
            warnings.extend(warns)
        elif exp == "complexity":
            b = next((b for b in config.bands if isinstance(b, int)), 16)
            table, extra = run_complexity(cfg, pdp, b, config.users)
            tables["complexity"] = table
            summary.update(extra, band=b)
            if extra["crossover_users"] is None:
                warnings.append("no crossover user count within the tested range")
        elif exp == "transmit":
            band = config.bands[0]
            table, macs = run_transmit(cfg, pdp, config.doppler, band, config.symbols,
                                       config.noise_variance, config.seed)
            tables["transmit"] = table
            summary["macs"] = asdict(macs)

    _, elapsed = timed(body)
    echo = asdict(config)
    echo["cp_samples"] = config.cp_samples
    echo["sample_interval_s"] = cfg.sample_interval
    return ExperimentReport(exp, echo, tables, summary, warnings, elapsed, version_stamp())


def emit(report: ExperimentReport, config: RunConfig) -> None:
    text = report.to_json() + "\n" if config.format == "json" else report.main.to_csv()
    if config.out:
        Path(config.out).write_text(text)
    else:
        sys.stdout.write(text)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"cfrsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        report = run(config)
    except (ValueError, FileNotFoundError) as exc:
        print(f"cfrsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"cfrsim: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if config.experiment == "verify":
        _print_verify(report)
    emit(report, config)
    if report.summary.get("failed"):
        print(f"cfrsim: numeric failure: {', '.join(report.summary['failed'])}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def _print_verify(report: ExperimentReport) -> None:
    for name, err, tol, ok in report.tables["verify"].rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: max error {err:.3e} (tol {tol:g})", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
