"""Command-line front end.

Four subcommands write CSV tables::

    ldpdetect exponent        E0, E1, E per detector over a spectrum-parameter grid
    ldpdetect are-sweep       ARE of one detector family to another over (param, SNR)
    ldpdetect banded-optimize grid-searched banded kernels and their ARE
    ldpdetect simulate        Monte Carlo error rates next to the analytic exponent

Settings come from an optional ``--config`` file of ``key = value`` lines
(repeat a key to build a list) and from flags, which override the file.
Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 failed
property check.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from ._io import csv_line, write_text
from .banded_opt import BandedSearchConfig, grid_search
from .cgf import FAMILIES
from .errors import DomainError, NumericalError, ResourceLimitError
from .exponent import SWEEP_HEADER, are_sweep, exponents, make_detector
from .finite_sim import SIM_HEADER, SimConfig, simulate
from .spectra import DEFAULT_PANELS, NoiseModel, Spectrum

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PROPERTY = 0, 2, 3, 4
COMMANDS = ("exponent", "are-sweep", "banded-optimize", "simulate")
PROP1_SNR_DB = 40.0
PROP1_THRESHOLD = 0.95


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Flat run configuration; list-valued fields come from repeated keys."""

    command: str = ""
    spectrum: str = "gauss_markov"
    spectrum_file: str = ""
    param: list = field(default_factory=list)
    snr_db: list = field(default_factory=list)
    sigma2: float = 1.0
    detector: list = field(default_factory=list)
    detector1: str = "simple_quadratic"
    detector2: str = "optimal"
    b: list = field(default_factory=list)
    m: int = 1
    steps: int = 64
    refinement_rounds: int = 2
    b0_lo: float = 0.01
    b0_hi: float = 2.0
    bl_lo: float = -1.0
    bl_hi: float = 1.0
    n: list = field(default_factory=list)
    trials: int = 100_000
    seed: int = 0
    panels: int = DEFAULT_PANELS
    output: str = ""
    prop1_check: bool = False
    workers: int = 1

    LIST_TYPES = {"param": float, "snr_db": float, "detector": str, "b": float, "n": int}

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_pairs(cls, pairs) -> "RunConfig":
        """Build from ``(key, value-string)`` pairs; unknown keys are errors."""
        known = {f.name: f for f in fields(cls)}
        cfg = cls()
        seen_lists = set()
        for key, raw in pairs:
            if key not in known:
                raise ConfigError(key, "unknown key")
            try:
                if key in cls.LIST_TYPES:
                    if key not in seen_lists:
                        setattr(cfg, key, [])
                        seen_lists.add(key)
                    getattr(cfg, key).append(cls.LIST_TYPES[key](raw))
                else:
                    default = getattr(cls(), key)
                    cast = _bool if isinstance(default, bool) else type(default)
                    setattr(cfg, key, cast(raw))
            except ValueError as exc:
                raise ConfigError(key, f"bad value {raw!r} ({exc})") from None
        return cfg

    def to_pairs(self):
        pairs = []
        for key in self.keys():
            value = getattr(self, key)
            if key in self.LIST_TYPES:
                pairs.extend((key, repr(v) if isinstance(v, float) else str(v)) for v in value)
            elif isinstance(value, float):
                pairs.append((key, repr(value)))
            else:
                pairs.append((key, str(value)))
        return pairs

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_pairs())

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_pairs(parse_config_text(text))

    def validate(self):
        if self.command and self.command not in COMMANDS:
            raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
        if self.spectrum not in ("gauss_markov", "triangular", "white", "tabulated"):
            raise ConfigError("spectrum", f"unknown spectrum kind {self.spectrum!r}")
        if self.spectrum == "tabulated" and not self.spectrum_file:
            raise ConfigError("spectrum_file", "required for a tabulated spectrum")
        for key in ("detector1", "detector2"):
            if getattr(self, key) not in FAMILIES:
                raise ConfigError(key, f"unknown detector {getattr(self, key)!r}")
        for name in self.detector:
            if name not in FAMILIES:
                raise ConfigError("detector", f"unknown detector {name!r}")
        if self.panels < 2 or self.panels % 2:
            raise ConfigError("panels", "must be an even integer >= 2")
        if self.sigma2 <= 0:
            raise ConfigError("sigma2", "must be positive")
        if self.m < 0:
            raise ConfigError("m", "must be nonnegative")
        if self.steps < 3:
            raise ConfigError("steps", "must be at least 3")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")


def parse_config_text(text: str):
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line.strip()!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        pairs.append((key, value))
    return pairs


# -- shared helpers -------------------------------------------------------


def _param_grid(cfg: RunConfig):
    if cfg.param:
        return list(cfg.param)
    if cfg.spectrum == "gauss_markov":
        return [round(0.05 * k, 10) for k in range(20)]
    if cfg.spectrum == "triangular":
        return [float(M) for M in range(1, 11)]
    return [math.nan]


def _spectrum(cfg: RunConfig, param) -> Spectrum:
    try:
        if cfg.spectrum == "tabulated":
            return Spectrum.from_file(cfg.spectrum_file)
        if cfg.spectrum == "white":
            return Spectrum.white()
        if cfg.spectrum == "triangular":
            if param != int(param):
                raise DomainError(f"triangular M must be an integer, got {param}")
            return Spectrum.triangular(int(param))
        return Spectrum.gauss_markov(param)
    except (DomainError, OSError) as exc:
        raise ConfigError("param" if cfg.spectrum != "tabulated" else "spectrum_file", str(exc)) from None


def _snrs(cfg: RunConfig, default):
    return list(cfg.snr_db) if cfg.snr_db else list(default)


# -- commands -------------------------------------------------------------


def cmd_exponent(cfg: RunConfig):
    detectors = cfg.detector or ["optimal", "simple_quadratic"]
    if "banded" in detectors and not cfg.b:
        raise ConfigError("b", "banded detector needs coefficients")
    header = ["param", "snr_db"]
    for name in detectors:
        header += [f"E0_{name}", f"E1_{name}", f"E_{name}", f"feasible_{name}"]
    lines = [",".join(header) + "\n"]
    for snr in _snrs(cfg, [10.0]):
        noise = NoiseModel.from_snr_db(snr, cfg.sigma2)
        for param in _param_grid(cfg):
            spectrum = _spectrum(cfg, param)
            row = [param, snr]
            for name in detectors:
                try:
                    r = exponents(make_detector(name, noise, spectrum, cfg.b), cfg.panels)
                    row += [r.e0, r.e1, r.e, r.feasible]
                except NumericalError:
                    row += [math.nan, math.nan, math.nan, False]
            lines.append(csv_line(row))
    return "".join(lines), EXIT_OK


def cmd_are_sweep(cfg: RunConfig):
    snrs = _snrs(cfg, [0.0, 10.0, 20.0, 30.0])
    if cfg.prop1_check and PROP1_SNR_DB not in snrs:
        snrs.append(PROP1_SNR_DB)
    for key in ("detector1", "detector2"):
        if getattr(cfg, key) == "banded" and not cfg.b:
            raise ConfigError("b", f"{key}=banded needs coefficients")
    kind = cfg.spectrum
    params = _param_grid(cfg)
    if kind == "triangular":
        for p in params:
            _spectrum(cfg, p)
    if kind == "tabulated":
        raise ConfigError("spectrum", "are-sweep needs a one-parameter spectrum family")
    rows = are_sweep(cfg.detector1, cfg.detector2, kind, params, snrs, sigma2=cfg.sigma2,
                     panels=cfg.panels, b1=cfg.b if cfg.detector1 == "banded" else (),
                     b2=cfg.b if cfg.detector2 == "banded" else (), max_workers=cfg.workers)
    rows = sorted(rows, key=lambda r: (r.snr_db, r.param))
    text = SWEEP_HEADER + "\n" + "".join(r.csv() for r in rows)
    code = EXIT_OK
    if cfg.prop1_check:
        at_top = [r.are for r in rows if r.snr_db == PROP1_SNR_DB]
        if not all(np.isfinite(v) and v >= PROP1_THRESHOLD for v in at_top):
            code = EXIT_PROPERTY
    return text, code


def cmd_banded_optimize(cfg: RunConfig):
    m = cfg.m
    header = ["param", "snr_db", "m", *(f"b{l}" for l in range(m + 1)), "E0", "E1", "E",
              "cells_evaluated", "cells_feasible", "E_optimal", "ARE", "found"]
    lines = [",".join(header) + "\n"]
    ranges = ((cfg.b0_lo, cfg.b0_hi, cfg.steps),) + ((cfg.bl_lo, cfg.bl_hi, cfg.steps),) * m
    for snr in _snrs(cfg, [0.0, 10.0]):
        noise = NoiseModel.from_snr_db(snr, cfg.sigma2)
        for param in _param_grid(cfg):
            spectrum = _spectrum(cfg, param)
            try:
                search = BandedSearchConfig(noise, spectrum, m=m, ranges=ranges,
                                            refinement_rounds=cfg.refinement_rounds,
                                            panels=cfg.panels)
            except DomainError as exc:
                raise ConfigError("steps", str(exc)) from None
            result = grid_search(search)
            e_opt = exponents(make_detector("optimal", noise, spectrum), cfg.panels).e
            if result.found:
                r = result.exponent_report
                ratio = r.e / e_opt if e_opt > 0 else math.nan
                row = [param, snr, m, *result.b_star, r.e0, r.e1, r.e]
            else:
                ratio = math.nan
                row = [param, snr, m, *([math.nan] * (m + 1)), math.nan, math.nan, 0.0]
            row += [result.cells_evaluated, result.cells_feasible, e_opt, ratio, result.found]
            lines.append(csv_line(row))
    return "".join(lines), EXIT_OK


def cmd_simulate(cfg: RunConfig):
    name = (cfg.detector or ["optimal"])[0]
    if len(cfg.detector) > 1:
        raise ConfigError("detector", "simulate takes a single detector")
    if name == "banded" and not cfg.b:
        raise ConfigError("b", "banded detector needs coefficients")
    params = cfg.param or ([0.5] if cfg.spectrum == "gauss_markov" else
                           [4.0] if cfg.spectrum == "triangular" else [math.nan])
    if len(params) != 1:
        raise ConfigError("param", "simulate takes a single spectrum parameter")
    snrs = cfg.snr_db or [10.0]
    if len(snrs) != 1:
        raise ConfigError("snr_db", "simulate takes a single SNR")
    snr = snrs[0]
    noise = NoiseModel(cfg.sigma2, 0.0) if math.isinf(snr) and snr < 0 else NoiseModel.from_snr_db(snr, cfg.sigma2)
    detector = make_detector(name, noise, _spectrum(cfg, params[0]), cfg.b)
    try:
        sim = SimConfig(detector, tuple(cfg.n or (32, 64, 128, 256, 512)), cfg.trials, cfg.seed)
    except (DomainError, ResourceLimitError) as exc:
        message = str(exc)
        key = next((k for k in ("trials", "seed") if message.startswith(k)), "n")
        raise ConfigError(key, message) from None
    estimate = simulate(sim)
    report = exponents(detector, cfg.panels)
    ratio = estimate.fitted_slope / report.e if report.e > 0 else math.nan
    body = SIM_HEADER + "\n" + "".join(r.csv() for r in estimate.rows)
    footer = csv_line([*estimate.footer(), report.e, ratio, report.feasible])
    return body + footer, EXIT_OK


HANDLERS = {
    "exponent": cmd_exponent,
    "are-sweep": cmd_are_sweep,
    "banded-optimize": cmd_banded_optimize,
    "simulate": cmd_simulate,
}


# -- argument parsing -----------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--spectrum", choices=["gauss_markov", "triangular", "white", "tabulated"])
    common.add_argument("--spectrum-file")
    common.add_argument("--param", nargs="+", help="spectrum parameter grid (a or M)")
    common.add_argument("--snr-db", nargs="+")
    common.add_argument("--sigma2")
    common.add_argument("--detector", nargs="+", choices=FAMILIES)
    common.add_argument("--b", nargs="+", help="banded coefficients b0 .. bm")
    common.add_argument("--panels")
    common.add_argument("--seed")
    common.add_argument("--workers")
    common.add_argument("-o", "--output")

    parser = argparse.ArgumentParser(prog="ldpdetect", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("exponent", parents=[common], help="error exponents per detector")
    sweep = sub.add_parser("are-sweep", parents=[common], help="ARE over (param, SNR)")
    sweep.add_argument("--detector1", choices=FAMILIES)
    sweep.add_argument("--detector2", choices=FAMILIES)
    sweep.add_argument("--prop1-check", action="store_const", const="true",
                       help="append 40 dB and exit 4 unless every ARE there is >= 0.95")
    band = sub.add_parser("banded-optimize", parents=[common], help="grid-search banded kernels")
    band.add_argument("--m")
    band.add_argument("--steps")
    band.add_argument("--refinement-rounds")
    for name in ("b0-lo", "b0-hi", "bl-lo", "bl-hi"):
        band.add_argument(f"--{name}")
    simp = sub.add_parser("simulate", parents=[common], help="Monte Carlo validation")
    simp.add_argument("--n", nargs="+", help="sample sizes")
    simp.add_argument("--trials")
    return parser


def _merge(file_pairs, args) -> RunConfig:
    overrides = {}
    for key, value in vars(args).items():
        if key in ("config",) or value is None:
            continue
        overrides[key] = value
    command = overrides.pop("command")
    file_cmd = [v for k, v in file_pairs if k == "command"]
    if file_cmd and file_cmd[-1] != command:
        raise ConfigError("command", f"config file is for {file_cmd[-1]!r}, not {command!r}")
    pairs = [(k, v) for k, v in file_pairs if k not in overrides and k != "command"]
    pairs.append(("command", command))
    for key, value in overrides.items():
        values = value if isinstance(value, list) else [value]
        pairs.extend((key, str(v)) for v in values)
    cfg = RunConfig.from_pairs(pairs)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        file_pairs = []
        if args.config:
            try:
                with open(args.config) as fh:
                    file_pairs = parse_config_text(fh.read())
            except OSError as exc:
                raise ConfigError("config", str(exc)) from None
        cfg = _merge(file_pairs, args)
        text, code = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ResourceLimitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_text(cfg.output or sys.stdout, text)
    return code


if __name__ == "__main__":
    sys.exit(main())
