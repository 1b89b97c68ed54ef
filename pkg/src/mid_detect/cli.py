"""Command-line experiments writing CSV tables.

Settings are resolved as defaults < preset < config file < flags, and every
CSV starts with ``#`` lines echoing the resolved configuration.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import __version__
from .analytic import calibrate_tau, p_fa, p_md
from .baselines import calibrate_empirical, empirical_roc
from .checks import run_all
from .model import ModelParams, ParameterError
from .simulator import Hypothesis, McEstimate, simulate_mid

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

DEFAULT_ALPHAS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)

PRESETS = {
    "fig1": dict(k=8, dm=50, d=32, sigma_s=1.0, sigma1=1.0, sigma2=1.0, alpha=DEFAULT_ALPHAS),
    "fig2": dict(k=12, dm=150, d=32, sigma_s=1.0, sigma1=1.0, sigma2=1.0, alpha=DEFAULT_ALPHAS),
    "fig3": dict(k=8, dm=50, d=32, sigma1=1.0, sigma2=1.0, alpha=(0.05, 0.01),
                 snr_db=tuple(float(v) for v in range(-10, 11))),
}


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "roc"
    k: int = 8
    dm: int = 50
    d: int = 32
    sigma_s: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    alpha: tuple[float, ...] = DEFAULT_ALPHAS
    snr_db: tuple[float, ...] = (0.0, 3.0, 6.0)
    trials: int = 10_000
    seed: int = 2024
    workers: int = 1
    out: str | None = None
    preset: str | None = None

    def params(self) -> ModelParams:
        return ModelParams(sigma_s=self.sigma_s, sigma1=self.sigma1, sigma2=self.sigma2,
                           k=self.k, d_max=self.dm, true_delay=self.d)

    def echo(self) -> list[str]:
        # workers and out do not affect results and stay out of the echo,
        # keeping outputs byte-identical across worker counts
        lines = [f"# mid_detect {__version__}"]
        for key, value in asdict(self).items():
            if key in ("workers", "out"):
                continue
            if isinstance(value, tuple):
                value = ",".join(_fmt(v) for v in value)
            lines.append(f"# {key}={value}")
        return lines


class ConfigError(ValueError):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise ConfigError(f"not a comma-separated list of numbers: {text!r}") from exc


_PARSERS = {
    "k": int, "dm": int, "d": int, "trials": int, "seed": int, "workers": int,
    "sigma_s": float, "sigma1": float, "sigma2": float,
    "alpha": _float_list, "snr_db": _float_list,
    "out": str, "preset": str, "mode": str,
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment, dashes in keys are allowed."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return values


SNR_ALPHAS = (0.05, 0.01)


def resolve_config(mode: str, flags: dict, config_text: str | None = None) -> ExperimentConfig:
    values: dict = {"alpha": SNR_ALPHAS} if mode == "snr" else {}
    file_values = parse_config_text(config_text) if config_text else {}
    preset = flags.get("preset") or file_values.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
        values["preset"] = preset
    values.update(file_values)
    values.update({k: v for k, v in flags.items() if v is not None})
    values["mode"] = mode
    cfg = ExperimentConfig(**values)
    if cfg.trials < 0:
        raise ConfigError("trials: must be nonnegative")
    if cfg.workers < 1:
        raise ConfigError("workers: must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed: must be nonnegative")
    if any(not 0.0 < a < 1.0 for a in cfg.alpha):
        raise ConfigError("alpha: every level must lie in (0, 1)")
    if list(cfg.alpha) != sorted(set(cfg.alpha)) and mode == "roc":
        raise ConfigError("alpha: levels must be strictly increasing for an ROC")
    cfg.params()  # raises ParameterError naming the field
    return cfg


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _csv(cfg: ExperimentConfig, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    for line in cfg.echo():
        buf.write(line + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def cmd_roc(cfg: ExperimentConfig) -> str:
    params = cfg.params()
    header = ["alpha", "tau", "p_fa_analytic", "p_d_analytic", "p_fa_mc", "p_fa_ci", "p_d_mc", "p_d_ci",
              "p_d_onebit", "p_d_onebit_ci", "p_d_glrt", "p_d_glrt_ci"]
    taus = [calibrate_tau(a, params.sigma2, params.d_max) for a in cfg.alpha]
    mc = base = None
    if cfg.trials > 0:
        h0 = simulate_mid(params, Hypothesis.H0, cfg.trials, cfg.seed, workers=cfg.workers).statistic
        h1 = simulate_mid(params, Hypothesis.H1, cfg.trials, cfg.seed, workers=cfg.workers).statistic
        mc = [(McEstimate.from_counts(int(np.count_nonzero(h0 >= t)), cfg.trials),
               McEstimate.from_counts(int(np.count_nonzero(h1 >= t)), cfg.trials)) for t in taus]
        base = empirical_roc(params, cfg.alpha, cfg.trials, cfg.seed,
                             detectors=("one_bit", "glrt"), workers=cfg.workers)
    rows = []
    for i, (alpha, tau) in enumerate(zip(cfg.alpha, taus)):
        row = [alpha, tau, p_fa(tau, params.sigma2, params.d_max), 1.0 - p_md(tau, params)]
        if mc is not None:
            fa, det = mc[i]
            one, glrt = base["one_bit"][i], base["glrt"][i]
            row += [fa.probability, fa.ci_halfwidth, det.probability, det.ci_halfwidth,
                    one.p_d, one.ci_halfwidth, glrt.p_d, glrt.ci_halfwidth]
        else:
            row += [None] * 8
        rows.append(row)
    return _csv(cfg, header, rows)


def cmd_snr(cfg: ExperimentConfig) -> str:
    if cfg.sigma1 != 1.0 or cfg.sigma2 != 1.0:
        raise ConfigError("sigma1/sigma2: the SNR sweep requires sigma1 = sigma2 = 1 (SNR = sigma_s^2)")
    header = ["snr_db", "alpha", "tau", "p_d_analytic", "p_d_mc", "p_d_ci", "p_d_onebit", "p_d_onebit_ci"]
    base = cfg.params()
    rows = []
    for snr in cfg.snr_db:
        params = base.with_snr_db(snr)
        h1 = onebit = None
        if cfg.trials > 0:
            h1 = simulate_mid(params, Hypothesis.H1, cfg.trials, cfg.seed, workers=cfg.workers).statistic
            onebit = empirical_roc(params, sorted(cfg.alpha), cfg.trials, cfg.seed,
                                   detectors=("one_bit",), workers=cfg.workers)["one_bit"]
            onebit = {pt.p_fa: pt for pt in onebit}
        for alpha in cfg.alpha:
            tau = calibrate_tau(alpha, params.sigma2, params.d_max)
            row = [snr, alpha, tau, 1.0 - p_md(tau, params)]
            if h1 is not None:
                det = McEstimate.from_counts(int(np.count_nonzero(h1 >= tau)), cfg.trials)
                row += [det.probability, det.ci_halfwidth, onebit[alpha].p_d, onebit[alpha].ci_halfwidth]
            else:
                row += [None] * 4
            rows.append(row)
    return _csv(cfg, header, rows)


def cmd_calibrate(cfg: ExperimentConfig) -> str:
    params = cfg.params()
    header = ["alpha", "tau", "p_fa_at_tau", "tau_empirical"]
    rows = []
    for alpha in cfg.alpha:
        tau = calibrate_tau(alpha, params.sigma2, params.d_max)
        emp = None
        if cfg.trials > 0 and alpha * cfg.trials >= 100:
            emp = calibrate_empirical("mid", params, alpha, cfg.trials, cfg.seed, workers=cfg.workers)
        rows.append([alpha, tau, p_fa(tau, params.sigma2, params.d_max), emp])
    return _csv(cfg, header, rows)


def cmd_mc(cfg: ExperimentConfig) -> str:
    if cfg.trials < 1:
        raise ConfigError("trials: the mc mode needs at least one trial")
    params = cfg.params()
    header = ["alpha", "tau", "p_fa_mc", "p_fa_ci", "p_md_mc", "p_md_ci", "p_md_analytic"]
    h0 = simulate_mid(params, Hypothesis.H0, cfg.trials, cfg.seed, workers=cfg.workers).statistic
    h1 = simulate_mid(params, Hypothesis.H1, cfg.trials, cfg.seed, workers=cfg.workers).statistic
    rows = []
    for alpha in cfg.alpha:
        tau = calibrate_tau(alpha, params.sigma2, params.d_max)
        fa = McEstimate.from_counts(int(np.count_nonzero(h0 >= tau)), cfg.trials)
        md = McEstimate.from_counts(int(np.count_nonzero(h1 < tau)), cfg.trials)
        rows.append([alpha, tau, fa.probability, fa.ci_halfwidth, md.probability, md.ci_halfwidth,
                     p_md(tau, params)])
    return _csv(cfg, header, rows)


def cmd_validate(cfg: ExperimentConfig, tol_scale: float = 1.0) -> tuple[int, str]:
    results = run_all(cfg.params(), max(cfg.trials, 1000), cfg.seed, workers=cfg.workers, tol_scale=tol_scale)
    lines = cfg.echo() + [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"# {len(results) - failed}/{len(results)} checks passed")
    return (EXIT_FAILED if failed else EXIT_OK), "\n".join(lines) + "\n"


COMMANDS = {"roc": cmd_roc, "snr": cmd_snr, "calibrate": cmd_calibrate, "mc": cmd_mc}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value settings file")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--k", type=int)
    common.add_argument("--dm", type=int, help="maximal absolute delay")
    common.add_argument("--d", type=int, help="true delay (simulation only)")
    common.add_argument("--sigma-s", dest="sigma_s", type=float)
    common.add_argument("--sigma1", type=float)
    common.add_argument("--sigma2", type=float)
    common.add_argument("--alpha", type=_float_list, help="comma-separated false-alarm levels")
    common.add_argument("--snr-db", dest="snr_db", type=_float_list, help="comma-separated SNR grid in dB")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output path (default: stdout)")

    parser = argparse.ArgumentParser(prog="mid-detect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("roc", parents=[common], help="ROC table: analytic, Monte Carlo and baselines")
    sub.add_parser("snr", parents=[common], help="detection probability versus SNR at fixed false-alarm levels")
    sub.add_parser("calibrate", parents=[common], help="thresholds for the requested false-alarm levels")
    sub.add_parser("mc", parents=[common], help="Monte Carlo error rates of the max-index detector")
    val = sub.add_parser("validate", parents=[common], help="run the numerical self-check suite")
    val.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance (testing aid)")
    return parser


_FLAG_KEYS = ("preset", "k", "dm", "d", "sigma_s", "sigma1", "sigma2", "alpha", "snr_db",
              "trials", "seed", "workers", "out")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = None
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = resolve_config(args.mode, {k: getattr(args, k) for k in _FLAG_KEYS}, text)
        if args.mode == "validate":
            code, output = cmd_validate(cfg, args.tol_scale)
        else:
            code, output = EXIT_OK, COMMANDS[args.mode](cfg)
    except (ConfigError, ParameterError, TypeError) as exc:
        print(f"mid-detect: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mid-detect: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(output)
    else:
        sys.stdout.write(output)
    return code


if __name__ == "__main__":
    sys.exit(main())
