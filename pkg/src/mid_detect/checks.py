"""Numerical self-checks: special-function identities, proof-step oracles and
analytic-versus-simulation agreement.

Every check returns ``CheckResult`` rows holding the measured deviation and
the tolerance it was held to. ``tol_scale`` multiplies every tolerance and
exists so a run can be forced to fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import chisquare

from . import gaussians as g
from .analytic import calibrate_tau, p_md
from .baselines import detector_statistics, empirical_roc
from .model import ModelParams, derive
from .simulator import Hypothesis, McEstimate, estimate_rho_mie, mie_scale, simulate_mid


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: measured {self.measured:.3e} vs tolerance {self.tolerance:.3e}{extra}"


def _result(name: str, measured: float, tolerance: float, tol_scale: float, detail: str = "") -> CheckResult:
    tol = tolerance * tol_scale
    return CheckResult(name, float(measured), tol, bool(measured <= tol), detail)


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def special_functions(tol_scale: float = 1.0) -> list[CheckResult]:
    out = []
    x = np.linspace(-8.0, 8.0, 1601)
    out.append(_result("Phi + Q = 1", np.max(np.abs(g.std_normal_cdf(x) + g.q_function(x) - 1.0)), 1e-14, tol_scale))

    grid = np.arange(-3.0, 3.5, 1.0)
    rhos = np.round(np.arange(-0.9, 0.95, 0.1), 10)
    sym = fac = 0.0
    for a in grid:
        for b in grid:
            fac = max(fac, abs(g.bivariate_normal_cdf(a, b, 0.0) - g.std_normal_cdf(a) * g.std_normal_cdf(b)))
            for r in rhos:
                sym = max(sym, abs(g.bivariate_normal_cdf(a, b, r) - g.bivariate_normal_cdf(b, a, r)))
    out.append(_result("Phi2 symmetry", sym, 1e-10, tol_scale))
    out.append(_result("Phi2 factorization at rho=0", fac, 1e-10, tol_scale))
    marg = 0.0
    for a in grid:
        for r in rhos:
            marg = max(marg, abs(g.bivariate_normal_cdf(a, math.inf, r) - g.std_normal_cdf(a)))
            marg = max(marg, abs(g.bivariate_normal_cdf(a, 12.0, r) - g.std_normal_cdf(a)))
    out.append(_result("Phi2 marginalization", marg, 1e-10, tol_scale))

    xs = np.linspace(-6.0, 6.0, 1201)
    rt = np.max(np.abs(g.std_normal_quantile(g.std_normal_cdf(xs)) - xs))
    out.append(_result("quantile round-trip on [-6, 6]", rt, 1e-9, tol_scale))
    arcsin = abs(g.bivariate_normal_cdf(0.0, 0.0, 0.5) - (0.25 + math.asin(0.5) / (2 * math.pi)))
    out.append(_result("Phi2(0,0;0.5) vs arcsin identity", arcsin, 1e-9, tol_scale))
    return out


def false_alarm_agreement(
    k: int, d_max: int, alphas: Sequence[float], trials: int, seed: int, *, sigma2: float = 1.0,
    workers: int = 1, tol_scale: float = 1.0,
) -> list[CheckResult]:
    params = ModelParams(k=k, d_max=d_max, true_delay=0, sigma2=sigma2)
    run = simulate_mid(params, Hypothesis.H0, trials, seed, workers=workers)
    out = []
    for alpha in alphas:
        tau = calibrate_tau(alpha, sigma2, d_max)
        est = McEstimate.from_counts(int(np.count_nonzero(run.statistic >= tau)), trials)
        se = binomial_se(alpha, trials)
        out.append(_result(
            f"P_FA k={k} dm={d_max} alpha={alpha}", abs(est.probability - alpha), 4 * se, tol_scale,
            f"empirical {est.probability:.5f}",
        ))
    return out


def misdetection_agreement(
    base: ModelParams, snrs_db: Sequence[float], alphas: Sequence[float], trials: int, seed: int, *,
    workers: int = 1, tol_scale: float = 1.0, delay_aware: bool = False,
) -> list[CheckResult]:
    out = []
    for snr in snrs_db:
        params = base.with_snr_db(snr)
        run = simulate_mid(params, Hypothesis.H1, trials, seed, workers=workers)
        for alpha in alphas:
            tau = calibrate_tau(alpha, params.sigma2, params.d_max)
            analytic = p_md(tau, params, delay_aware=delay_aware)
            est = McEstimate.from_counts(int(np.count_nonzero(run.statistic < tau)), trials)
            tol = max(4 * binomial_se(analytic, trials), 1e-3)
            out.append(_result(
                f"P_MD k={params.k} dm={params.d_max} SNR={snr}dB alpha={alpha}",
                abs(analytic - est.probability), tol, tol_scale,
                f"analytic {analytic:.5f}, empirical {est.probability:.5f}",
            ))
    return out


def h0_statistic_cdf(params: ModelParams, trials: int, seed: int, *, delta: float = 1e-3,
                     tol_scale: float = 1.0) -> list[CheckResult]:
    """Sup distance between the null statistic's empirical CDF and (1 - Q(t/sigma2))^(2 dm + 1)."""
    stats = np.sort(simulate_mid(params, Hypothesis.H0, trials, seed).statistic)
    model = (1.0 - g.q_function(stats / params.sigma2)) ** (2 * params.d_max + 1)
    upper = np.arange(1, trials + 1) / trials
    lower = np.arange(trials) / trials
    dist = max(np.max(np.abs(upper - model)), np.max(np.abs(lower - model)))
    eps = math.sqrt(math.log(2.0 / delta) / (2 * trials))
    return [_result("H0 statistic CDF (DKW band)", dist, eps, tol_scale)]


def proof_steps(params: ModelParams, trials: int, seed: int, *, pair_trials: int = 5000,
                significance: float = 1e-3, tol_scale: float = 1.0) -> list[CheckResult]:
    """Regression decomposition, block-maximum mean and extremum-index uniformity."""
    from .simulator import generate_batch, stream

    dp = derive(params)
    out = []
    batch = generate_batch(params, Hypothesis.H1, stream(seed, 20, 0), pair_trials)
    xs = batch.x.ravel()
    ys = batch.y_at(np.arange(params.n) + params.true_delay).ravel()
    sxx = float(np.dot(xs, xs))
    slope = float(np.dot(xs, ys)) / sxx
    resid = ys - slope * xs
    res_var = float(np.mean(resid**2))
    slope_se = math.sqrt(res_var / sxx)
    var_se = float(np.std(resid**2, ddof=1)) / math.sqrt(resid.size)
    out.append(_result("regression slope = beta", abs(slope - dp.beta), 4 * slope_se, tol_scale,
                       f"{slope:.5f} vs {dp.beta:.5f}"))
    out.append(_result("residual variance = sigma_MMSE^2", abs(res_var - dp.sigma_mmse2), 4 * var_se, tol_scale,
                       f"{res_var:.5f} vs {dp.sigma_mmse2:.5f}"))

    h1 = simulate_mid(params, Hypothesis.H1, trials, seed)
    expected = mie_scale(params)
    se = float(np.std(h1.x_max, ddof=1)) / math.sqrt(trials)
    out.append(_result("E[x[J]] = sigma_x E[max]", abs(float(h1.x_max.mean()) - expected), 4 * se, tol_scale,
                       f"{h1.x_max.mean():.5f} vs {expected:.5f}"))
    h0 = simulate_mid(params, Hypothesis.H0, trials, seed)
    for label, run in (("H0", h0), ("H1", h1)):
        counts = np.bincount(run.index, minlength=params.n)
        pvalue = float(chisquare(counts).pvalue)
        # passes when the p-value is at least the significance level
        out.append(CheckResult(f"J uniform under {label} (chi-square)", pvalue, significance * tol_scale,
                               bool(pvalue >= significance * tol_scale), "measured is the p-value"))
    return out


def mie_unbiasedness(params: ModelParams, trials: int, seed: int, *, other_lags: Iterable[int] | None = None,
                     tol_scale: float = 1.0) -> list[CheckResult]:
    dp = derive(params)
    d, dm = params.true_delay, params.d_max
    if other_lags is None:
        other_lags = sorted({-dm, 0, d - 1, d + 1, dm} - {d})
    out = []
    est = estimate_rho_mie(params, d, trials, seed)
    out.append(_result(f"mean rho_MIE({d}) = rho_d", abs(est.mean - dp.rho_d), 4 * est.std_error, tol_scale,
                       f"{est.mean:.5f} vs {dp.rho_d:.5f}"))
    for lag in other_lags:
        est = estimate_rho_mie(params, lag, trials, seed)
        out.append(_result(f"mean rho_MIE({lag}) = 0", abs(est.mean), 4 * est.std_error, tol_scale,
                           f"{est.mean:.5f}"))
    return out


def roc_ordering(params: ModelParams, alphas: Sequence[float], trials: int, seed: int, *,
                 workers: int = 1, tol_scale: float = 1.0) -> tuple[list[CheckResult], dict]:
    """MID detection probability must exceed the one-bit baseline with disjoint 95% intervals.

    The measured value is the overlap of the two intervals (0 when disjoint).
    """
    roc = empirical_roc(params, alphas, trials, seed, workers=workers)
    out = []
    for mid, one in zip(roc["mid"], roc["one_bit"]):
        gap = (mid.p_d - mid.ci_halfwidth) - (one.p_d + one.ci_halfwidth)
        overlap = max(0.0, -gap)
        out.append(CheckResult(
            f"P_D(MID) > P_D(one-bit) at alpha={mid.p_fa}", overlap, 0.0 * tol_scale,
            bool(gap > 0), f"MID {mid.p_d:.4f}+-{mid.ci_halfwidth:.4f}, one-bit {one.p_d:.4f}+-{one.ci_halfwidth:.4f}",
        ))
    return out, roc


def determinism(base: ModelParams, snrs_db: Sequence[float], trials: int, seed: int,
                worker_counts: Sequence[int] = (1, 4, 8)) -> list[CheckResult]:
    out = []
    for snr in snrs_db:
        params = base.with_snr_db(snr)
        digests = [simulate_mid(params, Hypothesis.H1, trials, seed, workers=w).statistic.tobytes()
                   for w in worker_counts]
        differing = sum(d != digests[0] for d in digests[1:])
        out.append(CheckResult(f"byte-identical MC at SNR={snr}dB for workers {list(worker_counts)}",
                               float(differing), 0.0, differing == 0))
    return out


def run_all(params: ModelParams, trials: int, seed: int, *, workers: int = 1,
            tol_scale: float = 1.0) -> list[CheckResult]:
    """Desk-scale version of the full suite used by ``mid-detect validate``."""
    results = special_functions(tol_scale)
    results += false_alarm_agreement(params.k, params.d_max, (0.5, 0.1, 0.05, 0.01), trials, seed,
                                     sigma2=params.sigma2, workers=workers, tol_scale=tol_scale)
    results += misdetection_agreement(params, (0.0, 3.0, 6.0), (0.05, 0.01), trials, seed,
                                      workers=workers, tol_scale=tol_scale)
    results += h0_statistic_cdf(params, trials, seed, tol_scale=tol_scale)
    results += proof_steps(params, trials, seed, tol_scale=tol_scale)
    results += mie_unbiasedness(params, trials, seed, tol_scale=tol_scale)
    results += determinism(params, (0.0,), min(trials, 20_000), seed, worker_counts=(1, 2))
    return results


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    value = fn(*args, **kwargs)
    return value, time.perf_counter() - start
