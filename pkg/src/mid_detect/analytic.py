"""Exact false-alarm and misdetection probabilities of the max-index detector."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .gaussians import (
    bivariate_normal_cdf,
    integrate,
    q_function,
    std_normal_cdf,
    std_normal_quantile,
    unit_interval_breakpoints,
)
from .model import DerivedParams, ModelParams, derive, inside_count_multiplicities, m_inside

_ONE_MINUS = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class RocPoint:
    p_fa: float
    p_d: float
    tau: float
    source: Literal["analytic", "empirical"] = "analytic"
    ci_halfwidth: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_fa <= 1.0 and 0.0 <= self.p_d <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.source == "analytic" and self.ci_halfwidth != 0.0:
            raise ValueError("analytic points carry no confidence interval")
        if self.ci_halfwidth < 0:
            raise ValueError("ci_halfwidth must be nonnegative")


def _window_size(d_max: int) -> int:
    if d_max < 0:
        raise ValueError("d_max must be nonnegative")
    return 2 * d_max + 1


def p_fa(tau: float, sigma2: float, d_max: int) -> float:
    """P(max of 2 d_max + 1 iid N(0, sigma2^2) samples >= tau)."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    size = _window_size(d_max)
    if tau == math.inf:
        return 0.0
    if tau == -math.inf:
        return 1.0
    # 1 - (1 - Q)^K without cancellation for small Q
    return float(-math.expm1(size * math.log1p(-q_function(tau / sigma2))))


def calibrate_tau(alpha: float, sigma2: float, d_max: int) -> float:
    """Threshold whose false-alarm probability equals ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    size = _window_size(d_max)
    # per-sample exceedance q solves 1 - (1 - q)^K = alpha
    q = -math.expm1(math.log1p(-alpha) / size)
    return -sigma2 * std_normal_quantile(q)


def b_out(tau: float, dp: DerivedParams) -> float:
    return std_normal_cdf(tau / dp.sigma_eff)


def b_in(x, tau: float, dp: DerivedParams):
    """P(U < tau | V <= x) for V ~ N(0, sigma_x^2), U = beta V - sigma_MMSE G."""
    t1 = np.asarray(x, dtype=float) / dp.sigma_x
    joint = bivariate_normal_cdf(t1 if t1.ndim else float(t1), tau / dp.sigma_eff, dp.rho)
    marg = std_normal_cdf(t1)
    out = np.clip(np.asarray(joint) / marg, 0.0, 1.0)
    return out if out.ndim else float(out)


def _md_integrand(tau: float, params: ModelParams, dp: DerivedParams, *, delay_aware: bool, collapsed: bool):
    n = dp.n
    d_max = params.d_max
    t_eff = tau / dp.sigma_eff
    outside = std_normal_cdf(t_eff)
    if collapsed:
        values, counts = inside_count_multiplicities(
            n, d_max, params.true_delay if delay_aware else 0
        )
    else:
        if delay_aware:
            left, right = d_max + params.true_delay, d_max - params.true_delay
            per_j = [min(left, j) + min(right, n - 1 - j) for j in range(n)]
        else:
            per_j = [m_inside(j, d_max, n) for j in range(n)]
        values = np.asarray(per_j, dtype=np.int64)
        counts = np.ones_like(values)
    weights = counts / n
    outside_pow = outside ** (2 * d_max - values)

    def f(w: np.ndarray) -> np.ndarray:
        w = np.minimum(w, _ONE_MINUS)
        x = -std_normal_quantile(w)  # standardized block maximum, u = Phi(x)
        u = std_normal_cdf(x)
        aligned = q_function((dp.beta * dp.sigma_x * x - tau) / dp.sigma_mmse)
        inside = np.clip(bivariate_normal_cdf(x, t_eff, dp.rho) / u, 0.0, 1.0)
        bracket = (inside[:, None] ** values[None, :]) @ (weights * outside_pow)
        density = n * np.exp((n - 1) * np.log1p(-w))
        return density * aligned * bracket

    return f


def p_md(
    tau: float,
    params: ModelParams,
    *,
    delay_aware: bool = False,
    collapsed: bool = True,
    tol: float = 1e-12,
) -> float:
    """Misdetection probability at threshold ``tau``.

    Integrates, over the block-maximum quantile u in (0, 1), the weight
    N u^(N-1) times the average over extremum positions j of

        Q((beta sigma_x Phi^-1(u) - tau) / sigma_MMSE)
        * [Phi2(Phi^-1(u), tau/sigma_eff; rho) / u]^M_in(j)
        * Phi(tau/sigma_eff)^M_out(j).

    The average over j is taken over the distinct values of M_in(j) with
    their multiplicities (``collapsed=True``) instead of all N positions.

    With ``delay_aware=False`` the non-aligned offsets are taken symmetric,
    ``M_in(j) = min(d_m, j) + min(d_m, N-1-j)``, which is exact for d = 0.
    ``delay_aware=True`` uses the offsets actually scanned when the true
    delay is d, [-(d_m + d), d_m - d] without 0; that count is exact for
    every |d| <= d_m.
    """
    if tau == math.inf:
        return 1.0
    if tau == -math.inf:
        return 0.0
    dp = derive(params)
    f = _md_integrand(tau, params, dp, delay_aware=delay_aware, collapsed=collapsed)
    depth = params.k + 45
    val = integrate(f, 0.0, 1.0, tol=tol, breakpoints=unit_interval_breakpoints(depth))
    return min(max(val, 0.0), 1.0)


def roc_curve(params: ModelParams, alphas: Sequence[float], **md_options) -> list[RocPoint]:
    alphas = [float(a) for a in alphas]
    if any(not 0.0 < a < 1.0 for a in alphas):
        raise ValueError("alphas must lie in (0, 1)")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly increasing")
    points = []
    for alpha in alphas:
        tau = calibrate_tau(alpha, params.sigma2, params.d_max)
        points.append(RocPoint(p_fa=alpha, p_d=1.0 - p_md(tau, params, **md_options), tau=tau))
    return points


def snr_sweep(
    sigma1: float,
    sigma2: float,
    k: int,
    d_max: int,
    true_delay: int,
    alpha: float,
    snr_db_grid: Sequence[float],
    **md_options,
) -> list[tuple[float, float]]:
    """Detection probability at fixed false-alarm level over an SNR grid.

    SNR is sigma_s^2, which is only a signal-to-noise ratio when both noise
    standard deviations are 1; other settings are rejected.
    """
    if sigma1 != 1.0 or sigma2 != 1.0:
        raise ValueError("SNR is defined as sigma_s^2 only for sigma1 = sigma2 = 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    tau = calibrate_tau(alpha, sigma2, d_max)
    out = []
    for snr_db in snr_db_grid:
        snr_db = float(snr_db)
        if not math.isfinite(snr_db):
            raise ValueError("SNR grid must be finite")
        params = ModelParams(
            sigma_s=math.sqrt(10.0 ** (snr_db / 10.0)),
            sigma1=sigma1,
            sigma2=sigma2,
            k=k,
            d_max=d_max,
            true_delay=true_delay,
        )
        out.append((snr_db, 1.0 - p_md(tau, params, **md_options)))
    return out
