"""Statistical model parameters and the quantities derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """A model parameter violates its constraints."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ModelParams:
    """One experiment: source/noise standard deviations and protocol constants.

    ``true_delay`` is simulation ground truth. The decoder never reads it.
    """

    sigma_s: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    k: int = 8
    d_max: int = 50
    true_delay: int = 32

    def __post_init__(self) -> None:
        for name in ("sigma_s", "sigma1", "sigma2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(name, f"must be a positive finite real, got {value!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError("k", f"must be a positive integer, got {self.k!r}")
        if int(self.d_max) != self.d_max or self.d_max < 0:
            raise ParameterError("d_max", f"must be a nonnegative integer, got {self.d_max!r}")
        if int(self.true_delay) != self.true_delay or abs(self.true_delay) > self.d_max:
            raise ParameterError(
                "true_delay", f"must be an integer with |d| <= d_max={self.d_max}, got {self.true_delay!r}"
            )
        if self.n <= 2 * self.d_max:
            raise ParameterError(
                "d_max", f"blocklength N=2^k={self.n} must exceed 2*d_max={2 * self.d_max}"
            )

    @property
    def n(self) -> int:
        return 1 << int(self.k)

    def with_snr_db(self, snr_db: float) -> "ModelParams":
        """Copy with sigma_s^2 = 10^(snr_db/10); only meaningful when sigma1 = sigma2 = 1."""
        return ModelParams(
            sigma_s=math.sqrt(10.0 ** (snr_db / 10.0)),
            sigma1=self.sigma1,
            sigma2=self.sigma2,
            k=self.k,
            d_max=self.d_max,
            true_delay=self.true_delay,
        )


@dataclass(frozen=True)
class DerivedParams:
    n: int
    sigma_x2: float
    beta: float
    sigma_mmse2: float
    sigma_eff2: float
    rho: float
    rho_d: float

    @property
    def sigma_x(self) -> float:
        return math.sqrt(self.sigma_x2)

    @property
    def sigma_mmse(self) -> float:
        return math.sqrt(self.sigma_mmse2)

    @property
    def sigma_eff(self) -> float:
        return math.sqrt(self.sigma_eff2)


def derive(params: ModelParams) -> DerivedParams:
    """Variances and correlations entering the misdetection formula.

    x = s + z1 has variance sigma_x^2; ``beta`` is the linear MMSE gain of s
    given x, so y[n] = beta x[n-d] + residual with residual variance
    sigma_MMSE^2. ``sigma_eff2`` is the variance of beta V - sigma_MMSE G and
    ``rho`` its correlation with V. ``rho_d`` is the population correlation of
    the aligned pair (x[n], y[n+d]).
    """
    ss2 = params.sigma_s**2
    s12 = params.sigma1**2
    s22 = params.sigma2**2
    sigma_x2 = ss2 + s12
    beta = ss2 / sigma_x2
    sigma_mmse2 = s22 + beta * s12
    sigma_eff2 = beta**2 * sigma_x2 + sigma_mmse2
    rho = beta * math.sqrt(sigma_x2) / math.sqrt(sigma_eff2)
    rho_d = ss2 / math.sqrt((ss2 + s12) * (ss2 + s22))
    return DerivedParams(
        n=params.n,
        sigma_x2=sigma_x2,
        beta=beta,
        sigma_mmse2=sigma_mmse2,
        sigma_eff2=sigma_eff2,
        rho=rho,
        rho_d=rho_d,
    )


def _check_index(j: int, n: int) -> None:
    if not 0 <= j <= n - 1:
        raise ValueError(f"index j={j} outside [0, {n - 1}]")


def m_inside(j: int, d_max: int, n: int) -> int:
    """Number of non-aligned lags whose encoder sample falls inside the block."""
    _check_index(j, n)
    return min(d_max, j) + min(d_max, n - 1 - j)


def m_outside(j: int, d_max: int, n: int) -> int:
    return 2 * d_max - m_inside(j, d_max, n)


def inside_count_multiplicities(n: int, d_max: int, delay: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Distinct inside-lag counts over j = 0..n-1 and how often each occurs.

    Non-aligned encoder offsets run over r in [-(d_max + delay), d_max - delay]
    minus zero, so j sees min(d_max + delay, j) + min(d_max - delay, n-1-j)
    inside offsets. For ``delay = 0`` this is ``m_inside``: the value 2 d_max
    occurs n - 2 d_max times and each of d_max..2 d_max - 1 occurs twice.
    """
    if n <= 2 * d_max:
        raise ValueError("requires n > 2*d_max")
    if abs(delay) > d_max:
        raise ValueError("requires |delay| <= d_max")
    left, right = d_max + delay, d_max - delay
    counts = np.zeros(2 * d_max + 1, dtype=np.int64)
    counts[2 * d_max] += n - 2 * d_max
    counts[right : 2 * d_max] += 1
    counts[left : 2 * d_max] += 1
    values = np.nonzero(counts)[0]
    return values, counts[values]
