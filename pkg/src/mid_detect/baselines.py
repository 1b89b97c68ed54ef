"""Reference detectors: the full-data GLRT correlator and a k-bit sign scheme.

The one-bit scheme sends the signs of the first k encoder samples. The
decoder correlates those signs with its own samples at every admissible lag
and keeps the largest value. Both baselines are calibrated empirically on
H0 trials.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .analytic import RocPoint, calibrate_tau
from .model import ModelParams
from .simulator import (
    BLOCK_SIZE,
    Hypothesis,
    McEstimate,
    TrialBatch,
    generate_batch,
    mid_statistics,
    stream,
)

# stream tags for full-trajectory runs, kept apart from the detector engine's 0/1
TAG_CALIBRATION = 10
TAG_EVAL = {Hypothesis.H0: 11, Hypothesis.H1: 12}


class BaselineKind(str, Enum):
    GLRT_FULL_DATA = "glrt_full_data"
    ONE_BIT_PER_SAMPLE = "one_bit_per_sample"


class DegenerateVarianceError(ValueError):
    """An empirical variance is zero, so the correlation coefficient is undefined."""


def _lagged_correlations(a: np.ndarray, y: np.ndarray, n_lags: int) -> np.ndarray:
    """sum_n a[..., n] y[..., n + e] for e = 0..n_lags-1, via FFT."""
    m = a.shape[-1]
    size = 1 << int(math.ceil(math.log2(y.shape[-1] + m)))
    spec = np.conj(np.fft.rfft(a, size)) * np.fft.rfft(y, size)
    return np.fft.irfft(spec, size)[..., :n_lags]


def glrt_statistics(x: np.ndarray, y: np.ndarray, d_max: int) -> np.ndarray:
    """max over d in [-d_max, d_max] of the empirical correlation coefficient.

    ``x`` has shape (..., N); ``y`` has shape (..., N + 2 d_max) and holds
    logical indices -d_max..N-1+d_max.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    n_lags = 2 * d_max + 1
    if y.shape[-1] < n + 2 * d_max:
        raise IndexError("decoder window must cover [-d_max, N-1+d_max]")
    y = y[..., : n + 2 * d_max]
    cross = _lagged_correlations(x, y, n_lags)
    energy_x = np.sum(x * x, axis=-1, keepdims=True)
    csum = np.concatenate([np.zeros(y.shape[:-1] + (1,)), np.cumsum(y * y, axis=-1)], axis=-1)
    energy_y = csum[..., n : n + n_lags] - csum[..., :n_lags]
    if np.any(energy_x <= 0) or np.any(energy_y <= 0):
        raise DegenerateVarianceError("zero empirical variance in GLRT statistic")
    rho = np.clip(cross / np.sqrt(energy_x * energy_y), -1.0, 1.0)
    return rho.max(axis=-1)


def glrt_statistic(x, y_window, d_max: int) -> float:
    return float(glrt_statistics(np.asarray(x)[None, :], np.asarray(y_window)[None, :], d_max)[0])


def glrt_detector(x, y_window, d_max: int, gamma: float) -> Hypothesis:
    return Hypothesis.H1 if glrt_statistic(x, y_window, d_max) >= gamma else Hypothesis.H0


def one_bit_encode(x, k: int) -> str:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < k:
        raise ValueError("need at least k samples")
    return "".join("1" if v >= 0 else "0" for v in x[:k])


def one_bit_statistics(x: np.ndarray, y: np.ndarray, k: int, d_max: int) -> np.ndarray:
    """Batch form of ``one_bit_statistic`` taking the encoder samples directly."""
    signs = np.where(np.asarray(x)[..., :k] >= 0, 1.0, -1.0)
    return _sign_correlation(signs, np.asarray(y, dtype=float), d_max)


def _sign_correlation(signs: np.ndarray, y: np.ndarray, d_max: int) -> np.ndarray:
    k = signs.shape[-1]
    if y.shape[-1] < k + 2 * d_max:
        raise IndexError("decoder window must cover [-d_max, k-1+d_max]")
    best = None
    for e in range(2 * d_max + 1):
        val = np.sum(signs * y[..., e : e + k], axis=-1) / k
        best = val if best is None else np.maximum(best, val)
    return best


def one_bit_statistic(bits: str, y_window, d_max: int) -> float:
    signs = np.array([1.0 if b == "1" else -1.0 for b in bits])
    return float(_sign_correlation(signs, np.asarray(y_window, dtype=float), d_max))


StatisticFn = Callable[[TrialBatch, ModelParams], np.ndarray]

DETECTORS: dict[str, StatisticFn] = {
    "mid": lambda b, p: mid_statistics(b.x, b.y, p.d_max),
    "glrt": lambda b, p: glrt_statistics(b.x, b.y, p.d_max),
    "one_bit": lambda b, p: one_bit_statistics(b.x, b.y, p.k, p.d_max),
}


def _resolve(detector: str | StatisticFn) -> StatisticFn:
    return DETECTORS[detector] if isinstance(detector, str) else detector


def _stats_block(args):
    names, params, hypothesis, seed, tag, block, size = args
    batch = generate_batch(params, hypothesis, stream(seed, tag, block), size)
    return {name: _resolve(name)(batch, params) for name in names}


def detector_statistics(
    detectors: Iterable[str | StatisticFn],
    params: ModelParams,
    hypothesis: Hypothesis,
    trials: int,
    seed: int,
    *,
    tag: int | None = None,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> dict:
    """Statistics of several detectors evaluated on the same simulated trials."""
    detectors = list(detectors)
    hypothesis = Hypothesis(hypothesis)
    tag = TAG_EVAL[hypothesis] if tag is None else tag
    jobs = [
        (detectors, params, hypothesis, seed, tag, block, min(block_size, trials - start))
        for block, start in enumerate(range(0, trials, block_size))
    ]
    if workers > 1 and len(jobs) > 1 and all(isinstance(d, str) for d in detectors):
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_stats_block, jobs))
    else:
        parts = [_stats_block(job) for job in jobs]
    return {name: np.concatenate([p[name] for p in parts]) for name in detectors}


def empirical_threshold(null_statistics: np.ndarray, alpha: float) -> float:
    """Threshold with exactly ceil(alpha T) null statistics at or above it (no ties)."""
    values = np.sort(np.asarray(null_statistics, dtype=float))
    exceed = int(math.ceil(alpha * values.size))
    return float(values[values.size - exceed])


def calibrate_empirical(
    detector: str | StatisticFn,
    params: ModelParams,
    alpha: float,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
) -> float:
    """Empirical (1 - alpha)-quantile of a detector statistic over H0 trials."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if alpha * trials < 100:
        raise ValueError(f"insufficient trials: alpha*trials = {alpha * trials:g} < 100")
    stats = detector_statistics(
        [detector], params, Hypothesis.H0, trials, seed, tag=TAG_CALIBRATION, workers=workers
    )
    return empirical_threshold(next(iter(stats.values())), alpha)


def empirical_roc(
    params: ModelParams,
    alphas: Sequence[float],
    trials: int,
    seed: int,
    *,
    detectors: Sequence[str] = ("mid", "one_bit", "glrt"),
    workers: int = 1,
) -> dict[str, list[RocPoint]]:
    """Empirical ROC points for each detector at the requested false-alarm levels.

    The max-index detector uses its exact threshold; the baselines are
    calibrated on a separate set of H0 trials. Detection probabilities come
    from one shared set of H1 trials.
    """
    null = detector_statistics(
        detectors, params, Hypothesis.H0, trials, seed, tag=TAG_CALIBRATION, workers=workers
    )
    alt = detector_statistics(detectors, params, Hypothesis.H1, trials, seed, workers=workers)
    out: dict[str, list[RocPoint]] = {}
    for name in detectors:
        points = []
        for alpha in alphas:
            if name == "mid":
                thr = calibrate_tau(alpha, params.sigma2, params.d_max)
            else:
                thr = empirical_threshold(null[name], alpha)
            est = McEstimate.from_counts(int(np.count_nonzero(alt[name] >= thr)), trials)
            points.append(RocPoint(alpha, est.probability, thr, "empirical", est.ci_halfwidth))
        out[name] = points
    return out
