"""Monte Carlo engine for the two-sensor model and the max-index detector.

Random numbers come from Philox streams keyed by (seed, stream tag, block
index). Trials are grouped into fixed-size blocks, so a run is reproduced
bit for bit whatever the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Literal

import numpy as np

from .gaussians import expected_block_max, std_normal_quantile
from .model import ModelParams, derive

BLOCK_SIZE = 2000
Z95 = 1.959963984540054

Sampler = Literal["ziggurat", "inverse_cdf"]


class Hypothesis(str, Enum):
    H0 = "H0"
    H1 = "H1"


_TAGS = {Hypothesis.H0: 0, Hypothesis.H1: 1}


def stream(seed: int, tag: int | Hypothesis, index: int) -> np.random.Generator:
    """Counter-based generator for substream ``index`` of ``tag`` under ``seed``."""
    tag = _TAGS.get(tag, tag) if isinstance(tag, Hypothesis) else int(tag)
    if seed < 0 or tag < 0 or index < 0:
        raise ValueError("seed, tag and index must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), tag, int(index)])))


def normal(rng: np.random.Generator, scale: float, size, sampler: Sampler = "ziggurat") -> np.ndarray:
    if sampler == "ziggurat":
        return rng.normal(0.0, scale, size)
    if sampler == "inverse_cdf":
        # 53-bit midpoints keep u strictly inside (0, 1)
        bits = rng.integers(0, 1 << 53, size=size, dtype=np.int64)
        u = (bits + 0.5) * 2.0**-53
        return scale * std_normal_quantile(u)
    raise ValueError(f"unknown sampler {sampler!r}")


@dataclass(frozen=True)
class Message:
    index: int
    bits: str

    def __post_init__(self) -> None:
        if not self.bits or set(self.bits) - {"0", "1"}:
            raise ValueError("bits must be a nonempty binary string")
        if int(self.bits, 2) != self.index:
            raise ValueError("bits do not encode index")

    @property
    def k(self) -> int:
        return len(self.bits)

    @classmethod
    def from_index(cls, index: int, k: int) -> "Message":
        if not 0 <= index < (1 << k):
            raise ValueError(f"index {index} does not fit in {k} bits")
        return cls(int(index), format(int(index), f"0{k}b"))

    @classmethod
    def from_bits(cls, bits: str) -> "Message":
        return cls(int(bits, 2), bits)


@dataclass(frozen=True)
class TrialBatch:
    """Encoder block ``x`` (indices 0..N-1) and decoder window ``y``.

    ``y[..., i]`` holds the sample at logical index ``i - d_max``, covering
    -d_max..N-1+d_max. Leading axes, if any, index trials.
    """

    x: np.ndarray
    y: np.ndarray
    hypothesis: Hypothesis
    d_max: int

    def __post_init__(self) -> None:
        n = self.x.shape[-1]
        if self.y.shape[-1] != n + 2 * self.d_max or self.x.shape[:-1] != self.y.shape[:-1]:
            raise ValueError("y must carry N + 2*d_max samples per trial")

    def y_at(self, n):
        return self.y[..., np.asarray(n) + self.d_max]


def _source_offset(d_max: int) -> int:
    # s is drawn on logical indices [-2 d_max, N-1+2 d_max]
    return 2 * d_max


def generate_batch(
    params: ModelParams,
    hypothesis: Hypothesis,
    rng: np.random.Generator,
    size: int,
    *,
    noiseless: bool = False,
    sampler: Sampler = "ziggurat",
) -> TrialBatch:
    """Draw ``size`` independent trials under ``hypothesis``.

    ``noiseless`` zeroes both noise processes; it exists for tests only.
    """
    hypothesis = Hypothesis(hypothesis)
    n, dm, d = params.n, params.d_max, params.true_delay
    s1 = 0.0 if noiseless else params.sigma1
    s2 = 0.0 if noiseless else params.sigma2
    if hypothesis is Hypothesis.H0:
        x = normal(rng, s1, (size, n), sampler)
        y = normal(rng, s2, (size, n + 2 * dm), sampler)
        return TrialBatch(x, y, hypothesis, dm)
    off = _source_offset(dm)
    s = normal(rng, params.sigma_s, (size, n + 4 * dm), sampler)
    x = s[:, off : off + n] + normal(rng, s1, (size, n), sampler)
    # y[m] = s[m - d] for m in [-dm, N-1+dm]
    start = off - dm - d
    y = s[:, start : start + n + 2 * dm] + normal(rng, s2, (size, n + 2 * dm), sampler)
    return TrialBatch(x, y, hypothesis, dm)


def generate_trial(
    params: ModelParams,
    hypothesis: Hypothesis,
    rng: np.random.Generator,
    *,
    noiseless: bool = False,
    sampler: Sampler = "ziggurat",
) -> TrialBatch:
    b = generate_batch(params, hypothesis, rng, 1, noiseless=noiseless, sampler=sampler)
    return TrialBatch(b.x[0], b.y[0], b.hypothesis, b.d_max)


def encode_max_index(x) -> Message:
    """Argmax of the block as a k-bit message; ties go to the smallest index."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n < 2 or n & (n - 1):
        raise ValueError("block length must be a power of two >= 2")
    return Message.from_index(int(np.argmax(x)), n.bit_length() - 1)


def decode_mid(msg: Message, y_window, tau: float, d_max: int) -> tuple[Hypothesis, float]:
    """Threshold the largest decoder sample within d_max of the reported index.

    ``y_window[i]`` is the sample at logical index ``i - d_max``.
    """
    y_window = np.asarray(y_window, dtype=float)
    lo = msg.index  # logical msg.index - d_max
    hi = msg.index + 2 * d_max
    if msg.index < 0 or hi >= y_window.shape[-1]:
        raise IndexError(
            f"window of {y_window.shape[-1]} samples does not cover {msg.index} +/- {d_max}"
        )
    statistic = float(np.max(y_window[lo : hi + 1]))
    return (Hypothesis.H1 if statistic >= tau else Hypothesis.H0), statistic


def mid_statistics(x: np.ndarray, y: np.ndarray, d_max: int) -> np.ndarray:
    """Vectorized decoder statistic for a batch laid out as in ``TrialBatch``."""
    j = np.argmax(x, axis=-1)
    cols = j[:, None] + np.arange(2 * d_max + 1)[None, :]
    return np.max(np.take_along_axis(y, cols, axis=-1), axis=-1)


@dataclass(frozen=True)
class McEstimate:
    probability: float
    trials: int
    ci_halfwidth: float

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "McEstimate":
        if trials < 1:
            raise ValueError("trials must be positive")
        p = hits / trials
        return cls(p, trials, Z95 * math.sqrt(p * (1.0 - p) / trials))

    @property
    def std_error(self) -> float:
        return self.ci_halfwidth / Z95


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    std_error: float
    trials: int

    @property
    def ci_halfwidth(self) -> float:
        return Z95 * self.std_error

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "MeanEstimate":
        values = np.asarray(values, dtype=float)
        return cls(float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)), values.size)


@dataclass(frozen=True)
class MidRun:
    """Per-trial outputs of the lean detector simulation, in trial order."""

    statistic: np.ndarray
    index: np.ndarray
    x_max: np.ndarray
    window: np.ndarray | None = None


def _mid_block(params: ModelParams, hypothesis: Hypothesis, seed: int, block: int, size: int,
               keep_window: bool, sampler: Sampler) -> MidRun:
    """One block of trials, drawing only the decoder samples the detector reads.

    Noise samples of y outside the scanned window never influence the
    statistic, so only 2 d_max + 1 of them are drawn per trial; the source is
    drawn on its full support exactly as in ``generate_batch``.
    """
    rng = stream(seed, hypothesis, block)
    n, dm, d = params.n, params.d_max, params.true_delay
    lags = np.arange(2 * dm + 1)
    if hypothesis is Hypothesis.H0:
        x = normal(rng, params.sigma1, (size, n), sampler)
        j = np.argmax(x, axis=-1)
        window = normal(rng, params.sigma2, (size, 2 * dm + 1), sampler)
    else:
        off = _source_offset(dm)
        s = normal(rng, params.sigma_s, (size, n + 4 * dm), sampler)
        x = s[:, off : off + n] + normal(rng, params.sigma1, (size, n), sampler)
        j = np.argmax(x, axis=-1)
        # logical y index j - dm + i reads s[j - dm + i - d]
        cols = (j + off - dm - d)[:, None] + lags[None, :]
        window = np.take_along_axis(s, cols, axis=-1)
        window += normal(rng, params.sigma2, (size, 2 * dm + 1), sampler)
    x_max = np.take_along_axis(x, j[:, None], axis=-1)[:, 0]
    return MidRun(window.max(axis=-1), j, x_max, window if keep_window else None)


def _block_job(args) -> MidRun:
    return _mid_block(*args)


def simulate_mid(
    params: ModelParams,
    hypothesis: Hypothesis,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
    keep_window: bool = False,
    sampler: Sampler = "ziggurat",
    block_size: int = BLOCK_SIZE,
) -> MidRun:
    """Run ``trials`` detector trials; output is independent of ``workers``."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if workers < 1:
        raise ValueError("workers must be positive")
    hypothesis = Hypothesis(hypothesis)
    jobs = []
    for block, start in enumerate(range(0, trials, block_size)):
        size = min(block_size, trials - start)
        jobs.append((params, hypothesis, seed, block, size, keep_window, sampler))
    if workers == 1 or len(jobs) == 1:
        parts = [_block_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_job, jobs))
    return MidRun(
        np.concatenate([p.statistic for p in parts]),
        np.concatenate([p.index for p in parts]),
        np.concatenate([p.x_max for p in parts]),
        np.concatenate([p.window for p in parts]) if keep_window else None,
    )


def monte_carlo_error_rates(
    params: ModelParams,
    tau: float,
    trials: int,
    seed: int,
    workers: int = 1,
    **options,
) -> tuple[McEstimate, McEstimate]:
    """Empirical (P_FA, P_MD) at threshold ``tau`` from ``trials`` trials per hypothesis."""
    h0 = simulate_mid(params, Hypothesis.H0, trials, seed, workers=workers, **options)
    h1 = simulate_mid(params, Hypothesis.H1, trials, seed, workers=workers, **options)
    fa = int(np.count_nonzero(h0.statistic >= tau))
    md = int(np.count_nonzero(h1.statistic < tau))
    return McEstimate.from_counts(fa, trials), McEstimate.from_counts(md, trials)


def mie_scale(params: ModelParams) -> float:
    """Mean of the encoder's block maximum under H1, sigma_x E[max of N std normals]."""
    return derive(params).sigma_x * expected_block_max(params.n)


def estimate_rho_mie(
    params: ModelParams,
    lag: int,
    trials: int,
    seed: int,
    *,
    hypothesis: Hypothesis = Hypothesis.H1,
    workers: int = 1,
) -> MeanEstimate:
    """Mean of y[J + lag] / E[x[J]] over independent trials."""
    if abs(lag) > params.d_max:
        raise ValueError("lag must lie in [-d_max, d_max]")
    run = simulate_mid(params, hypothesis, trials, seed, workers=workers, keep_window=True)
    scale = mie_scale(params)
    if hypothesis is Hypothesis.H0:
        scale = params.sigma1 * expected_block_max(params.n)
    return MeanEstimate.from_samples(run.window[:, lag + params.d_max] / scale)
