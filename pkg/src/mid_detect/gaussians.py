"""Scalar Gaussian special functions and Gauss-Legendre quadrature.

Everything here accepts Python floats or numpy arrays; array inputs are
evaluated elementwise. The univariate CDF is backed by ``scipy.special.ndtr``,
which keeps full relative accuracy in the lower tail, so the Q-function is
computed as ``ndtr(-x)`` without cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

__all__ = [
    "QuadratureError",
    "QuadratureRule",
    "gauss_legendre",
    "integrate",
    "std_normal_pdf",
    "std_normal_cdf",
    "q_function",
    "std_normal_quantile",
    "bivariate_normal_cdf",
    "expected_block_max",
    "unit_interval_breakpoints",
    "TRUNCATION",
]

# phi(8.5) ~ 1.8e-16 and Q(8.5) ~ 9.5e-18
TRUNCATION = 8.5
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_ONE_MINUS = math.nextafter(1.0, 0.0)


class QuadratureError(RuntimeError):
    """Adaptive refinement ran out of panel budget."""


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if np.any(np.abs(nodes) >= 1):
            raise ValueError("nodes must lie in (-1, 1)")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def order(self) -> int:
        return len(self.nodes)

    def panel_nodes(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map the rule onto panels ``[a_i, b_i]``.

        Returns node and weight arrays of shape ``a.shape + (order,)``.
        """
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


@lru_cache(maxsize=None)
def gauss_legendre(order: int = 64) -> QuadratureRule:
    if order < 1:
        raise ValueError("order must be positive")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(nodes, weights)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    tol: float = 1e-12,
    breakpoints: Sequence[float] = (),
    order: int = 64,
    max_panels: int = 20_000,
) -> float:
    """Adaptive composite Gauss-Legendre integral of a vectorized ``f`` over [a, b].

    The interval is first cut at ``breakpoints``. A panel is accepted once its
    one-panel estimate and the sum over its two halves differ by at most
    ``tol``; otherwise it is bisected. All pending panels are evaluated in a
    single call to ``f`` per sweep.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integration limits must be finite")
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    rule = gauss_legendre(order)
    cuts = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    lo = np.array(cuts[:-1])
    hi = np.array(cuts[1:])
    coarse = _panel_sums(f, rule, lo, hi)

    total = 0.0
    used = len(lo)
    while lo.size:
        mid = 0.5 * (lo + hi)
        halves = _panel_sums(f, rule, np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        left, right = halves[: lo.size], halves[lo.size:]
        fine = left + right
        done = np.abs(fine - coarse) <= tol
        total += float(np.sum(fine[done]))
        todo = ~done
        used += 2 * int(np.count_nonzero(todo))
        if used > max_panels:
            raise QuadratureError(
                f"adaptive quadrature exceeded {max_panels} panels on [{a}, {b}]"
            )
        lo = np.concatenate([lo[todo], mid[todo]])
        hi = np.concatenate([mid[todo], hi[todo]])
        coarse = np.concatenate([left[todo], right[todo]])
    return sign * total


def _panel_sums(f, rule: QuadratureRule, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    x, w = rule.panel_nodes(lo, hi)
    values = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    return np.sum(values * w, axis=-1)


def unit_interval_breakpoints(depth: int) -> list[float]:
    """Points 2^-m and 1 - 2^-m for m = 1..depth, graded toward both ends of [0, 1]."""
    pts = {0.5}
    for m in range(1, depth + 1):
        pts.add(2.0**-m)
        pts.add(1.0 - 2.0**-m)
    return sorted(p for p in pts if 0.0 < p < 1.0)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return out if out.ndim else float(out)


def std_normal_cdf(x):
    out = ndtr(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def q_function(x):
    """Upper tail probability 1 - Phi(x)."""
    out = ndtr(-np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


# Acklam's rational approximation, used only as the Newton starting point.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam_lower(p: np.ndarray) -> np.ndarray:
    """Initial guess for p in (0, 0.5]."""
    out = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        out[tail] = num / den
    body = ~tail
    if np.any(body):
        q = p[body] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        out[body] = num / den
    return out


def std_normal_quantile(p, newton_steps: int = 2):
    """Inverse of the standard normal CDF.

    Rational initial guess followed by ``newton_steps`` Newton corrections on
    ``Phi(x) - p``. The iteration always runs on the lower half, with the upper
    half obtained by reflection; ``1 - p`` is exact for p >= 0.5 so no
    precision is lost there.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0.0) & (p_arr < 1.0))):
        raise ValueError("std_normal_quantile requires 0 < p < 1")
    upper = p_arr > 0.5
    lower_p = np.where(upper, 1.0 - p_arr, p_arr)
    x = _acklam_lower(np.atleast_1d(lower_p)).reshape(lower_p.shape)
    for _ in range(max(newton_steps, 2)):
        dens = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        step = np.divide(ndtr(x) - lower_p, dens, out=np.zeros_like(x), where=dens > 0)
        x = x - step
    x = np.where(upper, -x, x)
    return x if x.ndim else float(x)


def _bvn_integrand(t2: float, rho: float):
    s = math.sqrt((1.0 - rho) * (1.0 + rho))

    def f(v: np.ndarray) -> np.ndarray:
        return _INV_SQRT_2PI * np.exp(-0.5 * v * v) * ndtr((t2 - rho * v) / s)

    return f


def _bvn_limits(t1: float, t2: float) -> float | None:
    if t1 == -math.inf or t2 == -math.inf:
        return 0.0
    if t1 == math.inf:
        return std_normal_cdf(t2)
    if t2 == math.inf:
        return std_normal_cdf(t1)
    return None


def bivariate_normal_cdf(t1, t2: float, rho: float, *, tol: float = 1e-13):
    """P(V1 <= t1, V2 <= t2) for standard normals with correlation ``rho``.

    Evaluates the single integral of phi(v) Phi((t2 - rho v)/sqrt(1 - rho^2))
    over v in [-8.5, t1], with panels graded around the step at v = t2/rho.
    ``t1`` may be an array (``t2`` and ``rho`` scalar), in which case all
    points share one set of panels, refined until successive results agree
    to ``tol``.
    """
    rho = float(rho)
    if not -1.0 < rho < 1.0:
        raise ValueError("bivariate_normal_cdf requires |rho| < 1")
    t2 = float(t2)
    if np.ndim(t1) == 0:
        t1 = float(t1)
        lim = _bvn_limits(t1, t2)
        if lim is not None:
            return lim
        upper = min(t1, TRUNCATION)
        if upper <= -TRUNCATION:
            return 0.0
        bps = _bvn_edges(t2, rho, 2.0 * TRUNCATION, 2.0)
        val = integrate(_bvn_integrand(t2, rho), -TRUNCATION, upper, tol=tol, breakpoints=bps)
        return min(max(val, 0.0), 1.0)
    return _bvn_cdf_array(np.asarray(t1, dtype=float), t2, rho, tol)


def _bvn_cdf_array(t1: np.ndarray, t2: float, rho: float, tol: float) -> np.ndarray:
    out = np.zeros(t1.shape)
    if t2 == -math.inf:
        return out
    if t2 == math.inf:
        return np.asarray(std_normal_cdf(t1), dtype=float)
    flat = t1.ravel()
    res = out.ravel()
    res[flat == math.inf] = std_normal_cdf(t2)
    live = np.isfinite(flat) & (flat > -TRUNCATION)
    upper = np.minimum(flat[live], TRUNCATION)
    if upper.size:
        f = _bvn_integrand(t2, rho)
        rule = gauss_legendre(64)
        prev = _bvn_cumulative(f, rule, upper, _bvn_edges(t2, rho, 0.5, 2.0))
        for level in range(1, 5):
            edges = _bvn_edges(t2, rho, 0.5 / 2**level, 2.0 ** (1.0 / 2**level))
            cur = _bvn_cumulative(f, rule, upper, edges)
            if np.max(np.abs(cur - prev)) <= tol:
                break
            prev = cur
        res[live] = np.clip(cur, 0.0, 1.0)
    return res.reshape(t1.shape)


def _bvn_edges(t2: float, rho: float, spacing: float, ratio: float) -> np.ndarray:
    """Shared panel edges: uniform, plus geometric grading around the step at t2/rho.

    The inner factor Phi((t2 - rho v)/sqrt(1 - rho^2)) switches over a width
    ~sqrt(1 - rho^2)/|rho| around v = t2/rho, which tends to 0 as |rho| -> 1.
    """
    edges = [np.arange(-TRUNCATION, TRUNCATION, spacing), [TRUNCATION]]
    if rho != 0.0:
        c = t2 / rho
        width = math.sqrt((1.0 - rho) * (1.0 + rho)) / abs(rho)
        # a step wider than the panel spacing is resolved by the uniform panels
        if -TRUNCATION < c < TRUNCATION and width < spacing:
            n = int(math.ceil(math.log(2.0 * TRUNCATION / width) / math.log(ratio))) + 1
            offsets = width * ratio ** np.arange(max(n, 1))
            edges += [[c], c - offsets, c + offsets]
    edges = np.unique(np.concatenate(edges))
    return edges[(edges >= -TRUNCATION) & (edges <= TRUNCATION)]


def _bvn_cumulative(f, rule: QuadratureRule, upper: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Integral of f over [-TRUNCATION, upper] for each entry of ``upper``.

    Whole panels below each limit come from a running sum; the panel holding
    the limit is integrated over its covered part.
    """
    x, w = rule.panel_nodes(edges[:-1], edges[1:])
    cum = np.concatenate([[0.0], np.cumsum(np.sum(f(x) * w, axis=-1))])
    k = np.clip(np.searchsorted(edges, upper, side="right") - 1, 0, edges.size - 2)
    xp, wp = rule.panel_nodes(edges[k], upper)
    return cum[k] + np.sum(f(xp) * wp, axis=-1)


@lru_cache(maxsize=256)
def expected_block_max(n: int) -> float:
    """Mean of the maximum of ``n`` iid standard normals.

    Integrates n u^(n-1) Phi^-1(u) over (0, 1), written in w = 1 - u so the
    mass near u = 1 is resolved on geometrically graded panels.
    """
    if n < 1 or int(n) != n:
        raise ValueError("expected_block_max requires a positive integer n")
    n = int(n)
    if n == 1:
        return 0.0

    def f(w: np.ndarray) -> np.ndarray:
        w = np.minimum(w, _ONE_MINUS)
        return -n * np.exp((n - 1) * np.log1p(-w)) * std_normal_quantile(w)

    depth = int(math.ceil(math.log2(n))) + 45
    return integrate(f, 0.0, 1.0, tol=1e-13, breakpoints=unit_interval_breakpoints(depth))
