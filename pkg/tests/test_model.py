import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mid_detect.model import (
    ModelParams,
    ParameterError,
    derive,
    inside_count_multiplicities,
    m_inside,
    m_outside,
)


def test_reference_setup():
    dp = derive(ModelParams(sigma_s=1, sigma1=1, sigma2=1, k=8, d_max=50, true_delay=32))
    assert (dp.n, dp.beta, dp.sigma_mmse2, dp.sigma_x2, dp.sigma_eff2) == (256, 0.5, 1.5, 2.0, 2.0)
    assert dp.rho == pytest.approx(0.5, abs=1e-15)
    assert dp.rho_d == pytest.approx(0.5, abs=1e-15)


def test_noiseless_limit():
    assert derive(ModelParams(sigma_s=100, sigma1=1, sigma2=1)).rho_d >= 0.999


def test_rho_d_unequal_noise():
    dp = derive(ModelParams(sigma_s=2, sigma1=1, sigma2=3))
    assert dp.rho_d == pytest.approx(4 / math.sqrt(5 * 13), abs=1e-15)
    assert dp.rho_d == pytest.approx(0.4961389383, abs=1e-10)


@pytest.mark.parametrize(
    "kwargs,field",
    [
        (dict(sigma_s=0.0), "sigma_s"),
        (dict(sigma1=-1.0), "sigma1"),
        (dict(sigma2=math.inf), "sigma2"),
        (dict(k=0), "k"),
        (dict(d_max=-1), "d_max"),
        (dict(true_delay=51), "true_delay"),
        (dict(k=6, d_max=32, true_delay=0), "d_max"),
    ],
)
def test_invariant_violations_name_the_field(kwargs, field):
    with pytest.raises(ParameterError) as err:
        ModelParams(**kwargs)
    assert err.value.field == field


@given(st.floats(0.05, 20), st.floats(0.05, 20), st.floats(0.05, 20), st.floats(0.1, 10))
def test_derive_scale_consistent(ss, s1, s2, c):
    a = derive(ModelParams(sigma_s=ss, sigma1=s1, sigma2=s2))
    b = derive(ModelParams(sigma_s=c * ss, sigma1=c * s1, sigma2=c * s2))
    for name in ("beta", "rho", "rho_d"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-12)
    for name in ("sigma_x2", "sigma_mmse2", "sigma_eff2"):
        assert getattr(b, name) == pytest.approx(c * c * getattr(a, name), rel=1e-12)
    assert 0 < a.beta < 1 and 0 < a.rho < 1 and 0 < a.rho_d < 1
    assert a.sigma_eff2 == a.beta**2 * a.sigma_x2 + a.sigma_mmse2


def test_m_inside_examples():
    assert m_inside(0, 50, 256) == 50
    assert m_inside(128, 50, 256) == 100
    assert m_inside(255, 50, 256) == 50
    assert m_outside(0, 50, 256) == 50
    assert m_outside(128, 50, 256) == 0
    assert all(m_inside(j, 50, 256) + m_outside(j, 50, 256) == 100 for j in range(256))


@pytest.mark.parametrize("j", [-1, 256])
def test_m_inside_range(j):
    with pytest.raises(ValueError):
        m_inside(j, 50, 256)
    with pytest.raises(ValueError):
        m_outside(j, 50, 256)


@given(st.integers(1, 10).flatmap(lambda k: st.tuples(st.just(k), st.integers(0, (2**k - 1) // 2))))
def test_mirror_symmetry_and_multiset(kd):
    k, dm = kd
    n = 2**k
    values = [m_inside(j, dm, n) for j in range(n)]
    assert values == values[::-1]
    hist = np.bincount(values, minlength=2 * dm + 1)
    assert hist[2 * dm] == n - 2 * dm
    for jp in range(dm):
        assert hist[dm + jp] == 2
    v, c = inside_count_multiplicities(n, dm)
    assert dict(zip(v.tolist(), c.tolist())) == {i: int(h) for i, h in enumerate(hist) if h}


@given(st.integers(2, 9).flatmap(
    lambda k: st.integers(0, (2**k - 1) // 2).flatmap(
        lambda dm: st.tuples(st.just(k), st.just(dm), st.integers(-dm, dm)))))
def test_delay_shifted_multiplicities_brute_force(kdd):
    k, dm, d = kdd
    n = 2**k
    counts = {}
    for j in range(n):
        inside = sum(1 for r in range(-dm - d, dm - d + 1) if r != 0 and 0 <= j + r < n)
        counts[inside] = counts.get(inside, 0) + 1
    v, c = inside_count_multiplicities(n, dm, d)
    assert dict(zip(v.tolist(), c.tolist())) == counts


def test_snr_copy():
    p = ModelParams().with_snr_db(10.0)
    assert p.sigma_s**2 == pytest.approx(10.0)
    assert (p.k, p.d_max, p.true_delay) == (8, 50, 32)
