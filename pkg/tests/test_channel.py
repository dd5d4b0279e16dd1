import inspect
import math

import numpy as np
import pytest

from fedfair.channel import (
    ChannelRealization,
    ChannelSource,
    ChannelSpec,
    ReceivedSums,
    draw_channel,
    expected_h,
    expected_h_monte_carlo,
    normalized,
    ota_aggregate,
    superpose,
    transmit,
)
from fedfair.engine import CentralUnit, LocalUpdate


def lam(*values):
    return ChannelRealization(np.array(values, dtype=float))


def test_degenerate_uniform_draw():
    r = draw_channel(ChannelSpec("uniform", 1.0, 1.0), 3, 0, 7)
    np.testing.assert_array_equal(r.lam, [1.0, 1.0, 1.0])


def test_draw_is_deterministic_given_seed_and_k():
    spec = ChannelSpec()
    a = draw_channel(spec, 5, 1234, 99)
    b = draw_channel(spec, 5, 1234, 99)
    np.testing.assert_array_equal(a.lam, b.lam)
    assert not np.array_equal(a.lam, draw_channel(spec, 5, 1235, 99).lam)
    assert not np.array_equal(a.lam, draw_channel(spec, 5, 1234, 100).lam)


def test_source_matches_draw_channel():
    spec = ChannelSpec("rayleigh", scale=0.8, floor=0.05)
    src = ChannelSource(spec, 4, 3)
    for k in (0, 1, 1023, 1024, 5000, 17):
        np.testing.assert_array_equal(src(k).lam, draw_channel(spec, 4, k, 3).lam)
    np.testing.assert_array_equal(src.block(1020, 1030)[5], draw_channel(spec, 4, 1025, 3).lam)


def test_uniform_empirical_mean():
    lam_ = ChannelSource(ChannelSpec("uniform", 0.5, 2.0), 1, 11).block(0, 10**5)
    assert lam_.mean() == pytest.approx(1.25, abs=0.01)
    assert lam_.min() >= 0.5 and lam_.max() <= 2.0


def test_rayleigh_draws_respect_floor_and_mean():
    spec = ChannelSpec("rayleigh", scale=1.0, floor=0.3)
    x = ChannelSource(spec, 2, 5).block(0, 50_000).ravel()
    assert x.min() >= 0.3
    # oracle for the conditional mean: quadrature of the survival function
    r = np.linspace(0.3, 12.0, 200_001)
    surv = np.exp(-(r**2 - 0.3**2) / 2)
    quad = 0.3 + np.sum((surv[1:] + surv[:-1]) / 2 * np.diff(r))
    assert spec.mean == pytest.approx(quad, rel=1e-8)
    assert x.mean() == pytest.approx(quad, abs=4 * x.std() / math.sqrt(x.size))


@pytest.mark.parametrize(
    "kwargs",
    [dict(lo=0.0, hi=1.0), dict(lo=2.0, hi=1.0), dict(distribution="rayleigh", floor=0.0), dict(distribution="rician")],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ChannelSpec(**kwargs)


def test_realization_rejects_nonpositive():
    with pytest.raises(ValueError):
        lam(1.0, 0.0)
    with pytest.raises(ValueError):
        lam(1.0, -2.0)


def test_superpose_examples():
    assert superpose([3.0, 4.0], lam(1, 2)) == 11.0
    sig = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    np.testing.assert_array_equal(superpose(sig, lam(1, 1, 1)), sig.sum(axis=0))
    np.testing.assert_array_equal(superpose(np.zeros((3, 2)), lam(0.3, 4, 9)), [0.0, 0.0])
    with pytest.raises(ValueError):
        superpose([1.0, 2.0, 3.0], lam(1, 2))


def test_ota_aggregate_examples():
    ups = [LocalUpdate(np.array([0.0]), 0.0), LocalUpdate(np.array([4.0]), 8.0)]
    theta, alpha = ota_aggregate(ups, lam(1, 3))
    np.testing.assert_allclose(theta, [3.0])
    assert alpha == pytest.approx(6.0)


def test_ota_aggregate_requires_rho_one():
    with pytest.raises(ValueError):
        ota_aggregate([LocalUpdate(np.zeros(1), 0.0, 2.0)], lam(1.0))


@pytest.mark.parametrize("values, expected", [((1, 1, 1), [1 / 3] * 3), ((2, 6), [0.25, 0.75]), ((4.2,), [1.0])])
def test_normalized(values, expected):
    np.testing.assert_allclose(normalized(lam(*values)), expected, rtol=1e-15)


def test_channel_invariants_randomized(rng):
    n = 6
    src = ChannelSource(ChannelSpec(), n, 2)
    for k in range(10_000):
        r = src(k)
        h = normalized(r)
        assert np.all(h > 0)
        assert abs(h.sum() - 1.0) <= 1e-12


def test_scale_invariance_and_consensus(rng):
    n, m = 5, 3
    src = ChannelSource(ChannelSpec(), n, 4)
    for k in range(2000):
        r = src(k)
        ups = [LocalUpdate(rng.normal(size=m), float(rng.normal())) for _ in range(n)]
        base_t, base_a = ota_aggregate(ups, r)
        for c in (1e-3, 1e3):
            t, a = ota_aggregate(ups, ChannelRealization(r.lam * c))
            np.testing.assert_allclose(t, base_t, rtol=0, atol=1e-12)
            assert abs(a - base_a) <= 1e-12
        x, a0 = rng.normal(size=m), float(rng.normal())
        t, a = ota_aggregate([LocalUpdate(x, a0)] * n, r)
        np.testing.assert_allclose(t, x, rtol=0, atol=1e-12)
        assert abs(a - a0) <= 1e-12


def test_aggregate_is_convex_combination(rng):
    r = lam(0.7, 1.9, 1.1)
    thetas = rng.normal(size=(3, 2))
    ups = [LocalUpdate(t, float(i)) for i, t in enumerate(thetas)]
    h = normalized(r)
    t, a = ota_aggregate(ups, r)
    np.testing.assert_allclose(t, h @ thetas, rtol=1e-14)
    assert a == pytest.approx(h @ [0.0, 1.0, 2.0], rel=1e-14)


def test_lag_one_autocorrelation_is_small():
    x = ChannelSource(ChannelSpec(), 3, 8).block(0, 10**5)
    for i in range(3):
        s = x[:, i] - x[:, i].mean()
        rho = (s[1:] @ s[:-1]) / (s @ s)
        assert abs(rho) < 0.02
    # and across agents at the same step
    c = np.corrcoef(x.T)
    assert np.all(np.abs(c[np.triu_indices(3, 1)]) < 0.02)


def test_expected_h_symmetric_is_exact():
    for n in (1, 4, 12):
        eh = expected_h(ChannelSpec(), n)
        np.testing.assert_array_equal(eh.mean, np.full(n, 1.0 / n))
        assert eh.exact


def test_expected_h_monte_carlo_cross_check():
    eh = expected_h_monte_carlo(ChannelSpec("uniform", 0.5, 2.0), 4, draws=10**5)
    np.testing.assert_allclose(eh.mean, 0.25, atol=0.005)
    assert abs(eh.mean.sum() - 1.0) < 1e-12
    assert np.all(eh.stderr > 0)


def test_expected_h_asymmetric_gains():
    spec = ChannelSpec("uniform", 1.0, 1.0, agent_gains=(1.0, 3.0))
    eh = expected_h(spec, 2, draws=1000)
    np.testing.assert_allclose(eh.mean, [0.25, 0.75], atol=1e-12)
    spec = ChannelSpec("uniform", 0.5, 2.0, agent_gains=(1.0, 1.0, 4.0))
    eh = expected_h(spec, 3, draws=50_000)
    assert eh.mean[2] > eh.mean[0] and not eh.exact


def test_server_sees_only_superposed_sums():
    fields = [f for f in ReceivedSums._fields]
    assert fields == ["theta_rec", "alpha_rec", "rho_rec"]
    params = list(inspect.signature(CentralUnit.receive).parameters)
    assert params == ["self", "rec"]
    ann = inspect.signature(CentralUnit.receive).parameters["rec"].annotation
    assert "ReceivedSums" in str(ann)
    # nothing per-agent survives transmission
    r = lam(0.5, 1.5)
    rec = transmit([LocalUpdate(np.array([1.0, 2.0]), 3.0), LocalUpdate(np.array([-1.0, 0.0]), 1.0)], r)
    assert isinstance(rec, ReceivedSums) and len(rec) == 3
    np.testing.assert_allclose(rec.theta_rec, [-1.0, 1.0])
    assert rec.alpha_rec == pytest.approx(3.0) and rec.rho_rec == pytest.approx(2.0)
