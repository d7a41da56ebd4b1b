import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nucfrag.analysis import (
    MMInfParams,
    ReplicationSummary,
    balance_decay,
    cv,
    ks_critical,
    ks_exponential,
    lag_scaling_report,
    laplace_check,
    mm_infinity_laplace,
    mm_infinity_simulate,
    mm_infinity_simulate_batch,
    poisson_stream_test,
    sigmoid_sharpness,
)
from nucfrag.errors import InsufficientData, PrecisionError, UndefinedStatistic


def quantile_sample(n, rate):
    i = np.arange(1, n + 1)
    return -np.log(1 - i / (n + 1)) / rate


class TestKS:
    def test_plug_in_quantiles(self):
        # the sup is attained at the last point: n/n - n/(n+1) = 1/(n+1) exactly
        for n in (20, 100, 400):
            r = ks_exponential(quantile_sample(n, 2.0), 2.0)
            assert r.statistic <= 1 / (n + 1) + 1e-12 and r.passed

    def test_degenerate_sample_fails(self):
        r = ks_exponential(np.zeros(50), 1.0)
        assert r.statistic == pytest.approx(1.0) and not r.passed

    def test_too_short(self):
        with pytest.raises(InsufficientData):
            ks_exponential(np.ones(19), 1.0)

    def test_critical_value(self):
        assert ks_critical(400) == pytest.approx(1.358 / 20, abs=2e-4)

    @given(st.floats(0.01, 100), st.integers(0, 1000))
    def test_scale_equivariance(self, c, seed):
        x = np.random.default_rng(seed).exponential(1.0, 60)
        a = ks_exponential(x, 1.0).statistic
        b = ks_exponential(c * x, 1.0 / c).statistic
        assert a == pytest.approx(b, abs=1e-12)


class TestCV:
    def test_constant(self):
        assert cv([3.0] * 10) == 0.0

    def test_exponential_limit(self):
        x = np.random.default_rng(0).exponential(2.0, 200_000)
        assert cv(x) == pytest.approx(1.0, abs=0.01)

    def test_zero_mean(self):
        with pytest.raises(UndefinedStatistic):
            cv([1.0, -1.0])


class TestPoissonStream:
    def test_self_test_passes(self):
        rng = np.random.default_rng(1)
        streams = [np.cumsum(rng.exponential(1.0, 40)) for _ in range(200)]
        r = poisson_stream_test(streams, 1.0, 3.0)
        assert 0.8 < r.dispersion < 1.2 and r.passed

    def test_regular_stream_fails(self):
        r = poisson_stream_test([np.arange(0.5, 3.0, 0.5)] * 200, 1.0, 3.0)
        assert r.dispersion == pytest.approx(0.0) and not r.passed

    def test_no_events(self):
        with pytest.raises(InsufficientData):
            poisson_stream_test([[], []], 1.0, 3.0)

    def test_false_positive_budget(self):
        # fixed-seed meta-test: about alpha of the synthetic experiments may fail
        fails = 0
        for seed in range(40):
            rng = np.random.default_rng(1000 + seed)
            streams = [np.cumsum(rng.exponential(1.0, 30)) for _ in range(100)]
            fails += not poisson_stream_test(streams, 1.0, 3.0, alpha=0.05).passed
        assert fails <= 8


class TestLaplace:
    @pytest.mark.parametrize("beta,xi", [(0.5, 0.3), (2.0, 1.0), (7.0, 2.5)])
    def test_one_and_two_term_forms(self, beta, xi):
        one = mm_infinity_laplace(MMInfParams(beta, 1.0, 1), xi)
        assert one == pytest.approx(1 / (1 + xi / beta), rel=1e-14)
        two = mm_infinity_laplace(MMInfParams(beta, 1.0, 2), xi)
        assert two == pytest.approx(1 / (1 + 2 * xi / beta + xi * (xi + 1) / beta**2), rel=1e-14)

    def test_service_scaling(self):
        # only the ratio arrival / service enters
        assert mm_infinity_laplace(MMInfParams(4.0, 2.0, 5), 0.7) == pytest.approx(mm_infinity_laplace(MMInfParams(2.0, 1.0, 5), 0.7))

    def test_shape_on_grid(self):
        p = MMInfParams(2.0, 1.0, 8)
        xs = np.linspace(0, 5, 60)
        vals = [mm_infinity_laplace(p, x) for x in xs]
        assert vals[0] == 1.0
        assert all(0 < v <= 1 for v in vals)
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_precision_guard(self):
        with pytest.raises(PrecisionError):
            mm_infinity_laplace(MMInfParams(1.0, 1.0, 61), 1.0)
        with pytest.raises(PrecisionError):
            mm_infinity_laplace(MMInfParams(1e-6, 1.0, 60), 50.0)

    def test_monte_carlo_agreement(self):
        c = laplace_check(MMInfParams(2.0, 1.0, 4), 0.5, n_paths=10**5, seed=1)
        assert c.passed


class TestMMInfSimulation:
    def test_start_at_level(self):
        assert mm_infinity_simulate(MMInfParams(1.0, 1.0, 3, initial=3)) == 0.0

    def test_pure_birth(self):
        T = mm_infinity_simulate_batch(MMInfParams(2.0, 0.0, 5, initial=1), 50_000, seed=2)
        # Gamma(4, 2): mean 2, sd 1
        assert abs(T.mean() - 2.0) < 4 / math.sqrt(50_000)

    def test_batch_arrival(self):
        T = mm_infinity_simulate_batch(MMInfParams(1.5, 1.0, 3, batch=3), 20_000, seed=3)
        assert ks_exponential(T, 1.5).passed


def _summaries(L, N, spans=None):
    spans = spans if spans is not None else [1.0] * len(L)
    return [ReplicationSummary(i, i, N, 1.0, 1.0, x, x, None, s, 1, False) for i, (x, s) in enumerate(zip(L, spans))]


class TestLagScaling:
    def test_same_law(self):
        rng = np.random.default_rng(0)
        data = {N: _summaries(rng.gamma(3.0, 1.0, 2000), N) for N in (200, 400, 800)}
        rep = lag_scaling_report(data)
        for v in rep.retained.values():
            assert v == pytest.approx(0.95, abs=0.03)

    def test_drift_detected(self):
        rng = np.random.default_rng(0)
        data = {N: _summaries(rng.gamma(3.0, N / 200, 500), N) for N in (200, 400, 800)}
        rep = lag_scaling_report(data)
        assert rep.retained[800] < 0.5

    def test_order_invariance(self):
        rng = np.random.default_rng(1)
        data = {N: _summaries(rng.gamma(2.0, 1.0, 100), N) for N in (200, 400)}
        shuffled = {N: list(reversed(v)) for N, v in data.items()}
        assert lag_scaling_report(data) == lag_scaling_report(shuffled)

    def test_missing_lags_count_as_outside(self):
        data = {200: _summaries(np.linspace(1, 2, 60), 200), 400: _summaries([1.5] * 30 + [None] * 30, 400)}
        assert lag_scaling_report(data).retained[400] == pytest.approx(0.5)

    def test_needs_replications(self):
        with pytest.raises(InsufficientData):
            lag_scaling_report({200: _summaries([1.0] * 10, 200), 400: _summaries([1.0] * 60, 400)})
        with pytest.raises(InsufficientData):
            lag_scaling_report({200: _summaries([1.0] * 60, 200)})


class TestSharpness:
    def test_step(self):
        c = np.array([[0, 0, 0], [1, 0, 0], [1, 0, 10], [2, 0, 10]], float)
        assert sigmoid_sharpness(c, 10).sharpness == 0.0

    def test_ramp(self):
        s = sigmoid_sharpness(np.array([[0, 0, 0], [1, 0, 1]], float), 1)
        assert (s.t10, s.t50, s.t90) == pytest.approx((0.1, 0.5, 0.9))
        assert s.sharpness == pytest.approx(1.6)

    def test_incomplete(self):
        s = sigmoid_sharpness(np.array([[0, 0, 0], [1, 0, 0.5]], float), 1)
        assert not s.complete and s.t90 is None


def test_balance_decay():
    assert balance_decay({200: [3, -3], 400: [2, 2], 800: [1]}).strictly_decreasing
    assert not balance_decay({200: [3], 400: [3], 800: [1]}).strictly_decreasing
