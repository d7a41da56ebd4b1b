"""Statistics over replicated trajectories.

Goodness-of-fit of the rescaled nucleation time, the Poisson test of the
nucleation stream, lag-time brackets across system sizes, sigmoid sharpness
of the polymerization curve, and the M/M/infinity hitting-time oracle used to
cross-check the event-driven machinery.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import mpmath
import numpy as np
from scipy import stats

from . import kernels
from .errors import InsufficientData, PrecisionError, UndefinedStatistic, UnsupportedConfiguration
from .model import ModelParams, psi
from .seeding import make_rng

MIN_KS_SAMPLES = 20
MIN_LAG_REPLICATIONS = 50
MAX_LAPLACE_LEVEL = 60


# ---------------------------------------------------------------- summaries


@dataclass
class ReplicationSummary:
    """Scalar outputs of one replication, one row of the summary CSV."""

    replication_id: int
    seed: int
    N: int
    T_N: float | None
    T_scaled: float | None
    L_delta: float | None
    L_scaled: float | None
    half_time: float | None
    explosion_span: float | None
    event_count: int
    truncated: bool

    FIELDS = (
        "replication_id", "seed", "N", "T_N", "T_scaled", "L_delta", "L_scaled",
        "half_time", "explosion_span", "event_count", "truncated",
    )

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}


def summarize(record, params: ModelParams, replication_id: int = 0) -> ReplicationSummary:
    """Reduce a ``TrajectoryRecord`` to its summary row (times rescaled by ``psi``)."""
    N = record.N
    scale = psi(params, N)
    T, L = record.first_nucleation_time, record.lag_time
    span = None
    if T is not None and L is not None:
        span = (L - T) / math.log(N)
    return ReplicationSummary(
        replication_id=int(replication_id),
        seed=int(record.seed),
        N=int(N),
        T_N=T,
        T_scaled=None if T is None else T / scale,
        L_delta=L,
        L_scaled=None if L is None else L / scale,
        half_time=record.half_time,
        explosion_span=span,
        event_count=int(record.event_count),
        truncated=bool(record.truncated),
    )


def _finite(samples) -> np.ndarray:
    a = np.asarray([s for s in samples if s is not None], dtype=float)
    return a[np.isfinite(a)]


# ---------------------------------------------------------------- tests


@dataclass
class KSResult:
    statistic: float
    critical: float
    pvalue: float
    passed: bool
    n: int


def ks_critical(n: int, alpha: float = 0.05) -> float:
    """Asymptotic one-sample KS critical value ``c(alpha) / sqrt(n)``."""
    return float(stats.kstwobign.isf(alpha) / math.sqrt(n))


def ks_exponential(samples: Sequence[float], rate: float, alpha: float = 0.05) -> KSResult:
    """One-sample KS distance of ``samples`` against ``Exp(rate)``."""
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_KS_SAMPLES:
        raise InsufficientData(f"KS needs at least {MIN_KS_SAMPLES} samples, got {x.size}")
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    res = stats.kstest(x, "expon", args=(0.0, 1.0 / rate))
    crit = ks_critical(x.size, alpha)
    return KSResult(float(res.statistic), crit, float(res.pvalue), bool(res.statistic < crit), int(x.size))


def ks_two_sample(a: Sequence[float], b: Sequence[float], alpha: float = 0.01) -> KSResult:
    """Two-sample KS; passes when the p-value is at least ``alpha``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if min(a.size, b.size) < MIN_KS_SAMPLES:
        raise InsufficientData("two-sample KS needs at least 20 samples per side")
    res = stats.ks_2samp(a, b)
    n_eff = a.size * b.size / (a.size + b.size)
    crit = ks_critical(int(round(n_eff)), alpha)
    return KSResult(float(res.statistic), crit, float(res.pvalue), bool(res.pvalue >= alpha), int(a.size + b.size))


def cv(samples: Sequence[float]) -> float:
    """Sample coefficient of variation (``ddof=1``)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise InsufficientData("cv needs at least 2 samples")
    m = x.mean()
    if not m > 0:
        raise UndefinedStatistic(f"cv is undefined for non-positive mean {m}")
    return float(x.std(ddof=1) / m)


@dataclass
class PoissonStreamResult:
    dispersion: float
    dispersion_pvalue: float
    mean_count: float
    ks: KSResult
    passed: bool
    n_events: int


def poisson_stream_test(
    event_times: Sequence[Sequence[float]], rate: float, horizon: float, alpha: float = 0.05
) -> PoissonStreamResult:
    """Dispersion and inter-arrival tests of replicated event streams on ``[0, horizon]``.

    Times and ``rate`` must use the same clock. Replication ``r`` is shifted
    by ``r * horizon`` and the streams are concatenated, so inter-arrival
    gaps are never censored at the window edges; under the Poisson
    hypothesis the concatenation is itself a Poisson stream.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    streams = [np.sort(np.asarray(ts, float)) for ts in event_times]
    streams = [ts[(ts >= 0) & (ts <= horizon)] for ts in streams]
    counts = np.array([ts.size for ts in streams], dtype=float)
    total = int(counts.sum())
    if total == 0:
        raise InsufficientData("no events in any replication")
    R = counts.size
    mean = counts.mean()
    disp = counts.var(ddof=1) / mean if R >= 2 else float("nan")
    if R >= 2:
        chi = (R - 1) * disp
        p_disp = float(2.0 * min(stats.chi2.cdf(chi, R - 1), stats.chi2.sf(chi, R - 1)))
    else:
        p_disp = float("nan")
    pooled = np.concatenate([ts + r * horizon for r, ts in enumerate(streams)])
    gaps = np.diff(np.concatenate([[0.0], pooled]))
    if gaps.size < MIN_KS_SAMPLES:
        raise InsufficientData(f"only {gaps.size} inter-arrival gaps")
    ks = ks_exponential(gaps, rate, alpha)
    passed = ks.passed and (p_disp >= alpha if R >= 2 else True)
    return PoissonStreamResult(float(disp), p_disp, float(mean), ks, bool(passed), total)


# ---------------------------------------------------------------- M/M/infinity oracle


@dataclass(frozen=True)
class MMInfParams:
    """Birth-death queue: batches of ``batch`` arrivals at rate ``arrival``,
    each customer served at rate ``service``; hitting level ``n`` from ``initial``."""

    arrival: float
    service: float
    n: int
    initial: int = 0
    batch: int = 1

    def __post_init__(self):
        if not self.arrival > 0:
            raise ValueError("arrival rate must be positive")
        if self.service < 0:
            raise ValueError("service rate must be non-negative")
        if self.n < 0 or self.initial < 0 or self.batch < 1:
            raise ValueError("levels must be non-negative and batch >= 1")

    @property
    def beta(self) -> float:
        return self.arrival / self.service


def mm_infinity_laplace(params: MMInfParams, xi: float) -> float:
    """``E[exp(-service * xi * T_n)]`` from an empty queue, as ``1 / D(xi)`` with

    ``D(xi) = sum_k C(n, k) beta**-k (xi)(xi+1)...(xi+k-1)``.
    Evaluated in 50-digit arithmetic; overflow of the result is reported.
    """
    if params.initial != 0 or params.batch != 1:
        raise UnsupportedConfiguration("closed form needs initial = 0 and batch = 1", "initial")
    if params.service <= 0:
        raise UnsupportedConfiguration("closed form needs service > 0", "service")
    if params.n > MAX_LAPLACE_LEVEL:
        raise PrecisionError(f"level n={params.n} exceeds {MAX_LAPLACE_LEVEL}; use a smaller n")
    if xi < 0:
        raise ValueError("xi must be non-negative")
    with mpmath.workdps(50):
        beta = mpmath.mpf(params.arrival) / params.service
        x = mpmath.mpf(xi)
        D = mpmath.mpf(0)
        rising = mpmath.mpf(1)
        for k in range(params.n + 1):
            D += mpmath.binomial(params.n, k) * rising / beta**k
            rising *= x + k
        out = 1 / D
    val = float(out)
    if not math.isfinite(float(D)) or (val == 0.0 and out != 0):
        raise PrecisionError(f"Laplace series leaves double range (D={mpmath.nstr(D, 5)}); use a smaller n")
    return val


def mm_infinity_simulate_batch(params: MMInfParams, n_paths: int, seed=0) -> np.ndarray:
    """Hitting times of level ``n`` for ``n_paths`` independent queue paths."""
    return kernels.mminf_kernel(
        float(params.arrival), float(params.service), int(params.n), int(params.initial),
        int(params.batch), int(n_paths), make_rng(seed),
    )


def mm_infinity_simulate(params: MMInfParams, seed=0) -> float:
    """One exact hitting time of level ``n``."""
    return float(mm_infinity_simulate_batch(params, 1, seed)[0])


@dataclass
class LaplaceCheck:
    closed_form: float
    mc_mean: float
    std_error: float
    z: float
    passed: bool


def laplace_check(params: MMInfParams, xi: float, n_paths: int = 10**5, seed=0, n_se: float = 3.0) -> LaplaceCheck:
    """Monte Carlo mean of ``exp(-service * xi * T_n)`` against the closed form."""
    T = mm_infinity_simulate_batch(params, n_paths, seed)
    y = np.exp(-params.service * xi * T)
    m, se = float(y.mean()), float(y.std(ddof=1) / math.sqrt(n_paths))
    exact = mm_infinity_laplace(params, xi)
    z = abs(m - exact) / se if se > 0 else (0.0 if m == exact else math.inf)
    return LaplaceCheck(exact, m, se, z, bool(z <= n_se))


# ---------------------------------------------------------------- lag scaling


@dataclass
class LagScalingReport:
    K1: float
    K2: float
    reference_N: int
    retained: dict
    quantiles: dict
    median_explosion_span: dict
    missing: dict

    def to_dict(self) -> dict:
        return asdict(self)


def lag_scaling_report(summaries: Mapping[int, Sequence[ReplicationSummary]], qlo: float = 0.025, qhi: float = 0.975) -> LagScalingReport:
    """Bracket ``[K1, K2]`` of ``L_scaled`` at the smallest N and the mass it keeps at larger N.

    Runs that never reached the lag count as outside the bracket.
    """
    Ns = sorted(summaries)
    if len(Ns) < 2:
        raise InsufficientData("lag scaling needs at least two system sizes")
    for N in Ns:
        if len(summaries[N]) < MIN_LAG_REPLICATIONS:
            raise InsufficientData(f"N={N} has {len(summaries[N])} replications, need {MIN_LAG_REPLICATIONS}")
    L = {N: _finite(s.L_scaled for s in summaries[N]) for N in Ns}
    missing = {N: len(summaries[N]) - L[N].size for N in Ns}
    ref = Ns[0]
    if L[ref].size == 0:
        raise InsufficientData(f"no replication at N={ref} reached the lag time")
    K1, K2 = (float(v) for v in np.quantile(L[ref], [qlo, qhi]))
    retained = {N: float(np.count_nonzero((L[N] >= K1) & (L[N] <= K2)) / len(summaries[N])) for N in Ns[1:]}
    quant = {N: [float(v) for v in np.quantile(L[N], [qlo, 0.5, qhi])] if L[N].size else None for N in Ns}
    spans = {}
    for N in Ns:
        sp = _finite(s.explosion_span for s in summaries[N])
        spans[N] = float(np.median(sp)) if sp.size else None
    return LagScalingReport(K1, K2, ref, retained, quant, spans, missing)


# ---------------------------------------------------------------- curves


@dataclass
class Sharpness:
    t10: float | None
    t50: float | None
    t90: float | None
    sharpness: float | None
    complete: bool


def first_crossing(t: np.ndarray, y: np.ndarray, level: float) -> float | None:
    """First time the piecewise-linear path through ``(t, y)`` reaches ``level``."""
    idx = np.flatnonzero(y >= level)
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0 or y[i] == y[i - 1]:
        return float(t[i])
    return float(t[i - 1] + (level - y[i - 1]) * (t[i] - t[i - 1]) / (y[i] - y[i - 1]))


def sigmoid_sharpness(mass_curve: np.ndarray, N: int, column: int = 2) -> Sharpness:
    """Crossing times of 10/50/90% of ``N`` in a ``(t, stable, polymerized)`` curve
    and the ratio ``(t90 - t10) / t50``. ``complete`` is False if 90% is never reached."""
    c = np.asarray(mass_curve, float)
    t, frac = c[:, 0], c[:, column] / N
    t10, t50, t90 = (first_crossing(t, frac, q) for q in (0.1, 0.5, 0.9))
    if t90 is None or t50 is None or t10 is None or t50 <= 0:
        return Sharpness(t10, t50, t90, None, False)
    return Sharpness(t10, t50, t90, (t90 - t10) / t50, True)


# ---------------------------------------------------------------- balance


@dataclass
class BalanceDecay:
    medians: dict
    strictly_decreasing: bool


def balance_decay(deltas: Mapping[int, Sequence[float]]) -> BalanceDecay:
    """Median ``|Delta|`` per N and whether it strictly decreases with N."""
    Ns = sorted(deltas)
    med = {N: float(np.median(np.abs(np.asarray(deltas[N], float)))) for N in Ns}
    dec = all(med[a] > med[b] for a, b in zip(Ns, Ns[1:]))
    return BalanceDecay(med, bool(dec))
