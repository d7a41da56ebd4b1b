"""Stable-polymer branching process.

While monomers are plentiful, each stable polymer grows at a roughly constant
rate ``alpha`` and breaks at rate ``mu``; pieces below the nucleus size
dissolve almost at once and are dropped. The population of stable polymers is
then a branching process whose survival decides whether polymerization takes
off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import kernels
from .errors import ConfigurationError
from .fragmentation import FragmentationSpec
from .seeding import make_rng, replication_seed, seed_value

DEFAULT_POPULATION_CAP = 10**5
DEFAULT_GRID_POINTS = 201


@dataclass(frozen=True)
class BranchingParams:
    alpha: float
    mu: float
    n_c: int
    fragmentation: FragmentationSpec = field(default_factory=FragmentationSpec.uniform)
    initial_size: int | None = None

    def __post_init__(self):
        if self.initial_size is None:
            object.__setattr__(self, "initial_size", int(self.n_c))
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}", "alpha")
        # mu = 0 is allowed as the degenerate no-fragmentation limit
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ConfigurationError(f"mu must be non-negative, got {self.mu}", "mu")
        if self.n_c < 2:
            raise ConfigurationError(f"n_c must be >= 2, got {self.n_c}", "n_c")
        if self.initial_size < self.n_c:
            raise ConfigurationError(
                f"initial size {self.initial_size} is below the nucleus size {self.n_c}", "initial_size"
            )

    @property
    def ratio(self) -> float:
        return math.inf if self.mu == 0 else self.alpha / self.mu


@dataclass
class BranchingRecord:
    """Outcome of one branching run.

    ``population_curve`` holds ``(t, population)`` rows on the sampling grid
    up to the end of the run, plus the final point.
    """

    population_curve: np.ndarray
    extinct: bool
    extinction_time: float | None
    capped: bool
    growth_rate_estimate: float | None
    final_population: int
    end_time: float
    event_count: int
    retained_below_nucleus: int
    seed: int = -1
    truncated: bool = False

    @property
    def survived(self) -> bool:
        """Capped runs count as survivors."""
        return not self.extinct


def log_population_slope(curve: np.ndarray) -> float | None:
    """Least-squares slope of ``log population`` over the last half of the curve's span."""
    if curve.shape[0] < 2:
        return None
    t_end = curve[-1, 0]
    mask = (curve[:, 0] >= 0.5 * t_end) & (curve[:, 1] > 0)
    t, pop = curve[mask, 0], curve[mask, 1]
    if t.size < 2 or np.ptp(t) == 0:
        return None
    return float(np.polyfit(t, np.log(pop), 1)[0])


def run_branching(
    params: BranchingParams,
    horizon: float,
    population_cap: int = DEFAULT_POPULATION_CAP,
    seed=0,
    grid_points: int = DEFAULT_GRID_POINTS,
    event_budget: int = 10**10,
) -> BranchingRecord:
    """Simulate the branching process from a single polymer of ``params.initial_size``."""
    if not horizon > 0:
        raise ConfigurationError(f"horizon must be positive, got {horizon}", "horizon")
    grid = np.linspace(0.0, float(horizon), int(grid_points))
    code, p, w = params.fragmentation.kernel_args()
    t, P, extinct, ext_time, capped, pop, n_events, below, status = kernels.branching_kernel(
        float(params.alpha), float(params.mu), int(params.n_c), int(params.initial_size),
        code, p, w, float(horizon), int(population_cap), grid, make_rng(seed), int(event_budget),
    )
    seen = pop >= 0
    curve = np.column_stack([grid[seen], pop[seen]])
    if curve.shape[0] == 0 or curve[-1, 0] < t:
        curve = np.vstack([curve, [[t, float(P)]]])
    slope = None
    if not extinct:
        slope = log_population_slope(curve)
    return BranchingRecord(
        population_curve=curve,
        extinct=bool(extinct),
        extinction_time=float(ext_time) if extinct else None,
        capped=bool(capped),
        growth_rate_estimate=slope,
        final_population=int(P),
        end_time=float(t),
        event_count=int(n_events),
        retained_below_nucleus=int(below),
        seed=seed_value(seed),
        truncated=status == kernels.STATUS_BUDGET,
    )


def offspring_mean_bound(params: BranchingParams, epsilon: float, k0: int) -> float:
    """Lower bound ``(1 + epsilon) * (alpha / (alpha + mu))**(k0 - n_c)`` on the mean
    number of stable fragments of a polymer born at size ``n_c``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if k0 < params.n_c:
        raise ValueError(f"k0 must be >= n_c={params.n_c}, got {k0}")
    q = params.alpha / (params.alpha + params.mu)
    return (1.0 + epsilon) * q ** (k0 - params.n_c)


@dataclass
class SurvivalEstimate:
    survival_prob: float
    survival_ci: tuple[float, float]
    growth_rate: float | None
    growth_rate_ci: tuple[float, float] | None
    replications: int
    survivors: int
    capped: int
    records: list[BranchingRecord] = field(default_factory=list, repr=False)

    @property
    def survival_excludes_zero(self) -> bool:
        return self.survival_ci[0] > 0.0

    def to_dict(self) -> dict:
        return {
            "survival_prob": self.survival_prob,
            "survival_ci_low": self.survival_ci[0],
            "survival_ci_high": self.survival_ci[1],
            "growth_rate": self.growth_rate,
            "growth_rate_ci_low": None if self.growth_rate_ci is None else self.growth_rate_ci[0],
            "growth_rate_ci_high": None if self.growth_rate_ci is None else self.growth_rate_ci[1],
            "replications": self.replications,
            "survivors": self.survivors,
            "capped": self.capped,
        }


def estimate_survival(
    params: BranchingParams,
    replications: int,
    horizon: float,
    cap: int = DEFAULT_POPULATION_CAP,
    seed: int = 0,
    confidence: float = 0.95,
    keep_records: bool = False,
) -> SurvivalEstimate:
    """Monte Carlo survival probability and growth rate with normal-approximation CIs.

    Replication ``r`` uses the seed ``replication_seed(seed, 0, r)``. The
    growth rate averages the per-run log-population slopes of surviving runs.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    records = [
        run_branching(params, horizon, cap, replication_seed(seed, 0, r)) for r in range(replications)
    ]
    surv = np.array([rec.survived for rec in records], dtype=float)
    p = surv.mean()
    half = z * math.sqrt(p * (1.0 - p) / replications)
    slopes = np.array([rec.growth_rate_estimate for rec in records if rec.survived and rec.growth_rate_estimate is not None])
    rate, rate_ci = None, None
    if slopes.size >= 1:
        rate = float(slopes.mean())
        if slopes.size >= 2:
            h = z * slopes.std(ddof=1) / math.sqrt(slopes.size)
            rate_ci = (float(rate - h), float(rate + h))
        else:
            rate_ci = (rate, rate)
    return SurvivalEstimate(
        survival_prob=float(p),
        survival_ci=(float(max(0.0, p - half)), float(min(1.0, p + half))),
        growth_rate=rate,
        growth_rate_ci=rate_ci,
        replications=replications,
        survivors=int(surv.sum()),
        capped=sum(rec.capped for rec in records),
        records=records if keep_records else [],
    )


def find_kappa0(
    params: BranchingParams,
    lo: float,
    hi: float,
    replications: int = 200,
    horizon: float = 20.0,
    cap: int = 10**4,
    seed: int = 0,
    tol: float = 0.05,
) -> float:
    """Bisection on ``alpha / mu`` (``mu`` fixed) for the smallest ratio whose
    survival CI excludes 0. An empirical surrogate, not an exact threshold."""
    if params.mu <= 0:
        raise ValueError("find_kappa0 needs mu > 0")

    def ok(ratio):
        est = estimate_survival(replace(params, alpha=ratio * params.mu), replications, horizon, cap, seed)
        return est.survival_excludes_zero

    if not ok(hi):
        raise ValueError(f"survival CI does not exclude 0 even at ratio {hi}")
    if ok(lo):
        return lo
    while hi / lo > 1.0 + tol:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
