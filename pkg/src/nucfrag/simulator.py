"""Exact event-driven simulation of the polymerization chain.

Two modes are available: the full chain, and a truncated chain in which
size ``n_c`` is a sink (nuclei are counted but neither grow nor break). The
truncated chain coincides in law with the full one up to the first
nucleation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .fragmentation import sample as sample_fragments
from .model import (
    ModelParams,
    SystemState,
    Transition,
    apply_fragmentation,
    apply_growth,
    enumerate_transitions,
    k_c,
    mu_k_N,
    psi,
)
from .seeding import make_rng, seed_value

DEFAULT_EVENT_BUDGET = 10**9
DEFAULT_CURVE_POINTS = 512
DEFAULT_SEED_EPSILON = 0.1


class SimulationMode(enum.Enum):
    FULL = "full"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class InitialCondition:
    """Either pure monomers or explicit counts for sizes ``2..n_c-1`` (rest monomers)."""

    seeded: Mapping[int, int] | None = None

    @classmethod
    def pure_monomers(cls) -> "InitialCondition":
        return cls(None)

    @classmethod
    def seeded_counts(cls, counts: Mapping[int, int]) -> "InitialCondition":
        return cls({int(k): int(v) for k, v in counts.items()})

    def state(self, params: ModelParams, N: int) -> SystemState:
        if not self.seeded:
            return SystemState.monomers(N)
        counts = dict(self.seeded)
        used = sum(k * v for k, v in counts.items())
        if used > N:
            raise ConfigurationError(f"seeded polymers carry mass {used} > N={N}", "init")
        counts[1] = counts.get(1, 0) + N - used
        return SystemState(counts, N)

    def validate(self, params: ModelParams, N: int, epsilon: float = DEFAULT_SEED_EPSILON) -> None:
        """Finite-N reading of the small-initial-polymers condition.

        Sizes ``2..k_c`` may hold at most ``N / phi(N)**(k-1-eps)`` polymers and
        the sizes between ``k_c`` and ``n_c`` together at most ``phi(N)**eps``.
        """
        if not self.seeded:
            return
        n_c = params.n_c
        if any(k < 2 or k >= n_c for k in self.seeded):
            raise ConfigurationError(f"seeded sizes must lie in 2..{n_c - 1}", "init.seeded")
        if any(v < 0 for v in self.seeded.values()):
            raise ConfigurationError("seeded counts must be non-negative", "init.seeded")
        phi = params.phi(N)
        kc = k_c(params)
        for k, v in self.seeded.items():
            if k <= kc and v > N / phi ** (k - 1 - epsilon):
                raise ConfigurationError(
                    f"size {k} count {v} exceeds N/phi(N)^(k-1-eps) = {N / phi ** (k - 1 - epsilon):.4g}", "init.seeded"
                )
        tail = sum(v for k, v in self.seeded.items() if k > kc)
        if tail > phi**epsilon:
            raise ConfigurationError(f"sizes above k_c hold {tail} polymers > phi(N)^eps = {phi**epsilon:.4g}", "init.seeded")


@dataclass(frozen=True)
class StopRule:
    """When a trajectory ends.

    ``kind`` is one of ``first_nucleation``, ``lag``, ``fixed_horizon``,
    ``fixed_rescaled_horizon``, ``event_budget`` or ``polymerized_fraction``.
    ``value`` carries the horizon, budget or fraction. ``max_rescaled_time``
    optionally caps event-driven rules; a run hitting the cap is reported as
    not having met its rule.
    """

    kind: str
    value: float | None = None
    max_rescaled_time: float | None = None

    KINDS = ("first_nucleation", "lag", "fixed_horizon", "fixed_rescaled_horizon", "event_budget", "polymerized_fraction")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigurationError(f"unknown stop rule {self.kind!r}", "stop.kind")
        if self.kind in ("fixed_horizon", "fixed_rescaled_horizon", "event_budget") and not (self.value and self.value > 0):
            raise ConfigurationError(f"{self.kind} needs a positive value", "stop.value")
        if self.kind == "polymerized_fraction" and not (self.value is not None and 0 < self.value <= 1):
            raise ConfigurationError("polymerized_fraction needs a value in (0, 1]", "stop.value")

    @classmethod
    def first_nucleation(cls, max_rescaled_time=None):
        return cls("first_nucleation", None, max_rescaled_time)

    @classmethod
    def lag(cls, max_rescaled_time=None):
        return cls("lag", None, max_rescaled_time)

    @classmethod
    def horizon(cls, t):
        return cls("fixed_horizon", float(t))

    @classmethod
    def rescaled_horizon(cls, t):
        return cls("fixed_rescaled_horizon", float(t))

    @classmethod
    def budget(cls, n):
        return cls("event_budget", int(n))

    @classmethod
    def polymerized(cls, fraction, max_rescaled_time=None):
        return cls("polymerized_fraction", float(fraction), max_rescaled_time)


@dataclass(frozen=True)
class ObserverSet:
    """What a run records besides the hitting times.

    ``curve_points`` samples (t, stable mass, polymerized mass) on a grid of
    rescaled time ``[0, curve_horizon]``; level crossings of the polymerized
    mass (every percent) are added as exact points when ``levels`` is set.
    ``check_mass`` is 0 (off), 1 (per-event local check plus periodic full
    recount) or 2 (full recount after every event). ``trace`` keeps the first
    ``trace`` events with the post-event state, for small-N validation.
    """

    delta: float = 0.1
    curve_points: int = 0
    curve_horizon: float = 1.0
    levels: bool = False
    balance: bool = False
    check_mass: int = 1
    trace: int = 0
    event_budget: int = DEFAULT_EVENT_BUDGET

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}", "delta")


@dataclass
class TrajectoryRecord:
    N: int
    mode: SimulationMode
    seed: int
    first_nucleation_time: float | None = None
    nucleation_event_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    lag_time: float | None = None
    half_time: float | None = None
    mass_curve: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    level_times: np.ndarray = field(default_factory=lambda: np.full(99, np.nan))
    balance_A: np.ndarray = field(default_factory=lambda: np.zeros(0))
    balance_B: np.ndarray = field(default_factory=lambda: np.zeros(0))
    event_count: int = 0
    end_time: float = 0.0
    status: str = "done"
    mass_violations: int = 0
    final_state: SystemState | None = None
    trace: dict | None = None

    @property
    def truncated(self) -> bool:
        """True when the run stopped before its rule was met (budget or time cap)."""
        return self.status in ("budget", "time_cap")


_STATUS = {
    kernels.STATUS_DONE: "done",
    kernels.STATUS_TIME_CAP: "time_cap",
    kernels.STATUS_BUDGET: "budget",
    kernels.STATUS_ABSORBED: "absorbed",
}

_STOP_CODES = {
    "first_nucleation": kernels.STOP_FIRST_NUCLEATION,
    "lag": kernels.STOP_LAG,
    "fixed_horizon": kernels.STOP_HORIZON,
    "fixed_rescaled_horizon": kernels.STOP_HORIZON,
    "event_budget": kernels.STOP_BUDGET,
    "polymerized_fraction": kernels.STOP_POLYMERIZED,
}


def _nan_to_none(x):
    return None if x != x else float(x)


def kernel_rates(params: ModelParams, N: int, size_cap: int):
    """Per-size rate arrays in the layout ``ssa_kernel`` expects."""
    lam = np.array([0.0] + [params.lam_k(k) for k in range(1, size_cap + 1)], dtype=np.float64)
    mu_small = np.zeros(params.n_c, dtype=np.float64)
    for k in range(2, params.n_c):
        mu_small[k] = mu_k_N(params, k, N)
    return lam, mu_small, float(params.mu[-1])


def run(
    params: ModelParams,
    N: int,
    mode: SimulationMode = SimulationMode.FULL,
    init: InitialCondition | None = None,
    stop: StopRule | None = None,
    observers: ObserverSet | None = None,
    seed=0,
) -> TrajectoryRecord:
    """Simulate one trajectory and collect its observables.

    ``seed`` is an integer or a ``np.random.Generator`` owned by this run.
    """
    init = init or InitialCondition.pure_monomers()
    stop = stop or StopRule.first_nucleation()
    observers = observers or ObserverSet()
    mode = SimulationMode(mode)
    if N < params.n_c:
        raise ConfigurationError(f"N={N} is below the nucleus size {params.n_c}", "N")
    init.validate(params, N)
    state = init.state(params, N)

    try:
        scale = psi(params, N)
    except OverflowError:
        raise ConfigurationError("rates overflow at this N", "N") from None
    t_max = math.inf
    if stop.kind == "fixed_horizon":
        t_max = stop.value
    elif stop.kind == "fixed_rescaled_horizon":
        t_max = stop.value * scale
    elif stop.max_rescaled_time is not None:
        t_max = stop.max_rescaled_time * scale
    budget = observers.event_budget
    if stop.kind == "event_budget":
        budget = min(budget, int(stop.value))

    size_cap = N + 1
    counts = np.zeros(size_cap + 1, dtype=np.int64)
    for k, v in state.counts.items():
        counts[k] = v
    lam, mu_small, mu_stable = kernel_rates(params, N, size_cap)
    if not all(math.isfinite(x) for x in mu_small) or not math.isfinite(lam.sum()):
        raise ConfigurationError("rates overflow at this N", "N")
    code, p, w = params.fragmentation.kernel_args()
    if observers.curve_points > 0:
        grid = np.linspace(0.0, observers.curve_horizon * scale, observers.curve_points)
    else:
        grid = np.empty(0, dtype=np.float64)
    stop_value = float(stop.value) if stop.kind == "polymerized_fraction" else 0.0

    out = kernels.ssa_kernel(
        counts, lam, mu_small, mu_stable, params.n_c, N, mode is SimulationMode.TRUNCATED,
        code, p, w,
        _STOP_CODES[stop.kind], stop_value, t_max, budget,
        grid, observers.delta, observers.balance, observers.levels, observers.check_mass,
        observers.trace, make_rng(seed),
    )
    (t_end, n_events, T, L, half, status, nuc, curve, lvl, A, B, viol, tr_t, tr_kind, tr_size, tr_state) = out
    if status < 0:
        raise ConfigurationError("total event rate became non-finite", "model")
    record = TrajectoryRecord(
        N=N,
        mode=mode,
        seed=seed_value(seed),
        first_nucleation_time=_nan_to_none(T),
        nucleation_event_times=nuc,
        lag_time=_nan_to_none(L),
        half_time=_nan_to_none(half),
        mass_curve=curve,
        level_times=lvl,
        balance_A=A,
        balance_B=B,
        event_count=int(n_events),
        end_time=float(t_end),
        status=_STATUS[int(status)],
        mass_violations=int(viol),
        final_state=SystemState({k: int(v) for k, v in enumerate(counts) if k >= 1 and v}, N),
    )
    if observers.trace:
        record.trace = {"t": tr_t, "kind": tr_kind, "size": tr_size, "state": tr_state}
    return record


def step(state: SystemState, rate_table, rng: np.random.Generator, params: ModelParams | None = None):
    """One exact jump from ``state``.

    ``rate_table`` is the output of ``enumerate_transitions``. Returns
    ``(waiting_time, transition, new_state)``, or ``None`` in an absorbing
    state. ``new_state`` is only computed when ``params`` is given (needed to
    draw a fragmentation outcome).
    """
    total = sum(r for _, r in rate_table)
    if total <= 0.0:
        return None
    dt = rng.exponential(1.0 / total)
    u = rng.random() * total
    chosen: Transition = rate_table[-1][0]
    for tr, r in rate_table:
        if u < r:
            chosen = tr
            break
        u -= r
    new_state = None
    if params is not None:
        if chosen.kind == "grow":
            new_state = apply_growth(state, chosen.size)
        else:
            outcome = sample_fragments(params.fragmentation, chosen.size, rng)
            new_state = apply_fragmentation(state, chosen.size, outcome)
    return dt, chosen, new_state


def accumulate_balance(record: TrajectoryRecord, state: SystemState, dt: float, n_c: int) -> TrajectoryRecord:
    """Add ``X1^(k+1) X_(n_c-k-1) dt`` and ``X1^k X_(n_c-k) dt`` for ``k = 1..n_c-2``."""
    if len(record.balance_A) != n_c - 1:
        record.balance_A = np.zeros(n_c - 1)
        record.balance_B = np.zeros(n_c - 1)
    if dt <= 0:
        return record
    x1 = float(state[1])
    for k in range(1, n_c - 1):
        record.balance_A[k] += x1 ** (k + 1) * state[n_c - k - 1] * dt
        record.balance_B[k] += x1**k * state[n_c - k] * dt
    return record


def delta_k(record: TrajectoryRecord, params: ModelParams, N: int, k: int) -> float:
    """Scaled balance functional ``Delta_k / (N phi(N))**k`` of a finished run."""
    n_c = params.n_c
    if not 1 <= k <= n_c - 2:
        raise ValueError(f"k must lie in 1..{n_c - 2}")
    if len(record.balance_A) <= k:
        return 0.0
    phi = params.phi(N)
    raw = params.lam_k(n_c - k - 1) / N * record.balance_A[k] - params.mu_k(n_c - k) * phi * record.balance_B[k]
    return raw / (N * phi) ** k
