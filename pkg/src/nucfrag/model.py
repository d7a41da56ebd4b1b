"""Parameters, state, rate formulas and derived time scales of the
nucleation-fragmentation polymerization chain.

A polymer of size ``k`` grows by one monomer at total rate
``lam_k * u_k * u_1 / N`` and, for ``k >= 2``, fragments at rate
``mu_k^N * u_k`` where ``mu_k^N = phi(N) * mu_k`` below the nucleus size and
``mu_{n_c}`` at or above it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .errors import ConfigurationError, InvalidComposition, InvalidTransition, UnsupportedConfiguration


@dataclass(frozen=True)
class ScalingFunction:
    """Fast-fragmentation scaling ``phi(N)``.

    Either ``N**gamma`` (``kind="power"``) or a lookup table of values at
    integer ``N`` (``kind="table"``). A table carries its own ``k_c`` since the
    defining limit cannot be recovered from finitely many samples.
    """

    kind: str = "power"
    gamma: float = 1.0
    table: Mapping[int, float] | None = None
    k_c: int | None = None

    def __post_init__(self):
        if self.kind == "power":
            if not (0.0 < self.gamma <= 1.0):
                raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}", "phi.gamma")
        elif self.kind == "table":
            if not self.table:
                raise ConfigurationError("table scaling needs at least one entry", "phi.table")
            items = sorted((int(n), float(v)) for n, v in self.table.items())
            if any(v <= 0 for _, v in items):
                raise ConfigurationError("table values must be positive", "phi.table")
            if any(b[1] < a[1] for a, b in zip(items, items[1:])):
                raise ConfigurationError("table values must be non-decreasing in N", "phi.table")
            object.__setattr__(self, "table", dict(items))
        else:
            raise ConfigurationError(f"unknown scaling kind {self.kind!r}", "phi.kind")

    @classmethod
    def power(cls, gamma: float) -> "ScalingFunction":
        return cls(kind="power", gamma=float(gamma))

    @classmethod
    def from_table(cls, values: Mapping[int, float], k_c: int | None = None) -> "ScalingFunction":
        return cls(kind="table", table=dict(values), k_c=k_c)

    def __call__(self, N: int) -> float:
        if self.kind == "power":
            return float(N) ** self.gamma
        try:
            return self.table[int(N)]
        except KeyError:
            raise UnsupportedConfiguration(f"scaling table has no entry for N={N}", "phi.table") from None

    def admissible(self, n_c: int) -> bool | None:
        """Whether ``psi(N) / log N -> infinity``; ``None`` when undecidable (tables)."""
        if self.kind == "power":
            return self.gamma * (n_c - 2) > 1.0
        return None

    def to_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "gamma": self.gamma}
        return {"kind": "table", "table": {str(k): v for k, v in self.table.items()}, "k_c": self.k_c}


@dataclass(frozen=True)
class ModelParams:
    """Reaction constants of the polymerization chain.

    ``lam[i]`` is the growth constant of size ``i + 1``; sizes past the table
    reuse the last entry. ``mu[i]`` is the fragmentation constant of size
    ``i + 2`` for sizes ``2..n_c``; the last entry is the stable-polymer rate.
    """

    n_c: int
    lam: tuple[float, ...]
    mu: tuple[float, ...]
    phi: ScalingFunction = field(default_factory=lambda: ScalingFunction.power(1.0))
    fragmentation: object = None
    k_max_tracked: int | None = None

    def __post_init__(self):
        from .fragmentation import FragmentationSpec

        object.__setattr__(self, "lam", tuple(float(x) for x in self.lam))
        object.__setattr__(self, "mu", tuple(float(x) for x in self.mu))
        if self.fragmentation is None:
            object.__setattr__(self, "fragmentation", FragmentationSpec.uniform())
        if int(self.n_c) != self.n_c or self.n_c <= 2:
            raise ConfigurationError(f"nucleus size must be an integer > 2, got {self.n_c}", "n_c")
        if len(self.lam) < self.n_c - 1:
            raise ConfigurationError(f"need growth constants for sizes 1..{self.n_c - 1}, got {len(self.lam)}", "lambda")
        if len(self.mu) != self.n_c - 1:
            raise ConfigurationError(f"need fragmentation constants for sizes 2..{self.n_c}, got {len(self.mu)}", "mu")
        if min(self.lam) <= 0 or not all(math.isfinite(x) for x in self.lam):
            raise ConfigurationError("growth constants must be positive and finite", "lambda")
        if min(self.mu) <= 0 or not all(math.isfinite(x) for x in self.mu):
            raise ConfigurationError("fragmentation constants must be positive and finite", "mu")
        if self.k_max_tracked is None:
            object.__setattr__(self, "k_max_tracked", max(self.n_c, len(self.lam)))

    def lam_k(self, k: int) -> float:
        if k < 1:
            raise ValueError(f"size must be >= 1, got {k}")
        return self.lam[min(k, len(self.lam)) - 1]

    def mu_k(self, k: int) -> float:
        """Unscaled constant ``mu_k`` for ``2 <= k <= n_c`` (stable sizes map to ``mu_{n_c}``)."""
        if k < 2:
            raise ValueError(f"fragmentation is defined for sizes >= 2, got {k}")
        return self.mu[min(k, self.n_c) - 2]

    @property
    def lambda_inf(self) -> float:
        """Infimum of the growth constants over all sizes."""
        return min(self.lam)

    def to_dict(self) -> dict:
        return {
            "n_c": self.n_c,
            "lambda": list(self.lam),
            "mu": list(self.mu),
            "phi": self.phi.to_dict(),
            "fragmentation": self.fragmentation.to_dict(),
        }


class SystemState:
    """Polymer counts ``u_k`` with conserved total mass.

    Counts are kept sparse (only non-zero sizes). Instances are treated as
    values: the ``apply_*`` functions return new states.
    """

    __slots__ = ("_counts", "total_mass")

    def __init__(self, counts: Mapping[int, int] | Sequence[int], total_mass: int | None = None):
        if isinstance(counts, Mapping):
            items = {int(k): int(v) for k, v in counts.items() if v}
        else:
            items = {i + 1: int(v) for i, v in enumerate(counts) if v}
        if any(k < 1 for k in items):
            raise ValueError("sizes must be >= 1")
        if any(v < 0 for v in items.values()):
            raise ValueError("counts must be non-negative")
        mass = sum(k * v for k, v in items.items())
        if total_mass is not None and mass != total_mass:
            raise ValueError(f"counts carry mass {mass}, expected {total_mass}")
        self._counts = items
        self.total_mass = mass

    @classmethod
    def monomers(cls, N: int) -> "SystemState":
        return cls({1: N})

    def __getitem__(self, k: int) -> int:
        return self._counts.get(k, 0)

    @property
    def counts(self) -> dict[int, int]:
        return dict(self._counts)

    def sizes(self) -> list[int]:
        return sorted(self._counts)

    def mass(self) -> int:
        return sum(k * v for k, v in self._counts.items())

    def as_tuple(self, length: int | None = None) -> tuple[int, ...]:
        length = length or (max(self._counts) if self._counts else 0)
        return tuple(self._counts.get(k, 0) for k in range(1, length + 1))

    def stable_mass(self, n_c: int) -> int:
        return sum(k * v for k, v in self._counts.items() if k >= n_c)

    def __eq__(self, other):
        return isinstance(other, SystemState) and self._counts == other._counts

    def __hash__(self):
        return hash(frozenset(self._counts.items()))

    def __repr__(self):
        return f"SystemState({self.as_tuple()})"


@dataclass(frozen=True)
class DerivedScales:
    psi: float
    k_c: int
    rho_bar: float


class Transition(NamedTuple):
    kind: str  # "grow" or "frag"
    size: int


def mu_k_N(params: ModelParams, k: int, N: int) -> float:
    """Per-polymer fragmentation rate of size ``k`` at scale ``N``."""
    if k < 2:
        raise ValueError(f"fragmentation rate is defined for sizes >= 2, got {k}")
    if k < params.n_c:
        return params.phi(N) * params.mu_k(k)
    return params.mu[-1]


def psi(params: ModelParams, N: int) -> float:
    """Nucleation time scale ``phi(N)**(n_c - 2) / N``."""
    return params.phi(N) ** (params.n_c - 2) / N


def k_c(params: ModelParams) -> int:
    """Largest ``k`` with ``N / phi(N)**(k-1) -> infinity``."""
    phi = params.phi
    if phi.kind == "table":
        if phi.k_c is None:
            raise UnsupportedConfiguration("table scaling needs an explicit k_c", "phi.k_c")
        return int(phi.k_c)
    # largest integer k with gamma*(k-1) < 1; the tolerance keeps 1/gamma integers exact
    k = 1
    while phi.gamma * k < 1.0 - 1e-12:
        k += 1
    return k


def rho_bar(params: ModelParams) -> float:
    """Limiting nucleation rate ``lam_1 * prod_{k=2}^{n_c-1} lam_k / mu_k``."""
    r = params.lam_k(1)
    for k in range(2, params.n_c):
        r *= params.lam_k(k) / params.mu_k(k)
    return r


def derived_scales(params: ModelParams, N: int) -> DerivedScales:
    return DerivedScales(psi=psi(params, N), k_c=k_c(params), rho_bar=rho_bar(params))


def enumerate_transitions(state: SystemState, params: ModelParams) -> list[tuple[Transition, float]]:
    """All enabled transitions out of ``state`` with their rates, in size order."""
    N = state.total_mass
    u1 = state[1]
    out = []
    for k in state.sizes():
        uk = state[k]
        if k == 1:
            if u1 >= 2:
                out.append((Transition("grow", 1), params.lam_k(1) * u1 * u1 / N))
        elif u1 >= 1:
            out.append((Transition("grow", k), params.lam_k(k) * uk * u1 / N))
    for k in state.sizes():
        if k >= 2:
            out.append((Transition("frag", k), mu_k_N(params, k, N) * state[k]))
    return out


def total_rate(state: SystemState, params: ModelParams) -> float:
    return sum(r for _, r in enumerate_transitions(state, params))


def apply_growth(state: SystemState, k: int) -> SystemState:
    """Attach one monomer to a polymer of size ``k``."""
    u1 = state[1]
    if state[k] < 1 or u1 < 1 or (k == 1 and u1 < 2):
        raise InvalidTransition(f"growth of size {k} not enabled in {state!r}")
    counts = state.counts
    counts[1] -= 1
    counts[k] -= 1
    counts[k + 1] = counts.get(k + 1, 0) + 1
    return SystemState(counts, state.total_mass)


def apply_fragmentation(state: SystemState, k: int, outcome) -> SystemState:
    """Replace one polymer of size ``k`` by the fragments in ``outcome``."""
    if outcome.mass != k:
        raise InvalidComposition(f"outcome {outcome!r} has mass {outcome.mass}, expected {k}")
    if k < 2 or state[k] < 1:
        raise InvalidTransition(f"no polymer of size {k} to fragment in {state!r}")
    counts = state.counts
    counts[k] -= 1
    for i, y in outcome.parts:
        counts[i] = counts.get(i, 0) + y
    return SystemState(counts, state.total_mass)
