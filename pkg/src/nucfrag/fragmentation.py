"""Fragmentation measures on integer compositions.

Three families are supported:

* ``UF``: uniform binary split, the cut point ``l`` is uniform on ``1..k-1``;
* ``BF(p)``: binary split whose cut point is Binomial(k, p) conditioned on
  ``1..k-1``;
* ``MF(p_1..p_m)``: ``k - m`` balls thrown into ``m`` urns with probabilities
  ``p_i``; urn ``i`` becomes a fragment of size ``n_i + 1``. Sizes below ``m``
  shatter into monomers.

Exact laws are available by enumeration up to ``ENUMERATION_CAP``; beyond
that only sampling is offered.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, InvalidComposition, UnsupportedConfiguration

ENUMERATION_CAP = 64

KIND_CODES = {"UF": 0, "BF": 1, "MF": 2}


@dataclass(frozen=True)
class Composition:
    """Fragmentation outcome: ``parts`` holds ``(size, count)`` pairs sorted by size."""

    parts: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if any(i < 1 or y < 0 for i, y in self.parts):
            raise InvalidComposition(f"bad parts {self.parts}")
        clean = tuple(sorted((int(i), int(y)) for i, y in self.parts if y > 0))
        if len({i for i, _ in clean}) != len(clean):
            raise InvalidComposition(f"repeated sizes in {self.parts}")
        object.__setattr__(self, "parts", clean)

    @classmethod
    def from_counts(cls, counts: Mapping[int, int]) -> "Composition":
        return cls(tuple(counts.items()))

    @classmethod
    def of(cls, *sizes: int) -> "Composition":
        """Composition holding one fragment per listed size, e.g. ``of(1, 3)``."""
        return cls(tuple(Counter(int(s) for s in sizes).items()))

    @property
    def mass(self) -> int:
        return sum(i * y for i, y in self.parts)

    @property
    def n_fragments(self) -> int:
        return sum(y for _, y in self.parts)

    def __getitem__(self, i: int) -> int:
        for size, y in self.parts:
            if size == i:
                return y
        return 0

    def sizes(self) -> tuple[int, ...]:
        """Fragment sizes in non-decreasing order, with multiplicity."""
        return tuple(i for i, y in self.parts for _ in range(y))

    def __repr__(self):
        return "Composition(" + " + ".join(f"{y}*e{i}" if y > 1 else f"e{i}" for i, y in self.parts) + ")"


@dataclass(frozen=True)
class FragmentationSpec:
    kind: str = "UF"
    p: float | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ConfigurationError(f"unknown fragmentation kind {self.kind!r}", "fragmentation.kind")
        if self.kind == "BF":
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ConfigurationError(f"BF needs p in (0, 1), got {self.p}", "fragmentation.p")
        if self.kind == "MF":
            w = tuple(float(x) for x in (self.weights or ()))
            if len(w) < 2:
                raise ConfigurationError("MF needs at least two urn weights", "fragmentation.weights")
            if min(w) <= 0:
                raise ConfigurationError("MF weights must be strictly positive", "fragmentation.weights")
            if abs(sum(w) - 1.0) > 1e-9:
                raise ConfigurationError(f"MF weights must sum to 1, got {sum(w)}", "fragmentation.weights")
            object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls) -> "FragmentationSpec":
        return cls("UF")

    @classmethod
    def binomial(cls, p: float) -> "FragmentationSpec":
        return cls("BF", p=float(p))

    @classmethod
    def multiple(cls, weights: Iterable[float]) -> "FragmentationSpec":
        return cls("MF", weights=tuple(weights))

    @classmethod
    def parse(cls, text: str) -> "FragmentationSpec":
        """Parse ``UF``, ``BF:0.3`` or ``MF:0.5,0.5``."""
        head, _, tail = text.strip().partition(":")
        head = head.upper()
        if head == "UF" and not tail:
            return cls.uniform()
        if head == "BF" and tail:
            return cls.binomial(float(tail))
        if head == "MF" and tail:
            return cls.multiple(float(x) for x in tail.split(","))
        raise ConfigurationError(f"cannot parse fragmentation spec {text!r}", "fragmentation")

    @classmethod
    def from_dict(cls, d: Mapping) -> "FragmentationSpec":
        kind = str(d.get("kind", "")).upper()
        if kind == "BF":
            return cls.binomial(d.get("p"))
        if kind == "MF":
            return cls.multiple(d.get("weights") or ())
        return cls(kind)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "BF":
            d["p"] = self.p
        if self.kind == "MF":
            d["weights"] = list(self.weights)
        return d

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    def max_fragments(self, k: int) -> int:
        if self.kind == "MF":
            m = len(self.weights)
            return k if k < m else m
        return 2

    def kernel_args(self) -> tuple[int, float, np.ndarray]:
        """``(code, p, weights)`` in the layout the compiled kernels expect."""
        w = np.asarray(self.weights if self.kind == "MF" else (1.0,), dtype=np.float64)
        return self.code, float(self.p or 0.0), w

    def __str__(self):
        if self.kind == "BF":
            return f"BF:{self.p}"
        if self.kind == "MF":
            return "MF:" + ",".join(str(w) for w in self.weights)
        return "UF"


def _check_k(k: int) -> None:
    if k < 2:
        raise ValueError(f"fragmentation needs k >= 2, got {k}")
    if k > ENUMERATION_CAP:
        raise UnsupportedConfiguration(f"exact enumeration is capped at k={ENUMERATION_CAP}, got {k}")


@lru_cache(maxsize=None)
def distribution(spec: FragmentationSpec, k: int) -> dict[Composition, float]:
    """Exact law of the fragments of a size-``k`` polymer."""
    _check_k(k)
    law: dict[Composition, float] = {}
    if spec.kind in ("UF", "BF"):
        if spec.kind == "UF":
            weights = {l: 1.0 / (k - 1) for l in range(1, k)}
        else:
            p = spec.p
            z = 1.0 - p**k - (1.0 - p) ** k
            weights = {l: math.comb(k, l) * p**l * (1.0 - p) ** (k - l) / z for l in range(1, k)}
        for l, w in weights.items():
            c = Composition.of(l, k - l)
            law[c] = law.get(c, 0.0) + w
        return law

    w = spec.weights
    m = len(w)
    if k < m:
        return {Composition.of(*([1] * k)): 1.0}
    balls = k - m
    fact = math.factorial(balls)
    for cut in itertools.combinations(range(balls + m - 1), m - 1):
        # stars and bars: urn contents from the positions of the m-1 bars
        edges = (-1,) + cut + (balls + m - 1,)
        n = [edges[i + 1] - edges[i] - 1 for i in range(m)]
        prob = fact / math.prod(math.factorial(x) for x in n) * math.prod(wi**ni for wi, ni in zip(w, n))
        c = Composition.of(*(x + 1 for x in n))
        law[c] = law.get(c, 0.0) + prob
    return law


def support(spec: FragmentationSpec, k: int) -> list[Composition]:
    return sorted(distribution(spec, k), key=lambda c: c.sizes())


def pmf(spec: FragmentationSpec, k: int, outcome: Composition) -> float:
    """Probability of ``outcome`` under the size-``k`` fragmentation law."""
    _check_k(k)
    if outcome.mass != k:
        raise InvalidComposition(f"outcome {outcome!r} has mass {outcome.mass}, expected {k}")
    return distribution(spec, k).get(outcome, 0.0)


def moment(spec: FragmentationSpec, k: int, p: int) -> float:
    """Mean number of size-``p`` fragments when a size-``k`` polymer breaks."""
    if not 1 <= p < k:
        raise ValueError(f"need 1 <= p < k, got p={p}, k={k}")
    return sum(prob * c[p] for c, prob in distribution(spec, k).items())


def sample(spec: FragmentationSpec, k: int, rng: np.random.Generator) -> Composition:
    """Draw one fragmentation outcome of a size-``k`` polymer."""
    if k < 2:
        raise ValueError(f"fragmentation needs k >= 2, got {k}")
    if spec.kind == "UF":
        l = int(rng.integers(1, k))
        out = Composition.of(l, k - l)
    elif spec.kind == "BF":
        while True:
            l = int(rng.binomial(k, spec.p))
            if 0 < l < k:
                break
        out = Composition.of(l, k - l)
    else:
        m = len(spec.weights)
        if k < m:
            out = Composition.of(*([1] * k))
        else:
            n = rng.multinomial(k - m, spec.weights)
            out = Composition.of(*(int(x) + 1 for x in n))
    assert out.mass == k
    return out


def sample_sizes(spec: FragmentationSpec, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised sampler: ``(size, n_frag)`` array of fragment sizes, rows sorted."""
    if k < 2:
        raise ValueError(f"fragmentation needs k >= 2, got {k}")
    if spec.kind == "UF":
        l = rng.integers(1, k, size=size)
        out = np.stack([l, k - l], axis=1)
    elif spec.kind == "BF":
        l = rng.binomial(k, spec.p, size=size)
        bad = (l == 0) | (l == k)
        while bad.any():
            l[bad] = rng.binomial(k, spec.p, size=int(bad.sum()))
            bad = (l == 0) | (l == k)
        out = np.stack([l, k - l], axis=1)
    else:
        m = len(spec.weights)
        if k < m:
            out = np.ones((size, k), dtype=np.int64)
        else:
            out = rng.multinomial(k - m, spec.weights, size=size) + 1
    out = np.sort(out, axis=1)
    assert (out.sum(axis=1) == k).all()
    return out


def empirical_law(rows: np.ndarray) -> dict[Composition, float]:
    """Relative frequencies of the compositions in a sorted ``sample_sizes`` array."""
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    n = counts.sum()
    return {Composition.of(*(int(x) for x in row if x > 0)): c / n for row, c in zip(uniq, counts)}


def total_variation(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(c, 0.0) - q.get(c, 0.0)) for c in keys)


@dataclass
class A3Report:
    n_c: int
    ks: list[int]
    max_small: list[int]
    two_stable_fraction: list[float]
    C0_hat: int
    small_count_growing: bool


def check_A3(spec: FragmentationSpec, k_range, samples: int, rng: np.random.Generator, n_c: int) -> A3Report:
    """Empirical look at the bounded-small-fragments / two-stable-fragments property.

    For each ``k`` reports the largest number of fragments below ``n_c`` seen
    in ``samples`` draws and the fraction of draws with at least two fragments
    of size ``>= n_c``. The growth flag compares the upper and lower halves of
    the range; it is evidence, not a proof.
    """
    ks = list(k_range)
    max_small, frac = [], []
    for k in ks:
        rows = sample_sizes(spec, k, samples, rng)
        small = ((rows > 0) & (rows < n_c)).sum(axis=1)
        stable = (rows >= n_c).sum(axis=1)
        max_small.append(int(small.max()))
        frac.append(float((stable >= 2).mean()))
    half = max(1, len(ks) // 2)
    growing = len(ks) > 1 and max(max_small[half:]) > max(max_small[:half])
    return A3Report(n_c, ks, max_small, frac, max(max_small), growing)


@dataclass
class A4Row:
    threshold: int
    count: int
    p_k: float
    p_k_prime: float

    @property
    def ok(self) -> bool:
        return self.p_k <= self.p_k_prime + 1e-12


@dataclass
class A4Report:
    k: int
    k_prime: int
    rows: list[A4Row]
    exact: bool

    @property
    def violations(self) -> list[A4Row]:
        return [r for r in self.rows if not r.ok]


def _tail_table(law: Mapping[Composition, float], thresholds, counts) -> dict[tuple[int, int], float]:
    out = {}
    for l in thresholds:
        for a in counts:
            out[l, a] = sum(p for c, p in law.items() if sum(y for i, y in c.parts if i >= l) >= a)
    return out


def check_A4(spec: FragmentationSpec, k: int, k_prime: int, samples: int = 100_000, rng=None) -> A4Report:
    """Stochastic monotonicity of fragment sizes in the parent size.

    Compares ``P_k(#fragments of size >= l is >= a)`` against the same
    probability at ``k_prime`` for every threshold ``l <= k_prime`` and count
    ``a`` up to the largest possible number of fragments. Exact below the
    enumeration cap, Monte Carlo (``samples`` draws) above it.
    """
    if k_prime < k:
        raise ValueError("need k <= k_prime")
    thresholds = range(1, k_prime + 1)
    counts = range(1, max(spec.max_fragments(k), spec.max_fragments(k_prime)) + 1)
    exact = k_prime <= ENUMERATION_CAP
    if exact:
        laws = [distribution(spec, k), distribution(spec, k_prime)]
    else:
        rng = rng if rng is not None else np.random.default_rng()
        laws = [empirical_law(sample_sizes(spec, kk, samples, rng)) for kk in (k, k_prime)]
    lo, hi = (_tail_table(law, thresholds, counts) for law in laws)
    rows = [A4Row(l, a, lo[l, a], hi[l, a]) for l in thresholds for a in counts]
    return A4Report(k, k_prime, rows, exact)
