import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nucfrag import kernels
from nucfrag.errors import ConfigurationError, InvalidComposition, UnsupportedConfiguration
from nucfrag.fragmentation import (
    Composition,
    FragmentationSpec,
    check_A3,
    check_A4,
    distribution,
    empirical_law,
    moment,
    pmf,
    sample,
    sample_sizes,
    total_variation,
)

UF = FragmentationSpec.uniform()
BF = FragmentationSpec.binomial(0.5)
MF2 = FragmentationSpec.multiple((0.5, 0.5))
SPECS = [UF, BF, MF2, FragmentationSpec.binomial(0.3), FragmentationSpec.multiple((0.2, 0.3, 0.5))]


def kernel_law(spec, k, n, seed):
    code, p, w = spec.kernel_args()
    rows = np.sort(kernels.sample_fragments_batch(code, k, p, w, n, np.random.default_rng(seed)), axis=1)
    assert (rows.sum(axis=1) == k).all()
    return empirical_law(rows)


class TestSpec:
    def test_parse_round_trip(self):
        for text in ("UF", "BF:0.3", "MF:0.2,0.8"):
            spec = FragmentationSpec.parse(text)
            assert FragmentationSpec.parse(str(spec)) == spec
            assert FragmentationSpec.from_dict(spec.to_dict()) == spec

    @pytest.mark.parametrize("bad", ["BF:1.5", "MF:0.5", "MF:0.7,0.7", "MF:0,1", "XX"])
    def test_parameter_domains(self, bad):
        with pytest.raises(ConfigurationError):
            FragmentationSpec.parse(bad)


class TestSample:
    def test_uf_size_two(self, rng):
        for _ in range(20):
            assert sample(UF, 2, rng) == Composition.of(1, 1)

    def test_bf_half_size_three(self, rng):
        for _ in range(20):
            assert sample(BF, 3, rng) == Composition.of(1, 2)

    def test_mf_size_four(self, rng):
        draws = [sample(MF2, 4, rng) for _ in range(4000)]
        frac = sum(d == Composition.of(1, 3) for d in draws) / len(draws)
        assert set(draws) == {Composition.of(1, 3), Composition.of(2, 2)}
        assert abs(frac - 0.5) < 4 * math.sqrt(0.25 / 4000)

    def test_mf_below_urn_count_shatters(self, rng):
        spec = FragmentationSpec.multiple((0.2, 0.3, 0.5))
        assert sample(spec, 2, rng) == Composition.of(1, 1)
        assert distribution(spec, 2) == {Composition.of(1, 1): 1.0}
        code, p, w = spec.kernel_args()
        rows = kernels.sample_fragments_batch(code, 2, p, w, 10, np.random.default_rng(0))
        assert (np.sort(rows, axis=1)[:, -2:] == 1).all()

    @given(st.sampled_from(SPECS), st.integers(2, 200), st.integers(0, 2**32 - 1))
    def test_every_sample_is_mass_exact(self, spec, k, seed):
        rng = np.random.default_rng(seed)
        assert sample(spec, k, rng).mass == k
        assert (sample_sizes(spec, k, 50, rng).sum(axis=1) == k).all()


class TestPmf:
    def test_uf_four(self):
        assert pmf(UF, 4, Composition.of(1, 3)) == pytest.approx(2 / 3)
        assert pmf(UF, 4, Composition.of(2, 2)) == pytest.approx(1 / 3)

    def test_uf_three(self):
        assert pmf(UF, 3, Composition.of(1, 2)) == pytest.approx(1.0)

    def test_mf_four(self):
        assert pmf(MF2, 4, Composition.of(1, 3)) == pytest.approx(0.5)
        assert pmf(MF2, 4, Composition.of(2, 2)) == pytest.approx(0.5)

    def test_uf_matches_closed_display(self):
        # off-centre splits carry 2/(k-1), the centre split 1/(k-1)
        for k in range(2, 20):
            for l in range(1, k // 2 + 1):
                expect = (1 if 2 * l == k else 2) / (k - 1)
                assert pmf(UF, k, Composition.of(l, k - l)) == pytest.approx(expect)

    def test_bf_half_matches_closed_display(self):
        for k in range(2, 20):
            z = 1 - 2 * 0.5**k
            for l in range(1, k // 2 + 1):
                expect = (1 if 2 * l == k else 2) * math.comb(k, l) * 0.5**k / z
                assert pmf(BF, k, Composition.of(l, k - l)) == pytest.approx(expect)

    def test_errors(self):
        with pytest.raises(InvalidComposition):
            pmf(UF, 4, Composition.of(1, 2))
        with pytest.raises(UnsupportedConfiguration):
            pmf(UF, 65, Composition.of(1, 64))

    @pytest.mark.parametrize("spec", SPECS)
    def test_sums_to_one(self, spec):
        for k in range(2, 41):
            assert sum(distribution(spec, k).values()) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("spec", [UF, BF])
    def test_mirror_symmetry(self, spec):
        # the unordered law is symmetric by construction; check the ordered cut law too
        for k in range(2, 30):
            for l in range(1, k):
                assert pmf(spec, k, Composition.of(l, k - l)) == pmf(spec, k, Composition.of(k - l, l))


class TestMoments:
    def test_uf_four(self):
        for p in (1, 2, 3):
            assert moment(UF, 4, p) == pytest.approx(2 / 3)

    def test_uf_two(self):
        assert moment(UF, 2, 1) == pytest.approx(2.0)

    @pytest.mark.parametrize("spec", SPECS)
    def test_mass_identity(self, spec):
        for k in range(2, 65):
            total = sum(p * moment(spec, k, p) for p in range(1, k))
            assert abs(total - k) <= 1e-9


@pytest.mark.parametrize("spec", [UF, BF, MF2, FragmentationSpec.multiple((0.2, 0.3, 0.5))])
@pytest.mark.parametrize("k", [2, 5, 8])
def test_empirical_law_matches_pmf(spec, k):
    n = 100_000
    exact = distribution(spec, k)
    py = empirical_law(sample_sizes(spec, k, n, np.random.default_rng(k)))
    assert total_variation(py, exact) < 0.02
    assert total_variation(kernel_law(spec, k, n, 100 + k), exact) < 0.02


class TestA3:
    def test_mf_two_urns_has_at_most_two_small_fragments(self, rng):
        rep = check_A3(MF2, range(50, 61), 2000, rng, n_c=4)
        assert rep.C0_hat <= 2
        assert not rep.small_count_growing

    def test_uf_two_stable_fraction(self, rng):
        # both pieces >= 4 iff the cut lies in 4..96: 93 of the 99 equally likely cuts
        rep = check_A3(UF, [100], 10_000, rng, n_c=4)
        exact = 93 / 99
        assert abs(rep.two_stable_fraction[0] - exact) < 4 * math.sqrt(exact * (1 - exact) / 10_000)

    def test_below_nucleus_size(self, rng):
        rep = check_A3(UF, range(2, 4), 500, rng, n_c=4)
        assert rep.two_stable_fraction == [0.0, 0.0]


class TestA4:
    def test_mf_six_eight(self):
        rep = check_A4(MF2, 6, 8)
        assert rep.exact and rep.violations == []

    def test_equal_sizes(self):
        for spec in SPECS:
            assert check_A4(spec, 7, 7).violations == []

    def test_report_structure(self):
        rep = check_A4(UF, 4, 5)
        assert {(r.threshold, r.count) for r in rep.rows} == {(l, a) for l in range(1, 6) for a in (1, 2)}
        row = next(r for r in rep.rows if r.threshold == 3 and r.count == 1)
        # k = 4: a piece >= 3 appears with the 1+3 split (2/3); k = 5: with 1+4 or 2+3 (always)
        assert row.p_k == pytest.approx(2 / 3) and row.p_k_prime == pytest.approx(1.0)

    def test_monte_carlo_above_cap(self, rng):
        rep = check_A4(MF2, 70, 72, samples=20_000, rng=rng)
        assert not rep.exact
