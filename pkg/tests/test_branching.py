import numpy as np
import pytest

from nucfrag.branching import (
    BranchingParams,
    estimate_survival,
    find_kappa0,
    log_population_slope,
    offspring_mean_bound,
    run_branching,
)
from nucfrag.errors import ConfigurationError
from nucfrag.fragmentation import FragmentationSpec

MF2 = FragmentationSpec.multiple((0.5, 0.5))


def test_no_fragmentation_keeps_one_polymer():
    rec = run_branching(BranchingParams(2.0, 0.0, 4), horizon=10.0, seed=1)
    assert not rec.extinct and rec.final_population == 1
    assert np.all(rec.population_curve[:, 1] == 1)
    assert rec.growth_rate_estimate == 0.0


def test_no_retained_fragments_means_non_increasing():
    # MF with 5 urns breaks any size below 10 into pieces of size <= 5 < n_c
    spec = FragmentationSpec.multiple((0.2,) * 5)
    p = BranchingParams(0.001, 1.0, 6, spec, initial_size=6)
    for seed in range(20):
        rec = run_branching(p, horizon=50.0, seed=seed)
        pop = rec.population_curve[:, 1]
        assert np.all(np.diff(pop) <= 0)
        assert rec.extinct


def test_retained_sizes_stay_above_nucleus():
    p = BranchingParams(5.0, 1.0, 4, FragmentationSpec.uniform())
    for seed in range(30):
        rec = run_branching(p, horizon=5.0, population_cap=2000, seed=seed)
        assert rec.retained_below_nucleus == 0


def test_extinction_is_absorbing():
    p = BranchingParams(1.0, 1.0, 4)
    rec = run_branching(p, horizon=50.0, seed=3)
    assert rec.extinct
    after = rec.population_curve[rec.population_curve[:, 0] >= rec.extinction_time, 1]
    assert np.all(after == 0)


def test_supercritical_grows_log_linearly():
    p = BranchingParams(20.0, 1.0, 4, MF2)
    est = estimate_survival(p, 60, horizon=20.0, cap=10**4, seed=7)
    assert est.survival_excludes_zero
    assert est.growth_rate_ci[0] > 0
    assert est.capped == est.survivors


def test_subcritical_dies_out():
    est = estimate_survival(BranchingParams(0.01, 1.0, 4, MF2), 300, horizon=20.0, seed=1)
    assert est.survival_prob == 0.0 and est.survival_ci == (0.0, 0.0)


def test_no_fragmentation_survival_estimate():
    est = estimate_survival(BranchingParams(1.0, 0.0, 4), 10, horizon=5.0)
    assert est.survival_prob == 1.0 and est.growth_rate == 0.0


def test_offspring_bound_examples():
    assert offspring_mean_bound(BranchingParams(10.0, 1.0, 4), 0.5, 6) == pytest.approx(1.5 * (10 / 11) ** 2)
    assert offspring_mean_bound(BranchingParams(1.0, 1.0, 4), 0.1, 9) == pytest.approx(0.034375)
    assert offspring_mean_bound(BranchingParams(1e12, 1.0, 4), 0.3, 10) == pytest.approx(1.3)
    with pytest.raises(ValueError):
        offspring_mean_bound(BranchingParams(1.0, 1.0, 4), 1.5, 5)


def test_survival_monotone_in_alpha():
    ests = [estimate_survival(BranchingParams(a, 1.0, 4, MF2), 200, horizon=20.0, cap=2000, seed=11) for a in (2.0, 5.0, 10.0, 20.0)]
    for lo, hi in zip(ests, ests[1:]):
        # non-decreasing up to the joint sampling error
        assert hi.survival_prob >= lo.survival_prob - (lo.survival_ci[1] - lo.survival_prob) - (hi.survival_prob - hi.survival_ci[0])


def test_kappa0_bracket():
    k0 = find_kappa0(BranchingParams(1.0, 1.0, 4, MF2), lo=0.5, hi=20.0, replications=100, cap=500, tol=0.2)
    assert 0.5 < k0 <= 20.0


def test_log_slope_of_exponential():
    t = np.linspace(0, 10, 50)
    assert log_population_slope(np.column_stack([t, np.exp(0.7 * t)])) == pytest.approx(0.7)


def test_params_validation():
    with pytest.raises(ConfigurationError):
        BranchingParams(1.0, 1.0, 4, initial_size=3)
    with pytest.raises(ConfigurationError):
        BranchingParams(0.0, 1.0, 4)
