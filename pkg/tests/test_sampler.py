import numpy as np
import pytest
from scipy import stats

from sinrldp.errors import CapacityError
from sinrldp.model import Domain, ModelParams
from sinrldp.sampler import assign_marks, replicate_seed, sample_ppp

PARAMS = ModelParams(lam=100.0)
DOMAIN = Domain()


def test_poisson_count_mean():
    # oracle: Poisson mean/variance, CLT band around lambda = 100
    counts = [sample_ppp(PARAMS, DOMAIN, seed=replicate_seed(7, i)).n for i in range(10_000)]
    assert np.mean(counts) == pytest.approx(100.0, abs=3.0)


def test_determinism_same_seed():
    a = sample_ppp(PARAMS, DOMAIN, seed=42)
    b = sample_ppp(PARAMS, DOMAIN, seed=42)
    assert a.locations.tobytes() == b.locations.tobytes()
    assert assign_marks(a, 1.0, 42).marks.tobytes() == assign_marks(b, 1.0, 42).marks.tobytes()


def test_locations_unchanged_by_mark_rate():
    # separate labeled seed streams: c must not perturb locations
    base = sample_ppp(PARAMS, DOMAIN, seed=5)
    m1 = assign_marks(base, 1.0, 5)
    m2 = assign_marks(base, 2.0, 5)
    assert np.array_equal(m1.locations, m2.locations)
    assert not np.array_equal(m1.marks, m2.marks)


def test_mark_moments():
    sample = sample_ppp(ModelParams(lam=1e6), DOMAIN, seed=3)
    for c, mean in ((1.0, 1.0), (2.0, 0.5)):
        marks = assign_marks(sample, c, seed=3).marks
        assert marks.min() > 0
        assert np.mean(marks) == pytest.approx(mean, abs=0.01 * mean)


def test_marks_already_assigned_rejected():
    sample = assign_marks(sample_ppp(PARAMS, DOMAIN, seed=1), 1.0, 1)
    with pytest.raises(ValueError):
        assign_marks(sample, 1.0, 1)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        sample_ppp(ModelParams(lam=2e7), DOMAIN, seed=0)


def test_location_chi_square_gof():
    # 8x8 uniform cell masses at 1e5 points, significance 0.001
    sample = sample_ppp(ModelParams(lam=1e5), DOMAIN, seed=11)
    ix = np.clip((sample.locations[:, 0] * 8).astype(int), 0, 7)
    iy = np.clip((sample.locations[:, 1] * 8).astype(int), 0, 7)
    counts = np.bincount(ix * 8 + iy, minlength=64)
    expected = sample.n / 64.0
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < stats.chi2.ppf(0.999, df=63)


def test_mark_ks_against_exponential():
    sample = sample_ppp(ModelParams(lam=1e5), DOMAIN, seed=13)
    marks = assign_marks(sample, 2.0, seed=13).marks
    result = stats.kstest(marks, "expon", args=(0, 0.5))
    assert result.pvalue > 0.001


def test_replicate_seeds_distinct_and_stable():
    seeds = [replicate_seed(99, i) for i in range(50)]
    assert len(set(seeds)) == 50
    assert seeds == [replicate_seed(99, i) for i in range(50)]
