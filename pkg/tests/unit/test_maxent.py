import math

import numpy as np
import pytest
from scipy import stats

from prime_lab.components import maxent, omega_stats, sieve_core
from prime_lab.components.maxent import DiscretePMF, PMFKind
from prime_lab.errors import InvalidArgumentError, RangeError


@pytest.fixture(scope="module")
def lab_1e6():
    ps = sieve_core.sieve_primes(10**6)
    base = sieve_core.base_primes_for(10**6 + 1)
    ledger = omega_stats.ledger_from_segments(sieve_core.iter_omega_segments(2, 10**6 + 1, base))
    return ps, ledger


def test_bernoulli_entropy():
    assert maxent.bernoulli_entropy(0.25) == pytest.approx(0.8112781, abs=1e-7)
    assert maxent.bernoulli_entropy(0.5) == pytest.approx(1.0)
    assert maxent.bernoulli_entropy(0.0) == 0.0
    assert maxent.bernoulli_entropy(1.0) == 0.0
    with pytest.raises(InvalidArgumentError):
        maxent.bernoulli_entropy(1.5)


def test_density_record_at_10():
    record = maxent.prime_density_entropy_report(10, sieve_core.sieve_primes(100))
    assert record.pi_N == 4
    assert record.density == pytest.approx(0.4)
    assert record.entropy_bits == pytest.approx(0.970951, abs=1e-6)
    assert record.total_bits == pytest.approx(9.70951, abs=1e-5)
    assert record.naive_list_bits == pytest.approx(4 * math.log2(10))
    assert record.log_loss_bits == record.entropy_bits


def test_density_record_beyond_sieve():
    with pytest.raises(RangeError):
        maxent.prime_density_entropy_report(200, sieve_core.sieve_primes(100))


def test_geometric_matches_scipy():
    pmf = maxent.maxent_geometric(2.0)
    q = 2.0 / 3.0
    ks = pmf.support()
    np.testing.assert_allclose(pmf.probabilities, stats.geom.pmf(ks + 1, 1 - q), rtol=1e-12)
    assert pmf.total() == pytest.approx(1.0, abs=1e-9)
    assert abs(pmf.mean() - 2.0) <= 10 * 1e-9 * pmf.support_max
    assert q ** (pmf.support_max + 1) < 1e-9


def test_geometric_edge_cases():
    point = maxent.maxent_geometric(0.0)
    assert point.probabilities.tolist() == [1.0]
    assert point.entropy_bits() == 0.0
    with pytest.raises(InvalidArgumentError):
        maxent.maxent_geometric(-1.0)
    with pytest.raises(InvalidArgumentError):
        maxent.maxent_geometric(2.0, tail_cut=1e-3)


@pytest.mark.parametrize("mean", [0.5, 1.0, 2.6257, 5.0])
def test_geometric_is_entropy_maximal(mean):
    pmf = maxent.maxent_geometric(mean)
    assert maxent.entropy_perturbation_gain(pmf, window=10, directions=32) <= 1e-9


def test_perturbation_finds_gain_off_the_optimum():
    # a Poisson law with the same mean is not the maximizer over nonnegative integers
    pmf = maxent.poisson_pmf(2.0, 50)
    assert maxent.entropy_perturbation_gain(pmf, window=10, directions=32) > 1e-9


def test_geometric_beats_poisson_entropy():
    lam = 2.8
    assert maxent.maxent_geometric(lam).entropy_bits() > maxent.poisson_pmf(lam, 60).entropy_bits()


def test_poisson_recurrence_matches_direct_formula():
    lam = 2.8872883
    pmf = maxent.poisson_pmf(lam, 60)
    for k in range(31):
        direct = math.exp(-lam) * lam**k / math.factorial(k)
        assert pmf.probabilities[k] == pytest.approx(direct, rel=1e-12)
    np.testing.assert_allclose(pmf.probabilities[:21], stats.poisson.pmf(np.arange(21), lam), rtol=1e-10)


def test_poisson_errors():
    assert maxent.poisson_pmf(0.0, 3).probabilities.tolist() == [1.0, 0.0, 0.0, 0.0]
    with pytest.raises(InvalidArgumentError):
        maxent.poisson_pmf(10.0, 5)
    with pytest.raises(InvalidArgumentError):
        maxent.poisson_pmf(-1.0, 50)


def test_total_variation():
    a = DiscretePMF(0, np.array([0.5, 0.5]), PMFKind.EMPIRICAL)
    b = DiscretePMF(2, np.array([1.0]), PMFKind.EMPIRICAL)
    assert maxent.total_variation(a, a) == 0.0
    assert maxent.total_variation(a, b) == 1.0
    assert maxent.total_variation([1, 3], DiscretePMF(0, np.array([0.5, 0.5]), PMFKind.EMPIRICAL)) == pytest.approx(0.25)
    with pytest.raises(InvalidArgumentError):
        maxent.empirical_pmf([0, 0, 0])


def test_maxent_report_at_1e6(lab_1e6):
    ps, ledger = lab_1e6
    report = maxent.maxent_report(10**6, ps, ledger)
    assert report["lambda_used"] == pytest.approx(math.log(math.log(10**6)) + omega_stats.MERTENS)
    assert report["density"] == pytest.approx(0.078498)
    assert 0.15 < report["tv_poisson"] < 0.4
    assert report["tv_geometric"] > report["tv_poisson"]
    assert report["naive_list_bits"] > report["total_bits"]
