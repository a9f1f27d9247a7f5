import os

import numpy as np
import pytest

from prime_lab.components import sieve_core
from prime_lab.components.sieve_core import OmegaSegment
from prime_lab.errors import CapacityError, InvalidArgumentError, PreconditionError, RangeError


@pytest.fixture(scope="module")
def primes_1e6():
    return sieve_core.sieve_primes(10**6)


def test_small_primes():
    ps = sieve_core.sieve_primes(30)
    assert ps.primes.tolist() == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert ps.is_prime(29)
    assert not ps.is_prime(1)


def test_prime_count_million(primes_1e6):
    assert sieve_core.prime_count(primes_1e6, 10**6) == 78498
    assert sieve_core.prime_count(primes_1e6, 100) == 25
    assert sieve_core.prime_count(primes_1e6, 1) == 0


def test_sieve_limit_errors():
    with pytest.raises(InvalidArgumentError):
        sieve_core.sieve_primes(1)
    with pytest.raises(CapacityError):
        sieve_core.sieve_primes((1 << 32) + 1)


def test_is_prime_out_of_range():
    ps = sieve_core.sieve_primes(50)
    with pytest.raises(RangeError):
        ps.is_prime(51)
    with pytest.raises(RangeError):
        sieve_core.prime_count(ps, 51)


def test_membership_is_read_only():
    ps = sieve_core.sieve_primes(50)
    with pytest.raises(ValueError):
        ps.membership[4] = True


def test_omega_small_segments():
    base = sieve_core.sieve_primes(10)
    assert sieve_core.sieve_omega_segment(2, 10, base).omega.tolist() == [1, 1, 1, 1, 2, 1, 1, 1]
    assert sieve_core.sieve_omega_segment(30, 31, base).omega.tolist() == [3]


def test_omega_matches_trial_division_to_1e5():
    hi = 10**5 + 1
    segments = sieve_core.iter_omega_segments(2, hi, sieve_core.base_primes_for(hi), segment_size=4096)
    omega = np.concatenate([s.omega for s in segments])
    expected = [sieve_core.trial_division_omega(n)[0] for n in range(2, hi)]
    np.testing.assert_array_equal(omega, expected)


def test_big_omega_matches_trial_division():
    base = sieve_core.base_primes_for(5000)
    segment = sieve_core.sieve_omega_segment(1000, 5000, base, with_big_omega=True)
    expected = [sieve_core.trial_division_omega(n)[1] for n in range(1000, 5000)]
    np.testing.assert_array_equal(segment.big_omega, expected)
    assert sieve_core.trial_division_omega(2**10 * 3) == (2, 11)


def test_segment_size_does_not_change_output():
    hi = 50_000
    base = sieve_core.base_primes_for(hi)
    whole = sieve_core.sieve_omega_segment(2, hi, base).omega
    for size in (97, 997, 8192):
        pieces = [s.omega for s in sieve_core.iter_omega_segments(2, hi, base, segment_size=size)]
        np.testing.assert_array_equal(np.concatenate(pieces), whole)


def test_parallel_sieve_matches_serial():
    hi = 200_000
    base = sieve_core.base_primes_for(hi)
    serial = [s.omega for s in sieve_core.iter_omega_segments(2, hi, base, segment_size=30_000)]
    parallel = [s.omega for s in sieve_core.iter_omega_segments(2, hi, base, segment_size=30_000, workers=2)]
    assert len(serial) == len(parallel)
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a, b)


def test_segment_preconditions():
    base = sieve_core.sieve_primes(10)
    with pytest.raises(PreconditionError):
        sieve_core.sieve_omega_segment(2, 200, base)
    with pytest.raises(InvalidArgumentError):
        sieve_core.sieve_omega_segment(10, 10, base)
    with pytest.raises(InvalidArgumentError):
        sieve_core.sieve_omega_segment(1, 10, base)


def test_omega_sum_identity():
    ps = sieve_core.sieve_primes(10**5)
    assert sieve_core.omega_sum_identity(ps, 100) == 171
    hi = 10**5 + 1
    total = sum(int(s.omega.sum()) for s in sieve_core.iter_omega_segments(2, hi, sieve_core.base_primes_for(hi)))
    assert total == sieve_core.omega_sum_identity(ps, 10**5)


def test_concat_segments():
    base = sieve_core.sieve_primes(100)
    a = sieve_core.sieve_omega_segment(2, 50, base)
    b = sieve_core.sieve_omega_segment(50, 100, base)
    joined = sieve_core.concat_segments(a, b)
    assert (joined.lo, joined.hi, len(joined)) == (2, 100, 98)
    np.testing.assert_array_equal(joined.omega, sieve_core.sieve_omega_segment(2, 100, base).omega)
    with pytest.raises(InvalidArgumentError):
        sieve_core.concat_segments(b, a)


def test_segment_cache(tmp_path):
    base = sieve_core.sieve_primes(100)
    segment = sieve_core.sieve_omega_segment(20, 90, base)
    path = str(tmp_path / "seg.epr")
    sieve_core.write_segment_cache(path, segment)
    with open(path, "rb") as f:
        assert f.read(4) == b"EPR1"
    loaded = sieve_core.read_segment_cache(path)
    assert (loaded.lo, loaded.hi) == (20, 90)
    np.testing.assert_array_equal(loaded.omega, segment.omega)


def test_segment_cache_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.epr"
    bad.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(InvalidArgumentError):
        sieve_core.read_segment_cache(str(bad))
    short = tmp_path / "short.epr"
    short.write_bytes(b"EP")
    with pytest.raises(InvalidArgumentError):
        sieve_core.read_segment_cache(str(short))


def test_load_or_sieve_range_reuses_cache(tmp_path):
    cache = str(tmp_path / "cache")
    base = sieve_core.base_primes_for(10_001)
    first = sieve_core.load_or_sieve_range(2, 10_001, base, segment_size=4000, cache_dir=cache)
    assert sorted(os.listdir(cache)) == ["omega_2_4002.epr", "omega_4002_8002.epr", "omega_8002_10001.epr"]
    second = sieve_core.load_or_sieve_range(2, 10_001, base, segment_size=4000, cache_dir=cache)
    for a, b in zip(first, second):
        assert (a.lo, a.hi) == (b.lo, b.hi)
        np.testing.assert_array_equal(a.omega, b.omega)


def test_segment_values():
    segment = OmegaSegment(lo=5, hi=8, omega=np.array([1, 2, 1], dtype=np.uint8))
    assert segment.values().tolist() == [5, 6, 7]


def test_load_or_sieve_range_fills_cache_gaps_in_parallel(tmp_path):
    cache = tmp_path / "cache"
    base = sieve_core.base_primes_for(20_001)
    serial = sieve_core.load_or_sieve_range(2, 20_001, base, segment_size=4000, cache_dir=str(cache))
    (cache / "omega_4002_8002.epr").unlink()
    (cache / "omega_12002_16002.epr").unlink()
    parallel = sieve_core.load_or_sieve_range(2, 20_001, base, segment_size=4000, workers=2, cache_dir=str(cache))
    assert [(s.lo, s.hi) for s in parallel] == [(s.lo, s.hi) for s in serial]
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.omega, b.omega)
    assert (cache / "omega_12002_16002.epr").exists()
