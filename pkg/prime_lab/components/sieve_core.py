"""Prime sieving and per-integer prime-factor counts over contiguous ranges.

`sieve_omega_segment` is the workhorse: for every base prime p it strides
over the multiples of p in [lo, hi), bumps the distinct-factor count and
divides the p-power out of a residual array. Whatever residual is left above
1 is a single prime larger than sqrt(hi - 1) and adds one more factor.
"""
import logging
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from prime_lab.errors import CapacityError, InvalidArgumentError, PreconditionError, RangeError

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

SIEVE_CAP = 1 << 32
DEFAULT_SEGMENT_SIZE = 1 << 20
OMEGA_CEILING = 15
CACHE_MAGIC = b"EPR1"
_CACHE_HEADER = struct.Struct("<4sQQ")


@dataclass(frozen=True)
class PrimeSet:
    limit: int
    membership: np.ndarray

    def __post_init__(self):
        self.membership.setflags(write=False)

    def is_prime(self, n: int) -> bool:
        if n < 0 or n > self.limit:
            raise RangeError(f"{n} outside sieved range [0, {self.limit}]")
        return bool(self.membership[n])

    @property
    def primes(self) -> np.ndarray:
        return np.flatnonzero(self.membership).astype(np.int64)

    def primes_upto(self, bound: int) -> np.ndarray:
        return np.flatnonzero(self.membership[: min(bound, self.limit) + 1]).astype(np.int64)


@dataclass(frozen=True)
class OmegaSegment:
    lo: int
    hi: int
    omega: np.ndarray
    big_omega: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.hi - self.lo

    def values(self) -> np.ndarray:
        return np.arange(self.lo, self.hi, dtype=np.int64)


##############################################################################
## Prime membership
##############################################################################
def sieve_primes(limit: int) -> PrimeSet:
    if limit < 2:
        raise InvalidArgumentError(f"sieve limit must be >= 2, got {limit}")
    if limit > SIEVE_CAP:
        raise CapacityError(f"sieve limit {limit} exceeds desk-scale cap 2^32")

    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    logger.info(f"Sieved primes up to {limit}: pi={int(np.count_nonzero(is_prime))}")
    return PrimeSet(limit=limit, membership=is_prime)


def prime_count(ps: PrimeSet, upto: int) -> int:
    if upto > ps.limit:
        raise RangeError(f"prime_count upto={upto} exceeds sieve limit {ps.limit}")
    if upto < 2:
        return 0
    return int(np.count_nonzero(ps.membership[: upto + 1]))


def trial_division_omega(n: int) -> Tuple[int, int]:
    """Return (omega(n), Omega(n)) by trial division up to sqrt(n)."""
    if n < 1:
        raise InvalidArgumentError(f"trial_division_omega needs n >= 1, got {n}")
    distinct = total = 0
    d = 2
    while d * d <= n:
        if n % d == 0:
            distinct += 1
            while n % d == 0:
                n //= d
                total += 1
        d += 1 if d == 2 else 2
    if n > 1:
        distinct += 1
        total += 1
    return distinct, total


##############################################################################
## Segmented omega sieve
##############################################################################
def sieve_omega_segment(lo: int, hi: int, base_primes: PrimeSet, with_big_omega: bool = False) -> OmegaSegment:
    if hi <= lo:
        raise InvalidArgumentError(f"empty segment [{lo}, {hi})")
    if lo < 2:
        raise InvalidArgumentError(f"segments start at 2 or later, got lo={lo}")
    if base_primes.limit * base_primes.limit < hi - 1:
        raise PreconditionError(
            f"base primes up to {base_primes.limit} do not cover sqrt({hi - 1})"
        )

    size = hi - lo
    top = hi - 1
    residual = np.arange(lo, hi, dtype=np.int64)
    omega = np.zeros(size, dtype=np.uint8)
    big_omega = np.zeros(size, dtype=np.uint8) if with_big_omega else None

    for p in base_primes.primes_upto(math.isqrt(top)).tolist():
        first = -(-lo // p) * p
        if first >= hi:
            continue
        omega[first - lo :: p] += 1
        # Each power p^k that still fits removes one more factor p from its multiples.
        pk = p
        while pk <= top:
            start = -(-lo // pk) * pk
            if start >= hi:
                break
            residual[start - lo :: pk] //= p
            if big_omega is not None:
                big_omega[start - lo :: pk] += 1
            pk *= p

    leftover = residual > 1
    omega += leftover
    if big_omega is not None:
        big_omega += leftover

    assert int(omega.max()) <= OMEGA_CEILING, "omega count overflowed its 8-bit range"
    return OmegaSegment(lo=lo, hi=hi, omega=omega, big_omega=big_omega)


def concat_segments(first: OmegaSegment, second: OmegaSegment) -> OmegaSegment:
    if first.hi != second.lo:
        raise InvalidArgumentError(f"segments [{first.lo},{first.hi}) and [{second.lo},{second.hi}) are not adjacent")
    big = None
    if first.big_omega is not None and second.big_omega is not None:
        big = np.concatenate([first.big_omega, second.big_omega])
    return OmegaSegment(
        lo=first.lo,
        hi=second.hi,
        omega=np.concatenate([first.omega, second.omega]),
        big_omega=big,
    )


def segment_bounds(lo: int, hi: int, segment_size: int = DEFAULT_SEGMENT_SIZE) -> List[Tuple[int, int]]:
    if segment_size < 1:
        raise InvalidArgumentError(f"segment_size must be positive, got {segment_size}")
    return [(start, min(start + segment_size, hi)) for start in range(lo, hi, segment_size)]


def _sieve_task(args):
    lo, hi, base_primes, with_big_omega = args
    return sieve_omega_segment(lo, hi, base_primes, with_big_omega)


def iter_omega_segments(
    lo: int,
    hi: int,
    base_primes: PrimeSet,
    segment_size: int = DEFAULT_SEGMENT_SIZE,
    workers: int = 1,
    with_big_omega: bool = False,
) -> Iterator[OmegaSegment]:
    """Yield segments covering [lo, hi) in ascending order, sieved serially or in a process pool."""
    yield from sieve_bounds(segment_bounds(lo, hi, segment_size), base_primes, workers, with_big_omega)


def sieve_bounds(
    bounds: Sequence[Tuple[int, int]],
    base_primes: PrimeSet,
    workers: int = 1,
    with_big_omega: bool = False,
) -> Iterator[OmegaSegment]:
    """Sieve each (lo, hi) pair, yielding segments in the order the pairs were given."""
    if workers <= 1 or len(bounds) <= 1:
        for a, b in bounds:
            yield sieve_omega_segment(a, b, base_primes, with_big_omega)
        return

    logger.info(f"Sieving {len(bounds)} segments with {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        # map preserves submission order, so the schedule never changes the output
        yield from executor.map(_sieve_task, [(a, b, base_primes, with_big_omega) for a, b in bounds])


def omega_sum_identity(ps: PrimeSet, N: int) -> int:
    """Sum over primes p <= N of floor(N / p), which equals sum_{2<=n<=N} omega(n)."""
    if N > ps.limit:
        raise RangeError(f"N={N} beyond sieve limit {ps.limit}")
    return int(np.sum(N // ps.primes_upto(N)))


def base_primes_for(hi: int) -> PrimeSet:
    """Smallest PrimeSet that can sieve any segment ending below `hi`."""
    return sieve_primes(max(2, math.isqrt(max(hi - 1, 4)) + 1))


##############################################################################
## EPR1 segment cache
##############################################################################
def write_segment_cache(path: str, segment: OmegaSegment) -> None:
    with open(path, "wb") as f:
        f.write(_CACHE_HEADER.pack(CACHE_MAGIC, segment.lo, segment.hi))
        f.write(segment.omega.astype(np.uint8).tobytes())


def read_segment_cache(path: str) -> OmegaSegment:
    with open(path, "rb") as f:
        header = f.read(_CACHE_HEADER.size)
        if len(header) != _CACHE_HEADER.size:
            raise InvalidArgumentError(f"{path}: truncated segment cache header")
        magic, lo, hi = _CACHE_HEADER.unpack(header)
        if magic != CACHE_MAGIC:
            raise InvalidArgumentError(f"{path}: bad magic {magic!r}")
        payload = f.read()
    if len(payload) != hi - lo:
        raise InvalidArgumentError(f"{path}: expected {hi - lo} omega bytes, found {len(payload)}")
    return OmegaSegment(lo=lo, hi=hi, omega=np.frombuffer(payload, dtype=np.uint8).copy())


def load_or_sieve_range(
    lo: int,
    hi: int,
    base_primes: PrimeSet,
    segment_size: int = DEFAULT_SEGMENT_SIZE,
    workers: int = 1,
    cache_dir: Optional[str] = None,
) -> List[OmegaSegment]:
    """Segments for [lo, hi), reusing EPR1 cache files in `cache_dir` when present."""
    if cache_dir is None:
        return list(iter_omega_segments(lo, hi, base_primes, segment_size, workers))

    os.makedirs(cache_dir, exist_ok=True)
    bounds = segment_bounds(lo, hi, segment_size)
    segments: List[Optional[OmegaSegment]] = [None] * len(bounds)
    missing = []
    for i, (a, b) in enumerate(bounds):
        path = os.path.join(cache_dir, f"omega_{a}_{b}.epr")
        if os.path.exists(path):
            segments[i] = read_segment_cache(path)
        else:
            missing.append(i)

    logger.info(f"Segment cache {cache_dir}: {len(bounds) - len(missing)} hits, {len(missing)} to sieve")
    fresh = sieve_bounds([bounds[i] for i in missing], base_primes, workers)
    for i, segment in zip(missing, fresh):
        write_segment_cache(os.path.join(cache_dir, f"omega_{segment.lo}_{segment.hi}.epr"), segment)
        segments[i] = segment
    return segments
