"""Exact streaming moments of omega(n) and the Hardy-Ramanujan / Erdos-Kac checks built on them."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from prime_lab.components.sieve_core import OmegaSegment
from prime_lab.errors import CapacityError, DomainError, InvalidArgumentError

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

MERTENS = 0.2614972128
HIST_SIZE = 32
EK_MIN_N = 16
CHEBYSHEV_LAMBDAS = (1, 2, 3)
HIST_RANGE = (-4.0, 4.2)

# Abramowitz-Stegun 7.1.26
_AS_P = 0.3275911
_AS_COEFFS = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)


@dataclass(frozen=True)
class MomentLedger:
    count: int = 0
    sum_omega: int = 0
    sum_omega_sq: int = 0
    hist: Tuple[int, ...] = (0,) * HIST_SIZE
    spans: Tuple[Tuple[int, int], ...] = ()

    @property
    def n_min(self) -> Optional[int]:
        return self.spans[0][0] if self.spans else None

    @property
    def n_max(self) -> Optional[int]:
        return self.spans[-1][1] - 1 if self.spans else None

    def mean(self) -> float:
        return self.sum_omega / self.count

    def variance(self) -> float:
        mean = self.sum_omega / self.count
        return self.sum_omega_sq / self.count - mean * mean


@dataclass
class EKReport:
    N: int
    count: int
    mean: float
    variance: float
    loglogN: float
    mean_dev: float
    var_dev: float
    chebyshev_fractions: Dict[int, float]
    mertens_shift: float = MERTENS
    ks_distance: Optional[float] = None
    histogram: List[Tuple[float, float, float]] = field(default_factory=list)

    def as_row(self) -> Dict[str, float]:
        return {
            "n_max": self.N,
            "count": self.count,
            "mean": self.mean,
            "loglogN": self.loglogN,
            "mertens": self.mertens_shift,
            "mean_dev": self.mean_dev,
            "variance": self.variance,
            "var_dev": self.var_dev,
            "ks": self.ks_distance,
            "cheb1": self.chebyshev_fractions[1],
            "cheb2": self.chebyshev_fractions[2],
            "cheb3": self.chebyshev_fractions[3],
        }


def _merge_spans(a: Sequence[Tuple[int, int]], b: Sequence[Tuple[int, int]]) -> Tuple[Tuple[int, int], ...]:
    spans = sorted(list(a) + list(b))
    for (_, hi), (lo, _) in zip(spans, spans[1:]):
        if lo < hi:
            raise InvalidArgumentError(f"ledger ranges overlap near {lo}")
    merged: List[Tuple[int, int]] = []
    for lo, hi in spans:
        if merged and merged[-1][1] == lo:
            merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return tuple(merged)


##############################################################################
## Ledger accumulation
##############################################################################
def accumulate(segment: OmegaSegment, ledger: Optional[MomentLedger] = None) -> MomentLedger:
    ledger = ledger or MomentLedger()
    spans = _merge_spans(ledger.spans, [(segment.lo, segment.hi)])

    counts = np.bincount(segment.omega, minlength=HIST_SIZE)
    if counts.size > HIST_SIZE:
        raise CapacityError(f"omega value {counts.size - 1} exceeds histogram cap {HIST_SIZE - 1}")
    added = [int(c) for c in counts]
    hist = tuple(h + a for h, a in zip(ledger.hist, added))
    return MomentLedger(
        count=ledger.count + sum(added),
        sum_omega=ledger.sum_omega + sum(k * c for k, c in enumerate(added)),
        sum_omega_sq=ledger.sum_omega_sq + sum(k * k * c for k, c in enumerate(added)),
        hist=hist,
        spans=spans,
    )


def merge(a: MomentLedger, b: MomentLedger) -> MomentLedger:
    return MomentLedger(
        count=a.count + b.count,
        sum_omega=a.sum_omega + b.sum_omega,
        sum_omega_sq=a.sum_omega_sq + b.sum_omega_sq,
        hist=tuple(x + y for x, y in zip(a.hist, b.hist)),
        spans=_merge_spans(a.spans, b.spans),
    )


def ledger_from_segments(segments: Iterable[OmegaSegment]) -> MomentLedger:
    ledger = MomentLedger()
    for segment in segments:
        ledger = accumulate(segment, ledger)
    return ledger


##############################################################################
## Gaussian reference
##############################################################################
def _erfc_nonneg(z: float) -> float:
    t = 1.0 / (1.0 + _AS_P * z)
    poly = 0.0
    for coeff in reversed(_AS_COEFFS):
        poly = poly * t + coeff
    return poly * t * math.exp(-z * z)


def normal_cdf(x: float) -> float:
    """Standard normal CDF, |error| <= 1.5e-7, exactly antisymmetric about 1/2."""
    if not math.isfinite(x):
        raise InvalidArgumentError(f"normal_cdf needs a finite argument, got {x}")
    tail = 0.5 * _erfc_nonneg(abs(x) / math.sqrt(2.0))
    return 1.0 - tail if x >= 0 else tail


def normal_cdf_array(xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if not np.all(np.isfinite(xs)):
        raise InvalidArgumentError("normal_cdf_array needs finite arguments")
    z = np.abs(xs) / math.sqrt(2.0)
    t = 1.0 / (1.0 + _AS_P * z)
    poly = np.zeros_like(t)
    for coeff in reversed(_AS_COEFFS):
        poly = poly * t + coeff
    tail = 0.5 * poly * t * np.exp(-z * z)
    return np.where(xs >= 0, 1.0 - tail, tail)


##############################################################################
## Hardy-Ramanujan and Erdos-Kac
##############################################################################
def loglog(N: int) -> float:
    if N <= math.e:
        raise DomainError(f"ln ln N is undefined or nonpositive for N={N}")
    return math.log(math.log(N))


def ek_standardize(omega_value: int, N: int) -> float:
    if N < EK_MIN_N:
        raise DomainError(f"Erdos-Kac standardization needs N >= {EK_MIN_N}, got {N}")
    center = loglog(N)
    return (omega_value - center) / math.sqrt(center)


def _resolve_N(ledger: MomentLedger, N: Optional[int]) -> int:
    if N is not None:
        return N
    if ledger.n_max is None:
        raise InvalidArgumentError("empty ledger has no range endpoint")
    return ledger.n_max


def hardy_ramanujan_report(ledger: MomentLedger, N: Optional[int] = None) -> EKReport:
    if ledger.count < 2:
        raise InvalidArgumentError(f"need at least 2 samples, ledger has {ledger.count}")
    N = _resolve_N(ledger, N)
    center = loglog(N)
    spread = math.sqrt(center)
    mean = ledger.mean()
    variance = ledger.variance()

    fractions = {}
    for lam in CHEBYSHEV_LAMBDAS:
        tail = sum(c for k, c in enumerate(ledger.hist) if abs(k - center) >= lam * spread)
        fractions[lam] = tail / ledger.count

    return EKReport(
        N=N,
        count=ledger.count,
        mean=mean,
        variance=variance,
        loglogN=center,
        mean_dev=mean - (center + MERTENS),
        var_dev=variance - center,
        chebyshev_fractions=fractions,
    )


def ks_distance_from_atoms(points: Sequence[float], masses: Sequence[float]) -> float:
    """KS distance between a discrete law (atoms at sorted `points`) and N(0,1).

    Both one-sided limits of the empirical CDF are compared at each atom.
    """
    order = np.argsort(np.asarray(points, dtype=np.float64), kind="stable")
    points = np.asarray(points, dtype=np.float64)[order]
    masses = np.asarray(masses, dtype=np.float64)[order]
    total = masses.sum()
    if total <= 0:
        raise InvalidArgumentError("atoms carry no mass")
    right = np.cumsum(masses) / total
    left = np.concatenate([[0.0], right[:-1]])
    phi = normal_cdf_array(points)
    return float(max(np.max(np.abs(right - phi)), np.max(np.abs(left - phi))))


def ks_distance_to_normal(ledger: MomentLedger, N: Optional[int] = None) -> float:
    if ledger.count < 1:
        raise InvalidArgumentError("KS distance of an empty ledger")
    N = _resolve_N(ledger, N)
    points = [ek_standardize(k, N) for k in range(HIST_SIZE)]
    return ks_distance_from_atoms(points, ledger.hist)


def ks_distance_per_n(segments: Iterable[OmegaSegment], n_floor: int = EK_MIN_N) -> float:
    """KS distance with per-n centering (omega(n) - ln ln n) / sqrt(ln ln n), n >= n_floor."""
    standardized = []
    for segment in segments:
        ns = segment.values()
        keep = ns >= n_floor
        if not np.any(keep):
            continue
        center = np.log(np.log(ns[keep].astype(np.float64)))
        standardized.append((segment.omega[keep] - center) / np.sqrt(center))
    if not standardized:
        raise InvalidArgumentError(f"no samples with n >= {n_floor}")
    z = np.sort(np.concatenate(standardized))
    m = z.size
    phi = normal_cdf_array(z)
    upper = np.arange(1, m + 1) / m - phi
    lower = phi - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


def standardized_histogram(ledger: MomentLedger, N: int, bins: int = 41) -> List[Tuple[float, float, float]]:
    """(t, empirical CDF at t, Phi(t)) at the upper edge of each uniform bin over [-4, 4.2]."""
    if bins < 1:
        raise InvalidArgumentError(f"bins must be positive, got {bins}")
    lo, hi = HIST_RANGE
    edges = np.linspace(lo, hi, bins + 1)[1:]
    atoms = np.array([ek_standardize(k, N) for k in range(HIST_SIZE)])
    cumulative = np.cumsum(np.asarray(ledger.hist, dtype=np.float64)) / ledger.count
    rows = []
    for t in edges:
        below = np.flatnonzero(atoms <= t)
        empirical = float(cumulative[below[-1]]) if below.size else 0.0
        rows.append((float(t), empirical, normal_cdf(float(t))))
    return rows


def erdos_kac_report(ledger: MomentLedger, N: Optional[int] = None, bins: int = 41) -> EKReport:
    report = hardy_ramanujan_report(ledger, N)
    if report.N >= EK_MIN_N:
        report.ks_distance = ks_distance_to_normal(ledger, report.N)
        report.histogram = standardized_histogram(ledger, report.N, bins)
    else:
        logger.warning(f"N={report.N} below {EK_MIN_N}: skipping Erdos-Kac standardization")
    logger.info(
        f"N={report.N}: mean={report.mean:.6f} (dev {report.mean_dev:+.4f}), "
        f"variance={report.variance:.6f}, ks={report.ks_distance}"
    )
    return report
