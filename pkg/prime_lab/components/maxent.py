import enum
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from prime_lab.components.omega_stats import MERTENS, MomentLedger, loglog
from prime_lab.components.sieve_core import PrimeSet, prime_count
from prime_lab.errors import InvalidArgumentError, RangeError

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

DEFAULT_TAIL_CUT = 1e-9
POISSON_MARGIN = 40


class PMFKind(enum.Enum):
    GEOMETRIC = "geometric"
    POISSON = "poisson"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class DiscretePMF:
    support_min: int
    probabilities: np.ndarray
    kind: PMFKind
    parameter: Optional[float] = None

    def __post_init__(self):
        self.probabilities.setflags(write=False)

    @property
    def support_max(self) -> int:
        return self.support_min + len(self.probabilities) - 1

    def support(self) -> np.ndarray:
        return np.arange(self.support_min, self.support_max + 1)

    def total(self) -> float:
        return float(self.probabilities.sum())

    def mean(self) -> float:
        return float(np.dot(self.support(), self.probabilities))

    def entropy_bits(self) -> float:
        return entropy_bits(self.probabilities)


@dataclass
class DensityEntropyRecord:
    N: int
    pi_N: int
    density: float
    entropy_bits: float
    total_bits: float
    naive_list_bits: float
    log_loss_bits: float


def entropy_bits(probabilities: np.ndarray) -> float:
    p = np.asarray(probabilities, dtype=np.float64)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)) / math.log(2))


def bernoulli_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"probability must lie in [0, 1], got {p}")
    total = 0.0
    for q in (p, 1.0 - p):
        if q > 0:
            total -= q * math.log(q)
    return total / math.log(2)


##############################################################################
## Reference laws
##############################################################################
def maxent_geometric(mean: float, tail_cut: float = DEFAULT_TAIL_CUT) -> DiscretePMF:
    """Maximum-entropy law on {0, 1, ...} with the given mean, truncated once the tail drops below tail_cut."""
    if mean < 0 or not math.isfinite(mean):
        raise InvalidArgumentError(f"geometric mean must be finite and >= 0, got {mean}")
    if not 0 < tail_cut <= 1e-6:
        raise InvalidArgumentError(f"tail_cut must lie in (0, 1e-6], got {tail_cut}")
    if mean == 0:
        return DiscretePMF(0, np.array([1.0]), PMFKind.GEOMETRIC, 0.0)

    q = mean / (1.0 + mean)
    # the mass beyond k_max is q^(k_max + 1)
    k_max = max(0, math.ceil(math.log(tail_cut) / math.log(q)) - 1)
    while q ** (k_max + 1) >= tail_cut:
        k_max += 1
    probabilities = (1.0 - q) * q ** np.arange(k_max + 1, dtype=np.float64)
    return DiscretePMF(0, probabilities, PMFKind.GEOMETRIC, float(mean))


def poisson_pmf(lam: float, k_max: int) -> DiscretePMF:
    if lam < 0 or not math.isfinite(lam):
        raise InvalidArgumentError(f"Poisson rate must be finite and >= 0, got {lam}")
    if k_max < 0:
        raise InvalidArgumentError(f"k_max must be >= 0, got {k_max}")

    probabilities = np.zeros(k_max + 1, dtype=np.float64)
    probabilities[0] = math.exp(-lam)
    for k in range(1, k_max + 1):
        probabilities[k] = probabilities[k - 1] * lam / k

    if k_max < math.ceil(lam) + POISSON_MARGIN and 1.0 - probabilities.sum() >= DEFAULT_TAIL_CUT:
        raise InvalidArgumentError(
            f"k_max={k_max} leaves a Poisson({lam}) tail of {1.0 - probabilities.sum():.3g}"
        )
    return DiscretePMF(0, probabilities, PMFKind.POISSON, float(lam))


def empirical_pmf(hist: Sequence[int], support_min: int = 0) -> DiscretePMF:
    counts = np.asarray(hist, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise InvalidArgumentError("empirical histogram has no samples")
    return DiscretePMF(support_min, counts / total, PMFKind.EMPIRICAL)


def total_variation(a: Union[DiscretePMF, Sequence[int]], b: DiscretePMF) -> float:
    if not isinstance(a, DiscretePMF):
        a = empirical_pmf(a)
    if not isinstance(b, DiscretePMF):
        b = empirical_pmf(b)
    if a.support_min < 0 or b.support_min < 0:
        raise InvalidArgumentError("total variation is defined here on nonnegative integers only")
    top = max(a.support_max, b.support_max)
    dense_a = np.zeros(top + 1)
    dense_b = np.zeros(top + 1)
    dense_a[a.support_min : a.support_max + 1] = a.probabilities
    dense_b[b.support_min : b.support_max + 1] = b.probabilities
    return float(min(1.0, 0.5 * np.abs(dense_a - dense_b).sum()))


def entropy_perturbation_gain(
    pmf: DiscretePMF,
    window: int = 10,
    directions: int = 64,
    steps: Sequence[float] = (1e-4, 1e-3, 1e-2, 1e-1),
    seed: int = 0,
) -> float:
    """Largest entropy gain (bits) over perturbations of p(0..window) that keep total mass and mean fixed."""
    size = min(window, pmf.support_max) + 1
    if size < 3:
        return 0.0
    base = pmf.probabilities.astype(np.float64)
    base_entropy = entropy_bits(base)

    ks = np.arange(size, dtype=np.float64)
    constraints = np.vstack([np.ones(size), ks])
    # orthonormal basis of the null space of the mass and mean constraints
    _, _, vt = np.linalg.svd(constraints)
    null_space = vt[2:]

    rng = np.random.default_rng(seed)
    best = -math.inf
    for _ in range(directions):
        direction = rng.standard_normal(null_space.shape[0]) @ null_space
        direction /= np.abs(direction).max()
        for step in steps:
            for sign in (1.0, -1.0):
                trial = base.copy()
                trial[:size] += sign * step * base[:size].min() * direction
                if np.any(trial < 0):
                    continue
                best = max(best, entropy_bits(trial) - base_entropy)
    return best


##############################################################################
## Density and entropy budget
##############################################################################
def prime_density_entropy_report(N: int, ps: PrimeSet) -> DensityEntropyRecord:
    if N > ps.limit:
        raise RangeError(f"N={N} exceeds sieve limit {ps.limit}")
    if N < 3:
        raise InvalidArgumentError(f"density report needs N >= 3, got {N}")
    pi_N = prime_count(ps, N)
    density = pi_N / N
    h = bernoulli_entropy(density)
    return DensityEntropyRecord(
        N=N,
        pi_N=pi_N,
        density=density,
        entropy_bits=h,
        total_bits=N * h,
        naive_list_bits=pi_N * math.log2(N),
        log_loss_bits=h,
    )


def maxent_report(N: int, ps: PrimeSet, ledger: MomentLedger, tail_cut: float = DEFAULT_TAIL_CUT) -> Dict[str, float]:
    """Density record plus geometric and Poisson fits against the empirical omega law."""
    record = prime_density_entropy_report(N, ps)
    lam = loglog(N) + MERTENS
    geometric = maxent_geometric(lam, tail_cut)
    poisson = poisson_pmf(lam, math.ceil(lam) + POISSON_MARGIN)
    empirical = empirical_pmf(ledger.hist)
    report = {
        "N": record.N,
        "density": record.density,
        "entropy_bits": record.entropy_bits,
        "total_bits": record.total_bits,
        "naive_list_bits": record.naive_list_bits,
        "tv_geometric": total_variation(empirical, geometric),
        "tv_poisson": total_variation(empirical, poisson),
        "lambda_used": lam,
    }
    logger.info(f"maxent N={N}: tv_geometric={report['tv_geometric']:.6f}, tv_poisson={report['tv_poisson']:.6f}")
    return report
