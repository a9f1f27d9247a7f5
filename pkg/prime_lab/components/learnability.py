"""Logistic probes on binary digits: are primes (or the Erdos-Kac sign) learnable beyond their density?"""
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from prime_lab.components.omega_stats import EK_MIN_N, loglog
from prime_lab.components.sieve_core import (
    OmegaSegment,
    PrimeSet,
    base_primes_for,
    iter_omega_segments,
    sieve_primes,
)
from prime_lab.errors import DivergenceError, DomainError, InvalidArgumentError, RangeError

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

LN2 = math.log(2.0)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
GRADIENT_CHECK_ROWS = 64


class Task(enum.Enum):
    PRIME = "prime"
    EK_SIGN = "ek_sign"

    @classmethod
    def parse(cls, name) -> "Task":
        if isinstance(name, cls):
            return name
        if name == "ek":
            return cls.EK_SIGN
        try:
            return cls(name)
        except ValueError:
            raise InvalidArgumentError(f"unknown task {name!r}; expected prime or ek")


class SplitKind(enum.Enum):
    RANGE = "range"
    SHUFFLE = "shuffle"


def featurize(n: int, width: int) -> np.ndarray:
    """Little-endian binary digits of n: feature j is bit j."""
    return featurize_many(np.array([n], dtype=np.int64), width)[0]


def featurize_many(ns: np.ndarray, width: int) -> np.ndarray:
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size and (ns.min() < 0 or ns.max() >= 1 << width):
        raise RangeError(f"values must lie in [0, 2^{width})")
    return ((ns[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(np.uint8)


def splitmix64(seed: int, count: int) -> np.ndarray:
    """`count` consecutive outputs of the splitmix64 generator seeded with `seed`."""
    with np.errstate(over="ignore"):
        x = np.uint64(seed % (1 << 64)) + _GOLDEN * np.arange(1, count + 1, dtype=np.uint64)
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        return x ^ (x >> np.uint64(31))


##############################################################################
## Datasets
##############################################################################
@dataclass(frozen=True)
class Dataset:
    task: Task
    N: int
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    split: SplitKind = SplitKind.RANGE
    feature_names: Tuple[str, ...] = ()
    ns: Optional[np.ndarray] = None

    def __post_init__(self):
        for array in (self.features, self.labels, self.train_idx, self.test_idx):
            array.setflags(write=False)

    @property
    def width(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_arrays(
        cls,
        features,
        labels,
        train_idx: Optional[Sequence[int]] = None,
        test_idx: Optional[Sequence[int]] = None,
        task: Task = Task.PRIME,
    ) -> "Dataset":
        """Wrap raw arrays; with no index sets every row is both train and test."""
        features = np.atleast_2d(np.array(features, dtype=np.uint8))
        labels = np.array(labels, dtype=np.float64)
        if features.shape[0] != labels.shape[0]:
            raise InvalidArgumentError(f"{features.shape[0]} feature rows but {labels.shape[0]} labels")
        everything = np.arange(labels.shape[0])
        return cls(
            task=task,
            N=labels.shape[0],
            features=features,
            labels=labels,
            train_idx=np.asarray(everything if train_idx is None else train_idx, dtype=np.int64),
            test_idx=np.asarray(everything if test_idx is None else test_idx, dtype=np.int64),
            feature_names=tuple(f"bit{j}" for j in range(features.shape[1])),
        )

    def ablate(self, columns: Sequence[str]) -> "Dataset":
        missing = [c for c in columns if c not in self.feature_names]
        if missing:
            raise InvalidArgumentError(f"cannot ablate unknown features {missing}")
        keep = [j for j, name in enumerate(self.feature_names) if name not in columns]
        return replace(
            self,
            features=self.features[:, keep],
            feature_names=tuple(self.feature_names[j] for j in keep),
        )

    def rows(self, which: str) -> np.ndarray:
        if which == "train":
            return self.train_idx
        if which == "test":
            return self.test_idx
        raise InvalidArgumentError(f"split must be train or test, got {which!r}")

    def positive_rate(self, which: str) -> float:
        return float(self.labels[self.rows(which)].mean())


def _split_indices(count: int, N: int, split: SplitKind, seed: int, train_frac: float) -> Tuple[np.ndarray, np.ndarray]:
    if not 0 < train_frac < 1:
        raise InvalidArgumentError(f"train_frac must lie in (0, 1), got {train_frac}")
    if split is SplitKind.RANGE:
        # row i holds n = i + 2; train is n < floor(train_frac * N)
        boundary = max(0, min(count, math.floor(train_frac * N) - 2))
        return np.arange(boundary), np.arange(boundary, count)
    order = np.argsort(splitmix64(seed, count), kind="stable")
    n_train = math.floor(train_frac * count)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def _omega_upto(N: int, segments: Optional[Sequence[OmegaSegment]]) -> np.ndarray:
    if segments is None:
        segments = list(iter_omega_segments(2, N + 1, base_primes_for(N + 1)))
    omega = np.concatenate([s.omega for s in segments]) if segments else np.zeros(0, dtype=np.uint8)
    if not segments or segments[0].lo != 2 or omega.size < N - 1:
        raise InvalidArgumentError(f"omega segments must cover [2, {N}]")
    return omega[: N - 1]


def make_dataset(
    task,
    N: int,
    split: SplitKind = SplitKind.RANGE,
    seed: int = 0,
    ps: Optional[PrimeSet] = None,
    segments: Optional[Sequence[OmegaSegment]] = None,
    train_frac: float = 0.8,
    engineered: bool = False,
) -> Dataset:
    """Digits of every n in [2, N] labelled by primality or by the sign of omega(n) - ln ln N."""
    task = Task.parse(task)
    split = SplitKind(split)
    if N < EK_MIN_N:
        raise DomainError(f"datasets need N >= {EK_MIN_N}, got {N}")

    ns = np.arange(2, N + 1, dtype=np.int64)
    width = N.bit_length()
    features = featurize_many(ns, width)
    names = [f"bit{j}" for j in range(width)]
    if engineered:
        packs = [(ns % m)[:, None] == np.arange(m) for m in (3, 5)]
        features = np.hstack([features] + [p.astype(np.uint8) for p in packs])
        names += [f"mod3_{r}" for r in range(3)] + [f"mod5_{r}" for r in range(5)]

    if task is Task.PRIME:
        if ps is None:
            ps = sieve_primes(N)
        if N > ps.limit:
            raise RangeError(f"N={N} exceeds sieve limit {ps.limit}")
        labels = ps.membership[2 : N + 1].astype(np.float64)
    else:
        labels = (_omega_upto(N, segments) > loglog(N)).astype(np.float64)

    train_idx, test_idx = _split_indices(ns.size, N, split, seed, train_frac)
    logger.info(
        f"Dataset {task.value} N={N} split={split.value}: {train_idx.size} train / {test_idx.size} test, "
        f"positive rate {labels.mean():.4f}"
    )
    return Dataset(
        task=task,
        N=N,
        features=features,
        labels=labels,
        train_idx=train_idx,
        test_idx=test_idx,
        split=split,
        feature_names=tuple(names),
        ns=ns,
    )


##############################################################################
## Logistic model
##############################################################################
@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2.0
    epochs: int = 300
    l2: float = 1e-4
    batch: int = 0
    seed: int = 0
    log_every: int = 50

    def as_dict(self) -> Dict[str, Any]:
        return {"lr": self.lr, "epochs": self.epochs, "l2": self.l2, "batch": self.batch, "seed": self.seed}


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    train_config: TrainConfig
    loss_history: Tuple[float, ...] = ()

    def logits(self, features: np.ndarray) -> np.ndarray:
        return features.astype(np.float64) @ self.weights + self.bias

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return special.expit(self.logits(features))


@dataclass
class Metrics:
    accuracy: float
    balanced_accuracy: float
    log_loss_bits: float
    mcc: float
    baseline_accuracy: float
    mean_predicted_rate: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "log_loss_bits": self.log_loss_bits,
            "mcc": self.mcc,
            "baseline_accuracy": self.baseline_accuracy,
            "mean_predicted_rate": self.mean_predicted_rate,
        }


def logistic_loss(weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, l2: float = 0.0) -> float:
    """Mean negative log-likelihood in nats plus (l2 / 2) * |w|^2."""
    z = X @ weights + bias
    data = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return data + 0.5 * l2 * float(weights @ weights)


def logistic_gradient(
    weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, l2: float = 0.0
) -> Tuple[np.ndarray, float]:
    residual = special.expit(X @ weights + bias) - y
    return X.T @ residual / y.size + l2 * weights, float(residual.mean())


def _batches(m: int, batch: int, seed: int, epoch: int) -> List[Optional[np.ndarray]]:
    if batch <= 0 or batch >= m:
        return [None]
    order = np.argsort(splitmix64(seed + epoch, m), kind="stable")
    return [order[start : start + batch] for start in range(0, m, batch)]


def train_logistic(ds: Dataset, config: TrainConfig = TrainConfig()) -> LinearModel:
    """Gradient descent on the L2-regularized logistic loss over the train split.

    Descent runs in mean-centred feature coordinates: the intercept absorbs
    mu . w, so the objective is unchanged but the bias no longer couples to
    every weight. Weights are reported in raw coordinates.
    """
    if ds.train_idx.size == 0:
        raise InvalidArgumentError("train split is empty")
    if config.lr <= 0:
        raise InvalidArgumentError(f"lr must be positive, got {config.lr}")
    if config.epochs < 0:
        raise InvalidArgumentError(f"epochs must be >= 0, got {config.epochs}")

    X = ds.features[ds.train_idx].astype(np.float64)
    y = ds.labels[ds.train_idx]
    mu = X.mean(axis=0)
    w = np.zeros(ds.width)
    c = 0.0

    def objective() -> float:
        loss = logistic_loss(w, c - mu @ w, X, y, config.l2)
        if not math.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite (lr={config.lr})")
        return loss / LN2

    history = [objective()]
    for epoch in range(1, config.epochs + 1):
        for rows in _batches(y.size, config.batch, config.seed, epoch):
            Xb, yb = (X, y) if rows is None else (X[rows], y[rows])
            residual = special.expit(Xb @ w + (c - mu @ w)) - yb
            grad_w = (Xb.T @ residual - mu * residual.sum()) / yb.size + config.l2 * w
            w = w - config.lr * grad_w
            c = c - config.lr * float(residual.mean())
        history.append(objective())
        if config.log_every and epoch % config.log_every == 0:
            logger.info(f"epoch {epoch}/{config.epochs}: train loss {history[-1]:.6f} bits")

    return LinearModel(weights=w, bias=float(c - mu @ w), train_config=config, loss_history=tuple(history))


def _metrics_from_probs(p: np.ndarray, z: np.ndarray, y: np.ndarray) -> Metrics:
    predicted = p >= 0.5
    actual = y >= 0.5
    tp = int(np.count_nonzero(predicted & actual))
    tn = int(np.count_nonzero(~predicted & ~actual))
    fp = int(np.count_nonzero(predicted & ~actual))
    fn = int(np.count_nonzero(~predicted & actual))

    recalls = []
    if tp + fn:
        recalls.append(tp / (tp + fn))
    if tn + fp:
        recalls.append(tn / (tn + fp))
    denominator = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    rate = float(y.mean())
    return Metrics(
        accuracy=(tp + tn) / y.size,
        balanced_accuracy=float(np.mean(recalls)),
        log_loss_bits=float(np.mean(np.logaddexp(0.0, z) - y * z)) / LN2,
        mcc=(tp * tn - fp * fn) / denominator if denominator else 0.0,
        baseline_accuracy=max(rate, 1.0 - rate),
        mean_predicted_rate=float(p.mean()),
    )


def evaluate(model: LinearModel, ds: Dataset, which: str = "test") -> Metrics:
    if model.weights.shape[0] != ds.width:
        raise InvalidArgumentError(f"model has {model.weights.shape[0]} weights, dataset width is {ds.width}")
    rows = ds.rows(which)
    if rows.size == 0:
        raise InvalidArgumentError(f"{which} split is empty")
    z = model.logits(ds.features[rows])
    return _metrics_from_probs(special.expit(z), z, ds.labels[rows])


def baseline_metrics(ds: Dataset, which: str = "test") -> Metrics:
    """Metrics of the constant predictor p = train positive rate."""
    rows = ds.rows(which)
    if rows.size == 0 or ds.train_idx.size == 0:
        raise InvalidArgumentError(f"baseline needs non-empty train and {which} splits")
    rate = min(max(ds.positive_rate("train"), 1e-12), 1.0 - 1e-12)
    y = ds.labels[rows]
    z = np.full(y.size, math.log(rate / (1.0 - rate)))
    return _metrics_from_probs(np.full(y.size, rate), z, y)


def gradient_check(ds: Dataset, model: LinearModel, epsilon: float = 1e-5, l2: Optional[float] = None, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients on <= 64 train rows."""
    if not 1e-7 <= epsilon <= 1e-3:
        raise InvalidArgumentError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    l2 = model.train_config.l2 if l2 is None else l2
    order = np.argsort(splitmix64(seed, ds.train_idx.size), kind="stable")
    rows = ds.train_idx[np.sort(order[:GRADIENT_CHECK_ROWS])]
    X = ds.features[rows].astype(np.float64)
    y = ds.labels[rows]

    grad_w, grad_b = logistic_gradient(model.weights, model.bias, X, y, l2)
    analytic = np.append(grad_w, grad_b)
    params = np.append(model.weights, model.bias)
    numeric = np.empty_like(params)
    for j in range(params.size):
        up, down = params.copy(), params.copy()
        up[j] += epsilon
        down[j] -= epsilon
        numeric[j] = (
            logistic_loss(up[:-1], up[-1], X, y, l2) - logistic_loss(down[:-1], down[-1], X, y, l2)
        ) / (2 * epsilon)
    errors = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(errors.max())


##############################################################################
## Probe runs
##############################################################################
@dataclass
class ProbeReport:
    task: Task
    N: int
    split: SplitKind
    seed: int
    train: Metrics
    test: Metrics
    baseline: Metrics
    learning_curve: Tuple[float, ...]
    ablations: List[Dict[str, Any]] = field(default_factory=list)

    def margins(self) -> Dict[str, float]:
        return {
            "accuracy_margin": self.test.accuracy - self.baseline.accuracy,
            "log_loss_gain_bits": self.baseline.log_loss_bits - self.test.log_loss_bits,
        }

    def as_dict(self) -> Dict[str, Any]:
        return {
            "task": self.task.value,
            "N": self.N,
            "split": self.split.value,
            "seed": self.seed,
            "train": self.train.as_dict(),
            "test": self.test.as_dict(),
            "baseline": self.baseline.as_dict(),
            "margins": self.margins(),
            "ablations": self.ablations,
        }


def run_probe(ds: Dataset, config: TrainConfig = TrainConfig(), ablate_bit0: bool = False) -> ProbeReport:
    """Train, evaluate against the density baseline, and optionally retrain without the parity bit."""
    model = train_logistic(ds, config)
    baseline = baseline_metrics(ds, "test")
    report = ProbeReport(
        task=ds.task,
        N=ds.N,
        split=ds.split,
        seed=config.seed,
        train=evaluate(model, ds, "train"),
        test=evaluate(model, ds, "test"),
        baseline=baseline,
        learning_curve=model.loss_history,
    )
    if ablate_bit0:
        ablated = ds.ablate(["bit0"])
        test = evaluate(train_logistic(ablated, config), ablated, "test")
        report.ablations.append(
            {
                "removed": ["bit0"],
                "test": test.as_dict(),
                "accuracy_margin": test.accuracy - baseline.accuracy,
                "log_loss_gain_bits": baseline.log_loss_bits - test.log_loss_bits,
            }
        )
    margins = report.margins()
    logger.info(
        f"probe {ds.task.value}/{ds.split.value}: test acc {report.test.accuracy:.4f} vs baseline "
        f"{baseline.accuracy:.4f}, log-loss gain {margins['log_loss_gain_bits']:.4f} bits"
    )
    return report
