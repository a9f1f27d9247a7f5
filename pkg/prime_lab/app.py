"""Command-line entry point: `python -m prime_lab <subcommand> [flags]`."""
import argparse
import logging
import math
import os
import sys
from dataclasses import asdict
from typing import Dict, Iterable, List, Optional, Sequence

from prime_lab import config as lab_config
from prime_lab.components import learnability, levin_lab, maxent, omega_stats, sieve_core
from prime_lab.components import report_writer as reports
from prime_lab.config import RunConfig
from prime_lab.errors import LabError

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
MAXENT_TABLE_MAX_K = 15


class _Shared:
    """Sieve products reused across the reports of one invocation."""

    def __init__(self, cfg: RunConfig, cache_dir: Optional[str] = None):
        self.cfg = cfg
        self.cache_dir = cache_dir
        self._ps: Optional[sieve_core.PrimeSet] = None
        self._segments: Optional[List[sieve_core.OmegaSegment]] = None

    @property
    def primes(self) -> sieve_core.PrimeSet:
        if self._ps is None:
            self._ps = sieve_core.sieve_primes(self.cfg.limit)
        return self._ps

    def segments(self) -> Iterable[sieve_core.OmegaSegment]:
        if self._segments is not None:
            return self._segments
        hi = self.cfg.limit + 1
        base = sieve_core.base_primes_for(hi)
        if self.cache_dir is None:
            return sieve_core.iter_omega_segments(2, hi, base, self.cfg.segment_size, self.cfg.workers)
        self._segments = sieve_core.load_or_sieve_range(
            2, hi, base, self.cfg.segment_size, self.cfg.workers, self.cache_dir
        )
        return self._segments


def _wants(cfg: RunConfig, kind: str) -> bool:
    return cfg.format in (kind, "both")


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.output_dir, name)


def _checkpoint_ledgers(segments: Iterable[sieve_core.OmegaSegment], checkpoints: Sequence[int]):
    """Ledgers over [2, c] for each checkpoint c, from one ascending pass over the segments."""
    pending = sorted(checkpoints)
    ledger = omega_stats.MomentLedger()
    results: Dict[int, omega_stats.MomentLedger] = {}
    for segment in segments:
        while pending and segment.lo <= pending[0] < segment.hi:
            c = pending.pop(0)
            head = sieve_core.OmegaSegment(segment.lo, c + 1, segment.omega[: c + 1 - segment.lo])
            results[c] = omega_stats.accumulate(head, ledger)
        ledger = omega_stats.accumulate(segment, ledger)
    for c in pending:
        results[c] = ledger
    return results, ledger


##############################################################################
## Subcommands
##############################################################################
def cmd_sieve(cfg: RunConfig, shared: _Shared) -> None:
    ps = shared.primes
    _, ledger = _checkpoint_ledgers(shared.segments(), [])
    identity = sieve_core.omega_sum_identity(ps, cfg.limit)
    if identity != ledger.sum_omega:
        raise LabError(f"sum of omega {ledger.sum_omega} disagrees with sum of floor(N/p) {identity}")
    payload = {
        "N": cfg.limit,
        "pi_N": sieve_core.prime_count(ps, cfg.limit),
        "count": ledger.count,
        "sum_omega": ledger.sum_omega,
        "sum_floor_N_over_p": identity,
        "omega_hist": list(ledger.hist),
    }
    if _wants(cfg, "json"):
        reports.write_json(_out(cfg, f"sieve_{cfg.limit}.json"), payload, cfg.as_dict())
    if _wants(cfg, "csv"):
        rows = [(k, c) for k, c in enumerate(ledger.hist) if c]
        reports.write_csv(_out(cfg, f"sieve_{cfg.limit}.csv"), ["omega", "count"], rows, cfg.as_dict())
    logger.info(f"pi({cfg.limit}) = {payload['pi_N']}, sum of omega = {ledger.sum_omega}")


def cmd_ek(cfg: RunConfig, shared: _Shared) -> omega_stats.MomentLedger:
    segments = shared.segments()
    if cfg.ks_per_n:
        segments = list(segments)
    by_checkpoint, ledger = _checkpoint_ledgers(segments, cfg.ek_checkpoints())
    rows = []
    final = None
    for c in cfg.ek_checkpoints():
        report = omega_stats.erdos_kac_report(by_checkpoint[c], c, cfg.bins)
        rows.append(report.as_row())
        final = report
    if _wants(cfg, "json"):
        payload = {
            "checkpoints": rows,
            "omega_hist": list(ledger.hist),
            "histogram": [{"t": t, "empirical_cdf": e, "normal_cdf": p} for t, e, p in final.histogram],
        }
        if cfg.ks_per_n:
            payload["ks_per_n"] = omega_stats.ks_distance_per_n(segments)
        reports.write_json(_out(cfg, f"ek_{cfg.limit}.json"), payload, cfg.as_dict())
    if _wants(cfg, "csv"):
        reports.write_dict_rows(_out(cfg, f"ek_{cfg.limit}.csv"), rows, cfg.as_dict())
        reports.write_csv(
            _out(cfg, f"ek_hist_{cfg.limit}.csv"), ["t", "empirical_cdf", "normal_cdf"], final.histogram, cfg.as_dict()
        )
    return ledger


def cmd_maxent(cfg: RunConfig, shared: _Shared, ledger: Optional[omega_stats.MomentLedger] = None) -> None:
    if ledger is None:
        _, ledger = _checkpoint_ledgers(shared.segments(), [])
    report = maxent.maxent_report(cfg.limit, shared.primes, ledger, cfg.tail_cut)
    lam = report["lambda_used"]
    geometric = maxent.maxent_geometric(lam, cfg.tail_cut)
    poisson = maxent.poisson_pmf(lam, math.ceil(lam) + maxent.POISSON_MARGIN)
    empirical = maxent.empirical_pmf(ledger.hist)
    table = [
        (k, empirical.probabilities[k], geometric.probabilities[k], poisson.probabilities[k])
        for k in range(MAXENT_TABLE_MAX_K + 1)
    ]
    density_by_checkpoint = [
        asdict(maxent.prime_density_entropy_report(c, shared.primes)) for c in cfg.ek_checkpoints()
    ]
    if _wants(cfg, "json"):
        payload = dict(report)
        payload["density_by_checkpoint"] = density_by_checkpoint
        payload["pmf_table"] = [
            {"k": k, "empirical": e, "geometric": g, "poisson": p} for k, e, g, p in table
        ]
        reports.write_json(_out(cfg, "maxent.json"), payload, cfg.as_dict())
    if _wants(cfg, "csv"):
        reports.write_csv(_out(cfg, "maxent.csv"), ["k", "empirical", "geometric", "poisson"], table, cfg.as_dict())
        reports.write_dict_rows(_out(cfg, "maxent_density.csv"), density_by_checkpoint, cfg.as_dict())


def cmd_levin(cfg: RunConfig, shared: _Shared) -> None:
    machine = levin_lab.get_machine(cfg.machine)
    target = cfg.target or ""
    estimate = levin_lab.enumerate_mass(machine, cfg.max_len, cfg.workers)
    invariance = levin_lab.invariance_gap(cfg.n_max)

    payload = {
        "machine": machine.id.value,
        "cutoff_L": cfg.max_len,
        "target": target,
        "target_mass": estimate.mass(target),
        "kraft_total": estimate.total(),
        "kraft_ok": estimate.satisfies_kraft(),
        "invariance": {"c_measured": invariance.c_measured, "gap_by_length": list(invariance.gap_by_length)},
    }
    if machine.prefix_free:
        K = levin_lab.toy_complexity(machine, target)
        payload["K"] = K
        payload["shortest_program"] = levin_lab.shortest_program(machine, target)
        payload["coding_theorem_spearman"] = levin_lab.coding_theorem_correlation(
            machine, cfg.corr_max_len, cfg.corr_cutoff
        )
        print(f"machine={machine.id.value} target={target!r} K={K} program={payload['shortest_program']}")
    else:
        partial = levin_lab.divergence_partial_sum(target, cfg.max_len)
        payload["divergence_partial_sum"] = partial.value
        payload["shortest_length"] = partial.shortest
        print(f"machine={machine.id.value} target={target!r} not prefix-free: partial sum {partial.value} at L={cfg.max_len}")
    print(f"kraft total at L={cfg.max_len}: {estimate.total()} ({'ok' if payload['kraft_ok'] else 'exceeds 1'})")
    print(f"{'output':<{cfg.max_len + 2}} {'mass':>14}  2^-L numerator")
    for x, numerator, _, mass in estimate.rows()[: cfg.table_rows]:
        print(f"{x or '(empty)':<{cfg.max_len + 2}} {reports.fmt(mass):>14}  {numerator}")

    if _wants(cfg, "json"):
        reports.write_json(_out(cfg, "levin.json"), payload, cfg.as_dict())
    if _wants(cfg, "csv"):
        reports.write_csv(
            _out(cfg, "levin_mass.csv"),
            ["output", "numerator", "log2_denominator", "mass_float"],
            estimate.rows(),
            cfg.as_dict(),
        )
        reports.write_csv(
            _out(cfg, "invariance.csv"), ["n", "max_gap"], list(enumerate(invariance.gap_by_length)), cfg.as_dict()
        )


def cmd_learn(cfg: RunConfig, shared: _Shared) -> None:
    task = learnability.Task.parse(cfg.task)
    segments = list(shared.segments()) if task is learnability.Task.EK_SIGN else None
    ds = learnability.make_dataset(
        task,
        cfg.limit,
        learnability.SplitKind(cfg.split),
        cfg.seed,
        ps=shared.primes if task is learnability.Task.PRIME else None,
        segments=segments,
        train_frac=cfg.train_frac,
        engineered=cfg.engineered,
    )
    train_config = learnability.TrainConfig(
        lr=cfg.lr, epochs=cfg.epochs, l2=cfg.l2, batch=cfg.batch, seed=cfg.seed, log_every=cfg.log_every
    )
    report = learnability.run_probe(ds, train_config, ablate_bit0=cfg.ablate_bit0)
    stem = f"learn_{task.value}_{ds.split.value}"
    if _wants(cfg, "json"):
        reports.write_json(_out(cfg, f"{stem}.json"), report.as_dict(), cfg.as_dict())
    if _wants(cfg, "csv"):
        reports.write_csv(
            _out(cfg, f"{stem}_curve.csv"), ["epoch", "train_loss_bits"], list(enumerate(report.learning_curve)), cfg.as_dict()
        )


def cmd_all(cfg: RunConfig, shared: _Shared) -> None:
    cmd_sieve(cfg, shared)
    ledger = cmd_ek(cfg, shared)
    cmd_maxent(cfg, shared, ledger)
    cmd_levin(cfg, shared)
    cmd_learn(cfg, shared)


COMMANDS = {
    "sieve": cmd_sieve,
    "ek": cmd_ek,
    "maxent": cmd_maxent,
    "levin": cmd_levin,
    "learn": cmd_learn,
    "all": cmd_all,
}


##############################################################################
## Argument parsing
##############################################################################
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file overlaid on lab-config/config.yaml")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--limit", type=int, help="Upper end N of the integer range [2, N]")
    common.add_argument("--segment-size", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", dest="output_dir", help="Report directory")
    common.add_argument("--format", choices=lab_config.FORMATS)
    common.add_argument("--bins", type=int)
    common.add_argument("--ks-per-n", action="store_true", help="Also report KS with per-n centering ln ln n")
    common.add_argument("--machine", choices=[m.value for m in levin_lab.MachineId])
    common.add_argument("--max-len", type=int, help="Program length cutoff L for mass enumeration")
    common.add_argument("--target", help="Bitstring whose complexity and mass are reported")
    common.add_argument("--n-max", type=int, help="Longest string length in the invariance check")
    common.add_argument("--task", choices=["prime", "ek", "ek_sign"])
    common.add_argument("--split", choices=[s.value for s in learnability.SplitKind])
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--l2", type=float)
    common.add_argument("--batch", type=int, help="Mini-batch size, 0 for full batch")
    common.add_argument("--ablate-bit0", action="store_true", help="Also train without the parity bit")
    common.add_argument("--engineered", action="store_true", help="Add n mod 3 and n mod 5 one-hot features")

    parser = argparse.ArgumentParser(prog="prime-lab", description="Desk-scale prime statistics and toy algorithmic probability")
    sub = parser.add_subparsers(dest="subcommand", metavar="{" + ",".join(lab_config.SUBCOMMANDS) + "}")
    for name in lab_config.SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} report")
    return parser


def _setup_logging(level: str) -> None:
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    root = logging.getLogger()
    root.setLevel(level)
    for handler in root.handlers:
        handler.setLevel(level)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        config = lab_config.load_config(args.config)
    except (OSError, ValueError) as e:
        parser.print_usage(sys.stderr)
        print(f"prime-lab: error: {e}", file=sys.stderr)
        return 2
    _setup_logging(args.log_level or str(config["logging"]["level"]).upper())

    overrides = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config", "log_level")}
    try:
        cfg = lab_config.build_run_config(args.subcommand, config, overrides)
        reports.ensure_dir(cfg.output_dir)
        cache_dir = os.path.join(cfg.output_dir, "cache") if args.subcommand == "all" else None
        COMMANDS[args.subcommand](cfg, _Shared(cfg, cache_dir))
    except (LabError, OSError, ValueError) as e:
        logger.error(f"{args.subcommand} failed with error: {str(e)}")
        return 1
    logger.info(f"{args.subcommand} finished")
    return 0


def main() -> None:
    sys.exit(run())
