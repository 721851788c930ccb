"""
Command-line interface.

    python -m src.cli simulate --n-qubits 3 --M 5 --scale 3 --out lam3.csv
    python -m src.cli mitigate lam1.csv lam3.csv lam5.csv --strategy richardson
    python -m src.cli select-nversion a.csv b.csv c.csv
    python -m src.cli select-consistency lam1.csv lam3.csv lam5.csv --L 2
    python -m src.cli sweep --preset nversion_experiment --out results/
    python -m src.cli report results/summary.json --format table

Invalid input exits with status 2 and the reason on stderr.
"""
import argparse
import logging
import sys
from pathlib import Path

from src.config import get_settings
from src.services.circuits import Amplification, Boundary, TFIParams, amplify, build_trotter_tfi
from src.services.distributions import Distribution, QuasiDistribution, dumps_distribution, loads_distribution
from src.services.estimator import empirical_distribution, sample_counts
from src.services.extrapolate import (
    BinFlag,
    PostprocessMode,
    Strategy,
    StrategyKind,
    mitigate_distribution,
    postprocess,
)
from src.services.harness import ExperimentConfig, Preset, run_sweep
from src.services.redis import get_run_cache
from src.services.reporting import (
    ReportFormat,
    consistency_table,
    load_records,
    load_summaries,
    nversion_table,
    report,
    write_results,
)
from src.services.select import NamedDistribution, consistency_select_per_bin, nversion_select
from src.services.simcore import NoiseModel, output_distribution, simulate

__all__ = ["main"]

logger = logging.getLogger(__name__)


def _read_distribution(path: str) -> tuple[Distribution | QuasiDistribution, float]:
    """Normalized distribution when possible, quasi-distribution otherwise."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return loads_distribution(text)
    except ValueError:
        return loads_distribution(text, quasi=True)


def _read_scaled(paths: list[str]) -> dict[float, Distribution | QuasiDistribution]:
    dists: dict[float, Distribution | QuasiDistribution] = {}
    for path in paths:
        dist, scale = _read_distribution(path)
        if scale in dists:
            raise ValueError(f"Scale factor {scale:g} appears in more than one file ({path})")
        dists[scale] = dist
    return dists


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text)


# =============================================================================
# Subcommands
# =============================================================================

def cmd_simulate(args) -> None:
    params = TFIParams(
        n_qubits=args.n_qubits, J=args.J, B=args.B, t=args.t, M=args.M, boundary=args.boundary,
    )
    noise = NoiseModel(eps1=args.eps1, eps2=args.eps2, readout_flip=args.readout)
    circuit, noise = amplify(build_trotter_tfi(params), noise, args.scale, args.amplification)
    dist = output_distribution(simulate(circuit, noise), noise.readout_flip)
    if args.shots:
        dist = empirical_distribution(sample_counts(dist, args.shots, args.seed))
    _emit(dumps_distribution(dist, scale=args.scale), args.out)


def cmd_mitigate(args) -> None:
    result = mitigate_distribution(
        Strategy(kind=args.strategy, n_points=args.n_points),
        _read_scaled(args.files),
        fallback=Strategy(kind=args.fallback),
    )
    fallbacks = sorted(z for z, f in result.flags.items() if f is BinFlag.FALLBACK)
    if fallbacks:
        logger.warning("%d bins used the %s fallback: %s", len(fallbacks), args.fallback.value, ", ".join(fallbacks))
    _emit(dumps_distribution(postprocess(result.quasi, args.postprocess), scale=0), args.out)


def cmd_select_nversion(args) -> None:
    candidates = [
        NamedDistribution(name=Path(path).stem, distribution=_read_distribution(path)[0])
        for path in args.files
    ]
    nv = nversion_select(candidates)
    text = nv.model_dump_json(indent=2) + "\n" if args.format is ReportFormat.JSON else nversion_table(nv)
    _emit(text, args.out)


def cmd_select_consistency(args) -> None:
    selection = consistency_select_per_bin(
        _read_scaled(args.files),
        args.L,
        args.strategies,
        report_value=args.report_value,
        mode=args.postprocess,
    )
    if args.format is ReportFormat.JSON:
        text = selection.model_dump_json(indent=2) + "\n"
    else:
        text = consistency_table(selection)
    _emit(text, args.out)


def _sweep_config(args) -> ExperimentConfig:
    """Preset (or full scale) first, then the YAML file, then explicit flags."""
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers

    if args.preset:
        base = ExperimentConfig.preset(args.preset, full_scale=args.full_scale)
    elif args.full_scale:
        base = ExperimentConfig.full_scale()
    else:
        base = ExperimentConfig()
    if args.config:
        from_file = ExperimentConfig.from_yaml(args.config).model_dump(exclude_unset=True)
        overrides = {**from_file, **overrides}
    return ExperimentConfig(**{**base.model_dump(), **overrides})


def cmd_sweep(args) -> None:
    config = _sweep_config(args)
    result = run_sweep(config, cache=get_run_cache())
    out_dir = args.out or f"{get_settings().results_dir}/{config.fingerprint()}"
    write_results(result.records, result.summaries, out_dir)
    sys.stdout.write(report(result.summaries, args.format))


def cmd_report(args) -> None:
    text = Path(args.file).read_text(encoding="utf-8")
    try:
        data = load_records(text)
    except ValueError:
        data = load_summaries(text)
    _emit(report(data, args.format), args.out)


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qem",
        description="Noisy circuit simulation, zero-noise extrapolation and strategy selection",
    )
    parser.add_argument("--log-level", default=None, help="Overrides Settings.log_level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Simulate one Trotterized TFI circuit into a distribution file")
    p.add_argument("--n-qubits", type=int, default=3)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--M", type=int, default=5)
    p.add_argument("--boundary", type=Boundary, choices=list(Boundary), default=Boundary.OPEN)
    p.add_argument("--scale", type=int, default=1, help="Odd noise scale factor")
    p.add_argument("--amplification", type=Amplification, choices=list(Amplification), default=Amplification.FOLD)
    p.add_argument("--eps1", type=float, default=NoiseModel().eps1)
    p.add_argument("--eps2", type=float, default=NoiseModel().eps2)
    p.add_argument("--readout", type=float, default=NoiseModel().readout_flip)
    p.add_argument("--shots", type=int, default=None, help="Sample shots instead of the exact diagonal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="Output file (stdout when omitted)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("mitigate", help="Extrapolate per-λ distribution files to zero noise")
    p.add_argument("files", nargs="+", help="Distribution files, one per scale factor")
    p.add_argument("--strategy", type=StrategyKind, choices=list(StrategyKind), required=True)
    p.add_argument("--n-points", type=int, default=None, help="Use only the n smallest λ")
    p.add_argument("--fallback", type=StrategyKind, choices=list(StrategyKind), default=StrategyKind.LINEAR)
    p.add_argument("--postprocess", type=PostprocessMode, choices=list(PostprocessMode),
                   default=PostprocessMode.CLIP_RENORM)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_mitigate)

    p = sub.add_parser("select-nversion", help="N-version selection over 3 or more distribution files")
    p.add_argument("files", nargs="+")
    p.add_argument("--format", type=ReportFormat, choices=[ReportFormat.TABLE, ReportFormat.JSON],
                   default=ReportFormat.TABLE)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_select_nversion)

    p = sub.add_parser("select-consistency", help="Per-bin consistency selection over per-λ files")
    p.add_argument("files", nargs="+")
    p.add_argument("--L", type=int, default=2, help="Subset size")
    p.add_argument("--strategies", type=StrategyKind, nargs="+", choices=list(StrategyKind),
                   default=[StrategyKind.LINEAR, StrategyKind.RICHARDSON, StrategyKind.EXPONENTIAL])
    p.add_argument("--report-value", choices=["full_fit", "subset_mean"], default="full_fit")
    p.add_argument("--postprocess", type=PostprocessMode, choices=list(PostprocessMode),
                   default=PostprocessMode.CLIP_RENORM)
    p.add_argument("--format", type=ReportFormat, choices=[ReportFormat.TABLE, ReportFormat.JSON],
                   default=ReportFormat.TABLE)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_select_consistency)

    p = sub.add_parser("sweep", help="Run the (J, B, M) ranking sweep")
    p.add_argument("--config", default=None, help="YAML file of ExperimentConfig fields")
    p.add_argument("--preset", type=Preset, choices=list(Preset), default=None)
    p.add_argument("--full-scale", action="store_true", help="10 qubits, J,B in 1..10, M in 5..10")
    p.add_argument("--seed", type=int, default=None, help="Master seed")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="Results directory")
    p.add_argument("--format", type=ReportFormat, choices=list(ReportFormat), default=ReportFormat.TABLE)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("report", help="Render records.json or summary.json")
    p.add_argument("file")
    p.add_argument("--format", type=ReportFormat, choices=list(ReportFormat), default=ReportFormat.TABLE)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or get_settings().log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args.handler(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
