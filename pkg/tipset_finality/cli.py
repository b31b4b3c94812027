"""Command-line interface: simulate traces, compute reports, sweep fullness, validate."""

import argparse
import csv
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, TextIO, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from . import __version__
from .actor import actor_report
from .chain import (
    ACTOR_VIEW,
    NODE_VIEW,
    REPORT_HEADER,
    ChainTrace,
    FinalityReport,
    load_trace,
    write_report,
    write_trace,
)
from .config import CalculatorConfig, NetworkParams, TruncationConfig, load_config
from .errors import DegenerateConditionError, FinalityError
from .node import node_report
from .oracle import CheckResult, run_validation
from .simulate import MAX_SEED, SimConfig, derive_seed, generate_trace

logger = logging.getLogger("tipset_finality")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_VALIDATION = 4

SUMMARY_HEADER = ("fullness", "settlement", "view", "median_error_probability", "entries")


def _split_list(v):
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    if isinstance(v, (int, float)):
        return [v]
    return v


class RunManifest(BaseModel):
    """Everything one CLI invocation needs, validated up front."""

    command: Literal["simulate", "compute", "sweep", "validate"]

    params: NetworkParams = Field(
        default_factory=NetworkParams,
        description="Network model parameters"
    )

    trunc: TruncationConfig = Field(
        default_factory=TruncationConfig,
        description="Truncation bounds"
    )

    trace: Optional[Path] = Field(
        None,
        description="Input trace (compute)"
    )

    out: Optional[Path] = Field(
        None,
        description="Output file, or directory for simulate"
    )

    fmt: Literal["csv", "json"] = Field(
        "csv",
        description="Output format"
    )

    seed: int = Field(
        0,
        ge=0,
        le=MAX_SEED,
        description="Base seed; runs and checks derive child seeds from it"
    )

    settlements: List[int] = Field(
        default_factory=lambda: [30],
        description="Settlement times c - s to report"
    )

    view: Literal["node", "actor", "both"] = Field(
        "node",
        description="Which calculator(s) to run"
    )

    fullness: List[float] = Field(
        default_factory=lambda: [0.96],
        description="Chain fullness values for simulate/sweep"
    )

    rounds: int = Field(
        40_000,
        ge=1,
        description="Rounds per simulated trace"
    )

    runs: int = Field(
        7,
        ge=1,
        description="Independent traces per fullness"
    )

    workers: int = Field(
        1,
        ge=1,
        description="Threads for per-round evaluation"
    )

    trials: int = Field(
        100_000,
        ge=1,
        description="Monte-Carlo trials for validate"
    )

    inject_fault: bool = Field(
        False,
        description="Perturb one bpz entry by 1e-6 to exercise the validator"
    )

    range_sum: bool = Field(
        False,
        description="Use the range-sum bpz envelope in the actor view"
    )

    @field_validator("settlements", "fullness", mode="before")
    @classmethod
    def coerce_list(cls, v):
        """Accept comma-separated string or array."""
        return _split_list(v)

    @field_validator("settlements")
    @classmethod
    def check_settlements(cls, v):
        if not v:
            raise ValueError("at least one settlement is required")
        if any(s < 1 for s in v):
            raise ValueError(f"settlement values must be at least 1, got {v}")
        return v

    @field_validator("fullness")
    @classmethod
    def check_fullness(cls, v):
        if not v:
            raise ValueError("at least one fullness value is required")
        if any(not 0 <= a <= 1.2 for a in v):
            raise ValueError(f"fullness values must lie in [0, 1.2], got {v}")
        return v

    @model_validator(mode="after")
    def check_inputs(self):
        if self.command == "compute":
            if self.trace is None:
                raise ValueError("compute needs --trace")
            if not self.trace.exists():
                raise ValueError(f"trace file not found: {self.trace}")
        return self

    @property
    def views(self) -> Tuple[str, ...]:
        if self.view == "both":
            return (NODE_VIEW, ACTOR_VIEW)
        return (self.view,)


def get_log_path() -> Path:
    """
    Determine the log file path.

    Priority:
    1. TIPSET_FINALITY_LOG env var (explicit path)
    2. XDG_DATA_HOME/tipset-finality/cli.log
    3. ~/.local/share/tipset-finality/cli.log (fallback)
    """
    if log_path := os.environ.get("TIPSET_FINALITY_LOG"):
        return Path(log_path)

    data_home = os.environ.get("XDG_DATA_HOME", Path.home() / ".local" / "share")
    log_dir = Path(data_home) / "tipset-finality"
    log_dir.mkdir(parents=True, exist_ok=True)

    return log_dir / "cli.log"


def configure_logging(level_name: str, log_file: bool = True):
    level = getattr(logging, level_name.upper(), logging.INFO)
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.insert(0, logging.FileHandler(get_log_path()))
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--byzantine-fraction", type=float, help="adversarial share f (default 0.3)")
    common.add_argument("--blocks-per-round", type=float, help="expected blocks per round e (default 5)")
    common.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    common.add_argument("--out", type=Path, help="output path")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, help="threads for per-round evaluation")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--no-log-file", action="store_true", help="log to stderr only")

    trunc = common.add_argument_group("truncation")
    trunc.add_argument("--max-k-lb", type=int)
    trunc.add_argument("--max-k-m", type=int)
    trunc.add_argument("--min-i-l", type=int,
                       help="smallest lead window index; 0 adds the one-round window [s, s], "
                            "which the Monte-Carlo soundness check needs")
    trunc.add_argument("--max-i-l", type=int)
    trunc.add_argument("--max-i-m", type=int)
    trunc.add_argument("--floor", type=float, help="early-stop floor (default 1e-25)")
    return common


def _add_report_args(parser: argparse.ArgumentParser):
    parser.add_argument("--settlement", default="30", help="settlement time(s), e.g. 20,40")
    parser.add_argument("--view", choices=("node", "actor", "both"), default="node")
    parser.add_argument("--bpz-range-sum", action="store_true",
                        help="actor view: range-sum bpz envelope instead of the exact law")


def _add_sim_args(parser: argparse.ArgumentParser, fullness: str):
    parser.add_argument("--fullness", default=fullness, help="chain fullness value(s)")
    parser.add_argument("--rounds", type=int, default=40_000)
    parser.add_argument("--runs", type=int, default=7)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tipset-finality",
        description=(
            "Error-probability bounds for tipset finality. The honest advantage "
            "of target round s at round c counts blocks in rounds s+1..c."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    simulate = sub.add_parser("simulate", parents=[common], help="generate synthetic traces")
    _add_sim_args(simulate, "0.96")

    compute = sub.add_parser("compute", parents=[common], help="error probabilities for a trace")
    compute.add_argument("--trace", type=Path, required=True)
    _add_report_args(compute)

    sweep = sub.add_parser("sweep", parents=[common], help="reports across chain fullness values")
    _add_sim_args(sweep, "0.80,0.85,0.90,0.95,1.00")
    _add_report_args(sweep)

    validate = sub.add_parser("validate", parents=[common], help="run the oracle checks")
    validate.add_argument("--trials", type=int, default=100_000)
    validate.add_argument("--inject-fault", action="store_true",
                          help="perturb one bpz entry by 1e-6; the run must fail")
    return parser


_NETWORK_FLAGS = {
    "byzantine_fraction": "byzantine_fraction",
    "blocks_per_round": "blocks_per_round_target",
}

_TRUNC_FLAGS = {
    "max_k_lb": "max_k_lb",
    "max_k_m": "max_k_m",
    "min_i_l": "min_i_l",
    "max_i_l": "max_i_l",
    "max_i_m": "max_i_m",
    "floor": "early_stop_floor",
}


def _overrides(args: argparse.Namespace, flags: Dict[str, str]) -> Dict:
    return {
        field: getattr(args, flag)
        for flag, field in flags.items()
        if getattr(args, flag, None) is not None
    }


def manifest_from_args(args: argparse.Namespace, config: CalculatorConfig) -> RunManifest:
    """
    Merge parsed flags over the loaded configuration.

    Raises:
        pydantic.ValidationError: If any value violates its constraints
    """
    network = NetworkParams(**{**config.network.model_dump(), **_overrides(args, _NETWORK_FLAGS)})
    trunc = TruncationConfig(**{**config.truncation.model_dump(), **_overrides(args, _TRUNC_FLAGS)})
    values = {
        "command": args.command,
        "params": network,
        "trunc": trunc,
        "out": args.out,
        "fmt": args.fmt,
        "seed": args.seed,
        "workers": args.workers if args.workers is not None else config.workers,
    }
    for name in ("trace", "view", "fullness", "rounds", "runs", "trials", "inject_fault"):
        if getattr(args, name, None) is not None:
            values[name] = getattr(args, name)
    if getattr(args, "settlement", None) is not None:
        values["settlements"] = args.settlement
    if getattr(args, "bpz_range_sum", None) is not None:
        values["range_sum"] = args.bpz_range_sum
    return RunManifest(**values)


def simulated_trace(manifest: RunManifest, fullness: float, run: int) -> ChainTrace:
    """Trace `run` at `fullness`; the same run index shares its seed across fullness values."""
    return generate_trace(SimConfig(
        fullness=fullness,
        rounds=manifest.rounds,
        seed=derive_seed(manifest.seed, run),
        blocks_per_round_target=manifest.params.blocks_per_round_target,
    ))


def build_report(trace: ChainTrace, manifest: RunManifest) -> FinalityReport:
    """Reports for every requested settlement and view, sorted by (round, settlement, view)."""
    report = FinalityReport()
    for settlement in manifest.settlements:
        for view in manifest.views:
            if view == NODE_VIEW:
                part = node_report(trace, settlement, manifest.params, manifest.trunc, manifest.workers)
            else:
                part = actor_report(
                    trace, settlement, manifest.params, manifest.trunc,
                    manifest.workers, manifest.range_sum,
                )
            logger.info(f"{view} view, settlement {settlement}: median {part.median_error():.3e}")
            report.extend(part)
    return report.sorted()


def cmd_simulate(manifest: RunManifest) -> List[Path]:
    out_dir = manifest.out or Path(".")
    written = []
    for fullness in manifest.fullness:
        for run in range(manifest.runs):
            trace = simulated_trace(manifest, fullness, run)
            path = write_trace(trace, out_dir / f"trace_{fullness:.2f}_{run}.{manifest.fmt}", manifest.fmt)
            print(f"fullness {fullness:.2f} run {run}: mean tipset size {trace.mean_tipset_size():.4f} -> {path}")
            written.append(path)
    logger.info(f"Wrote {len(written)} traces to {out_dir}")
    return written


def _emit(manifest: RunManifest, write) -> Optional[Path]:
    if manifest.out is None:
        write(sys.stdout)
        return None
    manifest.out.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest.out, "w", encoding="utf-8", newline="") as f:
        write(f)
    logger.info(f"Wrote {manifest.out}")
    return manifest.out


def cmd_compute(manifest: RunManifest) -> FinalityReport:
    trace = load_trace(manifest.trace)
    logger.info(f"Computing {manifest.view} view for {len(trace)} rounds from {manifest.trace}")
    report = build_report(trace, manifest)
    _emit(manifest, lambda stream: write_report(report, stream, manifest.fmt))
    return report


def summarize(rows: Dict[Tuple[float, int, str], List[float]]) -> List[Tuple]:
    return [
        (f"{fullness:.2f}", settlement, view, format(float(np.median(values)), ".17g"), len(values))
        for (fullness, settlement, view), values in sorted(rows.items())
    ]


def summary_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}_summary.csv")


def cmd_sweep(manifest: RunManifest) -> List[Tuple]:
    """
    Long-format rows `fullness,run,<report columns>` plus a median summary per
    (fullness, settlement, view) written next to the main output.
    """
    out = manifest.out or Path("sweep.csv")
    medians: Dict[Tuple[float, int, str], List[float]] = {}
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("fullness", "run") + REPORT_HEADER)
        for fullness in manifest.fullness:
            for run in range(manifest.runs):
                trace = simulated_trace(manifest, fullness, run)
                try:
                    report = build_report(trace, manifest)
                except DegenerateConditionError as e:
                    logger.warning(f"Skipping fullness {fullness:.2f} run {run}: {e}")
                    continue
                for entry in report:
                    writer.writerow((f"{fullness:.2f}", run) + entry.to_row())
                    key = (fullness, entry.settlement, entry.view)
                    medians.setdefault(key, []).append(entry.error_probability)

    summary = summarize(medians)
    with open(summary_path(out), "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(summary)
    for row in summary:
        print(",".join(str(x) for x in row))
    logger.info(f"Wrote {out} and {summary_path(out)}")
    return summary


def print_checks(results: Sequence[CheckResult], stream: TextIO):
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{status} {r.name}: max delta {r.max_delta:.3e} (tolerance {r.tolerance:.1e})"
        if r.detail:
            line += f" [{r.detail}]"
        print(line, file=stream)


def cmd_validate(manifest: RunManifest) -> bool:
    config = CalculatorConfig(network=manifest.params, truncation=manifest.trunc, workers=manifest.workers)
    results = run_validation(config, manifest.trials, manifest.seed, manifest.inject_fault)
    print_checks(results, sys.stdout)
    return all(r.passed for r in results)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        configure_logging(args.log_level or config.log_level, log_file=not args.no_log_file)
        manifest = manifest_from_args(args, config)
        logger.info(f"Running {manifest.command}")

        if manifest.command == "simulate":
            cmd_simulate(manifest)
        elif manifest.command == "compute":
            cmd_compute(manifest)
        elif manifest.command == "sweep":
            cmd_sweep(manifest)
        elif not cmd_validate(manifest):
            logger.error("Validation failed")
            return EXIT_VALIDATION
    except DegenerateConditionError as e:
        logger.error(f"Numerical degeneracy: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FinalityError, ValidationError, ValueError, OSError) as e:
        logger.error(f"Input error: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def run():
    """Console-script entry point."""
    sys.exit(main())
