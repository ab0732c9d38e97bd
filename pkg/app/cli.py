"""
Command-line entry point.

    usdn-sim simulate --scenario tracks.cfg --seeds 10 --out runs/tracks
    usdn-sim stats --in runs/tracks
    usdn-sim schedule-dump --scenario tracks.cfg
    usdn-sim compare --seeds 1,2,3 --out runs/compare
"""
from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from app.config import settings
from app.presets import preset_scenario
from app.schemas.report import FlowStats
from app.schemas.scenario import Mode, Scenario
from app.services.experiment import compare_modes, recompute_stats, run_experiment
from app.services.network import Network
from app.services.scenario import load_scenario, with_overrides

logger = logging.getLogger(__name__)


def parse_seeds(text: str) -> list[int]:
    """`n` means seeds 1..n; a comma list is taken literally."""
    text = text.strip()
    try:
        if "," in text:
            seeds = [int(part) for part in text.split(",") if part.strip()]
        else:
            count = int(text)
            if count < 1:
                raise ValueError
            seeds = list(range(1, count + 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be a positive count or a comma list, got {text!r}") from None
    if not seeds or any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError(f"invalid seeds {text!r}")
    return seeds


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _load(args: argparse.Namespace) -> Scenario:
    if args.scenario is not None:
        scenario = load_scenario(args.scenario)
    elif args.preset is not None:
        scenario = preset_scenario(args.preset)
    else:
        raise ValueError("either --scenario or --preset is required")
    return with_overrides(scenario, duration=getattr(args, "duration", None))


def _format_stats(rows: Sequence[FlowStats]) -> str:
    def fmt(v: float | None, spec: str = ".2f") -> str:
        return "-" if v is None else format(v, spec)

    lines = [f"{'class':<8} {'sent':>6} {'deliv':>6} {'pdr':>6} {'mean':>9} {'p50':>9} {'p95':>9} {'jitter':>9}"]
    for s in rows:
        lines.append(
            f"{s.flow_class:<8} {s.n_sent:>6} {s.n_delivered:>6} {fmt(s.pdr, '.3f'):>6} "
            f"{fmt(s.latency_mean_ms):>9} {fmt(s.latency_p50_ms):>9} {fmt(s.latency_p95_ms):>9} {fmt(s.jitter_ms):>9}"
        )
    return "\n".join(lines)


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _load(args)
    seeds = args.seeds or parse_seeds(str(settings.default_seeds))
    out = args.out or settings.output_dir / scenario.mode.value
    report = run_experiment(scenario, seeds, out, workers=args.workers or settings.workers)
    for m in report.summary:
        if m.metric in ("latency_mean_ms", "jitter_ms", "pdr") and m.mean is not None:
            print(f"{m.mode} {m.flow_class:<8} {m.metric:<16} {m.mean:10.3f} ± {m.stddev:.3f} (n={m.n_runs})")
    print(f"artifacts written to {out}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    for name, rows in recompute_stats(args.in_dir).items():
        print(f"[{name}]")
        print(_format_stats(rows))
    return 0


def cmd_schedule_dump(args: argparse.Namespace) -> int:
    network = Network(_load(args))
    print(network.slotframe.render_grid())
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = _load(args) if args.scenario or args.preset else preset_scenario(Mode.NO_SDN_RPL)
    seeds = args.seeds or parse_seeds(str(settings.default_seeds))
    out = args.out or settings.output_dir / "compare"
    report = compare_modes(scenario, seeds, out, workers=args.workers or settings.workers)
    for verdict in report.verdicts:
        status = {True: "PASS", False: "FAIL", None: "N/A "}[verdict.passed]
        print(f"{status} {verdict.check}: {verdict.detail}")
    print(f"artifacts written to {out}")
    return 0


def _scenario_args(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--scenario", type=Path, help="scenario file")
    source.add_argument("--preset", choices=[m.value for m in Mode], help="built-in scenario for a mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="usdn-sim", description="TSCH + SDN track slicing simulator")
    parser.add_argument("--log-level", default=None, help="overrides USDN_SIM_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run one scenario over several seeds")
    _scenario_args(simulate)
    simulate.add_argument("--seeds", type=parse_seeds, help="count (1..n) or comma list")
    simulate.add_argument("--out", type=Path, help="output directory")
    simulate.add_argument("--duration", type=float, help="measured seconds after warm-up")
    simulate.add_argument("--workers", type=int, help="parallel seed processes")
    simulate.set_defaults(func=cmd_simulate)

    stats = sub.add_parser("stats", help="recompute flow statistics from record CSVs")
    stats.add_argument("--in", dest="in_dir", type=Path, required=True)
    stats.set_defaults(func=cmd_stats)

    dump = sub.add_parser("schedule-dump", help="print the base slotframe grid")
    _scenario_args(dump)
    dump.set_defaults(func=cmd_schedule_dump)

    compare = sub.add_parser("compare", help="run NoSdnRpl, SdnShared and SdnTracks and check orderings")
    _scenario_args(compare)
    compare.add_argument("--seeds", type=parse_seeds)
    compare.add_argument("--out", type=Path)
    compare.add_argument("--duration", type=float)
    compare.add_argument("--workers", type=int)
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging((args.log_level or settings.log_level).upper())
        return args.func(args)
    except (ValueError, LookupError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
