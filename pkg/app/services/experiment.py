"""
Experiment orchestration: one isolated Network per seed, artifacts per seed
directory, a serial cross-seed summary, and the three-mode comparison.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from app.config import settings
from app.models.schedule import DropReason, FlowClass
from app.repositories.records import (
    CONTROLLER_LOG_FILE,
    FLOW_STATS_FILE,
    RECORDS_FILE,
    RUN_FILE,
    SCHEDULE_FILE,
    SUMMARY_JSON,
    TRACKS_FILE,
    WARMUP_FILE,
    record_repo,
    seed_dir,
)
from app.schemas.report import ComparisonReport, ExperimentReport, FlowStats, RunReport, Verdict
from app.schemas.scenario import Mode, Scenario
from app.services.network import Network, RunOutcome
from app.services.stats import CONTROL, compute_all_flow_stats, drops_by_reason, summarize_runs

logger = logging.getLogger(__name__)

# relative slack for the "tracks restore application performance" check
RESTORE_TOLERANCE = 1.05
CONTROL_JITTER_RATIO = 2.0


def build_run_report(outcome: RunOutcome) -> RunReport:
    measured = outcome.measured
    return RunReport(
        mode=outcome.mode,
        seed=outcome.seed,
        slot_duration_ms=outcome.slot_duration_ms,
        warmup_end_asn=outcome.warmup_end_asn,
        end_asn=outcome.end_asn,
        flow_stats=compute_all_flow_stats(measured, outcome.slot_duration_ms),
        drops=drops_by_reason(measured),
        audit_violations=len(outcome.audit_violations),
        join_states=outcome.join_states,
        stale_nodes=outcome.stale_nodes,
        traffic_shape=outcome.traffic_shape,
        ftq_causes=outcome.ftq_causes,
    )


def run_seed(
    scenario: Scenario, seed: int, *, warmup_limit_s: float | None = None, audit: bool | None = None
) -> tuple[RunReport, RunOutcome]:
    logger.info("run %s seed %d: start", scenario.mode.value, seed)
    network = Network(
        scenario,
        seed,
        audit=(scenario.audit or settings.debug) if audit is None else audit,
        warmup_limit_s=settings.warmup_limit_s if warmup_limit_s is None else warmup_limit_s,
    )
    outcome = network.run()
    report = build_run_report(outcome)
    if outcome.audit_violations:
        logger.warning("seed %d: %d schedule audit violations", seed, len(outcome.audit_violations))
    if outcome.stale_nodes:
        logger.warning("seed %d: stale nodes in controller view: %s", seed, sorted(outcome.stale_nodes))
    logger.info(
        "run %s seed %d: done, %d packets, warm-up ended at %.1f s",
        scenario.mode.value,
        seed,
        len(outcome.records),
        outcome.warmup_end_asn * outcome.slot_duration_ms / 1000.0,
    )
    return report, outcome


def _run_seed_job(job: tuple[Scenario, int, float, bool | None]) -> tuple[RunReport, RunOutcome]:
    scenario, seed, warmup_limit_s, audit = job
    return run_seed(scenario, seed, warmup_limit_s=warmup_limit_s, audit=audit)


def write_run_artifacts(out_dir: Path, report: RunReport, outcome: RunOutcome) -> Path:
    directory = seed_dir(out_dir, outcome.seed)
    record_repo.write_records(directory / RECORDS_FILE, outcome.measured)
    record_repo.write_records(directory / WARMUP_FILE, outcome.warmup)
    record_repo.write_flow_stats(directory / FLOW_STATS_FILE, report.flow_stats)
    record_repo.write_json(directory / RUN_FILE, report)
    record_repo.write_text(directory / SCHEDULE_FILE, outcome.schedule_grid)
    record_repo.write_tracks(directory / TRACKS_FILE, outcome.tracks)
    record_repo.write_lines(directory / CONTROLLER_LOG_FILE, outcome.controller_log)
    return directory


def run_experiment(
    scenario: Scenario,
    seeds: Sequence[int],
    out_dir: Path | None = None,
    *,
    workers: int = 1,
    warmup_limit_s: float | None = None,
    audit: bool | None = None,
) -> ExperimentReport:
    """Run every seed, write per-seed artifacts when out_dir is given, then summarize serially."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    limit = settings.warmup_limit_s if warmup_limit_s is None else warmup_limit_s
    jobs = [(scenario, seed, limit, audit) for seed in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_seed_job, jobs))
    else:
        results = [_run_seed_job(job) for job in jobs]

    runs = []
    for report, outcome in results:
        runs.append(report)
        if out_dir is not None:
            write_run_artifacts(out_dir, report, outcome)
    experiment = ExperimentReport(
        mode=scenario.mode.value,
        seeds=seeds,
        runs=runs,
        summary=summarize_runs(scenario.mode.value, runs),
    )
    if out_dir is not None:
        record_repo.write_summary(out_dir, experiment.summary)
        record_repo.write_json(out_dir / SUMMARY_JSON, experiment)
        logger.info("wrote %d seed runs to %s", len(runs), out_dir)
    return experiment


def recompute_stats(in_dir: Path) -> dict[str, list[FlowStats]]:
    """Recompute FlowStats from the record CSVs under in_dir, keyed by seed directory name."""
    directories = record_repo.seed_dirs(in_dir)
    if not directories:
        raise FileNotFoundError(f"no {RECORDS_FILE} found under {in_dir}")
    result = {}
    for directory in directories:
        records = record_repo.read_records(directory / RECORDS_FILE)
        run_file = directory / RUN_FILE
        slot_ms = (
            float(record_repo.read_run(run_file)["slot_duration_ms"]) if run_file.is_file() else 10.0
        )
        stats = compute_all_flow_stats(records, slot_ms)
        record_repo.write_flow_stats(directory / FLOW_STATS_FILE, stats)
        result[directory.name] = stats
    return result


# --- three-mode comparison -------------------------------------------------


def _metric(exp: ExperimentReport, flow_class: str, metric: str) -> tuple[float, float] | None:
    summary = exp.metric(flow_class, metric)
    if summary is None or summary.mean is None:
        return None
    return summary.mean, summary.stddev or 0.0


def _drop_total(exp: ExperimentReport, classes: Sequence[str], reason: DropReason) -> int:
    return sum(run.drops.get(c, {}).get(reason.value, 0) for run in exp.runs for c in classes)


def evaluate_orderings(experiments: dict[str, ExperimentReport]) -> list[Verdict]:
    rpl = experiments[Mode.NO_SDN_RPL.value]
    shared = experiments[Mode.SDN_SHARED.value]
    tracks = experiments[Mode.SDN_TRACKS.value]
    app = FlowClass.APP.value
    verdicts = []

    for metric in ("latency_mean_ms", "jitter_ms"):
        a, b = _metric(shared, app, metric), _metric(rpl, app, metric)
        ok = None if a is None or b is None else a[0] - a[1] > b[0] + b[1]
        verdicts.append(
            Verdict(
                check=f"overhead raises App {metric}",
                passed=ok,
                detail=f"SdnShared {a} vs NoSdnRpl {b} (mean, stddev); bands must not overlap",
            )
        )
    a, b = _metric(shared, app, "pdr"), _metric(rpl, app, "pdr")
    verdicts.append(
        Verdict(
            check="overhead lowers App pdr",
            passed=None if a is None or b is None else a[0] < b[0],
            detail=f"SdnShared {a} vs NoSdnRpl {b}",
        )
    )

    for metric in ("latency_mean_ms", "jitter_ms"):
        a, b = _metric(tracks, app, metric), _metric(rpl, app, metric)
        verdicts.append(
            Verdict(
                check=f"tracks restore App {metric}",
                passed=None if a is None or b is None else a[0] <= b[0] * RESTORE_TOLERANCE,
                detail=f"SdnTracks {a} vs NoSdnRpl {b} x {RESTORE_TOLERANCE}",
            )
        )

    a, b = _metric(tracks, CONTROL, "latency_mean_ms"), _metric(shared, CONTROL, "latency_mean_ms")
    verdicts.append(
        Verdict(
            check="tracks lower control latency",
            passed=None if a is None or b is None else a[0] < b[0],
            detail=f"SdnTracks {a} vs SdnShared {b}",
        )
    )
    a, b = _metric(tracks, CONTROL, "jitter_ms"), _metric(shared, CONTROL, "jitter_ms")
    verdicts.append(
        Verdict(
            check="tracks cut control jitter",
            passed=None if a is None or b is None else a[0] * CONTROL_JITTER_RATIO <= b[0] and a[0] < b[0],
            detail=f"SdnTracks {a} vs SdnShared {b}; needs a {CONTROL_JITTER_RATIO}x reduction",
        )
    )
    overflow = _drop_total(tracks, (FlowClass.NSU.value, FlowClass.FTQ.value), DropReason.QUEUE_OVERFLOW)
    verdicts.append(
        Verdict(
            check="no control queue overflow on tracks",
            passed=overflow == 0,
            detail=f"{overflow} Nsu/Ftq QueueOverflow drops in SdnTracks",
        )
    )
    violations = sum(run.audit_violations for exp in experiments.values() for run in exp.runs)
    verdicts.append(
        Verdict(check="schedule conflict-free", passed=violations == 0, detail=f"{violations} audit violations")
    )
    return verdicts


def compare_modes(
    scenario: Scenario,
    seeds: Sequence[int],
    out_dir: Path | None = None,
    *,
    workers: int = 1,
    warmup_limit_s: float | None = None,
) -> ComparisonReport:
    """Run the same scenario in all three modes over the same seeds."""
    experiments = {}
    for mode in Mode:
        variant = scenario.model_copy(update={"mode": mode})
        target = out_dir / mode.value if out_dir is not None else None
        experiments[mode.value] = run_experiment(
            variant, seeds, target, workers=workers, warmup_limit_s=warmup_limit_s
        )
    report = ComparisonReport(seeds=list(seeds), experiments=experiments, verdicts=evaluate_orderings(experiments))
    if out_dir is not None:
        record_repo.write_json(out_dir / "comparison.json", report)
    for verdict in report.verdicts:
        level = logging.INFO if verdict.passed is not False else logging.WARNING
        logger.log(level, "%s: %s (%s)", verdict.check, verdict.passed, verdict.detail)
    return report
