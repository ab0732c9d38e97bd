import csv
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

from pydantic import BaseModel

from app.models.record import RECORD_COLUMNS, PacketRecord
from app.schemas.report import FLOW_STATS_COLUMNS, SUMMARY_COLUMNS, FlowStats, MetricSummary

logger = logging.getLogger(__name__)

TRACK_COLUMNS = ("track_id", "source", "destination", "state", "route", "slots")

RECORDS_FILE = "records.csv"
WARMUP_FILE = "warmup.csv"
FLOW_STATS_FILE = "flow_stats.csv"
RUN_FILE = "run.json"
SCHEDULE_FILE = "schedule.txt"
TRACKS_FILE = "tracks.csv"
CONTROLLER_LOG_FILE = "controller_log.jsonl"
SUMMARY_CSV = "summary.csv"
SUMMARY_JSON = "summary.json"


def seed_dir(root: Path, seed: int) -> Path:
    return root / f"seed-{seed}"


class RecordRepository:
    """Run artifacts on disk; every writer uses fixed column orders and "\\n" line endings."""

    def _write_csv(self, path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, object]]) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        return path

    def _read_csv(self, path: Path) -> list[dict[str, str]]:
        with path.open(newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))

    def write_records(self, path: Path, records: Iterable[PacketRecord]) -> Path:
        return self._write_csv(path, RECORD_COLUMNS, (r.as_row() for r in records))

    def read_records(self, path: Path) -> list[PacketRecord]:
        rows = self._read_csv(path)
        if rows and tuple(rows[0]) != RECORD_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {tuple(rows[0])}")
        return [PacketRecord.from_row(row) for row in rows]

    def write_flow_stats(self, path: Path, stats: Iterable[FlowStats]) -> Path:
        return self._write_csv(path, FLOW_STATS_COLUMNS, (s.as_row() for s in stats))

    def write_summary(self, root: Path, summary: Sequence[MetricSummary]) -> Path:
        rows = ({k: "" if v is None else v for k, v in m.model_dump().items()} for m in summary)
        return self._write_csv(root / SUMMARY_CSV, SUMMARY_COLUMNS, rows)

    def write_tracks(self, path: Path, rows: Iterable[Mapping[str, object]]) -> Path:
        return self._write_csv(path, TRACK_COLUMNS, rows)

    def write_json(self, path: Path, model: BaseModel) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path

    def write_text(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        return path

    def write_lines(self, path: Path, lines: Iterable[str]) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
        return path

    def read_run(self, path: Path) -> dict[str, object]:
        return json.loads(path.read_text(encoding="utf-8"))

    def seed_dirs(self, root: Path) -> list[Path]:
        """seed-<n> directories under an experiment root (or root itself if it holds records)."""
        if (root / RECORDS_FILE).is_file():
            return [root]
        dirs = [p for p in root.glob("seed-*") if (p / RECORDS_FILE).is_file()]
        return sorted(dirs, key=lambda p: int(p.name.split("-", 1)[1]) if p.name[5:].isdigit() else -1)


record_repo = RecordRepository()
