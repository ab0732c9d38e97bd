from __future__ import annotations

from dataclasses import dataclass

from app.models.schedule import FlowClass
from app.models.topology import NodeId

DELIVERED = "Delivered"

RECORD_COLUMNS = (
    "packet_id",
    "flow_class",
    "src",
    "dst",
    "enqueue_asn",
    "deliver_asn",
    "outcome",
    "hop_count",
    "track_hops",
    "ftq_cause",
)


@dataclass(slots=True)
class PacketRecord:
    """End-to-end provenance of one packet; outcome stays None until it terminates."""

    packet_id: int
    flow_class: FlowClass
    src: NodeId
    dst: NodeId
    enqueue_asn: int
    deliver_asn: int | None = None
    outcome: str | None = None
    hop_count: int = 0
    track_hops: int = 0
    ftq_cause: str | None = None

    @property
    def delivered(self) -> bool:
        return self.outcome == DELIVERED

    def latency_slots(self) -> int | None:
        return None if self.deliver_asn is None else self.deliver_asn - self.enqueue_asn

    def as_row(self) -> dict[str, object]:
        return {
            "packet_id": self.packet_id,
            "flow_class": self.flow_class.value,
            "src": self.src,
            "dst": self.dst,
            "enqueue_asn": self.enqueue_asn,
            "deliver_asn": "" if self.deliver_asn is None else self.deliver_asn,
            "outcome": self.outcome or "",
            "hop_count": self.hop_count,
            "track_hops": self.track_hops,
            "ftq_cause": self.ftq_cause or "",
        }

    @classmethod
    def from_row(cls, row: dict[str, str]) -> PacketRecord:
        return cls(
            packet_id=int(row["packet_id"]),
            flow_class=FlowClass(row["flow_class"]),
            src=int(row["src"]),
            dst=int(row["dst"]),
            enqueue_asn=int(row["enqueue_asn"]),
            deliver_asn=int(row["deliver_asn"]) if row["deliver_asn"] else None,
            outcome=row["outcome"] or None,
            hop_count=int(row["hop_count"]),
            track_hops=int(row["track_hops"]),
            ftq_cause=row["ftq_cause"] or None,
        )
