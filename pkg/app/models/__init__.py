from app.models.record import PacketRecord
from app.models.schedule import Cell, CellKind, DropReason, FlowClass, Frame, Slotframe
from app.models.topology import CONTROLLER_ID, NodeId, Topology
from app.models.track import CellBundle, Track, TrackState

__all__ = [
    "CONTROLLER_ID",
    "Cell",
    "CellBundle",
    "CellKind",
    "DropReason",
    "FlowClass",
    "Frame",
    "NodeId",
    "PacketRecord",
    "Slotframe",
    "Topology",
    "Track",
    "TrackState",
]
