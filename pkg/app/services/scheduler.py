"""Base schedule: shared contention cells plus a latency-ordered best-effort staircase toward the root."""
import logging

from app.models.routing import Dag
from app.models.schedule import Cell, CellKind, Slotframe
from app.services.tracks import candidate_cells_for

logger = logging.getLogger(__name__)


def build_base_schedule(
    dag: Dag,
    slotframe_length: int = 61,
    channel_count: int = 16,
    shared_slots: int = 4,
) -> Slotframe:
    if not 0 <= shared_slots < slotframe_length:
        raise ValueError(f"shared_slots must be within [0, {slotframe_length}), got {shared_slots}")
    slotframe = Slotframe(slotframe_length, channel_count)
    for slot in range(shared_slots):
        slotframe.add_cell(Cell(slot, 0, CellKind.SHARED))

    # deepest first, so each parent's cell lands right after its child's
    upward_slot: dict[int, int] = {}
    for node in sorted((n for n in dag.nodes if n != dag.root), key=lambda n: (-dag.rank[n], n)):
        parent = dag.parent[node]
        child_slots = [upward_slot[c] for c in dag.children(node) if c in upward_slot]
        ingress = child_slots[0] if child_slots else slotframe_length - 1
        (slot, channel), = candidate_cells_for(slotframe, node, parent, ingress, 1)
        slotframe.add_cell(Cell(slot, channel, CellKind.TX_DEDICATED, (node, parent)))
        upward_slot[node] = slot
    logger.debug("base schedule: %d shared slots, upward cells %s", shared_slots, upward_slot)
    return slotframe
