import pytest

from app.models.flowtable import build_header
from app.models.schedule import (
    BEST_EFFORT,
    Cell,
    CellKind,
    DropReason,
    FlowClass,
    Frame,
    ScheduleConflictError,
    Slotframe,
)
from app.services.engine import RngStreams
from app.services.mac import OutcomeKind, TschMac, hop_channel
from app.services.radio import build_linear_topology, build_topology
from app.services.routing import build_dag
from app.services.scheduler import build_base_schedule


def make_frame(packet_id=1, origin=5, destination=0, payload=20):
    return Frame(
        packet_id=packet_id,
        flow_class=FlowClass.APP,
        origin=origin,
        destination=destination,
        payload_bytes=payload,
        header=build_header(FlowClass.APP, destination, origin, packet_id),
        created_asn=0,
    )


def test_hop_channel_examples():
    assert hop_channel(0, 0, 16) == 0
    assert hop_channel(17, 3, 16) == 4
    assert hop_channel(5, 2, 4, hop_sequence=[11, 15, 20, 25]) == 25


def test_frame_budget():
    make_frame(payload=102)
    with pytest.raises(ValueError):
        make_frame(payload=103)


def test_base_schedule_staircase(base_schedule):
    assert base_schedule.shared_slots == frozenset({0, 1, 2, 3})
    upward = {c.owner_link: c.slot_offset for c in base_schedule.cells if c.kind == CellKind.TX_DEDICATED}
    assert upward == {(5, 4): 4, (4, 3): 5, (3, 2): 6, (2, 1): 7, (1, 0): 8}
    assert base_schedule.audit() == []


def test_half_duplex_and_shared_slot_conflicts(base_schedule):
    with pytest.raises(ScheduleConflictError):
        base_schedule.add_cell(Cell(5, 3, CellKind.TX_DEDICATED, (3, 4)))
    with pytest.raises(ScheduleConflictError):
        base_schedule.add_cell(Cell(1, 2, CellKind.TX_DEDICATED, (1, 2)))
    with pytest.raises(ScheduleConflictError):
        base_schedule.add_cell(Cell(4, 0, CellKind.TX_DEDICATED, (1, 2)))


def test_remove_restores_snapshot(base_schedule):
    before = base_schedule.snapshot()
    cell = base_schedule.add_cell(Cell(12, 0, CellKind.TX_DEDICATED, (2, 3), track_label=9))
    assert base_schedule.track_cells(9) == [cell]
    base_schedule.remove_cell(cell)
    assert base_schedule.snapshot() == before


def test_render_grid_labels(base_schedule):
    grid = base_schedule.render_grid()
    assert "SH" in grid
    assert "5>4" in grid
    assert grid.splitlines()[0].startswith("ch\\ts")


def _mac(topology, slotframe, **kw):
    mac = TschMac(topology, slotframe, RngStreams.from_seed(1), **kw)
    received = []
    drops = []
    mac.on_receive = lambda node, frame, cell: received.append((node, frame.packet_id, cell))
    mac.on_drop = lambda frame, reason, node: drops.append((frame.packet_id, reason, node))
    return mac, received, drops


def test_queue_capacity_overflow(chain5, base_schedule):
    mac, _, drops = _mac(chain5, base_schedule)
    for i in range(9):
        frame = make_frame(i)
        frame.dst = 4
        mac.enqueue_frame(5, frame, BEST_EFFORT)
    assert mac.queue_length(5, 4) == 8
    assert drops == [(8, DropReason.QUEUE_OVERFLOW, 5)]
    assert mac.backlog == 8


def test_single_frame_traverses_chain_on_staircase(lossless_chain5):
    dag = build_dag(lossless_chain5)
    slotframe = build_base_schedule(dag)
    mac, received, _ = _mac(lossless_chain5, slotframe)

    def relay(node, frame_id, cell):
        received.append((node, frame_id, cell))
        if node != 0:
            frame.dst = dag.parent[node]
            mac.enqueue_frame(node, frame)

    mac.on_receive = lambda node, f, cell: relay(node, f.packet_id, cell)
    frame = make_frame()
    frame.dst = 4
    mac.enqueue_frame(5, frame)
    for asn in range(31):
        mac.execute_slot(asn)
    assert [node for node, _, _ in received] == [4, 3, 2, 1, 0]
    assert frame.hop_count == 5
    # staircase slots 4..8 in a single slotframe
    assert mac.backlog == 0


def test_retry_limit_drop(chain5):
    slotframe = Slotframe(7, 4)
    slotframe.add_cell(Cell(1, 0, CellKind.TX_DEDICATED, (1, 0)))
    mac, received, drops = _mac(chain5, slotframe, max_retries=2)
    mac.loss_script = lambda asn, src, dst, frame: True
    frame = make_frame(origin=1)
    frame.dst = 0
    mac.enqueue_frame(1, frame)
    for asn in range(7 * 3):
        mac.execute_slot(asn)
    assert received == []
    assert drops == [(1, DropReason.RETRY_LIMIT, 1)]
    assert mac.link_estimate(1, 0) == 0
    assert mac.link_estimate(2, 1) == 255


def test_shared_cell_collision_between_neighbors():
    topo = build_topology({0: (0, 0), 1: (50, 0)}, tx_range=100.0, link_quality=1.0)
    slotframe = Slotframe(4, 1)
    slotframe.add_cell(Cell(0, 0, CellKind.SHARED))
    mac, received, _ = _mac(topo, slotframe, p_shared=1.0)
    a, b = make_frame(1, origin=0, destination=1), make_frame(2, origin=1, destination=0)
    a.dst, b.dst = 1, 0
    mac.enqueue_frame(0, a)
    mac.enqueue_frame(1, b)
    outcomes = mac.execute_slot(0)
    assert {o.kind for o in outcomes} == {OutcomeKind.COLLISION}
    assert received == []


def _shared_chain(node_count):
    positions = {n: (50.0 * n, 0.0) for n in range(node_count)}
    topo = build_topology(positions, tx_range=60.0, link_quality=1.0)
    slotframe = Slotframe(4, 1)
    slotframe.add_cell(Cell(0, 0, CellKind.SHARED))
    return _mac(topo, slotframe, p_shared=1.0)


@pytest.mark.parametrize(
    "links",
    [
        [(1, 0), (2, 1)],  # 1 is both sender and receiver
        [(0, 1), (2, 1)],  # 0 and 2 cannot hear each other
        [(1, 0), (2, 3)],  # adjacent senders, distinct receivers
    ],
)
def test_shared_cell_contenders_in_range_all_collide(links):
    mac, received, _ = _shared_chain(4)
    for packet_id, (src, dst) in enumerate(links, start=1):
        frame = make_frame(packet_id, origin=src, destination=dst)
        frame.dst = dst
        mac.enqueue_frame(src, frame)
    outcomes = mac.execute_slot(0)
    assert [o.kind for o in outcomes] == [OutcomeKind.COLLISION] * len(links)
    assert received == []


def test_shared_cell_reuse_between_distant_pairs():
    mac, received, _ = _shared_chain(4)
    for packet_id, (src, dst) in enumerate([(0, 1), (3, 2)], start=1):
        frame = make_frame(packet_id, origin=src, destination=dst)
        frame.dst = dst
        mac.enqueue_frame(src, frame)
    outcomes = mac.execute_slot(0)
    assert [o.kind for o in outcomes] == [OutcomeKind.DELIVERY, OutcomeKind.DELIVERY]
    assert sorted(node for node, _, _ in received) == [1, 2]


def test_shared_cell_lone_sender_succeeds():
    topo = build_topology({0: (0, 0), 1: (50, 0)}, tx_range=100.0, link_quality=1.0)
    slotframe = Slotframe(4, 1)
    slotframe.add_cell(Cell(0, 0, CellKind.SHARED))
    mac, received, _ = _mac(topo, slotframe, p_shared=1.0)
    frame = make_frame(1, origin=0, destination=1)
    frame.dst = 1
    mac.enqueue_frame(0, frame)
    (outcome,) = mac.execute_slot(4)
    assert outcome.kind == OutcomeKind.DELIVERY
    assert outcome.channel == 0
    assert received[0][0] == 1


def test_dedicated_links_do_not_contend_on_shared_cells(lossless_chain5):
    dag = build_dag(lossless_chain5)
    slotframe = build_base_schedule(dag)
    mac, received, _ = _mac(lossless_chain5, slotframe, p_shared=1.0)
    frame = make_frame(origin=3)
    frame.dst = 2
    mac.enqueue_frame(3, frame)
    for asn in range(4):
        assert all(o.kind == OutcomeKind.IDLE for o in mac.execute_slot(asn))
    assert mac.uses_shared_cells(2, 3)
    assert not mac.uses_shared_cells(3, 2)


def test_next_active_asn_skips_idle_offsets():
    slotframe = Slotframe(10, 2)
    slotframe.add_cell(Cell(3, 0, CellKind.SHARED))
    topo = build_linear_topology(1, 50.0)
    mac, _, _ = _mac(topo, slotframe)
    assert mac.next_active_asn(0) == 3
    assert mac.next_active_asn(4) == 13
    slotframe.add_cell(Cell(7, 0, CellKind.TX_DEDICATED, (1, 0)))
    assert mac.next_active_asn(4) == 7


def test_runtime_audit_flags_nothing_on_valid_schedule(chain5, base_schedule):
    mac, _, _ = _mac(chain5, base_schedule, audit=True)
    for asn in range(62):
        mac.execute_slot(asn)
    assert mac.violations == []


def test_energy_estimate_decreases_with_attempts(chain5):
    slotframe = Slotframe(2, 1)
    slotframe.add_cell(Cell(1, 0, CellKind.TX_DEDICATED, (1, 0)))
    mac, _, _ = _mac(chain5, slotframe, max_retries=100)
    mac.loss_script = lambda *args: True
    frame = make_frame(origin=1)
    frame.dst = 0
    mac.enqueue_frame(1, frame)
    for asn in range(16):
        mac.execute_slot(asn)
    assert mac.energy_estimate(1) == 10_000 - 8 // 4
