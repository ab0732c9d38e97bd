import pytest

from app.models.flowtable import build_header
from app.models.schedule import FlowClass
from app.schemas.messages import ActionSpec, Cack, Cjoin, Conf, EntryStat, Fts, Ftq, NeighborReport, Nsu
from app.services.controller import Controller, ControllerPolicy, parse_logged_message


def ftq(node, destination, seq=0):
    return Ftq(node_id=node, seq=seq, header=build_header(FlowClass.APP, destination, node, seq, 60)[:24])


def nsu(node, stats=()):
    return Nsu(
        node_id=node,
        energy=9000,
        queue=1,
        neighbors=[NeighborReport(node_id=node - 1, link_estimate=230)],
        entry_stats=[EntryStat(entry_id=e, hits=h) for e, h in stats],
    )


@pytest.fixture
def controller(dag5):
    return Controller(dag5)


def test_cjoin_is_answered_idempotently(controller):
    first = controller.receive(3, Cjoin(node_id=3), asn=100, now_s=1.0)
    second = controller.receive(3, Cjoin(node_id=3), asn=900, now_s=9.0)
    assert first == second == [(3, Cack(node_id=3)), (3, Conf(nsu_period=10, flow_lifetime=60))]
    assert controller.view.nodes[3].joined_at == 1.0
    assert controller.cjoins == 2


def test_ftq_towards_an_ancestor_forwards_to_parent(controller):
    ((dst, fts),) = controller.receive(3, ftq(3, 0), asn=0, now_s=0.0)
    assert dst == 3
    (entry,) = fts.entries
    assert entry.action == ActionSpec(kind="forward", next_hop=2)
    assert entry.lifetime == 60
    assert entry.matches[0].offset == 1
    assert entry.matches[0].value == b"\x00\x00"


def test_ftq_towards_a_descendant_pushes_a_source_route(controller):
    ((_, fts),) = controller.receive(2, ftq(2, 5), asn=0, now_s=0.0)
    assert fts.entries[0].action == ActionSpec(kind="srh_push", route=[3, 4, 5])


def test_ftq_for_unknown_destination_installs_drop(controller):
    ((_, fts),) = controller.receive(2, ftq(2, 42), asn=0, now_s=0.0)
    assert fts.entries[0].action.kind == "drop"


def test_ftq_without_flow_key_gets_empty_fts(controller):
    ((_, fts),) = controller.receive(2, Ftq(node_id=2, seq=0, header=b"\x05\x00"), asn=0, now_s=0.0)
    assert fts == Fts()


def test_repeated_ftq_replaces_pushed_entry(controller):
    controller.receive(3, ftq(3, 0), asn=0, now_s=0.0)
    controller.receive(3, ftq(3, 0, seq=1), asn=10, now_s=0.1)
    assert list(controller.view.pushed) == [(3, 2)]


def test_nsu_from_unjoined_node_is_ignored(controller):
    assert controller.receive(4, nsu(4), asn=0, now_s=0.0) == []
    assert controller.ignored_nsus == 1
    assert 4 not in controller.view.nodes
    controller.receive(4, Cjoin(node_id=4), asn=0, now_s=0.0)
    controller.receive(4, nsu(4), asn=1000, now_s=10.0)
    view = controller.view.nodes[4]
    assert view.nsu_count == 1
    assert view.neighbors == {3: 230}
    assert view.last_nsu_at == 10.0


def test_stale_nodes_after_three_missed_periods(controller):
    controller.receive(3, Cjoin(node_id=3), asn=0, now_s=0.0)
    assert controller.stale_nodes(30.0) == {}
    assert controller.stale_nodes(31.0) == {3: 31.0}


def test_afr_refreshes_hot_entries_close_to_expiry(dag5):
    controller = Controller(dag5, ControllerPolicy(afr_enabled=True, afr_hit_threshold=5))
    controller.receive(3, Cjoin(node_id=3), asn=0, now_s=0.0)
    controller.receive(3, ftq(3, 0), asn=0, now_s=0.0)
    assert controller.receive(3, nsu(3, [(1, 9)]), asn=3000, now_s=30.0) == []
    assert controller.receive(3, nsu(3, [(1, 2)]), asn=5500, now_s=55.0) == []
    assert controller.receive(3, nsu(3, [(1, 9)]), asn=5500, now_s=55.0) == [(3, Fts(refresh_ids=[1]))]
    assert controller.view.pushed[(3, 1)].expires_at() == 115.0
    assert controller.afr_refreshes == 1


def test_afr_disabled_never_refreshes(controller):
    controller.receive(3, Cjoin(node_id=3), asn=0, now_s=0.0)
    controller.receive(3, ftq(3, 0), asn=0, now_s=0.0)
    assert controller.receive(3, nsu(3, [(1, 50)]), asn=5500, now_s=55.0) == []


def test_replaying_the_log_reproduces_every_decision(dag5):
    inbound = [
        (3, Cjoin(node_id=3), 0.0),
        (5, Cjoin(node_id=5), 1.0),
        (3, ftq(3, 0), 2.0),
        (5, ftq(5, 1), 3.0),
        (1, ftq(1, 4), 4.0),
        (3, nsu(3, [(1, 7)]), 55.0),
        (5, nsu(5), 60.0),
        (2, nsu(2), 61.0),
    ]
    original = Controller(dag5, ControllerPolicy(afr_enabled=True))
    for sender, message, now in inbound:
        original.receive(sender, message, asn=int(now * 100), now_s=now)

    replay = Controller(dag5, ControllerPolicy(afr_enabled=True))
    for record in original.log:
        replay.receive(record.node, parse_logged_message(record.inbound), asn=record.asn, now_s=record.asn / 100)
    assert replay.log_lines() == original.log_lines()
    assert any(r.outbound and r.inbound["kind"] == "NSU" for r in original.log)
