from typing import Any

import pytest

from app.models.schedule import DropReason, FlowClass, Frame
from app.models.view import JoinState
from app.schemas.scenario import SdnParams
from app.services.engine import RngStreams, SimEngine
from app.services.radio import build_linear_topology
from app.services.routing import build_dag
from app.services.scheduler import build_base_schedule

QUICK_SCENARIO = """\
mode = {mode}
seed = 3
duration = 120

[topology]
hop_count = 3

[rpl]
join_stagger = 2

[app]
interval = 2..4
"""


class FakeHost:
    """NodeHost that records every call and runs timers on its own engine."""

    def __init__(self, node_id: int = 3) -> None:
        self.node_id = node_id
        self.engine = SimEngine(10.0)
        self.l3: list[Frame] = []
        self.sdn: list[tuple[Frame, int]] = []
        self.delivered: list[Frame] = []
        self.drops: list[tuple[Frame, DropReason]] = []
        self.control: list[tuple[Any, FlowClass, str | None]] = []
        self.track_requests: list[int] = []
        self.states: list[JoinState] = []
        self.ancestors: set[int] = set()
        self.align_extra = 0.0

    @property
    def now_s(self) -> float:
        return self.engine.clock.time_s

    def advance(self, seconds: float) -> None:
        self.engine.run_until(self.engine.asn + self.engine.clock.slots_for(seconds))

    def forward_l3(self, node, frame):
        self.l3.append(frame)

    def forward_sdn(self, node, frame, next_hop):
        self.sdn.append((frame, next_hop))

    def deliver_local(self, node, frame):
        self.delivered.append(frame)

    def drop(self, node, frame, reason):
        self.drops.append((frame, reason))

    def send_control(self, node, message, flow_class, ftq_cause=None):
        self.control.append((message, flow_class, ftq_cause))

    def schedule(self, delay_s, kind, callback, payload=None):
        return self.engine.schedule_in(self.engine.clock.slots_for(delay_s), kind, callback, payload)

    def cancel(self, handle):
        self.engine.cancel(handle)

    def queue_occupancy(self, node):
        return 2

    def energy(self, node):
        return 9000

    def neighbor_estimates(self, node):
        return [(node - 1, 230), (node + 1, 255)]

    def request_track(self, node):
        self.track_requests.append(node)
        return None

    def on_join_state(self, node, state):
        self.states.append(state)

    def on_default_route(self, node, destination):
        return destination in self.ancestors

    def align_to_control_slot(self, node, delay_s):
        return delay_s + self.align_extra

    def sent(self, kind: type) -> list:
        return [m for m, _, _ in self.control if isinstance(m, kind)]


@pytest.fixture
def fake_host() -> FakeHost:
    return FakeHost()


@pytest.fixture
def sdn_params() -> SdnParams:
    return SdnParams()


@pytest.fixture
def chain5():
    return build_linear_topology(5, 90.0, 100.0, 0.9)


@pytest.fixture
def lossless_chain5():
    return build_linear_topology(5, 90.0, 100.0, 1.0)


@pytest.fixture
def dag5(chain5):
    return build_dag(chain5)


@pytest.fixture
def base_schedule(dag5):
    return build_base_schedule(dag5, 61, 16, 4)


@pytest.fixture
def engine() -> SimEngine:
    return SimEngine(10.0)


@pytest.fixture
def rngs() -> RngStreams:
    return RngStreams.from_seed(7)


@pytest.fixture(scope="session")
def quick_scenario_text():
    return lambda mode: QUICK_SCENARIO.format(mode=mode)
