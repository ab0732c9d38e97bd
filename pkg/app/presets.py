"""Built-in scenarios: the evaluation defaults in each of the three comparison modes."""
from app.schemas.scenario import Mode, Scenario
from app.services.scenario import parse_scenario

_BASE = """\
seed = 1
duration = 3600

[topology]
hop_count = 5
spacing = 90
tx_range = 100
link_quality = 0.9

[tsch]
slot_duration = 10
slotframe_length = 61
shared_slots = 4

[sdn]
nsu_period = 10
flow_lifetime = 60
ppq_bytes = 24

[app]
interval = 5..10
"""

PRESETS: dict[str, str] = {mode.value: f"mode = {mode.value}\n{_BASE}" for mode in Mode}


def preset_text(mode: Mode | str) -> str:
    name = Mode(mode).value
    return PRESETS[name]


def preset_scenario(mode: Mode | str) -> Scenario:
    return parse_scenario(preset_text(mode))
