import pytest

from app.presets import preset_scenario, preset_text
from app.schemas.scenario import Mode
from app.services.scenario import ScenarioError, load_scenario, parse_scenario, with_overrides


def test_mode_only_gives_defaults():
    scenario = parse_scenario("mode = SdnShared\n")
    assert scenario.mode is Mode.SDN_SHARED
    assert scenario.topology.hop_count == 5
    assert scenario.tsch.slotframe_length == 61
    assert scenario.sdn.nsu_period == 10
    assert scenario.app.interval == (5.0, 10.0)


def test_sections_comments_and_aliases():
    text = """\
# five-hop chain
mode = SdnTracks   # allocate tracks
seed = 11
app_interval = 2..3

[tsch]
slotframe_length = 17
[sdn]
cmq_enabled = false
ppq_bytes = 32
"""
    scenario = parse_scenario(text)
    assert scenario.seed == 11
    assert scenario.app.interval == (2.0, 3.0)
    assert scenario.tsch.slotframe_length == 17
    assert scenario.sdn.cmq_enabled is False
    assert scenario.sdn.ppq_bytes == 32
    assert parse_scenario("mode = NoSdnRpl\napp.payload_bytes = 10\n").app.payload_bytes == 10


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("mode = NoSdnRpl\n[topology]\nlink_quality = 1.2\n", 3, "link_quality"),
        ("mode = NoSdnRpl\n[app]\ninterval = 10..5\n", 3, "out of order"),
        ("mode = NoSdnRpl\n[app]\ninterval = fast\n", 3, "min..max"),
        ("mode = NoSdnRpl\n[topology]\nhop_count = five\n", 3, "hop_count"),
        ("mode = NoSdnRpl\n[topology]\ncolor = red\n", 3, "unknown key"),
        ("mode = NoSdnRpl\n[radio]\n", 2, "unknown section"),
        ("mode = NoSdnRpl\nseed = 1\nseed = 2\n", 3, "duplicate"),
        ("mode = NoSdnRpl\nseed =\n", 2, "missing value"),
        ("mode = NoSdnRpl\njust some words\n", 2, "key = value"),
        ("mode = Mesh\n", 1, "mode"),
        ("[topology]\nhop_count = 3\n", 2, "mode"),
        ("mode = NoSdnRpl\n[topology]\nspacing = 120\n", 3, "disconnected"),
        ("mode = NoSdnRpl\n[tsch]\nslotframe_length = 5\nshared_slots = 5\n", 4, "shared_slots"),
        ("mode = NoSdnRpl\n[app]\npayload_bytes = 50\n", 3, "exceeds"),
    ],
)
def test_errors_name_the_offending_line(text, line, fragment):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")
    assert fragment in str(exc.value)


def test_load_scenario_from_file(tmp_path):
    path = tmp_path / "chain.scn"
    path.write_text("mode = SdnShared\n[topology]\nhop_count = 2\n")
    assert load_scenario(path).topology.hop_count == 2
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.scn")


def test_with_overrides_ignores_unset_values():
    scenario = parse_scenario("mode = NoSdnRpl\nduration = 100\n")
    changed = with_overrides(scenario, seed=9, duration=None)
    assert changed.seed == 9
    assert changed.duration == 100
    with pytest.raises(ScenarioError):
        with_overrides(scenario, duration=-1)


@pytest.mark.parametrize("mode", list(Mode))
def test_presets_parse(mode):
    assert preset_scenario(mode).mode is mode
    assert parse_scenario(preset_text(mode)) == preset_scenario(mode)
