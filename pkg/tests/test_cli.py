import argparse

import pytest

from app.cli import main, parse_seeds


def test_parse_seeds():
    assert parse_seeds("3") == [1, 2, 3]
    assert parse_seeds("4,7,") == [4, 7]
    for bad in ("0", "x", "1,a", "-2,1"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_seeds(bad)


def test_schedule_dump_preset(capsys):
    assert main(["schedule-dump", "--preset", "NoSdnRpl"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ch\\ts")
    assert "5>4" in out and "SH" in out


def test_schedule_dump_needs_a_scenario(capsys):
    assert main(["schedule-dump"]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_scenario_file_exits_with_error(tmp_path, capsys):
    path = tmp_path / "bad.scn"
    path.write_text("mode = NoSdnRpl\n[app]\ninterval = 10..5\n")
    assert main(["schedule-dump", "--scenario", str(path)]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["schedule-dump", "--scenario", str(tmp_path / "missing.scn")]) == 2


def test_simulate_then_stats(tmp_path, capsys, quick_scenario_text):
    path = tmp_path / "quick.scn"
    path.write_text(quick_scenario_text("SdnShared"))
    out = tmp_path / "runs"
    code = main(["simulate", "--scenario", str(path), "--seeds", "1,2", "--duration", "30", "--out", str(out)])
    assert code == 0
    assert (out / "seed-2" / "records.csv").is_file()
    assert (out / "summary.csv").is_file()
    assert "artifacts written to" in capsys.readouterr().out

    assert main(["stats", "--in", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "[seed-1]" in printed and "[seed-2]" in printed
    assert "Control" in printed


def test_stats_on_empty_directory(tmp_path):
    assert main(["stats", "--in", str(tmp_path)]) == 2
