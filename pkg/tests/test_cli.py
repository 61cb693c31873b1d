import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from crashsynth import cli, data
from crashsynth.model import abstract_from_dict, parse_abstract

FIG3_ABSTRACT = str(data.root() / "corpus" / "i01_left_turn_head_on.json")
FIG3_MAP = str(data.map_path("fig3_intersection"))
GRID_MAP = str(data.map_path("sf_grid"))
REPORTS = str(data.root() / "reports")
SVG = "{http://www.w3.org/2000/svg}"


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = run("run", "--reports", REPORTS, "--map", GRID_MAP, "--out", out, "--deterministic",
               "--max-scenarios", 1, "--run-stub")
    return code, out


# ---------------------------------------------------------------------------
# extract


def test_mock_extraction_writes_gold_abstracts(tmp_path):
    assert run("extract", "--reports", REPORTS, "--out", tmp_path) == cli.EXIT_OK
    for d in data.report_dirs():
        got = parse_abstract((tmp_path / "abstracts" / f"{d.name}.json").read_text())
        assert got == abstract_from_dict(json.loads((d / "gold.json").read_text()))


def test_extraction_accuracy_is_complete(tmp_path):
    run("extract", "--reports", REPORTS, "--out", tmp_path)
    rows = list(csv.reader((tmp_path / "accuracy.csv").open()))
    assert rows[2][1:] == ["100.00%"] * 10
    report = json.loads((tmp_path / "extraction_report.json").read_text())
    assert report


def test_extraction_is_byte_stable(tmp_path):
    run("extract", "--reports", REPORTS, "--out", tmp_path / "a")
    run("extract", "--reports", REPORTS, "--out", tmp_path / "b")
    for f in sorted((tmp_path / "a" / "abstracts").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / "abstracts" / f.name).read_bytes()


def test_missing_reports_directory(tmp_path, capsys):
    assert run("extract", "--reports", tmp_path / "absent", "--out", tmp_path) == cli.EXIT_INPUT
    assert "input error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# plan


def test_plan_fig3(tmp_path):
    assert run("plan", "--abstract", FIG3_ABSTRACT, "--map", FIG3_MAP, "--out", tmp_path, "--seed", 7) == 0
    files = list((tmp_path / "scenarios").glob("*.json"))
    assert len(files) >= 1
    report = json.loads((tmp_path / "planning_report.json").read_text())
    assert report["seed"] == 7
    assert report["scenarios"] == len(files)
    assert report["abstracts"][0]["status"] == "ok"


def test_incompatible_map_exits_with_no_result(tmp_path, capsys):
    code = run("plan", "--abstract", FIG3_ABSTRACT, "--map", data.map_path("straight_w35"), "--out", tmp_path)
    assert code == cli.EXIT_NO_RESULT
    report = json.loads((tmp_path / "planning_report.json").read_text())
    assert report["abstracts"][0]["status"] == "no_candidate"
    assert "no result" in capsys.readouterr().err


def test_same_seed_same_files(tmp_path):
    for name in ("a", "b"):
        run("plan", "--abstract", FIG3_ABSTRACT, "--map", FIG3_MAP, "--out", tmp_path / name, "--seed", 7)
    a = sorted((tmp_path / "a" / "scenarios").iterdir())
    assert a
    for f in a:
        assert f.read_bytes() == (tmp_path / "b" / "scenarios" / f.name).read_bytes()
    assert (tmp_path / "a" / "planning_report.json").read_bytes() == \
        (tmp_path / "b" / "planning_report.json").read_bytes()


def test_malformed_abstract(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"road": {}}')
    assert run("plan", "--abstract", bad, "--map", FIG3_MAP, "--out", tmp_path / "o") == cli.EXIT_INPUT


# ---------------------------------------------------------------------------
# validate, testgen, render


def test_pipeline_writes_every_artifact(pipeline):
    code, out = pipeline
    assert code == cli.EXIT_OK
    for name in ("accuracy.csv", "extraction_report.json", "planning_report.json", "srr_report.json",
                 "verdicts.jsonl", "oracle_verdicts.jsonl"):
        assert (out / name).exists(), name


def test_srr_rows_cover_all_road_types(pipeline):
    _, out = pipeline
    report = json.loads((out / "srr_report.json").read_text())
    assert set(report["rows"]) == {"Intersection", "TJunction", "StraightRoad"}
    assert sum(r["reports"] for r in report["rows"].values()) == len(data.report_dirs())
    for line in (out / "verdicts.jsonl").read_text().splitlines():
        json.loads(line)


def test_testgen_on_one_two_vehicle_scenario(tmp_path, pipeline):
    _, out = pipeline
    scenario = out / "scenarios" / "r01_left_turn_head_on__I1.json"
    assert run("testgen", "--scenarios", scenario, "--map", GRID_MAP, "--out", tmp_path) == 0
    files = sorted(p.name for p in (tmp_path / "tests").glob("*.json"))
    assert files == ["r01_left_turn_head_on__I1__ego_P1.json", "r01_left_turn_head_on__I1__ego_P2.json"]


def test_render_draws_one_polyline_per_action(tmp_path, pipeline):
    _, out = pipeline
    scenario = out / "scenarios" / "r01_left_turn_head_on__I1.json"
    target = tmp_path / "fig.svg"
    assert run("render", "--scenarios", scenario, "--map", GRID_MAP, "--out", target) == 0
    root = ET.parse(target).getroot()
    assert root.tag == f"{SVG}svg"
    lines = root.findall(f".//{SVG}polyline")
    doc = json.loads(scenario.read_text())
    assert len(lines) == sum(len(p["plan"]) for p in doc["participants"])


def test_scenario_on_the_wrong_map(tmp_path, pipeline):
    _, out = pipeline
    scenario = out / "scenarios" / "r01_left_turn_head_on__I1.json"
    assert run("validate", "--scenarios", scenario, "--map", FIG3_MAP, "--out", tmp_path) == cli.EXIT_INPUT


# ---------------------------------------------------------------------------
# configuration and exit codes


def test_toml_config_supplies_paths_and_sections(tmp_path):
    config = tmp_path / "c.toml"
    config.write_text(f'seed = 11\nmax_scenarios = 1\n[paths]\nabstract = "{FIG3_ABSTRACT}"\n'
                      f'map = "{FIG3_MAP}"\nout = "{tmp_path / "o"}"\n[solver]\ntimeout = 60.0\n')
    assert run("plan", "--config", config) == 0
    assert json.loads((tmp_path / "o" / "planning_report.json").read_text())["seed"] == 11


def test_flags_override_the_config(tmp_path):
    config = tmp_path / "c.toml"
    config.write_text(f'seed = 11\n[paths]\nabstract = "{FIG3_ABSTRACT}"\nmap = "{FIG3_MAP}"\n')
    assert run("plan", "--config", config, "--seed", 5, "--out", tmp_path / "o") == 0
    assert json.loads((tmp_path / "o" / "planning_report.json").read_text())["seed"] == 5


def test_unknown_config_key(tmp_path):
    config = tmp_path / "c.toml"
    config.write_text("colour = 'red'\n")
    assert run("plan", "--config", config) == cli.EXIT_INPUT


def test_deterministic_flag_fixes_seed_zero(tmp_path):
    run("plan", "--abstract", FIG3_ABSTRACT, "--map", FIG3_MAP, "--out", tmp_path, "--deterministic")
    assert json.loads((tmp_path / "planning_report.json").read_text())["seed"] == 0


def test_unexpected_failure_is_internal(tmp_path, monkeypatch, capsys):
    def boom(*_a, **_k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "plan_sites", boom)
    code = run("plan", "--abstract", FIG3_ABSTRACT, "--map", FIG3_MAP, "--out", tmp_path)
    assert code == cli.EXIT_INTERNAL
    assert "RuntimeError" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "crashsynth.cli", "extract", "--reports", REPORTS,
                           "--out", str(tmp_path)], capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert "extracted 6 of 6" in proc.stdout
