"""Command-line pipeline: extract -> plan -> validate -> testgen, plus SVG rendering.

Exit codes: 0 success, 2 input error, 3 no result, 4 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import tempfile
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from crashsynth import errors
from crashsynth.constraints.plan import SolverConfig
from crashsynth.extraction import (GoldEchoClient, LiveClient, accuracy_csv, evaluate_accuracy,
                                   extract_abstract)
from crashsynth.model import abstract_from_dict, parse_abstract, serialize_abstract
from crashsynth.planner import PlannerConfig, parse_scenario, plan_sites, serialize_scenario
from crashsynth.render import render_svg
from crashsynth.roadmap import RoadNetwork, load_map
from crashsynth.validation import (SimTolerances, check_sim, collision_oracle, failure_category, generate_tests,
                                   srr_table, stub_agent_trace, verdict_lines)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("crashsynth")

EXIT_OK, EXIT_INPUT, EXIT_NO_RESULT, EXIT_INTERNAL = 0, 2, 3, 4

INPUT_ERRORS = (errors.SchemaError, errors.SemanticError, errors.UnknownAction, errors.MissingCore,
                errors.GeometryError, errors.ConnectivityError, errors.EmptyReport, errors.ParseError,
                errors.LengthMismatch, errors.EmptyInput, FileNotFoundError, NotADirectoryError,
                IsADirectoryError, json.JSONDecodeError, tomllib.TOMLDecodeError)
NO_RESULT_ERRORS = (errors.NoCandidateSite, errors.AllSitesInfeasible)

PLANNING_BUCKETS = ("trajectory_planning", "crash_type_mismatch", "crossing")


class InputError(Exception):
    """Bad command-line input (missing path, unusable option)."""


class NoResult(Exception):
    """The command ran but produced nothing."""


@dataclass(frozen=True)
class PipelineConfig:
    map: tuple[str, ...] = ()
    abstract: str | None = None
    reports: str | None = None
    scenarios: str | None = None
    out: str = "crashsynth-out"
    seed: int | None = None
    deterministic: bool = False
    jobs: int = 1
    mode: str = "mock"
    max_scenarios: int = 3
    min_collision_area: float = 1.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    tolerances: SimTolerances = field(default_factory=SimTolerances)

    def resolved_seed(self) -> int:
        if self.seed is not None:
            return self.seed
        if self.deterministic:
            return 0
        return random.SystemRandom().randrange(2 ** 31)

    def planner(self, seed: int) -> PlannerConfig:
        return PlannerConfig(replace(self.solver, seed=seed), self.min_collision_area, self.max_scenarios,
                             self.jobs)


def _section(doc: Mapping[str, Any], cls, name: str):
    raw = doc.get(name, {})
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise InputError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return cls(**raw)


def load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    top = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    paths = doc.get("paths", {})
    if "map" in paths and isinstance(paths["map"], str):
        paths = {**paths, "map": [paths["map"]]}
    merged = {**top, **paths}
    if "map" in merged:
        merged["map"] = tuple(merged["map"])
    known = {f.name for f in fields(PipelineConfig)} - {"solver", "tolerances"}
    unknown = set(merged) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**merged, solver=_section(doc, SolverConfig, "solver"),
                          tolerances=_section(doc, SimTolerances, "tolerances"))


def apply_flags(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    changes = {}
    for name in ("abstract", "reports", "scenarios", "out", "seed", "jobs", "mode", "max_scenarios"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "map", None):
        changes["map"] = tuple(args.map)
    if getattr(args, "deterministic", False):
        changes["deterministic"] = True
    return replace(cfg, **changes)


# ---------------------------------------------------------------------------
# file helpers

def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(doc: Any) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _require_dir(path: str | None, what: str) -> Path:
    if not path:
        raise InputError(f"{what} directory not given")
    p = Path(path)
    if not p.is_dir():
        raise InputError(f"{what} directory {p} does not exist")
    return p


def _json_inputs(path: str | None, what: str) -> list[Path]:
    if not path:
        raise InputError(f"{what} not given")
    p = Path(path)
    if p.is_dir():
        files = sorted(f for f in p.glob("*.json") if not f.name.startswith("."))
        if not files:
            raise InputError(f"no {what} JSON files in {p}")
        return files
    if not p.is_file():
        raise InputError(f"{what} {p} does not exist")
    return [p]


class Maps:
    """One or more map files; scenarios find their site by id."""

    def __init__(self, paths: Sequence[str]):
        if not paths:
            raise InputError("--map is required")
        self.networks: list[RoadNetwork] = []
        for p in paths:
            if not Path(p).is_file():
                raise InputError(f"map {p} does not exist")
            self.networks.append(load_map(p))

    def network_for(self, site_id: str) -> RoadNetwork:
        for net in self.networks:
            if any(s.id == site_id for s in net.sites):
                return net
        raise errors.SchemaError(f"no loaded map has site {site_id!r}")

    def merged(self) -> RoadNetwork:
        if len(self.networks) == 1:
            return self.networks[0]
        sites = tuple(s for n in self.networks for s in n.sites)
        roads = {k: v for n in self.networks for k, v in n.roads.items()}
        conn = tuple(c for n in self.networks for c in n.connectivity)
        return RoadNetwork(sites, roads, conn)


def _load_scenario(path: Path, maps: Maps, solver: SolverConfig):
    text = path.read_text(encoding="utf-8")
    site_id = json.loads(text).get("site_id", "")
    return parse_scenario(text, maps.network_for(site_id), solver)


# ---------------------------------------------------------------------------
# commands

def _report_inputs(reports: Path) -> list[tuple[str, str, Path | None]]:
    """(name, report text, gold path or None) for every report in the directory."""
    items = []
    for sub in sorted(p for p in reports.iterdir() if p.is_dir()):
        if (sub / "report.txt").is_file():
            gold = sub / "gold.json"
            items.append((sub.name, (sub / "report.txt").read_text(encoding="utf-8"),
                          gold if gold.is_file() else None))
    for txt in sorted(reports.glob("*.txt")):
        items.append((txt.stem, txt.read_text(encoding="utf-8"), None))
    if not items:
        raise InputError(f"no reports found in {reports}")
    return items


def cmd_extract(cfg: PipelineConfig) -> int:
    reports = _require_dir(cfg.reports, "reports")
    out = Path(cfg.out)
    items = _report_inputs(reports)
    golds = {name: json.loads(gold.read_text(encoding="utf-8")) for name, _, gold in items if gold}
    if cfg.mode == "live":
        client = LiveClient()
    elif cfg.mode == "mock":
        client = GoldEchoClient({text: abstract_from_dict(golds[name], fill_defaults=False)
                                 for name, text, _ in items if name in golds})
    else:
        raise InputError(f"unknown extraction mode {cfg.mode!r}")
    written, failures, preds, gold_list = [], {}, [], []
    for name, text, _ in items:
        try:
            abstract = extract_abstract(client, text)
        except (errors.MissingCore, errors.SemanticError, errors.ParseError) as exc:
            failures[name] = f"{type(exc).__name__}: {exc}"
            continue
        write_atomic(out / "abstracts" / f"{name}.json", serialize_abstract(abstract))
        written.append(name)
        if name in golds:
            preds.append(abstract)
            gold_list.append(abstract_from_dict(golds[name]))
    summary: dict[str, Any] = {"mode": cfg.mode, "extracted": written, "failed": failures}
    if gold_list:
        table = evaluate_accuracy(preds, gold_list)
        write_atomic(out / "accuracy.csv", accuracy_csv(table))
        summary["accuracy"] = table
    write_atomic(out / "extraction_report.json", _json(summary))
    print(f"extracted {len(written)} of {len(items)} reports into {out / 'abstracts'}")
    if not written:
        raise NoResult("no abstract could be extracted")
    return EXIT_OK


def _plan_one(path: Path, network: RoadNetwork, cfg: PipelineConfig, seed: int, out: Path):
    abstract = parse_abstract(path.read_text(encoding="utf-8"))
    entry: dict[str, Any] = {"abstract": path.stem, "road_type": abstract.collision_location.value, "sites": []}
    try:
        outcomes = plan_sites(abstract, network, cfg.planner(seed))
    except errors.NoCandidateSite as exc:
        entry.update(status="no_candidate", detail=str(exc))
        return entry, 0
    produced = 0
    for o in outcomes:
        site = {"site_id": o.site_id}
        if o.scenario is None:
            site.update(status="failed", bucket="trajectory_planning", reason=o.reason, detail=o.error)
        else:
            fname = f"{path.stem}__{o.site_id}.json"
            write_atomic(out / "scenarios" / fname, serialize_scenario(o.scenario))
            produced += 1
            verdict = check_sim(o.scenario, tolerances=cfg.tolerances)
            site.update(status="ok" if verdict.overall else "sim_failed", scenario_file=fname)
            if not verdict.overall:
                site.update(bucket=failure_category(verdict), diagnostics=list(verdict.diagnostics))
        entry["sites"].append(site)
    entry["status"] = "ok" if produced else "all_failed"
    return entry, produced


def cmd_plan(cfg: PipelineConfig) -> int:
    inputs = _json_inputs(cfg.abstract, "abstract")
    maps = Maps(cfg.map)
    network = maps.merged()
    out = Path(cfg.out)
    seed = cfg.resolved_seed()
    entries, total = [], 0
    for path in inputs:
        entry, produced = _plan_one(path, network, cfg, seed, out)
        entries.append(entry)
        total += produced
        log.info("%s: %d scenario(s)", path.stem, produced)
    buckets = Counter(s["bucket"] for e in entries for s in e["sites"] if "bucket" in s)
    report = {"seed": seed, "maps": [Path(m).name for m in cfg.map], "abstracts": entries,
              "scenarios": total, "failure_buckets": {b: buckets.get(b, 0) for b in PLANNING_BUCKETS}}
    write_atomic(out / "planning_report.json", _json(report))
    print(f"planned {total} scenario(s) for {len(inputs)} abstract(s); report in {out / 'planning_report.json'}")
    if not total:
        raise NoResult("no scenario could be planned")
    return EXIT_OK


def _find_planning_report(scen_dir: Path) -> Path | None:
    for cand in (scen_dir / "planning_report.json", scen_dir.parent / "planning_report.json"):
        if cand.is_file():
            return cand
    return None


def cmd_validate(cfg: PipelineConfig) -> int:
    scen_dir = _require_dir(cfg.scenarios, "scenarios")
    maps = Maps(cfg.map)
    files = sorted(scen_dir.glob("*.json"))
    files = [f for f in files if f.name != "planning_report.json"]
    records, per_report = [], {}
    plan_report = _find_planning_report(scen_dir)
    if plan_report:
        for e in json.loads(plan_report.read_text(encoding="utf-8"))["abstracts"]:
            per_report.setdefault((e["road_type"], e["abstract"]), [])
    for f in files:
        scenario = _load_scenario(f, maps, cfg.solver)
        verdict = check_sim(scenario, tolerances=cfg.tolerances)
        report = f.stem.split("__")[0]
        road_type = scenario.abstract.collision_location.value
        per_report.setdefault((road_type, report), []).append(verdict)
        records.append({"scenario": f.name, "report": report, "road_type": road_type,
                        "bucket": failure_category(verdict), **verdict.to_dict()})
    if not per_report:
        raise NoResult(f"no scenarios in {scen_dir}")
    table = srr_table((rt, rep, v) for (rt, rep), v in sorted(per_report.items()))
    out = Path(cfg.out)
    write_atomic(out / "verdicts.jsonl", verdict_lines(records))
    write_atomic(out / "srr_report.json", _json({"rows": table, "scenarios": len(records)}))
    print(f"{'road type':14s} {'reports':>7s} {'passed':>6s} {'SRR':>8s}")
    for rt, row in table.items():
        print(f"{rt:14s} {row['reports']:7d} {row['passed']:6d} {100 * row['srr']:7.2f}%")
    return EXIT_OK


def _scenario_inputs(cfg: PipelineConfig) -> list[Path]:
    target = cfg.scenarios or cfg.abstract
    files = _json_inputs(target, "scenario")
    return [f for f in files if f.name != "planning_report.json"]


def cmd_testgen(cfg: PipelineConfig, run_stub: bool = False) -> int:
    maps = Maps(cfg.map)
    out = Path(cfg.out)
    lines, count = [], 0
    for f in _scenario_inputs(cfg):
        scenario = _load_scenario(f, maps, cfg.solver)
        for case in generate_tests(scenario):
            name = f"{f.stem}__ego_{case.ego_id}.json"
            write_atomic(out / "tests" / name, _json(case.to_dict()))
            count += 1
            if run_stub:
                verdict = collision_oracle(stub_agent_trace(case, dt=cfg.tolerances.dt), case.ego_id, case.v_min)
                lines.append({"test": name, **verdict.to_dict()})
    if run_stub:
        write_atomic(out / "oracle_verdicts.jsonl", verdict_lines(lines))
    print(f"wrote {count} test case(s) into {out / 'tests'}")
    if not count:
        raise NoResult("no test case generated")
    return EXIT_OK


def cmd_render(cfg: PipelineConfig) -> int:
    maps = Maps(cfg.map)
    out = Path(cfg.out)
    files = _scenario_inputs(cfg)
    for f in files:
        svg = render_svg(_load_scenario(f, maps, cfg.solver))
        target = out if out.suffix == ".svg" and len(files) == 1 else out / f"{f.stem}.svg"
        write_atomic(target, svg)
    print(f"rendered {len(files)} scenario(s)")
    return EXIT_OK


def cmd_run(cfg: PipelineConfig, run_stub: bool = False) -> int:
    """Whole pipeline into one output tree: abstracts/, scenarios/, tests/ and the reports."""
    out = Path(cfg.out)
    cfg = replace(cfg, seed=cfg.resolved_seed())
    cmd_extract(cfg)
    cmd_plan(replace(cfg, abstract=str(out / "abstracts")))
    cmd_validate(replace(cfg, scenarios=str(out / "scenarios")))
    return cmd_testgen(replace(cfg, scenarios=str(out / "scenarios")), run_stub)


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crashsynth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, inputs=()):
        p.add_argument("--config", help="TOML config file; flags override it")
        p.add_argument("--out", help="output directory (or .svg file for render)")
        p.add_argument("--seed", type=int, help="solver random seed")
        p.add_argument("--deterministic", action="store_true", help="fix the seed (0 unless --seed is given)")
        p.add_argument("--jobs", type=int, help="parallel workers for candidate sites")
        if "map" in inputs:
            p.add_argument("--map", action="append", help="map JSON file; repeat for several maps")
        if "abstract" in inputs:
            p.add_argument("--abstract", help="abstract JSON file or directory")
        if "reports" in inputs:
            p.add_argument("--reports", help="directory of report.txt/gold.json pairs")
            p.add_argument("--mode", choices=("mock", "live"), help="extraction client")
        if "scenarios" in inputs:
            p.add_argument("--scenarios", "--scenario", dest="scenarios", help="scenario JSON file or directory")
        if "max" in inputs:
            p.add_argument("--max-scenarios", type=int, dest="max_scenarios", help="scenarios per abstract")

    common(sub.add_parser("extract", help="extract abstracts from accident reports"), inputs=("reports",))
    common(sub.add_parser("plan", help="plan crash trajectories for abstracts on a map"),
           inputs=("map", "abstract", "max"))
    common(sub.add_parser("validate", help="SIM check scenarios and report SRR per road type"),
           inputs=("map", "scenarios"))
    p = sub.add_parser("testgen", help="turn scenarios into ego test cases")
    common(p, inputs=("map", "scenarios"))
    p.add_argument("--run-stub", action="store_true", help="run the constant-velocity stub agent and the oracle")
    common(sub.add_parser("render", help="draw scenarios as SVG"), inputs=("map", "scenarios"))
    p = sub.add_parser("run", help="extract, plan, validate and testgen in one go")
    common(p, inputs=("map", "reports", "max"))
    p.add_argument("--run-stub", action="store_true", help="also run the stub agent and the oracle")
    return parser


COMMANDS = {
    "extract": cmd_extract,
    "plan": cmd_plan,
    "validate": cmd_validate,
    "render": cmd_render,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_flags(load_config(args.config), args)
        if args.command == "testgen":
            return cmd_testgen(cfg, args.run_stub)
        if args.command == "run":
            return cmd_run(cfg, args.run_stub)
        return COMMANDS[args.command](cfg)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"crashsynth: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NoResult, *NO_RESULT_ERRORS) as exc:
        print(f"crashsynth: no result: {exc}", file=sys.stderr)
        return EXIT_NO_RESULT
    except Exception as exc:  # noqa: BLE001 - the exit-code contract needs a catch-all
        log.debug("internal error", exc_info=True)
        print(f"crashsynth: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
