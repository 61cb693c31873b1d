"""Bundled fixtures: maps, the synthetic abstract corpus, annotated reports and oracle cases."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

ROAD_TYPES = ("Intersection", "TJunction", "StraightRoad")
SRR_WIDTHS = (3.0, 3.5, 4.0)
_TYPE_SLUG = {"Intersection": "intersection", "TJunction": "tjunction", "StraightRoad": "straight"}


def root() -> Path:
    return Path(str(resources.files("crashsynth.data")))


def map_path(name: str) -> Path:
    return root() / "maps" / f"{name}.json"


def srr_map_names(road_type: str, *, doubled: bool = False) -> list[str]:
    """The three single-site maps of one road type (lane widths 3.0, 3.5, 4.0 m, or twice that)."""
    slug = _TYPE_SLUG[road_type]
    return [f"{slug}_w{int(w * 10)}{'_2w' if doubled else ''}" for w in SRR_WIDTHS]


def corpus_paths() -> list[Path]:
    return sorted((root() / "corpus").glob("*.json"))


def report_dirs() -> list[Path]:
    return sorted(p for p in (root() / "reports").iterdir() if (p / "report.txt").exists())


def oracle_case_path(name: str) -> Path:
    return root() / "oracle" / f"{name}.json"


def negative_path(name: str) -> Path:
    return root() / "negative" / f"{name}.json"
