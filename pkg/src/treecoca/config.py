"""Experiment configuration files.

Configs are JSON objects. The grammar, with defaults, is documented in the
README; in short::

    {
      "dataset":  {"source": "synthetic", "d": 100, "m": 600, "seed": 0,
                   "lambda": 0.01, "loss": "squared",
                   "labels": {"kind": "linear", "w_scale": 1.0, "noise": 0.1}}
               |  {"source": "csv", "path": "...", "label_column": "quality",
                   "delimiter": ";", "has_header": true, "standardize": true,
                   "lambda": 0.01, "loss": "squared"},
      "topology": {"kind": "star", "leaves": 3}
               |  {"kind": "two_layer", "branches": 3, "leaves_per_branch": 3, "T": 10}
               |  {"kind": "explicit", "nodes": [...]},
      "topologies": {"name": <topology>, ...},   # instead of "topology": compare several
      "solver":   {"R": 50, "H": 100, "seed": 1, "seeds": [..], "target": 1e-3,
                   "stop_at_target": false},
      "delay":    {"t_lp": 4e-5, "t_cp": 3e-5, "r": 1e5, "sub_r": 0},
      "sweep":    {"H": [10, 100], "r": [10, 1e5], "max_rounds": 100000},
      "optimize": {"C": 0.5, "K": 3, "delta": 0.00333, "t_total": 1,
                   "t_lp": 4e-5, "t_cp": 3e-5, "h_max": 2000, "r": [1, 10]},
      "bound":    {"rounds": 30, "tolerance": 0.05}
    }

``target`` is relative to the initial duality gap. A trace CSV written by the
harness embeds its resolved config on a ``# config:`` line and can itself be
passed as a config file.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from treecoca.data import CsvSchema, LabelModel, load_csv, synth_gaussian
from treecoca.losses import LossSpec
from treecoca.model import (
    Dataset,
    DataPartition,
    TreeTopology,
    build_topology,
    partition_evenly,
    star_spec,
    two_layer_spec,
)


class ConfigError(ValueError):
    pass


CONFIG_PREFIX = "# config: "

DEFAULTS: dict[str, Any] = {
    "solver": {"R": 50, "H": 100, "seed": 0, "target": 1e-3, "stop_at_target": False},
    "delay": {"t_lp": 4e-5, "t_cp": 3e-5, "r": 0.0, "sub_r": 0.0},
    "sweep": {"max_rounds": 100_000},
    "optimize": {"h_max": 2000},
    "bound": {"rounds": 30, "tolerance": 0.05},
}


def merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def read_config(path: str | Path) -> dict[str, Any]:
    """Parse a JSON config, or the ``# config:`` line of a harness CSV."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() == ".csv":
        for line in text.splitlines():
            if line.startswith(CONFIG_PREFIX):
                text = line[len(CONFIG_PREFIX):]
                break
        else:
            raise ConfigError(f"{path} has no embedded config line")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return raw


def resolve(raw: dict[str, Any], overrides: dict[str, Any] | None = None) -> dict[str, Any]:
    """Fill defaults and apply flag overrides (``section.key`` -> value)."""
    cfg = merge(DEFAULTS, raw)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        cfg.setdefault(section, {})[key] = value
    if "topology" in cfg and "topologies" in cfg:
        raise ConfigError("give either 'topology' or 'topologies', not both")
    return cfg


def absolutize_paths(cfg: dict[str, Any], base_dir: Path) -> dict[str, Any]:
    """Make a relative CSV dataset path absolute so embedded configs re-run from anywhere."""
    ds = cfg.get("dataset")
    if isinstance(ds, dict) and ds.get("source") == "csv" and "path" in ds:
        path = Path(ds["path"])
        if not path.is_absolute():
            ds["path"] = str((base_dir / path).resolve())
    return cfg


def to_json(cfg: dict[str, Any]) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}.{key} is required")
    return section[key]


def build_dataset(cfg: dict[str, Any], base_dir: Path | None = None) -> Dataset:
    ds = cfg.get("dataset")
    if not isinstance(ds, dict):
        raise ConfigError("a 'dataset' section is required")
    lam = float(_need(ds, "lambda", "dataset"))
    loss = LossSpec.parse(ds.get("loss", "squared"), ds.get("gamma"))
    source = ds.get("source")
    if source == "synthetic":
        lab = ds.get("labels", {})
        model = LabelModel(**lab) if lab else None
        return synth_gaussian(int(_need(ds, "d", "dataset")), int(_need(ds, "m", "dataset")),
                              int(ds.get("seed", 0)), lam, loss, model)
    if source == "csv":
        path = Path(_need(ds, "path", "dataset"))
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        schema = CsvSchema(
            label_column=ds.get("label_column", -1),
            feature_columns=ds.get("feature_columns"),
            delimiter=ds.get("delimiter", ","),
            has_header=bool(ds.get("has_header", True)),
            standardize=bool(ds.get("standardize", True)),
        )
        return load_csv(path, schema, lam, loss)
    raise ConfigError(f"dataset.source must be 'synthetic' or 'csv', got {source!r}")


def topology_spec(topo: dict[str, Any], cfg: dict[str, Any], *, H: int | None = None) -> dict[str, Any]:
    """Expand a topology section into an explicit node list."""
    solver, delay = cfg["solver"], cfg["delay"]
    H = int(topo.get("H", solver["H"]) if H is None else H)
    R = int(solver["R"])
    t_lp, t_cp = float(delay["t_lp"]), float(delay["t_cp"])
    edge = float(delay["t_delay"]) if "t_delay" in delay else float(delay["r"]) * t_lp
    sub = float(delay["sub_delay"]) if "sub_delay" in delay else float(delay.get("sub_r", 0.0)) * t_lp
    kind = topo.get("kind", "star")
    if kind == "star":
        return star_spec(int(_need(topo, "leaves", "topology")), H, R, t_lp=t_lp, t_cp=t_cp, delay=edge)
    if kind == "two_layer":
        return two_layer_spec(
            int(_need(topo, "branches", "topology")), int(_need(topo, "leaves_per_branch", "topology")),
            H, int(topo.get("T", 1)), R, t_lp=t_lp, t_cp=t_cp, t_cp_sub=topo.get("t_cp_sub"),
            delay=edge, sub_delay=sub,
        )
    if kind == "explicit":
        nodes = copy.deepcopy(_need(topo, "nodes", "topology"))
        for n in nodes:
            if not n.get("children"):
                n.setdefault("H", H)
                n.setdefault("t_lp", t_lp)
            else:
                n.setdefault("t_cp", t_cp)
        parents = {c for n in nodes for c in n.get("children", ())}
        for n in nodes:
            if n["id"] not in parents:
                n.setdefault("R", R)
        return {"nodes": nodes}
    raise ConfigError(f"unknown topology kind {kind!r}")


@dataclass
class Experiment:
    name: str
    topology: TreeTopology
    partition: DataPartition


def build_experiments(cfg: dict[str, Any], dataset: Dataset, *, H: int | None = None) -> list[Experiment]:
    """One (topology, partition) per configured topology, data split evenly over leaves."""
    if "topologies" in cfg:
        named = list(cfg["topologies"].items())
    elif "topology" in cfg:
        named = [("main", cfg["topology"])]
    else:
        raise ConfigError("a 'topology' section is required")
    out = []
    for name, topo in named:
        topology = build_topology(topology_spec(topo, cfg, H=H))
        out.append(Experiment(name, topology, partition_evenly(dataset.m, topology.leaves)))
    return out


def seeds_of(cfg: dict[str, Any]) -> list[int]:
    solver = cfg["solver"]
    if "seeds" in solver:
        seeds = [int(s) for s in solver["seeds"]]
        if not seeds:
            raise ConfigError("solver.seeds is empty")
        return seeds
    return [int(solver["seed"])]


def parse_seed_range(text: str) -> list[int]:
    """``"3"`` -> [3]; ``"0..19"`` -> [0, ..., 19] (inclusive)."""
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split("..", 1))
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise ConfigError(f"bad seed range {text!r}; expected N or N..M") from None
