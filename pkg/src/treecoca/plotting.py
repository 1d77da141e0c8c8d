"""Emit standalone matplotlib scripts that render harness CSVs.

The harness never imports matplotlib; the generated script does.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

KINDS = ("gap-vs-time", "sweep", "h-star", "bound")

_PRELUDE = '''\
"""Generated by treecoca plot; edit freely."""
import csv
import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(ln for ln in fh if not ln.startswith("#")))
    header, body = rows[0], rows[1:]
    return [dict(zip(header, r)) for r in body]


CSV_PATHS = {paths!r}
OUTPUT = {output!r}
'''

_BODIES = {
    "gap-vs-time": '''
fig, ax = plt.subplots(figsize=(6, 4))
for path in CSV_PATHS:
    rows = read(path)
    t = [float(r["sim_time_seconds"]) for r in rows]
    g = [max(float(r["gap"]), 1e-300) for r in rows]
    ax.plot(t, g, label=path.rsplit("/", 1)[-1])
ax.set_yscale("log")
ax.set_xlabel("simulated time [s]")
ax.set_ylabel("duality gap")
ax.legend()
fig.tight_layout()
fig.savefig(OUTPUT)
''',
    "sweep": '''
fig, ax = plt.subplots(figsize=(6, 4))
for path in CSV_PATHS:
    curves = {}
    for r in read(path):
        key = (r["seed"], float(r["r"]), int(r["H"]))
        curves.setdefault(key, []).append((float(r["sim_time"]), max(float(r["gap"]), 1e-300)))
    for (seed, rr, H), pts in sorted(curves.items()):
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=f"r={rr:g} H={H} seed={seed}")
ax.set_yscale("log")
ax.set_xscale("log")
ax.set_xlabel("simulated time [s]")
ax.set_ylabel("duality gap")
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig(OUTPUT)
''',
    "h-star": '''
fig, ax = plt.subplots(figsize=(6, 4))
for path in CSV_PATHS:
    rows = read(path)
    r = [max(float(x["r"]), 1e-1) for x in rows]
    h = [int(x["h_star"]) for x in rows]
    ax.plot(r, h, marker="o", label=path.rsplit("/", 1)[-1])
ax.set_xscale("log")
ax.set_xlabel("delay ratio r = t_delay / t_lp")
ax.set_ylabel("optimal H")
ax.legend()
fig.tight_layout()
fig.savefig(OUTPUT)
''',
    "bound": '''
fig, ax = plt.subplots(figsize=(6, 4))
for path in CSV_PATHS:
    rows = read(path)
    t = [int(x["round"]) for x in rows]
    ax.plot(t, [float(x["empirical_mean_gap_over_seeds"]) for x in rows], label="empirical mean")
    ax.plot(t, [float(x["theorem_bound"]) for x in rows], "--", label="bound")
ax.set_yscale("log")
ax.set_xlabel("outer round")
ax.set_ylabel("dual suboptimality")
ax.legend()
fig.tight_layout()
fig.savefig(OUTPUT)
''',
}


def emit_plot_script(csv_paths: Sequence[str | Path], kind: str, script_path: str | Path,
                     image_path: str | Path | None = None) -> Path:
    """Write a script that draws ``kind`` from ``csv_paths`` into ``image_path``."""
    if kind not in _BODIES:
        raise ValueError(f"unknown figure kind {kind!r}; choose from {KINDS}")
    paths = [Path(p) for p in csv_paths]
    if not paths:
        raise ValueError("no CSV files given")
    for p in paths:
        if not p.is_file():
            raise FileNotFoundError(f"CSV not found: {p}")
    script_path = Path(script_path)
    image = Path(image_path) if image_path is not None else script_path.with_suffix(".png")
    text = _PRELUDE.format(paths=[str(p) for p in paths], output=str(image)) + _BODIES[kind]
    script_path.parent.mkdir(parents=True, exist_ok=True)
    script_path.write_text(text, encoding="utf-8")
    return script_path
