"""Report files: a JSON body, CSV curves, PNG figures and a timing sidecar.

The JSON body depends only on the config, so two runs of one config write
identical bytes.  Wall-clock data (timestamps, durations, worker count) go
to ``<name>.meta.json`` next to it.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "dumps_body", "curve_csv", "write_report", "plot_curves"]


def _clean(obj):
    """Plain JSON values with a stable key order and no NaN/inf."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            return None if obj != obj else ("inf" if obj > 0 else "-inf")
        return obj
    if hasattr(obj, "item"):  # numpy scalars
        return _clean(obj.item())
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def dumps_body(body: dict) -> str:
    return json.dumps(_clean(body), sort_keys=True, indent=2) + "\n"


def curve_csv(curve: dict) -> str:
    """delta, index, K, T (or H), witness_center for one curve of a report."""
    meta = curve.get("metadata", {})
    horizon_key = "H" if "H" in meta else "T"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "index", "K", horizon_key, "witness_center"])
    for e in curve["entries"]:
        w.writerow([repr(float(e["delta"])), e["index"], meta.get("K", ""),
                    meta.get(horizon_key, ""), e.get("witness_center", "")])
    return buf.getvalue()


def plot_curves(curves: list, path: Path, title: str = ""):
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for c in curves:
        xs = [float(e["delta"]) for e in c["entries"]]
        ys = [e["index"] for e in c["entries"]]
        ax.step(xs, ys, where="post", marker="o", ms=3, lw=1.2, label=c.get("name", ""))
    ax.set_xscale("log", base=2)
    ax.set_xlabel(r"$\delta$")
    ax.set_ylabel(r"$N(\delta)$")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    ax.grid(alpha=0.3, lw=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def write_report(out_dir, name: str, body: dict, started: float, workers: int,
                 figures: bool = True) -> dict:
    """Write ``name.json``, one CSV per curve, an index-curve figure and the sidecar.

    Returns the paths written, keyed by role.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, "tool_version": __version__, **body}
    paths = {"report": out / f"{name}.json"}
    paths["report"].write_text(dumps_body(body), encoding="utf-8")
    curves = [c for c in body.get("curves", []) if c.get("entries")]
    for c in curves:
        p = out / f"{name}_{c['name']}.csv"
        p.write_text(curve_csv(c), encoding="utf-8")
        paths[f"csv:{c['name']}"] = p
    if figures and curves:
        p = out / f"{name}.png"
        plot_curves(curves, p, title=name)
        paths["figure"] = p
    meta = {"created": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "seconds": time.time() - started,
            "workers": workers, "pid": os.getpid()}
    paths["meta"] = out / f"{name}.meta.json"
    paths["meta"].write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return paths
