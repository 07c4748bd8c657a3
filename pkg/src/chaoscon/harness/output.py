"""Writing reports: JSON, the flat CSV table with its column header block, and PNG figures."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from chaoscon.reports import to_jsonable

__all__ = ["read_report", "render_figure", "write_outputs", "write_table"]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def write_table(table: dict, path: Path, title: str = "") -> None:
    buf = io.StringIO()
    buf.write(f"# table: {title}\n")
    for col in table["columns"]:
        buf.write(f"# column {col}: {table['docs'].get(col, '')}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table["columns"])
    for row in table["rows"]:
        writer.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _column(table: dict, name: str) -> np.ndarray:
    j = table["columns"].index(name)
    out = []
    for row in table["rows"]:
        v = row[j]
        if v is None or v == "" or isinstance(v, bool):
            out.append(np.nan)
        elif v == "inf":
            out.append(np.inf)
        else:
            out.append(float(v))
    return np.array(out)


def render_figure(table: dict, figure: dict, path: Path) -> bool:
    """Draw ``figure`` (a declarative dict) from ``table``; False when there is nothing to plot."""
    if not figure or not table["rows"]:
        return False
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        x = _column(table, figure["x"])
        groups = [(None, np.ones(x.size, dtype=bool))]
        if "group" in figure:
            g = _column(table, figure["group"])
            groups = [(val, g == val) for val in dict.fromkeys(g.tolist())]
        for col in figure["y"]:
            y = _column(table, col)
            err_col = figure.get("yerr", {}).get(col)
            err = _column(table, err_col) if err_col else None
            for val, mask in groups:
                label = col if val is None else f"{figure['group']}={val:g}"
                xs, ys = x[mask], y[mask]
                if figure.get("kind") == "scatter":
                    ax.scatter(xs, ys, s=8, label=label)
                elif err is not None:
                    ax.errorbar(xs, ys, yerr=err[mask], marker="o", ms=3, capsize=2, label=label)
                else:
                    ax.plot(xs, ys, marker="o", ms=3, label=label)
        if figure.get("diagonal"):
            lo = np.nanmin(x)
            hi = np.nanmax(x)
            ax.plot([lo, hi], [lo, hi], color="k", lw=0.8, ls="--", label="y = x")
        if "hline" in figure:
            ax.axhline(figure["hline"], color="k", lw=0.8, ls="--")
        if figure.get("logx"):
            ax.set_xscale("log")
        if figure.get("logy"):
            vals = np.concatenate([_column(table, c) for c in figure["y"]])
            vals = vals[np.isfinite(vals)]
            if vals.size and np.all(vals > 0):
                ax.set_yscale("log")
            else:
                ax.set_yscale("symlog", linthresh=1e-6)
        ax.set_xlabel(figure.get("xlabel", figure["x"]))
        ax.set_ylabel(figure.get("ylabel", ""))
        ax.set_title(figure.get("title", ""))
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, dpi=100, metadata={"Software": None})
    finally:
        plt.close(fig)
    return True


def write_outputs(report: dict, out_dir: Path, stem: str, figures: bool = True) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    json_path = out_dir / f"{stem}.json"
    json_path.write_text(json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths.append(json_path)
    results = report["results"]
    for j, res in enumerate(results):
        suffix = "" if len(results) == 1 else f"_{j}"
        csv_path = out_dir / f"{stem}{suffix}.csv"
        write_table(res["table"], csv_path, res["name"])
        paths.append(csv_path)
        if figures:
            png = out_dir / f"{stem}{suffix}.png"
            if render_figure(res["table"], res.get("figure", {}), png):
                paths.append(png)
    return paths


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    for key in ("version", "config", "results", "verdict", "timing"):
        if key not in data:
            raise ValueError(f"{path}: report lacks the '{key}' field")
    return data
