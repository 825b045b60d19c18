"""CSV and JSON writers for runs and sweeps.

Numbers are written with 9 significant digits so regression diffs stay
readable, and nothing time- or host-dependent goes into these files.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .density import GriddedPdf

NUM_FMT = "{:.9g}"

ROUND_COLUMNS = ["round", "n_full", "n_trunc", "n_abstain", "hellinger", "variance", "v_full", "v_trunc"]


def fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else NUM_FMT.format(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def versions() -> dict:
    return {
        "knowledge_collapse": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def write_pdf_csv(path, pdf: GriddedPdf):
    write_csv(path, ["x", "density"], zip(pdf.x, pdf.densities))


def write_rounds_csv(path, result):
    rows = ([getattr(r, c) for c in ROUND_COLUMNS] for r in result.records)
    write_csv(path, ROUND_COLUMNS, rows)


def write_run(result, out_dir, command=None) -> list:
    """Per-round CSV, final-pdf CSV and metadata JSON; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rounds, final, meta = out / "rounds.csv", out / "final_pdf.csv", out / "metadata.json"
    write_rounds_csv(rounds, result)
    write_pdf_csv(final, result.final_pdf)
    write_json(meta, {
        "kind": "run",
        "command": command,
        "config": result.config.to_dict(),
        "seed": result.config.seed,
        "status": result.status,
        "events": list(result.events),
        "final_hellinger": result.final_hellinger,
        "versions": versions(),
    })
    return [rounds, final, meta]


def raw_rows(result):
    axes = result.grid.axis_names
    header = axes + ["replication", "seed", "status", "final_hellinger", "final_variance"]
    rows = [
        [r.coords[a] for a in axes] + [r.replication, r.seed, r.status, r.final_hellinger, r.final_variance]
        for r in result.runs
    ]
    return header, rows


def write_sweep(result, rows, out_dir, spec: dict, command=None, pdfs=None, truth=None) -> list:
    """Raw per-run CSV, aggregate CSV, metadata JSON and optional pdf CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw_path, agg_path, meta_path = out / "raw.csv", out / "aggregate.csv", out / "metadata.json"
    header, raw = raw_rows(result)
    write_csv(raw_path, header, raw)
    agg_cols = list(rows[0]) if rows else ["mean", "std", "n", "n_failed"]
    write_csv(agg_path, agg_cols, ([row[c] for c in agg_cols] for row in rows))
    written = [raw_path, agg_path]
    if pdfs:
        for coords, dens in pdfs:
            name = "pdf_" + "_".join(f"{k}={fmt(v)}" for k, v in coords.items()) + ".csv"
            path = out / name
            write_csv(path, ["x", "density"], zip(truth.x, dens))
            written.append(path)
        path = out / "pdf_truth.csv"
        write_pdf_csv(path, truth)
        written.append(path)
    failures = [
        {"coords": r.coords, "replication": r.replication, "error": r.error}
        for r in result.runs if r.status == "error"
    ]
    write_json(meta_path, {
        "kind": "sweep",
        "command": command,
        "sweep": spec,
        "total_runs": len(result.runs),
        "failures": failures,
        "versions": versions(),
    })
    written.append(meta_path)
    return written
