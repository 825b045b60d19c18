"""Command-line entry point: ``knowledge-collapse {run,sweep,plot,diversity,rerun}``.

Exit codes: 0 success, 2 invalid input, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
import time
from importlib import resources
from pathlib import Path

from . import __version__, diversity as dv, persist, svg
from .density import eval_grid
from .distributions import TrueDistribution
from .errors import ConfigError, UsageError
from .simulation import SimConfig, run_simulation
from .sweep import SweepGrid, aggregate, mean_pdfs, run_sweep

log = logging.getLogger("knowledge_collapse")

WORKERS_ENV = "COLLAPSE_SIM_WORKERS"


class InputError(Exception):
    """Bad user input; reported on stderr with exit status 2."""


# -- config loading -----------------------------------------------------------

def preset_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("knowledge_collapse.presets").iterdir()
                  if p.name.endswith(".json"))


def _read_json(path_or_preset: str):
    """Parse a JSON file, or a shipped preset when no such file exists."""
    path = Path(path_or_preset)
    if path.exists():
        text, label = path.read_text(), str(path)
    elif path_or_preset in preset_names():
        text = resources.files("knowledge_collapse.presets").joinpath(path_or_preset + ".json").read_text()
        label = f"preset:{path_or_preset}"
    else:
        raise InputError(f"{path_or_preset}: no such file or preset (presets: {', '.join(preset_names())})")
    try:
        return json.loads(text), text, label
    except json.JSONDecodeError as exc:
        raise InputError(f"{label}:{exc.lineno}: invalid JSON: {exc.msg}") from None


def _field_line(text: str, name) -> int:
    if not name:
        return 0
    m = re.search(r'"%s"\s*:' % re.escape(str(name)), text)
    return text.count("\n", 0, m.start()) + 1 if m else 0


def _config_error(exc: ConfigError, text: str, label: str) -> InputError:
    line = _field_line(text, exc.field)
    where = f"{label}:{line}" if line else label
    return InputError(f"{where}: {exc}")


def load_sim_config(path: str, seed=None) -> SimConfig:
    data, text, label = _read_json(path)
    if isinstance(data, dict) and data.get("kind") == "run":
        data = data["config"]
    if not isinstance(data, dict):
        raise InputError(f"{label}:1: config must be a JSON object")
    if seed is not None:
        data = dict(data, seed=seed)
    try:
        return SimConfig.from_dict(data)
    except ConfigError as exc:
        raise _config_error(exc, text, label) from None
    except TypeError as exc:
        raise InputError(f"{label}: {exc}") from None


def load_sweep(path: str, seed=None):
    data, text, label = _read_json(path)
    if isinstance(data, dict) and data.get("kind") == "sweep":
        data = data["sweep"]
    if not isinstance(data, dict):
        raise InputError(f"{label}:1: sweep file must be a JSON object")
    if seed is not None:
        data = dict(data, base_seed=seed)
    try:
        grid = SweepGrid.from_dict(data)
    except ConfigError as exc:
        raise _config_error(exc, text, label) from None
    return grid, data


# -- manifests ----------------------------------------------------------------

def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp for byte-reproducible output
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def write_manifest(out_dir: Path, command: str, argv, artifacts, name=None) -> dict:
    manifest = {
        "command": command,
        "argv": list(argv),
        "output_dir": str(out_dir),
        "artifacts": sorted(str(Path(a).relative_to(out_dir)) for a in artifacts),
        "tool_version": __version__,
        "timestamp": _timestamp(),
    }
    persist.write_json(out_dir / (name or f"manifest-{command}.json"), manifest)
    return manifest


# -- commands -------------------------------------------------------------------

def cmd_run(args) -> dict:
    cfg = load_sim_config(args.config, args.seed)
    out = Path(args.out)
    result = run_simulation(cfg)
    files = persist.write_run(result, out, command=_replay_args(args))
    log.info("final Hellinger distance %.4f (%s)", result.final_hellinger, result.status)
    return write_manifest(out, "run", args.argv, files)


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"{WORKERS_ENV} must be an integer (got {env!r})") from None
    return 1


def cmd_sweep(args) -> dict:
    grid, spec = load_sweep(args.sweep, args.seed)
    out = Path(args.out)
    emit_pdfs = bool(spec.get("emit_pdfs", False))
    group_by = spec.get("group_by") or grid.axis_names
    result = run_sweep(grid, workers=_workers(args), keep_pdfs=emit_pdfs)
    try:
        rows = aggregate(result, group_by)
    except UsageError as exc:
        raise InputError(str(exc)) from None
    pdfs = truth = None
    if emit_pdfs:
        pdfs = mean_pdfs(result, group_by)
        truth = eval_grid(TrueDistribution(df=float(grid.base.df)), grid.base.grid)
    full_spec = dict(spec, **grid.to_dict())
    files = persist.write_sweep(result, rows, out, full_spec, command=_replay_args(args),
                                pdfs=pdfs, truth=truth)
    n_bad = sum(r.status == "error" for r in result.runs)
    log.info("%d runs, %d failed", len(result.runs), n_bad)
    return write_manifest(out, "sweep", args.argv, files)


def _read_table(path: str, required=()) -> tuple:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{path}: no such file")
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"{path}: missing column '{missing[0]}'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append((lineno, dict(zip(header, (c.strip() for c in row)))))
    return header, rows


def _float(path, lineno, value, column):
    try:
        return float(value)
    except ValueError:
        raise InputError(f"{path}: row {lineno}: column '{column}' is not a number: {value!r}") from None


def _pdf_label(path: Path) -> str:
    stem = path.stem
    return stem[4:] if stem.startswith("pdf_") else stem


def cmd_plot(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = []
    for item in args.input:
        p = Path(item)
        inputs.extend(sorted(p.glob("pdf_*.csv")) if p.is_dir() else [p])
    if not inputs:
        raise InputError("no input CSVs")
    if args.kind == "kde-overlay":
        labels = args.labels or [_pdf_label(p) for p in inputs]
        if len(labels) != len(inputs):
            raise InputError("--labels must give one label per input")
        curves = []
        for p, label in zip(inputs, labels):
            _, rows = _read_table(str(p), ("x", "density"))
            x = [_float(p, n, r["x"], "x") for n, r in rows]
            y = [_float(p, n, r["density"], "density") for n, r in rows]
            if not x:
                raise InputError(f"{p}: no data rows")
            curves.append((label, x, y))
        # truth last so it is drawn on top
        curves.sort(key=lambda c: c[0] == "truth")
        doc = svg.kde_overlay(curves, title=args.title or "", x_label="x", y_label="density")
    else:
        if len(inputs) != 1:
            raise InputError("distance-lines takes exactly one aggregated CSV")
        p = inputs[0]
        required = [args.x, "mean"] + ([args.series] if args.series else [])
        _, rows = _read_table(str(p), required)
        series = {}
        for n, r in rows:
            key = r[args.series] if args.series else "mean"
            xv = r[args.x]
            if xv == "none":
                raise InputError(f"{p}: row {n}: x axis value 'none' cannot be placed on a numeric axis")
            series.setdefault(key, []).append((_float(p, n, xv, args.x), _float(p, n, r["mean"], "mean")))
        if not series:
            raise InputError(f"{p}: no data rows")

        def order(k):
            try:
                return (0, float(k), k)
            except ValueError:
                return (1, 0.0, k)

        label = (lambda k: f"{args.series}={k}") if args.series else (lambda k: k)
        doc = svg.distance_lines([(label(k), series[k]) for k in sorted(series, key=order)],
                                 title=args.title or "", x_label=args.x)
    target = out / args.name
    target.write_text(doc)
    return write_manifest(out, "plot", args.argv, [target], name=f"{target.stem}.manifest.json")


def _vectors(path: str) -> dv.VectorSet:
    header, rows = _read_table(path, ("label",))
    cols = [c for c in header if re.fullmatch(r"v\d+", c)]
    cols.sort(key=lambda c: int(c[1:]))
    if not cols or cols != [f"v{i}" for i in range(len(cols))]:
        raise InputError(f"{path}: vector columns must be v0..v{{d-1}}")
    labels, vecs = [], []
    for n, r in rows:
        labels.append(r["label"])
        vecs.append([_float(path, n, r[c], c) for c in cols])
    try:
        return dv.VectorSet(tuple(labels), vecs)
    except UsageError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_diversity(args) -> dict:
    out = Path(args.out)
    _, ref_rows = _read_table(args.reference, ("label",))
    reference = [r["label"] for _, r in ref_rows]
    if len(set(reference)) != len(reference):
        raise InputError(f"{args.reference}: duplicate reference labels")
    if len(reference) < 2:
        raise InputError(f"{args.reference}: need at least two reference entities")
    header, m_rows = _read_table(args.mentions, ("mention",))
    if not m_rows:
        raise InputError(f"{args.mentions}: no mentions")
    for n, r in m_rows:
        if not r["mention"]:
            raise InputError(f"{args.mentions}: row {n}: empty mention")

    known = set(reference)
    if args.vectors:
        vs = _vectors(args.vectors)
        lookup = set(vs.labels)
        for n, r in m_rows:
            if r["mention"] not in lookup:
                raise InputError(f"{args.mentions}: row {n}: no vector for mention {r['mention']!r}")
        missing = [l for l in reference if l not in lookup]
        if missing:
            raise InputError(f"{args.reference}: no vector for reference label {missing[0]!r}")
        mention_labels = sorted({r["mention"] for _, r in m_rows})
        resolved = dv.resolve_entities(vs.subset(mention_labels), vs.subset(reference),
                                       args.eps, metric=args.metric)
    else:
        resolved = {r["mention"]: (r["mention"] if r["mention"] in known else None) for _, r in m_rows}

    weights = None
    if args.weights:
        _, w_rows = _read_table(args.weights, ("label", "weight"))
        weights = {r["label"]: _float(args.weights, n, r["weight"], "weight") for n, r in w_rows}
    partition = None
    if args.groups:
        _, g_rows = _read_table(args.groups, ("label", "group"))
        groups = {r["label"]: r["group"] for _, r in g_rows}
        if args.group_weights:
            _, gw_rows = _read_table(args.group_weights, ("group", "weight"))
            gweights = {r["group"]: _float(args.group_weights, n, r["weight"], "weight") for n, r in gw_rows}
        else:
            gweights = {g: 1.0 for g in set(groups.values())}
        try:
            partition = dv.GroupPartition(groups, gweights)
        except UsageError as exc:
            raise InputError(f"{args.groups}: {exc}") from None

    by_key = {}
    for _, r in m_rows:
        key = (r.get("model") or "all", r.get("prompt") or "all")
        by_key.setdefault(key, []).append(resolved[r["mention"]])

    out.mkdir(parents=True, exist_ok=True)
    R = len(reference)
    index_rows, report = [], {"reference_size": R, "groups": []}
    per_prompt = {}
    for (model, prompt) in sorted(by_key):
        labels = by_key[(model, prompt)]
        table = dv.frequency_table(labels, reference)
        per_prompt.setdefault(prompt, []).append(table)
        entry = {"model": model, "prompt": prompt, "mentions": len(labels), "resolved": table.total}
        if table.total == 0:
            index_rows.append([prompt, model, len(labels), 0, "nan", "nan", float("nan"), float("nan")])
            entry["note"] = "no mention resolved to the reference list"
            report["groups"].append(entry)
            continue
        h = dv.shannon_index(table)
        j = dv.pielou_evenness(h, R)
        index_rows.append([prompt, model, len(labels), table.total, f"{h:.2f}", f"{j:.2f}", h, j])
        zero = dv.minimal_representativeness(table)
        entry.update({
            "unmentioned_count": len(zero),
            "unmentioned": zero,
            "uniform_deviation": dv.uniform_deviation(table),
        })
        try:
            if weights is not None:
                entry["weighted_deviation"] = dv.proportional_deviation(table, weights)
            if partition is not None:
                entry["group_deviation"] = dv.group_proportional_deviation(table, partition)
        except UsageError as exc:
            raise InputError(str(exc)) from None
        report["groups"].append(entry)

    files = []
    idx_path = out / "indices.csv"
    persist.write_csv(idx_path, ["prompt", "model", "mentions", "resolved", "shannon", "pielou",
                                 "shannon_exact", "pielou_exact"], index_rows)
    files.append(idx_path)
    for prompt in sorted(per_prompt):
        total = per_prompt[prompt][0]
        for t in per_prompt[prompt][1:]:
            total = total + t
        n = total.total
        rows = [[rank, label, c, (c / n) if n else float("nan")]
                for rank, (label, c) in enumerate(total.ranked(), start=1)]
        safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", prompt)
        path = out / f"frequencies_{safe}.csv"
        persist.write_csv(path, ["rank", "label", "count", "proportion"], rows)
        files.append(path)
    rep_path = out / "violations.json"
    persist.write_json(rep_path, report)
    files.append(rep_path)
    return write_manifest(out, "diversity", args.argv, files)


def cmd_rerun(args) -> dict:
    data, _, label = _read_json(args.metadata)
    argv = data.get("argv") if isinstance(data, dict) else None
    command = data.get("command") if isinstance(data, dict) else None
    if isinstance(command, dict):
        argv = command.get("argv")
    if not argv:
        raise InputError(f"{label}: no recorded command line")
    ns = build_parser().parse_args(argv)
    ns.argv = argv
    # run and sweep replay from the embedded config, not from the original file
    if data.get("kind") == "run":
        ns.config, ns.seed = args.metadata, None
    elif data.get("kind") == "sweep":
        ns.sweep, ns.seed = args.metadata, None
    return ns.func(ns)


def _replay_args(args) -> dict:
    return {"argv": list(args.argv)}


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="knowledge-collapse", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single simulation run")
    p.add_argument("--config", default="default", help="config JSON or preset name")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="parameter sweep with replications")
    p.add_argument("--sweep", required=True, help="sweep JSON or preset name")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG figure from run/sweep CSVs")
    p.add_argument("--kind", choices=["kde-overlay", "distance-lines"], required=True)
    p.add_argument("--input", nargs="+", required=True,
                   help="CSV files (or a sweep output directory for kde-overlay)")
    p.add_argument("--labels", nargs="+")
    p.add_argument("--x", default="delta", help="x-axis column for distance-lines")
    p.add_argument("--series", help="series column for distance-lines")
    p.add_argument("--title")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="figure.svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("diversity", help="Shannon/Pielou indices and representativeness report")
    p.add_argument("--mentions", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--vectors")
    p.add_argument("--eps", type=float, default=3.0)
    p.add_argument("--metric", choices=list(dv.METRICS), default="euclidean")
    p.add_argument("--weights")
    p.add_argument("--groups")
    p.add_argument("--group-weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("rerun", help="repeat a command from its metadata or manifest JSON")
    p.add_argument("metadata")
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
