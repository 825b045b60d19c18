import csv
import json
import math

import pytest

from knowledge_collapse.cli import main, preset_names

FAST = {"n_rounds": 6, "generation_period": 3, "seed": 4}


@pytest.fixture(autouse=True)
def _fixed_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    monkeypatch.delenv("COLLAPSE_SIM_WORKERS", raising=False)


def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2))
    return str(path)


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_presets_shipped():
    assert {"default", "figure3", "figure4", "figure5", "figure6", "appendixA"} <= set(preset_names())


def test_run_default_preset(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--out", str(out), "--seed", "3"]) == 0
    assert {"rounds.csv", "final_pdf.csv", "metadata.json", "manifest-run.json"} == {p.name for p in out.iterdir()}
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["seed"] == 3 and meta["config"]["seed"] == 3
    manifest = json.loads((out / "manifest-run.json").read_text())
    assert manifest["artifacts"] == ["final_pdf.csv", "metadata.json", "rounds.csv"]
    assert manifest["timestamp"] == "2023-11-14T22:13:20Z"
    rows = read_rows(out / "rounds.csv")
    assert len(rows) == 100
    assert list(rows[0]) == ["round", "n_full", "n_trunc", "n_abstain", "hellinger", "variance", "v_full", "v_trunc"]


def test_run_is_byte_reproducible(tmp_path):
    cfg = write_json(tmp_path / "c.json", FAST)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    first = snapshot(out)
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert snapshot(out) == first


def test_invalid_config_names_field_and_line(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "n_rounds": 5,\n  "delta": 1.5\n}\n')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "delta" in err and "bad.json:3" in err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("text", ['{"unknown_knob": 1}', "[1, 2]", "{not json"])
def test_other_config_errors(tmp_path, text, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(text)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert "no such file or preset" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    assert main(["run"]) == 2
    assert main(["frobnicate"]) == 2


def test_internal_error_exit_code(tmp_path, monkeypatch):
    import knowledge_collapse.cli as cli

    def boom(cfg):
        raise RuntimeError("unexpected")

    monkeypatch.setattr(cli, "run_simulation", boom)
    assert main(["run", "--out", str(tmp_path / "o")]) == 1


def _small_sweep(tmp_path, **extra):
    spec = {"axes": {"delta": [1.0, 0.5]}, "replications": 2, "base_config": FAST, "base_seed": 1}
    spec.update(extra)
    return write_json(tmp_path / "s.json", spec)


def test_sweep_outputs_and_worker_independence(tmp_path, monkeypatch):
    spec = _small_sweep(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--sweep", spec, "--out", str(a), "--workers", "1"]) == 0
    monkeypatch.setenv("COLLAPSE_SIM_WORKERS", "3")
    assert main(["sweep", "--sweep", spec, "--out", str(b)]) == 0
    assert (a / "aggregate.csv").read_bytes() == (b / "aggregate.csv").read_bytes()
    assert (a / "raw.csv").read_bytes() == (b / "raw.csv").read_bytes()
    rows = read_rows(a / "aggregate.csv")
    assert [r["delta"] for r in rows] == ["0.5", "1"] and all(r["n"] == "2" for r in rows)
    raw = read_rows(a / "raw.csv")
    assert len(raw) == 4 and {r["status"] for r in raw} == {"ok"}


def test_sweep_seed_override_and_bad_workers_env(tmp_path, monkeypatch, capsys):
    spec = _small_sweep(tmp_path)
    assert main(["sweep", "--sweep", spec, "--out", str(tmp_path / "x"), "--seed", "9"]) == 0
    meta = json.loads((tmp_path / "x" / "metadata.json").read_text())
    assert meta["sweep"]["base_seed"] == 9
    monkeypatch.setenv("COLLAPSE_SIM_WORKERS", "many")
    assert main(["sweep", "--sweep", spec, "--out", str(tmp_path / "y")]) == 2


def test_malformed_sweep(tmp_path, capsys):
    bad = write_json(tmp_path / "bad.json", {"axes": {"delta": [1.0]}, "replications": 0})
    assert main(["sweep", "--sweep", bad, "--out", str(tmp_path / "o")]) == 2
    assert "replications" in capsys.readouterr().err


def test_figure3_shape_and_overlay_plot(tmp_path):
    # the preset's axis with a shortened base config
    spec = {"axes": {"delta": [1.0, 0.8, 0.6, 0.4, 0.2]}, "replications": 1,
            "base_config": FAST, "emit_pdfs": True}
    out = tmp_path / "f3"
    assert main(["sweep", "--sweep", write_json(tmp_path / "f3.json", spec), "--out", str(out)]) == 0
    pdfs = sorted(p.name for p in out.glob("pdf_*.csv"))
    assert len(pdfs) == 6 and "pdf_truth.csv" in pdfs
    plot = tmp_path / "plot"
    assert main(["plot", "--kind", "kde-overlay", "--input", str(out), "--out", str(plot), "--name", "f3.svg"]) == 0
    svg = (plot / "f3.svg").read_text()
    assert svg.count('class="curve"') == 6
    assert 'data-label="truth"' in svg and 'data-label="delta=0.2"' in svg
    first = (plot / "f3.svg").read_bytes()
    assert main(["plot", "--kind", "kde-overlay", "--input", str(out), "--out", str(plot), "--name", "f3.svg"]) == 0
    assert (plot / "f3.svg").read_bytes() == first


def test_distance_lines(tmp_path, capsys):
    agg = write_rows(tmp_path / "agg.csv", ["delta", "eta", "mean", "std", "n", "n_failed"], [
        [1.0, 0.001, 0.1, 0, 1, 0], [0.5, 0.001, 0.4, 0, 1, 0], [1.0, 0.1, 0.09, 0, 1, 0],
    ])
    out = tmp_path / "p"
    assert main(["plot", "--kind", "distance-lines", "--input", agg, "--x", "delta", "--series", "eta",
                 "--out", str(out)]) == 0
    svg = (out / "figure.svg").read_text()
    # eta=0.001 has two points, eta=0.1 only one
    assert svg.count("<polyline") == 1 and svg.count('class="marker"') == 3
    assert main(["plot", "--kind", "distance-lines", "--input", agg, "--x", "sigma_tr",
                 "--out", str(out)]) == 2
    assert "missing column 'sigma_tr'" in capsys.readouterr().err


def test_kde_overlay_schema_error(tmp_path, capsys):
    bad = write_rows(tmp_path / "pdf_bad.csv", ["x", "y"], [[0, 1]])
    assert main(["plot", "--kind", "kde-overlay", "--input", bad, "--out", str(tmp_path / "o")]) == 2
    assert "missing column 'density'" in capsys.readouterr().err


def _reference(tmp_path, n):
    return write_rows(tmp_path / "ref.csv", ["label"], [[f"e{i:04d}"] for i in range(n)])


def test_diversity_table_layout(tmp_path):
    ref = _reference(tmp_path, 2693)
    # 55 equally mentioned entities: H' = ln 55 = 4.007
    mentions = write_rows(tmp_path / "m.csv", ["mention", "model", "prompt"],
                          [[f"e{i:04d}", "m1", "v1"] for i in range(55)])
    out = tmp_path / "d"
    assert main(["diversity", "--mentions", mentions, "--reference", ref, "--out", str(out)]) == 0
    (row,) = read_rows(out / "indices.csv")
    assert row["shannon"] == "4.01" and row["pielou"] == "0.51"
    assert float(row["shannon_exact"]) == pytest.approx(math.log(55))
    freq = read_rows(out / "frequencies_v1.csv")
    assert len(freq) == 2693 and freq[0]["rank"] == "1"
    report = json.loads((out / "violations.json").read_text())
    assert report["groups"][0]["unmentioned_count"] == 2693 - 55


def test_diversity_uniform_with_vectors_and_weights(tmp_path):
    ref = write_rows(tmp_path / "ref.csv", ["label"], [["a"], ["b"], ["c"]])
    mentions = write_rows(tmp_path / "m.csv", ["mention", "prompt"],
                          [["a1", "p"], ["b1", "p"], ["c1", "p"], ["zz", "p"]])
    vecs = write_rows(tmp_path / "v.csv", ["label", "v0", "v1"], [
        ["a", 0, 0], ["b", 10, 0], ["c", 0, 10],
        ["a1", 0.5, 0], ["b1", 10, 0.5], ["c1", 0, 9.5], ["zz", 50, 50],
    ])
    weights = write_rows(tmp_path / "w.csv", ["label", "weight"], [["a", 1], ["b", 1], ["c", 2]])
    groups = write_rows(tmp_path / "g.csv", ["label", "group"], [["a", "G1"], ["b", "G1"], ["c", "G2"]])
    out = tmp_path / "d"
    assert main(["diversity", "--mentions", mentions, "--reference", ref, "--vectors", vecs,
                 "--weights", weights, "--groups", groups, "--out", str(out)]) == 0
    (row,) = read_rows(out / "indices.csv")
    assert row["pielou"] == "1.00" and row["resolved"] == "3" and row["mentions"] == "4"
    rep = json.loads((out / "violations.json").read_text())["groups"][0]
    assert rep["unmentioned"] == [] and rep["uniform_deviation"] == pytest.approx(0)
    assert rep["weighted_deviation"] == pytest.approx(0.5 * (1 / 12 + 1 / 12 + 1 / 6))
    assert rep["group_deviation"] == pytest.approx(1 / 6)


def test_diversity_errors(tmp_path, capsys):
    ref = _reference(tmp_path, 5)
    empty = write_rows(tmp_path / "empty.csv", ["mention"], [])
    assert main(["diversity", "--mentions", empty, "--reference", ref, "--out", str(tmp_path / "o")]) == 2
    assert "no mentions" in capsys.readouterr().err
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("mention,prompt\ne0000,p\ne0001,p,extra\n")
    assert main(["diversity", "--mentions", str(ragged), "--reference", ref, "--out", str(tmp_path / "o")]) == 2
    assert "row 3" in capsys.readouterr().err


def test_rerun_from_metadata_and_manifest(tmp_path):
    cfg = write_json(tmp_path / "c.json", FAST)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out), "--seed", "12"]) == 0
    first = snapshot(out)
    (tmp_path / "c.json").unlink()  # metadata alone must suffice
    assert main(["rerun", str(out / "metadata.json")]) == 0
    assert snapshot(out) == first
    assert main(["rerun", str(out / "manifest-run.json")]) == 2  # config file gone

    spec = _small_sweep(tmp_path)
    sw = tmp_path / "sw"
    assert main(["sweep", "--sweep", spec, "--out", str(sw)]) == 0
    first = snapshot(sw)
    assert main(["rerun", str(sw / "metadata.json")]) == 0
    assert snapshot(sw) == first


def test_inputs_not_modified(tmp_path):
    cfg = write_json(tmp_path / "c.json", FAST)
    before = (tmp_path / "c.json").read_bytes()
    main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
    assert (tmp_path / "c.json").read_bytes() == before
