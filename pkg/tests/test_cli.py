import csv
import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from dalmc.cli import main
from dalmc.data import SynthSpec, generate_synthetic, save_dataset, write_csv


def _schema(name):
    return json.loads(resources.files("dalmc").joinpath(f"schemas/{name}").read_text())


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixture")
    assert main(["synth", "-o", str(d)]) == 0
    return str(d / "manifest.json")


def _fit(manifest, out, *extra):
    return main(["fit", "--manifest", manifest, "--k", "3", "--beta", "0.1", "-o", str(out), *extra])


def _strip_timing(path):
    data = json.loads(open(path).read())
    data.pop("timing")
    return json.dumps(data, sort_keys=True)


def test_fit_report(manifest, tmp_path):
    out = tmp_path / "r.json"
    assert _fit(manifest, out) == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, _schema("report.schema.json"))
    assert report["metrics"]["best"]["acc"] >= 0.95
    assert report["fit"]["converged"]
    assert len(report["kmeans"]["restart_inertias"]) == 20
    assert report["kmeans"]["inertia"] == min(report["kmeans"]["restart_inertias"])


def test_fit_reruns_reported(manifest, tmp_path):
    out = tmp_path / "r.json"
    assert _fit(manifest, out, "--reruns", "3") == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, _schema("report.schema.json"))
    assert report["reruns"]["seeds"] == [0, 1, 2]
    assert report["reruns"]["best"][0] == report["metrics"]["best"]


def test_fit_deterministic(manifest, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _fit(manifest, a) == 0 and _fit(manifest, b) == 0
    assert _strip_timing(a) == _strip_timing(b)


def test_fit_without_labels_exit_2(tmp_path, capsys):
    x = generate_synthetic(SynthSpec(n=30, k=3, v=1, dims=[5]))
    x.labels = None
    path = save_dataset(x, tmp_path / "nolab")
    assert main(["fit", "--manifest", str(path), "--k", "3", "-o", str(tmp_path / "r.json")]) == 2
    assert "labels required" in capsys.readouterr().err


def test_fit_without_labels_ok_when_metrics_disabled(tmp_path):
    x = generate_synthetic(SynthSpec(n=30, k=3, v=1, dims=[5]))
    x.labels = None
    path = save_dataset(x, tmp_path / "nolab")
    out = tmp_path / "r.json"
    assert main(["fit", "--manifest", str(path), "--k", "3", "--no-metrics", "-o", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["metrics"] is None
    jsonschema.validate(report, _schema("report.schema.json"))


def test_missing_manifest_exit_3(tmp_path, capsys):
    assert main(["fit", "--manifest", str(tmp_path / "x.json"), "--k", "3",
                 "-o", str(tmp_path / "r.json")]) == 3
    assert "stage 'load'" in capsys.readouterr().err


def test_bad_config_exit_2(manifest, tmp_path, capsys):
    assert _fit(manifest, tmp_path / "r.json", "--anchors", "50") == 2
    assert "stage 'config'" in capsys.readouterr().err


def test_numerical_failure_exit_1(tmp_path, capsys):
    d = tmp_path / "huge"
    d.mkdir()
    write_csv(d / "v.csv", np.full((2, 4), 1e200) + np.arange(8.0).reshape(2, 4) * 1e199)
    (d / "y.txt").write_text("0\n0\n1\n1\n")
    (d / "m.json").write_text(json.dumps({"name": "huge", "format": "csv", "labels": "y.txt",
                                          "views": [{"path": "v.csv", "rows": 2, "cols": 4}]}))
    with np.errstate(all="ignore"):
        code = main(["fit", "--manifest", str(d / "m.json"), "--k", "2", "--anchors", "1",
                     "-o", str(tmp_path / "r.json")])
    assert code == 1
    assert "stage 'fit'" in capsys.readouterr().err


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_beta_default_grid(manifest, tmp_path):
    out = tmp_path / "sb.json"
    assert main(["sweep-beta", "--manifest", manifest, "--k", "3", "-o", str(out)]) == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, _schema("sweep.schema.json"))
    rows = _rows(tmp_path / "sb.csv")
    assert [float(r["beta"]) for r in rows] == [0.0001, 0.001, 0.01, 0.1, 1.0, 10.0]
    accs = {float(r["beta"]): float(r["acc"]) for r in rows}
    assert accs[0.1] >= max(accs.values()) - 0.05


def test_sweep_beta_single_point_equals_fit(manifest, tmp_path):
    out = tmp_path / "sb.json"
    assert main(["sweep-beta", "--manifest", manifest, "--k", "3", "--grid", "0.1",
                 "-o", str(out), "--csv", str(tmp_path / "t.csv")]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert len(rows) == 1
    assert _fit(manifest, tmp_path / "r.json") == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert rows[0]["metrics"] == report["metrics"]["best"]
    assert rows[0]["final_objective"] == report["fit"]["final_objective"]


def test_sweep_anchors(manifest, tmp_path):
    out = tmp_path / "sa.json"
    assert main(["sweep-anchors", "--manifest", manifest, "--k", "3", "--beta", "0.1",
                 "-o", str(out)]) == 0
    rows = _rows(tmp_path / "sa.csv")
    assert [int(r["anchors"]) for r in rows] == [3, 6, 9, 15]
    accs = [float(r["acc"]) for r in rows]
    assert max(accs) - min(accs) <= 0.15
    jsonschema.validate(json.loads(out.read_text()), _schema("sweep.schema.json"))


def test_sweep_anchors_infeasible_row(manifest, tmp_path, capsys):
    out = tmp_path / "sa.json"
    assert main(["sweep-anchors", "--manifest", manifest, "--k", "3", "--embed-dims", "6,6,6",
                 "--grid", "3,9", "-o", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"].startswith("skipped")
    assert "warning" in capsys.readouterr().err


def test_sweep_anchors_single_point_equals_fit(manifest, tmp_path):
    out = tmp_path / "sa.json"
    assert main(["sweep-anchors", "--manifest", manifest, "--k", "3", "--grid", "3",
                 "-o", str(out)]) == 0
    assert _fit(manifest, tmp_path / "r.json") == 0
    row = json.loads(out.read_text())["rows"][0]
    assert row["metrics"] == json.loads((tmp_path / "r.json").read_text())["metrics"]["best"]


def test_sweep_parallel_matches_sequential(manifest, tmp_path, monkeypatch):
    seq, par = tmp_path / "s.json", tmp_path / "p.json"
    args = ["sweep-beta", "--manifest", manifest, "--k", "3", "--grid", "0.01,0.1,1"]
    assert main([*args, "-o", str(seq)]) == 0
    monkeypatch.setenv("DALMC_THREADS", "3")
    assert main([*args, "-o", str(par)]) == 0
    assert _strip_timing(seq) == _strip_timing(par)


def test_synth_repeatable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "-o", str(a)]) == 0
    assert main(["synth", "-o", str(b)]) == 0
    for name in ("view0.bin", "view1.bin", "view2.bin", "labels.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_synth_csv_format(tmp_path):
    assert main(["synth", "--n", "20", "--k", "2", "--dims", "3,4", "--format", "csv",
                 "-o", str(tmp_path)]) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["format"] == "csv" and len(m["views"]) == 2


def test_trace_scalar_two_constant_rows(tmp_path):
    (tmp_path / "v.csv").write_text("2\n")
    (tmp_path / "m.json").write_text(json.dumps(
        {"name": "scalar", "format": "csv", "views": [{"path": "v.csv", "rows": 1, "cols": 1}]}))
    out = tmp_path / "t.csv"
    assert main(["trace", "--manifest", str(tmp_path / "m.json"), "--anchors", "1",
                 "--embed-dims", "1", "--beta", "0.1", "-o", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 2
    assert float(rows[0]["objective"]) == float(rows[1]["objective"]) == pytest.approx(-0.1)


def test_trace_synthetic(manifest, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["trace", "--manifest", manifest, "--k", "3", "-o", str(out)]) == 0
    values = [float(r["objective"]) for r in _rows(out)]
    assert len(values) <= 51
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-8 * (1 + abs(a))
    # lower bound for l=3, d'=6 on three views, beta <= 1
    assert min(values) >= -3 * 3 * np.sqrt(6)


def test_trace_needs_k_or_anchors(manifest, tmp_path):
    assert main(["trace", "--manifest", manifest, "-o", str(tmp_path / "t.csv")]) == 2


def test_evaluate_command(tmp_path, capsys):
    (tmp_path / "t.txt").write_text("0\n0\n1\n1\n")
    (tmp_path / "p.txt").write_text("0\n0\n0\n1\n")
    assert main(["evaluate", "--truth", str(tmp_path / "t.txt"),
                 "--pred", str(tmp_path / "p.txt")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["f1"] == 0.4 and out["purity"] == 0.75


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["fit"])
    assert info.value.code == 2
