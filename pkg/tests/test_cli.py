import json
import shutil

import numpy as np
import pytest

from esngesture.cli import main
from esngesture.config import PipelineConfig, load_config
from esngesture.datasets import load
from esngesture.fixtures import fixture_path
from esngesture.model_io import load_model

FIXTURE = str(fixture_path().parent)
SMALL = ["--set", "reservoir.nodes=16"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def synth11(tmp_path_factory):
    dest = tmp_path_factory.mktemp("s") / "ds"
    assert main(["synth", str(dest), "--classes", "11", "--samples-per-class", "6",
                 "--subjects", "5", "--sessions", "2", "--min-steps", "10", "--max-steps", "20",
                 "--range-bins", "8", "--doppler-bins", "8", "--noise", "0.3"]) == 0
    return dest


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("convert", "synth", "train", "evaluate", "predict", "bench", "tune", "inspect", "--threads"):
        assert cmd in out


def test_train_predict_round_trip(capsys, tmp_path, synth11):
    model = tmp_path / "m.esng"
    code, out, _ = run(capsys, "--threads", "1", "train", "--preset", "soli_mr",
                       "--dataset", str(synth11), "--output", str(model))
    assert code == 0 and "train accuracy" in out and "feature dim 400" in out
    m = load_model(model)
    recs = load(synth11)
    files = [str(synth11 / "data" / f"{r.id}.bin") for r in recs[:5]]
    code, out, _ = run(capsys, "predict", str(model), *files)
    lines = out.strip().split("\n")
    assert code == 0 and len(lines) == 5
    assert [l.split("\t")[0] for l in lines] == [r.id for r in recs[:5]]
    assert [l.split("\t")[1] for l in lines] == m.predict(recs[:5])
    assert all(len(l.split("\t")[2].split()) == 11 for l in lines)


def test_predict_reversed_order(capsys, tmp_path):
    model = tmp_path / "m.esng"
    assert main(["train", "--dataset", FIXTURE, "--output", str(model), *SMALL]) == 0
    capsys.readouterr()
    files = sorted((fixture_path().parent / "data").glob("*.bin"))[::-1]
    code, out, _ = run(capsys, "predict", str(model), *map(str, files))
    assert [l.split("\t")[0] for l in out.strip().split("\n")] == [f.stem for f in files]


def test_train_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.esng", tmp_path / "b.esng"
    for p in (a, b):
        assert main(["--threads", "1", "train", "--dataset", FIXTURE, "--output", str(p), *SMALL]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_missing_dataset_exit_2(capsys):
    code, _, err = run(capsys, "train", "--dataset", "/no/such/dir")
    assert code == 2 and "dataset not found" in err and err.count("\n") == 1


def test_corrupt_model_refused(capsys, tmp_path):
    model = tmp_path / "m.esng"
    assert main(["train", "--dataset", FIXTURE, "--output", str(model), *SMALL]) == 0
    buf = bytearray(model.read_bytes())
    buf[100] ^= 0xFF
    model.write_bytes(bytes(buf))
    code, _, err = run(capsys, "predict", str(model), FIXTURE)
    assert code != 0 and "checksum" in err


def test_predict_dim_mismatch(capsys, tmp_path, synth11):
    model = tmp_path / "m.esng"
    assert main(["train", "--dataset", FIXTURE, "--output", str(model), *SMALL]) == 0
    capsys.readouterr()
    code, _, err = run(capsys, "predict", str(model), str(synth11 / "data" / "c00_s00_n0000.bin"))
    assert code != 0 and "expects feature maps" in err


def test_config_precedence_and_dump(capsys, tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"seed": 3, "ridge_lambda": 0.5, "readout": "rr_l"}))
    dump = tmp_path / "eff.json"
    assert main(["train", "--config", str(cfg_file), "--dataset", FIXTURE, "--seed", "9",
                 "--output", str(tmp_path / "m"), "--dump-config", str(dump), *SMALL]) == 0
    eff = load_config(dump)
    assert eff.seed == 9 and eff.ridge_lambda == 0.5 and eff.readout == "rr_l"
    assert eff.reservoir.nodes == 16 and eff.svm_c == PipelineConfig().svm_c
    assert PipelineConfig.from_dict(json.loads(eff.dumps())) == eff


def test_config_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n"seed": 1,\n"readout": \n}')
    code, _, err = run(capsys, "train", "--config", str(bad), "--dataset", FIXTURE)
    assert code == 2 and "line 4" in err


@pytest.mark.parametrize("protocol,folds", [("holdout_50_50", 1), ("kfold_10", 10),
                                            ("leave_one_subject_out", 5)])
def test_evaluate_reports(capsys, tmp_path, synth11, protocol, folds):
    out = tmp_path / "ev"
    code, _, _ = run(capsys, "--threads", "1", "evaluate", "--dataset", str(synth11),
                     "--protocol", protocol, "--output", str(out), *SMALL)
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert len(rep["folds"]) == folds
    for key in ("protocol", "pipeline", "classes", "mean_accuracy", "std_accuracy", "confusion",
                "confusion_percent", "pooled_accuracy"):
        assert key in rep
    m = np.array(rep["confusion"])
    assert np.trace(m) / m.sum() == pytest.approx(rep["pooled_accuracy"])
    if protocol == "leave_one_subject_out":
        assert [f["key"] for f in rep["folds"]] == ["S01", "S02", "S03", "S04", "S05"]
    t = json.loads((out / "timings.json").read_text())
    assert all(f["infer_ms_per_sample"] > 0 for f in t["folds"])
    assert (out / "confusion.csv").read_text().count("\n") == 12


def test_evaluate_byte_identical(capsys, tmp_path):
    for name in ("a", "b"):
        assert main(["--threads", "1", "evaluate", "--dataset", FIXTURE, "--protocol", "kfold_10",
                     "--set", "folds=3", "--output", str(tmp_path / name), *SMALL]) == 0
    assert (tmp_path / "a/report.json").read_bytes() == (tmp_path / "b/report.json").read_bytes()


def test_failed_evaluate_writes_nothing(capsys, tmp_path):
    ds = tmp_path / "ds"
    shutil.copytree(FIXTURE, ds)
    (ds / "data" / "c02_s01_n0003.bin").write_bytes(b"junk")
    out = tmp_path / "ev"
    code, _, err = run(capsys, "evaluate", "--dataset", str(ds), "--output", str(out))
    assert code == 2 and "c02_s01_n0003" in err and not out.exists()


def test_bench_table(capsys, tmp_path):
    dest = tmp_path / "ds"
    assert main(["synth", str(dest), "--classes", "3", "--samples-per-class", "6", "--subjects", "2",
                 "--sessions", "2", "--min-steps", "8", "--max-steps", "12", "--range-bins", "8",
                 "--doppler-bins", "8"]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "--threads", "1", "bench", "--dataset", str(dest))
    assert code == 0
    head, _, *rows = out.strip().split("\n")
    assert "train_s" in head and "infer_ms" in head
    dims = {r.split()[0]: int(r.split()[1]) for r in rows}
    assert dims["MR-RR_N"] == 400 and dims["SR-RR_L"] == 500


def test_tune_log(capsys, tmp_path):
    log = tmp_path / "t.json"
    code, out, err = run(capsys, "tune", "--dataset", FIXTURE, "--grid", "nodes=8,16",
                         "--folds", "2", "--output", str(log))
    assert code == 0 and err.count("trial") == 2
    data = json.loads(log.read_text())
    assert len(data["trials"]) == 2 and data["best"] in (0, 1)


def test_inspect_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "inspect", FIXTURE, "--id", "c00_s00_n0000", "--map", "dtm1")
    rows = out.strip().split("\n")
    rec = next(r for r in load(fixture_path()) if r.id == "c00_s00_n0000")
    assert code == 0 and len(rows) == rec.steps + 1 and len(rows[1].split(",")) == 8
    np.testing.assert_allclose([float(v) for v in rows[1].split(",")],
                               rec.payload.frames[0, 1].sum(axis=0), rtol=1e-8)
    code, out, _ = run(capsys, "inspect", FIXTURE, "--id", "c00_s00_n0000", "--list")
    assert code == 0 and len(out.strip().split("\n")) == 4


def test_convert_absent_source(capsys, tmp_path):
    code, _, err = run(capsys, "convert", "soli", str(tmp_path / "nothing"), str(tmp_path / "out"))
    assert code != 0 and "not found" in err and not (tmp_path / "out").exists()


def test_synth_refuses_overwrite(capsys, tmp_path):
    dest = tmp_path / "d"
    args = ["synth", str(dest), "--classes", "2", "--samples-per-class", "2", "--range-bins", "4",
            "--doppler-bins", "4", "--min-steps", "3", "--max-steps", "4"]
    assert main(args) == 0
    capsys.readouterr()
    code, _, err = run(capsys, *args)
    assert code == 2 and "--force" in err
    assert main(args + ["--force"]) == 0
