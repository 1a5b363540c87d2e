import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

import schemas
from tabattack.attack import SWEEP_COLUMNS
from tabattack.cli import main
from tabattack.config import ExperimentConfig
from tabattack.data import read_dataset
from tabattack.models import evaluate, load_model

SMALL = {
    "master_seed": 3,
    "record_timing": False,
    "data": {"n_samples": 400, "n_features": 40, "overlap": 0.85},
    "model": {"kind": "forest", "n_estimators": 30},
    "attack": {"k_features": 10},
    "sweep": {"k_values": [0, 5, 10, 20, 40], "n_rows": 200},
    "vae": {"epochs": 20, "n_generate": 20},
}


def write_config(path: Path, out: Path, **overrides) -> Path:
    raw = json.loads(json.dumps(SMALL))
    for section, values in overrides.items():
        if isinstance(values, dict):
            raw.setdefault(section, {}).update(values)
        else:
            raw[section] = values
    raw["out_dir"] = str(out)
    return ExperimentConfig.from_dict(raw).save(path)


def run(*args) -> int:
    return main([str(a) for a in args])


def load(path):
    return json.loads(Path(path).read_text())


def check_dataset_meta(csv_path):
    jsonschema.validate(load(str(csv_path) + ".meta.json"), schemas.DATASET_META)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = root / "run"
    cfg = write_config(root / "small.yaml", out)
    assert run("train", "--config", cfg) == 0
    return cfg, out


@pytest.fixture(scope="module")
def attacked(trained):
    cfg, out = trained
    assert run("attack", "--config", cfg, "--method", "main") == 0
    assert run("attack", "--config", cfg, "--method", "brute") == 0
    return cfg, out


class TestTrain:
    def test_outputs_validate(self, trained):
        _, out = trained
        metrics = load(out / "metrics.json")
        jsonschema.validate(metrics, schemas.TRAIN_METRICS)
        assert 0 <= metrics["test"]["accuracy"] <= 1
        for name in ("train.csv", "test.csv"):
            check_dataset_meta(out / name)
        assert (out / "model.npz").stat().st_size > 0
        assert ExperimentConfig.load(out / "config.yaml").master_seed == 3

    def test_rerun_is_byte_identical(self, trained, tmp_path):
        _, out = trained
        cfg = write_config(tmp_path / "c.yaml", tmp_path / "again")
        assert run("train", "--config", cfg) == 0
        for name in ("metrics.json", "train.csv", "test.csv"):
            assert (tmp_path / "again" / name).read_bytes() == (out / name).read_bytes()

    def test_seed_flag_changes_split(self, trained, tmp_path):
        cfg, out = trained
        assert run("train", "--config", cfg, "--seed", 4, "--out", tmp_path / "s4") == 0
        assert (tmp_path / "s4" / "test.csv").read_bytes() != (out / "test.csv").read_bytes()

    def test_mlp_and_csv_source(self, tmp_path):
        src = tmp_path / "data.csv"
        rng = np.random.default_rng(0)
        X = rng.normal(size=(120, 5))
        y = np.where(X[:, 0] + 0.5 * rng.normal(size=120) > 0, "yes", "no")
        with src.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "c", "d", "e", "y"])
            for row, lab in zip(X, y):
                w.writerow([*row, lab])
        cfg = write_config(tmp_path / "c.yaml", tmp_path / "out",
                           data={"source": "csv", "path": str(src), "label_column": "y",
                                 "positive_label": "yes"},
                           model={"kind": "mlp", "epochs": 5})
        assert run("train", "--config", cfg) == 0
        assert load(tmp_path / "out" / "metrics.json")["model"] == "mlp"

    def test_missing_data_path(self, tmp_path, capsys):
        missing = tmp_path / "absent.csv"
        cfg = write_config(tmp_path / "c.yaml", tmp_path / "out",
                           data={"source": "csv", "path": str(missing)})
        assert run("train", "--config", cfg) == 2
        assert "absent.csv" in capsys.readouterr().err


class TestExitCodes:
    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as e:
            run("fly")
        assert e.value.code == 1

    def test_bad_flag_type(self):
        with pytest.raises(SystemExit) as e:
            run("train", "--seed", "many")
        assert e.value.code == 1

    def test_bad_config(self, tmp_path, capsys):
        p = tmp_path / "c.yaml"
        p.write_text("model:\n  kind: svm\n")
        assert run("train", "--config", p) == 1
        assert "model.kind" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert run("train", "--config", tmp_path / "none.yaml") == 1

    def test_runtime_failure(self, tmp_path, capsys):
        # a separable problem leaves no FN rows to aim at
        cfg = write_config(tmp_path / "c.yaml", tmp_path / "out", data={"overlap": 0.0})
        assert run("train", "--config", cfg) == 0
        assert run("attack", "--config", cfg, "--method", "main") == 3
        assert "TPTN" in capsys.readouterr().err

    def test_attack_before_train(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", tmp_path / "empty")
        assert run("attack", "--config", cfg) == 2

    def test_console_script(self, trained):
        cfg, _ = trained
        exe = shutil.which("tabattack")
        cmd = [exe] if exe else [sys.executable, "-m", "tabattack"]
        proc = subprocess.run([*cmd, "--version"], capture_output=True, text=True)
        assert proc.returncode == 0 and "tabattack" in proc.stdout


class TestAttack:
    def test_reports_validate(self, attacked):
        _, out = attacked
        for method in ("main", "brute"):
            jsonschema.validate(load(out / f"report_{method}.json"), schemas.REPORT)
            jsonschema.validate(load(out / f"provenance_{method}.json"), schemas.PROVENANCE)
            check_dataset_meta(out / f"attacked_{method}.csv")

    def test_methods_differ(self, attacked):
        _, out = attacked
        main_p = load(out / "provenance_main.json")
        brute_p = load(out / "provenance_brute.json")
        assert main_p["rows"] != brute_p["rows"]

    def test_report_matches_reevaluation(self, attacked):
        _, out = attacked
        model = load_model(out / "model.npz")
        for method in ("main", "brute"):
            rep = load(out / f"report_{method}.json")
            again = evaluate(model, read_dataset(out / f"attacked_{method}.csv"))
            assert again.to_dict() == rep["metrics_after"]

    def test_forest_vote_histogram(self, attacked):
        _, out = attacked
        rep = load(out / "report_main.json")
        n_test = read_dataset(out / "test.csv").n_samples
        assert len(rep["vote_histogram"]["before"]) == 31
        assert sum(rep["vote_histogram"]["after"]) == n_test

    def test_k_zero_copies_input(self, trained, tmp_path):
        cfg, out = trained
        assert run("attack", "--config", cfg, "-k", 0, "--out", tmp_path) == 2  # no model there
        dest = tmp_path / "copy"
        shutil.copytree(out, dest)
        assert run("attack", "--config", cfg, "-k", 0, "--out", dest) == 0
        assert (dest / "attacked_main.csv").read_bytes() == (out / "test.csv").read_bytes()


class TestSweep:
    def test_outputs(self, trained):
        cfg, out = trained
        assert run("sweep", "--config", cfg) == 0
        rows = list(csv.reader((out / "sweep.csv").open()))
        assert tuple(rows[0]) == SWEEP_COLUMNS
        assert ",".join(rows[0]) == "method,k,accuracy,fp,fn,queries,seconds"
        assert len(rows) == 1 + 2 * 5
        jsonschema.validate(load(out / "sweep.json"), schemas.SWEEP_DOC)
        svg = (out / "sweep.svg").read_text()
        assert svg.lstrip().startswith("<?xml") and "<svg" in svg

    def test_single_k(self, trained, tmp_path):
        cfg, out = trained
        dest = tmp_path / "one"
        shutil.copytree(out, dest)
        one = write_config(tmp_path / "one.yaml", dest, sweep={"k_values": [7], "methods": ["main"]})
        assert run("sweep", "--config", one) == 0
        rows = list(csv.reader((dest / "sweep.csv").open()))
        assert len(rows) == 2 and rows[1][:2] == ["main", "7"]


class TestGenerate:
    def test_batch_and_quality(self, trained):
        cfg, out = trained
        assert run("generate", "--config", cfg) == 0
        q = load(out / "gen_quality.json")
        jsonschema.validate(q, schemas.GEN_QUALITY)
        assert q["n"] == 20 and q["final_loss"] < q["first_loss"]
        assert read_dataset(out / "poisoned.csv").n_samples == 20
        check_dataset_meta(out / "poisoned.csv")

    def test_repeatable(self, trained, tmp_path):
        cfg, out = trained
        batches = []
        for name in ("a", "b"):
            dest = tmp_path / name
            shutil.copytree(out, dest)
            assert run("generate", "--config", cfg, "--out", dest, "-n", 100) == 0
            batches.append((dest / "poisoned.csv").read_bytes())
        assert batches[0] == batches[1]

    def test_zero_rows(self, trained, tmp_path):
        cfg, out = trained
        dest = tmp_path / "zero"
        shutil.copytree(out, dest)
        assert run("generate", "--config", cfg, "--out", dest, "-n", 0) == 0
        q = load(dest / "gen_quality.json")
        jsonschema.validate(q, schemas.GEN_QUALITY)
        assert q["n"] == 0 and q["ttg_seconds"] < 0.01
        lines = (dest / "poisoned.csv").read_text().splitlines()
        assert len(lines) == 1


class TestDetect:
    def test_main_less_visible_than_brute(self, attacked):
        cfg, out = attacked
        assert run("detect", "--config", cfg, "--method", "main") == 0
        assert run("detect", "--config", cfg, "--method", "brute") == 0
        m = load(out / "spectral_report_main.json")
        b = load(out / "spectral_report_brute.json")
        jsonschema.validate(m, schemas.SPECTRAL)
        jsonschema.validate(b, schemas.SPECTRAL)
        assert m["ssim_dataset"] > b["ssim_dataset"]
        for name in ("spectrum_original.pgm", "spectrum_main.pgm", "spectra_main.png"):
            assert (out / name).stat().st_size > 0

    def test_original_against_itself(self, trained):
        cfg, out = trained
        assert run("detect", "--config", cfg, "--attacked", out / "test.csv") == 0
        rep = load(out / "spectral_report_test.json")
        jsonschema.validate(rep, schemas.SPECTRAL)
        for key in ("ssim_dataset", "ssim_fp", "ssim_fn"):
            assert rep[key] == pytest.approx(1.0)

    def test_missing_attacked_file(self, trained, tmp_path):
        cfg, _ = trained
        assert run("detect", "--config", cfg, "--attacked", tmp_path / "nope.csv") == 2
