"""End-to-end tests for the algsteps command line."""

import json
from pathlib import Path

import pytest

from algsteps.cli import main
from algsteps.data import COLUMNS, load_tsv


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Shared directory with a tiny corpus, config, and trained model."""
    d = tmp_path_factory.mktemp("cli")
    config = {
        "encoder": {"symbol_embed_dim": 8, "hidden_dim": 16,
                    "adapter_hidden": 16, "adapter_out_dim": 8,
                    "cnn_filters": 4},
        "hyper": {"batch": 8},
    }
    (d / "config.json").write_text(json.dumps(config), encoding="utf-8")
    rc = main(["gen", "--n-per-op", "2", "--entropy", "1", "--degree", "1",
               "--flip", "0.5", "--seed", "11", "--out", str(d / "corpus.tsv")])
    assert rc == 0
    rc = main(["train", "--data", str(d / "corpus.tsv"), "--method", "TE_C",
               "--epochs", "2", "--seed", "1",
               "--config", str(d / "config.json"),
               "--out", str(d / "model.json")])
    assert rc == 0
    return d


def test_gen_writes_tsv_and_meta(tmp_path, capsys):
    out = tmp_path / "steps.tsv"
    rc = main(["gen", "--n-per-op", "2", "--entropy", "1", "--degree", "1",
               "--flip", "0.5", "--bug-fraction", "0.5", "--seed", "3",
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "\t".join(COLUMNS)
    records, rejections = load_tsv(out)
    assert not rejections
    assert sum(r.outcome == "OK" for r in records) == 14
    assert any(r.outcome == "BUG" for r in records)
    meta = json.loads((tmp_path / "steps.tsv.meta.json").read_text())
    assert meta["command"] == "gen"
    assert meta["seed"] == 3
    assert len(meta["fingerprint"]) == 16
    assert "fingerprint" in capsys.readouterr().out


def test_gen_id_prefix(tmp_path):
    out = tmp_path / "p.tsv"
    assert main(["gen", "--n-per-op", "1", "--entropy", "1", "--degree", "1",
                 "--flip", "0.5", "--seed", "3", "--id-prefix", "real",
                 "--out", str(out)]) == 0
    records, _ = load_tsv(out)
    assert all(r.step_id.startswith("real") for r in records)


def test_train_writes_checkpoint_and_meta(workdir, capsys):
    assert (workdir / "model.json").exists()
    meta = json.loads((workdir / "model.json.meta.json").read_text())
    assert meta["method"] == "TE_C"
    assert meta["hyper"]["epochs"] == 2


def test_eval_prints_accuracy(workdir, tmp_path, capsys):
    out = tmp_path / "eval.json"
    rc = main(["eval", "--model", str(workdir / "model.json"),
               "--data", str(workdir / "corpus.tsv"), "--out", str(out)])
    assert rc == 0
    assert "accuracy" in capsys.readouterr().out
    payload = json.loads(out.read_text())
    assert payload["n"] == 14
    assert sum(payload["confusion"][i][i] for i in range(len(payload["classes"]))) \
        == round(payload["accuracy"] * payload["n"])


def test_xval_writes_report_files(workdir, tmp_path, capsys):
    out = tmp_path / "report.json"
    rc = main(["xval", "--data", str(workdir / "corpus.tsv"),
               "--method", "TE_C", "--k", "2", "--epochs", "1", "--seed", "5",
               "--config", str(workdir / "config.json"), "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["method"] == "TE_C"
    assert len(report["main"]["fold_accuracies"]) == 2
    assert (tmp_path / "report.confusion.tsv").exists()
    assert "±" in capsys.readouterr().out


def test_annotate_prints_figure_text(workdir, tmp_path, capsys):
    transcript = tmp_path / "solution.txt"
    transcript.write_text("# worked example\nx+5=9\nx+5-5=9-5\nx=4\n",
                          encoding="utf-8")
    out = tmp_path / "annotations.json"
    rc = main(["annotate", "--model", str(workdir / "model.json"),
               "--in", str(transcript), "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "1. x+5=9" in text
    assert "2. x+5-5=9-5" in text
    payload = json.loads(out.read_text())
    assert len(payload) == 2
    assert payload[0]["before"] == "x+5=9"


def test_export_geometry_requires_translation_model(workdir, tmp_path, capsys):
    rc = main(["export-geometry", "--model", str(workdir / "model.json"),
               "--out", str(tmp_path / "geom")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_export_geometry_files(workdir, tmp_path, capsys):
    model_path = tmp_path / "transe.json"
    rc = main(["train", "--data", str(workdir / "corpus.tsv"),
               "--method", "TE_TRANSE", "--epochs", "1", "--seed", "2",
               "--config", str(workdir / "config.json"),
               "--out", str(model_path)])
    assert rc == 0
    rc = main(["export-geometry", "--model", str(model_path),
               "--out", str(tmp_path / "geom")])
    assert rc == 0
    assert (tmp_path / "geom.distances.tsv").exists()
    assert (tmp_path / "geom.vectors.tsv").exists()
    assert "closest pair" in capsys.readouterr().out


def test_transfer_rejects_leaked_ids(workdir, tmp_path, capsys):
    rc = main(["transfer", "--train", str(workdir / "corpus.tsv"),
               "--test", "same=" + str(workdir / "corpus.tsv"),
               "--k", "2", "--epochs", "1",
               "--config", str(workdir / "config.json"),
               "--out", str(tmp_path / "transfer")])
    assert rc == 1
    assert "shares" in capsys.readouterr().err


def test_transfer_disjoint_corpora(workdir, tmp_path, capsys):
    other = tmp_path / "other.tsv"
    assert main(["gen", "--n-per-op", "2", "--entropy", "1", "--degree", "1",
                 "--flip", "0.5", "--seed", "12", "--id-prefix", "t",
                 "--out", str(other)]) == 0
    rc = main(["transfer", "--train", str(workdir / "corpus.tsv"),
               "--test", "other=" + str(other), "--k", "2", "--epochs", "1",
               "--seed", "4", "--config", str(workdir / "config.json"),
               "--out", str(tmp_path / "transfer")])
    assert rc == 0
    assert (tmp_path / "transfer" / "other.json").exists()
    assert (tmp_path / "transfer" / "transfer.meta.json").exists()
    assert "other" in capsys.readouterr().out


def test_finetune_reports_deltas(workdir, tmp_path, capsys):
    real = tmp_path / "real.tsv"
    assert main(["gen", "--n-per-op", "2", "--entropy", "1", "--degree", "1",
                 "--flip", "0.5", "--seed", "13", "--id-prefix", "r",
                 "--out", str(real)]) == 0
    out = tmp_path / "finetune.json"
    rc = main(["finetune", "--synth", str(workdir / "corpus.tsv"),
               "--real", str(real), "--sizes", "4", "--epochs", "1",
               "--seed", "6", "--config", str(workdir / "config.json"),
               "--out", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["points"][0]["n"] == 4
    assert "delta" in capsys.readouterr().out


def test_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err
    assert "frobnicate" in err


def test_missing_required_flag_exits_1(capsys):
    assert main(["gen", "--n-per-op", "3"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err
    assert "--entropy" in err


def test_no_subcommand_exits_1(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_bad_method_choice_exits_1(capsys):
    assert main(["train", "--data", "x.tsv", "--method", "SVM",
                 "--out", "m.json"]) == 1
    assert "SVM" in capsys.readouterr().err


def test_unknown_config_key_exits_1(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"encoder": {"layers": 3}}), encoding="utf-8")
    rc = main(["train", "--data", str(workdir / "corpus.tsv"),
               "--config", str(bad), "--out", str(tmp_path / "m.json")])
    assert rc == 1
    assert "layers" in capsys.readouterr().err


def test_missing_data_file_exits_1(capsys):
    rc = main(["train", "--data", "/nonexistent/steps.tsv",
               "--out", "/tmp/m.json"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_missing_model_file_exits_1(capsys):
    rc = main(["serve", "--model", "/nonexistent/model.json"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_eval_unknown_label_exits_1(workdir, tmp_path, capsys):
    bugs = tmp_path / "bugs.tsv"
    assert main(["gen", "--n-per-op", "2", "--entropy", "1", "--degree", "1",
                 "--flip", "0.5", "--bug-fraction", "1.0", "--seed", "14",
                 "--id-prefix", "b", "--out", str(bugs)]) == 0
    rc = main(["eval", "--model", str(workdir / "model.json"),
               "--data", str(bugs), "--task", "feedback"])
    assert rc == 1
    assert "label" in capsys.readouterr().err
