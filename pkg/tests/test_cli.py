import hashlib
import json

import numpy as np
import pytest

from mkproto.cli import main
from mkproto.data import write_matrix
from mkproto.kernel import gaussian_base_kernels
from mkproto.model_io import load_model

SMALL = ["--samples-per-class", "6", "--series-length", "16"]


def two_blob_csv(path, rng, n=10):
    rows = []
    for s in range(n):
        lab = s % 2
        x = rng.normal(3.0 * lab, 0.4, size=3)
        rows.append(",".join(f"{v:.6f}" for v in x) + f",{'ab'[lab]}")
    path.write_text("f1,f2,f3,label\n" + "\n".join(rows) + "\n")
    return path


def test_synthetic_command(tmp_path, capsys):
    out = tmp_path / "syn"
    code = main(["synthetic", "--seeds", "2", *SMALL, "--out", str(out)])
    assert code == 0
    report = json.loads((out / "synthetic_report.json").read_text())
    assert len(report["runs"]) == 2
    assert {"acc", "ip", "dr"} <= set(report["summary"])
    assert (out / "objective_curves.txt").read_text().startswith("# seed 0")
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["lam"] == 0.3 and cfg["seeds"] == 2
    assert "f8/f9 weights" in capsys.readouterr().out


def test_train_eval_inspect_heldout(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--synthetic", *SMALL, "--test-fraction", "0.5", "-T", "3",
                 "--out", str(out)]) == 0
    for name in ("model.json", "loss_trace.txt", "alpha.txt", "config.json"):
        assert (out / name).exists()
    model, classes, labels = load_model(out / "model.json")
    assert classes == [1, 2, 3, 4] and len(labels) == 12

    ev = tmp_path / "ev"
    assert main(["eval", str(out / "model.json"), "--heldout", "--out", str(ev)]) == 0
    rep = json.loads((ev / "report.json").read_text())
    assert 0.0 <= rep["acc"] <= 100.0
    assert "acc = " in (ev / "report.txt").read_text()

    capsys.readouterr()
    assert main(["inspect", str(out / "model.json"), "--top", "2"]) == 0
    text = capsys.readouterr().out
    assert "support:" in text and "prototype   0 class" in text


def test_train_on_csv_and_eval_on_csv(tmp_path, rng):
    train_csv = two_blob_csv(tmp_path / "train.csv", rng)
    test_csv = two_blob_csv(tmp_path / "test.csv", rng, n=6)
    out = tmp_path / "csv"
    assert main(["train", "--csv", str(train_csv), "-T", "2", "--out", str(out)]) == 0
    assert main(["eval", str(out / "model.json"), "--csv", str(test_csv), "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["acc"] == 100.0


def test_train_on_kernel_files(tmp_path, rng):
    data = rng.standard_normal((2, 8, 2))
    data[:, 4:] += 3.0
    paths = []
    for l, K in enumerate(gaussian_base_kernels(data)):
        p = tmp_path / f"k{l}.bin"
        write_matrix(K, p)
        paths.append(str(p))
    labels = tmp_path / "labels.txt"
    labels.write_text("\n".join(["x"] * 4 + ["y"] * 4))
    out = tmp_path / "kern"
    assert main(["train", "--kernels", *paths, "--labels", str(labels), "-T", "2", "--out", str(out)]) == 0

    test_rows = []
    for l, K in enumerate(gaussian_base_kernels(data)):
        p = tmp_path / f"t{l}.bin"
        write_matrix(K[[0, 7]], p)
        test_rows.append(str(p))
    tl = tmp_path / "tl.txt"
    tl.write_text("x\ny\n")
    assert main(["eval", str(out / "model.json"), "--test-kernels", *test_rows,
                 "--test-labels", str(tl), "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["acc"] == 100.0


def test_fixed_seed_gives_identical_model(tmp_path):
    digests = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["train", "--synthetic", *SMALL, "-T", "2", "--seed", "3", "--out", str(out)]) == 0
        digests.append(hashlib.sha256((out / "model.json").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lam": 0.7, "tau": 0.05, "T": 2}))
    out = tmp_path / "p"
    assert main(["train", "--synthetic", *SMALL, "--config", str(cfg), "--lam", "0.1",
                 "--out", str(out)]) == 0
    eff = json.loads((out / "config.json").read_text())
    assert eff["lam"] == 0.1 and eff["tau"] == 0.05 and eff["T"] == 2 and eff["mu"] == 0.3


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MKPROTO_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["train", "--synthetic", *SMALL, "-T", "2"]) == 0
    assert (tmp_path / "env" / "model.json").exists()


def test_repeat_reports_mean_and_std(tmp_path):
    out = tmp_path / "r"
    assert main(["train", "--synthetic", *SMALL, "-T", "2", "--out", str(out)]) == 0
    assert main(["eval", str(out / "model.json"), "--heldout", "--repeat", "2", "--out", str(out)]) == 0
    text = (out / "report.txt").read_text()
    assert "acc_mean" in text and "acc_std" in text


class TestExitCodes:
    def test_missing_file_is_data_error(self, tmp_path):
        assert main(["train", "--csv", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--synthetic", "--bogus"])
        assert exc.value.code == 1

    def test_bad_hyperparameter_is_usage_error(self, tmp_path):
        assert main(["train", "--synthetic", *SMALL, "--eta", "2", "--out", str(tmp_path)]) == 1

    def test_kernels_without_labels(self, tmp_path):
        write_matrix(np.eye(3), tmp_path / "k.bin")
        assert main(["train", "--kernels", str(tmp_path / "k.bin"), "--out", str(tmp_path)]) == 1

    def test_heldout_without_split(self, tmp_path):
        out = tmp_path / "m"
        assert main(["train", "--synthetic", *SMALL, "-T", "2", "--out", str(out)]) == 0
        assert main(["eval", str(out / "model.json"), "--heldout", "--out", str(out)]) == 1

    def test_malformed_csv(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,label\n1,x\n,y\n")
        assert main(["train", "--csv", str(p), "--out", str(tmp_path)]) == 2

    def test_descent_violation(self, tmp_path, monkeypatch):
        import mkproto.cli as cli
        from mkproto.optimizer import DescentError

        def broken(*a, **k):
            raise DescentError("sweep 1: total loss rose")

        monkeypatch.setattr(cli, "fit", broken)
        assert main(["train", "--synthetic", *SMALL, "--out", str(tmp_path)]) == 3


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "mkproto", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "synthetic" in res.stdout
