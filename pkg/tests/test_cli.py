"""CLI surface: exit codes, byte-reproducibility, format contracts."""

import json

import numpy as np
import pytest

from mixmood.cli import main
from mixmood.io import load_fmat, load_imgb, save_fmat


@pytest.fixture
def feature_files(tmp_path):
    rng = np.random.default_rng(0)
    labelled = rng.normal(size=(60, 6)).astype(np.float32)
    near = (rng.normal(size=(60, 6)) + 0.5).astype(np.float32)
    far = (rng.normal(size=(60, 6)) + 4.0).astype(np.float32)
    paths = {}
    for name, data in (("labelled", labelled), ("near", near), ("far", far)):
        path = tmp_path / f"{name}.fmat"
        save_fmat(data, path)
        paths[name] = str(path)
    return paths


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_distance_self_with_full_tau_is_zero(capsys, feature_files):
    # tau = rows makes every subsample a permutation: NN distance exactly 0
    code, out, _ = run_cli(
        capsys, "distance", feature_files["labelled"], feature_files["labelled"],
        "--measure", "l2", "--tau", "60", "--rounds", "6", "--seed", "3",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["d_bar"] == 0.0
    assert doc["low_confidence"] is True


def test_distance_byte_identical_reruns(capsys, feature_files):
    args = ("distance", feature_files["labelled"], feature_files["near"],
            "--measure", "cos", "--tau", "20", "--rounds", "8", "--seed", "5")
    code1, out1, _ = run_cli(capsys, *args)
    code2, out2, _ = run_cli(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2


def test_distance_thread_count_invariance(capsys, feature_files):
    base = ("distance", feature_files["labelled"], feature_files["near"],
            "--measure", "js", "--tau", "20", "--rounds", "8", "--seed", "5")
    _, seq, _ = run_cli(capsys, *base, "--threads", "1")
    _, par, _ = run_cli(capsys, *base, "--threads", "8")
    assert seq == par


def test_distance_tau_too_large_exits_2(capsys, feature_files):
    code, _, err = run_cli(
        capsys, "distance", feature_files["labelled"], feature_files["near"],
        "--tau", "100",
    )
    assert code == 2
    assert "tau" in err


def test_distance_dimension_mismatch_names_both(capsys, tmp_path, feature_files):
    other = tmp_path / "other.fmat"
    save_fmat(np.ones((30, 9), dtype=np.float32), other)
    code, _, err = run_cli(
        capsys, "distance", feature_files["labelled"], str(other), "--tau", "20"
    )
    assert code == 2
    assert "6" in err and "9" in err


def test_distance_missing_file_exits_1(capsys, feature_files):
    code, _, err = run_cli(
        capsys, "distance", feature_files["labelled"], "/nonexistent/x.fmat"
    )
    assert code == 1


def test_rank_selects_nearest(capsys, feature_files):
    code, out, err = run_cli(
        capsys, "rank", feature_files["labelled"],
        feature_files["far"], feature_files["near"],
        "--measure", "cos", "--tau", "20", "--rounds", "8", "--seed", "1",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["best"] == "near"
    assert [e["candidate_id"] for e in doc["entries"]] == ["near", "far"]
    assert "best candidate: near" in err


def test_rank_single_candidate(capsys, feature_files):
    code, out, _ = run_cli(
        capsys, "rank", feature_files["labelled"], feature_files["near"],
        "--tau", "20", "--rounds", "4",
    )
    assert code == 0
    assert json.loads(out)["best"] == "near"


def test_rank_duplicate_names_exit_2(capsys, feature_files):
    code, _, err = run_cli(
        capsys, "rank", feature_files["labelled"],
        f"x={feature_files['near']}", f"x={feature_files['far']}",
        "--tau", "20", "--rounds", "4",
    )
    assert code == 2
    assert "duplicate" in err


def test_rank_byte_identical_reruns(capsys, feature_files):
    args = ("rank", feature_files["labelled"], feature_files["near"],
            feature_files["far"], "--tau", "15", "--rounds", "5", "--seed", "9")
    _, out1, _ = run_cli(capsys, *args)
    _, out2, _ = run_cli(capsys, *args)
    assert out1 == out2


def test_correlate_bundled_default(capsys):
    code, out, _ = run_cli(capsys, "correlate")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "task,n_l,measure,r"
    assert len(lines) == 37
    values = [float(line.split(",")[-1]) for line in lines[1:]]
    assert all(v < 0 for v in values)
    js_row = next(l for l in lines if l.startswith("MNIST,60,js,"))
    assert abs(float(js_row.split(",")[-1]) - (-0.969)) <= 0.05


def test_correlate_schema_violation_exit_2(capsys, tmp_path):
    bad = tmp_path / "acc.csv"
    bad.write_text("task,ood_source,pct_ood,n_l,mean,std\nT,s,50,sixty,0.5,0.1\n")
    code, _, err = run_cli(capsys, "correlate", "--accuracies", str(bad))
    assert code == 2
    assert "n_l" in err


def test_correlate_anticorrelated_tables(capsys, tmp_path):
    acc_lines = ["task,ood_source,pct_ood,n_l,mean,std"]
    dist_lines = ["task,ood_source,pct_ood,measure,mean,std"]
    for i, (src, pct) in enumerate([("a", 50), ("a", 100), ("b", 50)]):
        for n_l in (60, 100, 150):
            acc_lines.append(f"T,{src},{pct},{n_l},{-float(i)},0")
        for m in ("l1", "l2", "js", "cos"):
            dist_lines.append(f"T,{src},{pct},{m},{float(i)},0")
    acc = tmp_path / "a.csv"
    dist = tmp_path / "d.csv"
    acc.write_text("\n".join(acc_lines) + "\n")
    dist.write_text("\n".join(dist_lines) + "\n")
    code, out, _ = run_cli(capsys, "correlate", "--accuracies", str(acc),
                           "--distances", str(dist))
    assert code == 0
    rows = out.strip().split("\n")[1:]
    assert len(rows) == 12
    assert all(float(r.split(",")[-1]) == pytest.approx(-1.0) for r in rows)


def test_gen_noise_sap_payload(capsys, tmp_path):
    out_path = tmp_path / "sap.imgb"
    code, _, _ = run_cli(
        capsys, "gen-noise", "--kind", "sap", "--n", "2",
        "--height", "16", "--width", "16", "--seed", "4", "-o", str(out_path),
    )
    assert code == 0
    images = load_imgb(out_path)
    assert images.shape == (2, 16, 16, 1)
    assert set(np.unique(images)) <= {0, 255}


def test_gen_noise_gaussian_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.imgb", tmp_path / "b.imgb"
    for out_path in (a, b):
        code, _, _ = run_cli(
            capsys, "gen-noise", "--kind", "gaussian", "--n", "1",
            "--height", "8", "--width", "8", "--seed", "2", "-o", str(out_path),
        )
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_featurize_randproj_deterministic(capsys, tmp_path):
    src = tmp_path / "in.imgb"
    run_cli(capsys, "gen-noise", "--kind", "sap", "--n", "6", "--height", "8",
            "--width", "8", "--seed", "1", "-o", str(src))
    outs = []
    for name in ("f1.fmat", "f2.fmat"):
        out_path = tmp_path / name
        code, _, _ = run_cli(
            capsys, "featurize", str(src), "-o", str(out_path),
            "--extractor", "randproj", "--out-dim", "16", "--seed", "3",
        )
        assert code == 0
        outs.append(out_path.read_bytes())
    assert outs[0] == outs[1]
    assert load_fmat(tmp_path / "f1.fmat").shape == (6, 16)


def test_featurize_flatten_with_resize(capsys, tmp_path):
    src = tmp_path / "in.imgb"
    run_cli(capsys, "gen-noise", "--kind", "gaussian", "--n", "3", "--height", "10",
            "--width", "10", "--seed", "6", "-o", str(src))
    out_path = tmp_path / "flat.fmat"
    code, _, _ = run_cli(
        capsys, "featurize", str(src), "-o", str(out_path),
        "--extractor", "flatten", "--resize", "5", "5",
    )
    assert code == 0
    assert load_fmat(out_path).shape == (3, 25)


def test_featurize_model_requires_path(capsys, tmp_path):
    src = tmp_path / "in.imgb"
    run_cli(capsys, "gen-noise", "--kind", "sap", "--n", "1", "--height", "4",
            "--width", "4", "--seed", "1", "-o", str(src))
    code, _, err = run_cli(
        capsys, "featurize", str(src), "-o", str(tmp_path / "x.fmat"),
        "--extractor", "model",
    )
    assert code == 2
    assert "model-path" in err or "model_path" in err


def test_ssdl_demo_supervised_flag_matches_gamma_zero(capsys, tmp_path):
    config = {
        "task": {"kind": "blobs", "n_l": 8, "n_u": 0, "pct_ood": 0,
                 "contaminant": "none", "seed": 2, "input_dim": 2,
                 "test_per_class": 50},
        "mixmatch": {"epochs": 3, "lr": 0.05, "gamma": 0.0, "seed": 2,
                     "batch_size": 8},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    code1, out1, _ = run_cli(capsys, "ssdl-demo", "--config", str(cfg_path))
    code2, out2, _ = run_cli(capsys, "ssdl-demo", "--config", str(cfg_path),
                             "--supervised")
    assert code1 == code2 == 0
    doc1, doc2 = json.loads(out1), json.loads(out2)
    # no unlabelled data + gamma 0 vs supervised flag: identical trajectories
    assert doc1["per_epoch_accuracy"] == doc2["per_epoch_accuracy"]


def test_ssdl_demo_metrics_csv(capsys, tmp_path):
    config = {
        "task": {"kind": "blobs", "n_l": 8, "n_u": 40, "pct_ood": 0,
                 "contaminant": "none", "seed": 1, "input_dim": 2,
                 "test_per_class": 50},
        "mixmatch": {"epochs": 4, "lr": 0.05, "seed": 1, "batch_size": 8,
                     "rampup_rho": 20},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    metrics_path = tmp_path / "metrics.csv"
    code, out, _ = run_cli(capsys, "ssdl-demo", "--config", str(cfg_path),
                           "--metrics-out", str(metrics_path))
    assert code == 0
    doc = json.loads(out)
    lines = metrics_path.read_text().strip().split("\n")
    assert lines[0] == "epoch,test_accuracy"
    assert len(lines) == 5
    assert doc["best_accuracy"] == max(doc["per_epoch_accuracy"])
    assert doc["best_epoch"] >= 1


def test_distance_accepts_csv_matrices(capsys, tmp_path, feature_files):
    csv_path = tmp_path / "unlabelled.csv"
    data = load_fmat(feature_files["near"])
    csv_path.write_text(
        "\n".join(",".join(repr(float(v)) for v in row) for row in data) + "\n"
    )
    args_csv = ("distance", feature_files["labelled"], str(csv_path),
                "--tau", "20", "--rounds", "5", "--seed", "2")
    args_fmat = ("distance", feature_files["labelled"], feature_files["near"],
                 "--tau", "20", "--rounds", "5", "--seed", "2")
    code, out_csv, _ = run_cli(capsys, *args_csv)
    assert code == 0
    _, out_fmat, _ = run_cli(capsys, *args_fmat)
    assert json.loads(out_csv)["d_bar"] == json.loads(out_fmat)["d_bar"]


def test_ssdl_demo_l2_squared_flag(capsys, tmp_path):
    config = {
        "task": {"kind": "blobs", "n_l": 8, "n_u": 40, "pct_ood": 0,
                 "contaminant": "none", "seed": 3, "input_dim": 2,
                 "test_per_class": 50},
        "mixmatch": {"epochs": 3, "lr": 0.05, "seed": 3, "batch_size": 8,
                     "rampup_rho": 10},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    code1, out1, _ = run_cli(capsys, "ssdl-demo", "--config", str(cfg_path),
                             "--l2-squared", "true")
    code2, out2, _ = run_cli(capsys, "ssdl-demo", "--config", str(cfg_path),
                             "--l2-squared", "false")
    assert code1 == code2 == 0
    assert json.loads(out1)["mixmatch"]["l2_squared"] is True
    assert json.loads(out2)["mixmatch"]["l2_squared"] is False
    # the two penalties train differently
    assert out1 != out2


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
