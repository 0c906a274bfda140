import csv
import json

import numpy as np
import pytest

from bridgedpi.chem import fingerprint_from_hex, morgan_fingerprint, parse_smiles
from bridgedpi.cli import main
from bridgedpi.data_io import load_checkpoint, load_dataset
from gradcases import small_model_config

SMALL = {**small_model_config(m=3).to_dict(), "protein_max_len": 80, "smiles_max_len": 40,
         "fingerprint_bits": 256, "batch_size": 32, "max_epochs": 2}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["make-synthetic", "--out", str(root / "data.tsv"), "--seed", "3",
                 "--set", "n_pairs=200", "--set", "n_proteins=30", "--set", "n_drugs=24",
                 "--set", "min_length=40", "--set", "max_length=70"]) == 0
    (root / "config.json").write_text(json.dumps(SMALL))
    return root


def train(workdir, out, *extra):
    return main(["train", "--data", str(workdir / "data.tsv"), "--config", str(workdir / "config.json"),
                 "--out", str(out), *extra])


@pytest.fixture(scope="module")
def trained(workdir):
    out = workdir / "run"
    assert train(workdir, out, "--seed", "1") == 0
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_train_writes_artifacts(trained):
    for name in ("checkpoint.bdpi", "history.csv", "split.tsv", "report.csv", "run.json"):
        assert (trained / name).is_file()
    assert len(read_csv(trained / "history.csv")) == 2
    ckpt = load_checkpoint(trained / "checkpoint.bdpi")
    assert ckpt.metadata["seed"] == 1 and ckpt.metadata["train_proteins"]
    assert {r["stratum"] for r in read_csv(trained / "report.csv")} >= {"overall"}


def test_same_seed_gives_identical_outputs(workdir, trained):
    again = workdir / "again"
    assert train(workdir, again, "--seed", "1") == 0
    for name in ("history.csv", "checkpoint.bdpi", "split.tsv", "report.csv"):
        assert (again / name).read_bytes() == (trained / name).read_bytes()


def test_flag_overrides_beat_set_and_config(workdir, tmp_path):
    assert train(workdir, tmp_path, "--set", "seed=5", "--seed", "1", "--set", "max_epochs=1") == 0
    ckpt = load_checkpoint(tmp_path / "checkpoint.bdpi")
    assert ckpt.metadata["seed"] == 1
    assert len(read_csv(tmp_path / "history.csv")) == 1


@pytest.mark.parametrize("argv", [
    ["train", "--data", "missing.tsv", "--out", "x"],
    ["train", "--out", "x"],
    ["frobnicate"],
    ["sweep", "--data", "DATA", "--out", "x"],
    ["sweep", "--data", "DATA", "--out", "x", "--hyper-nodes", "a,b"],
])
def test_usage_errors_exit_2(workdir, argv, capsys):
    argv = [str(workdir / "data.tsv") if a == "DATA" else a for a in argv]
    assert main(argv) == 2


def test_unknown_config_key_exits_2(workdir, tmp_path, capsys):
    assert train(workdir, tmp_path, "--set", "no_such_key=1") == 2
    assert "no_such_key" in capsys.readouterr().err


def test_invalid_config_value_exits_2(workdir, tmp_path):
    assert train(workdir, tmp_path, "--set", "dropout_rate=1.5") == 2


def test_runtime_failure_exits_1(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("protein_id\tdrug_id\tprotein_sequence\tsmiles\tlabel\nP\tD\tMKV\tCCO\tmaybe\n")
    assert main(["train", "--data", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_eval_reports_strata(workdir, trained, tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(trained / "checkpoint.bdpi"), "--data", str(workdir / "data.tsv"),
                 "--out", str(tmp_path)]) == 0
    subsets = {r["stratum"] for r in read_csv(tmp_path / "report.csv")}
    assert "overall" in subsets and "seen" in subsets


def test_predict_matrix(workdir, trained, tmp_path, capsys):
    records = load_dataset(workdir / "data.tsv")
    proteins = list(dict((r.protein_id, r.protein_sequence) for r in records).items())[:3]
    drugs = list(dict((r.drug_id, r.smiles) for r in records).items())[:2]
    (tmp_path / "p.tsv").write_text("protein_id\tsequence\n" + "".join(f"{a}\t{b}\n" for a, b in proteins)
                                    + "BAD\n")
    (tmp_path / "d.tsv").write_text("drug_id\tsmiles\n" + "".join(f"{a}\t{b}\n" for a, b in drugs)
                                    + "BROKEN\tC1CC\nlonely\n")
    argv = ["predict", "--checkpoint", str(trained / "checkpoint.bdpi"), "--proteins", str(tmp_path / "p.tsv"),
            "--drugs", str(tmp_path / "d.tsv")]
    assert main(argv + ["--out", str(tmp_path / "a.csv")]) == 0
    err = capsys.readouterr().err
    assert err.count("skipped:") == 3
    with open(tmp_path / "a.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["drug_id"] + [pid for pid, _ in proteins]
    assert [r[0] for r in rows[1:]] == [did for did, _ in drugs]
    values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    assert values.shape == (2, 3) and np.all((values > 0) & (values < 1))
    assert main(argv + ["--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_predict_with_nothing_usable_exits_1(trained, tmp_path, capsys):
    (tmp_path / "p.tsv").write_text("P1\n")
    (tmp_path / "d.tsv").write_text("D1\tCCO\n")
    assert main(["predict", "--checkpoint", str(trained / "checkpoint.bdpi"), "--proteins", str(tmp_path / "p.tsv"),
                 "--drugs", str(tmp_path / "d.tsv"), "--out", str(tmp_path / "o.csv")]) == 1


def test_sweep_bypass_run_matches_single_training(workdir, tmp_path, capsys):
    assert main(["sweep", "--data", str(workdir / "data.tsv"), "--config", str(workdir / "config.json"),
                 "--out", str(tmp_path / "sw"), "--hyper-nodes", "-1,4", "--seed", "2"]) == 0
    rows = read_csv(tmp_path / "sw" / "sweep.csv")
    assert [r["m"] for r in rows] == ["-1", "4"]
    assert all(r["error"] == "" and 0 <= float(r["auc"]) <= 1 for r in rows)
    assert train(workdir, tmp_path / "single", "--seed", "2", "--set", "hyper_node_count=-1") == 0
    sweep_run = tmp_path / "sw" / "runs" / "m=-1"
    for name in ("checkpoint.bdpi", "history.csv"):
        assert (sweep_run / name).read_bytes() == (tmp_path / "single" / name).read_bytes()


def test_branch_sweep_has_one_row_per_grid_entry(workdir, tmp_path, capsys):
    assert main(["sweep", "--data", str(workdir / "data.tsv"), "--config", str(workdir / "config.json"),
                 "--set", "max_epochs=1", "--out", str(tmp_path), "--branches"]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 5
    assert list(rows[0])[:4] == ["protein_kmer", "protein_cnn", "drug_fp", "drug_cnn"]
    assert all(r["error"] == "" for r in rows)


def test_sweep_records_failures_without_aborting(workdir, tmp_path, capsys):
    # more folds than records: every run fails inside the worker
    code = main(["sweep", "--data", str(workdir / "data.tsv"), "--config", str(workdir / "config.json"),
                 "--folds", "500", "--out", str(tmp_path), "--hyper-nodes", "0,2"])
    rows = read_csv(tmp_path / "sweep.csv")
    assert code == 1 and len(rows) == 2 and all(r["error"] for r in rows)


def test_featurize_outputs(workdir, tmp_path, capsys):
    assert main(["featurize", "--data", str(workdir / "data.tsv"), "--config", str(workdir / "config.json"),
                 "--out", str(tmp_path)]) == 0
    records = load_dataset(workdir / "data.tsv")
    lines = (tmp_path / "fingerprints.tsv").read_text().splitlines()
    assert lines[0] == "drug_id\tfingerprint_hex"
    smiles = {r.drug_id: r.smiles for r in records}
    did, hexed = lines[1].split("\t")
    want = morgan_fingerprint(parse_smiles(smiles[did]), 2, SMALL["fingerprint_bits"])
    assert fingerprint_from_hex(hexed).on_bits == want.on_bits
    kmer = np.load(tmp_path / "kmer.npz")
    assert kmer["raw"].shape == (len({r.protein_id for r in records}), 8420)
    assert kmer["names"].shape == (8420,)


def test_make_synthetic_is_deterministic(tmp_path, capsys):
    argv = ["make-synthetic", "--seed", "9", "--set", "n_pairs=40", "--set", "n_proteins=10", "--set", "n_drugs=10"]
    assert main(argv + ["--out", str(tmp_path / "a.tsv")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b.tsv")]) == 0
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
    assert main(["make-synthetic", "--out", str(tmp_path / "c.tsv"), "--set", "n_pairs=1"]) == 2
    assert main(["make-synthetic", "--out", str(tmp_path / "c.tsv"), "--set", "bogus=1"]) == 2
