"""Command-line entry point: ``bridgedpi <command> [options]``.

Commands: train, eval, predict, sweep, featurize, make-synthetic.
Exit status is 0 on success, 2 on a usage error (bad flags, missing or
unreadable input paths, unknown config keys) and 1 on a runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from .chem import SmilesError, fingerprint_to_hex, morgan_fingerprint, parse_smiles
from .data_io import (
    DatasetSplit,
    PairRecord,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    write_dataset,
)
from .metrics import format_reports, reports_to_csv
from .model import ModelConfig
from .pipeline import (
    RunConfig,
    config_keys,
    model_from_checkpoint,
    run_experiment,
    split_config,
    stratified_reports,
    to_dataset,
)
from .protein import block_normalize, kmer_features, kmer_names
from .synthetic import SyntheticSpec, make_synthetic
from .train import TrainConfig, history_to_csv

log = logging.getLogger("bridgedpi")

COMMANDS = ("train", "eval", "predict", "sweep", "featurize", "make-synthetic")
BRANCHES = ("use_protein_kmer", "use_protein_cnn", "use_drug_fp", "use_drug_cnn")
# one protein branch with one drug branch, then everything on
BRANCH_GRID = (
    (True, False, True, False),
    (True, False, False, True),
    (False, True, True, False),
    (False, True, False, True),
    (True, True, True, True),
)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridgedpi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p, data=True):
        p.add_argument("--config", type=Path, help="JSON document of config key/value pairs")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable); VALUE is parsed as JSON when possible")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, required=True)
        if data:
            p.add_argument("--data", type=Path, required=True, help="dataset TSV")

    p = sub.add_parser("train", help="train a model and evaluate it on held-out data")
    common(p)
    p.add_argument("--valid", type=Path, help="explicit validation TSV (otherwise split from --data)")
    p.add_argument("--test", type=Path, help="explicit test TSV")
    p.add_argument("--checkpoint", type=Path, help="checkpoint path (default OUT/checkpoint.bdpi)")
    p.add_argument("--folds", type=int, help="k for k-fold splitting")
    p.add_argument("--fold", type=int, default=0, help="validation fold index")
    p.add_argument("--deterministic", action="store_true", help="train without dropout noise")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labelled dataset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, help="directory for report.csv (stdout only when omitted)")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("predict", help="write a drugs x proteins probability matrix")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--proteins", type=Path, required=True, help="TSV of protein_id, sequence")
    p.add_argument("--drugs", type=Path, required=True, help="TSV of drug_id, smiles")
    p.add_argument("--out", type=Path, required=True, help="output CSV path")

    p = sub.add_parser("sweep", help="train one model per hyper-node count or branch setting")
    common(p)
    p.add_argument("--hyper-nodes", help="comma-separated hyper-node counts, e.g. -1,1,8")
    p.add_argument("--branches", action="store_true", help="sweep the feature-branch grid")
    p.add_argument("--folds", type=int)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="runs in parallel processes (default 1)")

    p = sub.add_parser("featurize", help="dump fingerprints and k-mer features")
    common(p)

    p = sub.add_parser("make-synthetic", help="generate a synthetic dataset with a known rule")
    p.add_argument("--out", type=Path, required=True, help="output TSV path")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", type=Path)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return parser


def parse_overrides(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def load_config_document(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return doc


def resolve_config(args, allowed: set[str]) -> dict:
    """Defaults < config document < --set overrides < dedicated flags."""
    flat = load_config_document(args.config)
    flat.update(parse_overrides(args.overrides))
    if getattr(args, "seed", None) is not None:
        flat["seed"] = args.seed
    if getattr(args, "deterministic", False):
        flat["deterministic"] = True
    if getattr(args, "folds", None):
        flat["folds"], flat["fold"] = args.folds, args.fold
    unknown = set(flat) - allowed
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return flat


def build_configs(flat: dict) -> tuple[ModelConfig, TrainConfig, RunConfig]:
    try:
        return split_config(flat)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc


def require_file(path: Path, what: str):
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")


def read_id_table(path: Path, header: str) -> tuple[list[tuple[str, str]], list[str]]:
    """Two-column TSV (id, value); a first row starting with ``header`` is skipped."""
    rows, problems = [], []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or (lineno == 1 and line.split("\t")[0] == header):
            continue
        cells = [c.strip() for c in line.split("\t")]
        if len(cells) < 2 or not cells[0] or not cells[1]:
            problems.append(f"{path}:{lineno}: expected id<TAB>value")
            continue
        rows.append((cells[0], cells[1]))
    return rows, problems


# --------------------------------------------------------------------------
# commands


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_train(args) -> int:
    require_file(args.data, "dataset")
    for extra, what in ((args.valid, "validation set"), (args.test, "test set")):
        if extra is not None:
            require_file(extra, what)
    if args.test is not None and args.valid is None:
        raise UsageError("--test needs --valid")
    model_cfg, train_cfg, run = build_configs(resolve_config(args, config_keys()))
    records = load_dataset(args.data)
    split = None
    if args.valid is not None:
        valid = load_dataset(args.valid)
        test = load_dataset(args.test) if args.test is not None else []
        n, nv = len(records), len(valid)
        split = DatasetSplit(list(range(n)), list(range(n, n + nv)), list(range(n + nv, n + nv + len(test))))
        records = records + valid + test
        train_proteins = {records[i].protein_id for i in split.train}
        split.seen = {i: records[i].protein_id in train_proteins for i in split.valid + split.test}

    started = time.time()
    result = run_experiment(records, model_cfg, train_cfg, run, split)
    out = args.out
    ckpt_path = args.checkpoint or out / "checkpoint.bdpi"
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt_path, result.checkpoint(records, train_cfg))
    _write(out / "history.csv", history_to_csv(result.history))
    _write(out / "split.tsv", result.split.manifest())
    _write(out / "report.csv", reports_to_csv(result.reports))
    _write(out / "run.json", json.dumps({"started": started, "seconds": result.seconds,
                                         "best_epoch": result.best_epoch,
                                         "best_val_auc": result.best_val_auc}, indent=2) + "\n")
    print(f"best validation AUC {result.best_val_auc:.4f} at epoch {result.best_epoch}")
    print(format_reports(result.reports))
    return 0


def cmd_eval(args) -> int:
    require_file(args.checkpoint, "checkpoint")
    require_file(args.data, "dataset")
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    records = load_dataset(args.data)
    data = to_dataset(model.featurizer, records)
    scores = model.predict(data.features)
    seen = None
    if "train_proteins" in ckpt.metadata:
        known = set(ckpt.metadata["train_proteins"])
        seen = np.array([r.protein_id in known for r in records], dtype=bool)
    reports = stratified_reports(scores, data.labels, seen, args.threshold)
    if args.out is not None:
        _write(args.out / "report.csv", reports_to_csv(reports))
    print(format_reports(reports))
    return 0


def cmd_predict(args) -> int:
    for path, what in ((args.checkpoint, "checkpoint"), (args.proteins, "protein list"),
                       (args.drugs, "drug list")):
        require_file(path, what)
    model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    proteins, problems = read_id_table(args.proteins, "protein_id")
    drugs, drug_problems = read_id_table(args.drugs, "drug_id")
    problems += drug_problems
    good_proteins, good_drugs = [], []
    for pid, seq in proteins:
        try:
            model.featurizer.protein(seq)
            good_proteins.append((pid, seq))
        except ValueError as exc:
            problems.append(f"protein {pid}: {exc}")
    for did, smi in drugs:
        try:
            model.featurizer.drug(smi)
            good_drugs.append((did, smi))
        except (SmilesError, ValueError) as exc:
            problems.append(f"drug {did}: {exc}")
    for msg in problems:
        print(f"skipped: {msg}", file=sys.stderr)
    if not good_proteins or not good_drugs:
        print("error: no usable proteins or drugs", file=sys.stderr)
        return 1
    seqs = [seq for _, seq in good_proteins] * len(good_drugs)
    smiles = [smi for _, smi in good_drugs for _ in good_proteins]
    probs = model.predict(model.featurizer.batch(seqs, smiles)).reshape(len(good_drugs), len(good_proteins))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["drug_id"] + [pid for pid, _ in good_proteins])
    for (did, _), row in zip(good_drugs, probs):
        writer.writerow([did] + [repr(float(p)) for p in row])
    _write(args.out, buf.getvalue())
    print(f"wrote {len(good_drugs)} x {len(good_proteins)} matrix to {args.out}; skipped {len(problems)} row(s)")
    return 0


def _sweep_run(records: list[PairRecord], flat: dict, out_dir: str) -> dict:
    """One sweep entry; failures are returned as an error string, not raised."""
    try:
        model_cfg, train_cfg, run = split_config(flat)
        result = run_experiment(records, model_cfg, train_cfg, run)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out / "checkpoint.bdpi", result.checkpoint(records, train_cfg))
        (out / "history.csv").write_text(history_to_csv(result.history), encoding="utf-8")
        (out / "report.csv").write_text(reports_to_csv(result.reports), encoding="utf-8")
        overall = result.reports["overall"]
        unseen = result.reports.get("unseen")
        return {"auc": overall.auc, "acc": overall.acc, "f1": overall.f1,
                "unseen_auc": unseen.auc if unseen else float("nan"),
                "unseen_acc": unseen.acc if unseen else float("nan"), "error": ""}
    except Exception as exc:  # noqa: BLE001 - recorded in the summary row
        nan = float("nan")
        return {"auc": nan, "acc": nan, "f1": nan, "unseen_auc": nan, "unseen_acc": nan,
                "error": f"{type(exc).__name__}: {exc}"}


def parse_hyper_nodes(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise UsageError(f"--hyper-nodes expects comma-separated integers, got {text!r}") from exc
    if not values or min(values) < -1:
        raise UsageError("--hyper-nodes values must be integers >= -1")
    return values


def cmd_sweep(args) -> int:
    require_file(args.data, "dataset")
    if (args.hyper_nodes is None) == (not args.branches):
        raise UsageError("give exactly one of --hyper-nodes or --branches")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    base = resolve_config(args, config_keys())
    build_configs(base)
    records = load_dataset(args.data)

    runs: list[tuple[dict, dict, str]] = []  # (label columns, flat config, run dir)
    if args.hyper_nodes is not None:
        for m in parse_hyper_nodes(args.hyper_nodes):
            runs.append(({"m": m}, {**base, "hyper_node_count": m}, f"m={m}"))
    else:
        for flags in BRANCH_GRID:
            label = dict(zip(BRANCHES, flags))
            name = "+".join(b.removeprefix("use_") for b, on in label.items() if on)
            runs.append(({k.removeprefix("use_"): int(v) for k, v in label.items()},
                         {**base, **label}, name))
    for _, flat, _ in runs:
        build_configs(flat)

    run_root = args.out / "runs"
    jobs = [(records, flat, str(run_root / name)) for _, flat, name in runs]
    if args.jobs == 1:
        results = [_sweep_run(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_run, *zip(*jobs)))

    columns = list(runs[0][0]) + ["auc", "acc", "unseen_auc", "unseen_acc", "error"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    failures = 0
    for (label, _, _), res in zip(runs, results):
        writer.writerow({**label, **{k: (repr(v) if isinstance(v, float) else v) for k, v in res.items()}})
        failures += bool(res["error"])
    _write(args.out / "sweep.csv", buf.getvalue())
    print(buf.getvalue(), end="")
    if failures:
        print(f"{failures} run(s) failed; see the error column", file=sys.stderr)
    return 1 if failures == len(runs) else 0


def cmd_featurize(args) -> int:
    require_file(args.data, "dataset")
    flat = resolve_config(args, config_keys())
    model_cfg, _, _ = build_configs(flat)
    records = load_dataset(args.data)
    drugs = dict(sorted({(r.drug_id, r.smiles) for r in records}))
    proteins = dict(sorted({(r.protein_id, r.protein_sequence) for r in records}))
    lines = ["drug_id\tfingerprint_hex"]
    problems = 0
    for did, smi in drugs.items():
        try:
            fp = morgan_fingerprint(parse_smiles(smi), model_cfg.fingerprint_radius, model_cfg.fingerprint_bits)
        except SmilesError as exc:
            print(f"skipped drug {did}: {exc}", file=sys.stderr)
            problems += 1
            continue
        lines.append(f"{did}\t{fingerprint_to_hex(fp)}")
    _write(args.out / "fingerprints.tsv", "\n".join(lines) + "\n")
    ids, raw = [], []
    for pid, seq in proteins.items():
        try:
            raw.append(kmer_features(seq))
            ids.append(pid)
        except ValueError as exc:
            print(f"skipped protein {pid}: {exc}", file=sys.stderr)
            problems += 1
    raw_arr = np.array(raw).reshape(len(raw), -1)
    np.savez(args.out / "kmer.npz", protein_ids=np.array(ids), names=np.array(kmer_names()),
             raw=raw_arr, normalized=block_normalize(raw_arr) if len(raw) else raw_arr)
    print(f"{len(lines) - 1} fingerprints, {len(ids)} k-mer vectors, {problems} skipped")
    return 0


def cmd_make_synthetic(args) -> int:
    allowed = {f.name for f in fields(SyntheticSpec)}
    flat = resolve_config(args, allowed)
    try:
        spec = SyntheticSpec(**flat)
    except TypeError as exc:
        raise UsageError(f"invalid synthetic settings: {exc}") from exc
    if spec.n_pairs < 2 or spec.n_proteins < 2 or spec.n_drugs < 2 or spec.min_length > spec.max_length:
        raise UsageError("need n_pairs, n_proteins, n_drugs >= 2 and min_length <= max_length")
    records = make_synthetic(spec)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(args.out, records)
    positives = sum(r.label for r in records)
    print(f"wrote {len(records)} pairs ({positives} positive) to {args.out}")
    return 0


HANDLERS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "sweep": cmd_sweep,
    "featurize": cmd_featurize,
    "make-synthetic": cmd_make_synthetic,
}


def _join_negative_lists(argv: list[str]) -> list[str]:
    # "--hyper-nodes -1,1,8" would otherwise read "-1,1,8" as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--hyper-nodes" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--hyper-nodes={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _join_negative_lists(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level diagnostic
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
