"""Command-line harness: ``mkproto {train,eval,synthetic,inspect}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 convergence or
constraint violation.  Effective settings are resolved as built-in defaults
< ``--config`` JSON file < command-line flags and always written to
``<out>/config.json``.  ``MKPROTO_OUTPUT_DIR`` sets the default output
directory.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data as _data
from .kernel import one_hot
from .model_io import load_model, save_model
from .objective import HyperParams
from .optimizer import ConstraintError, DescentError, fit
from .pipeline import evaluate_model, gaussian_kernels, kernel_rows, run_split, training_kernels

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 0, 1, 2, 3

DEFAULTS = {
    **HyperParams().to_dict(),
    "seed": 0,
    "repeat": 1,
    "samples_per_class": 25,
    "series_length": 50,
    "noise_std": 0.1,
    "seeds": 5,
}
DEFAULT_TEST_FRACTION = 0.5
HYPER_KEYS = set(HyperParams().to_dict())


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_hyper(p):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--lam", type=float, help="weight of the discriminative loss")
    g.add_argument("--mu", type=float, help="weight of the local-separation loss")
    g.add_argument("--tau", type=float, help="weight of the interpretability loss")
    g.add_argument("-T", "--T", dest="T", type=int, help="prototype sparsity (codes use T-1)")
    g.add_argument("-k", "--k", dest="k", type=int, help="neighbourhood size (default T)")
    g.add_argument("-m", "--m", dest="m", type=int, help="number of prototypes (default c*T)")
    g.add_argument("--eta", type=float, help="kernel-weight step size in (0, 1]")
    g.add_argument("--tol", type=float, help="relative convergence tolerance")
    g.add_argument("--max-iters", dest="max_iters", type=int, help="maximum number of sweeps")
    g.add_argument("--alpha-floor", dest="alpha_floor", type=float,
                   help="kernel weights below this are zeroed after training")


def _add_common(p):
    p.add_argument("--config", type=Path, help="JSON file with default settings")
    p.add_argument("--out", type=Path, help="output directory (env MKPROTO_OUTPUT_DIR, else ./mkproto-out)")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_synth(p):
    p.add_argument("--samples-per-class", dest="samples_per_class", type=int)
    p.add_argument("--series-length", dest="series_length", type=int)
    p.add_argument("--noise-std", dest="noise_std", type=float)


def build_parser():
    parser = _Parser(prog="mkproto", description="Interpretable multiple-kernel prototype learning.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", type=Path, help="one sample per row")
    src.add_argument("--kernels", type=Path, nargs="+", help="precomputed N x N kernel files")
    src.add_argument("--synthetic", action="store_true", help="generate the synthetic series dataset")
    p.add_argument("--label-column", default="-1", help="label column index or header name")
    p.add_argument("--labels", type=Path, help="label file (one per line) for --kernels")
    p.add_argument("--test-fraction", dest="test_fraction", type=float,
                   help="hold out this stratified fraction (csv / synthetic)")
    _add_synth(p)
    _add_hyper(p)
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("model", type=Path)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", type=Path, help="test samples, same layout as training")
    src.add_argument("--test-kernels", dest="test_kernels", type=Path, nargs="+",
                     help="M x N kernel-row files, one per base kernel")
    src.add_argument("--heldout", action="store_true",
                     help="the split held out at training time")
    p.add_argument("--label-column", default="-1")
    p.add_argument("--test-labels", dest="test_labels", type=Path)
    p.add_argument("--repeat", type=int,
                   help="retrain on this many random splits of the training data and report mean/std")
    _add_common(p)

    p = sub.add_parser("synthetic", help="run the synthetic experiment over several seeds")
    p.add_argument("--seeds", type=int, help="number of random seeds")
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    _add_synth(p)
    _add_hyper(p)
    _add_common(p)

    p = sub.add_parser("inspect", help="list prototypes and kernel weights of a model")
    p.add_argument("model", type=Path)
    p.add_argument("--top", type=int, default=5, help="samples listed per prototype")
    return parser


def resolve_config(args):
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    for key, val in vars(args).items():
        if val is not None and key not in ("config", "verbose"):
            cfg[key] = str(val) if isinstance(val, Path) else val
    if isinstance(cfg.get("kernels"), list):
        cfg["kernels"] = [str(p) for p in cfg["kernels"]]
    if isinstance(cfg.get("test_kernels"), list):
        cfg["test_kernels"] = [str(p) for p in cfg["test_kernels"]]
    out = cfg.get("out") or os.environ.get("MKPROTO_OUTPUT_DIR") or "mkproto-out"
    cfg["out"] = str(out)
    return cfg


def hyper_from(cfg):
    try:
        return HyperParams(**{k: cfg[k] for k in HYPER_KEYS if k in cfg})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _label_column(text):
    try:
        return int(text)
    except ValueError:
        return text


def _synth_spec(cfg, seed):
    return _data.SyntheticSpec(cfg["samples_per_class"], cfg["series_length"], cfg["noise_std"], seed)


def _write_trace(model, path):
    lines = [f"{'sweep':>5} {'total':>16} {'rec':>14} {'dis':>14} {'ls':>14} {'ip':>14}"]
    for i, l in enumerate(model.loss_trace):
        lines.append(f"{i:5d} {l.total:16.10f} {l.rec:14.8f} {l.dis:14.8f} {l.ls:14.8f} {l.ip:14.8f}")
    Path(path).write_text("\n".join(lines) + "\n")


def _alpha_text(weights):
    lines = [f"kernel {l + 1}: {w:.6f}" for l, w in enumerate(weights)]
    support = [str(l + 1) for l in np.flatnonzero(weights)]
    lines.append("support: " + " ".join(support))
    return "\n".join(lines) + "\n"


def _save_config(cfg, out):
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True, default=str))


# ---------------------------------------------------------------- commands

def cmd_train(cfg):
    out = Path(cfg["out"])
    hyper = hyper_from(cfg)
    seed = cfg["seed"]
    classes = None
    if cfg.get("kernels"):
        ks = _data.load_kernels(cfg["kernels"])
        if not cfg.get("labels"):
            raise UsageError("--kernels requires --labels")
        raw = Path(cfg["labels"]).read_text().split()
        classes = sorted(set(raw))
        labels = np.array([classes.index(v) for v in raw])
        if labels.size != ks.n_samples:
            raise _data.DataError(f"{labels.size} labels for {ks.n_samples} samples")
        source = {"kind": "files", "paths": [str(Path(p).resolve()) for p in cfg["kernels"]]}
        train_ds = None
    else:
        if cfg.get("synthetic"):
            ds = _data.synthesize(_synth_spec(cfg, seed))
            source_data = {"type": "synthetic", **asdict(_synth_spec(cfg, seed))}
        else:
            ds = _data.load_csv(cfg["csv"], _label_column(cfg["label_column"]))
            source_data = {"type": "csv", "path": str(Path(cfg["csv"]).resolve()),
                           "label_column": cfg["label_column"]}
        if cfg.get("test_fraction"):
            train_ds, _ = _data.split(ds, cfg["test_fraction"], seed)
            source_data.update(test_fraction=cfg["test_fraction"], split_seed=seed)
        else:
            train_ds = ds
        ks, source = gaussian_kernels(train_ds)
        source["data"] = source_data
        labels, classes = train_ds.labels, train_ds.classes
    out.mkdir(parents=True, exist_ok=True)
    _save_config(cfg, out)
    model = fit(ks, one_hot(labels, len(classes)), hyper, seed=seed)
    model.source = source
    save_model(model, out / "model.json", classes, labels)
    _write_trace(model, out / "loss_trace.txt")
    (out / "alpha.txt").write_text(_alpha_text(model.weights))
    print(f"trained {model.prototypes.shape[1]} prototypes in {model.n_sweeps} sweeps "
          f"(converged: {model.converged}); final loss {model.final_loss.total:.6f}")
    print(_alpha_text(model.weights), end="")
    return EXIT_OK


def _eval_once(model, classes, train_labels, cfg):
    source = model.source
    ks = training_kernels(source)
    H_train = one_hot(np.asarray(train_labels), model.n_classes)
    if cfg.get("test_kernels"):
        rows = np.stack([_data.read_matrix(p) for p in cfg["test_kernels"]])
        if not cfg.get("test_labels"):
            raise UsageError("--test-kernels requires --test-labels")
        raw = Path(cfg["test_labels"]).read_text().split()
        lookup = {str(c): q for q, c in enumerate(classes)}
        test_labels = np.array([lookup[v] for v in raw])
    else:
        test = _test_dataset(source, cfg, classes)
        rows = kernel_rows(source, test.features)
        test_labels = test.labels
    if test_labels.size == 0:
        raise _data.DataError("empty test set")
    report, _, _ = evaluate_model(model, ks, H_train, rows, test_labels)
    return report


def _test_dataset(source, cfg, classes):
    if cfg.get("csv"):
        ds = _data.load_csv(cfg["csv"], _label_column(cfg["label_column"]))
        lookup = {c: q for q, c in enumerate(classes)}
        try:
            labels = np.array([lookup[ds.classes[q]] for q in ds.labels])
        except KeyError as exc:
            raise _data.DataError(f"test label {exc.args[0]!r} unseen in training") from None
        return _data.Dataset(ds.features, labels, ds.name, list(classes))
    meta = source.get("data") or {}
    if "test_fraction" not in meta:
        raise UsageError("--heldout needs a model trained with --test-fraction")
    if meta["type"] == "synthetic":
        ds = _data.synthesize(_data.SyntheticSpec(meta["samples_per_class"], meta["series_length"],
                                                  meta["noise_std"], meta["seed"]))
    else:
        ds = _data.load_csv(meta["path"], _label_column(meta["label_column"]))
    _, test = _data.split(ds, meta["test_fraction"], meta["split_seed"])
    return test


def cmd_eval(cfg):
    out = Path(cfg["out"])
    model, classes, train_labels = load_model(cfg["model"])
    repeat = int(cfg.get("repeat") or 1)
    out.mkdir(parents=True, exist_ok=True)
    _save_config(cfg, out)
    if repeat > 1:
        return _eval_repeated(model, classes, cfg, repeat, out)
    report = _eval_once(model, classes, train_labels, cfg)
    (out / "report.txt").write_text(report.to_text())
    (out / "report.json").write_text(report.to_json())
    print(report.to_text(), end="")
    return EXIT_OK


def _eval_repeated(model, classes, cfg, repeat, out):
    meta = model.source.get("data")
    if meta is None:
        raise UsageError("--repeat needs a model trained from csv or synthetic data")
    if meta["type"] == "synthetic":
        ds = _data.synthesize(_data.SyntheticSpec(meta["samples_per_class"], meta["series_length"],
                                                  meta["noise_std"], meta["seed"]))
    else:
        ds = _data.load_csv(meta["path"], _label_column(meta["label_column"]))
    frac = meta.get("test_fraction") or cfg.get("test_fraction") or DEFAULT_TEST_FRACTION
    runs = [run_split(ds, model.hyper, seed, frac) for seed in range(repeat)]
    summary = _summary([r.report for r in runs])
    (out / "report.json").write_text(json.dumps(
        {"summary": summary, "runs": [r.report.to_dict() for r in runs]}, indent=2))
    text = "".join(f"{k}_mean = {v['mean']!r}\n{k}_std = {v['std']!r}\n" for k, v in summary.items())
    (out / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def _summary(reports):
    out = {}
    for key in ("ip", "dr", "acc"):
        vals = np.array([getattr(r, key) for r in reports])
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def cmd_synthetic(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _save_config(cfg, out)
    hyper = hyper_from(cfg)
    base = cfg["seed"]
    results = []
    for seed in range(base, base + int(cfg["seeds"])):
        ds = _data.synthesize(_synth_spec(cfg, seed))
        results.append(run_split(ds, hyper, seed, cfg.get("test_fraction") or DEFAULT_TEST_FRACTION))
    lines = []
    runs = []
    for r in results:
        w = r.model.weights
        verdict = "zero" if w[7] == 0 and w[8] == 0 else "non-zero"
        lines.append(f"seed {r.seed}: acc {r.report.acc:.2f}  ip {r.report.ip:.2f}  dr {r.report.dr:.2f}  "
                     f"sweeps {r.model.n_sweeps}  alpha support {[int(i) + 1 for i in np.flatnonzero(w)]}  "
                     f"f8/f9 weights {verdict}  ({r.seconds:.1f}s)")
        runs.append({"seed": r.seed, "report": r.report.to_dict(), "weights": w.tolist(),
                     "sweeps": r.model.n_sweeps, "converged": r.model.converged,
                     "objective_curve": [l.total for l in r.model.loss_trace],
                     "seconds": r.seconds})
    summary = _summary([r.report for r in results])
    lines.append("mean acc {acc[mean]:.2f} +- {acc[std]:.2f}, ip {ip[mean]:.2f}, dr {dr[mean]:.2f}".format(**summary))
    (out / "synthetic_report.json").write_text(json.dumps({"summary": summary, "runs": runs}, indent=2))
    with open(out / "objective_curves.txt", "w") as fh:
        for run in runs:
            fh.write(f"# seed {run['seed']}\n")
            fh.writelines(f"{i} {v!r}\n" for i, v in enumerate(run["objective_curve"]))
    (out / "synthetic_report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_inspect(cfg):
    model, classes, train_labels = load_model(cfg["model"])
    A = model.prototypes
    print(_alpha_text(model.weights), end="")
    for i in range(A.shape[1]):
        col = A[:, i]
        idx = np.argsort(-col, kind="stable")[: int(cfg.get("top", 5))]
        idx = idx[col[idx] > 0]
        q = int(model.label_assignment[i])
        members = ", ".join(
            f"{s}({classes[train_labels[s]] if train_labels is not None else '?'}):{col[s]:.3f}" for s in idx)
        print(f"prototype {i:3d} class {classes[q]}  {members}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "synthetic": cmd_synthetic, "inspect": cmd_inspect}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"mkproto: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DescentError, ConstraintError) as exc:
        print(f"mkproto: optimizer invariant violated: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (_data.DataError, OSError, ValueError, KeyError) as exc:
        print(f"mkproto: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
