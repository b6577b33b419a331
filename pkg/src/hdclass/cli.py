"""Command-line harness: train, eval, sweep-weights, noise, roc, synth.

Every command resolves its configuration from built-in defaults, then an
optional flat config file (``section.key = value`` lines), then explicit
flags (flag wins), echoes the resolved config into the output directory
before computing anything, and writes deterministic artifacts only (logs
go to stderr).  Exit codes: 0 success, 1 config error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import data as dio
from . import metrics, robustness
from .learner import TrainConfig, train
from .serialize import load_model, save_model, write_json_atomic

log = logging.getLogger("hdclass")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

OUT_ROOT_ENV = "HDCLASS_OUT_ROOT"


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


class NumericalError(Exception):
    pass


# ---------------------------------------------------------------------------
# config resolution

TRAIN_DEFAULTS = {
    "train.dim": 500,
    "train.eta": 0.05,
    "train.alpha": 2.0,
    "train.beta": 1.0,
    "train.theta": 0.5,
    "train.regen_rate": 20.0,
    "train.max_iters": 30,
    "train.patience": 5,
    "train.min_delta": 0.001,
    "train.mode": "dynamic",
    "train.seed": 0,
    "train.shuffle": False,
    "train.n_formula": "prose",
    "data.normalize": "zscore",
    "data.fractions": "0.8,0.2,0.0",
    "data.label_column": "-1",
}


def parse_config_file(path: str) -> dict:
    resolved = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
                key, value = line.split("=", 1)
                resolved[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return resolved


def write_config_echo(path: str, resolved: dict) -> None:
    lines = [f"{k} = {resolved[k]}" for k in sorted(resolved)]
    _write_text_atomic(path, "\n".join(lines) + "\n")


def _coerce(value, like):
    if isinstance(like, bool):
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    return type(like)(value)


def resolve_train_config(args) -> dict:
    resolved = dict(TRAIN_DEFAULTS)
    if args.config:
        file_values = parse_config_file(args.config)
        unknown = set(file_values) - set(resolved)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for k, v in file_values.items():
            resolved[k] = _coerce(v, TRAIN_DEFAULTS[k])
    flag_map = {
        "dim": "train.dim", "eta": "train.eta", "alpha": "train.alpha",
        "beta": "train.beta", "theta": "train.theta",
        "regen_rate": "train.regen_rate", "max_iters": "train.max_iters",
        "patience": "train.patience", "min_delta": "train.min_delta",
        "mode": "train.mode", "seed": "train.seed", "shuffle": "train.shuffle",
        "n_formula": "train.n_formula", "normalize": "data.normalize",
        "fractions": "data.fractions", "label_column": "data.label_column",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            resolved[key] = _coerce(value, TRAIN_DEFAULTS[key])
    return resolved


def train_config_from_resolved(resolved: dict) -> TrainConfig:
    try:
        return TrainConfig(
            dim=int(resolved["train.dim"]),
            eta=float(resolved["train.eta"]),
            alpha=float(resolved["train.alpha"]),
            beta=float(resolved["train.beta"]),
            theta=float(resolved["train.theta"]),
            regen_rate=float(resolved["train.regen_rate"]),
            max_iters=int(resolved["train.max_iters"]),
            patience=int(resolved["train.patience"]),
            min_delta=float(resolved["train.min_delta"]),
            mode=str(resolved["train.mode"]),
            seed=int(resolved["train.seed"]),
            shuffle=bool(resolved["train.shuffle"]),
            n_formula=str(resolved["train.n_formula"]),
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# shared helpers

def _out_dir(args, command: str) -> str:
    if args.out:
        out = args.out
    else:
        out = os.path.join(os.environ.get(OUT_ROOT_ENV, "."), command)
    os.makedirs(out, exist_ok=True)
    return out


def _load_dataset(path: str, label_column="-1") -> dio.Dataset:
    if not os.path.exists(path):
        raise DataError(f"dataset not found: {path}")
    try:
        col = int(label_column)
    except (TypeError, ValueError):
        col = label_column
    try:
        return dio.load_csv(path, label_column=col)
    except dio.ParseError as exc:
        raise DataError(str(exc)) from exc


def _normalize(train_ds, other_sets, mode: str):
    if mode == "none":
        return None, train_ds, other_sets
    spec = dio.fit_normalizer(train_ds, mode)
    return (spec, dio.apply_normalizer(spec, train_ds),
            [dio.apply_normalizer(spec, ds) for ds in other_sets])


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError("non-finite values detected in model state")


def _write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _evaluate(encoder, model, ds: dio.Dataset, k_list) -> dict:
    encoded = encoder.encode_batch(ds.features)
    from .learner import _score_matrix

    preds = np.argmax(_score_matrix(model, encoded), axis=1)
    cm = metrics.confusion_matrix(preds, ds.labels, model.n_classes)
    per_class = {}
    for c in range(model.n_classes):
        rates = metrics.sensitivity_specificity(cm, c)
        per_class[str(c)] = {
            "sensitivity": rates.sensitivity if rates.sensitivity_defined else None,
            "specificity": rates.specificity if rates.specificity_defined else None,
        }
    return {
        "accuracy": metrics.accuracy(preds, ds.labels),
        "top_k_accuracy": {str(k): metrics.top_k_accuracy(model, encoded, ds.labels, k)
                           for k in k_list},
        "confusion_matrix": cm.tolist(),
        "per_class": per_class,
    }


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args) -> int:
    out = _out_dir(args, "synth")
    ds = dio.synth_blobs(args.features, args.classes, args.per_class,
                         args.separation, args.seed)
    write_config_echo(os.path.join(out, "config.txt"), {
        "synth.features": args.features, "synth.classes": args.classes,
        "synth.per_class": args.per_class, "synth.separation": args.separation,
        "synth.seed": args.seed,
    })
    dio.save_csv(os.path.join(out, "blobs.csv"), ds)
    return EXIT_OK


def cmd_train(args) -> int:
    out = _out_dir(args, "train")
    resolved = resolve_train_config(args)
    cfg = train_config_from_resolved(resolved)
    write_config_echo(os.path.join(out, "config.txt"), resolved)

    ds = _load_dataset(args.data, resolved["data.label_column"])
    if args.valid:
        train_ds, valid_ds = ds, _load_dataset(args.valid, resolved["data.label_column"])
        if valid_ds.n_features != train_ds.n_features:
            raise DataError(
                f"feature count mismatch between splits: {train_ds.n_features} "
                f"vs {valid_ds.n_features}")
        if set(valid_ds.names or []) - set(train_ds.names or []):
            raise DataError("validation labels missing from the training split")
    else:
        fractions = [float(x) for x in str(resolved["data.fractions"]).split(",")]
        train_ds, valid_ds, _ = dio.split(ds, fractions, stratified=True, seed=cfg.seed)

    spec, train_ds, (valid_ds,) = _normalize(train_ds, [valid_ds],
                                             resolved["data.normalize"])
    result = train(cfg, train_ds, valid_ds, collect_dumps=args.dump_regen)
    if args.dump_regen:
        encoder, model, report, dumps = result
        from .regen import write_dump_csv
        write_dump_csv(os.path.join(out, "regen_dump.csv"), dumps)
    else:
        encoder, model, report = result
    _check_finite(model.classes, encoder.base, encoder.phase)

    save_model(os.path.join(out, "model.json"), encoder, model)
    _write_text_atomic(os.path.join(out, "report.jsonl"), report.to_jsonl())
    write_json_atomic(os.path.join(out, "labels.json"),
                      {"names": train_ds.names})
    if spec is not None:
        write_json_atomic(os.path.join(out, "norm.json"), spec.to_dict())
    log.info("trained %s iterations (converged=%s)", report.iterations,
             report.converged)
    return EXIT_OK


def _load_model_checked(path: str):
    if not os.path.exists(path):
        raise DataError(f"model not found: {path}")
    try:
        return load_model(path)
    except (ValueError, KeyError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def _load_eval_data(args, encoder):
    ds = _load_dataset(args.data, getattr(args, "label_column", None) or "-1")
    if args.norm:
        with open(args.norm, "r", encoding="utf-8") as fh:
            spec = dio.NormalizationSpec.from_dict(json.load(fh))
        ds = dio.apply_normalizer(spec, ds)
    if ds.n_features != encoder.n_features:
        raise DataError(
            f"feature count mismatch: encoder expects {encoder.n_features}, "
            f"dataset has {ds.n_features}")
    return ds


def cmd_eval(args) -> int:
    out = _out_dir(args, "eval")
    encoder, model = _load_model_checked(args.model)
    ds = _load_eval_data(args, encoder)
    k_list = [int(k) for k in args.topk.split(",")]
    if any(not 1 <= k <= model.n_classes for k in k_list):
        raise ConfigError(f"top-k values must lie in [1, {model.n_classes}]")
    write_config_echo(os.path.join(out, "config.txt"), {
        "eval.model": args.model, "eval.data": args.data,
        "eval.topk": args.topk, "eval.norm": args.norm or "",
    })
    report = _evaluate(encoder, model, ds, k_list)
    write_json_atomic(os.path.join(out, "eval.json"), report)
    return EXIT_OK


def _sweep_point(point, cfg_base, train_ds, valid_ds, test_ds):
    alpha, beta, theta = point
    cfg = TrainConfig(
        dim=cfg_base.dim, eta=cfg_base.eta, alpha=alpha, beta=beta, theta=theta,
        regen_rate=cfg_base.regen_rate, max_iters=cfg_base.max_iters,
        patience=cfg_base.patience, min_delta=cfg_base.min_delta,
        mode=cfg_base.mode, seed=cfg_base.seed, shuffle=cfg_base.shuffle,
        n_formula=cfg_base.n_formula)
    encoder, model, _ = train(cfg, train_ds, valid_ds)
    encoded = encoder.encode_batch(test_ds.features)
    from .learner import _score_matrix

    preds = np.argmax(_score_matrix(model, encoded), axis=1)
    cm = metrics.confusion_matrix(preds, test_ds.labels, model.n_classes)
    sens, spec = [], []
    for c in range(model.n_classes):
        rates = metrics.sensitivity_specificity(cm, c)
        if rates.sensitivity_defined:
            sens.append(rates.sensitivity)
        if rates.specificity_defined:
            spec.append(rates.specificity)
    aucs = []
    rocs = []
    for c in range(model.n_classes):
        truth = (test_ds.labels == c).astype(int)
        if truth.min() == truth.max():
            continue
        curve = metrics.roc_curve(metrics.margin_scores(model, encoded, c), truth)
        aucs.append(curve.auc)
        rocs.append((c, curve))
    return {
        "alpha": alpha, "beta": beta, "theta": theta,
        "accuracy": metrics.accuracy(preds, test_ds.labels),
        "macro_sensitivity": float(np.mean(sens)) if sens else float("nan"),
        "macro_specificity": float(np.mean(spec)) if spec else float("nan"),
        "auc": float(np.mean(aucs)) if aucs else float("nan"),
        "rocs": rocs,
    }


def cmd_sweep_weights(args) -> int:
    out = _out_dir(args, "sweep")
    resolved = resolve_train_config(args)
    cfg_base = train_config_from_resolved(resolved)
    alphas = [float(x) for x in args.alphas.split(",")]
    betas = [float(x) for x in args.betas.split(",")]
    thetas = [float(x) for x in args.thetas.split(",")]
    grid = [(a, b, t) for a in alphas for b in betas for t in thetas]
    if not grid:
        raise ConfigError("empty weight grid")
    bad = [i for i, (a, b, t) in enumerate(grid) if t >= b or min(a, b, t) <= 0]
    if bad:
        raise ConfigError(
            f"invalid grid points (need alpha,beta,theta > 0 and theta < beta) "
            f"at indices {bad}")
    resolved["sweep.alphas"] = args.alphas
    resolved["sweep.betas"] = args.betas
    resolved["sweep.thetas"] = args.thetas
    write_config_echo(os.path.join(out, "config.txt"), resolved)

    ds = _load_dataset(args.data, resolved["data.label_column"])
    fractions = [float(x) for x in str(resolved["data.fractions"]).split(",")]
    if fractions[2] <= 0:
        fractions = [0.6, 0.2, 0.2]
    train_ds, valid_ds, test_ds = dio.split(ds, fractions, stratified=True,
                                            seed=cfg_base.seed)
    _, train_ds, (valid_ds, test_ds) = _normalize(
        train_ds, [valid_ds, test_ds], resolved["data.normalize"])

    jobs = max(1, args.jobs)
    if jobs == 1:
        results = [_sweep_point(p, cfg_base, train_ds, valid_ds, test_ds)
                   for p in grid]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(
                lambda p: _sweep_point(p, cfg_base, train_ds, valid_ds, test_ds),
                grid))

    rows = []
    for i, res in enumerate(results):
        rows.append([repr(res["alpha"]), repr(res["beta"]), repr(res["theta"]),
                     repr(res["accuracy"]), repr(res["macro_sensitivity"]),
                     repr(res["macro_specificity"]), repr(res["auc"])])
        for cls, curve in res["rocs"]:
            _write_roc_csv(os.path.join(out, f"roc_point{i}_class{cls}.csv"), curve)
    header = ["alpha", "beta", "theta", "accuracy", "macro_sensitivity",
              "macro_specificity", "auc"]
    _write_csv_atomic(os.path.join(out, "sweep.csv"), header, rows)
    return EXIT_OK


def cmd_noise(args) -> int:
    out = _out_dir(args, "noise")
    models_by_dim = {}
    loaded = {}
    for path in args.model:
        encoder, model = _load_model_checked(path)
        loaded[model.dim] = (encoder, model)
    if not loaded:
        raise ConfigError("at least one --model is required")
    first_encoder = next(iter(loaded.values()))[0]
    ds = _load_eval_data(args, first_encoder)
    for dim, (encoder, model) in loaded.items():
        encoded = encoder.encode_batch(ds.features)
        models_by_dim[dim] = (model, encoded, ds.labels)
    bits_list = [int(b) for b in args.bits.split(",")]
    rates = [float(r) for r in args.rates.split(",")]
    write_config_echo(os.path.join(out, "config.txt"), {
        "noise.models": ",".join(args.model), "noise.data": args.data,
        "noise.bits": args.bits, "noise.rates": args.rates,
        "noise.trials": args.trials, "noise.seed": args.seed,
        "noise.norm": args.norm or "",
    })
    grid = [(dim, bits, rate) for dim in sorted(models_by_dim)
            for bits in bits_list for rate in rates]
    cells = robustness.noise_sweep(models_by_dim, grid, args.trials, args.seed)
    robustness.write_sweep_csv(os.path.join(out, "noise.csv"), cells)
    write_json_atomic(os.path.join(out, "summary.json"), _ordering_summary(cells))
    return EXIT_OK


def _ordering_summary(cells) -> dict:
    by_key = {(c.dim, c.bits, c.rate): c.mean_loss for c in cells}
    dims = sorted({c.dim for c in cells})
    bits = sorted({c.bits for c in cells})
    rates = sorted({c.rate for c in cells if c.rate > 0})
    summary = {"precision_ordering": None, "dimensionality_ordering": None}
    if rates:
        rate = rates[0]
        if len(bits) >= 2 and (dims[-1], bits[0], rate) in by_key:
            summary["precision_ordering"] = bool(
                by_key[(dims[-1], bits[0], rate)] < by_key[(dims[-1], bits[-1], rate)])
        if len(dims) >= 2 and (dims[0], bits[-1], rate) in by_key:
            summary["dimensionality_ordering"] = bool(
                by_key[(dims[-1], bits[-1], rate)] < by_key[(dims[0], bits[-1], rate)])
    return summary


def cmd_roc(args) -> int:
    out = _out_dir(args, "roc")
    encoder, model = _load_model_checked(args.model)
    ds = _load_eval_data(args, encoder)
    if not 0 <= args.class_id < model.n_classes:
        raise ConfigError(f"class id {args.class_id} outside [0, {model.n_classes})")
    write_config_echo(os.path.join(out, "config.txt"), {
        "roc.model": args.model, "roc.data": args.data,
        "roc.class_id": args.class_id, "roc.score": args.score,
        "roc.norm": args.norm or "",
    })
    encoded = encoder.encode_batch(ds.features)
    truth = (ds.labels == args.class_id).astype(int)
    if truth.min() == truth.max():
        raise DataError(f"class {args.class_id} is absent or exhaustive in the data")
    scorer = metrics.margin_scores if args.score == "margin" else metrics.raw_scores
    curve = metrics.roc_curve(scorer(model, encoded, args.class_id), truth)
    _write_roc_csv(os.path.join(out, "roc.csv"), curve)
    write_json_atomic(os.path.join(out, "roc.json"),
                      {"auc": curve.auc, "score": args.score,
                       "class_id": args.class_id})
    return EXIT_OK


def _write_roc_csv(path: str, curve) -> None:
    rows = [[repr(fpr), repr(tpr)] for fpr, tpr in curve.points]
    _write_csv_atomic(path, ["fpr", "tpr"], rows)


def _write_csv_atomic(path: str, header, rows) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    _write_text_atomic(path, buf.getvalue())


# ---------------------------------------------------------------------------
# argument parsing

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--dim", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--regen-rate", dest="regen_rate", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--min-delta", dest="min_delta", type=float)
    p.add_argument("--mode", choices=["dynamic", "static"])
    p.add_argument("--seed", type=int)
    p.add_argument("--shuffle", action="store_const", const=True, default=None)
    p.add_argument("--n-formula", dest="n_formula", choices=["prose", "listing"])
    p.add_argument("--normalize", choices=["zscore", "minmax", "none"])
    p.add_argument("--fractions")
    p.add_argument("--label-column", dest="label_column")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdclass")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic blobs dataset")
    p.add_argument("--features", type=int, default=10)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", dest="per_class", type=int, default=200)
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--valid")
    p.add_argument("--dump-regen", dest="dump_regen", action="store_true")
    p.add_argument("--out")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--norm")
    p.add_argument("--topk", default="1,2")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-weights", help="grid sweep over alpha/beta/theta")
    p.add_argument("--data", required=True)
    p.add_argument("--alphas", required=True)
    p.add_argument("--betas", required=True)
    p.add_argument("--thetas", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep_weights)

    p = sub.add_parser("noise", help="bit-flip robustness sweep")
    p.add_argument("--model", action="append", required=True,
                   help="trained model container; repeat per dimensionality")
    p.add_argument("--data", required=True)
    p.add_argument("--norm")
    p.add_argument("--bits", default="1,8")
    p.add_argument("--rates", default="0,5,10")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--out")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("roc", help="export a one-vs-rest ROC curve")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--norm")
    p.add_argument("--class-id", dest="class_id", type=int, required=True)
    p.add_argument("--score", choices=["margin", "raw"], default="margin")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--out")
    p.set_defaults(func=cmd_roc)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, dio.ParseError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except ValueError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
