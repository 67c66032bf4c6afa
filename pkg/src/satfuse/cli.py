"""``satfuse`` command line: convert, synth, extract, rank, train, predict,
eval, mcnemar, stats.

Tabular outputs are CSV; all output files are written atomically. Exit
codes: 0 success, 1 domain error (with a machine-parsable category
prefix), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import csvio, evaluation, features, model, ranking
from .dataset import LabeledSet, read_satbin, synth_generate, write_satbin
from .errors import ConfigError, SatfuseError


def _load_features_csv(path):
    """Feature CSV: header of names + final ``label`` column."""
    header, rows = csvio.read_rows(path)
    if not header or header[-1] != "label":
        raise ConfigError(f"{path}: last CSV column must be 'label'")
    names = header[:-1]
    matrix = np.array([[float(v) for v in row[:-1]] for row in rows], dtype=np.float64)
    labels = np.array([int(row[-1]) for row in rows], dtype=np.int64)
    return matrix.reshape(len(rows), len(names)), names, labels


def _write_features_csv(path, matrix, names, labels):
    header = list(names) + ["label"]
    rows = ([float(v) for v in row] + [int(lab)] for row, lab in zip(matrix, labels))
    csvio.write_rows(path, header, rows)


def parse_config_file(path):
    """One ``key = value`` per line, ``#`` comments, UTF-8."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            values[key] = _parse_value(raw)
    return values


def _parse_value(raw):
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in raw:
        return tuple(int(v) for v in raw.split(",") if v.strip())
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


# ---------------------------------------------------------------------------
# subcommands

def cmd_convert(args):
    data = np.load(args.infile)
    dataset = LabeledSet(data["patches"], data["labels"], int(data["num_classes"]))
    write_satbin(dataset, args.out)
    return 0


def cmd_synth(args):
    dataset = synth_generate(args.per_class, args.classes, args.seed)
    write_satbin(dataset, args.out)
    return 0


def cmd_extract(args):
    dataset = read_satbin(args.infile)
    matrix, names = features.extract_matrix(dataset.patches, selected=not args.all)
    _write_features_csv(args.out, matrix, names, dataset.labels)
    return 0


def cmd_rank(args):
    matrix, names, labels = _load_features_csv(args.features)
    table = ranking.rank_features(matrix, names, labels, int(labels.max()) + 1,
                                  threshold=args.threshold)
    rows = [
        (i + 1, e.feature, e.delta_mean, e.delta_sigma, e.d_s,
         int(e.d_s >= table.threshold))
        for i, e in enumerate(table.entries)
    ]
    csvio.write_rows(args.out, ["rank", "feature", "delta_mean", "delta_sigma", "d_s", "selected"], rows)
    return 0


def _build_config(args, num_classes, feature_width):
    overrides = parse_config_file(args.config) if args.config else {}
    overrides.setdefault("num_classes", num_classes)
    overrides.setdefault("fused_feature_width", feature_width)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    return model.ModelConfig.from_dict(overrides)


def cmd_train(args):
    train_set = read_satbin(args.train)
    test_set = read_satbin(args.test) if args.test else None
    feats_train = feats_test = None
    width = 0
    if args.features_train:
        feats_train, _, flabels = _load_features_csv(args.features_train)
        if len(flabels) != len(train_set) or (flabels != train_set.labels).any():
            raise ConfigError("training features do not align with training patches")
        width = feats_train.shape[1]
    cfg = _build_config(args, train_set.num_classes, width)
    net = model.DeepSatV2(cfg)
    if feats_train is not None and cfg.fused_feature_width:
        scaler = features.fit_feature_scaler(feats_train)
        net.feature_scaler = scaler
        feats_train = features.apply_feature_scaler(feats_train, scaler)
        if args.features_test:
            feats_test, _, _ = _load_features_csv(args.features_test)
            feats_test = features.apply_feature_scaler(feats_test, scaler)
    else:
        feats_train = feats_test = None
    report = model.train(net, train_set, feats_train, test_set, feats_test,
                         log=lambda msg: print(msg, file=sys.stderr))
    model.save_checkpoint(net, args.out)
    if args.report:
        rows = [
            (e + 1, report.train_loss[e], report.train_accuracy[e], report.test_accuracy[e])
            for e in range(len(report.train_loss))
        ]
        csvio.write_rows(args.report, ["epoch", "train_loss", "train_accuracy", "test_accuracy"], rows)
    return 0


def cmd_predict(args):
    net = model.load_checkpoint(args.ckpt)
    dataset = read_satbin(args.infile)
    feats = None
    if net.config.fused_feature_width:
        if not args.features:
            raise ConfigError("checkpoint uses feature fusion; pass --features")
        feats, _, _ = _load_features_csv(args.features)
        feats = features.apply_feature_scaler(feats, net.feature_scaler)
    probs = net.predict_proba(dataset.patches, feats)
    preds = probs.argmax(axis=1)
    header = ["index", "pred"] + [f"p{k}" for k in range(probs.shape[1])]
    rows = ([i, int(preds[i])] + [float(p) for p in probs[i]] for i in range(len(preds)))
    csvio.write_rows(args.out, header, rows)
    return 0


def _load_predictions(path):
    header, rows = csvio.read_rows(path)
    col = header.index("pred")
    return np.array([int(row[col]) for row in rows], dtype=np.int64)


def cmd_eval(args):
    preds = _load_predictions(args.pred)
    dataset = read_satbin(args.labels)
    cm = evaluation.confusion(preds, dataset.labels.astype(np.int64), dataset.num_classes)
    rows = [("accuracy", cm.accuracy)]
    for t in range(dataset.num_classes):
        for p in range(dataset.num_classes):
            rows.append((f"confusion[{t}][{p}]", int(cm.counts[t, p])))
    csvio.write_rows(args.out, ["metric", "value"], rows)
    return 0


def cmd_mcnemar(args):
    preds_a = _load_predictions(args.pred_a)
    preds_b = _load_predictions(args.pred_b)
    dataset = read_satbin(args.labels)
    result = evaluation.mcnemar(preds_a, preds_b, dataset.labels.astype(np.int64),
                                correction=not args.no_correction)
    print(f"b={result.b} c={result.c} chi2={result.chi2:.4f} p={result.p_string()}")
    if args.out:
        csvio.write_rows(args.out, ["b", "c", "chi2", "p_two_tailed"],
                         [(result.b, result.c, result.chi2, result.p_two_tailed)])
    return 0


def cmd_stats(args):
    dataset = read_satbin(args.infile)
    rows = []
    dm, ds = ranking.dataset_separability_raw(dataset)
    rows.append((args.name, "raw", dm, ds))
    if args.features:
        matrix, names, labels = _load_features_csv(args.features)
        dm, ds = ranking.dataset_separability_features(
            matrix, names, labels, dataset.num_classes)
        rows.append((args.name, "features", dm, ds))
    csvio.write_rows(args.out, ["dataset", "type", "delta_mean", "delta_sigma"], rows)
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="satfuse",
        description="Satellite patch classification with handcrafted-feature fusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert an .npz patch archive to SATBIN")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("synth", help="generate a synthetic SATBIN dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract handcrafted features to CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--all", action="store_true", help="full 150-feature catalog")
    group.add_argument("--selected", action="store_true", help="22 selected features (default)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("rank", help="rank features by separability score")
    p.add_argument("--features", required=True)
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("train", help="train the fused classifier")
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--features-train")
    p.add_argument("--features-test")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--features")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="accuracy and confusion matrix")
    p.add_argument("--pred", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mcnemar", help="paired significance test of two prediction files")
    p.add_argument("--pred-a", required=True)
    p.add_argument("--pred-b", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--no-correction", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mcnemar)

    p = sub.add_parser("stats", help="separability report (raw pixels and features)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--features")
    p.add_argument("--name", default="dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def dispatch(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SatfuseError as exc:
        print(f"satfuse: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"satfuse: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
