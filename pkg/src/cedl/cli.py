"""Command line entry point: ``cedl <verb> ...``.

Verbs
-----
run                 single train/test experiment
rotate              rotation protocol over class-labelled data
sweep               anomaly-proportion sweep (CEDL vs BCE by default)
export-embeddings   write representations, distances and scores as CSV
eval-checkpoint     score a dataset with a saved checkpoint

``run``, ``rotate`` and ``sweep`` take ``--config FILE`` (YAML or JSON)
and/or flags; flags override the file. ``CEDL_OUTPUT_DIR`` overrides the
output directory.
"""

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    ExperimentConfig,
    evaluate_checkpoint,
    export_embeddings,
    load_source,
    prepare_split,
    run_proportion_sweep,
    run_rotation,
    run_single,
)
from .checkpoint import load_checkpoint
from .data import load_csv, load_svmlight
from .exceptions import CEDLError


def _floats(text):
    return [float(t) for t in text.split(",") if t]


def _ints(text):
    return [int(t) for t in text.split(",") if t]


def _add_experiment_flags(p):
    p.add_argument("--config", help="YAML/JSON experiment config")
    p.add_argument("--experiment-id")
    p.add_argument("--data", help="path of the input file")
    p.add_argument("--format", choices=["csv", "svmlight", "series_csv"], default=None)
    p.add_argument("--label-column", type=int)
    p.add_argument("--header", action="store_true", default=None)
    p.add_argument("--modality", choices=["tabular", "series", "labelled-classes"])
    p.add_argument("--hidden", type=_ints, help="comma-separated hidden widths, e.g. 1000,256,64")
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--hidden-activation")
    p.add_argument("--output-activation")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--objective", help="cedl, bce, svdd, sad (comma-separated for several)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--centre-mode", choices=["fixed", "learnable"])
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--window-length", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--timing", action="store_true", help="include wall time in result records")


def _overrides(args):
    o = {}

    def put(section, key, value):
        if value is not None:
            if section is None:
                o[key] = value
            else:
                o.setdefault(section, {})[key] = value

    put(None, "experiment_id", args.experiment_id)
    put(None, "modality", args.modality)
    put(None, "output_dir", args.output_dir)
    if args.data:
        put("data", "source", args.format or "csv")
        put("data", "path", str(Path(args.data).resolve()))
    put("data", "label_column", args.label_column)
    put("data", "header", args.header)
    put("encoder", "hidden", args.hidden)
    put("encoder", "latent_dim", args.latent_dim)
    put("encoder", "hidden_activation", args.hidden_activation)
    put("encoder", "output_activation", args.output_activation)
    put("train", "epochs", args.epochs)
    put("train", "batch_size", args.batch_size)
    put("train", "learning_rate", args.learning_rate)
    put("train", "seed", args.seed)
    if args.no_shuffle:
        put("train", "shuffle", False)
    if args.objective:
        kinds = args.objective.split(",")
        put("objective", "kind", kinds[0] if len(kinds) == 1 else kinds)
    put("objective", "alpha", args.alpha)
    put("objective", "centre_mode", args.centre_mode)
    put("split", "train_fraction", args.train_fraction)
    put("split", "window_length", args.window_length)
    put("split", "stride", args.stride)
    if getattr(args, "proportions", None):
        put(None, "proportions", args.proportions)
    return o


def _config(args, protocol):
    o = _overrides(args)
    o["protocol"] = protocol
    if args.config:
        return ExperimentConfig.from_file(args.config, o)
    return ExperimentConfig.from_dict(o)


def _dataset_from_args(args):
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        if args.subset == "all" and cfg.modality != "series":
            return load_source(cfg)
        train, test = prepare_split(cfg)
        return train if args.subset == "train" else test
    if not args.data:
        raise SystemExit("either --config or --data is required")
    if args.format == "svmlight":
        return load_svmlight(args.data)
    return load_csv(args.data, args.label_column, bool(args.header), multiclass=args.multiclass)


def _print_records(records, include_timing=False):
    for r in records:
        print(r.to_json(include_timing))


def build_parser():
    parser = argparse.ArgumentParser(prog="cedl", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb, helptext in (("run", "single experiment"), ("rotate", "rotation protocol"),
                           ("sweep", "anomaly-proportion sweep")):
        p = sub.add_parser(verb, help=helptext)
        _add_experiment_flags(p)
        if verb == "sweep":
            p.add_argument("--proportions", type=_floats, help="e.g. 0.01,0.05,0.1")

    for verb in ("export-embeddings", "eval-checkpoint"):
        p = sub.add_parser(verb)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--config", help="take the dataset from an experiment config")
        p.add_argument("--subset", choices=["test", "train", "all"], default="test",
                       help="which split of the config's dataset to use")
        p.add_argument("--data")
        p.add_argument("--format", choices=["csv", "svmlight"], default="csv")
        p.add_argument("--label-column", type=int, default=-1)
        p.add_argument("--header", action="store_true")
        p.add_argument("--multiclass", action="store_true")
        if verb == "export-embeddings":
            p.add_argument("--out", required=True)
        else:
            p.add_argument("--out", help="also write the metric report as JSON here")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            _print_records(run_single(_config(args, "single"), include_timing=args.timing),
                           args.timing)
        elif args.verb == "rotate":
            _print_records(run_rotation(_config(args, "rotation"), include_timing=args.timing),
                           args.timing)
        elif args.verb == "sweep":
            _print_records(run_proportion_sweep(_config(args, "proportion_sweep"),
                                                include_timing=args.timing), args.timing)
        elif args.verb == "export-embeddings":
            ckpt = load_checkpoint(args.checkpoint)
            export_embeddings(ckpt, _dataset_from_args(args), args.out)
        elif args.verb == "eval-checkpoint":
            ckpt = load_checkpoint(args.checkpoint)
            report = evaluate_checkpoint(ckpt, _dataset_from_args(args))
            text = json.dumps(report.to_dict(), sort_keys=True)
            if args.out:
                Path(args.out).write_text(text + "\n")
            print(text)
    except (CEDLError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
