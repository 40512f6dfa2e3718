"""Command-line interface.

Subcommands: ``featurize``, ``distance``, ``rank``, ``correlate``,
``gen-noise``, ``ssdl-demo``.  Primary results go to standard output
(JSON or CSV), diagnostics to standard error.  Exit codes: 0 success,
1 I/O failure, 2 validation failure.  Every subcommand is
byte-reproducible for identical arguments and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .dissimilarity import MEASURES, DissimilarityParams, measure_dissimilarity
from .errors import TrainingError, ValidationError
from .featurize import (
    FlattenFeatures,
    OnnxModelFeatures,
    RandomProjectionFeatures,
    compute_stats,
    extract_features,
    gen_gaussian_noise,
    gen_sap_noise,
    resize,
)
from .io import (
    load_csv_matrix,
    load_fmat,
    load_imgb,
    load_png_dir,
    save_fmat,
    save_imgb,
)
from .mixmatch import (
    MixMatchConfig,
    gen_synthetic_task,
    strip_unlabelled,
    supervised_config,
    train_mixmatch,
)
from .ranking import (
    ACCURACIES_CSV,
    DISTANCES_CSV,
    bundled_table_path,
    correlate_tables,
    emit_ranking_json,
    load_accuracy_table,
    load_distance_table,
    rank_candidates,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2


def _add_dissimilarity_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--measure", choices=MEASURES, default="cos")
    parser.add_argument("--tau", type=int, default=80, help="subsample size per round")
    parser.add_argument("--rounds", type=int, default=30, help="sampling rounds")
    parser.add_argument("--bins", type=int, default=10, help="histogram bins (density measures)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel rounds; output is identical for any value")


def _params_from(args) -> DissimilarityParams:
    return DissimilarityParams(
        measure=args.measure, tau=args.tau, rounds=args.rounds,
        bins=args.bins, seed=args.seed,
    )


def _load_matrix(path):
    if str(path).lower().endswith(".csv"):
        return load_csv_matrix(path)
    return load_fmat(path)


def _cmd_distance(args) -> int:
    labelled = _load_matrix(args.labelled)
    unlabelled = _load_matrix(args.unlabelled)
    report = measure_dissimilarity(
        labelled, unlabelled, _params_from(args), n_threads=args.threads
    )
    print(report.to_json())
    return EXIT_OK


def _candidate_pairs(specs: list[str]) -> list[tuple[str, object]]:
    pairs = []
    for spec in specs:
        if "=" in spec:
            name, _, path = spec.partition("=")
        else:
            name, path = Path(spec).stem, spec
        pairs.append((name, _load_matrix(path)))
    return pairs


def _cmd_rank(args) -> int:
    labelled = _load_matrix(args.labelled)
    report = rank_candidates(
        labelled,
        _candidate_pairs(args.candidates),
        _params_from(args),
        labelled_id=Path(args.labelled).stem,
        n_threads=args.threads,
    )
    print(emit_ranking_json(report))
    print(f"best candidate: {report.best}", file=sys.stderr)
    return EXIT_OK


def _cmd_correlate(args) -> int:
    acc_path = args.accuracies or bundled_table_path(ACCURACIES_CSV)
    dist_path = args.distances or bundled_table_path(DISTANCES_CSV)
    table = correlate_tables(
        load_accuracy_table(acc_path), load_distance_table(dist_path)
    )
    sys.stdout.write(table.to_csv())
    return EXIT_OK


def _cmd_gen_noise(args) -> int:
    if args.kind == "gaussian":
        images = gen_gaussian_noise(args.n, args.height, args.width, args.seed)
    else:
        images = gen_sap_noise(args.n, args.height, args.width, args.seed)
    save_imgb(images, args.output)
    print(f"wrote {args.n} {args.height}x{args.width} images to {args.output}",
          file=sys.stderr)
    return EXIT_OK


def _cmd_featurize(args) -> int:
    source = Path(args.input)
    images = load_png_dir(source) if source.is_dir() else load_imgb(source)
    if args.resize:
        images = resize(images, args.resize[0], args.resize[1])
    if args.extractor == "flatten":
        extractor = FlattenFeatures()
    elif args.extractor == "randproj":
        extractor = RandomProjectionFeatures(n_features=args.out_dim, seed=args.seed)
    else:
        if not args.model_path:
            raise ValidationError("--model-path is required with --extractor model")
        extractor = OnnxModelFeatures(model_path=args.model_path, output_dim=args.out_dim)
    features = extract_features(images, extractor, compute_stats(images))
    save_fmat(features, args.output)
    print(f"wrote {features.shape[0]}x{features.shape[1]} features to {args.output}",
          file=sys.stderr)
    return EXIT_OK


def _cmd_ssdl_demo(args) -> int:
    with open(args.config) as fh:
        spec = json.load(fh)
    task_spec = dict(spec.get("task", {}))
    cfg = MixMatchConfig(**spec.get("mixmatch", {}))
    task = gen_synthetic_task(
        kind=task_spec.get("kind", "blobs"),
        n_l=task_spec.get("n_l", 20),
        n_u=task_spec.get("n_u", 500),
        pct_ood=task_spec.get("pct_ood", 0),
        contaminant=task_spec.get("contaminant", "none"),
        seed=task_spec.get("seed", 0),
        n_classes=task_spec.get("n_classes", 2),
        input_dim=task_spec.get("input_dim", 2),
        class_sep=task_spec.get("class_sep", 3.0),
        elongation=task_spec.get("elongation", 1.0),
        test_per_class=task_spec.get("test_per_class", 500),
    )
    if args.l2_squared is not None:
        cfg = replace(cfg, l2_squared=args.l2_squared == "true")
    supervised = bool(args.supervised)
    if supervised:
        task = strip_unlabelled(task)
        cfg = supervised_config(cfg)
    metrics, _ = train_mixmatch(task, cfg)
    if args.metrics_out:
        lines = ["epoch,test_accuracy"]
        lines.extend(
            f"{epoch},{acc:.6f}"
            for epoch, acc in enumerate(metrics.per_epoch_accuracy, start=1)
        )
        Path(args.metrics_out).write_text("\n".join(lines) + "\n")
    summary = {
        "task": task_spec,
        "mixmatch": {
            "K": cfg.K, "T": cfg.T, "alpha": cfg.alpha, "gamma": cfg.gamma,
            "rampup_rho": cfg.rampup_rho, "batch_size": cfg.batch_size,
            "lr": cfg.lr, "weight_decay": cfg.weight_decay,
            "epochs": cfg.epochs, "seed": cfg.seed, "l2_squared": cfg.l2_squared,
        },
        "supervised": supervised,
        "best_accuracy": metrics.best_accuracy,
        "best_epoch": metrics.best_epoch,
        "per_epoch_accuracy": list(metrics.per_epoch_accuracy),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixmood",
        description="Dataset dissimilarity measures and ante hoc unlabelled-dataset ranking",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="dissimilarity between two feature files")
    p.add_argument("labelled", help="labelled feature matrix (.fmat or .csv)")
    p.add_argument("unlabelled", help="unlabelled feature matrix (.fmat or .csv)")
    _add_dissimilarity_flags(p)
    p.set_defaults(func=_cmd_distance)

    p = sub.add_parser("rank", help="rank candidate unlabelled feature files")
    p.add_argument("labelled", help="labelled feature matrix (.fmat or .csv)")
    p.add_argument("candidates", nargs="+", metavar="NAME=PATH|PATH",
                   help="candidate feature matrices (.fmat or .csv)")
    _add_dissimilarity_flags(p)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("correlate", help="distance/accuracy correlation table")
    p.add_argument("--accuracies", help="accuracy table CSV (bundled by default)")
    p.add_argument("--distances", help="distance table CSV (bundled by default)")
    p.set_defaults(func=_cmd_correlate)

    p = sub.add_parser("gen-noise", help="generate a synthetic noise dataset")
    p.add_argument("--kind", choices=("gaussian", "sap"), required=True)
    p.add_argument("--n", type=int, required=True, help="number of images")
    p.add_argument("--height", type=int, default=224)
    p.add_argument("--width", type=int, default=224)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output .imgb path")
    p.set_defaults(func=_cmd_gen_noise)

    p = sub.add_parser("featurize", help="extract features from an image stack")
    p.add_argument("input", help=".imgb file or directory of PNGs")
    p.add_argument("-o", "--output", required=True, help="output .fmat path")
    p.add_argument("--extractor", choices=("flatten", "randproj", "model"),
                   default="randproj")
    p.add_argument("--out-dim", type=int, default=512, dest="out_dim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-path", dest="model_path",
                   help="ONNX model file for --extractor model")
    p.add_argument("--resize", type=int, nargs=2, metavar=("H", "W"),
                   help="nearest-neighbour resize before extraction")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("ssdl-demo", help="train MixMatch on a synthetic task")
    p.add_argument("--config", required=True, help="JSON task + hyperparameter spec")
    p.add_argument("--supervised", action="store_true",
                   help="drop the unlabelled pool and train the supervised baseline")
    p.add_argument("--l2-squared", dest="l2_squared", choices=("true", "false"),
                   default=None,
                   help="squared (default) or plain Euclidean unsupervised penalty")
    p.add_argument("--metrics-out", dest="metrics_out",
                   help="write per-epoch accuracy CSV here")
    p.set_defaults(func=_cmd_ssdl_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:  # includes format and extractor errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
