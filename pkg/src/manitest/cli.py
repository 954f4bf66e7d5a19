"""Command-line entry points: score, map, augment-exp, train.

Defaults mirror the standard setup: lattice steps of 0.5 px for
translations, pi/20 rad for rotation, 0.1 for dilation, and a 50,000
iteration cap.  Every subcommand is deterministic given its inputs and
seed; each output file echoes the resolved configuration so a run can be
reproduced exactly.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import io as mio
from .classifier import (
    make_oracle_factory,
    save_model,
    train_logistic,
    train_nearest_centroid,
)
from .errors import ManitestError
from .fast_marching import DEFAULT_MAX_ITERS, StopSignal, export_csv, run
from .groups import make_group
from .metric import MetricField
from .scoring import (
    AugmentationPolicy,
    GlobalScore,
    ScoreConfig,
    augment,
    global_score,
    invariance_score,
)


def _parse_steps(text):
    if text is None:
        return None
    return tuple(float(s) for s in text.split(","))


def _add_group_args(sub):
    sub.add_argument("--group", default="trans", choices=("rot", "trans", "dilrot", "sim"))
    sub.add_argument("--steps", default=None,
                     help="comma-separated per-axis lattice steps (defaults per group)")
    sub.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)


def _load_labeled(images_path, labels_path):
    images = mio.load_idx_images(images_path)
    labels = mio.load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise ManitestError(
            f"{images_path} has {len(images)} images but {labels_path} "
            f"has {len(labels)} labels"
        )
    return list(zip(images, labels))


def _result_record(index, result):
    flip_params = None
    if result.flip_node is not None:
        flip_params = list(result.flip_node.params)
    return {
        "index": index,
        "outcome": result.outcome,
        "delta": result.delta,
        "flip_label": result.flip_label,
        "original_label": result.original_label,
        "flip_params": flip_params,
        "visited": result.visited,
        "path": [list(pt) for pt in result.path] if result.path is not None else None,
    }


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_score(args) -> int:
    group = make_group(args.group, _parse_steps(args.steps))
    config = ScoreConfig(max_iters=args.max_iters)
    factory = make_oracle_factory(args.classifier)
    echo = {
        "subcommand": "score",
        "group": args.group,
        "steps": list(group.steps),
        "max_iters": args.max_iters,
        "classifier": args.classifier,
        "seed": args.seed,
        "sample_size": args.sample_size,
    }
    if args.image is not None:
        img = mio.load_image(args.image)
        result = invariance_score(img, group, factory(), config)
        records = [_result_record(0, result)]
        score = GlobalScore(
            mean_delta=result.delta if result.outcome == "hit" else None,
            std_delta=0.0 if result.outcome == "hit" else None,
            hits=int(result.outcome == "hit"),
            exhausted=int(result.outcome == "exhausted"),
            degenerate=int(result.outcome == "degenerate"),
        )
    else:
        images = mio.load_idx_images(args.dataset)
        score = global_score(images, group, factory, config,
                             sample_size=args.sample_size, seed=args.seed,
                             jobs=args.jobs)
        records = [_result_record(i, r) for i, r in score.results]
    _write_json(args.output, {
        "config": echo,
        "results": records,
        "summary": {
            "mean_delta": score.mean_delta,
            "std_delta": score.std_delta,
            "hits": score.hits,
            "exhausted": score.exhausted,
            "degenerate": score.degenerate,
        },
    })
    return 0


def cmd_map(args) -> int:
    group = make_group(args.group, _parse_steps(args.steps))
    img = mio.load_image(args.image)
    window = [int(w) for w in args.window.split(",")]
    if len(window) == 1:
        window = window * group.dim
    if len(window) != group.dim:
        raise ManitestError(f"--window needs 1 or {group.dim} radii")
    bounds = [(-w, w) for w in window]

    stop = None
    if args.classifier is not None:
        from .image import warp

        oracle = make_oracle_factory(args.classifier)()
        original = oracle.classify(img)

        def stop(point):
            label = oracle.classify(warp(img, group, group.natural(point.params)))
            return StopSignal(halt=False, label=label)

    field = MetricField(img, group)
    dmap, outcome = run(group, field, stop=stop, max_iters=args.max_iters,
                        bounds=bounds)
    with open(args.output, "w") as fh:
        export_csv(dmap, fh)
    sys.stderr.write(f"map: {outcome.kind} after {outcome.pops} nodes\n")
    return 0


def cmd_augment_experiment(args) -> int:
    group = make_group(args.group, _parse_steps(args.steps))
    config = ScoreConfig(max_iters=args.max_iters)
    dataset = _load_labeled(args.dataset, args.labels)
    counts = [int(c) for c in args.counts.split(",")]
    images = [img for img, _ in dataset]

    rows = []
    for count in counts:
        policy = AugmentationPolicy(count=count, seed=args.seed)
        train_set = augment(dataset, policy)
        model = train_logistic(train_set, epochs=args.epochs,
                               learning_rate=args.learning_rate, seed=args.seed)
        accuracy = sum(
            model.classify(img) == lbl for img, lbl in dataset) / len(dataset)
        score = global_score(images, group, lambda: model, config,
                             sample_size=args.sample_size, seed=args.seed,
                             jobs=args.jobs)
        rows.append((count, score.mean_delta, accuracy))

    with open(args.output, "w") as fh:
        fh.write("count,mean_delta,accuracy\n")
        for count, mean_delta, accuracy in rows:
            delta_txt = "" if mean_delta is None else repr(mean_delta)
            fh.write(f"{count},{delta_txt},{repr(accuracy)}\n")
    return 0


def cmd_train(args) -> int:
    dataset = _load_labeled(args.dataset, args.labels)
    if args.model == "centroid":
        model = train_nearest_centroid(dataset)
    else:
        model = train_logistic(dataset, epochs=args.epochs,
                               learning_rate=args.learning_rate, seed=args.seed)
    save_model(args.out, model)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manitest",
        description="Measure classifier invariance to geometric transformation groups.",
    )
    subs = parser.add_subparsers(dest="subcommand", required=True)

    score = subs.add_parser("score", help="invariance score for an image or dataset")
    _add_group_args(score)
    src = score.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", help="single image (PGM or IDX)")
    src.add_argument("--dataset", help="IDX image set")
    score.add_argument("--classifier", required=True,
                       help="builtin:centroid:<file> | builtin:logistic:<file> | exec:<cmd>")
    score.add_argument("--sample-size", type=int, default=None)
    score.add_argument("--seed", type=int, default=0)
    score.add_argument("--jobs", type=int, default=1)
    score.add_argument("--output", default=None, help="JSON results path (default stdout)")
    score.set_defaults(func=cmd_score)

    dmap = subs.add_parser("map", help="export a geodesic distance map as CSV")
    _add_group_args(dmap)
    dmap.add_argument("--image", required=True)
    dmap.add_argument("--classifier", default=None,
                      help="optional; adds a per-node label column")
    dmap.add_argument("--window", default="10",
                      help="lattice radius, single int or comma list per axis")
    dmap.add_argument("--output", required=True)
    dmap.set_defaults(func=cmd_map)

    aug = subs.add_parser("augment-exp",
                          help="invariance vs. augmentation count for the logistic model")
    _add_group_args(aug)
    aug.add_argument("--dataset", required=True)
    aug.add_argument("--labels", required=True)
    aug.add_argument("--counts", default="0,1,2,4",
                     help="comma list of augmented copies per original")
    aug.add_argument("--epochs", type=int, default=200)
    aug.add_argument("--learning-rate", type=float, default=1.0)
    aug.add_argument("--sample-size", type=int, default=None)
    aug.add_argument("--seed", type=int, default=0)
    aug.add_argument("--jobs", type=int, default=1)
    aug.add_argument("--output", required=True)
    aug.set_defaults(func=cmd_augment_experiment)

    train = subs.add_parser("train", help="train a built-in model on an IDX dataset")
    train.add_argument("--dataset", required=True)
    train.add_argument("--labels", required=True)
    train.add_argument("--model", required=True, choices=("centroid", "logistic"))
    train.add_argument("--epochs", type=int, default=200)
    train.add_argument("--learning-rate", type=float, default=1.0)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--out", required=True)
    train.set_defaults(func=cmd_train)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ManitestError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
