"""Command-line interface.

Subcommands cover each pipeline stage (gen, cluster, train, pool, match,
eval) plus the orchestrated run (pipeline).  Exit codes: 0 success, 1
usage, 2 validation (bad data or config), 3 I/O, 4 numerical divergence.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import fileio
from .cascade import generate_pseudo_labels
from .classifier import PixelPartClassifier, pool_descriptors, train_classifier
from .errors import DivergenceError, ValidationError
from .matching import DistanceMatrix, distance_matrix
from .metrics import MetricReport, cmc_map, parsing_iou
from .pipeline import RunConfig, parse_config, run_pipeline, split_query_gallery
from .schedule import LrSchedule
from .synthetic import SyntheticSpec, generate


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _cmd_gen(args):
    spec = SyntheticSpec(
        n_id=args.n_id, imgs_per_id=args.imgs_per_id, c=args.c, h=args.h,
        w=args.w, parts=args.parts, occlusion_prob=args.occlusion_prob,
        noise_sigma=args.noise_sigma, fg_gain=args.fg_gain,
        bg_gain=args.bg_gain, seed=args.seed,
    )
    fset, truth = generate(spec)
    fileio.save_feature_set(fset, args.out)
    print(f"wrote {fset.n} maps ({fset.h}x{fset.w}x{fset.c}, "
          f"{fset.n_id} identities) to {args.out}")
    if args.truth:
        fileio.save_label_maps(truth, args.truth)
        print(f"wrote truth labels to {args.truth}")


def _cmd_cluster(args):
    fset = fileio.load_feature_set(args.infile)
    label_maps, _, warnings, _ = generate_pseudo_labels(
        fset, args.k, args.seed, max_iter=args.max_iter, tol=args.tol)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    fileio.save_label_maps(label_maps, args.out)
    print(f"wrote {len(label_maps)} label maps to {args.out}")


def _cmd_train(args):
    fset = fileio.load_feature_set(args.infile)
    label_maps = fileio.load_label_maps(args.labels)
    n_classes = label_maps[0].n_classes
    schedule = LrSchedule(
        total_epochs=args.epochs,
        warmup_epochs=args.warmup_epochs,
        base_lr=args.base_lr,
        warmup_start_lr=args.warmup_start_lr,
        decay_factor=args.lr_decay_factor,
        decay_epochs=tuple(d for d in _parse_epoch_list(args.lr_decay_epochs)
                           if d < args.epochs),
    )
    clf = PixelPartClassifier(n_classes=n_classes, schedule=schedule)
    train_classifier(clf, fset, label_maps, schedule, args.epochs)
    fileio.save_weights(clf.W_, args.out)
    print(f"trained {args.epochs} epochs; loss {clf.loss_history_[0]:.6f} -> "
          f"{clf.loss_history_[-1]:.6f}; wrote weights to {args.out}")


def _cmd_pool(args):
    fset = fileio.load_feature_set(args.infile)
    weights = fileio.load_weights(args.weights)
    descs = pool_descriptors(weights, fset)
    fileio.save_descriptors(descs, args.out, weights.shape[0])
    print(f"wrote {len(descs)} descriptors to {args.out}")


def _cmd_match(args):
    queries, kq = fileio.load_descriptors(args.query)
    gallery, kg = fileio.load_descriptors(args.gallery)
    if kq != kg:
        raise ValidationError(f"query and gallery class counts differ: {kq} vs {kg}")
    dm = distance_matrix(queries, gallery)
    fileio.save_distances(dm.values, args.out)
    print(f"wrote {dm.n_query}x{dm.n_gallery} distances to {args.out}")
    if args.tsv:
        fileio.save_distances_tsv(dm.values, args.tsv)
        print(f"wrote TSV to {args.tsv}")


def _cmd_eval(args):
    retrieval = args.dist or args.query or args.gallery
    iou = args.pred or args.truth
    if retrieval and iou:
        raise _UsageError("eval: choose either --dist/--query/--gallery or --pred/--truth")
    if retrieval:
        if not (args.dist and args.query and args.gallery):
            raise _UsageError("eval: retrieval needs --dist, --query and --gallery")
        values = fileio.load_distances(args.dist)
        queries, _ = fileio.load_descriptors(args.query)
        gallery, _ = fileio.load_descriptors(args.gallery)
        if values.shape != (len(queries), len(gallery)):
            raise ValidationError(
                f"distance matrix is {values.shape}, descriptors give "
                f"({len(queries)}, {len(gallery)})"
            )
        import warnings as _warnings
        with _warnings.catch_warnings(record=True) as caught:
            _warnings.simplefilter("always")
            dm = DistanceMatrix(
                values.astype("float64"),
                [d.person_id for d in queries], [d.camera_id for d in queries],
                [d.person_id for d in gallery], [d.camera_id for d in gallery],
            )
            cmc, mean_ap = cmc_map(dm)
        n_excluded = 0
        for item in caught:
            print(f"warning: {item.message}", file=sys.stderr)
            head = str(item.message).split(" ", 1)[0]
            if head.isdigit():
                n_excluded = int(head)
        report = MetricReport(cmc=tuple(cmc.tolist()), mean_ap=mean_ap,
                              n_excluded_queries=n_excluded)
    elif iou:
        if not (args.pred and args.truth):
            raise _UsageError("eval: parsing mode needs both --pred and --truth")
        pred = fileio.load_label_maps(args.pred)
        truth = fileio.load_label_maps(args.truth)
        n_classes = max(pred[0].n_classes, truth[0].n_classes)
        per_part, mean_iou, fg_iou = parsing_iou(pred, truth, n_classes)
        report = MetricReport(per_part_iou=per_part, mean_iou=mean_iou, fg_iou=fg_iou)
    else:
        raise _UsageError("eval: nothing to evaluate; pass retrieval or parsing inputs")
    for line in report.to_kv_lines():
        print(line)


def _cmd_pipeline(args):
    cfg = RunConfig()
    if args.config:
        cfg = parse_config(Path(args.config).read_text(), base=cfg)
    overrides = {}
    for name in ("k", "alpha", "reassign_interval", "total_epochs", "warmup_epochs",
                 "base_lr", "warmup_start_lr", "lr_decay_factor", "batch_size",
                 "margin", "epsilon", "seed", "early_stop", "warm_start"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.lr_decay_epochs is not None:
        overrides["lr_decay_epochs"] = _parse_epoch_list(args.lr_decay_epochs)
    cfg = replace(cfg, **overrides)

    fset = fileio.load_feature_set(args.infile)
    truth = fileio.load_label_maps(args.truth) if args.truth else None
    result = run_pipeline(fset, cfg, truth=truth)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fileio.save_label_maps(result.label_maps, out / "labels.ispl")
    fileio.save_weights(result.classifier.W_, out / "weights.ispw")
    fileio.save_descriptors(result.descriptors, out / "descriptors.ispv", cfg.k)
    queries, gallery = split_query_gallery(result.descriptors)
    if queries and gallery:
        dm = distance_matrix(queries, gallery)
        fileio.save_distances(dm.values, out / "distances.ispd")

    (out / "metrics.txt").write_text(
        "\n".join([f"rounds={result.n_rounds}"] + result.report.to_kv_lines()) + "\n")
    history_lines = []
    for rec in result.history:
        parts = [f"round={rec.round_index}", f"epochs={rec.epochs_done}",
                 f"lr={rec.lr!r}", f"parsing_loss={rec.parsing_loss!r}",
                 f"label_change={rec.label_change!r}"]
        if rec.losses is not None:
            parts += [f"l_p={rec.losses.l_p!r}", f"l_f={rec.losses.l_f!r}",
                      f"l_g={rec.losses.l_g!r}", f"total={rec.losses.total!r}"]
        if rec.fg_iou is not None:
            parts += [f"fg_iou={rec.fg_iou!r}", f"mean_iou={rec.mean_iou!r}"]
        history_lines.append(" ".join(parts))
    (out / "history.txt").write_text("\n".join(history_lines) + "\n")

    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"rounds={result.n_rounds}")
    text = result.report.to_text()
    if text:
        print(text)
    print(f"artifacts written to {out}")


def _parse_epoch_list(text):
    if isinstance(text, tuple):
        return text
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValidationError(f"cannot parse epoch list {text!r}") from None


def build_parser():
    parser = _Parser(prog="partalign",
                     description="Self-labeled part parsing and aligned retrieval "
                                 "on feature maps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic feature set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-id", type=int, default=8)
    p.add_argument("--imgs-per-id", type=int, default=6)
    p.add_argument("--c", type=int, default=16)
    p.add_argument("--h", type=int, default=64)
    p.add_argument("--w", type=int, default=32)
    p.add_argument("--parts", type=int, default=5)
    p.add_argument("--occlusion-prob", type=float, default=0.0)
    p.add_argument("--noise-sigma", type=float, default=0.5)
    p.add_argument("--fg-gain", type=float, default=4.0)
    p.add_argument("--bg-gain", type=float, default=1.0)
    p.add_argument("--out", required=True, help="feature file to write (.ispf)")
    p.add_argument("--truth", help="optional truth label file to write (.ispl)")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("cluster", help="pseudo-label a feature set by cascaded clustering")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k", type=int, default=6, help="part count including background")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", required=True, help="label file to write (.ispl)")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("train", help="train the pixel part classifier")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--warmup-epochs", type=int, default=10)
    p.add_argument("--base-lr", type=float, default=3.5e-4)
    p.add_argument("--warmup-start-lr", type=float, default=3.5e-5)
    p.add_argument("--lr-decay-factor", type=float, default=0.1)
    p.add_argument("--lr-decay-epochs", default="40,70",
                   help="comma-separated; entries past --epochs are dropped")
    p.add_argument("--out", required=True, help="weight file to write (.ispw)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("pool", help="pool descriptors under trained weights")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True, help="descriptor file to write (.ispv)")
    p.set_defaults(func=_cmd_pool)

    p = sub.add_parser("match", help="aligned distances between descriptor files")
    p.add_argument("--query", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--out", required=True, help="distance file to write (.ispd)")
    p.add_argument("--tsv", help="optional TSV export path")
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("eval", help="retrieval metrics from distances, or IoU from labels")
    p.add_argument("--dist", help="distance file (.ispd)")
    p.add_argument("--query", help="query descriptor file (.ispv)")
    p.add_argument("--gallery", help="gallery descriptor file (.ispv)")
    p.add_argument("--pred", help="predicted label file (.ispl)")
    p.add_argument("--truth", help="truth label file (.ispl)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pipeline", help="full cluster/train/evaluate run")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--truth", help="truth label file for IoU tracking")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--reassign-interval", type=int)
    p.add_argument("--total-epochs", type=int)
    p.add_argument("--warmup-epochs", type=int)
    p.add_argument("--base-lr", type=float)
    p.add_argument("--warmup-start-lr", type=float)
    p.add_argument("--lr-decay-factor", type=float)
    p.add_argument("--lr-decay-epochs")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--early-stop", action=argparse.BooleanOptionalAction)
    p.add_argument("--warm-start", action=argparse.BooleanOptionalAction)
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 4
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
