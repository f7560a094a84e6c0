"""End-to-end orchestration: cluster, train, recluster, evaluate.

The loop starts by clustering the raw feature maps into pseudo-labels,
then alternates training the pixel classifier for ``reassign_interval``
epochs with regenerating the pseudo-labels, until ``total_epochs``
training epochs are done.  Every relabeling round gets its own derived
seed; with ``warm_start`` (the default) a round's per-person part
clustering starts from the previous round's centroids, which is what lets
the labels refine instead of being re-drawn from scratch.  The run ends
with a relabeling, so the label output always reflects the final state.

Since feature maps are fixed inputs here, the re-ID losses are monitoring
metrics over a leading descriptor batch, not training signals.

Everything is a pure function of (input set, config, truth): rerunning a
config byte-reproduces every artifact.
"""

import warnings as _warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from .cascade import CascadePartLabeler
from .classifier import PixelPartClassifier, labeled_pixels, pool_descriptors
from .errors import DegenerateInputError, ValidationError
from .features import UNLABELED
from .losses import IdHead, reid_objective
from .matching import distance_matrix
from .metrics import MetricReport, cmc_map, parsing_iou
from .schedule import LrSchedule


@dataclass(frozen=True)
class RunConfig:
    k: int = 6
    alpha: float = 0.1
    reassign_interval: int = 1
    total_epochs: int = 120
    warmup_epochs: int = 10
    base_lr: float = 3.5e-4
    warmup_start_lr: float = 3.5e-5
    lr_decay_factor: float = 0.1
    lr_decay_epochs: tuple = (40, 70)
    batch_size: int = 64
    margin: float = 0.3
    epsilon: float = 0.1
    seed: int = 0
    early_stop: bool = False
    warm_start: bool = True

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ValidationError(f"k must be an integer >= 2, got {self.k!r}")
        for name in ("reassign_interval", "total_epochs", "batch_size"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        for name in ("k", "reassign_interval", "total_epochs", "batch_size", "seed"):
            object.__setattr__(self, name, int(getattr(self, name)))
        object.__setattr__(self, "lr_decay_epochs",
                           tuple(int(d) for d in self.lr_decay_epochs))
        self.schedule()  # validates warmup/decay fields

    def schedule(self):
        return LrSchedule(
            total_epochs=self.total_epochs,
            warmup_epochs=self.warmup_epochs,
            base_lr=self.base_lr,
            warmup_start_lr=self.warmup_start_lr,
            decay_factor=self.lr_decay_factor,
            decay_epochs=self.lr_decay_epochs,
        )


_BOOL_WORDS = {"true": True, "1": True, "yes": True,
               "false": False, "0": False, "no": False}


def _parse_value(name, text, target_type):
    text = text.strip()
    try:
        if target_type is bool:
            return _BOOL_WORDS[text.lower()]
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        if target_type is tuple:
            return tuple(int(p) for p in text.split(",") if p.strip()) if text else ()
    except (ValueError, KeyError):
        pass
    raise ValidationError(f"config key {name}: cannot parse {text!r}")


def parse_config(text, base=None):
    """Parse line-oriented key=value text into a RunConfig.

    Keys are exactly the RunConfig field names; unknown keys are errors.
    Blank lines and #-comments are allowed.  ``base`` supplies defaults to
    override (a RunConfig, default-constructed when omitted).
    """
    types = {f.name: f.type for f in fields(RunConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key=value, got {raw!r}")
        name, value = line.split("=", 1)
        name = name.strip()
        if name not in types:
            raise ValidationError(f"config line {lineno}: unknown key {name!r}")
        updates[name] = _parse_value(name, value, types[name])
    return replace(base or RunConfig(), **updates)


@dataclass(frozen=True)
class IntervalRecord:
    """Monitoring snapshot after one train-then-relabel interval."""

    round_index: int
    epochs_done: int
    lr: float
    parsing_loss: float
    losses: object          # LossReport, or None when the batch is degenerate
    label_change: float     # fraction of pixels relabeled this round
    per_part_iou: dict = None
    mean_iou: float = None
    fg_iou: float = None


@dataclass(frozen=True)
class PipelineResult:
    classifier: PixelPartClassifier
    label_maps: list
    orderings: dict
    descriptors: list
    history: list
    report: MetricReport
    n_rounds: int
    warnings: list


def _round_seed(seed, round_index):
    return int(np.random.SeedSequence((seed, round_index)).generate_state(1)[0])


def _label_change(old_maps, new_maps):
    changed = 0
    total = 0
    for old, new in zip(old_maps, new_maps):
        changed += int(np.count_nonzero(old.labels != new.labels))
        total += old.labels.size
    return changed / total


def _monitor_batch(descriptors, cfg, l_parsing):
    descs = descriptors[:min(len(descriptors), cfg.batch_size)]
    pids = sorted({d.person_id for d in descs})
    index = {pid: i for i, pid in enumerate(pids)}
    ids = [index[d.person_id] for d in descs]
    n_id = len(pids)
    c = descs[0].c
    heads = (IdHead.zeros(n_id, (cfg.k - 1) * c), IdHead.zeros(n_id, c), IdHead.zeros(n_id, c))
    try:
        return reid_objective(descs, ids, heads, margin=cfg.margin,
                              epsilon=cfg.epsilon, alpha=cfg.alpha,
                              l_parsing=l_parsing)
    except (DegenerateInputError, ValidationError):
        return None


def split_query_gallery(descriptors):
    """Per identity, its first descriptor is the query and the rest are
    gallery entries.  Returns (queries, gallery)."""
    seen = set()
    queries = []
    gallery = []
    for d in descriptors:
        if d.person_id in seen:
            gallery.append(d)
        else:
            seen.add(d.person_id)
            queries.append(d)
    return queries, gallery


def run_pipeline(fset, cfg, truth=None):
    """Run the full cluster/train loop and final evaluation.

    ``truth`` is an optional list of ground-truth LabelMap; when given,
    pseudo-label IoU is recorded per interval and in the final report.
    Returns a PipelineResult.
    """
    if truth is not None:
        if not truth:
            raise ValidationError("truth must hold at least one label map")
        truth_k = truth[0].n_classes
    schedule = cfg.schedule()
    warnings = []

    labeler = CascadePartLabeler(n_classes=cfg.k, seed=_round_seed(cfg.seed, 0),
                                 warm_start=cfg.warm_start)
    label_maps = labeler.fit_predict(fset)
    warnings.extend(labeler.warnings_)
    n_rounds = 1

    clf = PixelPartClassifier(n_classes=cfg.k, schedule=schedule)
    history = []
    epochs_done = 0
    while epochs_done < cfg.total_epochs:
        step = min(cfg.reassign_interval, cfg.total_epochs - epochs_done)
        X, y = labeled_pixels(fset, label_maps)
        clf.partial_fit(X, y, epochs=step)
        epochs_done += step

        labeler.set_params(seed=_round_seed(cfg.seed, n_rounds))
        new_maps = labeler.fit_predict(fset)
        warnings.extend(labeler.warnings_)
        n_rounds += 1
        change = _label_change(label_maps, new_maps)
        label_maps = new_maps

        descs = pool_descriptors(clf.W_, fset)
        l_parsing = clf.loss_history_[-1]
        losses = _monitor_batch(descs, cfg, l_parsing)
        if losses is None and not history:
            warnings.append("monitoring batch cannot form triplets; "
                            "re-ID losses not recorded")
        iou = (None, None, None)
        if truth is not None:
            iou = parsing_iou(label_maps, truth, max(cfg.k, truth_k))
        history.append(IntervalRecord(
            round_index=n_rounds - 1,
            epochs_done=epochs_done,
            lr=schedule.lr_at(epochs_done - 1),
            parsing_loss=l_parsing,
            losses=losses,
            label_change=change,
            per_part_iou=iou[0],
            mean_iou=iou[1],
            fg_iou=iou[2],
        ))
        if cfg.early_stop and change < 1e-3 and epochs_done < cfg.total_epochs:
            warnings.append(
                f"early stop after epoch {epochs_done}: labels changed on "
                f"{change:.6f} of pixels"
            )
            break

    descriptors = pool_descriptors(clf.W_, fset)
    queries, gallery = split_query_gallery(descriptors)
    cmc = mean_ap = None
    n_excluded = 0
    if queries and gallery:
        try:
            with _warnings.catch_warnings(record=True) as caught:
                _warnings.simplefilter("always")
                cmc_arr, mean_ap = cmc_map(distance_matrix(queries, gallery))
            cmc = tuple(cmc_arr.tolist())
            for item in caught:
                message = str(item.message)
                warnings.append(message)
                head = message.split(" ", 1)[0]
                if head.isdigit():
                    n_excluded = int(head)
        except ValidationError as exc:
            warnings.append(f"retrieval skipped: {exc}")
    else:
        warnings.append("retrieval skipped: need at least two images of some identity")

    per_part = mean_iou = fg_iou = None
    if truth is not None:
        per_part, mean_iou, fg_iou = parsing_iou(label_maps, truth, max(cfg.k, truth_k))
    report = MetricReport(cmc=cmc, mean_ap=mean_ap, n_excluded_queries=n_excluded,
                          per_part_iou=per_part, mean_iou=mean_iou, fg_iou=fg_iou)
    return PipelineResult(
        classifier=clf,
        label_maps=label_maps,
        orderings=labeler.orderings_,
        descriptors=descriptors,
        history=history,
        report=report,
        n_rounds=n_rounds,
        warnings=warnings,
    )
