"""Ranking metrics and the offline cold-start simulation harness.

The harness replays a questionnaire against each held-out test user: start
from an all-zero row, ask k questions copying the user's true ratings in,
and at each checkpoint score top-N recommendations with NDCG, precision,
and recall. Asked items are excluded from recommendations and from the
evaluation ground truth, so a questionnaire cannot be rewarded for merely
repeating its own questions.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .elicitation import (
    Questionnaire,
    SessionState,
    StaticQuestionnaire,
    gain_recommender,
)
from .interactions import DatasetSplit, PopularitySplit

METRICS = ("ndcg", "precision", "recall")


@dataclass(frozen=True)
class EvalConfig:
    """Checkpoints, list sizes, item restriction, and the harness seed."""

    checkpoints: tuple[int, ...] = (5, 10, 15, 20)
    n_values: tuple[int, ...] = (5, 10)
    item_restriction: str = "all"
    seed: int = 0
    include_asked_in_relevants: bool = False

    def __post_init__(self) -> None:
        if not self.checkpoints:
            raise ValidationError("need at least one checkpoint")
        if any(k < 0 for k in self.checkpoints) or list(self.checkpoints) != sorted(
            set(self.checkpoints)
        ):
            raise ValidationError("checkpoints must be distinct, ascending, nonnegative")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ValidationError("list sizes must be at least 1")
        if self.item_restriction not in ("all", "long_tail"):
            raise ValidationError(
                f"item_restriction must be 'all' or 'long_tail', got {self.item_restriction!r}"
            )

    def to_dict(self) -> dict:
        return {
            "checkpoints": list(self.checkpoints),
            "n_values": list(self.n_values),
            "item_restriction": self.item_restriction,
            "seed": self.seed,
            "include_asked_in_relevants": self.include_asked_in_relevants,
        }


# -- metrics ------------------------------------------------------------------------


def gain(rating: float) -> float:
    """2^rating - 1; exponential gain so high ratings dominate."""
    if rating < 0.0:
        raise ValidationError("gain is defined for nonnegative ratings")
    return float(np.exp2(rating) - 1.0)


def dcg(x_true: np.ndarray, ranked) -> float:
    """Position-discounted gain sum; position j counts from 1."""
    ranked = np.asarray(ranked, dtype=np.int64)
    if len(np.unique(ranked)) != len(ranked):
        raise ValidationError("ranked list repeats an item")
    if ranked.size == 0:
        return 0.0
    gains = np.exp2(x_true[ranked]) - 1.0
    positions = np.arange(1, ranked.size + 1)
    return float(np.sum(gains / np.log2(positions + 1.0)))


def ndcg_at(x_true: np.ndarray, ranked, N: int, restriction: np.ndarray) -> float:
    """DCG of the first N over the best achievable DCG within ``restriction``.

    The ideal list is the user's rated items inside the restriction sorted
    by gain descending, truncated to N. Users with no positive gain there
    score 0 by convention.
    """
    if N < 1:
        raise ValidationError("N must be at least 1")
    restriction = np.asarray(restriction, dtype=np.int64)
    rated = restriction[x_true[restriction] > 0.0]
    if rated.size == 0:
        return 0.0
    ideal_gains = np.sort(np.exp2(x_true[rated]) - 1.0)[::-1][:N]
    positions = np.arange(1, ideal_gains.size + 1)
    ideal = float(np.sum(ideal_gains / np.log2(positions + 1.0)))
    if ideal == 0.0:
        return 0.0
    return dcg(x_true, list(ranked)[:N]) / ideal


def precision_recall_at(relevant, recommended, N: int | None = None) -> tuple[float, float]:
    """Hit fraction of the returned list and of the relevant set.

    Precision divides by the actual returned length (empty list scores 0);
    recall divides by |relevant| (empty set scores 0).
    """
    rec = list(recommended) if N is None else list(recommended)[:N]
    relevant = set(int(i) for i in relevant)
    hits = sum(1 for i in rec if int(i) in relevant)
    precision = hits / len(rec) if rec else 0.0
    recall = hits / len(relevant) if relevant else 0.0
    return precision, recall


# -- report -------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Aggregate means plus the raw per-user metric table."""

    aggregates: dict
    raw: tuple
    metadata: dict

    def mean(self, checkpoint: int, metric: str, N: int) -> float:
        return self.aggregates[str(checkpoint)][f"{metric}@{N}"]


def report_to_json(report: EvalReport) -> str:
    doc = {"metadata": report.metadata, "aggregates": report.aggregates}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_raw_csv(report: EvalReport, path) -> None:
    """Raw table `user,checkpoint,metric,N,value`, one row per measurement."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["user", "checkpoint", "metric", "N", "value"])
        for user, checkpoint, metric, n, value in report.raw:
            writer.writerow([user, checkpoint, metric, n, repr(value)])


# -- harness ------------------------------------------------------------------------


def simulate_cold_start(
    Q: Questionnaire,
    R,
    split: DatasetSplit,
    cfg: EvalConfig,
    pop: PopularitySplit | None = None,
    metadata: dict | None = None,
) -> EvalReport:
    """Replay the questionnaire against every test user and aggregate metrics.

    ``R`` is a recommender closure (state, N, allowed) -> ranked item list.
    At checkpoint k the allowed set is the item restriction minus asked
    items minus items already revealed nonzero; the NDCG ideal is the
    restriction minus asked items; relevant items for precision/recall are
    the user's test ratings minus asked items (unless configured otherwise).
    """
    X_test = split.X_test
    n = X_test.num_items
    if cfg.item_restriction == "long_tail":
        if pop is None:
            raise ValidationError("long_tail restriction needs a popularity split")
        restriction = np.asarray(pop.long_tail, dtype=np.int64)
    else:
        restriction = np.arange(n, dtype=np.int64)
    restriction_mask = np.zeros(n, dtype=bool)
    restriction_mask[restriction] = True

    checkpoints = set(cfg.checkpoints)
    max_k = max(cfg.checkpoints)
    max_n = max(cfg.n_values)
    raw: list[tuple] = []
    values: dict[tuple[int, str, int], list[float]] = {
        (cp, metric, N): []
        for cp in cfg.checkpoints
        for metric in METRICS
        for N in cfg.n_values
    }
    exhausted_users: list[str] = []

    for t in range(X_test.num_users):
        user_id = X_test.user_ids[t]
        true = X_test.dense_row(t)
        relevant_full = frozenset(int(i) for i in np.flatnonzero(true > 0.0))
        state = Q.new_state(n, seed=(cfg.seed, t))

        def evaluate(cp: int) -> None:
            asked = np.asarray(state.asked, dtype=np.int64)
            allowed_mask = restriction_mask.copy()
            allowed_mask[asked] = False
            allowed_mask[state.x != 0.0] = False
            recs = R(state, max_n, np.flatnonzero(allowed_mask))
            asked_set = set(int(i) for i in asked)
            if asked_set & set(recs):
                raise ValidationError("recommendation overlaps asked questions")
            ideal_mask = restriction_mask.copy()
            ideal_mask[asked] = False
            ideal_set = np.flatnonzero(ideal_mask)
            if cfg.include_asked_in_relevants:
                relevant = relevant_full
            else:
                relevant = relevant_full - asked_set
            for N in cfg.n_values:
                rec_n = recs[:N]
                results = {
                    "ndcg": ndcg_at(true, rec_n, N, ideal_set),
                }
                p, r = precision_recall_at(relevant, rec_n)
                results["precision"] = p
                results["recall"] = r
                for metric in METRICS:
                    raw.append((user_id, cp, metric, N, results[metric]))
                    values[(cp, metric, N)].append(results[metric])

        for k in range(max_k + 1):
            if k in checkpoints:
                evaluate(k)
            if k == max_k:
                break
            item = Q.next_question(state)
            if item is None:
                exhausted_users.append(user_id)
                for cp in cfg.checkpoints:
                    if cp > k:
                        evaluate(cp)
                break
            Q.observe(state, item, float(true[item]))

    aggregates: dict[str, dict[str, float]] = {}
    for cp in cfg.checkpoints:
        table: dict[str, float] = {}
        for metric in METRICS:
            for N in cfg.n_values:
                column = values[(cp, metric, N)]
                table[f"{metric}@{N}"] = float(np.mean(column)) if column else 0.0
        aggregates[str(cp)] = table

    meta = dict(metadata or {})
    meta["config"] = cfg.to_dict()
    meta["num_test_users"] = X_test.num_users
    meta["exhausted_users"] = sorted(exhausted_users)
    return EvalReport(aggregates=aggregates, raw=tuple(raw), metadata=meta)


def baseline_gain_report(
    split: DatasetSplit,
    cfg: EvalConfig,
    pop: PopularitySplit | None = None,
    metadata: dict | None = None,
) -> EvalReport:
    """R_Gain through the same harness, questionnaire-free (checkpoint 0)."""
    cfg0 = replace(cfg, checkpoints=(0,))
    meta = dict(metadata or {})
    meta.setdefault("recommender", "gain")
    meta.setdefault("questionnaire", "none")
    return simulate_cold_start(
        StaticQuestionnaire([]),
        gain_recommender(split.X_train),
        split,
        cfg0,
        pop,
        metadata=meta,
    )


# -- plotting ------------------------------------------------------------------------


def plot_ndcg_curves(reports: dict[str, EvalReport], N: int, svg_path, csv_path) -> None:
    """NDCG@N versus question count, one line per labelled report.

    Writes a deterministic SVG plus the plotted numbers as CSV.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "slimboard"

    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["label", "checkpoint", f"ndcg@{N}"])
        for label in sorted(reports):
            report = reports[label]
            for cp in sorted(int(c) for c in report.aggregates):
                writer.writerow([label, cp, repr(report.mean(cp, "ndcg", N))])

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label in sorted(reports):
        report = reports[label]
        xs = sorted(int(c) for c in report.aggregates)
        ys = [report.mean(cp, "ndcg", N) for cp in xs]
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel("number of questions")
    ax.set_ylabel(f"NDCG@{N}")
    ax.set_ylim(bottom=0.0)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
