"""Questionnaires (Q_Pop, Q_Var, Q_Greedy, Q_GSLIM, Q_Bandit) and R_Gain.

A questionnaire proposes the next item to rate for a session and absorbs
the answer into the session state. Static questionnaires are a fixed item
order; the bandit keeps a probability weight per training user and asks
what its currently sampled proxy user would rate highest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .interactions import InteractionMatrix, item_stats
from .lfm import LfmModel
from .slim import DEFAULT_MEMORY_BUDGET, HyperParams, SlimModel, check_dense_budget, top_n

log = logging.getLogger(__name__)

DEFAULT_SIGMA = 1.0


@dataclass
class SessionState:
    """One elicitation session: revealed row, asked items, bandit weights."""

    x: np.ndarray
    rng: np.random.Generator
    asked: list[int] = field(default_factory=list)
    answers: list[float] = field(default_factory=list)
    bandit_weights: np.ndarray | None = None
    underflow_resets: int = 0

    def asked_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.x), dtype=bool)
        if self.asked:
            mask[self.asked] = True
        return mask


def new_session_state(num_items: int, seed, num_train_users: int | None = None) -> SessionState:
    """Fresh all-zero session; bandit weights start uniform when requested."""
    weights = None
    if num_train_users is not None:
        if num_train_users < 1:
            raise ValidationError("bandit needs at least one training user")
        weights = np.full(num_train_users, 1.0 / num_train_users)
    return SessionState(
        x=np.zeros(num_items), rng=np.random.default_rng(seed), bandit_weights=weights
    )


def record_answer(state: SessionState, item: int, rating: float) -> None:
    """Append an answer; 0 means "don't know" and leaves the row untouched."""
    rating = float(rating)
    # (0, 5] matches the dataset rating domain (half stars included); the
    # evaluation protocol copies true ratings into the session verbatim.
    if not 0.0 <= rating <= 5.0:
        raise ValidationError(f"rating must be 0 or in (0, 5], got {rating!r}")
    if item in state.asked:
        raise ValidationError(f"item {item} was already asked")
    state.asked.append(int(item))
    state.answers.append(rating)
    if rating > 0.0:
        state.x[item] = rating


class Questionnaire:
    """Interface: next_question never repeats an item; observe records answers."""

    def new_state(self, num_items: int, seed) -> SessionState:
        return new_session_state(num_items, seed)

    def next_question(self, state: SessionState) -> int | None:
        raise NotImplementedError

    def observe(self, state: SessionState, item: int, rating: float) -> SessionState:
        record_answer(state, item, rating)
        return state


class StaticQuestionnaire(Questionnaire):
    """A fixed item order; asks the first item not yet asked and not rated."""

    def __init__(self, order) -> None:
        order = [int(i) for i in order]
        if len(set(order)) != len(order):
            raise ValidationError("questionnaire order repeats an item")
        self.order = order

    def __len__(self) -> int:
        return len(self.order)

    def next_question(self, state: SessionState) -> int | None:
        asked = set(state.asked)
        for item in self.order:
            if item not in asked and state.x[item] == 0.0:
                return item
        return None


class BanditQuestionnaire(Questionnaire):
    """Thompson sampling over training users on top of a latent-factor model."""

    def __init__(self, lfm: LfmModel, sigma: float = DEFAULT_SIGMA) -> None:
        if sigma <= 0.0:
            raise ValidationError("sigma must be positive")
        self.lfm = lfm
        self.sigma = sigma

    def new_state(self, num_items: int, seed) -> SessionState:
        if num_items != self.lfm.num_items:
            raise ValidationError("session item space differs from the factor model")
        return new_session_state(num_items, seed, num_train_users=self.lfm.num_users)

    def next_question(self, state: SessionState) -> int | None:
        return bandit_next_question(state, self.lfm)

    def observe(self, state: SessionState, item: int, rating: float) -> SessionState:
        return bandit_observe(state, item, rating, self.lfm, self.sigma)


# -- static questionnaire constructions -------------------------------------------


def q_pop(X_train: InteractionMatrix) -> StaticQuestionnaire:
    """Most-rated items first, ties by ascending index."""
    counts = X_train.item_counts()
    order = np.lexsort((np.arange(X_train.num_items), -counts))
    return StaticQuestionnaire(order)


def q_var(X_train: InteractionMatrix) -> StaticQuestionnaire:
    """Popularity-entropy tradeoff: log2(1+count) * entropy, descending.

    Ties break by higher count, then ascending index.
    """
    stats = item_stats(X_train)
    scores = np.log2(1.0 + stats.counts) * stats.entropies
    order = np.lexsort((np.arange(X_train.num_items), -stats.counts, -scores))
    return StaticQuestionnaire(order)


def q_greedy(
    X_train: InteractionMatrix,
    model: SlimModel,
    hp: HyperParams | None = None,
    length: int | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> StaticQuestionnaire:
    """Forward selection over the rows of a trained model.

    Starting from no rows, each step adds the item whose (fixed, pretrained)
    row minimizes the resulting SLIM loss; the loss change of adding row i is
    lambda_1 ||w_i||_1 + lambda_F ||w_i||^2 + sum_j w_ij (w_ij s_i - 2 c_ij)
    with c_i = X_hat^T x_i on the running residual. Ties break by index.
    """
    n = X_train.num_items
    if model.num_items != n:
        raise ValidationError("model item space differs from the training data")
    if hp is None:
        hp = model.hyperparams
    if length is None:
        length = n
    if not 1 <= length <= n:
        raise ValidationError(f"length must lie in [1, {n}], got {length}")
    check_dense_budget(X_train.num_users * n, memory_budget)

    rows_by_item = {row.item: row for row in model.rows}
    col_sq = X_train.item_sq_norms()
    resid = np.ascontiguousarray(X_train.csr.toarray())
    remaining = np.ones(n, dtype=bool)
    order: list[int] = []

    for _ in range(length):
        candidates = np.flatnonzero(remaining)
        deltas = np.zeros(len(candidates))
        for k, i in enumerate(candidates):
            row = rows_by_item.get(int(i))
            if row is None or row.indices.size == 0:
                continue
            users, vals = X_train.item_col(int(i))
            w = row.values
            penalty = hp.lambda_1 * float(np.sum(w)) + hp.lambda_F * float(w @ w)
            if len(users) == 0:
                deltas[k] = penalty + col_sq[i] * float(w @ w)
                continue
            c = vals @ resid[np.ix_(users, row.indices)]
            deltas[k] = penalty + float(w @ (col_sq[i] * w - 2.0 * c))
        best = np.lexsort((candidates, deltas))[0]
        i_star = int(candidates[best])
        order.append(i_star)
        remaining[i_star] = False
        row = rows_by_item.get(i_star)
        if row is not None and row.indices.size:
            users, vals = X_train.item_col(i_star)
            if len(users):
                resid[np.ix_(users, row.indices)] -= np.outer(vals, row.values)
    return StaticQuestionnaire(order)


def q_gslim(model: SlimModel, min_length: int | None = None) -> StaticQuestionnaire:
    """The greedy trainer's row selection order, verbatim."""
    if model.trainer != "greedy":
        raise ValidationError("questionnaire-by-training-order needs a greedily trained model")
    if min_length is not None and len(model.rows) < min_length:
        raise ValidationError(
            f"model has {len(model.rows)} rows, {min_length} questions requested"
        )
    return StaticQuestionnaire(model.row_items())


# -- bandit operations -------------------------------------------------------------


def bandit_next_question(state: SessionState, lfm: LfmModel) -> int | None:
    """Sample a proxy user from the weights; ask their best unasked item."""
    if state.bandit_weights is None:
        raise ValidationError("session has no bandit weights")
    u_star = int(state.rng.choice(len(state.bandit_weights), p=state.bandit_weights))
    preds = lfm.Q @ lfm.P[u_star]
    cand = np.flatnonzero(~state.asked_mask())
    if cand.size == 0:
        return None
    best = np.lexsort((cand, -preds[cand]))[0]
    return int(cand[best])


def bandit_observe(
    state: SessionState,
    item: int,
    rating: float,
    lfm: LfmModel,
    sigma: float = DEFAULT_SIGMA,
) -> SessionState:
    """Record the answer; reweight users by a Gaussian likelihood of it.

    A 0 answer ("don't know") carries no rating signal and leaves the
    weights untouched. Weights that underflow to zero mass reset to uniform
    (counted on the state, logged).
    """
    if sigma <= 0.0:
        raise ValidationError("sigma must be positive")
    record_answer(state, item, rating)
    if rating <= 0.0 or state.bandit_weights is None:
        return state
    preds = lfm.P @ lfm.Q[item]
    w = state.bandit_weights * np.exp(-((rating - preds) ** 2) / (2.0 * sigma * sigma))
    total = float(np.sum(w))
    if not np.isfinite(total) or total <= 0.0:
        state.bandit_weights = np.full(len(w), 1.0 / len(w))
        state.underflow_resets += 1
        log.warning("bandit weights underflowed; reset to uniform")
    else:
        state.bandit_weights = w / total
    return state


def bandit_recommend(
    state: SessionState, lfm: LfmModel, N: int, allowed: np.ndarray | None = None
) -> list[int]:
    """Top-N under the weight-averaged user factor p~ = sum_u w_u p_u."""
    if state.bandit_weights is None:
        raise ValidationError("session has no bandit weights")
    if N < 1:
        raise ValidationError("N must be at least 1")
    p_avg = state.bandit_weights @ lfm.P
    scores = lfm.Q @ p_avg
    if allowed is None:
        cand = np.arange(lfm.num_items)
    else:
        cand = np.asarray(allowed, dtype=np.int64)
    keep = ~state.asked_mask()[cand] & (state.x[cand] == 0.0)
    cand = cand[keep]
    order = np.lexsort((cand, -scores[cand]))
    return [int(i) for i in cand[order[:N]]]


# -- static gain recommender --------------------------------------------------------


def r_gain(X_train: InteractionMatrix, N: int, allowed: np.ndarray | None = None) -> list[int]:
    """Items with the highest total gain across training users, descending."""
    if N < 1:
        raise ValidationError("N must be at least 1")
    gains = item_stats(X_train).gain_sums
    if allowed is None:
        cand = np.arange(X_train.num_items)
    else:
        cand = np.asarray(allowed, dtype=np.int64)
    order = np.lexsort((cand, -gains[cand]))
    return [int(i) for i in cand[order[:N]]]


# -- recommender closures for the evaluation harness -------------------------------


def slim_recommender(model: SlimModel):
    """top-N by x_u^T W restricted to the allowed set."""

    def rec(state: SessionState, N: int, allowed: np.ndarray) -> list[int]:
        return top_n(state.x, model, N, allowed)

    return rec


def bandit_recommender(lfm: LfmModel):
    def rec(state: SessionState, N: int, allowed: np.ndarray) -> list[int]:
        return bandit_recommend(state, lfm, N, allowed)

    return rec


def gain_recommender(X_train: InteractionMatrix):
    """R_Gain with the gain sums precomputed once."""
    gains = item_stats(X_train).gain_sums

    def rec(state: SessionState, N: int, allowed: np.ndarray) -> list[int]:
        cand = np.asarray(allowed, dtype=np.int64)
        order = np.lexsort((cand, -gains[cand]))
        return [int(i) for i in cand[order[:N]]]

    return rec


def write_questionnaire_csv(order, item_ids: list[str], path) -> None:
    """Export a static question order as `position,item_internal,item_external`."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["position", "item_internal", "item_external"])
        for pos, item in enumerate(order, start=1):
            writer.writerow([pos, int(item), item_ids[int(item)]])
