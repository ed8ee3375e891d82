"""Greedy SLIM: fill W one row at a time, always the row that helps most.

Filling row i with weights w changes the SLIM loss by

    sum_{j != i} (l_ij(w_ij) - l_ij(0)),
    l_ij(w) = lambda_1 w + lambda_F w^2 + sum_u (xhat_uj - x_ui w)^2,

with the residual X_hat = X - XW. Each l_ij is an upward parabola in one
weight, so the row minimizer is closed-form and the loss change per
coordinate is -(c_j - lambda_1/2)_+^2 / (lambda_F + s_i) where
c = X_hat^T x_i and s_i = sum_u x_ui^2. The row selection order is recorded
and doubles as a questionnaire.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ValidationError
from .interactions import InteractionMatrix
from .slim import (
    DEFAULT_MEMORY_BUDGET,
    HyperParams,
    RoundLogRow,
    SlimModel,
    SlimRow,
    check_dense_budget,
    penalty,
)

log = logging.getLogger(__name__)

RESIDUAL_DRIFT_TOL = 1e-8


@dataclass
class GreedyState:
    """Mutable training state: residual, empty-row set, caches, bookkeeping."""

    X: InteractionMatrix
    hp: HyperParams
    resid: np.ndarray  # dense m x n residual X_hat = X - XW
    empty: np.ndarray  # boolean mask over items, True = row still empty
    col_sq: np.ndarray  # static per-item sum_u x_ui^2
    filled: list[int] = field(default_factory=list)
    rows: list[SlimRow] = field(default_factory=list)
    loss: float = 0.0


def init_state(
    X: InteractionMatrix,
    hp: HyperParams,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> GreedyState:
    """Start from W = 0: residual equals X, loss equals ||X||_F^2."""
    check_dense_budget(X.num_users * X.num_items, memory_budget)
    return GreedyState(
        X=X,
        hp=hp,
        resid=np.ascontiguousarray(X.csr.toarray()),
        empty=np.ones(X.num_items, dtype=bool),
        col_sq=X.item_sq_norms(),
        loss=X.frob_sq(),
    )


def elementwise_loss(i: int, j: int, w: float, state: GreedyState, hp: HyperParams) -> float:
    """l_ij(w): cost of explaining column j from column i with weight w."""
    if i == j:
        raise ValidationError("elementwise loss is undefined on the diagonal")
    users, vals = state.X.item_col(i)
    rcol = state.resid[:, j]
    base = float(rcol @ rcol)
    sub = rcol[users]
    fitted = float(np.sum((sub - vals * w) ** 2)) - float(sub @ sub)
    return hp.lambda_1 * w + hp.lambda_F * w * w + base + fitted


def optimal_weight(i: int, j: int, state: GreedyState, hp: HyperParams) -> float:
    """Closed-form constrained minimizer of l_ij over w >= 0."""
    if i == j:
        raise ValidationError("diagonal weights are fixed to zero")
    denom = hp.lambda_F + state.col_sq[i]
    if denom <= 0.0:
        return 0.0
    users, vals = state.X.item_col(i)
    c = float(vals @ state.resid[users, j])
    return max(0.0, (c - 0.5 * hp.lambda_1) / denom)


def row_delta(i: int, state: GreedyState, hp: HyperParams) -> tuple[float, SlimRow]:
    """Loss change and optimal weights for filling the empty row i.

    The row keeps strictly positive weights only; the delta is never
    positive because w = 0 is always feasible.
    """
    if not state.empty[i]:
        raise ValidationError(f"row {i} is already filled")
    users, vals = state.X.item_col(i)
    denom = hp.lambda_F + state.col_sq[i]
    empty_row = SlimRow(i, np.empty(0, dtype=np.int64), np.empty(0))
    if len(users) == 0 or denom <= 0.0:
        return 0.0, empty_row
    c = vals @ state.resid[users, :]
    excess = c - 0.5 * hp.lambda_1
    excess[i] = 0.0
    np.maximum(excess, 0.0, out=excess)
    idx = np.flatnonzero(excess)
    if idx.size == 0:
        return 0.0, empty_row
    weights = excess[idx] / denom
    # per coordinate: l_ij(w*) - l_ij(0) = -denom * w*^2
    delta = float(-denom * (weights @ weights))
    return delta, SlimRow(i, idx.astype(np.int64), weights)


def fill_row(state: GreedyState, row: SlimRow, delta: float) -> None:
    """Apply a filled row: update X_hat incrementally and the bookkeeping."""
    if not state.empty[row.item]:
        raise ValidationError(f"row {row.item} is already filled")
    users, vals = state.X.item_col(row.item)
    if row.indices.size and len(users):
        state.resid[np.ix_(users, row.indices)] -= np.outer(vals, row.values)
    state.empty[row.item] = False
    state.filled.append(row.item)
    state.rows.append(row)
    state.loss += delta


def residual_from_scratch(X: InteractionMatrix, rows) -> np.ndarray:
    """Recompute X_hat = X - XW densely from the filled rows."""
    resid = np.ascontiguousarray(X.csr.toarray())
    for row in rows:
        users, vals = X.item_col(row.item)
        if row.indices.size and len(users):
            resid[np.ix_(users, row.indices)] -= np.outer(vals, row.values)
    return resid


def refresh_residual(state: GreedyState) -> float:
    """Replace the incremental residual by a scratch recompute; return drift.

    Drift is the relative Frobenius distance between the two; beyond
    RESIDUAL_DRIFT_TOL it is logged as a warning.
    """
    fresh = residual_from_scratch(state.X, state.rows)
    scale = max(float(np.linalg.norm(fresh)), 1.0)
    drift = float(np.linalg.norm(fresh - state.resid)) / scale
    if drift > RESIDUAL_DRIFT_TOL:
        log.warning("incremental residual drifted by %.3e (relative)", drift)
    state.resid = fresh
    return drift


def train_greedy(
    X: InteractionMatrix,
    hp: HyperParams,
    num_rows: int,
    min_item_ratings: int = 0,
    recompute_every: int = 0,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> SlimModel:
    """Fill ``num_rows`` rows, each round the loss-minimizing empty row.

    Candidates may be pruned to items with at least ``min_item_ratings``
    ratings; ``recompute_every`` > 0 rebuilds the residual from scratch
    every that many rounds to bound numerical drift. Argmin ties break by
    ascending item index. The returned model's ``training_log`` holds one
    (round, item, delta, loss, seconds) record per round.
    """
    n = X.num_items
    if not 1 <= num_rows <= n:
        raise ValidationError(f"num_rows must lie in [1, {n}], got {num_rows}")
    state = init_state(X, hp, memory_budget)
    counts = X.item_counts()
    csc = X.csc
    log_rows: list[RoundLogRow] = []

    for rnd in range(1, num_rows + 1):
        started = time.perf_counter()
        cand_mask = state.empty.copy()
        if min_item_ratings > 0:
            cand_mask &= counts >= min_item_ratings
        candidates = np.flatnonzero(cand_mask)
        if candidates.size == 0:
            raise ValidationError(
                f"round {rnd}: no empty rows with >= {min_item_ratings} ratings left"
            )
        deltas = kernels.greedy_scan_deltas(
            state.resid, csc.indptr, csc.indices, csc.data,
            candidates, state.col_sq, hp.lambda_1, hp.lambda_F,
        )
        best = np.lexsort((candidates, deltas))[0]
        i_star = int(candidates[best])
        delta, row = row_delta(i_star, state, hp)
        fill_row(state, row, delta)
        if recompute_every > 0 and rnd % recompute_every == 0:
            refresh_residual(state)
        log_rows.append(
            RoundLogRow(rnd, i_star, delta, state.loss, time.perf_counter() - started)
        )

    return SlimModel(
        num_items=n,
        rows=tuple(state.rows),
        hyperparams=hp,
        trainer="greedy",
        training_log=tuple(log_rows),
    )


def state_loss(state: GreedyState) -> float:
    """Actual loss of the current state, recomputed from the residual."""
    return float(np.sum(state.resid * state.resid)) + penalty(state.rows, state.hp)
