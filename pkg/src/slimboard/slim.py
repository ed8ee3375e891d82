"""SLIM item-item models: loss, scoring, top-N ranking, coordinate descent.

A model is an ordered list of filled nonnegative sparse rows of the n x n
weight matrix W with zero diagonal; unlisted rows are all-zero. The loss is

    l(W) = ||X - XW||_F^2 + lambda_F ||W||_F^2 + lambda_1 ||W||_1.

Predicted relevance of item i for user u is x_u^T w_i with w_i the i-th
column of the assembled W.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import CapacityError, DimensionError, ParseError, ValidationError
from .interactions import InteractionMatrix

DEFAULT_TOL = 1e-4
DEFAULT_MAX_SWEEPS = 50
DEFAULT_MEMORY_BUDGET = 2 * 1024**3


@dataclass(frozen=True)
class HyperParams:
    """Regularization weights of the SLIM loss (both nonnegative)."""

    lambda_1: float = 1.0
    lambda_F: float = 1.0

    def __post_init__(self) -> None:
        if self.lambda_1 < 0.0 or self.lambda_F < 0.0:
            raise ValidationError("regularization weights must be nonnegative")


class SlimRow(NamedTuple):
    """One filled row of W: strictly positive weights at ``indices``."""

    item: int
    indices: np.ndarray
    values: np.ndarray


class SweepLogRow(NamedTuple):
    sweep: int
    loss: float
    seconds: float


class RoundLogRow(NamedTuple):
    round: int
    item: int
    delta: float
    loss: float
    seconds: float


@dataclass(frozen=True)
class SlimModel:
    """Ordered filled rows of W plus hyperparameters.

    The row order is meaningful: for greedily trained models it is the
    selection order and doubles as the questionnaire.
    """

    num_items: int
    rows: tuple[SlimRow, ...]
    hyperparams: HyperParams
    trainer: str
    training_log: tuple | None = field(default=None, compare=False, repr=False)

    def row_items(self) -> list[int]:
        return [row.item for row in self.rows]

    def weight_count(self) -> int:
        return sum(len(row.indices) for row in self.rows)


def validate_model(model: SlimModel) -> None:
    """Check nonnegativity, zero diagonal, unique rows, and index bounds."""
    if model.trainer not in ("cd", "greedy"):
        raise ValidationError(f"unknown trainer tag {model.trainer!r}")
    seen: set[int] = set()
    for row in model.rows:
        if not 0 <= row.item < model.num_items:
            raise ValidationError(f"row item {row.item} out of range")
        if row.item in seen:
            raise ValidationError(f"row {row.item} listed twice")
        seen.add(row.item)
        idx = np.asarray(row.indices)
        vals = np.asarray(row.values)
        if idx.shape != vals.shape:
            raise ValidationError(f"row {row.item}: index/value length mismatch")
        if idx.size == 0:
            continue
        if idx.min() < 0 or idx.max() >= model.num_items:
            raise ValidationError(f"row {row.item}: weight index out of range")
        if np.any(np.diff(idx) <= 0):
            raise ValidationError(f"row {row.item}: indices not strictly increasing")
        if np.any(idx == row.item):
            raise ValidationError(f"row {row.item}: nonzero diagonal weight")
        if not np.all(vals > 0.0):
            raise ValidationError(f"row {row.item}: weights must be strictly positive")


def _check_items(X_or_n, model: SlimModel) -> None:
    n = X_or_n.num_items if hasattr(X_or_n, "num_items") else int(X_or_n)
    if n != model.num_items:
        raise DimensionError(f"model covers {model.num_items} items, data has {n}")


def slim_loss(
    X: InteractionMatrix, model: SlimModel, hp: HyperParams | None = None
) -> float:
    """Exact SLIM loss, streamed one target column at a time (no dense XW)."""
    _check_items(X, model)
    if hp is None:
        hp = model.hyperparams
    l1 = 0.0
    l2 = 0.0
    by_target: dict[int, list[tuple[int, float]]] = {}
    for row in model.rows:
        for j, w in zip(row.indices, row.values):
            by_target.setdefault(int(j), []).append((row.item, float(w)))
        l1 += float(np.sum(np.abs(row.values)))
        l2 += float(np.dot(row.values, row.values))

    residual = X.frob_sq()
    m = X.num_users
    for j, sources in by_target.items():
        y = np.zeros(m)
        for i, w in sources:
            users, vals = X.item_col(i)
            y[users] += w * vals
        users_j, vals_j = X.item_col(j)
        y[users_j] -= vals_j
        # replace this column's ||x_j||^2 contribution with ||x_j - y_j||^2
        residual += float(y @ y) - float(vals_j @ vals_j)
    return residual + hp.lambda_F * l2 + hp.lambda_1 * l1


def predict_scores(x_u: np.ndarray, model: SlimModel) -> np.ndarray:
    """Dense item scores x_u^T W; only filled rows contribute."""
    x_u = np.asarray(x_u, dtype=np.float64)
    if x_u.shape != (model.num_items,):
        raise DimensionError(
            f"user row has length {x_u.shape}, model covers {model.num_items} items"
        )
    scores = np.zeros(model.num_items)
    for row in model.rows:
        x_i = x_u[row.item]
        if x_i != 0.0:
            scores[row.indices] += x_i * row.values
    return scores


def top_n(
    x_u: np.ndarray,
    model: SlimModel,
    N: int,
    allowed: np.ndarray | None = None,
) -> list[int]:
    """The N highest-scoring unrated items among ``allowed``.

    Ties break by ascending item index; the list is shorter when fewer
    candidates exist.
    """
    if N < 1:
        raise ValidationError("N must be at least 1")
    scores = predict_scores(x_u, model)
    if allowed is None:
        cand = np.arange(model.num_items)
    else:
        cand = np.asarray(allowed, dtype=np.int64)
    cand = cand[np.asarray(x_u)[cand] == 0.0]
    order = np.lexsort((cand, -scores[cand]))
    return [int(i) for i in cand[order[:N]]]


def penalty(model_rows, hp: HyperParams) -> float:
    """lambda_F ||W||_F^2 + lambda_1 ||W||_1 over the given rows."""
    l1 = sum(float(np.sum(row.values)) for row in model_rows)
    l2 = sum(float(np.dot(row.values, row.values)) for row in model_rows)
    return hp.lambda_F * l2 + hp.lambda_1 * l1


def check_dense_budget(num_floats: int, memory_budget: int) -> None:
    bytes_needed = 8 * num_floats
    if bytes_needed > memory_budget:
        raise CapacityError(
            f"dense working set needs {bytes_needed} bytes, "
            f"budget is {memory_budget}; reduce the problem or raise the budget"
        )


def train_coordinate_descent(
    X: InteractionMatrix,
    hp: HyperParams,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    tol: float = DEFAULT_TOL,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> SlimModel:
    """Cyclic coordinate descent over all columns of W.

    Each coordinate is set to its closed-form constrained minimizer
    max(0, (sum_u x_ui rho_uj - lambda_1/2) / (sum_u x_ui^2 + lambda_F));
    training stops when a full sweep changes the loss by less than ``tol``
    (relative) or after ``max_sweeps``.
    """
    if max_sweeps < 1:
        raise ValidationError("max_sweeps must be at least 1")
    if tol <= 0.0:
        raise ValidationError("tol must be positive")
    m, n = X.num_users, X.num_items
    check_dense_budget(m * n + n * n, memory_budget)

    R = np.asfortranarray(X.csr.toarray())
    W = np.zeros((n, n))
    col_sq = X.item_sq_norms()
    csc = X.csc
    log_rows: list[SweepLogRow] = []

    prev = float(np.sum(R * R))
    for sweep in range(1, max_sweeps + 1):
        started = time.perf_counter()
        kernels.cd_sweep(csc.indptr, csc.indices, csc.data, W, R, col_sq,
                         hp.lambda_1, hp.lambda_F)
        cur = (
            float(np.sum(R * R))
            + hp.lambda_F * float(np.sum(W * W))
            + hp.lambda_1 * float(np.sum(W))
        )
        log_rows.append(SweepLogRow(sweep, cur, time.perf_counter() - started))
        if cur > prev * (1.0 + 1e-12) + 1e-12:
            raise ValidationError(
                f"loss increased in sweep {sweep}: {prev} -> {cur}"
            )
        if prev == 0.0 or (prev - cur) < tol * prev:
            prev = cur
            break
        prev = cur

    rows = []
    for i in range(n):
        idx = np.flatnonzero(W[i] > 0.0)
        rows.append(SlimRow(i, idx.astype(np.int64), W[i, idx].copy()))
    return SlimModel(
        num_items=n,
        rows=tuple(rows),
        hyperparams=hp,
        trainer="cd",
        training_log=tuple(log_rows),
    )


# -- persistence -----------------------------------------------------------------


def save_model(model: SlimModel, path, config_hash: str | None = None) -> None:
    """Write the `SLIM v1` text format; reload is bit-exact."""
    hp = model.hyperparams
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(
            f"SLIM v1 n={model.num_items} rows={len(model.rows)} "
            f"lambda1={hp.lambda_1:.17g} lambdaF={hp.lambda_F:.17g} "
            f"trainer={model.trainer}\n"
        )
        if config_hash is not None:
            f.write(f"# config {config_hash}\n")
        for row in model.rows:
            f.write(f"R {row.item} {len(row.indices)}\n")
            for j, w in zip(row.indices, row.values):
                f.write(f"{j} {w:.17g}\n")


def load_model(path) -> SlimModel:
    """Read a `SLIM v1` file written by :func:`save_model`."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        fields = header.split()
        if len(fields) != 7 or fields[0] != "SLIM" or fields[1] != "v1":
            raise ParseError(f"bad model header {header!r}", line=1)
        try:
            n = int(fields[2].removeprefix("n="))
            num_rows = int(fields[3].removeprefix("rows="))
            lam1 = float(fields[4].removeprefix("lambda1="))
            lamF = float(fields[5].removeprefix("lambdaF="))
            trainer = fields[6].removeprefix("trainer=")
        except ValueError:
            raise ParseError(f"bad model header {header!r}", line=1)
        if trainer not in ("cd", "greedy"):
            raise ParseError(f"unknown trainer {trainer!r} in header", line=1)

        rows: list[SlimRow] = []
        pending: tuple[int, int] | None = None  # (item, expected pairs)
        idx: list[int] = []
        vals: list[float] = []

        def flush() -> None:
            nonlocal pending
            if pending is None:
                return
            item, expected = pending
            if len(idx) != expected:
                raise ParseError(
                    f"row {item} announced {expected} weights, found {len(idx)}"
                )
            rows.append(
                SlimRow(item, np.asarray(idx, dtype=np.int64), np.asarray(vals))
            )
            pending = None
            idx.clear()
            vals.clear()

        for lineno, raw in enumerate(f, start=2):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if parts[0] == "R":
                    flush()
                    pending = (int(parts[1]), int(parts[2]))
                elif pending is not None and len(parts) == 2:
                    idx.append(int(parts[0]))
                    vals.append(float(parts[1]))
                else:
                    raise ValueError
            except (ValueError, IndexError):
                raise ParseError(f"malformed model line {line!r}", line=lineno)
        flush()

    if len(rows) != num_rows:
        raise ParseError(f"header announced {num_rows} rows, found {len(rows)}")
    model = SlimModel(
        num_items=n, rows=tuple(rows), hyperparams=HyperParams(lam1, lamF),
        trainer=trainer,
    )
    validate_model(model)
    return model
