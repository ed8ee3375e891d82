"""Rating data: ingestion, dual-indexed sparse storage, splits, item statistics.

The central type is :class:`InteractionMatrix`, an immutable m x n sparse
rating matrix kept in both CSR (per-user rows) and CSC (per-item columns)
form, with bijections between external ids and dense internal indices.
A stored value is a rating in (0, 5]; absence encodes "not rated".
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

RATING_MAX = 5.0


def _check_rating_range(values: np.ndarray) -> None:
    ok = np.isfinite(values) & (values > 0.0) & (values <= RATING_MAX)
    if not bool(np.all(ok)):
        bad = values[~ok][0]
        raise ValidationError(f"rating {bad!r} outside (0, {RATING_MAX:g}]")


@dataclass(frozen=True)
class InteractionMatrix:
    """Sparse user-item rating matrix with row and column access.

    Attributes
    ----------
    csr, csc : scipy.sparse matrices
        The same entry set indexed by user and by item.
    user_ids, item_ids : list of str
        External id for each dense internal index.
    """

    csr: sparse.csr_matrix
    csc: sparse.csc_matrix
    user_ids: list[str]
    item_ids: list[str]
    _user_index: dict[str, int] = field(repr=False, default_factory=dict)
    _item_index: dict[str, int] = field(repr=False, default_factory=dict)

    @classmethod
    def from_entries(
        cls,
        num_users: int,
        num_items: int,
        users: np.ndarray,
        items: np.ndarray,
        ratings: np.ndarray,
        user_ids: list[str] | None = None,
        item_ids: list[str] | None = None,
    ) -> "InteractionMatrix":
        """Build from parallel (user, item, rating) arrays with unique pairs."""
        ratings = np.asarray(ratings, dtype=np.float64)
        _check_rating_range(ratings)
        coo = sparse.coo_matrix(
            (ratings, (np.asarray(users), np.asarray(items))),
            shape=(num_users, num_items),
        )
        csr = coo.tocsr()  # sums duplicate pairs, shrinking nnz
        if csr.nnz != len(ratings):
            raise ValidationError("duplicate (user, item) pairs in entry arrays")
        csr.sort_indices()
        csc = coo.tocsc()
        csc.sort_indices()
        if user_ids is None:
            user_ids = [str(u) for u in range(num_users)]
        if item_ids is None:
            item_ids = [str(i) for i in range(num_items)]
        if len(user_ids) != num_users or len(item_ids) != num_items:
            raise ValidationError("id list length does not match matrix shape")
        return cls(
            csr=csr,
            csc=csc,
            user_ids=list(user_ids),
            item_ids=list(item_ids),
            _user_index={u: k for k, u in enumerate(user_ids)},
            _item_index={i: k for k, i in enumerate(item_ids)},
        )

    # -- shape ---------------------------------------------------------------

    @property
    def num_users(self) -> int:
        return self.csr.shape[0]

    @property
    def num_items(self) -> int:
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    # -- access --------------------------------------------------------------

    def user_row(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Item indices and ratings of user ``u`` (sparse row x_u^T)."""
        lo, hi = self.csr.indptr[u], self.csr.indptr[u + 1]
        return self.csr.indices[lo:hi], self.csr.data[lo:hi]

    def item_col(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """User indices and ratings of item ``i`` (sparse column x_i)."""
        lo, hi = self.csc.indptr[i], self.csc.indptr[i + 1]
        return self.csc.indices[lo:hi], self.csc.data[lo:hi]

    def dense_row(self, u: int) -> np.ndarray:
        """User ``u``'s ratings as a dense length-n vector (0 = unrated)."""
        row = np.zeros(self.num_items)
        idx, vals = self.user_row(u)
        row[idx] = vals
        return row

    def user_index(self, external_id: str) -> int:
        return self._user_index[external_id]

    def item_index(self, external_id: str) -> int:
        return self._item_index[external_id]

    def item_counts(self) -> np.ndarray:
        return np.diff(self.csc.indptr)

    def item_sq_norms(self) -> np.ndarray:
        """Per-item sum of squared ratings, sum_u x_ui^2."""
        out = np.zeros(self.num_items)
        np.add.at(out, _column_of_data(self.csc), self.csc.data**2)
        return out

    def frob_sq(self) -> float:
        """Squared Frobenius norm of the full matrix."""
        return float(np.dot(self.csr.data, self.csr.data))

    # -- integrity -----------------------------------------------------------

    def validate(self) -> None:
        """Cross-check the row and column indexes and the rating range."""
        if self.csr.shape != self.csc.shape:
            raise ValidationError("row and column index shapes differ")
        if self.csr.nnz != self.csc.nnz:
            raise ValidationError("row and column index entry counts differ")
        _check_rating_range(self.csr.data)
        diff = (self.csr - self.csc.tocsr()).tocoo()
        if diff.nnz != 0:
            raise ValidationError("row and column indexes disagree on entries")

    def content_hash(self) -> str:
        """Stable digest of shape, ids, and the canonical entry list."""
        h = hashlib.sha256()
        h.update(f"{self.num_users} {self.num_items} {self.nnz}\n".encode())
        h.update("\x00".join(self.user_ids).encode())
        h.update(b"\x01")
        h.update("\x00".join(self.item_ids).encode())
        h.update(self.csr.indptr.astype("<i8").tobytes())
        h.update(self.csr.indices.astype("<i8").tobytes())
        h.update(self.csr.data.astype("<f8").tobytes())
        return h.hexdigest()

    def restrict_users(self, users: np.ndarray) -> "InteractionMatrix":
        """View restricted to the given user rows; the item space is kept."""
        users = np.asarray(users, dtype=np.int64)
        sub = self.csr[users]
        coo = sub.tocoo()
        return InteractionMatrix.from_entries(
            len(users),
            self.num_items,
            coo.row,
            coo.col,
            coo.data,
            user_ids=[self.user_ids[u] for u in users],
            item_ids=self.item_ids,
        )


def _column_of_data(csc: sparse.csc_matrix) -> np.ndarray:
    """Column index of every stored value, aligned with ``csc.data``."""
    return np.repeat(np.arange(csc.shape[1]), np.diff(csc.indptr))


# -- ingestion -----------------------------------------------------------------


def _is_header_line(line: str) -> bool:
    """First field not parseable as a number means a header row."""
    first = line.split(",", 1)[0].strip()
    try:
        float(first)
        return False
    except ValueError:
        return True


def load_ratings(source, format: str = "auto") -> InteractionMatrix:
    """Parse MovieLens-style rating lines into an :class:`InteractionMatrix`.

    Parameters
    ----------
    source : path or text stream
        Lines of ``userId,itemId,rating[,timestamp]``.
    format : {"csv_header", "csv_plain", "auto"}
        ``csv_header`` skips the first line, ``csv_plain`` treats every line
        as data, ``auto`` sniffs a header by its non-numeric first field.

    Internal user/item indices are dense in order of first appearance.
    Duplicate (user, item) pairs keep the last occurrence (count is logged).
    """
    if format not in ("csv_header", "csv_plain", "auto"):
        raise ValidationError(f"unknown format {format!r}")
    if hasattr(source, "read"):
        stream = source
        close = False
    else:
        stream = open(source, "r", encoding="utf-8", newline="")
        close = True
    try:
        return _parse_stream(stream, format)
    finally:
        if close:
            stream.close()


def _parse_stream(stream: io.TextIOBase, format: str) -> InteractionMatrix:
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    entries: dict[tuple[int, int], float] = {}
    duplicates = 0

    reader = enumerate(stream, start=1)
    for lineno, raw in reader:
        line = raw.rstrip("\r\n")
        if lineno == 1:
            if format == "csv_header":
                continue
            if format == "auto" and line.strip() and _is_header_line(line):
                continue
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) not in (3, 4):
            raise ParseError(
                f"expected `user,item,rating[,timestamp]`, got {len(fields)} fields",
                line=lineno,
            )
        user_id = fields[0].strip()
        item_id = fields[1].strip()
        if not user_id or not item_id:
            raise ParseError("empty user or item id", line=lineno)
        try:
            rating = float(fields[2])
        except ValueError:
            raise ParseError(f"rating {fields[2].strip()!r} is not a number", line=lineno)
        if not (math.isfinite(rating) and 0.0 < rating <= RATING_MAX):
            raise ValidationError(f"line {lineno}: rating {rating!r} outside (0, 5]")
        u = user_index.setdefault(user_id, len(user_index))
        i = item_index.setdefault(item_id, len(item_index))
        if (u, i) in entries:
            duplicates += 1
        entries[(u, i)] = rating

    if duplicates:
        log.warning("kept last occurrence of %d duplicate (user, item) pairs", duplicates)
    m, n = len(user_index), len(item_index)
    if not entries:
        raise ValidationError("no rating lines in input")
    users = np.fromiter((k[0] for k in entries), dtype=np.int64, count=len(entries))
    items = np.fromiter((k[1] for k in entries), dtype=np.int64, count=len(entries))
    ratings = np.fromiter(entries.values(), dtype=np.float64, count=len(entries))
    return InteractionMatrix.from_entries(
        m, n, users, items, ratings,
        user_ids=list(user_index), item_ids=list(item_index),
    )


# -- splits --------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint user partition with per-side matrix views."""

    train_users: np.ndarray
    test_users: np.ndarray
    X_train: InteractionMatrix
    X_test: InteractionMatrix


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_users(X: InteractionMatrix, test_fraction: float = 0.1, seed: int = 0) -> DatasetSplit:
    """Uniformly random user partition, deterministic given ``seed``.

    The test side holds round-half-up(test_fraction * m) users.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValidationError("test_fraction must lie strictly between 0 and 1")
    m = X.num_users
    if m < 2:
        raise ValidationError("need at least 2 users to split")
    num_test = round_half_up(test_fraction * m)
    if num_test == 0:
        raise ValidationError(f"test_fraction {test_fraction} yields 0 test users for m={m}")
    if num_test == m:
        raise ValidationError(f"test_fraction {test_fraction} leaves 0 training users for m={m}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    test_users = np.sort(perm[:num_test])
    train_users = np.sort(perm[num_test:])
    return DatasetSplit(
        train_users=train_users,
        test_users=test_users,
        X_train=X.restrict_users(train_users),
        X_test=X.restrict_users(test_users),
    )


@dataclass(frozen=True)
class PopularitySplit:
    """Short-head / long-tail item partition by rating count."""

    short_head: np.ndarray
    long_tail: np.ndarray
    coverage: float

    def long_tail_mask(self, num_items: int) -> np.ndarray:
        mask = np.ones(num_items, dtype=bool)
        mask[self.short_head] = False
        return mask


def short_head_split(X: InteractionMatrix, coverage: float = 0.33) -> PopularitySplit:
    """Shortest most-popular item prefix covering ``coverage`` of all ratings.

    Items are ordered by rating count descending, ties by ascending index;
    the short head is the shortest prefix whose cumulative count reaches
    coverage * nnz.
    """
    if X.nnz < 1:
        raise ValidationError("short_head_split needs at least one rating")
    if not (0.0 < coverage <= 1.0):
        raise ValidationError("coverage must lie in (0, 1]")
    counts = X.item_counts()
    order = np.lexsort((np.arange(X.num_items), -counts))
    cumulative = np.cumsum(counts[order])
    threshold = coverage * X.nnz
    k = int(np.searchsorted(cumulative, threshold, side="left")) + 1
    short = np.sort(order[:k])
    tail = np.sort(order[k:])
    achieved = float(cumulative[k - 1] / X.nnz)
    return PopularitySplit(short_head=short, long_tail=tail, coverage=achieved)


# -- per-item statistics ---------------------------------------------------------


@dataclass(frozen=True)
class ItemStats:
    """Aligned per-item arrays: rating count, gain sum, rating entropy."""

    counts: np.ndarray
    gain_sums: np.ndarray
    entropies: np.ndarray


def item_stats(X: InteractionMatrix) -> ItemStats:
    """Count, sum of gains 2^x - 1, and base-2 entropy of each item's ratings.

    Entropy uses the empirical histogram over the distinct rating values the
    item actually received; unrated items get (0, 0, 0).
    """
    csc = X.csc
    counts = np.diff(csc.indptr)
    gain_sums = np.zeros(X.num_items)
    np.add.at(gain_sums, _column_of_data(csc), np.exp2(csc.data) - 1.0)
    entropies = np.zeros(X.num_items)
    for i in range(X.num_items):
        lo, hi = csc.indptr[i], csc.indptr[i + 1]
        if hi == lo:
            continue
        _, value_counts = np.unique(csc.data[lo:hi], return_counts=True)
        p = value_counts / (hi - lo)
        entropies[i] = float(-np.sum(p * np.log2(p)))
    return ItemStats(counts=counts, gain_sums=gain_sums, entropies=entropies)


# -- persistence -----------------------------------------------------------------


def save_dataset(X: InteractionMatrix, path, config_hash: str | None = None) -> None:
    """Write a `DATASET v1` text artifact (ids plus row-major entries)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"DATASET v1 m={X.num_users} n={X.num_items} nnz={X.nnz}\n")
        if config_hash is not None:
            f.write(f"# config {config_hash}\n")
        for uid in X.user_ids:
            f.write(f"u {uid}\n")
        for iid in X.item_ids:
            f.write(f"i {iid}\n")
        coo = X.csr.tocoo()
        for u, i, r in zip(coo.row, coo.col, coo.data):
            f.write(f"r {u} {i} {float(r)!r}\n")


def load_dataset(path) -> InteractionMatrix:
    """Read a `DATASET v1` artifact written by :func:`save_dataset`."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 5 or parts[0] != "DATASET" or parts[1] != "v1":
            raise ParseError(f"bad dataset header {header!r}", line=1)
        try:
            m = int(parts[2].removeprefix("m="))
            n = int(parts[3].removeprefix("n="))
            nnz = int(parts[4].removeprefix("nnz="))
        except ValueError:
            raise ParseError(f"bad dataset header {header!r}", line=1)
        user_ids: list[str] = []
        item_ids: list[str] = []
        users = np.empty(nnz, dtype=np.int64)
        items = np.empty(nnz, dtype=np.int64)
        ratings = np.empty(nnz, dtype=np.float64)
        k = 0
        for lineno, raw in enumerate(f, start=2):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            tag, _, rest = line.partition(" ")
            try:
                if tag == "u":
                    user_ids.append(rest)
                elif tag == "i":
                    item_ids.append(rest)
                elif tag == "r":
                    u_s, i_s, r_s = rest.split(" ")
                    users[k], items[k], ratings[k] = int(u_s), int(i_s), float(r_s)
                    k += 1
                else:
                    raise ParseError(f"unknown line tag {tag!r}", line=lineno)
            except (ValueError, IndexError):
                raise ParseError(f"malformed dataset line {line!r}", line=lineno)
    if len(user_ids) != m or len(item_ids) != n or k != nnz:
        raise ParseError("dataset body does not match header counts")
    return InteractionMatrix.from_entries(
        m, n, users, items, ratings, user_ids=user_ids, item_ids=item_ids
    )


def write_id_map(ids: list[str], path) -> None:
    """Write the `internal_index,external_id` CSV used by reports."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["internal_index", "external_id"])
        for k, external in enumerate(ids):
            writer.writerow([k, external])
