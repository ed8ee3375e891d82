"""PureSVD latent-factor model: truncated SVD of the zero-filled matrix.

Q holds the top-f right singular vectors (orthonormal columns); user
factors are folded in as p_u = Q^T x_u, i.e. P = XQ. Predicted rating is
the inner product p_u . q_i. Small problems use a dense SVD; larger ones a
seeded randomized range finder (oversampling 10, 4 power iterations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError
from .interactions import InteractionMatrix

OVERSAMPLING = 10
POWER_ITERATIONS = 4
DENSE_CUTOFF = 256  # min(m, n) at or below this uses the dense path


@dataclass(frozen=True)
class LfmModel:
    """Item factors Q (n x f, orthonormal columns) and user factors P (m x f)."""

    Q: np.ndarray
    P: np.ndarray
    seed: int

    @property
    def rank(self) -> int:
        return self.Q.shape[1]

    @property
    def num_users(self) -> int:
        return self.P.shape[0]

    @property
    def num_items(self) -> int:
        return self.Q.shape[0]


def _normalize_signs(Q: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Singular vectors are only defined up to sign; fixing it makes training
    deterministic across runs and backends.
    """
    Q = Q.copy()
    for k in range(Q.shape[1]):
        col = Q[:, k]
        pivot = int(np.argmax(np.abs(col)))
        if col[pivot] < 0.0:
            Q[:, k] = -col
    return Q


def train_pure_svd(X: InteractionMatrix, f: int, seed: int = 0) -> LfmModel:
    """Rank-f PureSVD factors of X, deterministic given ``seed``."""
    m, n = X.num_users, X.num_items
    if not 1 <= f <= min(m, n):
        raise ValidationError(f"rank must lie in [1, {min(m, n)}], got {f}")
    A = X.csr.astype(np.float64)
    if min(m, n) <= DENSE_CUTOFF:
        _, _, Vt = np.linalg.svd(A.toarray(), full_matrices=False)
        Q = Vt[:f].T
    else:
        rng = np.random.default_rng(seed)
        k = min(f + OVERSAMPLING, min(m, n))
        Y = A @ rng.standard_normal((n, k))
        Y, _ = np.linalg.qr(Y)
        for _ in range(POWER_ITERATIONS):
            Z, _ = np.linalg.qr(A.T @ Y)
            Y, _ = np.linalg.qr(A @ Z)
        B = (A.T @ Y).T  # k x n
        _, _, Vt = np.linalg.svd(B, full_matrices=False)
        Q = Vt[:f].T
    Q = np.ascontiguousarray(_normalize_signs(Q))
    P = np.ascontiguousarray(A @ Q)
    return LfmModel(Q=Q, P=P, seed=seed)


def predict_rating(model: LfmModel, u: int, i: int) -> float:
    """p_u . q_i."""
    return float(model.P[u] @ model.Q[i])


def predict_user_items(model: LfmModel, u: int) -> np.ndarray:
    """All item predictions of user u: Q p_u."""
    return model.Q @ model.P[u]


def predict_item_users(model: LfmModel, i: int) -> np.ndarray:
    """Item i's prediction for every user: P q_i."""
    return model.P @ model.Q[i]


def reconstruction_error(X: InteractionMatrix, model: LfmModel) -> float:
    """||X - XQQ^T||_F computed without forming the dense product."""
    # ||X - XQQ^T||^2 = ||X||^2 - ||XQ||^2 because QQ^T is an orthogonal projector.
    x_sq = X.frob_sq()
    p_sq = float(np.sum(model.P * model.P))
    return float(np.sqrt(max(x_sq - p_sq, 0.0)))


def orthonormality_defect(model: LfmModel) -> float:
    """max |Q^T Q - I|."""
    g = model.Q.T @ model.Q
    return float(np.max(np.abs(g - np.eye(model.rank))))


# -- persistence -----------------------------------------------------------------


def save_lfm(model: LfmModel, path, config_hash: str | None = None) -> None:
    """Text header `LFM v1 m n f seed` plus little-endian float64 Q then P."""
    m, n, f = model.num_users, model.num_items, model.rank
    with open(path, "wb") as fh:
        fh.write(f"LFM v1 {m} {n} {f} {model.seed}\n".encode())
        if config_hash is not None:
            fh.write(f"# config {config_hash}\n".encode())
        fh.write(model.Q.astype("<f8").tobytes(order="C"))
        fh.write(model.P.astype("<f8").tobytes(order="C"))


def load_lfm(path) -> LfmModel:
    """Read a model written by :func:`save_lfm`; round-trip is bit-exact."""
    with open(path, "rb") as fh:
        header = fh.readline().decode().rstrip("\n")
        fields = header.split()
        if len(fields) != 6 or fields[0] != "LFM" or fields[1] != "v1":
            raise ParseError(f"bad factor-model header {header!r}", line=1)
        try:
            m, n, f, seed = (int(x) for x in fields[2:])
        except ValueError:
            raise ParseError(f"bad factor-model header {header!r}", line=1)
        pos = fh.tell()
        maybe_comment = fh.readline()
        if not maybe_comment.startswith(b"#"):
            fh.seek(pos)
        q_bytes = fh.read(8 * n * f)
        p_bytes = fh.read(8 * m * f)
        if len(q_bytes) != 8 * n * f or len(p_bytes) != 8 * m * f:
            raise ParseError("factor payload shorter than the header promises")
        Q = np.frombuffer(q_bytes, dtype="<f8").reshape(n, f).copy()
        P = np.frombuffer(p_bytes, dtype="<f8").reshape(m, f).copy()
    return LfmModel(Q=Q, P=P, seed=seed)
