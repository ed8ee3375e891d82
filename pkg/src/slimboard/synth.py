"""Deterministic synthetic rating data shaped like the MovieLens sets.

Item popularity follows a power law, user activity a lognormal, and rating
values come from a small latent-factor structure plus noise, so trained
models have signal to find. Everything is a pure function of the seed.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import ValidationError
from .interactions import InteractionMatrix

GENRE_CYCLE = (
    "Drama", "Comedy", "Action", "Thriller", "Romance",
    "Sci-Fi", "Adventure", "Crime", "Horror", "Documentary",
)


def synthetic_ratings(
    num_users: int = 943,
    num_items: int = 1682,
    target_nnz: int = 100_000,
    seed: int = 0,
) -> InteractionMatrix:
    """Random rating matrix with roughly ``target_nnz`` integer ratings."""
    if num_users < 2 or num_items < 2:
        raise ValidationError("need at least 2 users and 2 items")
    if target_nnz < num_users:
        raise ValidationError("target_nnz must cover at least one rating per user")
    rng = np.random.default_rng(seed)

    popularity = 1.0 / np.power(np.arange(1, num_items + 1), 0.8)
    log_pop = np.log(popularity / popularity.sum())

    activity = rng.lognormal(mean=0.0, sigma=0.6, size=num_users)
    counts = np.maximum(
        1, np.rint(activity / activity.sum() * target_nnz).astype(np.int64)
    )
    counts = np.minimum(counts, num_items)

    rank = 8
    user_taste = rng.standard_normal((num_users, rank)) * 0.45
    item_profile = rng.standard_normal((num_items, rank)) * 0.45
    item_quality = rng.standard_normal(num_items) * 0.7

    users_out: list[np.ndarray] = []
    items_out: list[np.ndarray] = []
    ratings_out: list[np.ndarray] = []
    for u in range(num_users):
        c = int(counts[u])
        # Gumbel top-k draw = sampling without replacement with popularity weights
        keys = log_pop + rng.gumbel(size=num_items)
        chosen = np.sort(np.argpartition(-keys, c - 1)[:c])
        mean = 3.4 + item_quality[chosen] + item_profile[chosen] @ user_taste[u]
        noise = rng.standard_normal(c) * 0.9
        values = np.clip(np.rint(mean + noise), 1.0, 5.0)
        users_out.append(np.full(c, u, dtype=np.int64))
        items_out.append(chosen.astype(np.int64))
        ratings_out.append(values)

    return InteractionMatrix.from_entries(
        num_users,
        num_items,
        np.concatenate(users_out),
        np.concatenate(items_out),
        np.concatenate(ratings_out),
        user_ids=[str(u + 1) for u in range(num_users)],
        item_ids=[str(i + 1) for i in range(num_items)],
    )


def write_ratings_csv(X: InteractionMatrix, path, header: bool = True) -> None:
    """MovieLens-style `userId,movieId,rating,timestamp` lines."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if header:
            writer.writerow(["userId", "movieId", "rating", "timestamp"])
        coo = X.csr.tocoo()
        for u, i, r in zip(coo.row, coo.col, coo.data):
            value = int(r) if float(r).is_integer() else float(r)
            timestamp = 880000000 + (int(u) * 2654435761 + int(i) * 40503) % 9999991
            writer.writerow([X.user_ids[u], X.item_ids[i], value, timestamp])


def write_catalog_csv(item_ids: list[str], path) -> None:
    """Synthetic `movieId,title,genres` catalog covering the given items."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["movieId", "title", "genres"])
        for k, external in enumerate(item_ids):
            year = 1960 + (k * 7) % 60
            genres = "|".join(
                (GENRE_CYCLE[k % len(GENRE_CYCLE)], GENRE_CYCLE[(k * 3 + 1) % len(GENRE_CYCLE)])
            )
            writer.writerow([external, f"Feature No. {external} ({year})", genres])
