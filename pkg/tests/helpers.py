"""Independent oracles used to cross-check the production paths."""

from __future__ import annotations

import numpy as np


def naive_top_k(vectors, id_map, query, k: int) -> list[tuple[int, float]]:
    """Full-scan reference search: per-row float64 dot, sort by (-score, id)."""
    query = np.asarray(query, dtype=np.float64)
    scored = []
    for row, chunk_id in zip(vectors, id_map):
        score = float(np.dot(np.asarray(row, dtype=np.float64), query))
        scored.append((score, int(chunk_id)))
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [(chunk_id, score) for score, chunk_id in scored[:k]]


def random_unit_vectors(n: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((n, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows.astype(np.float32)
