"""Exact inner-product flat index with a fixed little-endian on-disk format.

Layout: magic (8 bytes) | version u32 | dim u32 | count u64 | count*dim
float32 row-major vectors | count int64 chunk ids. All integers and floats
little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import read_corpus
from .embeddings import ROLE_PASSAGE

MAGIC = b"SGXFLAT1"
VERSION = 1
_HEADER = struct.Struct("<8sIIQ")


class IndexFormatError(Exception):
    pass


@dataclass
class FlatIndex:
    """Immutable exhaustive index; search scores every row by inner product."""

    vectors: np.ndarray  # (count, dim) float32
    id_map: np.ndarray  # (count,) int64

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self.id_map = np.ascontiguousarray(self.id_map, dtype=np.int64)
        if self.vectors.ndim != 2:
            raise IndexFormatError("vectors must be a 2-D matrix")
        if self.vectors.shape[0] != self.id_map.shape[0]:
            raise IndexFormatError("id_map length does not match vector count")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    def search(self, query_vector, k: int) -> list[tuple[int, float]]:
        """Top-k (chunk_id, score) by descending inner product, ids break ties."""
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(query_vector, dtype=np.float64).reshape(-1)
        if query.shape[0] != self.dim:
            raise ValueError(
                f"query dimension {query.shape[0]} does not match index dimension {self.dim}"
            )
        if self.count == 0:
            return []
        scores = self.vectors.astype(np.float64) @ query
        order = np.lexsort((self.id_map, -scores))[: min(k, self.count)]
        return [(int(self.id_map[i]), float(scores[i])) for i in order]

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as out:
            out.write(_HEADER.pack(MAGIC, VERSION, self.dim, self.count))
            out.write(self.vectors.astype("<f4").tobytes(order="C"))
            out.write(self.id_map.astype("<i8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "FlatIndex":
        with open(path, "rb") as handle:
            header = handle.read(_HEADER.size)
            if len(header) != _HEADER.size:
                raise IndexFormatError("truncated index header")
            magic, version, dim, count = _HEADER.unpack(header)
            if magic != MAGIC:
                raise IndexFormatError(f"bad magic: {magic!r}")
            if version != VERSION:
                raise IndexFormatError(f"unsupported index version: {version}")
            vec_bytes = handle.read(count * dim * 4)
            id_bytes = handle.read(count * 8)
            if len(vec_bytes) != count * dim * 4 or len(id_bytes) != count * 8:
                raise IndexFormatError("truncated index data")
        vectors = np.frombuffer(vec_bytes, dtype="<f4").reshape(count, dim)
        id_map = np.frombuffer(id_bytes, dtype="<i8")
        return cls(vectors=vectors.copy(), id_map=id_map.copy())


def build_index(corpus_path: str | Path, embedder) -> FlatIndex:
    """Embed every corpus chunk (passage role) in chunk_id order."""
    chunks = sorted(read_corpus(corpus_path), key=lambda c: c.chunk_id)
    dim = embedder.dim
    if not chunks:
        return FlatIndex(
            vectors=np.empty((0, dim), dtype=np.float32),
            id_map=np.empty((0,), dtype=np.int64),
        )
    rows = np.stack([embedder.embed(chunk.text, ROLE_PASSAGE) for chunk in chunks])
    ids = np.array([chunk.chunk_id for chunk in chunks], dtype=np.int64)
    return FlatIndex(vectors=rows, id_map=ids)
