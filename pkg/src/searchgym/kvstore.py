"""Key-value caches: in-process map for tests, SQLite-backed store for services.

Both return stored bytes exactly as written; the file store supports
concurrent readers with atomic single-entry writes.
"""

from __future__ import annotations

import sqlite3
import threading
from pathlib import Path


class CacheStorageError(Exception):
    pass


class MemoryKV:
    def __init__(self):
        self._data: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def get(self, key: str) -> bytes | None:
        with self._lock:
            return self._data.get(key)

    def put(self, key: str, value: bytes) -> None:
        with self._lock:
            self._data[key] = bytes(value)

    def __len__(self) -> int:
        return len(self._data)


class SqliteKV:
    def __init__(self, path: str | Path):
        self.path = str(path)
        self._lock = threading.Lock()
        try:
            self._conn = sqlite3.connect(self.path, check_same_thread=False)
            with self._conn:
                self._conn.execute(
                    "CREATE TABLE IF NOT EXISTS cache (key TEXT PRIMARY KEY, value BLOB NOT NULL)"
                )
        except sqlite3.Error as exc:
            raise CacheStorageError(f"cannot open cache at {self.path}: {exc}") from exc

    def get(self, key: str) -> bytes | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT value FROM cache WHERE key = ?", (key,)
            ).fetchone()
        return bytes(row[0]) if row else None

    def put(self, key: str, value: bytes) -> None:
        try:
            with self._lock, self._conn:
                self._conn.execute(
                    "INSERT OR REPLACE INTO cache (key, value) VALUES (?, ?)",
                    (key, bytes(value)),
                )
        except sqlite3.Error as exc:
            raise CacheStorageError(f"cache write failed: {exc}") from exc

    def __len__(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM cache").fetchone()[0]

    def close(self) -> None:
        self._conn.close()
