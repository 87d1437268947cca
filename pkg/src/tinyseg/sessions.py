"""Race-free session registry for multi-user detection requests.

Each upload gets a server-generated 128-bit random key; the registry maps
keys to temp paths and edit state. The client-supplied UUID and address are
recorded for audit but never used as the lookup key, so one user cannot
forge another's handle.
"""

from __future__ import annotations

import secrets
import shutil
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DETECTING = "detecting"
READY = "ready"
EXPIRED = "expired"


@dataclass
class SessionRecord:
    key: str
    client_uuid: str
    client_ip: str
    temp_dir: Path
    upload_path: Path
    prob_path: Path
    upload_name: str
    created_at: float
    last_access: float
    state: str = DETECTING
    width: int = 0
    height: int = 0
    objects: list = field(default_factory=list)
    threshold: float = 0.5
    dilation: int = 0
    overlay: np.ndarray | None = None
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False)


class SessionRegistry:
    """Shared key -> session map; mutations hold a short-lived lock and file
    I/O never happens under it."""

    def __init__(self, temp_root: Path):
        self.temp_root = Path(temp_root)
        self.temp_root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionRecord] = {}

    def new_key(self) -> str:
        return secrets.token_hex(16)

    def create(self, client_uuid: str, client_ip: str, upload_name: str) -> SessionRecord:
        now = time.time()
        with self._lock:
            key = self.new_key()
            while key in self._sessions:  # pragma: no cover - 2^-128 event
                key = self.new_key()
            temp_dir = self.temp_root / key
            record = SessionRecord(
                key=key,
                client_uuid=client_uuid,
                client_ip=client_ip,
                temp_dir=temp_dir,
                upload_path=temp_dir / "original.bin",
                prob_path=temp_dir / "prob.npy",
                upload_name=upload_name,
                created_at=now,
                last_access=now,
            )
            self._sessions[key] = record
        record.temp_dir.mkdir(parents=True, exist_ok=True)
        return record

    def get(self, key: str) -> SessionRecord | None:
        with self._lock:
            return self._sessions.get(key)

    def touch(self, record: SessionRecord) -> None:
        record.last_access = time.time()

    def drop(self, key: str) -> None:
        with self._lock:
            record = self._sessions.pop(key, None)
        if record is not None:
            shutil.rmtree(record.temp_dir, ignore_errors=True)

    def session_gc(self, now: float | None = None, ttl: float = 86400.0) -> int:
        """Expire sessions idle past ttl, delete their temp files; returns
        how many were expired by this pass."""
        if ttl <= 0:
            raise ValueError("ttl must be > 0")
        now = time.time() if now is None else now
        with self._lock:
            stale = [r for r in self._sessions.values()
                     if r.state != EXPIRED and now - r.last_access > ttl]
            for record in stale:
                record.state = EXPIRED
        for record in stale:
            shutil.rmtree(record.temp_dir, ignore_errors=True)
        return len(stale)

    def count(self) -> int:
        with self._lock:
            return len(self._sessions)
