"""Pluggable persistence: one JSON-able state document, two backends.

The platform's in-memory modules snapshot themselves into a single document
(see ``Platform.save``); a backend only has to store and return that
document. ``FileBackend`` (the default) keeps it in one file and writes
atomically via a temp file + ``os.replace`` so a crash never leaves a torn
state file. ``MemoryBackend`` keeps it in RAM for tests.

The object store is deliberately not part of this document — it persists
itself under its own directory (payload bytes do not belong in JSON).
"""

from __future__ import annotations

import json
import os
from pathlib import Path


class Backend:
    def save(self, state: dict) -> None:
        raise NotImplementedError

    def load(self) -> dict | None:
        raise NotImplementedError


class MemoryBackend(Backend):
    def __init__(self):
        self._state: dict | None = None

    def save(self, state: dict) -> None:
        self._state = json.loads(json.dumps(state))  # defensive deep copy

    def load(self) -> dict | None:
        return self._state


class FileBackend(Backend):
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def save(self, state: dict) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps(state, indent=1))
        os.replace(tmp, self.path)

    def load(self) -> dict | None:
        if not self.path.exists():
            return None
        return json.loads(self.path.read_text())
