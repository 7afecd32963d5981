"""Local manifest ledger: one JSON file per manifest.

The ledger mirrors the server's entries and adds the local source path for
each one. It is advisory by design — before any upload batch it is
reconciled against ``sync_manifest`` and the server's view wins, so a stale
or hand-edited ledger can slow the agent down but never corrupt an upload.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from .config import ledger_dir


class Ledger:
    def __init__(self, manifest_id: str, doc: dict):
        self.manifest_id = manifest_id
        self.doc = doc
        self._lock = threading.Lock()

    @staticmethod
    def path_for(manifest_id: str) -> Path:
        return ledger_dir() / f"{manifest_id}.json"

    @classmethod
    def create(cls, manifest_id: str, dataset_id: str, server_url: str, entries: list[dict]) -> "Ledger":
        doc = {
            "manifest_id": manifest_id,
            "dataset_id": dataset_id,
            "server_url": server_url,
            "entries": entries,  # {path, source, size, checksum, status, bytes_received}
        }
        ledger = cls(manifest_id, doc)
        ledger.save()
        return ledger

    @classmethod
    def open(cls, manifest_id: str) -> "Ledger":
        path = cls.path_for(manifest_id)
        if not path.exists():
            raise FileNotFoundError(f"no local ledger for manifest {manifest_id}")
        return cls(manifest_id, json.loads(path.read_text()))

    def save(self) -> None:
        with self._lock:
            path = self.path_for(self.manifest_id)
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(self.doc, indent=2))
            os.replace(tmp, path)

    @property
    def entries(self) -> list[dict]:
        return self.doc["entries"]

    def entry(self, path: str) -> dict | None:
        return next((e for e in self.entries if e["path"] == path), None)

    def reconcile(self, server_view: dict) -> None:
        """Overwrite local status/offsets with the server's (server wins)."""
        server_entries = {e["path"]: e for e in server_view["entries"]}
        for entry in self.entries:
            remote = server_entries.get(entry["path"])
            if remote is None:
                continue
            entry["status"] = remote["status"]
            entry["bytes_received"] = remote["bytes_received"]
        self.save()

    def update(self, path: str, **fields) -> None:
        entry = self.entry(path)
        if entry is not None:
            entry.update(fields)
            self.save()
