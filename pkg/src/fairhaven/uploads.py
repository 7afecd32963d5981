"""Manifest-based, checksummed, resumable uploads.

The protocol is three steps: register a manifest of (path, size, checksum)
entries, stream each entry's bytes in strictly sequential chunks, then
finalize each entry so the server recomputes the SHA-256 and either
materializes the file node or marks the entry failed.

Resume needs no session state: ``OffsetMismatch`` always carries the next
expected offset, and ``sync_manifest`` returns the server's authoritative
per-entry offsets, so a restarted client just continues from there.
Retransmitting the exact last-acknowledged chunk is a no-op ack, which makes
"did my last send land?" safe to answer by resending it.
"""

from __future__ import annotations

import hashlib
import posixpath
from dataclasses import dataclass, field
from datetime import datetime

from .clock import Clock, isoformat
from .core import CoreStore
from .errors import (
    DuplicatePath,
    EntryNotFound,
    FileTooLarge,
    IllegalTransition,
    Incomplete,
    InvalidPath,
    ManifestFinalized,
    NotFound,
    OffsetMismatch,
    Overflow,
    SiblingConflict,
)
from .ids import new_id
from .objectstore import ObjectStore

MAX_FILE_BYTES = 5_497_558_138_880  # 5 TB = 5 * 1024**4

ENTRY_STATES = ("registered", "in_progress", "uploaded", "verified", "failed")


def _clean_path(path: str) -> str:
    if not path or path.startswith("/") or path.endswith("/"):
        raise InvalidPath(f"{path!r} is not a valid dataset-relative path")
    parts = path.split("/")
    if any(p in ("", ".", "..") for p in parts):
        raise InvalidPath(f"{path!r} contains empty or relative segments")
    return path


@dataclass
class ManifestEntry:
    path: str
    declared_size: int
    declared_checksum: str
    status: str = "registered"
    bytes_received: int = 0
    # (offset, length, sha256) of the last acknowledged chunk, for idempotent resends
    last_chunk: tuple[int, int, str] | None = None
    failure: dict | None = None
    node_id: str | None = None

    def to_dict(self) -> dict:
        out = {
            "path": self.path,
            "declared_size": self.declared_size,
            "declared_checksum": self.declared_checksum,
            "status": self.status,
            "bytes_received": self.bytes_received,
        }
        if self.failure:
            out["failure"] = dict(self.failure)
        if self.node_id:
            out["node_id"] = self.node_id
        return out


@dataclass
class UploadManifest:
    id: str
    dataset_id: str
    created_by: str
    entries: dict[str, ManifestEntry]  # keyed by path, insertion-ordered
    state: str = "open"  # open | finalized
    created_at: datetime | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "dataset_id": self.dataset_id,
            "created_by": self.created_by,
            "state": self.state,
            "created_at": isoformat(self.created_at) if self.created_at else None,
            "entries": [e.to_dict() for e in self.entries.values()],
        }


class UploadService:
    def __init__(self, core: CoreStore, store: ObjectStore, clock: Clock):
        self.core = core
        self.store = store
        self.clock = clock
        self.manifests: dict[str, UploadManifest] = {}

    # -- helpers --------------------------------------------------------------------

    def manifest(self, manifest_id: str) -> UploadManifest:
        try:
            return self.manifests[manifest_id]
        except KeyError:
            raise NotFound(f"no manifest {manifest_id}") from None

    def _entry(self, manifest: UploadManifest, path: str) -> ManifestEntry:
        entry = manifest.entries.get(path)
        if entry is None:
            raise EntryNotFound(f"manifest has no entry {path!r}")
        return entry

    @staticmethod
    def staging_key(manifest_id: str, path: str) -> str:
        slot = hashlib.sha256(path.encode()).hexdigest()
        return f"staging/{manifest_id}/{slot}"

    def open_staging_prefixes(self) -> set[str]:
        """Prefixes the lifecycle sweep must leave alone."""
        return {f"staging/{m.id}/" for m in self.manifests.values() if m.state == "open"}

    # -- operations -------------------------------------------------------------------

    def create_manifest(self, dataset_id: str, user_id: str, entries: list[dict]) -> UploadManifest:
        self.core.dataset(dataset_id)
        manifest_entries: dict[str, ManifestEntry] = {}
        for raw in entries:
            path = _clean_path(raw["path"])
            size = int(raw["size"])
            checksum = (raw.get("checksum") or "").lower()
            if size < 0:
                raise InvalidPath(f"negative size for {path!r}")
            if size > MAX_FILE_BYTES:
                raise FileTooLarge(
                    f"{path!r} declares {size} bytes; the per-file limit is {MAX_FILE_BYTES}",
                    limit=MAX_FILE_BYTES,
                )
            if len(checksum) != 64 or any(c not in "0123456789abcdef" for c in checksum):
                raise InvalidPath(f"{path!r} needs a SHA-256 hex checksum")
            if path in manifest_entries:
                raise DuplicatePath(f"{path!r} appears more than once")
            manifest_entries[path] = ManifestEntry(path=path, declared_size=size, declared_checksum=checksum)
        manifest = UploadManifest(
            id=new_id(), dataset_id=dataset_id, created_by=user_id,
            entries=manifest_entries, created_at=self.clock.now(),
        )
        self.manifests[manifest.id] = manifest
        return manifest

    def upload_chunk(self, manifest_id: str, path: str, offset: int, data: bytes) -> dict:
        manifest = self.manifest(manifest_id)
        if manifest.state != "open":
            raise ManifestFinalized("manifest is finalized; no further chunks accepted")
        entry = self._entry(manifest, path)
        chunk_sig = (offset, len(data), hashlib.sha256(data).hexdigest())
        if entry.last_chunk == chunk_sig and data:
            # exact resend of the last acknowledged chunk: acknowledge again
            return {"bytes_received": entry.bytes_received, "status": entry.status}
        if entry.status == "failed":
            raise IllegalTransition("entry failed verification; reset it before re-uploading")
        if offset != entry.bytes_received:
            raise OffsetMismatch(
                f"expected offset {entry.bytes_received}, got {offset}",
                expected=entry.bytes_received,
            )
        if entry.bytes_received + len(data) > entry.declared_size:
            raise Overflow(
                f"chunk would exceed declared size {entry.declared_size}",
                declared_size=entry.declared_size,
            )
        if data:
            self.store.append(self.staging_key(manifest_id, path), data, self.clock.now())
            entry.bytes_received += len(data)
            entry.last_chunk = chunk_sig
        if entry.status == "registered":
            entry.status = "in_progress"
        if entry.bytes_received == entry.declared_size:
            entry.status = "uploaded"
        return {"bytes_received": entry.bytes_received, "status": entry.status}

    def finalize_entry(self, manifest_id: str, path: str, user_id: str | None = None) -> dict:
        manifest = self.manifest(manifest_id)
        entry = self._entry(manifest, path)
        if entry.status == "verified":
            return {"status": "verified", "node_id": entry.node_id}
        if entry.bytes_received < entry.declared_size:
            raise Incomplete(
                f"{path!r} has {entry.bytes_received} of {entry.declared_size} bytes",
                bytes_received=entry.bytes_received,
                declared_size=entry.declared_size,
            )
        key = self.staging_key(manifest_id, path)
        if entry.declared_size == 0 and not self.store.exists(key):
            actual = hashlib.sha256(b"").hexdigest()
        else:
            actual = self.store.compute_digest(key)
        if actual != entry.declared_checksum:
            entry.status = "failed"
            entry.failure = {"expected": entry.declared_checksum, "actual": actual}
            return {"status": "failed", "failure": dict(entry.failure)}
        node = self._materialize(manifest, entry, user_id or manifest.created_by)
        entry.status = "verified"
        entry.failure = None
        entry.node_id = node.id
        if all(e.status == "verified" for e in manifest.entries.values()):
            manifest.state = "finalized"
        return {"status": "verified", "node_id": node.id}

    def _materialize(self, manifest: UploadManifest, entry: ManifestEntry, user_id: str):
        """Move verified bytes to their durable key and create/refresh the node."""
        now = self.clock.now()
        staging = self.staging_key(manifest.id, entry.path)
        data = self.store.get(staging, now) if self.store.exists(staging) else b""
        dataset_id = manifest.dataset_id
        folder_path, _, name = entry.path.rpartition("/")
        parent = self.core.ensure_folder_path(dataset_id, user_id, folder_path)
        existing = next(
            (c for c in self.core.list_folder(dataset_id, parent.id) if c.name == name), None
        )
        if existing is not None and existing.kind == "folder":
            raise SiblingConflict(f"a folder already lives at {entry.path!r}")
        if existing is not None:
            # overwrite-in-place: a fresh generation under the node's existing key
            self.store.put(existing.object_key, data, now)
            existing.size_bytes = entry.declared_size
            existing.checksum = entry.declared_checksum
            self.core.touch(dataset_id)
            self.core.log(
                dataset_id, user_id, "uploaded",
                f"file {entry.path!r} overwritten ({entry.declared_size} bytes)",
            )
            node = existing
        else:
            key = f"datasets/{dataset_id}/files/{new_id()}"
            self.store.put(key, data, now)
            node = self.core.attach_file(
                dataset_id, user_id, parent.id, name,
                size_bytes=entry.declared_size,
                checksum=entry.declared_checksum,
                object_key=key,
            )
        if self.store.exists(staging):
            self.store.purge(staging)
        return node

    def reset_entry(self, manifest_id: str, path: str) -> dict:
        manifest = self.manifest(manifest_id)
        entry = self._entry(manifest, path)
        if entry.status != "failed":
            raise IllegalTransition(f"only failed entries reset; {path!r} is {entry.status}")
        key = self.staging_key(manifest_id, path)
        if self.store.exists(key):
            self.store.truncate(key, self.clock.now())
        entry.status = "registered"
        entry.bytes_received = 0
        entry.last_chunk = None
        entry.failure = None
        return {"status": entry.status, "bytes_received": 0}

    def verify_manifest(self, manifest_id: str) -> dict:
        manifest = self.manifest(manifest_id)
        verified = sum(1 for e in manifest.entries.values() if e.status == "verified")
        failed = sum(1 for e in manifest.entries.values() if e.status == "failed")
        total = len(manifest.entries)
        pending = total - verified - failed
        return {
            "total": total,
            "verified": verified,
            "failed": failed,
            "pending": pending,
            "complete": failed == 0 and pending == 0,
        }

    def sync_manifest(self, manifest_id: str, client_view: dict | None = None) -> dict:
        """Authoritative snapshot; the client view is advisory and ignored."""
        del client_view
        return self.manifest(manifest_id).to_dict()

    # -- persistence ---------------------------------------------------------------------

    def dump(self) -> list[dict]:
        out = []
        for m in self.manifests.values():
            doc = m.to_dict()
            doc["entries"] = [
                dict(e.to_dict(), last_chunk=list(e.last_chunk) if e.last_chunk else None)
                for e in m.entries.values()
            ]
            out.append(doc)
        return out

    def load(self, rows: list[dict]) -> None:
        from .clock import utc

        self.manifests = {}
        for doc in rows:
            entries: dict[str, ManifestEntry] = {}
            for e in doc["entries"]:
                last = e.get("last_chunk")
                entries[e["path"]] = ManifestEntry(
                    path=e["path"], declared_size=e["declared_size"],
                    declared_checksum=e["declared_checksum"], status=e["status"],
                    bytes_received=e["bytes_received"],
                    last_chunk=(last[0], last[1], last[2]) if last else None,
                    failure=e.get("failure"), node_id=e.get("node_id"),
                )
            self.manifests[doc["id"]] = UploadManifest(
                id=doc["id"], dataset_id=doc["dataset_id"], created_by=doc["created_by"],
                entries=entries, state=doc["state"],
                created_at=utc(doc["created_at"]) if doc.get("created_at") else None,
            )
