"""Simulated versioned object store with storage tiers and a data lifecycle.

Every key maps to an append-only list of generations. Deleting a key marks
the newest generation (a delete marker, S3-style): reads then fail until the
mark is cleared by an undelete inside the 30-day window. Inactivity drives
objects down the tier ladder active -> archive -> deep_archive; the only way
back up is a restore request completed by lifecycle sweeps.

On-disk layout (documented for inspection; only the API is contract)::

    <root>/access_modes.json
    <root>/objects/<hh>/<sha256(key)>/meta.json
    <root>/objects/<hh>/<sha256(key)>/g000001.bin

Keys under ``published/`` are write-once: snapshots must survive every
lifecycle path byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .clock import isoformat, utc
from .errors import (
    ImmutableKey,
    NotArchived,
    NotDeleted,
    NotFound,
    PayerRequired,
    TierNotReadable,
    WindowExpired,
)

TIER_ACTIVE = "active"
TIER_ARCHIVE = "archive"
TIER_DEEP_ARCHIVE = "deep_archive"
TIERS = (TIER_ACTIVE, TIER_ARCHIVE, TIER_DEEP_ARCHIVE)

PUBLISHED_PREFIX = "published/"

UNDELETE_WINDOW_DAYS = 30

DEFAULT_RATES = {TIER_ACTIVE: 0.023, TIER_ARCHIVE: 0.004, TIER_DEEP_ARCHIVE: 0.001}

GIB = 1024 ** 3


@dataclass
class LifecyclePolicy:
    archive_after_days: int = 90
    deep_archive_after_days: int = 365
    undelete_window_days: int = UNDELETE_WINDOW_DAYS
    restore_delay_ticks: int = 2

    def __post_init__(self):
        if self.archive_after_days >= self.deep_archive_after_days:
            raise ValueError("archive_after_days must be below deep_archive_after_days")
        if self.undelete_window_days != UNDELETE_WINDOW_DAYS:
            raise ValueError("undelete window is fixed at 30 days")

    @classmethod
    def from_dict(cls, data: dict) -> "LifecyclePolicy":
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class Generation:
    file: str
    size: int
    digest: str | None  # None while a staging object is still being appended to
    written_at: datetime
    deleted_at: datetime | None = None


@dataclass
class StoredObject:
    key: str
    tier: str = TIER_ACTIVE
    last_accessed_at: datetime | None = None
    # restore: None, {"state": "pending", "ticks_remaining": n}, or {"state": "restored"}
    restore: dict | None = None
    generations: list[Generation] = field(default_factory=list)

    @property
    def latest(self) -> Generation | None:
        return self.generations[-1] if self.generations else None

    @property
    def live(self) -> bool:
        gen = self.latest
        return gen is not None and gen.deleted_at is None


@dataclass
class Transition:
    key: str
    from_tier: str
    to_tier: str
    reason: str  # "idle" | "restore"

    def to_dict(self) -> dict:
        return {"key": self.key, "from": self.from_tier, "to": self.to_tier, "reason": self.reason}


class ObjectStore:
    def __init__(
        self,
        root: str | Path,
        policy: LifecyclePolicy | None = None,
        rates: dict[str, float] | None = None,
    ):
        self.root = Path(root)
        self.policy = policy or LifecyclePolicy()
        self.rates = dict(rates or DEFAULT_RATES)
        self._objects_dir = self.root / "objects"
        self._objects_dir.mkdir(parents=True, exist_ok=True)
        self._index: dict[str, StoredObject] = {}
        self._requester_pays: set[str] = set()
        self._load()

    # -- loading / persistence --------------------------------------------------

    def _load(self) -> None:
        modes_file = self.root / "access_modes.json"
        if modes_file.exists():
            self._requester_pays = set(json.loads(modes_file.read_text()))
        for meta_path in self._objects_dir.glob("*/*/meta.json"):
            meta = json.loads(meta_path.read_text())
            obj = StoredObject(
                key=meta["key"],
                tier=meta["tier"],
                last_accessed_at=utc(meta["last_accessed_at"]) if meta["last_accessed_at"] else None,
                restore=meta["restore"],
                generations=[
                    Generation(
                        file=g["file"],
                        size=g["size"],
                        digest=g["digest"],
                        written_at=utc(g["written_at"]),
                        deleted_at=utc(g["deleted_at"]) if g["deleted_at"] else None,
                    )
                    for g in meta["generations"]
                ],
            )
            self._index[obj.key] = obj

    def _key_dir(self, key: str) -> Path:
        digest = hashlib.sha256(key.encode()).hexdigest()
        return self._objects_dir / digest[:2] / digest

    def _write_meta(self, obj: StoredObject) -> None:
        meta = {
            "key": obj.key,
            "tier": obj.tier,
            "last_accessed_at": isoformat(obj.last_accessed_at) if obj.last_accessed_at else None,
            "restore": obj.restore,
            "generations": [
                {
                    "file": g.file,
                    "size": g.size,
                    "digest": g.digest,
                    "written_at": isoformat(g.written_at),
                    "deleted_at": isoformat(g.deleted_at) if g.deleted_at else None,
                }
                for g in obj.generations
            ],
        }
        key_dir = self._key_dir(obj.key)
        key_dir.mkdir(parents=True, exist_ok=True)
        tmp = key_dir / "meta.json.tmp"
        tmp.write_text(json.dumps(meta, indent=1))
        os.replace(tmp, key_dir / "meta.json")

    def _save_modes(self) -> None:
        tmp = self.root / "access_modes.json.tmp"
        tmp.write_text(json.dumps(sorted(self._requester_pays)))
        os.replace(tmp, self.root / "access_modes.json")

    # -- requester-pays ----------------------------------------------------------

    def set_requester_pays(self, prefix: str, enabled: bool) -> None:
        if enabled:
            self._requester_pays.add(prefix)
        else:
            self._requester_pays.discard(prefix)
        self._save_modes()

    def _check_payer(self, key: str, payer_token: str | None) -> None:
        for prefix in self._requester_pays:
            if key.startswith(prefix) and not payer_token:
                raise PayerRequired(f"requester-pays prefix {prefix!r} needs a payer token")

    # -- core primitives ----------------------------------------------------------

    def put(self, key: str, data: bytes, now: datetime) -> StoredObject:
        obj = self._index.get(key)
        if key.startswith(PUBLISHED_PREFIX) and obj is not None:
            raise ImmutableKey(f"{key} is a published snapshot object and is write-once")
        if obj is None:
            obj = StoredObject(key=key)
            self._index[key] = obj
        gen = Generation(
            file=f"g{len(obj.generations) + 1:06d}.bin",
            size=len(data),
            digest=hashlib.sha256(data).hexdigest(),
            written_at=now,
        )
        key_dir = self._key_dir(key)
        key_dir.mkdir(parents=True, exist_ok=True)
        (key_dir / gen.file).write_bytes(data)
        obj.generations.append(gen)
        obj.last_accessed_at = now
        self._write_meta(obj)
        return obj

    def append(self, key: str, data: bytes, now: datetime) -> int:
        """Append bytes to the latest generation (staging objects only).

        Returns the generation's new size. The digest is left unset until
        ``compute_digest`` is called.
        """
        if key.startswith(PUBLISHED_PREFIX):
            raise ImmutableKey(f"{key} is write-once")
        obj = self._index.get(key)
        if obj is None or not obj.generations:
            obj = obj or StoredObject(key=key)
            self._index[key] = obj
            obj.generations.append(Generation(file="g000001.bin", size=0, digest=None, written_at=now))
            self._key_dir(key).mkdir(parents=True, exist_ok=True)
            (self._key_dir(key) / "g000001.bin").write_bytes(b"")
        gen = obj.generations[-1]
        if gen.deleted_at is not None:
            raise NotFound(f"{key} is deleted")
        with open(self._key_dir(key) / gen.file, "ab") as fh:
            fh.write(data)
        gen.size += len(data)
        gen.digest = None
        obj.last_accessed_at = now
        self._write_meta(obj)
        return gen.size

    def truncate(self, key: str, now: datetime) -> None:
        """Reset the latest generation to zero bytes (failed-upload reset)."""
        obj = self._require(key)
        gen = obj.generations[-1]
        (self._key_dir(key) / gen.file).write_bytes(b"")
        gen.size = 0
        gen.digest = None
        obj.last_accessed_at = now
        self._write_meta(obj)

    def compute_digest(self, key: str) -> str:
        """SHA-256 of the latest generation, streaming from disk."""
        obj = self._require(key)
        gen = obj.generations[-1]
        if gen.deleted_at is not None:
            raise NotFound(f"{key} is deleted")
        hasher = hashlib.sha256()
        with open(self._key_dir(key) / gen.file, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 20), b""):
                hasher.update(block)
        gen.digest = hasher.hexdigest()
        self._write_meta(obj)
        return gen.digest

    def _require(self, key: str) -> StoredObject:
        obj = self._index.get(key)
        if obj is None or not obj.generations:
            raise NotFound(f"no object at {key}")
        return obj

    def get(self, key: str, now: datetime, payer_token: str | None = None) -> bytes:
        obj = self._require(key)
        gen = obj.generations[-1]
        if gen.deleted_at is not None:
            raise NotFound(f"{key} is deleted")
        if obj.tier != TIER_ACTIVE:
            raise TierNotReadable(f"{key} is in {obj.tier}; request a restore first", tier=obj.tier)
        self._check_payer(key, payer_token)
        data = (self._key_dir(key) / gen.file).read_bytes()
        obj.last_accessed_at = now
        self._write_meta(obj)
        return data

    def peek(self, key: str) -> bytes:
        """Index-style read: latest live bytes with no tier/payer gate and no
        last_accessed bump. For platform-internal metadata (catalog pages);
        user-facing reads go through get()."""
        obj = self._require(key)
        gen = obj.generations[-1]
        if gen.deleted_at is not None:
            raise NotFound(f"{key} is deleted")
        return (self._key_dir(key) / gen.file).read_bytes()

    def exists(self, key: str) -> bool:
        obj = self._index.get(key)
        return obj is not None and obj.live

    def head(self, key: str) -> StoredObject:
        """Metadata without touching last_accessed."""
        return self._require(key)

    def size(self, key: str) -> int:
        obj = self._require(key)
        gen = obj.generations[-1]
        if gen.deleted_at is not None:
            raise NotFound(f"{key} is deleted")
        return gen.size

    def delete(self, key: str, now: datetime) -> None:
        if key.startswith(PUBLISHED_PREFIX):
            raise ImmutableKey(f"{key} is a published snapshot object")
        obj = self._require(key)
        gen = obj.generations[-1]
        if gen.deleted_at is not None:
            raise NotFound(f"{key} is already deleted")
        gen.deleted_at = now
        self._write_meta(obj)

    def undelete(self, key: str, now: datetime) -> StoredObject:
        obj = self._require(key)
        gen = obj.generations[-1]
        if gen.deleted_at is None:
            raise NotDeleted(f"{key} is live")
        age_days = (now - gen.deleted_at).total_seconds() / 86400.0
        if age_days > self.policy.undelete_window_days:
            raise WindowExpired(
                f"{key} was deleted {age_days:.1f} days ago; window is "
                f"{self.policy.undelete_window_days} days"
            )
        gen.deleted_at = None
        self._write_meta(obj)
        return obj

    def purge(self, key: str) -> None:
        """Administrative hard delete. Never reachable from the public API."""
        if key.startswith(PUBLISHED_PREFIX):
            raise ImmutableKey(f"{key} is a published snapshot object")
        obj = self._index.pop(key, None)
        if obj is None:
            raise NotFound(f"no object at {key}")
        key_dir = self._key_dir(key)
        for gen in obj.generations:
            try:
                (key_dir / gen.file).unlink()
            except FileNotFoundError:
                pass
        try:
            (key_dir / "meta.json").unlink()
        except FileNotFoundError:
            pass

    def list_keys(self, prefix: str = "") -> list[str]:
        return sorted(k for k, o in self._index.items() if k.startswith(prefix) and o.live)

    # -- lifecycle ----------------------------------------------------------------

    def request_restore(self, key: str, now: datetime) -> dict:
        obj = self._require(key)
        if obj.tier == TIER_ACTIVE:
            raise NotArchived(f"{key} is already in active storage")
        if obj.restore is None or obj.restore.get("state") != "pending":
            obj.restore = {"state": "pending", "ticks_remaining": self.policy.restore_delay_ticks}
            self._write_meta(obj)
        return dict(obj.restore)

    def apply_lifecycle(self, now: datetime, exempt_prefixes: set[str] | None = None) -> list[Transition]:
        """One sweep: demote idle objects, tick pending restores.

        ``exempt_prefixes`` shields keys referenced by open upload manifests.
        Published snapshot objects younger than the archive threshold are
        always exempt from demotion.
        """
        exempt_prefixes = exempt_prefixes or set()
        transitions: list[Transition] = []
        for key in sorted(self._index):
            obj = self._index[key]
            if not obj.generations:
                continue
            # restores tick on every sweep, whatever the timestamp
            if obj.restore and obj.restore.get("state") == "pending":
                obj.restore["ticks_remaining"] -= 1
                if obj.restore["ticks_remaining"] <= 0:
                    transitions.append(Transition(key, obj.tier, TIER_ACTIVE, "restore"))
                    obj.tier = TIER_ACTIVE
                    obj.restore = {"state": "restored"}
                    obj.last_accessed_at = now
                self._write_meta(obj)
                continue
            if any(key.startswith(p) for p in exempt_prefixes):
                continue
            if obj.last_accessed_at is None:
                continue
            idle_days = (now - obj.last_accessed_at).total_seconds() / 86400.0
            if key.startswith(PUBLISHED_PREFIX):
                age_days = (now - obj.generations[0].written_at).total_seconds() / 86400.0
                if age_days < self.policy.archive_after_days:
                    continue
            if idle_days >= self.policy.deep_archive_after_days:
                target = TIER_DEEP_ARCHIVE
            elif idle_days >= self.policy.archive_after_days:
                target = TIER_ARCHIVE
            else:
                continue
            if TIERS.index(target) > TIERS.index(obj.tier):
                transitions.append(Transition(key, obj.tier, target, "idle"))
                obj.tier = target
                if obj.restore and obj.restore.get("state") == "restored":
                    obj.restore = None
                self._write_meta(obj)
        return transitions

    # -- reporting ------------------------------------------------------------------

    def report(self, prefixes: list[str]) -> dict:
        """Stored bytes by tier (every generation counts) plus est. monthly cost."""
        bytes_by_tier = {tier: 0 for tier in TIERS}
        for key, obj in self._index.items():
            if not any(key.startswith(p) for p in prefixes):
                continue
            total = sum(g.size for g in obj.generations)
            bytes_by_tier[obj.tier] += total
        cost = sum((bytes_by_tier[t] / GIB) * self.rates[t] for t in TIERS)
        return {"bytes_by_tier": bytes_by_tier, "estimated_monthly_cost": cost}
