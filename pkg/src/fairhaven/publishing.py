"""Publishing pipeline: peer review, versioned snapshots, DOIs, embargo.

The review workflow is a small explicit state machine; ``transition`` is the
single source of truth for which (state, event) pairs are legal, and every
other rule (who may fire an event, one in-flight request per dataset, the
dataset lock) layers on top of it.

Publishing exports an immutable snapshot under ``published/<id>/<version>/``:
a ``manifest.json`` describing the version, the verified file tree under
``files/``, the serialized metadata graph under ``metadata/``, and
``readme.md``/``changelog.md``. The object store enforces write-once on that
prefix, so a snapshot can never change after the fact. DOIs resolve to the
snapshot's manifest key — a level of indirection that survives the serving
platform moving or going away.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from .clock import Clock, isoformat
from .core import CoreStore
from .errors import (
    EmbargoTooLong,
    EmptyDataset,
    Forbidden,
    IllegalTransition,
    JustificationRequired,
    MissingFields,
    NotOnPublishingTeam,
    PendingRestore,
    SelfReview,
    UnknownDOI,
    UnknownVersion,
)
from .graph import GraphStore
from .ids import new_id
from .objectstore import TIER_ACTIVE, ObjectStore

STATES = ("draft", "requested", "in_review", "rejected", "accepted", "published")
EVENTS = ("submit", "claim", "accept", "reject", "resubmit", "publish", "withdraw")

# the complete set of legal edges; everything else is IllegalTransition
TRANSITIONS: dict[tuple[str, str], str] = {
    ("draft", "submit"): "requested",
    ("requested", "claim"): "in_review",
    ("in_review", "accept"): "accepted",
    ("in_review", "reject"): "rejected",
    ("rejected", "resubmit"): "requested",
    ("accepted", "publish"): "published",
    ("requested", "withdraw"): "draft",
}

MAX_EMBARGO_DAYS = 365
FREE_TIER_BYTES = 25 * 1024 ** 3  # justification required above this

IN_FLIGHT_STATES = ("requested", "in_review", "accepted")


def transition(state: str, event: str) -> str:
    """Apply one state-machine event or raise IllegalTransition."""
    if state not in STATES:
        raise IllegalTransition(f"unknown state {state!r}")
    if event not in EVENTS:
        raise IllegalTransition(f"unknown event {event!r}")
    try:
        return TRANSITIONS[(state, event)]
    except KeyError:
        raise IllegalTransition(f"event {event!r} is illegal in state {state!r}") from None


@dataclass
class PublicationRequest:
    id: str
    dataset_id: str
    state: str
    submitted_by: str
    reviewer_note: str | None = None
    decided_by: str | None = None
    justification: str | None = None
    created_at: datetime | None = None
    updated_at: datetime | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "dataset_id": self.dataset_id,
            "state": self.state,
            "submitted_by": self.submitted_by,
            "reviewer_note": self.reviewer_note,
            "decided_by": self.decided_by,
            "justification": self.justification,
            "created_at": isoformat(self.created_at) if self.created_at else None,
            "updated_at": isoformat(self.updated_at) if self.updated_at else None,
        }


@dataclass
class DatasetVersion:
    dataset_id: str
    version: int
    doi: str
    created_at: datetime
    snapshot_prefix: str
    file_count: int
    total_size_bytes: int
    record_count: int
    embargo_until: datetime | None = None
    public: bool = False
    # attributes frozen at publish time, so catalog search never reads draft state
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "version": self.version,
            "doi": self.doi,
            "created_at": isoformat(self.created_at),
            "snapshot_prefix": self.snapshot_prefix,
            "file_count": self.file_count,
            "total_size_bytes": self.total_size_bytes,
            "record_count": self.record_count,
            "embargo_until": isoformat(self.embargo_until) if self.embargo_until else None,
            "public": self.public,
            "summary": dict(self.summary),
        }


class DOIClient:
    """Pluggable DOI registrar. The bundled mock mints under a test prefix."""

    def mint(self, dataset_id: str, version: int) -> str:
        raise NotImplementedError


class MockDOIClient(DOIClient):
    PREFIX = "10.70000"

    def mint(self, dataset_id: str, version: int) -> str:
        return f"{self.PREFIX}/fh.{dataset_id[:8]}.v{version}"


class PublishingService:
    def __init__(
        self,
        core: CoreStore,
        graph: GraphStore,
        store: ObjectStore,
        clock: Clock,
        doi_client: DOIClient | None = None,
    ):
        self.core = core
        self.graph = graph
        self.store = store
        self.clock = clock
        self.doi_client = doi_client or MockDOIClient()
        self.requests: dict[str, PublicationRequest] = {}
        self.versions: dict[str, list[DatasetVersion]] = {}
        self.doi_registry: dict[str, str] = {}  # doi -> manifest.json key

    # -- lookups -------------------------------------------------------------------

    def request(self, request_id: str) -> PublicationRequest:
        req = self.requests.get(request_id)
        if req is None:
            raise IllegalTransition(f"no publication request {request_id}")
        return req

    def request_for_dataset(self, dataset_id: str) -> PublicationRequest | None:
        candidates = [r for r in self.requests.values() if r.dataset_id == dataset_id]
        if not candidates:
            return None
        return max(candidates, key=lambda r: (r.created_at, r.id))

    def dataset_versions(self, dataset_id: str) -> list[DatasetVersion]:
        return list(self.versions.get(dataset_id, []))

    def version(self, dataset_id: str, number: int) -> DatasetVersion:
        for v in self.versions.get(dataset_id, []):
            if v.version == number:
                return v
        raise UnknownVersion(f"dataset has no version {number}")

    def review_queue(self, workspace_id: str) -> list[PublicationRequest]:
        out = []
        for req in self.requests.values():
            if req.state in ("requested", "in_review"):
                ds = self.core.dataset(req.dataset_id, include_deleted=True)
                if ds.workspace_id == workspace_id:
                    out.append(req)
        return sorted(out, key=lambda r: (r.created_at, r.id))

    # -- workflow ---------------------------------------------------------------------

    def _fire(self, req: PublicationRequest, event: str) -> None:
        req.state = transition(req.state, event)
        req.updated_at = self.clock.now()

    def submit_for_review(
        self, dataset_id: str, user_id: str, justification: str | None = None
    ) -> PublicationRequest:
        ds = self.core.dataset(dataset_id)
        if ds.owner_id != user_id:
            raise Forbidden("only the dataset owner may submit for review")
        missing = self.core.validate_publication_fields(dataset_id)
        if missing:
            raise MissingFields(
                f"publication needs: {', '.join(missing)}", fields=missing
            )
        metrics = self.core.dataset_metrics(dataset_id, self.graph.record_count(dataset_id))
        if metrics["file_count"] == 0:
            raise EmptyDataset("a dataset needs at least one verified file to publish")
        if metrics["total_size_bytes"] > FREE_TIER_BYTES and not (justification or "").strip():
            raise JustificationRequired(
                f"datasets above {FREE_TIER_BYTES} bytes need a justification to publish",
                threshold_bytes=FREE_TIER_BYTES,
            )
        current = self.request_for_dataset(dataset_id)
        if current is not None and current.state in IN_FLIGHT_STATES:
            raise IllegalTransition("a publication request is already in flight")
        now = self.clock.now()
        if current is not None and current.state in ("draft", "rejected"):
            req = current
            self._fire(req, "submit" if req.state == "draft" else "resubmit")
            req.submitted_by = user_id
            req.justification = (justification or "").strip() or None
        else:
            req = PublicationRequest(
                id=new_id(), dataset_id=dataset_id, state="draft", submitted_by=user_id,
                justification=(justification or "").strip() or None,
                created_at=now, updated_at=now,
            )
            self.requests[req.id] = req
            self._fire(req, "submit")
        ds.locked = True
        self.core.log(dataset_id, user_id, "publish_event", "submitted for review")
        return req

    def withdraw(self, request_id: str, user_id: str) -> PublicationRequest:
        req = self.request(request_id)
        ds = self.core.dataset(req.dataset_id)
        if ds.owner_id != user_id:
            raise Forbidden("only the dataset owner may withdraw a request")
        self._fire(req, "withdraw")
        ds.locked = False
        self.core.log(req.dataset_id, user_id, "publish_event", "request withdrawn")
        return req

    def _require_reviewer(self, req: PublicationRequest, reviewer_id: str) -> None:
        ds = self.core.dataset(req.dataset_id, include_deleted=True)
        if not self.core.is_on_publishing_team(reviewer_id, ds.workspace_id):
            raise NotOnPublishingTeam("reviews come from the workspace publishing team")
        if reviewer_id == req.submitted_by:
            raise SelfReview("submitters cannot review their own request")

    def claim(self, request_id: str, reviewer_id: str) -> PublicationRequest:
        req = self.request(request_id)
        self._require_reviewer(req, reviewer_id)
        self._fire(req, "claim")
        self.core.log(req.dataset_id, reviewer_id, "publish_event", "review claimed")
        return req

    def review(
        self, request_id: str, reviewer_id: str, decision: str, note: str = ""
    ) -> PublicationRequest:
        if decision not in ("accept", "reject"):
            raise IllegalTransition(f"unknown decision {decision!r}")
        req = self.request(request_id)
        self._require_reviewer(req, reviewer_id)
        if req.state == "requested":
            self._fire(req, "claim")
        self._fire(req, decision)
        req.decided_by = reviewer_id
        req.reviewer_note = note or None
        if req.state == "rejected":
            self.core.dataset(req.dataset_id).locked = False
        self.core.log(req.dataset_id, reviewer_id, "publish_event", f"request {req.state}")
        return req

    def publish(
        self, request_id: str, publisher_id: str, embargo_days: int = 0
    ) -> DatasetVersion:
        req = self.request(request_id)
        ds = self.core.dataset(req.dataset_id)
        if not self.core.is_on_publishing_team(publisher_id, ds.workspace_id):
            raise NotOnPublishingTeam("publishing is done by the workspace publishing team")
        if not 0 <= int(embargo_days) <= MAX_EMBARGO_DAYS:
            raise EmbargoTooLong(
                f"embargo must be 0-{MAX_EMBARGO_DAYS} days", max_days=MAX_EMBARGO_DAYS
            )
        if req.state != "accepted":
            raise IllegalTransition(f"publish requires an accepted request, not {req.state!r}")
        now = self.clock.now()
        number = len(self.versions.get(ds.id, [])) + 1
        doi = self.doi_client.mint(ds.id, number)
        if doi in self.doi_registry:
            raise IllegalTransition(f"DOI {doi} was already minted")
        embargo_until = now + timedelta(days=int(embargo_days)) if int(embargo_days) > 0 else None
        prefix = self.export_snapshot(ds.id, number, doi, now, embargo_until)
        attrs = ds.attributes
        version = DatasetVersion(
            dataset_id=ds.id, version=number, doi=doi, created_at=now,
            snapshot_prefix=prefix,
            file_count=len(self.core.live_files(ds.id)),
            total_size_bytes=sum(n.size_bytes for _, n in self.core.live_files(ds.id)),
            record_count=self.graph.record_count(ds.id),
            embargo_until=embargo_until, public=embargo_until is None,
            summary={
                "name": attrs.name,
                "description": attrs.description or "",
                "license": attrs.license or "",
                "tags": sorted(attrs.tags),
                "contributors": [c.to_dict() for c in attrs.contributors],
            },
        )
        self.versions.setdefault(ds.id, []).append(version)
        self.doi_registry[doi] = f"{prefix}manifest.json"
        self._fire(req, "publish")
        req.decided_by = req.decided_by or publisher_id
        ds.locked = False
        self.core.log(
            ds.id, publisher_id, "publish_event",
            f"version {number} published (doi {doi})",
        )
        return version

    # -- snapshot export ------------------------------------------------------------------

    def _doc_bytes(self, dataset_id: str, name: str) -> bytes:
        """Bytes of a root-level doc file (readme.md / changelog.md), or empty stub."""
        try:
            node = self.core.resolve_path(dataset_id, name)
        except Exception:
            return b""
        if node.kind != "file" or not node.object_key:
            return b""
        return self.store.get(node.object_key, self.clock.now())

    def build_manifest(
        self,
        dataset_id: str,
        number: int,
        doi: str,
        created_at: datetime,
        embargo_until: datetime | None,
    ) -> dict:
        ds = self.core.dataset(dataset_id, include_deleted=True)
        attrs = ds.attributes
        files = []
        total = 0
        for path, node in self.core.live_files(dataset_id):
            files.append({"path": path, "size": node.size_bytes, "sha256": node.checksum})
            total += node.size_bytes
        manifest = {
            "id": ds.id,
            "name": attrs.name,
            "version": number,
            "doi": doi,
            "created_at": isoformat(created_at),
            "description": attrs.description or "",
            "license": attrs.license or "",
            "tags": sorted(attrs.tags),
            "contributors": [c.to_dict() for c in attrs.contributors],
            "metrics": {
                "files": len(files),
                "size_bytes": total,
                "records": self.graph.record_count(dataset_id),
            },
            "files": files,
            "readme": "readme.md",
            "changelog": "changelog.md",
        }
        if embargo_until is not None:
            manifest["embargo_until"] = isoformat(embargo_until)
        return manifest

    def export_snapshot(
        self,
        dataset_id: str,
        number: int,
        doi: str,
        created_at: datetime,
        embargo_until: datetime | None,
    ) -> str:
        """Write the immutable snapshot object set; returns its key prefix."""
        prefix = f"published/{dataset_id}/{number}/"
        now = self.clock.now()
        objects: dict[str, bytes] = {}
        manifest = self.build_manifest(dataset_id, number, doi, created_at, embargo_until)
        objects["manifest.json"] = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
        for path, node in self.core.live_files(dataset_id):
            data = self.store.get(node.object_key, now) if node.object_key else b""
            objects[f"files/{path}"] = data
        for rel_path, data in self.graph.serialize_graph(dataset_id).items():
            objects[rel_path] = data
        objects["readme.md"] = self._doc_bytes(dataset_id, "readme.md")
        objects["changelog.md"] = self._doc_bytes(dataset_id, "changelog.md")
        for rel_path in sorted(objects):
            self.store.put(prefix + rel_path, objects[rel_path], now)
        return prefix

    # -- DOI resolution ----------------------------------------------------------------------

    def resolve_doi(self, doi: str) -> str:
        try:
            return self.doi_registry[doi]
        except KeyError:
            raise UnknownDOI(f"no registered DOI {doi!r}") from None

    # -- embargo ---------------------------------------------------------------------------------

    def release_embargo(self, now: datetime) -> list[DatasetVersion]:
        released = []
        for versions in self.versions.values():
            for v in versions:
                if not v.public and v.embargo_until is not None and v.embargo_until <= now:
                    v.public = True
                    released.append(v)
        return released

    # -- rehydration -----------------------------------------------------------------------------

    def rehydrate(self, dataset_id: str, number: int, destination: str | Path) -> Path:
        """Reconstruct files/ and metadata/ of a version under ``destination``."""
        version = self.version(dataset_id, number)
        now = self.clock.now()
        keys = [
            k
            for k in self.store.list_keys(version.snapshot_prefix)
            if k[len(version.snapshot_prefix):].startswith(("files/", "metadata/"))
        ]
        waiting = []
        for key in keys:
            if self.store.head(key).tier != TIER_ACTIVE:
                self.store.request_restore(key, now)
                waiting.append(key)
        if waiting:
            raise PendingRestore(
                f"{len(waiting)} snapshot object(s) are being restored; retry later",
                pending=len(waiting),
            )
        destination = Path(destination)
        for key in keys:
            rel = key[len(version.snapshot_prefix):]
            target = destination / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(self.store.get(key, now))
        return destination

    # -- persistence -------------------------------------------------------------------------------

    def dump(self) -> dict:
        return {
            "requests": [r.to_dict() for r in self.requests.values()],
            "versions": {ds: [v.to_dict() for v in vs] for ds, vs in self.versions.items()},
            "doi_registry": dict(self.doi_registry),
        }

    def load(self, data: dict) -> None:
        from .clock import utc

        self.requests = {}
        for r in data.get("requests", []):
            self.requests[r["id"]] = PublicationRequest(
                id=r["id"], dataset_id=r["dataset_id"], state=r["state"],
                submitted_by=r["submitted_by"], reviewer_note=r["reviewer_note"],
                decided_by=r["decided_by"], justification=r.get("justification"),
                created_at=utc(r["created_at"]) if r["created_at"] else None,
                updated_at=utc(r["updated_at"]) if r["updated_at"] else None,
            )
        self.versions = {}
        for ds, rows in data.get("versions", {}).items():
            self.versions[ds] = [
                DatasetVersion(
                    dataset_id=v["dataset_id"], version=v["version"], doi=v["doi"],
                    created_at=utc(v["created_at"]), snapshot_prefix=v["snapshot_prefix"],
                    file_count=v["file_count"], total_size_bytes=v["total_size_bytes"],
                    record_count=v["record_count"],
                    embargo_until=utc(v["embargo_until"]) if v["embargo_until"] else None,
                    public=v["public"], summary=dict(v.get("summary") or {}),
                )
                for v in rows
            ]
        self.doi_registry = dict(data.get("doi_registry", {}))
