"""The Platform facade: one object wiring every module together.

Responsibilities, in order, for every public method: resolve the dataset,
run the access-control check, enforce the publication lock where it applies,
delegate to the owning module, persist the new state, and fire webhooks.
The REST layer and the tests both talk to this facade, so API handlers stay
one-liners and the behavior under test is the same with or without HTTP.

Concurrency: one re-entrant lock serializes all mutations (reads take it
too; operations are short and desk-scale). Webhook delivery happens on its
own thread and never blocks a request.
"""

from __future__ import annotations

import threading
from pathlib import Path

from .access import AccessControl, Principal, Role
from .clock import Clock, SystemClock, utc
from .core import CoreStore
from .discover import Discover
from .errors import DatasetLocked, Forbidden, InvalidSchema, NotFound
from .graph import GraphStore
from .ids import new_id
from .objectstore import LifecyclePolicy, ObjectStore
from .persistence import Backend, FileBackend
from .publishing import PublishingService
from .uploads import UploadService
from .webhooks import WebhookDispatcher

STATE_FORMAT = 1


class Platform:
    def __init__(
        self,
        data_dir: str | Path,
        clock: Clock | None = None,
        backend: Backend | None = None,
        policy: LifecyclePolicy | None = None,
        rates: dict[str, float] | None = None,
        webhook_transport=None,
        webhook_backoff_unit: float = 1.0,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock or SystemClock()
        self.core = CoreStore(self.clock)
        self.store = ObjectStore(self.data_dir / "store", policy=policy, rates=rates)
        self.access = AccessControl(self.core)
        self.graph = GraphStore(self.core)
        self.uploads = UploadService(self.core, self.store, self.clock)
        self.publishing = PublishingService(self.core, self.graph, self.store, self.clock)
        self.webhooks = WebhookDispatcher(
            self.clock,
            transport=webhook_transport,
            backoff_unit_seconds=webhook_backoff_unit,
            on_change=self._save_quietly,
        )
        self.discover = Discover(self.core, self.graph, self.publishing, self.store, self.clock)
        self.tokens: dict[str, str] = {}  # token -> user_id
        self.backend = backend or FileBackend(self.data_dir / "state.json")
        self.lock = threading.RLock()
        self._restore()

    # -- persistence -------------------------------------------------------------

    def _snapshot(self) -> dict:
        return {
            "format": STATE_FORMAT,
            "core": self.core.dump(),
            "access": self.access.dump(),
            "graph": self.graph.dump(),
            "uploads": self.uploads.dump(),
            "publishing": self.publishing.dump(),
            "webhooks": self.webhooks.dump(),
            "tokens": dict(self.tokens),
        }

    def _save(self) -> None:
        self.backend.save(self._snapshot())

    def _save_quietly(self) -> None:
        # called from the webhook worker thread after delivery-log appends
        with self.lock:
            try:
                self._save()
            except Exception:
                pass

    def _restore(self) -> None:
        state = self.backend.load()
        if not state:
            return
        self.core.load(state.get("core", {}))
        self.access.load(state.get("access", []))
        self.graph.load(state.get("graph", {}))
        self.uploads.load(state.get("uploads", []))
        self.publishing.load(state.get("publishing", {}))
        self.webhooks.load(state.get("webhooks", {}))
        self.tokens = dict(state.get("tokens", {}))

    # -- auth plumbing ------------------------------------------------------------

    def issue_token(self, user_id: str, token: str | None = None) -> str:
        with self.lock:
            self.core.user(user_id)
            token = token or new_id()
            self.tokens[token] = user_id
            self._save()
            return token

    def resolve_token(self, token: str) -> str | None:
        return self.tokens.get(token)

    def _workspace_of(self, dataset_id: str) -> str:
        return self.core.dataset(dataset_id, include_deleted=True).workspace_id

    def _ensure_unlocked(self, dataset_id: str) -> None:
        if self.core.dataset(dataset_id).locked:
            raise DatasetLocked("dataset is under publication review; withdraw or await a decision")

    def _fire(self, dataset_id: str, event: str, payload: dict) -> None:
        self.webhooks.dispatch(self._workspace_of(dataset_id), event, dataset_id, payload)

    # -- org chart / provisioning ---------------------------------------------------

    def create_user(self, display_name: str, email: str, token: str | None = None) -> dict:
        with self.lock:
            user = self.core.create_user(display_name, email)
            issued = token or new_id()
            self.tokens[issued] = user.id
            self._save()
            return dict(user.to_dict(), token=issued)

    def create_workspace(self, name: str) -> dict:
        with self.lock:
            ws = self.core.create_workspace(name)
            self._save()
            return ws.to_dict()

    def add_member(self, workspace_id: str, user_id: str) -> dict:
        with self.lock:
            self.core.add_member(workspace_id, user_id)
            self._save()
            return self.core.workspace(workspace_id).to_dict()

    def create_team(self, workspace_id: str, name: str) -> dict:
        with self.lock:
            team = self.core.create_team(workspace_id, name)
            self._save()
            return team.to_dict()

    def add_team_member(self, team_id: str, user_id: str) -> dict:
        with self.lock:
            self.core.add_team_member(team_id, user_id)
            self._save()
            return self.core.team(team_id).to_dict()

    def set_publishing_team(self, workspace_id: str, team_id: str) -> dict:
        with self.lock:
            self.core.set_publishing_team(workspace_id, team_id)
            self._save()
            return self.core.workspace(workspace_id).to_dict()

    def set_status_labels(self, workspace_id: str, labels: list[str]) -> dict:
        with self.lock:
            self.core.set_status_labels(workspace_id, labels)
            self._save()
            return self.core.workspace(workspace_id).to_dict()

    # -- datasets ----------------------------------------------------------------------

    def create_dataset(self, caller: str, workspace_id: str, name: str) -> dict:
        with self.lock:
            ds = self.core.create_dataset(workspace_id, caller, name)
            self.access.seed_owner(ds.id, caller)
            self._save()
            return ds.to_dict()

    def dataset_view(self, caller: str, dataset_id: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "view_files")
            ds = self.core.dataset(dataset_id)
            metrics = self.core.dataset_metrics(dataset_id, self.graph.record_count(dataset_id))
            view = ds.to_dict()
            view["metrics"] = metrics
            view["missing_publication_fields"] = self.core.validate_publication_fields(dataset_id)
            role = self.access.effective_role(caller, dataset_id)
            view["caller_role"] = role.wire if role else None
            request = self.publishing.request_for_dataset(dataset_id)
            view["publication_state"] = request.state if request else None
            view["publication"] = request.to_dict() if request else None
            view["versions"] = [v.to_dict() for v in self.publishing.dataset_versions(dataset_id)]
            return view

    def find_dataset(self, caller: str, name: str) -> dict:
        """Name lookup across every workspace the caller can see into."""
        with self.lock:
            for ds in self.core.datasets.values():
                if ds.deleted or ds.attributes.name != name:
                    continue
                if self.access.effective_role(caller, ds.id) is not None:
                    return self.dataset_view(caller, ds.id)
            raise NotFound(f"no visible dataset named {name!r}")

    def list_datasets(self, caller: str, workspace_id: str | None = None) -> list[dict]:
        with self.lock:
            out = []
            for ds in self.core.datasets.values():
                if ds.deleted:
                    continue
                if workspace_id and ds.workspace_id != workspace_id:
                    continue
                role = self.access.effective_role(caller, ds.id)
                if role is None:
                    continue
                row = ds.to_dict()
                row["caller_role"] = role.wire
                row["metrics"] = self.core.dataset_metrics(ds.id, self.graph.record_count(ds.id))
                out.append(row)
            return sorted(out, key=lambda d: d["created_at"])

    def update_attributes(self, caller: str, dataset_id: str, changes: dict) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "edit_attributes")
            self._ensure_unlocked(dataset_id)
            ds = self.core.set_attributes(dataset_id, caller, changes)
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": sorted(changes)})
            return ds.to_dict()

    def set_status(self, caller: str, dataset_id: str, label: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "change_status")
            self._ensure_unlocked(dataset_id)
            ds = self.core.set_status(dataset_id, caller, label)
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": ["status"], "status": label})
            return ds.to_dict()

    def set_collections(self, caller: str, dataset_id: str, collections: list[str]) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "edit_attributes")
            self._ensure_unlocked(dataset_id)
            ds = self.core.set_collections(dataset_id, caller, collections)
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": ["collections"]})
            return ds.to_dict()

    def set_access_mode(self, caller: str, dataset_id: str, mode: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "transfer_ownership")  # owner-only
            if mode not in ("standard", "requester_pays"):
                raise InvalidSchema(f"unknown access mode {mode!r}")
            ds = self.core.dataset(dataset_id)
            ds.access_mode = mode
            enabled = mode == "requester_pays"
            self.store.set_requester_pays(f"datasets/{dataset_id}/", enabled)
            self.store.set_requester_pays(f"published/{dataset_id}/", enabled)
            self.core.touch(dataset_id)
            self.core.log(dataset_id, caller, "attribute_changed", f"access mode set to {mode}")
            self._save()
            return ds.to_dict()

    def delete_dataset(self, caller: str, dataset_id: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "delete_dataset")
            self._ensure_unlocked(dataset_id)
            self.core.soft_delete_dataset(dataset_id, caller)
            self._save()
            return {"deleted": True}

    # -- tree -----------------------------------------------------------------------------

    def mutate_tree(self, caller: str, dataset_id: str, op: str, target: str, args: dict) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "edit_tree")
            self._ensure_unlocked(dataset_id)
            result = self.core.mutate_tree(dataset_id, caller, op, target, args)
            if op == "soft_delete":
                deleted_files = result
                self.graph.detach_file(dataset_id, caller, [n.id for n in deleted_files])
                payload = {"op": op, "nodes": [n.id for n in deleted_files]}
                body = {"deleted": [n.to_dict() for n in deleted_files]}
            else:
                payload = {"op": op, "node": result.id}
                body = {"node": result.to_dict()}
            self._save()
            self._fire(dataset_id, "dataset.updated", payload)
            return body

    def get_tree(self, caller: str, dataset_id: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "view_files")
            ds = self.core.dataset(dataset_id)

            def render(node_id: str) -> dict:
                node = self.core.node(node_id)
                out = {"id": node.id, "kind": node.kind, "name": node.name}
                if node.kind == "file":
                    out["size_bytes"] = node.size_bytes
                    out["checksum"] = node.checksum
                else:
                    out["children"] = [
                        render(c.id) for c in self.core.list_folder(dataset_id, node_id)
                    ]
                return out

            return render(ds.root_id)

    def query_activity(self, caller: str, dataset_id: str, from_seq: int = 1, limit: int = 100) -> list[dict]:
        with self.lock:
            self.access.require(caller, dataset_id, "view_files")
            return [e.to_dict() for e in self.core.query_activity(dataset_id, from_seq, limit)]

    def download_file(self, caller: str, dataset_id: str, node_id: str, payer_token: str | None = None) -> tuple[str, bytes]:
        with self.lock:
            self.access.require(caller, dataset_id, "download")
            node = self.core.node(node_id)
            if node.dataset_id != dataset_id or node.kind != "file" or not node.live:
                raise NotFound("no such live file in this dataset")
            data = self.store.get(node.object_key, self.clock.now(), payer_token=payer_token)
            return node.name, data

    # -- metadata graph ---------------------------------------------------------------------

    def define_model(self, caller: str, dataset_id: str, schema: dict) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "edit_metadata")
            self._ensure_unlocked(dataset_id)
            model = self.graph.define_model(dataset_id, caller, schema)
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": ["models"], "model": model.name})
            return model.to_dict()

    def list_models(self, caller: str, dataset_id: str) -> list[dict]:
        with self.lock:
            self.access.require(caller, dataset_id, "view_files")
            return [m.to_dict() for m in self.graph.dataset_models(dataset_id)]

    def create_record(self, caller: str, model_id: str, values: dict) -> dict:
        with self.lock:
            model = self.graph.model(model_id)
            self.access.require(caller, model.dataset_id, "edit_metadata")
            self._ensure_unlocked(model.dataset_id)
            record = self.graph.create_record(model_id, caller, values)
            self._save()
            self._fire(model.dataset_id, "dataset.updated", {"changed": ["records"]})
            return record.to_dict()

    def update_record(self, caller: str, record_id: str, values: dict) -> dict:
        with self.lock:
            record = self.graph.record(record_id)
            dataset_id = self.graph.model(record.model_id).dataset_id
            self.access.require(caller, dataset_id, "edit_metadata")
            self._ensure_unlocked(dataset_id)
            record = self.graph.update_record(record_id, caller, values)
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": ["records"]})
            return record.to_dict()

    def link(self, caller: str, dataset_id: str, kind: str, **kwargs) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "edit_metadata")
            self._ensure_unlocked(dataset_id)
            if kind == "record_record":
                rel = self.graph.link_records(
                    dataset_id, caller, kwargs["name"], kwargs["from_record"], kwargs["to_record"]
                )
                result = rel.to_dict()
            elif kind == "record_file":
                record = self.graph.link_file(
                    dataset_id, caller, kwargs["record_id"], kwargs["node_id"]
                )
                result = record.to_dict()
            else:
                raise InvalidSchema(f"unknown link kind {kind!r}")
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": ["links"]})
            return result

    def query_records(
        self, caller: str, dataset_id: str, model_name: str,
        predicate: list[dict] | None = None, traverse: dict | None = None,
    ) -> list[dict]:
        with self.lock:
            self.access.require(caller, dataset_id, "view_files")
            return [r.to_dict() for r in self.graph.query_records(dataset_id, model_name, predicate, traverse)]

    def graph_view(self, caller: str, dataset_id: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "view_files")
            return self.graph.graph_dump(dataset_id)

    # -- uploads -------------------------------------------------------------------------------

    def create_manifest(self, caller: str, dataset_id: str, entries: list[dict]) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "upload_files")
            self._ensure_unlocked(dataset_id)
            manifest = self.uploads.create_manifest(dataset_id, caller, entries)
            self._save()
            return manifest.to_dict()

    def upload_chunk(self, caller: str, manifest_id: str, path: str, offset: int, data: bytes) -> dict:
        with self.lock:
            manifest = self.uploads.manifest(manifest_id)
            self.access.require(caller, manifest.dataset_id, "upload_files")
            result = self.uploads.upload_chunk(manifest_id, path, offset, data)
            self._save()
            return result

    def finalize_entry(self, caller: str, manifest_id: str, path: str) -> dict:
        with self.lock:
            manifest = self.uploads.manifest(manifest_id)
            self.access.require(caller, manifest.dataset_id, "upload_files")
            self._ensure_unlocked(manifest.dataset_id)
            was_open = manifest.state == "open"
            result = self.uploads.finalize_entry(manifest_id, path, caller)
            self._save()
            if was_open and manifest.state == "finalized":
                self._fire(
                    manifest.dataset_id, "manifest.completed",
                    {"manifest_id": manifest_id, "entries": len(manifest.entries)},
                )
            return result

    def reset_entry(self, caller: str, manifest_id: str, path: str) -> dict:
        with self.lock:
            manifest = self.uploads.manifest(manifest_id)
            self.access.require(caller, manifest.dataset_id, "upload_files")
            result = self.uploads.reset_entry(manifest_id, path)
            self._save()
            return result

    def verify_manifest(self, caller: str, manifest_id: str) -> dict:
        with self.lock:
            manifest = self.uploads.manifest(manifest_id)
            self.access.require(caller, manifest.dataset_id, "view_files")
            return self.uploads.verify_manifest(manifest_id)

    def sync_manifest(self, caller: str, manifest_id: str, client_view: dict | None = None) -> dict:
        with self.lock:
            manifest = self.uploads.manifest(manifest_id)
            self.access.require(caller, manifest.dataset_id, "view_files")
            return self.uploads.sync_manifest(manifest_id, client_view)

    # -- grants ----------------------------------------------------------------------------------

    def grant(self, caller: str, dataset_id: str, principal_kind: str, principal_id: str, role: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "manage_grants")
            principal = Principal(principal_kind, principal_id)
            self._validate_principal(dataset_id, principal)
            grant = self.access.grant(dataset_id, principal, Role.from_wire(role))
            self.core.log(
                dataset_id, caller, "grant_changed",
                f"{principal_kind} granted {grant.role.wire}",
            )
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": ["grants"]})
            return {
                "dataset_id": dataset_id,
                "principal": {"kind": principal.kind, "id": principal.id},
                "role": grant.role.wire,
            }

    def _validate_principal(self, dataset_id: str, principal: Principal) -> None:
        workspace_id = self._workspace_of(dataset_id)
        if principal.kind == "user":
            self.core.user(principal.id)
        elif principal.kind == "team":
            team = self.core.team(principal.id)
            if team.workspace_id != workspace_id:
                raise NotFound("team belongs to another workspace")
        else:  # workspace
            if principal.id != workspace_id:
                raise NotFound("workspace grants must target the dataset's own workspace")

    def revoke(self, caller: str, dataset_id: str, principal_kind: str, principal_id: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "manage_grants")
            removed = self.access.revoke(dataset_id, Principal(principal_kind, principal_id))
            self.core.log(dataset_id, caller, "grant_changed", f"{principal_kind} grant revoked")
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": ["grants"]})
            return {"revoked": removed}

    def transfer_ownership(self, caller: str, dataset_id: str, new_owner_id: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "transfer_ownership")
            self.access.transfer_ownership(dataset_id, new_owner_id)
            ds = self.core.dataset(dataset_id)
            ds.owner_id = new_owner_id
            self.core.touch(dataset_id)
            self.core.log(dataset_id, caller, "grant_changed", f"ownership transferred to {new_owner_id}")
            self._save()
            self._fire(dataset_id, "dataset.updated", {"changed": ["owner"]})
            return ds.to_dict()

    def list_grants(self, caller: str, dataset_id: str) -> list[dict]:
        with self.lock:
            self.access.require(caller, dataset_id, "manage_grants")
            return [
                {
                    "principal": {"kind": g.principal.kind, "id": g.principal.id},
                    "role": g.role.wire,
                }
                for g in self.access.grants_for(dataset_id)
            ]

    # -- publishing ---------------------------------------------------------------------------------

    def submit_for_review(self, caller: str, dataset_id: str, justification: str | None = None) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "submit_publication")
            req = self.publishing.submit_for_review(dataset_id, caller, justification)
            self._save()
            return req.to_dict()

    def withdraw(self, caller: str, request_id: str) -> dict:
        with self.lock:
            req = self.publishing.withdraw(request_id, caller)
            self._save()
            return req.to_dict()

    def review_queue(self, caller: str, workspace_id: str) -> list[dict]:
        with self.lock:
            if not self.core.is_on_publishing_team(caller, workspace_id):
                raise Forbidden("the review queue is visible to the publishing team")
            out = []
            for req in self.publishing.review_queue(workspace_id):
                row = req.to_dict()
                ds = self.core.dataset(req.dataset_id, include_deleted=True)
                row["dataset_name"] = ds.attributes.name
                row["metrics"] = self.core.dataset_metrics(
                    req.dataset_id, self.graph.record_count(req.dataset_id)
                )
                out.append(row)
            return out

    def claim_review(self, caller: str, request_id: str) -> dict:
        with self.lock:
            req = self.publishing.claim(request_id, caller)
            self._save()
            return req.to_dict()

    def review(self, caller: str, request_id: str, decision: str, note: str = "") -> dict:
        with self.lock:
            req = self.publishing.review(request_id, caller, decision, note)
            self._save()
            self._fire(
                req.dataset_id, "publication.decided",
                {"request_id": req.id, "decision": decision, "note": note},
            )
            return req.to_dict()

    def publish(self, caller: str, request_id: str, embargo_days: int = 0) -> dict:
        with self.lock:
            version = self.publishing.publish(request_id, caller, embargo_days)
            self._save()
            self._fire(
                version.dataset_id, "version.published",
                {"version": version.version, "doi": version.doi},
            )
            return version.to_dict()

    def list_versions(self, caller: str, dataset_id: str) -> list[dict]:
        with self.lock:
            self.access.require(caller, dataset_id, "view_files")
            return [v.to_dict() for v in self.publishing.dataset_versions(dataset_id)]

    def rehydrate(self, caller: str, dataset_id: str, version: int, destination: str | Path) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "download")
            path = self.publishing.rehydrate(dataset_id, version, destination)
            self._save()
            return {"destination": str(path)}

    def resolve_doi(self, doi: str) -> str:
        with self.lock:
            return self.publishing.resolve_doi(doi)

    # -- storage / lifecycle --------------------------------------------------------------------------

    def storage_report(self, caller: str, dataset_id: str) -> dict:
        with self.lock:
            self.access.require(caller, dataset_id, "view_files")
            self.core.dataset(dataset_id, include_deleted=True)
            return self.store.report([f"datasets/{dataset_id}/", f"published/{dataset_id}/"])

    def sweep(self) -> dict:
        """Clock-driven maintenance: lifecycle transitions + embargo releases."""
        with self.lock:
            now = self.clock.now()
            transitions = self.store.apply_lifecycle(
                now, exempt_prefixes=self.uploads.open_staging_prefixes()
            )
            released = self.publishing.release_embargo(now)
            self._save()
            return {
                "transitions": [t.to_dict() for t in transitions],
                "embargo_released": [v.to_dict() for v in released],
            }

    # -- webhooks ----------------------------------------------------------------------------------------

    def register_webhook(self, caller: str, workspace_id: str, url: str, events: list[str], secret: str) -> dict:
        with self.lock:
            if not self.core.is_workspace_member(caller, workspace_id):
                raise Forbidden("webhooks are registered by workspace members")
            hook = self.webhooks.register(workspace_id, url, events, secret)
            self._save()
            return hook.to_dict()

    def webhook_deliveries(self, caller: str, webhook_id: str) -> list[dict]:
        with self.lock:
            hook = self.webhooks.webhooks.get(webhook_id)
            if hook is None:
                raise NotFound(f"no webhook {webhook_id}")
            if not self.core.is_workspace_member(caller, hook.workspace_id):
                raise Forbidden("delivery logs are visible to workspace members")
            return self.webhooks.delivery_log(webhook_id)

    # -- clock control (manual-clock deployments only) ----------------------------------------------------

    def set_clock(self, ts: str) -> dict:
        from .clock import ManualClock

        with self.lock:
            if not isinstance(self.clock, ManualClock):
                raise InvalidSchema("the server is running on a real clock")
            self.clock.set(utc(ts))
            return {"now": ts}

    def advance_clock(self, days: float = 0, hours: float = 0, seconds: float = 0) -> dict:
        from .clock import ManualClock, isoformat

        with self.lock:
            if not isinstance(self.clock, ManualClock):
                raise InvalidSchema("the server is running on a real clock")
            now = self.clock.advance(days=days, hours=hours, seconds=seconds)
            return {"now": isoformat(now)}
