"""REST surface: thin FastAPI handlers delegating to the Platform facade.

Conventions: everything lives under /v1 and speaks JSON, except chunk
payloads (raw request body) and snapshot downloads (tar stream). Bearer
tokens resolve to user ids; Discover routes and DOI resolution are public;
provisioning, clock control and the maintenance sweep sit under /v1/admin
behind a separate admin token. Domain errors map to HTTP through the
``http_status`` carried by each error class — handlers never translate.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import Body, FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse, RedirectResponse

from .errors import FairhavenError, InvalidSchema, NotFound, Unauthorized
from .service import Platform


def create_app(platform: Platform, admin_token: str, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="fairhaven", docs_url=None, redoc_url=None, openapi_url=None)

    @app.exception_handler(FairhavenError)
    async def _domain_error(_request: Request, exc: FairhavenError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_payload())

    # -- auth helpers -----------------------------------------------------------

    def bearer(request: Request) -> str | None:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return None

    def caller(request: Request) -> str:
        token = bearer(request)
        if not token:
            raise Unauthorized("missing bearer token")
        user_id = platform.resolve_token(token)
        if user_id is None:
            raise Unauthorized("unknown token")
        return user_id

    def require_admin(request: Request) -> None:
        if bearer(request) != admin_token:
            raise Unauthorized("admin token required")

    # -- admin / provisioning -----------------------------------------------------

    @app.post("/v1/admin/users")
    async def admin_create_user(request: Request, body: dict = Body(...)):
        require_admin(request)
        return platform.create_user(
            body.get("display_name", ""), body.get("email", ""), body.get("token")
        )

    @app.post("/v1/admin/workspaces")
    async def admin_create_workspace(request: Request, body: dict = Body(...)):
        require_admin(request)
        return platform.create_workspace(body.get("name", ""))

    @app.post("/v1/admin/workspaces/{workspace_id}/members")
    async def admin_add_member(workspace_id: str, request: Request, body: dict = Body(...)):
        require_admin(request)
        return platform.add_member(workspace_id, body["user_id"])

    @app.post("/v1/admin/workspaces/{workspace_id}/teams")
    async def admin_create_team(workspace_id: str, request: Request, body: dict = Body(...)):
        require_admin(request)
        return platform.create_team(workspace_id, body.get("name", ""))

    @app.post("/v1/admin/teams/{team_id}/members")
    async def admin_add_team_member(team_id: str, request: Request, body: dict = Body(...)):
        require_admin(request)
        return platform.add_team_member(team_id, body["user_id"])

    @app.post("/v1/admin/workspaces/{workspace_id}/publishing-team")
    async def admin_set_publishing_team(workspace_id: str, request: Request, body: dict = Body(...)):
        require_admin(request)
        return platform.set_publishing_team(workspace_id, body["team_id"])

    @app.post("/v1/admin/workspaces/{workspace_id}/status-labels")
    async def admin_set_status_labels(workspace_id: str, request: Request, body: dict = Body(...)):
        require_admin(request)
        return platform.set_status_labels(workspace_id, body.get("labels", []))

    @app.post("/v1/admin/clock")
    async def admin_clock(request: Request, body: dict = Body(...)):
        require_admin(request)
        if "set" in body:
            return platform.set_clock(body["set"])
        return platform.advance_clock(
            days=float(body.get("days", 0)),
            hours=float(body.get("hours", 0)),
            seconds=float(body.get("seconds", 0)),
        )

    @app.post("/v1/admin/sweep")
    async def admin_sweep(request: Request):
        require_admin(request)
        return platform.sweep()

    # -- identity ---------------------------------------------------------------------

    @app.get("/v1/me")
    async def me(request: Request):
        user_id = caller(request)
        return platform.core.user(user_id).to_dict()

    @app.get("/v1/workspaces")
    async def my_workspaces(request: Request):
        user_id = caller(request)
        return [
            w.to_dict()
            for w in platform.core.workspaces.values()
            if user_id in w.members
        ]

    # -- datasets -----------------------------------------------------------------------

    @app.post("/v1/datasets")
    async def create_dataset(request: Request, body: dict = Body(...)):
        return platform.create_dataset(caller(request), body["workspace_id"], body.get("name", ""))

    @app.get("/v1/datasets")
    async def list_datasets(
        request: Request,
        name: str | None = Query(default=None),
        workspace_id: str | None = Query(default=None),
    ):
        user_id = caller(request)
        if name is not None:
            return platform.find_dataset(user_id, name)
        return platform.list_datasets(user_id, workspace_id)

    @app.get("/v1/datasets/{dataset_id}")
    async def get_dataset(dataset_id: str, request: Request):
        return platform.dataset_view(caller(request), dataset_id)

    @app.patch("/v1/datasets/{dataset_id}")
    async def patch_dataset(dataset_id: str, request: Request, body: dict = Body(...)):
        return platform.update_attributes(caller(request), dataset_id, body)

    @app.delete("/v1/datasets/{dataset_id}")
    async def delete_dataset(dataset_id: str, request: Request):
        return platform.delete_dataset(caller(request), dataset_id)

    @app.post("/v1/datasets/{dataset_id}/status")
    async def set_status(dataset_id: str, request: Request, body: dict = Body(...)):
        return platform.set_status(caller(request), dataset_id, body.get("status", ""))

    @app.post("/v1/datasets/{dataset_id}/collections")
    async def set_collections(dataset_id: str, request: Request, body: dict = Body(...)):
        return platform.set_collections(caller(request), dataset_id, body.get("collections", []))

    @app.post("/v1/datasets/{dataset_id}/access-mode")
    async def set_access_mode(dataset_id: str, request: Request, body: dict = Body(...)):
        return platform.set_access_mode(caller(request), dataset_id, body.get("mode", ""))

    # -- tree / files ---------------------------------------------------------------------

    @app.post("/v1/datasets/{dataset_id}/tree")
    async def mutate_tree(dataset_id: str, request: Request, body: dict = Body(...)):
        return platform.mutate_tree(
            caller(request), dataset_id,
            body.get("op", ""), body.get("target", ""), body.get("args", {}) or {},
        )

    @app.get("/v1/datasets/{dataset_id}/tree")
    async def get_tree(dataset_id: str, request: Request):
        return platform.get_tree(caller(request), dataset_id)

    @app.get("/v1/datasets/{dataset_id}/activity")
    async def activity(
        dataset_id: str,
        request: Request,
        from_seq: int = Query(default=1),
        limit: int = Query(default=100),
    ):
        return platform.query_activity(caller(request), dataset_id, from_seq, limit)

    @app.get("/v1/datasets/{dataset_id}/files/{node_id}")
    async def download_file(
        dataset_id: str,
        node_id: str,
        request: Request,
        payer_token: str | None = Query(default=None),
    ):
        name, data = platform.download_file(caller(request), dataset_id, node_id, payer_token)
        return Response(
            content=data,
            media_type="application/octet-stream",
            headers={"Content-Disposition": f'attachment; filename="{name}"'},
        )

    @app.get("/v1/datasets/{dataset_id}/storage-report")
    async def storage_report(dataset_id: str, request: Request):
        return platform.storage_report(caller(request), dataset_id)

    # -- metadata graph ----------------------------------------------------------------------

    @app.post("/v1/datasets/{dataset_id}/models")
    async def define_model(dataset_id: str, request: Request, body: dict = Body(...)):
        return platform.define_model(caller(request), dataset_id, body)

    @app.get("/v1/datasets/{dataset_id}/models")
    async def list_models(dataset_id: str, request: Request):
        return platform.list_models(caller(request), dataset_id)

    @app.post("/v1/models/{model_id}/records")
    async def create_record(model_id: str, request: Request, body: dict = Body(...)):
        return platform.create_record(caller(request), model_id, body.get("values", {}))

    @app.patch("/v1/records/{record_id}")
    async def update_record(record_id: str, request: Request, body: dict = Body(...)):
        return platform.update_record(caller(request), record_id, body.get("values", {}))

    @app.post("/v1/datasets/{dataset_id}/links")
    async def link(dataset_id: str, request: Request, body: dict = Body(...)):
        kind = body.get("kind", "")
        kwargs = {k: v for k, v in body.items() if k != "kind"}
        return platform.link(caller(request), dataset_id, kind, **kwargs)

    @app.get("/v1/datasets/{dataset_id}/records")
    async def query_records(
        dataset_id: str,
        request: Request,
        model: str = Query(...),
        predicate: str | None = Query(default=None),
        traverse: str | None = Query(default=None),
    ):
        try:
            predicate_list = json.loads(predicate) if predicate else None
            traverse_doc = json.loads(traverse) if traverse else None
        except json.JSONDecodeError as exc:
            raise InvalidSchema(f"predicate/traverse must be JSON: {exc}") from None
        return platform.query_records(
            caller(request), dataset_id, model, predicate_list, traverse_doc
        )

    @app.get("/v1/datasets/{dataset_id}/graph")
    async def graph_view(dataset_id: str, request: Request):
        return platform.graph_view(caller(request), dataset_id)

    # -- uploads -------------------------------------------------------------------------------

    @app.post("/v1/datasets/{dataset_id}/manifests")
    async def create_manifest(dataset_id: str, request: Request, body: dict = Body(...)):
        return platform.create_manifest(caller(request), dataset_id, body.get("entries", []))

    @app.put("/v1/manifests/{manifest_id}/chunks")
    async def upload_chunk(
        manifest_id: str,
        request: Request,
        path: str = Query(...),
        offset: int = Query(...),
    ):
        data = await request.body()
        return platform.upload_chunk(caller(request), manifest_id, path, offset, data)

    @app.post("/v1/manifests/{manifest_id}/entries/{path:path}/finalize")
    async def finalize_entry(manifest_id: str, path: str, request: Request):
        return platform.finalize_entry(caller(request), manifest_id, path)

    @app.post("/v1/manifests/{manifest_id}/entries/{path:path}/reset")
    async def reset_entry(manifest_id: str, path: str, request: Request):
        return platform.reset_entry(caller(request), manifest_id, path)

    @app.get("/v1/manifests/{manifest_id}")
    async def sync_manifest(manifest_id: str, request: Request):
        return platform.sync_manifest(caller(request), manifest_id)

    @app.post("/v1/manifests/{manifest_id}/verify")
    async def verify_manifest(manifest_id: str, request: Request):
        return platform.verify_manifest(caller(request), manifest_id)

    # -- grants ---------------------------------------------------------------------------------

    @app.post("/v1/datasets/{dataset_id}/grants")
    async def grant(dataset_id: str, request: Request, body: dict = Body(...)):
        principal = body.get("principal", {})
        return platform.grant(
            caller(request), dataset_id,
            principal.get("kind", ""), principal.get("id", ""), body.get("role", ""),
        )

    @app.get("/v1/datasets/{dataset_id}/grants")
    async def list_grants(dataset_id: str, request: Request):
        return platform.list_grants(caller(request), dataset_id)

    @app.post("/v1/datasets/{dataset_id}/grants/revoke")
    async def revoke(dataset_id: str, request: Request, body: dict = Body(...)):
        principal = body.get("principal", {})
        return platform.revoke(
            caller(request), dataset_id, principal.get("kind", ""), principal.get("id", "")
        )

    @app.post("/v1/datasets/{dataset_id}/transfer")
    async def transfer(dataset_id: str, request: Request, body: dict = Body(...)):
        return platform.transfer_ownership(caller(request), dataset_id, body["new_owner_id"])

    # -- publishing -------------------------------------------------------------------------------

    @app.post("/v1/datasets/{dataset_id}/publication")
    async def submit_publication(dataset_id: str, request: Request, body: dict = Body(default={})):
        return platform.submit_for_review(
            caller(request), dataset_id, (body or {}).get("justification")
        )

    @app.post("/v1/publication/{request_id}/review")
    async def review(request_id: str, request: Request, body: dict = Body(...)):
        return platform.review(
            caller(request), request_id, body.get("decision", ""), body.get("note", "")
        )

    @app.post("/v1/publication/{request_id}/claim")
    async def claim(request_id: str, request: Request):
        return platform.claim_review(caller(request), request_id)

    @app.post("/v1/publication/{request_id}/publish")
    async def publish(request_id: str, request: Request, body: dict = Body(default={})):
        return platform.publish(
            caller(request), request_id, int((body or {}).get("embargo_days", 0))
        )

    @app.post("/v1/publication/{request_id}/withdraw")
    async def withdraw(request_id: str, request: Request):
        return platform.withdraw(caller(request), request_id)

    @app.get("/v1/workspaces/{workspace_id}/review-queue")
    async def review_queue(workspace_id: str, request: Request):
        return platform.review_queue(caller(request), workspace_id)

    @app.get("/v1/datasets/{dataset_id}/versions")
    async def list_versions(dataset_id: str, request: Request):
        return platform.list_versions(caller(request), dataset_id)

    # -- webhooks ----------------------------------------------------------------------------------

    @app.post("/v1/webhooks")
    async def register_webhook(request: Request, body: dict = Body(...)):
        return platform.register_webhook(
            caller(request), body["workspace_id"], body.get("url", ""),
            body.get("events", []), body.get("secret", ""),
        )

    @app.get("/v1/webhooks/{webhook_id}/deliveries")
    async def webhook_deliveries(webhook_id: str, request: Request):
        return platform.webhook_deliveries(caller(request), webhook_id)

    # -- public: DOI + published objects + Discover ---------------------------------------------------

    @app.get("/v1/doi/{prefix}/{suffix}")
    async def resolve_doi(prefix: str, suffix: str):
        key = platform.resolve_doi(f"{prefix}/{suffix}")
        return RedirectResponse(url=f"/v1/{key}", status_code=302)

    @app.get("/v1/published/{dataset_id}/{version}/{rel_path:path}")
    async def published_object(
        dataset_id: str,
        version: int,
        rel_path: str,
        payer_token: str | None = Query(default=None),
    ):
        data = platform.discover.read_public_object(dataset_id, version, rel_path, payer_token)
        media = "application/json" if rel_path.endswith(".json") else "application/octet-stream"
        return Response(content=data, media_type=media)

    @app.get("/v1/discover/datasets")
    async def discover_catalog(
        text: str | None = Query(default=None),
        tag: list[str] = Query(default=[]),
        status: str | None = Query(default=None),
    ):
        return platform.discover.catalog_search(text=text, tags=tag, status=status)

    @app.get("/v1/discover/datasets/{dataset_id}/versions/{version}")
    async def discover_page(dataset_id: str, version: int):
        return platform.discover.dataset_page(dataset_id, version)

    @app.get("/v1/discover/datasets/{dataset_id}/versions/{version}/download")
    async def discover_download(
        dataset_id: str,
        version: int,
        payer_token: str | None = Query(default=None),
    ):
        data = platform.discover.download_tar(dataset_id, version, payer_token)
        return Response(
            content=data,
            media_type="application/x-tar",
            headers={"Content-Disposition": f'attachment; filename="{dataset_id}-v{version}.tar"'},
        )

    # -- static UI (companion SPA), mounted last so /v1 wins -------------------------------------------

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    @app.exception_handler(404)
    async def _not_found(_request: Request, _exc):
        return JSONResponse(status_code=404, content=NotFound("no such route or resource").to_payload())

    return app
