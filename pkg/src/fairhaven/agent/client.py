"""Thin HTTP client for the REST API, used by the CLI.

Non-2xx responses raise ``ServerError`` carrying the status code and the
server's error payload (including details such as the expected resume
offset). Transport problems surface as ``requests`` exceptions; retry policy
belongs to the caller. A custom ``requests.Session`` can be injected, which
is how the tests simulate flaky networks and kill points.
"""

from __future__ import annotations

from urllib.parse import quote

import requests


class ServerError(Exception):
    def __init__(self, status: int, payload: dict):
        self.status = status
        self.payload = payload or {}
        super().__init__(self.payload.get("message") or f"server returned {status}")

    @property
    def code(self) -> str:
        return self.payload.get("error", "")


class ApiClient:
    def __init__(self, server_url: str, token: str | None = None, session: requests.Session | None = None):
        self.server_url = server_url.rstrip("/")
        self.token = token
        self.session = session or requests.Session()

    # -- plumbing -------------------------------------------------------------

    def _headers(self) -> dict:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def request(self, method: str, path: str, *, json_body=None, data=None, params=None,
                allow_redirects: bool = True) -> requests.Response:
        url = f"{self.server_url}{path}"
        response = self.session.request(
            method, url, json=json_body, data=data, params=params,
            headers=self._headers(), allow_redirects=allow_redirects, timeout=60,
        )
        if response.status_code >= 400:
            try:
                payload = response.json()
            except ValueError:
                payload = {"message": response.text[:500]}
            raise ServerError(response.status_code, payload)
        return response

    def get_json(self, path: str, params=None):
        return self.request("GET", path, params=params).json()

    def post_json(self, path: str, body=None, params=None):
        return self.request("POST", path, json_body=body or {}, params=params).json()

    # -- datasets ----------------------------------------------------------------

    def find_dataset(self, name_or_id: str) -> dict:
        import re

        if re.fullmatch(r"[0-9a-f]{32}", name_or_id):
            return self.get_json(f"/v1/datasets/{name_or_id}")
        return self.get_json("/v1/datasets", params={"name": name_or_id})

    def dataset(self, dataset_id: str) -> dict:
        return self.get_json(f"/v1/datasets/{dataset_id}")

    def tree(self, dataset_id: str) -> dict:
        return self.get_json(f"/v1/datasets/{dataset_id}/tree")

    def mutate_tree(self, dataset_id: str, op: str, target: str, args: dict) -> dict:
        return self.post_json(
            f"/v1/datasets/{dataset_id}/tree", {"op": op, "target": target, "args": args}
        )

    def set_status(self, dataset_id: str, status: str) -> dict:
        return self.post_json(f"/v1/datasets/{dataset_id}/status", {"status": status})

    # -- uploads ------------------------------------------------------------------

    def create_manifest(self, dataset_id: str, entries: list[dict]) -> dict:
        return self.post_json(f"/v1/datasets/{dataset_id}/manifests", {"entries": entries})

    def sync_manifest(self, manifest_id: str) -> dict:
        return self.get_json(f"/v1/manifests/{manifest_id}")

    def upload_chunk(self, manifest_id: str, path: str, offset: int, data: bytes) -> dict:
        return self.request(
            "PUT", f"/v1/manifests/{manifest_id}/chunks",
            data=data, params={"path": path, "offset": offset},
        ).json()

    def finalize_entry(self, manifest_id: str, path: str) -> dict:
        return self.post_json(f"/v1/manifests/{manifest_id}/entries/{quote(path)}/finalize")

    def reset_entry(self, manifest_id: str, path: str) -> dict:
        return self.post_json(f"/v1/manifests/{manifest_id}/entries/{quote(path)}/reset")

    def verify_manifest(self, manifest_id: str) -> dict:
        return self.post_json(f"/v1/manifests/{manifest_id}/verify")

    # -- published content ------------------------------------------------------------

    def resolve_doi(self, doi: str) -> str:
        """Returns the redirect target path for a DOI."""
        response = self.request("GET", f"/v1/doi/{doi}", allow_redirects=False)
        return response.headers["location"]

    def published_object(self, dataset_id: str, version: int, rel_path: str,
                         payer_token: str | None = None) -> bytes:
        params = {"payer_token": payer_token} if payer_token else None
        return self.request(
            "GET", f"/v1/published/{dataset_id}/{version}/{quote(rel_path)}", params=params
        ).content

    def discover_page(self, dataset_id: str, version: int) -> dict:
        return self.get_json(f"/v1/discover/datasets/{dataset_id}/versions/{version}")

    def discover_catalog(self, text: str | None = None, tags: list[str] | None = None) -> list[dict]:
        params: dict = {}
        if text:
            params["text"] = text
        if tags:
            params["tag"] = tags
        return self.get_json("/v1/discover/datasets", params=params)

    def download_tar(self, dataset_id: str, version: int, payer_token: str | None = None) -> bytes:
        params = {"payer_token": payer_token} if payer_token else None
        return self.request(
            "GET", f"/v1/discover/datasets/{dataset_id}/versions/{version}/download", params=params
        ).content
