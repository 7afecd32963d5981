"""Discover: the public, read-only face of published datasets.

Everything here is anonymous-access and composes exclusively from published
version snapshots (plus the publish-time summary frozen on each version), so
draft edits, private datasets and embargoed versions can never leak. The
download is a deterministic uncompressed tar — fixed member order and
normalized headers — so two downloads of the same version hash identically.
"""

from __future__ import annotations

import io
import re
import tarfile

from .clock import isoformat
from .errors import NotFound, UnknownVersion
from .publishing import DatasetVersion

OVERVIEW_SECTIONS = ("study_purpose", "data_collection", "primary_conclusion")


def _overview_from_readme(readme_text: str) -> dict:
    """Pull the conventional overview sections out of a readme's markdown.

    A section is a heading like ``## Study Purpose`` followed by prose, up to
    the next heading. Missing sections simply stay absent.
    """
    out: dict[str, str] = {}
    pattern = re.compile(r"^#{1,6}\s*(.+?)\s*$", re.MULTILINE)
    headings = list(pattern.finditer(readme_text))
    for idx, match in enumerate(headings):
        key = match.group(1).strip().lower().replace(" ", "_")
        if key not in OVERVIEW_SECTIONS:
            continue
        start = match.end()
        end = headings[idx + 1].start() if idx + 1 < len(headings) else len(readme_text)
        body = readme_text[start:end].strip()
        if body:
            out[key] = body
    return out


def _citation(version: DatasetVersion) -> str:
    names = ", ".join(c["name"] for c in version.summary.get("contributors", []))
    year = isoformat(version.created_at)[:4]
    title = version.summary.get("name", "")
    return f"{names} ({year}). {title}. Version {version.version}. https://doi.org/{version.doi}"


class Discover:
    def __init__(self, core, graph, publishing, store, clock):
        self.core = core
        self.graph = graph
        self.publishing = publishing
        self.store = store
        self.clock = clock

    # -- catalog ---------------------------------------------------------------------

    def _public_versions(self, dataset_id: str) -> list[DatasetVersion]:
        return [v for v in self.publishing.dataset_versions(dataset_id) if v.public]

    def _entry(self, version: DatasetVersion) -> dict:
        return {
            "dataset_id": version.dataset_id,
            "version": version.version,
            "doi": version.doi,
            "published_at": isoformat(version.created_at),
            "name": version.summary.get("name", ""),
            "description": version.summary.get("description", ""),
            "tags": list(version.summary.get("tags", [])),
            "license": version.summary.get("license", ""),
            "contributors": list(version.summary.get("contributors", [])),
            "metrics": {
                "files": version.file_count,
                "size_bytes": version.total_size_bytes,
                "records": version.record_count,
            },
        }

    def _publication_state(self, dataset_id: str) -> str:
        request = self.publishing.request_for_dataset(dataset_id)
        return request.state if request else "published"

    def catalog_search(
        self,
        text: str | None = None,
        tags: list[str] | None = None,
        status: str | None = None,
    ) -> list[dict]:
        """Latest public version per dataset, filtered; newest publish first."""
        entries: list[tuple[DatasetVersion, dict]] = []
        for dataset_id in self.publishing.versions:
            public = self._public_versions(dataset_id)
            if not public:
                continue
            latest = max(public, key=lambda v: v.version)
            entry = self._entry(latest)
            if text:
                needle = text.lower()
                hay = (entry["name"] + "\n" + entry["description"]).lower()
                if needle not in hay:
                    continue
            if tags:
                wanted = {t.strip().lower() for t in tags if t.strip()}
                if not wanted <= set(entry["tags"]):
                    continue
            if status and self._publication_state(dataset_id) != status:
                continue
            entry["publication_state"] = self._publication_state(dataset_id)
            entries.append((latest, entry))
        entries.sort(key=lambda pair: (pair[0].created_at, pair[0].dataset_id), reverse=True)
        return [entry for _, entry in entries]

    # -- dataset page -------------------------------------------------------------------

    def _public_version(self, dataset_id: str, number: int) -> DatasetVersion:
        version = self.publishing.version(dataset_id, number)  # raises UnknownVersion
        if not version.public:
            # embargoed versions are hidden outright, not stubbed
            raise UnknownVersion(f"dataset has no version {number}")
        return version

    def dataset_page(self, dataset_id: str, number: int) -> dict:
        version = self._public_version(dataset_id, number)
        manifest_key = f"{version.snapshot_prefix}manifest.json"
        import json

        manifest = json.loads(self.store.peek(manifest_key).decode("utf-8"))
        readme_text = self.store.peek(f"{version.snapshot_prefix}readme.md").decode("utf-8", "replace")
        return {
            "header": {
                "title": manifest["name"],
                "contributors": manifest["contributors"],
                "description": manifest["description"],
            },
            "metrics": {
                "files": manifest["metrics"]["files"],
                "size": manifest["metrics"]["size_bytes"],
                "records": manifest["metrics"]["records"],
                "license": manifest["license"],
            },
            "overview": _overview_from_readme(readme_text),
            "files": manifest["files"],
            "about": {
                "versions": [
                    {
                        "version": v.version,
                        "doi": v.doi,
                        "published_at": isoformat(v.created_at),
                    }
                    for v in self._public_versions(dataset_id)
                ],
                "tags": manifest["tags"],
                "citation": _citation(version),
                "doi": version.doi,
            },
        }

    # -- snapshot download ------------------------------------------------------------------

    def manifest_key_if_public(self, dataset_id: str, number: int) -> str:
        return f"{self._public_version(dataset_id, number).snapshot_prefix}manifest.json"

    def read_public_object(self, dataset_id: str, number: int, rel_path: str, payer_token: str | None = None) -> bytes:
        version = self._public_version(dataset_id, number)
        key = f"{version.snapshot_prefix}{rel_path}"
        if not self.store.exists(key):
            raise NotFound(f"snapshot has no object {rel_path!r}")
        if rel_path == "manifest.json":
            return self.store.peek(key)
        return self.store.get(key, self.clock.now(), payer_token=payer_token)

    def download_tar(self, dataset_id: str, number: int, payer_token: str | None = None) -> bytes:
        """The full snapshot as a deterministic uncompressed tar."""
        import json

        version = self._public_version(dataset_id, number)
        prefix = version.snapshot_prefix
        manifest = json.loads(self.store.peek(f"{prefix}manifest.json").decode("utf-8"))
        members = ["manifest.json", "readme.md", "changelog.md"]
        members += sorted(
            k[len(prefix):]
            for k in self.store.list_keys(prefix)
            if k[len(prefix):].startswith("metadata/")
        )
        members += [f"files/{f['path']}" for f in manifest["files"]]  # manifest order
        mtime = int(version.created_at.timestamp())
        buffer = io.BytesIO()
        with tarfile.open(fileobj=buffer, mode="w", format=tarfile.GNU_FORMAT) as tar:
            for rel in members:
                data = self.store.get(f"{prefix}{rel}", self.clock.now(), payer_token=payer_token)
                info = tarfile.TarInfo(name=rel)
                info.size = len(data)
                info.mtime = mtime
                info.mode = 0o644
                info.uid = info.gid = 0
                info.uname = info.gname = ""
                tar.addfile(info, io.BytesIO(data))
        return buffer.getvalue()
