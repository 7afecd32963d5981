"""``fh`` — the local agent CLI.

Subcommands: ``profile`` (server profiles), ``manifest create`` (hash local
files and register an upload manifest), ``upload`` (parallel resumable
uploads driven by the local ledger, reconciled server-first), ``download``
(fetch a published version and verify every file against its manifest), and
``ds`` (thin wrappers over the dataset REST routes).

Exit codes: 0 success; 1 local error (unreadable path, no profile, network
exhausted); 2 server rejection; 3 verification failure (checksum mismatch
on upload or download). ``--json`` emits exactly one JSON document on
stdout; everything else chatty goes to stderr.
"""

from __future__ import annotations

import hashlib
import io
import json
import re
import sys
import tarfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import requests

from . import config
from .client import ApiClient, ServerError
from .config import MAX_CHUNK_SIZE, MIN_CHUNK_SIZE, Profile
from .ledger import Ledger

EXIT_OK = 0
EXIT_LOCAL = 1
EXIT_SERVER = 2
EXIT_VERIFY = 3

# seconds; grows linearly per attempt.  Patched to ~0 in tests.
RETRY_BACKOFF_BASE = 0.2


def err(message: str) -> None:
    click.echo(message, err=True)


def fail(code: int, message: str) -> None:
    err(f"fh: {message}")
    sys.exit(code)


def make_client(profile: Profile) -> ApiClient:
    """Single seam for building HTTP clients (tests monkeypatch this)."""
    return ApiClient(profile.server_url, profile.token)


def require_profile() -> Profile:
    profile = config.active_profile()
    if profile is None:
        fail(EXIT_LOCAL, "no active profile; run `fh profile add` first")
    return profile


def guard(fn):
    """Map exceptions at a command boundary onto the exit-code contract."""

    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ServerError as exc:
            fail(EXIT_SERVER, f"server rejected: {exc.code or exc.status}: {exc}")
        except requests.RequestException as exc:
            fail(EXIT_LOCAL, f"network error: {exc}")
        except OSError as exc:
            fail(EXIT_LOCAL, str(exc))

    return wrapper


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        while True:
            block = handle.read(1024 * 1024)
            if not block:
                break
            digest.update(block)
    return digest.hexdigest()


@click.group()
def cli() -> None:
    """Fairhaven agent: uploads, downloads, and dataset chores."""


# -- profiles ----------------------------------------------------------------------


@cli.group()
def profile() -> None:
    """Manage server profiles."""


@profile.command("add")
@click.argument("name")
@click.option("--server-url", required=True)
@click.option("--token", required=True)
@click.option("--workers", type=int, default=config.DEFAULT_WORKERS, show_default=True)
@click.option("--chunk-size", type=int, default=config.DEFAULT_CHUNK_SIZE, show_default=True)
@click.option("--retries", type=int, default=config.DEFAULT_RETRIES, show_default=True)
@click.option("--use", "activate", is_flag=True, help="Make this the active profile.")
def profile_add(name, server_url, token, workers, chunk_size, retries, activate):
    """Add or update a profile (the first one becomes active)."""
    config.upsert_profile(
        Profile(name=name, server_url=server_url, token=token,
                workers=workers, chunk_size=chunk_size, retries=retries),
        activate=activate,
    )
    err(f"profile {name!r} saved")


@profile.command("use")
@click.argument("name")
def profile_use(name):
    """Switch the active profile."""
    try:
        config.set_active(name)
    except KeyError as exc:
        fail(EXIT_LOCAL, str(exc.args[0]))
    err(f"active profile is now {name!r}")


@profile.command("list")
@click.option("--json", "as_json", is_flag=True)
def profile_list(as_json):
    """List configured profiles."""
    cfg = config.load_config()
    if as_json:
        click.echo(json.dumps(cfg, indent=2))
        return
    active = cfg.get("active")
    for name, raw in sorted(cfg.get("profiles", {}).items()):
        marker = "*" if name == active else " "
        click.echo(f"{marker} {name}  {raw['server_url']}")


# -- manifest creation ----------------------------------------------------------------


def expand_sources(paths: tuple[str, ...]) -> list[tuple[str, Path]]:
    """(manifest path, local source) pairs.

    A file argument keeps the path it was given (relative form); a directory
    argument expands recursively with the directory's own name as prefix, so
    ``fh manifest create ds raw/`` yields ``raw/...`` entries.
    """
    pairs: list[tuple[str, Path]] = []
    for raw in paths:
        p = Path(raw)
        if not p.exists():
            fail(EXIT_LOCAL, f"no such file or directory: {raw}")
        if p.is_dir():
            base = p.resolve()
            for child in sorted(base.rglob("*")):
                if child.is_file():
                    rel = child.relative_to(base.parent)
                    pairs.append((rel.as_posix(), child))
        else:
            name = p.as_posix().lstrip("/") if not p.is_absolute() else p.name
            pairs.append((name, p))
    return pairs


@cli.group()
def manifest() -> None:
    """Upload manifests."""


@manifest.command("create")
@click.argument("dataset")
@click.argument("paths", nargs=-1, required=True)
@click.option("--json", "as_json", is_flag=True)
@guard
def manifest_create(dataset, paths, as_json):
    """Hash PATHS locally and register an upload manifest for DATASET."""
    profile = require_profile()
    client = make_client(profile)
    ds = client.find_dataset(dataset)
    pairs = expand_sources(paths)
    entries = []
    ledger_entries = []
    for manifest_path, source in pairs:
        size = source.stat().st_size
        checksum = sha256_file(source)
        entries.append({"path": manifest_path, "size": size, "checksum": checksum})
        ledger_entries.append({
            "path": manifest_path, "source": str(source.resolve()),
            "size": size, "checksum": checksum,
            "status": "registered", "bytes_received": 0,
        })
        err(f"hashed {manifest_path} ({size} bytes)")
    view = client.create_manifest(ds["id"], entries)
    Ledger.create(view["id"], ds["id"], profile.server_url, ledger_entries)
    if as_json:
        click.echo(json.dumps(view, indent=2))
    else:
        click.echo(view["id"])


# -- upload engine ----------------------------------------------------------------


def _push_entry(profile: Profile, manifest_id: str, ledger: Ledger,
                entry: dict, chunk_size: int, retries: int) -> dict:
    """Upload one entry end to end; chunks are strictly sequential.

    Returns {"path", "status", "resumed_from"}. Network failures retry per
    chunk with linear backoff; an exhausted chunk leaves the entry pending
    so a rerun can resume from the server's offset.
    """
    client = make_client(profile)
    path = entry["path"]
    source = Path(entry["source"])
    status = entry["status"]
    resumed_from = 0

    if status == "verified":
        return {"path": path, "status": "verified", "resumed_from": 0}

    if status == "failed":
        # A failed entry means the server-side digest didn't match what the
        # manifest declared. Retrying is only useful when the local file now
        # matches its declared checksum again (e.g. a partial copy finished).
        if not source.exists() or sha256_file(source) != entry["checksum"]:
            return {"path": path, "status": "failed", "resumed_from": 0}
        client.reset_entry(manifest_id, path)
        status = "registered"
        ledger.update(path, status="registered", bytes_received=0)
        entry = ledger.entry(path) or entry

    offset = int(entry.get("bytes_received", 0))
    if offset:
        resumed_from = offset
    declared = int(entry["size"])

    if status in ("registered", "in_progress") and offset < declared:
        try:
            handle = source.open("rb")
        except OSError as exc:
            err(f"fh: {path}: {exc}")
            return {"path": path, "status": "unreadable", "resumed_from": resumed_from}
        with handle:
            handle.seek(offset)
            while offset < declared:
                data = handle.read(min(chunk_size, declared - offset))
                if not data:
                    break  # file shrank locally; finalize below will report it
                ack = None
                for attempt in range(retries + 1):
                    try:
                        ack = client.upload_chunk(manifest_id, path, offset, data)
                        break
                    except ServerError as exc:
                        if exc.code == "OffsetMismatch":
                            # Server knows better (duplicate send or stale
                            # ledger): jump to its offset and carry on.
                            offset = int(exc.payload["expected"])
                            handle.seek(offset)
                            data = handle.read(min(chunk_size, declared - offset))
                            if not data:
                                ack = {"bytes_received": offset}
                                break
                            continue
                        raise
                    except requests.RequestException:
                        if attempt == retries:
                            err(f"fh: {path}: network retries exhausted at offset {offset}")
                            ledger.update(path, status="in_progress", bytes_received=offset)
                            return {"path": path, "status": "interrupted",
                                    "resumed_from": resumed_from}
                        time.sleep(RETRY_BACKOFF_BASE * (attempt + 1))
                if ack is None:
                    break
                offset = int(ack["bytes_received"])
                ledger.update(path, status="in_progress", bytes_received=offset)

    result = client.finalize_entry(manifest_id, path)
    ledger.update(path, status=result["status"],
                  bytes_received=offset if result["status"] != "verified" else declared)
    if result["status"] == "failed":
        err(f"fh: {path}: checksum mismatch on server")
    return {"path": path, "status": result["status"], "resumed_from": resumed_from}


@cli.command("upload")
@click.argument("manifest_id")
@click.option("--workers", type=int, default=None, help="Concurrent entry streams.")
@click.option("--chunk-size", type=int, default=None, help="Chunk size in bytes.")
@click.option("--json", "as_json", is_flag=True)
@guard
def upload(manifest_id, workers, chunk_size, as_json):
    """Upload every incomplete entry of MANIFEST_ID, resuming as needed."""
    profile = require_profile()
    workers = workers or profile.workers
    chunk_size = chunk_size or profile.chunk_size
    if not MIN_CHUNK_SIZE <= chunk_size <= MAX_CHUNK_SIZE:
        fail(EXIT_LOCAL, f"chunk size must be in [{MIN_CHUNK_SIZE}, {MAX_CHUNK_SIZE}]")
    try:
        ledger = Ledger.open(manifest_id)
    except FileNotFoundError as exc:
        fail(EXIT_LOCAL, str(exc))

    client = make_client(profile)
    server_view = client.sync_manifest(manifest_id)
    ledger.reconcile(server_view)

    resumed_from_bytes = 0
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(
            lambda e: _push_entry(profile, manifest_id, ledger, e, chunk_size, profile.retries),
            ledger.entries,
        ))
    for row in results:
        resumed_from_bytes += row["resumed_from"]

    verify = client.verify_manifest(manifest_id)
    summary = {
        "verified": verify["verified"],
        "failed": verify["failed"],
        "resumed_from_bytes": resumed_from_bytes,
    }
    doc = dict(summary, pending=verify["pending"], complete=verify["complete"])
    click.echo(json.dumps(doc if as_json else summary))
    if verify["complete"]:
        return
    sys.exit(EXIT_VERIFY if verify["failed"] else EXIT_LOCAL)


# -- download -----------------------------------------------------------------------


DOI_RE = re.compile(r"^10\.\d{4,9}/\S+$")


def _resolve_target(client: ApiClient, target: str, version: int | None) -> tuple[str, int]:
    """Turn a DOI / dataset name / dataset id into (dataset_id, version)."""
    if DOI_RE.match(target):
        location = client.resolve_doi(target)
        # .../v1/published/<dataset>/<version>/manifest.json
        m = re.search(r"/published/([0-9a-f]{32})/(\d+)/", location)
        if not m:
            fail(EXIT_SERVER, f"unexpected DOI target {location!r}")
        return m.group(1), int(m.group(2))

    try:
        view = client.find_dataset(target)
        versions = view.get("versions") or []
        if version is not None:
            return view["id"], version
        if not versions:
            fail(EXIT_SERVER, f"dataset {target!r} has no published versions")
        return view["id"], max(v["version"] for v in versions)
    except ServerError as exc:
        if exc.status not in (401, 403, 404):
            raise
        # Not visible with (or without) credentials — fall back to the public catalog.
        for entry in client.discover_catalog():
            if entry["name"] == target or entry["dataset_id"] == target:
                return entry["dataset_id"], version or entry["version"]
        raise


def _verify_extracted(dest: Path) -> list[str]:
    """Check every file listed in manifest.json; returns mismatched paths."""
    manifest = json.loads((dest / "manifest.json").read_text())
    bad = []
    for spec in manifest.get("files", []):
        local = dest / "files" / spec["path"]
        if not local.exists() or sha256_file(local) != spec["sha256"]:
            bad.append(spec["path"])
    return bad


@cli.command("download")
@click.argument("target")
@click.argument("dest", type=click.Path(path_type=Path))
@click.option("--version", type=int, default=None)
@click.option("--payer-token", default=None, help="Account token billed for requester-pays egress.")
@guard
def download(target, dest, version, payer_token):
    """Download a published dataset version (by name, id, or DOI) into DEST."""
    profile = config.active_profile()
    client = make_client(profile) if profile else ApiClient(_require_url())
    dataset_id, resolved = _resolve_target(client, target, version)
    err(f"fetching {dataset_id} version {resolved}")
    try:
        blob = client.download_tar(dataset_id, resolved, payer_token=payer_token)
    except ServerError as exc:
        if exc.code == "PendingRestore":
            fail(EXIT_SERVER, "version is archived and being restored; retry after the "
                              "next lifecycle sweep completes the restore")
        raise
    dest.mkdir(parents=True, exist_ok=True)
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:") as tar:
        tar.extractall(dest, filter="data")
    bad = _verify_extracted(dest)
    if bad:
        for path in bad:
            err(f"fh: checksum mismatch: {path}")
        sys.exit(EXIT_VERIFY)
    err(f"verified {len(json.loads((dest / 'manifest.json').read_text())['files'])} files")
    click.echo(str(dest))


def _require_url() -> str:
    fail(EXIT_LOCAL, "no active profile; run `fh profile add` first")


# -- dataset chores --------------------------------------------------------------------


@cli.group()
def ds() -> None:
    """Dataset commands (ls, mv, rename, rm, status)."""


def _walk(tree: dict, prefix: str = "") -> list[tuple[str, dict]]:
    rows = []
    for child in tree.get("children", []):
        path = f"{prefix}{child['name']}"
        rows.append((path, child))
        if child["kind"] == "folder":
            rows.extend(_walk(child, prefix=f"{path}/"))
    return rows


def _node_at(tree: dict, path: str) -> dict | None:
    node = tree
    for part in [p for p in path.strip("/").split("/") if p]:
        node = next((c for c in node.get("children", []) if c["name"] == part), None)
        if node is None:
            return None
    return node


def _require_node(tree: dict, path: str) -> dict:
    node = _node_at(tree, path)
    if node is None:
        fail(EXIT_LOCAL, f"no such path in dataset: {path}")
    return node


@ds.command("ls")
@click.argument("dataset")
@click.option("--json", "as_json", is_flag=True)
@guard
def ds_ls(dataset, as_json):
    """Print the dataset file tree with sizes."""
    profile = require_profile()
    client = make_client(profile)
    view = client.find_dataset(dataset)
    tree = client.tree(view["id"])
    if as_json:
        click.echo(json.dumps(tree, indent=2))
        return
    click.echo(f"{'PATH':<60} {'KIND':<8} SIZE")
    for path, node in _walk(tree):
        size = str(node.get("size_bytes", "")) if node["kind"] == "file" else "-"
        click.echo(f"{path:<60} {node['kind']:<8} {size}")


@ds.command("mv")
@click.argument("dataset")
@click.argument("src")
@click.argument("dest_folder")
@guard
def ds_mv(dataset, src, dest_folder):
    """Move SRC into DEST_FOLDER ('' or '/' for the root)."""
    profile = require_profile()
    client = make_client(profile)
    view = client.find_dataset(dataset)
    tree = client.tree(view["id"])
    node = _require_node(tree, src)
    parent = _require_node(tree, dest_folder) if dest_folder.strip("/") else tree
    if parent["kind"] == "file":
        fail(EXIT_LOCAL, f"destination {dest_folder!r} is a file")
    client.mutate_tree(view["id"], "move", node["id"], {"parent_id": parent["id"]})
    err(f"moved {src} -> {dest_folder or '/'}")


@ds.command("rename")
@click.argument("dataset")
@click.argument("path")
@click.argument("new_name")
@guard
def ds_rename(dataset, path, new_name):
    """Rename the node at PATH."""
    profile = require_profile()
    client = make_client(profile)
    view = client.find_dataset(dataset)
    node = _require_node(client.tree(view["id"]), path)
    client.mutate_tree(view["id"], "rename", node["id"], {"name": new_name})
    err(f"renamed {path} -> {new_name}")


@ds.command("rm")
@click.argument("dataset")
@click.argument("path")
@guard
def ds_rm(dataset, path):
    """Soft-delete the node at PATH (30-day undelete window server-side)."""
    profile = require_profile()
    client = make_client(profile)
    view = client.find_dataset(dataset)
    node = _require_node(client.tree(view["id"]), path)
    client.mutate_tree(view["id"], "soft_delete", node["id"], {})
    err(f"deleted {path}")


@ds.command("status")
@click.argument("dataset")
@click.option("--json", "as_json", is_flag=True)
@guard
def ds_status(dataset, as_json):
    """Show a dataset summary (--json mirrors the API payload exactly)."""
    profile = require_profile()
    client = make_client(profile)
    view = client.find_dataset(dataset)
    if as_json:
        click.echo(json.dumps(view, indent=2, sort_keys=True))
        return
    metrics = view.get("metrics", {})
    click.echo(f"name:     {view['attributes']['name']}")
    click.echo(f"id:       {view['id']}")
    click.echo(f"status:   {view['status']}")
    click.echo(f"state:    {view.get('publication_state') or 'draft'}")
    click.echo(f"files:    {metrics.get('file_count', 0)}")
    click.echo(f"bytes:    {metrics.get('total_size_bytes', 0)}")
    click.echo(f"records:  {metrics.get('record_count', 0)}")
    click.echo(f"versions: {len(view.get('versions', []))}")


def main() -> None:
    cli(prog_name="fh")


if __name__ == "__main__":
    main()
