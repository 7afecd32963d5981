"""Acceptance gate: one test per release criterion.

Every test wraps its body in `criterion(...)`, which appends a single
`[PRIMARY] <name>: PASS|FAIL` line to the terminal summary and enforces the
criterion's runtime budget. Oracles here are written by hand, independent of
the implementation constants they check.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import socket
import threading
import time
from contextlib import contextmanager
from datetime import timedelta
from pathlib import Path

import pytest
import requests
import uvicorn
from click.testing import CliRunner

from conftest import (
    ACCEPTANCE_LINES,
    REQUIRED_ATTRIBUTES,
    make_publishable,
    publish_version,
    upload_file,
)
from fairhaven import errors
from fairhaven.agent import cli as agent
from fairhaven.api import create_app
from fairhaven.clock import ManualClock
from fairhaven.graph import PROPERTY_TYPES, parse_serialized
from fairhaven.objectstore import ObjectStore
from fairhaven.persistence import MemoryBackend
from fairhaven.publishing import EVENTS, FREE_TIER_BYTES, STATES, transition
from fairhaven.service import Platform
from fairhaven.uploads import MAX_FILE_BYTES


@contextmanager
def criterion(name: str, budget_seconds: float | None = None):
    """Time a criterion body and record exactly one verdict line for it."""
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        ACCEPTANCE_LINES.append(f"[PRIMARY] {name}: FAIL")
        raise
    elapsed = time.perf_counter() - started
    if budget_seconds is not None and elapsed >= budget_seconds:
        ACCEPTANCE_LINES.append(
            f"[PRIMARY] {name}: FAIL (runtime {elapsed:.2f}s over the {budget_seconds:g}s budget)"
        )
        pytest.fail(f"{name}: runtime {elapsed:.2f}s over the {budget_seconds:g}s budget")
    if budget_seconds is not None:
        ACCEPTANCE_LINES.append(f"[PRIMARY] {name}: PASS ({elapsed:.2f}s < {budget_seconds:g}s)")
    else:
        ACCEPTANCE_LINES.append(f"[PRIMARY] {name}: PASS (exact)")


# =====================================================================================
# 1. Publishing state machine
# =====================================================================================

# Hand-written legal-transition set (the review workflow drawn on the whiteboard).
LEGAL_EDGES = {
    ("draft", "submit"): "requested",
    ("requested", "claim"): "in_review",
    ("requested", "withdraw"): "draft",
    ("in_review", "accept"): "accepted",
    ("in_review", "reject"): "rejected",
    ("rejected", "resubmit"): "requested",
    ("accepted", "publish"): "published",
}


def test_publishing_state_machine_sweep():
    with criterion("publishing state machine", budget_seconds=1.0):
        assert set(STATES) == {
            "draft", "requested", "in_review", "rejected", "accepted", "published",
        }
        assert set(EVENTS) == {
            "submit", "claim", "accept", "reject", "resubmit", "publish", "withdraw",
        }
        accepted: dict[tuple[str, str], str] = {}
        swept = 0
        for state in STATES:
            for event in EVENTS:
                swept += 1
                try:
                    accepted[(state, event)] = transition(state, event)
                except errors.IllegalTransition:
                    pass  # everything outside LEGAL_EDGES must land here
        assert swept == len(STATES) * len(EVENTS) == 42
        assert accepted == LEGAL_EDGES  # nothing missing, nothing extra


# =====================================================================================
# 2. Resume property
# =====================================================================================


def test_upload_resume_property(platform, org):
    with criterion("resume property", budget_seconds=60.0):
        rng = random.Random(0xFA1B)
        owner, ds = org.owner["id"], org.dataset["id"]
        # file sizes: both endpoints plus a log-uniform spread in between
        sizes = [1, 8 * 1024 * 1024]
        sizes += [max(1, int(2 ** rng.uniform(0, 23))) for _ in range(98)]
        failures = 0
        for i, size in enumerate(sizes):
            data = rng.randbytes(size)
            path = f"data/trial-{i:03d}.bin"
            manifest = platform.create_manifest(
                owner, ds,
                [{"path": path, "size": size, "checksum": hashlib.sha256(data).hexdigest()}],
            )
            # first client session: random chunk size, killed at a random chunk boundary
            chunk = max(1, math.ceil(size / rng.randint(1, 24)))
            n_chunks = math.ceil(size / chunk)
            kill_after = rng.randint(0, n_chunks)
            offset = 0
            for _ in range(kill_after):
                ack = platform.upload_chunk(owner, manifest["id"], path, offset, data[offset:offset + chunk])
                offset = ack["bytes_received"]
            assert offset == min(kill_after * chunk, size)
            # second session: ask the server where to resume, pick a new chunk size
            view = platform.sync_manifest(owner, manifest["id"])
            entry = next(e for e in view["entries"] if e["path"] == path)
            offset = entry["bytes_received"]
            chunk = max(1, math.ceil(size / rng.randint(1, 24)))
            while offset < size:
                ack = platform.upload_chunk(owner, manifest["id"], path, offset, data[offset:offset + chunk])
                offset = ack["bytes_received"]
            done = platform.finalize_entry(owner, manifest["id"], path)
            if done["status"] != "verified":
                failures += 1
                continue
            _, served = platform.download_file(owner, ds, done["node_id"])
            if served != data:
                failures += 1
        assert len(sizes) >= 100
        assert failures == 0


# =====================================================================================
# 3. Limits fixed points
# =====================================================================================


def test_limits_fixed_points(platform, org, clock):
    with criterion("limits fixed points"):
        owner, ds = org.owner["id"], org.dataset["id"]
        make_publishable(platform, org)

        # per-file declared size: 5 TB on the nose is fine, one byte more is not
        assert MAX_FILE_BYTES == 5 * 1024**4
        platform.create_manifest(
            owner, ds, [{"path": "data/at-limit.bin", "size": MAX_FILE_BYTES, "checksum": "0" * 64}]
        )
        with pytest.raises(errors.FileTooLarge):
            platform.create_manifest(
                owner, ds,
                [{"path": "data/over-limit.bin", "size": MAX_FILE_BYTES + 1, "checksum": "0" * 64}],
            )

        # embargo: 365 days accepted, 366 rejected (request survives the rejection)
        request = platform.submit_for_review(owner, ds)
        platform.review(org.reviewer["id"], request["id"], "accept")
        with pytest.raises(errors.EmbargoTooLong):
            platform.publish(org.reviewer["id"], request["id"], embargo_days=366)
        version = platform.publish(org.reviewer["id"], request["id"], embargo_days=365)
        assert version["embargo_until"] is not None and not version["public"]

        # undelete window: day 30 succeeds, day 31 fails
        first = upload_file(platform, owner, ds, "data/day30.bin", b"firm")
        second = upload_file(platform, owner, ds, "data/day31.bin", b"gone")
        platform.mutate_tree(owner, ds, "soft_delete", first["node_id"], {})
        clock.advance(days=30)
        restored = platform.mutate_tree(owner, ds, "undelete", first["node_id"], {})
        assert restored["node"]["name"] == "day30.bin"
        platform.mutate_tree(owner, ds, "soft_delete", second["node_id"], {})
        clock.advance(days=31)
        with pytest.raises(errors.WindowExpired):
            platform.mutate_tree(owner, ds, "undelete", second["node_id"], {})

        # free tier: > 25 GiB needs a justification at submit; == 25 GiB does not
        assert FREE_TIER_BYTES == 25 * 1024**3
        root = platform.get_tree(owner, ds)
        platform.core.attach_file(
            ds, owner, root["id"], "huge.bin",
            size_bytes=FREE_TIER_BYTES + 1, checksum="0" * 64, object_key=None,
        )
        with pytest.raises(errors.JustificationRequired):
            platform.submit_for_review(owner, ds)
        justified = platform.submit_for_review(owner, ds, justification="raw microscope stacks")
        assert justified["state"] == "requested"
        platform.withdraw(owner, justified["id"])

        ds2 = platform.create_dataset(owner, org.workspace["id"], "exactly-free-tier")
        root2 = platform.get_tree(owner, ds2["id"])
        platform.core.attach_file(
            ds2["id"], owner, root2["id"], "bulk.bin",
            size_bytes=FREE_TIER_BYTES, checksum="0" * 64, object_key=None,
        )
        platform.update_attributes(owner, ds2["id"], dict(REQUIRED_ATTRIBUTES))
        at_limit = platform.submit_for_review(owner, ds2["id"])  # no justification needed
        assert at_limit["state"] == "requested"


# =====================================================================================
# 4. Version immutability
# =====================================================================================


def test_version_immutability(platform, org):
    with criterion("version immutability"):
        owner, ds = org.owner["id"], org.dataset["id"]
        make_publishable(platform, org)
        upload_file(platform, owner, ds, "readme.md", b"# Vagus map\n")
        model = platform.define_model(
            owner, ds, {"name": "subject", "properties": [{"name": "species", "type": "string"}]}
        )
        platform.create_record(owner, model["id"], {"species": "rat"})
        v1 = publish_version(platform, org)

        prefix = f"published/{ds}/1/"
        keys = platform.store.list_keys(prefix)
        assert len(keys) >= 5  # manifest, readme, payload, schema, csvs
        before = {k: hashlib.sha256(platform.store.peek(k)).hexdigest() for k in keys}

        # mutate the working dataset in every dimension the snapshot covers
        upload_file(platform, owner, ds, "data/extra.bin", b"fresh bytes for v2")
        platform.update_attributes(owner, ds, {"description": "now with more data"})
        platform.create_record(owner, model["id"], {"species": "mouse"})
        v2 = publish_version(platform, org)

        after_keys = platform.store.list_keys(prefix)
        assert after_keys == keys
        after = {k: hashlib.sha256(platform.store.peek(k)).hexdigest() for k in keys}
        assert after == before  # every v1 snapshot object is byte-for-byte intact

        assert v1["doi"] != v2["doi"]
        assert platform.store.list_keys(f"published/{ds}/2/")  # v2 exists beside v1
        resolved = platform.resolve_doi(v1["doi"])
        assert resolved == f"{prefix}manifest.json"
        manifest = json.loads(platform.store.peek(resolved))
        assert manifest["version"] == 1
        assert hashlib.sha256(platform.store.peek(resolved)).hexdigest() == before[resolved]


# =====================================================================================
# 5. RBAC oracle
# =====================================================================================

RBAC_ACTIONS = (
    "view_files", "download", "upload_files", "edit_tree", "edit_metadata",
    "edit_attributes", "change_status", "manage_grants",
    "submit_publication", "delete_dataset", "transfer_ownership",
)

# Hand-written role x action matrix: True = allowed. 5 roles x 11 actions = 55 cells.
RBAC_ORACLE = {
    "owner": {
        "view_files": True, "download": True, "upload_files": True, "edit_tree": True,
        "edit_metadata": True, "edit_attributes": True, "change_status": True,
        "manage_grants": True, "submit_publication": True, "delete_dataset": True,
        "transfer_ownership": True,
    },
    "manager": {
        "view_files": True, "download": True, "upload_files": True, "edit_tree": True,
        "edit_metadata": True, "edit_attributes": True, "change_status": True,
        "manage_grants": True, "submit_publication": False, "delete_dataset": False,
        "transfer_ownership": False,
    },
    "editor": {
        "view_files": True, "download": True, "upload_files": True, "edit_tree": True,
        "edit_metadata": True, "edit_attributes": False, "change_status": False,
        "manage_grants": False, "submit_publication": False, "delete_dataset": False,
        "transfer_ownership": False,
    },
    "viewer": {
        "view_files": True, "download": True, "upload_files": False, "edit_tree": False,
        "edit_metadata": False, "edit_attributes": False, "change_status": False,
        "manage_grants": False, "submit_publication": False, "delete_dataset": False,
        "transfer_ownership": False,
    },
    "none": {
        "view_files": False, "download": False, "upload_files": False, "edit_tree": False,
        "edit_metadata": False, "edit_attributes": False, "change_status": False,
        "manage_grants": False, "submit_publication": False, "delete_dataset": False,
        "transfer_ownership": False,
    },
}


def test_rbac_oracle(tmp_path):
    with criterion("RBAC oracle"):
        platform = Platform(tmp_path / "rbac", clock=ManualClock(), backend=MemoryBackend())
        ws = platform.create_workspace("Cortex Lab")
        users = {}
        for name in ("owner", "manager", "editor", "viewer", "none"):
            user = platform.create_user(name.title(), f"{name}@lab.org")
            platform.add_member(ws["id"], user["id"])
            users[name] = user
        ds = platform.create_dataset(users["owner"]["id"], ws["id"], "matrix-probe")
        for role in ("manager", "editor", "viewer"):
            platform.grant(users["owner"]["id"], ds["id"], "user", users[role]["id"], role)

        observed = {}
        for role, user in users.items():
            for action in RBAC_ACTIONS:
                try:
                    platform.access.require(user["id"], ds["id"], action)
                    observed[(role, action)] = True
                except errors.Forbidden:
                    observed[(role, action)] = False
        expected = {
            (role, action): RBAC_ORACLE[role][action]
            for role in RBAC_ORACLE
            for action in RBAC_ACTIONS
        }
        assert len(expected) == 55
        assert observed == expected

        # private by default: a fresh dataset is invisible to 19 of 20 members
        crowd = []
        for i in range(20):
            user = platform.create_user(f"User {i:02d}", f"u{i:02d}@lab.org")
            platform.add_member(ws["id"], user["id"])
            crowd.append(user)
        fresh = platform.create_dataset(crowd[0]["id"], ws["id"], "fresh-private")
        for user in crowd[1:]:
            assert platform.access.effective_role(user["id"], fresh["id"]) is None
            with pytest.raises(errors.Forbidden):
                platform.access.require(user["id"], fresh["id"], "view_files")
            visible = {d["id"] for d in platform.list_datasets(user["id"], ws["id"])}
            assert fresh["id"] not in visible
        owned = {d["id"] for d in platform.list_datasets(crowd[0]["id"], ws["id"])}
        assert fresh["id"] in owned


# =====================================================================================
# 6. Metadata round-trip
# =====================================================================================

_ENUM_PALETTE = ("red", "green", "blue", "ultraviolet")
_STRINGS = (
    "", "plain text", "with,comma", 'say "hi"', "line1\nline2",
    "tab\tdelimited", "café ☕", "x" * 40,
)
_REL_NAMES = ("derives_from", "belongs_to", "measures")


def _random_property(rng: random.Random, k: int) -> dict:
    ptype = rng.choice(PROPERTY_TYPES)
    prop = {"name": f"p{k}", "type": ptype, "required": rng.random() < 0.25}
    if ptype == "enum":
        prop["values"] = rng.sample(_ENUM_PALETTE, rng.randint(1, len(_ENUM_PALETTE)))
    return prop


def _random_value(rng: random.Random, prop: dict):
    ptype = prop["type"]
    if ptype == "string":
        return rng.choice(_STRINGS)
    if ptype == "integer":
        return rng.randint(-10**9, 10**9)
    if ptype == "number":
        return rng.choice([rng.randint(-10**6, 10**6), rng.uniform(-1e6, 1e6), 0.5, -1.25e-9])
    if ptype == "boolean":
        return rng.random() < 0.5
    if ptype == "date":
        return f"202{rng.randint(0, 5)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
    return rng.choice(prop["values"])  # enum


def _build_random_graph(platform, rng, caller, dataset_id, *, records_cap, edges_cap, cap_run, with_files):
    models = []
    for j in range(rng.randint(1, 4)):
        props = [_random_property(rng, k) for k in range(rng.randint(1, 6))]
        models.append(
            platform.define_model(caller, dataset_id, {"name": f"Model {chr(65 + j)}", "properties": props})
        )
    record_ids = []
    n_records = records_cap if cap_run else rng.randint(0, records_cap)
    for _ in range(n_records):
        model = rng.choice(models)
        values = {
            p["name"]: _random_value(rng, p)
            for p in model["properties"]
            if p["required"] or rng.random() < 0.6
        }
        record_ids.append(platform.create_record(caller, model["id"], values)["id"])
    if record_ids:
        n_edges = edges_cap if cap_run else rng.randint(0, edges_cap)
        made: set[str] = set()
        attempts = 0
        while len(made) < n_edges and attempts < n_edges * 8 + 16:
            attempts += 1
            rel = platform.link(
                caller, dataset_id, "record_record",
                name=rng.choice(_REL_NAMES),
                from_record=rng.choice(record_ids),
                to_record=rng.choice(record_ids),
            )
            made.add(rel["id"])
        if cap_run:
            assert len(made) == edges_cap
    if with_files and record_ids:
        nodes = [
            upload_file(platform, caller, dataset_id, f"data/linked-{n}.bin", b"link me %d" % n)["node_id"]
            for n in range(2)
        ]
        for _ in range(rng.randint(1, 4)):
            platform.link(
                caller, dataset_id, "record_file",
                record_id=rng.choice(record_ids), node_id=rng.choice(nodes),
            )


def _assert_graph_isomorphic(platform, dataset_id, parsed) -> None:
    live_models = {
        m.name: [p.to_dict() for p in m.properties]
        for m in platform.graph.dataset_models(dataset_id)
    }
    assert {m["name"]: m["properties"] for m in parsed["models"]} == live_models
    name_of = {m.id: m.name for m in platform.graph.dataset_models(dataset_id)}
    live_records = {
        r.id: (name_of[r.model_id], dict(r.values))
        for r in platform.graph.dataset_records(dataset_id)
    }
    assert {r["id"]: (r["model"], r["values"]) for r in parsed["records"]} == live_records
    live_rels = {
        (r.id, r.name, r.from_record, r.to_record)
        for r in platform.graph.dataset_relationships(dataset_id)
    }
    assert {(r["id"], r["name"], r["from"], r["to"]) for r in parsed["relationships"]} == live_rels
    live_links = {
        (r.id, platform.core.node_path(n))
        for r in platform.graph.dataset_records(dataset_id)
        for n in r.file_links
    }
    assert set(parsed["file_links"]) == live_links


def test_metadata_round_trip(tmp_path):
    with criterion("metadata round-trip", budget_seconds=30.0):
        rng = random.Random(0x9A4F)
        for i in range(50):
            platform = Platform(
                tmp_path / f"graph-{i:02d}", clock=ManualClock(), backend=MemoryBackend()
            )
            user = platform.create_user("Gen", "gen@lab.org")
            ws = platform.create_workspace("Graphs")
            platform.add_member(ws["id"], user["id"])
            ds = platform.create_dataset(user["id"], ws["id"], f"graph-{i:02d}")
            _build_random_graph(
                platform, rng, user["id"], ds["id"],
                records_cap=100, edges_cap=200, cap_run=(i == 0), with_files=(i % 10 == 0),
            )
            first = platform.graph.serialize_graph(ds["id"])
            second = platform.graph.serialize_graph(ds["id"])
            assert first == second  # double serialization is byte-identical
            _assert_graph_isomorphic(platform, ds["id"], parse_serialized(first))


# =====================================================================================
# 7. Lifecycle determinism
# =====================================================================================

_TIER_RANK = {"active": 0, "archive": 1, "deep_archive": 2}


class _ShadowStore:
    """Plain-dict oracle for the object store's read/delete/lifecycle behavior."""

    def __init__(self, start):
        self.entries: dict[str, dict] = {}
        self.now = start

    # each method mirrors one public store operation and returns ("ok", value)
    # or ("err", ExceptionName) for comparison against the real store

    def put(self, key, data):
        entry = self.entries.get(key)
        if key.startswith("published/") and entry is not None:
            return ("err", "ImmutableKey")
        if entry is None:
            entry = {"gens": [], "tier": "active", "last": None, "restore": None}
            self.entries[key] = entry
        entry["gens"].append({"data": data, "written_at": self.now, "deleted_at": None})
        entry["last"] = self.now
        return ("ok", None)

    def get(self, key):
        entry = self.entries.get(key)
        if entry is None:
            return ("err", "NotFound")
        gen = entry["gens"][-1]
        if gen["deleted_at"] is not None:
            return ("err", "NotFound")
        if entry["tier"] != "active":
            return ("err", "TierNotReadable")
        entry["last"] = self.now
        return ("ok", gen["data"])

    def peek(self, key):
        entry = self.entries.get(key)
        if entry is None:
            return ("err", "NotFound")
        gen = entry["gens"][-1]
        if gen["deleted_at"] is not None:
            return ("err", "NotFound")
        return ("ok", gen["data"])

    def delete(self, key):
        if key.startswith("published/"):
            return ("err", "ImmutableKey")
        entry = self.entries.get(key)
        if entry is None:
            return ("err", "NotFound")
        gen = entry["gens"][-1]
        if gen["deleted_at"] is not None:
            return ("err", "NotFound")
        gen["deleted_at"] = self.now
        return ("ok", None)

    def undelete(self, key):
        entry = self.entries.get(key)
        if entry is None:
            return ("err", "NotFound")
        gen = entry["gens"][-1]
        if gen["deleted_at"] is None:
            return ("err", "NotDeleted")
        age_days = (self.now - gen["deleted_at"]).total_seconds() / 86400.0
        if age_days > 30:
            return ("err", "WindowExpired")
        gen["deleted_at"] = None
        return ("ok", None)

    def purge(self, key):
        if key.startswith("published/"):
            return ("err", "ImmutableKey")
        if key not in self.entries:
            return ("err", "NotFound")
        del self.entries[key]
        return ("ok", None)

    def request_restore(self, key):
        entry = self.entries.get(key)
        if entry is None:
            return ("err", "NotFound")
        if entry["tier"] == "active":
            return ("err", "NotArchived")
        if entry["restore"] is None or entry["restore"].get("state") != "pending":
            entry["restore"] = {"state": "pending", "ticks_remaining": 2}
        return ("ok", dict(entry["restore"]))

    def sweep(self):
        out = []
        for key in sorted(self.entries):
            entry = self.entries[key]
            if entry["restore"] and entry["restore"]["state"] == "pending":
                entry["restore"]["ticks_remaining"] -= 1
                if entry["restore"]["ticks_remaining"] <= 0:
                    out.append({"key": key, "from": entry["tier"], "to": "active", "reason": "restore"})
                    entry["tier"] = "active"
                    entry["restore"] = {"state": "restored"}
                    entry["last"] = self.now
                continue
            if entry["last"] is None:
                continue
            idle_days = (self.now - entry["last"]).total_seconds() / 86400.0
            if key.startswith("published/"):
                age_days = (self.now - entry["gens"][0]["written_at"]).total_seconds() / 86400.0
                if age_days < 90:
                    continue
            if idle_days >= 365:
                target = "deep_archive"
            elif idle_days >= 90:
                target = "archive"
            else:
                continue
            if _TIER_RANK[target] > _TIER_RANK[entry["tier"]]:
                out.append({"key": key, "from": entry["tier"], "to": target, "reason": "idle"})
                entry["tier"] = target
                if entry["restore"] and entry["restore"]["state"] == "restored":
                    entry["restore"] = None
        return ("ok", out)


def _outcome(fn, *args):
    try:
        return ("ok", fn(*args))
    except errors.FairhavenError as exc:
        return ("err", type(exc).__name__)


def test_lifecycle_determinism(tmp_path):
    with criterion("lifecycle determinism", budget_seconds=30.0):
        store = ObjectStore(tmp_path / "store")
        start = ManualClock().now()
        shadow = _ShadowStore(start)
        rng = random.Random(20240531)
        keys = [f"data/k{i}" for i in range(18)] + [f"published/snap/{i}" for i in range(6)]
        published_written: dict[str, bytes] = {}
        ops = ("put", "get", "peek", "delete", "undelete", "purge", "restore", "advance", "sweep")
        weights = (28, 15, 10, 12, 8, 5, 8, 9, 5)
        reads_checked = sweeps = 0

        for _ in range(1000):
            op = rng.choices(ops, weights=weights)[0]
            key = rng.choice(keys)
            if op == "put":
                data = rng.randbytes(rng.randint(0, 2048))
                real = _outcome(store.put, key, data, shadow.now)
                want = shadow.put(key, data)
                assert real[0] == want[0] and (real[0] == "ok" or real[1] == want[1])
                if real[0] == "ok" and key.startswith("published/"):
                    published_written[key] = data
            elif op == "get":
                real = _outcome(store.get, key, shadow.now)
                want = shadow.get(key)
                assert (real[0], real[1] if real[0] == "err" else None) == \
                       (want[0], want[1] if want[0] == "err" else None)
                if real[0] == "ok":
                    assert real[1] == want[1]
                    reads_checked += 1
            elif op == "peek":
                real = _outcome(store.peek, key)
                want = shadow.peek(key)
                assert real[0] == want[0]
                if real[0] == "ok":
                    assert real[1] == want[1]
                    reads_checked += 1
                else:
                    assert real[1] == want[1]
            elif op == "delete":
                real = _outcome(store.delete, key, shadow.now)
                want = shadow.delete(key)
                assert real[0] == want[0] and (real[0] == "ok" or real[1] == want[1])
            elif op == "undelete":
                real = _outcome(store.undelete, key, shadow.now)
                want = shadow.undelete(key)
                assert real[0] == want[0] and (real[0] == "ok" or real[1] == want[1])
            elif op == "purge":
                real = _outcome(store.purge, key)
                want = shadow.purge(key)
                assert real[0] == want[0] and (real[0] == "ok" or real[1] == want[1])
            elif op == "restore":
                real = _outcome(store.request_restore, key, shadow.now)
                want = shadow.request_restore(key)
                assert real[0] == want[0]
                assert real[1] == want[1]  # pending/restored dict or error name
            elif op == "advance":
                shadow.now += timedelta(days=rng.choice([
                    rng.uniform(0, 5), rng.uniform(20, 120), rng.uniform(300, 400),
                ]))
            else:  # sweep
                sweeps += 1
                real = [t.to_dict() for t in store.apply_lifecycle(shadow.now)]
                assert real == shadow.sweep()[1]

        assert sweeps > 10 and reads_checked > 50

        # final audit: live-key listing, tiers, and every byte the oracle predicts
        live = sorted(k for k, e in shadow.entries.items() if e["gens"][-1]["deleted_at"] is None)
        assert store.list_keys("") == live
        for key, entry in shadow.entries.items():
            obj = store.head(key)
            assert obj.tier == entry["tier"]
            assert len(obj.generations) == len(entry["gens"])
            if entry["gens"][-1]["deleted_at"] is None:
                assert store.peek(key) == entry["gens"][-1]["data"]

        # published snapshot objects are never hard-deleted, whatever happened above
        for key, data in published_written.items():
            obj = store.head(key)  # still indexed
            assert obj.generations and obj.generations[-1].deleted_at is None
            assert store.peek(key) == data


# =====================================================================================
# 8. End-to-end FAIR pipeline
# =====================================================================================


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_end_to_end_fair_pipeline(tmp_path, monkeypatch):
    with criterion("end-to-end FAIR pipeline", budget_seconds=30.0):
        platform = Platform(tmp_path / "server", clock=ManualClock(), webhook_backoff_unit=0.0)
        app = create_app(platform, admin_token="admintok")
        port = _free_port()
        server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.time() + 15
        while not server.started:
            time.sleep(0.02)
            assert time.time() < deadline, "server did not come up"
        try:
            base = f"http://127.0.0.1:{port}"
            admin = {"authorization": "Bearer admintok"}
            owner_h = {"authorization": "Bearer olive-tok"}
            reviewer_h = {"authorization": "Bearer rei-tok"}

            def ok(resp):
                assert resp.status_code < 300, f"{resp.request.method} {resp.url} -> {resp.status_code}: {resp.text}"
                return resp.json()

            # provision the org over the admin API
            owner = ok(requests.post(f"{base}/v1/admin/users", headers=admin,
                                     json={"display_name": "Olive", "email": "olive@lab.org", "token": "olive-tok"}))
            reviewer = ok(requests.post(f"{base}/v1/admin/users", headers=admin,
                                        json={"display_name": "Rei", "email": "rei@lab.org", "token": "rei-tok"}))
            ws = ok(requests.post(f"{base}/v1/admin/workspaces", headers=admin, json={"name": "Cortex Lab"}))
            for uid in (owner["id"], reviewer["id"]):
                ok(requests.post(f"{base}/v1/admin/workspaces/{ws['id']}/members", headers=admin,
                                 json={"user_id": uid}))
            team = ok(requests.post(f"{base}/v1/admin/workspaces/{ws['id']}/teams", headers=admin,
                                    json={"name": "publishers"}))
            ok(requests.post(f"{base}/v1/admin/teams/{team['id']}/members", headers=admin,
                             json={"user_id": reviewer["id"]}))
            ok(requests.post(f"{base}/v1/admin/workspaces/{ws['id']}/publishing-team", headers=admin,
                             json={"team_id": team["id"]}))
            ds = ok(requests.post(f"{base}/v1/datasets", headers=owner_h,
                                  json={"workspace_id": ws["id"], "name": "vagus-map"}))

            # local working copy, uploaded through the agent
            src = tmp_path / "source"
            (src / "data").mkdir(parents=True)
            payload = random.Random(7).randbytes(256 * 1024)
            (src / "data" / "signal.bin").write_bytes(payload)
            (src / "readme.md").write_text(
                "# Vagus map\n\n## Study Purpose\n\nMap the vagus nerve.\n\n"
                "## Data Collection\n\nMicro-CT scans.\n"
            )
            monkeypatch.setenv("FH_CONFIG_DIR", str(tmp_path / "agent-config"))
            monkeypatch.setattr(agent, "RETRY_BACKOFF_BASE", 0.0)
            runner = CliRunner()

            def fh(*args):
                result = runner.invoke(agent.cli, [str(a) for a in args])
                assert result.exit_code == 0, f"fh {args}: {result.output}\n{result.stderr}"
                return result

            fh("profile", "add", "main", "--server-url", base, "--token", "olive-tok", "--use")
            created = fh("manifest", "create", "vagus-map", src / "data", src / "readme.md", "--json")
            manifest_id = json.loads(created.stdout)["id"]
            fh("upload", manifest_id)

            # curate metadata against the uploaded tree
            tree = ok(requests.get(f"{base}/v1/datasets/{ds['id']}/tree", headers=owner_h))
            data_folder = next(c for c in tree["children"] if c["name"] == "data")
            signal = next(c for c in data_folder["children"] if c["name"] == "signal.bin")
            model = ok(requests.post(f"{base}/v1/datasets/{ds['id']}/models", headers=owner_h,
                                     json={"name": "subject",
                                           "properties": [{"name": "species", "type": "string", "required": True}]}))
            record = ok(requests.post(f"{base}/v1/models/{model['id']}/records", headers=owner_h,
                                      json={"values": {"species": "Rattus norvegicus"}}))
            ok(requests.post(f"{base}/v1/datasets/{ds['id']}/links", headers=owner_h,
                             json={"kind": "record_file", "record_id": record["id"], "node_id": signal["id"]}))
            ok(requests.patch(f"{base}/v1/datasets/{ds['id']}", headers=owner_h, json={
                "subtitle": "Mapping the vagus nerve",
                "description": "Micro-CT derived maps",
                "license": "CC-BY-4.0",
                "tags": ["neuro"],
                "contributors": [{"name": "Olive"}],
            }))

            # submit -> review -> publish under a 30-day embargo
            request = ok(requests.post(f"{base}/v1/datasets/{ds['id']}/publication", headers=owner_h, json={}))
            queue = ok(requests.get(f"{base}/v1/workspaces/{ws['id']}/review-queue", headers=reviewer_h))
            assert any(row["id"] == request["id"] for row in queue)
            ok(requests.post(f"{base}/v1/publication/{request['id']}/review", headers=reviewer_h,
                             json={"decision": "accept", "note": "ready"}))
            version = ok(requests.post(f"{base}/v1/publication/{request['id']}/publish", headers=reviewer_h,
                                       json={"embargo_days": 30}))
            assert version["embargo_until"] is not None and not version["public"]

            # embargoed -> hidden from the public catalog
            assert ok(requests.get(f"{base}/v1/discover/datasets")) == []

            # sweep the clock past the embargo
            ok(requests.post(f"{base}/v1/admin/clock", headers=admin, json={"days": 30}))
            swept = ok(requests.post(f"{base}/v1/admin/sweep", headers=admin))
            assert any(v["doi"] == version["doi"] for v in swept["embargo_released"])
            catalog = ok(requests.get(f"{base}/v1/discover/datasets"))
            assert [card["doi"] for card in catalog] == [version["doi"]]
            page = ok(requests.get(f"{base}/v1/discover/datasets/{ds['id']}/versions/1"))
            assert page["header"]["title"] == "vagus-map"
            assert page["overview"]["study_purpose"] == "Map the vagus nerve."

            # download by DOI through the agent; it verifies checksums itself
            dest = tmp_path / "downloaded"
            result = fh("download", version["doi"], dest)
            assert result.stdout.strip() == str(dest)
            assert "verified" in result.stderr
            assert (dest / "files" / "data" / "signal.bin").read_bytes() == payload
            manifest = json.loads((dest / "manifest.json").read_text())
            assert manifest["doi"] == version["doi"]
            listed = {f["path"]: f["sha256"] for f in manifest["files"]}
            assert listed["data/signal.bin"] == hashlib.sha256(payload).hexdigest()
        finally:
            server.should_exit = True
            thread.join(timeout=5)
            platform.webhooks.drain()
