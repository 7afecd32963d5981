"""REST surface: auth, routing, error payloads, and wire shapes over HTTP."""

from __future__ import annotations

import hashlib
import io
import json
import tarfile

import pytest
from fastapi.testclient import TestClient

from fairhaven.api import create_app

from conftest import make_publishable, publish_version, upload_file

ADMIN = {"Authorization": "Bearer admintok"}


def auth(user: dict) -> dict:
    return {"Authorization": f"Bearer {user['token']}"}


@pytest.fixture
def client(platform):
    app = create_app(platform, admin_token="admintok")
    with TestClient(app) as c:
        yield c


# -- auth ---------------------------------------------------------------------------


def test_requests_without_token_are_rejected(client):
    r = client.get("/v1/me")
    assert r.status_code == 401
    assert r.json()["error"] == "Unauthorized"

    r = client.get("/v1/datasets", headers={"Authorization": "Bearer nope"})
    assert r.status_code == 401
    assert "unknown token" in r.json()["message"]


def test_admin_routes_need_the_admin_token(client, org):
    body = {"display_name": "Eve", "email": "eve@lab.org"}
    assert client.post("/v1/admin/users", json=body).status_code == 401
    assert client.post("/v1/admin/users", json=body, headers=auth(org.owner)).status_code == 401

    r = client.post("/v1/admin/users", json=body, headers=ADMIN)
    assert r.status_code == 200
    assert r.json()["email"] == "eve@lab.org"
    assert r.json()["token"]  # usable immediately


def test_admin_provisioning_builds_a_working_org(client):
    alice = client.post(
        "/v1/admin/users",
        json={"display_name": "Alice", "email": "alice@x.org", "token": "alice-tok"},
        headers=ADMIN,
    ).json()
    assert alice["token"] == "alice-tok"
    bob = client.post(
        "/v1/admin/users", json={"display_name": "Bob", "email": "bob@x.org"}, headers=ADMIN
    ).json()

    ws = client.post("/v1/admin/workspaces", json={"name": "Wet Lab"}, headers=ADMIN).json()
    for u in (alice, bob):
        r = client.post(
            f"/v1/admin/workspaces/{ws['id']}/members", json={"user_id": u["id"]}, headers=ADMIN
        )
        assert r.status_code == 200
    team = client.post(
        f"/v1/admin/workspaces/{ws['id']}/teams", json={"name": "curators"}, headers=ADMIN
    ).json()
    assert client.post(
        f"/v1/admin/teams/{team['id']}/members", json={"user_id": bob["id"]}, headers=ADMIN
    ).status_code == 200
    assert client.post(
        f"/v1/admin/workspaces/{ws['id']}/publishing-team",
        json={"team_id": team["id"]},
        headers=ADMIN,
    ).status_code == 200

    me = client.get("/v1/me", headers={"Authorization": "Bearer alice-tok"}).json()
    assert me["email"] == "alice@x.org"

    spaces = client.get("/v1/workspaces", headers={"Authorization": "Bearer alice-tok"}).json()
    assert [w["name"] for w in spaces] == ["Wet Lab"]

    # a user outside the workspace sees nothing
    carol = client.post(
        "/v1/admin/users", json={"display_name": "Carol", "email": "c@x.org"}, headers=ADMIN
    ).json()
    assert client.get("/v1/workspaces", headers=auth(carol)).json() == []


# -- error payloads -----------------------------------------------------------------


def test_unknown_routes_return_json_404(client):
    r = client.get("/v1/definitely/not/here")
    assert r.status_code == 404
    assert r.json()["error"] == "NotFound"


def test_domain_errors_carry_code_message_and_details(client, org):
    r = client.get("/v1/datasets/" + "0" * 32, headers=auth(org.owner))
    assert r.status_code == 404
    assert r.json()["error"] == "NotFound"

    r = client.patch(
        f"/v1/datasets/{org.dataset['id']}",
        json={"favorite_color": "teal"},
        headers=auth(org.owner),
    )
    assert r.status_code == 400
    assert r.json()["error"] == "SchemaViolation"

    r = client.get(f"/v1/datasets/{org.dataset['id']}", headers=auth(org.outsider))
    assert r.status_code == 403
    assert r.json()["error"] == "Forbidden"


# -- datasets ------------------------------------------------------------------------


def test_dataset_crud_over_http(client, org):
    ws = org.workspace["id"]
    r = client.post(
        "/v1/datasets", json={"workspace_id": ws, "name": "cortex-atlas"}, headers=auth(org.owner)
    )
    assert r.status_code == 200
    ds = r.json()

    dup = client.post(
        "/v1/datasets", json={"workspace_id": ws, "name": "cortex-atlas"}, headers=auth(org.reviewer)
    )
    assert dup.status_code == 409
    assert dup.json()["error"] == "NameConflict"

    found = client.get("/v1/datasets", params={"name": "cortex-atlas"}, headers=auth(org.owner))
    assert found.json()["id"] == ds["id"]

    mine = client.get("/v1/datasets", params={"workspace_id": ws}, headers=auth(org.owner))
    assert {d["id"] for d in mine.json()} == {ds["id"], org.dataset["id"]}

    patched = client.patch(
        f"/v1/datasets/{ds['id']}",
        json={"subtitle": "layer by layer", "tags": ["Cortex", "cortex"]},
        headers=auth(org.owner),
    )
    assert patched.json()["attributes"]["subtitle"] == "layer by layer"
    assert patched.json()["attributes"]["tags"] == ["cortex"]

    gone = client.delete(f"/v1/datasets/{ds['id']}", headers=auth(org.owner))
    assert gone.json() == {"deleted": True}
    assert client.get(f"/v1/datasets/{ds['id']}", headers=auth(org.owner)).status_code == 404


def test_status_labels_and_collections_routes(client, org):
    ws = org.workspace["id"]
    ds = org.dataset["id"]
    assert client.post(
        f"/v1/admin/workspaces/{ws}/status-labels",
        json={"labels": ["No Status", "Sequencing", "Done"]},
        headers=ADMIN,
    ).status_code == 200

    r = client.post(f"/v1/datasets/{ds}/status", json={"status": "Sequencing"}, headers=auth(org.owner))
    assert r.json()["status"] == "Sequencing"

    bad = client.post(f"/v1/datasets/{ds}/status", json={"status": "Lost"}, headers=auth(org.owner))
    assert bad.status_code == 400

    r = client.post(
        f"/v1/datasets/{ds}/collections",
        json={"collections": ["maps", "pilot"]},
        headers=auth(org.owner),
    )
    assert r.json()["collections"] == ["maps", "pilot"]


# -- tree ----------------------------------------------------------------------------


def test_tree_mutations_and_activity_over_http(client, org):
    ds = org.dataset["id"]
    root = client.get(f"/v1/datasets/{ds}/tree", headers=auth(org.owner)).json()
    r = client.post(
        f"/v1/datasets/{ds}/tree",
        json={"op": "create_folder", "target": root["id"], "args": {"name": "raw"}},
        headers=auth(org.owner),
    )
    assert r.status_code == 200
    raw_id = r.json()["node"]["id"]
    client.post(
        f"/v1/datasets/{ds}/tree",
        json={"op": "rename", "target": raw_id, "args": {"name": "raw-data"}},
        headers=auth(org.owner),
    )

    tree = client.get(f"/v1/datasets/{ds}/tree", headers=auth(org.owner)).json()
    names = {child["name"] for child in tree["children"]}
    assert "raw-data" in names

    log = client.get(
        f"/v1/datasets/{ds}/activity", params={"from_seq": 1, "limit": 2}, headers=auth(org.owner)
    ).json()
    assert len(log) == 2
    assert log[0]["seq"] == 1

    # viewer-less outsider cannot read the tree
    assert client.get(f"/v1/datasets/{ds}/tree", headers=auth(org.outsider)).status_code == 403


# -- uploads -------------------------------------------------------------------------


def test_chunked_upload_and_download_over_http(client, org):
    ds = org.dataset["id"]
    payload = bytes(range(256)) * 512  # 128 KiB
    sha = hashlib.sha256(payload).hexdigest()
    man = client.post(
        f"/v1/datasets/{ds}/manifests",
        json={"entries": [{"path": "raw/blob.bin", "size": len(payload), "checksum": sha}]},
        headers=auth(org.owner),
    ).json()

    half = len(payload) // 2
    r = client.put(
        f"/v1/manifests/{man['id']}/chunks",
        params={"path": "raw/blob.bin", "offset": 0},
        content=payload[:half],
        headers=auth(org.owner),
    )
    assert r.status_code == 200
    assert r.json()["bytes_received"] == half

    # wrong offset: a conflict carrying the resume point
    r = client.put(
        f"/v1/manifests/{man['id']}/chunks",
        params={"path": "raw/blob.bin", "offset": 17},
        content=payload[17 : half + 17],
        headers=auth(org.owner),
    )
    assert r.status_code == 409
    assert r.json()["error"] == "OffsetMismatch"
    assert r.json()["expected"] == half

    client.put(
        f"/v1/manifests/{man['id']}/chunks",
        params={"path": "raw/blob.bin", "offset": half},
        content=payload[half:],
        headers=auth(org.owner),
    )
    fin = client.post(
        f"/v1/manifests/{man['id']}/entries/raw/blob.bin/finalize", headers=auth(org.owner)
    )
    assert fin.json()["status"] == "verified"

    sync = client.get(f"/v1/manifests/{man['id']}", headers=auth(org.owner)).json()
    assert sync["state"] == "finalized"
    verify = client.post(f"/v1/manifests/{man['id']}/verify", headers=auth(org.owner)).json()
    assert verify["complete"] is True

    # another chunk after completion is a hard conflict
    late = client.put(
        f"/v1/manifests/{man['id']}/chunks",
        params={"path": "raw/blob.bin", "offset": len(payload)},
        content=b"x",
        headers=auth(org.owner),
    )
    assert late.status_code == 409
    assert late.json()["error"] == "ManifestFinalized"

    tree = client.get(f"/v1/datasets/{ds}/tree", headers=auth(org.owner)).json()
    raw = next(c for c in tree["children"] if c["name"] == "raw")
    blob = next(c for c in raw["children"] if c["name"] == "blob.bin")
    dl = client.get(f"/v1/datasets/{ds}/files/{blob['id']}", headers=auth(org.owner))
    assert dl.content == payload
    assert 'filename="blob.bin"' in dl.headers["content-disposition"]

    report = client.get(f"/v1/datasets/{ds}/storage-report", headers=auth(org.owner)).json()
    assert sum(report["bytes_by_tier"].values()) >= len(payload)


# -- metadata ------------------------------------------------------------------------


def test_metadata_model_record_and_query_routes(client, org, platform):
    ds = org.dataset["id"]
    model = client.post(
        f"/v1/datasets/{ds}/models",
        json={
            "name": "subject",
            "display_name": "Subject",
            "properties": [
                {"name": "species", "type": "string", "required": True},
                {"name": "age_days", "type": "integer"},
            ],
        },
        headers=auth(org.owner),
    ).json()
    assert [m["name"] for m in client.get(f"/v1/datasets/{ds}/models", headers=auth(org.owner)).json()] == ["subject"]

    rec = client.post(
        f"/v1/models/{model['id']}/records",
        json={"values": {"species": "rat", "age_days": 90}},
        headers=auth(org.owner),
    ).json()
    rec2 = client.post(
        f"/v1/models/{model['id']}/records",
        json={"values": {"species": "mouse", "age_days": 30}},
        headers=auth(org.owner),
    ).json()

    patched = client.patch(
        f"/v1/records/{rec2['id']}", json={"values": {"age_days": 31}}, headers=auth(org.owner)
    ).json()
    assert patched["values"]["age_days"] == 31

    linked = client.post(
        f"/v1/datasets/{ds}/links",
        json={
            "kind": "record_record",
            "name": "littermate_of",
            "from_record": rec["id"],
            "to_record": rec2["id"],
        },
        headers=auth(org.owner),
    )
    assert linked.status_code == 200

    upload_file(platform, org.owner["id"], ds, "data/scan.dat", b"12345")
    tree = client.get(f"/v1/datasets/{ds}/tree", headers=auth(org.owner)).json()
    folder = next(c for c in tree["children"] if c["name"] == "data")
    node = folder["children"][0]
    assert client.post(
        f"/v1/datasets/{ds}/links",
        json={"kind": "record_file", "record_id": rec["id"], "node_id": node["id"]},
        headers=auth(org.owner),
    ).status_code == 200

    rows = client.get(
        f"/v1/datasets/{ds}/records",
        params={
            "model": "subject",
            "predicate": json.dumps([{"property": "age_days", "op": "gt", "value": 40}]),
        },
        headers=auth(org.owner),
    ).json()
    assert [r["values"]["species"] for r in rows] == ["rat"]

    neighbors = client.get(
        f"/v1/datasets/{ds}/records",
        params={
            "model": "subject",
            "predicate": json.dumps([{"property": "species", "op": "eq", "value": "rat"}]),
            "traverse": json.dumps(
                {"relationship_name": "littermate_of", "target_model": "subject"}
            ),
        },
        headers=auth(org.owner),
    ).json()
    assert [r["values"]["species"] for r in neighbors] == ["mouse"]

    bad = client.get(
        f"/v1/datasets/{ds}/records",
        params={"model": "subject", "predicate": "{not json"},
        headers=auth(org.owner),
    )
    assert bad.status_code == 400
    assert bad.json()["error"] == "InvalidSchema"

    graph = client.get(f"/v1/datasets/{ds}/graph", headers=auth(org.owner)).json()
    assert len(graph["records"]) == 2
    assert sum(len(r["file_links"]) for r in graph["records"]) == 1


# -- grants --------------------------------------------------------------------------


def test_grant_revoke_and_transfer_routes(client, org):
    ds = org.dataset["id"]
    view = lambda user: client.get(f"/v1/datasets/{ds}", headers=auth(user)).status_code

    assert view(org.outsider) == 403
    r = client.post(
        f"/v1/datasets/{ds}/grants",
        json={"principal": {"kind": "user", "id": org.outsider["id"]}, "role": "viewer"},
        headers=auth(org.owner),
    )
    assert r.status_code == 200
    assert view(org.outsider) == 200

    grants = client.get(f"/v1/datasets/{ds}/grants", headers=auth(org.owner)).json()
    assert any(
        g["principal"] == {"kind": "user", "id": org.outsider["id"]} and g["role"] == "viewer"
        for g in grants
    )

    assert client.post(
        f"/v1/datasets/{ds}/grants/revoke",
        json={"principal": {"kind": "user", "id": org.outsider["id"]}},
        headers=auth(org.owner),
    ).status_code == 200
    assert view(org.outsider) == 403

    # ownership transfer hands over the owner-only routes
    r = client.post(
        f"/v1/datasets/{ds}/transfer", json={"new_owner_id": org.reviewer["id"]}, headers=auth(org.owner)
    )
    assert r.status_code == 200
    back = client.post(
        f"/v1/datasets/{ds}/transfer", json={"new_owner_id": org.owner["id"]}, headers=auth(org.owner)
    )
    assert back.status_code == 403


# -- publishing ----------------------------------------------------------------------


def test_publication_flow_and_public_reads_over_http(client, org, platform):
    ds = org.dataset["id"]
    payload = b"fair enough"
    make_publishable(platform, org, data=payload)
    upload_file(
        platform, org.owner["id"], ds, "readme.md",
        b"# Vagus map\n\n## Study Purpose\n\nMap the nerve.\n",
    )

    req = client.post(f"/v1/datasets/{ds}/publication", json={}, headers=auth(org.owner)).json()
    assert req["state"] == "requested"

    queue = client.get(
        f"/v1/workspaces/{org.workspace['id']}/review-queue", headers=auth(org.reviewer)
    ).json()
    assert [q["id"] for q in queue] == [req["id"]]

    accepted = client.post(
        f"/v1/publication/{req['id']}/review",
        json={"decision": "accept", "note": "solid"},
        headers=auth(org.reviewer),
    ).json()
    assert accepted["state"] == "accepted"

    version = client.post(
        f"/v1/publication/{req['id']}/publish", json={}, headers=auth(org.reviewer)
    ).json()
    assert version["version"] == 1
    assert version["doi"].startswith("10.70000/fh.")

    versions = client.get(f"/v1/datasets/{ds}/versions", headers=auth(org.owner)).json()
    assert [v["version"] for v in versions] == [1]

    # DOI resolution is public and redirects to the published manifest
    r = client.get(f"/v1/doi/{version['doi']}", follow_redirects=False)
    assert r.status_code == 302
    location = r.headers["location"]
    assert location == f"/v1/published/{ds}/1/manifest.json"

    manifest = client.get(location).json()
    assert manifest["doi"] == version["doi"]
    assert manifest["readme"] == "readme.md"

    readme = client.get(f"/v1/published/{ds}/1/readme.md")
    assert readme.content.startswith(b"# Vagus map")

    # Discover: catalog, page, tar download — all public
    catalog = client.get("/v1/discover/datasets").json()
    assert [e["dataset_id"] for e in catalog] == [ds]
    assert client.get("/v1/discover/datasets", params={"text": "no-such"}).json() == []
    page = client.get(f"/v1/discover/datasets/{ds}/versions/1").json()
    assert page["header"]["title"] == "vagus-map"
    assert page["overview"] == {"study_purpose": "Map the nerve."}

    tar_bytes = client.get(f"/v1/discover/datasets/{ds}/versions/1/download").content
    with tarfile.open(fileobj=io.BytesIO(tar_bytes)) as tf:
        names = tf.getnames()
        assert "manifest.json" in names
        member = tf.extractfile("files/data/payload.bin")
        assert member is not None and member.read() == payload


def test_requester_pays_gates_public_objects(client, org, platform):
    ds = org.dataset["id"]
    make_publishable(platform, org)
    publish_version(platform, org)

    r = client.post(
        f"/v1/datasets/{ds}/access-mode", json={"mode": "requester_pays"}, headers=auth(org.owner)
    )
    assert r.status_code == 200

    # the manifest stays free to read (it is the catalog card) ...
    assert client.get(f"/v1/published/{ds}/1/manifest.json").status_code == 200

    # ... but payload bytes and the bundled tar need a payer token
    blocked = client.get(f"/v1/published/{ds}/1/files/data/payload.bin")
    assert blocked.status_code == 403
    assert blocked.json()["error"] == "PayerRequired"
    assert client.get(f"/v1/discover/datasets/{ds}/versions/1/download").status_code == 403

    paid = client.get(
        f"/v1/published/{ds}/1/files/data/payload.bin", params={"payer_token": "grant-42"}
    )
    assert paid.status_code == 200
    assert paid.content == b"payload-bytes"

    bad_mode = client.post(
        f"/v1/datasets/{ds}/access-mode", json={"mode": "free-for-all"}, headers=auth(org.owner)
    )
    assert bad_mode.status_code == 400


# -- webhooks ------------------------------------------------------------------------


def test_webhook_registration_and_delivery_log_routes(client, org, platform, transport):
    ws = org.workspace["id"]
    hook = client.post(
        "/v1/webhooks",
        json={
            "workspace_id": ws,
            "url": "https://hooks.lab.org/fh",
            "events": ["dataset.updated"],
            "secret": "s3cret",
        },
        headers=auth(org.owner),
    ).json()

    denied = client.post(
        "/v1/webhooks",
        json={"workspace_id": ws, "url": "https://x.org", "events": ["dataset.updated"], "secret": "s"},
        headers=auth(org.stranger),
    )
    assert denied.status_code == 403

    client.patch(f"/v1/datasets/{org.dataset['id']}", json={"subtitle": "s"}, headers=auth(org.owner))
    platform.webhooks.drain()

    log = client.get(f"/v1/webhooks/{hook['id']}/deliveries", headers=auth(org.reviewer)).json()
    assert len(log) == 1
    assert log[0]["status"] == "delivered"
    assert transport.calls[0]["url"] == "https://hooks.lab.org/fh"

    assert client.get(
        f"/v1/webhooks/{hook['id']}/deliveries", headers=auth(org.stranger)
    ).status_code == 403
    assert client.get("/v1/webhooks/" + "0" * 32 + "/deliveries", headers=auth(org.owner)).status_code == 404


# -- admin clock + sweep ---------------------------------------------------------------


def test_clock_control_and_sweep_release_embargoes(client, org, platform, clock):
    make_publishable(platform, org)
    version = publish_version(platform, org, embargo_days=30)
    assert version["embargo_until"]

    # hidden while embargoed
    assert client.get("/v1/discover/datasets").json() == []

    r = client.post("/v1/admin/clock", json={"days": 30}, headers=ADMIN)
    assert r.status_code == 200
    assert r.json()["now"] == "2024-01-31T00:00:00Z"

    swept = client.post("/v1/admin/sweep", headers=ADMIN).json()
    assert [v["version"] for v in swept["embargo_released"]] == [1]
    assert swept["transitions"] == []

    assert [e["dataset_id"] for e in client.get("/v1/discover/datasets").json()] == [org.dataset["id"]]

    pinned = client.post("/v1/admin/clock", json={"set": "2025-06-01T00:00:00Z"}, headers=ADMIN)
    assert pinned.json()["now"] == "2025-06-01T00:00:00Z"
