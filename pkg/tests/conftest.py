"""Shared fixtures: a platform on a manual clock plus a small seeded org."""

from __future__ import annotations

import hashlib
from types import SimpleNamespace

import pytest

from fairhaven.clock import ManualClock
from fairhaven.persistence import MemoryBackend
from fairhaven.service import Platform

# One line per release criterion, appended by tests/test_acceptance.py and
# echoed after the run so the verdicts survive in captured output.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class RecordingTransport:
    """Webhook transport stub: records posts, answers with a scripted status."""

    def __init__(self):
        self.calls = []
        self.statuses = [200]  # popped left to right; last one sticks

    def __call__(self, url: str, body: bytes, headers: dict) -> int:
        self.calls.append({"url": url, "body": body, "headers": dict(headers)})
        if len(self.statuses) > 1:
            return self.statuses.pop(0)
        return self.statuses[0]


@pytest.fixture
def clock():
    return ManualClock()


@pytest.fixture
def transport():
    return RecordingTransport()


@pytest.fixture
def platform(tmp_path, clock, transport):
    p = Platform(
        tmp_path / "data",
        clock=clock,
        backend=MemoryBackend(),
        webhook_transport=transport,
        webhook_backoff_unit=0.0,
    )
    yield p
    p.webhooks.drain()


@pytest.fixture
def org(platform):
    """One workspace, four users, a publishing team, one dataset.

    owner: dataset owner; reviewer/reviewer2: publishing team members;
    outsider: workspace member with no grant on the dataset.
    """
    owner = platform.create_user("Olive Owner", "olive@lab.org")
    reviewer = platform.create_user("Rei Reviewer", "rei@lab.org")
    reviewer2 = platform.create_user("Ray Reviewer", "ray@lab.org")
    outsider = platform.create_user("Oscar Outsider", "oscar@lab.org")
    stranger = platform.create_user("Sam Stranger", "sam@elsewhere.org")
    ws = platform.create_workspace("Cortex Lab")
    for user in (owner, reviewer, reviewer2, outsider):
        platform.add_member(ws["id"], user["id"])
    team = platform.create_team(ws["id"], "publishers")
    platform.add_team_member(team["id"], reviewer["id"])
    platform.add_team_member(team["id"], reviewer2["id"])
    platform.set_publishing_team(ws["id"], team["id"])
    ds = platform.create_dataset(owner["id"], ws["id"], "vagus-map")
    return SimpleNamespace(
        owner=owner, reviewer=reviewer, reviewer2=reviewer2, outsider=outsider,
        stranger=stranger, workspace=ws, team=team, dataset=ds,
    )


def upload_file(platform, user_id, dataset_id, path, data: bytes, chunk_size: int = 32 * 1024):
    """Drive the chunk protocol end to end; returns the finalize result."""
    checksum = hashlib.sha256(data).hexdigest()
    manifest = platform.create_manifest(
        user_id, dataset_id, [{"path": path, "size": len(data), "checksum": checksum}]
    )
    offset = 0
    while offset < len(data):
        ack = platform.upload_chunk(user_id, manifest["id"], path, offset, data[offset:offset + chunk_size])
        offset = ack["bytes_received"]
    return platform.finalize_entry(user_id, manifest["id"], path)


REQUIRED_ATTRIBUTES = {
    "subtitle": "a subtitle",
    "description": "what this dataset is",
    "license": "CC-BY-4.0",
    "tags": ["test"],
    "contributors": [{"name": "Olive Owner"}],
}


def make_publishable(platform, org, data: bytes = b"payload-bytes"):
    """Upload one file and fill every required publication field."""
    upload_file(platform, org.owner["id"], org.dataset["id"], "data/payload.bin", data)
    platform.update_attributes(org.owner["id"], org.dataset["id"], dict(REQUIRED_ATTRIBUTES))


def publish_version(platform, org, embargo_days: int = 0) -> dict:
    """submit -> accept -> publish; returns the version record."""
    request = platform.submit_for_review(org.owner["id"], org.dataset["id"])
    platform.review(org.reviewer["id"], request["id"], "accept")
    return platform.publish(org.reviewer["id"], request["id"], embargo_days=embargo_days)
