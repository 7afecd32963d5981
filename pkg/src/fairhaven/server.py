"""Server entry point: environment-driven wiring for the REST service.

Environment variables:
    FH_DATA_DIR     state + object store directory (default ./fh-data)
    FH_BIND_ADDR    host:port to bind (default 127.0.0.1:8444)
    FH_CLOCK        "real" (default) or "manual" — manual enables the
                    /v1/admin/clock routes for deterministic test drives
    FH_ADMIN_TOKEN  bearer token for /v1/admin routes (generated and printed
                    if unset)
    FH_STATIC_DIR   directory with the companion web UI to serve at /
    FH_CONFIG       JSON file: {"lifecycle": {...}, "rates": {...},
                    "webhook_backoff_unit_seconds": float}
    FH_SEED         JSON file provisioning users/workspace/teams on first boot
"""

from __future__ import annotations

import json
import os
import secrets
from pathlib import Path

from .clock import ManualClock, SystemClock
from .objectstore import LifecyclePolicy
from .service import Platform


def build_platform(data_dir: str | None = None) -> Platform:
    data_dir = data_dir or os.environ.get("FH_DATA_DIR", "./fh-data")
    clock = ManualClock() if os.environ.get("FH_CLOCK", "real") == "manual" else SystemClock()
    policy = None
    rates = None
    backoff = 1.0
    config_path = os.environ.get("FH_CONFIG")
    if config_path:
        config = json.loads(Path(config_path).read_text())
        if "lifecycle" in config:
            policy = LifecyclePolicy.from_dict(config["lifecycle"])
        rates = config.get("rates")
        backoff = float(config.get("webhook_backoff_unit_seconds", 1.0))
    return Platform(
        data_dir, clock=clock, policy=policy, rates=rates, webhook_backoff_unit=backoff
    )


def apply_seed(platform: Platform, seed_path: str) -> None:
    """First-boot provisioning from a JSON description; no-op on reruns."""
    if platform.core.users:
        return
    seed = json.loads(Path(seed_path).read_text())
    users: dict[str, str] = {}
    for row in seed.get("users", []):
        created = platform.create_user(row["display_name"], row["email"], row.get("token"))
        users[row["email"]] = created["id"]
    for ws_row in seed.get("workspaces", []):
        ws = platform.create_workspace(ws_row["name"])
        for email in ws_row.get("members", []):
            platform.add_member(ws["id"], users[email])
        for team_row in ws_row.get("teams", []):
            team = platform.create_team(ws["id"], team_row["name"])
            for email in team_row.get("members", []):
                platform.add_team_member(team["id"], users[email])
            if team_row.get("publishing"):
                platform.set_publishing_team(ws["id"], team["id"])


def main() -> None:
    import uvicorn

    from .api import create_app

    platform = build_platform()
    seed_path = os.environ.get("FH_SEED")
    if seed_path:
        apply_seed(platform, seed_path)
    admin_token = os.environ.get("FH_ADMIN_TOKEN")
    if not admin_token:
        admin_token = secrets.token_hex(16)
        print(f"admin token: {admin_token}")
    app = create_app(platform, admin_token, static_dir=os.environ.get("FH_STATIC_DIR"))
    bind = os.environ.get("FH_BIND_ADDR", "127.0.0.1:8444")
    host, _, port = bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")


if __name__ == "__main__":
    main()
