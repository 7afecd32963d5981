"""Agent configuration: named server profiles under a user config directory.

Layout: ``$FH_CONFIG_DIR/config.json`` holds ``{"active": name, "profiles":
{name: {server_url, token, workers, chunk_size, retries}}}``; manifest
ledgers live next to it under ``manifests/``. Everything is plain JSON so a
user can inspect or fix their state with a text editor.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

DEFAULT_WORKERS = 4
DEFAULT_CHUNK_SIZE = 5 * 1024 * 1024
MIN_CHUNK_SIZE = 64 * 1024
MAX_CHUNK_SIZE = 64 * 1024 * 1024
DEFAULT_RETRIES = 5


def config_dir() -> Path:
    override = os.environ.get("FH_CONFIG_DIR")
    if override:
        return Path(override)
    return Path.home() / ".config" / "fairhaven"


def ledger_dir() -> Path:
    return config_dir() / "manifests"


@dataclass
class Profile:
    name: str
    server_url: str
    token: str
    workers: int = DEFAULT_WORKERS
    chunk_size: int = DEFAULT_CHUNK_SIZE
    retries: int = DEFAULT_RETRIES

    def to_dict(self) -> dict:
        return {
            "server_url": self.server_url,
            "token": self.token,
            "workers": self.workers,
            "chunk_size": self.chunk_size,
            "retries": self.retries,
        }


def _config_path() -> Path:
    return config_dir() / "config.json"


def load_config() -> dict:
    path = _config_path()
    if not path.exists():
        return {"active": None, "profiles": {}}
    return json.loads(path.read_text())


def save_config(config: dict) -> None:
    path = _config_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(config, indent=2))
    os.replace(tmp, path)


def upsert_profile(profile: Profile, activate: bool = False) -> None:
    config = load_config()
    config["profiles"][profile.name] = profile.to_dict()
    if activate or config.get("active") is None:
        config["active"] = profile.name
    save_config(config)


def set_active(name: str) -> None:
    config = load_config()
    if name not in config["profiles"]:
        raise KeyError(f"no profile named {name!r}")
    config["active"] = name
    save_config(config)


def active_profile() -> Profile | None:
    config = load_config()
    name = config.get("active")
    if not name or name not in config.get("profiles", {}):
        return None
    raw = config["profiles"][name]
    return Profile(
        name=name,
        server_url=raw["server_url"],
        token=raw["token"],
        workers=int(raw.get("workers", DEFAULT_WORKERS)),
        chunk_size=int(raw.get("chunk_size", DEFAULT_CHUNK_SIZE)),
        retries=int(raw.get("retries", DEFAULT_RETRIES)),
    )
