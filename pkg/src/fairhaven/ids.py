"""Opaque identifiers: 128-bit random, rendered as 32-char lowercase hex."""

from __future__ import annotations

import re
import uuid

_ID_RE = re.compile(r"^[0-9a-f]{32}$")


def new_id() -> str:
    return uuid.uuid4().hex


def is_id(value: str) -> bool:
    return bool(_ID_RE.match(value))
