"""Webhook registration and signed, retried event delivery.

Deliveries are HTTP POSTs of a canonical JSON body ``{event, dataset_id,
payload, timestamp}`` signed with hex HMAC-SHA-256 of the secret over the
exact body bytes (header ``X-FH-Signature``). Dispatch is fire-and-forget
from the caller's perspective: a background worker drains a queue, retrying
failed deliveries up to three times with 1/2/4 time-unit backoff. The time
unit and the HTTP transport are injectable so tests stay fast and offline.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import queue
import threading
import time
from dataclasses import dataclass, field

from .clock import Clock, isoformat
from .errors import InvalidSchema, NotFound
from .ids import new_id

EVENT_TYPES = (
    "dataset.updated",
    "manifest.completed",
    "publication.decided",
    "version.published",
)

SIGNATURE_HEADER = "X-FH-Signature"
MAX_RETRIES = 3
BACKOFF_UNITS = (1, 2, 4)


def sign(secret: str, body: bytes) -> str:
    return hmac.new(secret.encode(), body, hashlib.sha256).hexdigest()


def canonical_body(event: str, dataset_id: str, payload: dict, timestamp: str) -> bytes:
    doc = {"event": event, "dataset_id": dataset_id, "payload": payload, "timestamp": timestamp}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass
class Webhook:
    id: str
    workspace_id: str
    url: str
    events: list[str]
    secret: str

    def to_dict(self, redact: bool = True) -> dict:
        return {
            "id": self.id,
            "workspace_id": self.workspace_id,
            "url": self.url,
            "events": list(self.events),
            "secret": "***" if redact else self.secret,
        }


def _default_transport(url: str, body: bytes, headers: dict[str, str]) -> int:
    import requests

    response = requests.post(url, data=body, headers=headers, timeout=10)
    return response.status_code


@dataclass
class Delivery:
    webhook_id: str
    event: str
    dataset_id: str
    attempt: int
    at: str
    status: str  # delivered | retrying | failed
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "webhook_id": self.webhook_id,
            "event": self.event,
            "dataset_id": self.dataset_id,
            "attempt": self.attempt,
            "at": self.at,
            "status": self.status,
            "detail": self.detail,
        }


@dataclass
class _Job:
    webhook: Webhook
    event: str
    dataset_id: str
    body: bytes
    signature: str


class WebhookDispatcher:
    def __init__(
        self,
        clock: Clock,
        transport=None,
        backoff_unit_seconds: float = 1.0,
        on_change=None,
    ):
        self.clock = clock
        self.transport = transport or _default_transport
        self.backoff_unit_seconds = backoff_unit_seconds
        self.on_change = on_change  # persistence hook, called after log appends
        self.webhooks: dict[str, Webhook] = {}
        self.deliveries: list[Delivery] = []
        self._queue: "queue.Queue[_Job]" = queue.Queue()
        self._worker: threading.Thread | None = None
        self._log_lock = threading.Lock()

    # -- registration ----------------------------------------------------------------

    def register(self, workspace_id: str, url: str, events: list[str], secret: str) -> Webhook:
        events = list(dict.fromkeys(events))
        if not events:
            raise InvalidSchema("a webhook needs at least one event type")
        unknown = [e for e in events if e not in EVENT_TYPES]
        if unknown:
            raise InvalidSchema(f"unknown event types: {unknown}")
        if not url.strip().startswith(("http://", "https://")):
            raise InvalidSchema("webhook url must be an http(s) url")
        if not secret:
            raise InvalidSchema("webhook secret must be non-empty")
        hook = Webhook(id=new_id(), workspace_id=workspace_id, url=url.strip(), events=events, secret=secret)
        self.webhooks[hook.id] = hook
        return hook

    def unregister(self, webhook_id: str) -> None:
        if webhook_id not in self.webhooks:
            raise NotFound(f"no webhook {webhook_id}")
        del self.webhooks[webhook_id]

    def for_workspace(self, workspace_id: str) -> list[Webhook]:
        return sorted(
            (h for h in self.webhooks.values() if h.workspace_id == workspace_id),
            key=lambda h: h.id,
        )

    # -- dispatch ---------------------------------------------------------------------

    def dispatch(self, workspace_id: str, event: str, dataset_id: str, payload: dict) -> int:
        """Queue deliveries for every matching hook; returns how many were queued."""
        if event not in EVENT_TYPES:
            raise InvalidSchema(f"unknown event type {event!r}")
        timestamp = isoformat(self.clock.now())
        queued = 0
        for hook in self.for_workspace(workspace_id):
            if event not in hook.events:
                continue
            body = canonical_body(event, dataset_id, payload, timestamp)
            self._queue.put(_Job(hook, event, dataset_id, body, sign(hook.secret, body)))
            queued += 1
        if queued:
            self._ensure_worker()
        return queued

    def _ensure_worker(self) -> None:
        if self._worker is None or not self._worker.is_alive():
            self._worker = threading.Thread(target=self._run, name="fh-webhooks", daemon=True)
            self._worker.start()

    def _run(self) -> None:
        while True:
            try:
                job = self._queue.get(timeout=1.0)
            except queue.Empty:
                return
            try:
                self._deliver(job)
            finally:
                self._queue.task_done()

    def _deliver(self, job: _Job) -> None:
        headers = {
            "Content-Type": "application/json",
            SIGNATURE_HEADER: job.signature,
            "X-FH-Event": job.event,
        }
        for attempt in range(1, MAX_RETRIES + 2):  # initial try + 3 retries
            try:
                status_code = self.transport(job.webhook.url, job.body, headers)
                ok = 200 <= status_code < 300
                detail = f"http {status_code}"
            except Exception as exc:  # network errors count as failed attempts
                ok = False
                detail = f"{type(exc).__name__}: {exc}"
            if ok:
                self._log(job, attempt, "delivered", detail)
                return
            final = attempt == MAX_RETRIES + 1
            self._log(job, attempt, "failed" if final else "retrying", detail)
            if final:
                return
            time.sleep(BACKOFF_UNITS[attempt - 1] * self.backoff_unit_seconds)

    def _log(self, job: _Job, attempt: int, status: str, detail: str) -> None:
        entry = Delivery(
            webhook_id=job.webhook.id, event=job.event, dataset_id=job.dataset_id,
            attempt=attempt, at=isoformat(self.clock.now()), status=status, detail=detail,
        )
        with self._log_lock:
            self.deliveries.append(entry)
        if self.on_change:
            self.on_change()

    def drain(self, timeout: float = 30.0) -> None:
        """Block until the queue is fully processed (test support)."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self._queue.unfinished_tasks == 0:
                return
            time.sleep(0.01)
        raise TimeoutError("webhook queue did not drain in time")

    def delivery_log(self, webhook_id: str | None = None) -> list[dict]:
        with self._log_lock:
            rows = [d.to_dict() for d in self.deliveries]
        if webhook_id:
            rows = [r for r in rows if r["webhook_id"] == webhook_id]
        return rows

    # -- persistence --------------------------------------------------------------------

    def dump(self) -> dict:
        with self._log_lock:
            log = [d.to_dict() for d in self.deliveries]
        return {
            "webhooks": [h.to_dict(redact=False) for h in self.webhooks.values()],
            "deliveries": log,
        }

    def load(self, data: dict) -> None:
        self.webhooks = {
            h["id"]: Webhook(
                id=h["id"], workspace_id=h["workspace_id"], url=h["url"],
                events=list(h["events"]), secret=h["secret"],
            )
            for h in data.get("webhooks", [])
        }
        with self._log_lock:
            self.deliveries = [
                Delivery(
                    webhook_id=d["webhook_id"], event=d["event"], dataset_id=d["dataset_id"],
                    attempt=d["attempt"], at=d["at"], status=d["status"], detail=d.get("detail", ""),
                )
                for d in data.get("deliveries", [])
            ]
