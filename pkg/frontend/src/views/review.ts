/**
 * Publishing review queue.
 *
 * Decisions are idempotent from the UI's point of view: a button disables
 * itself synchronously on first click, so a double-click yields exactly one
 * transition; if a concurrent session already moved the request, the server's
 * IllegalTransition is absorbed into a toast and a queue refresh.
 *
 * Accepted requests leave the server-side queue, so the page keeps them as
 * local "ready to publish" cards with an embargo picker (client mirrors the
 * 0–365 day limit; the server enforces it regardless).
 */

import * as api from "../api";
import { el, replaceChildren } from "../dom";
import { formatBytes } from "../format";
import { toast } from "../toast";
import type { View } from "../router";
import type { ReviewItemUiState, ReviewQueueRow, WorkspaceInfo } from "../types";

export const MAX_EMBARGO_DAYS = 365;

interface Item {
  row: ReviewQueueRow;
  ui: ReviewItemUiState;
}

function freshUi(): ReviewItemUiState {
  return { noteDraft: "", embargoDraft: "0", pending: false };
}

export const reviewView: View = (outlet) => {
  if (!api.getConfig().token) {
    outlet.append(
      el("section", { class: "page" }, el("div", { class: "error-banner" }, "Sign in to see the review queue.")),
    );
    return;
  }

  const state = {
    workspaces: [] as WorkspaceInfo[],
    workspaceId: "",
    items: [] as Item[],
    accepted: new Map<string, Item>(),
    denied: false,
  };

  const wsSelect = el("select", { class: "workspace-select", "aria-label": "Workspace" });
  wsSelect.addEventListener("change", () => {
    state.workspaceId = wsSelect.value;
    state.accepted.clear();
    void refresh();
  });

  const queueBox = el("div", { class: "queue" });
  const acceptedBox = el("div", { class: "accepted" });
  outlet.append(
    el(
      "section",
      { class: "page review" },
      el("h1", {}, "Publishing review queue"),
      el("label", {}, "Workspace ", wsSelect),
      queueBox,
      acceptedBox,
    ),
  );

  function render(): void {
    if (state.denied) {
      replaceChildren(
        queueBox,
        el("div", { class: "error-banner access-denied" }, "The review queue is visible to the publishing team only."),
      );
      replaceChildren(acceptedBox);
      return;
    }
    if (state.items.length === 0) {
      replaceChildren(queueBox, el("p", { class: "empty-state" }, "Nothing waiting for review."));
    } else {
      replaceChildren(queueBox, ...state.items.map(queueCard));
    }
    if (state.accepted.size === 0) {
      replaceChildren(acceptedBox);
    } else {
      replaceChildren(
        acceptedBox,
        el("h2", {}, "Accepted — ready to publish"),
        ...[...state.accepted.values()].map(publishCard),
      );
    }
  }

  function queueCard(item: Item): HTMLElement {
    const note = el("textarea", {
      class: "note-input",
      placeholder: "Reviewer note",
      "aria-label": "Reviewer note",
    });
    note.value = item.ui.noteDraft;
    note.addEventListener("input", () => {
      item.ui.noteDraft = note.value;
    });

    const accept = el("button", { type: "button", class: "accept-btn" }, "Accept");
    const reject = el("button", { type: "button", class: "reject-btn" }, "Reject");
    if (item.ui.pending) {
      accept.disabled = true;
      reject.disabled = true;
    }
    accept.addEventListener("click", () => void decide(item, "accept"));
    reject.addEventListener("click", () => void decide(item, "reject"));

    return el(
      "article",
      { class: "review-item card", "data-request-id": item.row.id },
      el(
        "h3",
        {},
        item.row.dataset_name,
        " ",
        el("span", { class: `state-badge state-${item.row.state}` }, item.row.state),
      ),
      el(
        "p",
        { class: "entry-meta" },
        `${item.row.metrics.file_count} files · ${formatBytes(item.row.metrics.total_size_bytes)} · ` +
          `${item.row.metrics.record_count} records`,
      ),
      item.row.justification ? el("p", { class: "justification" }, `Justification: ${item.row.justification}`) : null,
      note,
      el("div", { class: "actions" }, accept, " ", reject),
    );
  }

  function publishCard(item: Item): HTMLElement {
    const embargo = el("input", {
      class: "embargo-input",
      type: "number",
      min: "0",
      max: String(MAX_EMBARGO_DAYS),
      "aria-label": "Embargo (days)",
    });
    embargo.value = item.ui.embargoDraft;
    embargo.addEventListener("input", () => {
      item.ui.embargoDraft = embargo.value;
    });

    const fieldError = el("p", { class: "field-error" });
    const publishBtn = el("button", { type: "button", class: "publish-btn" }, "Publish");
    if (item.ui.pending) publishBtn.disabled = true;
    publishBtn.addEventListener("click", () => void publishAction(item, fieldError));

    return el(
      "article",
      { class: "publish-item card", "data-request-id": item.row.id },
      el(
        "h3",
        {},
        item.row.dataset_name,
        " ",
        el("span", { class: "state-badge state-accepted" }, "accepted"),
      ),
      el("label", {}, `Embargo (days, 0–${MAX_EMBARGO_DAYS}) `, embargo),
      el("div", { class: "actions" }, publishBtn),
      fieldError,
    );
  }

  async function decide(item: Item, decision: "accept" | "reject"): Promise<void> {
    if (item.ui.pending) return; // double-click: one transition
    item.ui.pending = true;
    render();
    try {
      const updated = await api.review(item.row.id, decision, item.ui.noteDraft.trim());
      toast(`Request ${updated.state}.`);
      if (updated.state === "accepted") {
        state.accepted.set(item.row.id, {
          row: { ...item.row, ...updated },
          ui: { ...freshUi(), embargoDraft: item.ui.embargoDraft },
        });
      }
    } catch (err) {
      absorb(err);
    } finally {
      item.ui.pending = false;
      await refresh();
    }
  }

  async function publishAction(item: Item, fieldError: HTMLElement): Promise<void> {
    if (item.ui.pending) return;
    const days = Number.parseInt(item.ui.embargoDraft, 10);
    if (!Number.isInteger(days) || days < 0 || days > MAX_EMBARGO_DAYS) {
      fieldError.textContent = `Embargo must be between 0 and ${MAX_EMBARGO_DAYS} days.`;
      return;
    }
    fieldError.textContent = "";
    item.ui.pending = true;
    render();
    try {
      const version = await api.publish(item.row.id, days);
      toast(`Published v${version.version} — ${version.doi}`);
      state.accepted.delete(item.row.id);
    } catch (err) {
      absorb(err);
    } finally {
      item.ui.pending = false;
      await refresh();
    }
  }

  function absorb(err: unknown): void {
    if (err instanceof api.ApiError && err.code === "IllegalTransition") {
      toast("This request was already handled — refreshing.", "info");
    } else if (err instanceof api.ApiError) {
      toast(`${err.code}: ${err.message}`, "error");
    } else {
      toast("Request failed — check the connection.", "error");
    }
  }

  async function refresh(): Promise<void> {
    if (!state.workspaceId) return;
    try {
      const rows = await api.reviewQueue(state.workspaceId);
      const previous = new Map(state.items.map((i) => [i.row.id, i.ui]));
      state.items = rows.map((row) => ({ row, ui: previous.get(row.id) ?? freshUi() }));
      // A request that re-entered the queue (e.g. resubmitted) is no longer
      // an accepted card, whatever this session remembers.
      for (const row of rows) state.accepted.delete(row.id);
      state.denied = false;
    } catch (err) {
      if (err instanceof api.ApiError && err.status === 403) {
        state.denied = true;
      } else {
        toast("Could not load the review queue.", "error");
      }
    }
    render();
  }

  void (async () => {
    try {
      state.workspaces = await api.myWorkspaces();
    } catch {
      replaceChildren(queueBox, el("div", { class: "error-banner" }, "Could not load workspaces."));
      return;
    }
    if (state.workspaces.length === 0) {
      replaceChildren(queueBox, el("p", { class: "empty-state" }, "You are not a member of any workspace."));
      return;
    }
    replaceChildren(
      wsSelect,
      ...state.workspaces.map((w) => el("option", { value: w.id }, w.name)),
    );
    state.workspaceId = state.workspaces[0].id;
    wsSelect.value = state.workspaceId;
    await refresh();
  })();
};
