/**
 * Manifest progress: polls the manifest every couple of seconds and renders
 * per-entry progress bars. A failed poll keeps the last known state on screen
 * behind a staleness banner rather than blanking the page.
 */

import * as api from "../api";
import { el, replaceChildren } from "../dom";
import { formatBytes, percentLabel, progressFraction } from "../format";
import type { View } from "../router";
import type { ManifestEntryView, ManifestView } from "../types";

export function entryRow(entry: ManifestEntryView): HTMLElement {
  const fraction = progressFraction(entry.bytes_received, entry.declared_size);
  const row = el(
    "div",
    { class: `upload-row status-${entry.status}`, "data-path": entry.path },
    el(
      "div",
      { class: "upload-head" },
      el("span", { class: "file-path" }, entry.path),
      el("span", { class: `state-badge state-${entry.status}` }, entry.status),
    ),
    el(
      "div",
      { class: "bar" },
      el("div", { class: "bar-fill", style: `width: ${(fraction * 100).toFixed(1)}%` }),
    ),
    el(
      "span",
      { class: "pct" },
      `${percentLabel(fraction)} — ${formatBytes(entry.bytes_received)} of ${formatBytes(entry.declared_size)}`,
    ),
  );
  if (entry.status === "failed" && entry.failure) {
    row.append(
      el(
        "p",
        { class: "digest-mismatch" },
        `Checksum mismatch — expected ${entry.failure.expected}, got ${entry.failure.actual}`,
      ),
    );
  }
  return row;
}

export const progressView: View = (outlet, ctx) => {
  const manifestId = ctx.params.id;
  const state: { view: ManifestView | null; stale: boolean; error: string | null } = {
    view: null,
    stale: false,
    error: null,
  };

  const box = el("div", { class: "manifest-box" }, el("p", { class: "loading" }, "Loading…"));
  outlet.append(
    el("section", { class: "page progress" }, el("h1", {}, `Upload manifest ${manifestId}`), box),
  );

  function render(): void {
    if (!state.view) {
      replaceChildren(
        box,
        el("div", { class: "error-banner" }, state.error ?? "Manifest not loaded yet."),
      );
      return;
    }
    const entries = state.view.entries;
    const allVerified = entries.length > 0 && entries.every((e) => e.status === "verified");
    replaceChildren(
      box,
      state.stale
        ? el("div", { class: "stale-banner" }, "Connection lost — showing the last known state.")
        : null,
      allVerified ? el("div", { class: "complete-banner" }, "All files verified.") : null,
      el("p", { class: "entry-meta" }, `dataset ${state.view.dataset_id} · manifest ${state.view.state}`),
      ...entries.map(entryRow),
    );
  }

  async function poll(): Promise<void> {
    try {
      state.view = await api.syncManifest(manifestId);
      state.stale = false;
      state.error = null;
    } catch (err) {
      if (state.view) {
        state.stale = true;
      } else {
        state.error =
          err instanceof api.ApiError && err.status === 404
            ? "No such manifest."
            : "Could not load the manifest.";
      }
    }
    render();
  }

  void poll();
  const timer = setInterval(() => void poll(), ctx.app.pollMs);
  return () => clearInterval(timer);
};

/** Small landing form so a manifest id can be opened by hand. */
export const uploadsView: View = (outlet, ctx) => {
  const input = el("input", {
    class: "manifest-id-input",
    placeholder: "manifest id",
    "aria-label": "Manifest id",
  });
  const form = el("form", { class: "manifest-open" }, input, el("button", { type: "submit" }, "Open"));
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const id = input.value.trim();
    if (id) ctx.router.navigate(`/manifests/${encodeURIComponent(id)}`);
  });
  outlet.append(
    el(
      "section",
      { class: "page" },
      el("h1", {}, "Uploads"),
      el("p", {}, "Paste a manifest id (printed by the CLI agent) to watch its progress."),
      form,
    ),
  );
};
