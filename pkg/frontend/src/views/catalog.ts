/**
 * Discover catalog: public, no token needed. The text box and tag chips are
 * just query parameters — every change re-queries the server, so the rendered
 * list is always exactly what the catalog API returns.
 */

import * as api from "../api";
import { el, replaceChildren } from "../dom";
import { formatBytes, formatDate } from "../format";
import type { View } from "../router";
import type { CatalogEntry } from "../types";

export const catalogView: View = (outlet) => {
  const state = {
    text: "",
    tags: new Set<string>(),
    allTags: [] as string[],
    tagsLoaded: false,
    refreshSeq: 0,
  };

  const searchInput = el("input", {
    class: "search-input",
    type: "search",
    placeholder: "Search name or description",
    "aria-label": "Search datasets",
  });
  const searchForm = el(
    "form",
    { class: "catalog-filters" },
    searchInput,
    el("button", { type: "submit" }, "Search"),
  );
  const chipRow = el("div", { class: "tag-chips" });
  const results = el("div", { class: "catalog-results" });
  outlet.append(
    el("section", { class: "page catalog" }, el("h1", {}, "Discover datasets"), searchForm, chipRow, results),
  );

  searchForm.addEventListener("submit", (event) => {
    event.preventDefault();
    state.text = searchInput.value.trim();
    void refresh();
  });

  function renderChips(): void {
    replaceChildren(
      chipRow,
      ...state.allTags.map((tag) => {
        const active = state.tags.has(tag);
        const chip = el(
          "button",
          { type: "button", class: `tag-chip${active ? " active" : ""}`, "data-tag": tag },
          tag,
        );
        chip.addEventListener("click", () => {
          if (state.tags.has(tag)) state.tags.delete(tag);
          else state.tags.add(tag);
          renderChips();
          void refresh();
        });
        return chip;
      }),
    );
  }

  function entryCard(entry: CatalogEntry): HTMLElement {
    const href = `#/datasets/${encodeURIComponent(entry.dataset_id)}/versions/${entry.version}`;
    return el(
      "article",
      { class: "catalog-entry", "data-doi": entry.doi, "data-dataset-id": entry.dataset_id },
      el("h2", {}, el("a", { href, class: "entry-name" }, entry.name)),
      el("p", { class: "entry-description" }, entry.description),
      el(
        "div",
        { class: "entry-tags" },
        ...entry.tags.map((tag) => el("span", { class: "tag" }, tag)),
      ),
      el(
        "p",
        { class: "entry-meta" },
        `${entry.doi} · published ${formatDate(entry.published_at)} · ` +
          `${entry.metrics.files} files · ${formatBytes(entry.metrics.size_bytes)} · ` +
          `${entry.metrics.records} records`,
      ),
    );
  }

  async function refresh(): Promise<void> {
    // Rapid filter changes can resolve out of order; only the newest query renders.
    const seq = ++state.refreshSeq;
    replaceChildren(results, el("p", { class: "loading" }, "Loading…"));
    let entries: CatalogEntry[];
    try {
      entries = await api.catalogSearch({ text: state.text || undefined, tags: [...state.tags] });
    } catch {
      if (seq !== state.refreshSeq) return;
      const retry = el("button", { type: "button", class: "retry-btn" }, "Retry");
      retry.addEventListener("click", () => void refresh());
      replaceChildren(
        results,
        el("div", { class: "error-banner" }, "The catalog is unreachable right now. ", retry),
      );
      return;
    }
    if (seq !== state.refreshSeq) return;
    if (!state.tagsLoaded && !state.text && state.tags.size === 0) {
      // Chips come from the unfiltered catalog so they stay stable while filtering.
      state.allTags = [...new Set(entries.flatMap((e) => e.tags))].sort();
      state.tagsLoaded = true;
      renderChips();
    }
    if (entries.length === 0) {
      replaceChildren(results, el("p", { class: "empty-state" }, "No datasets match."));
      return;
    }
    replaceChildren(results, ...entries.map(entryCard));
  }

  void refresh();
};
