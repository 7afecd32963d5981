/**
 * Authenticated dataset management: the owner's list of visible datasets and
 * a per-dataset panel showing attributes and the publication workflow
 * (submit, resubmit after rejection, withdraw).
 */

import * as api from "../api";
import { el, replaceChildren } from "../dom";
import { formatBytes, formatDate } from "../format";
import { toast } from "../toast";
import type { View } from "../router";
import type { DatasetDetail } from "../types";

export const myDatasetsView: View = (outlet) => {
  if (!api.getConfig().token) {
    outlet.append(
      el("section", { class: "page" }, el("div", { class: "error-banner" }, "Sign in to see your datasets.")),
    );
    return;
  }
  const box = el("div", { class: "dataset-list" }, el("p", { class: "loading" }, "Loading…"));
  outlet.append(el("section", { class: "page" }, el("h1", {}, "My datasets"), box));

  api
    .listDatasets()
    .then((rows) => {
      if (rows.length === 0) {
        replaceChildren(box, el("p", { class: "empty-state" }, "No datasets yet."));
        return;
      }
      replaceChildren(
        box,
        ...rows.map((row) =>
          el(
            "article",
            { class: "card dataset-row", "data-dataset-id": row.id },
            el(
              "h3",
              {},
              el("a", { href: `#/workspace/${encodeURIComponent(row.id)}` }, row.attributes.name),
              " ",
              el("span", { class: "role-badge" }, row.caller_role ?? ""),
            ),
            el(
              "p",
              { class: "entry-meta" },
              `${row.metrics.file_count} files · ${formatBytes(row.metrics.total_size_bytes)} · ` +
                `${row.metrics.record_count} records · status ${row.status ?? "–"}`,
            ),
          ),
        ),
      );
    })
    .catch(() => {
      replaceChildren(box, el("div", { class: "error-banner" }, "Could not load datasets."));
    });
};

export const manageDatasetView: View = (outlet, ctx) => {
  const datasetId = ctx.params.id;
  if (!api.getConfig().token) {
    outlet.append(
      el("section", { class: "page" }, el("div", { class: "error-banner" }, "Sign in to manage datasets.")),
    );
    return;
  }

  const page = el("section", { class: "page manage" }, el("p", { class: "loading" }, "Loading…"));
  outlet.append(page);
  const ui = { justification: "", needJustification: false, pending: false };

  function publicationPanel(view: DatasetDetail): HTMLElement {
    const stateLabel = view.publication_state ?? "not submitted";
    const panel = el(
      "div",
      { class: "card publication-panel" },
      el("h2", {}, "Publication ", el("span", { class: `state-badge state-${stateLabel}` }, stateLabel)),
    );
    const request = view.publication;
    if (request?.reviewer_note) {
      panel.append(el("blockquote", { class: "reviewer-note" }, `Reviewer note: ${request.reviewer_note}`));
    }
    if (request?.justification) {
      panel.append(el("p", { class: "justification" }, `Justification: ${request.justification}`));
    }
    if (view.missing_publication_fields.length > 0) {
      panel.append(
        el(
          "p",
          { class: "field-error missing-fields" },
          `Missing before submission: ${view.missing_publication_fields.join(", ")}`,
        ),
      );
    }

    const actions = el("div", { class: "actions" });
    const submittable = stateLabel === "not submitted" || stateLabel === "draft" || stateLabel === "rejected";
    if (submittable) {
      const label = stateLabel === "rejected" ? "Resubmit for review" : "Submit for review";
      const btn = el("button", { type: "button", class: "submit-btn" }, label);
      if (ui.pending) btn.disabled = true;
      btn.addEventListener("click", () => void submit());
      actions.append(btn);
      if (ui.needJustification) {
        const justificationInput = el("textarea", {
          class: "justification-input",
          placeholder: "Why does this dataset exceed the free tier?",
          "aria-label": "Justification",
        });
        justificationInput.value = ui.justification;
        justificationInput.addEventListener("input", () => {
          ui.justification = justificationInput.value;
        });
        panel.append(
          el("p", { class: "field-error" }, "This dataset is above the free tier — add a justification."),
          justificationInput,
        );
      }
    } else if (stateLabel === "requested" || stateLabel === "in_review") {
      const btn = el("button", { type: "button", class: "withdraw-btn" }, "Withdraw request");
      if (ui.pending || !request) btn.disabled = true;
      btn.addEventListener("click", () => void withdraw(request!.id));
      actions.append(btn);
    } else if (stateLabel === "accepted") {
      actions.append(el("p", { class: "entry-meta" }, "Accepted — awaiting publication by the publishing team."));
    }
    panel.append(actions);
    return panel;
  }

  function render(view: DatasetDetail): void {
    const attrs = view.attributes;
    const versionRows = view.versions.map((v) =>
      el(
        "tr",
        { class: "version-row", "data-doi": v.doi },
        el("td", {}, `v${v.version}`),
        el("td", {}, v.doi),
        el("td", {}, formatDate(v.created_at)),
        el("td", {}, v.embargo_until ? `embargoed until ${formatDate(v.embargo_until)}` : "public"),
      ),
    );
    replaceChildren(
      page,
      el(
        "header",
        {},
        el("h1", {}, attrs.name, " ", view.locked ? el("span", { class: "state-badge locked" }, "locked") : null),
        el("p", { class: "entry-meta" }, `your role: ${view.caller_role ?? "none"} · status ${view.status ?? "–"}`),
      ),
      el(
        "dl",
        { class: "attr-list" },
        el("dt", {}, "Subtitle"),
        el("dd", {}, attrs.subtitle ?? "–"),
        el("dt", {}, "Description"),
        el("dd", {}, attrs.description ?? "–"),
        el("dt", {}, "License"),
        el("dd", {}, attrs.license ?? "–"),
        el("dt", {}, "Tags"),
        el("dd", { class: "entry-tags" }, ...attrs.tags.map((t) => el("span", { class: "tag" }, t))),
        el("dt", {}, "Contributors"),
        el("dd", {}, attrs.contributors.map((c) => c.name).join(", ") || "–"),
      ),
      publicationPanel(view),
      el("h2", {}, "Versions"),
      view.versions.length === 0
        ? el("p", { class: "empty-state" }, "Nothing published yet.")
        : el(
            "div",
            { class: "table-wrap" },
            el("table", { class: "versions-table" }, el("tbody", {}, ...versionRows)),
          ),
    );
  }

  async function reload(): Promise<void> {
    try {
      render(await api.getDataset(datasetId));
    } catch (err) {
      const message =
        err instanceof api.ApiError && err.status === 403
          ? "You do not have access to this dataset."
          : "Could not load the dataset.";
      replaceChildren(page, el("div", { class: "error-banner" }, message));
    }
  }

  async function submit(): Promise<void> {
    if (ui.pending) return;
    ui.pending = true;
    try {
      const request = await api.submitPublication(datasetId, ui.justification.trim() || undefined);
      toast(`Submitted — request is ${request.state}.`);
      ui.needJustification = false;
      ui.justification = "";
    } catch (err) {
      if (err instanceof api.ApiError && err.code === "JustificationRequired") {
        ui.needJustification = true;
        toast("A justification is required for datasets this large.", "error");
      } else if (err instanceof api.ApiError) {
        toast(`${err.code}: ${err.message}`, "error");
      } else {
        toast("Request failed — check the connection.", "error");
      }
    } finally {
      ui.pending = false;
      await reload();
    }
  }

  async function withdraw(requestId: string): Promise<void> {
    if (ui.pending) return;
    ui.pending = true;
    try {
      await api.withdrawPublication(requestId);
      toast("Request withdrawn.");
    } catch (err) {
      if (err instanceof api.ApiError) toast(`${err.code}: ${err.message}`, "error");
      else toast("Request failed — check the connection.", "error");
    } finally {
      ui.pending = false;
      await reload();
    }
  }

  void reload();
};
