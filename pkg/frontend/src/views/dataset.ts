/** Public dataset page for one published version. */

import * as api from "../api";
import { el, replaceChildren } from "../dom";
import { formatBytes, formatDate, sectionTitle } from "../format";
import type { View } from "../router";
import type { DatasetPageView } from "../types";

export const datasetPageView: View = (outlet, ctx) => {
  const datasetId = ctx.params.id;
  const version = Number.parseInt(ctx.params.version, 10);
  const page = el("section", { class: "page dataset-page" }, el("p", { class: "loading" }, "Loading…"));
  outlet.append(page);

  function render(view: DatasetPageView): void {
    const contributors = view.header.contributors.map((c) => c.name).join(", ");

    const versionSelect = el("select", { class: "version-select", "aria-label": "Version" });
    for (const v of view.about.versions) {
      const option = el("option", { value: String(v.version) }, `v${v.version} — ${formatDate(v.published_at)}`);
      if (v.version === version) option.selected = true;
      versionSelect.append(option);
    }
    versionSelect.addEventListener("change", () => {
      ctx.router.navigate(`/datasets/${encodeURIComponent(datasetId)}/versions/${versionSelect.value}`);
    });

    const overview = el("div", { class: "overview" });
    for (const [key, body] of Object.entries(view.overview)) {
      overview.append(el("h3", {}, sectionTitle(key)), el("p", { class: `overview-${key}` }, body));
    }
    if (Object.keys(view.overview).length === 0) {
      overview.append(el("p", { class: "empty-state" }, "No overview sections in the readme."));
    }

    const fileRows = view.files.map((f) =>
      el(
        "tr",
        { class: "file-row", "data-path": f.path },
        el("td", { class: "file-path" }, f.path),
        el("td", {}, formatBytes(f.size)),
        el("td", { class: "file-sha", title: f.sha256 }, f.sha256.slice(0, 12)),
        el(
          "td",
          {},
          el("a", { href: api.publishedFileUrl(datasetId, version, `files/${f.path}`), download: "" }, "download"),
        ),
      ),
    );

    replaceChildren(
      page,
      el(
        "header",
        { class: "dataset-header" },
        el("h1", {}, view.header.title),
        el("p", { class: "contributors" }, contributors),
        el("p", { class: "description" }, view.header.description),
      ),
      el(
        "p",
        { class: "metrics-strip" },
        `${view.metrics.files} files · ${formatBytes(view.metrics.size)} · ` +
          `${view.metrics.records} records · ${view.metrics.license}`,
      ),
      el(
        "div",
        { class: "about" },
        el("label", {}, "Version ", versionSelect),
        el("p", { class: "doi" }, `DOI: ${view.about.doi}`),
        el("blockquote", { class: "citation" }, view.about.citation),
        el("div", { class: "entry-tags" }, ...view.about.tags.map((t) => el("span", { class: "tag" }, t))),
        el("p", {}, el("a", { class: "archive-link", href: api.archiveUrl(datasetId, version) }, "Download archive (.tar)")),
      ),
      el("h2", {}, "Overview"),
      overview,
      el("h2", {}, "Files"),
      el(
        "div",
        { class: "table-wrap" },
        el(
          "table",
          { class: "files-table" },
          el(
            "thead",
            {},
            el("tr", {}, el("th", {}, "Path"), el("th", {}, "Size"), el("th", {}, "sha256"), el("th", {}, "")),
          ),
          el("tbody", {}, ...fileRows),
        ),
      ),
    );
  }

  api
    .datasetPage(datasetId, version)
    .then(render)
    .catch((err: unknown) => {
      const message =
        err instanceof api.ApiError && err.status === 404
          ? "This dataset version is not public."
          : "Could not load the dataset page.";
      replaceChildren(page, el("div", { class: "error-banner not-found" }, message));
    });
};
