/** App shell: top bar with navigation + token sign-in, and the routed outlet. */

import * as api from "./api";
import { el } from "./dom";
import { Router } from "./router";
import { toast } from "./toast";
import { catalogView } from "./views/catalog";
import { datasetPageView } from "./views/dataset";
import { progressView, uploadsView } from "./views/progress";
import { reviewView } from "./views/review";
import { manageDatasetView, myDatasetsView } from "./views/workspace";

const TOKEN_KEY = "fh-token";

export interface MountOptions {
  /** API origin; empty when the page is served by the API server itself. */
  baseUrl?: string;
  /** Poll interval for live views; defaults to 2 s. */
  pollMs?: number;
}

export interface AppHandle {
  router: Router;
  /** Sign in as `token` (null signs out) exactly like typing into the top bar. */
  setToken(token: string | null): Promise<void>;
  destroy(): void;
}

export function mountApp(root: HTMLElement, opts: MountOptions = {}): AppHandle {
  const storedToken = window.localStorage.getItem(TOKEN_KEY);
  api.configure({ baseUrl: opts.baseUrl ?? "", token: storedToken });

  const tokenInput = el("input", {
    class: "token-input",
    type: "password",
    placeholder: "API token",
    "aria-label": "API token",
  });
  tokenInput.value = storedToken ?? "";
  const whoami = el("span", { class: "whoami" }, "anonymous");
  const authForm = el(
    "form",
    { class: "auth-box" },
    tokenInput,
    el("button", { type: "submit", class: "token-save" }, "Sign in"),
    whoami,
  );

  const outlet = el("main", { class: "outlet" });
  const topbar = el(
    "header",
    { class: "topbar" },
    el("a", { class: "brand", href: "#/" }, "fairhaven"),
    el(
      "nav",
      {},
      el("a", { href: "#/" }, "Discover"),
      el("a", { href: "#/workspace" }, "My datasets"),
      el("a", { href: "#/review" }, "Review queue"),
      el("a", { href: "#/uploads" }, "Uploads"),
    ),
    authForm,
  );
  root.append(topbar, outlet);

  const router = new Router(outlet, { pollMs: opts.pollMs ?? 2000 })
    .on("", catalogView)
    .on("catalog", catalogView)
    .on("datasets/:id/versions/:version", datasetPageView)
    .on("workspace", myDatasetsView)
    .on("workspace/:id", manageDatasetView)
    .on("review", reviewView)
    .on("uploads", uploadsView)
    .on("manifests/:id", progressView)
    .otherwise((o) => {
      o.append(el("section", { class: "page" }, el("div", { class: "error-banner" }, "No such page.")));
    });

  async function refreshWhoami(): Promise<void> {
    if (!api.getConfig().token) {
      whoami.textContent = "anonymous";
      return;
    }
    try {
      const user = await api.me();
      whoami.textContent = user.display_name;
    } catch {
      whoami.textContent = "invalid token";
    }
  }

  async function setToken(token: string | null): Promise<void> {
    api.configure({ token });
    if (token) window.localStorage.setItem(TOKEN_KEY, token);
    else window.localStorage.removeItem(TOKEN_KEY);
    tokenInput.value = token ?? "";
    await refreshWhoami();
    router.render(); // the current view may look different under the new identity
  }

  authForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const value = tokenInput.value.trim();
    void setToken(value || null).then(() => {
      toast(value ? "Signed in." : "Signed out.");
    });
  });

  void refreshWhoami();
  router.start();

  return {
    router,
    setToken,
    destroy() {
      router.stop();
      topbar.remove();
      outlet.remove();
    },
  };
}
