/** Transient corner notifications. */

import { el } from "./dom";

let container: HTMLElement | null = null;

function ensureContainer(): HTMLElement {
  if (!container || !container.isConnected) {
    container = el("div", { class: "toasts", "aria-live": "polite" });
    document.body.append(container);
  }
  return container;
}

export function toast(message: string, kind: "info" | "error" = "info", ttlMs = 4000): void {
  const node = el("div", { class: `toast toast-${kind}` }, message);
  ensureContainer().append(node);
  setTimeout(() => node.remove(), ttlMs);
}
