/** Hash-based router: the app is a static bundle, so all navigation is client-side. */

import { clear } from "./dom";

export interface AppContext {
  /** Poll interval for live views (manifest progress); tests shrink it. */
  pollMs: number;
}

export interface RouteContext {
  params: Record<string, string>;
  app: AppContext;
  router: Router;
}

/** A view renders into the outlet and may return a cleanup callback. */
export type View = (outlet: HTMLElement, ctx: RouteContext) => void | (() => void);

interface Route {
  segments: string[];
  view: View;
}

function split(path: string): string[] {
  return path.replace(/^#?\/?/, "").split("/").filter((s) => s.length > 0);
}

export class Router {
  private routes: Route[] = [];
  private fallback: View | null = null;
  private cleanup: (() => void) | null = null;
  private renderedHash: string | null = null;
  private readonly onHashChange = () => {
    if (window.location.hash !== this.renderedHash) this.render();
  };

  constructor(
    private readonly outlet: HTMLElement,
    private readonly app: AppContext,
  ) {}

  on(pattern: string, view: View): this {
    this.routes.push({ segments: split(pattern), view });
    return this;
  }

  otherwise(view: View): this {
    this.fallback = view;
    return this;
  }

  start(): void {
    window.addEventListener("hashchange", this.onHashChange);
    this.render();
  }

  stop(): void {
    window.removeEventListener("hashchange", this.onHashChange);
    this.cleanup?.();
    this.cleanup = null;
  }

  navigate(hash: string): void {
    const target = hash.startsWith("#") ? hash : `#${hash}`;
    if (window.location.hash !== target) window.location.hash = target;
    this.render();
  }

  render(): void {
    this.cleanup?.();
    this.cleanup = null;
    this.renderedHash = window.location.hash;
    const here = split(this.renderedHash);
    for (const route of this.routes) {
      const params = this.match(route.segments, here);
      if (params) {
        this.mount(route.view, params);
        return;
      }
    }
    if (this.fallback) this.mount(this.fallback, {});
  }

  private mount(view: View, params: Record<string, string>): void {
    clear(this.outlet);
    const result = view(this.outlet, { params, app: this.app, router: this });
    if (typeof result === "function") this.cleanup = result;
  }

  private match(pattern: string[], actual: string[]): Record<string, string> | null {
    if (pattern.length !== actual.length) return null;
    const params: Record<string, string> = {};
    for (let i = 0; i < pattern.length; i++) {
      if (pattern[i].startsWith(":")) {
        params[pattern[i].slice(1)] = decodeURIComponent(actual[i]);
      } else if (pattern[i] !== actual[i]) {
        return null;
      }
    }
    return params;
  }
}
