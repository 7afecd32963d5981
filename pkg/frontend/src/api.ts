/**
 * Typed client for the fairhaven REST API.
 *
 * The app is normally served by the API server itself, so the default base
 * URL is the page's own origin (empty prefix). Tests and dev setups point it
 * elsewhere with `configure({ baseUrl })`.
 */

import type {
  CatalogEntry,
  DatasetDetail,
  DatasetPageView,
  DatasetRow,
  DatasetVersion,
  ManifestView,
  PublicationRequest,
  ReviewQueueRow,
  UserInfo,
  WorkspaceInfo,
} from "./types";

export interface ApiConfig {
  baseUrl: string;
  token: string | null;
}

const config: ApiConfig = { baseUrl: "", token: null };

export function configure(partial: Partial<ApiConfig>): void {
  Object.assign(config, partial);
}

export function getConfig(): Readonly<ApiConfig> {
  return config;
}

/** Server-side rejection, carrying the stable error code from the payload. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: Record<string, unknown>;

  constructor(status: number, code: string, message: string, details: Record<string, unknown> = {}) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.details = details;
  }
}

async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
  const headers: Record<string, string> = {};
  if (config.token) headers["Authorization"] = `Bearer ${config.token}`;
  if (body !== undefined) headers["Content-Type"] = "application/json";
  const resp = await fetch(config.baseUrl + path, {
    method,
    headers,
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  if (!resp.ok) {
    let code = `HTTP${resp.status}`;
    let message = resp.statusText;
    let details: Record<string, unknown> = {};
    try {
      const payload = (await resp.json()) as Record<string, unknown>;
      if (typeof payload.error === "string") code = payload.error;
      if (typeof payload.message === "string") message = payload.message;
      const { error: _e, message: _m, ...rest } = payload;
      details = rest;
    } catch {
      // non-JSON error body; keep the HTTP-level description
    }
    throw new ApiError(resp.status, code, message, details);
  }
  return (await resp.json()) as T;
}

const get = <T>(path: string) => request<T>("GET", path);
const post = <T>(path: string, body?: unknown) => request<T>("POST", path, body ?? {});
const patch = <T>(path: string, body: unknown) => request<T>("PATCH", path, body);

// -- session ----------------------------------------------------------------------

export const me = () => get<UserInfo>("/v1/me");
export const myWorkspaces = () => get<WorkspaceInfo[]>("/v1/workspaces");

// -- datasets ---------------------------------------------------------------------

export const listDatasets = (workspaceId?: string) =>
  get<DatasetRow[]>(`/v1/datasets${workspaceId ? `?workspace_id=${encodeURIComponent(workspaceId)}` : ""}`);

export const getDataset = (datasetId: string) =>
  get<DatasetDetail>(`/v1/datasets/${encodeURIComponent(datasetId)}`);

export const updateAttributes = (datasetId: string, changes: Record<string, unknown>) =>
  patch<DatasetRow>(`/v1/datasets/${encodeURIComponent(datasetId)}`, changes);

export const listVersions = (datasetId: string) =>
  get<DatasetVersion[]>(`/v1/datasets/${encodeURIComponent(datasetId)}/versions`);

// -- publishing -------------------------------------------------------------------

export const submitPublication = (datasetId: string, justification?: string) =>
  post<PublicationRequest>(
    `/v1/datasets/${encodeURIComponent(datasetId)}/publication`,
    justification ? { justification } : {},
  );

export const withdrawPublication = (requestId: string) =>
  post<PublicationRequest>(`/v1/publication/${encodeURIComponent(requestId)}/withdraw`);

export const reviewQueue = (workspaceId: string) =>
  get<ReviewQueueRow[]>(`/v1/workspaces/${encodeURIComponent(workspaceId)}/review-queue`);

export const review = (requestId: string, decision: "accept" | "reject", note: string) =>
  post<PublicationRequest>(`/v1/publication/${encodeURIComponent(requestId)}/review`, {
    decision,
    note,
  });

export const publish = (requestId: string, embargoDays: number) =>
  post<DatasetVersion>(`/v1/publication/${encodeURIComponent(requestId)}/publish`, {
    embargo_days: embargoDays,
  });

// -- uploads ----------------------------------------------------------------------

export const syncManifest = (manifestId: string) =>
  get<ManifestView>(`/v1/manifests/${encodeURIComponent(manifestId)}`);

// -- Discover (public) --------------------------------------------------------------

export interface CatalogQuery {
  text?: string;
  tags?: string[];
}

export function catalogPath(query: CatalogQuery = {}): string {
  const params = new URLSearchParams();
  if (query.text) params.set("text", query.text);
  for (const tag of query.tags ?? []) params.append("tag", tag);
  const qs = params.toString();
  return `/v1/discover/datasets${qs ? `?${qs}` : ""}`;
}

export const catalogSearch = (query: CatalogQuery = {}) => get<CatalogEntry[]>(catalogPath(query));

export const datasetPage = (datasetId: string, version: number) =>
  get<DatasetPageView>(
    `/v1/discover/datasets/${encodeURIComponent(datasetId)}/versions/${version}`,
  );

/** Direct link to one file inside a published snapshot. */
export function publishedFileUrl(datasetId: string, version: number, relPath: string): string {
  const encoded = relPath.split("/").map(encodeURIComponent).join("/");
  return `${config.baseUrl}/v1/published/${encodeURIComponent(datasetId)}/${version}/${encoded}`;
}

/** Direct link to the tar archive of a published snapshot. */
export function archiveUrl(datasetId: string, version: number): string {
  return `${config.baseUrl}/v1/discover/datasets/${encodeURIComponent(datasetId)}/versions/${version}/download`;
}
