/** Wire types: direct projections of the server's JSON payloads. */

export interface UserInfo {
  id: string;
  display_name: string;
  email: string;
  created_at: string;
}

export interface WorkspaceInfo {
  id: string;
  name: string;
  members: string[];
  teams: string[];
  publishing_team: string | null;
  status_labels: string[];
  created_at: string | null;
}

export interface DatasetMetrics {
  file_count: number;
  total_size_bytes: number;
  record_count: number;
}

export interface Contributor {
  name: string;
  orcid?: string | null;
}

export interface DatasetAttributes {
  name: string;
  subtitle: string | null;
  description: string | null;
  license: string | null;
  tags: string[];
  contributors: Contributor[];
  banner: string | null;
}

export interface DatasetRow {
  id: string;
  workspace_id: string;
  owner_id: string;
  attributes: DatasetAttributes;
  status: string | null;
  root_id: string;
  created_at: string;
  updated_at: string;
  collections: string[];
  deleted: boolean;
  locked: boolean;
  access_mode: string;
  caller_role: string | null;
  metrics: DatasetMetrics;
}

export interface PublicationRequest {
  id: string;
  dataset_id: string;
  state: string;
  submitted_by: string;
  reviewer_note: string | null;
  decided_by: string | null;
  justification: string | null;
  created_at: string | null;
  updated_at: string | null;
}

export interface DatasetVersion {
  dataset_id: string;
  version: number;
  doi: string;
  created_at: string;
  snapshot_prefix: string;
  file_count: number;
  total_size_bytes: number;
  record_count: number;
  embargo_until: string | null;
  public: boolean;
  summary: Record<string, unknown>;
}

export interface DatasetDetail extends DatasetRow {
  missing_publication_fields: string[];
  publication_state: string | null;
  publication: PublicationRequest | null;
  versions: DatasetVersion[];
}

export interface ReviewQueueRow extends PublicationRequest {
  dataset_name: string;
  metrics: DatasetMetrics;
}

export interface CatalogEntry {
  dataset_id: string;
  version: number;
  doi: string;
  published_at: string;
  name: string;
  description: string;
  tags: string[];
  license: string;
  contributors: Contributor[];
  metrics: { files: number; size_bytes: number; records: number };
  publication_state: string;
}

export interface SnapshotFile {
  path: string;
  size: number;
  sha256: string;
}

export interface DatasetPageView {
  header: { title: string; contributors: Contributor[]; description: string };
  metrics: { files: number; size: number; records: number; license: string };
  overview: Record<string, string>;
  files: SnapshotFile[];
  about: {
    versions: { version: number; doi: string; published_at: string }[];
    tags: string[];
    citation: string;
    doi: string;
  };
}

export interface ManifestEntryView {
  path: string;
  declared_size: number;
  declared_checksum: string;
  status: string;
  bytes_received: number;
  failure?: { expected: string; actual: string };
  node_id?: string;
}

export interface ManifestView {
  id: string;
  dataset_id: string;
  created_by: string;
  state: string;
  created_at: string | null;
  entries: ManifestEntryView[];
}

/** Local UI state carried alongside a review-queue row. */
export interface ReviewItemUiState {
  noteDraft: string;
  embargoDraft: string;
  pending: boolean;
}

export interface ReviewQueueItem {
  row: ReviewQueueRow;
  ui: ReviewItemUiState;
}
