/** Wire types mirroring the annotation service API. */

export interface CatalogEntry {
  id: number;
  name: string;
  color: [number, number, number];
  importance: number;
}

export interface Span {
  row: number;
  col_start: number;
  col_end: number;
  label: number;
}

export interface TaskStats {
  reliable_fraction: number;
  per_class_reliable_fraction: Record<string, number>;
  remaining_uncertain: number;
}

export interface TaskPayload {
  task_id: string;
  image_id: string;
  version: number;
  state: "open" | "in_progress" | "finalized";
  refs: Record<string, string>;
  catalog: CatalogEntry[];
  edits: Span[];
  edits_applied: number;
  instance_edits_applied: number;
  sessions: { annotator_id: string; started_at: string; ended_at: string }[];
  stats: TaskStats;
}

export interface ApiError {
  code: string;
  message: string;
  current_version?: number;
  remaining?: number;
  first?: [number, number];
}
