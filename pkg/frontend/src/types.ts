// Wire types mirroring the orchestrator HTTP/JSON API.

export interface Placement {
  translation: [number, number, number];
  yaw: number;
  xy_scale: number;
  z_scale: number;
}

export interface AssetInstance {
  id: string;
  asset_ref: string;
  category: 'building' | 'tree' | 'streetlight';
  placement: Placement;
  attribute_overrides: Record<string, unknown>;
}

export interface SceneDocumentJson {
  version: string;
  metadata: Record<string, unknown>;
  layers: { kind: string; material: string; mesh: unknown }[];
  materials: Record<string, unknown>;
  instances: AssetInstance[];
  skybox: { id: string; hdr_ref: string; rotation: number };
  revision: number;
  edit_log: unknown[];
}

export interface CommandDiff {
  added_instances: string[];
  removed_instances: string[];
  modified_instances: string[];
  layers_changed: string[];
  revision: number;
}

export interface CommandResponse {
  diff: CommandDiff;
  revision: number;
}

export interface ApiErrorPayload {
  error: string;
  message: string;
  position?: number;
  expected?: string;
  current_revision?: number;
}

export interface EventsResponse {
  revision: number;
  changed: boolean;
  can_undo: boolean;
  can_redo: boolean;
}

export interface SchedulePair {
  index: number;
  dimension: string;
  method_a: string;
  image_a: string;
  method_b: string;
  image_b: string;
}

export interface ScheduleResponse {
  dimension: string;
  pairs: SchedulePair[];
  judged: number[];
}

export interface LeaderboardRow {
  method: string;
  mu: number;
  sigma: number;
  wins: number;
  losses: number;
  rdr_score: number;
}

export interface LeaderboardResponse {
  record_count: number;
  dimensions: Record<string, LeaderboardRow[]>;
}

export type Dimension = 'SVC' | 'SRC' | 'MTF' | 'LA';

export const DIMENSION_RUBRICS: Record<Dimension, string> = {
  SVC: 'Structural & View Consistency: stable geometry and coherent structure across viewpoints.',
  SRC: 'Scene Richness & Complexity: variety and density of urban content.',
  MTF: 'Material & Texture Fidelity: realistic, artifact-free surface detail.',
  LA: 'Lighting & Atmosphere: plausible illumination, sky, and mood.',
};
