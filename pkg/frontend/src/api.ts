// Typed client for the planning service. Every mutation goes through the
// command endpoint with the revision the caller last saw; the server
// rejects stale revisions with 409 so concurrent writers cannot interleave.

export interface PoseJson {
  rotation_wxyz: [number, number, number, number];
  translation_mm: [number, number, number];
}

export interface VolumeInfo {
  id: string;
  dims: [number, number, number];
  spacing_mm: [number, number, number];
  origin_mm: [number, number, number];
  directions?: number[][];
  value_range: [number, number];
}

export interface LandmarkInfo {
  index: number;
  feature_id: string;
  image_point: [number, number, number];
}

export interface NeedleRow {
  hole_id: string;
  selected: boolean;
  depth_mm: number;
  radius_mm: number;
}

export interface TemplateConfigJson {
  rows: number;
  cols: number;
  pitch_mm: number;
  hole_radius_mm: number;
  plate_width_mm: number;
  plate_height_mm: number;
  plate_thickness_mm: number;
  obturator_hole_radius_mm: number;
  obturator_radius_mm: number;
  obturator_length_mm: number;
  needle_radius_mm: number;
  max_needle_length_mm: number;
  bore_sides: number;
  landmark_ids: [string, string, string];
}

export interface SessionState {
  id: string;
  revision: number;
  config: TemplateConfigJson;
  volume: VolumeInfo | null;
  landmarks: LandmarkInfo[];
  initial_registered: boolean;
  fre_mm: number | null;
  roi: { lower: number[]; upper: number[] } | null;
  threshold: number | null;
  threshold_point_count: number;
  icp: { iterations: number; final_mse_mm2: number; termination: string } | null;
  pose: PoseJson | null;
  tumor_triangles: number;
  needles: NeedleRow[];
}

export type CommandType =
  | "load-volume"
  | "set-landmark"
  | "register-initial"
  | "set-roi"
  | "set-threshold"
  | "run-icp"
  | "nudge-pose"
  | "set-tumor"
  | "select-needles"
  | "toggle-needle"
  | "set-depth"
  | "export-plan";

export interface Delta {
  revision: number;
  type: CommandType;
  [key: string]: unknown;
}

export interface MeshJson {
  vertices: number[][];
  triangles: number[][];
}

export interface Polyline {
  points: number[][];
  closed: boolean;
}

export interface ContourSet {
  axis: string;
  index: number;
  offset_mm: number;
  template?: Polyline[];
  obturator?: Polyline[];
  tumor?: Polyline[];
  needles?: Record<string, Polyline[]>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    detail: string,
  ) {
    super(detail);
  }
}

export class SessionClient {
  constructor(
    readonly base: string,
    readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    const body = await resp.text();
    if (!resp.ok) {
      let kind = "http";
      let detail = body;
      try {
        const doc = JSON.parse(body);
        kind = doc.error ?? kind;
        detail = doc.detail ?? body;
      } catch {
        // non-JSON error body: keep raw text
      }
      throw new ApiError(resp.status, kind, detail);
    }
    return JSON.parse(body) as T;
  }

  async health(): Promise<{ status: string; version: string }> {
    return this.json("/healthz");
  }

  async createSession(config?: TemplateConfigJson): Promise<{ id: string; revision: number }> {
    return this.json("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config ? { config } : {}),
    });
  }

  async state(sessionId: string): Promise<SessionState> {
    return this.json(`/sessions/${sessionId}`);
  }

  async command(
    sessionId: string,
    revision: number,
    type: CommandType,
    payload: Record<string, unknown> = {},
  ): Promise<Delta> {
    return this.json(`/sessions/${sessionId}/commands`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ revision, type, payload }),
    });
  }

  sliceUrl(sessionId: string, axis: string, index: number, window: number, level: number): string {
    return `${this.base}/sessions/${sessionId}/slice?axis=${axis}&index=${index}&window=${window}&level=${level}`;
  }

  async mesh(sessionId: string, name: string): Promise<MeshJson> {
    return this.json(`/sessions/${sessionId}/meshes/${name}`);
  }

  async needleMeshes(sessionId: string): Promise<Record<string, MeshJson>> {
    const doc = await this.json<{ needles: Record<string, MeshJson> }>(
      `/sessions/${sessionId}/meshes/needles`,
    );
    return doc.needles;
  }

  async contours(sessionId: string, axis: string, index: number): Promise<ContourSet> {
    return this.json(`/sessions/${sessionId}/contours?axis=${axis}&index=${index}`);
  }

  async planBytes(sessionId: string): Promise<string> {
    const resp = await this.fetchFn(`${this.base}/sessions/${sessionId}/plan`);
    if (!resp.ok) throw new ApiError(resp.status, "http", await resp.text());
    return resp.text();
  }
}
