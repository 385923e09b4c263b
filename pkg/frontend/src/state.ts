// Client-side session mirror. The server owns all planning state; this
// store is a projection of the last seen state plus purely local view
// preferences (active slices, window/level, overlay toggles, camera).
// Mutations are serialized through a single-writer queue: one command in
// flight at a time, deltas applied in revision order, anything stale
// triggers a refetch.

import {
  CommandType,
  Delta,
  NeedleRow,
  SessionClient,
  SessionState,
} from "./api.js";

export interface CameraState {
  azimuthDeg: number;
  elevationDeg: number;
  zoom: number;
  target: [number, number, number];
}

export interface OverlayToggles {
  template: boolean;
  obturator: boolean;
  tumor: boolean;
  needles: boolean;
  thresholdCloud: boolean;
}

export type SliceAxis = "axial" | "sagittal" | "coronal";

export interface ViewState {
  sessionId: string;
  revision: number;
  sliceIndex: Record<SliceAxis, number>;
  window: number;
  level: number;
  overlays: OverlayToggles;
  camera: CameraState;
}

export interface NeedleSheetRow extends NeedleRow {
  autoSelected: boolean;
}

const AXIS_DIM: Record<SliceAxis, number> = { sagittal: 0, coronal: 1, axial: 2 };

export class SessionStore {
  state: SessionState | null = null;
  view: ViewState;
  thresholdPreview: number[][] = [];
  lastAutoSelected: Set<string> = new Set();
  listeners: Array<() => void> = [];

  private queue: Array<{
    type: CommandType;
    payload: Record<string, unknown>;
    resolve: (d: Delta) => void;
    reject: (e: unknown) => void;
  }> = [];
  private inflight = false;

  constructor(
    readonly client: SessionClient,
    sessionId: string,
  ) {
    this.view = {
      sessionId,
      revision: 0,
      sliceIndex: { axial: 0, sagittal: 0, coronal: 0 },
      window: 1000,
      level: 500,
      overlays: { template: true, obturator: true, tumor: true, needles: true, thresholdCloud: true },
      camera: { azimuthDeg: 30, elevationDeg: 20, zoom: 1, target: [0, 0, -30] },
    };
  }

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  async refresh(): Promise<SessionState> {
    const state = await this.client.state(this.view.sessionId);
    this.applyState(state);
    return state;
  }

  applyState(state: SessionState): void {
    this.state = state;
    this.view.revision = state.revision;
    if (state.volume) {
      for (const axis of ["axial", "sagittal", "coronal"] as SliceAxis[]) {
        const max = state.volume.dims[AXIS_DIM[axis]] - 1;
        if (this.view.sliceIndex[axis] === 0) {
          this.view.sliceIndex[axis] = Math.floor(max / 2);
        }
        this.view.sliceIndex[axis] = Math.min(this.view.sliceIndex[axis], max);
      }
    }
    this.emit();
  }

  // Every mutation funnels through here; the UI never mutates state locally.
  send(type: CommandType, payload: Record<string, unknown> = {}): Promise<Delta> {
    return new Promise<Delta>((resolve, reject) => {
      this.queue.push({ type, payload, resolve, reject });
      void this.pump();
    });
  }

  get inFlight(): boolean {
    return this.inflight;
  }

  get pendingCount(): number {
    return this.queue.length;
  }

  private async pump(): Promise<void> {
    if (this.inflight) return;
    const next = this.queue.shift();
    if (!next) return;
    this.inflight = true;
    try {
      const delta = await this.client.command(
        this.view.sessionId,
        this.view.revision,
        next.type,
        next.payload,
      );
      this.applyDelta(delta);
      next.resolve(delta);
    } catch (err) {
      // stale revision: resync from the server, then surface the failure
      if ((err as { status?: number }).status === 409) {
        try {
          await this.refresh();
        } catch {
          // refresh failure surfaces with the original error
        }
      }
      next.reject(err);
    } finally {
      this.inflight = false;
      void this.pump();
    }
  }

  private applyDelta(delta: Delta): void {
    if (delta.revision <= this.view.revision) {
      return; // out-of-order response: the newer state already landed
    }
    this.view.revision = delta.revision;
    const state = this.state;
    switch (delta.type) {
      case "set-threshold":
        this.thresholdPreview = (delta.preview_points as number[][]) ?? [];
        if (state) {
          state.threshold_point_count = delta.point_count as number;
        }
        break;
      case "select-needles": {
        const chosen = new Set(delta.selected as string[]);
        this.lastAutoSelected = chosen;
        if (state) {
          state.needles = state.needles.map((n) => ({
            ...n,
            selected: chosen.has(n.hole_id),
            depth_mm: chosen.has(n.hole_id) ? (delta.depth_mm as number) : 0,
          }));
        }
        break;
      }
      case "toggle-needle":
      case "set-depth": {
        if (state) {
          state.needles = state.needles.map((n) =>
            n.hole_id === delta.hole_id
              ? { ...n, selected: (delta.selected as boolean) ?? n.selected, depth_mm: delta.depth_mm as number }
              : n,
          );
        }
        break;
      }
      default:
        break;
    }
    if (state) state.revision = delta.revision;
    this.emit();
  }

  needleSheet(): NeedleSheetRow[] {
    if (!this.state) return [];
    return this.state.needles.map((n) => ({
      ...n,
      autoSelected: this.lastAutoSelected.has(n.hole_id),
    }));
  }

  // index <-> world for slice picking; identity-direction mapping from the
  // volume metadata the server reports
  indexToWorld(index: [number, number, number]): [number, number, number] {
    const vol = this.state?.volume;
    if (!vol) throw new Error("no volume loaded");
    const dirs = vol.directions ?? [
      [1, 0, 0],
      [0, 1, 0],
      [0, 0, 1],
    ];
    const out: [number, number, number] = [0, 0, 0];
    for (let r = 0; r < 3; r++) {
      out[r] =
        vol.origin_mm[r] +
        dirs[r][0] * vol.spacing_mm[0] * index[0] +
        dirs[r][1] * vol.spacing_mm[1] * index[1] +
        dirs[r][2] * vol.spacing_mm[2] * index[2];
    }
    return out;
  }

  // pixel within a slice pane -> 3D voxel index for that pane's axis
  sliceClickToIndex(axis: SliceAxis, px: number, py: number): [number, number, number] {
    const k = this.view.sliceIndex[axis];
    if (axis === "axial") return [px, py, k]; // cols x, rows y
    if (axis === "sagittal") return [k, px, py]; // cols y, rows z
    return [px, k, py]; // coronal: cols x, rows z
  }
}
