// The interstitial planning sheet: one row per template hole mirroring the
// server's plan state, with toggle and per-needle depth edits. A stale
// revision (another writer) triggers a refetch and the edit is retried
// once against the fresh state.

import { ApiError, Delta } from "./api.js";
import { NeedleSheetRow, SessionStore } from "./state.js";

export class NeedleSheet {
  constructor(readonly store: SessionStore) {}

  rows(): NeedleSheetRow[] {
    return this.store.needleSheet();
  }

  selectedIds(): string[] {
    return this.rows()
      .filter((r) => r.selected)
      .map((r) => r.hole_id);
  }

  async runSelection(depthMm: number): Promise<Delta> {
    return this.store.send("select-needles", { depth_mm: depthMm });
  }

  async toggle(holeId: string): Promise<Delta> {
    return this.retryOnConflict(() => this.store.send("toggle-needle", { hole_id: holeId }));
  }

  async setDepth(holeId: string, depthMm: number): Promise<Delta> {
    return this.retryOnConflict(() =>
      this.store.send("set-depth", { hole_id: holeId, depth_mm: depthMm }),
    );
  }

  private async retryOnConflict(send: () => Promise<Delta>): Promise<Delta> {
    try {
      return await send();
    } catch (err) {
      if (err instanceof ApiError && err.kind === "conflict") {
        await this.store.refresh(); // the queue already resynced; replay once
        return send();
      }
      throw err;
    }
  }
}
