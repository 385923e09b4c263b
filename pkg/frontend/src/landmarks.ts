// Landmark picking on slice panes: clicks become set-landmark commands
// carrying the world position of the clicked voxel center and the model
// feature the operator is currently placing.

import { Delta } from "./api.js";
import { SessionStore, SliceAxis } from "./state.js";

export class LandmarkPicker {
  activeIndex = 0;

  constructor(readonly store: SessionStore) {}

  featureIds(): string[] {
    return this.store.state?.config.landmark_ids ?? [];
  }

  placedCount(): number {
    return this.store.state?.landmarks.length ?? 0;
  }

  registerEnabled(): boolean {
    return this.placedCount() >= 3;
  }

  // px/py are integer pixel coordinates within the slice image
  async pick(axis: SliceAxis, px: number, py: number): Promise<Delta | null> {
    const vol = this.store.state?.volume;
    if (!vol) return null;
    const index = this.store.sliceClickToIndex(axis, px, py);
    for (let d = 0; d < 3; d++) {
      if (index[d] < 0 || index[d] >= vol.dims[d]) return null; // outside image
    }
    const features = this.featureIds();
    if (this.activeIndex >= features.length) return null;
    const world = this.store.indexToWorld(index);
    const delta = await this.store.send("set-landmark", {
      index: this.activeIndex,
      feature_id: features[this.activeIndex],
      image_point: world,
    });
    const placed = (delta.landmark_count as number) ?? 0;
    // advance to the first feature slot not yet placed, allowing re-picks
    if (this.activeIndex < features.length - 1 && placed > this.activeIndex) {
      this.activeIndex += 1;
    }
    await this.store.refresh();
    return delta;
  }

  async registerInitial(): Promise<Delta> {
    const delta = await this.store.send("register-initial");
    await this.store.refresh();
    return delta;
  }

  // marker positions per pane: the stored world points of placed landmarks
  markers(axis: SliceAxis): Array<{ u: number; v: number; feature: string }> {
    const state = this.store.state;
    if (!state?.volume) return [];
    const out: Array<{ u: number; v: number; feature: string }> = [];
    for (const lm of state.landmarks) {
      const idx = worldToIndex(state.volume, lm.image_point);
      if (axis === "axial") out.push({ u: idx[0], v: idx[1], feature: lm.feature_id });
      else if (axis === "sagittal") out.push({ u: idx[1], v: idx[2], feature: lm.feature_id });
      else out.push({ u: idx[0], v: idx[2], feature: lm.feature_id });
    }
    return out;
  }
}

function worldToIndex(
  vol: { origin_mm: number[]; spacing_mm: number[] },
  world: [number, number, number],
): [number, number, number] {
  return [
    (world[0] - vol.origin_mm[0]) / vol.spacing_mm[0],
    (world[1] - vol.origin_mm[1]) / vol.spacing_mm[1],
    (world[2] - vol.origin_mm[2]) / vol.spacing_mm[2],
  ];
}
