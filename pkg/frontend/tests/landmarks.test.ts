import { describe, expect, it } from "vitest";

import { Delta, SessionClient, SessionState } from "../src/api.js";
import { LandmarkPicker } from "../src/landmarks.js";
import { SessionStore } from "../src/state.js";

function makeStore(): { store: SessionStore; sent: Array<Record<string, unknown>> } {
  const sent: Array<Record<string, unknown>> = [];
  let revision = 0;
  const landmarks: SessionState["landmarks"] = [];
  const baseState = (): SessionState =>
    ({
      id: "s1",
      revision,
      config: { landmark_ids: ["A1", "A13", "M1"] } as SessionState["config"],
      volume: {
        id: "v",
        dims: [20, 20, 10],
        spacing_mm: [2, 2, 3],
        origin_mm: [-10, -10, -5],
        directions: [
          [1, 0, 0],
          [0, 1, 0],
          [0, 0, 1],
        ],
        value_range: [0, 100],
      },
      landmarks,
      initial_registered: false,
      fre_mm: null,
      roi: null,
      threshold: null,
      threshold_point_count: 0,
      icp: null,
      pose: null,
      tumor_triangles: 0,
      needles: [],
    }) as SessionState;
  const client = {
    command: async (_s: string, rev: number, type: string, payload: Record<string, unknown>) => {
      sent.push({ type, ...payload });
      revision = rev + 1;
      if (type === "set-landmark") {
        landmarks.push({
          index: payload.index as number,
          feature_id: payload.feature_id as string,
          image_point: payload.image_point as [number, number, number],
        });
        return { revision, type, landmark_count: landmarks.length } as Delta;
      }
      return { revision, type, fre_mm: 0 } as Delta;
    },
    state: async () => baseState(),
  } as unknown as SessionClient;
  const store = new SessionStore(client, "s1");
  store.applyState(baseState());
  return { store, sent };
}

describe("LandmarkPicker", () => {
  it("emits the world position of the clicked voxel center", async () => {
    const { store, sent } = makeStore();
    const picker = new LandmarkPicker(store);
    store.view.sliceIndex.axial = 4;
    await picker.pick("axial", 3, 7);
    expect(sent[0]).toMatchObject({
      type: "set-landmark",
      index: 0,
      feature_id: "A1",
      image_point: [-10 + 6, -10 + 14, -5 + 12], // index (3,7,4) through origin+spacing
    });
  });

  it("advances through the three features and enables register", async () => {
    const { store } = makeStore();
    const picker = new LandmarkPicker(store);
    expect(picker.registerEnabled()).toBe(false);
    await picker.pick("axial", 1, 1);
    await picker.pick("axial", 5, 5);
    expect(picker.registerEnabled()).toBe(false);
    await picker.pick("axial", 9, 2);
    expect(picker.placedCount()).toBe(3);
    expect(picker.registerEnabled()).toBe(true);
  });

  it("ignores clicks outside the volume", async () => {
    const { store, sent } = makeStore();
    const picker = new LandmarkPicker(store);
    const result = await picker.pick("axial", 25, 3); // x beyond dims[0]
    expect(result).toBeNull();
    expect(sent).toHaveLength(0);
  });

  it("re-picking an existing feature keeps its slot", async () => {
    const { store, sent } = makeStore();
    const picker = new LandmarkPicker(store);
    await picker.pick("axial", 1, 1);
    picker.activeIndex = 0; // operator re-selects the first feature
    await picker.pick("axial", 2, 2);
    expect(sent.filter((s) => s.index === 0)).toHaveLength(2);
  });
});
