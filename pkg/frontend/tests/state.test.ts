import { describe, expect, it } from "vitest";

import { Delta, SessionClient, SessionState } from "../src/api.js";
import { SessionStore } from "../src/state.js";

function fakeState(revision = 0): SessionState {
  return {
    id: "s1",
    revision,
    config: {
      rows: 2,
      cols: 2,
      pitch_mm: 10,
      hole_radius_mm: 1.65,
      plate_width_mm: 130,
      plate_height_mm: 130,
      plate_thickness_mm: 20,
      obturator_hole_radius_mm: 0,
      obturator_radius_mm: 9.5,
      obturator_length_mm: 120,
      needle_radius_mm: 1.65,
      max_needle_length_mm: 200,
      bore_sides: 12,
      landmark_ids: ["A1", "A2", "B1"],
    },
    volume: {
      id: "v",
      dims: [10, 12, 14],
      spacing_mm: [1.5, 2.0, 2.5],
      origin_mm: [-5, -6, -7],
      directions: [
        [1, 0, 0],
        [0, 1, 0],
        [0, 0, 1],
      ],
      value_range: [0, 1000],
    },
    landmarks: [],
    initial_registered: false,
    fre_mm: null,
    roi: null,
    threshold: null,
    threshold_point_count: 0,
    icp: null,
    pose: null,
    tumor_triangles: 0,
    needles: [
      { hole_id: "A1", selected: false, depth_mm: 0, radius_mm: 1.65 },
      { hole_id: "A2", selected: false, depth_mm: 0, radius_mm: 1.65 },
    ],
  };
}

interface Sent {
  revision: number;
  type: string;
  payload: Record<string, unknown>;
}

function storeWithFakeClient(
  handler: (sent: Sent) => Delta | Promise<Delta>,
): { store: SessionStore; sent: Sent[] } {
  const sent: Sent[] = [];
  const client = {
    command: async (_sid: string, revision: number, type: string, payload: Record<string, unknown>) => {
      const record = { revision, type, payload };
      sent.push(record);
      return handler(record);
    },
    state: async () => fakeState(),
  } as unknown as SessionClient;
  const store = new SessionStore(client, "s1");
  store.applyState(fakeState());
  return { store, sent };
}

describe("SessionStore", () => {
  it("maps voxel indices to world through the volume metadata", () => {
    const { store } = storeWithFakeClient(() => ({ revision: 1, type: "set-roi" }));
    expect(store.indexToWorld([0, 0, 0])).toEqual([-5, -6, -7]);
    expect(store.indexToWorld([2, 3, 4])).toEqual([-5 + 3, -6 + 6, -7 + 10]);
  });

  it("converts slice clicks to indices per pane orientation", () => {
    const { store } = storeWithFakeClient(() => ({ revision: 1, type: "set-roi" }));
    store.view.sliceIndex = { axial: 7, sagittal: 3, coronal: 5 };
    expect(store.sliceClickToIndex("axial", 2, 4)).toEqual([2, 4, 7]);
    expect(store.sliceClickToIndex("sagittal", 2, 4)).toEqual([3, 2, 4]);
    expect(store.sliceClickToIndex("coronal", 2, 4)).toEqual([2, 5, 4]);
  });

  it("serializes commands: one in flight, revisions strictly increasing", async () => {
    let concurrent = 0;
    let maxConcurrent = 0;
    let revision = 0;
    const { store, sent } = storeWithFakeClient(async (record) => {
      concurrent++;
      maxConcurrent = Math.max(maxConcurrent, concurrent);
      await new Promise((r) => setTimeout(r, 5));
      concurrent--;
      revision++;
      expect(record.revision).toBe(revision - 1);
      return { revision, type: record.type } as Delta;
    });
    await Promise.all([
      store.send("set-threshold", { value: 1 }),
      store.send("set-threshold", { value: 2 }),
      store.send("set-threshold", { value: 3 }),
    ]);
    expect(maxConcurrent).toBe(1);
    expect(sent.map((s) => s.revision)).toEqual([0, 1, 2]);
    expect(store.view.revision).toBe(3);
  });

  it("applies select-needles deltas to the needle rows", async () => {
    const { store } = storeWithFakeClient(() => ({
      revision: 1,
      type: "select-needles",
      selected: ["A2"],
      depth_mm: 66,
    }));
    await store.send("select-needles", { depth_mm: 66 });
    const rows = store.needleSheet();
    expect(rows.find((r) => r.hole_id === "A2")).toMatchObject({
      selected: true,
      depth_mm: 66,
      autoSelected: true,
    });
    expect(rows.find((r) => r.hole_id === "A1")).toMatchObject({ selected: false, depth_mm: 0 });
  });

  it("ignores deltas older than the current revision", () => {
    const { store } = storeWithFakeClient(() => ({ revision: 1, type: "set-roi" }));
    store.view.revision = 5;
    // a response that raced and arrived late must not regress state
    (store as unknown as { applyDelta(d: Delta): void }).applyDelta({
      revision: 3,
      type: "set-threshold",
      point_count: 123,
      preview_points: [[0, 0, 0]],
    } as Delta);
    expect(store.view.revision).toBe(5);
    expect(store.thresholdPreview).toEqual([]);
  });

  it("resyncs from the server after a 409", async () => {
    let refetched = false;
    const client = {
      command: async () => {
        const err = new Error("stale") as Error & { status: number };
        err.status = 409;
        throw err;
      },
      state: async () => {
        refetched = true;
        return fakeState(9);
      },
    } as unknown as SessionClient;
    const store = new SessionStore(client, "s1");
    store.applyState(fakeState());
    await expect(store.send("set-threshold", { value: 1 })).rejects.toThrow();
    expect(refetched).toBe(true);
    expect(store.view.revision).toBe(9);
  });
});
