// Application shell: quad view (axial / 3D on top, sagittal / coronal
// below), a workflow sidebar walking the stages in order, and the needle
// sheet. All planning math happens server-side; this file is wiring.

import { SessionClient } from "./api.js";
import { LandmarkPicker } from "./landmarks.js";
import { NeedleSheet } from "./needlesheet.js";
import { SlicePane, ThreeDPane } from "./panes.js";
import { SessionStore } from "./state.js";
import { ThresholdTuner } from "./threshold.js";

export class App {
  store!: SessionStore;
  picker!: LandmarkPicker;
  sheet!: NeedleSheet;
  tuner!: ThresholdTuner;
  panes: SlicePane[] = [];
  pane3d!: ThreeDPane;

  constructor(
    readonly client: SessionClient,
    readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    const created = await this.client.createSession();
    this.store = new SessionStore(this.client, created.id);
    this.picker = new LandmarkPicker(this.store);
    this.sheet = new NeedleSheet(this.store);
    this.tuner = new ThresholdTuner(this.store);
    await this.store.refresh();
    this.layout();
    this.store.onChange(() => this.renderSidebar());
    this.renderSidebar();
  }

  private layout(): void {
    this.root.innerHTML = "";
    const grid = document.createElement("div");
    grid.className = "quad";
    this.pane3d = new ThreeDPane(this.store);
    const axial = new SlicePane(this.store, this.picker, "axial");
    const sagittal = new SlicePane(this.store, this.picker, "sagittal");
    const coronal = new SlicePane(this.store, this.picker, "coronal");
    this.panes = [axial, sagittal, coronal];
    grid.append(axial.canvas, this.pane3d.canvas, sagittal.canvas, coronal.canvas);

    const sidebar = document.createElement("div");
    sidebar.className = "sidebar";
    sidebar.id = "sidebar";
    this.root.append(sidebar, grid);
  }

  async reloadViews(): Promise<void> {
    for (const pane of this.panes) await pane.reload();
    await this.pane3d.reload();
  }

  private renderSidebar(): void {
    const el = document.getElementById("sidebar");
    if (!el || !this.store.state) return;
    const s = this.store.state;
    el.innerHTML = "";

    const section = (title: string): HTMLDivElement => {
      const div = document.createElement("div");
      div.className = "stage";
      const h = document.createElement("h3");
      h.textContent = title;
      div.append(h);
      el.append(div);
      return div;
    };

    // 1. volume
    const loadDiv = section("1. Volume");
    const pathInput = document.createElement("input");
    pathInput.placeholder = "server path to NRRD volume";
    pathInput.id = "volume-path";
    const loadBtn = document.createElement("button");
    loadBtn.textContent = s.volume ? `loaded ${s.volume.id}` : "load";
    loadBtn.onclick = async () => {
      await this.store.send("load-volume", { path: pathInput.value });
      await this.store.refresh();
      await this.reloadViews();
    };
    loadDiv.append(pathInput, loadBtn);

    // 2. landmarks
    const lmDiv = section(`2. Landmarks (${s.landmarks.length}/3)`);
    for (const fid of s.config.landmark_ids) {
      const b = document.createElement("button");
      const placed = s.landmarks.some((l) => l.feature_id === fid);
      b.textContent = `${placed ? "*" : ""}${fid}`;
      b.onclick = () => {
        this.picker.activeIndex = s.config.landmark_ids.indexOf(fid);
      };
      lmDiv.append(b);
    }
    const regBtn = document.createElement("button");
    regBtn.textContent = s.initial_registered
      ? `registered (FRE ${s.fre_mm?.toExponential(2)} mm)`
      : "register";
    regBtn.disabled = !this.picker.registerEnabled();
    regBtn.onclick = async () => {
      await this.picker.registerInitial();
      await this.reloadViews();
    };
    lmDiv.append(regBtn);

    // 3. threshold
    const thDiv = section(`3. Threshold (${s.threshold_point_count} points)`);
    const slider = document.createElement("input");
    slider.type = "range";
    if (s.volume) {
      slider.min = String(s.volume.value_range[0]);
      slider.max = String(s.volume.value_range[1]);
    }
    slider.oninput = () => {
      this.tuner.slide(Number(slider.value));
      void this.pane3d.reload();
    };
    thDiv.append(slider);

    // 4. refine
    const icpDiv = section(s.icp ? `4. ICP (${s.icp.iterations} iters, ${s.icp.termination})` : "4. ICP");
    const icpBtn = document.createElement("button");
    icpBtn.textContent = "run ICP";
    icpBtn.onclick = async () => {
      await this.store.send("run-icp");
      await this.store.refresh();
      await this.reloadViews();
    };
    icpDiv.append(icpBtn);

    // 5. tumor + selection
    const selDiv = section(`5. Needles (${s.needles.filter((n) => n.selected).length} selected)`);
    const tumorInput = document.createElement("input");
    tumorInput.placeholder = "server path to tumor STL";
    const tumorBtn = document.createElement("button");
    tumorBtn.textContent = s.tumor_triangles ? `tumor: ${s.tumor_triangles} tris` : "set tumor";
    tumorBtn.onclick = async () => {
      await this.store.send("set-tumor", { mesh_path: tumorInput.value });
      await this.store.refresh();
    };
    const depthInput = document.createElement("input");
    depthInput.type = "number";
    depthInput.value = "60";
    const selBtn = document.createElement("button");
    selBtn.textContent = "select needles";
    selBtn.onclick = async () => {
      await this.sheet.runSelection(Number(depthInput.value));
      await this.reloadViews();
      this.renderSheet(selDiv);
    };
    selDiv.append(tumorInput, tumorBtn, depthInput, selBtn);
    this.renderSheet(selDiv);

    // 6. export
    const exDiv = section("6. Export");
    const exBtn = document.createElement("button");
    exBtn.textContent = "export plan";
    exBtn.onclick = async () => {
      const plan = await this.client.planBytes(s.id);
      const blob = new Blob([plan], { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = "plan.json";
      a.click();
    };
    exDiv.append(exBtn);
  }

  private renderSheet(parent: HTMLElement): void {
    const table = document.createElement("table");
    table.className = "needle-sheet";
    const rows = this.sheet.rows().filter((r) => r.selected || r.autoSelected);
    for (const row of rows) {
      const tr = document.createElement("tr");
      const toggle = document.createElement("input");
      toggle.type = "checkbox";
      toggle.checked = row.selected;
      toggle.onchange = async () => {
        await this.sheet.toggle(row.hole_id);
        await this.reloadViews();
      };
      const depth = document.createElement("input");
      depth.type = "number";
      depth.value = String(row.depth_mm);
      depth.onchange = async () => {
        try {
          await this.sheet.setDepth(row.hole_id, Number(depth.value));
        } catch {
          depth.value = String(row.depth_mm); // server rejected: revert the row
        }
        await this.reloadViews();
      };
      const id = document.createElement("td");
      id.textContent = row.hole_id + (row.autoSelected ? " (auto)" : "");
      const tdToggle = document.createElement("td");
      tdToggle.append(toggle);
      const tdDepth = document.createElement("td");
      tdDepth.append(depth);
      tr.append(id, tdToggle, tdDepth);
      table.append(tr);
    }
    parent.append(table);
  }
}
