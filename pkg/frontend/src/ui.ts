/**
 * DOM panel wiring: connection form, stage badge, module spec editor,
 * per-platform sliders and the motion buttons.  Buttons are enabled
 * strictly by what the mirrored stage machine allows, so the cockpit
 * can never emit a message the server would reject as out of order.
 */

import { CockpitClient, UiState } from "./client.js";
import { defaultModuleSpec, ModuleSpecWire } from "./protocol.js";

const SPEC_FIELDS: Array<[keyof ModuleSpecWire, string, number]> = [
  ["actuators", "act", 1],
  ["radius_mm", "radius", 0.5],
  ["plate_offset_mm", "gap", 0.5],
  ["min_len_mm", "min", 1],
  ["max_len_mm", "max", 1],
  ["tilt_limit_deg", "tilt", 1],
];

const STAGE_NAMES = ["0 configuring", "1 placed", "2 locked", "3 moving"];

export class CockpitPanel {
  private root: HTMLElement;
  private client: CockpitClient;

  constructor(root: HTMLElement, client: CockpitClient) {
    this.root = root;
    this.client = client;
    client.onChange(() => this.refresh());
  }

  private el<T extends HTMLElement>(id: string): T {
    return this.root.querySelector(`#${id}`) as T;
  }

  bind(onConnect: (address: string) => void): void {
    this.el<HTMLButtonElement>("btn-connect").onclick = () => {
      onConnect(this.el<HTMLInputElement>("address").value.trim());
    };
    this.el<HTMLButtonElement>("btn-config").onclick = () => this.client.configure();
    this.el<HTMLButtonElement>("btn-lock").onclick = () => this.client.lock();
    this.el<HTMLButtonElement>("btn-unlock").onclick = () => this.client.unlock();
    this.el<HTMLButtonElement>("btn-move").onclick = () => this.client.move();
    this.el<HTMLButtonElement>("btn-stop").onclick = () => this.client.stop();
    this.el<HTMLButtonElement>("btn-add-module").onclick = () => {
      this.client.setSpecForm([...this.client.state.specForm, defaultModuleSpec()]);
      this.renderSpecForm();
      this.refresh();
    };
    this.el<HTMLButtonElement>("btn-del-module").onclick = () => {
      if (this.client.state.specForm.length > 1) {
        this.client.setSpecForm(this.client.state.specForm.slice(0, -1));
        this.renderSpecForm();
        this.refresh();
      }
    };
    for (const axis of ["x", "y", "z"] as const) {
      this.el<HTMLInputElement>(`slider-${axis}`).oninput = () => this.pushSliders();
    }
    this.el<HTMLSelectElement>("platform").onchange = () => this.pushSliders();
    this.renderSpecForm();
    this.refresh();
  }

  private pushSliders(): void {
    const module = Number(this.el<HTMLSelectElement>("platform").value);
    const pos: [number, number, number] = [
      Number(this.el<HTMLInputElement>("slider-x").value),
      Number(this.el<HTMLInputElement>("slider-y").value),
      Number(this.el<HTMLInputElement>("slider-z").value),
    ];
    this.client.setSliderTarget(module, pos);
    this.el<HTMLSpanElement>("slider-readout").textContent =
      `(${pos[0].toFixed(1)}, ${pos[1].toFixed(1)}, ${pos[2].toFixed(1)}) mm`;
  }

  renderSpecForm(): void {
    const host = this.el<HTMLDivElement>("spec-rows");
    host.innerHTML = "";
    this.client.state.specForm.forEach((spec, idx) => {
      const row = document.createElement("div");
      row.className = "spec-row";
      const label = document.createElement("span");
      label.textContent = `M${idx}`;
      row.appendChild(label);
      for (const [key, title, step] of SPEC_FIELDS) {
        const input = document.createElement("input");
        input.type = "number";
        input.step = String(step);
        input.title = title;
        input.value = String(spec[key]);
        input.oninput = () => {
          const v = Number(input.value);
          if (Number.isFinite(v)) {
            (spec[key] as number) = key === "actuators" ? Math.round(v) : v;
            this.client.specEdited = true;
          }
          this.refresh();
        };
        row.appendChild(input);
      }
      host.appendChild(row);
    });
    const platform = this.el<HTMLSelectElement>("platform");
    platform.innerHTML = "";
    this.client.state.specForm.forEach((_, idx) => {
      const opt = document.createElement("option");
      opt.value = String(idx);
      opt.textContent = `platform ${idx}`;
      platform.appendChild(opt);
    });
    platform.value = String(this.client.state.specForm.length - 1);
  }

  refresh(): void {
    const s: UiState = this.client.state;
    this.el<HTMLSpanElement>("conn-badge").textContent = s.connection;
    this.el<HTMLSpanElement>("stage-badge").textContent =
      s.connection === "connected" ? STAGE_NAMES[s.fsm] : "-";
    this.el<HTMLSpanElement>("stale-badge").style.display =
      s.stale && s.connection === "connected" ? "inline" : "none";

    const banner = this.el<HTMLDivElement>("error-banner");
    banner.textContent = s.lastError ?? "";
    banner.style.display = s.lastError ? "block" : "none";

    this.el<HTMLButtonElement>("btn-config").disabled = !this.client.canConfigure;
    this.el<HTMLButtonElement>("btn-lock").disabled = !this.client.canLock;
    this.el<HTMLButtonElement>("btn-unlock").disabled = !this.client.canUnlock;
    this.el<HTMLButtonElement>("btn-move").disabled = !this.client.canMove;
    this.el<HTMLButtonElement>("btn-stop").disabled = !this.client.canStop;
    const sliderOk = this.client.canTarget;
    for (const axis of ["x", "y", "z"]) {
      this.el<HTMLInputElement>(`slider-${axis}`).disabled = !sliderOk;
    }
    this.el<HTMLSpanElement>("move-progress").style.display =
      s.moving ? "inline" : "none";

    if (s.lastState) {
      const ee = s.lastState.ee_mm;
      this.el<HTMLSpanElement>("ee-readout").textContent =
        `end effector (${ee[0].toFixed(1)}, ${ee[1].toFixed(1)}, ${ee[2].toFixed(1)}) mm`;
    }
  }
}
