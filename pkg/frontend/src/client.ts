/**
 * Cockpit session: mirrors the server's stage machine, gates every
 * control by what is legal in the current stage, and rate-limits the
 * slider targets.  Pure of any DOM or rendering concern so the whole
 * operator workflow is testable headless.
 */

import {
  AckMsg,
  ConfigMsg,
  ErrorMsg,
  Message,
  ModuleSpecWire,
  StateMsg,
  TargetMsg,
  decode,
  defaultModuleSpec,
  encode,
  q4,
} from "./protocol.js";
import { Transport } from "./transport.js";

export type ConnectionStatus = "disconnected" | "connecting" | "connected";

export interface UiState {
  connection: ConnectionStatus;
  fsm: number;
  specForm: ModuleSpecWire[];
  selectedModule: number;
  sliders: [number, number, number];
  targetStaged: boolean;
  moving: boolean;
  lastState: StateMsg | null;
  stale: boolean;
  lastError: string | null;
  /** cockpit-local hologram placement; never sent anywhere */
  placement: { x: number; y: number; yaw: number };
}

const TARGET_MIN_INTERVAL_MS = 100; // <= 10 target messages per second

export class CockpitClient {
  state: UiState = {
    connection: "disconnected",
    fsm: 0,
    specForm: [defaultModuleSpec(), defaultModuleSpec()],
    selectedModule: 1,
    sliders: [0, 0, 85],
    targetStaged: false,
    moving: false,
    lastState: null,
    stale: true,
    lastError: null,
    placement: { x: 0, y: 0, yaw: 0 },
  };

  targetsSent = 0;
  /** set once the operator touches the form; a late welcome then keeps off */
  specEdited = false;
  private transport: Transport | null = null;
  private listeners: Array<(s: UiState) => void> = [];
  private lastTargetAt = -Infinity;
  private pendingTarget: [number, number, number] | null = null;
  private trailingTimer: ReturnType<typeof setTimeout> | null = null;
  private now: () => number;

  constructor(now: () => number = () => Date.now()) {
    this.now = now;
  }

  onChange(cb: (s: UiState) => void): void {
    this.listeners.push(cb);
  }

  private emit(): void {
    for (const cb of this.listeners) cb(this.state);
  }

  /** Attach a ready transport and run the hello/welcome exchange. */
  attach(transport: Transport): void {
    this.transport = transport;
    this.state.connection = "connected";
    this.state.fsm = 0;
    this.state.lastError = null;
    this.specEdited = false;
    transport.onLine((line) => this.handleLine(line));
    transport.onClose(() => {
      this.state.connection = "disconnected";
      this.state.stale = true;
      this.emit();
    });
    this.send({ type: "hello", version: 1 });
    this.emit();
  }

  detach(): void {
    this.transport?.close();
    this.transport = null;
    this.state.connection = "disconnected";
    this.emit();
  }

  private send(msg: Message): void {
    this.transport?.send(encode(msg));
  }

  private handleLine(line: string): void {
    let msg: Message;
    try {
      msg = decode(line);
    } catch {
      return; // tolerate garbage from the wire
    }
    switch (msg.type) {
      case "welcome":
        if (!this.specEdited) {
          this.state.specForm = msg.robot_spec.modules.map((m) => ({ ...m }));
        }
        break;
      case "state":
        this.applyState(msg);
        break;
      case "ack":
        this.applyAck(msg);
        break;
      case "error":
        this.state.lastError = `${msg.code}: ${(msg as ErrorMsg).detail}`;
        break;
      default:
        break;
    }
    this.emit();
  }

  private applyState(msg: StateMsg): void {
    this.state.lastState = msg;
    this.state.stale = msg.stale;
    this.state.fsm = msg.fsm; // broadcasts are authoritative
    if (msg.fsm !== 3) this.state.moving = false;
  }

  private applyAck(msg: AckMsg): void {
    switch (msg.ref) {
      case "config":
        this.state.fsm = Math.max(this.state.fsm, 1);
        break;
      case "lock":
        this.state.fsm = 2;
        break;
      case "unlock":
        this.state.fsm = 1;
        this.state.targetStaged = false;
        break;
      case "target":
        this.state.targetStaged = true;
        break;
      case "move":
        this.state.fsm = 3;
        this.state.moving = true;
        break;
      case "stop":
      case "converged":
        this.state.fsm = 2;
        this.state.moving = false;
        break;
      default:
        break;
    }
  }

  // ---- control enablement (mirrors the server's stage machine) ----

  get canConfigure(): boolean {
    return this.state.connection === "connected" && this.state.fsm === 0
      && this.specFormValid();
  }

  get canLock(): boolean {
    return this.state.connection === "connected" && this.state.fsm === 1;
  }

  get canUnlock(): boolean {
    return this.state.connection === "connected" && this.state.fsm === 2;
  }

  get canTarget(): boolean {
    return this.state.connection === "connected" && this.state.fsm === 2;
  }

  get canMove(): boolean {
    return this.state.connection === "connected" && this.state.fsm === 2
      && this.state.targetStaged;
  }

  get canStop(): boolean {
    return this.state.connection === "connected" && this.state.fsm === 3;
  }

  get canDragHologram(): boolean {
    return this.state.fsm === 1; // placement is free until lock
  }

  /** Operator edit of the geometry form; wins over any later welcome. */
  setSpecForm(modules: ModuleSpecWire[]): void {
    this.state.specForm = modules.map((m) => ({ ...m }));
    this.specEdited = true;
    this.emit();
  }

  specFormValid(): boolean {
    return this.state.specForm.length > 0 && this.state.specForm.every(
      (m) =>
        Number.isInteger(m.actuators) && m.actuators >= 3 &&
        m.radius_mm > 0 && m.plate_offset_mm >= 0 &&
        m.min_len_mm > 0 && m.min_len_mm < m.max_len_mm &&
        m.tilt_limit_deg > 0,
    );
  }

  // ---- operator actions; all no-op unless legal -------------------

  configure(): boolean {
    if (!this.canConfigure) return false;
    const msg: ConfigMsg = {
      type: "config",
      robot_spec: { modules: this.state.specForm.map((m) => ({ ...m })) },
    };
    this.send(msg);
    return true;
  }

  lock(): boolean {
    if (!this.canLock) return false;
    this.send({ type: "lock" });
    return true;
  }

  unlock(): boolean {
    if (!this.canUnlock) return false;
    this.send({ type: "unlock" });
    return true;
  }

  move(): boolean {
    if (!this.canMove) return false;
    this.send({ type: "move" });
    return true;
  }

  stop(): boolean {
    if (!this.canStop) return false;
    this.send({ type: "stop" });
    return true;
  }

  /**
   * Slider change: clamp into the workspace box and send one rate-limited
   * target message; bursts coalesce into a trailing update carrying the
   * latest value.
   */
  setSliderTarget(module: number, pos: [number, number, number]): boolean {
    if (!this.canTarget) return false;
    this.state.selectedModule = module;
    this.state.sliders = this.clampToWorkspace(module, pos);
    const t = this.now();
    if (t - this.lastTargetAt >= TARGET_MIN_INTERVAL_MS) {
      this.sendTarget(module, this.state.sliders);
    } else {
      this.pendingTarget = this.state.sliders;
      if (this.trailingTimer === null) {
        const wait = TARGET_MIN_INTERVAL_MS - (t - this.lastTargetAt);
        this.trailingTimer = setTimeout(() => {
          this.trailingTimer = null;
          if (this.pendingTarget !== null && this.canTarget) {
            this.sendTarget(this.state.selectedModule, this.pendingTarget);
          }
        }, wait);
      }
    }
    this.emit();
    return true;
  }

  private sendTarget(module: number, pos: [number, number, number]): void {
    const msg: TargetMsg = {
      type: "target",
      module,
      pos_mm: [q4(pos[0]), q4(pos[1]), q4(pos[2])],
    };
    this.send(msg);
    this.lastTargetAt = this.now();
    this.pendingTarget = null;
    this.targetsSent += 1;
  }

  /** Coarse workspace box mirroring the server's target validation. */
  clampToWorkspace(module: number, pos: [number, number, number]): [number, number, number] {
    const chain = this.state.specForm.slice(0, module + 1);
    if (chain.length === 0) return pos;
    let zMin = 0;
    let zMax = 0;
    chain.forEach((m, i) => {
      zMin += m.min_len_mm;
      zMax += m.max_len_mm;
      if (i < chain.length - 1) {
        zMin += m.plate_offset_mm;
        zMax += m.plate_offset_mm;
      }
    });
    const lateral = zMax / 2;
    const clamp = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi);
    return [
      clamp(pos[0], -lateral, lateral),
      clamp(pos[1], -lateral, lateral),
      clamp(pos[2], zMin, zMax),
    ];
  }

  setPlacement(x: number, y: number, yaw: number): boolean {
    if (!this.canDragHologram) return false;
    this.state.placement = { x, y, yaw };
    this.emit();
    return true;
  }
}
