/**
 * Wire protocol: newline-delimited JSON messages, one object per line
 * (or per WebSocket frame).  Numbers are degrees and millimetres,
 * quantized to four fractional digits before they hit the wire.
 */

export interface ModuleSpecWire {
  actuators: number;
  radius_mm: number;
  plate_offset_mm: number;
  min_len_mm: number;
  max_len_mm: number;
  tilt_limit_deg: number;
}

export interface ModuleStateWire {
  phi_deg: number;
  theta_deg: number;
  h_mm: number;
  lengths_mm: number[];
}

export interface HelloMsg { type: "hello"; version: number }
export interface WelcomeMsg { type: "welcome"; robot_spec: { modules: ModuleSpecWire[] } }
export interface ConfigMsg { type: "config"; robot_spec: { modules: ModuleSpecWire[] } }
export interface LockMsg { type: "lock" }
export interface UnlockMsg { type: "unlock" }
export interface TargetMsg { type: "target"; module: number; pos_mm: [number, number, number] }
export interface MoveMsg { type: "move" }
export interface StopMsg { type: "stop" }
export interface StateMsg {
  type: "state";
  seq: number;
  t_ms: number;
  fsm: number;
  modules: ModuleStateWire[];
  ee_mm: [number, number, number];
  stale: boolean;
}
export interface AckMsg { type: "ack"; ref: string }
export interface ErrorMsg { type: "error"; code: string; detail: string }

export type Message =
  | HelloMsg | WelcomeMsg | ConfigMsg | LockMsg | UnlockMsg
  | TargetMsg | MoveMsg | StopMsg | StateMsg | AckMsg | ErrorMsg;

const TAGS = new Set([
  "hello", "welcome", "config", "lock", "unlock",
  "target", "move", "stop", "state", "ack", "error",
]);

/** Quantize a number to the wire's four fractional digits. */
export function q4(value: number): number {
  return Math.round(value * 10000) / 10000;
}

export function encode(msg: Message): string {
  return JSON.stringify(msg);
}

export class ProtocolError extends Error {
  constructor(readonly detail: string) {
    super(`bad_message: ${detail}`);
  }
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function checkVec3(v: unknown, what: string): [number, number, number] {
  if (!Array.isArray(v) || v.length !== 3 || !v.every(isFiniteNumber)) {
    throw new ProtocolError(`${what} must be three finite numbers`);
  }
  return [v[0], v[1], v[2]];
}

function checkSpec(obj: unknown): ModuleSpecWire {
  const m = obj as Record<string, unknown>;
  if (typeof m !== "object" || m === null) {
    throw new ProtocolError("module spec must be an object");
  }
  for (const key of ["actuators", "radius_mm", "plate_offset_mm",
                     "min_len_mm", "max_len_mm", "tilt_limit_deg"]) {
    if (!isFiniteNumber(m[key])) throw new ProtocolError(`spec field ${key} missing`);
  }
  return m as unknown as ModuleSpecWire;
}

/** Parse one line; throws ProtocolError on anything malformed. */
export function decode(line: string): Message {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`invalid JSON: ${String(err)}`);
  }
  const msg = obj as Record<string, unknown>;
  if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
    throw new ProtocolError("missing type tag");
  }
  if (!TAGS.has(msg.type)) throw new ProtocolError(`unknown type ${msg.type}`);

  switch (msg.type) {
    case "hello":
      if (!isFiniteNumber(msg.version)) throw new ProtocolError("hello.version missing");
      break;
    case "welcome":
    case "config": {
      const spec = msg.robot_spec as Record<string, unknown> | undefined;
      if (!spec || !Array.isArray(spec.modules) || spec.modules.length === 0) {
        throw new ProtocolError("robot_spec.modules missing");
      }
      spec.modules.forEach(checkSpec);
      break;
    }
    case "target":
      if (!Number.isInteger(msg.module)) throw new ProtocolError("target.module missing");
      checkVec3(msg.pos_mm, "target.pos_mm");
      break;
    case "state": {
      if (!isFiniteNumber(msg.seq) || !isFiniteNumber(msg.t_ms) ||
          !Number.isInteger(msg.fsm) || typeof msg.stale !== "boolean") {
        throw new ProtocolError("state fields missing");
      }
      checkVec3(msg.ee_mm, "state.ee_mm");
      if (!Array.isArray(msg.modules)) throw new ProtocolError("state.modules missing");
      for (const m of msg.modules as Record<string, unknown>[]) {
        if (!isFiniteNumber(m.phi_deg) || !isFiniteNumber(m.theta_deg) ||
            !isFiniteNumber(m.h_mm) || !Array.isArray(m.lengths_mm)) {
          throw new ProtocolError("state module fields missing");
        }
      }
      break;
    }
    case "ack":
      if (typeof msg.ref !== "string") throw new ProtocolError("ack.ref missing");
      break;
    case "error":
      if (typeof msg.code !== "string") throw new ProtocolError("error.code missing");
      break;
    default:
      break; // lock/unlock/move/stop carry no payload
  }
  return msg as unknown as Message;
}

export function defaultModuleSpec(): ModuleSpecWire {
  return {
    actuators: 3,
    radius_mm: 15.0,
    plate_offset_mm: 5.0,
    min_len_mm: 30.0,
    max_len_mm: 60.0,
    tilt_limit_deg: 10.0,
  };
}
