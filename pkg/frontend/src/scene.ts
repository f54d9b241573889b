/**
 * Pure scene geometry: turns one state broadcast plus the module specs
 * into plate polygons, actuator segments and the end-effector marker,
 * using the same chaining math the server runs (plates pivot about
 * their centres at the broadcast height; orientations compose down the
 * chain; the next base sits plate_offset along the top normal).
 */

import { ModuleSpecWire, ModuleStateWire, StateMsg } from "./protocol.js";

export type Vec3 = [number, number, number];
type Mat3 = [Vec3, Vec3, Vec3]; // row-major

export interface ActuatorVisual {
  from: Vec3;
  to: Vec3;
  length_mm: number;
  saturated: boolean;
}

export interface ModuleVisual {
  baseVertices: Vec3[];
  topVertices: Vec3[];
  actuators: ActuatorVisual[];
  topCenter: Vec3;
  topNormal: Vec3;
}

export interface RobotVisual {
  modules: ModuleVisual[];
  endEffector: Vec3;
}

const DEG = Math.PI / 180;

function matMul(a: Mat3, b: Mat3): Mat3 {
  const out: number[][] = [[0, 0, 0], [0, 0, 0], [0, 0, 0]];
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return out as Mat3;
}

function matVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
    m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
    m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
  ];
}

function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

function scale(v: Vec3, s: number): Vec3 {
  return [v[0] * s, v[1] * s, v[2] * s];
}

export function dist(a: Vec3, b: Vec3): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

/** Tilt rotation from the IMU angles; same entries the server uses. */
export function tiltRotation(phiDeg: number, thetaDeg: number): Mat3 {
  const cp = Math.cos(phiDeg * DEG);
  const sp = Math.sin(phiDeg * DEG);
  const ct = Math.cos(thetaDeg * DEG);
  const st = Math.sin(thetaDeg * DEG);
  return [
    [cp, sp * st, sp * ct],
    [0, ct, -st],
    [-sp, cp * st, cp * ct],
  ];
}

/** Regular actuator polygon in the base plane, vertex 0 on +X. */
export function basePolygon(count: number, radius: number): Vec3[] {
  const pts: Vec3[] = [];
  for (let k = 0; k < count; k++) {
    const a = (2 * Math.PI * k) / count;
    pts.push([radius * Math.cos(a), radius * Math.sin(a), 0]);
  }
  return pts;
}

const IDENTITY: Mat3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
const SATURATION_EPS = 1e-6;

/** Build the whole robot's drawable geometry from one broadcast. */
export function buildRobotVisual(
  state: Pick<StateMsg, "modules">,
  specs: ModuleSpecWire[],
): RobotVisual {
  const n = Math.min(state.modules.length, specs.length);
  const modules: ModuleVisual[] = [];
  let origin: Vec3 = [0, 0, 0];
  let rPrev: Mat3 = IDENTITY;

  for (let i = 0; i < n; i++) {
    const spec = specs[i];
    const mod: ModuleStateWire = state.modules[i];
    const rLocal = tiltRotation(mod.phi_deg, mod.theta_deg);
    const rGlobal = matMul(rPrev, rLocal);
    const poly = basePolygon(spec.actuators, spec.radius_mm);

    const baseVertices = poly.map((v) => add(origin, matVec(rPrev, v)));
    const topVertices = poly.map((v) => {
      const local = add(matVec(rLocal, v), [0, 0, mod.h_mm]);
      return add(origin, matVec(rPrev, local));
    });
    const topCenter = add(origin, matVec(rPrev, [0, 0, mod.h_mm]));
    const topNormal: Vec3 = [rGlobal[0][2], rGlobal[1][2], rGlobal[2][2]];

    const actuators: ActuatorVisual[] = poly.map((_, k) => {
      const length = dist(topVertices[k], baseVertices[k]);
      return {
        from: baseVertices[k],
        to: topVertices[k],
        length_mm: length,
        saturated:
          length <= spec.min_len_mm + SATURATION_EPS ||
          length >= spec.max_len_mm - SATURATION_EPS,
      };
    });

    modules.push({ baseVertices, topVertices, actuators, topCenter, topNormal });
    origin = add(topCenter, scale(topNormal, spec.plate_offset_mm));
    rPrev = rGlobal;
  }

  const endEffector: Vec3 =
    modules.length > 0 ? modules[modules.length - 1].topCenter : [0, 0, 0];
  return { modules, endEffector };
}
