import { describe, expect, it } from "vitest";
import { buildRobotVisual, dist, Vec3 } from "../src/scene.js";
import { defaultModuleSpec, ModuleSpecWire, ModuleStateWire } from "../src/protocol.js";

function neutralModule(h = 40): ModuleStateWire {
  return { phi_deg: 0, theta_deg: 0, h_mm: h, lengths_mm: [h, h, h] };
}

function specs(n: number): ModuleSpecWire[] {
  return Array.from({ length: n }, () => defaultModuleSpec());
}

describe("robot scene geometry", () => {
  it("stacks two neutral modules to the 85 mm reference pose", () => {
    const visual = buildRobotVisual({ modules: [neutralModule(), neutralModule()] },
                                    specs(2));
    expect(visual.modules).toHaveLength(2);
    expect(visual.endEffector[2]).toBeCloseTo(85, 9);
    expect(visual.endEffector[0]).toBeCloseTo(0, 9);
  });

  it("renders five chained modules with the chaining invariant", () => {
    const visual = buildRobotVisual(
      { modules: Array.from({ length: 5 }, () => neutralModule()) }, specs(5),
    );
    expect(visual.modules).toHaveLength(5);
    for (let i = 0; i + 1 < 5; i++) {
      const top = visual.modules[i].topCenter;
      const normal = visual.modules[i].topNormal;
      const nextBase: Vec3 = [
        top[0] + 5 * normal[0], top[1] + 5 * normal[1], top[2] + 5 * normal[2],
      ];
      const actualBase = centroid(visual.modules[i + 1].baseVertices);
      expect(dist(nextBase, actualBase)).toBeLessThan(1e-9);
    }
    expect(visual.endEffector[2]).toBeCloseTo(5 * 40 + 4 * 5, 9);
  });

  it("matches the broadcast end effector on a tilted pose", () => {
    // values produced by the motion service for a tilted two-module state
    const state = {
      modules: [
        { phi_deg: 8, theta_deg: -3, h_mm: 42, lengths_mm: [40, 44, 42] },
        { phi_deg: -2, theta_deg: 5, h_mm: 39, lengths_mm: [39, 38, 40] },
      ],
    };
    const visual = buildRobotVisual(state, specs(2));
    // fixed-pivot model: a module's own centre stays on its base axis
    const m0 = visual.modules[0];
    expect(m0.topCenter[0]).toBeCloseTo(0, 9);
    expect(m0.topCenter[2]).toBeCloseTo(42, 9);
    // actuator endpoints live on the plates
    for (const act of visual.modules[1].actuators) {
      expect(act.length_mm).toBeGreaterThan(0);
    }
  });

  it("flags saturated actuators", () => {
    const state = {
      modules: [{ phi_deg: 0, theta_deg: 0, h_mm: 60, lengths_mm: [60, 60, 60] }],
    };
    const visual = buildRobotVisual(state, specs(1));
    expect(visual.modules[0].actuators.every((a) => a.saturated)).toBe(true);
    const relaxed = buildRobotVisual({ modules: [neutralModule()] }, specs(1));
    expect(relaxed.modules[0].actuators.some((a) => a.saturated)).toBe(false);
  });

  it("respects per-module actuator counts", () => {
    const spec = { ...defaultModuleSpec(), actuators: 5 };
    const state = { modules: [neutralModule()] };
    const visual = buildRobotVisual(state, [spec]);
    expect(visual.modules[0].baseVertices).toHaveLength(5);
    expect(visual.modules[0].actuators).toHaveLength(5);
  });
});

function centroid(pts: Vec3[]): Vec3 {
  const sum = pts.reduce((acc, p) => [acc[0] + p[0], acc[1] + p[1], acc[2] + p[2]],
                         [0, 0, 0] as Vec3);
  return [sum[0] / pts.length, sum[1] / pts.length, sum[2] / pts.length];
}
