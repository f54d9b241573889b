import { describe, expect, it } from "vitest";
import { decode, defaultModuleSpec, encode, ProtocolError, q4 } from "../src/protocol.js";

describe("protocol codec", () => {
  it("round-trips simple commands", () => {
    expect(encode({ type: "lock" })).toBe('{"type":"lock"}');
    expect(decode('{"type":"lock"}')).toEqual({ type: "lock" });
  });

  it("round-trips targets", () => {
    const msg = { type: "target", module: 1, pos_mm: [10, -5, 80] } as const;
    expect(decode(encode(msg))).toEqual(msg);
  });

  it("rejects unknown tags", () => {
    expect(() => decode('{"type":"warp"}')).toThrow(ProtocolError);
  });

  it("rejects bad arity and non-numbers", () => {
    expect(() => decode('{"type":"target","module":0,"pos_mm":[1,2]}')).toThrow();
    expect(() => decode('{"type":"target","module":0,"pos_mm":[1,2,"x"]}')).toThrow();
  });

  it("rejects garbage", () => {
    expect(() => decode("S,1000,40,0,0")).toThrow(ProtocolError);
    expect(() => decode("")).toThrow(ProtocolError);
  });

  it("parses state broadcasts", () => {
    const line = JSON.stringify({
      type: "state", seq: 3, t_ms: 100.0, fsm: 2,
      modules: [{ phi_deg: 0, theta_deg: 0, h_mm: 40, lengths_mm: [40, 40, 40] }],
      ee_mm: [0, 0, 40], stale: false,
    });
    const msg = decode(line);
    expect(msg.type).toBe("state");
    if (msg.type === "state") {
      expect(msg.modules).toHaveLength(1);
      expect(msg.ee_mm[2]).toBe(40);
    }
  });

  it("validates config specs", () => {
    const good = { type: "config", robot_spec: { modules: [defaultModuleSpec()] } };
    expect(decode(encode(good as never))).toEqual(good);
    expect(() => decode('{"type":"config","robot_spec":{"modules":[]}}')).toThrow();
    expect(() => decode('{"type":"config","robot_spec":{"modules":[{"actuators":3}]}}'))
      .toThrow();
  });

  it("quantizes to four digits", () => {
    expect(q4(1.000049999)).toBe(1.0);
    expect(q4(2.12345)).toBeCloseTo(2.1235, 10);
  });
});
