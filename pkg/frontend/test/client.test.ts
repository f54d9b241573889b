import { beforeEach, describe, expect, it, vi } from "vitest";
import { CockpitClient } from "../src/client.js";
import { defaultModuleSpec, encode, StateMsg } from "../src/protocol.js";
import { FakeTransport } from "../src/transport.js";

function stateMsg(fsm: number, extra: Partial<StateMsg> = {}): string {
  return encode({
    type: "state", seq: 1, t_ms: 0, fsm,
    modules: [{ phi_deg: 0, theta_deg: 0, h_mm: 40, lengths_mm: [40, 40, 40] }],
    ee_mm: [0, 0, 85], stale: false, ...extra,
  });
}

describe("cockpit client", () => {
  let client: CockpitClient;
  let transport: FakeTransport;
  let clock: { t: number };

  beforeEach(() => {
    vi.useFakeTimers();
    clock = { t: 0 };
    client = new CockpitClient(() => clock.t);
    transport = new FakeTransport();
    client.attach(transport);
  });

  it("sends hello on attach and fills the spec form from welcome", () => {
    expect(transport.sent[0]).toBe('{"type":"hello","version":1}');
    const spec = { ...defaultModuleSpec(), radius_mm: 22.5 };
    transport.feed(encode({ type: "welcome", robot_spec: { modules: [spec] } }));
    expect(client.state.specForm).toHaveLength(1);
    expect(client.state.specForm[0].radius_mm).toBe(22.5);
  });

  it("keeps operator edits when a late welcome arrives", () => {
    client.setSpecForm([defaultModuleSpec(), defaultModuleSpec(), defaultModuleSpec()]);
    transport.feed(encode({ type: "welcome", robot_spec: { modules: [defaultModuleSpec()] } }));
    expect(client.state.specForm).toHaveLength(3);
  });

  it("walks the stage machine through acks", () => {
    expect(client.state.fsm).toBe(0);
    expect(client.configure()).toBe(true);
    transport.feed(encode({ type: "ack", ref: "config" }));
    expect(client.state.fsm).toBe(1);
    expect(client.lock()).toBe(true);
    transport.feed(encode({ type: "ack", ref: "lock" }));
    expect(client.state.fsm).toBe(2);
    expect(client.setSliderTarget(1, [4, 0, 85])).toBe(true);
    transport.feed(encode({ type: "ack", ref: "target" }));
    expect(client.canMove).toBe(true);
    expect(client.move()).toBe(true);
    transport.feed(encode({ type: "ack", ref: "move" }));
    expect(client.state.fsm).toBe(3);
    expect(client.state.moving).toBe(true);
    transport.feed(encode({ type: "ack", ref: "converged" }));
    expect(client.state.fsm).toBe(2);
    expect(client.state.moving).toBe(false);
  });

  it("mirrors fsm from state broadcasts", () => {
    transport.feed(stateMsg(2));
    expect(client.state.fsm).toBe(2);
    expect(client.state.stale).toBe(false);
    transport.feed(stateMsg(1, { stale: true }));
    expect(client.state.fsm).toBe(1);
    expect(client.state.stale).toBe(true);
  });

  it("never emits illegal messages in any stage", () => {
    const actions = () => ({
      configure: client.configure(),
      lock: client.lock(),
      unlock: client.unlock(),
      move: client.move(),
      stop: client.stop(),
      target: client.setSliderTarget(1, [0, 0, 85]),
    });

    const legalByStage: Record<number, string[]> = {
      0: ["configure"],
      1: ["lock"],
      2: ["unlock", "target"], // move needs a staged target, tested separately
      3: ["stop"],
    };
    for (const fsm of [0, 1, 2, 3]) {
      transport.feed(stateMsg(fsm));
      client.state.targetStaged = false;
      transport.sent.length = 0;
      const result = actions();
      const fired = Object.entries(result).filter(([, ok]) => ok).map(([k]) => k);
      expect(fired.sort()).toEqual(legalByStage[fsm].sort());
      expect(transport.sent).toHaveLength(fired.length);
      clock.t += 1000; // keep the rate limiter out of the picture
    }
  });

  it("disables move until a target is staged", () => {
    transport.feed(stateMsg(2));
    expect(client.canMove).toBe(false);
    client.setSliderTarget(1, [4, 0, 85]);
    transport.feed(encode({ type: "ack", ref: "target" }));
    expect(client.canMove).toBe(true);
  });

  it("rate-limits slider targets to 10 per second", () => {
    transport.feed(stateMsg(2));
    transport.sent.length = 0;

    client.setSliderTarget(1, [1, 0, 85]);
    expect(transport.sent).toHaveLength(1); // leading edge goes out straight away

    for (let i = 0; i < 8; i++) {
      clock.t += 5;
      client.setSliderTarget(1, [2 + i, 0, 85]);
    }
    expect(transport.sent).toHaveLength(1); // burst coalesced

    clock.t += 100;
    vi.advanceTimersByTime(100); // trailing update fires with the latest value
    expect(transport.sent).toHaveLength(2);
    const last = JSON.parse(transport.sent[1]);
    expect(last.pos_mm[0]).toBe(9);

    clock.t += 200;
    client.setSliderTarget(1, [12, 0, 85]);
    expect(transport.sent).toHaveLength(3); // window reopened
  });

  it("clamps slider targets into the workspace box", () => {
    transport.feed(stateMsg(2));
    client.setSliderTarget(1, [999, -999, 300]);
    const sent = JSON.parse(transport.sent.at(-1)!);
    expect(sent.pos_mm[0]).toBeLessThanOrEqual(62.5);
    expect(sent.pos_mm[1]).toBeGreaterThanOrEqual(-62.5);
    expect(sent.pos_mm[2]).toBeLessThanOrEqual(125);
  });

  it("records server errors for the banner", () => {
    transport.feed(encode({ type: "error", code: "bad_state", detail: "nope" }));
    expect(client.state.lastError).toContain("bad_state");
  });

  it("marks the view stale when the connection closes", () => {
    transport.feed(stateMsg(1));
    transport.dropConnection();
    expect(client.state.connection).toBe("disconnected");
    expect(client.state.stale).toBe(true);
  });

  it("rejects invalid spec forms before configuring", () => {
    client.state.specForm[0].min_len_mm = 70; // above max
    expect(client.canConfigure).toBe(false);
    expect(client.configure()).toBe(false);
  });

  it("allows hologram dragging only before lock", () => {
    transport.feed(stateMsg(1));
    expect(client.setPlacement(5, 0, 0.2)).toBe(true);
    transport.feed(stateMsg(2));
    expect(client.setPlacement(9, 9, 9)).toBe(false);
    expect(client.state.placement.x).toBe(5);
  });
});
