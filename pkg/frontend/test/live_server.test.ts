/**
 * End-to-end cockpit workflow against a live motion service with its
 * built-in simulated plant.  The service is the real Python process;
 * the cockpit client runs here over a raw TCP line transport (the
 * protocol is identical to the browser's WebSocket bridge).
 */

import { ChildProcess, spawn } from "node:child_process";
import { createConnection, Socket } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { CockpitClient } from "../src/client.js";
import { buildRobotVisual, dist, Vec3 } from "../src/scene.js";
import { defaultModuleSpec } from "../src/protocol.js";
import { Transport } from "../src/transport.js";

class TcpTransport implements Transport {
  private buffer = "";
  private lineCb: ((line: string) => void) | null = null;
  private closeCb: (() => void) | null = null;

  constructor(private socket: Socket) {
    socket.setNoDelay(true);
    socket.on("data", (chunk) => {
      this.buffer += chunk.toString("utf-8");
      let idx;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx);
        this.buffer = this.buffer.slice(idx + 1);
        if (line.trim()) this.lineCb?.(line);
      }
    });
    socket.on("close", () => this.closeCb?.());
  }

  send(line: string): void {
    this.socket.write(line + "\n");
  }

  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.socket.destroy();
  }
}

function connectTcp(port: number): Promise<TcpTransport> {
  return new Promise((resolve, reject) => {
    const socket = createConnection({ host: "127.0.0.1", port }, () =>
      resolve(new TcpTransport(socket)),
    );
    socket.on("error", reject);
  });
}

async function waitFor(cond: () => boolean, ms = 8000, step = 10): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    if (cond()) return;
    await new Promise((r) => setTimeout(r, step));
  }
  throw new Error("timed out waiting for condition");
}

let proc: ChildProcess;
let tcpPort = 0;

beforeAll(async () => {
  proc = spawn("python3", ["test/helpers/serve_for_tests.py"], {
    cwd: new URL("..", import.meta.url).pathname,
    stdio: ["pipe", "pipe", "inherit"],
  });
  tcpPort = await new Promise<number>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server never started")), 15000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      const m = chunk.toString().match(/PORT (\d+) (\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve(Number(m[1]));
      }
    });
    proc.on("exit", () => reject(new Error("server exited early")));
  });
}, 20000);

afterAll(() => {
  proc?.stdin?.end();
  proc?.kill();
});

describe("live cockpit session", () => {
  it("runs the whole operator workflow", async () => {
    const client = new CockpitClient();
    const transport = await connectTcp(tcpPort);
    client.attach(transport);

    // connect populates the spec form from welcome (server's 17.5 mm radius,
    // not the client-side default of 15)
    await waitFor(() => client.state.specForm[0]?.radius_mm === 17.5);

    // stage 0: everything but configure is disabled
    expect(client.canConfigure).toBe(true);
    expect(client.canLock).toBe(false);
    expect(client.canMove).toBe(false);
    expect(client.canStop).toBe(false);
    expect(client.lock()).toBe(false);

    // a 5-module configuration round-trips and renders 5 chained modules
    client.setSpecForm(Array.from({ length: 5 }, () => defaultModuleSpec()));
    expect(client.configure()).toBe(true);
    await waitFor(() => client.state.fsm === 1);
    await waitFor(() =>
      client.state.lastState !== null &&
      client.state.lastState.modules.length === 5 &&
      !client.state.stale,
    );
    const visual = buildRobotVisual(client.state.lastState!, client.state.specForm);
    expect(visual.modules).toHaveLength(5);
    for (let i = 0; i + 1 < 5; i++) {
      const top = visual.modules[i].topCenter;
      const n = visual.modules[i].topNormal;
      const next: Vec3 = [top[0] + 5 * n[0], top[1] + 5 * n[1], top[2] + 5 * n[2]];
      const base = visual.modules[i + 1].baseVertices;
      const c: Vec3 = [
        base.reduce((s, p) => s + p[0], 0) / base.length,
        base.reduce((s, p) => s + p[1], 0) / base.length,
        base.reduce((s, p) => s + p[2], 0) / base.length,
      ];
      expect(dist(next, c)).toBeLessThan(1e-6);
    }
    // the rendered end effector agrees with the broadcast
    const ee = client.state.lastState!.ee_mm;
    expect(dist(visual.endEffector, ee)).toBeLessThan(1e-3);

    // stage 1: only lock is legal
    expect(client.canConfigure).toBe(false);
    expect(client.configure()).toBe(false);
    expect(client.canLock).toBe(true);
    expect(client.lock()).toBe(true);
    await waitFor(() => client.state.fsm === 2);

    // slider change emits exactly one rate-limited target message
    const sentBefore = client.targetsSent;
    client.setSliderTarget(4, [8, 0, 214]);
    expect(client.targetsSent - sentBefore).toBe(1);
    await waitFor(() => client.state.targetStaged);

    // move: stage 3, progress, then convergence ack returns to stage 2
    let sawStage3 = false;
    let sawMoving = false;
    client.onChange((s) => {
      sawStage3 ||= s.fsm === 3;
      sawMoving ||= s.moving;
    });
    expect(client.canMove).toBe(true);
    expect(client.move()).toBe(true);
    await waitFor(() => sawStage3);
    if (client.state.fsm === 3) {
      expect(client.canStop).toBe(true);
      expect(client.canLock).toBe(false);
    }
    await waitFor(() => sawMoving && client.state.fsm === 2 && !client.state.moving,
                  30000);

    client.detach();
  }, 40000);

  it("surfaces server rejections without breaking the session", async () => {
    const client = new CockpitClient();
    const transport = await connectTcp(tcpPort);
    client.attach(transport);
    await waitFor(() => client.state.lastState !== null);

    // bypass the local gate to prove the server also rejects it
    (transport as Transport).send('{"type":"move"}');
    await waitFor(() => client.state.lastError !== null);
    // either the stage machine or the authority gate refuses it
    expect(client.state.lastError).toMatch(/bad_state|not_authorized/);

    client.detach();
  }, 20000);
});
