/**
 * Three.js view of the robot: polygonal plates, actuator struts colored
 * by saturation, an end-effector marker, a ground grid and a simple
 * orbit camera.  All geometry comes from scene.buildRobotVisual; this
 * file only pushes it into WebGL.
 */

import * as THREE from "three";
import { RobotVisual, Vec3 } from "./scene.js";

const COLORS = {
  plate: 0x2f6fab,
  plateStale: 0x777777,
  actuator: 0x33aa55,
  actuatorSaturated: 0xcc3333,
  ee: 0xffaa00,
  target: 0xff44cc,
};

export class RobotRenderer {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private robotGroup = new THREE.Group();
  private targetMarker: THREE.Mesh;
  private orbit = { theta: Math.PI / 4, phi: 1.1, radius: 260 };
  private dragging = false;
  private lastXY = [0, 0];
  /** when true, dragging repositions the hologram instead of the camera */
  holdingHologram = false;
  onHologramDrag: ((dx: number, dy: number) => void) | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setSize(canvas.clientWidth, canvas.clientHeight, false);
    this.scene.background = new THREE.Color(0x10141a);
    this.camera = new THREE.PerspectiveCamera(
      45, canvas.clientWidth / canvas.clientHeight, 1, 2000,
    );
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.8));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(100, 150, 200);
    this.scene.add(sun);

    const grid = new THREE.GridHelper(400, 20, 0x335577, 0x223344);
    grid.rotation.x = Math.PI / 2; // robot z is "up"; keep grid in xy
    this.scene.add(grid);
    this.scene.add(new THREE.AxesHelper(40));
    this.scene.add(this.robotGroup);

    this.targetMarker = new THREE.Mesh(
      new THREE.SphereGeometry(2.2, 12, 12),
      new THREE.MeshBasicMaterial({ color: COLORS.target, wireframe: true }),
    );
    this.targetMarker.visible = false;
    this.scene.add(this.targetMarker);

    canvas.addEventListener("mousedown", (e) => {
      this.dragging = true;
      this.lastXY = [e.clientX, e.clientY];
    });
    window.addEventListener("mouseup", () => (this.dragging = false));
    window.addEventListener("mousemove", (e) => {
      if (!this.dragging) return;
      const dx = e.clientX - this.lastXY[0];
      const dy = e.clientY - this.lastXY[1];
      this.lastXY = [e.clientX, e.clientY];
      if (this.holdingHologram && this.onHologramDrag) {
        this.onHologramDrag(dx * 0.5, -dy * 0.5);
      } else {
        this.orbit.theta -= dx * 0.008;
        this.orbit.phi = Math.min(Math.max(this.orbit.phi - dy * 0.008, 0.1), 1.5);
      }
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit.radius = Math.min(Math.max(this.orbit.radius + e.deltaY * 0.3, 60), 900);
    }, { passive: false });

    this.animate();
  }

  private animate = () => {
    requestAnimationFrame(this.animate);
    const { theta, phi, radius } = this.orbit;
    // z-up orbit around the robot's midsection
    this.camera.position.set(
      radius * Math.cos(theta) * Math.cos(phi),
      radius * Math.sin(theta) * Math.cos(phi),
      60 + radius * Math.sin(phi),
    );
    this.camera.up.set(0, 0, 1);
    this.camera.lookAt(0, 0, 60);
    this.renderer.render(this.scene, this.camera);
  };

  setPlacement(x: number, y: number, yaw: number): void {
    this.robotGroup.position.set(x, y, 0);
    this.robotGroup.rotation.z = yaw;
  }

  setTargetMarker(pos: Vec3 | null): void {
    if (pos === null) {
      this.targetMarker.visible = false;
      return;
    }
    this.targetMarker.visible = true;
    this.targetMarker.position.set(pos[0], pos[1], pos[2]);
  }

  /** Rebuild the robot group from one frame of drawable geometry. */
  update(visual: RobotVisual, stale: boolean): void {
    this.robotGroup.clear();
    const plateColor = stale ? COLORS.plateStale : COLORS.plate;
    const opacity = stale ? 0.35 : 1.0;

    for (const mod of visual.modules) {
      for (const ring of [mod.baseVertices, mod.topVertices]) {
        const pts = ring.map((v) => new THREE.Vector3(...v));
        const geo = new THREE.BufferGeometry().setFromPoints(pts);
        const loop = new THREE.LineLoop(
          geo,
          new THREE.LineBasicMaterial({ color: plateColor, transparent: stale, opacity }),
        );
        this.robotGroup.add(loop);
      }
      for (const act of mod.actuators) {
        const geo = new THREE.BufferGeometry().setFromPoints([
          new THREE.Vector3(...act.from), new THREE.Vector3(...act.to),
        ]);
        const color = act.saturated && !stale
          ? COLORS.actuatorSaturated : stale ? COLORS.plateStale : COLORS.actuator;
        this.robotGroup.add(new THREE.Line(
          geo, new THREE.LineBasicMaterial({ color, transparent: stale, opacity }),
        ));
      }
    }

    const ee = new THREE.Mesh(
      new THREE.SphereGeometry(1.8, 12, 12),
      new THREE.MeshStandardMaterial({
        color: COLORS.ee, transparent: stale, opacity,
      }),
    );
    ee.position.set(...visual.endEffector);
    this.robotGroup.add(ee);
  }
}
