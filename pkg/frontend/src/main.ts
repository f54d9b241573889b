import { CockpitClient } from "./client.js";
import { RobotRenderer } from "./render.js";
import { buildRobotVisual } from "./scene.js";
import { WsTransport } from "./transport.js";
import { CockpitPanel } from "./ui.js";

const client = new CockpitClient();
const panel = new CockpitPanel(document.body, client);
const canvas = document.getElementById("view") as HTMLCanvasElement;
const renderer = new RobotRenderer(canvas);

renderer.onHologramDrag = (dx, dy) => {
  const p = client.state.placement;
  client.setPlacement(p.x + dx, p.y + dy, p.yaw);
};

const holdBtn = document.getElementById("btn-hold") as HTMLButtonElement;
holdBtn.onclick = () => {
  renderer.holdingHologram = !renderer.holdingHologram;
  holdBtn.classList.toggle("active", renderer.holdingHologram);
};

client.onChange((state) => {
  holdBtn.disabled = !client.canDragHologram;
  if (!client.canDragHologram) {
    renderer.holdingHologram = false;
    holdBtn.classList.remove("active");
  }
  renderer.setPlacement(state.placement.x, state.placement.y, state.placement.yaw);
  if (state.lastState) {
    renderer.update(buildRobotVisual(state.lastState, state.specForm), state.stale);
  }
  renderer.setTargetMarker(
    state.fsm >= 2 && state.targetStaged ? state.sliders : null,
  );
});

panel.bind((address) => {
  const url = address.startsWith("ws") ? address : `ws://${address}`;
  const transport = new WsTransport(
    url,
    () => client.attach(transport),
    () => {
      client.state.lastError = `cannot reach ${url}`;
      panel.refresh();
    },
  );
});
