/** Browser entry point: wires client, reducer state, teleop, and canvas. */

import { StationClient, browserTransports } from "./client.js";
import { Viewport, render, screenToWorld } from "./render.js";
import { TeleopController, clickToGoto } from "./teleop.js";

const params = new URLSearchParams(location.search);
const baseUrl = params.get("station") ?? `http://${location.hostname}:8750`;

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const bannerEl = document.getElementById("banner")!;
const telemetryEl = document.getElementById("telemetry")!;
const resumeBtn = document.getElementById("resume") as HTMLButtonElement;

const client = new StationClient(baseUrl, browserTransports());
const teleop = new TeleopController(0.5, 5);
let driverAcquired = false;

const viewport: Viewport = {
  center: { x: 0, y: 0 },
  scale: 24,
  widthPx: canvas.width,
  heightPx: canvas.height,
};

client.onChange = (state) => {
  statusEl.textContent =
    state.connection === "disconnected" && state.retryInSeconds !== null
      ? `disconnected — retrying in ${state.retryInSeconds.toFixed(1)} s`
      : state.connection;
  statusEl.className = `status ${state.connection}`;

  if (state.stuck && state.alert) {
    bannerEl.textContent =
      `ROBOT STUCK at (${state.alert.x.toFixed(1)}, ` +
      `${state.alert.y.toFixed(1)}) — take over with WASD/arrows, ` +
      `click the map to send a goal, or press Resume`;
    bannerEl.classList.add("visible");
    canvas.focus();
  } else {
    bannerEl.classList.remove("visible");
  }

  if (state.pose) viewport.center = { x: state.pose.x, y: state.pose.y };
  telemetryEl.textContent =
    `${state.scenario}  t=${state.t.toFixed(1)}s  ` +
    `coverage=${(state.coverage * 100).toFixed(1)}%  ` +
    `decision=${state.decision}  outcome=${state.outcome}` +
    (state.teleopActive ? "  [teleop]" : "");
  render(ctx, state, viewport);
};

async function ensureDriver(): Promise<boolean> {
  if (driverAcquired) return true;
  try {
    await client.createSession("driver");
    driverAcquired = true;
    return true;
  } catch (err) {
    statusEl.textContent = `session error: ${err}`;
    return false;
  }
}

window.addEventListener("keydown", (ev) => {
  if (!ev.repeat) teleop.keyDown(ev.key);
});
window.addEventListener("keyup", (ev) => teleop.keyUp(ev.key));

canvas.addEventListener("click", async (ev) => {
  if (!(await ensureDriver())) return;
  const rect = canvas.getBoundingClientRect();
  const world = screenToWorld(
    { x: ev.clientX - rect.left, y: ev.clientY - rect.top },
    viewport,
  );
  await client.sendCommand(clickToGoto(world));
});

resumeBtn.addEventListener("click", async () => {
  if (!(await ensureDriver())) return;
  await client.sendCommand({ kind: "resume_autonomy" });
});

async function teleopLoop(): Promise<void> {
  const cmd = teleop.tick(Date.now());
  if (cmd && (await ensureDriver())) {
    const result = await client.sendCommand(cmd);
    if (!result.accepted) {
      bannerEl.textContent = `command rejected: ${result.reason}`;
      bannerEl.classList.add("visible");
    }
  }
  requestAnimationFrame(() => void teleopLoop());
}

client.connect();
void teleopLoop();
