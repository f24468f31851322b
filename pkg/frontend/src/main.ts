/**
 * Browser entry point: connects to the ground station, renders the
 * drone and the streamed environment mesh with three.js, and pumps
 * gamepad commands. Optional immersive mode via WebXR.
 *
 * The protocol's world frame is z-up; three.js renders y-up, so the
 * whole world lives under a rotated root group and the viewer offset
 * shifts that root in front of the camera rig.
 */

import * as THREE from "three";
import { VRButton } from "three/addons/webxr/VRButton.js";

import { CommandLoop, PadSnapshot } from "./input.js";
import { ChunkUpdate } from "./scene-model.js";
import { CockpitSession } from "./session.js";

function serverUrl(): string {
  const param = new URLSearchParams(window.location.search).get("server");
  const host = param ?? window.location.host;
  return `ws://${host}`;
}

const statusEl = document.getElementById("status")!;
const hudEl = document.getElementById("hud")!;

// --- three.js scene ----------------------------------------------------------

const renderer = new THREE.WebGLRenderer({ antialias: true });
renderer.setSize(window.innerWidth, window.innerHeight);
renderer.xr.enabled = true;
document.body.appendChild(renderer.domElement);
document.body.appendChild(VRButton.createButton(renderer));

const scene = new THREE.Scene();
scene.background = new THREE.Color(0x10141c);
const camera = new THREE.PerspectiveCamera(
  70, window.innerWidth / window.innerHeight, 0.05, 100);
camera.position.set(0, 1.6, 0);

// World root: protocol frame (x forward, y left, z up) -> three frame
// (x right, y up, -z forward). 'YXZ' applies the x tilt first, then the
// yaw that points world-forward away from the camera.
const worldRoot = new THREE.Group();
worldRoot.rotation.set(-Math.PI / 2, Math.PI / 2, 0, "YXZ");
scene.add(worldRoot);

scene.add(new THREE.HemisphereLight(0xbfd4ff, 0x202830, 1.2));
const sun = new THREE.DirectionalLight(0xffffff, 1.0);
sun.position.set(2, 5, 3);
scene.add(sun);

const grid = new THREE.GridHelper(30, 30, 0x335577, 0x223344);
scene.add(grid);

const drone = new THREE.Group();
const body = new THREE.Mesh(
  new THREE.BoxGeometry(0.45, 0.45, 0.12),
  new THREE.MeshStandardMaterial({ color: 0xff7733 }));
const nose = new THREE.Mesh(
  new THREE.ConeGeometry(0.07, 0.2, 12),
  new THREE.MeshStandardMaterial({ color: 0xffdd44 }));
nose.rotation.z = -Math.PI / 2;
nose.position.x = 0.3;
drone.add(body, nose);
worldRoot.add(drone);

const chunkMaterial = new THREE.MeshStandardMaterial({
  color: 0x66aa88, flatShading: true, side: THREE.DoubleSide,
});
const chunkMeshes = new Map<string, THREE.Mesh>();

function upsertChunk(update: ChunkUpdate): void {
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute(
    "position", new THREE.BufferAttribute(update.chunk.vertices, 3));
  geometry.setAttribute(
    "normal", new THREE.BufferAttribute(update.chunk.normals, 3));
  geometry.setIndex(new THREE.BufferAttribute(update.chunk.triangles, 1));
  const existing = chunkMeshes.get(update.key);
  if (existing !== undefined) {
    existing.geometry.dispose();
    existing.geometry = geometry;
  } else {
    const mesh = new THREE.Mesh(geometry, chunkMaterial);
    chunkMeshes.set(update.key, mesh);
    worldRoot.add(mesh);
  }
}

// --- session wiring -----------------------------------------------------------

const ws = new WebSocket(serverUrl());
ws.binaryType = "arraybuffer";

const session = new CockpitSession(ws, {
  onReady(hello) {
    statusEl.textContent =
      `connected: ${hello.world_name} (${hello.chunk_list.length} chunks)`;
    // The offset places the world origin this far in front of the pilot:
    // forward (world x) is three -z, left (world y) is three -x, up is y.
    const [ox, oy, oz] = hello.viewer_offset_m;
    worldRoot.position.set(-oy, oz, -ox);
  },
});

ws.onopen = () => session.sendHandshake();
ws.onmessage = (event: MessageEvent) => {
  if (typeof event.data === "string") {
    session.handleText(event.data);
  } else {
    const update = session.scene.applyChunkFrame(event.data as ArrayBuffer);
    if (update !== null) {
      upsertChunk(update);
    }
  }
};
ws.onclose = (event: CloseEvent) => {
  statusEl.textContent = event.code === 4000
    ? `rejected by server: ${event.reason}`
    : "disconnected";
};
ws.onerror = () => { statusEl.textContent = "connection error"; };

// --- input -------------------------------------------------------------------

function pollPad(): PadSnapshot | null {
  const pads = navigator.getGamepads?.() ?? [];
  for (const pad of pads) {
    if (pad !== null) {
      return pad;
    }
  }
  return null;
}

const commands = new CommandLoop(pollPad, session, {
  vMax: 1.0, yawRateMax: 1.0,
});
commands.start();

document.addEventListener("keydown", (ev) => {
  if (ev.key === "t") session.sendMode("takeoff");
  if (ev.key === "l") session.sendMode("land");
});

setInterval(() => session.sendProbe(), 500);

// --- render loop ----------------------------------------------------------------

renderer.setAnimationLoop(() => {
  const display = session.scene.displayPose(performance.now());
  if (display !== null) {
    drone.position.set(...display.position);
    const [w, x, y, z] = display.quaternion;
    drone.quaternion.set(x, y, z, w);
  }
  const latency = session.lastOneWayMs;
  hudEl.textContent =
    `latency ${latency === null ? "--" : latency.toFixed(1)} ms | ` +
    `chunks ${session.scene.chunks.size} | ` +
    `pad ${pollPad() === null ? "none" : "ok"} | t=takeoff l=land`;
  renderer.render(scene, camera);
});

window.addEventListener("resize", () => {
  camera.aspect = window.innerWidth / window.innerHeight;
  camera.updateProjectionMatrix();
  renderer.setSize(window.innerWidth, window.innerHeight);
});
