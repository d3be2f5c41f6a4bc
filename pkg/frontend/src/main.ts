/** Browser entry point: connects to the teleop server, forwards keyboard
 * input every tick, and renders incoming frames. */

import { KeyTracker, SUBMIT_KEY } from "./input.js";
import {
  MessageDecoder,
  MessageEncoder,
  TICK_MS,
  type EpisodeMsg,
  type ServerMessage,
} from "./protocol.js";
import { drawFrame, statusLine } from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

export function connect(url: string, user: string, task: string, dataset: string): void {
  const canvas = el<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("no 2d context");
  const status = el<HTMLDivElement>("status");
  const instruction = el<HTMLDivElement>("instruction");

  const encoder = new MessageEncoder();
  const decoder = new MessageDecoder();
  const keys = new KeyTracker();
  let variant = task;
  let done = false;

  const socket = new WebSocket(url);
  socket.onopen = () => socket.send(encoder.start(user, task, dataset));
  socket.onmessage = (event) => {
    let msg: ServerMessage;
    try {
      msg = decoder.decode(String(event.data));
    } catch (err) {
      status.textContent = String(err);
      return;
    }
    if (msg.type === "episode") {
      const ep = msg as EpisodeMsg;
      variant = ep.episode.task.variant;
      instruction.textContent = ep.instruction;
    } else if (msg.type === "frame") {
      drawFrame(ctx, msg);
      status.textContent = statusLine(msg);
      done = msg.done;
    } else if (msg.type === "submit_result") {
      status.textContent = msg.accepted
        ? "submitted - thank you!"
        : `rejected: ${msg.reason}`;
    } else {
      status.textContent = `server error: ${msg.reason}`;
    }
  };

  window.addEventListener("keydown", (event) => {
    if (event.key === SUBMIT_KEY) {
      socket.send(encoder.submit());
      return;
    }
    keys.keyDown(event.key);
  });
  window.addEventListener("keyup", (event) => keys.keyUp(event.key));

  window.setInterval(() => {
    if (socket.readyState !== WebSocket.OPEN || done) return;
    const action = keys.current(variant);
    if (action !== null) socket.send(encoder.action(action));
  }, TICK_MS);
}
