/** Keyboard mapping for teleoperation.
 *
 * Arrows drive and turn, PageUp/PageDown tilt the view, Space grabs or
 * releases, Enter submits. The server ticks at 50 ms and keeps only the
 * newest queued action, so holding a key simply re-sends it every tick.
 */

import type { ActionName } from "./protocol.js";

export const KEYMAP: Record<string, ActionName> = {
  ArrowUp: "MOVE_FORWARD",
  ArrowDown: "MOVE_BACKWARD",
  ArrowLeft: "TURN_LEFT",
  ArrowRight: "TURN_RIGHT",
  PageUp: "LOOK_UP",
  PageDown: "LOOK_DOWN",
  " ": "GRAB_RELEASE",
  Escape: "STOP",
};

export const SUBMIT_KEY = "Enter";

/** ObjectNav sessions expose a 6-action subset; the rest are Pick&Place. */
const OBJECTNAV_ACTIONS: ReadonlySet<ActionName> = new Set([
  "STOP",
  "MOVE_FORWARD",
  "TURN_LEFT",
  "TURN_RIGHT",
  "LOOK_UP",
  "LOOK_DOWN",
]);

export function actionForKey(key: string, variant: string): ActionName | null {
  const action = KEYMAP[key];
  if (action === undefined) return null;
  if (variant === "objectnav" && !OBJECTNAV_ACTIONS.has(action)) return null;
  return action;
}

/** Tracks held keys; the most recently pressed key wins, matching the
 * server's newest-wins action queue. */
export class KeyTracker {
  private held: string[] = [];

  keyDown(key: string): void {
    if (!(key in KEYMAP)) return;
    this.keyUp(key); // re-press moves it to the front
    this.held.push(key);
  }

  keyUp(key: string): void {
    this.held = this.held.filter((k) => k !== key);
  }

  /** Action to send this tick, or null when idle. */
  current(variant: string): ActionName | null {
    for (let i = this.held.length - 1; i >= 0; i -= 1) {
      const action = actionForKey(this.held[i], variant);
      if (action !== null) return action;
    }
    return null;
  }

  clear(): void {
    this.held = [];
  }
}
