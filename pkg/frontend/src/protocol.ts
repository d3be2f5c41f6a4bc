/** Client side of the "telev1" teleoperation protocol.
 *
 * Every client message carries a strictly increasing `seq`; the server
 * numbers its own messages the same way. Out-of-order or malformed input is
 * answered with an `error` message and otherwise ignored by the server.
 */

export const PROTOCOL_VERSION = "telev1";
export const TICK_MS = 50;

export type ActionName =
  | "STOP"
  | "MOVE_FORWARD"
  | "TURN_LEFT"
  | "TURN_RIGHT"
  | "LOOK_UP"
  | "LOOK_DOWN"
  | "MOVE_BACKWARD"
  | "GRAB_RELEASE"
  | "NO_OP";

export interface Frame {
  type: "frame";
  v: string;
  seq: number;
  session?: string;
  tick: number;
  pose: { x: number; y: number; heading: number; pitch: number };
  rays: { labels: string[]; depths: number[] };
  sge: number;
  held: number | null;
  step_count: number;
  done: boolean;
  succeeded: boolean;
}

export interface EpisodeMsg {
  type: "episode";
  v: string;
  seq: number;
  session: string;
  scene: unknown;
  episode: { id: string; task: { variant: string } };
  instruction: string;
  legend: Record<string, string>;
}

export interface SubmitResult {
  type: "submit_result";
  v: string;
  seq: number;
  accepted: boolean;
  reason: string;
}

export interface ErrorMsg {
  type: "error";
  v: string;
  seq: number;
  reason: string;
}

export type ServerMessage = Frame | EpisodeMsg | SubmitResult | ErrorMsg;

export class ProtocolError extends Error {}

/** Builds outgoing messages with monotone sequence numbers. */
export class MessageEncoder {
  private seq = 0;

  private stamp(payload: Record<string, unknown>): string {
    this.seq += 1;
    return JSON.stringify({ v: PROTOCOL_VERSION, seq: this.seq, ...payload });
  }

  start(user: string, task: string, dataset: string): string {
    return this.stamp({ type: "start", user, task, dataset });
  }

  action(name: ActionName): string {
    return this.stamp({ type: "action", name });
  }

  submit(): string {
    return this.stamp({ type: "submit" });
  }

  ping(): string {
    return this.stamp({ type: "ping" });
  }

  get lastSeq(): number {
    return this.seq;
  }
}

/** Parses and validates incoming messages; rejects stale sequence numbers. */
export class MessageDecoder {
  private lastSeq = 0;

  decode(raw: string): ServerMessage {
    let msg: unknown;
    try {
      msg = JSON.parse(raw);
    } catch {
      throw new ProtocolError("malformed JSON from server");
    }
    if (typeof msg !== "object" || msg === null) {
      throw new ProtocolError("non-object message");
    }
    const m = msg as Record<string, unknown>;
    if (m.v !== PROTOCOL_VERSION) {
      throw new ProtocolError(`unsupported protocol version ${String(m.v)}`);
    }
    if (typeof m.seq !== "number" || m.seq <= this.lastSeq) {
      throw new ProtocolError(`out-of-order server seq ${String(m.seq)}`);
    }
    this.lastSeq = m.seq;
    const t = m.type;
    if (t === "frame" || t === "episode" || t === "submit_result" || t === "error") {
      return msg as ServerMessage;
    }
    throw new ProtocolError(`unknown message type ${String(t)}`);
  }
}
