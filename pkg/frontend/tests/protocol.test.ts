import { describe, expect, it } from "vitest";

import {
  MessageDecoder,
  MessageEncoder,
  PROTOCOL_VERSION,
  ProtocolError,
} from "../src/protocol.js";

describe("MessageEncoder", () => {
  it("stamps version and increasing seq", () => {
    const enc = new MessageEncoder();
    const a = JSON.parse(enc.start("u", "objectnav", "d"));
    const b = JSON.parse(enc.action("MOVE_FORWARD"));
    const c = JSON.parse(enc.submit());
    expect(a.v).toBe(PROTOCOL_VERSION);
    expect([a.seq, b.seq, c.seq]).toEqual([1, 2, 3]);
    expect(a.type).toBe("start");
    expect(b.name).toBe("MOVE_FORWARD");
    expect(c.type).toBe("submit");
  });
});

describe("MessageDecoder", () => {
  const frame = (seq: number) =>
    JSON.stringify({ v: PROTOCOL_VERSION, seq, type: "frame", tick: seq });

  it("accepts well-formed messages in order", () => {
    const dec = new MessageDecoder();
    expect(dec.decode(frame(1)).type).toBe("frame");
    expect(dec.decode(frame(5)).type).toBe("frame");
  });

  it("rejects malformed JSON", () => {
    expect(() => new MessageDecoder().decode("{oops")).toThrow(ProtocolError);
  });

  it("rejects wrong protocol version", () => {
    const raw = JSON.stringify({ v: "telev0", seq: 1, type: "frame" });
    expect(() => new MessageDecoder().decode(raw)).toThrow(/version/);
  });

  it("rejects stale sequence numbers", () => {
    const dec = new MessageDecoder();
    dec.decode(frame(3));
    expect(() => dec.decode(frame(3))).toThrow(/out-of-order/);
    expect(() => dec.decode(frame(2))).toThrow(/out-of-order/);
  });

  it("rejects unknown message types", () => {
    const raw = JSON.stringify({ v: PROTOCOL_VERSION, seq: 1, type: "warp" });
    expect(() => new MessageDecoder().decode(raw)).toThrow(/unknown/);
  });
});
