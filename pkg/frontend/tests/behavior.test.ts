import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { Debouncer } from "../src/debounce";
import { RequestSequencer } from "../src/sequence";
import { EditorState } from "../src/state";
import { FIXTURE_POSE } from "../src/fixture";

describe("debouncer", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("collapses a burst into the trailing call", () => {
    const d = new Debouncer(60);
    const calls: number[] = [];
    for (let i = 0; i < 5; i++) d.schedule(() => calls.push(i));
    expect(d.pending).toBe(true);
    vi.advanceTimersByTime(59);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(2);
    expect(calls).toEqual([4]);
    expect(d.pending).toBe(false);
  });

  it("cancel suppresses the pending call", () => {
    const d = new Debouncer(60);
    const calls: number[] = [];
    d.schedule(() => calls.push(1));
    d.cancel();
    vi.advanceTimersByTime(100);
    expect(calls).toEqual([]);
  });
});

describe("request sequencer", () => {
  it("discards responses superseded by a newer drag", () => {
    const s = new RequestSequencer();
    const first = s.next();
    const second = s.next();
    // the newer response lands first
    expect(s.accept(second)).toBe(true);
    expect(s.accept(first)).toBe(false);
  });

  it("applies in-order responses", () => {
    const s = new RequestSequencer();
    const a = s.next();
    expect(s.accept(a)).toBe(true);
    const b = s.next();
    expect(s.inFlight).toBe(true);
    expect(s.accept(b)).toBe(true);
    expect(s.inFlight).toBe(false);
  });
});

describe("editor state", () => {
  it("keeps pinned and dragged joints disjoint", () => {
    const state = new EditorState(FIXTURE_POSE, 3, 16);
    state.togglePin(19);
    expect(state.beginDrag(19)).toBe(false);
    expect(state.beginDrag(5)).toBe(true);
    state.togglePin(5); // no-op while dragging
    expect(state.pinned.has(5)).toBe(false);
    state.endDrag();
    state.togglePin(5);
    expect(state.pinned.has(5)).toBe(true);
  });

  it("clamps kappa to the advertised bounds", () => {
    const state = new EditorState(FIXTURE_POSE, 3, 8);
    state.setKappa(99);
    expect(state.kappa).toBe(8);
    state.setKappa(0);
    expect(state.kappa).toBe(1);
  });

  it("queues edits while offline and drains them once", () => {
    const state = new EditorState(FIXTURE_POSE, 3, 16);
    state.connected = false;
    state.applyEdit(7, { x: 1, y: 2, z: 3 });
    state.applyEdit(9, { x: 0, y: 0, z: 0 });
    expect(state.editQueue).toHaveLength(2);
    const drained = state.drainQueue();
    expect(drained.map((e) => e.jointId)).toEqual([7, 9]);
    expect(state.editQueue).toHaveLength(0);
    // edits were still applied to the local pose for recovery
    expect(state.pose[(7 - 1) * 3]).toBe(1);
  });
});
