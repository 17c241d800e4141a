import { describe, expect, it, vi } from "vitest";

import { Poller } from "../src/poll.js";

describe("Poller", () => {
  it("rejects cadences slower than 5s", () => {
    expect(() => new Poller(async () => 1, () => {}, 6000)).toThrow();
  });

  it("marks state stale on failure and clears it on recovery", async () => {
    let fail = true;
    const seen: boolean[] = [];
    const poller = new Poller(
      async () => {
        if (fail) throw new Error("gateway down");
        return 42;
      },
      (_data, state) => seen.push(state.stale),
      1000,
    );
    await poller.tick();
    expect(poller.state.stale).toBe(true);
    fail = false;
    await poller.tick();
    expect(poller.state.stale).toBe(false);
    expect(seen).toEqual([false]);
  });

  it("deduplicates concurrent in-flight requests", async () => {
    let resolve!: (v: number) => void;
    let calls = 0;
    const poller = new Poller(
      () =>
        new Promise<number>((r) => {
          calls += 1;
          resolve = r;
        }),
      () => {},
      1000,
    );
    const first = poller.tick();
    await poller.tick(); // skipped: one already in flight
    expect(poller.skippedWhileBusy).toBe(1);
    resolve(7);
    await first;
    expect(calls).toBe(1);
  });

  it("polls on an interval once started", async () => {
    vi.useFakeTimers();
    let calls = 0;
    const poller = new Poller(
      async () => ++calls,
      () => {},
      1000,
    );
    poller.start();
    await vi.advanceTimersByTimeAsync(3500);
    poller.stop();
    expect(calls).toBe(4); // immediate tick plus three intervals
    vi.useRealTimers();
  });
});
