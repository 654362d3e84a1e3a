import { describe, expect, it } from "vitest";

import { AttentionGuard, atBottom, fitsWithoutScrolling } from "../src/guard.js";

describe("AttentionGuard", () => {
  it("is satisfied immediately when the context fits", () => {
    const el = { scrollTop: 0, scrollHeight: 100, clientHeight: 200 };
    expect(fitsWithoutScrolling(el)).toBe(true);
    expect(new AttentionGuard(el).satisfied).toBe(true);
  });

  it("requires one full scroll for long contexts", () => {
    const el = { scrollTop: 0, scrollHeight: 500, clientHeight: 200 };
    const guard = new AttentionGuard(el);
    expect(guard.satisfied).toBe(false);
    el.scrollTop = 100;
    expect(guard.check()).toBe(false);
    el.scrollTop = 300; // 300 + 200 >= 500: bottom reached
    expect(guard.check()).toBe(true);
  });

  it("stays satisfied after scrolling back up", () => {
    const el = { scrollTop: 300, scrollHeight: 500, clientHeight: 200 };
    const guard = new AttentionGuard(el);
    expect(guard.satisfied).toBe(true);
    el.scrollTop = 0;
    expect(guard.check()).toBe(true);
  });

  it("treats within-a-pixel as bottom", () => {
    expect(atBottom({ scrollTop: 299.5, scrollHeight: 500, clientHeight: 200 })).toBe(true);
  });
});
