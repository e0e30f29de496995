/**
 * UI-state fidelity: fold recorded engine fixtures (initial page doc + frame
 * sequence) through the client store and require the rendered outline rows —
 * icons, expansion, snippets, unread bolding — to equal the engine's
 * DisplayItems at every checkpoint.
 */

import { readFileSync, readdirSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { computeOutline, snippet } from "../src/outline.js";
import { PageStore } from "../src/store.js";
import type { Frame, OutlineRow, PageDoc } from "../src/types.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

interface Fixture {
  name: string;
  viewer: string;
  expansions: string[];
  page: PageDoc;
  frames: Frame[];
  checkpoints: { after_seq: number; expected: OutlineRow[] }[];
  expected: OutlineRow[];
}

function loadFixtures(): Fixture[] {
  return readdirSync(FIXTURES)
    .filter((f) => f.endsWith(".json") && !["manifest.json", "two-session.json"].includes(f))
    .map((f) => JSON.parse(readFileSync(join(FIXTURES, f), "utf-8")) as Fixture);
}

const fixtures = loadFixtures();

describe("outline fidelity against engine fixtures", () => {
  it("has the full fixture corpus", () => {
    expect(fixtures.length).toBe(25);
  });

  for (const fixture of fixtures) {
    it(`renders ${fixture.name} identically to the engine`, () => {
      const store = new PageStore(fixture.viewer);
      store.loadPage(fixture.page);
      const expansions = new Set(fixture.expansions);
      const checkpoints = new Map(
        fixture.checkpoints.map((c) => [c.after_seq, c.expected]),
      );

      for (const frame of fixture.frames) {
        store.applyFrame(frame);
        const expected = checkpoints.get(frame.seq);
        if (expected) {
          expect(computeOutline(store, expansions)).toEqual(expected);
        }
      }
      expect(store.seq).toBe(fixture.page.seq + fixture.frames.length);
      expect(computeOutline(store, expansions)).toEqual(fixture.expected);
    });
  }

  it("renders the initial document without any frames", () => {
    for (const fixture of fixtures) {
      if (!fixture.checkpoints.length && fixture.frames.length) continue;
      const store = new PageStore(fixture.viewer);
      store.loadPage(fixture.page);
      // outline must be computable on the bare document (icons derived locally)
      const rows = computeOutline(store, new Set(fixture.expansions));
      for (const row of rows) {
        expect(["blue_circle", "yellow_circle", "orange_square", "half_square"])
          .toContain(row.icon);
      }
    }
  });

  it("tolerates duplicate frame delivery", () => {
    const fixture = fixtures.find((f) => f.frames.length > 2)!;
    const store = new PageStore(fixture.viewer);
    store.loadPage(fixture.page);
    for (const frame of fixture.frames) {
      store.applyFrame(frame);
      store.applyFrame(frame); // replays are ignored by seq guard
    }
    expect(computeOutline(store, new Set(fixture.expansions))).toEqual(fixture.expected);
  });
});

describe("snippet", () => {
  it("flattens whitespace and cuts at word boundaries like the server", () => {
    expect(snippet("line one\nline   two")).toBe("line one line two");
    const long = Array(40).fill("word").join(" ");
    const out = snippet(long, 80);
    expect(out.length).toBeLessThanOrEqual(80);
    expect(out.endsWith(" ")).toBe(false);
    expect(out).toBe(Array(16).fill("word").join(" "));
  });

  it("hard-cuts unbroken runs", () => {
    expect(snippet("x".repeat(100), 10)).toBe("x".repeat(10));
  });
});
