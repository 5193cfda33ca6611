import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { Bundle, BundleIndex, parseBundle } from "../src/bundle.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function goldenBundle(): Bundle {
  return parseBundle(
    JSON.parse(readFileSync(join(FIXTURES, "paper01.bundle.json"), "utf-8")),
  );
}

export function goldenIndex(): BundleIndex {
  return new BundleIndex(goldenBundle());
}

export function goldenAugmentedHtml(): string {
  return readFileSync(join(FIXTURES, "paper01.aug.html"), "utf-8");
}

export function goldenBaselineHtml(): string {
  return readFileSync(join(FIXTURES, "paper01.base.html"), "utf-8");
}

/** Deterministic PRNG for reproducible randomized sequences. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function pick<T>(rng: () => number, items: readonly T[]): T {
  return items[Math.floor(rng() * items.length)]!;
}
