import { describe, expect, it } from "vitest";

import {
  activeMentionIds,
  visibleEntityIds,
} from "../src/derive.js";
import {
  ReaderEvent,
  ReaderState,
  assertInvariants,
  initialState,
  reduce,
} from "../src/state.js";
import { goldenIndex, mulberry32, pick } from "./helpers.js";

const index = goldenIndex();
const mentionIds = index.bundle.mentions.map((m) => m.mention_id);
const entityIds = index.bundle.entities.map((e) => e.entity_id);
const figures = [1, 2, 3, 4]; // 4 has no entities: events on it must be inert

function randomEvent(rng: () => number): ReaderEvent {
  switch (Math.floor(rng() * 10)) {
    case 0:
      return { kind: "toggle-linking" };
    case 1:
      return rng() < 0.2
        ? { kind: "hover", target: null }
        : {
            kind: "hover",
            target:
              rng() < 0.5
                ? { kind: "phrase", mentionId: rng() < 0.9 ? pick(rng, mentionIds) : "m404" }
                : { kind: "point", entityId: rng() < 0.9 ? pick(rng, entityIds) : "e404" },
          };
    case 2:
      return {
        kind: "select",
        target:
          rng() < 0.5
            ? { kind: "phrase", mentionId: rng() < 0.9 ? pick(rng, mentionIds) : "m404" }
            : { kind: "point", entityId: rng() < 0.9 ? pick(rng, entityIds) : "e404" },
      };
    case 3:
      return { kind: "close-panel" };
    case 4:
    case 5:
    case 6:
      return {
        kind: "scan",
        figure: pick(rng, figures),
        direction: pick(rng, ["start", "next", "prev", "stop"] as const),
      };
    case 7:
      return { kind: "popout-open", figure: pick(rng, figures) };
    case 8:
      return rng() < 0.5
        ? {
            kind: "popout-resize",
            rect: { x: 0, y: 0, width: rng() * 900 - 100, height: rng() * 900 - 100 },
          }
        : {
            kind: "popout-move",
            rect: { x: rng() * 500, y: rng() * 500, width: 480, height: 360 },
          };
    default:
      return { kind: "popout-close" };
  }
}

/** Derived-view checks that must hold in every reachable state. */
function assertDerived(state: ReaderState): void {
  if (state.scan) {
    const sequence = index.scanSequence(state.scan.figure);
    const stepEntity = sequence[state.scan.stepIndex]!;
    const visible = visibleEntityIds(state, index, state.scan.figure);
    // in-scan exclusivity: exactly the step entity's points
    expect([...visible]).toEqual([stepEntity]);
  }
  if (!state.linkingMode) {
    for (const figure of figures) {
      expect(visibleEntityIds(state, index, figure).size).toBe(0);
    }
    expect(activeMentionIds(state, index).size).toBe(0);
  }
  if (state.hoveredEntity) {
    // hover symmetry: the active phrase set is the entity's mention set,
    // no matter whether a point or a phrase produced the hover
    expect([...activeMentionIds(state, index)].sort()).toEqual(
      [...index.mentionsOfEntity(state.hoveredEntity)].sort(),
    );
  }
}

describe("reader state machine", () => {
  it("preserves all invariants across 10,000 randomized event sequences", () => {
    const rng = mulberry32(0xc0ffee);
    for (let sequence = 0; sequence < 10_000; sequence++) {
      let state = initialState();
      const length = 6 + Math.floor(rng() * 10);
      for (let step = 0; step < length; step++) {
        state = reduce(state, randomEvent(rng), index);
        assertInvariants(state, index);
        assertDerived(state);
      }
    }
  });

  it("starts with linking mode on and everything idle", () => {
    const state = initialState();
    expect(state.linkingMode).toBe(true);
    expect(state.panel.open).toBe(false);
    expect(state.scan).toBeNull();
    expect(state.popout).toBeNull();
  });

  it("select opens the panel; a second select replaces content", () => {
    let state = initialState();
    state = reduce(state, { kind: "select", target: { kind: "point", entityId: "e1" } }, index);
    expect(state.panel.open).toBe(true);
    expect(state.panel.content?.entityId).toBe("e1");
    state = reduce(state, { kind: "select", target: { kind: "phrase", mentionId: "m2" } }, index);
    expect(state.panel.open).toBe(true);
    expect(state.panel.content?.entityId).toBe("e2");
  });

  it("close-panel clears the selection", () => {
    let state = initialState();
    state = reduce(state, { kind: "select", target: { kind: "point", entityId: "e1" } }, index);
    state = reduce(state, { kind: "close-panel" }, index);
    expect(state.panel.open).toBe(false);
    expect(state.selectedEntity).toBeNull();
  });

  it("scan start opens the panel on step one", () => {
    let state = initialState();
    state = reduce(state, { kind: "scan", figure: 1, direction: "start" }, index);
    expect(state.scan).toEqual({ figure: 1, stepIndex: 0 });
    expect(state.panel.open).toBe(true);
    expect(state.panel.content?.entityId).toBe("e1");
  });

  it("scan steps clamp at both ends without wrapping", () => {
    let state = initialState();
    state = reduce(state, { kind: "scan", figure: 1, direction: "start" }, index);
    state = reduce(state, { kind: "scan", figure: 1, direction: "prev" }, index);
    expect(state.scan?.stepIndex).toBe(0);
    for (let i = 0; i < 5; i++) {
      state = reduce(state, { kind: "scan", figure: 1, direction: "next" }, index);
    }
    expect(state.scan?.stepIndex).toBe(2); // three entities on figure 1
    expect(state.panel.content?.entityId).toBe("e3");
  });

  it("panel updates on every scan step", () => {
    let state = initialState();
    state = reduce(state, { kind: "scan", figure: 2, direction: "start" }, index);
    expect(state.panel.content?.entityId).toBe("e7");
    state = reduce(state, { kind: "scan", figure: 2, direction: "next" }, index);
    expect(state.panel.content?.entityId).toBe("e6");
  });

  it("scan stop restores the default view but keeps the panel", () => {
    let state = initialState();
    state = reduce(state, { kind: "scan", figure: 1, direction: "start" }, index);
    state = reduce(state, { kind: "scan", figure: 1, direction: "stop" }, index);
    expect(state.scan).toBeNull();
    expect(state.panel.open).toBe(true);
    expect(visibleEntityIds(state, index, 1).size).toBe(3);
  });

  it("closing the panel during a scan ends the scan", () => {
    let state = initialState();
    state = reduce(state, { kind: "scan", figure: 1, direction: "start" }, index);
    state = reduce(state, { kind: "close-panel" }, index);
    expect(state.scan).toBeNull();
  });

  it("turning linking off ends hover and scan", () => {
    let state = initialState();
    state = reduce(state, { kind: "hover", target: { kind: "point", entityId: "e1" } }, index);
    state = reduce(state, { kind: "scan", figure: 1, direction: "start" }, index);
    state = reduce(state, { kind: "toggle-linking" }, index);
    expect(state.linkingMode).toBe(false);
    expect(state.hoveredEntity).toBeNull();
    expect(state.scan).toBeNull();
    // and scans cannot start while linking is off
    state = reduce(state, { kind: "scan", figure: 1, direction: "start" }, index);
    expect(state.scan).toBeNull();
  });

  it("hover is ignored while linking mode is off", () => {
    let state = initialState();
    state = reduce(state, { kind: "toggle-linking" }, index);
    state = reduce(state, { kind: "hover", target: { kind: "point", entityId: "e1" } }, index);
    expect(state.hoveredEntity).toBeNull();
  });

  it("mouse-out restores the idle hover state", () => {
    let state = initialState();
    state = reduce(state, { kind: "hover", target: { kind: "phrase", mentionId: "m1" } }, index);
    expect(state.hoveredEntity).toBe("e1");
    state = reduce(state, { kind: "hover", target: null }, index);
    expect(state.hoveredEntity).toBeNull();
  });

  it("events on unknown targets and empty figures are inert", () => {
    let state = initialState();
    const before = state;
    state = reduce(state, { kind: "hover", target: { kind: "point", entityId: "e404" } }, index);
    state = reduce(state, { kind: "select", target: { kind: "phrase", mentionId: "m404" } }, index);
    state = reduce(state, { kind: "scan", figure: 4, direction: "start" }, index);
    state = reduce(state, { kind: "popout-open", figure: 4 }, index);
    expect(state).toEqual(before);
  });

  it("popout resize enforces a minimum size and close is clean", () => {
    let state = initialState();
    state = reduce(state, { kind: "popout-open", figure: 1 }, index);
    state = reduce(
      state,
      { kind: "popout-resize", rect: { x: 0, y: 0, width: 5, height: 5 } },
      index,
    );
    expect(state.popout?.rect.width).toBeGreaterThanOrEqual(120);
    expect(state.popout?.rect.height).toBeGreaterThanOrEqual(120);
    state = reduce(state, { kind: "popout-close" }, index);
    expect(state.popout).toBeNull();
  });
});
