/**
 * Reader state machine. Every interaction is an event through
 * `reduce`, which returns a new state; the DOM layer only projects
 * states, so the invariants here are the whole behavioral contract:
 *
 *  - an open panel always has content;
 *  - an active scan implies an open panel and a step index inside the
 *    scan sequence;
 *  - linking mode off means no hover target and no scan.
 */

import { BundleIndex, EntityContext } from "./bundle.js";

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface ScanState {
  figure: number;
  stepIndex: number;
}

export interface ReaderState {
  linkingMode: boolean;
  selectedEntity: string | null;
  hoveredEntity: string | null;
  panel: { open: boolean; content: EntityContext | null };
  scan: ScanState | null;
  popout: { figure: number; rect: Rect } | null;
}

export type Target =
  | { kind: "point"; entityId: string }
  | { kind: "phrase"; mentionId: string };

export type ReaderEvent =
  | { kind: "toggle-linking" }
  | { kind: "hover"; target: Target | null }
  | { kind: "select"; target: Target }
  | { kind: "close-panel" }
  | { kind: "scan"; figure: number; direction: "start" | "next" | "prev" | "stop" }
  | { kind: "popout-open"; figure: number }
  | { kind: "popout-move"; rect: Rect }
  | { kind: "popout-resize"; rect: Rect }
  | { kind: "popout-close" };

export const DEFAULT_POPOUT_RECT: Rect = { x: 80, y: 80, width: 480, height: 360 };
const MIN_POPOUT_SIZE = 120;

export function initialState(): ReaderState {
  return {
    linkingMode: true, // on by default
    selectedEntity: null,
    hoveredEntity: null,
    panel: { open: false, content: null },
    scan: null,
    popout: null,
  };
}

function targetEntity(index: BundleIndex, target: Target): string | null {
  if (target.kind === "point") {
    return index.entity(target.entityId) ? target.entityId : null;
  }
  return index.entityOfMention(target.mentionId) ?? null;
}

function openPanelFor(
  state: ReaderState,
  index: BundleIndex,
  entityId: string,
): ReaderState {
  const content = index.context(entityId);
  if (!content) return state;
  return {
    ...state,
    selectedEntity: entityId,
    panel: { open: true, content },
  };
}

export function reduce(
  state: ReaderState,
  event: ReaderEvent,
  index: BundleIndex,
): ReaderState {
  switch (event.kind) {
    case "toggle-linking": {
      if (state.linkingMode) {
        // turning linking off hides every point, so an active scan ends
        return { ...state, linkingMode: false, hoveredEntity: null, scan: null };
      }
      return { ...state, linkingMode: true };
    }

    case "hover": {
      if (!state.linkingMode) return state;
      if (event.target === null) {
        return state.hoveredEntity === null
          ? state
          : { ...state, hoveredEntity: null };
      }
      const entityId = targetEntity(index, event.target);
      if (!entityId) return state;
      return { ...state, hoveredEntity: entityId };
    }

    case "select": {
      const entityId = targetEntity(index, event.target);
      if (!entityId) return state;
      return openPanelFor(state, index, entityId);
    }

    case "close-panel": {
      // a scan cannot outlive its panel
      return {
        ...state,
        selectedEntity: null,
        panel: { open: false, content: null },
        scan: null,
      };
    }

    case "scan": {
      return reduceScan(state, event, index);
    }

    case "popout-open": {
      if (!index.entitiesForFigure(event.figure).length) return state;
      return { ...state, popout: { figure: event.figure, rect: DEFAULT_POPOUT_RECT } };
    }

    case "popout-move": {
      if (!state.popout) return state;
      return { ...state, popout: { ...state.popout, rect: event.rect } };
    }

    case "popout-resize": {
      if (!state.popout) return state;
      const rect = {
        ...event.rect,
        width: Math.max(MIN_POPOUT_SIZE, event.rect.width),
        height: Math.max(MIN_POPOUT_SIZE, event.rect.height),
      };
      return { ...state, popout: { ...state.popout, rect } };
    }

    case "popout-close": {
      return state.popout === null ? state : { ...state, popout: null };
    }
  }
}

function reduceScan(
  state: ReaderState,
  event: Extract<ReaderEvent, { kind: "scan" }>,
  index: BundleIndex,
): ReaderState {
  const sequence = index.scanSequence(event.figure);

  switch (event.direction) {
    case "start": {
      // scans show points, which only exist in linking mode
      if (!state.linkingMode || sequence.length === 0) return state;
      const next = { ...state, scan: { figure: event.figure, stepIndex: 0 } };
      return openPanelFor(next, index, sequence[0]!);
    }
    case "next":
    case "prev": {
      if (!state.scan || state.scan.figure !== event.figure) return state;
      const delta = event.direction === "next" ? 1 : -1;
      // stepping past either end clamps; no wrap-around
      const stepIndex = Math.min(
        sequence.length - 1,
        Math.max(0, state.scan.stepIndex + delta),
      );
      const next = { ...state, scan: { figure: event.figure, stepIndex } };
      return openPanelFor(next, index, sequence[stepIndex]!);
    }
    case "stop": {
      // default all-points view returns; the panel stays as-is
      if (!state.scan || state.scan.figure !== event.figure) return state;
      return { ...state, scan: null };
    }
  }
}

/** Throws when a state violates the reader's contract. */
export function assertInvariants(state: ReaderState, index: BundleIndex): void {
  if (state.panel.open && state.panel.content === null) {
    throw new Error("open panel without content");
  }
  if (!state.panel.open && state.panel.content !== null) {
    throw new Error("closed panel still holds content");
  }
  if (state.scan) {
    if (!state.panel.open) {
      throw new Error("active scan requires an open panel");
    }
    const sequence = index.scanSequence(state.scan.figure);
    if (state.scan.stepIndex < 0 || state.scan.stepIndex >= sequence.length) {
      throw new Error(
        `scan step ${state.scan.stepIndex} outside [0, ${sequence.length})`,
      );
    }
    if (!state.linkingMode) {
      throw new Error("active scan with linking mode off");
    }
  }
  if (!state.linkingMode && state.hoveredEntity !== null) {
    throw new Error("hover target with linking mode off");
  }
  if (state.hoveredEntity && !index.entity(state.hoveredEntity)) {
    throw new Error(`hovered entity ${state.hoveredEntity} not in bundle`);
  }
  if (state.selectedEntity && !index.entity(state.selectedEntity)) {
    throw new Error(`selected entity ${state.selectedEntity} not in bundle`);
  }
  if (state.popout) {
    if (state.popout.rect.width <= 0 || state.popout.rect.height <= 0) {
      throw new Error("popout rect degenerate");
    }
  }
}
