/**
 * Pure projections from (state, bundle index) to what the screen shows.
 * The DOM layer applies these verbatim; tests assert on them directly.
 */

import { BundleIndex, Point } from "./bundle.js";
import { ReaderState } from "./state.js";

/** Base opacity of idle points; hover and proximity raise it to 1. */
export const POINT_BASE_OPACITY = 0.35;

/** Cursor distance (px) at which proximity starts raising opacity. */
export const PROXIMITY_RADIUS = 120;

/**
 * Linear proximity ramp: base opacity at distance >= R, fully visible
 * at distance 0.
 */
export function proximityOpacity(distance: number, base = POINT_BASE_OPACITY): number {
  if (distance <= 0) return 1;
  if (distance >= PROXIMITY_RADIUS) return base;
  return base + (1 - base) * (1 - distance / PROXIMITY_RADIUS);
}

/**
 * The set of entities whose points are visible on one figure. During a
 * scan of that figure exactly the current step's entity shows; with
 * linking mode off nothing shows.
 */
export function visibleEntityIds(
  state: ReaderState,
  index: BundleIndex,
  figureNumber: number,
): ReadonlySet<string> {
  if (!state.linkingMode) return new Set();
  if (state.scan && state.scan.figure === figureNumber) {
    const sequence = index.scanSequence(figureNumber);
    const current = sequence[state.scan.stepIndex];
    return new Set(current ? [current] : []);
  }
  return new Set(
    index.entitiesForFigure(figureNumber).map((entity) => entity.entity_id),
  );
}

export function visiblePoints(
  state: ReaderState,
  index: BundleIndex,
  figureNumber: number,
): ReadonlyMap<string, readonly Point[]> {
  const ids = visibleEntityIds(state, index, figureNumber);
  const out = new Map<string, readonly Point[]>();
  for (const id of ids) {
    const entity = index.entity(id);
    if (entity) out.set(id, entity.points);
  }
  return out;
}

/** The entity whose points and phrases render fully active. */
export function activeEntity(state: ReaderState): string | null {
  return state.hoveredEntity ?? state.selectedEntity;
}

/**
 * Mentions highlighted right now. Hovering a phrase activates its
 * entity; hovering a point activates the same entity; both directions
 * read the identical entity->mentions index.
 */
export function activeMentionIds(
  state: ReaderState,
  index: BundleIndex,
): ReadonlySet<string> {
  if (!state.linkingMode) return new Set();
  const entityId = activeEntity(state);
  if (!entityId) return new Set();
  return new Set(index.mentionsOfEntity(entityId));
}

/** Description text rendered beneath the caption during a scan step. */
export function scanCaptionDescription(
  state: ReaderState,
  index: BundleIndex,
): { figure: number; entityId: string; text: string | null } | null {
  if (!state.scan) return null;
  const sequence = index.scanSequence(state.scan.figure);
  const entityId = sequence[state.scan.stepIndex];
  if (!entityId) return null;
  const description = index.bundle.descriptions[entityId];
  return {
    figure: state.scan.figure,
    entityId,
    text: description ? description.text : null,
  };
}

export function scanPosition(
  state: ReaderState,
  index: BundleIndex,
): { step: number; total: number } | null {
  if (!state.scan) return null;
  return {
    step: state.scan.stepIndex + 1,
    total: index.scanSequence(state.scan.figure).length,
  };
}
