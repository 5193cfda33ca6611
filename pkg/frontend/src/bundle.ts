/**
 * Bundle wire format, as served by `GET /doc/{id}/bundle`, plus the
 * derived indexes every interaction needs. The reader never talks to a
 * model; everything it shows is precomputed in this document.
 */

export type Point = readonly [number, number];

export interface MentionLocation {
  kind: "caption" | "body";
  passage_or_figure: string;
  sentence_index: number | null;
  char_span: readonly [number, number];
}

export interface Mention {
  mention_id: string;
  entity_id: string;
  phrase: string;
  location: MentionLocation;
}

export interface Entity {
  entity_id: string;
  figure_number: number;
  label: string;
  points: readonly Point[];
  mentions: readonly string[];
  provisional: boolean;
}

export interface LinkTarget {
  mention_id?: string;
  passage_index?: number;
}

export interface Link {
  link_id: string;
  entity_id: string;
  kind: string;
  target: LinkTarget;
}

export interface EntityDescription {
  entity_id: string;
  text: string;
  related_passage_ids: readonly number[];
  unresolved_related: readonly string[];
  manual_override: boolean;
}

export interface Bundle {
  format_version: string;
  doc_id: string;
  source_hash: string;
  entities: readonly Entity[];
  mentions: readonly Mention[];
  links: readonly Link[];
  descriptions: Record<string, EntityDescription>;
  scan_sequences: Record<string, readonly string[]>;
  diagnostics: readonly string[];
}

export interface DirectReference {
  mentionId: string;
  phrase: string;
  kind: "caption" | "body";
  hostId: string;
}

/** Everything the reference panel shows for one entity. */
export interface EntityContext {
  entityId: string;
  label: string;
  figureNumber: number;
  points: readonly Point[];
  description: string | null;
  directReferences: readonly DirectReference[];
  relatedPassages: readonly number[];
}

/**
 * Index over one bundle. Phrase->points and point->phrases hovering both
 * resolve through the same entity maps, which is what keeps the two
 * directions symmetric.
 */
export class BundleIndex {
  readonly bundle: Bundle;
  private readonly entitiesById = new Map<string, Entity>();
  private readonly mentionsById = new Map<string, Mention>();
  private readonly mentionEntity = new Map<string, string>();
  private readonly entityMentions = new Map<string, string[]>();

  constructor(bundle: Bundle) {
    this.bundle = bundle;
    for (const entity of bundle.entities) {
      this.entitiesById.set(entity.entity_id, entity);
      this.entityMentions.set(entity.entity_id, [...entity.mentions]);
    }
    for (const mention of bundle.mentions) {
      this.mentionsById.set(mention.mention_id, mention);
      this.mentionEntity.set(mention.mention_id, mention.entity_id);
    }
  }

  entity(entityId: string): Entity | undefined {
    return this.entitiesById.get(entityId);
  }

  mention(mentionId: string): Mention | undefined {
    return this.mentionsById.get(mentionId);
  }

  /** Forward edge of a phrase: the entity it mentions. */
  entityOfMention(mentionId: string): string | undefined {
    return this.mentionEntity.get(mentionId);
  }

  /** Reverse edge of a point: all phrases linked to its entity. */
  mentionsOfEntity(entityId: string): readonly string[] {
    return this.entityMentions.get(entityId) ?? [];
  }

  entitiesForFigure(figureNumber: number): Entity[] {
    return this.bundle.entities.filter(
      (entity) => entity.figure_number === figureNumber,
    );
  }

  scanSequence(figureNumber: number): readonly string[] {
    return this.bundle.scan_sequences[String(figureNumber)] ?? [];
  }

  figureNumbers(): number[] {
    return Object.keys(this.bundle.scan_sequences)
      .map(Number)
      .sort((a, b) => a - b);
  }

  context(entityId: string): EntityContext | null {
    const entity = this.entitiesById.get(entityId);
    if (!entity) return null;
    const directReferences: DirectReference[] = [];
    const relatedPassages: number[] = [];
    for (const link of this.bundle.links) {
      if (link.entity_id !== entityId) continue;
      if (link.kind === "direct_reference" && link.target.mention_id) {
        const mention = this.mentionsById.get(link.target.mention_id);
        if (mention) {
          directReferences.push({
            mentionId: mention.mention_id,
            phrase: mention.phrase,
            kind: mention.location.kind,
            hostId: mention.location.passage_or_figure,
          });
        }
      } else if (
        link.kind === "related_passage" &&
        link.target.passage_index !== undefined
      ) {
        relatedPassages.push(link.target.passage_index);
      }
    }
    const description = this.bundle.descriptions[entityId];
    return {
      entityId,
      label: entity.label,
      figureNumber: entity.figure_number,
      points: entity.points,
      description: description ? description.text : null,
      directReferences,
      relatedPassages,
    };
  }
}

export function parseBundle(payload: unknown): Bundle {
  const data = payload as Bundle;
  if (!data || typeof data.format_version !== "string") {
    throw new Error("not a bundle: missing format_version");
  }
  const major = Number(data.format_version.split(".")[0]);
  if (!Number.isFinite(major) || major > 1) {
    throw new Error(`unsupported bundle format ${data.format_version}`);
  }
  for (const field of ["entities", "mentions", "links"] as const) {
    if (!Array.isArray(data[field])) {
      throw new Error(`not a bundle: ${field} is not an array`);
    }
  }
  return data;
}
