"""Entity-link graph: bundle container, validation, pruning, reader queries.

The bundle is the single serializable artifact produced by annotation and
consumed by the bundler, server, and reader. All query operations here are
read-only; pruning returns a new bundle. Unknown fields survive on every
record (``extra``) so newer writers do not break older readers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import NoEntities, UnknownEntity, UnknownLocation
from .ingest import Document, reference_pattern

Point = tuple[float, float]

FORMAT_VERSION = "1.0.0"

DIRECT_REFERENCE = "direct_reference"
RELATED_PASSAGE = "related_passage"


@dataclass(frozen=True)
class MentionLocation:
    kind: str                       # "caption" | "body"
    passage_or_figure: str          # element id of the host
    sentence_index: int | None
    char_span: tuple[int, int]      # within the host's plain text


@dataclass(frozen=True)
class TextMention:
    mention_id: str
    entity_id: str
    phrase: str
    location: MentionLocation
    extra: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class EntityDescription:
    entity_id: str
    text: str
    related_passage_ids: tuple[int, ...] = ()
    unresolved_related: tuple[str, ...] = ()
    manual_override: bool = False
    extra: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Entity:
    entity_id: str
    figure_number: int
    label: str
    points: tuple[Point, ...] = ()
    mentions: tuple[str, ...] = ()
    provisional: bool = False
    extra: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Link:
    """Typed relation from an entity to a text location.

    ``kind`` is an open string; only the two instantiated kinds have
    behavior. Exactly one of the two targets is set: mentions anchor
    direct references, passage indices anchor related passages.
    """

    link_id: str
    entity_id: str
    kind: str
    target_mention_id: str | None = None
    target_passage_index: int | None = None
    extra: dict = field(default_factory=dict, compare=False)


@dataclass
class AugmentationBundle:
    format_version: str
    doc_id: str
    source_hash: str
    entities: tuple[Entity, ...] = ()
    mentions: tuple[TextMention, ...] = ()
    links: tuple[Link, ...] = ()
    descriptions: dict[str, EntityDescription] = field(default_factory=dict)
    scan_sequences: dict[int, tuple[str, ...]] = field(default_factory=dict)
    diagnostics: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def entity(self, entity_id: str) -> Entity:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        raise UnknownEntity(f"no entity {entity_id!r} in bundle")

    def mention(self, mention_id: str) -> TextMention:
        for m in self.mentions:
            if m.mention_id == mention_id:
                return m
        raise UnknownLocation(f"no mention {mention_id!r} in bundle")

    def entities_for_figure(self, figure_number: int) -> list[Entity]:
        return [e for e in self.entities if e.figure_number == figure_number]

    def links_for_entity(self, entity_id: str) -> list[Link]:
        return [l for l in self.links if l.entity_id == entity_id]


@dataclass(frozen=True)
class Finding:
    code: str
    subject_id: str
    message: str


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def servable(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "errors": [vars(f) for f in self.errors],
            "warnings": [vars(f) for f in self.warnings],
            "stats": self.stats,
        }


def validate_bundle(bundle: AugmentationBundle, doc: Document) -> ValidationReport:
    """Check a bundle against its document; findings only, no mutation.

    A hash mismatch short-circuits everything else: the bundle belongs to
    a different document revision, so span checks would be meaningless.
    """
    report = ValidationReport()
    err = report.errors.append
    warn = report.warnings.append

    if bundle.source_hash != doc.source_hash or bundle.doc_id != doc.doc_id:
        err(Finding("DOC_MISMATCH", bundle.doc_id,
                    "bundle is bound to a different document revision"))
        return report

    passages_by_id = {p.element_id: p for p in doc.passages}
    figures_by_id = {f.element_id: f for f in doc.figures}
    figures_by_number = {f.figure_number: f for f in doc.figures}

    # id integrity
    entity_ids: dict[str, Entity] = {}
    for e in bundle.entities:
        if e.entity_id in entity_ids:
            err(Finding("DUPLICATE_ID", e.entity_id, "duplicate entity id"))
        entity_ids[e.entity_id] = e
        if e.figure_number not in figures_by_number:
            err(Finding("UNKNOWN_FIGURE", e.entity_id,
                        f"figure {e.figure_number} not in document"))
        if not e.label:
            err(Finding("EMPTY_LABEL", e.entity_id, "entity label is empty"))
    mention_ids: dict[str, TextMention] = {}
    for m in bundle.mentions:
        if m.mention_id in mention_ids:
            err(Finding("DUPLICATE_ID", m.mention_id, "duplicate mention id"))
        mention_ids[m.mention_id] = m
        if m.entity_id not in entity_ids:
            err(Finding("UNKNOWN_ENTITY_REF", m.mention_id,
                        f"mention targets missing entity {m.entity_id}"))
    link_ids: set[str] = set()
    for l in bundle.links:
        if l.link_id in link_ids:
            err(Finding("DUPLICATE_ID", l.link_id, "duplicate link id"))
        link_ids.add(l.link_id)
        if l.entity_id not in entity_ids:
            err(Finding("UNKNOWN_ENTITY_REF", l.link_id,
                        f"link names missing entity {l.entity_id}"))
        has_mention = l.target_mention_id is not None
        has_passage = l.target_passage_index is not None
        if has_mention == has_passage:
            err(Finding("BAD_TARGET", l.link_id,
                        "link must target exactly one of mention or passage"))
            continue
        if has_mention and l.target_mention_id not in mention_ids:
            err(Finding("UNKNOWN_TARGET", l.link_id,
                        f"link targets missing mention {l.target_mention_id}"))
        if has_passage and not 0 <= l.target_passage_index < len(doc.passages):
            err(Finding("UNKNOWN_TARGET", l.link_id,
                        f"link targets missing passage {l.target_passage_index}"))

    # bidirectional navigability: entity.mentions <-> mention.entity_id
    for e in bundle.entities:
        for mid in e.mentions:
            m = mention_ids.get(mid)
            if m is None:
                err(Finding("UNKNOWN_TARGET", e.entity_id,
                            f"entity lists missing mention {mid}"))
            elif m.entity_id != e.entity_id:
                err(Finding("BIDIRECTIONAL_BREAK", mid,
                            f"mention belongs to {m.entity_id}, listed on {e.entity_id}"))
    listed = {mid for e in bundle.entities for mid in e.mentions}
    for m in bundle.mentions:
        if m.mention_id not in listed:
            err(Finding("BIDIRECTIONAL_BREAK", m.mention_id,
                        "mention not listed on its entity"))

    # span integrity
    for m in bundle.mentions:
        loc = m.location
        if loc.kind == "caption":
            host = figures_by_id.get(loc.passage_or_figure)
            host_text = host.caption if host else None
        elif loc.kind == "body":
            host = passages_by_id.get(loc.passage_or_figure)
            host_text = host.text if host else None
        else:
            err(Finding("BAD_LOCATION", m.mention_id,
                        f"unknown location kind {loc.kind!r}"))
            continue
        if host_text is None:
            err(Finding("UNKNOWN_HOST", m.mention_id,
                        f"no {loc.kind} element {loc.passage_or_figure!r}"))
            continue
        s, e_ = loc.char_span
        if not (0 <= s <= e_ <= len(host_text)):
            err(Finding("SPAN_OUT_OF_RANGE", m.mention_id,
                        f"span {loc.char_span} exceeds host length {len(host_text)}"))
            continue
        if host_text[s:e_] != m.phrase:
            err(Finding("PHRASE_MISMATCH", m.mention_id,
                        f"host text at {loc.char_span} is {host_text[s:e_]!r}, "
                        f"phrase is {m.phrase!r}"))

    # point bounds
    for e in bundle.entities:
        for i, (x, y) in enumerate(e.points):
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                err(Finding("POINT_OUT_OF_BOUNDS", e.entity_id,
                            f"point {i} at ({x}, {y}) outside [0,1]^2"))
        if not e.points:
            warn(Finding("ENTITY_NO_POINTS", e.entity_id,
                         "entity has no figure anchor"))

    # mention overlap per host
    by_host: dict[tuple[str, str], list[TextMention]] = {}
    for m in bundle.mentions:
        by_host.setdefault((m.location.kind, m.location.passage_or_figure), []).append(m)
    for host_mentions in by_host.values():
        ordered = sorted(host_mentions, key=lambda m: m.location.char_span)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.location.char_span[0] < prev.location.char_span[1]:
                err(Finding("MENTION_OVERLAP", cur.mention_id,
                            f"overlaps {prev.mention_id} in {prev.location.passage_or_figure}"))

    # link kind semantics: direct references live in the entity's own
    # caption or in a passage that cites the figure; related passages are
    # passage targets
    for l in bundle.links:
        e = entity_ids.get(l.entity_id)
        if e is None:
            continue
        if l.kind == DIRECT_REFERENCE:
            m = mention_ids.get(l.target_mention_id or "")
            if m is None:
                continue
            fig = figures_by_number.get(e.figure_number)
            if m.location.kind == "caption":
                if fig is None or m.location.passage_or_figure != fig.element_id:
                    err(Finding("LINK_KIND_INVALID", l.link_id,
                                "caption mention is not in the entity's figure"))
            else:
                passage = passages_by_id.get(m.location.passage_or_figure)
                if passage is not None and not reference_pattern(
                    e.figure_number
                ).search(passage.text):
                    err(Finding("LINK_KIND_INVALID", l.link_id,
                                "direct reference in a passage that never cites the figure"))
        elif l.kind == RELATED_PASSAGE:
            if l.target_passage_index is None:
                err(Finding("LINK_KIND_INVALID", l.link_id,
                            "related passage link must target a passage"))

    # scan sequences mirror each figure's entity set
    for fig_num, seq in bundle.scan_sequences.items():
        fig_entities = {e.entity_id for e in bundle.entities
                        if e.figure_number == fig_num}
        if sorted(seq) != sorted(fig_entities):
            err(Finding("SCAN_INCOMPLETE", str(fig_num),
                        "scan sequence does not cover the figure's entities exactly"))
    for fig in doc.figures:
        has_entities = any(e.figure_number == fig.figure_number for e in bundle.entities)
        if has_entities and fig.figure_number not in bundle.scan_sequences:
            err(Finding("SCAN_INCOMPLETE", str(fig.figure_number),
                        "figure with entities has no scan sequence"))

    # host document self-consistency
    for fig in doc.figures:
        if "".join(fig.caption_sentences) != fig.caption:
            err(Finding("CAPTION_RECONSTRUCTION", fig.element_id,
                        "caption sentences do not reconstruct the caption"))
        if not fig.image_ref:
            warn(Finding("FIGURE_NO_IMAGE", fig.element_id,
                         "figure has no image resource"))
        for other in doc.figures:
            if other.figure_number != fig.figure_number and reference_pattern(
                other.figure_number
            ).search(fig.caption):
                warn(Finding("CAPTION_CROSS_REFERENCE", fig.element_id,
                             f"caption cites figure {other.figure_number}; "
                             "cross-caption citations are not referring passages"))

    for desc in bundle.descriptions.values():
        if desc.entity_id not in entity_ids:
            err(Finding("UNKNOWN_ENTITY_REF", desc.entity_id,
                        "description for missing entity"))
        for idx in desc.related_passage_ids:
            if not 0 <= idx < len(doc.passages):
                err(Finding("UNKNOWN_TARGET", desc.entity_id,
                            f"related passage {idx} not in document"))
        if desc.unresolved_related:
            warn(Finding("UNRESOLVED_RELATED", desc.entity_id,
                         f"{len(desc.unresolved_related)} related sentences "
                         "could not be matched to passages"))

    kind_counts: dict[str, int] = {}
    for l in bundle.links:
        kind_counts[l.kind] = kind_counts.get(l.kind, 0) + 1
    report.stats = {
        "entities": len(bundle.entities),
        "points": sum(len(e.points) for e in bundle.entities),
        "mentions": len(bundle.mentions),
        "links": kind_counts,
    }
    return report


def _entity_link_index(bundle: AugmentationBundle) -> dict[str, dict[str, int]]:
    index: dict[str, dict[str, int]] = {}
    for l in bundle.links:
        per = index.setdefault(l.entity_id, {})
        per[l.kind] = per.get(l.kind, 0) + 1
    return index


def remove_entities(
    bundle: AugmentationBundle, entity_ids: set[str], reason: str
) -> AugmentationBundle:
    """Drop entities plus their mentions, links, descriptions, scan slots."""
    if not entity_ids:
        return bundle
    removed_mentions = {m.mention_id for m in bundle.mentions
                        if m.entity_id in entity_ids}
    labels = {e.entity_id: e.label for e in bundle.entities}
    diagnostics = list(bundle.diagnostics)
    for eid in sorted(entity_ids):
        diagnostics.append(f"pruned entity {eid} ({labels.get(eid, '?')}): {reason}")
    scan = {}
    for fig_num, seq in bundle.scan_sequences.items():
        kept = tuple(eid for eid in seq if eid not in entity_ids)
        if kept:
            scan[fig_num] = kept
    return replace(
        bundle,
        entities=tuple(e for e in bundle.entities if e.entity_id not in entity_ids),
        mentions=tuple(m for m in bundle.mentions if m.mention_id not in removed_mentions),
        links=tuple(l for l in bundle.links
                    if l.entity_id not in entity_ids
                    and l.target_mention_id not in removed_mentions),
        descriptions={eid: d for eid, d in bundle.descriptions.items()
                      if eid not in entity_ids},
        scan_sequences=scan,
        diagnostics=tuple(diagnostics),
    )


def prune_unlinked_entities(bundle: AugmentationBundle) -> AugmentationBundle:
    """Remove entities with neither direct references nor related passages.

    Orphaned mentions go with their entity; a highlight with no panel
    content is dead UI. Idempotent: a second prune removes nothing.
    """
    index = _entity_link_index(bundle)
    doomed = set()
    for e in bundle.entities:
        per = index.get(e.entity_id, {})
        has_direct = per.get(DIRECT_REFERENCE, 0) > 0
        has_related = per.get(RELATED_PASSAGE, 0) > 0 or bool(
            bundle.descriptions.get(e.entity_id)
            and bundle.descriptions[e.entity_id].related_passage_ids
        )
        if not has_direct and not has_related:
            doomed.add(e.entity_id)
    return remove_entities(bundle, doomed, "no direct references or related passages")


@dataclass(frozen=True)
class DirectReference:
    mention_id: str
    kind: str                       # "caption" | "body"
    host_id: str
    sentence_index: int | None
    char_span: tuple[int, int]
    phrase: str


@dataclass(frozen=True)
class EntityContext:
    """Exactly what the reference panel renders for one entity."""

    entity_id: str
    label: str
    figure_number: int
    points: tuple[Point, ...]
    description: str | None
    direct_references: tuple[DirectReference, ...]
    related_passages: tuple[int, ...]


def entity_context(bundle: AugmentationBundle, entity_id: str) -> EntityContext:
    entity = bundle.entity(entity_id)
    mentions_by_id = {m.mention_id: m for m in bundle.mentions}
    direct = []
    related = []
    for l in bundle.links_for_entity(entity_id):
        if l.kind == DIRECT_REFERENCE and l.target_mention_id in mentions_by_id:
            m = mentions_by_id[l.target_mention_id]
            direct.append(DirectReference(
                mention_id=m.mention_id,
                kind=m.location.kind,
                host_id=m.location.passage_or_figure,
                sentence_index=m.location.sentence_index,
                char_span=m.location.char_span,
                phrase=m.phrase,
            ))
        elif l.kind == RELATED_PASSAGE and l.target_passage_index is not None:
            related.append(l.target_passage_index)
    desc = bundle.descriptions.get(entity_id)
    return EntityContext(
        entity_id=entity_id,
        label=entity.label,
        figure_number=entity.figure_number,
        points=entity.points,
        description=desc.text if desc else None,
        direct_references=tuple(direct),
        related_passages=tuple(related),
    )


@dataclass(frozen=True)
class ScanStep:
    entity_id: str
    points: tuple[Point, ...]
    description_text: str | None


def figure_scan_sequence(bundle: AugmentationBundle, figure_number: int) -> list[ScanStep]:
    """One step per entity in the bundle's stable order for that figure."""
    seq = bundle.scan_sequences.get(figure_number)
    if not seq:
        raise NoEntities(f"figure {figure_number} has no entities to scan")
    entities = {e.entity_id: e for e in bundle.entities}
    steps = []
    for eid in seq:
        desc = bundle.descriptions.get(eid)
        steps.append(ScanStep(
            entity_id=eid,
            points=entities[eid].points,
            description_text=desc.text if desc else None,
        ))
    return steps


def reverse_lookup(
    bundle: AugmentationBundle, location: str | tuple[int, float, float]
) -> list[str]:
    """Entities anchored at a mention id or a (figure, x, y) point."""
    if isinstance(location, str):
        mention = bundle.mention(location)  # raises UnknownLocation
        return [mention.entity_id]
    fig_num, x, y = location
    key = (round(float(x), 6), round(float(y), 6))
    hits = []
    for e in bundle.entities:
        if e.figure_number != fig_num:
            continue
        if any((round(px, 6), round(py, 6)) == key for px, py in e.points):
            hits.append(e.entity_id)
    if not hits:
        raise UnknownLocation(f"no entity has a point at {key} on figure {fig_num}")
    return hits
