"""Annotation pipeline: identify, locate, link, describe, assemble.

Stages run per figure and are isolated: one figure failing leaves the
others untouched. Assembly sorts every id space deterministically, so the
output bundle is byte-stable no matter how stage work is scheduled.
"""

from __future__ import annotations

import difflib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import prompts
from .config import ProviderSet, RuntimeConfig
from .errors import (
    CrossdocError,
    MissingFigureKey,
    PhraseNotFound,
    PipelineError,
    ReconstructionMismatch,
    UnparsableResponse,
)
from .ingest import Document, Figure, find_figure_references, split_caption_sentences
from .linkgraph import (
    DIRECT_REFERENCE,
    FORMAT_VERSION,
    RELATED_PASSAGE,
    AugmentationBundle,
    Entity,
    EntityDescription,
    Link,
    MentionLocation,
    TextMention,
    prune_unlinked_entities,
    remove_entities,
    validate_bundle,
)
from .providers import (
    Attachment,
    ChatProvider,
    ChatRequest,
    Point,
    PointingProvider,
    chat,
    point,
)

_ARTICLE = re.compile(r"^(?:the|a|an)\s+", re.IGNORECASE)


def merge_key(label: str) -> str:
    """Case-insensitive label identity with leading articles trimmed."""
    return _ARTICLE.sub("", label.strip()).casefold()


# --- tolerant JSON extraction -------------------------------------------------

def _find_json_slice(text: str) -> str:
    start = None
    for i, ch in enumerate(text):
        if ch in "{[":
            start = i
            break
    if start is None:
        raise UnparsableResponse("no JSON value in response", raw=text)
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    raise UnparsableResponse("unbalanced JSON value in response", raw=text)


def extract_json_value(text: str):
    """First balanced JSON value in the text, strictly parsed.

    Tolerates code fences and trailing prose around the value; anything
    worse is a typed error, never a silent drop.
    """
    snippet = _find_json_slice(text)
    try:
        return json.loads(snippet)
    except json.JSONDecodeError as exc:
        raise UnparsableResponse(f"invalid JSON: {exc}", raw=text) from exc


def extract_json_pairs(text: str) -> list[tuple[str, object]]:
    """Like extract_json_value but keeps top-level object order and
    duplicate keys, which matter for sentence reconstruction."""
    snippet = _find_json_slice(text)
    pairs: list[tuple[str, object]] = []
    seen_top = {"done": False}

    def hook(items):
        if not seen_top["done"]:
            seen_top["done"] = True
            pairs.extend(items)
        return dict(items)

    try:
        value = json.loads(snippet, object_pairs_hook=hook)
    except json.JSONDecodeError as exc:
        raise UnparsableResponse(f"invalid JSON: {exc}", raw=text) from exc
    if not isinstance(value, dict):
        raise UnparsableResponse("expected a JSON object", raw=text)
    # the hook fires innermost-first; rebuild top-level pairs when nesting
    # confused the capture
    if len(pairs) != len(value) or [k for k, _ in pairs] != list(value):
        pairs = _reparse_top_level(snippet)
    return pairs


def _reparse_top_level(snippet: str) -> list[tuple[str, object]]:
    collected: list[list] = []

    def hook(items):
        collected.append(items)
        return dict(items)

    json.loads(snippet, object_pairs_hook=hook)
    return collected[-1] if collected else []


# --- stage 1: visual entity identification ------------------------------------

def identify_visual_entities(
    figure: Figure,
    paper_ref: str,
    chat_provider: ChatProvider,
    *,
    variant: str = "conceptual",
    cache=None,
    max_attempts: int = 3,
    backoff_seconds: float = 0.0,
) -> list[str]:
    """Deduplicated, order-preserving entity labels for one figure."""
    attachments = [Attachment("image", figure.image_ref)]
    if variant == "conceptual":
        attachments.append(Attachment("document", paper_ref))
    request = ChatRequest(
        instructions=prompts.identify_prompt(variant),
        user_content=f"Figure {figure.figure_number}",
        attachments=tuple(attachments),
    )
    response = chat(chat_provider, request, cache=cache,
                    max_attempts=max_attempts, backoff_seconds=backoff_seconds)

    if variant == "exhaustive":
        raw_labels = [line.strip(" \t-*•") for line in response.text.splitlines()]
    else:
        value = extract_json_value(response.text)
        if not isinstance(value, dict):
            raise UnparsableResponse("expected figure-keyed object",
                                     raw=response.text)
        key = f"fig{figure.figure_number}"
        if key not in value:
            raise MissingFigureKey(f"response omitted {key!r}")
        raw_labels = value[key]
        if not isinstance(raw_labels, list) or not all(
            isinstance(x, str) for x in raw_labels
        ):
            raise UnparsableResponse(f"{key!r} is not a list of strings",
                                     raw=response.text)

    labels = []
    seen = set()
    for label in raw_labels:
        label = label.strip()
        if not label or label.casefold() in seen:
            continue
        seen.add(label.casefold())
        labels.append(label)
    return labels


# --- stage 2: coordinate localization ------------------------------------------

@dataclass
class LocateOutcome:
    """Per-label points plus a partial-result report of failed labels."""

    points: dict[str, list[Point]] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)


def locate_entities(
    figure: Figure,
    labels: list[str],
    pointing_provider: PointingProvider,
    *,
    max_attempts: int = 3,
    backoff_seconds: float = 0.0,
) -> LocateOutcome:
    """One pointing query per label; failures never abort the rest.

    Labels with zero points stay in the map with empty lists: pruning is
    a later, explicit step.
    """
    if not labels:
        raise ValueError("labels must be non-empty")
    outcome = LocateOutcome()
    for label in labels:
        try:
            outcome.points[label] = point(
                pointing_provider, figure.image_ref, label,
                max_attempts=max_attempts, backoff_seconds=backoff_seconds,
            )
        except CrossdocError as exc:
            outcome.points[label] = []
            outcome.failures[label] = str(exc)
    return outcome


# --- stage 3: text-visual linking -----------------------------------------------

@dataclass(frozen=True)
class LinkUnit:
    """One linkable text unit: a figure caption or a referring passage."""

    kind: str                   # "caption" | "body"
    host_id: str                # element id of the figure or passage
    figure_number: int
    text: str
    sentences: tuple[str, ...]
    doc_position: int           # char offset of the host in the source
    passage_index: int | None = None


@dataclass(frozen=True)
class PhrasePair:
    phrase: str
    label: str
    span: tuple[int, int]       # within the unit text


@dataclass(frozen=True)
class SentencePairs:
    sentence: str
    span: tuple[int, int]       # within the unit text
    pairs: tuple[PhrasePair, ...]


def _ndiff(expected: str, received: str) -> str:
    return "\n".join(difflib.ndiff([received], [expected]))


def _align_keys(keys: list[str], text: str) -> list[tuple[int, int]]:
    """Spans of each response key against the true unit text.

    Exact concatenation aligns trivially. Whitespace drift is repaired by
    matching non-whitespace characters in order; anything worse raises
    ReconstructionMismatch with an aligned diff.
    """
    recon = "".join(keys)
    if recon == text:
        spans = []
        pos = 0
        for key in keys:
            spans.append((pos, pos + len(key)))
            pos += len(key)
        return spans
    if "".join(recon.split()) != "".join(text.split()):
        raise ReconstructionMismatch(
            "concatenated keys do not reproduce the unit text",
            diff=_ndiff(text, recon),
        )
    spans = []
    ti = 0
    for key in keys:
        start = ti
        for ch in key:
            if ch.isspace():
                continue
            while ti < len(text) and text[ti].isspace():
                ti += 1
            ti += 1
        spans.append((start, ti))
    return spans


def link_text_mentions(
    unit: LinkUnit,
    entity_labels: list[str],
    chat_provider: ChatProvider,
    *,
    fix_linking_typo: bool = False,
    cache=None,
    max_attempts: int = 3,
    backoff_seconds: float = 0.0,
) -> list[SentencePairs]:
    """Per-sentence (phrase, entity label) pairs located in the unit text.

    Phrases are anchored by exact substring search inside their sentence;
    labels absent from ``entity_labels`` come back as new (provisional)
    entities for the caller to record.
    """
    if not unit.text:
        raise ValueError("unit text must be non-empty")
    request = ChatRequest(
        instructions=prompts.linking_prompt(entity_labels, unit.text,
                                            fix_linking_typo=fix_linking_typo),
    )
    response = chat(chat_provider, request, cache=cache,
                    max_attempts=max_attempts, backoff_seconds=backoff_seconds)
    pairs = extract_json_pairs(response.text)
    spans = _align_keys([k for k, _ in pairs], unit.text)

    result = []
    for (key, value), (start, end) in zip(pairs, spans):
        if not isinstance(value, list) or not all(
            isinstance(p, (list, tuple)) and len(p) == 2
            and all(isinstance(x, str) for x in p)
            for p in value
        ):
            raise UnparsableResponse(
                f"sentence value must be a list of [phrase, entity] pairs: {key!r}",
                raw=response.text,
            )
        sentence_text = unit.text[start:end]
        cursor: dict[str, int] = {}
        located = []
        for phrase, label in value:
            idx = sentence_text.find(phrase, cursor.get(phrase, 0))
            if idx < 0:
                raise PhraseNotFound(
                    f"phrase {phrase!r} absent from sentence {sentence_text!r}"
                )
            cursor[phrase] = idx + len(phrase)
            located.append(PhrasePair(
                phrase=phrase,
                label=label,
                span=(start + idx, start + idx + len(phrase)),
            ))
        result.append(SentencePairs(
            sentence=sentence_text, span=(start, end), pairs=tuple(located)
        ))
    return result


def resolve_overlaps(
    pairs: list[PhrasePair],
) -> tuple[list[PhrasePair], list[str]]:
    """Keep the longest phrase where spans nest or overlap; log the rest."""
    kept: list[PhrasePair] = []
    dropped: list[str] = []
    for pair in sorted(pairs, key=lambda p: (-(p.span[1] - p.span[0]), p.span[0])):
        clash = next(
            (k for k in kept
             if pair.span[0] < k.span[1] and k.span[0] < pair.span[1]),
            None,
        )
        if clash is None:
            kept.append(pair)
        else:
            dropped.append(
                f"dropped overlapping phrase {pair.phrase!r} "
                f"({pair.label}): contained in or crossing {clash.phrase!r}"
            )
    kept.sort(key=lambda p: p.span)
    return kept, dropped


# --- stage 4: description generation ---------------------------------------------

def _normalize(text: str) -> str:
    return " ".join(text.split())


def _resolve_related(sentence: str, doc: Document) -> int | None:
    """Passage index hosting a related sentence, or None.

    Exact substring first, then whitespace-normalized containment, then a
    fuzzy ratio against individual passage sentences.
    """
    for passage in doc.passages:
        if sentence in passage.text:
            return passage.index
    target = _normalize(sentence)
    if not target:
        return None
    for passage in doc.passages:
        if target in _normalize(passage.text):
            return passage.index
    best: tuple[float, int] | None = None
    for passage in doc.passages:
        for candidate in split_caption_sentences(passage.text):
            ratio = difflib.SequenceMatcher(
                None, target, _normalize(candidate)
            ).ratio()
            if ratio >= 0.9 and (best is None or ratio > best[0]):
                best = (ratio, passage.index)
    return best[1] if best else None


def generate_descriptions(
    entities: list[Entity],
    doc: Document,
    chat_provider: ChatProvider,
    *,
    paper_ref: str,
    sentence_limit: int = 3,
    cache=None,
    max_attempts: int = 3,
    backoff_seconds: float = 0.0,
) -> tuple[dict[str, EntityDescription], list[str]]:
    """One description per entity, batched per figure with the full paper
    attached; related sentences resolve to passage indices."""
    descriptions: dict[str, EntityDescription] = {}
    warnings: list[str] = []
    by_figure: dict[int, list[Entity]] = {}
    for entity in entities:
        by_figure.setdefault(entity.figure_number, []).append(entity)

    for figure_number in sorted(by_figure):
        group = by_figure[figure_number]
        request = ChatRequest(
            instructions=prompts.DESCRIBE_ENTITIES,
            user_content=f"Figure {figure_number}: "
                         + ", ".join(e.label for e in group),
            attachments=(Attachment("document", paper_ref),),
        )
        response = chat(chat_provider, request, cache=cache,
                        max_attempts=max_attempts,
                        backoff_seconds=backoff_seconds)
        value = extract_json_value(response.text)
        if not isinstance(value, dict):
            raise UnparsableResponse("expected label-keyed object",
                                     raw=response.text)
        by_key = {merge_key(k): v for k, v in value.items()}
        for entity in group:
            raw = by_key.get(merge_key(entity.label))
            if raw is None:
                warnings.append(
                    f"no description returned for {entity.label!r} "
                    f"(figure {figure_number})"
                )
                continue
            if isinstance(raw, str):
                text, related_raw = raw, []
            elif isinstance(raw, dict):
                text = raw.get("description", "")
                related_raw = raw.get("related_sentences", [])
            else:
                raise UnparsableResponse(
                    f"description for {entity.label!r} has unsupported shape",
                    raw=response.text,
                )
            if not isinstance(text, str) or not text.strip():
                warnings.append(f"empty description for {entity.label!r}")
                continue
            sentences = split_caption_sentences(text)
            if len(sentences) > sentence_limit:
                text = "".join(sentences[:sentence_limit]).rstrip() + " […]"
                warnings.append(
                    f"description for {entity.label!r} truncated from "
                    f"{len(sentences)} to {sentence_limit} sentences"
                )
            related_ids: list[int] = []
            unresolved: list[str] = []
            for sentence in related_raw:
                idx = _resolve_related(sentence, doc)
                if idx is None:
                    unresolved.append(sentence)
                    warnings.append(
                        f"related sentence for {entity.label!r} matched no "
                        f"passage: {sentence[:60]!r}"
                    )
                elif idx not in related_ids:
                    related_ids.append(idx)
            descriptions[entity.entity_id] = EntityDescription(
                entity_id=entity.entity_id,
                text=text,
                related_passage_ids=tuple(related_ids),
                unresolved_related=tuple(unresolved),
            )
    return descriptions, warnings


# --- orchestration -----------------------------------------------------------------

@dataclass
class FigureOutcomeReport:
    figure_number: int
    status: str                      # "annotated" | "skipped" | "failed"
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass
class PipelineReport:
    figures: list[FigureOutcomeReport] = field(default_factory=list)

    @property
    def annotated(self) -> int:
        return sum(1 for f in self.figures if f.status == "annotated")

    def to_dict(self) -> dict:
        return {"figures": [vars(f) for f in self.figures]}


@dataclass
class _FigureAnnotation:
    figure: Figure
    labels: list[str]                      # identified, in model order
    provisional: list[str]                 # discovery order
    points: dict[str, list[Point]]
    unit_pairs: list[tuple[LinkUnit, list[PhrasePair]]]
    report: FigureOutcomeReport


def _build_units(doc: Document, figure: Figure) -> list[LinkUnit]:
    units = [LinkUnit(
        kind="caption",
        host_id=figure.element_id,
        figure_number=figure.figure_number,
        text=figure.caption,
        sentences=figure.caption_sentences,
        doc_position=figure.char_span[0],
    )]
    seen = set()
    for ref in find_figure_references(doc, figure.figure_number):
        if ref.passage_index in seen:
            continue
        seen.add(ref.passage_index)
        passage = doc.passages[ref.passage_index]
        units.append(LinkUnit(
            kind="body",
            host_id=passage.element_id,
            figure_number=figure.figure_number,
            text=passage.text,
            sentences=tuple(split_caption_sentences(passage.text)),
            doc_position=passage.char_span[0],
            passage_index=passage.index,
        ))
    return units


def _annotate_figure(
    doc: Document,
    figure: Figure,
    providers: ProviderSet,
    config: RuntimeConfig,
    paper_ref: str,
) -> _FigureAnnotation:
    report = FigureOutcomeReport(figure.figure_number, "annotated")
    annotation = _FigureAnnotation(figure, [], [], {}, [], report)

    if not figure.image_ref:
        report.status = "skipped"
        report.warnings.append("figure has no image; annotation skipped")
        return annotation

    labels = identify_visual_entities(
        figure, paper_ref, providers.chat,
        variant=config.prompt_variant, cache=providers.cache,
        max_attempts=providers.max_attempts,
        backoff_seconds=providers.backoff_seconds,
    )
    annotation.labels = labels
    if labels:
        outcome = locate_entities(
            figure, labels, providers.pointing,
            max_attempts=providers.max_attempts,
            backoff_seconds=providers.backoff_seconds,
        )
        annotation.points = outcome.points
        for label, message in sorted(outcome.failures.items()):
            report.warnings.append(f"pointing failed for {label!r}: {message}")

    known = list(labels)
    known_keys = {merge_key(l) for l in known}
    for unit in _build_units(doc, figure):
        try:
            sentence_pairs = link_text_mentions(
                unit, known, providers.chat,
                fix_linking_typo=config.fix_linking_typo,
                cache=providers.cache,
                max_attempts=providers.max_attempts,
                backoff_seconds=providers.backoff_seconds,
            )
        except (ReconstructionMismatch, PhraseNotFound, UnparsableResponse) as exc:
            report.errors.append(
                f"linking failed for {unit.kind} {unit.host_id}: {exc}"
            )
            continue
        flat = [p for sp in sentence_pairs for p in sp.pairs]
        for pair in flat:
            if merge_key(pair.label) not in known_keys:
                known.append(pair.label)
                known_keys.add(merge_key(pair.label))
                annotation.provisional.append(pair.label)
        annotation.unit_pairs.append((unit, flat))
    return annotation


def run_pipeline(
    doc: Document,
    providers: ProviderSet,
    config: RuntimeConfig,
    *,
    paper_ref: str | None = None,
) -> AugmentationBundle:
    """Annotate every figure and assemble a validated bundle.

    Hard-fails only when the document has figures and none of them could
    be annotated; per-figure failures are reported in the bundle's
    diagnostics and leave other figures' annotations unchanged.
    """
    paper_ref = paper_ref or f"doc:{doc.doc_id}"
    report = PipelineReport()
    annotations: list[_FigureAnnotation] = []

    def run_one(figure: Figure) -> _FigureAnnotation:
        try:
            return _annotate_figure(doc, figure, providers, config, paper_ref)
        except CrossdocError as exc:
            failed = FigureOutcomeReport(figure.figure_number, "failed",
                                         errors=[str(exc)])
            return _FigureAnnotation(figure, [], [], {}, [], failed)

    if config.workers > 1 and len(doc.figures) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            annotations = list(pool.map(run_one, doc.figures))
    else:
        annotations = [run_one(fig) for fig in doc.figures]
    annotations.sort(key=lambda a: a.figure.figure_number)
    for a in annotations:
        report.figures.append(a.report)

    if doc.figures and report.annotated == 0:
        raise PipelineError("no figure could be annotated", report=report)

    bundle = _assemble(doc, annotations, providers, config, paper_ref, report)
    if config.pruning:
        weak = {
            e.entity_id for e in bundle.entities
            if e.provisional and not e.points and len(e.mentions) < 2
        }
        bundle = remove_entities(
            bundle, weak, "provisional entity with no points and no second mention"
        )
        bundle = prune_unlinked_entities(bundle)

    validation = validate_bundle(bundle, doc)
    if validation.errors:
        raise PipelineError(
            "assembled bundle failed validation: "
            + "; ".join(f"{f.code}:{f.subject_id}" for f in validation.errors),
            report=report,
        )
    return bundle


def _assemble(
    doc: Document,
    annotations: list[_FigureAnnotation],
    providers: ProviderSet,
    config: RuntimeConfig,
    paper_ref: str,
    report: PipelineReport,
) -> AugmentationBundle:
    diagnostics: list[str] = []
    for outcome in report.figures:
        for line in outcome.errors:
            diagnostics.append(f"figure {outcome.figure_number}: {line}")
        for line in outcome.warnings:
            diagnostics.append(f"figure {outcome.figure_number}: {line}")

    # entity skeletons in (figure, appearance, label) order
    skeletons: list[dict] = []
    key_to_skeleton: dict[tuple[int, str], dict] = {}
    for annotation in annotations:
        fig_num = annotation.figure.figure_number
        appearance = 0
        for label in list(annotation.labels) + list(annotation.provisional):
            k = (fig_num, merge_key(label))
            if k in key_to_skeleton:
                continue
            skeleton = {
                "figure_number": fig_num,
                "label": label,
                "appearance": appearance,
                "points": tuple(
                    (round(x, 6), round(y, 6))
                    for x, y in annotation.points.get(label, [])
                ),
                "provisional": label in annotation.provisional,
                "mention_slots": [],
            }
            key_to_skeleton[k] = skeleton
            skeletons.append(skeleton)
            appearance += 1
    skeletons.sort(key=lambda s: (s["figure_number"], s["appearance"], s["label"]))
    for i, skeleton in enumerate(skeletons, start=1):
        skeleton["entity_id"] = f"e{i}"

    # mentions in document order, overlap-resolved per unit
    mention_specs: list[dict] = []
    for annotation in annotations:
        for unit, flat in annotation.unit_pairs:
            kept, dropped = resolve_overlaps(list(flat))
            for line in dropped:
                diagnostics.append(
                    f"figure {annotation.figure.figure_number} "
                    f"{unit.kind} {unit.host_id}: {line}"
                )
            for pair in kept:
                skeleton = key_to_skeleton.get(
                    (annotation.figure.figure_number, merge_key(pair.label))
                )
                if skeleton is None:
                    continue
                mention_specs.append({
                    "unit": unit,
                    "pair": pair,
                    "skeleton": skeleton,
                })
    mention_specs.sort(
        key=lambda s: (s["unit"].doc_position, s["pair"].span)
    )

    mentions: list[TextMention] = []
    for i, spec in enumerate(mention_specs, start=1):
        unit: LinkUnit = spec["unit"]
        pair: PhrasePair = spec["pair"]
        mention_id = f"m{i}"
        sentence_index = None
        offset = 0
        for si, sentence in enumerate(unit.sentences):
            if offset <= pair.span[0] < offset + len(sentence):
                sentence_index = si
                break
            offset += len(sentence)
        mentions.append(TextMention(
            mention_id=mention_id,
            entity_id=spec["skeleton"]["entity_id"],
            phrase=pair.phrase,
            location=MentionLocation(
                kind=unit.kind,
                passage_or_figure=unit.host_id,
                sentence_index=sentence_index,
                char_span=pair.span,
            ),
        ))
        spec["skeleton"]["mention_slots"].append(mention_id)

    entities = tuple(
        Entity(
            entity_id=s["entity_id"],
            figure_number=s["figure_number"],
            label=s["label"],
            points=s["points"],
            mentions=tuple(s["mention_slots"]),
            provisional=s["provisional"],
        )
        for s in skeletons
    )

    descriptions, desc_warnings = ({}, [])
    if entities:
        descriptions, desc_warnings = generate_descriptions(
            list(entities), doc, providers.chat,
            paper_ref=paper_ref,
            sentence_limit=config.description_sentence_limit,
            cache=providers.cache,
            max_attempts=providers.max_attempts,
            backoff_seconds=providers.backoff_seconds,
        )
    diagnostics.extend(desc_warnings)

    links: list[Link] = []
    counter = 1
    for entity in entities:
        for mention_id in entity.mentions:
            links.append(Link(
                link_id=f"l{counter}",
                entity_id=entity.entity_id,
                kind=DIRECT_REFERENCE,
                target_mention_id=mention_id,
            ))
            counter += 1
        desc = descriptions.get(entity.entity_id)
        if desc:
            for idx in desc.related_passage_ids:
                links.append(Link(
                    link_id=f"l{counter}",
                    entity_id=entity.entity_id,
                    kind=RELATED_PASSAGE,
                    target_passage_index=idx,
                ))
                counter += 1

    scan_sequences = _scan_sequences(entities, mentions)

    return AugmentationBundle(
        format_version=FORMAT_VERSION,
        doc_id=doc.doc_id,
        source_hash=doc.source_hash,
        entities=entities,
        mentions=tuple(mentions),
        links=tuple(links),
        descriptions=descriptions,
        scan_sequences=scan_sequences,
        diagnostics=tuple(diagnostics),
    )


def _scan_sequences(
    entities: tuple[Entity, ...], mentions: list[TextMention]
) -> dict[int, tuple[str, ...]]:
    """Scan order: first caption mention in document order, then points
    top-to-bottom / left-to-right, then label."""
    mentions_by_id = {m.mention_id: m for m in mentions}
    sequences: dict[int, tuple[str, ...]] = {}
    figure_numbers = sorted({e.figure_number for e in entities})
    for fig_num in figure_numbers:
        group = [e for e in entities if e.figure_number == fig_num]

        def sort_key(entity: Entity):
            caption_positions = [
                mentions_by_id[mid].location.char_span
                for mid in entity.mentions
                if mentions_by_id[mid].location.kind == "caption"
            ]
            if caption_positions:
                return (0, min(caption_positions), (0.0, 0.0), entity.label)
            if entity.points:
                y, x = min((y, x) for x, y in entity.points)
                return (1, (0, 0), (y, x), entity.label)
            return (2, (0, 0), (0.0, 0.0), entity.label)

        sequences[fig_num] = tuple(e.entity_id for e in sorted(group, key=sort_key))
    return sequences
