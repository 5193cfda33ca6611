"""Bundle serialization and HTML emission.

``write_bundle``/``read_bundle`` speak the versioned JSON format with
unknown-field preservation. ``augment_html`` injects mention anchors and
SVG point overlays into the original source using the offsets recorded at
parse time; ``emit_baseline_html`` produces the control variant with
hyperlinks neutralized and configured chrome stripped. Both emitters are
pure string transforms: identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

from .errors import SchemaViolation, SpanCollision, VersionUnsupported
from .ingest import Document, Figure, Passage
from .linkgraph import (
    FORMAT_VERSION,
    AugmentationBundle,
    Entity,
    EntityDescription,
    Link,
    MentionLocation,
    TextMention,
)

MENTION_CLASS = "cd-mention"
POINT_CLASS = "cd-point"
OVERLAY_CLASS = "cd-overlay"
INERT_LINK_CLASS = "cd-inert-link"
POINT_RADIUS = "2.5%"   # appearance constant; styling lives in the reader


# --- serialization ----------------------------------------------------------

_KNOWN_TOP = {
    "format_version", "doc_id", "source_hash", "entities", "mentions",
    "links", "descriptions", "scan_sequences", "diagnostics",
}
_KNOWN_ENTITY = {"entity_id", "figure_number", "label", "points", "mentions",
                 "provisional"}
_KNOWN_MENTION = {"mention_id", "entity_id", "phrase", "location"}
_KNOWN_LINK = {"link_id", "entity_id", "kind", "target"}
_KNOWN_DESCRIPTION = {"entity_id", "text", "related_passage_ids",
                      "unresolved_related", "manual_override"}


def write_bundle(bundle: AugmentationBundle) -> bytes:
    """Serialize to canonical JSON bytes (sorted keys, 2-space indent)."""
    payload: dict = {
        "format_version": bundle.format_version,
        "doc_id": bundle.doc_id,
        "source_hash": bundle.source_hash,
        "entities": [
            {
                "entity_id": e.entity_id,
                "figure_number": e.figure_number,
                "label": e.label,
                "points": [[x, y] for x, y in e.points],
                "mentions": list(e.mentions),
                "provisional": e.provisional,
                **e.extra,
            }
            for e in bundle.entities
        ],
        "mentions": [
            {
                "mention_id": m.mention_id,
                "entity_id": m.entity_id,
                "phrase": m.phrase,
                "location": {
                    "kind": m.location.kind,
                    "passage_or_figure": m.location.passage_or_figure,
                    "sentence_index": m.location.sentence_index,
                    "char_span": list(m.location.char_span),
                },
                **m.extra,
            }
            for m in bundle.mentions
        ],
        "links": [
            {
                "link_id": l.link_id,
                "entity_id": l.entity_id,
                "kind": l.kind,
                "target": (
                    {"mention_id": l.target_mention_id}
                    if l.target_mention_id is not None
                    else {"passage_index": l.target_passage_index}
                ),
                **l.extra,
            }
            for l in bundle.links
        ],
        "descriptions": {
            eid: {
                "entity_id": d.entity_id,
                "text": d.text,
                "related_passage_ids": list(d.related_passage_ids),
                "unresolved_related": list(d.unresolved_related),
                "manual_override": d.manual_override,
                **d.extra,
            }
            for eid, d in sorted(bundle.descriptions.items())
        },
        "scan_sequences": {
            str(num): list(seq)
            for num, seq in sorted(bundle.scan_sequences.items())
        },
        "diagnostics": list(bundle.diagnostics),
    }
    payload.update(bundle.extra)
    text = json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)
    return (text + "\n").encode("utf-8")


def _need(data: dict, key: str, types, path: str):
    if key not in data:
        raise SchemaViolation(f"missing required field {key!r}", path=path)
    value = data[key]
    if not isinstance(value, types):
        raise SchemaViolation(
            f"field {key!r} has type {type(value).__name__}", path=f"{path}/{key}"
        )
    return value


def _span(value, path: str) -> tuple[int, int]:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) for v in value)):
        raise SchemaViolation("char_span must be [start, end]", path=path)
    return (value[0], value[1])


def read_bundle(data: bytes) -> AugmentationBundle:
    """Parse bundle bytes; no partial bundle is ever returned."""
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation(f"not valid JSON: {exc}", path="/") from exc
    if not isinstance(payload, dict):
        raise SchemaViolation("bundle must be a JSON object", path="/")

    version = _need(payload, "format_version", str, "/")
    m = re.match(r"(\d+)\.(\d+)\.(\d+)$", version)
    if not m:
        raise SchemaViolation(f"bad format_version {version!r}",
                              path="/format_version")
    major = int(m.group(1))
    supported = int(FORMAT_VERSION.split(".")[0])
    if major > supported:
        raise VersionUnsupported(
            f"bundle format {version} is newer than supported {FORMAT_VERSION}"
        )

    entities = []
    for i, raw in enumerate(_need(payload, "entities", list, "/")):
        path = f"/entities/{i}"
        if not isinstance(raw, dict):
            raise SchemaViolation("entity must be an object", path=path)
        points = _need(raw, "points", list, path)
        parsed_points = []
        for j, pt in enumerate(points):
            if (not isinstance(pt, list) or len(pt) != 2
                    or not all(isinstance(v, (int, float)) for v in pt)):
                raise SchemaViolation("point must be [x, y]",
                                      path=f"{path}/points/{j}")
            parsed_points.append((float(pt[0]), float(pt[1])))
        entities.append(Entity(
            entity_id=_need(raw, "entity_id", str, path),
            figure_number=_need(raw, "figure_number", int, path),
            label=_need(raw, "label", str, path),
            points=tuple(parsed_points),
            mentions=tuple(_need(raw, "mentions", list, path)),
            provisional=bool(raw.get("provisional", False)),
            extra={k: v for k, v in raw.items() if k not in _KNOWN_ENTITY},
        ))

    mentions = []
    for i, raw in enumerate(_need(payload, "mentions", list, "/")):
        path = f"/mentions/{i}"
        if not isinstance(raw, dict):
            raise SchemaViolation("mention must be an object", path=path)
        loc = _need(raw, "location", dict, path)
        mentions.append(TextMention(
            mention_id=_need(raw, "mention_id", str, path),
            entity_id=_need(raw, "entity_id", str, path),
            phrase=_need(raw, "phrase", str, path),
            location=MentionLocation(
                kind=_need(loc, "kind", str, f"{path}/location"),
                passage_or_figure=_need(loc, "passage_or_figure", str,
                                        f"{path}/location"),
                sentence_index=loc.get("sentence_index"),
                char_span=_span(loc.get("char_span"), f"{path}/location/char_span"),
            ),
            extra={k: v for k, v in raw.items() if k not in _KNOWN_MENTION},
        ))

    links = []
    for i, raw in enumerate(_need(payload, "links", list, "/")):
        path = f"/links/{i}"
        if not isinstance(raw, dict):
            raise SchemaViolation("link must be an object", path=path)
        target = _need(raw, "target", dict, path)
        mention_id = target.get("mention_id")
        passage_index = target.get("passage_index")
        if (mention_id is None) == (passage_index is None):
            raise SchemaViolation(
                "target must hold exactly one of mention_id or passage_index",
                path=f"{path}/target",
            )
        links.append(Link(
            link_id=_need(raw, "link_id", str, path),
            entity_id=_need(raw, "entity_id", str, path),
            kind=_need(raw, "kind", str, path),
            target_mention_id=mention_id,
            target_passage_index=passage_index,
            extra={k: v for k, v in raw.items() if k not in _KNOWN_LINK},
        ))

    descriptions = {}
    for eid, raw in _need(payload, "descriptions", dict, "/").items():
        path = f"/descriptions/{eid}"
        if not isinstance(raw, dict):
            raise SchemaViolation("description must be an object", path=path)
        descriptions[eid] = EntityDescription(
            entity_id=_need(raw, "entity_id", str, path),
            text=_need(raw, "text", str, path),
            related_passage_ids=tuple(raw.get("related_passage_ids", [])),
            unresolved_related=tuple(raw.get("unresolved_related", [])),
            manual_override=bool(raw.get("manual_override", False)),
            extra={k: v for k, v in raw.items() if k not in _KNOWN_DESCRIPTION},
        )

    scan_sequences = {}
    for key, seq in _need(payload, "scan_sequences", dict, "/").items():
        try:
            num = int(key)
        except ValueError as exc:
            raise SchemaViolation("scan key must be a figure number",
                                  path=f"/scan_sequences/{key}") from exc
        if not isinstance(seq, list):
            raise SchemaViolation("scan sequence must be a list",
                                  path=f"/scan_sequences/{key}")
        scan_sequences[num] = tuple(seq)

    return AugmentationBundle(
        format_version=version,
        doc_id=_need(payload, "doc_id", str, "/"),
        source_hash=_need(payload, "source_hash", str, "/"),
        entities=tuple(entities),
        mentions=tuple(mentions),
        links=tuple(links),
        descriptions=descriptions,
        scan_sequences=scan_sequences,
        diagnostics=tuple(_need(payload, "diagnostics", list, "/")),
        extra={k: v for k, v in payload.items() if k not in _KNOWN_TOP},
    )


# --- source-offset helpers ----------------------------------------------------

def _segment_spans(
    host_runs, text_span: tuple[int, int]
) -> list[tuple[int, int]]:
    """Source char segments covering a text span, merged when contiguous."""
    start, end = text_span
    segments: list[tuple[int, int]] = []
    for run in host_runs:
        run_end = run.text_start + run.text_len
        if run_end <= start or run.text_start >= end:
            continue
        if run.src_len == run.text_len:
            s = run.src_start + max(0, start - run.text_start)
            e = run.src_start + min(run.text_len, end - run.text_start)
        else:
            # character-reference run: all-or-nothing in the source
            s, e = run.src_start, run.src_start + run.src_len
        if segments and segments[-1][1] == s:
            segments[-1] = (segments[-1][0], e)
        else:
            segments.append((s, e))
    return segments


@dataclass(frozen=True)
class _Edit:
    position: int
    order: int          # 0 closes before 1 opens at the same position
    text: str


def _apply_edits(source: str, edits: list[_Edit]) -> str:
    out = []
    pos = 0
    for edit in sorted(edits, key=lambda e: (e.position, e.order)):
        out.append(source[pos:edit.position])
        out.append(edit.text)
        pos = edit.position
    out.append(source[pos:])
    return "".join(out)


def _fmt_percent(fraction: float) -> str:
    return f"{fraction * 100:g}%"


def augment_html(doc: Document, bundle: AugmentationBundle) -> bytes:
    """Inject mention anchors and point overlays into the source HTML.

    Every mention becomes one or more ``<span>`` anchors (one per
    contiguous source segment, so markup inside a phrase keeps nesting
    valid) carrying entity/mention data attributes; every figure with
    points gets an ``<svg>`` overlay with one circle per point at
    fractional (percent) coordinates. Text content is untouched.
    """
    if bundle.source_hash != doc.source_hash:
        raise SchemaViolation(
            "bundle is bound to a different document revision", path="/source_hash"
        )
    src = doc.source_text
    passages_by_id = {p.element_id: p for p in doc.passages}
    figures_by_id = {f.element_id: f for f in doc.figures}
    entity_order = {e.entity_id: i for i, e in enumerate(bundle.entities)}

    edits: list[_Edit] = []
    claimed: list[tuple[int, int]] = []

    for mention in bundle.mentions:
        loc = mention.location
        if loc.kind == "body":
            host: Passage | Figure = passages_by_id[loc.passage_or_figure]
            runs = host.text_runs
        else:
            host = figures_by_id[loc.passage_or_figure]
            runs = host.caption_runs
        segments = _segment_spans(runs, loc.char_span)
        if not segments:
            raise SpanCollision(
                f"mention {mention.mention_id} maps to no source text"
            )
        for s, e in segments:
            for cs, ce in claimed:
                if s < ce and cs < e:
                    raise SpanCollision(
                        f"mention {mention.mention_id} overlaps an injected anchor"
                    )
            claimed.append((s, e))
        for i, (s, e) in enumerate(segments):
            ident = (
                f' id="cd-{mention.entity_id}-{mention.mention_id}"'
                if i == 0 else ""
            )
            open_tag = (
                f'<span class="{MENTION_CLASS}"{ident}'
                f' data-entity="{mention.entity_id}"'
                f' data-mention="{mention.mention_id}">'
            )
            edits.append(_Edit(s, 1, open_tag))
            edits.append(_Edit(e, 0, "</span>"))

    for figure in doc.figures:
        entities = sorted(
            (e for e in bundle.entities
             if e.figure_number == figure.figure_number and e.points),
            key=lambda e: entity_order[e.entity_id],
        )
        if not entities or figure.img_char_span is None:
            continue
        circles = []
        for entity in entities:
            for x, y in entity.points:
                circles.append(
                    f'<circle class="{POINT_CLASS}"'
                    f' data-entity="{entity.entity_id}"'
                    f' cx="{_fmt_percent(x)}" cy="{_fmt_percent(y)}"'
                    f' r="{POINT_RADIUS}"/>'
                )
        overlay = (
            f'<svg class="{OVERLAY_CLASS}"'
            f' data-figure="{figure.figure_number}" aria-hidden="true">'
            + "".join(circles) + "</svg>"
        )
        edits.append(_Edit(figure.img_char_span[1], 1, overlay))

    return _apply_edits(src, edits).encode("utf-8")


# --- baseline emission -----------------------------------------------------------

@dataclass(frozen=True)
class _Selector:
    tag: str | None
    class_name: str | None
    element_id: str | None

    @classmethod
    def parse(cls, raw: str) -> "_Selector":
        m = re.match(r"^([a-zA-Z][\w-]*)?(?:\.([\w-]+)|#([\w-]+))?$", raw.strip())
        if not m or not raw.strip():
            raise ValueError(f"unsupported selector {raw!r}; use tag, .class, or #id")
        return cls(m.group(1), m.group(2), m.group(3))

    def matches(self, tag: str, attrs: dict[str, str | None]) -> bool:
        if self.tag and tag != self.tag.lower():
            return False
        if self.class_name is not None:
            classes = (attrs.get("class") or "").split()
            if self.class_name not in classes:
                return False
        if self.element_id is not None and attrs.get("id") != self.element_id:
            return False
        return bool(self.tag or self.class_name or self.element_id)


class _ElementScanner(HTMLParser):
    """Locates <a> tags and strip-list elements with source offsets."""

    def __init__(self, src: str, selectors: list[_Selector]):
        super().__init__(convert_charrefs=False)
        self.src = src
        self.selectors = selectors
        self.line_starts = [0]
        for i, ch in enumerate(src):
            if ch == "\n":
                self.line_starts.append(i + 1)
        self.anchors: list[tuple[int, int, bool]] = []  # (start, end, is_open)
        self._strip_stack: list[tuple[str, int]] = []
        self.strip_ranges: list[tuple[int, int]] = []

    def _abs(self) -> int:
        line, col = self.getpos()
        return self.line_starts[line - 1] + col

    def _raw_len(self) -> int:
        return len(self.get_starttag_text() or "")

    def handle_starttag(self, tag, attrs):
        pos = self._abs()
        if tag == "a":
            self.anchors.append((pos, pos + self._raw_len(), True))
        attrd = dict(attrs)
        if not self._strip_stack and any(
            sel.matches(tag, attrd) for sel in self.selectors
        ):
            self._strip_stack.append((tag, pos))
        elif self._strip_stack and tag == self._strip_stack[0][0]:
            # same tag nested inside a stripped element: track depth
            self._strip_stack.append((tag, pos))

    def handle_startendtag(self, tag, attrs):
        pos = self._abs()
        attrd = dict(attrs)
        if not self._strip_stack and any(
            sel.matches(tag, attrd) for sel in self.selectors
        ):
            self.strip_ranges.append((pos, pos + self._raw_len()))

    def handle_endtag(self, tag):
        pos = self._abs()
        if tag == "a":
            self.anchors.append((pos, pos + len("</a>"), False))
        if self._strip_stack and tag == self._strip_stack[-1][0]:
            _, start = self._strip_stack.pop()
            if not self._strip_stack:
                self.strip_ranges.append((start, pos + len(tag) + 3))


def emit_baseline_html(doc: Document, strip_selectors: list[str] | None = None) -> bytes:
    """Control variant: same layout, hyperlinks neutralized, no anchors.

    Every ``<a>`` becomes an inert ``<span>`` (text kept, navigation
    gone). Elements matching the venue-specific strip list (simple tag /
    .class / #id selectors) are removed entirely.
    """
    src = doc.source_text
    selectors = [_Selector.parse(s) for s in (strip_selectors or [])]
    scanner = _ElementScanner(src, selectors)
    scanner.feed(src)
    scanner.close()

    def in_stripped(pos: int) -> bool:
        return any(s <= pos < e for s, e in scanner.strip_ranges)

    replacements: list[tuple[int, int, str]] = []
    for start, end, is_open in scanner.anchors:
        if in_stripped(start):
            continue
        replacement = f'<span class="{INERT_LINK_CLASS}">' if is_open else "</span>"
        replacements.append((start, end, replacement))
    for start, end in scanner.strip_ranges:
        replacements.append((start, end, ""))

    out = []
    pos = 0
    for start, end, text in sorted(replacements):
        out.append(src[pos:start])
        out.append(text)
        pos = end
    out.append(src[pos:])
    return "".join(out).encode("utf-8")
