"""crossdoc: cross-modal augmented reading toolchain."""

from .ingest import (
    Document,
    Figure,
    Passage,
    PassageRef,
    find_figure_references,
    paragraph_distance,
    parse_document,
    split_caption_sentences,
)
from .linkgraph import (
    AugmentationBundle,
    Entity,
    EntityDescription,
    Link,
    TextMention,
    ValidationReport,
    entity_context,
    figure_scan_sequence,
    prune_unlinked_entities,
    reverse_lookup,
    validate_bundle,
)
from .bundler import augment_html, emit_baseline_html, read_bundle, write_bundle
from .pipeline import run_pipeline

__version__ = "1.0.0"

__all__ = [
    "AugmentationBundle",
    "Document",
    "Entity",
    "EntityDescription",
    "Figure",
    "Link",
    "Passage",
    "PassageRef",
    "TextMention",
    "ValidationReport",
    "augment_html",
    "emit_baseline_html",
    "entity_context",
    "figure_scan_sequence",
    "find_figure_references",
    "paragraph_distance",
    "parse_document",
    "prune_unlinked_entities",
    "read_bundle",
    "reverse_lookup",
    "run_pipeline",
    "split_caption_sentences",
    "validate_bundle",
    "write_bundle",
]
