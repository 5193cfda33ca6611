"""Prompt templates for the annotation stages.

Two identification variants exist: CONCEPTUAL asks for conceptually
significant elements keyed by figure; EXHAUSTIVE asks for a plain item
list of a single image. LINK_PHRASES carries ``<entities>`` and
``<caption>`` slots; its response-format sentence contains a known wording
slip ("I should be") that is kept verbatim by default because regenerating
recorded responses against an edited prompt would invalidate caches.
``fix_linking_typo`` opts into the corrected wording.
"""

from __future__ import annotations

IDENTIFY_CONCEPTUAL = (
    'For each figure, identify important elements within the image. Focus on '
    'elements with conceptual significance, not visual details. Label them '
    'descriptively, not just by repeating the text. For graphs, identify '
    'elements that have important trends, not just individual points. The '
    'labels should identify objects, not describe them. Provide your response '
    'in JSON format with "fig#" as the key and a list of elements (strings) '
    'as the value. Replace # with the figure number.'
)

IDENTIFY_EXHAUSTIVE = (
    "Help me label all of the items in this image. List all of the items one "
    "at a time with no additional context."
)

LINK_PHRASES = """\
You are a helpful data scientist.

I will give you the caption for a figure in a computer science research paper.

First, determine if the caption is describing multiple subfigures. If it is, extract the label of each subfigure, without unnecessary punctuation.

Then, determine if the figure is some kind of data visualization. If it is, follow these steps for each sentence:
1. Identify any labels related to the data visualization. Provide textual information as well, not just numbers. Include labels that are critical for someone to understand the figure without seeing it, like axis titles and data categories.
2. Skip labels that are related to data visualization in general.
3. Extract each label exactly, without parentheses or quotation marks.
4. Determine one of the entities below that this label represents. If none are appropriate, make a new one.
5. Move on to the ** RESPONSE FORMAT ** instructions.

If the figure is not some kind of data visualization, follow these steps for each sentence:
1. Check if the sentence contains labeled references to parts of the figure.
2. If the sentence contains labeled references, extract them exactly. If the label represents a range of items, produce each item in the range, even if you have to infer.
3. If the sentence contains no labeled references, identify the entities in it.
4. For each entity, try to guess if it refers to a particular part of the figure. Valid entities may be special names or possible quotations from the image text.
5. If you think the entity is referring to a particular part of the figure, extract it exactly.
6. Reread the caption again before providing your output. Add any references you might have missed.
7. Determine one of the entities below that this label represents. If none are appropriate, make a new one.
8. Move on to the ** RESPONSE FORMAT ** instructions.

** RESPONSE FORMAT **
Provide your response in valid JSON without any additional messages or information. The key should be the sentence and the value should be a list of pairs of extracted labels and entities. The label should be first and the entity should be second. Reproduce all text in the caption including the figure title in order in the JSON, using empty lists for sentences without references. If I concatenate all keys in the JSON, I should be the identical caption.
** LIST OF ENTITIES **
<entities>

** CAPTION **:
<caption>
"""

POINT_AT = "Point at {target}."

DESCRIBE_ENTITIES = (
    "You are a senior PhD student preparing to present a paper at reading "
    "group. You assume that no one else has read the paper that deeply, so "
    "your answers will be concise, include critical context, and focus on "
    "conceptual understanding. Do not talk about visual or high-level "
    "characteristics of elements in a figure. In one sentence, describe the "
    "listed entities in the figure. Provide additional details from far away "
    "in the paper. Provide your response in JSON format with the element "
    "name as the key and the description of the value."
)


def linking_prompt(entities: list[str], unit_text: str, fix_linking_typo: bool = False) -> str:
    """Fill the linking template's entity and caption slots."""
    prompt = LINK_PHRASES
    if fix_linking_typo:
        prompt = prompt.replace("I should be the identical caption",
                                "it should be the identical caption")
    prompt = prompt.replace("<entities>", "\n".join(entities))
    return prompt.replace("<caption>", unit_text)


def identify_prompt(variant: str) -> str:
    if variant == "conceptual":
        return IDENTIFY_CONCEPTUAL
    if variant == "exhaustive":
        return IDENTIFY_EXHAUSTIVE
    raise ValueError(f"unknown identification variant: {variant!r}")
