"""Prompt templates; these are interface constants shared with the
scoring pipeline and must not drift."""

import re

RETRIEVAL_TEMPLATE = "A photo of {noun} that is {attribute}"

INFERENCE_TEMPLATE = "A photo of something that is {attribute}"

SOFT_LABEL_TEMPLATES_IS = (
    "a {attr} {noun}",
    "a {noun} is {attr}",
)
SOFT_LABEL_TEMPLATES_HAS = (
    "a {attr} {obj} {noun}",
    "a {noun} has {attr} {obj}",
)
SOFT_LABEL_NOUN = "object"


def split_has_attribute(name: str) -> tuple[str, str]:
    """Split a has-type attribute into (modifier, part).

    Multi-word names split at the first space ("long sleeves" ->
    ("long", "sleeves")); single words are treated as the part itself
    ("wings" -> ("", "wings")).
    """
    head, _, rest = name.partition(" ")
    if rest:
        return head, rest
    return "", name


def soft_label_texts(name: str, prompt_type: str) -> list[str]:
    """The two template instantiations averaged into one attr_text row."""
    if prompt_type == "has":
        attr, obj = split_has_attribute(name)
        pair = [t.format(attr=attr, obj=obj, noun=SOFT_LABEL_NOUN)
                for t in SOFT_LABEL_TEMPLATES_HAS]
    else:
        pair = [t.format(attr=name, noun=SOFT_LABEL_NOUN)
                for t in SOFT_LABEL_TEMPLATES_IS]
    return [re.sub(r"\s+", " ", t).strip() for t in pair]
