"""Prompt template constants shared across the pipeline and the exporter."""

# Text-to-image retrieval query for an (attribute, object) pair.
RETRIEVAL_TEMPLATE = "A photo of {noun} that is {attribute}"

# Zero-shot inference prompt per attribute.
INFERENCE_TEMPLATE = "A photo of something that is {attribute}"

# Soft-label templates, averaged per attribute with the general noun below.
SOFT_LABEL_TEMPLATES_IS = (
    "a {attr} {noun}",
    "a {noun} is {attr}",
)
SOFT_LABEL_TEMPLATES_HAS = (
    "a {attr} {obj} {noun}",
    "a {noun} has {attr} {obj}",
)
SOFT_LABEL_NOUN = "object"

# Compatibility-scoring instruction sent to the chat-completions endpoint.
# Placeholders: {count_categories}, {categories} (numbered list, one per
# line), {attribute}.
LLM_COMPAT_PROMPT = """\
Let's play a role game. You will play the role of a researcher who is both a \
statistician and linguist. I will interpret a silly student who has many \
questions regarding language and statistics of language.

In particular, I will ask you to tell me which classes, or categories if you \
prefer, match or bind well with the attribute I will provide you. More \
precisely, you will have to tell me if each class/category that I will give \
you matches well the given attribute. You should also tell me how well they \
match on a scale 0 (the class cannot have the attribute) to 10 (the class \
can have the attribute and it is semantically fine to associate the \
attribute to the class).

Your response should list all the {count_categories} classes, and provide \
for each one of them the score on the scale explained above. The output \
format should be 'class: score'. No explanation at all, just plain output.

Additional rules:
- do not provide any outputs but the list of chosen categories
- the output must be in the form of "x. category: score", where 'x' is the \
index of the category
- the output must be in the form of a list
- make sure you provide a score for each category. There are \
{count_categories} categories, so the output list must have \
{count_categories} elements.

There are {count_categories} classes (categories).
The list of classes, or categories, is the following:
{categories}

The attribute is: {attribute}."""
