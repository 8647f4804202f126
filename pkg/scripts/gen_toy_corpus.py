#!/usr/bin/env python3
"""Generate the committed 50-caption toy corpus and its expected counts.

Each caption is written together with the (attribute, object) pairs it is
meant to contribute, so the expected table comes from the construction
plan rather than from the counting code under test. An independent
matcher (separate tokenizer implementation) cross-checks the plan before
anything is written.

Run from the repository root:  python scripts/gen_toy_corpus.py
"""

import json
from pathlib import Path

ATTRIBUTES = ["red", "wet", "shiny", "striped"]
SYNONYMS = {"shiny": ["glossy"]}
OBJECTS = ["car", "dog", "apple", "fire hydrant", "box"]

# (caption, [(attribute, object), ...]) — the plan IS the hand count.
CAPTIONS = [
    ("a red car parked outside", [("red", "car")]),
    ("the red car and a red apple", [("red", "car"), ("red", "apple")]),
    ("a wet dog shaking off water", [("wet", "dog")]),
    ("shiny red apples on the table", [("shiny", "apple"), ("red", "apple")]),
    ("a striped box next to the door", [("striped", "box")]),
    ("the dog sits near a fire hydrant", []),
    ("a red fire hydrant on the corner", [("red", "fire hydrant")]),
    ("wet streets after the rain", []),
    ("a glossy car in the showroom", [("shiny", "car")]),
    ("the striped dog toy", [("striped", "dog")]),
    ("a red carpet event downtown", []),  # carpet is not car
    ("boxes stacked in a red warehouse", [("red", "box")]),  # plural box
    ("two wet dogs playing in the mud", [("wet", "dog")]),  # plural dog
    ("a shiny apple a day", [("shiny", "apple")]),
    ("red, shiny cars at the dealership", [("red", "car"), ("shiny", "car")]),
    ("the cardboard box got wet", [("wet", "box")]),
    ("a dog and an apple", []),
    ("striped curtains in the kitchen", []),
    ("a wet fire hydrant leaking slowly", [("wet", "fire hydrant")]),
    ("glossy dog fur after grooming", [("shiny", "dog")]),
    ("the apple cart tipped over", []),
    ("a red dog collar", [("red", "dog")]),
    ("shiny fire hydrants freshly painted", [("shiny", "fire hydrant")]),
    ("a box of apples", [], ),
    ("red apples and wet grass", [("red", "apple"), ("wet", "apple")]),
    ("the striped car raced past", [("striped", "car")]),
    ("a scared cat on the carpet", []),
    ("wet paint on the box", [("wet", "box")]),
    ("a shiny red box with a bow", [("shiny", "box"), ("red", "box")]),
    ("dogs love car rides", []),
    ("the hydrant near the red house", []),  # hydrant alone is not fire hydrant
    ("a striped apple variety", [("striped", "apple")]),
    ("freshly washed wet car", [("wet", "car")]),
    ("a red and white striped box", [("red", "box"), ("striped", "box")]),
    ("glossy magazine on the table", []),
    ("the wet apple fell in the pond", [("wet", "apple")]),
    ("a dog chasing a red frisbee", [("red", "dog")]),
    ("cars parked by the fire hydrant", []),
    ("a shiny new car for the family", [("shiny", "car")]),
    ("red wine and dinner", []),
    ("the box was empty", []),
    ("a wet towel on the dog bed", [("wet", "dog")]),
    ("striped fire hydrant art project", [("striped", "fire hydrant")]),
    ("an apple pie cooling", []),
    ("the shiny dog medal", [("shiny", "dog")]),
    ("a red apple on a red box", [("red", "apple"), ("red", "box")]),
    ("muddy and wet, the dog ran inside", [("wet", "dog")]),
    ("a car wash for shiny cars", [("shiny", "car")]),
    ("the glossy apple looked fake", [("shiny", "apple")]),
    ("red fire hydrants line the street", [("red", "fire hydrant")]),
]


def independent_tokens(text):
    """Separate tokenizer route: explicit separator scan, not regex."""
    out, cur = [], []
    for ch in text.lower():
        if ch.isalnum():
            cur.append(ch)
        else:
            if cur:
                out.append("".join(cur))
                cur = []
    if cur:
        out.append("".join(cur))
    return out


def term_occurs(term_tokens, caption_tokens):
    for start in range(len(caption_tokens) - len(term_tokens) + 1):
        ok = True
        for j, want in enumerate(term_tokens):
            got = caption_tokens[start + j]
            if got != want and got != want + "s" and got != want + "es":
                ok = False
                break
        if ok:
            return True
    return False


def cross_check():
    """Verify the plan against the independent matcher; die on mismatch."""
    for caption, pairs in CAPTIONS:
        toks = independent_tokens(caption)
        for a in ATTRIBUTES:
            names = [a] + SYNONYMS.get(a, [])
            a_hit = any(term_occurs(independent_tokens(n), toks)
                        for n in names)
            for o in OBJECTS:
                o_hit = term_occurs(independent_tokens(o), toks)
                planned = (a, o) in pairs
                if (a_hit and o_hit) != planned:
                    raise SystemExit(
                        f"plan mismatch: {caption!r} pair ({a}, {o}): "
                        f"matcher={a_hit and o_hit} plan={planned}")


def main():
    assert len(CAPTIONS) == 50, len(CAPTIONS)
    cross_check()
    out_dir = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "toy_corpus.tsv", "w", encoding="utf-8",
              newline="\n") as fh:
        for i, (caption, _) in enumerate(CAPTIONS):
            fh.write(f"cap{i:03d}\t{caption}\n")

    counts = [[0] * len(OBJECTS) for _ in ATTRIBUTES]
    for _, pairs in CAPTIONS:
        for a, o in pairs:
            counts[ATTRIBUTES.index(a)][OBJECTS.index(o)] += 1
    expected = {
        "attributes": ATTRIBUTES,
        "synonyms": SYNONYMS,
        "objects": OBJECTS,
        "phi_db": counts,
    }
    (out_dir / "toy_corpus_expected.json").write_text(
        json.dumps(expected, indent=1) + "\n", encoding="utf-8")
    print("wrote toy corpus; expected counts:")
    for a, row in zip(ATTRIBUTES, counts):
        print(f"  {a}: {row}")


if __name__ == "__main__":
    main()
