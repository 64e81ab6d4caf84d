#!/usr/bin/env python3
"""Generate the synthetic fixture corpus used by the test suite.

Everything here is fictional and benign: imaginary groups, invented
complaints. The records exercise the full annotation schema (all eight
relations, demographics with gaps, all three sources) while every post
keeps a unique token pair so retrieval-by-overlap is exact.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from costar import (
    Annotation,
    AnnotatorDemographics,
    Conceptualisation,
    Post,
    StereotypeTuple,
    validate_annotation,
)

GROUPS = [
    "robot chefs",
    "martian tourists",
    "cloud shepherds",
    "glacier pilots",
    "asteroid miners",
    "synth violinists",
    "tidal farmers",
    "comet jugglers",
]

# statement pools keyed by relation; kept free of relation words so the
# rendered tuples round-trip at the true split point
STATEMENTS = {
    "are": ["obsessed with chrome polish", "suspicious of fresh produce"],
    "have": ["too many spare spatulas", "zero patience for paperwork"],
    "can": ["never park a rover straight", "only cook with lasers"],
    "cause": ["traffic jams on the skyway", "endless queue drama"],
    "prevent": ["anyone from enjoying the buffet", "quiet evenings at the dome"],
    "want": ["all the window seats", "every last oxygen credit"],
    "should": ["stick to the lower orbits", "leave the thermostat alone"],
    "do": ["not respect queue etiquette", "nothing about the humming"],
}

CONCEPTS = [
    "orbital snobbery",
    "dome gossip",
    "zero g manners",
    "vacuum pride",
    "airlock decorum",
    "gravity envy",
    "helmet fashion",
    "ration politics",
]

COLORS = ["crimson", "teal", "amber", "violet", "sable", "ivory", "coral", "jade", "slate", "bronze"]
MINERALS = ["quartz", "basalt", "gypsum", "olivine", "feldspar"]

POST_TEMPLATES = [
    "just saw the {group} at the {color} {mineral} dome and honestly they never change",
    "why am i not surprised the {group} booked out the {color} {mineral} lounge again",
    "the {group} near the {color} {mineral} market keep proving my point",
]

SOURCES = [
    ("reddit", "r/domewatch"),
    ("reddit", "r/skyharbor"),
    ("twitter", "tw_orbitals"),
    ("hate_site", "forum_nimbus"),
]

GENDERS = ["woman", "man", "nonbinary"]
RACES = ["lunar", "tidal", "highland"]
AGE_BANDS = ["18-24", "25-34", "35-44", "45-54"]

RELATIONS = list(STATEMENTS)


def make_records(n: int) -> list[dict]:
    records = []
    pairs = [(c, m) for c in COLORS for m in MINERALS]
    assert n <= len(pairs), "not enough unique token pairs"
    seen_tokens: set[frozenset] = set()
    for i in range(n):
        color, mineral = pairs[i]
        group = GROUPS[i % len(GROUPS)]
        relation = RELATIONS[i % len(RELATIONS)]
        statement = STATEMENTS[relation][i % 2]
        concept = CONCEPTS[(i + 3) % len(CONCEPTS)]
        text = POST_TEMPLATES[i % len(POST_TEMPLATES)].format(
            group=group, color=color, mineral=mineral
        )
        source, sub_source = SOURCES[i % len(SOURCES)]
        if i % 7 == 6:
            annotator = None
        else:
            annotator = {
                "gender": GENDERS[i % len(GENDERS)] if i % 5 != 4 else None,
                "race": RACES[i % len(RACES)] if i % 6 != 5 else None,
                "age_band": AGE_BANDS[i % len(AGE_BANDS)],
            }
        record = {
            "post_id": f"p{i + 1:03d}",
            "post_text": text,
            "source": source,
            "sub_source": sub_source,
            "targeted_group": group,
            "relation": relation,
            "implied_statement": statement,
            "conceptualisation": concept,
            "annotator": annotator,
        }
        annotation = Annotation(
            post_id=record["post_id"],
            stereotype=StereotypeTuple(group, relation, statement),
            conceptualisation=Conceptualisation(concept),
            annotator=AnnotatorDemographics(**annotator) if annotator else None,
        )
        report = validate_annotation(annotation)
        assert not report, f"record {i}: {report}"
        tokens = frozenset(text.lower().split())
        assert tokens not in seen_tokens, f"record {i}: duplicate post token set"
        seen_tokens.add(tokens)
        Post(id=record["post_id"], text=text, source=source, sub_source=sub_source)
        records.append(record)
    return records


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=50)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "tests/fixtures/synthetic_corpus.jsonl"),
    )
    args = parser.parse_args(argv)
    records = make_records(args.n)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(records)} records to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
