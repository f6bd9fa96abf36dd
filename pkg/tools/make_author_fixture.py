#!/usr/bin/env python3
"""Generate the labeled author-pair fixture set used to fit the default scorer.

Writes src/stag/data/author_pairs.jsonl. Deterministic: rerunning produces
the identical file. A small synthetic world of identities with
collaboration cliques and venue loyalty produces positive pairs (two paper
appearances of one identity, possibly on different collaborators' papers)
and negative pairs (block homonyms), so the fixture distribution matches
what the clusterer sees on real mention pairs. Institution ids are left
unset: affiliation linking runs after disambiguation in the pipeline, so
the scorer must rely on the raw affiliation strings.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

FIRST = [
    "james", "mary", "john", "patricia", "robert", "jennifer", "michael",
    "linda", "william", "elizabeth", "david", "susan", "richard", "jessica",
    "joseph", "sarah", "thomas", "karen", "wei", "li", "hiroshi", "yuki",
    "carlos", "maria", "pierre", "sophie", "hans", "greta", "ivan", "olga",
]
LAST = [
    "smith", "johnson", "williams", "brown", "jones", "garcia", "miller",
    "davis", "rodriguez", "martinez", "wang", "chen", "tanaka", "sato",
    "mueller", "schmidt", "dubois", "laurent", "petrov", "ivanov", "rossi",
    "kim", "park", "nguyen", "kumar", "singh", "patel", "ali", "hassan",
]
TOPICS = {
    "ml": "gradient descent neural network attention transformer embedding "
    "optimizer regularization classifier benchmark dataset convergence "
    "layer activation loss inference generalization pretraining".split(),
    "bio": "protein enzyme genome sequencing expression pathway receptor "
    "mutation antibody cell tissue membrane kinase phenotype assay "
    "transcription metabolic binding".split(),
    "astro": "galaxy stellar spectrum luminosity redshift telescope orbit "
    "photometry supernova cluster cosmology accretion magnitude survey "
    "radial velocity dust halo".split(),
    "econ": "market equilibrium inflation elasticity welfare taxation trade "
    "labor productivity monetary fiscal consumption investment growth "
    "unemployment policy demand supply".split(),
}
VENUES = {
    "ml": ["v-icml", "v-neurips", "v-jmlr"],
    "bio": ["v-cell", "v-plosbio", "v-nar"],
    "astro": ["v-apj", "v-mnras", "v-aa"],
    "econ": ["v-econometrica", "v-aer", "v-jpe"],
}
INSTITUTIONS = [
    {"name": "University of Washington", "city": "Seattle", "alias": "UW"},
    {"name": "Stanford University", "city": "Stanford", "alias": "Stanford"},
    {"name": "Max Planck Institute for Informatics", "city": "Saarbruecken",
     "alias": "MPI Informatics"},
    {"name": "University of Tokyo", "city": "Tokyo", "alias": "Todai"},
    {"name": "ETH Zurich", "city": "Zurich", "alias": "ETH"},
    {"name": "Tsinghua University", "city": "Beijing", "alias": "Tsinghua"},
    {"name": "University of Cambridge", "city": "Cambridge", "alias": "Cambridge"},
    {"name": "Carnegie Mellon University", "city": "Pittsburgh", "alias": "CMU"},
]
AFFILIATION_STYLES = [
    "Dept. of Computer Science, {name}, {city}",
    "{name}, {city}",
    "School of Engineering, {name}, {city}",
    "{alias}",
    "Institute for Advanced Study, {name}",
]


def title_case(s: str) -> str:
    return " ".join(w.capitalize() for w in s.split())


def make_world(rng: random.Random):
    identities = []
    for i in range(48):
        topic = list(TOPICS)[i % len(TOPICS)]
        identities.append(
            {
                "idx": i,
                "first": rng.choice(FIRST),
                "last": rng.choice(LAST),
                "topic": topic,
                "inst": rng.choice(INSTITUTIONS),
                "email": f"u{i}@example.edu" if rng.random() < 0.3 else None,
                "career_year": rng.randint(2014, 2020),
            }
        )
    by_topic: dict[str, list[int]] = {}
    for ident in identities:
        by_topic.setdefault(ident["topic"], []).append(ident["idx"])
    for ident in identities:
        peers = [j for j in by_topic[ident["topic"]] if j != ident["idx"]]
        ident["clique"] = rng.sample(peers, min(4, len(peers)))
        ident["preferred_venues"] = rng.sample(
            VENUES[ident["topic"]], rng.choice([1, 2])
        )
    return identities


def make_name(rng: random.Random, ident: dict) -> str:
    style = rng.random()
    first, last = ident["first"], ident["last"]
    if style < 0.55:
        return f"{title_case(first)} {title_case(last)}"
    if style < 0.8:
        return f"{first[0].upper()}. {title_case(last)}"
    if style < 0.9:
        middle = rng.choice("abcdefghjklmnprstw").upper()
        return f"{title_case(first)} {middle}. {title_case(last)}"
    return f"{title_case(last)}, {title_case(first)}"


def affiliation_string(rng: random.Random, inst: dict) -> str:
    return rng.choice(AFFILIATION_STYLES).format(**inst)


def appearance(rng: random.Random, identities, ident: dict) -> dict:
    """One paper appearance: the paper may be led by a clique collaborator."""
    lead = ident if rng.random() < 0.55 else identities[rng.choice(ident["clique"])]
    pool = [j for j in [lead["idx"]] + lead["clique"] if j != ident["idx"]]
    team = rng.sample(pool, min(rng.randint(1, 3), len(pool)))
    coauthors = [
        f"{title_case(identities[j]['first'])} {title_case(identities[j]['last'])}"
        for j in team
    ]
    if rng.random() < 0.85:
        venue = rng.choice(lead["preferred_venues"])
    else:
        venue = rng.choice(VENUES[lead["topic"]])
    affiliation = affiliation_string(rng, ident["inst"]) if rng.random() < 0.75 else ""
    email = ident["email"] if ident["email"] and rng.random() < 0.6 else None
    words = TOPICS[ident["topic"]]
    return {
        "name": make_name(rng, ident),
        "coauthors": coauthors,
        "venue_id": venue,
        "inst_id": None,
        "affiliation": affiliation,
        "year": ident["career_year"] + rng.randint(0, 5),
        "title": title_case(" ".join(rng.choice(words) for _ in range(8))),
        "abstract": " ".join(rng.choice(words) for _ in range(30)),
        "email": email,
    }


def negative_pair(rng: random.Random, identities) -> dict:
    """Two different identities that would share a block key."""
    a = rng.choice(identities)
    hard = rng.random() < 0.2
    pool = [
        i for i in identities
        if i["idx"] != a["idx"] and (hard or i["topic"] != a["topic"])
    ]
    b = dict(rng.choice(pool))
    b["last"] = a["last"]
    if rng.random() < 0.4:
        b["first"] = a["first"]
    elif b["first"][0] != a["first"][0]:
        b["first"] = a["first"]
    b["email"] = None
    return {
        "label": 0,
        "a": appearance(rng, identities, a),
        "b": appearance(rng, identities, b),
    }


def main() -> None:
    rng = random.Random(20230117)
    identities = make_world(rng)
    pairs = []
    for _ in range(240):
        ident = rng.choice(identities)
        pairs.append(
            {
                "label": 1,
                "a": appearance(rng, identities, ident),
                "b": appearance(rng, identities, ident),
            }
        )
    for _ in range(240):
        pairs.append(negative_pair(rng, identities))
    out = Path(__file__).resolve().parent.parent / "src" / "stag" / "data" / "author_pairs.jsonl"
    with open(out, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
    print(f"wrote {len(pairs)} pairs to {out}")


if __name__ == "__main__":
    main()
