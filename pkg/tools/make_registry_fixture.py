#!/usr/bin/env python3
"""Generate the institution-registry fixture used by the acceptance suite.

Writes tests/fixtures/registry.jsonl (~400 ROR-like records) plus
tests/fixtures/affiliation_queries.jsonl mapping raw affiliation strings to
their true institution ids. Deterministic.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

KINDS = ["University of {}", "{} University", "{} Institute of Technology",
         "{} State University", "{} Research Institute", "{} National Laboratory",
         "{} College", "{} Polytechnic University"]
PLACES = [
    "Ashford", "Brookfield", "Clearwater", "Dunmore", "Eastvale", "Fairbanks",
    "Glenwood", "Harborview", "Ironwood", "Jasperton", "Kingsley", "Lakeshore",
    "Maplewood", "Northgate", "Oakhurst", "Pinecrest", "Quarryville", "Riverton",
    "Stonebridge", "Thornton", "Umberland", "Vantage", "Westbrook", "Yorkdale",
    "Zephyrhills", "Alderbrook", "Birchwood", "Cedarton", "Dovershire", "Elmsworth",
    "Foxglove", "Greenfield", "Hollybrook", "Inverness", "Junewood", "Kentmere",
    "Larkspur", "Mossfield", "Nettlebay", "Ortonville", "Pemberton", "Quailridge",
    "Rosedale", "Silverlake", "Tanglewood", "Uplandville", "Verdemont", "Willowmere",
    "Arborfield", "Bellhaven",
]
COUNTRIES = ["United States", "United Kingdom", "Germany", "Japan", "Canada",
             "Australia", "France", "Netherlands", "Sweden", "India"]
DEPTS = ["Dept. of Physics", "Department of Biology", "School of Medicine",
         "Faculty of Law", "Dept. of Computer Science", "Institute for Data Science",
         "School of Economics", "Division of Chemistry"]


def main() -> None:
    rng = random.Random(7171)
    out_dir = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)

    records = []
    seen_names = set()
    i = 0
    while len(records) < 400:
        i += 1
        name = rng.choice(KINDS).format(rng.choice(PLACES))
        if name in seen_names:
            continue
        seen_names.add(name)
        acronym = "".join(w[0] for w in name.split() if w[0].isupper())
        aliases = []
        if rng.random() < 0.5 and len(acronym) >= 2:
            aliases.append(acronym)
        if rng.random() < 0.3:
            aliases.append(name.replace("University", "Univ."))
        records.append(
            {
                "id": f"ror-{i:04d}",
                "name": name,
                "aliases": aliases,
                "country": rng.choice(COUNTRIES),
                "city": rng.choice(PLACES),
            }
        )
    with open(out_dir / "registry.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")

    queries = []
    for record in rng.sample(records, 120):
        style = rng.random()
        if style < 0.4:
            raw = f"{rng.choice(DEPTS)}, {record['name']}, {record['city']}"
        elif style < 0.7:
            raw = f"{record['name']}, {record['city']}, {record['country']}"
        elif style < 0.85 and record["aliases"]:
            raw = f"{rng.choice(DEPTS)}, {record['aliases'][0]}"
        else:
            raw = record["name"]
        queries.append({"raw": raw, "inst_id": record["id"]})
    with open(out_dir / "affiliation_queries.jsonl", "w", encoding="utf-8") as fh:
        for query in queries:
            fh.write(json.dumps(query, sort_keys=True))
            fh.write("\n")
    print(f"wrote {len(records)} registry records and {len(queries)} queries")


if __name__ == "__main__":
    main()
