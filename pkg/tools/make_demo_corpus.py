#!/usr/bin/env python3
"""Generate the bundled demo inputs under demo/: corpus, venue KB, registry,
venue labels, and pipeline config. Deterministic; rerunning reproduces the
same files byte for byte.

The corpus exercises every pipeline stage: multi-source mentions with
shared DOIs/PDF hashes (dedup training), messy venue strings (venue
normalization), recurring author identities with homonyms (disambiguation),
bibliographies with noisy entries and citing sentences (citation linking
and influence), field-specific vocabularies (field-of-study training), and
a cluster of recent publication dates (recommendations).
"""

from __future__ import annotations

import json
import random
from datetime import date, timedelta
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "demo"
NOW = date(2023, 1, 15)

FIELDS = {
    "Computer Science": {
        "vocab": (
            "gradient descent neural network attention transformer embedding "
            "optimizer regularization classifier benchmark dataset convergence "
            "layer activation loss inference generalization pretraining token "
            "sparse kernel graph representation fine tuning distillation"
        ).split(),
        "venues": ["v-jmlr", "v-neurips", "v-icml"],
    },
    "Biology": {
        "vocab": (
            "protein enzyme genome sequencing expression pathway receptor "
            "mutation antibody cell tissue membrane kinase phenotype assay "
            "transcription metabolic binding ligand chromatin organoid strain "
            "culture vesicle plasmid"
        ).split(),
        "venues": ["v-cell", "v-plosbio", "v-nar"],
    },
    "Physics": {
        "vocab": (
            "galaxy stellar spectrum luminosity redshift telescope orbit "
            "photometry supernova cosmology accretion magnitude survey dust "
            "halo boson lattice plasma neutrino interferometer resonance "
            "quark detector calibration"
        ).split(),
        "venues": ["v-apj", "v-mnras", "v-prd"],
    },
    "Economics": {
        "vocab": (
            "market equilibrium inflation elasticity welfare taxation trade "
            "labor productivity monetary fiscal consumption investment growth "
            "unemployment policy demand supply auction incentive wage tariff "
            "household credit"
        ).split(),
        "venues": ["v-econometrica", "v-aer", "v-jpe"],
    },
}

VENUES = [
    {"id": "v-jmlr", "name": "Journal of Machine Learning Research",
     "variants": ["JMLR", "J. Mach. Learn. Res."], "issn": "1532-4435"},
    {"id": "v-neurips", "name": "Advances in Neural Information Processing Systems",
     "variants": ["NeurIPS", "NIPS"], "issn": None},
    {"id": "v-icml", "name": "International Conference on Machine Learning",
     "variants": ["ICML"], "issn": None},
    {"id": "v-cell", "name": "Cell", "variants": [], "issn": "0092-8674"},
    {"id": "v-plosbio", "name": "PLOS Biology", "variants": ["PLoS Biol."],
     "issn": "1545-7885"},
    {"id": "v-nar", "name": "Nucleic Acids Research",
     "variants": ["Nucleic Acids Res."], "issn": "0305-1048"},
    {"id": "v-apj", "name": "The Astrophysical Journal",
     "variants": ["Astrophys. J.", "ApJ"], "issn": "0004-637X"},
    {"id": "v-mnras", "name": "Monthly Notices of the Royal Astronomical Society",
     "variants": ["MNRAS"], "issn": "0035-8711"},
    {"id": "v-prd", "name": "Physical Review D", "variants": ["Phys. Rev. D"],
     "issn": "2470-0010"},
    {"id": "v-econometrica", "name": "Econometrica", "variants": [],
     "issn": "0012-9682"},
    {"id": "v-aer", "name": "American Economic Review",
     "variants": ["Am. Econ. Rev.", "AER"], "issn": "0002-8282"},
    {"id": "v-jpe", "name": "Journal of Political Economy",
     "variants": ["J. Polit. Econ."], "issn": "0022-3808"},
]

VENUE_LABELS = {
    "v-jmlr": "Computer Science,Mathematics",
    "v-neurips": "Computer Science",
    "v-icml": "Computer Science,Mathematics",
    "v-cell": "Biology",
    "v-plosbio": "Biology",
    "v-nar": "Biology",
    "v-apj": "Physics",
    "v-mnras": "Physics",
    "v-prd": "Physics",
    "v-econometrica": "Economics",
    "v-aer": "Economics",
    "v-jpe": "Economics",
}

INSTITUTIONS = [
    {"id": "ror-01uw", "name": "University of Washington",
     "aliases": ["UW", "Univ. of Washington"], "country": "United States", "city": "Seattle"},
    {"id": "ror-02st", "name": "Stanford University", "aliases": ["Stanford"],
     "country": "United States", "city": "Stanford"},
    {"id": "ror-03mp", "name": "Max Planck Institute for Informatics",
     "aliases": ["MPI Informatics", "MPI-INF"], "country": "Germany", "city": "Saarbruecken"},
    {"id": "ror-04ut", "name": "University of Tokyo", "aliases": ["Todai"],
     "country": "Japan", "city": "Tokyo"},
    {"id": "ror-05eth", "name": "ETH Zurich",
     "aliases": ["Swiss Federal Institute of Technology Zurich"],
     "country": "Switzerland", "city": "Zurich"},
    {"id": "ror-06ts", "name": "Tsinghua University", "aliases": [],
     "country": "China", "city": "Beijing"},
    {"id": "ror-07cam", "name": "University of Cambridge", "aliases": ["Cambridge"],
     "country": "United Kingdom", "city": "Cambridge"},
    {"id": "ror-08cmu", "name": "Carnegie Mellon University", "aliases": ["CMU"],
     "country": "United States", "city": "Pittsburgh"},
    {"id": "ror-09mit", "name": "Massachusetts Institute of Technology",
     "aliases": ["MIT"], "country": "United States", "city": "Cambridge"},
    {"id": "ror-10ox", "name": "University of Oxford", "aliases": ["Oxford"],
     "country": "United Kingdom", "city": "Oxford"},
]

AFFILIATION_STYLES = [
    "Dept. of Computer Science, {name}, {city}",
    "{name}, {city}",
    "School of Engineering, {name}, {city}",
    "{alias}",
    "Institute for Advanced Study, {name}",
]

FIRST = [
    "James", "Mary", "John", "Patricia", "Robert", "Jennifer", "Michael",
    "Linda", "William", "Elizabeth", "Wei", "Li", "Hiroshi", "Yuki",
    "Carlos", "Maria", "Pierre", "Sophie", "Hans", "Greta", "Ivan", "Olga",
    "Amara", "Kofi", "Priya", "Raj", "Mei", "Jun", "Fatima", "Omar",
]
LAST = [
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller",
    "Davis", "Wang", "Chen", "Tanaka", "Sato", "Mueller", "Schmidt",
    "Dubois", "Laurent", "Petrov", "Ivanov", "Rossi", "Kim", "Park",
    "Nguyen", "Kumar", "Singh", "Patel", "Ali", "Hassan", "Okafor",
]


def title_case(words: list[str]) -> str:
    return " ".join(w.capitalize() for w in words)


def make_identities(rng: random.Random):
    identities = []
    used = set()
    field_names = list(FIELDS)
    for i in range(60):
        field = field_names[i % len(field_names)]
        while True:
            first, last = rng.choice(FIRST), rng.choice(LAST)
            if (first, last) not in used:
                used.add((first, last))
                break
        inst = rng.choice(INSTITUTIONS)
        identities.append(
            {
                "first": first,
                "last": last,
                "field": field,
                "inst": inst,
                "email": (
                    f"{first.lower()}.{last.lower()}@example.edu"
                    if rng.random() < 0.35
                    else None
                ),
            }
        )
    # Homonym pairs: same first+last, different field and institution.
    for k in range(6):
        src = identities[k * 7]
        other_fields = [f for f in field_names if f != src["field"]]
        identities.append(
            {
                "first": src["first"],
                "last": src["last"],
                "field": other_fields[k % len(other_fields)],
                "inst": INSTITUTIONS[(k * 3 + 1) % len(INSTITUTIONS)],
                "email": None,
            }
        )
    # Collaboration cliques and venue loyalty: authors keep working with the
    # same group and publish mostly in one or two venues.
    by_field: dict[str, list[int]] = {}
    for idx, ident in enumerate(identities):
        by_field.setdefault(ident["field"], []).append(idx)
    for idx, ident in enumerate(identities):
        peers = [j for j in by_field[ident["field"]] if j != idx]
        ident["clique"] = rng.sample(peers, min(4, len(peers)))
        venues = FIELDS[ident["field"]]["venues"]
        ident["preferred_venues"] = rng.sample(venues, rng.choice([1, 2]))
    return identities


def affiliation_string(rng: random.Random, inst: dict) -> str:
    style = rng.choice(AFFILIATION_STYLES)
    return style.format(
        name=inst["name"],
        city=inst["city"],
        alias=(inst["aliases"][0] if inst["aliases"] else inst["name"]),
    )


def author_name(rng: random.Random, identity: dict, initialed: bool) -> str:
    if initialed:
        return f"{identity['first'][0]}. {identity['last']}"
    return f"{identity['first']} {identity['last']}"


def make_papers(rng: random.Random, identities):
    papers = []
    lead_order = list(range(len(identities)))
    rng.shuffle(lead_order)
    for i in range(200):
        lead_idx = lead_order[i % len(lead_order)]
        lead = identities[lead_idx]
        field = lead["field"]
        vocab = FIELDS[field]["vocab"]
        if rng.random() < 0.85:
            venue_id = rng.choice(lead["preferred_venues"])
        else:
            venue_id = rng.choice(FIELDS[field]["venues"])
        n_title = rng.randint(6, 10)
        title_words = [rng.choice(vocab) for _ in range(n_title)]
        # Some papers share a leading title phrase with an earlier same-field
        # paper (series titles), which exercises blocking on non-duplicates.
        same_field_prior = [p for p in papers if p["field"] == field]
        if same_field_prior and rng.random() < 0.3:
            prior = rng.choice(same_field_prior)
            title_words = prior["title"].lower().replace(":", "").split()[:3] + title_words[3:]
        title = title_case(title_words)
        if rng.random() < 0.3:
            subtitle = title_case([rng.choice(vocab) for _ in range(3)])
            title = f"{title}: {subtitle}"
        abstract = " ".join(rng.choice(vocab) for _ in range(rng.randint(25, 40)))
        team = [lead_idx] + rng.sample(lead["clique"], rng.randint(1, 3))
        if i % 10 == 0 and i >= 40:
            pub = NOW - timedelta(days=rng.randint(0, 55))
        else:
            pub = date(rng.randint(2018, 2022), rng.randint(1, 12), rng.randint(1, 28))
        papers.append(
            {
                "key": f"P{i:03d}",
                "field": field,
                "venue_id": venue_id,
                "title": title,
                "abstract": abstract,
                "team": team,
                "date": pub,
                "doi": f"10.{1000 + i}/demo.{i:03d}" if rng.random() < 0.92 else None,
                "pdf": f"sha-{i:03d}-{rng.randrange(16**8):08x}",
                "cites": [],
            }
        )
    for i, paper in enumerate(papers):
        if i < 8:
            continue
        same_field = [j for j in range(i) if papers[j]["field"] == paper["field"]]
        n_cites = min(len(same_field), rng.randint(3, 8))
        paper["cites"] = sorted(rng.sample(same_field, n_cites))
    return papers


def venue_raw_string(rng: random.Random, venue_id: str, year: int) -> str:
    venue = next(v for v in VENUES if v["id"] == venue_id)
    forms = [venue["name"]] + list(venue["variants"])
    style = rng.random()
    base = rng.choice(forms)
    if style < 0.5:
        return base
    if style < 0.7:
        return f"{base} {year}"
    if style < 0.85 and venue["variants"]:
        acro = venue["variants"][0]
        return f"Proceedings of the {rng.randint(10, 40)}th {venue['name']} ({acro})"
    return f"{base}, vol. {rng.randint(1, 60)}"


def bib_entry(rng: random.Random, target: dict, identities) -> dict:
    title = target["title"]
    if rng.random() < 0.3:
        title = title[: max(10, int(len(title) * rng.uniform(0.7, 0.95)))]
    names = []
    for idx in target["team"]:
        ident = identities[idx]
        names.append(author_name(rng, ident, initialed=rng.random() < 0.5))
    entry = {
        "raw": f"{', '.join(names)}. {title}. {target['date'].year}.",
        "title": title,
        "authors": names,
        "year": target["date"].year,
    }
    if rng.random() < 0.4:
        entry["venue"] = venue_raw_string(rng, target["venue_id"], target["date"].year)
    return entry


CUE_SENTENCES = [
    "We build upon the framework of [{k}] for our estimator.",
    "Following [{k}], the calibration step is unchanged.",
    "Our architecture is inspired by [{k}].",
]
FIG_SENTENCES = [
    "Table {n} compares our results against [{k}].",
    "As shown in Figure {n}, we outperform [{k}] on all splits.",
]
PLAIN_SENTENCES = [
    "The baseline of [{k}] is evaluated under identical conditions.",
    "A related approach appears in [{k}].",
    "The dataset preparation mirrors [{k}].",
    "Results of [{k}] motivate the ablation in section four.",
]


def body_sentences(rng: random.Random, n_bib: int) -> list[dict]:
    sentences = []
    for bib_idx in range(n_bib):
        r = rng.random()
        if r < 0.15:
            continue
        if r < 0.30 and n_bib > 1:
            other = rng.choice([x for x in range(n_bib) if x != bib_idx])
            sentences.append(
                {
                    "text": f"Both [{bib_idx}] and [{other}] study this regime.",
                    "cites": [bib_idx, other],
                }
            )
            continue
        style = rng.random()
        if style < 0.12:
            template = rng.choice(CUE_SENTENCES)
            text = template.format(k=bib_idx)
        elif style < 0.22:
            template = rng.choice(FIG_SENTENCES)
            text = template.format(k=bib_idx, n=rng.randint(1, 6))
        else:
            template = rng.choice(PLAIN_SENTENCES)
            text = template.format(k=bib_idx)
        sentences.append({"text": text, "cites": [bib_idx]})
        if rng.random() < 0.25:
            sentences.append(
                {
                    "text": f"We reuse the protocol of [{bib_idx}] without modification.",
                    "cites": [bib_idx],
                }
            )
    return sentences


def perturb_title(rng: random.Random, title: str, style: int) -> str:
    if style == 0:
        return title.upper()
    if style == 1:
        return title.lower().replace(",", "") + "."
    if style == 2 and ":" in title:
        return title.split(":")[0].strip()
    if style == 3:
        return title.replace(" ", "  ", 1) + "!"
    return title


def mention_json(rng: random.Random, paper: dict, identities, variant: int, recent: bool) -> dict:
    title = paper["title"] if variant == 0 else perturb_title(rng, paper["title"], rng.randint(0, 3))
    authors = []
    initial_all = variant > 0 and rng.random() < 0.5
    for idx in paper["team"]:
        ident = identities[idx]
        name = author_name(rng, ident, initialed=initial_all or rng.random() < 0.15)
        entry = {"name": name}
        if variant == 0 or rng.random() < 0.8:
            entry["affiliation"] = affiliation_string(rng, ident["inst"])
        if ident["email"] and rng.random() < 0.7:
            entry["email"] = ident["email"]
        authors.append(entry)
    year_only = variant > 0 and not recent and rng.random() < 0.25
    obj: dict = {
        "title": title,
        "authors": authors,
        "venue": venue_raw_string(rng, paper["venue_id"], paper["date"].year),
        "date": str(paper["date"].year) if year_only else paper["date"].isoformat(),
    }
    if variant == 0 or rng.random() < 0.75:
        obj["abstract"] = paper["abstract"]
    external = {}
    if paper["doi"]:
        external["DOI"] = paper["doi"]
    if variant == 0 and rng.random() < 0.25:
        external["ArXiv"] = f"{rng.randint(1801, 2212)}.{rng.randint(10000, 99999)}"
    if external:
        obj["externalIds"] = external
    obj["pdfSha"] = paper["pdf"]
    return obj


def main() -> None:
    rng = random.Random(42)
    OUT.mkdir(parents=True, exist_ok=True)
    identities = make_identities(rng)
    papers = make_papers(rng, identities)

    lines = []
    sources = ["crossref", "arxiv-harvest", "pubmed", "publisher-feed"]
    for i, paper in enumerate(papers):
        recent = (NOW - paper["date"]).days <= 60
        n_sources = 1 + (rng.random() < 0.75) + (rng.random() < 0.35)
        chosen = rng.sample(sources, n_sources)
        for variant, source in enumerate(chosen):
            obj = mention_json(rng, paper, identities, variant, recent)
            if variant == 0 and paper["cites"]:
                bib = [bib_entry(rng, papers[j], identities) for j in paper["cites"]]
                obj["bibliography"] = bib
                obj["bodySentences"] = body_sentences(rng, len(bib))
            lines.append((source, obj))
    rng.shuffle(lines)

    corpus_dir = OUT / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for source in sources:
        with open(corpus_dir / f"{source}.jsonl", "w", encoding="utf-8") as fh:
            for line_source, obj in lines:
                if line_source == source:
                    fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False))
                    fh.write("\n")

    with open(OUT / "venues.jsonl", "w", encoding="utf-8") as fh:
        for venue in VENUES:
            fh.write(json.dumps(venue, sort_keys=True))
            fh.write("\n")
    with open(OUT / "institutions.jsonl", "w", encoding="utf-8") as fh:
        for inst in INSTITUTIONS:
            fh.write(json.dumps(inst, sort_keys=True))
            fh.write("\n")
    with open(OUT / "venue_labels.tsv", "w", encoding="utf-8") as fh:
        for venue_id, labels in VENUE_LABELS.items():
            fh.write(f"{venue_id}\t{labels}\n")
    (OUT / "api_keys.txt").write_text("demo-key-1\n", encoding="utf-8")
    (OUT / "pipeline.toml").write_text(
        """# Demo pipeline configuration.

[input]
corpus = "corpus"
venue_kb = "venues.jsonl"
institution_registry = "institutions.jsonl"
venue_labels = "venue_labels.tsv"

[output]
snapshot_dir = "../out/snapshots"
release_id = "2023-01-15"
stage_dir = "../out/stages"

[dedup]
threshold = 0.8
min_positives = 50

[citelink]
threshold = 0.7

[authors]
threshold = 0.75

[affiliation]
threshold = 0.5

[embedding]
dim = 256

[run]
seed = 0
now = "2023-01-15"
workers = 1

[service]
api_keys = ["demo-key-1"]
""",
        encoding="utf-8",
    )
    n_mentions = len(lines)
    print(f"wrote {n_mentions} mentions for {len(papers)} papers to {corpus_dir}")


if __name__ == "__main__":
    main()
