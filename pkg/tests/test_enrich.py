import itertools

import pytest

from stag.citelink import CitationEdge
from stag.dedup import Paper
from stag.enrich import (
    FIELD_LABELS,
    NOT_APPLICABLE,
    FosModel,
    assign_embeddings,
    classify_fos,
    classify_influential,
    load_cue_phrases,
    mark_influential_citations,
    train_fos,
)
from stag.errors import TrainingError
from synth import make_fos_corpus


def test_field_label_inventory():
    assert len(FIELD_LABELS) == 23
    assert "Education" in FIELD_LABELS
    assert "Law" in FIELD_LABELS
    assert "Linguistics" in FIELD_LABELS
    assert NOT_APPLICABLE == "n/a"


# --- field of study ----------------------------------------------------------


@pytest.fixture(scope="module")
def fos_setup():
    venue_labels, papers = make_fos_corpus(5)
    held = [p for i, p in enumerate(papers) if i % 5 == 0]
    train = [p for i, p in enumerate(papers) if i % 5 != 0]
    model = train_fos(venue_labels, train)
    return venue_labels, model, held


def test_train_fos_separable_fields(fos_setup):
    venue_labels, model, held = fos_setup
    tp = fp = fn = 0
    for paper in held:
        want = venue_labels[paper.venue_id]
        got = classify_fos(paper, model) - {NOT_APPLICABLE}
        tp += len(want & got)
        fp += len(got - want)
        fn += len(want - got)
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall)
    assert f1 >= 0.95


def test_fos_vocabulary_cap_enforced():
    venue_labels, papers = make_fos_corpus(6, papers_per_venue=10)
    model = train_fos(venue_labels, papers, max_vocabulary=500)
    assert model.vectorizer.dim <= 500
    default_model_cap = 300_000
    from stag.vectorize import MAX_VOCABULARY

    assert MAX_VOCABULARY == default_model_cap


def test_train_fos_unlabeled_venues_ignored():
    venue_labels, papers = make_fos_corpus(7, papers_per_venue=10)
    orphan = Paper(corpus_id=9999, member_mentions=["x"], title="orphan words",
                   venue_id="unlabeled-venue")
    model = train_fos(venue_labels, papers + [orphan])
    assert model is not None  # Training simply skips the orphan.


def test_train_fos_single_label_errors():
    venue_labels, papers = make_fos_corpus(8, papers_per_venue=10)
    only_med = {k: v for k, v in venue_labels.items() if v == {"Medicine"}}
    med_papers = [p for p in papers if p.venue_id in only_med]
    with pytest.raises(TrainingError):
        train_fos(only_med, med_papers)


def test_train_fos_rare_label_excluded():
    venue_labels, papers = make_fos_corpus(9, papers_per_venue=10)
    venue_labels = dict(venue_labels)
    venue_labels["rare-venue"] = {"Art"}
    rare = Paper(corpus_id=5000, member_mentions=["r"], title="rare venue paper",
                 venue_id="rare-venue")
    model = train_fos(venue_labels, papers + [rare])
    assert "Art" in model.excluded
    assert "Art" not in model.labels


def test_train_fos_unknown_label_rejected():
    with pytest.raises(TrainingError):
        train_fos({"v": {"Alchemy"}}, [])


def test_classify_fos_empty_text_is_na(fos_setup):
    _, model, _ = fos_setup
    blank = Paper(corpus_id=1, member_mentions=["m"], title="", abstract="")
    assert classify_fos(blank, model) == {NOT_APPLICABLE}


def test_classify_fos_multilabel_possible():
    venue_labels = {
        "v-both": {"Medicine", "Computer Science"},
        "v-med": {"Medicine"},
        "v-cs": {"Computer Science"},
    }
    import random

    rng = random.Random(4)
    med_words = ["clinic%02d" % i for i in range(20)]
    cs_words = ["kernel%02d" % i for i in range(20)]
    papers = []
    cid = 0
    for venue, words in (("v-med", med_words), ("v-cs", cs_words)):
        for _ in range(20):
            cid += 1
            papers.append(Paper(corpus_id=cid, member_mentions=[f"m{cid}"],
                                title=" ".join(rng.choice(words) for _ in range(8)),
                                venue_id=venue))
    for _ in range(20):
        cid += 1
        papers.append(Paper(
            corpus_id=cid, member_mentions=[f"m{cid}"],
            title=" ".join(rng.choice(med_words + cs_words) for _ in range(8)),
            venue_id="v-both"))
    model = train_fos(venue_labels, papers)
    mixed = Paper(corpus_id=0, member_mentions=["m"], title=" ".join(
        med_words[:4] + cs_words[:4]))
    got = classify_fos(mixed, model)
    assert got == {"Medicine", "Computer Science"}


def test_fos_model_round_trip(fos_setup, tmp_path):
    _, model, held = fos_setup
    path = tmp_path / "fos.json"
    model.save(path)
    restored = FosModel.load(path)
    for paper in held[:10]:
        assert classify_fos(paper, restored) == classify_fos(paper, model)


# --- influential citations ------------------------------------------------------


def edge_with(contexts, counts):
    return CitationEdge(citing=1, cited=2, contexts=contexts,
                        context_cite_counts=counts)


def test_influential_truth_table():
    cue_sentence = "This work is inspired by [3]."
    fig_sentence = "Table 2 compares against [3]."
    plain = "A related method appears in [3]."
    cases = []
    for shared, solo_count, cue, fig in itertools.product(
        (False, True), (0, 2, 3), (False, True), (False, True)
    ):
        contexts = []
        counts = []
        for _ in range(solo_count):
            contexts.append(plain)
            counts.append(1)
        if cue:
            contexts.append(cue_sentence)
            counts.append(2)
        if fig:
            contexts.append(fig_sentence)
            counts.append(2)
        expected = (not shared) and (solo_count >= 3 or cue or fig)
        cases.append((shared, contexts, counts, expected))
    assert len(cases) >= 16
    for shared, contexts, counts, expected in cases:
        edge = edge_with(contexts, counts)
        citing_authors = {1, 2} if shared else {1}
        cited_authors = {2, 3} if shared else {4}
        assert classify_influential(edge, citing_authors, cited_authors) == expected


def test_influential_paper_anchored_cases():
    # Shared author disqualifies regardless of contexts.
    strong = edge_with(["We build upon [1]."], [1])
    assert classify_influential(strong, {7}, {7, 9}) is False
    # Three solo-citing sentences qualify.
    solo3 = edge_with(["s1 [1].", "s2 [1].", "s3 [1]."], [1, 1, 1])
    assert classify_influential(solo3, {1}, {2}) is True
    # A cue phrase alone qualifies.
    cue = edge_with(["Our approach is inspired by [1]."], [2])
    assert classify_influential(cue, {1}, {2}) is True
    # Two solo sentences, no cue, no figure: not influential.
    solo2 = edge_with(["s1 [1].", "s2 [1]."], [1, 1])
    assert classify_influential(solo2, {1}, {2}) is False


def test_cue_matching_word_boundaries():
    assert classify_influential(edge_with(["We extend [1]."], [2]), {1}, {2})
    # "extended" does not match the bare cue "extend" on word boundaries.
    assert not classify_influential(edge_with(["An extended variant of [1]."], [2]), {1}, {2})
    # Case-insensitive.
    assert classify_influential(edge_with(["FOLLOWING [1], we train."], [2]), {1}, {2})


def test_figure_table_patterns():
    assert classify_influential(edge_with(["See Fig. 4 versus [1]."], [2]), {1}, {2})
    assert classify_influential(edge_with(["Figure 12 shows [1]."], [2]), {1}, {2})
    assert not classify_influential(edge_with(["The figure shows [1]."], [2]), {1}, {2})


def test_mark_influential_citations_in_place():
    edges = [
        CitationEdge(citing=1, cited=2, contexts=["We build upon [0]."],
                     context_cite_counts=[1]),
        CitationEdge(citing=1, cited=3, contexts=["Ref [0]."],
                     context_cite_counts=[1]),
    ]
    mark_influential_citations(edges, {1: {10}, 2: {20}, 3: {10, 30}})
    assert edges[0].is_influential is True
    assert edges[1].is_influential is False  # shared author 10


def test_load_cue_phrases_bundled():
    phrases = load_cue_phrases()
    assert "inspired by" in phrases
    assert "builds upon" in phrases


# --- embeddings -------------------------------------------------------------------


def test_assign_embeddings():
    papers = [
        Paper(corpus_id=1, member_mentions=["a"], title="some title",
              abstract="words here"),
        Paper(corpus_id=2, member_mentions=["b"], title="", abstract=""),
        Paper(corpus_id=3, member_mentions=["c"], title="some title",
              abstract="words here"),
    ]
    dim = assign_embeddings(papers, 64)
    assert dim == 64
    import numpy as np

    assert abs(np.linalg.norm(papers[0].embedding) - 1.0) < 1e-9
    assert not papers[1].embedding.any()
    assert np.array_equal(papers[0].embedding, papers[2].embedding)
    before = papers[0].embedding.copy()
    assign_embeddings(papers, 64)
    assert np.array_equal(papers[0].embedding, before)
