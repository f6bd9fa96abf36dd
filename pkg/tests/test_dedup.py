import numpy as np
import pytest

from oracles import brute_force_cluster_block
from stag.dedup import (
    PairScoreModel,
    block_key,
    cluster_block,
    dedupe_corpus,
    fit_pair_model,
    make_training_pairs,
    pair_features,
)
from stag.errors import TrainingError
from stag.ingest import AuthorMention, PaperMention
from synth import make_perturbed_corpus, make_shared_prefix_blocks


def mention(mid, title="", source="s", doi=None, pdf=None, authors=(), year=None,
            venue="", abstract=""):
    ids = {"DOI": doi} if doi else {}
    return PaperMention(
        mention_id=mid,
        source=source,
        title=title,
        authors=[AuthorMention(a, i) for i, a in enumerate(authors)],
        venue_raw=venue,
        pub_date=f"{year}-01-01" if year else "",
        abstract=abstract,
        external_ids=ids,
        pdf_hash=pdf,
    )


@pytest.fixture(scope="module")
def trained_model():
    mentions, _ = make_perturbed_corpus(77, n_papers=200, max_mentions=3)
    pairs, labels = make_training_pairs(mentions)
    return fit_pair_model(pairs, labels)


def test_block_key_examples():
    keys = block_key(mention("m", title="A Survey of Deep Learning"))
    assert "survey deep learning" in keys
    assert "asodl" in keys


def test_block_key_doi_blocks_unrelated_titles():
    a = block_key(mention("a", title="Completely Different Words", doi="10.1/x"))
    b = block_key(mention("b", title="Another Unrelated Phrase Here", doi="10.1/x"))
    assert "doi:10.1/x" in a and "doi:10.1/x" in b


def test_block_key_normalization_invariance():
    a = block_key(mention("a", title="Deep Learning: A Survey!"))
    b = block_key(mention("b", title="deep LEARNING -- a survey"))
    assert a & b


def test_block_key_empty_title_uses_ids_only():
    keys = block_key(mention("a", title="", doi="10.9/z"))
    assert keys == {"doi:10.9/z"}


def test_pair_features_identity_and_symmetry():
    a = mention("a", title="Same Title Here", authors=["Jo Roe", "Al Poe"],
                year=2020, venue="VLDB", abstract="words in common", doi="10.1/q")
    b = mention("b", title="Same Title Here", authors=["Jo Roe", "Al Poe"],
                year=2020, venue="VLDB", abstract="words in common", doi="10.1/q",
                source="t")
    f = pair_features(a, b)
    names = dict(zip(
        ["title_edit_ratio", "title_token_jaccard", "abstract_token_jaccard",
         "abstract_both_present", "author_last_name_jaccard",
         "first_author_edit_ratio", "venue_edit_ratio", "year_diff_0"],
        f[:8],
    ))
    for key in ["title_edit_ratio", "title_token_jaccard", "abstract_token_jaccard",
                "author_last_name_jaccard", "first_author_edit_ratio",
                "venue_edit_ratio", "year_diff_0"]:
        assert names[key] == 1.0
    assert np.array_equal(f, pair_features(b, a))


def test_pair_features_doi_conflict_flag():
    a = mention("a", title="T", doi="10.1/a")
    b = mention("b", title="T", doi="10.1/b")
    f = pair_features(a, b)
    assert f[11] == -1.0


def test_pair_features_year_buckets():
    base = dict(title="T")
    f01 = pair_features(mention("a", year=2020, **base), mention("b", year=2021, **base))
    assert f01[8] == 1.0
    f2 = pair_features(mention("a", year=2018, **base), mention("b", year=2021, **base))
    assert f2[9] == 1.0
    fu = pair_features(mention("a", **base), mention("b", year=2021, **base))
    assert fu[10] == 1.0


def test_make_training_pairs_positive_and_negative_construction():
    mentions = [
        mention("a", title="Shared Prefix Words One", doi="10.1/x", source="s1"),
        mention("b", title="Shared Prefix Words Two", doi="10.1/x", source="s2"),
        mention("c", title="Shared Prefix Words Three", doi="10.1/y", source="s1"),
    ]
    pairs, labels = make_training_pairs(mentions, min_positives=1)
    positive = [(p[0].mention_id, p[1].mention_id) for p, l in zip(pairs, labels) if l == 1]
    negative = [(p[0].mention_id, p[1].mention_id) for p, l in zip(pairs, labels) if l == 0]
    assert positive == [("a", "b")]
    assert ("a", "c") in negative and ("b", "c") in negative


def test_make_training_pairs_requires_positives():
    mentions = [
        mention("a", title="Unique Title Alpha Beta", doi="10.1/a"),
        mention("b", title="Unique Title Alpha Gamma", doi="10.1/b"),
    ]
    with pytest.raises(TrainingError):
        make_training_pairs(mentions)


def test_fit_pair_model_separable_reaches_full_accuracy():
    dup_a = mention("a", title="An Identical Paper Title", authors=["Jo Roe"],
                    year=2020, source="s1", doi="10.1/x")
    dup_b = mention("b", title="An Identical Paper Title", authors=["Jo Roe"],
                    year=2020, source="s2", doi="10.1/x")
    other = mention("c", title="An Identical Different Work", authors=["Al Poe"],
                    year=2015, source="s1", doi="10.1/z")
    pairs = [(dup_a, dup_b), (dup_a, other), (dup_b, other)]
    labels = [1, 0, 0]
    model = fit_pair_model(pairs, labels)
    for (x, y), label in zip(pairs, labels):
        predicted = model.score(pair_features(x, y)) >= 0.5
        assert predicted == bool(label)
    assert model.train_auc == 1.0


def test_fit_pair_model_duplicated_set_gives_same_model(trained_model):
    mentions, _ = make_perturbed_corpus(88, n_papers=120, max_mentions=3)
    pairs, labels = make_training_pairs(mentions)
    m1 = fit_pair_model(pairs, labels)
    m2 = fit_pair_model(pairs + pairs, labels + labels)
    assert np.allclose(m1.weights, m2.weights, atol=1e-6)
    assert abs(m1.bias - m2.bias) < 1e-6


def test_fit_pair_model_shuffled_labels_auc_near_half():
    import random

    mentions, _ = make_perturbed_corpus(99, n_papers=150, max_mentions=3)
    pairs, labels = make_training_pairs(mentions)
    rng = random.Random(3)
    shuffled = list(labels)
    rng.shuffle(shuffled)
    model = fit_pair_model(pairs, shuffled)
    assert abs(model.train_auc - 0.5) <= 0.1


def test_model_json_round_trip(trained_model):
    restored = PairScoreModel.from_json(trained_model.to_json())
    assert restored.feature_names == trained_model.feature_names
    assert np.array_equal(restored.weights, trained_model.weights)
    assert restored.bias == trained_model.bias
    assert restored.threshold == trained_model.threshold


def test_cluster_block_all_singletons_when_below_threshold(trained_model):
    ms = [
        mention("a", title="Totally Unrelated Alpha Words Here"),
        mention("b", title="Some Other Disjoint Title Text"),
    ]
    parts = cluster_block(ms, trained_model, 0.8)
    assert sorted(len(p) for p in parts) == [1, 1]


def test_cluster_block_transitive_chain(trained_model):
    a = mention("a", title="Chained Cluster Paper", doi="10.5/c", source="s1")
    b = mention("b", title="Chained Cluster Paper", doi="10.5/c", source="s2")
    c = mention("c", title="Chained Cluster Paper", doi="10.5/c", source="s3")
    parts = cluster_block([a, b, c], trained_model, 0.8)
    assert len(parts) == 1 and len(parts[0]) == 3


def test_cluster_block_matches_oracle_on_random_blocks(trained_model):
    blocks = make_shared_prefix_blocks(5, n_blocks=10, max_size=60)
    for mentions, _ in blocks:
        ours = {
            frozenset(m.mention_id for m in grp)
            for grp in cluster_block(mentions, trained_model, 0.8)
        }
        assert ours == brute_force_cluster_block(mentions, trained_model, 0.8)


def test_dedupe_corpus_unique_titles_stay_apart(trained_model):
    mentions, _ = make_perturbed_corpus(15, n_papers=40, max_mentions=1)
    result = dedupe_corpus(mentions, trained_model)
    assert len(result.papers) == len(mentions)


def test_dedupe_corpus_three_sources_one_paper(trained_model):
    ms = [
        mention("a", title="One Paper Three Sources", doi="10.7/p", source="s1",
                abstract="shared abstract words", year=2021),
        mention("b", title="One Paper, Three Sources!", doi="10.7/p", source="s2",
                year=2021),
        mention("c", title="ONE PAPER THREE SOURCES", doi="10.7/p", source="s3",
                abstract="shared abstract words", year=2021),
    ]
    result = dedupe_corpus(ms, trained_model)
    assert len(result.papers) == 1
    paper = result.papers[0]
    assert paper.member_mentions == ["a", "b", "c"]
    assert paper.external_ids["DOI"] == "10.7/p"


def test_dedupe_corpus_deterministic(trained_model):
    mentions, _ = make_perturbed_corpus(123, n_papers=60, max_mentions=3)
    r1 = dedupe_corpus(mentions, trained_model)
    r2 = dedupe_corpus(list(mentions), trained_model)
    assert r1.mention_to_corpus_id == r2.mention_to_corpus_id
    assert [p.title for p in r1.papers] == [p.title for p in r2.papers]


def test_dedupe_corpus_partition_property(trained_model):
    mentions, _ = make_perturbed_corpus(321, n_papers=50, max_mentions=3)
    result = dedupe_corpus(mentions, trained_model)
    assigned = sorted(result.mention_to_corpus_id)
    assert assigned == sorted(m.mention_id for m in mentions)
    members = sorted(mid for p in result.papers for mid in p.member_mentions)
    assert members == assigned


def test_dedupe_canonical_selection(trained_model):
    long_title = "Canonical Selection Sample Paper: With Subtitle"
    ms = [
        mention("a", title="Canonical Selection Sample Paper", doi="10.8/c",
                source="s1", year=2020, venue="Venue A"),
        mention("b", title=long_title, doi="10.8/c", source="s2", year=2019,
                venue="Venue A", abstract="the longest abstract text here"),
        mention("c", title="Canonical Selection Sample Paper", doi="10.8/c",
                source="s3", year=2021, venue="Venue B"),
    ]
    result = dedupe_corpus(ms, trained_model)
    paper = result.papers[0]
    assert paper.title == long_title
    assert paper.abstract == "the longest abstract text here"
    assert paper.venue_raw == "Venue A"
    assert paper.pub_date == "2019-01-01"


def test_cluster_block_doi_conflict_veto_direct_union():
    model = PairScoreModel(
        feature_names=[], weights=np.zeros(18), bias=10.0, threshold=0.5
    )
    a = mention("a", title="Conflicted Paper Title", doi="10.1/a", source="s1")
    c = mention("c", title="Conflicted Paper Title", doi="10.1/b", source="s3")
    parts = cluster_block([a, c], model, 0.5)
    assert len(parts) == 2


def test_dedupe_doi_conflict_logged():
    # Conflicting DOIs can only co-cluster through a DOI-less bridge mention;
    # the merged paper keeps the majority DOI and logs a violation.
    model = PairScoreModel(
        feature_names=[], weights=np.zeros(18), bias=10.0, threshold=0.5
    )
    ms = [
        mention("a", title="Conflicted Paper Title", doi="10.1/a", source="s1"),
        mention("b", title="Conflicted Paper Title", doi="10.1/a", source="s2"),
        mention("d", title="Conflicted Paper Title", source="s4"),
        mention("c", title="Conflicted Paper Title", doi="10.1/b", source="s3"),
    ]
    result = dedupe_corpus(ms, model)
    assert len(result.papers) == 1
    assert result.papers[0].external_ids["DOI"] == "10.1/a"
    assert result.violations
