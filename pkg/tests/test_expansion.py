import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expando.expansion import (
    CopyGenerator,
    ExpansionError,
    ExpansionRecord,
    ExpansionSummary,
    FileBackedGenerator,
    apply_expansions,
    copy_generator,
    expand_corpus,
    expand_document,
    filter_expansion,
    generate_queries,
    partition_tokens,
    read_expansions,
    write_expansions,
)
from expando.index import Document, build_index
from expando.rng import SplitMix64
from expando.text import StopwordList, default_stopwords, tokenize

from conftest import WASHINGTON

NO_STOPS = StopwordList([])
text = st.text(alphabet="abcde XYZ.,-", max_size=30)


def test_splitmix_reference_vector():
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(5)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]


def test_choice_index_skips_zero_weights():
    r = SplitMix64(0)
    assert {r.choice_index([0, 1, 0]) for _ in range(200)} == {1}
    with pytest.raises(ValueError):
        r.choice_index([0, 0])


@pytest.mark.parametrize(
    "queries, expected",
    [(["q r", "s"], "a b q r s"), ([], "a b"), ([""], "a b ")],
)
def test_expand_document(queries, expected):
    out = expand_document(Document("d1", "a b"), queries)
    assert out == Document("d1", expected)


def test_expand_washington_passage():
    out = expand_document(Document("p1", WASHINGTON), ["weather in washington dc"])
    assert out.text == WASHINGTON + " weather in washington dc"


@given(text, st.lists(text, max_size=5))
def test_concatenation_soundness(doc, queries):
    out = expand_document(Document("d", doc), queries)
    want = tokenize(doc)
    for q in queries:
        want += tokenize(q)
    assert tokenize(out.text) == want


class _Recorder:
    def __init__(self):
        self.inputs = []

    def generate(self, doc_text, n, seed, ext_id=None):
        self.inputs.append(doc_text)
        return [f"q{i}" for i in range(n)]


def test_expand_corpus_n_zero_is_identity():
    docs = [Document("a", "x y"), Document("b", "z")]
    assert list(expand_corpus(docs, _Recorder(), n=0)) == docs


def test_expand_corpus_default_n_is_ten():
    out = list(expand_corpus([Document("a", "x")], _Recorder()))
    assert tokenize(out[0].text) == ["x"] + [f"q{i}" for i in range(10)]


def test_generator_sees_truncated_text_but_index_keeps_all():
    long_text = " ".join(f"w{i}" for i in range(450))
    rec = _Recorder()
    out = list(expand_corpus([Document("a", long_text)], rec, n=1))
    assert len(tokenize(rec.inputs[0])) == 400
    assert out[0].text.startswith(long_text)


def test_queries_capped_at_100_tokens():
    class Long:
        def generate(self, doc_text, n, seed, ext_id=None):
            return [" ".join(["w"] * 150)] * n

    out = list(expand_corpus([Document("a", "x")], Long(), n=2))
    assert len(tokenize(out[0].text)) == 1 + 200


def test_file_backed_generator_in_file_order():
    recs = {"a": ExpansionRecord("a", [f"q{i}" for i in range(12)])}
    out = list(expand_corpus([Document("a", "x")], FileBackedGenerator(recs), n=10))
    assert out[0].text == "x " + " ".join(f"q{i}" for i in range(10))


def test_generator_failure_names_document():
    class Boom:
        def generate(self, doc_text, n, seed, ext_id=None):
            if "bad" in doc_text:
                raise RuntimeError("model exploded")
            return ["ok"] * n

    docs = [Document("good", "fine"), Document("d-17", "bad input")]
    with pytest.raises(ExpansionError) as info:
        list(expand_corpus(docs, Boom(), n=1))
    assert info.value.ext_id == "d-17"
    assert "d-17" in str(info.value)


def test_missing_records_pass_through_and_are_counted():
    docs = [Document("a", "x"), Document("b", "y")]
    summary = ExpansionSummary()
    out = list(apply_expansions(docs, [ExpansionRecord("a", ["q"])], summary))
    assert out == [Document("a", "x q"), Document("b", "y")]
    assert summary.missing == 1 and summary.expanded == 1 and summary.documents == 2
    assert '"missing": 1' in summary.to_json()


def test_generate_queries_summary_counts_short_records():
    gen = FileBackedGenerator([ExpansionRecord("a", ["q1", "q2"])])
    summary = ExpansionSummary()
    pairs = list(generate_queries([Document("a", "x"), Document("b", "y")], gen, 5, 0, summary))
    assert [q for _, q in pairs] == [["q1", "q2"], []]
    assert (summary.short, summary.missing, summary.queries) == (1, 1, 2)


def test_partition_washington_example():
    p = partition_tokens(WASHINGTON, ["weather in washington dc"], default_stopwords())
    assert p.copied == {"washington", "dc"}
    assert p.new == {"weather"}
    assert p.stop == {"in"}


def test_partition_examples():
    assert partition_tokens("a b c", ["b c"], NO_STOPS).new == set()
    empty = partition_tokens("a b c", [], NO_STOPS)
    assert not (empty.copied or empty.new or empty.stop)


@given(text, st.lists(text, max_size=5))
def test_partition_disjoint_and_exhaustive(doc, queries):
    stops = StopwordList(["a", "x"])
    p = partition_tokens(doc, queries, stops)
    assert not (p.copied & p.new or p.copied & p.stop or p.new & p.stop)
    assert p.copied | p.new | p.stop == {t for q in queries for t in tokenize(q)}


def test_filter_all_is_identity():
    rec = ExpansionRecord("p1", ["weather in washington dc"])
    assert filter_expansion(rec, WASHINGTON, default_stopwords(), "all") == rec


def test_filter_washington_new_only():
    rec = ExpansionRecord("p1", ["weather in washington dc"])
    out = filter_expansion(rec, WASHINGTON, default_stopwords(), "new_only")
    assert out.queries == ["weather"]
    out = filter_expansion(rec, WASHINGTON, default_stopwords(), "copied_only")
    assert out.queries == ["washington dc"]


def test_filter_stopword_queries_vanish():
    rec = ExpansionRecord("d", ["the of", "in a"])
    assert filter_expansion(rec, "the cat", default_stopwords(), "copied_only").queries == []


def test_filter_rejects_unknown_mode():
    with pytest.raises(ValueError):
        filter_expansion(ExpansionRecord("d", []), "", None, "some")


@given(text, st.lists(text, max_size=5))
def test_filter_class_invariants(doc, queries):
    stops = StopwordList(["a"])
    vocab = set(tokenize(doc))
    rec = ExpansionRecord("d", queries)
    copied = filter_expansion(rec, doc, stops, "copied_only")
    new = filter_expansion(rec, doc, stops, "new_only")
    assert all(t in vocab for q in copied.queries for t in tokenize(q))
    assert all(t not in vocab for q in new.queries for t in tokenize(q))
    assert all(q for q in copied.queries + new.queries)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from("abcdef"), max_size=6).map(" ".join), min_size=1, max_size=8), st.integers(0, 99))
def test_expanded_index_df_dominates(texts, seed):
    docs = [Document(f"d{i}", t) for i, t in enumerate(texts)]
    expanded = list(expand_corpus(docs, CopyGenerator(NO_STOPS, 2), n=3, seed=seed))
    base, big = build_index(docs), build_index(expanded)
    assert all(big.df(t) >= base.df(t) for t in base.vocabulary)


def test_copy_generator_chi_square():
    # first draw from "a a a b": P(a first) = 3/4
    counts = Counter(copy_generator("a a a b", 1, seed, NO_STOPS)[0] for seed in range(10_000))
    assert set(counts) == {"a b", "b a"}
    n = 10_000
    expected = {"a b": 0.75 * n, "b a": 0.25 * n}
    chi2 = sum((counts[k] - e) ** 2 / e for k, e in expected.items())
    assert chi2 < 10.828  # df=1, p=0.001


def test_copy_generator_deterministic_and_seed_sensitive():
    doc = "alpha beta gamma delta epsilon zeta eta theta alpha beta"
    assert copy_generator(doc, 3, 42) == copy_generator(doc, 3, 42)
    outs = {tuple(copy_generator(doc, 3, s)) for s in range(20)}
    assert len(outs) > 1
    for q in copy_generator(doc, 3, 42):
        toks = tokenize(q)
        assert len(toks) == 5 and len(set(toks)) == 5


def test_copy_generator_stopword_only_doc():
    assert copy_generator("the the the", 2, 0) == ["", ""]


def test_expansion_file_roundtrip(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("a\tq1\nb\tq2\na\tq3\n", encoding="utf-8")
    recs = read_expansions(p)
    assert list(recs) == ["a", "b"]
    assert recs["a"].queries == ["q1", "q3"]
    out = tmp_path / "o.tsv"
    write_expansions(recs.values(), out)
    assert read_expansions(out) == recs


def test_duplicate_queries_appended_verbatim():
    gen = FileBackedGenerator([ExpansionRecord("a", ["dup", "dup"])])
    assert list(expand_corpus([Document("a", "x")], gen, n=2))[0].text == "x dup dup"


def test_expand_corpus_preserves_order():
    rng = random.Random(0)
    docs = [Document(f"d{i}", f"w{rng.randrange(5)}") for i in range(20)]
    out = list(expand_corpus(docs, CopyGenerator(NO_STOPS), n=1))
    assert [d.ext_id for d in out] == [d.ext_id for d in docs]
