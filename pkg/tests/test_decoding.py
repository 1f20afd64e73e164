import math
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expando import codec
from expando.decoding import (
    EOS,
    CountSeq2Seq,
    DecodeParams,
    beam_search,
    greedy_decode,
    model_generator,
    read_model,
    read_pairs,
    score_sequence,
    topk_sample,
    train_count_model,
    write_model,
)

from conftest import random_count_model
from oracles import enumerate_sequences

seeds = st.integers(0, 10**6)


def _one_hot_model():
    # mix=0 and huge counts: the chain start -> x -> y -> EOS is near-certain
    big = 10**9
    bigram = {None: Counter({"x": big}), "x": Counter({"y": big}), "y": Counter({EOS: big})}
    return CountSeq2Seq(["x", "y", "z"], bigram, mix=0.0, alpha=1e-12)


def test_normalization_on_random_probes():
    rng = random.Random(5)
    for _ in range(100):
        model, source = random_count_model(rng)
        prefix = [rng.randrange(len(model.vocab)) for _ in range(rng.randint(0, 3))]
        total = math.fsum(np.exp(model.log_probs(source, prefix)))
        assert abs(total - 1.0) <= 1e-9


def test_logprob_mapping_covers_eos():
    model = train_count_model([("a b", "b")])
    dist = model.logprob(["a"], [])
    assert set(dist) == {"a", "b", EOS}
    assert abs(math.fsum(math.exp(v) for v in dist.values()) - 1) <= 1e-12


def test_mix_one_ignores_prefix():
    model = train_count_model([("a b c", "b c"), ("c", "a a")], mix=1.0)
    src = ["a", "c", "c"]
    first = model.log_probs(src, [])
    for prefix in ([0], [1, 2], [2, 2, 0]):
        assert np.array_equal(model.log_probs(src, prefix), first)


@pytest.mark.parametrize("alpha", [0.01, 0.1, 1.0, 10.0])
def test_single_pair_bigram(alpha):
    model = train_count_model([("a", "b b")], mix=0.0, alpha=alpha)
    b = model.vocab.index("b")
    lp = model.log_probs([], [b])
    # b -> b and b -> EOS were each seen once; among vocabulary tokens b wins
    assert lp[b] == lp.max()
    assert all(lp[b] > lp[i] for i in range(len(model.vocab)) if i != b)


def test_training_errors():
    with pytest.raises(ValueError):
        train_count_model([])
    with pytest.raises(ValueError):
        train_count_model([("a", "b")], mix=1.5)
    with pytest.raises(ValueError):
        train_count_model([("a", "b")], alpha=0.0)


def test_one_hot_model_any_beam():
    model = _one_hot_model()
    for beam in (1, 2, 5):
        assert beam_search(model, [], beam, 8)[0].tokens == ("x", "y")
    assert greedy_decode(model, [], 8).tokens == ("x", "y")


def test_one_hot_model_generator_topk_repeats():
    gen = model_generator(_one_hot_model(), DecodeParams("topk", 10, 8))
    assert gen.generate("", 4, seed=9) == ["x y"] * 4


def test_beam_one_equals_greedy():
    rng = random.Random(1)
    for _ in range(200):
        model, source = random_count_model(rng)
        max_len = rng.randint(1, 4)
        g = greedy_decode(model, source, max_len)
        (b,) = beam_search(model, source, 1, max_len)
        assert b.tokens == g.tokens
        assert b.logprob == pytest.approx(g.logprob, abs=1e-12)


def test_beam_model_generator_n1_is_greedy():
    model = train_count_model([("red car fast", "fast car"), ("blue sky", "sky")])
    gen = model_generator(model, DecodeParams("beam", max_len=6))
    assert gen.generate("red car", 1, seed=0) == [greedy_decode(model, ["red", "car"], 6).text]


def test_beam_exact_when_nothing_is_pruned():
    rng = random.Random(2)
    for _ in range(100):
        model, source = random_count_model(rng, max_vocab=3)
        max_len = rng.randint(1, 3)
        v = len(model.vocab)
        total = sum(v**l for l in range(max_len + 1))
        got = beam_search(model, source, total, max_len)
        want = enumerate_sequences(model, source, max_len)
        assert [h.tokens for h in got] == [t for _, t in want]
        for h, (lp, _) in zip(got, want):
            assert h.logprob == pytest.approx(lp, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 6))
def test_best_of_beam_never_beats_optimum(seed, beam):
    rng = random.Random(seed)
    model, source = random_count_model(rng)
    max_len = rng.randint(1, 3)
    best = enumerate_sequences(model, source, max_len)[0][0]
    got = beam_search(model, source, beam, max_len)
    assert got[0].logprob <= best + 1e-12
    assert len(got) <= beam
    lps = [h.logprob for h in got]
    assert lps == sorted(lps, reverse=True)


@pytest.mark.xfail(strict=True, reason="standard beam search is not monotone in beam size")
def test_monotone_in_beam_size_counterexample():
    bigram = {
        None: Counter({"b": 3, "c": 2}),
        "a": Counter({"b": 1}),
        "b": Counter({EOS: 4, "b": 2, "c": 1}),
        "c": Counter({"a": 1, "b": 1, "c": 1, EOS: 1}),
    }
    model = CountSeq2Seq(["a", "b", "c"], bigram, mix=0.49221233471037884, alpha=0.01)
    source = ["a", "c", "c", "b", "a"]
    best = [beam_search(model, source, b, 2)[0].logprob for b in (1, 2)]
    assert best[1] >= best[0]


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_hypothesis_logprob_rescoring(seed):
    rng = random.Random(seed)
    model, source = random_count_model(rng)
    max_len = rng.randint(1, 4)
    hyps = beam_search(model, source, 3, max_len) + [
        greedy_decode(model, source, max_len),
        topk_sample(model, source, 2, max_len, seed),
    ]
    for h in hyps:
        assert h.logprob <= 0
        assert abs(h.logprob - score_sequence(model, source, h.tokens)) <= 1e-9
        assert len(h.tokens) <= max_len


def test_topk_one_equals_greedy():
    rng = random.Random(3)
    for i in range(100):
        model, source = random_count_model(rng)
        max_len = rng.randint(1, 4)
        g = greedy_decode(model, source, max_len)
        assert topk_sample(model, source, 1, max_len, seed=i * 7919).tokens == g.tokens


def test_topk_vocab_plus_one_is_unrestricted():
    # with k covering every symbol, the first draw is plain inverse-CDF over the
    # full distribution sorted by probability
    from expando.rng import SplitMix64

    model = train_count_model([("a b c d", "a b"), ("c d", "d c")], mix=0.5)
    src = ["a", "c"]
    p = np.exp(model.log_probs(src, []))
    order = np.argsort(-p, kind="stable")
    k = len(model.vocab) + 1
    for seed in range(200):
        rng = SplitMix64(seed)
        first = int(order[rng.choice_index(p[order].tolist())])
        h = topk_sample(model, src, k, 1, seed)
        got = model.eos_id if not h.tokens else model.vocab.index(h.tokens[0])
        assert got == first


def test_topk_step_one_statistics():
    model = train_count_model(
        [("a b c d e", "a b"), ("b c", "c a"), ("e", "e d"), ("a", "b")], mix=0.6, alpha=0.2
    )
    src = ["a", "b", "b", "e"]
    k = 3
    p = np.exp(model.log_probs(src, []))
    top = np.argsort(-p, kind="stable")[:k]
    q = p[top] / p[top].sum()
    n = 10_000
    counts = Counter()
    for seed in range(n):
        h = topk_sample(model, src, k, 1, seed)
        counts[model.eos_id if not h.tokens else model.vocab.index(h.tokens[0])] += 1
    assert set(counts) <= set(top.tolist())
    for sym, prob in zip(top.tolist(), q):
        sigma = math.sqrt(n * prob * (1 - prob))
        assert abs(counts[sym] - n * prob) <= 3 * sigma


def test_topk_reproducible():
    model = train_count_model([("a b c d e", "a b c"), ("d e", "e d")])
    a = [topk_sample(model, ["a", "d"], 3, 10, s) for s in range(50)]
    b = [topk_sample(model, ["a", "d"], 3, 10, s) for s in range(50)]
    assert a == b
    assert len({h.tokens for h in a}) > 1


def test_topk_generator_uses_consecutive_seeds():
    model = train_count_model([("a b c d e", "a b c"), ("d e", "e d")])
    gen = model_generator(model, DecodeParams("topk", 3, 10))
    got = gen.generate("a d", 3, seed=40)
    want = [topk_sample(model, ["a", "d"], 3, 10, 40 + i).text for i in range(3)]
    assert got == want


def test_generator_truncates_to_100_tokens():
    big = 10**9
    model = CountSeq2Seq(["w"], {None: Counter({"w": big}), "w": Counter({"w": big})}, mix=0.0, alpha=1e-12)
    (q,) = model_generator(model, DecodeParams("topk", 1, 150)).generate("", 1, 0)
    assert len(q.split()) == 100


def test_default_generator_params():
    p = DecodeParams()
    assert (p.method, p.topk) == ("topk", 10)
    with pytest.raises(ValueError):
        DecodeParams("nucleus")


def test_model_file_roundtrip(tmp_path):
    model = train_count_model([("a b c", "b c"), ("c d", "d d a")], mix=0.3, alpha=0.05)
    p = tmp_path / "m.bin"
    write_model(model, p)
    back = read_model(p)
    assert back.vocab == model.vocab and back.mix == model.mix and back.alpha == model.alpha
    for prefix in ([], [0], [3]):
        assert np.array_equal(back.log_probs(["a"], prefix), model.log_probs(["a"], prefix))
    data = bytearray(p.read_bytes())
    data[-1] ^= 1
    p.write_bytes(bytes(data))
    with pytest.raises(codec.ChecksumError):
        read_model(p)


def test_read_pairs(tmp_path):
    p = tmp_path / "pairs.tsv"
    p.write_text("what is x\tx is a letter\n", encoding="utf-8")
    assert list(read_pairs(p)) == [("x is a letter", "what is x")]


def test_beam_ties_resolved_by_symbol_order():
    # no bigram rows and mix=0: every step is uniform, so every candidate ties
    model = CountSeq2Seq(["a", "b", "c"], {}, mix=0.0, alpha=1.0)
    # step 1 keeps a, b, c (EOS has the largest id); step 2 keeps aa, ab, ac; then EOS is forced
    got = [h.tokens for h in beam_search(model, [], 3, 2)]
    assert got == [("a", "a"), ("a", "b"), ("a", "c")]
    assert [h.tokens for h in beam_search(model, [], 4, 2)][0] == ()
