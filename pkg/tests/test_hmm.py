"""HMM tagger: smoothed counts, Viterbi decoding, evaluation, files."""

import math

import numpy as np
import pytest

from limba.corpus import AnnotatedSentence
from limba.errors import EmptyInputError, FormatError, LabelError
from limba.hmm import (
    BERT_FINETUNE_DEFAULTS,
    UNIVERSAL_TAGS,
    HmmTaggerModel,
    TagSet,
    evaluate_tagger,
    load_model,
    save_model,
    train_hmm,
    viterbi_tag,
)
from oracles import viterbi_by_enumeration


def _sentence(*pairs):
    tokens, tags = zip(*pairs)
    return AnnotatedSentence(tuple(tokens), tuple(tags))


def _random_model(rng, n_tags, words):
    """A model over integer-named tags with random log-probabilities."""
    tagset = TagSet([f"T{i}" for i in range(n_tags)])
    initial = np.log(rng.dirichlet(np.ones(n_tags)))
    transition = np.log(rng.dirichlet(np.ones(n_tags), size=n_tags))
    emission = tuple(
        {w: float(np.log(p)) for w, p in zip(words, rng.dirichlet(np.ones(len(words))))}
        for _ in range(n_tags)
    )
    return HmmTaggerModel(
        tagset=tagset,
        initial_logprob=initial,
        transition_logprob=transition,
        emission_logprob=emission,
        unk_logprob=np.full(n_tags, math.log(1e-3)),
        smoothing_k=0.0,
        casefold_emissions=False,
    )


def _integer_score_model(rng, n_tags, words):
    """Log-scores drawn from small integers so float ties are common.

    Viterbi is a max-plus computation, so unnormalized scores exercise
    exactly the same code path while making tie-breaking observable.
    """
    tagset = TagSet([f"T{i}" for i in range(n_tags)])
    initial = rng.integers(-3, 0, size=n_tags).astype(np.float64)
    transition = rng.integers(-3, 0, size=(n_tags, n_tags)).astype(np.float64)
    emission = tuple(
        {w: float(v) for w, v in zip(words, rng.integers(-3, 0, size=len(words)))}
        for _ in range(n_tags)
    )
    return HmmTaggerModel(
        tagset=tagset,
        initial_logprob=initial,
        transition_logprob=transition,
        emission_logprob=emission,
        unk_logprob=np.full(n_tags, -5.0),
        smoothing_k=0.0,
        casefold_emissions=False,
    )


def _emission_matrix(model, tokens):
    return np.array([
        [model.emission(t, token) for t in range(len(model.tagset))]
        for token in tokens
    ])


class TestTagSet:
    """Ordered distinct tags with index lookup."""

    def test_default_universal_inventory(self):
        ts = TagSet()
        assert ts.tags == UNIVERSAL_TAGS
        assert len(ts) == 17

    def test_unknown_tag_raises(self):
        with pytest.raises(LabelError):
            TagSet(("A", "B")).index("C")

    def test_duplicates_rejected(self):
        with pytest.raises(FormatError):
            TagSet(("A", "A"))


class TestTraining:
    """Add-k smoothed MLE counts with a reserved UNK word type."""

    def test_counts_of_one(self):
        sents = [_sentence(("su", "DET"), ("cane", "NOUN"))]
        model = train_hmm(sents, TagSet(("DET", "NOUN")), smoothing_k=0.0)
        d, n = 0, 1
        assert model.initial_logprob[d] == 0.0  # log P(DET initial) = log 1
        assert model.initial_logprob[n] == -math.inf
        assert model.transition_logprob[d, n] == 0.0
        assert model.emission(d, "su") == 0.0

    def test_k0_unseen_word_gets_zero_probability(self):
        sents = [_sentence(("su", "DET"), ("cane", "NOUN"))]
        model = train_hmm(sents, TagSet(("DET", "NOUN")), smoothing_k=0.0)
        assert model.emission(0, "never-seen") == -math.inf

    def test_k0_sink_tag_transition_row_uniform(self):
        # NOUN is never a transition source; its row must stay a
        # distribution rather than collapsing to zeros
        sents = [_sentence(("su", "DET"), ("cane", "NOUN"))]
        model = train_hmm(sents, TagSet(("DET", "NOUN")), smoothing_k=0.0)
        np.testing.assert_allclose(model.transition_logprob[1],
                                   math.log(0.5), atol=1e-12)

    def test_positive_k_keeps_every_event_positive(self):
        sents = [_sentence(("su", "DET"), ("cane", "NOUN"))]
        model = train_hmm(sents, TagSet(("DET", "NOUN")), smoothing_k=0.5)
        assert np.all(np.isfinite(model.initial_logprob))
        assert np.all(np.isfinite(model.transition_logprob))
        assert np.isfinite(model.emission(1, "unseen-word"))

    def test_distributions_sum_to_one(self, data_dir):
        from limba.corpus import read_tagged

        sents = read_tagged(data_dir / "pos_train.conll")
        tagset = TagSet(sorted({t for s in sents for t in s.tags}))
        model = train_hmm(sents, tagset, smoothing_k=0.3)
        np.testing.assert_allclose(np.exp(model.initial_logprob).sum(), 1.0,
                                   atol=1e-9)
        np.testing.assert_allclose(np.exp(model.transition_logprob).sum(axis=1),
                                   1.0, atol=1e-9)
        for t in range(len(tagset)):
            row = sum(math.exp(v) for v in model.emission_logprob[t].values())
            row += math.exp(model.unk_logprob[t])
            np.testing.assert_allclose(row, 1.0, atol=1e-9)

    def test_casefold_merges_word_shapes(self):
        sents = [_sentence(("Su", "DET")), _sentence(("su", "DET"))]
        folded = train_hmm(sents, TagSet(("DET",)), smoothing_k=0.0)
        assert folded.emission(0, "SU") == 0.0
        kept = train_hmm(sents, TagSet(("DET",)), smoothing_k=0.0,
                         casefold_emissions=False)
        assert kept.emission(0, "Su") == math.log(0.5)

    def test_unknown_tag_in_data_rejected(self):
        with pytest.raises(LabelError):
            train_hmm([_sentence(("a", "XYZ"))], TagSet(("DET",)))

    def test_empty_data_rejected(self):
        with pytest.raises(EmptyInputError):
            train_hmm([], TagSet(("DET",)))

    def test_negative_k_rejected(self):
        with pytest.raises(FormatError):
            train_hmm([_sentence(("a", "DET"))], TagSet(("DET",)),
                      smoothing_k=-0.1)

    def test_reference_finetune_table(self):
        assert BERT_FINETUNE_DEFAULTS == {
            "epochs": 50,
            "batch_size": 16,
            "learning_rate": 2e-5,
            "weight_decay": 0.01,
            "loss": "cross-entropy",
        }


class TestViterbi:
    """Argmax decoding with lowest-index tie-breaking."""

    def test_two_tag_fixture(self):
        tagset = TagSet(("D", "N"))
        model = HmmTaggerModel(
            tagset=tagset,
            initial_logprob=np.log([0.9, 0.1]),
            transition_logprob=np.log([[0.1, 0.9], [0.5, 0.5]]),
            emission_logprob=(
                {"su": math.log(0.9), "cane": math.log(0.1)},
                {"su": math.log(0.2), "cane": math.log(0.8)},
            ),
            unk_logprob=np.log([0.01, 0.01]),
            smoothing_k=0.0,
            casefold_emissions=False,
        )
        result = viterbi_tag(model, ["su", "cane"])
        assert result.tags == ("D", "N")
        # enumeration over the 4 paths confirms the winning probability
        emit = _emission_matrix(model, ["su", "cane"])
        _, best = viterbi_by_enumeration(model.initial_logprob,
                                         model.transition_logprob, emit)
        np.testing.assert_allclose(math.exp(best), 0.5832, atol=1e-12)

    def test_all_unknown_tokens_still_tagged(self, data_dir):
        from limba.corpus import read_tagged

        sents = read_tagged(data_dir / "pos_train.conll")
        tagset = TagSet(sorted({t for s in sents for t in s.tags}))
        model = train_hmm(sents, tagset, smoothing_k=0.1)
        out = viterbi_tag(model, ["zzz", "qqq", "xxx"])
        assert len(out.tags) == 3
        assert all(t in tagset.tags for t in out.tags)

    def test_length_preserved(self):
        sents = [_sentence(("a", "DET"), ("b", "NOUN"))]
        model = train_hmm(sents, TagSet(("DET", "NOUN")), smoothing_k=0.1)
        for n in (1, 2, 5, 9):
            out = viterbi_tag(model, ["a"] * n)
            assert len(out.tags) == n

    def test_empty_tokens_rejected(self):
        sents = [_sentence(("a", "DET"))]
        model = train_hmm(sents, TagSet(("DET",)), smoothing_k=0.1)
        with pytest.raises(EmptyInputError):
            viterbi_tag(model, [])

    def test_matches_enumeration_on_random_models(self):
        rng = np.random.default_rng(42)
        words = ["w0", "w1", "w2", "w3"]
        for _ in range(30):
            n_tags = int(rng.integers(2, 6))
            n_tokens = int(rng.integers(1, 7))
            model = _random_model(rng, n_tags, words)
            tokens = [words[i] for i in rng.integers(0, len(words), n_tokens)]
            expected, _ = viterbi_by_enumeration(
                model.initial_logprob, model.transition_logprob,
                _emission_matrix(model, tokens))
            got = viterbi_tag(model, tokens)
            assert got.tags == tuple(f"T{t}" for t in expected)

    def test_tie_break_matches_enumeration(self):
        # integer-valued scores force many exactly-tied optimal paths
        rng = np.random.default_rng(7)
        words = ["w0", "w1"]
        for _ in range(30):
            n_tags = int(rng.integers(2, 5))
            n_tokens = int(rng.integers(2, 6))
            model = _integer_score_model(rng, n_tags, words)
            tokens = [words[i] for i in rng.integers(0, len(words), n_tokens)]
            expected, _ = viterbi_by_enumeration(
                model.initial_logprob, model.transition_logprob,
                _emission_matrix(model, tokens))
            got = viterbi_tag(model, tokens)
            assert got.tags == tuple(f"T{t}" for t in expected)


class TestEvaluate:
    """Token-level P/R/F1 via the shared scoring helper."""

    def test_perfect_on_deterministic_data(self, data_dir):
        from limba.corpus import read_tagged

        sents = read_tagged(data_dir / "pos_train.conll")
        tagset = TagSet(sorted({t for s in sents for t in s.tags}))
        model = train_hmm(sents, tagset, smoothing_k=0.01)
        report = evaluate_tagger(model, sents)
        assert report.accuracy == 1.0
        assert report.macro_f1 == 1.0

    def test_micro_f1_equals_accuracy(self, data_dir):
        from limba.corpus import read_tagged

        sents = read_tagged(data_dir / "pos_train.conll")
        tagset = TagSet(sorted({t for s in sents for t in s.tags}))
        model = train_hmm(sents[:6], tagset, smoothing_k=0.5)
        report = evaluate_tagger(model, sents)
        np.testing.assert_allclose(report.micro_f1, report.accuracy, atol=1e-12)

    def test_empty_gold_rejected(self):
        model = train_hmm([_sentence(("a", "DET"))], TagSet(("DET",)))
        with pytest.raises(EmptyInputError):
            evaluate_tagger(model, [])


class TestPersistence:
    """JSON round-trip, including -inf entries stored as null."""

    def test_round_trip_with_infinities(self, tmp_path):
        sents = [_sentence(("su", "DET"), ("cane", "NOUN"))]
        model = train_hmm(sents, TagSet(("DET", "NOUN")), smoothing_k=0.0)
        assert model.initial_logprob[1] == -math.inf
        path = tmp_path / "hmm.json"
        save_model(model, path)
        back = load_model(path)
        np.testing.assert_array_equal(back.initial_logprob, model.initial_logprob)
        np.testing.assert_array_equal(back.transition_logprob,
                                      model.transition_logprob)
        assert back.emission_logprob == model.emission_logprob
        assert back.tagset == model.tagset

    def test_reloaded_model_tags_identically(self, tmp_path, data_dir):
        from limba.corpus import read_tagged

        sents = read_tagged(data_dir / "pos_train.conll")
        tagset = TagSet(sorted({t for s in sents for t in s.tags}))
        model = train_hmm(sents, tagset, smoothing_k=0.1)
        path = tmp_path / "hmm.json"
        save_model(model, path)
        back = load_model(path)
        for sent in sents:
            assert viterbi_tag(back, sent.tokens) == viterbi_tag(model, sent.tokens)

    def test_corrupt_file_rejected(self, tmp_path):
        path = tmp_path / "hmm.json"
        path.write_text("[]", encoding="utf-8")
        with pytest.raises(FormatError):
            load_model(path)
