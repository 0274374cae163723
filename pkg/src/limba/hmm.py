"""Bigram HMM part-of-speech tagger with Viterbi decoding.

Initial, transition, and emission distributions are add-k smoothed
maximum-likelihood counts from expert-tagged sentences. The emission
vocabulary reserves an UNK word type whose mass comes from the
smoothing term, so tagging stays total on unseen words (for k > 0).
Emissions are case-folded by default to fight sparsity in corpora of
only a few hundred sentences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import AnnotatedSentence
from .errors import EmptyInputError, FormatError, LabelError
from .prf import EvalReport, score_labels

# The 17-tag Universal POS inventory.
UNIVERSAL_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)

# Reference hyper-parameters for fine-tuning a BERT token classifier on
# exported tagged data with an external trainer. The HMM below does not
# read them; they are recorded so downstream experiments start from a
# known-good configuration.
BERT_FINETUNE_DEFAULTS = {
    "epochs": 50,
    "batch_size": 16,
    "learning_rate": 2e-5,
    "weight_decay": 0.01,
    "loss": "cross-entropy",
}


@dataclass(frozen=True)
class TagSet:
    tags: tuple

    def __init__(self, tags: Iterable[str] = UNIVERSAL_TAGS):
        tags = tuple(tags)
        if not tags:
            raise FormatError("tag set must be non-empty")
        if len(set(tags)) != len(tags):
            raise FormatError("tag set contains duplicates")
        object.__setattr__(self, "tags", tags)

    def __len__(self):
        return len(self.tags)

    def index(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError:
            raise LabelError(f"tag {tag!r} not in tag set") from None


@dataclass(frozen=True)
class HmmTaggerModel:
    tagset: TagSet
    initial_logprob: np.ndarray  # |tags|
    transition_logprob: np.ndarray  # |tags| x |tags|
    emission_logprob: tuple  # per tag: dict word -> logprob
    unk_logprob: np.ndarray  # per tag
    smoothing_k: float
    casefold_emissions: bool

    def emission(self, tag_index: int, word: str) -> float:
        if self.casefold_emissions:
            word = word.casefold()
        return self.emission_logprob[tag_index].get(
            word, float(self.unk_logprob[tag_index])
        )


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else float("-inf")


def train_hmm(
    sentences: Sequence[AnnotatedSentence],
    tagset: TagSet,
    smoothing_k: float = 0.1,
    casefold_emissions: bool = True,
) -> HmmTaggerModel:
    """Add-k smoothed MLE estimates from tagged sentences.

    With k = 0 the estimates are plain MLE and unseen words get zero
    probability (log -inf); any k > 0 keeps every in-tagset event and
    the UNK word type strictly positive.
    """
    if not sentences:
        raise EmptyInputError("no training sentences")
    if smoothing_k < 0:
        raise FormatError(f"smoothing_k must be >= 0, got {smoothing_k}")
    n_tags = len(tagset)
    initial = np.zeros(n_tags)
    transitions = np.zeros((n_tags, n_tags))
    emission_counts = [dict() for _ in range(n_tags)]
    tag_totals = np.zeros(n_tags)

    for sent in sentences:
        prev = None
        for token, tag in zip(sent.tokens, sent.tags):
            t = tagset.index(tag)
            if prev is None:
                initial[t] += 1
            else:
                transitions[prev, t] += 1
            word = token.casefold() if casefold_emissions else token
            emission_counts[t][word] = emission_counts[t].get(word, 0) + 1
            tag_totals[t] += 1
            prev = t

    k = float(smoothing_k)
    init_total = initial.sum() + k * n_tags
    initial_logprob = np.array([_log((initial[t] + k) / init_total)
                                for t in range(n_tags)])

    trans_logprob = np.empty((n_tags, n_tags))
    for t in range(n_tags):
        row_total = transitions[t].sum() + k * n_tags
        if row_total == 0.0:
            # tag never observed as a transition source and k = 0:
            # an unseen context imposes no preference, so stay uniform
            trans_logprob[t] = _log(1.0 / n_tags)
            continue
        for u in range(n_tags):
            trans_logprob[t, u] = _log((transitions[t, u] + k) / row_total)

    # Emission rows are normalized over training word types plus one
    # reserved UNK type, so each row sums to 1 including UNK mass.
    vocab = sorted({w for counts in emission_counts for w in counts})
    v_plus_unk = len(vocab) + 1
    emission_logprob = []
    unk_logprob = np.empty(n_tags)
    for t in range(n_tags):
        denom = tag_totals[t] + k * v_plus_unk
        if denom == 0.0:
            # tag unseen in training and k = 0: leave the row uniform
            row = {w: _log(1.0 / v_plus_unk) for w in vocab}
            unk_logprob[t] = _log(1.0 / v_plus_unk)
        else:
            row = {w: _log((emission_counts[t].get(w, 0) + k) / denom)
                   for w in vocab}
            unk_logprob[t] = _log(k / denom)
        emission_logprob.append(row)

    return HmmTaggerModel(
        tagset=tagset,
        initial_logprob=initial_logprob,
        transition_logprob=trans_logprob,
        emission_logprob=tuple(emission_logprob),
        unk_logprob=unk_logprob,
        smoothing_k=k,
        casefold_emissions=casefold_emissions,
    )


def viterbi_tag(model: HmmTaggerModel, tokens: Sequence[str]) -> AnnotatedSentence:
    """Argmax tag sequence in log space.

    Ties break toward the lowest tag index at every backpointer and at
    the final state, which selects the optimal path whose reversed tag
    index tuple is lexicographically smallest.
    """
    if not tokens:
        raise EmptyInputError("cannot tag an empty token sequence")
    n_tags = len(model.tagset)
    m = len(tokens)
    emit = np.empty((m, n_tags))
    for i, token in enumerate(tokens):
        for t in range(n_tags):
            emit[i, t] = model.emission(t, token)

    score = model.initial_logprob + emit[0]
    backpointers = np.zeros((m, n_tags), dtype=np.int64)
    for i in range(1, m):
        candidates = score[:, None] + model.transition_logprob
        backpointers[i] = np.argmax(candidates, axis=0)
        score = candidates[backpointers[i], np.arange(n_tags)] + emit[i]

    best = int(np.argmax(score))
    path = [best]
    for i in range(m - 1, 0, -1):
        path.append(int(backpointers[i, path[-1]]))
    path.reverse()
    return AnnotatedSentence(tuple(tokens),
                             tuple(model.tagset.tags[t] for t in path))


def evaluate_tagger(
    model: HmmTaggerModel,
    gold: Sequence[AnnotatedSentence],
    exclude_absent_from_macro: bool = True,
) -> EvalReport:
    """Token-level P/R/F1 per tag; micro-F1 equals token accuracy."""
    if not gold:
        raise EmptyInputError("cannot evaluate on empty data")
    gold_tags, predicted_tags = [], []
    for sent in gold:
        predicted = viterbi_tag(model, sent.tokens)
        gold_tags.extend(sent.tags)
        predicted_tags.extend(predicted.tags)
    return score_labels(gold_tags, predicted_tags, model.tagset.tags,
                        exclude_absent_from_macro)


# ---------------------------------------------------------------------------
# Persistence: -inf is stored as null since JSON lacks infinities.
# ---------------------------------------------------------------------------

def _dump_logprob(value: float):
    return None if value == float("-inf") else value


def _load_logprob(value) -> float:
    return float("-inf") if value is None else float(value)


def save_model(model: HmmTaggerModel, path: str | Path) -> None:
    payload = {
        "tags": list(model.tagset.tags),
        "initial": [_dump_logprob(v) for v in model.initial_logprob.tolist()],
        "transition": [[_dump_logprob(v) for v in row]
                       for row in model.transition_logprob.tolist()],
        "emission": [
            {w: _dump_logprob(lp) for w, lp in sorted(row.items())}
            for row in model.emission_logprob
        ],
        "unk": [_dump_logprob(v) for v in model.unk_logprob.tolist()],
        "smoothing_k": model.smoothing_k,
        "casefold_emissions": model.casefold_emissions,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def load_model(path: str | Path) -> HmmTaggerModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return HmmTaggerModel(
            tagset=TagSet(payload["tags"]),
            initial_logprob=np.array([_load_logprob(v) for v in payload["initial"]]),
            transition_logprob=np.array(
                [[_load_logprob(v) for v in row] for row in payload["transition"]]
            ),
            emission_logprob=tuple(
                {w: _load_logprob(lp) for w, lp in row.items()}
                for row in payload["emission"]
            ),
            unk_logprob=np.array([_load_logprob(v) for v in payload["unk"]]),
            smoothing_k=payload["smoothing_k"],
            casefold_emissions=payload["casefold_emissions"],
        )
    except KeyError as exc:
        raise FormatError(f"tagger file missing key {exc}") from exc
    except (TypeError, AttributeError) as exc:
        raise FormatError(f"malformed tagger file {path}: {exc}") from exc
