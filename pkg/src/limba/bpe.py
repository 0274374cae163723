"""From-scratch byte-pair-encoding tokenizer.

Training pre-tokenizes on whitespace and appends an end-of-word marker
symbol (U+2581) to each word, then greedily merges the most frequent
adjacent symbol pair until the vocabulary budget is reached or no pair
occurs at least twice. Frequency ties break lexicographically on the
pair, so training is deterministic for a given corpus order.

The marker character U+2581 is reserved: it may not occur in input
text. Characters never seen in training encode to the UNK id, so any
UTF-8 string can be encoded.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyInputError, FormatError, InvalidIdError

WORD_END = "▁"

UNK, PAD, BOS, EOS = "<unk>", "<pad>", "<bos>", "<eos>"
_SPECIAL_ORDER = (UNK, PAD, BOS, EOS)
# Special ids are fixed by construction: specials always occupy 0..3.
UNK_ID, PAD_ID, BOS_ID, EOS_ID = 0, 1, 2, 3


@dataclass(frozen=True)
class SpecialTokens:
    unk: int
    pad: int
    bos: int
    eos: int

    def as_dict(self) -> dict:
        return {UNK: self.unk, PAD: self.pad, BOS: self.bos, EOS: self.eos}

    def ids(self) -> set[int]:
        return {self.unk, self.pad, self.bos, self.eos}


@dataclass(frozen=True)
class BpeTokenizerModel:
    """Ordered merge list, dense vocabulary, and special token ids."""

    merges: tuple
    vocab: dict
    specials: SpecialTokens
    reached_target: bool = field(default=True, compare=False)

    def __post_init__(self):
        ids = sorted(self.vocab.values())
        if ids != list(range(len(self.vocab))):
            raise FormatError("vocab ids must be dense 0..|vocab|-1")
        if len(self.specials.ids()) != 4:
            raise FormatError("special token ids must be distinct")
        for name, sid in self.specials.as_dict().items():
            if self.vocab.get(name) != sid:
                raise FormatError(f"special {name} missing from vocab")
        for left, right in self.merges:
            if left + right not in self.vocab:
                raise FormatError(f"merge output {left + right!r} not in vocab")

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)


@dataclass(frozen=True)
class EncodedSequence:
    """Token ids plus their count."""

    ids: tuple
    length: int

    def __init__(self, ids: Iterable[int]):
        ids = tuple(int(i) for i in ids)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "length", len(ids))


def _word_symbols(word: str) -> tuple:
    return tuple(word) + (WORD_END,)


def _pair_counts(word_freqs: dict) -> Counter:
    counts = Counter()
    for symbols, freq in word_freqs.items():
        for left, right in zip(symbols, symbols[1:]):
            counts[(left, right)] += freq
    return counts


def _merge_word(symbols: tuple, pair: tuple) -> tuple:
    merged = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
            merged.append(symbols[i] + symbols[i + 1])
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return tuple(merged)


def train_bpe(corpus, target_vocab_size: int) -> BpeTokenizerModel:
    """Learn merges from a corpus up to the vocabulary budget.

    Accepts a Corpus or any iterable of strings. The budget must cover
    the base symbol inventory (characters plus the word-end marker) and
    the four special tokens. When no pair occurs at least twice before
    the budget is reached, the model is returned smaller with
    ``reached_target`` set to False.
    """
    texts = corpus.texts() if hasattr(corpus, "texts") else corpus
    word_freqs = Counter()
    for text in texts:
        for word in text.split():
            if WORD_END in word:
                raise FormatError(f"reserved marker {WORD_END!r} in input text")
            word_freqs[_word_symbols(word)] += 1
    if not word_freqs:
        raise EmptyInputError("cannot train a tokenizer on an empty corpus")

    base_symbols = sorted({s for word in word_freqs for s in word})
    floor_size = len(_SPECIAL_ORDER) + len(base_symbols)
    if target_vocab_size < floor_size:
        raise FormatError(
            f"target_vocab_size {target_vocab_size} below minimum "
            f"{floor_size} (specials + base symbols)"
        )

    merges = []
    vocab_symbols = list(base_symbols)
    current = dict(word_freqs)
    while floor_size + len(merges) < target_vocab_size:
        counts = _pair_counts(current)
        if not counts:
            break
        # highest count first, ties to the lexicographically smallest pair
        best = min(counts, key=lambda p: (-counts[p], p))
        if counts[best] < 2:
            break
        merges.append(best)
        vocab_symbols.append(best[0] + best[1])
        current = {_merge_word(w, best): f for w, f in current.items()}

    vocab = {name: i for i, name in enumerate(_SPECIAL_ORDER)}
    for symbol in vocab_symbols:
        vocab[symbol] = len(vocab)
    specials = SpecialTokens(unk=vocab[UNK], pad=vocab[PAD],
                             bos=vocab[BOS], eos=vocab[EOS])
    return BpeTokenizerModel(
        merges=tuple(merges),
        vocab=vocab,
        specials=specials,
        reached_target=len(vocab) >= target_vocab_size,
    )


def _tokenize_word(model: BpeTokenizerModel, word: str) -> list[str]:
    symbols = _word_symbols(word)
    for pair in model.merges:
        if len(symbols) < 2:
            break
        symbols = _merge_word(symbols, pair)
    return list(symbols)


def encode(
    model: BpeTokenizerModel,
    text: str,
    max_len: int | None = None,
    pad: bool = False,
) -> EncodedSequence:
    """Apply learned merges; unknown symbols map to UNK.

    With ``max_len`` set, longer outputs keep their first ``max_len``
    ids and shorter ones are padded up to it when ``pad`` is true.
    """
    ids = []
    for word in text.split():
        for symbol in _tokenize_word(model, word):
            ids.append(model.vocab.get(symbol, model.specials.unk))
    if max_len is not None:
        ids = ids[:max_len]
        if pad and len(ids) < max_len:
            ids.extend([model.specials.pad] * (max_len - len(ids)))
    return EncodedSequence(ids)


def decode(model: BpeTokenizerModel, ids: Sequence[int]) -> str:
    """Invert encoding: strip PAD/BOS/EOS, rejoin words at the marker."""
    id_to_token = {i: t for t, i in model.vocab.items()}
    dropped = {model.specials.pad, model.specials.bos, model.specials.eos}
    parts = []
    for token_id in ids:
        token_id = int(token_id)
        if token_id not in id_to_token:
            raise InvalidIdError(
                f"id {token_id} outside vocabulary of size {model.vocab_size}"
            )
        if token_id in dropped:
            continue
        parts.append(id_to_token[token_id])
    return "".join(parts).replace(WORD_END, " ").strip()


def save_model(model: BpeTokenizerModel, path: str | Path) -> None:
    payload = {
        "merges": [list(pair) for pair in model.merges],
        "vocab": model.vocab,
        "specials": model.specials.as_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_model(path: str | Path) -> BpeTokenizerModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        specials = SpecialTokens(
            unk=payload["specials"][UNK],
            pad=payload["specials"][PAD],
            bos=payload["specials"][BOS],
            eos=payload["specials"][EOS],
        )
        return BpeTokenizerModel(
            merges=tuple(tuple(pair) for pair in payload["merges"]),
            vocab=dict(payload["vocab"]),
            specials=specials,
        )
    except KeyError as exc:
        raise FormatError(f"tokenizer file missing key {exc}") from exc
