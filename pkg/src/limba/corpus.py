"""Corpus ingestion, labeling, splitting, and persistence.

A corpus is an immutable ordered collection of text chunks with
provenance and optional language/variant/quality labels. File formats:

* corpus file: UTF-8, one JSON object per line with keys ``id``,
  ``text``, ``source`` and optional ``language``, ``variant``,
  ``quality`` ("high" | "low");
* parallel corpus file: UTF-8 TSV with columns id, source_text,
  target_text;
* tagged corpus file: CoNLL-style ``token<TAB>tag`` lines with a blank
  line between sentences.
"""

from __future__ import annotations

import datetime
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DecodeError,
    DuplicateIdError,
    EmptyInputError,
    FormatError,
    TooSmallError,
)
from .normalize import normalize_text

QUALITY_VALUES = ("high", "low")

_CHUNK_KEYS = ("id", "text", "source", "language", "variant", "quality")


@dataclass(frozen=True)
class TextChunk:
    """One unit of collected text plus its labels."""

    id: str
    text: str
    source: str
    language: str | None = None
    variant: str | None = None
    quality: str | None = None

    def __post_init__(self):
        if not self.id:
            raise FormatError("chunk id must be non-empty")
        if not self.text:
            raise FormatError(f"chunk {self.id!r}: text must be non-empty")
        if self.quality is not None and self.quality not in QUALITY_VALUES:
            raise FormatError(
                f"chunk {self.id!r}: quality must be one of {QUALITY_VALUES}, "
                f"got {self.quality!r}"
            )


@dataclass(frozen=True)
class Manifest:
    """Per-label counts, creation timestamp, and source list for a corpus."""

    count: int
    language_counts: dict
    variant_counts: dict
    quality_counts: dict
    sources: tuple
    created_at: str


def _build_manifest(chunks: Sequence[TextChunk]) -> Manifest:
    return Manifest(
        count=len(chunks),
        language_counts=dict(Counter(c.language for c in chunks if c.language)),
        variant_counts=dict(Counter(c.variant for c in chunks if c.variant)),
        quality_counts=dict(Counter(c.quality for c in chunks if c.quality)),
        sources=tuple(sorted({c.source for c in chunks})),
        created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )


@dataclass(frozen=True)
class Corpus:
    """Immutable ordered collection of chunks with a recomputed manifest."""

    chunks: tuple
    manifest: Manifest = field(compare=False)

    def __init__(self, chunks: Iterable[TextChunk]):
        chunks = tuple(chunks)
        seen = set()
        for c in chunks:
            if c.id in seen:
                raise DuplicateIdError(f"duplicate chunk id {c.id!r}")
            seen.add(c.id)
        object.__setattr__(self, "chunks", chunks)
        object.__setattr__(self, "manifest", _build_manifest(chunks))

    def __len__(self):
        return len(self.chunks)

    def __iter__(self):
        return iter(self.chunks)

    def texts(self) -> list[str]:
        return [c.text for c in self.chunks]

    def ids(self) -> set[str]:
        return {c.id for c in self.chunks}


@dataclass(frozen=True)
class ParallelPair:
    """A sentence and its translation in another language."""

    id: str
    source_text: str
    target_text: str

    def __post_init__(self):
        if not self.source_text or not self.target_text:
            raise FormatError(f"pair {self.id!r}: both sides must be non-empty")


@dataclass(frozen=True)
class AnnotatedSentence:
    """Token sequence paired with one tag per token."""

    tokens: tuple
    tags: tuple

    def __init__(self, tokens: Iterable[str], tags: Iterable[str]):
        tokens = tuple(tokens)
        tags = tuple(tags)
        if len(tokens) != len(tags):
            raise FormatError(
                f"token/tag length mismatch: {len(tokens)} vs {len(tags)}"
            )
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "tags", tags)

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class SplitSpec:
    """Train fraction and shuffle seed for a two-way corpus split."""

    train_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise FormatError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )


def ingest(lines: Iterable[str | bytes], source: str) -> Corpus:
    """Build a corpus from raw text records.

    One chunk per non-blank record, normalized (NFC, collapsed
    whitespace, trimmed). Byte records must be valid UTF-8.
    """
    chunks = []
    for index, line in enumerate(lines):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise DecodeError(
                    f"record {index}: invalid UTF-8 at byte offset {exc.start}",
                    record_index=index,
                    byte_offset=exc.start,
                ) from exc
        text = normalize_text(line)
        if not text:
            continue
        chunks.append(TextChunk(id=f"{source}:{len(chunks):06d}", text=text, source=source))
    if not chunks:
        raise EmptyInputError("no non-blank records in input")
    return Corpus(chunks)


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Seeded shuffle then cut at floor(train_fraction * N).

    The two halves partition the input: same chunks, disjoint ids.
    """
    n = len(corpus)
    if n < 2:
        raise TooSmallError(f"corpus with {n} chunk(s) cannot be split")
    order = np.random.default_rng(spec.seed).permutation(n)
    cut = int(spec.train_fraction * n)
    shuffled = [corpus.chunks[i] for i in order]
    return Corpus(shuffled[:cut]), Corpus(shuffled[cut:])


def filter_by_label(
    corpus: Corpus, predicate: Callable[[TextChunk], bool]
) -> Corpus:
    """Keep exactly the chunks satisfying the predicate."""
    return Corpus(c for c in corpus.chunks if predicate(c))


def relabel(chunk: TextChunk, **labels) -> TextChunk:
    """Return a copy of the chunk with label fields replaced."""
    return replace(chunk, **labels)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def chunk_to_dict(chunk: TextChunk) -> dict:
    out = {"id": chunk.id, "text": chunk.text, "source": chunk.source}
    for key in ("language", "variant", "quality"):
        value = getattr(chunk, key)
        if value is not None:
            out[key] = value
    return out


def chunk_from_dict(obj: dict) -> TextChunk:
    unknown = set(obj) - set(_CHUNK_KEYS)
    if unknown:
        raise FormatError(f"unknown chunk keys: {sorted(unknown)}")
    try:
        return TextChunk(
            id=obj["id"],
            text=obj["text"],
            source=obj["source"],
            language=obj.get("language"),
            variant=obj.get("variant"),
            quality=obj.get("quality"),
        )
    except KeyError as exc:
        raise FormatError(f"chunk record missing key {exc}") from exc


def corpus_to_jsonl(chunks: Sequence[TextChunk]) -> str:
    """One JSON object per line, stable key order; shared by file and
    service exports so both emit identical bytes."""
    return "".join(
        json.dumps(chunk_to_dict(chunk), ensure_ascii=False) + "\n"
        for chunk in chunks
    )


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write one JSON object per line, stable key order, UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(corpus_to_jsonl(corpus.chunks))


def read_corpus(path: str | Path) -> Corpus:
    chunks = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            chunks.append(chunk_from_dict(obj))
    return Corpus(chunks)


def write_parallel(pairs: Sequence[ParallelPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            for side in (pair.source_text, pair.target_text):
                if "\t" in side or "\n" in side:
                    raise FormatError(
                        f"pair {pair.id!r}: text contains TSV delimiters"
                    )
            fh.write(f"{pair.id}\t{pair.source_text}\t{pair.target_text}\n")


def read_parallel(path: str | Path) -> list[ParallelPair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FormatError(
                    f"{path}:{lineno}: expected 3 TSV columns, got {len(fields)}"
                )
            pairs.append(ParallelPair(id=fields[0], source_text=fields[1],
                                      target_text=fields[2]))
    return pairs


def tagged_to_conll(sentences: Sequence[AnnotatedSentence]) -> str:
    """CoNLL-style text: token<TAB>tag lines, blank line between
    sentences; shared by file and service exports."""
    blocks = []
    for sent in sentences:
        blocks.append("".join(f"{token}\t{tag}\n"
                              for token, tag in zip(sent.tokens, sent.tags)))
    return "\n".join(blocks)


def write_tagged(sentences: Sequence[AnnotatedSentence], path: str | Path) -> None:
    """CoNLL-style: token<TAB>tag per line, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(tagged_to_conll(sentences))


def read_tagged(path: str | Path) -> list[AnnotatedSentence]:
    sentences = []
    tokens, tags = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                if tokens:
                    sentences.append(AnnotatedSentence(tokens, tags))
                    tokens, tags = [], []
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(
                    f"{path}:{lineno}: expected token<TAB>tag, got {line!r}"
                )
            tokens.append(fields[0])
            tags.append(fields[1])
    if tokens:
        sentences.append(AnnotatedSentence(tokens, tags))
    return sentences
