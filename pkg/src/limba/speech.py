"""Speech evaluation: WER for recognition, MCD and MOS for synthesis.

WER aligns reference and hypothesis transcripts with unit-cost dynamic
programming and reports (S + D + I) / N together with the error
breakdown. MCD compares mel-cepstral frame sequences (coefficient 0
excluded upstream) under a DTW alignment, reporting the mean per-pair
distortion along the optimal path. MOS aggregates 1-5 listener scores
per item and overall.

Raw audio is out of scope: frame sequences arrive as JSON produced by
an external feature extractor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyInputError, FormatError

# Reference hyper-parameters for fine-tuning a Whisper-style recognizer
# on exported transcript data with an external trainer; recorded for
# reproducibility, not consumed by the metrics below.
WHISPER_FINETUNE_DEFAULTS = {
    "epochs": 15,
    "batch_size": 4,
    "learning_rate": 1e-5,
    "weight_decay": 0.01,
    "loss": "wer",
}

_MCD_SCALE = 10.0 / math.log(10.0)


@dataclass(frozen=True)
class Transcript:
    words: tuple

    def __init__(self, words: Sequence[str]):
        words = tuple(words)
        for word in words:
            if not isinstance(word, str) or not word:
                raise FormatError("transcript contains an empty or non-string token")
        object.__setattr__(self, "words", words)

    def __len__(self):
        return len(self.words)


@dataclass(frozen=True)
class FrameSequence:
    """Mel-cepstral coefficient vectors, one per frame, fixed dim K >= 1."""

    frames: np.ndarray  # shape (n_frames, dim), float64

    def __init__(self, frames):
        array = np.asarray(frames, dtype=np.float64)
        if array.ndim != 2:
            raise FormatError(
                f"frames must be a 2-D array, got {array.ndim} dimension(s)")
        if array.shape[0] < 1:
            raise EmptyInputError("frame sequence needs >= 1 frames")
        if array.shape[1] < 1:
            raise FormatError("frame dimension must be >= 1")
        if not np.all(np.isfinite(array)):
            raise FormatError("frame coefficients must be finite")
        object.__setattr__(self, "frames", array)

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])

    def __len__(self):
        return int(self.frames.shape[0])


@dataclass(frozen=True)
class MosRecord:
    item_id: str
    scores: tuple

    def __init__(self, item_id: str, scores: Sequence[int]):
        if not item_id:
            raise FormatError("item_id must be non-empty")
        scores = tuple(scores)
        if not scores:
            raise EmptyInputError(f"item {item_id!r} has no scores")
        for score in scores:
            if not isinstance(score, int) or isinstance(score, bool) \
                    or not 1 <= score <= 5:
                raise FormatError(
                    f"item {item_id!r}: score {score!r} outside 1..5")
        object.__setattr__(self, "item_id", item_id)
        object.__setattr__(self, "scores", scores)


class WerResult(NamedTuple):
    wer: float
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int


def wer(reference: Transcript, hypothesis: Transcript) -> WerResult:
    """Minimal-edit word error rate with S/D/I breakdown.

    The backtrace resolves cost ties by preferring substitution over
    deletion over insertion, so the breakdown is deterministic; the
    total S + D + I is the DP minimum regardless.
    """
    ref, hyp = reference.words, hypothesis.words
    n, m = len(ref), len(hyp)
    if n == 0:
        raise EmptyInputError("reference transcript is empty")
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)
    dist[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            dele = dist[i - 1, j] + 1
            ins = dist[i, j - 1] + 1
            dist[i, j] = min(sub, dele, ins)
    subs = dels = inss = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and \
                dist[i, j] == dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            inss += 1
            j -= 1
    return WerResult((subs + dels + inss) / n, subs, dels, inss, n)


def frame_distortion(x: np.ndarray, y: np.ndarray) -> float:
    """(10/ln 10) * sqrt(2 * sum((x_i - y_i)^2)) for one frame pair.

    Uses np.sum rather than np.dot so the value is bit-identical to
    the vectorized cost matrix built inside mcd (BLAS dot may fuse
    multiply-adds and round differently).
    """
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return _MCD_SCALE * math.sqrt(2.0 * float(np.sum(diff * diff)))


def mcd(reference: FrameSequence, synthesized: FrameSequence) -> float:
    """Mean frame distortion along the optimal DTW path.

    Steps are diagonal/horizontal/vertical with per-cell cost equal to
    the frame distortion; the reported value is the optimal path's
    total cost divided by its number of aligned pairs (backtrace
    prefers diagonal, then vertical, then horizontal on ties).
    """
    if reference.dim != synthesized.dim:
        raise FormatError(
            f"dimension mismatch: {reference.dim} vs {synthesized.dim}")
    a, b = reference.frames, synthesized.frames
    diff = a[:, None, :] - b[None, :, :]
    cost = _MCD_SCALE * np.sqrt(2.0 * np.sum(diff * diff, axis=2))
    n, m = cost.shape
    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if i > 0:
                best = min(best, acc[i - 1, j])
            if j > 0:
                best = min(best, acc[i, j - 1])
            acc[i, j] = cost[i, j] + best
    # path length for the mean: walk back preferring diag > vert > horiz
    i, j = n - 1, m - 1
    length = 1
    while i > 0 or j > 0:
        if i > 0 and j > 0 and acc[i, j] == cost[i, j] + acc[i - 1, j - 1]:
            i, j = i - 1, j - 1
        elif i > 0 and acc[i, j] == cost[i, j] + acc[i - 1, j]:
            i -= 1
        else:
            j -= 1
        length += 1
    return float(acc[n - 1, m - 1]) / length


@dataclass(frozen=True)
class MosReport:
    per_item: dict  # item_id -> mean score
    overall: float  # weighted by score count

    def as_dict(self) -> dict:
        return {"per_item": dict(sorted(self.per_item.items())),
                "overall": self.overall}


def mos(records: Sequence[MosRecord]) -> MosReport:
    """Arithmetic per-item means; overall mean over all raw scores."""
    if not records:
        raise EmptyInputError("no MOS records")
    by_item: dict = {}
    for record in records:
        by_item.setdefault(record.item_id, []).extend(record.scores)
    per_item = {item: sum(scores) / len(scores)
                for item, scores in by_item.items()}
    all_scores = [s for scores in by_item.values() for s in scores]
    return MosReport(per_item=per_item,
                     overall=sum(all_scores) / len(all_scores))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def read_transcript_pairs(path: str | Path) -> list:
    """Read `reference<TAB>hypothesis` lines into Transcript pairs."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(
                    f"line {lineno}: expected reference<TAB>hypothesis")
            pairs.append((Transcript(fields[0].split()),
                          Transcript(fields[1].split())))
    if not pairs:
        raise EmptyInputError(f"no transcript pairs in {path}")
    return pairs


def read_frames(path: str | Path) -> FrameSequence:
    """Read a `{dim, frames}` JSON file into a FrameSequence."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        dim, frames = payload["dim"], payload["frames"]
    except (TypeError, KeyError):
        raise FormatError(f"{path}: expected keys 'dim' and 'frames'") from None
    sequence = FrameSequence(frames)
    if sequence.dim != dim:
        raise FormatError(
            f"{path}: declared dim {dim} != frame dim {sequence.dim}")
    return sequence


def read_mos_records(path: str | Path) -> list:
    """Read a JSON array of `{item_id, scores}` records."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, list):
        raise FormatError(f"{path}: expected a JSON array of records")
    return [MosRecord(rec["item_id"], rec["scores"]) for rec in payload]
