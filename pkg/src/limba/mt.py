"""Translation evaluation: corpus BLEU, TER, and METEOR.

All three metrics operate on whitespace-pre-tokenized hypothesis /
reference pairs and never re-tokenize. Typical use::

    pairs = read_pairs("hyp_ref.tsv")
    report = evaluate_pairs(pairs)
    print(report.bleu, report.ter, report.meteor)

BLEU is corpus-level with clipped modified n-gram precisions, uniform
1/max_n weights, and brevity penalty min(1, exp(1 - r/c)); zero-count
precisions are floored by add-one smoothing on numerator and
denominator so short segments stay defined. TER applies greedy block
shifts (unit cost, accepted only when a shift strictly lowers the
remaining edit distance) before unit-cost edit distance, normalized by
reference length. METEOR matches unigrams in two stages (exact, then
suffix-stem), combines precision/recall into a weighted harmonic mean,
and applies a fragmentation penalty over match chunks.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import EmptyInputError, FormatError


def _check_tokens(tokens, what: str) -> tuple:
    tokens = tuple(tokens)
    for tok in tokens:
        if not isinstance(tok, str) or not tok:
            raise FormatError(f"{what} contains an empty or non-string token")
    return tokens


@dataclass(frozen=True)
class EvalPair:
    """One hypothesis with one or more reference translations."""

    hypothesis: tuple
    references: tuple

    def __init__(self, hypothesis: Sequence[str], references: Sequence[Sequence[str]]):
        object.__setattr__(self, "hypothesis",
                           _check_tokens(hypothesis, "hypothesis"))
        refs = tuple(_check_tokens(r, "reference") for r in references)
        if not refs:
            raise EmptyInputError("at least one reference is required")
        object.__setattr__(self, "references", refs)


@dataclass(frozen=True)
class MtReport:
    bleu: float
    ter: float
    meteor: float
    per_pair: tuple  # one {"bleu", "ter", "meteor"} dict per pair

    def __post_init__(self):
        if not (0.0 <= self.bleu <= 1.0 and 0.0 <= self.meteor <= 1.0):
            raise FormatError("BLEU and METEOR must lie in [0, 1]")
        if self.ter < 0.0:
            raise FormatError("TER must be non-negative")

    def as_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "ter": self.ter,
            "meteor": self.meteor,
            "pairs": [dict(p) for p in self.per_pair],
        }


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(hyp_len: int, references) -> int:
    # ties between equally close reference lengths go to the shorter one
    return min((len(r) for r in references),
               key=lambda rl: (abs(rl - hyp_len), rl))


def bleu(pairs: Sequence[EvalPair], max_n: int = 4) -> float:
    """Corpus BLEU over all pairs; clip counts against the best reference."""
    if not pairs:
        raise EmptyInputError("no evaluation pairs")
    if max_n < 1:
        raise FormatError(f"max_n must be >= 1, got {max_n}")
    numerators = [0] * max_n
    denominators = [0] * max_n
    hyp_total = 0
    ref_total = 0
    for pair in pairs:
        hyp = pair.hypothesis
        hyp_total += len(hyp)
        ref_total += _closest_ref_length(len(hyp), pair.references)
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(hyp, n)
            if not hyp_counts:
                continue
            clip = Counter()
            for ref in pair.references:
                for gram, count in _ngrams(ref, n).items():
                    if count > clip[gram]:
                        clip[gram] = count
            numerators[n - 1] += sum(min(c, clip[g])
                                     for g, c in hyp_counts.items())
            denominators[n - 1] += sum(hyp_counts.values())
    if hyp_total == 0:
        return 0.0
    log_precision_sum = 0.0
    for num, den in zip(numerators, denominators):
        if num == 0:  # add-one floor keeps the log finite
            num, den = num + 1, den + 1
        log_precision_sum += math.log(num / den)
    brevity = min(1.0, math.exp(1.0 - ref_total / hyp_total))
    return brevity * math.exp(log_precision_sum / max_n)


# ---------------------------------------------------------------------------
# TER
# ---------------------------------------------------------------------------

def _edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        cur = [i] + [0] * len(b)
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j - 1] + cost, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return prev[len(b)]


def _shifted_edits(hypothesis: Sequence[str], reference: Sequence[str]) -> int:
    """Greedy block shifts (cost 1 each) followed by edit distance.

    Each round scans every (block, destination) move and applies the one
    with the largest strict reduction in remaining edit distance,
    scanning in (start, length, destination) order for determinism.
    """
    current = list(hypothesis)
    shifts = 0
    while True:
        base = _edit_distance(current, reference)
        if base == 0:
            return shifts
        best_distance = base
        best_candidate = None
        for start in range(len(current)):
            for length in range(1, len(current) - start + 1):
                block = current[start:start + length]
                rest = current[:start] + current[start + length:]
                for dest in range(len(rest) + 1):
                    if dest == start:
                        continue  # no-op move
                    candidate = rest[:dest] + block + rest[dest:]
                    d = _edit_distance(candidate, reference)
                    if d < best_distance:
                        best_distance = d
                        best_candidate = candidate
        if best_candidate is None:
            return shifts + base
        current = best_candidate
        shifts += 1


def ter(pairs: Sequence[EvalPair]) -> float:
    """Corpus TER = total edits / total reference length.

    Per pair the reference with the lowest TER is charged (first such
    reference on ties).
    """
    if not pairs:
        raise EmptyInputError("no evaluation pairs")
    total_edits = 0
    total_ref_len = 0
    for pair in pairs:
        best = None
        for ref in pair.references:
            if not ref:
                raise EmptyInputError("TER is undefined for an empty reference")
            edits = _shifted_edits(pair.hypothesis, ref)
            rate = edits / len(ref)
            if best is None or rate < best[0]:
                best = (rate, edits, len(ref))
        total_edits += best[1]
        total_ref_len += best[2]
    return total_edits / total_ref_len


# ---------------------------------------------------------------------------
# METEOR
# ---------------------------------------------------------------------------

def stem(word: str, suffixes: Sequence[str]) -> str:
    """Strip the longest listed suffix, keeping a non-empty stem."""
    best = ""
    for suffix in suffixes:
        if (len(suffix) > len(best) and len(word) > len(suffix)
                and word.endswith(suffix)):
            best = suffix
    return word[:len(word) - len(best)] if best else word


def _match(hypothesis, reference, suffixes):
    """Two-stage in-order unigram matching.

    Returns (hyp_index, ref_index) pairs: stage one matches exact
    surface forms, stage two matches suffix-stripped stems among the
    leftovers; both scan hypothesis left to right taking the first
    unmatched reference token.
    """
    matched_ref = [False] * len(reference)
    matches = []
    unmatched_hyp = []
    for h, token in enumerate(hypothesis):
        for r, ref_token in enumerate(reference):
            if not matched_ref[r] and ref_token == token:
                matched_ref[r] = True
                matches.append((h, r))
                break
        else:
            unmatched_hyp.append(h)
    if suffixes:
        ref_stems = [stem(t, suffixes) for t in reference]
        for h in unmatched_hyp:
            hyp_stem = stem(hypothesis[h], suffixes)
            for r, ref_stem in enumerate(ref_stems):
                if not matched_ref[r] and ref_stem == hyp_stem:
                    matched_ref[r] = True
                    matches.append((h, r))
                    break
    matches.sort()
    return matches


def _chunks(matches) -> int:
    chunks = 0
    prev = None
    for h, r in matches:
        if prev is None or h != prev[0] + 1 or r != prev[1] + 1:
            chunks += 1
        prev = (h, r)
    return chunks


def _meteor_single(hypothesis, reference, alpha, beta, gamma, suffixes) -> float:
    matches = _match(hypothesis, reference, suffixes)
    m = len(matches)
    if m == 0:
        return 0.0
    precision = m / len(hypothesis)
    recall = m / len(reference)
    f_mean = (precision * recall
              / (alpha * precision + (1.0 - alpha) * recall))
    penalty = gamma * (_chunks(matches) / m) ** beta
    return f_mean * (1.0 - penalty)


def meteor(
    pairs: Sequence[EvalPair],
    alpha: float = 0.9,
    beta: float = 3.0,
    gamma: float = 0.5,
    stem_suffixes: Sequence[str] = (),
) -> float:
    """Mean per-pair METEOR, best reference per pair.

    `stem_suffixes` configures the stage-two stemmer; the default empty
    list makes stemming the identity, so stage two adds nothing.
    """
    if not pairs:
        raise EmptyInputError("no evaluation pairs")
    if not 0.0 <= alpha <= 1.0:
        raise FormatError(f"alpha must be in [0, 1], got {alpha}")
    if beta <= 0.0:
        raise FormatError(f"beta must be > 0, got {beta}")
    if not 0.0 <= gamma <= 1.0:
        raise FormatError(f"gamma must be in [0, 1], got {gamma}")
    total = 0.0
    for pair in pairs:
        total += max(_meteor_single(pair.hypothesis, ref,
                                    alpha, beta, gamma, stem_suffixes)
                     for ref in pair.references)
    return total / len(pairs)


# ---------------------------------------------------------------------------
# Report assembly and I/O
# ---------------------------------------------------------------------------

def evaluate_pairs(
    pairs: Sequence[EvalPair],
    max_n: int = 4,
    alpha: float = 0.9,
    beta: float = 3.0,
    gamma: float = 0.5,
    stem_suffixes: Sequence[str] = (),
) -> MtReport:
    """Corpus scores plus per-pair breakdowns for all three metrics."""
    per_pair = tuple(
        {
            "bleu": bleu([pair], max_n),
            "ter": ter([pair]),
            "meteor": meteor([pair], alpha, beta, gamma, stem_suffixes),
        }
        for pair in pairs
    )
    return MtReport(
        bleu=bleu(pairs, max_n),
        ter=ter(pairs),
        meteor=meteor(pairs, alpha, beta, gamma, stem_suffixes),
        per_pair=per_pair,
    )


def read_pairs(path: str | Path) -> list:
    """Read `hypothesis<TAB>reference[<TAB>reference...]` lines."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise FormatError(
                    f"line {lineno}: expected hypothesis<TAB>reference")
            pairs.append(EvalPair(fields[0].split(),
                                  [f.split() for f in fields[1:]]))
    if not pairs:
        raise EmptyInputError(f"no evaluation pairs in {path}")
    return pairs


def write_report(report: MtReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
