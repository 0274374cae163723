"""One-vs-rest precision/recall/F1 over a fixed label inventory.

Used by both the text classifiers and the PoS tagger. A label absent
from both gold and predictions gets P/R/F1 of 0 and can be excluded
from the macro average. Micro-F1 equals plain accuracy for
single-label problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyInputError


@dataclass(frozen=True)
class LabelScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    per_label: dict
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float

    def as_dict(self) -> dict:
        return {
            "per_label": {
                label: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for label, s in self.per_label.items()
            },
            "accuracy": self.accuracy,
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "micro": {
                "precision": self.micro_precision,
                "recall": self.micro_recall,
                "f1": self.micro_f1,
            },
        }


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def score_labels(
    gold: Sequence[str],
    predicted: Sequence[str],
    labels: Sequence[str],
    exclude_absent_from_macro: bool = True,
) -> EvalReport:
    """Confusion-count P/R/F1 per label plus macro/micro aggregates."""
    if not gold:
        raise EmptyInputError("cannot evaluate on empty data")
    if len(gold) != len(predicted):
        raise EmptyInputError(
            f"gold/predicted length mismatch: {len(gold)} vs {len(predicted)}"
        )

    tp = {label: 0 for label in labels}
    fp = {label: 0 for label in labels}
    fn = {label: 0 for label in labels}
    support = {label: 0 for label in labels}
    correct = 0
    for g, p in zip(gold, predicted):
        support[g] += 1
        if g == p:
            correct += 1
            tp[g] += 1
        else:
            fn[g] += 1
            fp[p] += 1

    per_label = {}
    macro_terms = []
    for label in labels:
        precision = _safe_div(tp[label], tp[label] + fp[label])
        recall = _safe_div(tp[label], tp[label] + fn[label])
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_label[label] = LabelScores(precision, recall, f1, support[label])
        absent = support[label] == 0 and tp[label] + fp[label] == 0
        if not (absent and exclude_absent_from_macro):
            macro_terms.append((precision, recall, f1))

    n_macro = len(macro_terms)
    macro_p = _safe_div(sum(t[0] for t in macro_terms), n_macro)
    macro_r = _safe_div(sum(t[1] for t in macro_terms), n_macro)
    macro_f = _safe_div(sum(t[2] for t in macro_terms), n_macro)

    total_tp = sum(tp.values())
    total_fp = sum(fp.values())
    total_fn = sum(fn.values())
    micro_p = _safe_div(total_tp, total_tp + total_fp)
    micro_r = _safe_div(total_tp, total_tp + total_fn)
    micro_f = _safe_div(2 * micro_p * micro_r, micro_p + micro_r)

    return EvalReport(
        per_label=per_label,
        accuracy=correct / len(gold),
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f,
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f,
    )
