"""Staged corpus-to-model runs with reproducible manifests.

A run executes a linear list of declared stages (ingest, filters,
split, tokenize, tagger/metric/LM stages) against one output
directory, writing each stage's artifacts under ``NN_stage/`` and a
``manifest.json`` recording parameters, input/output digests, derived
seeds, and summary metrics. All randomness flows from the single
global seed: each stage draws its own seed from a hash of
``seed:index:name``, so reruns with identical config and inputs
reproduce identical artifact digests.

Config files are JSON::

    {
      "seed": 7,
      "stages": [
        {"stage": "ingest", "input": "raw.txt", "source": "web"},
        {"stage": "split", "train_fraction": 0.8},
        {"stage": "tokenize", "vocab_size": 120},
        {"stage": "lm_train", "arch": "ngram", "order": 3}
      ]
    }

Validation reports every problem at once, not just the first.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__, bpe, classify, hmm, lm, mt
from .corpus import (
    Corpus,
    SplitSpec,
    ingest,
    read_corpus,
    read_tagged,
    relabel,
    split,
    write_corpus,
)
from .errors import ContractError, EmptyInputError, LimbaError

logger = logging.getLogger(__name__)


class PipelineConfigError(LimbaError):
    """Aggregated validation failures; `errors` lists all of them."""

    def __init__(self, errors: Sequence[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class StageFailure(LimbaError):
    """A stage raised during run(); the failed manifest was written."""

    def __init__(self, stage: str, cause: Exception, manifest_path: Path):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.manifest_path = manifest_path


@dataclass(frozen=True)
class StageSpec:
    index: int
    name: str
    params: dict


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    stages: tuple
    base_dir: Path  # directory input paths are resolved against
    out_dir: Path | None = None

    def resolve(self, relative: str) -> Path:
        path = Path(relative)
        return path if path.is_absolute() else self.base_dir / path


@dataclass(frozen=True)
class RunManifest:
    version: str
    seed: int
    status: str  # "complete" | "failed"
    stages: tuple  # one dict per executed stage
    error: str | None = None

    def as_dict(self) -> dict:
        out = {
            "version": self.version,
            "seed": self.seed,
            "status": self.status,
            "stages": list(self.stages),
        }
        if self.error is not None:
            out["error"] = self.error
        return out


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _is_fraction(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) \
        and 0.0 < v < 1.0


def _is_unit(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) \
        and 0.0 <= v <= 1.0


def _is_posint(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _is_nonneg(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0


def _is_positive(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0


def _is_str(v) -> bool:
    return isinstance(v, str) and bool(v)


def _is_str_list(v) -> bool:
    return isinstance(v, list) and v and all(_is_str(x) for x in v)


# name -> (required {param: (check, description)},
#          optional {param: (check, description)})
_STAGES = {
    "ingest": (
        {"input": (_is_str, "path"), "source": (_is_str, "non-empty string")},
        {},
    ),
    "quality_filter": (
        {"train": (_is_str, "path")},
        {"threshold": (_is_unit, "number in [0, 1]"),
         "epochs": (_is_posint, "integer >= 1")},
    ),
    "identify": (
        {"train": (_is_str, "path")},
        {"keep": (_is_str_list, "non-empty list of labels"),
         "labels": (_is_str_list, "non-empty list of labels"),
         "epochs": (_is_posint, "integer >= 1")},
    ),
    "split": (
        {"train_fraction": (_is_fraction, "number in (0, 1)")},
        {},
    ),
    "tokenize": (
        {"vocab_size": (_is_posint, "integer >= 1")},
        {},
    ),
    "pos_train": (
        {"train": (_is_str, "path")},
        {"smoothing_k": (_is_nonneg, "number >= 0")},
    ),
    "mt_eval": (
        {"pairs": (_is_str, "path")},
        {"max_n": (_is_posint, "integer >= 1")},
    ),
    "lm_train": (
        {"arch": (lambda v: v in ("rnn", "ngram"), '"rnn" or "ngram"')},
        {"epochs": (_is_posint, "integer >= 1"),
         "learning_rate": (_is_positive, "number > 0"),
         "clip_norm": (_is_positive, "number > 0"),
         "bptt_window": (_is_posint, "integer >= 1"),
         "batch_size": (_is_posint, "integer >= 1"),
         "hidden_size": (_is_posint, "integer >= 1"),
         "order": (_is_posint, "integer >= 1"),
         "smoothing_k": (_is_positive, "number > 0")},
    ),
}

_PATH_PARAMS = ("input", "train", "pairs")
_NEEDS_CORPUS = ("quality_filter", "identify", "split", "tokenize")


def _line_of(text: str, needle: str) -> int | None:
    for lineno, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return lineno
    return None


def validate_config(
    config_text: str,
    base_dir: str | Path = ".",
    out_dir: str | Path | None = None,
) -> PipelineConfig:
    """Parse and cross-check a config, collecting every error.

    Raises PipelineConfigError listing all problems; input paths are
    resolved against ``base_dir`` (normally the config file's parent)
    and must exist.
    """
    base_dir = Path(base_dir)
    errors: list = []
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise PipelineConfigError([f"invalid JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise PipelineConfigError(["config must be a JSON object"])

    for key in doc:
        if key not in ("seed", "stages"):
            errors.append(f"unknown top-level key {key!r}")
    seed = doc.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append('"seed" must be a non-negative integer')
        seed = 0
    raw_stages = doc.get("stages")
    if not isinstance(raw_stages, list) or not raw_stages:
        errors.append('"stages" must be a non-empty array')
        raw_stages = []

    stages = []
    seen = []
    for i, raw in enumerate(raw_stages):
        locus = f"stages[{i}]"
        if not isinstance(raw, dict):
            errors.append(f"{locus}: must be an object")
            continue
        name = raw.get("stage")
        if name not in _STAGES:
            line = _line_of(config_text, f'"{name}"') if isinstance(name, str) \
                else None
            where = f" (line {line})" if line else ""
            errors.append(f"{locus}{where}: unknown stage {name!r}")
            continue
        required, optional = _STAGES[name]
        params = {k: v for k, v in raw.items() if k != "stage"}
        for key, (check, description) in required.items():
            if key not in params:
                errors.append(f"{locus} ({name}): missing parameter {key!r}")
            elif not check(params[key]):
                errors.append(
                    f"{locus} ({name}): {key!r} must be {description}, "
                    f"got {params[key]!r}")
        for key, value in params.items():
            if key in required:
                continue
            if key not in optional:
                errors.append(f"{locus} ({name}): unknown parameter {key!r}")
            else:
                check, description = optional[key]
                if not check(value):
                    errors.append(
                        f"{locus} ({name}): {key!r} must be {description}, "
                        f"got {value!r}")
        for key in _PATH_PARAMS:
            value = params.get(key)
            if isinstance(value, str) and value:
                resolved = base_dir / value if not Path(value).is_absolute() \
                    else Path(value)
                if not resolved.is_file():
                    errors.append(
                        f"{locus} ({name}): input file not found: {value}")
        if name in _NEEDS_CORPUS and "ingest" not in seen:
            errors.append(f"{locus} ({name}): requires an earlier ingest stage")
        if name == "lm_train" and "tokenize" not in seen:
            errors.append(f"{locus} ({name}): requires an earlier tokenize stage")
        seen.append(name)
        stages.append(StageSpec(index=i, name=name, params=params))

    if errors:
        raise PipelineConfigError(errors)
    return PipelineConfig(
        seed=seed,
        stages=tuple(stages),
        base_dir=base_dir,
        out_dir=Path(out_dir) if out_dir is not None else None,
    )


def load_config(path: str | Path, out_dir: str | Path | None = None) -> PipelineConfig:
    path = Path(path)
    return validate_config(path.read_text(encoding="utf-8"),
                           base_dir=path.parent, out_dir=out_dir)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def _stage_seed(global_seed: int, index: int, name: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{index}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _write_json(payload, path: Path) -> None:
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n",
                    encoding="utf-8")


def _labeled_quality(corpus_path: Path):
    data = [
        (chunk, classify.HIGH_QUALITY if chunk.quality == "high"
         else classify.LOW_QUALITY)
        for chunk in read_corpus(corpus_path)
        if chunk.quality is not None
    ]
    if not data:
        raise EmptyInputError(f"no quality-labeled chunks in {corpus_path}")
    return data


def _run_ingest(state, config, spec, stage_dir, seed):
    input_path = config.resolve(spec.params["input"])
    with open(input_path, "rb") as fh:
        corpus = ingest(fh.read().splitlines(), source=spec.params["source"])
    out = stage_dir / "corpus.jsonl"
    write_corpus(corpus, out)
    state["corpus"] = corpus
    return [input_path], [out], {"chunks": len(corpus)}


def _run_quality_filter(state, config, spec, stage_dir, seed):
    train_path = config.resolve(spec.params["train"])
    train_config = classify.TrainConfig(
        epochs=spec.params.get("epochs", 30), seed=seed)
    model = classify.train_classifier(
        _labeled_quality(train_path),
        classify.LabelSet(classify.QUALITY_LABELSET),
        train_config,
    )
    threshold = spec.params.get("threshold", 0.5)
    before = len(state["corpus"])
    filtered = classify.filter_corpus(model, state["corpus"], threshold)
    model_out = stage_dir / "quality_model.json"
    corpus_out = stage_dir / "filtered.jsonl"
    classify.save_model(model, model_out)
    write_corpus(filtered, corpus_out)
    state["corpus"] = filtered
    return [train_path], [model_out, corpus_out], {
        "kept": len(filtered), "dropped": before - len(filtered),
        "threshold": threshold,
    }


def _run_identify(state, config, spec, stage_dir, seed):
    train_path = config.resolve(spec.params["train"])
    data = [(chunk, chunk.variant) for chunk in read_corpus(train_path)
            if chunk.variant is not None]
    if not data:
        raise EmptyInputError(f"no variant-labeled chunks in {train_path}")
    labels = spec.params.get("labels") or sorted({label for _, label in data})
    train_config = classify.TrainConfig(
        epochs=spec.params.get("epochs", 30), seed=seed)
    model = classify.train_classifier(data, classify.LabelSet(labels),
                                      train_config)
    keep = set(spec.params.get("keep", labels))
    kept = []
    counts: dict = {}
    for chunk in state["corpus"]:
        label = classify.predict(model, chunk.text)[0]
        counts[label] = counts.get(label, 0) + 1
        if label in keep:
            kept.append(relabel(chunk, variant=label))
    filtered = Corpus(kept)
    model_out = stage_dir / "variant_model.json"
    corpus_out = stage_dir / "labeled.jsonl"
    classify.save_model(model, model_out)
    write_corpus(filtered, corpus_out)
    state["corpus"] = filtered
    return [train_path], [model_out, corpus_out], {
        "kept": len(filtered), "predicted": dict(sorted(counts.items())),
    }


def _run_split(state, config, spec, stage_dir, seed):
    train_corpus, eval_corpus = split(
        state["corpus"],
        SplitSpec(train_fraction=spec.params["train_fraction"], seed=seed),
    )
    train_out = stage_dir / "train.jsonl"
    eval_out = stage_dir / "eval.jsonl"
    write_corpus(train_corpus, train_out)
    write_corpus(eval_corpus, eval_out)
    state["train_corpus"] = train_corpus
    state["eval_corpus"] = eval_corpus
    return [], [train_out, eval_out], {
        "train_chunks": len(train_corpus), "eval_chunks": len(eval_corpus),
    }


def _run_tokenize(state, config, spec, stage_dir, seed):
    source = state["train_corpus"] if "train_corpus" in state else state["corpus"]
    model = bpe.train_bpe(source, spec.params["vocab_size"])
    model_out = stage_dir / "tokenizer.json"
    bpe.save_model(model, model_out)
    outputs = [model_out]
    summary = {"vocab_size": model.vocab_size,
               "merges": len(model.merges),
               "reached_target": model.reached_target}
    for part in ("train", "eval"):
        if f"{part}_corpus" in state:
            corpus = state[f"{part}_corpus"]
        elif part == "train":
            corpus = state["corpus"]
        else:
            continue
        encoded = [bpe.encode(model, chunk.text) for chunk in corpus]
        ids_out = stage_dir / f"{part}_ids.json"
        _write_json([list(e.ids) for e in encoded], ids_out)
        outputs.append(ids_out)
        state[f"{part}_ids"] = encoded
        summary[f"{part}_sequences"] = len(encoded)
    state["tokenizer"] = model
    return [], outputs, summary


def _run_pos_train(state, config, spec, stage_dir, seed):
    train_path = config.resolve(spec.params["train"])
    sentences = read_tagged(train_path)
    model = hmm.train_hmm(sentences, hmm.TagSet(),
                          smoothing_k=spec.params.get("smoothing_k", 0.1))
    model_out = stage_dir / "tagger.json"
    hmm.save_model(model, model_out)
    report = hmm.evaluate_tagger(model, sentences)
    report_out = stage_dir / "tagger_train_eval.json"
    _write_json(report.as_dict(), report_out)
    return [train_path], [model_out, report_out], {
        "sentences": len(sentences),
        "train_accuracy": report.accuracy,
        "train_macro_f1": report.macro_f1,
    }


def _run_mt_eval(state, config, spec, stage_dir, seed):
    pairs_path = config.resolve(spec.params["pairs"])
    pairs = mt.read_pairs(pairs_path)
    report = mt.evaluate_pairs(pairs, max_n=spec.params.get("max_n", 4))
    report_out = stage_dir / "mt_report.json"
    mt.write_report(report, report_out)
    return [pairs_path], [report_out], {
        "pairs": len(pairs), "bleu": report.bleu,
        "ter": report.ter, "meteor": report.meteor,
    }


def _run_lm_train(state, config, spec, stage_dir, seed):
    tokenizer = state["tokenizer"]
    train_ids = state.get("train_ids") or []
    if not train_ids:
        raise EmptyInputError("tokenize produced no training sequences")
    eval_ids = state.get("eval_ids") or []
    vocab_size = tokenizer.vocab_size
    params = spec.params
    summary: dict = {"arch": params["arch"], "vocab_size": vocab_size}
    if params["arch"] == "rnn":
        train_config = lm.TrainConfig(
            epochs=params.get("epochs", 10),
            learning_rate=params.get("learning_rate", 0.1),
            clip_norm=params.get("clip_norm", 5.0),
            bptt_window=params.get("bptt_window", 32),
            batch_size=params.get("batch_size", 16),
            seed=seed,
        )
        model = lm.train_rnn(train_ids, vocab_size, train_config,
                             hidden_size=params.get("hidden_size", 64))
        model_out = stage_dir / "lm_rnn.bin"
        lm.save_rnn(model, model_out)
        summary["final_train_loss"] = model.train_loss_history[-1]
    else:
        model = lm.train_ngram(
            train_ids,
            order=params.get("order", 3),
            smoothing_k=params.get("smoothing_k", 0.1),
            vocab_size=vocab_size,
        )
        model_out = stage_dir / "lm_ngram.json"
        lm.save_ngram(model, model_out)
    summary["train_perplexity"] = lm.perplexity(model, train_ids)
    if any(len(e.ids) for e in eval_ids):
        summary["eval_perplexity"] = lm.perplexity(model, eval_ids)
    return [], [model_out], summary


_RUNNERS = {
    "ingest": _run_ingest,
    "quality_filter": _run_quality_filter,
    "identify": _run_identify,
    "split": _run_split,
    "tokenize": _run_tokenize,
    "pos_train": _run_pos_train,
    "mt_eval": _run_mt_eval,
    "lm_train": _run_lm_train,
}


def _write_manifest(manifest: RunManifest, out_dir: Path) -> Path:
    final = out_dir / "manifest.json"
    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(
        json.dumps(manifest.as_dict(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")
    os.replace(tmp, final)
    return final


def run(config: PipelineConfig) -> RunManifest:
    """Execute all stages in order; write manifest.json atomically.

    The output directory is locked for the duration of the run. On a
    stage failure the manifest (status "failed", completed stages, the
    error) is still written and StageFailure is raised.
    """
    if config.out_dir is None:
        raise ContractError("run() needs a config with an output directory")
    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        lock_fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ContractError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if that run is dead)") from None
    os.write(lock_fd, str(os.getpid()).encode())
    os.close(lock_fd)

    state: dict = {}
    entries: list = []
    try:
        for spec in config.stages:
            seed = _stage_seed(config.seed, spec.index, spec.name)
            stage_dir = out_dir / f"{spec.index:02d}_{spec.name}"
            stage_dir.mkdir(parents=True, exist_ok=True)
            started = time.perf_counter()
            logger.info("stage %d (%s) starting", spec.index, spec.name)
            try:
                inputs, outputs, summary = _RUNNERS[spec.name](
                    state, config, spec, stage_dir, seed)
            except Exception as exc:
                manifest = RunManifest(
                    version=__version__,
                    seed=config.seed,
                    status="failed",
                    stages=tuple(entries),
                    error=f"stage {spec.index} ({spec.name}): {exc}",
                )
                path = _write_manifest(manifest, out_dir)
                raise StageFailure(spec.name, exc, path) from exc
            entries.append({
                "index": spec.index,
                "stage": spec.name,
                "params": spec.params,
                "seed": seed,
                "input_digests": {str(p): _sha256(p) for p in inputs},
                "outputs": [str(p.relative_to(out_dir)) for p in outputs],
                "output_digests": {
                    str(p.relative_to(out_dir)): _sha256(p) for p in outputs
                },
                "wall_time_s": round(time.perf_counter() - started, 6),
                "summary": summary,
            })
        manifest = RunManifest(
            version=__version__,
            seed=config.seed,
            status="complete",
            stages=tuple(entries),
        )
        _write_manifest(manifest, out_dir)
        return manifest
    finally:
        lock.unlink(missing_ok=True)
