"""Language models over encoded token-id sequences.

Two model families share one evaluation interface:

* ``RnnLmModel`` — a single-layer tanh recurrence trained from scratch
  with truncated backpropagation through time. One step computes
  ``h = tanh(E[x] @ W_in + h_prev @ W_hh + b_h)`` followed by a softmax
  over ``h @ W_out + b_out``.
* ``NgramLmModel`` — add-k smoothed count model, the baseline and
  cross-check oracle.

Scoring prepends a begin-of-sequence id so every token of a sequence
is a predicted position (the first token is conditioned on BOS);
padding ids are ignored everywhere. Defaults for the special ids match
the tokenizer's fixed layout.

Typical use::

    config = TrainConfig(epochs=30, learning_rate=0.05, seed=0)
    model = train_rnn(sequences, vocab_size=200, config=config)
    print(perplexity(model, held_out))
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bpe import BOS_ID, PAD_ID
from .errors import (
    DivergenceError,
    EmptyInputError,
    FormatError,
    InvalidIdError,
)

logger = logging.getLogger(__name__)

_INIT_SCALE = 0.08
_PARAM_ORDER = ("embedding", "recurrent_input", "recurrent_hidden",
                "hidden_bias", "output", "output_bias")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.1
    clip_norm: float = 5.0
    bptt_window: int = 32
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.bptt_window < 1 or self.batch_size < 1:
            raise FormatError("epochs, bptt_window, batch_size must be >= 1")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise FormatError("learning_rate and clip_norm must be positive")
        if self.seed < 0:
            raise FormatError("seed must be a non-negative integer")

    def as_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "clip_norm": self.clip_norm,
            "bptt_window": self.bptt_window,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class LmState:
    hidden: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.hidden)):
            raise FormatError("hidden state contains non-finite entries")


@dataclass(frozen=True)
class RnnLmModel:
    vocab_size: int
    hidden_size: int
    embedding: np.ndarray         # vocab x hidden
    recurrent_input: np.ndarray   # hidden x hidden
    recurrent_hidden: np.ndarray  # hidden x hidden
    hidden_bias: np.ndarray       # hidden
    output: np.ndarray            # hidden x vocab
    output_bias: np.ndarray       # vocab
    seed: int
    train_config: TrainConfig | None = field(default=None, compare=False)
    train_loss_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        v, h = self.vocab_size, self.hidden_size
        shapes = {
            "embedding": (v, h),
            "recurrent_input": (h, h),
            "recurrent_hidden": (h, h),
            "hidden_bias": (h,),
            "output": (h, v),
            "output_bias": (v,),
        }
        for name, expected in shapes.items():
            array = getattr(self, name)
            if array.shape != expected:
                raise FormatError(
                    f"{name} has shape {array.shape}, expected {expected}")
            if not np.all(np.isfinite(array)):
                raise FormatError(f"{name} contains non-finite values")


def initial_state(model: RnnLmModel) -> LmState:
    return LmState(np.zeros(model.hidden_size))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def lm_step(model: RnnLmModel, state: LmState, token_id: int):
    """One recurrence step: (next_state, next-token distribution)."""
    token_id = int(token_id)
    if not 0 <= token_id < model.vocab_size:
        raise InvalidIdError(
            f"token id {token_id} outside vocabulary of size {model.vocab_size}")
    pre = (model.embedding[token_id] @ model.recurrent_input
           + state.hidden @ model.recurrent_hidden
           + model.hidden_bias)
    hidden = np.tanh(pre)
    return LmState(hidden), _softmax(hidden @ model.output + model.output_bias)


# ---------------------------------------------------------------------------
# Training internals
# ---------------------------------------------------------------------------

def _sequence_ids(sequence) -> list:
    ids = sequence.ids if hasattr(sequence, "ids") else sequence
    return [int(i) for i in ids]


def _strip_pads(ids: Sequence[int], pad_id) -> list:
    if pad_id is None:
        return list(ids)
    return [i for i in ids if i != pad_id]


def _forward_backward(params: dict, inputs, targets, h_init, pad_id):
    """Summed cross-entropy loss/gradients over one window.

    Returns (loss_sum, count, grads, final_hidden); gradients are sums
    over counted positions so callers can pool windows before
    normalizing. Positions whose target equals ``pad_id`` are skipped.
    """
    emb, w_in, w_hh = (params["embedding"], params["recurrent_input"],
                       params["recurrent_hidden"])
    b_h, w_out, b_out = (params["hidden_bias"], params["output"],
                         params["output_bias"])
    steps = len(inputs)
    hidden_size = b_h.shape[0]
    states = np.empty((steps + 1, hidden_size))
    states[0] = h_init
    probs = np.empty((steps, b_out.shape[0]))
    loss_sum = 0.0
    count = 0
    for t in range(steps):
        pre = emb[inputs[t]] @ w_in + states[t] @ w_hh + b_h
        states[t + 1] = np.tanh(pre)
        probs[t] = _softmax(states[t + 1] @ w_out + b_out)
        if pad_id is None or targets[t] != pad_id:
            loss_sum -= np.log(probs[t][targets[t]])
            count += 1

    grads = {name: np.zeros_like(params[name]) for name in _PARAM_ORDER}
    dh_next = np.zeros(hidden_size)
    for t in range(steps - 1, -1, -1):
        if pad_id is None or targets[t] != pad_id:
            dlogits = probs[t].copy()
            dlogits[targets[t]] -= 1.0
            grads["output"] += np.outer(states[t + 1], dlogits)
            grads["output_bias"] += dlogits
            dh = dlogits @ w_out.T + dh_next
        else:
            dh = dh_next
        da = dh * (1.0 - states[t + 1] ** 2)
        grads["hidden_bias"] += da
        grads["recurrent_input"] += np.outer(emb[inputs[t]], da)
        grads["embedding"][inputs[t]] += da @ w_in.T
        grads["recurrent_hidden"] += np.outer(states[t], da)
        dh_next = da @ w_hh.T
    return loss_sum, count, grads, states[steps]


def loss_and_gradients(model: RnnLmModel, inputs, targets,
                       initial_hidden=None, pad_id=None):
    """Mean next-token cross-entropy and analytic parameter gradients.

    Exposed so gradients can be checked against finite differences.
    ``inputs`` and ``targets`` are equal-length id sequences; the
    returned gradients are of the mean loss over counted positions.
    """
    if len(inputs) != len(targets):
        raise FormatError("inputs and targets must have equal length")
    if not inputs:
        raise EmptyInputError("cannot score an empty window")
    params = {name: getattr(model, name) for name in _PARAM_ORDER}
    h_init = (np.zeros(model.hidden_size) if initial_hidden is None
              else np.asarray(initial_hidden, dtype=np.float64))
    loss_sum, count, grads, final_hidden = _forward_backward(
        params, list(inputs), list(targets), h_init, pad_id)
    if count == 0:
        return 0.0, grads, LmState(final_hidden)
    for name in grads:
        grads[name] /= count
    return loss_sum / count, grads, LmState(final_hidden)


def _corpus_mean_loss(params: dict, streams, pad_id) -> float:
    total, count = 0.0, 0
    hidden_size = params["hidden_bias"].shape[0]
    for inputs, targets in streams:
        loss_sum, n, _, _ = _forward_backward(
            params, inputs, targets, np.zeros(hidden_size), pad_id)
        total += loss_sum
        count += n
    return total / count if count else 0.0


def train_rnn(
    sequences: Sequence,
    vocab_size: int,
    config: TrainConfig,
    hidden_size: int = 64,
    bos_id: int = BOS_ID,
    pad_id: int | None = PAD_ID,
) -> RnnLmModel:
    """Truncated-BPTT SGD training, deterministic given seed and order.

    Each sequence is scored against its BOS-prepended shift; windows of
    ``config.bptt_window`` carry hidden state forward but stop gradient
    flow at their boundary. One SGD update per window batch with
    global-norm clipping at ``config.clip_norm``.
    """
    if vocab_size < 1 or hidden_size < 1:
        raise FormatError("vocab_size and hidden_size must be >= 1")
    if not 0 <= bos_id < vocab_size:
        raise InvalidIdError(f"bos_id {bos_id} outside vocabulary")
    streams = []
    for sequence in sequences:
        ids = _strip_pads(_sequence_ids(sequence), pad_id)
        for token in ids:
            if not 0 <= token < vocab_size:
                raise InvalidIdError(
                    f"token id {token} outside vocabulary of size {vocab_size}")
        if ids:
            streams.append(([bos_id] + ids[:-1], ids))
    if not streams:
        raise EmptyInputError("no non-empty training sequences")

    rng = np.random.default_rng(config.seed)
    shapes = {
        "embedding": (vocab_size, hidden_size),
        "recurrent_input": (hidden_size, hidden_size),
        "recurrent_hidden": (hidden_size, hidden_size),
        "hidden_bias": (hidden_size,),
        "output": (hidden_size, vocab_size),
        "output_bias": (vocab_size,),
    }
    params = {name: rng.uniform(-_INIT_SCALE, _INIT_SCALE, shapes[name])
              for name in _PARAM_ORDER}

    window = config.bptt_window
    history = []
    for epoch in range(1, config.epochs + 1):
        for start in range(0, len(streams), config.batch_size):
            batch = streams[start:start + config.batch_size]
            carry = [np.zeros(hidden_size) for _ in batch]
            longest = max(len(inputs) for inputs, _ in batch)
            for offset in range(0, longest, window):
                grads = {name: np.zeros(shapes[name]) for name in _PARAM_ORDER}
                count = 0
                for b, (inputs, targets) in enumerate(batch):
                    chunk_in = inputs[offset:offset + window]
                    if not chunk_in:
                        continue
                    chunk_out = targets[offset:offset + window]
                    loss_sum, n, g, carry[b] = _forward_backward(
                        params, chunk_in, chunk_out, carry[b], pad_id)
                    count += n
                    for name in grads:
                        grads[name] += g[name]
                if count == 0:
                    continue
                norm_sq = 0.0
                for name in grads:
                    grads[name] /= count
                    norm_sq += float(np.sum(grads[name] ** 2))
                scale = config.learning_rate
                norm = norm_sq ** 0.5
                if norm > config.clip_norm:
                    scale *= config.clip_norm / norm
                for name in params:
                    params[name] = params[name] - scale * grads[name]
        epoch_loss = _corpus_mean_loss(params, streams, pad_id)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(
                f"training loss became non-finite at epoch {epoch}",
                epoch=epoch)
        history.append(float(epoch_loss))
        logger.debug("epoch %d: mean loss %.6f", epoch, epoch_loss)

    return RnnLmModel(
        vocab_size=vocab_size,
        hidden_size=hidden_size,
        seed=config.seed,
        train_config=config,
        train_loss_history=tuple(history),
        **params,
    )


def generate(
    model: RnnLmModel,
    prompt: Sequence[int],
    max_tokens: int,
    temperature: float,
    seed: int = 0,
    eos_id: int | None = None,
) -> list:
    """Sample a continuation of ``prompt`` (the prompt is not returned).

    Logits are divided by ``temperature``; temperature 0 is greedy
    argmax with ties to the lowest id. Generation stops after
    ``max_tokens`` ids or on ``eos_id`` (which is included).
    """
    if temperature < 0:
        raise FormatError(f"temperature must be >= 0, got {temperature}")
    if max_tokens < 0:
        raise FormatError(f"max_tokens must be >= 0, got {max_tokens}")
    prompt = [int(i) for i in prompt]
    if not prompt:
        raise EmptyInputError("prompt must contain at least one id")
    state = initial_state(model)
    dist = None
    for token in prompt:
        state, dist = lm_step(model, state, token)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_tokens):
        if temperature == 0:
            next_id = int(np.argmax(dist))
        else:
            logits = np.log(dist) / temperature
            logits -= np.max(logits)
            weights = np.exp(logits)
            next_id = int(rng.choice(model.vocab_size,
                                     p=weights / weights.sum()))
        out.append(next_id)
        if eos_id is not None and next_id == eos_id:
            break
        state, dist = lm_step(model, state, next_id)
    return out


# ---------------------------------------------------------------------------
# N-gram baseline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NgramLmModel:
    order: int
    counts: dict  # context tuple -> {token id -> count}
    smoothing_k: float
    vocab_size: int

    def __post_init__(self):
        if self.order < 1:
            raise FormatError(f"order must be >= 1, got {self.order}")
        if self.smoothing_k <= 0:
            raise FormatError(
                f"smoothing_k must be > 0, got {self.smoothing_k}")
        if self.vocab_size < 1:
            raise FormatError("vocab_size must be >= 1")
        for context in self.counts:
            if len(context) != self.order - 1:
                raise FormatError(
                    f"context {context!r} has length {len(context)}, "
                    f"expected {self.order - 1}")


def _context_at(stream: Sequence[int], position: int, order: int,
                bos_id: int) -> tuple:
    if order == 1:
        return ()
    prefix = stream[max(0, position - (order - 1)):position]
    return tuple([bos_id] * (order - 1 - len(prefix)) + list(prefix))


def train_ngram(
    sequences: Sequence,
    order: int,
    smoothing_k: float,
    vocab_size: int,
    bos_id: int = BOS_ID,
    pad_id: int | None = PAD_ID,
) -> NgramLmModel:
    """Count-based add-k model; contexts shorter than order-1 are
    left-padded with ``bos_id``."""
    if order < 1:
        raise FormatError(f"order must be >= 1, got {order}")
    if smoothing_k <= 0:
        raise FormatError(f"smoothing_k must be > 0, got {smoothing_k}")
    counts: dict = {}
    seen_any = False
    for sequence in sequences:
        ids = _strip_pads(_sequence_ids(sequence), pad_id)
        for token in ids:
            if not 0 <= token < vocab_size:
                raise InvalidIdError(
                    f"token id {token} outside vocabulary of size {vocab_size}")
        for j, token in enumerate(ids):
            context = _context_at(ids, j, order, bos_id)
            bucket = counts.setdefault(context, {})
            bucket[token] = bucket.get(token, 0) + 1
            seen_any = True
    if not seen_any:
        raise EmptyInputError("no non-empty training sequences")
    return NgramLmModel(order=order, counts=counts,
                        smoothing_k=smoothing_k, vocab_size=vocab_size)


def ngram_prob(model: NgramLmModel, context: Sequence[int], token: int) -> float:
    """(count + k) / (context total + k*V); unseen context is uniform."""
    context = tuple(int(c) for c in context)
    if len(context) != model.order - 1:
        raise FormatError(
            f"context length {len(context)} != order-1 = {model.order - 1}")
    token = int(token)
    if not 0 <= token < model.vocab_size:
        raise InvalidIdError(
            f"token id {token} outside vocabulary of size {model.vocab_size}")
    bucket = model.counts.get(context, {})
    total = sum(bucket.values())
    k = model.smoothing_k
    return (bucket.get(token, 0) + k) / (total + k * model.vocab_size)


# ---------------------------------------------------------------------------
# Shared evaluation
# ---------------------------------------------------------------------------

def sequence_logprob(model, sequence, bos_id: int = BOS_ID,
                     pad_id: int | None = PAD_ID):
    """(sum of per-step log P(token | prefix), number of predictions).

    The first token is conditioned on BOS, so all non-pad tokens of the
    sequence are predicted positions. Works for both model families.
    """
    ids = _strip_pads(_sequence_ids(sequence), pad_id)
    if isinstance(model, NgramLmModel):
        logprob = 0.0
        for j, token in enumerate(ids):
            context = _context_at(ids, j, model.order, bos_id)
            logprob += float(np.log(ngram_prob(model, context, token)))
        return logprob, len(ids)
    state = initial_state(model)
    logprob = 0.0
    previous = bos_id
    for token in ids:
        state, dist = lm_step(model, state, previous)
        logprob += float(np.log(dist[token]))
        previous = token
    return logprob, len(ids)


def perplexity(model, sequences: Sequence, bos_id: int = BOS_ID,
               pad_id: int | None = PAD_ID) -> float:
    """exp(mean negative log-likelihood per predicted position)."""
    total, count = 0.0, 0
    for sequence in sequences:
        logprob, n = sequence_logprob(model, sequence, bos_id, pad_id)
        total += logprob
        count += n
    if count == 0:
        raise EmptyInputError("no predicted positions in the corpus")
    return float(np.exp(-total / count))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_rnn(model: RnnLmModel, path: str | Path) -> None:
    """One JSON header line, then little-endian float64 parameters."""
    header = {
        "vocab_size": model.vocab_size,
        "hidden_size": model.hidden_size,
        "seed": model.seed,
        "config": (model.train_config.as_dict()
                   if model.train_config else None),
        "loss_history": list(model.train_loss_history),
        "params": list(_PARAM_ORDER),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, ensure_ascii=False).encode("utf-8"))
        fh.write(b"\n")
        for name in _PARAM_ORDER:
            fh.write(np.ascontiguousarray(
                getattr(model, name), dtype="<f8").tobytes())


def load_rnn(path: str | Path) -> RnnLmModel:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
        v, h = header["vocab_size"], header["hidden_size"]
    except (ValueError, KeyError) as exc:
        raise FormatError(f"bad model header in {path}: {exc}") from exc
    shapes = {
        "embedding": (v, h),
        "recurrent_input": (h, h),
        "recurrent_hidden": (h, h),
        "hidden_bias": (h,),
        "output": (h, v),
        "output_bias": (v,),
    }
    flat = np.frombuffer(blob, dtype="<f8")
    expected = sum(int(np.prod(s)) for s in shapes.values())
    if flat.size != expected:
        raise FormatError(
            f"{path}: parameter block holds {flat.size} floats, "
            f"expected {expected}")
    params = {}
    cursor = 0
    for name in header.get("params", _PARAM_ORDER):
        size = int(np.prod(shapes[name]))
        params[name] = flat[cursor:cursor + size].reshape(shapes[name]).copy()
        cursor += size
    config = (TrainConfig(**header["config"])
              if header.get("config") else None)
    return RnnLmModel(
        vocab_size=v,
        hidden_size=h,
        seed=header.get("seed", 0),
        train_config=config,
        train_loss_history=tuple(header.get("loss_history", ())),
        **params,
    )


def save_ngram(model: NgramLmModel, path: str | Path) -> None:
    payload = {
        "order": model.order,
        "smoothing_k": model.smoothing_k,
        "vocab_size": model.vocab_size,
        "counts": {
            " ".join(str(i) for i in context): {
                str(token): count for token, count in sorted(bucket.items())
            }
            for context, bucket in sorted(model.counts.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def load_ngram(path: str | Path) -> NgramLmModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        counts = {
            tuple(int(t) for t in key.split()) if key else (): {
                int(token): count for token, count in bucket.items()
            }
            for key, bucket in payload["counts"].items()
        }
        return NgramLmModel(
            order=payload["order"],
            counts=counts,
            smoothing_k=payload["smoothing_k"],
            vocab_size=payload["vocab_size"],
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad n-gram model in {path}: {exc}") from exc
