"""Command-line entry points for the toolkit.

Subcommands mirror the module layout::

    limba tokenizer train|encode|decode
    limba identify train|predict|eval
    limba quality train|filter|eval
    limba pos train|tag|eval
    limba mt eval --metric bleu|ter|meteor|all
    limba speech wer|mcd|mos
    limba lm train|sample|ppl --arch rnn|ngram
    limba pipeline run|validate
    limba serve

Run ``limba <command> --help`` for the flags of each command. Exit
status is 0 on success and 1 on errors, except ``pipeline run`` which
uses 1 for config validation errors and 2 for stage failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, bpe, classify, hmm, lm, mt, pipeline, speech
from .corpus import read_corpus, read_tagged, write_corpus
from .errors import FormatError, LimbaError

logger = logging.getLogger(__name__)


def _print(payload) -> None:
    print(json.dumps(payload, ensure_ascii=False, indent=2))


def _read_lines(path: str) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def _one_of(args, *names) -> None:
    if all(getattr(args, name) is None for name in names):
        flags = " or ".join(f"--{n.replace('_', '-')}" for n in names)
        raise FormatError(f"one of {flags} is required")


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

def _cmd_tokenizer(args) -> int:
    if args.action == "train":
        corpus = read_corpus(args.corpus)
        model = bpe.train_bpe(corpus, args.vocab_size)
        bpe.save_model(model, args.out)
        _print({"vocab_size": model.vocab_size, "merges": len(model.merges),
                "reached_target": model.reached_target, "model": args.out})
    elif args.action == "encode":
        _one_of(args, "text", "input")
        model = bpe.load_model(args.model)
        texts = [args.text] if args.text is not None else _read_lines(args.input)
        for text in texts:
            encoded = bpe.encode(model, text, max_len=args.max_len,
                                 pad=args.pad)
            print(" ".join(str(i) for i in encoded.ids))
    else:
        _one_of(args, "ids", "input")
        model = bpe.load_model(args.model)
        lines = [args.ids] if args.ids is not None else _read_lines(args.input)
        for line in lines:
            print(bpe.decode(model, [int(i) for i in line.split()]))
    return 0


# ---------------------------------------------------------------------------
# identify / quality
# ---------------------------------------------------------------------------

def _labeled_data(path: str, field: str) -> list:
    chunks = [c for c in read_corpus(path) if getattr(c, field) is not None]
    if field == "quality":
        return [(c, classify.HIGH_QUALITY if c.quality == "high"
                 else classify.LOW_QUALITY) for c in chunks]
    return [(c, c.variant) for c in chunks]


def _cmd_identify(args) -> int:
    if args.action == "train":
        data = _labeled_data(args.train, "variant")
        labels = (args.labels.split(",") if args.labels
                  else sorted({label for _, label in data}))
        model = classify.train_classifier(
            data, classify.LabelSet(labels),
            classify.TrainConfig(epochs=args.epochs, seed=args.seed))
        classify.save_model(model, args.out)
        _print({"labels": labels, "examples": len(data), "model": args.out})
    elif args.action == "predict":
        _one_of(args, "text", "input")
        model = classify.load_model(args.model)
        if args.text is not None:
            label, probs = classify.predict(model, args.text)
            _print({"label": label,
                    "probabilities": {l: float(p) for l, p in
                                      zip(model.labelset.labels, probs)}})
        else:
            from .corpus import Corpus, relabel
            if args.out is None:
                raise FormatError("--out is required when labeling a corpus")
            corpus = read_corpus(args.input)
            labeled = Corpus([
                relabel(c, variant=classify.predict(model, c.text)[0])
                for c in corpus
            ])
            write_corpus(labeled, args.out)
            _print({"chunks": len(labeled), "out": args.out})
    else:
        model = classify.load_model(args.model)
        report = classify.evaluate_classifier(
            model, _labeled_data(args.data, "variant"))
        _print(report.as_dict())
    return 0


def _cmd_quality(args) -> int:
    if args.action == "train":
        data = _labeled_data(args.train, "quality")
        model = classify.train_classifier(
            data, classify.LabelSet(classify.QUALITY_LABELSET),
            classify.TrainConfig(epochs=args.epochs, seed=args.seed))
        classify.save_model(model, args.out)
        _print({"examples": len(data), "model": args.out})
    elif args.action == "filter":
        model = classify.load_model(args.model)
        corpus = read_corpus(args.input)
        filtered = classify.filter_corpus(model, corpus, args.threshold)
        write_corpus(filtered, args.out)
        _print({"kept": len(filtered), "dropped": len(corpus) - len(filtered),
                "out": args.out})
    else:
        model = classify.load_model(args.model)
        report = classify.evaluate_classifier(
            model, _labeled_data(args.data, "quality"))
        _print(report.as_dict())
    return 0


# ---------------------------------------------------------------------------
# pos
# ---------------------------------------------------------------------------

def _cmd_pos(args) -> int:
    if args.action == "train":
        sentences = read_tagged(args.train)
        model = hmm.train_hmm(sentences, hmm.TagSet(),
                              smoothing_k=args.smoothing_k)
        hmm.save_model(model, args.out)
        _print({"sentences": len(sentences), "model": args.out})
    elif args.action == "tag":
        _one_of(args, "text", "input")
        model = hmm.load_model(args.model)
        lines = [args.text] if args.text is not None else _read_lines(args.input)
        first = True
        for line in lines:
            if not first:
                print()
            first = False
            tagged = hmm.viterbi_tag(model, line.split())
            for token, tag in zip(tagged.tokens, tagged.tags):
                print(f"{token}\t{tag}")
    else:
        model = hmm.load_model(args.model)
        report = hmm.evaluate_tagger(model, read_tagged(args.data))
        _print(report.as_dict())
    return 0


# ---------------------------------------------------------------------------
# mt / speech
# ---------------------------------------------------------------------------

def _cmd_mt(args) -> int:
    pairs = mt.read_pairs(args.pairs)
    if args.metric == "all":
        report = mt.evaluate_pairs(pairs, max_n=args.max_n)
        if args.out:
            mt.write_report(report, args.out)
        _print(report.as_dict())
    else:
        value = {
            "bleu": lambda: mt.bleu(pairs, args.max_n),
            "ter": lambda: mt.ter(pairs),
            "meteor": lambda: mt.meteor(pairs),
        }[args.metric]()
        _print({args.metric: value, "pairs": len(pairs)})
    return 0


def _cmd_speech(args) -> int:
    if args.action == "wer":
        pairs = speech.read_transcript_pairs(args.pairs)
        subs = dels = inss = n = 0
        for reference, hypothesis in pairs:
            result = speech.wer(reference, hypothesis)
            subs += result.substitutions
            dels += result.deletions
            inss += result.insertions
            n += result.reference_length
        rate = (subs + dels + inss) / n
        _print({"wer": rate, "wer_percent": 100.0 * rate,
                "substitutions": subs, "deletions": dels,
                "insertions": inss, "reference_words": n,
                "pairs": len(pairs)})
    elif args.action == "mcd":
        value = speech.mcd(speech.read_frames(args.reference),
                           speech.read_frames(args.synthesized))
        _print({"mcd": value})
    else:
        report = speech.mos(speech.read_mos_records(args.records))
        _print(report.as_dict())
    return 0


# ---------------------------------------------------------------------------
# lm
# ---------------------------------------------------------------------------

def _read_ids(path: str) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        sequences = json.load(fh)
    return [[int(i) for i in seq] for seq in sequences]


def _cmd_lm(args) -> int:
    if args.action == "train":
        sequences = _read_ids(args.ids)
        if args.arch == "rnn":
            config = lm.TrainConfig(
                epochs=args.epochs, learning_rate=args.learning_rate,
                clip_norm=args.clip_norm, bptt_window=args.bptt_window,
                batch_size=args.batch_size, seed=args.seed)
            model = lm.train_rnn(sequences, args.vocab_size, config,
                                 hidden_size=args.hidden_size)
            lm.save_rnn(model, args.out)
            _print({"arch": "rnn",
                    "final_loss": model.train_loss_history[-1],
                    "model": args.out})
        else:
            model = lm.train_ngram(sequences, args.order, args.smoothing_k,
                                   args.vocab_size)
            lm.save_ngram(model, args.out)
            _print({"arch": "ngram", "order": args.order,
                    "contexts": len(model.counts), "model": args.out})
    elif args.action == "sample":
        model = lm.load_rnn(args.model)
        prompt = [int(i) for i in args.prompt.split()]
        out = lm.generate(model, prompt, args.max_tokens, args.temperature,
                          seed=args.seed, eos_id=args.eos_id)
        print(" ".join(str(i) for i in out))
    else:
        model = (lm.load_rnn(args.model) if args.arch == "rnn"
                 else lm.load_ngram(args.model))
        value = lm.perplexity(model, _read_ids(args.ids))
        _print({"perplexity": value, "arch": args.arch})
    return 0


# ---------------------------------------------------------------------------
# pipeline / serve
# ---------------------------------------------------------------------------

def _cmd_pipeline(args) -> int:
    try:
        config = pipeline.load_config(
            args.config, out_dir=getattr(args, "out", None))
    except pipeline.PipelineConfigError as exc:
        for error in exc.errors:
            print(f"config error: {error}", file=sys.stderr)
        return 1
    if args.action == "validate":
        _print({"ok": True, "stages": [s.name for s in config.stages],
                "seed": config.seed})
        return 0
    try:
        manifest = pipeline.run(config)
    except pipeline.StageFailure as exc:
        print(f"error: {exc} (manifest: {exc.manifest_path})", file=sys.stderr)
        return 2
    _print({"status": manifest.status,
            "stages": [s["stage"] for s in manifest.stages],
            "manifest": str(config.out_dir / "manifest.json")})
    return 0


def _cmd_serve(args) -> int:
    from .service import TaskStore, make_server

    corpus = read_corpus(args.corpus)
    variant_labels = (args.variant_labels.split(",") if args.variant_labels
                      else classify.DEFAULT_VARIANT_LABELS)
    store = TaskStore(
        corpus,
        state_dir=args.state,
        variant_labels=variant_labels,
        lease_seconds=args.lease_seconds,
    )
    server = make_server(store, host=args.host, port=args.port,
                         static_dir=args.static)
    host, port = server.server_address[:2]
    print(f"annotation service on http://{host}:{port}/ "
          f"({len(corpus)} chunks, state in {args.state})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        store.close()
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="limba",
        description="Low-resource language toolkit: corpus curation, "
                    "classification, tagging, metrics, language models.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    tok = sub.add_parser("tokenizer", help="subword tokenizer")
    tok_sub = tok.add_subparsers(dest="action", required=True)
    t = tok_sub.add_parser("train")
    t.add_argument("--corpus", required=True)
    t.add_argument("--vocab-size", type=int, required=True)
    t.add_argument("--out", required=True)
    t = tok_sub.add_parser("encode")
    t.add_argument("--model", required=True)
    t.add_argument("--text")
    t.add_argument("--input", help="file with one text per line")
    t.add_argument("--max-len", type=int, default=None)
    t.add_argument("--pad", action="store_true")
    t = tok_sub.add_parser("decode")
    t.add_argument("--model", required=True)
    t.add_argument("--ids", help="space-separated ids")
    t.add_argument("--input", help="file with one id line per sequence")

    for name, helptext in (("identify", "variant identification"),
                           ("quality", "quality filtering")):
        cmd = sub.add_parser(name, help=helptext)
        cmd_sub = cmd.add_subparsers(dest="action", required=True)
        t = cmd_sub.add_parser("train")
        t.add_argument("--train", required=True, help="labeled corpus JSONL")
        t.add_argument("--out", required=True)
        t.add_argument("--epochs", type=int, default=30)
        t.add_argument("--seed", type=int, default=0)
        if name == "identify":
            t.add_argument("--labels", help="comma-separated label set")
            t = cmd_sub.add_parser("predict")
            t.add_argument("--model", required=True)
            t.add_argument("--text")
            t.add_argument("--input", help="corpus JSONL to label")
            t.add_argument("--out", help="labeled corpus output")
        else:
            t = cmd_sub.add_parser("filter")
            t.add_argument("--model", required=True)
            t.add_argument("--input", required=True)
            t.add_argument("--out", required=True)
            t.add_argument("--threshold", type=float, default=0.5)
        t = cmd_sub.add_parser("eval")
        t.add_argument("--model", required=True)
        t.add_argument("--data", required=True, help="labeled corpus JSONL")

    pos = sub.add_parser("pos", help="part-of-speech tagging")
    pos_sub = pos.add_subparsers(dest="action", required=True)
    t = pos_sub.add_parser("train")
    t.add_argument("--train", required=True, help="CoNLL token<TAB>tag file")
    t.add_argument("--out", required=True)
    t.add_argument("--smoothing-k", type=float, default=0.1)
    t = pos_sub.add_parser("tag")
    t.add_argument("--model", required=True)
    t.add_argument("--text")
    t.add_argument("--input", help="file with one sentence per line")
    t = pos_sub.add_parser("eval")
    t.add_argument("--model", required=True)
    t.add_argument("--data", required=True)

    mt_cmd = sub.add_parser("mt", help="translation metrics")
    mt_sub = mt_cmd.add_subparsers(dest="action", required=True)
    t = mt_sub.add_parser("eval")
    t.add_argument("--pairs", required=True,
                   help="TSV hypothesis<TAB>reference[<TAB>reference...]")
    t.add_argument("--metric", choices=("bleu", "ter", "meteor", "all"),
                   default="all")
    t.add_argument("--max-n", type=int, default=4)
    t.add_argument("--out", help="write the full JSON report here")

    sp = sub.add_parser("speech", help="speech metrics")
    sp_sub = sp.add_subparsers(dest="action", required=True)
    t = sp_sub.add_parser("wer")
    t.add_argument("--pairs", required=True,
                   help="TSV reference<TAB>hypothesis")
    t = sp_sub.add_parser("mcd")
    t.add_argument("--reference", required=True, help="frames JSON")
    t.add_argument("--synthesized", required=True, help="frames JSON")
    t = sp_sub.add_parser("mos")
    t.add_argument("--records", required=True, help="MOS records JSON")

    lm_cmd = sub.add_parser("lm", help="language models")
    lm_sub = lm_cmd.add_subparsers(dest="action", required=True)
    t = lm_sub.add_parser("train")
    t.add_argument("--ids", required=True, help="JSON list of id sequences")
    t.add_argument("--arch", choices=("rnn", "ngram"), required=True)
    t.add_argument("--vocab-size", type=int, required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--learning-rate", type=float, default=0.1)
    t.add_argument("--clip-norm", type=float, default=5.0)
    t.add_argument("--bptt-window", type=int, default=32)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--hidden-size", type=int, default=64)
    t.add_argument("--order", type=int, default=3)
    t.add_argument("--smoothing-k", type=float, default=0.1)
    t.add_argument("--seed", type=int, default=0)
    t = lm_sub.add_parser("sample")
    t.add_argument("--model", required=True, help="RNN model file")
    t.add_argument("--prompt", required=True, help="space-separated ids")
    t.add_argument("--max-tokens", type=int, default=32)
    t.add_argument("--temperature", type=float, default=1.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--eos-id", type=int, default=bpe.EOS_ID)
    t = lm_sub.add_parser("ppl")
    t.add_argument("--model", required=True)
    t.add_argument("--arch", choices=("rnn", "ngram"), required=True)
    t.add_argument("--ids", required=True)

    pl = sub.add_parser("pipeline", help="staged runs with manifests")
    pl_sub = pl.add_subparsers(dest="action", required=True)
    t = pl_sub.add_parser("run")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t = pl_sub.add_parser("validate")
    t.add_argument("--config", required=True)

    sv = sub.add_parser("serve", help="annotation HTTP service")
    sv.add_argument("--corpus", required=True, help="corpus JSONL to annotate")
    sv.add_argument("--port", type=int, default=8080)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--static", help="directory of UI assets to serve")
    sv.add_argument("--state", default="annotation_state",
                    help="directory for the label log and snapshots")
    sv.add_argument("--variant-labels", help="comma-separated variant labels")
    sv.add_argument("--lease-seconds", type=float, default=600.0)

    return parser


_COMMANDS = {
    "tokenizer": _cmd_tokenizer,
    "identify": _cmd_identify,
    "quality": _cmd_quality,
    "pos": _cmd_pos,
    "mt": _cmd_mt,
    "speech": _cmd_speech,
    "lm": _cmd_lm,
    "pipeline": _cmd_pipeline,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except LimbaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
