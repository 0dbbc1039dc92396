"""Command-line entry point.

Subcommands: train, decode, selfplay, metrics, calibrate, serve. Every
artifact (model file, transcripts, reports) is written deterministically,
so a fixed --seed reproduces byte-identical outputs.

Exit codes: 0 success, 2 usage error, 3 missing input file, 4 malformed
input data, 1 any other package error. Failures print a single
`error: ...` line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from .calibration import (
    BINARY_DRAWS,
    BINARY_WARMUP,
    STAR_DRAWS,
    STAR_WARMUP,
    binary_observations_from_csv,
    binary_observations_from_transcripts,
    calibrate_binary,
    calibrate_star,
    star_observations_from_csv,
    star_observations_from_transcripts,
)
from .corpus import (
    build_vocab,
    load_corpus,
    parse_context,
    parse_persona_pool,
    training_examples,
)
from .errors import DialogSearchError, InputError
from .lm import Context, NGramLM, train_ngram
from .metrics import build_report
from .search import (
    SearchConfig,
    beam_search,
    greedy_decode,
    iterative_beam_search,
    select_final,
)
from .service import (
    EvaluationService,
    ServiceConfig,
    TranscriptStore,
    create_app,
    load_transcripts,
    metrics_inputs,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_MALFORMED = 4

STRATEGY_CHOICES = ("greedy", "beam", "iter-beam")


def _add_search_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--search-config", help="flat key=value search config file")
    sub.add_argument("--beam-width", type=int)
    sub.add_argument("--max-candidates", type=int)
    sub.add_argument("--max-length", type=int)
    sub.add_argument("--block-ngram", type=int)
    sub.add_argument("--length-penalty-alpha", type=float)
    sub.add_argument("--iterations", type=int)
    sub.add_argument("--epsilon", type=float)


def _search_config(args: argparse.Namespace) -> SearchConfig:
    """Config file first, explicit flags override individual fields."""
    if args.search_config:
        base = SearchConfig.from_file(args.search_config)
    else:
        base = SearchConfig()
    overrides = {}
    for name in (
        "beam_width",
        "max_candidates",
        "max_length",
        "block_ngram",
        "length_penalty_alpha",
        "iterations",
        "epsilon",
    ):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if not overrides:
        return base
    merged = asdict(base)
    merged.update(overrides)
    return SearchConfig(**merged)


def _load_records(path_arg: str) -> list[dict]:
    path = Path(path_arg)
    if path.is_dir():
        files = sorted(path.glob("*.jsonl"))
        if not files:
            raise InputError(f"no .jsonl transcript files in {path}")
        records = []
        for f in files:
            records.extend(load_transcripts(f))
        return records
    return load_transcripts(path)


def _cmd_train(args: argparse.Namespace) -> int:
    text = load_corpus(args.corpus)
    vocab = build_vocab(text)
    examples = training_examples(text, vocab)
    model = train_ngram(
        examples,
        order=args.order,
        smoothing_alpha=args.alpha,
        vocab=vocab,
        backoff_factor=args.backoff,
        history_window=args.history_window,
    )
    model.save(args.out)
    print(
        f"trained order-{args.order} model on {len(examples)} utterances "
        f"({len(vocab.words)} words) -> {args.out}"
    )
    return EXIT_OK


def _cmd_decode(args: argparse.Namespace) -> int:
    model = NGramLM.load(args.model)
    config = _search_config(args)
    persona, turns = parse_context(Path(args.context).read_text())
    vocab = model.vocab
    ctx = Context(
        persona_lines=tuple(vocab.encode_text(line) for line in persona)
    )
    for speaker, utterance in turns:
        ctx = ctx.extended(speaker, vocab.encode_text(utterance))
    if args.strategy == "greedy":
        hyp = greedy_decode(model, ctx, config)
        print(f" 1  {hyp.score:10.4f}  {vocab.decode_text(hyp.tokens)}")
        print(f"selected: {vocab.decode_text(hyp.tokens)}")
        return EXIT_OK
    if args.strategy == "beam":
        cands, _ = beam_search(model, ctx, config)
    else:
        cands, _ = iterative_beam_search(model, ctx, config, mode=args.mode)
    for idx, cand in enumerate(cands, start=1):
        print(
            f"{idx:2d}  {cand.hypothesis.score:10.4f}  "
            f"{cand.selection_score:10.4f}  "
            f"{vocab.decode_text(cand.hypothesis.tokens)}"
        )
    print(f"selected: {vocab.decode_text(select_final(cands).tokens)}")
    return EXIT_OK


def _cmd_selfplay(args: argparse.Namespace) -> int:
    model = NGramLM.load(args.model)
    pool = parse_persona_pool(load_corpus(args.personas))
    out = Path(args.out)
    # regenerate from scratch so a fixed seed gives identical bytes
    if out.exists():
        out.unlink()
    service = EvaluationService(
        model,
        pool,
        _search_config(args),
        TranscriptStore(out),
        seed=args.seed,
    )
    records = service.self_play(
        args.conversations, args.strategy, args.turns, seed=args.seed
    )
    print(f"wrote {len(records)} {args.strategy} conversations -> {out}")
    return EXIT_OK


def _cmd_metrics(args: argparse.Namespace) -> int:
    records = _load_records(args.transcripts)
    report = build_report(metrics_inputs(records), pre_pooling=args.pre_pooling)
    if args.json:
        Path(args.json).write_text(report.to_json())
    sys.stdout.write(report.to_text())
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace) -> int:
    if (args.scores is None) == (args.transcripts is None):
        raise InputError("provide exactly one of --scores or --transcripts")
    if args.kind == "star":
        warmup = args.warmup if args.warmup is not None else STAR_WARMUP
        draws = args.draws if args.draws is not None else STAR_DRAWS
        if args.scores:
            obs, names = star_observations_from_csv(args.scores)
        else:
            obs, names = star_observations_from_transcripts(
                _load_records(args.transcripts)
            )
        result = calibrate_star(
            obs, warmup=warmup, draws=draws, seed=args.seed, model_names=names
        )
    else:
        warmup = args.warmup if args.warmup is not None else BINARY_WARMUP
        draws = args.draws if args.draws is not None else BINARY_DRAWS
        if args.scores:
            obs, names = binary_observations_from_csv(args.scores)
        else:
            obs, names = binary_observations_from_transcripts(
                _load_records(args.transcripts), signal=args.signal
            )
        result = calibrate_binary(
            obs, warmup=warmup, draws=draws, seed=args.seed, model_names=names
        )
    payload = result.to_json()
    if args.out:
        Path(args.out).write_text(payload)
    sys.stdout.write(payload)
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    if args.config:
        cfg = ServiceConfig.from_file(args.config)
    else:
        if not (args.model and args.personas and args.transcripts):
            raise InputError("serve needs --config or --model/--personas/--transcripts")
        cfg = ServiceConfig(
            model_path=args.model,
            personas_path=args.personas,
            transcripts_path=args.transcripts,
            port=args.port,
            seed=args.seed,
            session_cap=args.cap,
            search_config_path=args.search_config,
        )
    model = NGramLM.load(cfg.model_path)
    pool = parse_persona_pool(load_corpus(cfg.personas_path))
    search = (
        SearchConfig.from_file(cfg.search_config_path)
        if cfg.search_config_path
        else SearchConfig()
    )
    service = EvaluationService(
        model,
        pool,
        search,
        TranscriptStore(cfg.transcripts_path),
        seed=cfg.seed,
        session_cap=cfg.session_cap,
    )
    app = create_app(service)
    if args.check:
        print(f"ok: {len(pool)} personas, cap {cfg.session_cap}, port {cfg.port}")
        return EXIT_OK
    import uvicorn

    uvicorn.run(app, host=args.host, port=cfg.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialogsearch",
        description="n-gram dialogue decoding, diversity metrics, "
        "score calibration, and the human-evaluation service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="count an n-gram model from a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--backoff", type=float, default=0.4)
    p.add_argument("--history-window", type=int, default=3)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="print the candidate set for one context")
    p.add_argument("--model", required=True)
    p.add_argument("--context", required=True, help="persona+turns block file")
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default="iter-beam")
    p.add_argument("--mode", choices=("sequential", "parallel"), default="sequential")
    _add_search_flags(p)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("selfplay", help="generate model-vs-model transcripts")
    p.add_argument("--model", required=True)
    p.add_argument("--personas", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, required=True)
    p.add_argument("--conversations", type=int, default=50)
    p.add_argument("--turns", type=int, default=3, help="exchanged pairs per conversation")
    p.add_argument("--seed", type=int, default=0)
    _add_search_flags(p)
    p.set_defaults(func=_cmd_selfplay)

    p = sub.add_parser("metrics", help="diversity/log-p report from transcripts")
    p.add_argument("--transcripts", required=True, help=".jsonl file or directory")
    p.add_argument("--pre-pooling", choices=("conversation", "turn"), default="conversation")
    p.add_argument("--json", help="also write the report as JSON here")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("calibrate", help="posterior model quality from scores")
    p.add_argument("--kind", choices=("star", "binary"), required=True)
    p.add_argument("--scores", help="CSV of raw scores")
    p.add_argument("--transcripts", help="annotated transcript file or directory")
    p.add_argument("--signal", choices=("good", "bad"), default="good")
    p.add_argument("--warmup", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write the result JSON here")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("serve", help="run the evaluation HTTP service")
    p.add_argument("--config", help="flat key=value service config file")
    p.add_argument("--model")
    p.add_argument("--personas")
    p.add_argument("--transcripts")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=6)
    p.add_argument("--search-config")
    p.add_argument("--check", action="store_true", help="validate inputs and exit")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except DialogSearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
