"""Operator entry point: one subcommand per pipeline stage.

    melvc gen-corpus --out corpus/ --seed 0
    melvc train      --corpus corpus/ --language A --out base_a.ckpt
    melvc adapt      --checkpoint base_a.ckpt --corpus corpus/ \\
                     --target-speaker targetB00 --out adapted.ckpt
    melvc convert    --checkpoint adapted.ckpt --wav in.wav --out out.wav
    melvc eval       --corpus corpus/ --checkpoint A=base_a.ckpt --out report.json

Exit codes: 0 success, 1 pipeline error (diagnostic on standard
error), 2 usage or configuration error.  Every subcommand is a pure
function of its inputs and seeds, so re-running one overwrites its
outputs with identical bytes.
"""

import argparse
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from .adapt import adapt_to_target, load_adaptation_mels
from .checkpoints import load_checkpoint, save_checkpoint
from .config import default_config, load_config
from .convert import VOCODERS, convert_waveform
from .corpus import LANG_A, LANGUAGES, generate_corpus, load_corpus
from .dsp import read_wav, write_wav
from .errors import ConfigError, UnknownSpeaker
from .evaluate import default_scenarios, run_scenarios
from .train import load_train_state, load_training_set, save_train_state, train_joint


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melvc",
        description="Voice conversion bootstrapped from speaker-adaptive synthesis: "
        "generate a synthetic corpus, train the base model, adapt it to a target "
        "speaker from untranscribed speech, convert audio, and evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen-corpus", help="render the synthetic two-language corpus")
    p.add_argument("--config", help="INI settings file; defaults apply when omitted")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.add_argument("--seed", type=int, default=0, help="generation seed (default 0)")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", help="jointly train encoders and decoder on transcribed speech")
    p.add_argument("--config", help="INI settings file")
    p.add_argument("--corpus", required=True, help="corpus directory from gen-corpus")
    p.add_argument("--out", required=True, help="checkpoint to write")
    p.add_argument(
        "--language",
        action="append",
        choices=LANGUAGES,
        help="train only on this language (repeatable; default: all transcribed)",
    )
    p.add_argument("--seed", type=int, help="override the [train] seed")
    p.add_argument("--resume", help="continue from an earlier training checkpoint")
    p.add_argument("--report", help="also write a JSON training report here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("adapt", help="adapt a trained model to a target speaker, untranscribed")
    p.add_argument("--config", help="INI settings file")
    p.add_argument("--checkpoint", required=True, help="base model checkpoint")
    p.add_argument("--corpus", required=True, help="corpus directory holding the target's speech")
    p.add_argument("--target-speaker", required=True, help="speaker id to adapt to")
    p.add_argument("--language", choices=LANGUAGES, help="restrict adaptation speech language")
    p.add_argument("--seed", type=int, help="override the [adapt] seed")
    p.add_argument("--out", required=True, help="adapted checkpoint to write")
    p.add_argument("--report", help="also write a JSON adaptation report here")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("convert", help="convert a WAV file into the adapted target voice")
    p.add_argument("--config", help="INI settings file")
    p.add_argument("--checkpoint", required=True, help="adapted model checkpoint")
    p.add_argument("--wav", required=True, help="source waveform to convert")
    p.add_argument("--out", required=True, help="converted waveform to write")
    p.add_argument(
        "--vocoder",
        choices=sorted(VOCODERS),
        default="griffin_lim",
        help="waveform reconstruction method",
    )
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("eval", help="run the cross-language scenario matrix and score it")
    p.add_argument("--config", help="INI settings file")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument(
        "--checkpoint",
        action="append",
        required=True,
        metavar="LANG=PATH",
        help="base checkpoint per training language, e.g. A=base_a.ckpt "
        "(bare PATH means language A; repeat for more languages)",
    )
    p.add_argument("--scenarios", help="comma-separated scenario ids overriding [eval]")
    p.add_argument("--seed", type=int, help="override the [eval] seed")
    p.add_argument("--out", required=True, help="JSON report to write")
    p.add_argument("--csv", help="also write a flat CSV of per-utterance MCD values")
    p.set_defaults(func=cmd_eval)
    return parser


def cmd_gen_corpus(args, cfg) -> int:
    corpus = generate_corpus(cfg.corpus, args.out, args.seed)
    transcribed = len(corpus.transcribed_entries())
    print(
        f"wrote {len(corpus.entries)} utterances ({transcribed} transcribed) "
        f"from {len(corpus.speakers)} speakers to {corpus.root}"
    )
    return 0


def cmd_train(args, cfg) -> int:
    corpus = load_corpus(args.corpus)
    languages = tuple(args.language) if args.language else None
    examples = load_training_set(corpus, languages=languages)
    train_cfg = cfg.train if args.seed is None else replace(cfg.train, seed=args.seed)
    model_cfg = cfg.model_config(corpus.feature_dim)
    resume = None
    if args.resume:
        resume, _ = load_train_state(args.resume)
    state, report = train_joint(examples, model_cfg, train_cfg, resume=resume)
    save_train_state(
        args.out,
        state,
        meta={
            "languages": sorted(languages) if languages else sorted(LANGUAGES),
            "corpus": str(corpus.root),
        },
    )
    if args.report:
        report.save(args.report)
    print(
        f"trained to step {state.step} on {len(examples)} utterances; "
        f"total loss {report.initial['total']:.4f} -> {report.final['total']:.4f}; "
        f"saved {args.out}"
    )
    return 0


def cmd_adapt(args, cfg) -> int:
    partition, _, _ = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    if args.target_speaker not in corpus.speakers:
        raise UnknownSpeaker(f"{args.target_speaker} not in corpus {corpus.root}")
    mels = load_adaptation_mels(corpus, args.target_speaker, language=args.language)
    adapt_cfg = cfg.adapt if args.seed is None else replace(cfg.adapt, seed=args.seed)
    adapted, report = adapt_to_target(partition, mels, adapt_cfg)
    save_checkpoint(
        args.out,
        adapted,
        meta={
            "stage": "adapted",
            "target_speaker": args.target_speaker,
            "adaptation_language": args.language,
            "utterances": report.utterances,
        },
    )
    if args.report:
        report.save(args.report)
    print(
        f"adapted to {args.target_speaker} on {report.utterances} utterances; "
        f"reconstruction {report.initial_loss:.4f} -> {report.final_loss:.4f}; "
        f"saved {args.out}"
    )
    return 0


def cmd_convert(args, cfg) -> int:
    partition, _, _ = load_checkpoint(args.checkpoint)
    wave = read_wav(args.wav)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        converted = convert_waveform(partition, wave, cfg.frame, vocoder=args.vocoder)
    for item in caught:
        print(f"warning: {item.message}", file=sys.stderr)
    write_wav(args.out, converted)
    seconds = len(converted.samples) / converted.sample_rate
    print(f"wrote {args.out} ({seconds:.2f} s at {converted.sample_rate} Hz)")
    return 0


def cmd_eval(args, cfg) -> int:
    corpus = load_corpus(args.corpus)
    checkpoints = {}
    for item in args.checkpoint:
        language, sep, path = item.partition("=")
        if not sep:
            language, path = LANG_A, item
        language = language.strip()
        if language not in LANGUAGES:
            print(f"error: bad --checkpoint {item!r}: unknown language {language!r}", file=sys.stderr)
            return 2
        if language in checkpoints:
            print(f"error: duplicate --checkpoint for language {language}", file=sys.stderr)
            return 2
        checkpoints[language] = Path(path)

    ids = (
        tuple(s.strip() for s in args.scenarios.split(",") if s.strip())
        if args.scenarios
        else cfg.eval.scenarios
    )
    seed = args.seed if args.seed is not None else cfg.eval.seed
    specs = default_scenarios(corpus, ids=ids)
    report = run_scenarios(
        specs,
        checkpoints,
        corpus,
        adapt_config=replace(cfg.adapt, seed=seed, log_every=0),
        seed=seed,
        include_probes=cfg.eval.include_probes,
    )
    report.save(args.out)
    if args.csv:
        report.save_csv(args.csv)
    print(f"wrote evaluation report for {len(specs)} scenario(s) to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else default_config()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, cfg)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # CLI boundary: any pipeline failure is exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
