#!/usr/bin/env python3
"""End-to-end toy pipeline through the command-line interface.

Generates the synthetic corpus, trains one base model per language,
adapts the language-A model to the held-out language-B target from
untranscribed speech, converts one source utterance into that voice,
and scores the full scenario matrix.  Everything lands in --out.

Usage:  python3 scripts/run_toy_pipeline.py [--out DIR] [--seed N]
"""

import argparse
import sys
import time
from pathlib import Path

from melvc.cli import main as melvc
from melvc.config import save_config
from melvc.corpus import LANG_A, LANG_B, load_corpus
from melvc.presets import REFERENCE_SEED, toy_pipeline_config


def stage(name, argv):
    print(f"\n=== {name}: melvc {' '.join(argv)}")
    t = time.monotonic()
    code = melvc(argv)
    print(f"=== {name} finished in {time.monotonic() - t:.1f}s (exit {code})")
    if code != 0:
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="toy_run", help="output directory (default ./toy_run)")
    parser.add_argument("--seed", type=int, default=REFERENCE_SEED, help="corpus seed")
    args = parser.parse_args()

    work = Path(args.out)
    work.mkdir(parents=True, exist_ok=True)
    ini = work / "toy.ini"
    save_config(toy_pipeline_config(), ini)
    print(f"configuration written to {ini}")

    corpus_dir = work / "corpus"
    started = time.monotonic()
    stage(
        "gen-corpus",
        ["gen-corpus", "--config", str(ini), "--out", str(corpus_dir), "--seed", str(args.seed)],
    )
    for language, name in ((LANG_A, "base_a.ckpt"), (LANG_B, "base_b.ckpt")):
        stage(
            f"train {language}",
            [
                "train",
                "--config", str(ini),
                "--corpus", str(corpus_dir),
                "--language", language,
                "--out", str(work / name),
                "--report", str(work / f"train_{language.lower()}.json"),
            ],
        )
    stage(
        "adapt",
        [
            "adapt",
            "--config", str(ini),
            "--checkpoint", str(work / "base_a.ckpt"),
            "--corpus", str(corpus_dir),
            "--target-speaker", "targetB00",
            "--out", str(work / "adapted.ckpt"),
            "--report", str(work / "adapt.json"),
        ],
    )
    source = next(e for e in load_corpus(corpus_dir).entries if e.speaker_id == "sourceB00")
    stage(
        "convert",
        [
            "convert",
            "--checkpoint", str(work / "adapted.ckpt"),
            "--wav", str(corpus_dir / source.wav_path),
            "--out", str(work / "converted.wav"),
        ],
    )
    stage(
        "eval",
        [
            "eval",
            "--config", str(ini),
            "--corpus", str(corpus_dir),
            "--checkpoint", f"A={work / 'base_a.ckpt'}",
            "--checkpoint", f"B={work / 'base_b.ckpt'}",
            "--out", str(work / "report.json"),
            "--csv", str(work / "report.csv"),
        ],
    )
    print(f"\npipeline complete in {time.monotonic() - started:.0f}s; see {work}/report.json")


if __name__ == "__main__":
    main()
