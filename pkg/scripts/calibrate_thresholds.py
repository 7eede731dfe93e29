#!/usr/bin/env python3
"""Run the toy reference pipeline once and print every measured quantity
that the acceptance tests freeze into concrete thresholds.

The run is fully seeded, so repeating it reproduces the same numbers;
the committed thresholds in the test suite were taken from this
script's output with a safety margin.

Usage:  python3 scripts/calibrate_thresholds.py [--work DIR]
"""

import argparse
import json
import tempfile
import time
from pathlib import Path

import numpy as np

from melvc.adapt import adapt_to_target, load_adaptation_mels
from melvc.corpus import LANG_A, LANG_B, ROLE_TARGET, SPLIT_TARGET_VAL, generate_corpus
from melvc.evaluate import default_scenarios, run_scenarios
from melvc.losses import adaptation_loss
from melvc.model import strip_speaker_params
from melvc.presets import (
    REFERENCE_SEED,
    toy_adapt_config,
    toy_corpus_config,
    toy_model_shape,
    toy_train_config,
)
from melvc.train import load_training_set, train_joint


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work", help="working directory (default: a fresh temp dir)")
    args = parser.parse_args()
    work = Path(args.work) if args.work else Path(tempfile.mkdtemp(prefix="melvc_calibrate_"))
    work.mkdir(parents=True, exist_ok=True)
    print(f"working directory: {work}")

    t0 = time.monotonic()
    corpus = generate_corpus(toy_corpus_config(), work / "corpus", seed=REFERENCE_SEED)
    print(f"[corpus] {len(corpus.entries)} utterances in {time.monotonic() - t0:.1f}s")

    model_cfg = toy_model_shape().build(corpus.feature_dim, corpus.frame_config.mel_dim)
    bases, train_reports = {}, {}
    for language in (LANG_A, LANG_B):
        t = time.monotonic()
        examples = load_training_set(corpus, languages=(language,))
        state, report = train_joint(examples, model_cfg, toy_train_config())
        bases[language] = state.partition
        train_reports[language] = report
        print(
            f"[train {language}] {len(examples)} utterances, {report.steps} steps, "
            f"{time.monotonic() - t:.1f}s: total {report.initial['total']:.4f} -> "
            f"{report.final['total']:.4f} "
            f"(ratio {report.final['total'] / report.initial['total']:.3f}), "
            f"main {report.initial['loss_main']:.4f} -> {report.final['loss_main']:.4f}, "
            f"tie {report.initial['loss_tie']:.4f} -> {report.final['loss_tie']:.4f}"
        )

    # Adaptation: held-out reconstruction MAE before vs after, per target.
    adaptation = {}
    for language in (LANG_A, LANG_B):
        target = corpus.speakers_with_role(ROLE_TARGET, language)[0]
        mels = load_adaptation_mels(corpus, target, language=language)
        held_out = load_adaptation_mels(corpus, target, language=language, split=SPLIT_TARGET_VAL)
        stripped = strip_speaker_params(bases[LANG_A])
        before = float(np.mean([adaptation_loss(stripped, m) for m in held_out]))
        adapted, report = adapt_to_target(bases[LANG_A], mels, toy_adapt_config())
        after = float(np.mean([adaptation_loss(adapted, m) for m in held_out]))
        adaptation[target] = {
            "held_out_before": before,
            "held_out_after": after,
            "train_initial": report.initial_loss,
            "train_final": report.final_loss,
        }
        print(
            f"[adapt {target}] {len(mels)} utterances: adaptation-set "
            f"{report.initial_loss:.4f} -> {report.final_loss:.4f}; held-out "
            f"{before:.4f} -> {after:.4f} (reduction {before - after:+.4f})"
        )

    t = time.monotonic()
    eval_report = run_scenarios(
        default_scenarios(corpus),
        bases,
        corpus,
        adapt_config=toy_adapt_config(),
        seed=0,
        verbose=True,
    )
    print(f"[eval] scenario matrix in {time.monotonic() - t:.1f}s")

    means = {sid: s["mcd_mean"] for sid, s in eval_report.scenarios.items()}
    baselines = {sid: s["baseline_mcd_mean"] for sid, s in eval_report.scenarios.items()}
    print("\nscenario            mean MCD   do-nothing    margin")
    for sid in means:
        print(f"  {sid:<16} {means[sid]:9.3f} {baselines[sid]:11.3f} {baselines[sid] - means[sid]:9.3f}")
    print("\nordering checks:")
    print(f"  AA-A <= AB-B          : {means['AA-A']:.3f} <= {means['AB-B']:.3f}  ->  {means['AA-A'] <= means['AB-B']}")
    print(f"  AB-B <= AA-B          : {means['AB-B']:.3f} <= {means['AA-B']:.3f}  ->  {means['AB-B'] <= means['AA-B']}")
    print(f"  BB-B-reference <= AB-B: {means['BB-B-reference']:.3f} <= {means['AB-B']:.3f}  ->  {means['BB-B-reference'] <= means['AB-B']}")
    print(f"  conversion < baseline in every scenario -> {all(means[s] < baselines[s] for s in means)}")

    probes = eval_report.probes
    print(
        f"\nprobes: raw mel {probes['mel_accuracy']:.3f}, latent {probes['latent_accuracy']:.3f}, "
        f"chance {probes['chance']:.3f}, chance+0.15 {probes['chance'] + 0.15:.3f}"
    )
    print(f"duration checks: {eval_report.duration_checks}")
    print(f"\ntotal wall time {time.monotonic() - t0:.1f}s")

    doc = {
        "train": {lang: train_reports[lang].to_dict() for lang in train_reports},
        "adaptation": adaptation,
        "scenarios": eval_report.scenarios,
        "probes": probes,
    }
    out = work / "calibration.json"
    out.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"full numbers written to {out}")


if __name__ == "__main__":
    main()
