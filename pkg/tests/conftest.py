"""Shared fixtures: a small rendered corpus, a tiny model shape, and the
full toy reference run that the calibrated acceptance thresholds were
frozen from."""

from types import SimpleNamespace

import numpy as np
import pytest

from melvc.adapt import adapt_to_target, load_adaptation_mels
from melvc.corpus import (
    LANG_A,
    LANG_B,
    ROLE_TARGET,
    SPLIT_TARGET_VAL,
    CorpusConfig,
    generate_corpus,
)
from melvc.evaluate import default_scenarios, run_scenarios
from melvc.losses import adaptation_loss
from melvc.model import ModelConfig, strip_speaker_params
from melvc.presets import (
    REFERENCE_SEED,
    toy_adapt_config,
    toy_corpus_config,
    toy_model_shape,
    toy_train_config,
)
from melvc.train import load_training_set, train_joint


def small_corpus_config():
    return CorpusConfig(
        train_speakers_a=3,
        train_speakers_b=0,
        targets_per_language=1,
        sources_per_language=1,
        utterances_per_speaker=4,
        adapt_utterances_per_target=3,
        val_utterances_per_target=2,
        eval_utterances_per_source=2,
        min_phonemes=3,
        max_phonemes=4,
        min_duration=4,
        max_duration=6,
    )


def unit_model_config():
    """Small enough for fast optimization tests, deep enough to exercise
    the bias-site machinery."""
    return ModelConfig(
        d_linguistic=11,
        d_mel=80,
        d_latent=8,
        linguistic_widths=(32, 32),
        acoustic_widths=(32, 32),
        decoder_widths=(32, 32, 32, 32),
        bias_sites=(2, 3),
    )


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    return generate_corpus(small_corpus_config(), root, seed=11)


@pytest.fixture(scope="session")
def reference_run(tmp_path_factory):
    """The committed toy reference run: corpus, one base model per
    language, held-out adaptation numbers, and the scenario matrix.

    Mirrors scripts/calibrate_thresholds.py exactly (same seeds, same
    presets); the frozen thresholds in test_acceptance.py were measured
    from that script's output.
    """
    root = tmp_path_factory.mktemp("reference")
    corpus = generate_corpus(toy_corpus_config(), root / "corpus", seed=REFERENCE_SEED)
    model_cfg = toy_model_shape().build(corpus.feature_dim, corpus.frame_config.mel_dim)

    bases, train_reports = {}, {}
    for language in (LANG_A, LANG_B):
        examples = load_training_set(corpus, languages=(language,))
        state, report = train_joint(examples, model_cfg, toy_train_config())
        bases[language] = state.partition
        train_reports[language] = report

    adaptation = {}
    for language in (LANG_A, LANG_B):
        target = corpus.speakers_with_role(ROLE_TARGET, language)[0]
        mels = load_adaptation_mels(corpus, target, language=language)
        held_out = load_adaptation_mels(
            corpus, target, language=language, split=SPLIT_TARGET_VAL
        )
        stripped = strip_speaker_params(bases[LANG_A])
        before = float(np.mean([adaptation_loss(stripped, m) for m in held_out]))
        adapted, _ = adapt_to_target(bases[LANG_A], mels, toy_adapt_config())
        after = float(np.mean([adaptation_loss(adapted, m) for m in held_out]))
        adaptation[target] = {"held_out_before": before, "held_out_after": after}

    eval_report = run_scenarios(
        default_scenarios(corpus),
        bases,
        corpus,
        adapt_config=toy_adapt_config(),
        seed=0,
        verbose=False,
    )
    return SimpleNamespace(
        root=root,
        corpus=corpus,
        model_config=model_cfg,
        bases=bases,
        train_reports=train_reports,
        adaptation=adaptation,
        eval_report=eval_report,
    )


# ---------------------------------------------------------------------------
# Acceptance reporting: each acceptance test records one line here, and the
# block is echoed after the test summary so pass/fail per criterion is
# visible in any pytest invocation.

_ACCEPTANCE_LINES = []


def record_acceptance(line: str):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
