"""Objective evaluation of conversion quality on the synthetic corpus.

Because every utterance is generated from an explicit recipe, the
target speaker's rendition of the exact source content exists and is
frame-aligned with the source, so mel-cepstral distortion can be
computed directly without dynamic time warping.  The module covers

* ``mcd`` - dB-scaled cepstral distance between two aligned mel
  spectrograms;
* ``speaker_probe`` - a frame-level linear classifier measuring how
  much speaker identity leaks into a representation;
* ``run_scenarios`` - the cross-language scenario matrix (adapt the
  held-out target on one language, convert sources of another) with
  a do-nothing baseline per conversion.

Scenario ids read ``<base><adaptation>-<conversion>``: the first letter
is the language the base model was trained on, the second the language
of the adaptation speech, the suffix the language being converted.
``BB-B-reference`` is the upper-bound run whose base model saw
transcribed language-B data.
"""

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dct
from sklearn.linear_model import LogisticRegression

from .adapt import AdaptConfig, adapt_to_target
from .checkpoints import load_checkpoint
from .convert import convert_mel
from .corpus import (
    LANG_A,
    LANG_B,
    ROLE_SOURCE,
    ROLE_TARGET,
    SPLIT_ADAPT,
    SPLIT_EVAL,
    SPLIT_TRAIN,
    Corpus,
    render_parallel_reference,
)
from .dsp import MelSpectrogram, mel_spectrogram
from .errors import (
    DegenerateLabels,
    InvalidScenario,
    MissingCheckpoint,
    ShapeError,
    UnknownSpeaker,
)
from .model import ParameterPartition, acoustic_encode, mean_latent

# scenario id -> (base-model language, adaptation language, conversion language)
SCENARIO_LANGUAGES = {
    "AA-A": (LANG_A, LANG_A, LANG_A),
    "AA-B": (LANG_A, LANG_A, LANG_B),
    "AB-A": (LANG_A, LANG_B, LANG_A),
    "AB-B": (LANG_A, LANG_B, LANG_B),
    "BB-B-reference": (LANG_B, LANG_B, LANG_B),
}
SCENARIO_IDS = tuple(SCENARIO_LANGUAGES)

_MCD_SCALE = 10.0 / np.log(10.0)


def mel_cepstra(frames: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II of each log-mel row."""
    return dct(np.asarray(frames, dtype=np.float64), type=2, norm="ortho", axis=1)


def mcd(a, b, n_coeffs: int = 13) -> float:
    """Mean mel-cepstral distortion in dB between frame-aligned inputs.

    Cepstra are the orthonormal DCT-II of the log-mel rows; dimensions
    1..n_coeffs enter the distance, dimension 0 (overall energy) is
    excluded.  Inputs may be MelSpectrogram objects or plain (T, D)
    arrays and must have identical shapes.
    """
    fa = a.frames if isinstance(a, MelSpectrogram) else np.asarray(a, dtype=np.float64)
    fb = b.frames if isinstance(b, MelSpectrogram) else np.asarray(b, dtype=np.float64)
    if fa.ndim != 2 or fb.ndim != 2:
        raise ShapeError(f"mcd expects 2-D (frames, mels) inputs, got {fa.shape} and {fb.shape}")
    if fa.shape != fb.shape:
        raise ShapeError(f"frame-aligned inputs required, got {fa.shape} vs {fb.shape}")
    diff = mel_cepstra(fa)[:, 1 : n_coeffs + 1] - mel_cepstra(fb)[:, 1 : n_coeffs + 1]
    per_frame = _MCD_SCALE * np.sqrt(2.0 * np.sum(diff**2, axis=1))
    return float(per_frame.mean())


def speaker_probe(sequences, seed: int = 0, test_fraction: float = 0.3) -> float:
    """Held-out frame accuracy of a linear speaker classifier.

    ``sequences`` is a list of ``(frames, label)`` pairs; the split is
    done at the sequence level so no utterance contributes frames to
    both sides.  High accuracy means the representation carries speaker
    identity; accuracy near chance means it does not.
    """
    by_label = {}
    for frames, label in sequences:
        by_label.setdefault(str(label), []).append(np.asarray(frames, dtype=np.float64))
    if len(by_label) < 2:
        raise DegenerateLabels(f"probe needs at least 2 speakers, got {sorted(by_label)}")
    for label, seqs in by_label.items():
        if len(seqs) < 2:
            raise DegenerateLabels(f"speaker {label!r} has {len(seqs)} sequence(s); need >= 2")

    rng = np.random.default_rng(seed)
    train_x, train_y, test_x, test_y = [], [], [], []
    for label in sorted(by_label):
        seqs = by_label[label]
        order = rng.permutation(len(seqs))
        n_test = min(len(seqs) - 1, max(1, round(test_fraction * len(seqs))))
        for rank, idx in enumerate(order):
            xs, ys = (test_x, test_y) if rank < n_test else (train_x, train_y)
            xs.append(seqs[idx])
            ys.extend([label] * len(seqs[idx]))

    clf = LogisticRegression(max_iter=1000, random_state=seed)
    clf.fit(np.vstack(train_x), np.asarray(train_y))
    return float(clf.score(np.vstack(test_x), np.asarray(test_y)))


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of the cross-language evaluation matrix."""

    scenario_id: str
    adaptation_language: str
    conversion_language: str
    target_speaker: str
    source_speakers: tuple

    def __post_init__(self):
        if self.scenario_id not in SCENARIO_LANGUAGES:
            raise InvalidScenario(
                f"unknown scenario {self.scenario_id!r}; expected one of {SCENARIO_IDS}"
            )
        _, adapt_lang, convert_lang = SCENARIO_LANGUAGES[self.scenario_id]
        if (self.adaptation_language, self.conversion_language) != (adapt_lang, convert_lang):
            raise InvalidScenario(
                f"{self.scenario_id} means adaptation on {adapt_lang} and conversion of "
                f"{convert_lang}, got ({self.adaptation_language}, {self.conversion_language})"
            )
        object.__setattr__(self, "source_speakers", tuple(self.source_speakers))
        if not self.source_speakers:
            raise InvalidScenario(f"{self.scenario_id}: at least one source speaker required")

    @property
    def base_language(self) -> str:
        return SCENARIO_LANGUAGES[self.scenario_id][0]


def default_scenarios(corpus: Corpus, ids=SCENARIO_IDS) -> list:
    """Build the standard scenario list from the corpus speaker roles.

    The adaptation target for a scenario is the held-out target whose
    home language matches the adaptation language; the sources are all
    source-role speakers of the conversion language.
    """
    specs = []
    for sid in ids:
        if sid not in SCENARIO_LANGUAGES:
            raise InvalidScenario(f"unknown scenario {sid!r}; expected one of {SCENARIO_IDS}")
        _, adapt_lang, convert_lang = SCENARIO_LANGUAGES[sid]
        targets = corpus.speakers_with_role(ROLE_TARGET, adapt_lang)
        sources = corpus.speakers_with_role(ROLE_SOURCE, convert_lang)
        if not targets:
            raise InvalidScenario(f"{sid}: corpus has no target speaker for language {adapt_lang}")
        if not sources:
            raise InvalidScenario(f"{sid}: corpus has no source speakers for language {convert_lang}")
        specs.append(ScenarioSpec(sid, adapt_lang, convert_lang, targets[0], tuple(sources)))
    return specs


@dataclass
class EvalReport:
    """Aggregated scenario results plus probe and duration checks.

    ``metadata`` holds run bookkeeping (wall time and the like) and is
    the only field allowed to differ between identically-seeded runs.
    """

    scenarios: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    probes: dict = field(default_factory=dict)
    duration_checks: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "scenarios": self.scenarios,
            "records": self.records,
            "probes": self.probes,
            "duration_checks": self.duration_checks,
            "metadata": self.metadata,
        }
        return json.loads(json.dumps(doc))

    def comparable_dict(self) -> dict:
        """Everything that must be reproducible bit-for-bit given a seed."""
        doc = self.to_dict()
        doc.pop("metadata")
        return doc

    def save(self, path):
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path):
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def save_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["scenario", "source", "target", "utterance", "mcd"])
            for r in self.records:
                writer.writerow(
                    [r["scenario"], r["source"], r["target"], r["utterance"], f"{r['mcd']:.6f}"]
                )


def _resolve_checkpoints(checkpoints) -> dict:
    resolved = {}
    for language, entry in checkpoints.items():
        if isinstance(entry, ParameterPartition):
            resolved[language] = entry
        else:
            partition, _meta, _extras = load_checkpoint(entry)
            resolved[language] = partition
    return resolved


def _probe_accuracies(corpus: Corpus, partition: ParameterPartition, language, seed):
    entries = corpus.entries_for(language=language, split=SPLIT_TRAIN)
    mel_seqs, latent_seqs = [], []
    for entry in entries:
        mel = corpus.load_mel(entry).frames
        mel_seqs.append((mel, entry.speaker_id))
        latent_seqs.append((mean_latent(acoustic_encode(partition, mel)), entry.speaker_id))
    n_speakers = len({label for _, label in mel_seqs})
    return {
        "mel_accuracy": speaker_probe(mel_seqs, seed=seed),
        "latent_accuracy": speaker_probe(latent_seqs, seed=seed),
        "chance": 1.0 / n_speakers,
        "n_speakers": n_speakers,
        "language": language,
    }


def run_scenarios(
    specs,
    checkpoints,
    corpus: Corpus,
    adapt_config: AdaptConfig | None = None,
    seed: int = 0,
    include_probes: bool = True,
    verbose: bool = True,
) -> EvalReport:
    """Adapt, convert and score every requested scenario.

    ``checkpoints`` maps a base-model language to either a checkpoint
    path or an in-memory parameter partition.  Each scenario adapts the
    matching base model to its target, converts every evaluation
    utterance of its sources, and scores the result against the
    parallel reference rendered in the target's voice.  The do-nothing
    baseline (source mel scored against the same reference) is kept per
    conversion.  Deterministic apart from ``metadata``.
    """
    started = time.monotonic()
    bases = _resolve_checkpoints(checkpoints)
    config = adapt_config if adapt_config is not None else AdaptConfig(seed=seed, log_every=0)

    scenarios, records = {}, []
    for spec in specs:
        if spec.base_language not in bases:
            raise MissingCheckpoint(
                f"{spec.scenario_id} needs a base model trained on language "
                f"{spec.base_language}; have {sorted(bases)}"
            )
        if spec.target_speaker not in corpus.speakers:
            raise UnknownSpeaker(spec.target_speaker)
        adapt_entries = corpus.entries_for(
            speaker_id=spec.target_speaker, language=spec.adaptation_language, split=SPLIT_ADAPT
        )
        if not adapt_entries:
            raise InvalidScenario(
                f"{spec.scenario_id}: target {spec.target_speaker} has no adaptation "
                f"speech in language {spec.adaptation_language}"
            )
        mels = [corpus.load_mel(e).frames for e in adapt_entries]
        if verbose:
            print(
                f"scenario {spec.scenario_id}: adapting to {spec.target_speaker} "
                f"on {len(mels)} language-{spec.adaptation_language} utterances"
            )
        adapted, adapt_report = adapt_to_target(bases[spec.base_language], mels, config)

        target = corpus.speakers[spec.target_speaker]
        inventory = corpus.inventories[spec.conversion_language]
        pair_values = {}
        for source in spec.source_speakers:
            if source not in corpus.speakers:
                raise UnknownSpeaker(source)
            entries = corpus.entries_for(
                speaker_id=source, language=spec.conversion_language, split=SPLIT_EVAL
            )
            if not entries:
                raise InvalidScenario(
                    f"{spec.scenario_id}: source {source} has no language-"
                    f"{spec.conversion_language} evaluation utterances"
                )
            values = []
            for entry in entries:
                source_mel = corpus.load_mel(entry).frames
                converted = convert_mel(adapted, source_mel)
                reference_wave = render_parallel_reference(
                    corpus.utterances[entry.utterance_id],
                    target,
                    inventory,
                    corpus.render_seeds[entry.utterance_id],
                    corpus.frame_config,
                )
                reference = mel_spectrogram(reference_wave, corpus.frame_config).frames
                value = mcd(converted, reference)
                values.append(value)
                records.append(
                    {
                        "scenario": spec.scenario_id,
                        "source": source,
                        "target": spec.target_speaker,
                        "utterance": entry.utterance_id,
                        "mcd": value,
                        "baseline_mcd": mcd(source_mel, reference),
                        "frames": int(source_mel.shape[0]),
                        "frames_preserved": bool(converted.shape[0] == source_mel.shape[0]),
                    }
                )
            pair_values[source] = {
                "mcd_mean": float(np.mean(values)),
                "mcd_std": float(np.std(values)),
                "utterances": len(values),
            }

        rows = [r for r in records if r["scenario"] == spec.scenario_id]
        scenarios[spec.scenario_id] = {
            "base_language": spec.base_language,
            "adaptation_language": spec.adaptation_language,
            "conversion_language": spec.conversion_language,
            "target": spec.target_speaker,
            "mcd_mean": float(np.mean([r["mcd"] for r in rows])),
            "mcd_std": float(np.std([r["mcd"] for r in rows])),
            "baseline_mcd_mean": float(np.mean([r["baseline_mcd"] for r in rows])),
            "utterances": len(rows),
            "pairs": pair_values,
            "adaptation": {
                "steps": adapt_report.steps,
                "initial_loss": adapt_report.initial_loss,
                "final_loss": adapt_report.final_loss,
            },
        }
        if verbose:
            s = scenarios[spec.scenario_id]
            print(
                f"scenario {spec.scenario_id}: mean MCD {s['mcd_mean']:.3f} dB "
                f"(do-nothing {s['baseline_mcd_mean']:.3f} dB) over {s['utterances']} conversions"
            )

    probes = {}
    if include_probes and specs:
        probe_language = specs[0].base_language
        probes = _probe_accuracies(corpus, bases[probe_language], probe_language, seed)
        if verbose:
            print(
                f"speaker probe: raw mel {probes['mel_accuracy']:.3f}, "
                f"latent means {probes['latent_accuracy']:.3f} "
                f"(chance {probes['chance']:.3f})"
            )

    return EvalReport(
        scenarios=scenarios,
        records=records,
        probes=probes,
        duration_checks={
            "checked": len(records),
            "all_preserved": bool(all(r["frames_preserved"] for r in records)),
        },
        metadata={
            "seed": seed,
            "wall_time_seconds": time.monotonic() - started,
            "scenarios_requested": [spec.scenario_id for spec in specs],
        },
    )
