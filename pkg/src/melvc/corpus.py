"""Deterministic parametric multi-speaker corpus in two synthetic languages.

Speakers are parameterized by formant shift, base f0 and spectral tilt;
utterances are harmonic-source / formant-filter renderings of random
phoneme sequences.  Language A and language B use disjoint phoneme
inventories.  Because every utterance is generated from an explicit
recipe, the exact same phoneme/duration sequence can be re-rendered in
any other speaker's voice, which provides frame-aligned parallel
references that real non-parallel data never has.

On disk a corpus is ``manifest.jsonl`` (one entry per utterance) plus
``recipe.json`` (speakers, inventories, utterance specs, seeds) plus
``wav/`` and ``ling/`` payload directories.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import (
    MATRIX_MAGIC_LINGUISTIC,
    FrameConfig,
    MelSpectrogram,
    Waveform,
    mel_spectrogram,
    read_matrix,
    read_wav,
    write_matrix,
    write_wav,
)
from .errors import UnknownPhoneme

LANG_A = "A"
LANG_B = "B"
LANGUAGES = (LANG_A, LANG_B)

# Speaker role tags used by the evaluation scenarios.
ROLE_TRAIN = "train"
ROLE_TARGET = "target"
ROLE_SOURCE = "source"

# Utterance split tags.
SPLIT_TRAIN = "train"
SPLIT_ADAPT = "adapt"
SPLIT_TARGET_VAL = "target_val"
SPLIT_EVAL = "eval"


@dataclass(frozen=True)
class PhonemeTemplate:
    phoneme_id: str
    formants: tuple[float, float, float]  # F1..F3 in Hz
    voiced: bool
    mean_duration: int  # frames


@dataclass(frozen=True)
class PhonemeInventory:
    language: str
    templates: tuple[PhonemeTemplate, ...]

    def __post_init__(self):
        if len(self.templates) < 8:
            raise ValueError("inventory needs at least 8 phonemes")
        if len(self.ids) != len(set(self.ids)):
            raise ValueError("duplicate phoneme ids")

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.phoneme_id for t in self.templates)

    def lookup(self, phoneme_id: str) -> PhonemeTemplate:
        for t in self.templates:
            if t.phoneme_id == phoneme_id:
                return t
        raise UnknownPhoneme(f"{phoneme_id!r} not in language-{self.language} inventory")

    @property
    def feature_dim(self) -> int:
        """One-hot phoneme id plus (fraction, log duration, voicing)."""
        return len(self.templates) + 3


DEFAULT_INVENTORIES = {
    LANG_A: PhonemeInventory(
        LANG_A,
        (
            PhonemeTemplate("aa", (730.0, 1090.0, 2440.0), True, 10),
            PhonemeTemplate("ee", (530.0, 1840.0, 2480.0), True, 10),
            PhonemeTemplate("ii", (270.0, 2290.0, 3010.0), True, 9),
            PhonemeTemplate("oo", (570.0, 840.0, 2410.0), True, 10),
            PhonemeTemplate("uu", (300.0, 870.0, 2240.0), True, 9),
            PhonemeTemplate("mm", (350.0, 1200.0, 2100.0), True, 8),
            PhonemeTemplate("ss", (1900.0, 3200.0, 4300.0), False, 8),
            PhonemeTemplate("kk", (1200.0, 2200.0, 3300.0), False, 7),
        ),
    ),
    LANG_B: PhonemeInventory(
        LANG_B,
        (
            PhonemeTemplate("ra", (660.0, 1400.0, 2600.0), True, 9),
            PhonemeTemplate("re", (460.0, 2000.0, 2700.0), True, 9),
            PhonemeTemplate("ri", (240.0, 2500.0, 3300.0), True, 9),
            PhonemeTemplate("ro", (500.0, 950.0, 2650.0), True, 10),
            PhonemeTemplate("ru", (320.0, 1100.0, 2500.0), True, 9),
            PhonemeTemplate("nn", (400.0, 1600.0, 2300.0), True, 8),
            PhonemeTemplate("zz", (2100.0, 3400.0, 4600.0), False, 8),
            PhonemeTemplate("tt", (1500.0, 2700.0, 3800.0), False, 7),
        ),
    ),
}


@dataclass(frozen=True)
class SyntheticSpeaker:
    speaker_id: str
    formant_shift: float  # in [0.8, 1.25]
    base_f0: float  # Hz, in [90, 300]
    spectral_tilt: float  # dB/octave, in [-12, 0]
    language_home: str

    def __post_init__(self):
        if not 0.8 <= self.formant_shift <= 1.25:
            raise ValueError(f"formant_shift {self.formant_shift} out of [0.8, 1.25]")
        if not 90.0 <= self.base_f0 <= 300.0:
            raise ValueError(f"base_f0 {self.base_f0} out of [90, 300]")
        if not -12.0 <= self.spectral_tilt <= 0.0:
            raise ValueError(f"spectral_tilt {self.spectral_tilt} out of [-12, 0]")
        if self.language_home not in LANGUAGES:
            raise ValueError(f"unknown language {self.language_home!r}")


@dataclass(frozen=True)
class UtteranceSpec:
    utterance_id: str
    speaker_id: str
    language: str
    phonemes: tuple[str, ...]
    durations: tuple[int, ...]  # frames per phoneme

    def __post_init__(self):
        if len(self.phonemes) != len(self.durations):
            raise ValueError("phonemes and durations differ in length")
        if any(d < 2 for d in self.durations):
            raise ValueError("every phoneme needs at least 2 frames")
        if self.total_frames < 10:
            raise ValueError("utterance needs at least 10 frames")

    @property
    def total_frames(self) -> int:
        return int(sum(self.durations))


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    speaker_id: str
    language: str
    wav_path: str  # relative to the corpus root
    ling_path: str | None  # None exactly for untranscribed entries
    frames: int


@dataclass
class CorpusConfig:
    """Shape of a generated corpus; speaker roles drive the eval scenarios.

    Each language gets its own held-out adaptation targets; a target's
    adaptation and validation utterances are in its home language, so
    "adapt on language B" means "adapt to the language-B target".
    Transcriptions (linguistic feature files) are written only for
    training speakers whose utterance language is listed in
    ``transcribed_languages`` - target and source speech is always
    untranscribed.
    """

    train_speakers_a: int = 8
    train_speakers_b: int = 0
    targets_per_language: int = 1
    sources_per_language: int = 1
    utterances_per_speaker: int = 20
    adapt_utterances_per_target: int = 20
    val_utterances_per_target: int = 5
    eval_utterances_per_source: int = 10
    min_phonemes: int = 3
    max_phonemes: int = 6
    min_duration: int = 6  # frames per phoneme
    max_duration: int = 12
    transcribed_languages: tuple[str, ...] = (LANG_A,)
    frame_config: FrameConfig = field(default_factory=FrameConfig)


@dataclass
class Corpus:
    """A manifest plus the recipe needed to re-render any utterance."""

    root: Path
    entries: list[ManifestEntry]
    speakers: dict[str, SyntheticSpeaker]
    inventories: dict[str, PhonemeInventory]
    utterances: dict[str, UtteranceSpec]
    render_seeds: dict[str, int]
    splits: dict[str, str]  # utterance_id -> split tag
    roles: dict[str, str]  # speaker_id -> role tag
    frame_config: FrameConfig

    @property
    def feature_dim(self) -> int:
        dims = {inv.feature_dim for inv in self.inventories.values()}
        if len(dims) != 1:
            raise ValueError("inventories disagree on feature dimension")
        return dims.pop()

    def transcribed_entries(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.ling_path is not None]

    def entries_for(self, speaker_id=None, language=None, split=None):
        out = []
        for e in self.entries:
            if speaker_id is not None and e.speaker_id != speaker_id:
                continue
            if language is not None and e.language != language:
                continue
            if split is not None and self.splits[e.utterance_id] != split:
                continue
            out.append(e)
        return out

    def speakers_with_role(self, role, language=None):
        out = []
        for sid in sorted(self.roles):
            if self.roles[sid] != role:
                continue
            if language is not None and self.speakers[sid].language_home != language:
                continue
            out.append(sid)
        return out

    def load_waveform(self, entry: ManifestEntry) -> Waveform:
        return read_wav(self.root / entry.wav_path)

    def load_mel(self, entry: ManifestEntry) -> MelSpectrogram:
        return mel_spectrogram(self.load_waveform(entry), self.frame_config)

    def load_linguistic(self, entry: ManifestEntry) -> np.ndarray:
        if entry.ling_path is None:
            raise ValueError(f"{entry.utterance_id} has no linguistic features")
        return read_matrix(self.root / entry.ling_path, magic=MATRIX_MAGIC_LINGUISTIC)


def linguistic_features(spec: UtteranceSpec, inventory: PhonemeInventory) -> np.ndarray:
    """Frame-aligned features: one-hot phoneme + fraction-into-phoneme,
    log duration, voicing.  Depends only on the spec and inventory, never
    on the speaker, so the same content spoken by two speakers maps to
    identical features."""
    ids = inventory.ids
    feats = np.zeros((spec.total_frames, inventory.feature_dim))
    frame = 0
    for phoneme, dur in zip(spec.phonemes, spec.durations):
        template = inventory.lookup(phoneme)
        col = ids.index(phoneme)
        rows = slice(frame, frame + dur)
        feats[rows, col] = 1.0
        feats[rows, -3] = np.arange(dur) / dur
        feats[rows, -2] = np.log(dur)
        feats[rows, -1] = 1.0 if template.voiced else 0.0
        frame += dur
    return feats


def _formant_envelope(freqs, template: PhonemeTemplate, speaker: SyntheticSpeaker):
    """Spectral magnitude envelope: Gaussian formant peaks plus tilt."""
    freqs = np.asarray(freqs, dtype=np.float64)
    env = np.full_like(freqs, 0.01)
    for formant, bw, gain in zip(template.formants, (90.0, 130.0, 180.0), (1.0, 0.63, 0.4)):
        center = formant * speaker.formant_shift
        env += gain * np.exp(-0.5 * ((freqs - center) / bw) ** 2)
    octaves = np.log2(np.maximum(freqs, 150.0) / 150.0)
    return env * 10.0 ** (speaker.spectral_tilt * octaves / 20.0)


def _apply_fades(segment, fade):
    n = len(segment)
    fade = min(fade, n // 2)
    if fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
        segment[:fade] *= ramp
        segment[-fade:] *= ramp[::-1]
    return segment


def render_utterance(
    spec: UtteranceSpec,
    speaker: SyntheticSpeaker,
    inventory: PhonemeInventory,
    seed: int,
    frame_config: FrameConfig | None = None,
):
    """Render (waveform, linguistic features) for one utterance.

    The waveform is a harmonic source with a slow deterministic f0
    contour, filtered per phoneme by the speaker-scaled formant
    envelope; unvoiced phonemes use spectrally shaped noise.  Output
    length is exactly the number of samples covered by
    ``spec.total_frames`` analysis windows, so the mel frame count
    matches the feature frame count.
    """
    cfg = frame_config or FrameConfig()
    templates = [inventory.lookup(p) for p in spec.phonemes]
    total_frames = spec.total_frames
    n_samples = cfg.sample_count(total_frames)
    rng = np.random.default_rng(seed)

    t = np.arange(n_samples) / cfg.sample_rate
    phase_a, phase_b = rng.uniform(0.0, 2.0 * np.pi, 2)
    contour = 1.0 + 0.03 * np.sin(2 * np.pi * 1.3 * t + phase_a)
    contour += 0.02 * np.sin(2 * np.pi * 3.4 * t + phase_b)
    f0_track = speaker.base_f0 * contour
    running_phase = 2.0 * np.pi * np.cumsum(f0_track) / cfg.sample_rate

    out = np.zeros(n_samples)
    start_frame = 0
    for i, (template, dur) in enumerate(zip(templates, spec.durations)):
        start = start_frame * cfg.hop_size
        end_frame = start_frame + dur
        end = n_samples if i == len(templates) - 1 else end_frame * cfg.hop_size
        seg_len = end - start
        if template.voiced:
            f0_mean = f0_track[start:end].mean()
            n_harm = max(1, int(0.45 * cfg.sample_rate / f0_mean))
            harmonics = np.arange(1, n_harm + 1)
            amps = _formant_envelope(harmonics * f0_mean, template, speaker)
            amps = amps / np.sqrt(np.sum(amps**2) / 2.0)
            segment = (amps[:, None] * np.sin(np.outer(harmonics, running_phase[start:end]))).sum(axis=0)
            target_rms = 0.12
        else:
            noise = rng.standard_normal(seg_len)
            spectrum = np.fft.rfft(noise)
            freqs = np.fft.rfftfreq(seg_len, 1.0 / cfg.sample_rate)
            segment = np.fft.irfft(spectrum * _formant_envelope(freqs, template, speaker), n=seg_len)
            target_rms = 0.06
        rms = np.sqrt(np.mean(segment**2))
        segment *= target_rms / max(rms, 1e-12)
        out[start:end] = _apply_fades(segment, fade=48)
        start_frame = end_frame

    out += 0.004 * rng.standard_normal(n_samples)
    return Waveform(out, cfg.sample_rate), linguistic_features(spec, inventory)


def render_parallel_reference(
    spec: UtteranceSpec,
    target: SyntheticSpeaker,
    inventory: PhonemeInventory,
    seed: int,
    frame_config: FrameConfig | None = None,
) -> Waveform:
    """The target speaker's rendition of the exact source content.

    Same phoneme sequence, durations and render seed, so the result is
    frame-aligned with the source utterance; passing the source speaker
    reproduces the original waveform bit for bit.
    """
    wave, _ = render_utterance(spec, target, inventory, seed, frame_config)
    return wave


def _spread(lo, hi, n, rng, jitter):
    """n values spread over [lo, hi] with a little deterministic jitter."""
    if n == 1:
        base = np.array([(lo + hi) / 2.0])
    else:
        base = np.linspace(lo, hi, n)
    span = (hi - lo) or 1.0
    values = base + rng.uniform(-jitter, jitter, n) * span
    return np.clip(values, lo, hi)


def _make_speakers(cfg: CorpusConfig, rng) -> tuple[dict, dict]:
    speakers, roles = {}, {}

    def add(speaker, role):
        speakers[speaker.speaker_id] = speaker
        roles[speaker.speaker_id] = role

    for lang, count in ((LANG_A, cfg.train_speakers_a), (LANG_B, cfg.train_speakers_b)):
        if count == 0:
            continue
        f0s = _spread(110.0, 280.0, count, rng, 0.02)
        shifts = rng.permutation(_spread(0.85, 1.2, count, rng, 0.02))
        tilts = rng.permutation(_spread(-8.0, -2.0, count, rng, 0.02))
        for i in range(count):
            add(
                SyntheticSpeaker(
                    f"train{lang}{i:02d}", float(shifts[i]), float(f0s[i]), float(tilts[i]), lang
                ),
                ROLE_TRAIN,
            )
    # One block of held-out targets per language; high-pitched so the
    # source -> target gap is audible and measurable.
    for lang in LANGUAGES:
        for i in range(cfg.targets_per_language):
            add(
                SyntheticSpeaker(
                    f"target{lang}{i:02d}",
                    float(rng.uniform(1.05, 1.15)),
                    float(rng.uniform(235.0, 265.0)),
                    float(rng.uniform(-4.5, -2.5)),
                    lang,
                ),
                ROLE_TARGET,
            )
    for lang in LANGUAGES:
        for i in range(cfg.sources_per_language):
            add(
                SyntheticSpeaker(
                    f"source{lang}{i:02d}",
                    float(rng.uniform(0.86, 0.96)),
                    float(rng.uniform(98.0, 125.0)),
                    float(rng.uniform(-7.5, -5.0)),
                    lang,
                ),
                ROLE_SOURCE,
            )
    return speakers, roles


def _utterance_plan(cfg: CorpusConfig, role, home_language):
    """(split, language, count) blocks for one speaker."""
    if role == ROLE_TRAIN:
        return [(SPLIT_TRAIN, home_language, cfg.utterances_per_speaker)]
    if role == ROLE_TARGET:
        return [
            (SPLIT_ADAPT, home_language, cfg.adapt_utterances_per_target),
            (SPLIT_TARGET_VAL, home_language, cfg.val_utterances_per_target),
        ]
    return [(SPLIT_EVAL, home_language, cfg.eval_utterances_per_source)]


def generate_corpus(cfg: CorpusConfig, out_dir, seed: int) -> Corpus:
    """Render a full corpus to ``out_dir`` and return it.

    Deterministic given (cfg, seed): same inputs produce byte-identical
    manifests and payload files.  Only utterances in
    ``cfg.transcribed_languages`` get linguistic feature files.
    """
    root = Path(out_dir)
    (root / "wav").mkdir(parents=True, exist_ok=True)
    (root / "ling").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng([seed, 0])
    speakers, roles = _make_speakers(cfg, rng)
    inventories = DEFAULT_INVENTORIES

    utt_rng = np.random.default_rng([seed, 1])
    entries, utterances, render_seeds, splits = [], {}, {}, {}
    for speaker_id in sorted(speakers):
        speaker = speakers[speaker_id]
        role = roles[speaker_id]
        utt_index = 0
        for split, language, count in _utterance_plan(cfg, role, speaker.language_home):
            inventory = inventories[language]
            for _ in range(count):
                utt_id = f"{speaker_id}_{language}_u{utt_index:03d}"
                utt_index += 1
                n_phonemes = int(utt_rng.integers(cfg.min_phonemes, cfg.max_phonemes + 1))
                phonemes = tuple(str(p) for p in utt_rng.choice(inventory.ids, n_phonemes))
                durations = tuple(
                    int(d)
                    for d in utt_rng.integers(cfg.min_duration, cfg.max_duration + 1, n_phonemes)
                )
                spec = UtteranceSpec(utt_id, speaker_id, language, phonemes, durations)
                render_seed = int(utt_rng.integers(0, 2**31))

                wave, feats = render_utterance(spec, speaker, inventory, render_seed, cfg.frame_config)
                wav_path = f"wav/{utt_id}.wav"
                write_wav(root / wav_path, wave)
                ling_path = None
                if role == ROLE_TRAIN and language in cfg.transcribed_languages:
                    ling_path = f"ling/{utt_id}.bin"
                    write_matrix(root / ling_path, feats, magic=MATRIX_MAGIC_LINGUISTIC)

                entries.append(
                    ManifestEntry(utt_id, speaker_id, language, wav_path, ling_path, spec.total_frames)
                )
                utterances[utt_id] = spec
                render_seeds[utt_id] = render_seed
                splits[utt_id] = split

    corpus = Corpus(
        root=root,
        entries=entries,
        speakers=speakers,
        inventories=inventories,
        utterances=utterances,
        render_seeds=render_seeds,
        splits=splits,
        roles=roles,
        frame_config=cfg.frame_config,
    )
    save_manifest(corpus, root / "manifest.jsonl")
    _save_recipe(corpus, root / "recipe.json")
    return corpus


def save_manifest(corpus: Corpus, path):
    lines = []
    for e in corpus.entries:
        lines.append(
            json.dumps(
                {
                    "utterance_id": e.utterance_id,
                    "speaker_id": e.speaker_id,
                    "language": e.language,
                    "wav_path": e.wav_path,
                    "ling_path": e.ling_path,
                    "frames": e.frames,
                }
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path) -> list[ManifestEntry]:
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        entries.append(ManifestEntry(**raw))
    return entries


def _save_recipe(corpus: Corpus, path):
    doc = {
        "frame_config": vars(corpus.frame_config),
        "speakers": {
            sid: {
                "formant_shift": s.formant_shift,
                "base_f0": s.base_f0,
                "spectral_tilt": s.spectral_tilt,
                "language_home": s.language_home,
            }
            for sid, s in sorted(corpus.speakers.items())
        },
        "roles": {sid: corpus.roles[sid] for sid in sorted(corpus.roles)},
        "inventories": {
            lang: [
                {
                    "phoneme_id": t.phoneme_id,
                    "formants": list(t.formants),
                    "voiced": t.voiced,
                    "mean_duration": t.mean_duration,
                }
                for t in inv.templates
            ]
            for lang, inv in sorted(corpus.inventories.items())
        },
        "utterances": {
            uid: {
                "speaker_id": u.speaker_id,
                "language": u.language,
                "phonemes": list(u.phonemes),
                "durations": list(u.durations),
                "render_seed": corpus.render_seeds[uid],
                "split": corpus.splits[uid],
            }
            for uid, u in sorted(corpus.utterances.items())
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_corpus(root) -> Corpus:
    """Load a corpus previously written by :func:`generate_corpus`."""
    root = Path(root)
    entries = load_manifest(root / "manifest.jsonl")
    doc = json.loads((root / "recipe.json").read_text(encoding="utf-8"))

    frame_config = FrameConfig(**doc["frame_config"])
    speakers = {
        sid: SyntheticSpeaker(speaker_id=sid, **fields)
        for sid, fields in doc["speakers"].items()
    }
    inventories = {
        lang: PhonemeInventory(
            lang,
            tuple(
                PhonemeTemplate(
                    t["phoneme_id"], tuple(t["formants"]), t["voiced"], t["mean_duration"]
                )
                for t in templates
            ),
        )
        for lang, templates in doc["inventories"].items()
    }
    utterances, render_seeds, splits = {}, {}, {}
    for uid, fields in doc["utterances"].items():
        utterances[uid] = UtteranceSpec(
            uid,
            fields["speaker_id"],
            fields["language"],
            tuple(fields["phonemes"]),
            tuple(fields["durations"]),
        )
        render_seeds[uid] = fields["render_seed"]
        splits[uid] = fields["split"]

    return Corpus(
        root=root,
        entries=entries,
        speakers=speakers,
        inventories=inventories,
        utterances=utterances,
        render_seeds=render_seeds,
        splits=splits,
        roles=doc["roles"],
        frame_config=frame_config,
    )
