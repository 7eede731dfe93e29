"""Unsupervised adaptation of the trained model to a new speaker.

All speaker bias vectors are removed first; what remains is the
speaker-independent network.  Fine-tuning then minimises the mel
reconstruction error through the acoustic encoder's latent means and
the bias-free decoder, using nothing but untranscribed speech of the
target.  Only the decoder core moves by default; the acoustic encoder
can optionally be unfrozen, and the linguistic encoder is never
touched.
"""

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corpus import SPLIT_ADAPT, Corpus
from .errors import DivergenceError, NoAdaptationData, ShapeError
from .losses import adaptation_loss, adaptation_loss_and_grads
from .model import ParameterPartition, strip_speaker_params
from .optim import Adam


@dataclass
class AdaptConfig:
    learning_rate: float = 1e-4
    max_steps: int = 500
    seed: int = 0
    update_acoustic_encoder: bool = False
    batch_size: int = 0  # 0 = every utterance every step
    log_every: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8


@dataclass
class AdaptReport:
    steps: int
    initial_loss: float
    final_loss: float
    history: list = field(default_factory=list)
    utterances: int = 0
    wall_time_seconds: float = 0.0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def load_adaptation_mels(
    corpus: Corpus, target_speaker: str, language=None, split=SPLIT_ADAPT
) -> list:
    """Log-mel matrices of the target's adaptation utterances."""
    entries = corpus.entries_for(speaker_id=target_speaker, language=language, split=split)
    return [corpus.load_mel(e).frames for e in entries]


def adapt_to_target(
    partition: ParameterPartition, mels: list, config: AdaptConfig
) -> tuple[ParameterPartition, AdaptReport]:
    """Strip speaker parameters and fine-tune on the target's mels.

    Returns a new partition; the input partition is never modified.
    ``max_steps=0`` degenerates to a pure strip.  Deterministic given
    (partition, mels, config).
    """
    if not mels:
        raise NoAdaptationData("no adaptation utterances supplied")
    d_mel = partition.config.d_mel
    mels = [np.asarray(m, dtype=np.float64) for m in mels]
    for i, m in enumerate(mels):
        if m.ndim != 2 or m.shape[1] != d_mel:
            raise ShapeError(f"adaptation mel {i} must be (frames, {d_mel}), got {m.shape}")

    started = time.monotonic()
    adapted = strip_speaker_params(partition)
    named = dict(adapted.named_arrays())
    optimizer = Adam(
        config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon
    )

    def mean_loss():
        return float(np.mean([adaptation_loss(adapted, m) for m in mels]))

    initial = mean_loss()
    history = []
    for step in range(1, config.max_steps + 1):
        if config.batch_size > 0:
            rng = np.random.default_rng([config.seed, 1, step])
            replace = config.batch_size > len(mels)
            batch = [mels[i] for i in rng.choice(len(mels), config.batch_size, replace=replace)]
        else:
            batch = mels

        acc = {}
        losses = []
        for m in batch:
            loss, grads = adaptation_loss_and_grads(
                adapted, m, update_acoustic_encoder=config.update_acoustic_encoder
            )
            losses.append(loss)
            for key, g in grads.items():
                if key in acc:
                    acc[key] += g
                else:
                    acc[key] = g.copy()
        batch_loss = float(np.mean(losses))
        if not np.isfinite(batch_loss):
            raise DivergenceError(step, last_good_params=adapted.copy())
        for key in acc:
            acc[key] *= 1.0 / len(batch)
        optimizer.apply(named, acc)

        if config.log_every and (step % config.log_every == 0 or step == config.max_steps):
            history.append({"step": step, "loss": batch_loss})
            print(f"adapt step {step:5d} | mel reconstruction {batch_loss:.4f}")

    report = AdaptReport(
        steps=config.max_steps,
        initial_loss=initial,
        final_loss=mean_loss(),
        history=history,
        utterances=len(mels),
        wall_time_seconds=time.monotonic() - started,
        config=asdict(config),
    )
    return adapted, report
