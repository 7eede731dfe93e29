"""Joint training of both encoders and the speaker-biased decoder.

Each step samples a batch of transcribed utterances, draws fresh
reparameterization noise, and takes one Adam step on the combined
reconstruction + latent-tie objective.  All randomness is derived from
``default_rng([seed, stream, step])`` so a run is a pure function of
(data, configs) and training can be resumed from a checkpoint with
bit-identical results.
"""

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .checkpoints import load_checkpoint, save_checkpoint
from .corpus import SPLIT_TRAIN, Corpus
from .errors import DivergenceError, NoTranscribedData, ShapeError
from .losses import KL_ACOUSTIC_TO_LINGUISTIC, training_loss, training_loss_and_grads
from .model import ModelConfig, ParameterPartition, ensure_speaker, init_parameters
from .optim import Adam


@dataclass
class TrainingExample:
    utterance_id: str
    speaker_id: str
    features: np.ndarray  # T x d_linguistic
    mel: np.ndarray  # T x d_mel


@dataclass
class TrainConfig:
    beta: float = 0.25
    learning_rate: float = 1e-3
    batch_size: int = 8
    max_steps: int = 2000
    validation_fraction: float = 0.1
    seed: int = 0
    log_every: int = 100
    kl_direction: str = KL_ACOUSTIC_TO_LINGUISTIC
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8


@dataclass
class TrainState:
    """Everything needed to continue training exactly where it stopped."""

    partition: ParameterPartition
    optimizer: Adam
    step: int


@dataclass
class TrainReport:
    steps: int
    initial: dict
    final: dict
    history: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    speakers: list = field(default_factory=list)
    parameter_count: int = 0
    wall_time_seconds: float = 0.0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        # canonical JSON form (tuples become lists) so save/load round-trips
        return json.loads(json.dumps(asdict(self)))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def load_training_set(corpus: Corpus, languages=None) -> list:
    """Transcribed train-split utterances as in-memory examples.

    ``languages`` restricts the selection (e.g. a base model trained on
    language A only); None takes every transcribed training utterance.
    """
    examples = []
    for entry in corpus.entries:
        if corpus.splits[entry.utterance_id] != SPLIT_TRAIN or entry.ling_path is None:
            continue
        if languages is not None and entry.language not in languages:
            continue
        features = corpus.load_linguistic(entry)
        mel = corpus.load_mel(entry).frames
        if features.shape[0] != mel.shape[0]:
            raise ShapeError(
                f"{entry.utterance_id}: {features.shape[0]} feature frames vs "
                f"{mel.shape[0]} mel frames"
            )
        examples.append(TrainingExample(entry.utterance_id, entry.speaker_id, features, mel))
    if not examples:
        raise NoTranscribedData("no transcribed training utterances selected")
    return examples


def _mean_loss(partition, examples, beta, kl_direction):
    """Sampling-free loss (latent mean decode), averaged over utterances."""
    mains, ties, totals = [], [], []
    for ex in examples:
        out = training_loss(
            partition, ex.features, ex.mel, ex.speaker_id, beta, None, kl_direction
        )
        mains.append(out.loss_main)
        ties.append(out.loss_tie)
        totals.append(out.total)
    return {
        "loss_main": float(np.mean(mains)),
        "loss_tie": float(np.mean(ties)),
        "total": float(np.mean(totals)),
    }


def _split_validation(examples, fraction, seed):
    if fraction <= 0.0:
        return examples, []
    rng = np.random.default_rng([seed, 3])
    by_speaker = {}
    for i, ex in enumerate(examples):
        by_speaker.setdefault(ex.speaker_id, []).append(i)
    val_idx = set()
    for speaker_id in sorted(by_speaker):
        idx = by_speaker[speaker_id]
        n_val = min(int(round(fraction * len(idx))), len(idx) - 1)
        if n_val > 0:
            chosen = rng.choice(len(idx), size=n_val, replace=False)
            val_idx.update(idx[c] for c in chosen)
    train = [ex for i, ex in enumerate(examples) if i not in val_idx]
    val = [ex for i, ex in enumerate(examples) if i in val_idx]
    return train, val


def train_joint(
    examples: list,
    model_config: ModelConfig,
    config: TrainConfig,
    resume: TrainState | None = None,
) -> tuple[TrainState, TrainReport]:
    """Run joint training and return the final state plus a report.

    With ``resume`` the loop continues from ``resume.step + 1`` using the
    stored optimizer moments; running N steps in one call or in several
    chunked calls produces bit-identical parameters.
    """
    if not examples:
        raise NoTranscribedData("empty training set")
    for ex in examples:
        if ex.features.shape[1] != model_config.d_linguistic:
            raise ShapeError(
                f"{ex.utterance_id}: feature dim {ex.features.shape[1]} != "
                f"model d_linguistic {model_config.d_linguistic}"
            )
        if ex.mel.shape[1] != model_config.d_mel:
            raise ShapeError(
                f"{ex.utterance_id}: mel dim {ex.mel.shape[1]} != model d_mel "
                f"{model_config.d_mel}"
            )

    started = time.monotonic()
    if resume is not None:
        partition = resume.partition
        optimizer = resume.optimizer
        first_step = resume.step + 1
    else:
        partition = init_parameters(model_config, config.seed)
        optimizer = Adam(
            config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon
        )
        first_step = 1
    for ex in examples:
        ensure_speaker(partition, ex.speaker_id)

    train_set, val_set = _split_validation(
        examples, config.validation_fraction, config.seed
    )
    named = dict(partition.named_arrays())
    initial = _mean_loss(partition, train_set, config.beta, config.kl_direction)

    history, validation = [], []
    step = first_step - 1
    for step in range(first_step, config.max_steps + 1):
        rng = np.random.default_rng([config.seed, 1, step])
        replace = config.batch_size > len(train_set)
        batch_idx = rng.choice(len(train_set), size=config.batch_size, replace=replace)

        acc = {}
        mains, ties, totals = [], [], []
        for i in batch_idx:
            ex = train_set[i]
            eps = rng.standard_normal((ex.features.shape[0], model_config.d_latent))
            out, grads = training_loss_and_grads(
                partition, ex.features, ex.mel, ex.speaker_id, config.beta, eps,
                config.kl_direction,
            )
            mains.append(out.loss_main)
            ties.append(out.loss_tie)
            totals.append(out.total)
            for key, g in grads.items():
                if key in acc:
                    acc[key] += g
                else:
                    acc[key] = g.copy()
        batch_total = float(np.mean(totals))
        if not np.isfinite(batch_total):
            raise DivergenceError(step, last_good_params=partition.copy())
        scale = 1.0 / len(batch_idx)
        for key in acc:
            acc[key] *= scale
        # speakers absent from this batch simply get no update
        optimizer.apply(named, acc)

        if config.log_every and (step % config.log_every == 0 or step == config.max_steps):
            record = {
                "step": step,
                "loss_main": float(np.mean(mains)),
                "loss_tie": float(np.mean(ties)),
                "total": batch_total,
            }
            history.append(record)
            print(
                f"step {step:6d} | main {record['loss_main']:.4f} | "
                f"tie {record['loss_tie']:.4f} | total {record['total']:.4f}"
            )
            if val_set:
                val = _mean_loss(partition, val_set, config.beta, config.kl_direction)
                validation.append({"step": step, **val})
                print(
                    f"step {step:6d} | validation main {val['loss_main']:.4f} | "
                    f"total {val['total']:.4f}"
                )

    final = _mean_loss(partition, train_set, config.beta, config.kl_direction)
    report = TrainReport(
        steps=step,
        initial=initial,
        final=final,
        history=history,
        validation=validation,
        speakers=sorted(partition.speaker_biases),
        parameter_count=partition.parameter_count(),
        wall_time_seconds=time.monotonic() - started,
        config={"train": asdict(config), "model": asdict(model_config)},
    )
    return TrainState(partition, optimizer, step), report


def save_train_state(path, state: TrainState, meta=None):
    """Checkpoint parameters plus optimizer state for exact resume."""
    full_meta = {"stage": "joint", "step": state.step}
    full_meta.update(meta or {})
    full_meta["optimizer"] = {
        "learning_rate": state.optimizer.learning_rate,
        "beta1": state.optimizer.beta1,
        "beta2": state.optimizer.beta2,
        "epsilon": state.optimizer.epsilon,
    }
    save_checkpoint(path, state.partition, meta=full_meta, extras=state.optimizer.state_arrays())


def load_train_state(path) -> tuple[TrainState, dict]:
    partition, meta, extras = load_checkpoint(path)
    opt_cfg = meta.get("optimizer", {})
    optimizer = Adam.from_state(
        opt_cfg.get("learning_rate", 1e-3),
        extras,
        opt_cfg.get("beta1", 0.9),
        opt_cfg.get("beta2", 0.999),
        opt_cfg.get("epsilon", 1e-8),
    )
    return TrainState(partition, optimizer, int(meta.get("step", 0))), meta
