"""Many-to-one voice conversion with an adapted model.

Conversion is the straight composition: acoustic-encode the input mel,
take the latent means, decode without any speaker bias.  The adapted
decoder core carries the target's voice, so whoever the input speaker
is, the output lands in the target's space.  Frame counts are always
preserved - this pipeline never changes speaking rate.
"""

import warnings

import numpy as np

from .dsp import FrameConfig, MelSpectrogram, Waveform, griffin_lim_invert, mel_spectrogram
from .errors import NotAdaptedWarning
from .model import ParameterPartition, acoustic_encode, decode, mean_latent


def convert_mel(partition: ParameterPartition, mel_frames) -> np.ndarray:
    """Convert log-mel frames (T x d_mel) into the adapted voice.

    Warns (and proceeds with the bias-free decoder) if the partition
    still carries speaker biases, which means it was never adapted.
    """
    if partition.speaker_biases:
        warnings.warn(
            NotAdaptedWarning(
                "checkpoint still carries speaker biases - it has not been "
                "adapted to a target; converting with the bias-free decoder anyway"
            )
        )
    return decode(partition, mean_latent(acoustic_encode(partition, mel_frames)), None)


def convert_spectrogram(partition: ParameterPartition, mel: MelSpectrogram) -> MelSpectrogram:
    return MelSpectrogram(convert_mel(partition, mel.frames), mel.config)


# name -> callable(MelSpectrogram) -> Waveform; extension point for
# plugging in something better than phase reconstruction
VOCODERS = {
    "griffin_lim": griffin_lim_invert,
}


def convert_waveform(
    partition: ParameterPartition,
    wave: Waveform,
    frame_config: FrameConfig | None = None,
    vocoder: str = "griffin_lim",
) -> Waveform:
    """Waveform in, converted waveform out.

    The output covers exactly the analysis frames of the input, so up to
    one trailing partial hop of audio is dropped.
    """
    if vocoder not in VOCODERS:
        raise ValueError(f"unknown vocoder {vocoder!r}; available: {sorted(VOCODERS)}")
    cfg = frame_config or FrameConfig()
    mel = mel_spectrogram(wave, cfg)
    converted = convert_spectrogram(partition, mel)
    return VOCODERS[vocoder](converted)
