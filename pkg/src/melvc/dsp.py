"""Spectral feature extraction and approximate inversion.

Log-mel analysis (waveform -> T x D mel matrix) and Griffin-Lim phase
reconstruction (mel -> waveform) with fully explicit framing: Hann
window, no center padding, T = 1 + floor((len - window) / hop).  Also
owns the on-disk formats for waveforms (16-bit PCM WAV, mono) and
float32 matrices (16-byte header + raw little-endian data).
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

from .errors import InputTooShort

MATRIX_MAGIC_MEL = b"MELF"
MATRIX_MAGIC_LINGUISTIC = b"LING"


@dataclass(frozen=True)
class FrameConfig:
    """Framing and filterbank parameters for mel analysis.

    ``sample_rate`` is carried here as well so that a mel matrix alone is
    enough to reconstruct a waveform.
    """

    sample_rate: int = 22050
    fft_size: int = 1024
    window_size: int = 1024
    hop_size: int = 256
    mel_dim: int = 80
    fmin: float = 0.0
    fmax: float = 11025.0
    log_floor: float = 1e-5

    def __post_init__(self):
        if not (0 < self.hop_size <= self.window_size <= self.fft_size):
            raise ValueError(
                f"need 0 < hop ({self.hop_size}) <= window ({self.window_size})"
                f" <= fft ({self.fft_size})"
            )
        if self.sample_rate <= 0 or self.mel_dim < 1 or self.log_floor <= 0:
            raise ValueError("sample_rate, mel_dim and log_floor must be positive")

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.window_size:
            raise InputTooShort(
                f"{n_samples} samples < one window ({self.window_size})"
            )
        return 1 + (n_samples - self.window_size) // self.hop_size

    def sample_count(self, n_frames: int) -> int:
        """Samples covered by exactly ``n_frames`` analysis windows."""
        return (n_frames - 1) * self.hop_size + self.window_size


@dataclass
class Waveform:
    """Mono sample sequence with its sample rate; amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform must be 1-D")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")


@dataclass
class MelSpectrogram:
    """T x mel_dim matrix of natural-log mel energies.

    Matrices produced by :func:`mel_spectrogram` are floored at
    ``log(log_floor)``; model-predicted matrices may dip below it.
    """

    frames: np.ndarray
    config: FrameConfig = field(default_factory=FrameConfig)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError("mel frames must be 2-D")
        if self.frames.shape[1] != self.config.mel_dim:
            raise ValueError(
                f"mel matrix has {self.frames.shape[1]} columns,"
                f" config says {self.config.mel_dim}"
            )

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filterbank: mel_dim x (fft_size/2 + 1) non-negative weights."""

    weights: np.ndarray
    center_frequencies: np.ndarray


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FrameConfig) -> MelFilterbank:
    """Build the triangular filterbank for ``cfg`` (HTK mel scale, unnormalized).

    Rows are ordered by ascending center frequency and each row is
    guaranteed to touch at least one FFT bin.
    """
    n_bins = cfg.fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * cfg.sample_rate / cfg.fft_size
    mel_edges = np.linspace(_hz_to_mel(cfg.fmin), _hz_to_mel(cfg.fmax), cfg.mel_dim + 2)
    hz_edges = _mel_to_hz(mel_edges)

    weights = np.zeros((cfg.mel_dim, n_bins))
    for k in range(cfg.mel_dim):
        lo, center, hi = hz_edges[k], hz_edges[k + 1], hz_edges[k + 2]
        rising = (bin_freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - center, 1e-12)
        weights[k] = np.clip(np.minimum(rising, falling), 0.0, None)
        if not weights[k].any():
            # Triangle narrower than one bin: snap to the nearest bin so the
            # "every row nonzero" invariant survives coarse FFT settings.
            weights[k, int(np.argmin(np.abs(bin_freqs - center)))] = 1.0
    return MelFilterbank(weights=weights, center_frequencies=hz_edges[1:-1].copy())


def stft(wave: Waveform, cfg: FrameConfig) -> np.ndarray:
    """Short-time Fourier transform, T x (fft_size/2 + 1) complex.

    Hann-windowed, hop-advanced frames; samples past the final complete
    window are ignored.
    """
    _check_rate(wave, cfg)
    n_frames = cfg.frame_count(len(wave.samples))
    win = hann_window(cfg.window_size)
    idx = (
        np.arange(cfg.window_size)[None, :]
        + cfg.hop_size * np.arange(n_frames)[:, None]
    )
    frames = wave.samples[idx] * win[None, :]
    return np.fft.rfft(frames, n=cfg.fft_size, axis=1)


def istft(spectrum: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Overlap-add inverse of :func:`stft` with squared-window normalization.

    Returns ``(T - 1) * hop + window`` samples.
    """
    spectrum = np.asarray(spectrum)
    n_frames = spectrum.shape[0]
    win = hann_window(cfg.window_size)
    frames = np.fft.irfft(spectrum, n=cfg.fft_size, axis=1)[:, : cfg.window_size]
    n_samples = cfg.sample_count(n_frames)
    out = np.zeros(n_samples)
    norm = np.zeros(n_samples)
    for t in range(n_frames):
        start = t * cfg.hop_size
        out[start : start + cfg.window_size] += frames[t] * win
        norm[start : start + cfg.window_size] += win**2
    # Samples with negligible window coverage (the extreme edges) stay zero
    # instead of being blown up by the normalization.
    covered = norm > 1e-6 * norm.max()
    out[covered] /= norm[covered]
    out[~covered] = 0.0
    return out


def mel_spectrogram(wave: Waveform, cfg: FrameConfig) -> MelSpectrogram:
    """Log-mel analysis: log(max(filterbank . |STFT|, log_floor))."""
    magnitude = np.abs(stft(wave, cfg))
    fb = mel_filterbank(cfg)
    energies = magnitude @ fb.weights.T
    return MelSpectrogram(np.log(np.maximum(energies, cfg.log_floor)), cfg)


def griffin_lim_invert(mel: MelSpectrogram, iterations: int = 60) -> Waveform:
    """Approximate waveform reconstruction from a log-mel matrix.

    The linear magnitude spectrogram is recovered through the clipped
    pseudo-inverse of the filterbank, then phase is estimated by the
    usual iterate-and-reproject loop starting from zero phase.  Fully
    deterministic.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    cfg = mel.config
    fb = mel_filterbank(cfg)
    pinv = np.linalg.pinv(fb.weights)
    magnitude = np.clip(np.exp(mel.frames) @ pinv.T, 0.0, None)

    spectrum = magnitude.astype(np.complex128)
    for _ in range(iterations):
        wave = istft(spectrum, cfg)
        phase = np.angle(stft(Waveform(wave, cfg.sample_rate), cfg))
        spectrum = magnitude * np.exp(1j * phase)
    return Waveform(istft(spectrum, cfg), cfg.sample_rate)


def _check_rate(wave: Waveform, cfg: FrameConfig):
    if wave.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"waveform rate {wave.sample_rate} != config rate {cfg.sample_rate}"
        )


def write_wav(path, wave: Waveform):
    """Write mono 16-bit PCM."""
    clipped = np.clip(wave.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype(np.int16)
    wavfile.write(path, wave.sample_rate, pcm)


def read_wav(path) -> Waveform:
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono WAV")
    if data.dtype != np.int16:
        raise ValueError(f"{path}: expected 16-bit PCM, got {data.dtype}")
    return Waveform(data.astype(np.float64) / 32767.0, int(rate))


def write_matrix(path, matrix: np.ndarray, magic: bytes = MATRIX_MAGIC_MEL):
    """Persist a 2-D matrix: 16-byte header (magic, u32 T, u32 D, u32 reserved)
    followed by row-major little-endian float32 data."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError("only 2-D matrices are persisted")
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<III", matrix.shape[0], matrix.shape[1], 0))
        fh.write(matrix.tobytes())


def read_matrix(path, magic: bytes = MATRIX_MAGIC_MEL) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`; returns float64."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != magic:
            raise ValueError(f"{path}: bad or missing {magic!r} header")
        rows, cols, _ = struct.unpack("<III", header[4:])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != rows * cols:
        raise ValueError(f"{path}: payload size does not match header")
    return data.reshape(rows, cols).astype(np.float64)
