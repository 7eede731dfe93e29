"""Independent oracles used by the test suite.

Everything here is deliberately naive (direct summation, explicit DFT
matrices, grid quadrature) so that it shares no code path with the
package implementation it checks.
"""

import numpy as np


def naive_dft_frames(samples, window, fft_size, hop):
    """O(N^2) windowed DFT of every complete frame, positive bins only."""
    win_len = len(window)
    n_frames = 1 + (len(samples) - win_len) // hop
    n_bins = fft_size // 2 + 1
    k = np.arange(n_bins)
    n = np.arange(fft_size)
    basis = np.exp(-2j * np.pi * np.outer(k, n) / fft_size)
    out = np.zeros((n_frames, n_bins), dtype=complex)
    for t in range(n_frames):
        frame = np.zeros(fft_size)
        frame[:win_len] = samples[t * hop : t * hop + win_len] * window
        out[t] = basis @ frame
    return out


def hann_periodic(n):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def dominant_frequency(samples, sample_rate):
    """Frequency of the tallest rfft magnitude peak of the whole signal."""
    spectrum = np.abs(np.fft.rfft(samples))
    spectrum[0] = 0.0
    return np.argmax(spectrum) * sample_rate / len(samples)


def gaussian_kl_quadrature(mu_q, lv_q, mu_p, lv_p, lo=-20.0, hi=20.0, n=40001):
    """KL(N(mu_q, e^lv_q) || N(mu_p, e^lv_p)) for scalars, by trapezoid rule."""
    x = np.linspace(lo, hi, n)
    var_q, var_p = np.exp(lv_q), np.exp(lv_p)
    log_q = -0.5 * (np.log(2 * np.pi * var_q) + (x - mu_q) ** 2 / var_q)
    log_p = -0.5 * (np.log(2 * np.pi * var_p) + (x - mu_p) ** 2 / var_p)
    return np.trapezoid(np.exp(log_q) * (log_q - log_p), x)


def dct_ortho_rows(matrix):
    """Orthonormal DCT-II of each row by explicit cosine summation."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[1]
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    basis = np.cos(np.pi * k * (2 * j + 1) / (2 * n))
    scale = np.full(n, np.sqrt(2.0 / n))
    scale[0] = np.sqrt(1.0 / n)
    return (basis @ matrix.T).T * scale[None, :]


def mcd_direct(mel_a, mel_b, n_coeffs=13):
    """Mel-cepstral distortion by per-frame direct summation."""
    ca = dct_ortho_rows(mel_a)[:, 1 : n_coeffs + 1]
    cb = dct_ortho_rows(mel_b)[:, 1 : n_coeffs + 1]
    per_frame = []
    for fa, fb in zip(ca, cb):
        acc = 0.0
        for da, db in zip(fa, fb):
            acc += (da - db) ** 2
        per_frame.append((10.0 / np.log(10.0)) * np.sqrt(2.0 * acc))
    return float(np.mean(per_frame))


def autocorr_f0(samples, sample_rate, fmin=70.0, fmax=350.0):
    """Fundamental-frequency estimate from the autocorrelation peak."""
    x = np.asarray(samples, dtype=np.float64)
    x = x - x.mean()
    ac = np.correlate(x, x, mode="full")[len(x) - 1 :]
    lag_lo = int(sample_rate / fmax)
    lag_hi = min(int(sample_rate / fmin), len(ac) - 1)
    lag = lag_lo + int(np.argmax(ac[lag_lo : lag_hi + 1]))
    return sample_rate / lag


def finite_difference(loss_fn, arrays, h=1e-5):
    """Central finite differences of ``loss_fn()`` w.r.t. each array, in place."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up = loss_fn()
            arr[idx] = orig - h
            down = loss_fn()
            arr[idx] = orig
            g[idx] = (up - down) / (2.0 * h)
            it.iternext()
        grads.append(g)
    return grads


def relative_error(a, b, eps=1e-12):
    num = np.linalg.norm(np.asarray(a).ravel() - np.asarray(b).ravel())
    den = max(np.linalg.norm(np.asarray(a).ravel()),
              np.linalg.norm(np.asarray(b).ravel()), eps)
    return num / den
