"""Channel metrics: APDP, gain, delay/Doppler spreads, eigenvalues, correlations.

All metrics slide a window of ``n_avg`` tensor time steps with a configurable
stride (default non-overlapping).  Window timestamps are the window centers.
Undefined values (all-zero windows, fully skipped correlation windows) are
emitted as NaN in memory and as empty fields in CSV exports, never as 0, so
they cannot contaminate error statistics downstream.  A linear 0 in dB
columns exports as the -400 dB floor sentinel.

Measurement emulation: :func:`estimate_noise_floor` estimates the per-bin
noise level from the signal-free region of a profile and
:func:`apply_noise_threshold` zeroes every bin below that level plus 3 dB,
the same processing applied to the sounder data before gain and spread
computation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelTensor

DB_FLOOR_SENTINEL = -400.0
DEFAULT_N_AVG = 185  # 57 ms / 307.2 us, about ten wavelengths of travel at 10 m/s


@dataclass
class Apdp:
    """Averaged power delay profile per sliding window (linear power)."""

    values: np.ndarray   # (n_windows, n_delay_bins), >= 0
    times: np.ndarray    # (n_windows,) window-center seconds
    bins: np.ndarray     # (n_delay_bins,) delay bin centers, seconds
    n_avg: int
    stride: int


@dataclass
class Dsd:
    """Doppler spectral density per sliding window (linear power)."""

    values: np.ndarray   # (n_windows, n_doppler_bins)
    times: np.ndarray
    bins: np.ndarray     # (n_doppler_bins,) Doppler frequencies, Hz, increasing
    n_avg: int
    stride: int


@dataclass
class MetricSeries:
    """Time series of one channel metric; NaN marks undefined windows."""

    kind: str
    times: np.ndarray
    values: np.ndarray             # (n_windows,) or (n_windows, k)
    unit: str = ""
    labels: tuple[str, ...] = ()   # column names when values is 2-D


def _window_starts(n_time: int, n_avg: int, stride: int) -> np.ndarray:
    if n_avg < 1:
        raise ValueError("n_avg must be >= 1")
    if n_avg > n_time:
        raise ValueError(f"n_avg={n_avg} exceeds the {n_time} available time steps")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n_win = (n_time - n_avg) // stride + 1
    return np.arange(n_win) * stride


def _window_times(tensor: ChannelTensor, starts: np.ndarray, n_avg: int) -> np.ndarray:
    return tensor.t0 + (starts + (n_avg - 1) / 2.0) * tensor.dt


def compute_apdp(tensor: ChannelTensor, n_avg: int = DEFAULT_N_AVG,
                 stride: int | None = None) -> Apdp:
    """Mean |h|^2 over each window and over all antenna pairs, per delay bin."""
    if tensor.domain != "delay":
        raise ValueError("compute_apdp expects a delay-domain tensor")
    stride = n_avg if stride is None else stride
    starts = _window_starts(tensor.n_time, n_avg, stride)
    power = np.abs(tensor.data) ** 2
    vals = np.empty((len(starts), tensor.n_bins))
    for k, s in enumerate(starts):
        vals[k] = power[s:s + n_avg].mean(axis=(0, 1, 2))
    return Apdp(values=vals, times=_window_times(tensor, starts, n_avg),
                bins=tensor.bin_axis.copy(), n_avg=n_avg, stride=stride)


def per_pair_apdp(tensor: ChannelTensor, n_avg: int = DEFAULT_N_AVG,
                  stride: int | None = None) -> np.ndarray:
    """APDP without antenna-pair averaging: (n_windows, M_R, M_T, n_bins)."""
    if tensor.domain != "delay":
        raise ValueError("per_pair_apdp expects a delay-domain tensor")
    stride = n_avg if stride is None else stride
    starts = _window_starts(tensor.n_time, n_avg, stride)
    power = np.abs(tensor.data) ** 2
    return np.stack([power[s:s + n_avg].mean(axis=0) for s in starts])


def estimate_noise_floor(apdp: Apdp) -> float:
    """Noise level from the signal-free region of the APDP.

    Uses the mean of the lowest-decile nonzero bins across the largest-delay
    quarter of the delay axis.  Returns 0 when that region is entirely zero.
    """
    if apdp.values.shape[1] < 32:
        raise ValueError("noise-floor estimation needs >= 32 delay bins")
    tail = apdp.values[:, 3 * apdp.values.shape[1] // 4:]
    nz = tail[tail > 0]
    if nz.size == 0:
        return 0.0
    nz = np.sort(nz)
    k = max(1, int(math.ceil(0.1 * nz.size)))
    return float(nz[:k].mean())


def estimate_noise_floor_dsd(dsd: Dsd) -> float:
    """Noise level from the outer (largest |Doppler|) quarters of a DSD."""
    n = dsd.values.shape[1]
    edge = np.concatenate([dsd.values[:, :n // 8], dsd.values[:, -(n // 8):]], axis=1)
    nz = edge[edge > 0]
    if nz.size == 0:
        return 0.0
    nz = np.sort(nz)
    k = max(1, int(math.ceil(0.1 * nz.size)))
    return float(nz[:k].mean())


def apply_noise_threshold(profile, noise_floor: float):
    """Zero every bin below noise_floor + 3 dB; works on Apdp and Dsd alike."""
    if noise_floor < 0:
        raise ValueError("noise floor must be >= 0")
    thr = noise_floor * 10.0 ** 0.3
    vals = np.where(profile.values >= thr, profile.values, 0.0)
    return replace(profile, values=vals)


def channel_gain(apdp: Apdp) -> MetricSeries:
    """Per-window sum over delay bins, in dB (-inf for all-zero windows)."""
    total = apdp.values.sum(axis=1)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(total)
    return MetricSeries(kind="gain", times=apdp.times.copy(), values=db, unit="dB")


def _central_spread(values: np.ndarray, axis_bins: np.ndarray) -> np.ndarray:
    """Root second central moment per window; NaN where undefined."""
    out = np.full(values.shape[0], np.nan)
    for k in range(values.shape[0]):
        p = values[k]
        nz = p > 0
        n_nz = int(nz.sum())
        if n_nz == 0:
            continue
        if n_nz == 1:
            out[k] = 0.0  # a single component has exactly zero spread
            continue
        total = p.sum()
        mean = (p @ axis_bins) / total
        var = (p @ ((axis_bins - mean) ** 2)) / total
        out[k] = math.sqrt(max(var, 0.0))
    return out


def rms_delay_spread(apdp: Apdp) -> MetricSeries:
    """Normalized second-order central moment of the APDP, in seconds."""
    vals = _central_spread(apdp.values, apdp.bins)
    return MetricSeries(kind="delay_spread", times=apdp.times.copy(), values=vals, unit="s")


def compute_dsd(tensor: ChannelTensor, n_avg: int = DEFAULT_N_AVG,
                stride: int | None = None) -> Dsd:
    """Doppler spectral density: windowed time-DFT, averaged over delay bins
    and antenna pairs, Doppler axis centered (fftshift)."""
    if tensor.domain != "delay":
        raise ValueError("compute_dsd expects a delay-domain tensor")
    if n_avg < 2:
        raise ValueError("n_avg must be >= 2 for a Doppler transform")
    stride = n_avg if stride is None else stride
    starts = _window_starts(tensor.n_time, n_avg, stride)
    vals = np.empty((len(starts), n_avg))
    for k, s in enumerate(starts):
        block = tensor.data[s:s + n_avg]                       # (n_avg, MR, MT, nb)
        spec = np.fft.fftshift(np.fft.fft(block, axis=0), axes=0)
        vals[k] = (np.abs(spec) ** 2).mean(axis=(1, 2, 3))
    doppler = np.fft.fftshift(np.fft.fftfreq(n_avg, d=tensor.dt))
    return Dsd(values=vals, times=_window_times(tensor, starts, n_avg),
               bins=doppler, n_avg=n_avg, stride=stride)


def rms_doppler_spread(dsd: Dsd) -> MetricSeries:
    """Normalized second-order central moment of the DSD, in Hz."""
    vals = _central_spread(dsd.values, dsd.bins)
    return MetricSeries(kind="doppler_spread", times=dsd.times.copy(), values=vals, unit="Hz")


def eigenvalue_series(tensor: ChannelTensor, n_avg: int = DEFAULT_N_AVG,
                      stride: int | None = None) -> MetricSeries:
    """Eigenvalues of the window-averaged H H^H of the normalized channel.

    Per window the stacked (time, frequency) channel matrices are scaled so
    the window-average squared Frobenius norm equals min(M_R, M_T); the
    eigenvalues of the window-averaged H H^H then sum to that constant, and
    an identity channel reports 0 dB on every eigenvalue.  Values in dB,
    sorted descending; all-zero windows yield NaN.
    """
    if tensor.domain != "frequency":
        raise ValueError("eigenvalue_series expects a frequency-domain tensor")
    stride = n_avg if stride is None else stride
    starts = _window_starts(tensor.n_time, n_avg, stride)
    m_min = min(tensor.m_rx, tensor.m_tx)
    vals = np.full((len(starts), m_min), np.nan)
    for k, s in enumerate(starts):
        block = tensor.data[s:s + n_avg]                       # (n_avg, MR, MT, nb)
        h = np.moveaxis(block, 3, 1).reshape(-1, tensor.m_rx, tensor.m_tx)
        mean_fro2 = float(np.mean(np.sum(np.abs(h) ** 2, axis=(1, 2))))
        if mean_fro2 == 0.0:
            continue
        scale2 = m_min / mean_fro2
        r = scale2 * np.einsum("kij,klj->il", h, np.conj(h)) / h.shape[0]
        lam = np.linalg.eigvalsh(r)[::-1][:m_min]
        lam = np.maximum(lam, 0.0)
        lam[lam < lam.max() * 1e-12] = 0.0  # numerical zeros -> -inf dB sentinel
        with np.errstate(divide="ignore"):
            vals[k] = 10.0 * np.log10(lam)
    labels = tuple(f"lambda_{i + 1}" for i in range(m_min))
    return MetricSeries(kind="eigenvalues", times=_window_times(tensor, starts, n_avg),
                        values=vals, unit="dB", labels=labels)


def antenna_correlation(tensor: ChannelTensor, end: str, i: int, j: int,
                        n_avg: int = DEFAULT_N_AVG, stride: int | None = None,
                        complex_values: bool = False) -> MetricSeries:
    """Time-variant correlation between two same-end antenna elements.

    Per (time, frequency) sample the correlation sums products over the
    opposite end's elements, normalized by the geometric mean of the two
    element powers; samples where either element has zero power are skipped.
    The window value is the accumulated sum divided by the number of
    accumulated samples, so its magnitude stays in [0, 1].  Element indices
    are 0-based.
    """
    if tensor.domain != "frequency":
        raise ValueError("antenna_correlation expects a frequency-domain tensor")
    end = end.lower()
    if end not in ("tx", "rx"):
        raise ValueError("end must be 'tx' or 'rx'")
    n_el = tensor.m_tx if end == "tx" else tensor.m_rx
    if i == j:
        raise ValueError("element indices must differ")
    if not (0 <= i < n_el and 0 <= j < n_el):
        raise ValueError("element index out of range")
    stride = n_avg if stride is None else stride
    starts = _window_starts(tensor.n_time, n_avg, stride)
    if end == "rx":
        a = tensor.data[:, i, :, :]
        b = tensor.data[:, j, :, :]
        num_t = (a * np.conj(b)).sum(axis=1)          # (n_time, nf)
    else:
        a = tensor.data[:, :, i, :]
        b = tensor.data[:, :, j, :]
        num_t = (np.conj(a) * b).sum(axis=1)
    pa = (np.abs(a) ** 2).sum(axis=1)
    pb = (np.abs(b) ** 2).sum(axis=1)
    den_t = np.sqrt(pa * pb)
    vals = np.full(len(starts), np.nan, dtype=complex)
    for k, s in enumerate(starts):
        num = num_t[s:s + n_avg]
        den = den_t[s:s + n_avg]
        ok = den > 0
        if not ok.any():
            continue
        vals[k] = (num[ok] / den[ok]).sum() / ok.sum()
    pair = f"rho_{i + 1}{j + 1}"
    if complex_values:
        return MetricSeries(kind=f"correlation_{end}", times=_window_times(tensor, starts, n_avg),
                            values=vals, unit="", labels=(pair,))
    mags = np.abs(vals)
    mags[np.isnan(vals.real)] = np.nan
    return MetricSeries(kind=f"correlation_{end}", times=_window_times(tensor, starts, n_avg),
                        values=mags, unit="", labels=(pair,))


def correlation_matrix_series(tensor: ChannelTensor, end: str,
                              n_avg: int = DEFAULT_N_AVG,
                              stride: int | None = None) -> MetricSeries:
    """|rho| for every element pair of one end, one column per pair."""
    n_el = tensor.m_tx if end == "tx" else tensor.m_rx
    pairs = [(i, j) for i in range(n_el) for j in range(i + 1, n_el)]
    cols, labels, times = [], [], None
    for i, j in pairs:
        s = antenna_correlation(tensor, end, i, j, n_avg=n_avg, stride=stride)
        cols.append(s.values)
        labels.append(s.labels[0])
        times = s.times
    return MetricSeries(kind=f"correlation_{end}", times=times,
                        values=np.column_stack(cols), unit="", labels=tuple(labels))


def _format_value(v: float, db_column: bool) -> str:
    if np.isnan(v):
        return ""
    if db_column and np.isneginf(v):
        return repr(DB_FLOOR_SENTINEL)
    return repr(float(v))


def series_to_csv(series: MetricSeries, path) -> None:
    """Write ``t_s,value`` (or one column per label); missing values empty."""
    db = series.unit == "dB"
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        if series.values.ndim == 1:
            w.writerow(["t_s", series.labels[0] if series.labels else "value"])
            for t, v in zip(series.times, series.values):
                w.writerow([repr(float(t)), _format_value(v, db)])
        else:
            w.writerow(["t_s", *series.labels])
            for t, row in zip(series.times, series.values):
                w.writerow([repr(float(t))] + [_format_value(v, db) for v in row])


def series_from_csv(path, kind: str = "", unit: str = "") -> MetricSeries:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        times, rows = [], []
        for row in reader:
            if not row:
                continue
            times.append(float(row[0]))
            rows.append([float(c) if c.strip() else np.nan for c in row[1:]])
    vals = np.asarray(rows)
    if vals.shape[1] == 1:
        vals = vals[:, 0]
    return MetricSeries(kind=kind, times=np.asarray(times), values=vals,
                        unit=unit, labels=tuple(header[1:]) if vals.ndim == 2 else ())


def profile_to_csv(profile, path) -> None:
    """Heat-map grid export for Apdp/Dsd: first row bin axis, then one row
    ``t_s,<power per bin>`` per window."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t_s\\bin", *[repr(float(b)) for b in profile.bins]])
        for t, row in zip(profile.times, profile.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
