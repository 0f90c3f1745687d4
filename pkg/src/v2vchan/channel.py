"""Time-variant MIMO channel synthesis from per-snapshot path lists.

The delay-domain channel is the classic delta train: every path contributes
its polarimetric amplitude times exp(-j 2 pi f tau) into the delay bin
nearest to tau * B.  With this sign convention the tap phase of an
approaching link advances by +2 pi (f v / c) dt per step, which is what
produces positive Doppler for closing vehicles.

Coarse ray-traced snapshots (default every 10 ms) are interpolated to a
fine time grid by matching paths between adjacent snapshots on their
(kind, surface sequence, tile) identity, linearly interpolating length,
interaction points and amplitude, and recomputing delay (hence phase) from
the interpolated length.  Unmatched paths appear or vanish hard at the
coarse boundary; a path missing from the next snapshot keeps its last
state until that boundary.

Frequency-domain tensors store bins in increasing frequency order (carrier
at the center bin).  ``cir_to_ctf`` is an unnormalized forward DFT and
``ctf_to_cir`` the matching 1/N inverse, optionally Hann-windowed across
the band before transforming, mirroring channel-sounder processing.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .antenna import ArrayLayout
from .raytracer import SPEED_OF_LIGHT, PropagationPath

TENSOR_MAGIC = b"V2VC"
TENSOR_VERSION = 1


class TensorFormatError(ValueError):
    """Channel tensor file is malformed."""


@dataclass
class SimConfig:
    """Sounder and sampling parameters for channel synthesis."""

    carrier_frequency: float = 5.9e9   # 5.6e9 matches the measurement campaign
    bandwidth: float = 240e6
    n_freq_bins: int = 769
    snapshot_dt: float = 307.2e-6      # sounder snapshot interval
    coarse_trace_dt: float = 10e-3     # ray-tracer snapshot interval
    fine_dt: float = 100e-6            # synthesized tensor time step

    def __post_init__(self):
        if min(self.carrier_frequency, self.bandwidth, self.snapshot_dt,
               self.coarse_trace_dt, self.fine_dt) <= 0 or self.n_freq_bins < 1:
            raise ValueError("all SimConfig parameters must be positive")
        ratio = self.coarse_trace_dt / self.fine_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("fine_dt must divide coarse_trace_dt exactly")

    @property
    def delay_resolution(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def max_delay(self) -> float:
        return self.n_freq_bins / self.bandwidth

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


@dataclass
class ChannelTensor:
    """Complex channel indexed (time, rx element, tx element, bin).

    ``domain`` is 'delay' (bin axis = excess delay, spacing 1/B) or
    'frequency' (bin axis = baseband frequency offsets, increasing, carrier
    at index n_bins // 2).
    """

    domain: str
    data: np.ndarray
    t0: float
    dt: float
    bin0: float
    dbin: float
    carrier_frequency: float

    def __post_init__(self):
        if self.domain not in ("delay", "frequency"):
            raise ValueError("domain must be 'delay' or 'frequency'")
        if self.data.ndim != 4:
            raise ValueError("tensor data must be (time, rx, tx, bin)")
        if min(self.data.shape) < 1:
            raise ValueError("all tensor dimensions must be >= 1")
        if self.dt <= 0 or self.dbin <= 0:
            raise ValueError("axis spacings must be positive")

    @property
    def n_time(self) -> int:
        return self.data.shape[0]

    @property
    def m_rx(self) -> int:
        return self.data.shape[1]

    @property
    def m_tx(self) -> int:
        return self.data.shape[2]

    @property
    def n_bins(self) -> int:
        return self.data.shape[3]

    @property
    def time_axis(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_time) * self.dt

    @property
    def bin_axis(self) -> np.ndarray:
        return self.bin0 + np.arange(self.n_bins) * self.dbin

    def scaled(self, factor: complex) -> "ChannelTensor":
        return replace(self, data=self.data * factor)


def synthesize_cir(paths: list[PropagationPath], tx_array: ArrayLayout,
                   rx_array: ArrayLayout, t: float, config: SimConfig,
                   tx_heading: float = 0.0, rx_heading: float = 0.0) -> np.ndarray:
    """One delay-domain time slice, shape (M_R, M_T, n_freq_bins).

    Each path lands in the delay bin round(tau * B) with value
    g_rx(n)^H . A_k . g_tx(m) . exp(-j 2 pi f tau_nm), where A_k is the
    path's polarimetric matrix (H row sign-flipped into the receive DoA
    basis) and tau_nm adds the element-offset delays to the phase only.
    Paths whose delay exceeds the unambiguous span are dropped and counted
    in a single warning.
    """
    m_r, m_t = rx_array.size, tx_array.size
    slice_ = np.zeros((m_r, m_t, config.n_freq_bins), dtype=complex)
    if not paths:
        return slice_
    f = config.carrier_frequency
    bw = config.bandwidth
    taus = np.array([p.delay for p in paths])
    bins = np.rint(taus * bw).astype(int)
    keep = bins < config.n_freq_bins
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"{dropped} path(s) beyond the unambiguous delay span "
                      f"{config.max_delay * 1e6:.2f} us dropped", RuntimeWarning,
                      stacklevel=2)
    if not keep.any():
        return slice_
    paths = [p for p, k in zip(paths, keep) if k]
    taus, bins = taus[keep], bins[keep]
    dep = np.stack([p.departure for p in paths])       # (P, 3)
    doa = np.stack([-p.arrival for p in paths])        # (P, 3) arrival DoA
    amp = np.stack([p.amplitude for p in paths])       # (P, 2, 2)
    amp = amp.copy()
    amp[:, 1, :] *= -1.0                               # H flip into the DoA basis
    g_tx = tx_array.element_gains(dep, tx_heading)     # (M_T, P, 2)
    g_rx = rx_array.element_gains(doa, rx_heading)     # (M_R, P, 2)
    # polarimetric coupling per (rx element, tx element, path)
    coup = np.einsum("npi,pij,mpj->nmp", np.conj(g_rx), amp, g_tx)
    # element-offset delays enter the phase only
    off_tx = tx_array.world_offsets(tx_heading)        # (M_T, 3)
    off_rx = rx_array.world_offsets(rx_heading)
    dtau_tx = (dep @ off_tx.T) / SPEED_OF_LIGHT        # (P, M_T)
    dtau_rx = (doa @ off_rx.T) / SPEED_OF_LIGHT        # (P, M_R)
    base = np.exp(-2j * math.pi * f * taus)            # (P,)
    ph_tx = np.exp(2j * math.pi * f * dtau_tx)         # (P, M_T)
    ph_rx = np.exp(2j * math.pi * f * dtau_rx)         # (P, M_R)
    vals = coup * base[None, None, :] * ph_rx.T[:, None, :] * ph_tx.T[None, :, :]
    # accumulate with one bincount over a combined (n, m, bin) index
    p_count = len(paths)
    pair_idx = (np.arange(m_r)[:, None, None] * m_t
                + np.arange(m_t)[None, :, None]) * config.n_freq_bins
    flat_idx = (pair_idx + bins[None, None, :]).ravel()
    flat_vals = vals.ravel()
    size = m_r * m_t * config.n_freq_bins
    acc = (np.bincount(flat_idx, weights=flat_vals.real, minlength=size)
           + 1j * np.bincount(flat_idx, weights=flat_vals.imag, minlength=size))
    return acc.reshape(m_r, m_t, config.n_freq_bins)


def _match_paths(a: list[PropagationPath], b: list[PropagationPath]):
    """Pair paths between adjacent snapshots.

    Paths group by (kind, surface sequence, tile); within a group the two
    delay-sorted lists are aligned greedily, skipping whichever unmatched
    path closes the smaller delay gap.  Returns (pairs, only_a, only_b).
    """
    from collections import defaultdict
    ga, gb = defaultdict(list), defaultdict(list)
    for p in a:
        ga[p.match_key()].append(p)
    for p in b:
        gb[p.match_key()].append(p)
    pairs, only_a, only_b = [], [], []
    # deterministic key order keeps float accumulation (and outputs) bit-stable
    keys = sorted(set(ga) | set(gb),
                  key=lambda k: (k[0], k[1], -1 if k[2] is None else k[2]))
    for key in keys:
        la = sorted(ga.get(key, []), key=lambda p: p.delay)
        lb = sorted(gb.get(key, []), key=lambda p: p.delay)
        i = j = 0
        while i < len(la) and j < len(lb):
            if len(la) - i == len(lb) - j:
                pairs.append((la[i], lb[j]))
                i += 1
                j += 1
            elif len(la) - i > len(lb) - j:
                # too many in a: drop the a-path farther from the next b
                if j < len(lb) and abs(la[i].delay - lb[j].delay) <= abs(la[i + 1].delay - lb[j].delay):
                    pairs.append((la[i], lb[j]))
                    i += 1
                    j += 1
                else:
                    only_a.append(la[i])
                    i += 1
            else:
                if i < len(la) and abs(lb[j].delay - la[i].delay) <= abs(lb[j + 1].delay - la[i].delay):
                    pairs.append((la[i], lb[j]))
                    i += 1
                    j += 1
                else:
                    only_b.append(lb[j])
                    j += 1
        only_a.extend(la[i:])
        only_b.extend(lb[j:])
    return pairs, only_a, only_b


def _lerp_path(pa: PropagationPath, pb: PropagationPath, u: float) -> PropagationPath:
    length = (1 - u) * pa.length + u * pb.length
    inter = tuple(
        (sa, (1 - u) * qa + u * qb)
        for (sa, qa), (_, qb) in zip(pa.interactions, pb.interactions)
    )
    dep = (1 - u) * pa.departure + u * pb.departure
    arr = (1 - u) * pa.arrival + u * pb.arrival
    ndep, narr = np.linalg.norm(dep), np.linalg.norm(arr)
    dep = dep / ndep if ndep > 0 else pa.departure
    arr = arr / narr if narr > 0 else pa.arrival
    return PropagationPath(
        kind=pa.kind, order=pa.order, interactions=inter,
        length=length, delay=length / SPEED_OF_LIGHT,
        amplitude=(1 - u) * pa.amplitude + u * pb.amplitude,
        departure=dep, arrival=arr, tile=pa.tile,
    )


class PathInterpolator:
    """Evaluate the traced path set at arbitrary times between snapshots."""

    def __init__(self, coarse: list[tuple[float, list[PropagationPath]]]):
        if len(coarse) < 1:
            raise ValueError("need at least one coarse snapshot")
        self.times = np.array([t for t, _ in coarse])
        self.snapshots = [paths for _, paths in coarse]
        if len(self.times) > 1:
            dt = np.diff(self.times)
            if np.any(dt <= 0) or (dt.max() - dt.min()) > 1e-9:
                raise ValueError("coarse snapshots must be uniformly spaced in time")
            self.dt = float(dt[0])
        else:
            self.dt = 0.0
        self._cache: dict[int, tuple] = {}

    def _interval(self, i: int):
        hit = self._cache.get(i)
        if hit is None:
            hit = _match_paths(self.snapshots[i], self.snapshots[i + 1])
            self._cache[i] = hit
        return hit

    def paths_at(self, t: float) -> list[PropagationPath]:
        if len(self.times) == 1:
            return list(self.snapshots[0])
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise ValueError(f"time {t} outside the traced span")
        i = min(int(np.searchsorted(self.times, t, side="right")) - 1, len(self.times) - 2)
        i = max(i, 0)
        u = (t - self.times[i]) / self.dt
        u = min(max(u, 0.0), 1.0)
        if u == 1.0:
            return list(self.snapshots[i + 1])
        pairs, only_a, _ = self._interval(i)
        out = [_lerp_path(pa, pb, u) for pa, pb in pairs]
        out.extend(only_a)  # held until they vanish at the next boundary
        return out


def interpolate_snapshots(coarse: list[tuple[float, list[PropagationPath]]],
                          fine_dt: float) -> list[tuple[float, list[PropagationPath]]]:
    """Resample coarse (t, paths) snapshots onto a fine uniform grid."""
    interp = PathInterpolator(coarse)
    if len(interp.times) > 1:
        ratio = interp.dt / fine_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("fine_dt must divide the coarse spacing exactly")
    t0, t1 = interp.times[0], interp.times[-1]
    n = int(round((t1 - t0) / fine_dt)) + 1 if len(interp.times) > 1 else 1
    out = []
    for k in range(n):
        t = t0 + k * fine_dt
        out.append((t, interp.paths_at(t)))
    return out


def synthesize_tensor(interp: PathInterpolator | list, tx_array: ArrayLayout,
                      rx_array: ArrayLayout, config: SimConfig,
                      times: np.ndarray | None = None,
                      tx_heading=None, rx_heading=None) -> ChannelTensor:
    """Delay-domain tensor over a fine time grid.

    ``interp`` is a PathInterpolator or a coarse (t, paths) list.  Headings
    may be callables of t or constants (radians).  The default time grid
    runs from the first traced snapshot in steps of ``config.fine_dt``,
    duration / fine_dt samples in total.
    """
    if not isinstance(interp, PathInterpolator):
        interp = PathInterpolator(interp)
    if times is None:
        span = interp.times[-1] - interp.times[0]
        n = max(1, int(round(span / config.fine_dt)))
        times = interp.times[0] + np.arange(n) * config.fine_dt
    times = np.asarray(times, dtype=float)

    def heading_at(h, t):
        if h is None:
            return 0.0
        return h(t) if callable(h) else float(h)

    data = np.empty((len(times), rx_array.size, tx_array.size, config.n_freq_bins),
                    dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("once", RuntimeWarning)
        for k, t in enumerate(times):
            paths = interp.paths_at(t)
            data[k] = synthesize_cir(paths, tx_array, rx_array, t, config,
                                     tx_heading=heading_at(tx_heading, t),
                                     rx_heading=heading_at(rx_heading, t))
    return ChannelTensor(
        domain="delay", data=data, t0=float(times[0]),
        dt=float(times[1] - times[0]) if len(times) > 1 else config.fine_dt,
        bin0=0.0, dbin=1.0 / config.bandwidth,
        carrier_frequency=config.carrier_frequency,
    )


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window, endpoints zero."""
    i = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * math.pi * i / (n - 1)) if n > 1 else np.ones(1)


def cir_to_ctf(tensor: ChannelTensor) -> ChannelTensor:
    """Delay -> frequency via an unnormalized forward DFT along the bin axis.

    The resulting bin axis is fftshifted so frequencies increase and the
    carrier sits at index n_bins // 2.
    """
    if tensor.domain != "delay":
        raise ValueError("cir_to_ctf expects a delay-domain tensor")
    h = np.fft.fftshift(np.fft.fft(tensor.data, axis=-1), axes=-1)
    n = tensor.n_bins
    df = 1.0 / (n * tensor.dbin)
    return ChannelTensor(domain="frequency", data=h, t0=tensor.t0, dt=tensor.dt,
                         bin0=-(n // 2) * df, dbin=df,
                         carrier_frequency=tensor.carrier_frequency)


def ctf_to_cir(tensor: ChannelTensor, window: str = "hann") -> ChannelTensor:
    """Frequency -> delay; the band is windowed before the inverse DFT.

    ``window`` is 'hann' (sounder-style sidelobe suppression) or 'rect'.
    With 'rect' this inverts :func:`cir_to_ctf` to machine precision.
    """
    if tensor.domain != "frequency":
        raise ValueError("ctf_to_cir expects a frequency-domain tensor")
    n = tensor.n_bins
    if window == "hann":
        w = hann_window(n)
    elif window == "rect":
        w = np.ones(n)
    else:
        raise ValueError("window must be 'hann' or 'rect'")
    data = np.fft.ifft(np.fft.ifftshift(tensor.data * w, axes=-1), axis=-1)
    db = 1.0 / (n * tensor.dbin)
    return ChannelTensor(domain="delay", data=data, t0=tensor.t0, dt=tensor.dt,
                         bin0=0.0, dbin=db,
                         carrier_frequency=tensor.carrier_frequency)


def add_measurement_noise(tensor: ChannelTensor, noise_power_per_bin: float,
                          seed: int) -> ChannelTensor:
    """Add circularly symmetric complex Gaussian noise, deterministic per seed."""
    if noise_power_per_bin < 0:
        raise ValueError("noise power must be >= 0")
    if noise_power_per_bin == 0:
        return replace(tensor, data=tensor.data.copy())
    rng = np.random.default_rng(seed)
    scale = math.sqrt(noise_power_per_bin / 2.0)
    noise = scale * (rng.standard_normal(tensor.data.shape)
                     + 1j * rng.standard_normal(tensor.data.shape))
    return replace(tensor, data=tensor.data + noise)


def resample_time(tensor: ChannelTensor, new_dt: float) -> ChannelTensor:
    """Nearest-sample decimation/upsampling of the time axis (e.g. to the
    sounder's 307.2 us snapshot interval)."""
    if new_dt <= 0:
        raise ValueError("new_dt must be > 0")
    span = (tensor.n_time - 1) * tensor.dt
    n_new = int(math.floor(span / new_dt)) + 1
    idx = np.rint(np.arange(n_new) * new_dt / tensor.dt).astype(int)
    idx = np.clip(idx, 0, tensor.n_time - 1)
    return ChannelTensor(domain=tensor.domain, data=tensor.data[idx], t0=tensor.t0,
                         dt=new_dt, bin0=tensor.bin0, dbin=tensor.dbin,
                         carrier_frequency=tensor.carrier_frequency)


_HEADER_FMT = "<4sB B I I I I d d d d d"  # magic, version, domain, M_R, M_T, N_t, N_b, t0, dt, bin0, dbin, f_c


def save_tensor(tensor: ChannelTensor, path) -> None:
    """Write the binary tensor format (little-endian, complex64 payload)."""
    dom = 0 if tensor.domain == "delay" else 1
    header = struct.pack(_HEADER_FMT, TENSOR_MAGIC, TENSOR_VERSION, dom,
                         tensor.m_rx, tensor.m_tx, tensor.n_time, tensor.n_bins,
                         tensor.t0, tensor.dt, tensor.bin0, tensor.dbin,
                         tensor.carrier_frequency)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(tensor.data.astype(np.complex64)).tobytes())


def load_tensor(path) -> ChannelTensor:
    with open(path, "rb") as f:
        raw = f.read(struct.calcsize(_HEADER_FMT))
        if len(raw) < struct.calcsize(_HEADER_FMT):
            raise TensorFormatError(f"{path}: truncated header")
        magic, version, dom, m_r, m_t, n_t, n_b, t0, dt, bin0, dbin, fc = struct.unpack(
            _HEADER_FMT, raw)
        if magic != TENSOR_MAGIC:
            raise TensorFormatError(f"{path}: bad magic {magic!r}")
        if version != TENSOR_VERSION:
            raise TensorFormatError(f"{path}: unsupported version {version}")
        payload = np.frombuffer(f.read(), dtype=np.complex64)
    expected = n_t * m_r * m_t * n_b
    if payload.size != expected:
        raise TensorFormatError(f"{path}: payload has {payload.size} values, expected {expected}")
    data = payload.reshape(n_t, m_r, m_t, n_b).astype(complex)
    return ChannelTensor(domain="delay" if dom == 0 else "frequency", data=data,
                         t0=t0, dt=dt, bin0=bin0, dbin=dbin, carrier_frequency=fc)


def tensor_to_csv(tensor: ChannelTensor, path) -> None:
    """Plain-text exporter for small tensors (debugging aid)."""
    with open(path, "w") as f:
        f.write("# t_index,rx,tx,bin,re,im\n")
        f.write(f"# domain={tensor.domain} t0={tensor.t0!r} dt={tensor.dt!r} "
                f"bin0={tensor.bin0!r} dbin={tensor.dbin!r} "
                f"f_c={tensor.carrier_frequency!r}\n")
        it = np.nditer(tensor.data, flags=["multi_index"])
        for v in it:
            k, n, m, b = it.multi_index
            f.write(f"{k},{n},{m},{b},{complex(v).real!r},{complex(v).imag!r}\n")
