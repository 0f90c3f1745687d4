"""Pipeline glue: trace along trajectories, synthesize, analyze.

Tracing parallelizes over coarse snapshots with a process pool; results are
collected in snapshot order so the output is deterministic regardless of the
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .channel import (ChannelTensor, PathInterpolator, SimConfig, cir_to_ctf,
                      synthesize_tensor)
from .metrics import (apply_noise_threshold,
                      channel_gain, compute_apdp, compute_dsd,
                      correlation_matrix_series, eigenvalue_series,
                      estimate_noise_floor, estimate_noise_floor_dsd,
                      rms_delay_spread, rms_doppler_spread)
from .raytracer import TracerConfig, trace_snapshot
from .scene import Scene, Trajectory

WORKERS_ENV = "V2VCHAN_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _trace_one(args):
    scene, tx, rx, config, t = args
    return trace_snapshot(scene, tx, rx, config)


def trace_trajectory(scene: Scene, tx_traj: Trajectory, rx_traj: Trajectory,
                     tracer: TracerConfig, coarse_dt: float,
                     t0: float | None = None, t1: float | None = None,
                     workers: int | None = None):
    """Ray-trace at every coarse time step; returns the (t, paths) list."""
    lo = max(tx_traj.t[0], rx_traj.t[0]) if t0 is None else t0
    hi = min(tx_traj.t[-1], rx_traj.t[-1]) if t1 is None else t1
    if hi < lo:
        raise ValueError("trajectories do not overlap in time")
    n = int(round((hi - lo) / coarse_dt)) + 1
    times = lo + np.arange(n) * coarse_dt
    jobs = []
    for t in times:
        tx_pos, _ = tx_traj.at(t)
        rx_pos, _ = rx_traj.at(t)
        jobs.append((scene, tx_pos, rx_pos, tracer, t))
    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1 or len(jobs) < 4:
        results = [_trace_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trace_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [(float(t), paths) for t, paths in zip(times, results)]


def synthesize_from_snapshots(snapshots, tx_traj: Trajectory, rx_traj: Trajectory,
                              tx_array, rx_array, config: SimConfig,
                              times: np.ndarray | None = None) -> ChannelTensor:
    """Interpolate traced snapshots and synthesize the delay-domain tensor."""
    interp = PathInterpolator(snapshots)
    return synthesize_tensor(
        interp, tx_array, rx_array, config, times=times,
        tx_heading=tx_traj.heading, rx_heading=rx_traj.heading)


METRIC_FILES = (
    "gain.csv", "delay_spread.csv", "doppler_spread.csv", "eigenvalues.csv",
    "correlation_tx.csv", "correlation_rx.csv", "apdp.csv", "dsd.csv",
)


def analyze_tensor(tensor: ChannelTensor, n_avg: int, stride: int | None = None,
                   noise_floor: float | None = None, threshold: bool = False):
    """Compute the full metric set from a delay-domain tensor.

    Returns a dict with Apdp/Dsd profiles and MetricSeries for gain, spreads,
    eigenvalues and per-end correlation magnitudes.  When ``threshold`` is
    set, the measurement-style noise thresholding (estimated or supplied
    floor plus 3 dB) is applied to the APDP and DSD before gain and spreads.
    """
    if tensor.domain != "delay":
        raise ValueError("analyze_tensor expects a delay-domain tensor")
    apdp = compute_apdp(tensor, n_avg=n_avg, stride=stride)
    dsd = compute_dsd(tensor, n_avg=n_avg, stride=stride)
    if threshold:
        floor = estimate_noise_floor(apdp) if noise_floor is None else noise_floor
        apdp = apply_noise_threshold(apdp, floor)
        dfloor = estimate_noise_floor_dsd(dsd) if noise_floor is None else noise_floor
        dsd = apply_noise_threshold(dsd, dfloor)
    ctf = cir_to_ctf(tensor)
    return {
        "apdp": apdp,
        "dsd": dsd,
        "gain": channel_gain(apdp),
        "delay_spread": rms_delay_spread(apdp),
        "doppler_spread": rms_doppler_spread(dsd),
        "eigenvalues": eigenvalue_series(ctf, n_avg=n_avg, stride=stride),
        "correlation_tx": correlation_matrix_series(ctf, "tx", n_avg=n_avg, stride=stride),
        "correlation_rx": correlation_matrix_series(ctf, "rx", n_avg=n_avg, stride=stride),
    }
