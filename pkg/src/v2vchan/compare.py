"""Metric comparison: LOS/NLOS segmentation and mean/sigma error reports.

The error convention is reference minus candidate (measured minus simulated
when comparing against sounder data).  Sigma is the population root mean
square deviation about the mean (divide by n); pass ``sample_std=True`` for
the n-1 estimator.  Reports group every metric by LOS and NLOS segments and
render as aligned text and CSV with one row per parameter in the customary
order: gain, delay spread, Doppler spread, eigenvalues, TX correlations,
RX correlations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import MetricSeries

LOS, NLOS = "LOS", "NLOS"

#: Canonical report row order (prefix match, most specific first).
REPORT_ORDER = (
    "gain", "delay_spread", "doppler_spread",
    "lambda_1", "lambda_2", "lambda_3", "lambda_4",
    "tx_rho_12", "tx_rho_13", "tx_rho_14", "tx_rho_23", "tx_rho_24", "tx_rho_34",
    "rx_rho_12", "rx_rho_13", "rx_rho_14", "rx_rho_23", "rx_rho_24", "rx_rho_34",
)


class AlignmentError(ValueError):
    """Two metric series cannot be brought onto a common time axis."""


@dataclass
class SegmentLabels:
    """Per-window LOS/NLOS labels on the metric time axis."""

    times: np.ndarray
    is_los: np.ndarray     # boolean per window

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.is_los = np.asarray(self.is_los, dtype=bool)
        if self.times.shape != self.is_los.shape:
            raise ValueError("times and labels must have matching shapes")

    def segment(self, name: str) -> np.ndarray:
        return self.is_los if name == LOS else ~self.is_los


@dataclass
class ErrorStats:
    """Mean/sigma of a metric's error per segment; cells absent when empty."""

    metric: str
    unit: str
    cells: dict            # segment -> (mu, sigma, n)
    omitted: dict = field(default_factory=dict)  # segment -> reason


def segment_los_nlos(snapshots, window_times) -> SegmentLabels:
    """Label each metric window LOS iff a LOS path exists at its center time.

    ``snapshots`` is the traced (t, paths) list.  Path presence between
    snapshots follows the interpolation birth/death rule (paths appear at
    the boundary, never before), so the window center maps to the snapshot
    at or immediately before it; a label therefore flips exactly at the
    first window whose center reaches the transition snapshot.
    """
    if not snapshots:
        raise ValueError("empty snapshot list")
    times = np.array([t for t, _ in snapshots])
    has_los = np.array([any(p.kind == "los" for p in paths) for _, paths in snapshots])
    window_times = np.asarray(window_times, dtype=float)
    idx = np.searchsorted(times, window_times + 1e-12, side="right") - 1
    idx = np.clip(idx, 0, len(times) - 1)
    return SegmentLabels(times=window_times, is_los=has_los[idx])


def load_labels(path) -> SegmentLabels:
    """Label override file: CSV ``t_s,label`` with label LOS or NLOS."""
    times, los = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["t_s", "label"]:
            raise ValueError(f"{path}: expected header t_s,label")
        for row in reader:
            if not row:
                continue
            times.append(float(row[0]))
            lab = row[1].strip().upper()
            if lab not in (LOS, NLOS):
                raise ValueError(f"{path}: unknown label {row[1]!r}")
            los.append(lab == LOS)
    return SegmentLabels(times=np.asarray(times), is_los=np.asarray(los))


def save_labels(labels: SegmentLabels, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t_s", "label"])
        for t, l in zip(labels.times, labels.is_los):
            w.writerow([repr(float(t)), LOS if l else NLOS])


def _align(ref: MetricSeries, other: MetricSeries) -> np.ndarray:
    """Return other's values resampled onto ref's time axis (nearest window)."""
    if ref.times.shape == other.times.shape and np.allclose(ref.times, other.times,
                                                            rtol=0, atol=1e-9):
        return other.values
    if len(other.times) == 0:
        raise AlignmentError("cannot align against an empty series")
    spacing = np.min(np.diff(ref.times)) if len(ref.times) > 1 else math.inf
    idx = np.clip(np.searchsorted(other.times, ref.times), 0, len(other.times) - 1)
    left = np.clip(idx - 1, 0, len(other.times) - 1)
    pick_left = np.abs(ref.times - other.times[left]) <= np.abs(other.times[idx] - ref.times)
    nearest = np.where(pick_left, left, idx)
    gap = np.abs(other.times[nearest] - ref.times)
    if np.any(gap > spacing / 2 + 1e-12):
        raise AlignmentError(
            f"series time axes differ by up to {gap.max():.3g} s, more than half a window")
    return other.values[nearest]


def error_series(metric_a: MetricSeries, metric_b: MetricSeries) -> MetricSeries:
    """Pointwise a - b on a's time axis; missing in either stays missing."""
    vb = _align(metric_a, metric_b)
    if metric_a.values.shape != vb.shape:
        raise AlignmentError("series shapes differ after alignment")
    return MetricSeries(kind=f"error:{metric_a.kind}", times=metric_a.times.copy(),
                        values=metric_a.values - vb, unit=metric_a.unit,
                        labels=metric_a.labels)


def error_stats(eps: MetricSeries, labels: SegmentLabels,
                sample_std: bool = False, metric_name: str | None = None) -> ErrorStats:
    """Per-segment mean and deviation of an error series.

    Sigma follows the population definition sqrt(mean |mu - eps|^2); the
    n-1 sample estimator is available behind ``sample_std``.
    """
    if eps.values.ndim != 1:
        raise ValueError("error_stats expects a one-column series; split multi-column "
                         "series per label first")
    mask_by_segment = {}
    if len(labels.times) == len(eps.times) and np.allclose(labels.times, eps.times,
                                                           rtol=0, atol=1e-9):
        for seg in (LOS, NLOS):
            mask_by_segment[seg] = labels.segment(seg)
    else:
        # nearest-label lookup when the label axis differs from the metric axis
        idx = np.clip(np.searchsorted(labels.times, eps.times), 0, len(labels.times) - 1)
        left = np.clip(idx - 1, 0, len(labels.times) - 1)
        pick_left = np.abs(eps.times - labels.times[left]) <= np.abs(labels.times[idx] - eps.times)
        nearest = np.where(pick_left, left, idx)
        is_los = labels.is_los[nearest]
        mask_by_segment = {LOS: is_los, NLOS: ~is_los}
    cells, omitted = {}, {}
    for seg, mask in mask_by_segment.items():
        x = eps.values[mask]
        x = x[np.isfinite(x)]
        if x.size == 0:
            omitted[seg] = "no samples"
            continue
        mu = float(np.mean(x))
        dev = np.abs(mu - x) ** 2
        n = x.size
        denom = n - 1 if (sample_std and n > 1) else n
        sigma = float(math.sqrt(dev.sum() / denom))
        cells[seg] = (mu, sigma, n)
    return ErrorStats(metric=metric_name or eps.kind, unit=eps.unit,
                      cells=cells, omitted=omitted)


def _order_key(name: str) -> tuple:
    try:
        return (0, REPORT_ORDER.index(name))
    except ValueError:
        return (1, name)


def render_report(stats: dict[str, ErrorStats]) -> tuple[str, list[list]]:
    """Aligned text table plus CSV rows ``metric,segment,mu,sigma,n``.

    Rows follow the customary parameter order; unknown metrics append
    alphabetically after the known set.
    """
    if not stats:
        raise ValueError("need at least one metric")
    names = sorted(stats, key=_order_key)
    header = ["parameter", "unit", "LOS mu", "LOS sigma", "NLOS mu", "NLOS sigma"]
    rows_text = [header]
    rows_csv = []
    for name in names:
        st = stats[name]
        row = [name, st.unit]
        for seg in (LOS, NLOS):
            if seg in st.cells:
                mu, sigma, n = st.cells[seg]
                row += [f"{mu:.4g}", f"{sigma:.4g}"]
                rows_csv.append([name, seg, repr(mu), repr(sigma), n])
            else:
                row += ["-", "-"]
        rows_text.append(row)
    widths = [max(len(r[c]) for r in rows_text) for c in range(len(header))]
    lines = []
    for r_i, r in enumerate(rows_text):
        lines.append("  ".join(c.ljust(widths[ci]) for ci, c in enumerate(r)).rstrip())
        if r_i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n", rows_csv


def save_report(stats: dict[str, ErrorStats], text_path, csv_path) -> None:
    text, rows = render_report(stats)
    with open(text_path, "w") as f:
        f.write(text)
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["metric", "segment", "mu", "sigma", "n"])
        w.writerows(rows)


def load_report_csv(path) -> dict[str, ErrorStats]:
    out: dict[str, ErrorStats] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["metric", "segment", "mu", "sigma", "n"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            if not row:
                continue
            name, seg, mu, sigma, n = row
            st = out.setdefault(name, ErrorStats(metric=name, unit="", cells={}))
            st.cells[seg] = (float(mu), float(sigma), int(n))
    return out
