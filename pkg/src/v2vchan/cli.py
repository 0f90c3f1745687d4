"""Batch front-end: trace -> synthesize -> analyze -> compare.

Runs are driven by a JSON config file; every flag mirrors a config key and
flags win.  Exit codes: 0 on success, 2 for configuration problems (bad
flags, missing files, invalid values), 3 for data problems (malformed scene
or tensor files).  The ``V2VCHAN_WORKERS`` environment variable sets the
default worker count for tracing.

Subcommands::

    v2vchan trace          -c run.json [-o OUTDIR]
    v2vchan synthesize     -c run.json [-o OUTDIR]
    v2vchan analyze        TENSOR [-c run.json] [-o OUTDIR]
    v2vchan compare        DIR_A DIR_B [--labels FILE] [-o OUTDIR]
    v2vchan scene-validate SCENE
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import compare as cmp
from . import metrics as met
from .antenna import default_sharkfin_array
from .channel import (SimConfig, TensorFormatError, load_tensor, save_tensor)
from .pipeline import (METRIC_FILES, WORKERS_ENV, analyze_tensor,
                       default_workers, synthesize_from_snapshots,
                       trace_trajectory)
from .raytracer import TracerConfig, dump_paths_csv, PATH_DUMP_HEADER
from .scene import (GeometryError, MaterialReferenceError, SceneFormatError,
                    load_scene, load_trajectory)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything one batch run needs; mirrors the JSON config keys."""

    scene: str = ""
    tx_trajectory: str = ""
    rx_trajectory: str = ""
    output_dir: str = "out"
    # sounder / synthesis
    carrier_frequency: float = 5.9e9
    bandwidth: float = 240e6
    n_freq_bins: int = 769
    snapshot_dt: float = 307.2e-6
    coarse_trace_dt: float = 10e-3
    fine_dt: float = 100e-6
    # tracer
    max_order: int = 2
    tile_size: float = 1.0
    enable_diffuse: bool = True
    cull_db: float = -40.0
    # arrays
    array_type: str = "sharkfin"   # or "isotropic" for antenna-free runs
    # metrics
    n_avg: int = met.DEFAULT_N_AVG
    stride: int = 0              # 0 means n_avg (non-overlapping)
    noise_threshold: bool = False
    noise_power: float = 0.0
    noise_seed: int = 0
    workers: int = 0             # 0 means env default

    def sim_config(self) -> SimConfig:
        return SimConfig(carrier_frequency=self.carrier_frequency,
                         bandwidth=self.bandwidth, n_freq_bins=self.n_freq_bins,
                         snapshot_dt=self.snapshot_dt,
                         coarse_trace_dt=self.coarse_trace_dt, fine_dt=self.fine_dt)

    def tracer_config(self) -> TracerConfig:
        return TracerConfig(frequency=self.carrier_frequency, max_order=self.max_order,
                            tile_size=self.tile_size, enable_diffuse=self.enable_diffuse,
                            cull_db=self.cull_db)


def load_run_config(path: str | None, overrides: dict) -> RunConfig:
    doc = {}
    if path:
        try:
            with open(path) as f:
                doc = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from e
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**{k: v for k, v in doc.items() if k in known})
    # numeric sanity: positive steps, order within cap
    try:
        cfg.sim_config()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if not 1 <= cfg.max_order <= 4:
        raise ConfigError("max_order must be in 1..4")
    if cfg.tile_size <= 0:
        raise ConfigError("tile_size must be > 0")
    if cfg.n_avg < 1:
        raise ConfigError("n_avg must be >= 1")
    if cfg.noise_power < 0:
        raise ConfigError("noise_power must be >= 0")
    if cfg.array_type not in ("sharkfin", "isotropic"):
        raise ConfigError("array_type must be 'sharkfin' or 'isotropic'")
    return cfg


def _require_inputs(cfg: RunConfig) -> None:
    for key in ("scene", "tx_trajectory", "rx_trajectory"):
        p = getattr(cfg, key)
        if not p:
            raise ConfigError(f"config key {key!r} is required")
        if not Path(p).exists():
            raise ConfigError(f"{key} file not found: {p}")


def _load_run_inputs(cfg: RunConfig):
    scene = load_scene(cfg.scene)
    tx = load_trajectory(cfg.tx_trajectory)
    rx = load_trajectory(cfg.rx_trajectory)
    return scene, tx, rx


def _traced_snapshots(cfg: RunConfig, scene, tx, rx):
    workers = cfg.workers if cfg.workers > 0 else default_workers()
    return trace_trajectory(scene, tx, rx, cfg.tracer_config(),
                            cfg.coarse_trace_dt, workers=workers)


def cmd_trace(cfg: RunConfig) -> int:
    _require_inputs(cfg)
    scene, tx, rx = _load_run_inputs(cfg)
    snapshots = _traced_snapshots(cfg, scene, tx, rx)
    out = Path(cfg.output_dir) / "trace"
    out.mkdir(parents=True, exist_ok=True)
    for k, (t, paths) in enumerate(snapshots):
        with open(out / f"paths_{k:06d}.csv", "w") as f:
            f.write(",".join(PATH_DUMP_HEADER) + "\n")
            dump_paths_csv(paths, t, f)
    print(f"traced {len(snapshots)} snapshots -> {out}")
    return EXIT_OK


def cmd_synthesize(cfg: RunConfig) -> int:
    _require_inputs(cfg)
    scene, tx, rx = _load_run_inputs(cfg)
    snapshots = _traced_snapshots(cfg, scene, tx, rx)
    if cfg.array_type == "isotropic":
        from .antenna import isotropic_array
        tx_array = isotropic_array(4)
        rx_array = isotropic_array(4)
    else:
        tx_array = default_sharkfin_array()
        rx_array = default_sharkfin_array()
    tensor = synthesize_from_snapshots(snapshots, tx, rx, tx_array, rx_array,
                                       cfg.sim_config())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "channel.v2vc"
    save_tensor(tensor, path)
    cmp.save_labels(
        cmp.segment_los_nlos(snapshots, tensor.time_axis), out / "los_labels.csv")
    print(f"synthesized {tensor.n_time} x {tensor.m_rx} x {tensor.m_tx} x "
          f"{tensor.n_bins} tensor -> {path}")
    return EXIT_OK


def cmd_analyze(tensor_path: str, cfg: RunConfig) -> int:
    tensor = load_tensor(tensor_path)
    if tensor.domain != "delay":
        raise TensorFormatError(f"{tensor_path}: analyze expects a delay-domain tensor")
    if cfg.noise_power > 0:
        from .channel import add_measurement_noise
        tensor = add_measurement_noise(tensor, cfg.noise_power, cfg.noise_seed)
    stride = cfg.stride if cfg.stride > 0 else None
    results = analyze_tensor(tensor, n_avg=cfg.n_avg, stride=stride,
                             threshold=cfg.noise_threshold)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    met.series_to_csv(results["gain"], out / "gain.csv")
    met.series_to_csv(results["delay_spread"], out / "delay_spread.csv")
    met.series_to_csv(results["doppler_spread"], out / "doppler_spread.csv")
    met.series_to_csv(results["eigenvalues"], out / "eigenvalues.csv")
    met.series_to_csv(results["correlation_tx"], out / "correlation_tx.csv")
    met.series_to_csv(results["correlation_rx"], out / "correlation_rx.csv")
    met.profile_to_csv(results["apdp"], out / "apdp.csv")
    met.profile_to_csv(results["dsd"], out / "dsd.csv")
    print(f"wrote {', '.join(METRIC_FILES)} -> {out}")
    return EXIT_OK


_COMPARE_UNITS = {"gain": "dB", "delay_spread": "s", "doppler_spread": "Hz",
                  "eigenvalues": "dB", "correlation_tx": "", "correlation_rx": ""}


def cmd_compare(dir_a: str, dir_b: str, labels_path: str | None, cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stats: dict[str, cmp.ErrorStats] = {}
    labels = None
    if labels_path:
        labels = cmp.load_labels(labels_path)
    names = ["gain", "delay_spread", "doppler_spread", "eigenvalues",
             "correlation_tx", "correlation_rx"]
    for name in names:
        pa, pb = Path(dir_a) / f"{name}.csv", Path(dir_b) / f"{name}.csv"
        for p in (pa, pb):
            if not p.exists():
                raise ConfigError(f"metric file missing: {p}")
        sa = met.series_from_csv(pa, kind=name, unit=_COMPARE_UNITS[name])
        sb = met.series_from_csv(pb, kind=name, unit=_COMPARE_UNITS[name])
        eps = cmp.error_series(sa, sb)
        if name == "delay_spread":  # metric files are SI; the report uses ns
            eps.values = eps.values * 1e9
            eps.unit = "ns"
        if labels is None:
            lab = cmp.SegmentLabels(times=sa.times, is_los=np.ones(len(sa.times), bool))
        else:
            lab = labels
        if eps.values.ndim == 1:
            stats[name] = cmp.error_stats(eps, lab, metric_name=name)
        else:
            prefix = {"correlation_tx": "tx_", "correlation_rx": "rx_"}.get(name, "")
            for c, col in enumerate(eps.labels):
                col_eps = met.MetricSeries(kind=eps.kind, times=eps.times,
                                           values=eps.values[:, c], unit=eps.unit)
                stats[prefix + col] = cmp.error_stats(col_eps, lab,
                                                      metric_name=prefix + col)
    cmp.save_report(stats, out / "report.txt", out / "report.csv")
    text, _ = cmp.render_report(stats)
    print(text)
    return EXIT_OK


def cmd_scene_validate(path: str) -> int:
    scene = load_scene(path)
    n_by_tag: dict[str, int] = {}
    for s in scene.surfaces:
        root = s.tag.split(":")[0] if s.tag else "(untagged)"
        n_by_tag[root] = n_by_tag.get(root, 0) + 1
    lo, hi = scene.bounding_box
    print(f"{path}: OK, {len(scene.surfaces)} surfaces")
    print(f"  bounding box: x [{lo[0]:.1f}, {hi[0]:.1f}]  y [{lo[1]:.1f}, {hi[1]:.1f}]"
          f"  z [{lo[2]:.1f}, {hi[2]:.1f}] m")
    for tag in sorted(n_by_tag):
        print(f"  {tag}: {n_by_tag[tag]} surface(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="v2vchan", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", help="JSON run config", default=None)
        p.add_argument("-o", "--output-dir", dest="output_dir", default=None)
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default ${WORKERS_ENV} or 1)")

    p_trace = sub.add_parser("trace", help="dump ray-traced paths per coarse snapshot")
    add_common(p_trace)
    p_syn = sub.add_parser("synthesize", help="trace and write the channel tensor")
    add_common(p_syn)
    p_ana = sub.add_parser("analyze", help="compute metric CSVs from a tensor")
    p_ana.add_argument("tensor")
    add_common(p_ana)
    p_ana.add_argument("--n-avg", dest="n_avg", type=int, default=None)
    p_ana.add_argument("--stride", type=int, default=None)
    p_ana.add_argument("--noise-threshold", dest="noise_threshold",
                       action="store_true", default=None)
    p_cmp = sub.add_parser("compare", help="error statistics between two metric dirs")
    p_cmp.add_argument("dir_a")
    p_cmp.add_argument("dir_b")
    p_cmp.add_argument("--labels", default=None, help="label override CSV t_s,label")
    add_common(p_cmp)
    p_val = sub.add_parser("scene-validate", help="load and validate a scene file")
    p_val.add_argument("scene")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else 0
    try:
        overrides = {k: getattr(args, k, None)
                     for k in ("output_dir", "workers", "n_avg", "stride",
                               "noise_threshold")}
        if args.command == "scene-validate":
            return cmd_scene_validate(args.scene)
        cfg = load_run_config(getattr(args, "config", None), overrides)
        if args.command == "trace":
            return cmd_trace(cfg)
        if args.command == "synthesize":
            return cmd_synthesize(cfg)
        if args.command == "analyze":
            return cmd_analyze(args.tensor, cfg)
        if args.command == "compare":
            return cmd_compare(args.dir_a, args.dir_b, args.labels, cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SceneFormatError, MaterialReferenceError, GeometryError,
            TensorFormatError, cmp.AlignmentError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
