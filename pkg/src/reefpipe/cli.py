"""Command-line entry point.

Subcommands: run (pipeline + review service), eval (replay and score),
sweep (configuration grid, throughput/accuracy table), export (curated
archive), serve-only (review a finished run). Flags override the config
file, which overrides defaults; REEFPIPE_CONFIG names the default config
path. Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import shlex
import sys
import threading
from pathlib import Path

from .archive import ArchiveSink, DiskFrameStore, export_archive
from .config import CONFIG_ENV_VAR, PipelineConfig, resolve_config
from .detector import ExternalDetector, NoiseModel, OracleDetector, SimulatedCostDetector
from .errors import ReefPipeError
from .evaluation import evaluate_run, scale_truth
from .ingest import open_source, read_annotations
from .pipeline import DetectionCollector, Pipeline, run_pipeline
from .service import MetricsTicker, create_app
from .store import StoreSink, TrackStore

logger = logging.getLogger(__name__)

_CONFIG_FLAG_KEYS = (
    "input_size", "batch_size", "skip_interval", "conf_threshold",
    "assoc_iou_threshold", "track_patience", "flow_radius",
    "frame_queue_capacity", "result_queue_capacity", "frame_queue_policy",
    "batch_flush_ms", "seed", "detector", "external_cmd", "external_addr",
    "external_deadline_ms", "noise_jitter_px", "noise_miss_rate", "noise_fp_rate",
)


def _add_pipeline_flags(p: argparse.ArgumentParser, grid: bool = False) -> None:
    int_or_list = str if grid else int
    p.add_argument("--config", default=os.environ.get(CONFIG_ENV_VAR),
                   help="JSON config file (default: $REEFPIPE_CONFIG)")
    p.add_argument("--print-config", action="store_true",
                   help="print the fully resolved config as JSON and exit")
    p.add_argument("--input-size", dest="input_size", type=int_or_list)
    p.add_argument("--batch-size", dest="batch_size", type=int_or_list)
    p.add_argument("--skip", dest="skip_interval", type=int_or_list)
    p.add_argument("--conf-threshold", dest="conf_threshold", type=float)
    p.add_argument("--assoc-iou", dest="assoc_iou_threshold", type=float)
    p.add_argument("--patience", dest="track_patience", type=int)
    p.add_argument("--flow-radius", dest="flow_radius", type=int)
    p.add_argument("--frame-queue-capacity", dest="frame_queue_capacity", type=int)
    p.add_argument("--result-queue-capacity", dest="result_queue_capacity", type=int)
    p.add_argument("--queue-policy", dest="frame_queue_policy", choices=["block", "drop_oldest"])
    p.add_argument("--flush-ms", dest="batch_flush_ms", type=int)
    p.add_argument("--seed", dest="seed", type=int)
    p.add_argument("--detector", dest="detector", choices=["oracle", "external"])
    p.add_argument("--detector-cmd", dest="external_cmd")
    p.add_argument("--detector-addr", dest="external_addr")
    p.add_argument("--detector-deadline-ms", dest="external_deadline_ms", type=int)
    p.add_argument("--noise-jitter", dest="noise_jitter_px", type=int)
    p.add_argument("--noise-miss", dest="noise_miss_rate", type=float)
    p.add_argument("--noise-fp", dest="noise_fp_rate", type=float)


def _resolve(args, exclude=()) -> PipelineConfig:
    overrides = {}
    for key in _CONFIG_FLAG_KEYS:
        if key in exclude:
            continue
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return resolve_config(args.config, overrides)


def _build_detector(cfg: PipelineConfig, truth: dict):
    if cfg.detector == "external":
        return ExternalDetector(
            cmd=shlex.split(cfg.external_cmd) if cfg.external_cmd else None,
            address=cfg.external_addr or None,
            deadline_ms=cfg.external_deadline_ms,
        )
    noise = NoiseModel(
        jitter_px=cfg.noise_jitter_px,
        miss_rate=cfg.noise_miss_rate,
        fp_rate=cfg.noise_fp_rate,
        seed=cfg.seed,
    )
    return OracleDetector(truth, noise)


def _source_truth(source) -> dict:
    return source.truth() if hasattr(source, "truth") else {}


def _find_ui_dir():
    env = os.environ.get("REEFPIPE_UI_DIR")
    if env and Path(env).is_dir():
        return env
    local = Path("frontend") / "dist"
    return local if local.is_dir() else None


def _serve_blocking(app, addr: str) -> None:
    import uvicorn

    host, _, port = addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")


def cmd_run(args) -> int:
    cfg = _resolve(args)
    if args.print_config:
        print(cfg.to_json())
        return 0
    source = open_source(args.source)
    detector = _build_detector(cfg, _source_truth(source))
    out_dir = Path(args.out) if args.out else None
    store = TrackStore(labels_path=out_dir / "labels.jsonl" if out_dir else None)
    sinks = [StoreSink(store)]
    if out_dir:
        sinks.append(ArchiveSink(out_dir))
    pipeline = Pipeline(cfg, source, detector, sinks)
    ticker = None
    try:
        if args.serve:
            app = create_app(
                store,
                frame_supplier=pipeline.tracker.frame_store,
                metrics_provider=pipeline.snapshot_metrics,
                summary_length=cfg.summary_length,
                ui_dir=_find_ui_dir(),
            )
            ticker = MetricsTicker(store, pipeline.snapshot_metrics).start()
            pipeline.start()
            # flush the archive as soon as the run completes; reviewing
            # continues against the served store until interrupt
            flusher = threading.Thread(
                target=lambda: (pipeline.join(), pipeline.finish()), daemon=True
            )
            flusher.start()
            logger.info("review console at http://%s/", args.serve)
            _serve_blocking(app, args.serve)  # returns on SIGINT/SIGTERM
            pipeline.request_stop()
            pipeline.join(timeout=30)
            flusher.join(timeout=30)
        else:
            pipeline.start()
            try:
                pipeline.join()
            except KeyboardInterrupt:
                logger.info("interrupted, draining")
                pipeline.request_stop()
                pipeline.join(timeout=30)
    finally:
        if ticker:
            ticker.stop()
    result = pipeline.finish()
    store.close()
    print(json.dumps(result.metrics.to_dict(), indent=2))
    return 0 if result.metrics.status == "ok" else 1


def cmd_eval(args) -> int:
    # replay evaluation must be lossless, so the frame queue always blocks
    cfg = _resolve(args, exclude=("frame_queue_policy",)).replace(frame_queue_policy="block")
    if args.print_config:
        print(cfg.to_json())
        return 0
    source = open_source(args.source)
    truth = read_annotations(args.truth) if args.truth else _source_truth(source)
    if not truth:
        raise ReefPipeError("no ground truth: give --truth or use an annotated source")
    detector = _build_detector(cfg, truth)
    collector = DetectionCollector()
    result = run_pipeline(cfg, source, detector, [collector])
    working_truth = scale_truth(truth, result.working_scale)
    output = result.tracks if args.eval_mode == "tracks" else collector.detections
    report = evaluate_run(
        output,
        working_truth,
        end_to_end_fps=result.metrics.end_to_end_fps,
        config=cfg.to_dict(),
    )
    if args.json:
        print(report.to_json())
    else:
        print(report.to_text_table())
    return 0 if result.metrics.status == "ok" else 1


def _parse_grid(raw, default: list) -> list:
    if raw is None:
        return default
    return [int(v) for v in str(raw).split(",") if v != ""]


def cmd_sweep(args) -> int:
    cfg = _resolve(args, exclude=("input_size", "batch_size", "skip_interval",
                                  "frame_queue_policy")).replace(frame_queue_policy="block")
    if args.print_config:
        print(cfg.to_json())
        return 0
    batch_sizes = _parse_grid(args.batch_size, [1, 4])
    input_sizes = _parse_grid(args.input_size, [720, 1080])
    skips = _parse_grid(args.skip_interval, [1])
    source_spec = args.source or {
        "type": "synthetic",
        "seed": cfg.seed,
        "frames": args.frames,
        "width": 1920,
        "height": 1080,
        "objects": 2,
    }
    rows = []
    for batch, size, k in itertools.product(batch_sizes, input_sizes, skips):
        run_cfg = cfg.replace(
            batch_size=batch,
            input_size=size,
            skip_interval=k,
            frame_queue_capacity=max(cfg.frame_queue_capacity, batch),
        )
        source = open_source(source_spec)
        truth = read_annotations(args.truth) if args.truth else _source_truth(source)
        detector = SimulatedCostDetector(
            _build_detector(run_cfg, truth),
            overhead_ms=args.sim_overhead_ms,
            per_megapixel_ms=args.sim_per_mp_ms,
        )
        result = run_pipeline(run_cfg, source, detector)
        f2 = float("nan")
        if truth:
            report = evaluate_run(result.tracks, scale_truth(truth, result.working_scale))
            f2 = report.mean_f2
        name = f"batch {batch}, {size}p" + (f", skip {k}" if k != 1 else "")
        rows.append((name, f2, result.metrics.end_to_end_fps))
    width = max(len(r[0]) for r in rows) + 2
    print(f"{'Configuration':<{width}}| {'F2':>6} | {'FPS':>7}")
    print("-" * (width + 20))
    for name, f2, fps in rows:
        print(f"{name:<{width}}| {f2:>6.3f} | {fps:>7.2f}")
    return 0


def cmd_export(args) -> int:
    store = TrackStore.load(args.run_dir)
    manifest = export_archive(
        store,
        args.dest,
        include="labeled-only" if args.labeled_only else "all",
        run_dir=args.run_dir,
    )
    store.close()
    print(json.dumps({"dest": str(args.dest), "counts": manifest["counts"]}, indent=2))
    return 0


def cmd_serve_only(args) -> int:
    store = TrackStore.load(args.run_dir)
    supplier = DiskFrameStore(args.run_dir)
    app = create_app(store, frame_supplier=supplier, ui_dir=_find_ui_dir())
    logger.info("review console at http://%s/", args.serve)
    _serve_blocking(app, args.serve)
    store.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reefpipe", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the live pipeline (optionally with the review service)")
    p_run.add_argument("--source", required=True, help="corpus directory or synthetic descriptor JSON")
    p_run.add_argument("--out", help="run directory for the frame/track archive")
    p_run.add_argument("--serve", metavar="HOST:PORT", help="serve the review API/console")
    _add_pipeline_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="replay a corpus and score accuracy")
    p_eval.add_argument("--source", required=True)
    p_eval.add_argument("--truth", help="annotations.csv (default: source's own truth)")
    p_eval.add_argument("--eval-mode", choices=["detections", "tracks"], default="tracks")
    p_eval.add_argument("--json", action="store_true", help="emit the report as JSON")
    _add_pipeline_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="grid of configs -> accuracy/throughput table")
    p_sweep.add_argument("--source", help="corpus or descriptor (default: built-in synthetic)")
    p_sweep.add_argument("--truth")
    p_sweep.add_argument("--frames", type=int, default=48, help="synthetic scene length")
    p_sweep.add_argument("--sim-overhead-ms", type=float, default=150.0,
                         help="simulated per-invocation detector overhead")
    p_sweep.add_argument("--sim-per-mp-ms", type=float, default=60.0,
                         help="simulated detector cost per megapixel")
    _add_pipeline_flags(p_sweep, grid=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_export = sub.add_parser("export", help="export the curated archive from a run directory")
    p_export.add_argument("--run-dir", required=True)
    p_export.add_argument("--dest", required=True)
    p_export.add_argument("--labeled-only", action="store_true")
    p_export.set_defaults(func=cmd_export)

    p_serve = sub.add_parser("serve-only", help="serve the review console over a finished run")
    p_serve.add_argument("--run-dir", required=True)
    p_serve.add_argument("--serve", default="127.0.0.1:8000", metavar="HOST:PORT")
    p_serve.set_defaults(func=cmd_serve_only)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ReefPipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
