"""Command-line entry point: ``driverloc <subcommand> ...``.

Exit codes: 0 success, 2 input/output failure, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .classify import HttpClassifier, MockClassifier, classify_intervals
from .config import STAT_KINDS, RunConfig
from .errors import ConfigError, DriverLocError
from .evaluate import EvaluationReport, evaluate, format_table, overlap_score, read_ground_truth
from .intervals import intervals_from_json, intervals_to_csv, intervals_to_json
from .keypoints import CAMERA_VIEWS, View, build_series, parse_keypoints
from .pipeline import fuse_views, merge_proposals, propose
from .synthetic import ScenarioSpec, random_scenario, write_scenario

log = logging.getLogger("driverloc")

EXIT_IO = 2
EXIT_CONFIG = 3


class InputError(DriverLocError):
    pass


# ---------------------------------------------------------------------------
# argument groups

def _add_detection_args(p):
    g = p.add_argument_group("detection")
    g.add_argument("--k", type=int, help="number of minimum spanning trees (default 26)")
    g.add_argument("--stat", choices=STAT_KINDS, help="scan statistic (default m)")
    g.add_argument("--l0-frac", type=float, help="minimum interval length / window (default 0.1)")
    g.add_argument("--l1-frac", type=float, help="maximum interval length / window (default 0.9)")
    g.add_argument("--perm-b", type=int, help="permutations per window (default 100)")
    g.add_argument("--alpha", type=float, help="p-value gate (default 0.05; 1 disables)")
    g.add_argument("--sample-hz", type=float, help="detection sampling rate (default 10)")
    g.add_argument("--window-secs", type=float, help="window length (default 60)")
    g.add_argument("--offset-secs", type=float, help="second-pass offset (default 30)")
    g = p.add_argument_group("input")
    g.add_argument("--fps", type=float, help="keypoint file frame rate (default 30)")
    g.add_argument("--frame-w", type=float, help="frame width in pixels (default 1920)")
    g.add_argument("--frame-h", type=float, help="frame height in pixels (default 1080)")
    g.add_argument("--conf-threshold", type=float, help="keypoint confidence cut (default 0.5)")
    g.add_argument("--video-id", help="video id (default: derived from the file name)")


def _add_fusion_args(p):
    g = p.add_argument_group("fusion")
    g.add_argument("--merge-iou", type=float, help="IoU for merging a view's proposals (default 0.3)")
    g.add_argument("--start-tol", type=float, help="start agreement across views, s (default 2)")
    g.add_argument("--end-tol", type=float, help="end agreement across views, s (default 2)")
    g.add_argument("--min-views", type=int, help="views that must agree (default 2)")


def _add_classifier_args(p):
    g = p.add_argument_group("classifier")
    g.add_argument("--classifier", choices=("mock", "http"), help="classifier backend")
    g.add_argument("--endpoint", help="URL of the question-answering service")
    g.add_argument("--template", type=int, help="prompt template 1-3 (default 3)")
    g.add_argument("--error-rate", type=float, help="mock classifier error rate")
    g.add_argument("--timeout", type=float, help="request timeout, s")
    g.add_argument("--retries", type=int, help="request retries")
    g.add_argument("--clip-pattern", help="clip reference pattern, e.g. '{video_id}.mp4'")


def _common(p):
    p.add_argument("--config", help="RunConfig JSON file; flags override it")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")


_OVERRIDES = {
    "detection": {"k": "k", "stat": "stat", "l0_frac": "l0_frac", "l1_frac": "l1_frac",
                  "perm_b": "perm_B", "alpha": "alpha", "sample_hz": "sample_hz",
                  "window_secs": "window_secs", "offset_secs": "offset_secs", "seed": "seed"},
    "input": {"fps": "fps", "frame_w": "frame_w", "frame_h": "frame_h",
              "conf_threshold": "conf_threshold"},
    "fusion": {"merge_iou": "merge_iou", "start_tol": "start_tol_s", "end_tol": "end_tol_s",
               "min_views": "min_views"},
    "classifier": {"classifier": "kind", "endpoint": "endpoint", "template": "template",
                   "error_rate": "error_rate", "timeout": "timeout_s", "retries": "retries",
                   "clip_pattern": "clip_pattern"},
}


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_json(_read_text(args.config))
    for section, mapping in _OVERRIDES.items():
        updates = {field: getattr(args, arg) for arg, field in mapping.items()
                   if getattr(args, arg, None) is not None}
        if updates:
            setattr(cfg, section, replace(getattr(cfg, section), **updates))
    if getattr(args, "tolerance", None) is not None:
        cfg.tolerance_s = args.tolerance
    return cfg.validate()


# ---------------------------------------------------------------------------
# helpers

def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _write_text(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def _view_of(stem: str) -> View | None:
    low = stem.lower()
    for token, view in (("dashboard", View.DASHBOARD), ("rearview", View.REARVIEW),
                        ("rightwindow", View.RIGHT_WINDOW), ("right_side", View.RIGHT_WINDOW),
                        ("dash", View.DASHBOARD), ("rear", View.REARVIEW),
                        ("right", View.RIGHT_WINDOW)):
        if token in low:
            return view
    return None


def _video_of(stem: str, view: View | None) -> str:
    if view is not None:
        for suffix in (view.value, view.value.lower()):
            if stem.endswith("_" + suffix):
                return stem[: -len(suffix) - 1]
    return stem


def parse_view_args(items) -> list[tuple[View, Path]]:
    """``VIEW=PATH`` or bare paths; bare paths get their view from the file
    name, else the next unused camera in Dashboard, Rearview, RightWindow order."""
    out = []
    for item in items:
        if "=" in item:
            name, path = item.split("=", 1)
            try:
                view = View.parse(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            out.append((view, Path(path)))
        else:
            out.append((_view_of(Path(item).stem), Path(item)))
    taken = {v for v, _ in out if v is not None}
    spare = [v for v in CAMERA_VIEWS if v not in taken]
    resolved = []
    for view, path in out:
        if view is None:
            if not spare:
                raise ConfigError("more keypoint files than camera views")
            view = spare.pop(0)
        resolved.append((view, path))
    if len({v for v, _ in resolved}) != len(resolved):
        raise ConfigError("two keypoint files map to the same camera view")
    return resolved


def load_views(items, cfg: RunConfig, video_id: str | None = None) -> dict:
    series = {}
    for view, path in parse_view_args(items):
        if not path.exists():
            raise InputError(f"keypoint file not found: {path}")
        with open(path, "rb") as fh:
            frames = parse_keypoints(fh, cfg.input.fps)
        vid = video_id or _video_of(path.stem, view)
        series[view] = build_series(frames, cfg.input.fps, vid, view, cfg.input.frame_w,
                                    cfg.input.frame_h, cfg.input.conf_threshold)
    return series


def _propose(series, cfg: RunConfig, threads: int, min_views=None):
    f = cfg.fusion
    return propose(series, cfg.detection, f.merge_iou, f.start_tol_s, f.end_tol_s,
                   f.min_views if min_views is None else min_views, threads)


def _load_gt(path):
    try:
        return read_ground_truth(_read_text(path))
    except (ValueError, KeyError) as exc:
        raise InputError(f"bad ground-truth file {path}: {exc}") from None


def _classifier(cfg: RunConfig, gt=None, seed=0):
    c = cfg.classifier
    if c.kind == "mock":
        if gt is None:
            raise ConfigError("the mock classifier needs --ground-truth")
        return MockClassifier(gt, c.error_rate, seed)
    return HttpClassifier(c.endpoint, c.template, c.timeout_s, c.retries, c.clip_pattern)


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args):
    if args.spec:
        spec = ScenarioSpec.from_json(_read_text(args.spec))
    else:
        if args.activities < 0:
            raise ConfigError("--activities must be >= 0")
        spec = random_scenario(args.activities, args.seed or 0, sample_hz=args.sample_hz or 10.0,
                               video_id=args.video_id or "synth")
    paths = write_scenario(spec, args.out_dir)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2, sort_keys=True))


def cmd_detect(args):
    cfg = resolve_config(args)
    series = load_views(args.keypoints, cfg, args.video_id)
    merged, _ = _propose(series, cfg, args.threads, min_views=1)
    ivs = [iv for view in sorted(merged, key=lambda v: v.value) for iv in merged[view]]
    if args.format == "csv":
        text = f"# config={json.dumps(cfg.to_dict(), sort_keys=True)}\n" + intervals_to_csv(ivs)
    else:
        text = intervals_to_json(ivs, config=cfg.to_dict())
    _write_text(args.out, text)


def cmd_sweep(args):
    cfg = resolve_config(args)
    values = [v.strip() for v in (args.values or "").split(",") if v.strip()]
    if not values:
        raise ConfigError("--values must list at least one value")
    try:
        values = [int(v) if args.param == "k" else float(v) for v in values]
    except ValueError as exc:
        raise ConfigError(f"bad --values entry: {exc}") from None
    gts = _load_gt(args.ground_truth) if args.ground_truth else None
    if args.param == "window" and gts is None:
        raise ConfigError("a window sweep needs --ground-truth to score accuracy")
    series = load_views(args.keypoints, cfg, args.video_id)

    buf = io.StringIO()
    buf.write(f"# config={json.dumps(cfg.to_dict(), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    if args.param == "k":
        w.writerow(["k", "p_start", "p_end"] + (["actual_start", "actual_end"] if gts else []))
    else:
        w.writerow(["window_secs", "matched", "total", "accuracy_pct", "l0_frac", "l1_frac"])
    for v in values:
        if args.param == "k":
            det = replace(cfg.detection, k=v)
        else:
            # second pass starts half a window in, as 30 s does for 60 s windows
            det = replace(cfg.detection, window_secs=v, offset_secs=v / 2)
        det.validate()
        run_cfg = replace(cfg, detection=det)
        _, fused = _propose(series, run_cfg, args.threads)
        if args.param == "k":
            for iv in fused:
                row = [v, repr(iv.start_s), repr(iv.end_s)]
                if gts:
                    acts = [a for gt in gts if gt.video_id == iv.video_id for a in gt.activities]
                    best = max(acts, key=lambda a: overlap_score((a.start_s, a.end_s),
                                                                 (iv.start_s, iv.end_s)),
                               default=None)
                    row += ["", ""] if best is None else [repr(best.start_s), repr(best.end_s)]
                w.writerow(row)
        else:
            rep = evaluate(gts, fused, "proposal", cfg.tolerance_s)
            w.writerow([v, rep.matched, rep.total, f"{100 * rep.accuracy:.1f}",
                        det.l0_frac, det.l1_frac])
    _write_text(args.out, buf.getvalue())


def cmd_fuse(args):
    cfg = resolve_config(args)
    per_view: dict[View, list] = {}
    for path in args.proposals:
        for iv in intervals_from_json(_read_text(path)):
            per_view.setdefault(iv.view, []).append(iv)
    f = cfg.fusion
    merged = {v: merge_proposals(ivs, f.merge_iou) for v, ivs in per_view.items()}
    fused = fuse_views(merged, f.start_tol_s, f.end_tol_s, min(f.min_views, max(len(merged), 1)))
    _write_text(args.out, intervals_to_json(fused, config=cfg.to_dict()))


def cmd_classify(args):
    cfg = resolve_config(args)
    ivs = intervals_from_json(_read_text(args.proposals))
    gt = _load_gt(args.ground_truth) if args.ground_truth else None
    clf = _classifier(cfg, gt, cfg.detection.seed)
    out = classify_intervals(ivs, clf, args.threads)
    _write_text(args.out, intervals_to_json(out, config=cfg.to_dict()))


def cmd_evaluate(args):
    cfg = resolve_config(args)
    gts = _load_gt(args.ground_truth)
    preds = intervals_from_json(_read_text(args.predictions))
    rep = evaluate(gts, preds, args.mode, cfg.tolerance_s)
    doc = rep.to_dict()
    doc["config"] = cfg.to_dict()
    _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if args.table:
        _write_text(args.table, format_table({args.mode: rep}))


def run_pipeline(series, gts, cfg: RunConfig, threads: int = 1):
    """Detect, merge, fuse, classify and evaluate. Returns a result dict."""
    merged, fused = _propose(series, cfg, threads)
    clf = _classifier(cfg, gts, cfg.detection.seed)
    classified = classify_intervals(fused, clf, threads if cfg.classifier.kind == "http" else 1)
    proposal_rep = evaluate(gts, fused, "proposal", cfg.tolerance_s)
    classified_rep = evaluate(gts, classified, "classified", cfg.tolerance_s)
    return {"merged": merged, "fused": fused, "classified": classified,
            "proposal": proposal_rep, "classified_report": classified_rep}


def cmd_run(args):
    cfg = resolve_config(args)
    gts = _load_gt(args.ground_truth)
    series = load_views(args.views, cfg, args.video_id)
    res = run_pipeline(series, gts, cfg, args.threads)
    out = Path(args.out_dir)
    per_view = [iv for v in sorted(res["merged"], key=lambda v: v.value) for iv in res["merged"][v]]
    _write_text(out / "proposals.json", intervals_to_json(per_view, config=cfg.to_dict()))
    _write_text(out / "fused.json", intervals_to_json(res["fused"], config=cfg.to_dict()))
    _write_text(out / "classified.json", intervals_to_json(res["classified"], config=cfg.to_dict()))
    reports: dict[str, EvaluationReport] = {"proposal": res["proposal"],
                                            "classified": res["classified_report"]}
    doc = {"config": cfg.to_dict(), "reports": {k: r.to_dict() for k, r in reports.items()}}
    _write_text(out / "report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _write_text(out / "report.txt", format_table(reports))
    sys.stdout.write(format_table(reports))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driverloc",
                                     description="Driver activity localization from pose keypoints")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-view scenario")
    p.add_argument("--spec", help="scenario spec JSON (otherwise a random scenario)")
    p.add_argument("--activities", type=int, default=10)
    p.add_argument("--sample-hz", type=float)
    p.add_argument("--video-id")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="propose activity intervals per camera view")
    p.add_argument("--keypoints", nargs="+", required=True, metavar="[VIEW=]PATH")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _add_detection_args(p)
    _add_fusion_args(p)
    _common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="repeat detection over a k or window-length grid")
    p.add_argument("--keypoints", nargs="+", required=True, metavar="[VIEW=]PATH")
    p.add_argument("--param", choices=("k", "window"), required=True)
    p.add_argument("--values", required=True, help="comma-separated grid")
    p.add_argument("--ground-truth")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out")
    _add_detection_args(p)
    _add_fusion_args(p)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fuse", help="merge and fuse per-view proposal files")
    p.add_argument("--proposals", nargs="+", required=True)
    p.add_argument("--out")
    _add_fusion_args(p)
    _common(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("classify", help="classify intervals")
    p.add_argument("--proposals", required=True)
    p.add_argument("--ground-truth", help="annotations for the mock classifier")
    p.add_argument("--out")
    _add_classifier_args(p)
    _common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--mode", choices=("proposal", "classified"), default="classified")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out")
    p.add_argument("--table", help="also write an aligned text table here")
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="detect, fuse, classify and evaluate end to end")
    p.add_argument("--views", nargs="+", required=True, metavar="[VIEW=]PATH")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out-dir", required=True)
    _add_detection_args(p)
    _add_fusion_args(p)
    _add_classifier_args(p)
    _common(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DriverLocError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
