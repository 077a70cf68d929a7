"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 quality rejection, 4 pipeline failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, synth
from .config import SiteConfig, load_config
from .errors import HydrostatError, InputError, PipelineError
from .impute import impute, learn_potentials, total_discharge
from .kde import Kde1, mode1
from .mask_quality import assess, level_from_mask
from .rating import CalibratedCurve, QuadraticCurve, iterative_fit, rbf_calibrate
from .stiv import cross_section_lines, line_velocities

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_REJECTED = 3
EXIT_PIPELINE = 4

log = logging.getLogger("hydrostat")


def _out_dir(args):
    if args.out is None:
        return None
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(doc):
    sys.stdout.write(io.dumps(doc) + "\n")


# ---------------------------------------------------------------------------
# level


def cmd_level(mask_path, cfg: SiteConfig, out=None):
    mask = io.read_mask(mask_path)
    if cfg.level_calibration is None:
        raise InputError("configuration lacks level_calibration")
    rep = assess(mask, cfg.prior_slope, cfg.quality_threshold, cfg.roi)
    level = level_from_mask(mask, cfg.level_calibration, cfg.roi, cfg.min_run)
    doc = {"level_m": level, "quality": rep.q, "accepted": rep.accepted, "roi": list(rep.roi)}
    if out is not None:
        io.write_json(out / "level.json", doc)
    return doc, (EXIT_OK if rep.accepted else EXIT_REJECTED)


# ---------------------------------------------------------------------------
# stiv


def _segments(cfg, n_positions):
    if cfg.stiv.segments:
        return cfg.stiv.segments
    return [(p, p + 1) for p in range(n_positions)]


def segment_velocities(samples, segments, confidence: float, min_samples: int):
    """Representative velocity per segment; 0 marks a missing segment."""
    rows = []
    pos = np.array([s.position for s in samples], dtype=int)
    vel = np.array([s.v for s in samples], dtype=float)
    wgt = np.array([s.weight for s in samples], dtype=float)
    for k, (lo, hi) in enumerate(segments):
        sel = (pos >= lo) & (pos < hi)
        n = int(sel.sum())
        if n < max(min_samples, 2):
            rows.append((k, 0.0, 0.0, n))
            continue
        est = mode1(Kde1(vel[sel], wgt[sel]))
        v = est.mode if est.confidence >= confidence else 0.0
        rows.append((k, v, est.confidence, n))
    return rows


def cmd_stiv(frames_dir, cfg: SiteConfig, out=None):
    seq = io.read_frames(frames_dir)
    _, h, w = seq.shape
    st = cfg.stiv
    start = st.start if st.start is not None else ((w - 1) / 2.0, 0.0)
    end = st.end if st.end is not None else ((w - 1) / 2.0, h - 1.0)
    lines = cross_section_lines(start, end, st.flow_direction, st.line_length)
    res = line_velocities(seq, lines, st.angle_window, st.detector, st.workers, st.bidirectional)
    for pos, why in res.skipped:
        log.warning("skipped search line %d: %s", pos, why)
    segs = _segments(cfg, len(lines))
    rows = segment_velocities(res.samples, segs, st.confidence, st.min_samples)
    names = cfg.segment_names or [f"s{k}" for k in range(len(segs))]
    if len(names) != len(segs):
        raise InputError("segment_names does not match the number of segments")
    if out is not None:
        io.write_table(out / "velocities.csv", ["segment", "v", "confidence", "n_samples"], rows)
        io.write_table(out / "samples.csv", ["position", "v", "weight"], [(s.position, s.v, s.weight) for s in res.samples])
        io.write_flow_matrix(out / "observation.csv", names, [[max(r[1], 0.0) for r in rows]])
    return {
        "segments": [{"segment": names[k], "v": v, "confidence": c, "n_samples": n} for k, v, c, n in rows],
        "skipped_lines": [p for p, _ in res.skipped],
    }


# ---------------------------------------------------------------------------
# impute


def cmd_impute(history_path, observation_path, cfg: SiteConfig, out=None, level=None):
    names, hist = io.read_flow_matrix(history_path)
    obs_names, obs = io.read_table(observation_path)
    if obs_names != names or len(obs) != 1:
        raise InputError("observation CSV must have the history header and exactly one row")
    model = learn_potentials(hist, cfg.impute_min_samples)
    res = impute(model, obs[0])
    doc = {"segments": names, **res.to_dict()}
    if level is not None:
        if cfg.geometry is None:
            raise InputError("--level needs a geometry table in the configuration")
        doc["level_m"] = float(level)
        doc["discharge"] = total_discharge(res.v_star, cfg.geometry, float(level))
    if out is not None:
        io.write_json(out / "imputation.json", doc)
    return doc


# ---------------------------------------------------------------------------
# rating


def cmd_rating_fit(pairs_path, cfg: SiteConfig, out=None):
    h, q = io.read_pairs(pairs_path)
    rep = iterative_fit(h, q, cfg.rel_threshold, cfg.max_iter)
    inl = np.zeros(len(h), dtype=bool)
    inl[rep.inliers] = True
    doc = rep.to_dict()
    doc["rel_threshold"] = cfg.rel_threshold
    doc["h_range"] = [float(h[inl].min()), float(h[inl].max())]
    if out is not None:
        io.write_json(out / "curve.json", doc)
        io.write_table(out / "inliers.csv", ["h", "q", "inlier"], zip(h, q, inl))
    return doc


def cmd_rating_calibrate(curve_path, controls_path, cfg: SiteConfig, out=None):
    doc = io.read_json(curve_path)
    try:
        base = QuadraticCurve(**{k: float(v) for k, v in doc.get("curve", doc).items() if k in ("a", "b", "c")})
    except TypeError as exc:
        raise InputError(f"{curve_path}: no quadratic coefficients") from exc
    hs, qs = io.read_pairs(controls_path)
    cal = rbf_calibrate(base, hs, qs, cfg.ridge, cfg.sigma_min)
    lo, hi = doc.get("h_range", [float(hs.min()), float(hs.max())])
    res = cal.to_dict()
    res["monotonic"] = cal.monotonic_on(min(lo, hs.min()), max(hi, hs.max()))
    res["control_fit"] = [{"h": float(a), "q": float(b), "q_cal": float(cal(a))} for a, b in zip(hs, qs)]
    if out is not None:
        io.write_json(out / "calibrated.json", res)
    return res


def load_calibrated(path) -> CalibratedCurve:
    return CalibratedCurve.from_dict(io.read_json(path))


# ---------------------------------------------------------------------------
# synth


def _spec_kwargs(cls, doc, seed):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise InputError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    kw = dict(doc)
    if seed is not None:
        kw["seed"] = seed
    for k, v in kw.items():
        if isinstance(v, list):
            kw[k] = tuple(v)
    return kw


def cmd_synth(kind, spec_path, out, seed=None):
    doc = io.read_json(spec_path) if spec_path is not None else {}
    if out is None:
        raise InputError("synth needs --out")
    if kind == "mask":
        mask, truth = synth.gen_mask(synth.MaskSpec(**_spec_kwargs(synth.MaskSpec, doc, seed)))
        io.write_mask(out / "mask.pgm", mask)
    elif kind == "frames":
        kw = _spec_kwargs(synth.SceneSpec, doc, seed)
        seq, truth = synth.gen_frames(synth.SceneSpec(**kw))
        io.write_frames(out / "frames", seq)
    elif kind == "history":
        spec = synth.HistorySpec(**_spec_kwargs(synth.HistorySpec, doc, seed))
        hist, extra = synth.gen_history(spec)
        names = list(spec.names) if spec.names else [f"s{k}" for k in range(spec.N)]
        io.write_flow_matrix(out / "history.csv", names, hist)
        truth = {"names": names, "truth": extra["truth"], "missing": extra["missing"]}
    elif kind == "rating":
        kw = dict(doc)
        if seed is not None:
            kw["seed"] = seed
        try:
            h, q, is_out = synth.gen_rating(**kw)
        except TypeError as exc:
            raise InputError(f"bad rating spec: {exc}") from exc
        io.write_table(out / "pairs.csv", ["h", "q"], zip(h, q))
        truth = {k: kw[k] for k in ("a", "b", "c")}
        truth["outliers"] = np.flatnonzero(is_out).tolist()
    else:
        raise InputError(f"unknown synth kind {kind!r}")
    io.write_json(out / "truth.json", truth)
    return {"kind": kind, "out": str(out)}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="hydrostat", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="site configuration JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="random seed override")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("level", parents=[common], help="water level from a mask")
    s.add_argument("mask")

    s = sub.add_parser("stiv", parents=[common], help="segment surface velocities from frames")
    s.add_argument("frames")

    s = sub.add_parser("impute", parents=[common], help="fill missing segment velocities")
    s.add_argument("history")
    s.add_argument("observation")
    s.add_argument("--level", type=float, help="water level for discharge computation")

    s = sub.add_parser("rating", help="stage-discharge curve")
    rsub = s.add_subparsers(dest="action", required=True)
    r = rsub.add_parser("fit", parents=[common])
    r.add_argument("pairs")
    r = rsub.add_parser("calibrate", parents=[common])
    r.add_argument("curve")
    r.add_argument("controls")

    s = sub.add_parser("synth", help="write synthetic scenes with ground truth")
    ssub = s.add_subparsers(dest="kind", required=True)
    for kind in ("mask", "frames", "history", "rating"):
        k = ssub.add_parser(kind, parents=[common])
        k.add_argument("spec", nargs="?")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        out = _out_dir(args)
        code = EXIT_OK
        if args.command == "level":
            doc, code = cmd_level(args.mask, cfg, out)
        elif args.command == "stiv":
            doc = cmd_stiv(args.frames, cfg, out)
        elif args.command == "impute":
            doc = cmd_impute(args.history, args.observation, cfg, out, args.level)
        elif args.command == "rating" and args.action == "fit":
            doc = cmd_rating_fit(args.pairs, cfg, out)
        elif args.command == "rating":
            doc = cmd_rating_calibrate(args.curve, args.controls, cfg, out)
        else:
            doc = cmd_synth(args.kind, args.spec, out, args.seed)
    except (InputError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except PipelineError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_PIPELINE
    except HydrostatError as exc:
        log.error("%s", exc)
        return EXIT_PIPELINE
    _emit(doc)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
