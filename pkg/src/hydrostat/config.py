"""Site configuration document.

All thresholds are site-tunable and live here.  Angles are given in degrees
in the JSON file and converted to radians on load.

Example::

    {
      "camera": {"fx": 1200, "fy": 1200, "cx": 960, "cy": 540,
                 "pitch": 35.0, "yaw": 0.0, "roll": 0.0, "height": 12.0},
      "survey": {"camera": [0, 0, 12], "reference": [0, 40, 0.5],
                 "verify": [0, 25, 0.4], "tolerance": 0.5},
      "mask": {"prior_slope": 0.0, "threshold": 25.0, "roi": [0, 640], "min_run": 3},
      "level_calibration": {"gain": -0.01, "offset": 5.0},
      "stiv": {"start": [32, 0], "end": [32, 19], "flow_direction": [1, 0],
               "line_length": 64, "segments": [[0, 4], [4, 8]],
               "angle_window": [2, 80], "confidence": 0.3, "min_samples": 5},
      "impute": {"min_samples": 5},
      "rating": {"rel_threshold": 0.2, "max_iter": 20, "ridge": 1e-8, "sigma_min": 0.05},
      "geometry": {"levels": [0, 1, 2], "areas": [[0, 0], [2, 3], [4, 6]]},
      "segment_names": ["d20", "d40"]
    }
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InputError
from .geometry import CameraModel, GroundPoint
from .impute import CrossSectionGeometry
from .io import read_json
from .kde import DEFAULT_CONFIDENCE
from .mask_quality import DEFAULT_THRESHOLD, LevelCalibration
from .stiv import DetectorConfig


@dataclass
class StivSettings:
    start: tuple[float, float] | None = None
    end: tuple[float, float] | None = None
    flow_direction: tuple[float, float] = (1.0, 0.0)
    line_length: int = 64
    segments: list = field(default_factory=list)  # [lo, hi) position ranges
    angle_window: tuple[float, float] = (math.radians(2.0), math.radians(80.0))
    confidence: float = DEFAULT_CONFIDENCE
    min_samples: int = 5
    bidirectional: bool = False
    workers: int = 1
    detector: DetectorConfig = field(default_factory=DetectorConfig)


@dataclass
class SiteConfig:
    camera: CameraModel | None = None
    survey: dict = field(default_factory=dict)
    prior_slope: float = 0.0
    quality_threshold: float = DEFAULT_THRESHOLD
    roi: tuple[int, int] | None = None
    min_run: int = 3
    level_calibration: LevelCalibration | None = None
    stiv: StivSettings = field(default_factory=StivSettings)
    impute_min_samples: int = 5
    rel_threshold: float = 0.2
    max_iter: int = 20
    ridge: float = 1e-8
    sigma_min: float = 0.05
    geometry: CrossSectionGeometry | None = None
    segment_names: list | None = None


def _pair(v, name):
    if v is None:
        return None
    if len(v) != 2:
        raise InputError(f"{name} must have two entries")
    return float(v[0]), float(v[1])


def parse_config(doc: dict) -> SiteConfig:
    try:
        return _parse(doc)
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid site configuration: {exc}") from exc


def _parse(doc):
    cfg = SiteConfig()
    cam = doc.get("camera")
    if cam:
        cfg.camera = CameraModel(
            fx=float(cam["fx"]),
            fy=float(cam["fy"]),
            cx=float(cam["cx"]),
            cy=float(cam["cy"]),
            pitch=math.radians(float(cam["pitch"])),
            height=float(cam["height"]),
            yaw=math.radians(float(cam.get("yaw", 0.0))),
            roll=math.radians(float(cam.get("roll", 0.0))),
        )
    survey = doc.get("survey", {})
    for key in ("camera", "reference", "verify"):
        if key in survey:
            cfg.survey[key] = GroundPoint(*map(float, survey[key]))
    cfg.survey["tolerance"] = math.radians(float(survey.get("tolerance", 0.5)))

    mask = doc.get("mask", {})
    cfg.prior_slope = float(mask.get("prior_slope", cfg.prior_slope))
    cfg.quality_threshold = float(mask.get("threshold", cfg.quality_threshold))
    if mask.get("roi") is not None:
        cfg.roi = tuple(int(x) for x in _pair(mask["roi"], "mask.roi"))
    cfg.min_run = int(mask.get("min_run", cfg.min_run))

    cal = doc.get("level_calibration")
    if cal:
        rows = cal.get("valid_rows")
        cfg.level_calibration = LevelCalibration(float(cal["gain"]), float(cal["offset"]), _pair(rows, "valid_rows"))

    st = doc.get("stiv", {})
    s = cfg.stiv
    s.start = _pair(st.get("start"), "stiv.start")
    s.end = _pair(st.get("end"), "stiv.end")
    s.flow_direction = _pair(st.get("flow_direction", s.flow_direction), "stiv.flow_direction")
    s.line_length = int(st.get("line_length", s.line_length))
    s.segments = [tuple(int(x) for x in seg) for seg in st.get("segments", [])]
    if "angle_window" in st:
        lo, hi = _pair(st["angle_window"], "stiv.angle_window")
        s.angle_window = (math.radians(lo), math.radians(hi))
    s.confidence = float(st.get("confidence", s.confidence))
    s.min_samples = int(st.get("min_samples", s.min_samples))
    s.bidirectional = bool(st.get("bidirectional", s.bidirectional))
    s.workers = int(st.get("workers", s.workers))
    det = dict(st.get("detector", {}))
    for key in ("tolerance", "axis_agreement"):
        if key in det:
            det[key] = math.radians(float(det[key]))
    s.detector = DetectorConfig(**det)

    cfg.impute_min_samples = int(doc.get("impute", {}).get("min_samples", cfg.impute_min_samples))
    rt = doc.get("rating", {})
    cfg.rel_threshold = float(rt.get("rel_threshold", cfg.rel_threshold))
    cfg.max_iter = int(rt.get("max_iter", cfg.max_iter))
    cfg.ridge = float(rt.get("ridge", cfg.ridge))
    cfg.sigma_min = float(rt.get("sigma_min", cfg.sigma_min))

    geo = doc.get("geometry")
    if geo:
        cfg.geometry = CrossSectionGeometry(geo["levels"], geo["areas"])
    if doc.get("segment_names") is not None:
        cfg.segment_names = [str(n) for n in doc["segment_names"]]
    return cfg


def load_config(path) -> SiteConfig:
    if path is None:
        return SiteConfig()
    return parse_config(read_json(path))
