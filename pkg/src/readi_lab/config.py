"""Scenario files: JSON with defaults, dotted overrides and validation.

A scenario is a JSON object; every key is optional and falls back to
:data:`DEFAULTS`. ``pitch: null`` means one wavelength at the centre
frequency, ``pulse.sample_rate: null`` means eight samples per period.

Scene types
-----------
``points``   explicit ``positions`` [[x, z], ...] with optional ``reflectivity``
``speckle``  uniform scatterers over ``lateral`` x ``axial`` at ``density``
             per mm^2, minus circular ``cysts`` [{"center": [x, z], "radius": r}]

Both take a common ``velocity`` [vx, vz] (m/s), ``prf``, ``speed_of_sound``
and optional ``noise_snr_db``. Lengths are metres.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from . import simulate
from .analysis import RoiSpec, parse_keep
from .beamform import BeamformConfig, ImagingGrid
from .hadamard import GroupingScheme, InvalidRankError
from .motion import MotionConfig


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` names the offending dotted key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


DEFAULTS = {
    "name": "scenario",
    "seed": 0,
    "geometry": {"n_elements": 128, "pitch": None},
    "pulse": {"center_frequency": 4.3e6, "cycles": 2, "envelope": "rectangular", "sample_rate": None},
    "scene": {
        "type": "points",
        "positions": [[0.0, 0.015]],
        "reflectivity": None,
        "lateral": [-0.006, 0.006],
        "axial": [0.01, 0.022],
        "density": 4.0,
        "cysts": [],
        "velocity": [0.0, 0.0],
        "prf": 1000.0,
        "speed_of_sound": 1540.0,
        "noise_snr_db": None,
    },
    "grouping": {"S": 8, "Q": 16},
    "beamform": {"receive_fnumber": 1.0, "apodization_window": "rect", "cf_weighting": True,
                 "interpolation": "linear", "precision": "f32", "parallel": False},
    "grid": {"lateral": [-0.006, 0.006], "axial": [0.01, 0.022], "pixel_size": 5e-5},
    "motion": {"grid_spacing": 10, "ref_patch": 40, "search_margin": 36,
               "abs_peak_threshold": 0.255, "rel_peak_threshold": 110.5,
               "min_curvature": 0.0525, "reference_index": 0},
    "filter": {"keep": None, "n_ensembles": 1},
    "rois": [],
    "outputs": {"container": True, "pgm": True, "npy": True, "figures": True,
                "dynamic_range_db": 60.0},
}


def _merge(base: dict, extra: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ScenarioError(path, "unknown key")
        if isinstance(base[key], dict) and base[key] and isinstance(value, dict):
            out[key] = _merge(base[key], value, path + ".")
        elif isinstance(base[key], dict) and base[key] and not isinstance(value, dict):
            raise ScenarioError(path, "expected an object")
        else:
            out[key] = value
    return out


def parse_override(item: str) -> tuple[str, object]:
    """``key.sub=value``; the value is parsed as JSON when possible, else kept as text."""
    if "=" not in item:
        raise ScenarioError(item, "override must look like key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_override(cfg: dict, key: str, value) -> None:
    parts = key.split(".")
    node = cfg
    for depth, part in enumerate(parts[:-1]):
        if not isinstance(node, dict) or part not in node or not isinstance(node[part], dict):
            raise ScenarioError(".".join(parts[:depth + 1]), "unknown section")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ScenarioError(key, "unknown key")
    node[parts[-1]] = value


def resolve(raw: dict, overrides=(), seed: int | None = None) -> dict:
    """Defaults, then the scenario file, then ``--set`` overrides, then ``--seed``."""
    if not isinstance(raw, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    cfg = _merge(DEFAULTS, raw)
    for item in overrides:
        apply_override(cfg, *parse_override(item))
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def load(path, overrides=(), seed: int | None = None) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<file>", f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return resolve(raw, overrides, seed)


def _num(cfg: dict, dotted: str, positive: bool = False):
    node = cfg
    for p in dotted.split("."):
        node = node[p]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ScenarioError(dotted, f"expected a number, got {node!r}")
    if positive and node <= 0:
        raise ScenarioError(dotted, f"must be positive, got {node!r}")
    return node


@dataclass
class Scenario:
    """Library objects built from a resolved scenario dictionary."""

    config: dict
    geometry: simulate.ArrayGeometry
    pulse: simulate.PulseDefinition
    scene: simulate.ScattererScene
    scheme: GroupingScheme
    beamform: BeamformConfig
    precision: str
    grid: ImagingGrid
    motion: MotionConfig
    rois: list
    keep: set | None

    @property
    def name(self) -> str:
        return self.config["name"]

    @property
    def inside_rois(self) -> list:
        return [r for r in self.rois if r.role == "inside"]

    @property
    def background_rois(self) -> list:
        return [r for r in self.rois if r.role == "background"]


def build(cfg: dict) -> Scenario:
    """Validate ``cfg`` field by field and construct the library objects."""
    n = _num(cfg, "geometry.n_elements", True)
    f0 = _num(cfg, "pulse.center_frequency", True)
    c = _num(cfg, "scene.speed_of_sound", True)
    pitch = cfg["geometry"]["pitch"]
    pitch = c / f0 if pitch is None else _num(cfg, "geometry.pitch", True)
    try:
        geometry = simulate.ArrayGeometry(int(n), float(pitch))
    except ValueError as exc:
        raise ScenarioError("geometry", str(exc)) from None
    p = cfg["pulse"]
    try:
        pulse = simulate.PulseDefinition(float(f0), int(p["cycles"]), p["envelope"], p["sample_rate"])
    except (ValueError, TypeError) as exc:
        raise ScenarioError("pulse", str(exc)) from None

    g = cfg["grouping"]
    s, q = g["S"], g["Q"]
    if not isinstance(s, int) or not isinstance(q, int):
        raise ScenarioError("grouping", f"S and Q must be integers, got {s!r}, {q!r}")
    if s * q != geometry.n_elements:
        raise ScenarioError("grouping", f"S*Q = {s * q} does not match geometry.n_elements = {geometry.n_elements}")
    try:
        scheme = GroupingScheme(geometry.n_elements, s, q)
    except (InvalidRankError, ValueError) as exc:
        raise ScenarioError("grouping", str(exc)) from None

    sc = cfg["scene"]
    common = dict(speed_of_sound=float(c), prf=float(_num(cfg, "scene.prf", True)),
                  noise_snr_db=sc["noise_snr_db"], rng_seed=int(cfg["seed"]))
    velocity = sc["velocity"]
    if not isinstance(velocity, (list, tuple)) or len(velocity) != 2:
        raise ScenarioError("scene.velocity", "expected [vx, vz]")
    try:
        if sc["type"] == "points":
            scene = simulate.ScattererScene(sc["positions"], [velocity], sc["reflectivity"], **common)
        elif sc["type"] == "speckle":
            cysts = [((float(cy["center"][0]), float(cy["center"][1])), float(cy["radius"]))
                     for cy in sc["cysts"]]
            scene = simulate.speckle_scene(sc["lateral"], sc["axial"], float(sc["density"]),
                                           cysts=cysts, velocity=tuple(velocity), **common)
        else:
            raise ScenarioError("scene.type", f"must be 'points' or 'speckle', got {sc['type']!r}")
    except ScenarioError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ScenarioError("scene", str(exc)) from None

    b = cfg["beamform"]
    if b["precision"] not in ("f32", "f64"):
        raise ScenarioError("beamform.precision", f"must be 'f32' or 'f64', got {b['precision']!r}")
    try:
        bf = BeamformConfig(float(c), float(b["receive_fnumber"]), b["apodization_window"],
                            bool(b["cf_weighting"]), b["interpolation"], bool(b["parallel"]))
    except ValueError as exc:
        raise ScenarioError("beamform", str(exc)) from None

    gr = cfg["grid"]
    px = _num(cfg, "grid.pixel_size", True)
    try:
        grid = ImagingGrid(tuple(gr["lateral"]), tuple(gr["axial"]), (float(px), float(px)))
    except (ValueError, TypeError) as exc:
        raise ScenarioError("grid", str(exc)) from None

    m = cfg["motion"]
    try:
        mc = MotionConfig(**m)
    except (TypeError, ValueError) as exc:
        raise ScenarioError("motion", str(exc)) from None
    if not 0 <= mc.reference_index < scheme.n_groups:
        raise ScenarioError("motion.reference_index", f"must lie in 0..{scheme.n_groups - 1}")

    rois = []
    for k, r in enumerate(cfg["rois"]):
        try:
            roi = RoiSpec.from_dict(r)
            roi.mask(grid)
        except (ValueError, KeyError, TypeError) as exc:
            raise ScenarioError(f"rois[{k}]", str(exc)) from None
        rois.append(roi)

    keep = cfg["filter"]["keep"]
    if keep is not None:
        try:
            keep = parse_keep(keep) if isinstance(keep, str) else set(int(k) for k in keep)
        except (ValueError, TypeError) as exc:
            raise ScenarioError("filter.keep", str(exc)) from None
    n_ens = cfg["filter"]["n_ensembles"]
    if not isinstance(n_ens, int) or n_ens < 1:
        raise ScenarioError("filter.n_ensembles", "must be a positive integer")
    return Scenario(cfg, geometry, pulse, scene, scheme, bf, b["precision"], grid, mc, rois, keep)
