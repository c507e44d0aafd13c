"""Flat ``key = value`` configuration files with dotted keys.

The grammar is the dotted-key subset of TOML::

    # comment
    model.id = "gaussian_mean"
    path.kind = "sinusoid"
    path.omega = 0.01
    tracker.alpha = "optimal"
    box.lo = -2.0

Values are TOML scalars or arrays. Command-line overrides ``key=value`` use the
same value syntax, except that a bare word is read as a string.
"""

import hashlib
import json
import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .expfam import build_model
from .paths import DriftPath
from .sets import EuclideanBall, FeasibleBox

DEFAULTS = {
    "model.id": None,
    "model.variance": 1.0,
    "box.lo": -2.0,
    "box.hi": 2.0,
    "path.kind": "constant",
    "path.k": None,
    "path.center": 0.0,
    "path.amplitude": 0.0,
    "path.omega": 0.0,
    "path.jump_time": 0,
    "path.jump_size": 0.0,
    "path.seed": 0,
    "path.step_scale": None,
    "tracker.alpha": "optimal",
    "tracker.lambda1": None,
    "tracker.projection": "none",
    "tracker.ball_center": 0.0,
    "tracker.ball_radius": 1.0,
    "experiment.replications": 1000,
    "experiment.horizon": 2000,
    "experiment.tail_window": None,
    "experiment.seed": 0,
    "experiment.resolution": 1024,
    "bound.ell": None,
    "bound.lip": None,
    "bound.k": None,
    "bound.d": None,
    "surface.k": 1.0,
    "surface.ell_min": 0.1,
    "surface.ell_max": 1000.0,
    "surface.n_ell": 200,
    "surface.gap_min": 0.0,
    "surface.gap_max": 100.0,
    "surface.n_gap": 200,
    "surface.raw": False,
    "check.n_samples": 100_000,
    "check.grid_points": 11,
    "check.fd_points": 100,
    "check.replications": 10_000,
    "check.horizon": 500,
    "check.drift_horizon": 100_000,
}


class ConfigError(ValueError):
    """Malformed configuration; the CLI maps it to exit status 2."""


def _flatten(tree, prefix=""):
    flat = {}
    for key, value in tree.items():
        full = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, full + "."))
        else:
            flat[full] = value
    return flat


def parse_text(text: str) -> dict:
    try:
        return _flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"malformed config: {err}") from None


def parse_override(item: str):
    key, sep, raw = item.partition("=")
    key, raw = key.strip(), raw.strip()
    if not sep or not key:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def load(path=None, overrides=(), require_model: bool = True) -> dict:
    """Merge defaults, the config file at ``path`` and ``overrides``.

    Unknown keys raise :class:`ConfigError`.
    """
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_text(fh.read()))
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    for item in overrides:
        key, value = parse_override(item)
        values[key] = value
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {**DEFAULTS, **values}
    if require_model and not cfg["model.id"]:
        raise ConfigError("model.id is required")
    return cfg


def config_hash(cfg: dict) -> str:
    """Short SHA-256 of the canonical JSON form of ``cfg``."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_model_from(cfg):
    params = {"variance": cfg["model.variance"]} if cfg["model.id"] == "gaussian_mean" else {}
    try:
        return build_model(cfg["model.id"], **params)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None


def build_box(cfg) -> FeasibleBox:
    try:
        return FeasibleBox(cfg["box.lo"], cfg["box.hi"])
    except ValueError as err:
        raise ConfigError(str(err)) from None


def build_path(cfg, box: FeasibleBox) -> DriftPath:
    kind = cfg["path.kind"]
    k = cfg["path.k"]
    if k is None:
        if kind == "sinusoid":
            amp = np.broadcast_to(np.asarray(cfg["path.amplitude"], dtype=float), (box.dim,))
            k = float(np.linalg.norm(amp)) * abs(cfg["path.omega"])
        elif kind == "step_change":
            jump = np.broadcast_to(np.asarray(cfg["path.jump_size"], dtype=float), (box.dim,))
            k = float(np.linalg.norm(jump))
        elif kind == "constant":
            k = 0.0
        else:
            raise ConfigError("path.k is required for bounded_random_walk")
    try:
        return DriftPath(
            kind, box, k,
            center=cfg["path.center"],
            amplitude=cfg["path.amplitude"],
            omega=float(cfg["path.omega"]),
            jump_time=int(cfg["path.jump_time"]),
            jump_size=cfg["path.jump_size"],
            seed=int(cfg["path.seed"]),
            step_scale=cfg["path.step_scale"],
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None


def build_projection(cfg, box: FeasibleBox):
    kind = cfg["tracker.projection"]
    if kind == "none":
        return None
    if kind == "box":
        return box
    if kind == "ball":
        try:
            return EuclideanBall(cfg["tracker.ball_center"], cfg["tracker.ball_radius"])
        except ValueError as err:
            raise ConfigError(str(err)) from None
    raise ConfigError(f"tracker.projection must be none, box or ball, got {kind!r}")
