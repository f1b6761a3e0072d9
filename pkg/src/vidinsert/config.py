"""Sectioned key=value run configuration with strict unknown-key rejection.

Defaults below are the documented defaults for every command; a config file
only needs the keys it overrides. Booleans accept the usual INI spellings.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .validation import ValidationError

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "data": {
        "n_videos": (int, 8),
        "n_frames": (int, 24),
        "frame_height": (int, 96),
        "frame_width": (int, 128),
        "n_objects": (int, 2),
    },
    "patch": {
        "height": (int, 128),
        "width": (int, 64),
    },
    "mask": {
        "frac_w": (float, 0.5),
        "frac_h": (float, 0.75),
    },
    "model": {
        "base_filters": (int, 64),
        "n_levels": (int, 4),
        "history_len": (int, 2),
        "clip_len": (int, 6),
        "crop_margin": (float, 0.1),
    },
    "train": {
        "lr": (float, 2e-4),
        "beta1": (float, 0.5),
        "beta2": (float, 0.999),
        "batch_size": (int, 1),
        "lambda_fake": (float, 0.1),
        "noise_std": (float, 0.01),
        "iters": (int, 1000),
        "seq_len": (int, 8),
    },
    "insert": {
        "object_id": (int, 0),       # 0: first track of the source video
        "source_index": (int, 0),
        "target_index": (int, 1),
        "frame_start": (int, 0),
        "frame_end": (int, 8),
        "static": (bool, False),
        "feather_px": (int, 2),
    },
    "eval": {
        "n_samples": (int, 100),
        "iou_threshold": (float, 0.5),
        "detector": (str, "sprite"),
        "feather_px": (int, 2),
    },
}


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def get(self, section: str, key: str):
        try:
            return self.values[section][key]
        except KeyError:
            raise ValidationError(f"unknown config key [{section}] {key}") from None

    def section(self, name: str) -> dict:
        if name not in self.values:
            raise ValidationError(f"unknown config section [{name}]")
        return dict(self.values[name])


def _coerce(section: str, key: str, raw: str, typ):
    try:
        if typ is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return typ(raw)
    except ValueError as exc:
        raise ValidationError(f"config key [{section}] {key}: {exc}") from None


def load_run_config(path=None) -> RunConfig:
    """Load a config file on top of the documented defaults.

    Unknown sections or keys raise a :class:`ValidationError` naming them.
    """
    values = {sec: {k: default for k, (_, default) in keys.items()} for sec, keys in SCHEMA.items()}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"config file {path} does not exist")
        parser = configparser.ConfigParser()
        parser.read(path, encoding="utf-8")
        for section in parser.sections():
            if section not in SCHEMA:
                raise ValidationError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ValidationError(f"unknown config key [{section}] {key}")
                values[section][key] = _coerce(section, key, raw, SCHEMA[section][key][0])
    return RunConfig(values=values)
