"""Run configuration: a JSON document with sections model, plan, data, pretrain, train and eval.

Every field is optional. :func:`resolve` fills defaults, rejects unknown keys
and type-checks values; the resolved snapshot re-resolves to itself.
"""

from __future__ import annotations

import copy
import json
from importlib import resources

from .errors import ConfigError

DEFAULTS: dict[str, dict] = {
    "model": {
        "vocab_size": 257,
        "model_dim": 32,
        "num_heads": 2,
        "num_layers": 2,
        "mlp_ratio": 4,
        "rotary_base": 10000.0,
        "max_eval_positions": 1024,
        "tie_head": True,
    },
    "plan": {
        "kind": "endprompt",
        "a": 120,
        "L": 1024,
        "L_pretrain": 128,
        "s": None,  # None means max(1, L / L_pretrain)
        "pose_chunks": 2,
    },
    "data": {
        "corpus": "synthetic",  # or a path to a byte file
        "corpus_seed": 0,
        "n_samples": 256,
        "cues": "desk",  # "desk" or "default"
        "fixed_cue": None,  # a cue id, or None to sample per sample
        "prompt_weight": 0.1,
        "context_weight": 1.0,
        "episode_len": None,  # synthetic episode length; None means L_pretrain
        "copy_fraction": 0.0,
    },
    "pretrain": {
        "lr": 3e-3,
        "warmup_steps": 20,
        "steps": 4000,
        "batch_size": 16,
        "grad_clip": 1.0,
        "filler_weight": 1.0,  # loss weight of targets outside a recall answer
    },
    "train": {
        "lr": 3e-4,
        "warmup_steps": 20,
        "max_steps": 200,
        "batch_size": 8,
        "beta1": 0.9,
        "beta2": 0.95,
        "grad_clip": None,
        "log_every": 0,
    },
    "eval": {
        "T_eval": 1024,
        "n_tasks": 200,
        "depth_fraction": 0.0,
        "key_len": 2,
        "value_len": 2,
        "batch_size": 8,
        "buckets": "plan",  # "plan" buckets from the training plan, "single" one bucket
    },
}

_NULLABLE = {("plan", "s"), ("data", "fixed_cue"), ("data", "episode_len"), ("train", "grad_clip"), ("pretrain", "grad_clip")}
_INTS = {("data", "episode_len")}
_CHOICES = {
    ("plan", "kind"): ("endprompt", "pose", "full"),
    ("data", "cues"): ("desk", "default"),
    ("eval", "buckets"): ("plan", "single"),
}


def _check_value(section: str, key: str, value):
    default = DEFAULTS[section][key]
    if value is None:
        if (section, key) in _NULLABLE:
            return None
        raise ConfigError(f"{section}.{key} may not be null")
    if (section, key) in _CHOICES and value not in _CHOICES[(section, key)]:
        raise ConfigError(f"{section}.{key} must be one of {_CHOICES[(section, key)]}, got {value!r}")
    if (section, key) == ("data", "fixed_cue") or (section, key) == ("data", "corpus"):
        if not isinstance(value, str):
            raise ConfigError(f"{section}.{key} must be a string")
        return value
    if (section, key) in _INTS:
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f"{section}.{key} must be a positive integer, got {value!r}")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return value
    if isinstance(default, float) or default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{section}.{key} must be a string")
        return value
    raise ConfigError(f"{section}.{key}: unsupported value {value!r}")


def resolve(doc: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then ``doc``, then ``overrides`` (``{"section.key": value}``)."""
    doc = {} if doc is None else doc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    out = copy.deepcopy(DEFAULTS)
    for section, body in doc.items():
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        bad = set(body) - set(DEFAULTS[section])
        if bad:
            raise ConfigError(f"unknown key(s) in {section}: {sorted(bad)}")
        for key, value in body.items():
            out[section][key] = _check_value(section, key, value)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"unknown setting {dotted!r}")
        out[section][key] = _check_value(section, key, value)
    return out


def scale(cfg: dict) -> float:
    """Explicit ``plan.s``, else ``L / L_pretrain`` floored at 1 (no compression below the pretrained range)."""
    plan = cfg["plan"]
    return plan["s"] if plan["s"] is not None else max(1.0, plan["L"] / plan["L_pretrain"])


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def bundled(name: str) -> dict:
    """A config shipped with the package, e.g. ``"smoke"``."""
    try:
        text = resources.files("endprompt_lab").joinpath("configs", f"{name}.json").read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"no bundled config named {name!r}") from exc
    return json.loads(text)
