"""Scenario bundles: resolving file references, defaults, dotted-path overrides."""

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

from .engine import MS, SECOND

DATA_PACKAGE = "tsnsim.data"

DEFAULTS = {
    "seed": 42,
    "runtime_ns": 10 * SECOND,
    "faults": None,
    "redundancy": [],
    "focus_stream": None,
    "traffic": {"start_ns": 50 * MS},
    "timesync": {"sync_interval_ns": 125 * MS, "drift_ppm_bound": 100.0, "drift_enabled": True,
                 "master": "masterClock"},
    "switch": {"queue_capacity": 100, "processing_delay_ns": 1_000, "idle_slope_bps": {}},
    "switches": {},
    "host": {"queue_capacity": 100},
    "metrics": {"window_ns": 100 * MS},
}

REFERENCE_KEYS = ("topology", "streams", "faults")


class ConfigError(ValueError):
    """Invalid scenario; ``problems`` lists every violation found."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [message])


def data_root():
    return resources.files(DATA_PACKAGE)


def bundled_scenarios():
    """Name -> bundle document for every scenario shipped with the package."""
    out = {}
    for entry in sorted(data_root().joinpath("scenarios").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            doc = json.loads(entry.read_text())
            if "topology" in doc:
                out[doc["name"]] = doc
    return out


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _load_reference(ref, base_dir):
    if ref is None or isinstance(ref, dict):
        return ref
    if base_dir is not None:
        candidate = Path(base_dir) / ref
        if candidate.exists():
            return _read_json(candidate)
    bundled = data_root().joinpath(ref)
    if bundled.is_file():
        return json.loads(bundled.read_text())
    if Path(ref).exists():
        return _read_json(ref)
    raise ConfigError(f"cannot resolve reference {ref!r}")


def deep_merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve(scenario, overrides=None):
    """Turn a bundle name, path or dict into one self-contained config dict."""
    base_dir = None
    if isinstance(scenario, dict):
        doc = scenario
    else:
        bundles = bundled_scenarios()
        if scenario in bundles:
            doc = bundles[scenario]
        elif Path(scenario).exists():
            doc = _read_json(scenario)
            base_dir = Path(scenario).parent
        else:
            raise ConfigError(f"unknown scenario {scenario!r} (bundled: {', '.join(bundles)})")
    cfg = deep_merge(DEFAULTS, doc)
    for key in REFERENCE_KEYS:
        cfg[key] = _load_reference(cfg.get(key), base_dir)
    if cfg.get("topology") is None or cfg.get("streams") is None:
        raise ConfigError("scenario needs both 'topology' and 'streams'")
    for item in overrides or []:
        apply_override(cfg, item)
    return cfg


def parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _descend(node, key):
    if isinstance(node, dict):
        if key in node:
            return node[key]
        for value in node.values():
            if isinstance(value, list):
                for item in value:
                    if isinstance(item, dict) and item.get("name") == key:
                        return item
        return None
    if isinstance(node, list):
        if key.isdigit() and int(key) < len(node):
            return node[int(key)]
        for item in node:
            if isinstance(item, dict) and item.get("name") == key:
                return item
    return None


def apply_override(cfg, item):
    """Apply one ``dotted.path=value``; list elements are addressed by their ``name``."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    path, raw = item.split("=", 1)
    keys = path.strip().split(".")
    node = cfg
    for key in keys[:-1]:
        nxt = _descend(node, key)
        if nxt is None:
            if isinstance(node, dict):
                nxt = node[key] = {}
            else:
                raise ConfigError(f"override path {path!r}: no element {key!r}")
        node = nxt
    last = keys[-1]
    value = parse_value(raw)
    if isinstance(node, dict):
        node[last] = value
    elif isinstance(node, list) and last.isdigit():
        node[int(last)] = value
    else:
        raise ConfigError(f"override path {path!r} does not name a settable field")
    return cfg


def content_hash(obj):
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def config_hashes(cfg):
    out = {key: content_hash(cfg.get(key)) for key in REFERENCE_KEYS + ("redundancy",)}
    out["config"] = content_hash(cfg)
    return out
