"""JSON <-> NodeConfig translation shared by scenario files and daemon configs.

JSON uses milliseconds for durations; NodeConfig uses microseconds.
"""

from __future__ import annotations

import dataclasses
from typing import Any, Mapping, Optional

from .crypto_suite import PowParams
from .relay import MILLISECOND, NodeConfig

# JSON key -> (NodeConfig field, scale to microseconds or None)
_FIELDS = {
    "max_message_age_ms": ("max_message_age", MILLISECOND),
    "future_skew_tolerance_ms": ("future_skew_tolerance", MILLISECOND),
    "seen_capacity": ("seen_capacity", None),
    "seen_retention_ms": ("seen_retention", MILLISECOND),
    "relay_delay_max_ms": ("relay_delay_max", MILLISECOND),
    "dummy_rate": ("dummy_rate", None),
    "echo_suppression": ("echo_suppression", None),
}

NODE_CONFIG_KEYS = frozenset(_FIELDS) | {"pow_difficulty_bits"}


def node_config_from_json(doc: Optional[Mapping[str, Any]], base: Optional[NodeConfig] = None) -> NodeConfig:
    """Overlay the keys in ``doc`` on ``base`` (default: NodeConfig()).

    If ``max_message_age_ms`` is raised above the retention without an
    explicit ``seen_retention_ms``, the retention follows it.
    """
    base = base or NodeConfig()
    doc = dict(doc or {})
    unknown = set(doc) - NODE_CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown node config keys: {sorted(unknown)}")
    changes: dict[str, Any] = {}
    if "pow_difficulty_bits" in doc:
        changes["pow"] = PowParams(int(doc["pow_difficulty_bits"]))
    for key, (name, scale) in _FIELDS.items():
        if key not in doc:
            continue
        value = doc[key]
        if scale is not None:
            value = int(round(float(value) * scale))
        elif name == "seen_capacity":
            value = int(value)
        elif name == "dummy_rate":
            value = float(value)
        elif name == "echo_suppression":
            value = bool(value)
        changes[name] = value
    age = changes.get("max_message_age", base.max_message_age)
    if "seen_retention" not in changes and age > base.seen_retention:
        changes["seen_retention"] = age
    return dataclasses.replace(base, **changes)


def node_config_to_json(cfg: NodeConfig) -> dict:
    out: dict[str, Any] = {"pow_difficulty_bits": cfg.pow.difficulty_bits}
    for key, (name, scale) in _FIELDS.items():
        value = getattr(cfg, name)
        out[key] = value / scale if scale else value
    return out
