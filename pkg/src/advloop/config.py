"""Harness configuration: defaults plus TOML/JSON overrides.

File sections: [adversary], [limits], [metrics.weights], [protocol]. Every
value is optional; unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .adversary import AdversaryConfig
from .dynamics import KinematicLimits
from .metrics import MetricWeights


@dataclass(frozen=True)
class ProtocolConfig:
    timeout_s: float = 10.0
    connect_timeout_s: float = 5.0

    def __post_init__(self):
        if self.timeout_s <= 0 or self.connect_timeout_s <= 0:
            raise ValueError("timeouts must be positive")


@dataclass(frozen=True)
class HarnessConfig:
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    weights: MetricWeights = field(default_factory=MetricWeights)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    ttc_horizon: float = 3.0
    off_route_m: float = 10.0
    rc_complete: float = 0.999

    def snapshot(self) -> dict:
        """Deterministic dict recorded in every report."""
        return {
            "limits": {
                "a_max": self.limits.a_max,
                "a_min": self.limits.a_min,
                "yaw_rate_max": self.limits.yaw_rate_max,
                "j_max": self.limits.j_max,
            },
            "weights": {
                "ep": self.weights.ep,
                "ttc": self.weights.ttc,
                "comfort": self.weights.comfort,
            },
            "adversary": {
                "gamma": self.adversary.gamma,
                "w_c": self.adversary.w_c,
                "w_j": self.adversary.w_j,
                "horizon_steps": self.adversary.horizon_steps,
                "near_miss_d0": self.adversary.near_miss_d0,
                "k_candidates": self.adversary.k_candidates,
                "prior_lambda": self.adversary.prior_lambda,
                "adversary_id": self.adversary.adversary_id,
            },
            "protocol": {
                "timeout_s": self.protocol.timeout_s,
                "connect_timeout_s": self.protocol.connect_timeout_s,
            },
            "ttc_horizon": self.ttc_horizon,
            "off_route_m": self.off_route_m,
            "rc_complete": self.rc_complete,
        }


def _build(cls, section: dict, name: str):
    valid = set(cls.__dataclass_fields__)
    unknown = set(section) - valid
    if unknown:
        raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return cls(**section)


def load_config(path: Optional[Union[str, Path]] = None) -> HarnessConfig:
    """Defaults, optionally overridden by a .toml or .json file."""
    if path is None:
        return HarnessConfig()
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)

    known = {"adversary", "limits", "metrics", "protocol", "ttc_horizon", "off_route_m", "rc_complete"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")

    metrics_section = data.get("metrics", {})
    if set(metrics_section) - {"weights"}:
        raise ValueError("the [metrics] section only supports [metrics.weights]")
    return HarnessConfig(
        limits=_build(KinematicLimits, data.get("limits", {}), "limits"),
        weights=_build(MetricWeights, metrics_section.get("weights", {}), "metrics.weights"),
        adversary=_build(AdversaryConfig, data.get("adversary", {}), "adversary"),
        protocol=_build(ProtocolConfig, data.get("protocol", {}), "protocol"),
        ttc_horizon=float(data.get("ttc_horizon", 3.0)),
        off_route_m=float(data.get("off_route_m", 10.0)),
        rc_complete=float(data.get("rc_complete", 0.999)),
    )
