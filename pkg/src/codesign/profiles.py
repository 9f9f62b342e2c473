"""Device, link, model and penalty-table descriptions.

Everything downstream consumes only the types defined here.  All quantities
are raw SI numbers: FLOPs, bytes, bytes/s, seconds.  Profiles are immutable
after loading and safe to share across worker threads.

Config files are JSON with top-level keys ``devices``, ``link``, ``model``,
``penalties`` and ``lambda1`` (see README for the full schema).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import (
    CodesignError,
    InvalidConfig,
    InvariantViolation,
    MissingField,
    NonPositiveQuantity,
    UnknownStrategyName,
)


class FusionStrategy(Enum):
    """Which branches of a re-parameterizable block stay active at inference.

    Every block keeps its 3x3 convolution; the identity shortcut and the 1x1
    convolution can each be retained or folded away.  Declaration order is
    the canonical tie-break order used by the planner.
    """

    CONV3 = "conv3"
    CONV3_SKIP = "conv3+skip"
    CONV3_CONV1 = "conv3+conv1"
    CONV3_SKIP_CONV1 = "conv3+skip+conv1"


STRATEGY_RANK = {s: i for i, s in enumerate(FusionStrategy)}

# The structure with every branch retained; used as the canonical measure
# for cut fractions and as the zero-penalty reference in penalty tables.
FULL_STRUCTURE = FusionStrategy.CONV3_SKIP_CONV1


def parse_strategy(name: str, where: str = "strategy") -> FusionStrategy:
    try:
        return FusionStrategy(name)
    except ValueError:
        raise UnknownStrategyName(f"{where}: {name!r}") from None


@dataclass(frozen=True)
class DeviceProfile:
    """One hardware platform: peak compute (FLOP/s), memory bandwidth
    (bytes/s) and the fraction of peak actually achievable."""

    name: str
    peak_compute: float
    mem_bandwidth: float
    utilization: float = 1.0

    def __post_init__(self):
        if self.peak_compute <= 0:
            raise NonPositiveQuantity("peak_compute")
        if self.mem_bandwidth <= 0:
            raise NonPositiveQuantity("mem_bandwidth")
        if not 0 < self.utilization <= 1:
            raise InvariantViolation("utilization must be in (0, 1]")


@dataclass(frozen=True)
class LinkProfile:
    """Transport between the two devices: bandwidth in bytes/s plus an
    additive fixed latency in seconds (e.g. ping)."""

    bandwidth: float
    fixed_latency: float = 0.0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise NonPositiveQuantity("bandwidth")
        if self.fixed_latency < 0:
            raise NonPositiveQuantity("fixed_latency")


@dataclass(frozen=True)
class LayerProfile:
    """Per-layer cost record.

    ``flops_by_strategy`` / ``bytes_by_strategy`` give the work and byte
    traffic of the layer under each fusion strategy; non-fusible layers
    carry identical costs for every strategy.  ``output_activation_bytes``
    is what crosses the link if the model is cut right after this layer.
    """

    index: int
    flops_by_strategy: dict[FusionStrategy, float]
    bytes_by_strategy: dict[FusionStrategy, float]
    output_activation_bytes: float
    fusible: bool

    def __post_init__(self):
        for label, table in (("flops_by_strategy", self.flops_by_strategy),
                             ("bytes_by_strategy", self.bytes_by_strategy)):
            for strategy in FusionStrategy:
                if strategy not in table:
                    raise MissingField(f"{label}[{strategy.value}]")
                if table[strategy] <= 0:
                    raise NonPositiveQuantity(f"{label}[{strategy.value}]")
        if self.output_activation_bytes < 0:
            raise NonPositiveQuantity("output_activation_bytes")
        if self.fusible:
            f = self.flops_by_strategy
            chains = (
                (FusionStrategy.CONV3, FusionStrategy.CONV3_SKIP, FULL_STRUCTURE),
                (FusionStrategy.CONV3, FusionStrategy.CONV3_CONV1, FULL_STRUCTURE),
            )
            for chain in chains:
                for a, b in zip(chain, chain[1:]):
                    if f[a] > f[b]:
                        raise InvariantViolation(
                            f"flops_by_strategy[{a.value}] > flops_by_strategy[{b.value}]")
        else:
            for label, table in (("flops_by_strategy", self.flops_by_strategy),
                                 ("bytes_by_strategy", self.bytes_by_strategy)):
                if len(set(table.values())) != 1:
                    raise InvariantViolation(
                        f"{label} must be identical across strategies for a non-fusible layer")


@dataclass(frozen=True)
class ModelProfile:
    name: str
    layers: tuple[LayerProfile, ...]

    def __post_init__(self):
        if not self.layers:
            raise MissingField("layers")
        for position, layer in enumerate(self.layers):
            if layer.index != position:
                raise InvariantViolation(
                    f"layers[{position}].index is {layer.index}; layers must be "
                    "listed in order and indexed consecutively from 0")

    @property
    def boundaries(self) -> range:
        """Interior cut positions: cutting at k puts layers [0, k) on the
        first device and [k, n) on the second."""
        return range(1, len(self.layers))


@dataclass(frozen=True)
class AccuracyPenaltyTable:
    """Accuracy points lost per sub-model (1 or 2) and fusion strategy.

    Retaining every branch costs nothing; dropping branches can only hurt,
    and dropping both optional branches hurts at least as much as dropping
    either one.
    """

    penalties: dict[int, dict[FusionStrategy, float]]

    def __post_init__(self):
        for sub in (1, 2):
            if sub not in self.penalties:
                raise MissingField(f"penalties[{sub}]")
            table = self.penalties[sub]
            for strategy in FusionStrategy:
                if strategy not in table:
                    raise MissingField(f"penalties[{sub}][{strategy.value}]")
                if table[strategy] < 0:
                    raise NonPositiveQuantity(f"penalties[{sub}][{strategy.value}]")
            if table[FULL_STRUCTURE] != 0:
                raise InvariantViolation(
                    f"penalties[{sub}][{FULL_STRUCTURE.value}] must be 0")
            for two_branch in (FusionStrategy.CONV3_SKIP, FusionStrategy.CONV3_CONV1):
                if table[FusionStrategy.CONV3] < table[two_branch]:
                    raise InvariantViolation(
                        f"penalties[{sub}][{FusionStrategy.CONV3.value}] must be >= "
                        f"penalties[{sub}][{two_branch.value}]")

    def penalty(self, sub_model: int, strategy: FusionStrategy) -> float:
        return self.penalties[sub_model][strategy]


@dataclass(frozen=True)
class Config:
    """A fully validated planning problem: devices (first = terminal,
    second = edge server), the link between them, the model, the accuracy
    penalty table, and the latency/accuracy trade-off weight."""

    devices: tuple[DeviceProfile, ...]
    link: LinkProfile
    model: ModelProfile
    penalties: AccuracyPenaltyTable
    lambda1: float

    def __post_init__(self):
        if len(self.devices) < 2:
            raise MissingField("devices (need at least a terminal and an edge device)")
        if len(self.model.layers) < 2:
            raise InvariantViolation("model.layers must contain at least 2 layers")
        if self.lambda1 < 0:
            raise NonPositiveQuantity("lambda1")

    @property
    def device1(self) -> DeviceProfile:
        return self.devices[0]

    @property
    def device2(self) -> DeviceProfile:
        return self.devices[1]


# ---------------------------------------------------------------------------
# Parsing / serialization
# ---------------------------------------------------------------------------

def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise MissingField(f"{where}.{key}" if where else key)
    return mapping[key]


def _rescope(exc: CodesignError, where: str) -> CodesignError:
    return type(exc)(f"{where}.{exc}")


def _strategy_map(raw, where) -> dict[FusionStrategy, float]:
    if not isinstance(raw, dict):
        raise MissingField(where)
    return {parse_strategy(name, where): float(value) for name, value in raw.items()}


def device_from_dict(raw: dict, where: str = "device") -> DeviceProfile:
    try:
        return DeviceProfile(
            name=str(_require(raw, "name", where)),
            peak_compute=float(_require(raw, "peak_compute", where)),
            mem_bandwidth=float(_require(raw, "mem_bandwidth", where)),
            utilization=float(raw.get("utilization", 1.0)),
        )
    except (NonPositiveQuantity, InvariantViolation) as exc:
        raise _rescope(exc, where) from None


def _link_from_dict(raw: dict, where: str = "link") -> LinkProfile:
    try:
        return LinkProfile(
            bandwidth=float(_require(raw, "bandwidth", where)),
            fixed_latency=float(raw.get("fixed_latency", 0.0)),
        )
    except (NonPositiveQuantity, InvariantViolation) as exc:
        raise _rescope(exc, where) from None


def _layer_from_dict(raw: dict, where: str) -> LayerProfile:
    try:
        return LayerProfile(
            index=int(_require(raw, "index", where)),
            flops_by_strategy=_strategy_map(
                _require(raw, "flops_by_strategy", where), f"{where}.flops_by_strategy"),
            bytes_by_strategy=_strategy_map(
                _require(raw, "bytes_by_strategy", where), f"{where}.bytes_by_strategy"),
            output_activation_bytes=float(_require(raw, "output_activation_bytes", where)),
            fusible=bool(_require(raw, "fusible", where)),
        )
    except (NonPositiveQuantity, InvariantViolation, MissingField) as exc:
        message = str(exc)
        if message.startswith(where):
            raise
        raise _rescope(exc, where) from None


def model_from_dict(raw: dict, where: str = "model") -> ModelProfile:
    layers_raw = _require(raw, "layers", where)
    layers = tuple(
        _layer_from_dict(layer, f"{where}.layers[{i}]") for i, layer in enumerate(layers_raw)
    )
    return ModelProfile(name=str(_require(raw, "name", where)), layers=layers)


def _penalties_from_dict(raw: dict, where: str = "penalties") -> AccuracyPenaltyTable:
    if not isinstance(raw, dict):
        raise MissingField(where)
    penalties = {}
    for key, table in raw.items():
        try:
            sub = int(key)
        except ValueError:
            raise InvariantViolation(f"{where} keys must be sub-model ids 1 or 2, got {key!r}") from None
        penalties[sub] = _strategy_map(table, f"{where}[{key}]")
    return AccuracyPenaltyTable(penalties=penalties)


def config_from_dict(raw: dict) -> Config:
    devices = tuple(
        device_from_dict(d, f"devices[{i}]") for i, d in enumerate(_require(raw, "devices", ""))
    )
    return Config(
        devices=devices,
        link=_link_from_dict(_require(raw, "link", "")),
        model=model_from_dict(_require(raw, "model", "")),
        penalties=_penalties_from_dict(_require(raw, "penalties", "")),
        lambda1=float(_require(raw, "lambda1", "")),
    )


def config_to_dict(config: Config) -> dict:
    return {
        "devices": [
            {
                "name": d.name,
                "peak_compute": d.peak_compute,
                "mem_bandwidth": d.mem_bandwidth,
                "utilization": d.utilization,
            }
            for d in config.devices
        ],
        "link": {
            "bandwidth": config.link.bandwidth,
            "fixed_latency": config.link.fixed_latency,
        },
        "model": {
            "name": config.model.name,
            "layers": [
                {
                    "index": layer.index,
                    "flops_by_strategy": {s.value: v for s, v in layer.flops_by_strategy.items()},
                    "bytes_by_strategy": {s.value: v for s, v in layer.bytes_by_strategy.items()},
                    "output_activation_bytes": layer.output_activation_bytes,
                    "fusible": layer.fusible,
                }
                for layer in config.model.layers
            ],
        },
        "penalties": {
            str(sub): {s.value: v for s, v in table.items()}
            for sub, table in sorted(config.penalties.penalties.items())
        },
        "lambda1": config.lambda1,
    }


def _read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfig(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: {exc}") from None


def load_config(path) -> Config:
    """Read and validate a full planning config from a JSON file."""
    return config_from_dict(_read_json(path))


def load_device(path) -> DeviceProfile:
    """Read a single-device spec file (the fixtures under fixtures/devices/)."""
    return device_from_dict(_read_json(path), Path(path).stem)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def segment_load(model: ModelProfile, start: int, stop: int,
                 strategy: FusionStrategy) -> tuple[float, float]:
    """(FLOPs, bytes) of layers[start:stop] under one strategy."""
    flops = sum(layer.flops_by_strategy[strategy] for layer in model.layers[start:stop])
    data = sum(layer.bytes_by_strategy[strategy] for layer in model.layers[start:stop])
    return flops, data


def total_load(model: ModelProfile, strategy: FusionStrategy) -> tuple[float, float]:
    """Whole-model (FLOPs, bytes) under one strategy."""
    return segment_load(model, 0, len(model.layers), strategy)
