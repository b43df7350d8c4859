"""Experiment configuration: JSON file <-> validated dataclasses."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .learners import DecaySchedule, EAPartition
from .mlp import BackpropParams
from .sim import LANES, CarGenParams, QualityParams, SignalPlan

ALGORITHMS = ("RW", "SA", "EA", "QL", "HEU")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key."""


# Periods divide both the full epoch (5000 turns) and the desk epoch (1000
# turns) so every epoch sees the same demand pattern.
DEFAULT_LANES = {
    "N": {"initial_delay": 100, "period": 500, "min_prob": 0.1, "max_prob": 0.3},
    "S": {"initial_delay": 250, "period": 250, "min_prob": 0.01, "max_prob": 0.1},
    "E": {"initial_delay": 50, "period": 200, "min_prob": 0.05, "max_prob": 0.2},
    "W": {"initial_delay": 1000, "period": 1000, "min_prob": 0.01, "max_prob": 0.3},
}

DEFAULTS = {
    "seed": 0,
    "epochs": 1600,
    "advice": True,
    "representation": "count",
    "agents": list(ALGORITHMS),
    "scenario": {
        "lanes": DEFAULT_LANES,
        "incoming": 60,
        "crossing": 1,
        "outgoing": 10,
        "yellow": 10,
        "cycle_length": 100,
        "cycles_per_epoch": 50,
        "quality": {"lifemax": 300.0, "steepness": 10.0, "midpoint": 0.5},
    },
    "learners": {
        "backprop": {"learning_rate": 0.01, "momentum": 0.5},
        "RW": {"disturbance": {"value": 0.6, "factor": 0.99, "floor": 0.01, "interval": 5}},
        "SA": {
            "disturbance": {"value": 0.6, "factor": 0.99, "floor": 0.01, "interval": 5},
            "temperature": {"value": 0.5, "factor": 0.99, "floor": 0.001, "interval": 5},
        },
        "EA": {
            "disturbance": {"value": 0.6, "factor": 0.99, "floor": 0.01, "interval": 5},
            "partition": {"selected": 7, "elite": 3, "mutated": 15, "recombined": 2},
        },
        "QL": {
            "alpha": {"value": 0.6, "factor": 0.99, "floor": 0.012, "interval": 5},
            "temperature": {"value": 0.5, "factor": 0.99, "floor": 0.01, "interval": 5},
            "discount": 0.7,
            "action_step": 0.05,
            "g_max": 1.0,
        },
    },
    "advice_params": {"ban_horizon": 5, "discount": 0.8, "ql_reward": None},
    "output_dir": "runs",
}

PRESETS = {
    "full": {},
    "desk": {"epochs": 100, "scenario": {"cycles_per_epoch": 10}},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(base[key], dict) and key != "lanes":
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected a mapping")
            out[key] = _merge(base[key], val, where + ".")
        elif key == "lanes":
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected a mapping")
            lanes = copy.deepcopy(base[key])
            for lane, params in val.items():
                if lane not in LANES:
                    raise ConfigError(f"{where}.{lane}: unknown lane")
                lanes[lane] = {**lanes[lane], **params}
            out[key] = lanes
        else:
            out[key] = copy.deepcopy(val)
    return out


def _build(key: str, cls, params: dict):
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


@dataclass
class ScenarioConfig:
    lanes: tuple[CarGenParams, ...]
    quality: QualityParams
    incoming: int = 60
    crossing: int = 1
    outgoing: int = 10
    yellow: int = 10
    cycle_length: int = 100
    cycles_per_epoch: int = 50

    def plan(self, g: float) -> SignalPlan:
        return SignalPlan(g, self.yellow, self.cycle_length)


@dataclass
class ExperimentConfig:
    raw: dict = field(repr=False)
    scenario: ScenarioConfig = None

    def __post_init__(self):
        self.validate()

    # flat accessors for the common fields
    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def epochs(self) -> int:
        return self.raw["epochs"]

    @property
    def advice(self) -> bool:
        return self.raw["advice"]

    @property
    def representation(self) -> str:
        return self.raw["representation"]

    @property
    def agents(self) -> list[str]:
        return self.raw["agents"]

    @property
    def learners(self) -> dict:
        return self.raw["learners"]

    @property
    def advice_params(self) -> dict:
        return self.raw["advice_params"]

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    def validate(self):
        r = self.raw
        if not isinstance(r["seed"], int) or r["seed"] < 0:
            raise ConfigError("seed: must be a non-negative integer")
        if not isinstance(r["epochs"], int) or r["epochs"] < 1:
            raise ConfigError("epochs: must be a positive integer")
        if not isinstance(r["advice"], bool):
            raise ConfigError("advice: must be true or false")
        if r["representation"] not in ("count", "count_time"):
            raise ConfigError("representation: must be 'count' or 'count_time'")
        for a in r["agents"]:
            if a not in ALGORITHMS:
                raise ConfigError(f"agents: unknown algorithm {a!r}")
        if not r["agents"]:
            raise ConfigError("agents: roster is empty")

        sc = r["scenario"]
        lanes = tuple(_build(f"scenario.lanes.{ln}", CarGenParams, sc["lanes"][ln]) for ln in LANES)
        quality = _build("scenario.quality", QualityParams, sc["quality"])
        for key in ("incoming", "crossing", "outgoing", "cycle_length", "cycles_per_epoch"):
            if not isinstance(sc[key], int) or sc[key] < 1:
                raise ConfigError(f"scenario.{key}: must be a positive integer")
        if not isinstance(sc["yellow"], int) or sc["yellow"] < 0:
            raise ConfigError("scenario.yellow: must be a non-negative integer")
        if 2 * sc["yellow"] >= sc["cycle_length"]:
            raise ConfigError("scenario.yellow: two yellow phases must fit inside the cycle")
        geometry = {k: v for k, v in sc.items() if k not in ("lanes", "quality")}
        self.scenario = ScenarioConfig(lanes=lanes, quality=quality, **geometry)

        ln = r["learners"]
        _build("learners.backprop", BackpropParams, ln["backprop"])
        for algo, blocks in (("RW", ("disturbance",)), ("SA", ("disturbance", "temperature")),
                             ("EA", ("disturbance",)), ("QL", ("alpha", "temperature"))):
            for b in blocks:
                _build(f"learners.{algo}.{b}", DecaySchedule, ln[algo][b])
        for algo in ("SA", "QL"):
            if ln[algo]["temperature"]["floor"] <= 0:
                raise ConfigError(f"learners.{algo}.temperature: floor must be positive")
        _build("learners.EA.partition", EAPartition, ln["EA"]["partition"])
        if not 0 <= ln["QL"]["discount"] < 1:
            raise ConfigError("learners.QL.discount: must be in [0, 1)")
        if not 0 < ln["QL"]["action_step"] <= ln["QL"]["g_max"] <= 1:
            raise ConfigError("learners.QL.action_step: need 0 < action_step <= g_max <= 1")

        ap = r["advice_params"]
        if not isinstance(ap["ban_horizon"], int) or ap["ban_horizon"] < 0:
            raise ConfigError("advice_params.ban_horizon: must be a non-negative integer")
        if not 0 < ap["discount"] < 1:
            raise ConfigError("advice_params.discount: must be in (0, 1)")
        qr = ap["ql_reward"]
        if qr is not None and (isinstance(qr, bool) or not isinstance(qr, (int, float)) or not 0 <= qr <= 1):
            raise ConfigError("advice_params.ql_reward: must be null or a number in [0, 1]")

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        return ExperimentConfig(_merge(self.raw, overrides))

    def dumps(self, with_output_dir: bool = True) -> str:
        raw = self.raw if with_output_dir else {k: v for k, v in self.raw.items() if k != "output_dir"}
        return json.dumps(raw, sort_keys=True)

    def dump(self, path):
        Path(path).write_text(json.dumps(self.raw, sort_keys=True, indent=2) + "\n")


def resolve(data: dict, preset: str | None = None) -> ExperimentConfig:
    """Apply ``data`` on top of the defaults (or a preset).

    A top-level ``"preset"`` key in ``data`` selects the preset unless one is
    passed explicitly.
    """
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a JSON object")
    data = dict(data)
    preset = preset or data.pop("preset", None)
    data.pop("preset", None)
    base = DEFAULTS
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}")
        base = _merge(DEFAULTS, PRESETS[preset])
    return ExperimentConfig(_merge(base, data))


def load_config(path, preset: str | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<parse>: {path}: {exc}") from None
    return resolve(data, preset)


def default_config(preset: str | None = None, **overrides) -> ExperimentConfig:
    return resolve(overrides, preset)

