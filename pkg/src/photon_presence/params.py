"""Experiment parameters, model identities and the JSON run configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Tuple

LOCATIONS = (1, 2, 3, 4, 5)


class ConfigError(ValueError):
    """Malformed configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentParams:
    """Physical and run parameters of the modulated interferometer.

    ``omegas`` are the angular modulation frequencies (s^-1) at the five
    locations L1..L5; ``ts_seconds`` is the width of one counting window.
    """

    epsilon: float = 1e-2
    ts_seconds: float = 1e-3
    omegas: Tuple[float, ...] = (110.0, 120.0, 130.0, 140.0, 150.0)
    ns: int = 5000
    n_windows: int = 500
    eta_present: bool = True
    third_order: bool = False

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not self.ts_seconds > 0:
            raise ValueError(f"ts_seconds must be positive, got {self.ts_seconds}")
        if len(self.omegas) != 5:
            raise ValueError("exactly five modulation frequencies are required")
        if any(w <= 0 for w in self.omegas):
            raise ValueError("modulation frequencies must be positive")
        if len(set(self.omegas)) != 5:
            raise ValueError("modulation frequencies must be mutually distinct")
        if int(self.ns) != self.ns or self.ns < 0:
            raise ValueError(f"ns must be a non-negative integer, got {self.ns}")
        if int(self.n_windows) != self.n_windows or self.n_windows < 1:
            raise ValueError(f"n_windows must be a positive integer, got {self.n_windows}")
        object.__setattr__(self, "ns", int(self.ns))
        object.__setattr__(self, "n_windows", int(self.n_windows))

    def omega(self, index: int) -> float:
        """Frequency at location ``index`` (1-based)."""
        return self.omegas[index - 1]

    def with_(self, **changes) -> "ExperimentParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "ts_seconds": self.ts_seconds,
            "omegas": list(self.omegas),
            "ns": self.ns,
            "windows": self.n_windows,
            "eta": self.eta_present,
            "third_order": self.third_order,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentParams":
        mapping = {
            "epsilon": ("epsilon", float),
            "ts_seconds": ("ts_seconds", float),
            "omegas": ("omegas", lambda v: tuple(float(x) for x in v)),
            "ns": ("ns", _strict_int),
            "windows": ("n_windows", _strict_int),
            "eta": ("eta_present", _strict_bool),
            "third_order": ("third_order", _strict_bool),
        }
        kwargs = {}
        for key, value in d.items():
            if key not in mapping:
                raise ConfigError(key, "unknown parameter")
            name, conv = mapping[key]
            try:
                kwargs[name] = conv(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, str(exc)) from None
        try:
            return cls(**kwargs)
        except ValueError as exc:
            key = _guess_key(str(exc))
            raise ConfigError(key, str(exc)) from None


def _strict_int(v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _strict_bool(v: Any) -> bool:
    if not isinstance(v, bool):
        raise ValueError(f"expected true/false, got {v!r}")
    return v


def _guess_key(message: str) -> str:
    for name, key in (
        ("epsilon", "epsilon"),
        ("ts_seconds", "ts_seconds"),
        ("frequenc", "omegas"),
        ("n_windows", "windows"),
        ("ns ", "ns"),
    ):
        if name in message:
            return key
    return "params"


_KINDS = ("ba", "localized_l1", "localized_l4", "simplified_ba", "simplified_localized")


@dataclass(frozen=True)
class ModelKind:
    """Which detection-probability model generates or explains the counts.

    The simplified kinds describe the two-window experiment with a single
    active coupler at ``location``; they carry their own ``eta`` flag and,
    for the localized-at-L1 case without eta, the inner-interferometer
    imbalance ``delta``.
    """

    kind: str = "ba"
    location: Optional[int] = None
    eta: bool = True
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind.startswith("simplified"):
            if self.location not in LOCATIONS:
                raise ValueError(f"simplified models need a location in 1..5, got {self.location}")
        elif self.location is not None:
            raise ValueError(f"{self.kind} does not take a location")
        if self.delta < 0:
            raise ValueError("imbalance delta must be non-negative")

    @classmethod
    def ba(cls) -> "ModelKind":
        return cls("ba")

    @classmethod
    def localized_l1(cls) -> "ModelKind":
        return cls("localized_l1")

    @classmethod
    def localized_l4(cls) -> "ModelKind":
        return cls("localized_l4")

    @classmethod
    def simplified_ba(cls, location: int, eta: bool = True) -> "ModelKind":
        return cls("simplified_ba", location, eta)

    @classmethod
    def simplified_localized(cls, location: int, eta: bool = True, delta: float = 0.0) -> "ModelKind":
        return cls("simplified_localized", location, eta, delta)

    @property
    def is_simplified(self) -> bool:
        return self.kind.startswith("simplified")

    @property
    def label(self) -> str:
        if not self.is_simplified:
            return self.kind
        tag = f"{self.kind}_L{self.location}"
        return tag if self.eta else tag + "_no_eta"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_value(cls, value: Any) -> "ModelKind":
        if isinstance(value, ModelKind):
            return value
        if isinstance(value, str):
            return cls(value)
        if isinstance(value, dict):
            return cls(**value)
        raise ValueError(f"cannot interpret {value!r} as a model")


@dataclass
class RunConfig:
    """Everything a CLI invocation needs; round-trips through JSON."""

    params: ExperimentParams = field(default_factory=ExperimentParams)
    model: ModelKind = field(default_factory=ModelKind.ba)
    seed: int = 0
    target: int = 1
    runs: int = 500
    out: str = "out"
    plots: bool = False

    _OPTION_KEYS = ("model", "seed", "target", "runs", "out", "plots")

    def __post_init__(self):
        if self.target not in LOCATIONS:
            raise ConfigError("target", f"must be in 1..5, got {self.target}")
        if self.runs < 1:
            raise ConfigError("runs", f"must be >= 1, got {self.runs}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = self.params.to_dict()
        d.update(
            model=self.model.to_dict(),
            seed=self.seed,
            target=self.target,
            runs=self.runs,
            out=self.out,
            plots=self.plots,
        )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        opts = {k: d.pop(k) for k in cls._OPTION_KEYS if k in d}
        params = ExperimentParams.from_dict(d)
        kwargs: dict = {"params": params}
        if "model" in opts:
            try:
                kwargs["model"] = ModelKind.from_value(opts["model"])
            except (TypeError, ValueError) as exc:
                raise ConfigError("model", str(exc)) from None
        for key in ("seed", "target", "runs"):
            if key in opts:
                try:
                    kwargs[key] = _strict_int(opts[key])
                except ValueError as exc:
                    raise ConfigError(key, str(exc)) from None
        if "out" in opts:
            if not isinstance(opts["out"], str):
                raise ConfigError("out", "expected a path string")
            kwargs["out"] = opts["out"]
        if "plots" in opts:
            try:
                kwargs["plots"] = _strict_bool(opts["plots"])
            except ValueError as exc:
                raise ConfigError("plots", str(exc)) from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError("<file>", f"{path}: top level must be an object")
        return cls.from_dict(data)
