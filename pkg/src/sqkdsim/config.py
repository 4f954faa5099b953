"""Run configuration and experiment documents.

An experiment document is YAML (JSON is accepted as a subset).  Top-level run
fields act as defaults for every run; a ``runs`` list names runs explicitly
and a ``sweep`` block expands the base run over strategies, seeds and a
fingerprint ``d`` grid::

    rounds: 100000
    seed: 42
    strategy: tagging
    sweep:
      strategies: [none, tagging, intercept_resend_forward]
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .adversary import STRATEGIES, EveStrategy, Fingerprint, Tagging, strategy_from_name

__all__ = [
    "ConfigError",
    "RunConfig",
    "NamedRun",
    "ExperimentSpec",
    "parse_config",
    "emit_config",
    "run_config_from_dict",
]

FORMATS = ("json", "csv")
_RUN_KEYS = {
    "rounds",
    "seed",
    "strategy",
    "d",
    "sift_probability",
    "check_sample_fraction",
    "qber_threshold",
    "p_noise",
    "untag_on_return",
}
_TOP_KEYS = _RUN_KEYS | {"name", "runs", "sweep", "format", "out"}
_SWEEP_KEYS = {"strategies", "seeds", "d_grid"}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _check_probability(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise ConfigError(path, f"must lie in [0, 1], got {value!r}")
    return float(value)


def _check_int(path: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    rounds: int
    seed: int
    strategy: EveStrategy = field(default_factory=lambda: strategy_from_name("none"))
    sift_probability: float = 0.5
    check_sample_fraction: float = 0.2
    qber_threshold: float = 0.05
    p_noise: float = 0.0
    untag_on_return: bool = False

    def __post_init__(self):
        _check_int("rounds", self.rounds)
        if self.rounds < 1:
            raise ConfigError("rounds", f"must be at least 1, got {self.rounds}")
        _check_int("seed", self.seed)
        if not -(1 << 63) <= self.seed < (1 << 64):
            raise ConfigError("seed", "must fit in 64 bits")
        for name in ("sift_probability", "check_sample_fraction", "qber_threshold", "p_noise"):
            _check_probability(name, getattr(self, name))
        if not isinstance(self.strategy, EveStrategy):
            raise ConfigError("strategy", f"expected an EveStrategy, got {self.strategy!r}")
        # Re-shifting on the return leg is carried out by the tagging attack
        # itself; keep the flag and the strategy in agreement.
        if isinstance(self.strategy, Tagging):
            untag = self.untag_on_return or self.strategy.untag_on_return
            object.__setattr__(self, "untag_on_return", untag)
            object.__setattr__(self, "strategy", Tagging(untag_on_return=untag))

    def to_dict(self) -> dict:
        out = {
            "rounds": self.rounds,
            "seed": self.seed,
            "strategy": self.strategy.name,
            "sift_probability": self.sift_probability,
            "check_sample_fraction": self.check_sample_fraction,
            "qber_threshold": self.qber_threshold,
            "p_noise": self.p_noise,
            "untag_on_return": self.untag_on_return,
        }
        if isinstance(self.strategy, Fingerprint):
            out["d"] = self.strategy.d
        return out


@dataclass(frozen=True)
class NamedRun:
    name: str
    config: RunConfig


@dataclass
class ExperimentSpec:
    runs: list[NamedRun]
    format: str = "json"
    out: Optional[str] = None
    # Kept for reference only; runs are already expanded.
    sweep: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.runs:
            raise ConfigError("runs", "at least one run is required")
        names = [r.name for r in self.runs]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError("runs", f"duplicate run names {dupes}")
        if self.format not in FORMATS:
            raise ConfigError("format", f"must be one of {FORMATS}, got {self.format!r}")


def run_config_from_dict(fields: dict, path: str = "") -> RunConfig:
    """Validate one run's fields; ``path`` prefixes field names in errors."""
    for key in fields:
        if key not in _RUN_KEYS:
            raise ConfigError(f"{path}{key}", "unknown field")
    for key in ("rounds", "seed"):
        if key not in fields:
            raise ConfigError(f"{path}{key}", "missing required field")
    rounds = _check_int(f"{path}rounds", fields["rounds"])
    if rounds < 1:
        raise ConfigError(f"{path}rounds", f"must be at least 1, got {rounds}")
    seed = _check_int(f"{path}seed", fields["seed"])

    name = fields.get("strategy", "none")
    if name not in STRATEGIES:
        raise ConfigError(f"{path}strategy", f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}")
    untag = fields.get("untag_on_return", False)
    if not isinstance(untag, bool):
        raise ConfigError(f"{path}untag_on_return", f"expected a boolean, got {untag!r}")
    if name == "fingerprint":
        if "d" not in fields:
            raise ConfigError(f"{path}d", "fingerprint strategy requires d")
        strategy = Fingerprint(_check_probability(f"{path}d", fields["d"]))
    elif "d" in fields:
        raise ConfigError(f"{path}d", "only valid with the fingerprint strategy")
    elif name == "tagging":
        strategy = Tagging(untag_on_return=untag)
    else:
        strategy = strategy_from_name(name)

    probs = {}
    for key in ("sift_probability", "check_sample_fraction", "qber_threshold", "p_noise"):
        if key in fields:
            probs[key] = _check_probability(f"{path}{key}", fields[key])
    try:
        return RunConfig(rounds=rounds, seed=seed, strategy=strategy, untag_on_return=untag, **probs)
    except ConfigError as exc:
        raise ConfigError(f"{path}{exc.path}", str(exc).split(": ", 1)[1]) from None


def _expand_sweep(base: dict, sweep: Any) -> list[tuple[str, dict]]:
    if not isinstance(sweep, dict):
        raise ConfigError("sweep", "expected a mapping")
    for key in sweep:
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"sweep.{key}", "unknown field")
    for key in sweep:
        if not isinstance(sweep[key], list) or not sweep[key]:
            raise ConfigError(f"sweep.{key}", "expected a non-empty list")
    strategies = sweep.get("strategies", [base.get("strategy", "none")])
    seeds = sweep.get("seeds")
    d_grid = sweep.get("d_grid")
    if d_grid is not None and "fingerprint" not in strategies:
        raise ConfigError("sweep.d_grid", "requires the fingerprint strategy")
    for j, d in enumerate(d_grid or []):
        _check_probability(f"sweep.d_grid[{j}]", d)
    for j, seed in enumerate(seeds or []):
        _check_int(f"sweep.seeds[{j}]", seed)

    out = []
    for i, strategy in enumerate(strategies):
        if strategy not in STRATEGIES:
            raise ConfigError(f"sweep.strategies[{i}]", f"unknown strategy {strategy!r}")
        if strategy != "fingerprint":
            variants = [(strategy, {"strategy": strategy, "d": None})]
        elif d_grid is not None:
            variants = [(f"fingerprint-d{d:g}", {"strategy": strategy, "d": d}) for d in d_grid]
        else:
            variants = [(strategy, {"strategy": strategy})]
        for label, over in variants:
            for seed in seeds or [None]:
                fields = {**base, **over}
                if fields.get("d") is None:
                    fields.pop("d", None)
                name = label
                if seed is not None:
                    fields["seed"] = seed
                    name = f"{label}-seed{seed}"
                out.append((name, fields))
    return out


def parse_config(document: str) -> ExperimentSpec:
    """Parse and validate an experiment document, applying defaults."""
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<document>", "expected a mapping at top level")
    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigError(key, "unknown field")
    base = {k: v for k, v in data.items() if k in _RUN_KEYS}

    if "runs" in data and "sweep" in data:
        raise ConfigError("sweep", "cannot be combined with an explicit runs list")
    if "runs" in data:
        entries = data["runs"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("runs", "expected a non-empty list")
        named = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise ConfigError(f"runs[{i}]", "expected a mapping")
            entry = dict(entry)
            name = entry.pop("name", f"run{i}")
            named.append((str(name), {**base, **entry}, f"runs[{i}]."))
    elif "sweep" in data:
        named = [(n, f, "") for n, f in _expand_sweep(base, data["sweep"])]
    else:
        named = [(str(data.get("name", "run")), base, "")]

    runs = [NamedRun(name, run_config_from_dict(fields, path)) for name, fields, path in named]
    return ExperimentSpec(
        runs=runs,
        format=data.get("format", "json"),
        out=data.get("out"),
        sweep=data.get("sweep"),
    )


def emit_config(spec: ExperimentSpec) -> str:
    """Render ``spec`` as a document that :func:`parse_config` reads back."""
    doc: dict[str, Any] = {
        "format": spec.format,
        "runs": [{"name": r.name, **r.config.to_dict()} for r in spec.runs],
    }
    if spec.out is not None:
        doc["out"] = spec.out
    return yaml.safe_dump(doc, sort_keys=True)
