"""Run configuration read from an INI file; command-line flags override it.

Example::

    [paths]
    cdr = data/cdr.csv
    surveys = data/surveys.json
    truth = data/truth.json
    out = results

    [run]
    seed = 7
    threads = 1

    [rbo]
    p = 0.9

    [forest]
    n_trees = 100
    max_depth = 12
    min_leaf = 2
    max_features = 3
    max_pairs = 3000

    [recurrent]
    hidden = 32
    learning_rate = 0.01
    epochs = 30
    batch_size = 32
    clip_norm = 5.0
    max_pairs = 3000

    [analysis]
    epsilon = 0.1
    min_events = 3
    cadence_days = 21
    model = lstm

    [synth]
    n_egos = 30
    n_background = 40

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields, replace

from .models import ForestConfig, RecurrentConfig
from .synth import SynthConfig

EVAL_MAX_PAIRS = 3000


class ConfigError(ValueError):
    pass


@dataclass
class AnalysisConfig:
    epsilon: float = 0.1
    min_events: int = 3
    cadence_days: int = 21
    model: str = "lstm"


@dataclass
class RunConfig:
    cdr: str | None = None
    surveys: str | None = None
    truth: str | None = None
    out: str = "out"
    seed: int | None = None
    threads: int = 1
    rbo_p: float = 0.9
    forest: ForestConfig = field(default_factory=lambda: ForestConfig(max_pairs=EVAL_MAX_PAIRS))
    recurrent: RecurrentConfig = field(default_factory=lambda: RecurrentConfig(max_pairs=EVAL_MAX_PAIRS))
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("a seed is required (--seed or [run] seed)")
        return self.seed


def _coerce(dc_type, key: str, raw: str):
    for f in fields(dc_type):
        if f.name == key:
            break
    else:
        raise ConfigError(f"unknown key {key!r} for {dc_type.__name__}")
    default = f.default if f.default is not dataclasses.MISSING else None
    typ = str(f.type)
    if raw.strip().lower() in ("none", ""):
        return None
    if "tuple" in typ:
        return tuple(int(x) for x in raw.split(","))
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes")
    if isinstance(default, int) or typ.startswith("int"):
        return int(raw)
    if isinstance(default, float) or typ.startswith("float"):
        return float(raw)
    return raw.strip()


def _section(parser, name, dc_type, current):
    if not parser.has_section(name):
        return current
    try:
        values = {k: _coerce(dc_type, k, v) for k, v in parser.items(name)}
    except ValueError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc
    return replace(current, **values)


def load_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {"paths", "run", "rbo", "forest", "recurrent", "analysis", "synth"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    cfg = RunConfig()
    if parser.has_section("paths"):
        for k, v in parser.items("paths"):
            if k not in ("cdr", "surveys", "truth", "out"):
                raise ConfigError(f"unknown key {k!r} in [paths]")
            setattr(cfg, k, v)
    if parser.has_section("run"):
        for k, v in parser.items("run"):
            if k not in ("seed", "threads"):
                raise ConfigError(f"unknown key {k!r} in [run]")
            try:
                setattr(cfg, k, int(v))
            except ValueError:
                raise ConfigError(f"[run] {k} must be an integer, got {v!r}") from None
    if parser.has_section("rbo"):
        extra = set(parser.options("rbo")) - {"p"}
        if extra:
            raise ConfigError(f"unknown keys in [rbo]: {sorted(extra)}")
        try:
            cfg.rbo_p = parser.getfloat("rbo", "p", fallback=cfg.rbo_p)
        except ValueError as exc:
            raise ConfigError(f"[rbo] p: {exc}") from None
    cfg.forest = _section(parser, "forest", ForestConfig, cfg.forest)
    cfg.recurrent = _section(parser, "recurrent", RecurrentConfig, cfg.recurrent)
    cfg.analysis = _section(parser, "analysis", AnalysisConfig, cfg.analysis)
    cfg.synth = _section(parser, "synth", SynthConfig, cfg.synth)
    return cfg
