"""Run configuration: schema, defaults, and TOML/JSON loading.

The file format is flat key-value with three optional tables (selection,
densify, lr).  Unknown keys are startup errors that name the offending
field, so typos fail loudly instead of silently training with defaults.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .core import InvalidParameterError, SelectionConfig
from .densify import DensifyConfig
from .optimizer import LearningRates

MODES = ("ours", "ablation_no_prior", "ablation_strong_prior",
         "baseline_opacity", "baseline_render", "no_prune")

# training mode -> pressure shape used during the selection window
MODE_PRIOR = {"ours": "finite", "ablation_no_prior": "none",
              "ablation_strong_prior": "strong"}


@dataclass
class RunConfig:
    targets: list = field(default_factory=list)  # paths; first is the primary view
    out_dir: str = "out"
    mode: str = "ours"
    seed: int = 0
    reproducible: bool = False
    total_iters: int = 30000
    n0: int = 4096                # initial primitive count
    crop_views: int = 0           # extra crop views of the primary target
    view_frac: float = 0.5        # crop side as a fraction of the image side
    checkpoint_every: int = 0     # 0 = final checkpoint only
    stop_on_completion: bool = False  # end the run once selection meets budget
    lr_decay: float = 1.0         # end-of-run anneal factor for non-opacity lrs
    anneal_start: int = 0         # iteration where the lr anneal begins
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    densify: DensifyConfig = field(default_factory=DensifyConfig)
    lr: LearningRates = field(default_factory=LearningRates)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise InvalidParameterError(f"unknown mode {self.mode!r}")
        if not self.targets:
            raise InvalidParameterError("config field 'targets' is empty")
        for p in self.targets:
            if not Path(p).is_file():
                raise InvalidParameterError(f"target image not found: {p}")
        if self.total_iters < 1:
            raise InvalidParameterError("total_iters must be positive")
        if self.n0 < 1:
            raise InvalidParameterError("n0 must be positive")
        if self.crop_views < 0:
            raise InvalidParameterError("crop_views must be >= 0")
        if not (0.0 < self.view_frac <= 1.0):
            raise InvalidParameterError("view_frac must lie in (0, 1]")
        if not (0.0 < self.lr_decay <= 1.0):
            raise InvalidParameterError("lr_decay must lie in (0, 1]")
        if self.anneal_start < 0:
            raise InvalidParameterError("anneal_start must be >= 0")
        self.selection.validate()
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["selection"]["auto_clamp"] = list(self.selection.auto_clamp)
        return d


def _fill(instance, table: dict, section: str):
    names = {f.name for f in dataclasses.fields(instance)}
    for key, value in table.items():
        if key not in names:
            raise InvalidParameterError(f"unknown config field '{section}.{key}'"
                                        if section else f"unknown config field '{key}'")
        if key == "auto_clamp":
            value = tuple(value)
        setattr(instance, key, value)
    return instance


def config_from_dict(raw: dict, validate: bool = True) -> RunConfig:
    """Build and validate a RunConfig from parsed TOML/JSON data."""
    raw = dict(raw)
    cfg = RunConfig()
    for section, instance in (("selection", cfg.selection),
                              ("densify", cfg.densify),
                              ("lr", cfg.lr)):
        table = raw.pop(section, {})
        if not isinstance(table, dict):
            raise InvalidParameterError(f"config field '{section}' must be a table")
        _fill(instance, table, section)
    if "target" in raw:  # convenience alias for a single path
        raw.setdefault("targets", [raw.pop("target")])
    top = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in raw.items():
        if key not in top:
            raise InvalidParameterError(f"unknown config field '{key}'")
        if key in ("selection", "densify", "lr"):
            continue
        setattr(cfg, key, value)
    if isinstance(cfg.targets, str):
        cfg.targets = [cfg.targets]
    cfg.targets = [str(p) for p in cfg.targets]
    return cfg.validate() if validate else cfg


def load_config(path) -> RunConfig:
    """Parse a .toml or .json run configuration file."""
    p = Path(path)
    if not p.is_file():
        raise InvalidParameterError(f"config file not found: {p}")
    if p.suffix.lower() == ".json":
        raw = json.loads(p.read_text())
    elif p.suffix.lower() == ".toml":
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        raise InvalidParameterError(f"config must be .toml or .json, got {p.suffix!r}")
    cfg = config_from_dict(raw, validate=False)
    # relative target paths resolve against the config file location
    resolved = []
    for t in cfg.targets:
        tp = Path(t)
        resolved.append(str(tp if tp.is_absolute() else (p.parent / tp)))
    cfg.targets = resolved
    return cfg.validate()
