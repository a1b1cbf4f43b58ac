"""INI experiment configuration.

One file drives every subcommand. Each section is a dataclass whose field
defaults are the documented defaults, so an empty file is a valid config.
Unknown sections or keys are hard errors; so are values that fail validation,
and every error names the offending key. render_config emits the canonical
form (all sections, all keys, sorted layout) and parse/render round-trips
are idempotent, which also gives a stable config hash for manifests.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
from dataclasses import dataclass, field, fields

from .beamforming import GlnnConfig
from .channel import BeamformingScenario, PredictionScenario
from .prediction import PredictorHyper

__all__ = ["RunSection", "ModelSection", "TrainSection", "BenchSection",
           "ExperimentConfig", "parse_config", "render_config",
           "config_hash", "scenario_hash"]

CELL_KINDS = ("ltc", "ltc-rk4", "cfc", "gru")


@dataclass
class RunSection:
    task: str = "predict"
    seed: int = 0
    out_dir: str = "out"

    def validate(self):
        if self.task not in ("predict", "beamform"):
            raise ValueError(f"task must be predict or beamform, got {self.task!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if not self.out_dir:
            raise ValueError("out_dir must be non-empty")


@dataclass
class ModelSection:
    kind: str = "ltc"
    units: int = 32
    unfolds: int = 6
    ncp: bool = False
    n_inter: int = 16
    n_command: int = 10
    n_motor: int = 4
    fanout_sensory: int = 4
    fanout_inter: int = 4
    fanin_motor: int = 4
    n_command_recurrent: int = 20

    def validate(self):
        if self.kind not in CELL_KINDS:
            raise ValueError(f"kind must be one of {CELL_KINDS}, got {self.kind!r}")
        if self.units < 1:
            raise ValueError(f"units must be >= 1, got {self.units}")
        if self.unfolds < 1:
            raise ValueError(f"unfolds must be >= 1, got {self.unfolds}")
        if self.ncp:
            if self.kind == "gru":
                raise ValueError("ncp wiring applies to ltc/cfc kinds, not gru")
            total = self.n_inter + self.n_command + self.n_motor
            if total != self.units:
                raise ValueError(
                    f"ncp layer sizes n_inter+n_command+n_motor = {total} "
                    f"but units = {self.units}")
            if self.fanout_sensory > self.n_inter:
                raise ValueError("fanout_sensory exceeds n_inter")
            if self.fanout_inter > self.n_command:
                raise ValueError("fanout_inter exceeds n_command")
            if self.fanin_motor > self.n_command:
                raise ValueError("fanin_motor exceeds n_command")
            if self.n_command_recurrent > self.n_command ** 2:
                raise ValueError("n_command_recurrent exceeds command pair count")


@dataclass
class TrainSection:
    lr: float = 0.005
    batch: int = 64
    epochs: int = 300
    steps_per_epoch: int = 40
    patience: int = 12
    val_fraction: float = 0.1
    dt_per_step: float = 1.0
    l_history: int = 20
    l_predict: int = 5
    train_fraction: float = 0.8

    def validate(self):
        for name in ("lr", "batch", "steps_per_epoch", "patience",
                     "dt_per_step", "l_history", "l_predict"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError(
                f"val_fraction must be in [0, 1), got {self.val_fraction}")

    def hyper(self) -> PredictorHyper:
        return PredictorHyper(lr=self.lr, batch=self.batch, epochs=self.epochs,
                              steps_per_epoch=self.steps_per_epoch,
                              patience=self.patience,
                              val_fraction=self.val_fraction,
                              dt_per_step=self.dt_per_step)


@dataclass
class BenchSection:
    n_trials: int = 50
    units: int = 32
    time_training: bool = True

    def validate(self):
        if self.n_trials < 30:
            raise ValueError(f"n_trials must be >= 30, got {self.n_trials}")
        if self.units < 1:
            raise ValueError(f"units must be >= 1, got {self.units}")


@dataclass
class ExperimentConfig:
    run: RunSection = field(default_factory=RunSection)
    prediction: PredictionScenario = field(default_factory=PredictionScenario)
    beamforming: BeamformingScenario = field(default_factory=BeamformingScenario)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    glnn: GlnnConfig = field(default_factory=GlnnConfig)
    bench: BenchSection = field(default_factory=BenchSection)

    def validate(self):
        self.run.validate()
        self.prediction.validate()
        self.beamforming.validate()
        self.model.validate()
        self.train.validate()
        self.bench.validate()
        # glnn's online state constructor re-checks these at run time
        if self.glnn.cell_kind not in ("cfc", "ltc"):
            raise ValueError(
                f"cell_kind must be cfc or ltc, got {self.glnn.cell_kind!r}")
        if self.glnn.map_terms not in ("full", "gain"):
            raise ValueError(
                f"map_terms must be full or gain, got {self.glnn.map_terms!r}")
        if self.glnn.n_inner < 1:
            raise ValueError(f"n_inner must be >= 1, got {self.glnn.n_inner}")
        if self.glnn.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.glnn.lr}")
        if self.glnn.sensory_dim < 1:
            raise ValueError(
                f"sensory_dim must be >= 1, got {self.glnn.sensory_dim}")

    def prediction_scenario(self) -> PredictionScenario:
        return dataclasses.replace(self.prediction, seed=self.run.seed)

    def beamforming_scenario(self) -> BeamformingScenario:
        return dataclasses.replace(self.beamforming, seed=self.run.seed)


# scenario seeds come from [run] seed, never from the scenario sections
_HIDDEN_KEYS = {"prediction": {"seed"}, "beamforming": {"seed"}}

_SECTIONS = {
    "run": "run",
    "prediction": "prediction",
    "beamforming": "beamforming",
    "model": "model",
    "train": "train",
    "glnn": "glnn",
    "bench": "bench",
}


def _section_keys(obj, section: str) -> list[str]:
    hidden = _HIDDEN_KEYS.get(section, set())
    return [f.name for f in fields(obj) if f.name not in hidden]


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):  # phases
        return ",".join(f"{_format_value(s)}:{n}" for s, n in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _parse_value(section: str, key: str, text: str, default):
    where = f"[{section}] {key}"
    text = text.strip()
    if isinstance(default, bool):
        try:
            return _BOOL_WORDS[text.lower()]
        except KeyError:
            raise ValueError(f"{where}: expected a boolean, got {text!r}") from None
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"{where}: expected an integer, got {text!r}") from None
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"{where}: expected a number, got {text!r}") from None
    if isinstance(default, tuple):
        try:
            out = []
            for part in text.split(","):
                speed, steps = part.split(":")
                out.append((float(speed), int(steps)))
            if not out:
                raise ValueError
            return tuple(out)
        except ValueError:
            raise ValueError(
                f"{where}: expected speed:steps pairs like 6:700,15:600, "
                f"got {text!r}") from None
    return text


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text; missing keys take defaults, unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from exc
    if parser.defaults():
        raise ValueError("unknown section [DEFAULT]")
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown section [{section}]")
        obj = getattr(cfg, _SECTIONS[section])
        known = set(_section_keys(obj, section))
        for key, raw in parser.items(section):
            if key not in known:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            value = _parse_value(section, key, raw, getattr(obj, key))
            setattr(obj, key, value)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ValueError(f"invalid config: {exc}") from exc
    return cfg


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical INI text: every section, every key, documented order."""
    out = io.StringIO()
    for section, attr in _SECTIONS.items():
        obj = getattr(cfg, attr)
        out.write(f"[{section}]\n")
        for key in _section_keys(obj, section):
            out.write(f"{key} = {_format_value(getattr(obj, key))}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the canonical rendering, stable across key order and comments."""
    return hashlib.sha256(render_config(cfg).encode()).hexdigest()


def scenario_hash(cfg: ExperimentConfig) -> str:
    """Short digest of the active scenario plus the run seed."""
    section = "prediction" if cfg.run.task == "predict" else "beamforming"
    obj = getattr(cfg, section)
    parts = [f"{key}={_format_value(getattr(obj, key))}"
             for key in _section_keys(obj, section)]
    parts.append(f"seed={cfg.run.seed}")
    blob = ";".join(parts).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
