"""YAML experiment configuration with the desk-scale setup as defaults.

Lengths in the ``array`` section are in wavelengths.  ``load_config`` rejects
unknown keys and bad values with the dotted path of the offending field.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import yaml

from .bitalloc import RLHyperParams
from .channel import ArrayConfig, ConfigurationError, PathLoss, ScenarioParams
from .evaluate import SCHEMES, LinkBudget

SCHEMA_VERSION = 1


class ConfigError(ConfigurationError):
    """Invalid configuration value; the message starts with the field path."""


@dataclass
class ArraySection:
    n_panels_v: int = 1
    n_panels_h: int = 2
    n_elems_v: int = 8
    n_elems_h: int = 2
    panel_gap_v: float = 2.0
    panel_gap_h: float = 2.0
    elem_spacing_v: float = 0.5
    elem_spacing_h: float = 0.7
    vertical_combining: int = 8
    cross_polarized: bool = True
    carrier_frequency: float = 900e6

    def build(self):
        lam = ArrayConfig(carrier_frequency=self.carrier_frequency).wavelength
        return ArrayConfig(
            n_panels_v=self.n_panels_v, n_panels_h=self.n_panels_h,
            n_elems_v=self.n_elems_v, n_elems_h=self.n_elems_h,
            panel_gap_v=self.panel_gap_v * lam, panel_gap_h=self.panel_gap_h * lam,
            elem_spacing_v=self.elem_spacing_v * lam, elem_spacing_h=self.elem_spacing_h * lam,
            vertical_combining=self.vertical_combining,
            cross_polarized=self.cross_polarized,
            carrier_frequency=self.carrier_frequency)


@dataclass
class ScenarioSection:
    n_users: int = 3
    ground_distance: float = 100.0
    bs_height: float = 30.0
    ue_height: float = 2.0
    n_paths: int = 20
    horizontal_angle_range: list = field(default_factory=lambda: [0.0, 3.141592653589793])
    vertical_angle_range: list = field(default_factory=lambda: [0.0, 3.141592653589793 / 36])
    pathloss_intercept: float = 8.0
    pathloss_slope: float = 37.6
    tilt: float | None = None

    def build(self):
        return ScenarioParams(
            n_users=self.n_users, ground_distance=self.ground_distance,
            bs_height=self.bs_height, ue_height=self.ue_height, n_paths=self.n_paths,
            horizontal_angle_range=tuple(self.horizontal_angle_range),
            vertical_angle_range=tuple(self.vertical_angle_range),
            pathloss=PathLoss(self.pathloss_intercept, self.pathloss_slope), tilt=self.tilt)


@dataclass
class LinkSection:
    tx_power_dbm: float = 10.0
    bandwidth: float = 4e6
    noise_figure_db: float = 3.0

    def build(self):
        return LinkBudget(self.tx_power_dbm, self.bandwidth, self.noise_figure_db)


@dataclass
class ExperimentSection:
    schemes: list = field(default_factory=lambda: ["dft", "sp", "lp-3gpp"])
    budgets: list = field(default_factory=lambda: [24, 28, 32, 36, 40, 44, 48])
    panel_gaps: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 3.0, 4.0])
    panel_gap_unit: str = "wavelength"
    panel_gap_budget: int = 40
    trials: int = 1000
    seed: int = 0
    n_beams: int = 2
    amplitude_style: str = "extended"
    allocation_file: str | None = None


@dataclass
class RLSection:
    eta: float = 1000.0
    batch_size: int = 128
    memory: int = 2000
    gamma: float = 0.99
    lr: float = 1e-3
    eps_start: float = 1.0
    eps_decay: float = 0.995
    eps_min: float = 0.05
    max_steps: int = 2000
    patience: int = 300
    target_every: int = 1
    train_trials: int = 200
    report_trials: int = 1000
    hidden: int = 64
    reduced: bool = False
    restarts: int = 4
    budget: int = 40

    def build(self):
        kw = {f.name: getattr(self, f.name) for f in fields(RLHyperParams)
              if hasattr(self, f.name)}
        return RLHyperParams(**kw)


SECTIONS = {"array": ArraySection, "scenario": ScenarioSection, "link": LinkSection,
            "experiment": ExperimentSection, "rl": RLSection}


@dataclass
class ExperimentConfig:
    array: ArraySection = field(default_factory=ArraySection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    link: LinkSection = field(default_factory=LinkSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    rl: RLSection = field(default_factory=RLSection)

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION,
                **{name: asdict(getattr(self, name)) for name in SECTIONS}}

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported version {version!r}")
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown section")
        sections = {}
        for name, section_cls in SECTIONS.items():
            raw = data.get(name) or {}
            if not isinstance(raw, dict):
                raise ConfigError(f"{name}: expected a mapping")
            known = {f.name: f for f in fields(section_cls)}
            for key in raw:
                if key not in known:
                    raise ConfigError(f"{name}.{key}: unknown field")
            sections[name] = section_cls(**{k: _coerce(f"{name}.{k}", v, known[k].type)
                                            for k, v in raw.items()})
        cfg = cls(**sections)
        cfg.validate()
        return cfg

    def validate(self):
        ex = self.experiment
        for s in ex.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"experiment.schemes: unknown scheme {s!r}")
        if ex.trials < 1:
            raise ConfigError("experiment.trials: must be >= 1")
        if ex.panel_gap_unit not in ("wavelength", "spacing"):
            raise ConfigError("experiment.panel_gap_unit: use 'wavelength' or 'spacing'")
        if ex.amplitude_style not in ("extended", "compact"):
            raise ConfigError("experiment.amplitude_style: use 'extended' or 'compact'")
        if any(g < 0 for g in ex.panel_gaps):
            raise ConfigError("experiment.panel_gaps: gaps must be >= 0")
        for name in ("array", "scenario", "link"):
            try:
                getattr(self, name).build()
            except (ConfigurationError, ValueError, TypeError) as exc:
                raise ConfigError(f"{name}: {exc}") from exc

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _coerce(path, value, annotation):
    ann = annotation.__name__ if isinstance(annotation, type) else str(annotation)
    try:
        if value is None:
            if "None" in ann:
                return None
            raise ConfigError(f"{path}: value required")
        if ann.startswith("bool"):
            if not isinstance(value, bool):
                raise ConfigError(f"{path}: expected true/false")
            return value
        if ann.startswith("int"):
            if isinstance(value, bool) or float(value) != int(value):
                raise ConfigError(f"{path}: expected an integer")
            return int(value)
        if ann.startswith("float"):
            return float(value)
        if ann.startswith("str"):
            return str(value)
        if ann == "list":
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{path}: expected a list")
            return list(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return value


def load_config(path=None):
    """Read a YAML config file; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"<file>: {exc}") from exc
    return ExperimentConfig.from_dict(data)
