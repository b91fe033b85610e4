"""
Settings Manager for the C-sign gate analysis app
Handles default settings, run configuration files and their validation.

This module provides a singleton SettingsManager class that:
- Loads shipped defaults from defaults.yaml at the repository root
- Merges a user run-config file (YAML key: value pairs or key=value lines)
  over the defaults
- Applies command-line overrides last
- Validates every value before any computation starts
"""

# Standard library imports
import logging
import os
import re
from dataclasses import asdict, dataclass, fields

# Third-party imports
import yaml

# Local application imports
from loqc_app.modules.exceptions import ConfigError

logger = logging.getLogger(__name__)

DEFAULTS_FILE = os.path.join(
    os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))), "defaults.yaml"
)

GATES = ("klm", "knill", "pjf", "ns")
AXES = ("detector", "source", "joint")
LOSS_METHODS = ("kraus", "ancilla_trace")

KEY_VALUE_LINE = re.compile(r"^[A-Za-z_]\w*\s*=")


@dataclass
class RunConfig:
    """Fully merged configuration of one CLI run."""

    gate: str = "klm"
    axis: str = "detector"
    eta_src: float = 1.0
    eta_det: float = 1.0
    grid_from: float = 0.8
    grid_to: float = 1.0
    grid_step: float = 0.01
    grid_density: int = 17
    refine_seeds: int = 5
    fidelity_tol: float = 1e-7
    tune_grid_density: int = 9
    tune_tol: float = 1e-5
    joint_seed_grid: int = 9
    joint_refine_seeds: int = 3
    jobs: int = 1
    loss_method: str = "kraus"
    dimension_cap: int = 1_000_000
    trace_threshold: float = 1e-12
    out: str = "results.csv"

    def validate(self):
        """Range-check every field.

        Raises:
            ConfigError: Naming the first invalid key.
        """
        if self.gate not in GATES:
            raise ConfigError(f"gate must be one of {GATES}, got {self.gate!r}")
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.loss_method not in LOSS_METHODS:
            raise ConfigError(f"loss_method must be one of {LOSS_METHODS}, got {self.loss_method!r}")
        for key in ("eta_src", "eta_det", "grid_from", "grid_to"):
            value = getattr(self, key)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{key} must lie in [0, 1], got {value}")
        if self.grid_from > self.grid_to:
            raise ConfigError(f"grid_from {self.grid_from} exceeds grid_to {self.grid_to}")
        for key in ("grid_step", "fidelity_tol", "tune_tol", "trace_threshold"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")
        for key in ("grid_density", "tune_grid_density", "joint_seed_grid"):
            if getattr(self, key) < 2:
                raise ConfigError(f"{key} must be at least 2, got {getattr(self, key)}")
        for key in ("refine_seeds", "joint_refine_seeds", "jobs", "dimension_cap"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be at least 1, got {getattr(self, key)}")
        return self

    def as_dict(self):
        return asdict(self)


def _coerce(values):
    """Cast raw YAML/CLI values onto RunConfig field types."""
    types = {f.name: f.type for f in fields(RunConfig)}
    unknown = sorted(set(values) - set(types))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    coerced = {}
    for key, value in values.items():
        cast = types[key]
        try:
            if cast is int and isinstance(value, float) and not value.is_integer():
                raise ValueError(f"{value} is not an integer")
            coerced[key] = cast(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value for {key}: {value!r} ({e})") from None
    return coerced


def _setting_lines(text):
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield number, line


def _parse_key_value_lines(text, path):
    settings = {}
    for number, line in _setting_lines(text):
        key, _, raw = (part.strip() for part in line.partition("="))
        if not raw:
            raise ConfigError(f"config file {path} line {number}: no value for {key!r}")
        try:
            # scalars read as YAML so 0.9 is a float and 9 an int
            settings[key] = yaml.safe_load(raw)
        except yaml.YAMLError:
            settings[key] = raw
    return settings


def read_config_file(path):
    """Read configuration keys from a settings file.

    The file is either a YAML mapping (key: value) or plain key=value
    lines; blank lines and # comments are ignored in both.

    Raises:
        ConfigError: If the file is missing, unparsable or not a mapping.
    """
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    lines = list(_setting_lines(text))
    if lines and all(KEY_VALUE_LINE.match(line) for _, line in lines):
        return _parse_key_value_lines(text, path)
    try:
        content = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config file {path}: {e}") from None
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ConfigError(f"config file {path} must hold key: value pairs or key=value lines")
    return content


class SettingsManager:
    """Singleton holding the default run settings.

    Defaults come from RunConfig, overlaid with defaults.yaml when present.
    """

    _instance = None

    @classmethod
    def get_instance(cls):
        """Get the singleton instance of the SettingsManager.

        Returns:
            SettingsManager: The singleton instance
        """
        if cls._instance is None:
            cls._instance = SettingsManager()
        return cls._instance

    def __init__(self, defaults_file=DEFAULTS_FILE):
        self.defaults_file = defaults_file
        self.settings = self._load_settings()

    def _load_settings(self):
        default_settings = RunConfig().as_dict()
        if os.path.exists(self.defaults_file):
            try:
                settings = _coerce(read_config_file(self.defaults_file))
                return {**default_settings, **settings}
            except ConfigError as e:
                logger.warning("Ignoring defaults file: %s", e)
        return default_settings

    def get(self, key):
        return self.settings[key]

    def load_run_config(self, config_file=None, overrides=None) -> RunConfig:
        """Merge defaults, an optional config file and CLI overrides, then validate.

        Args:
            config_file (str, optional): Settings file, YAML or key=value lines.
            overrides (dict, optional): Values from the command line; None
                values are ignored.

        Returns:
            RunConfig: The validated configuration.

        Raises:
            ConfigError: On unknown keys, bad types or out-of-range values.
        """
        file_settings = _coerce(read_config_file(config_file)) if config_file else {}
        cli_settings = _coerce({k: v for k, v in (overrides or {}).items() if v is not None})
        merged = {**self.settings, **file_settings, **cli_settings}
        logger.debug("Run configuration: %s", merged)
        return RunConfig(**merged).validate()
