"""Experiment configuration.

A configuration is a JSON object whose sections map onto the frozen
dataclasses below. Every field has a default, so `{}` describes the
reference scenario: a 20 element half-wavelength array, 100 snapshots at
20 dB SNR, -8 dB coupling with 5 taps and three sources. Angles are
degrees in the file and radians everywhere else.
"""

import cmath
import dataclasses
import json
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from types import NoneType, UnionType
from typing import Any, Literal, Union, get_args, get_origin, get_type_hints

import numpy as np

from .array_model import (
    DEFAULT_COUPLING_TAPS,
    DEFAULT_SIGNAL_VARIANCE,
    DEFAULT_SPACING,
    MAX_SEED,
    ArrayGeometry,
    Scenario,
    SourceSet,
)
from .dictionary import Grid, build_grid_degrees
from .engine import Hyperparams, Schedule

logger = logging.getLogger(__name__)

METHODS = ("dfsmc", "sbl_on_grid", "sbl_off_grid", "music")
SWEEP_AXES = ("snr_db", "coupling_alpha_db")
COUPLING_PHASES = ("per_lag", "shared")


class ConfigError(ValueError):
    """Invalid configuration file or field."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulated scenario. The number of sources is the number of directions."""

    num_antennas: int = 20
    spacing: float = DEFAULT_SPACING
    snapshots: int = 100
    snr_db: float = 20.0
    coupling_alpha_db: float = -8.0
    coupling_taps: int = DEFAULT_COUPLING_TAPS
    coupling_phase: Literal["per_lag", "shared"] = "per_lag"
    directions_deg: tuple[float, ...] = (-8.268, 18.128, 30.428)
    random_directions: bool = False
    min_separation_deg: float = 5.0
    signal_mean_magnitude: float = math.sqrt(2)
    signal_mean_phase_deg: float = 90.0
    signal_variance: float = DEFAULT_SIGNAL_VARIANCE
    seed: int = 0

    def __post_init__(self) -> None:  # noqa: D105
        if not 0 <= self.seed < MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

        if self.coupling_phase not in COUPLING_PHASES:
            raise ValueError(
                f"coupling_phase must be one of {', '.join(COUPLING_PHASES)}, "
                f"got {self.coupling_phase!r}"
            )

        if not 1 <= len(self.directions_deg) < self.num_antennas:
            raise ValueError(
                f"directions_deg must hold between 1 and {self.num_antennas - 1} "
                f"directions, got {len(self.directions_deg)}"
            )

        if self.min_separation_deg < 0:
            raise ValueError(
                f"min_separation_deg must not be negative, got {self.min_separation_deg}"
            )

        # Surfaces array and source errors while loading.
        self.to_scenario(np.radians(self.directions_deg))

    @property
    def num_sources(self) -> int:
        """Number of sources K."""
        return len(self.directions_deg)

    @property
    def signal_mean(self) -> complex:
        """Complex mean of every source signal."""
        return cmath.rect(
            self.signal_mean_magnitude, math.radians(self.signal_mean_phase_deg)
        )

    @property
    def geometry(self) -> ArrayGeometry:
        """The array."""
        return ArrayGeometry(self.num_antennas, self.spacing)

    def to_scenario(
        self,
        directions: Sequence[float] | np.ndarray,
        *,
        snr_db: float | None = None,
        coupling_alpha_db: float | None = None,
        seed: int | None = None,
    ) -> Scenario:
        """Build a simulation scenario, optionally replacing swept values.

        Args:
            directions: Source directions in radians.
            snr_db: SNR replacing `snr_db`.
            coupling_alpha_db: Coupling strength replacing `coupling_alpha_db`.
            seed: Trial seed replacing `seed`.

        Returns:
            The scenario.

        Raises:
            ValueError: If any value is out of range.
        """
        return Scenario(
            geometry=self.geometry,
            sources=SourceSet(
                directions=np.asarray(directions, dtype=np.float64),
                signal_mean=self.signal_mean,
                signal_variance=self.signal_variance,
            ),
            snapshots=self.snapshots,
            snr_db=self.snr_db if snr_db is None else snr_db,
            coupling_alpha_db=(
                self.coupling_alpha_db if coupling_alpha_db is None else coupling_alpha_db
            ),
            coupling_taps=self.coupling_taps,
            seed=self.seed if seed is None else seed,
        )


@dataclass(frozen=True)
class GridConfig:
    """Search grid in degrees, both ends included."""

    range_lo_deg: float = -60.0
    range_hi_deg: float = 60.0
    step_deg: float = 1.0

    def __post_init__(self) -> None:  # noqa: D105
        self.build()

    def build(self) -> Grid:
        """Build the grid.

        Raises:
            ValueError: If the range or step is invalid.
        """
        return build_grid_degrees(self.range_lo_deg, self.range_hi_deg, self.step_deg)


@dataclass(frozen=True)
class SweepConfig:
    """One swept scenario parameter."""

    axis: Literal["snr_db", "coupling_alpha_db"] = "snr_db"
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:  # noqa: D105
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {', '.join(SWEEP_AXES)}, got {self.axis!r}")

        if not self.values:
            raise ValueError("values must not be empty")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, resolved description of a Monte Carlo experiment."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    schedule: Schedule = field(default_factory=Schedule)
    methods: tuple[str, ...] = METHODS
    trials: int = 1
    sweep: SweepConfig | None = None
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self) -> None:  # noqa: D105
        if not self.methods:
            raise ValueError("methods must not be empty")

        for method in self.methods:
            if method not in METHODS:
                raise ValueError(
                    f"methods has unknown method {method!r}, expected any of "
                    f"{', '.join(METHODS)}"
                )

        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not repeat a method")

        if self.trials < 1:
            raise ValueError(f"trials must be positive, got {self.trials}")

        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")

    @property
    def sweep_values(self) -> tuple[float | None, ...]:
        """Swept values, or a single None when nothing is swept."""
        return (None,) if self.sweep is None else self.sweep.values

    def to_dict(self) -> dict[str, Any]:
        """Resolved configuration as JSON-compatible data."""
        return json.loads(json.dumps(dataclasses.asdict(self)))


def _coerce(value: Any, hint: Any, path: str) -> Any:  # noqa: ANN401, C901, PLR0911
    origin = get_origin(hint)

    if origin in {Union, UnionType}:
        members = [member for member in get_args(hint) if member is not NoneType]
        if value is None:
            return None
        return _coerce(value, members[0], path)

    if origin is Literal:
        if value not in get_args(hint):
            choices = ", ".join(repr(choice) for choice in get_args(hint))
            raise ConfigError(f"{path}: expected one of {choices}, got {value!r}")
        return value

    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        item = get_args(hint)[0]
        return tuple(_coerce(entry, item, f"{path}[{i}]") for i, entry in enumerate(value))

    if dataclasses.is_dataclass(hint):
        return _build(hint, value, path)

    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value

    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value

    if hint is float:
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{path}: expected a finite number, got {value!r}")
        return float(value)

    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")

    return value


def _build(cls: type, data: Any, path: str) -> Any:  # noqa: ANN401
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(data).__name__}")

    hints = get_type_hints(cls)
    names = {item.name for item in dataclasses.fields(cls)}
    prefix = f"{path}." if path else ""

    for key in data:
        if key not in names:
            raise ConfigError(f"{prefix}{key}: unknown field")

    kwargs = {
        key: _coerce(value, hints[key], f"{prefix}{key}") for key, value in data.items()
    }

    try:
        return cls(**kwargs)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path or '<root>'}: {exc}") from exc


def from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    """Build a configuration from parsed JSON.

    Raises:
        ConfigError: On unknown keys, wrong types, non-finite numbers or
            out-of-range values, naming the dotted path of the field.
    """
    return _build(ExperimentConfig, data, "")


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Load a configuration file; no path means all defaults.

    Raises:
        ConfigError: If the file cannot be read, is not valid JSON (the
            message names the line and column) or fails validation.
    """
    if path is None:
        logger.info("No configuration file given, using defaults")
        return ExperimentConfig()

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration ({exc.strerror})") from exc

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    config = from_dict(data)
    logger.info("Loaded configuration from %s", path)

    return config


def _axis_override(
    config: ExperimentConfig, axis: str, values: Sequence[float]
) -> ExperimentConfig:
    for value in values:
        if not math.isfinite(value):
            raise ConfigError(f"{axis}: expected finite values, got {value}")

    sweep = config.sweep
    if sweep is not None and sweep.axis == axis:
        sweep = None

    if len(values) == 1:
        scenario = dataclasses.replace(config.scenario, **{axis: float(values[0])})
        return dataclasses.replace(config, scenario=scenario, sweep=sweep)

    if sweep is not None:
        raise ConfigError(
            f"sweep: cannot sweep {axis} while {sweep.axis} is already swept"
        )

    return dataclasses.replace(
        config, sweep=SweepConfig(axis=axis, values=tuple(float(v) for v in values))
    )


def with_overrides(  # noqa: PLR0913
    config: ExperimentConfig,
    *,
    methods: Sequence[str] | None = None,
    trials: int | None = None,
    seed: int | None = None,
    snr_db: Sequence[float] | None = None,
    coupling_alpha_db: Sequence[float] | None = None,
    output_dir: str | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    """Apply command-line overrides.

    A single `snr_db` or `coupling_alpha_db` value replaces the scenario
    value; several values sweep that axis, replacing any sweep of the same
    axis.

    Raises:
        ConfigError: If an override is invalid or two axes would be swept.
    """
    try:
        if snr_db is not None:
            config = _axis_override(config, "snr_db", snr_db)

        if coupling_alpha_db is not None:
            config = _axis_override(config, "coupling_alpha_db", coupling_alpha_db)

        if seed is not None:
            config = dataclasses.replace(
                config, scenario=dataclasses.replace(config.scenario, seed=seed)
            )

        changes = {
            name: value
            for name, value in (
                ("methods", None if methods is None else tuple(methods)),
                ("trials", trials),
                ("output_dir", output_dir),
                ("workers", workers),
            )
            if value is not None
        }

        return dataclasses.replace(config, **changes)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
