"""
Run configuration for the capacity toolkit.

A configuration file is a single flat JSON object whose keys are RunConfig
field names, for example::

    {
      "rho_db": 15.0,
      "p_f": 0.6,
      "p_n1": 0.2,
      "p_n2": 0.2,
      "trials": 1000000,
      "seed": 7,
      "schemes": ["cnoma_oam", "cnoma"]
    }

Values are layered: built-in defaults, then a figure preset (if selected),
then the configuration file, then command-line flags. Unknown keys are
rejected.
"""

import json
import math
import numbers
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union, get_args, get_origin

import numpy as np

from splurge_cnoma_capacity.channel import LinkTriple, RicianLink, SeriesControl
from splurge_cnoma_capacity.mc_sim import BaselineSplit, OperatingPoint, PowerAllocation, Scheme
from splurge_cnoma_capacity.oam import OamChannel, build_circulant_oam_channel, build_oam_channel

SWEEP_VARIABLES = ("p_n2", "rho_db")
METHODS = ("monte_carlo", "closed_form")
SWEEP_CONSTRAINTS = ("conserved_sum", "fixed_pn1")
OAM_MODELS = ("vector", "circulant")

_SNR_SWEEP = {
    "sweep_variable": "rho_db",
    "grid_start": 0.0,
    "grid_stop": 30.0,
    "grid_step": 2.5,
    "p_n1": 0.2,
    "p_n2": 0.2,
    "p_f": 0.6,
    "schemes": ["cnoma_oam", "cnoma", "oma_oam"],
    "methods": ["monte_carlo", "closed_form"],
    "baseline_split": "matched",
}

# Figure 3 sweeps the OAM power at 15 dB; figures 4-6 share one SNR sweep and
# differ only in the column they plot (CCU, CEU, sum).
FIGURE_PRESETS: Dict[int, Dict[str, Any]] = {
    3: {
        "sweep_variable": "p_n2",
        "grid_start": 0.05,
        "grid_stop": 0.35,
        "grid_step": 0.05,
        "rho_db": 15.0,
        "p_f": 0.6,
        "p_n1": 0.2,
        "p_n2": 0.2,
        "schemes": ["cnoma_oam"],
        "methods": ["closed_form", "monte_carlo"],
        "sweep_constraint": "conserved_sum",
    },
    4: dict(_SNR_SWEEP),
    5: dict(_SNR_SWEEP),
    6: dict(_SNR_SWEEP),
}


def _checked_value(key: str, annotation: Any, value: Any) -> Any:
    """
    Convert a configuration value to its field type.

    Integers are accepted for float keys and integral floats (1e6 in JSON)
    for integer keys; anything else of the wrong type is rejected.

    Raises:
        ValueError: Naming the key when the value has the wrong type
    """
    expected = annotation
    if get_origin(annotation) is Union:
        if value is None:
            return None
        expected = next(arg for arg in get_args(annotation) if arg is not type(None))

    if expected is bool:
        if isinstance(value, bool):
            return value
    elif isinstance(value, bool):
        pass
    elif expected is int:
        if isinstance(value, numbers.Integral):
            return int(value)
        if isinstance(value, numbers.Real) and float(value).is_integer():
            return int(value)
    elif expected is float:
        if isinstance(value, numbers.Real):
            return float(value)
    elif expected is str:
        if isinstance(value, str):
            return value
    elif get_origin(expected) is list:
        if isinstance(value, (list, tuple)) and all(isinstance(item, str) for item in value):
            return list(value)
        raise ValueError(f"{key} must be a list of strings, got {value!r}")
    raise ValueError(f"{key} must be of type {getattr(expected, '__name__', expected)}, got {value!r}")


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; every field is a documented configuration key."""

    rho_db: float = 15.0
    p_f: float = 0.6
    p_n1: float = 0.2
    p_n2: float = 0.2
    total_power: float = 1.0
    k_bs_ccu: float = 5.0
    k_bs_ceu: float = 2.0
    k_ccu_ceu: float = 5.0
    omega_bs_ccu: float = 36.0
    omega_bs_ceu: float = 9.0
    omega_ccu_ceu: float = 36.0
    d_ccu: float = 0.5
    d_ceu: float = 1.0
    oam_mode: int = 1
    antennas: int = 4
    oam_model: str = "vector"
    max_order: int = 40
    tail_tolerance: float = 1.0e-10
    trials: int = 1_000_000
    seed: int = 7
    threads: int = 1
    block_size: int = 65_536
    baseline_split: str = "power_conserving"
    sweep_constraint: str = "conserved_sum"
    sweep_variable: str = "rho_db"
    grid_start: float = 0.0
    grid_stop: float = 30.0
    grid_step: float = 2.5
    schemes: List[str] = field(default_factory=lambda: ["cnoma_oam", "cnoma", "oma_oam"])
    methods: List[str] = field(default_factory=lambda: ["monte_carlo", "closed_form"])
    figure: Optional[int] = None
    output: Optional[str] = None
    db: Optional[str] = None
    verbose: bool = False

    def __post_init__(self) -> None:
        for item in fields(self):
            object.__setattr__(self, item.name, _checked_value(item.name, item.type, getattr(self, item.name)))
        if not math.isfinite(self.rho_db):
            raise ValueError(f"rho_db must be finite, got {self.rho_db}")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep_variable must be one of {SWEEP_VARIABLES}, got {self.sweep_variable!r}")
        if self.sweep_constraint not in SWEEP_CONSTRAINTS:
            raise ValueError(f"sweep_constraint must be one of {SWEEP_CONSTRAINTS}, got {self.sweep_constraint!r}")
        if self.oam_model not in OAM_MODELS:
            raise ValueError(f"oam_model must be one of {OAM_MODELS}, got {self.oam_model!r}")
        BaselineSplit.parse(self.baseline_split)
        for scheme in self.schemes:
            Scheme.parse(scheme)
        unknown_methods = [method for method in self.methods if method not in METHODS]
        if unknown_methods or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}, got {self.methods}")
        if not self.schemes:
            raise ValueError("schemes must not be empty")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if not self.grid_step > 0.0:
            raise ValueError(f"grid_step must be > 0, got {self.grid_step}")
        if self.grid_stop < self.grid_start:
            raise ValueError(f"grid_stop must be >= grid_start, got {self.grid_start}..{self.grid_stop}")
        if self.figure is not None and self.figure not in FIGURE_PRESETS:
            raise ValueError(f"figure must be one of {sorted(FIGURE_PRESETS)}, got {self.figure}")

    @classmethod
    def keys(cls) -> Tuple[str, ...]:
        """Get every accepted configuration key."""
        return tuple(item.name for item in fields(cls))

    @classmethod
    def from_layers(cls, *layers: Optional[Mapping[str, Any]]) -> "RunConfig":
        """
        Build a configuration from mappings applied in increasing precedence.

        A `figure` key in any layer inserts that figure's preset just above the
        defaults. None values in a layer leave the lower layer's value in place.

        Raises:
            ValueError: If any layer contains an unknown key or an invalid value
        """
        merged: Dict[str, Any] = {}
        for layer in layers:
            if not layer:
                continue
            unknown = sorted(set(layer) - set(cls.keys()))
            if unknown:
                raise ValueError(f"Unknown configuration keys: {unknown}")
            merged.update({key: value for key, value in layer.items() if value is not None})
        figure = merged.get("figure")
        if figure is not None:
            figure = _checked_value("figure", Optional[int], figure)
            if figure not in FIGURE_PRESETS:
                raise ValueError(f"figure must be one of {sorted(FIGURE_PRESETS)}, got {figure}")
            preset = {key: list(value) if isinstance(value, list) else value
                      for key, value in FIGURE_PRESETS[figure].items()}
            merged = {**preset, **merged, "figure": figure}
        return cls(**merged)

    @classmethod
    def for_figure(cls, figure: int, **overrides: Any) -> "RunConfig":
        """Get the preset configuration of one figure, with optional overrides."""
        return cls.from_layers({"figure": figure}, overrides)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a copy with some keys replaced."""
        unknown = sorted(set(overrides) - set(self.keys()))
        if unknown:
            raise ValueError(f"Unknown configuration keys: {unknown}")
        return replace(self, **overrides)

    def to_dict(self) -> Dict[str, Any]:
        """Get the configuration as a JSON-serialisable mapping."""
        return asdict(self)

    def links(self) -> LinkTriple:
        """Build the three fading links."""
        return LinkTriple(
            bs_ccu=RicianLink(self.k_bs_ccu, self.omega_bs_ccu, name="bs_ccu"),
            bs_ceu=RicianLink(self.k_bs_ceu, self.omega_bs_ceu, name="bs_ceu"),
            ccu_ceu=RicianLink(self.k_ccu_ceu, self.omega_ccu_ceu, name="ccu_ceu"),
        )

    def oam_channel(self) -> OamChannel:
        """Build the OAM channel of the configured model."""
        if self.oam_model == "circulant":
            return build_circulant_oam_channel(self.oam_mode, self.antennas)
        return build_oam_channel(self.oam_mode, self.antennas)

    def power(self) -> PowerAllocation:
        """Build the power allocation; raises InfeasibleAllocationError when it violates the constraints."""
        return PowerAllocation(p_n1=self.p_n1, p_n2=self.p_n2, p_f=self.p_f, total=self.total_power)

    def operating_point(self) -> OperatingPoint:
        """Build the operating point at rho_db."""
        return OperatingPoint(
            rho_db=self.rho_db,
            links=self.links(),
            oam=self.oam_channel(),
            power=self.power(),
            d_ccu=self.d_ccu,
            d_ceu=self.d_ceu,
        )

    def control(self) -> SeriesControl:
        """Build the series truncation rule."""
        return SeriesControl(max_order=self.max_order, tail_tolerance=self.tail_tolerance)

    def split(self) -> BaselineSplit:
        """Get the conventional CNOMA power split."""
        return BaselineSplit.parse(self.baseline_split)

    def grid(self) -> Tuple[float, ...]:
        """Get the inclusive sweep grid grid_start, grid_start + step, ..., grid_stop."""
        count = int(round((self.grid_stop - self.grid_start) / self.grid_step))
        values = self.grid_start + self.grid_step * np.arange(count + 1)
        return tuple(float(round(value, 12)) for value in values if value <= self.grid_stop + 1.0e-9)


def load_config(config_path: Path) -> Dict[str, Any]:
    """
    Load configuration keys from a JSON file.

    Args:
        config_path: Path to the configuration JSON file

    Returns:
        Configuration dictionary

    Raises:
        FileNotFoundError: If config file doesn't exist
        json.JSONDecodeError: If config file is invalid JSON
        ValueError: If the file is not a JSON object or contains unknown keys
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            config = json.load(f)
    except json.JSONDecodeError as exc:
        raise json.JSONDecodeError(f"Invalid JSON in config file: {exc}", exc.doc, exc.pos) from exc

    if not isinstance(config, dict):
        raise ValueError(f"Configuration file must contain a JSON object, got {type(config).__name__}")
    unknown = sorted(set(config) - set(RunConfig.keys()))
    if unknown:
        raise ValueError(f"Unknown configuration keys: {unknown}")
    return config


def create_sample_config(output_path: Path) -> None:
    """
    Write a configuration file containing every key at its default value.

    Args:
        output_path: Path where to save the sample configuration
    """
    sample = RunConfig().to_dict()
    with open(output_path, 'w', encoding='utf-8') as f:
        json.dump(sample, f, indent=2)
