"""
Configuration management utilities
"""

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from src.algorithms.baselines import MfocussParams
from src.errors import ArgumentError, ConfigError

logger = logging.getLogger(__name__)

ALGORITHMS = ("cpa", "icpa", "mbmp", "mfocuss")
FULL_SCALE = {"n_dims": 500, "n_atoms": 10000}
THREADS_ENV = "SP_THREADS"
RUNTIME_KEYS = ("n_workers", "full_scale", "output_path")


def _get_resource_path(relative_path):
    """Resolve a path relative to the project root"""
    base_path = os.path.dirname(os.path.abspath(__file__))
    # Go up to project root
    base_path = os.path.dirname(os.path.dirname(base_path))
    return os.path.join(base_path, relative_path)


def load_config(config_path="config.json"):
    """Load configuration from JSON file"""
    # Relative paths: project root first, then the current directory
    if not os.path.isabs(config_path):
        root_path = _get_resource_path(config_path)
        if os.path.exists(root_path):
            config_path = root_path

    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(config_path, 'r') as f:
        config = json.load(f)

    return config


def save_config(config: "ExperimentConfig", config_path: str):
    """
    Write an ExperimentConfig in the sectioned config.json layout

    The file loads back through load_experiment_config to an equal config.
    """
    data = config.to_dict()
    mfocuss = data.pop("mfocuss_params")
    mfocuss["lambda"] = mfocuss.pop("lam")
    runtime = {key: data.pop(key) for key in RUNTIME_KEYS}
    sections = {"experiment": data, "mfocuss": mfocuss, "runtime": runtime}
    parent = os.path.dirname(config_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(config_path, 'w') as f:
        json.dump(sections, f, indent=2)
        f.write('\n')
    return config_path


@dataclass
class ExperimentConfig:
    """Everything a benchmark experiment needs; defaults are the desk-scale protocol"""

    n_dims: int = 200
    n_atoms: int = 2000
    n_steps: int = 10
    k_values: List[int] = field(default_factory=lambda: [1, 5, 10, 20, 40])
    noise_ratio: float = 0.1
    novel_std: Optional[float] = None
    cpa_lambda: float = 0.4
    mfocuss_params: MfocussParams = field(default_factory=MfocussParams)
    mbmp_max_iters: int = 200
    n_trials: int = 10
    base_seed: int = 0
    algorithms: List[str] = field(default_factory=lambda: ["cpa", "mbmp", "mfocuss"])
    output_path: Optional[str] = None
    lambda_values: List[float] = field(default_factory=lambda: [10.0 ** e for e in range(-7, 0)])
    novel_amplitude_stds: List[float] = field(default_factory=lambda: [1.0, 10.0])
    reuse_dictionary: bool = False
    n_workers: Optional[int] = None
    full_scale: bool = False

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigError on the first broken invariant"""
        if self.n_dims < 1 or self.n_atoms < 1 or self.n_steps < 1:
            raise ConfigError("n_dims, n_atoms and n_steps must all be >= 1")
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be >= 1, got {self.n_trials}")
        if not self.k_values:
            raise ConfigError("k_values must not be empty")
        for k in self.k_values:
            if not 1 <= k < self.n_atoms:
                raise ConfigError(f"Each k must be in [1, n_atoms), got {k}")
        if self.noise_ratio < 0:
            raise ConfigError(f"noise_ratio must be >= 0, got {self.noise_ratio}")
        if self.novel_std is not None and self.novel_std < 0:
            raise ConfigError(f"novel_std must be >= 0, got {self.novel_std}")
        if not self.cpa_lambda > 0:
            raise ConfigError(f"cpa_lambda must be > 0, got {self.cpa_lambda}")
        if self.mbmp_max_iters < 1:
            raise ConfigError(f"mbmp_max_iters must be >= 1, got {self.mbmp_max_iters}")
        if self.base_seed < 0:
            raise ConfigError(f"base_seed must be >= 0, got {self.base_seed}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise ConfigError(f"algorithms must be a non-empty subset of {ALGORITHMS}, got {self.algorithms}")
        if not self.lambda_values or any(not lam > 0 for lam in self.lambda_values):
            raise ConfigError("lambda_values must be a non-empty list of positive values")
        if not self.novel_amplitude_stds or any(not s > 0 for s in self.novel_amplitude_stds):
            raise ConfigError("novel_amplitude_stds must be a non-empty list of positive values")
        if self.n_workers is not None and self.n_workers < 1:
            raise ConfigError(f"n_workers must be >= 1, got {self.n_workers}")
        return self

    def worker_count(self) -> int:
        """n_workers, else SP_THREADS, else 1"""
        if self.n_workers is not None:
            return self.n_workers
        raw = os.environ.get(THREADS_ENV)
        if raw:
            try:
                return max(1, int(raw))
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
        return 1

    def apply_full_scale(self) -> "ExperimentConfig":
        """Copy with the full-size dictionary (N=500, M=10000)"""
        logger.warning(
            "Full-size run: M=%d makes every CPA solve O(M^3) and the iCPA gain %d MB; "
            "expect hours rather than minutes",
            FULL_SCALE["n_atoms"], FULL_SCALE["n_atoms"] ** 2 * 8 // 2 ** 20,
        )
        return dataclasses.replace(self, full_scale=True, **FULL_SCALE)

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["mfocuss_params"] = dataclasses.asdict(self.mfocuss_params)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Build from flat field names or from the sectioned config.json layout"""
        data = _flatten_sections(data)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {unknown}")
        values = dict(data)
        if isinstance(values.get("mfocuss_params"), dict):
            params = dict(values["mfocuss_params"])
            if "lambda" in params:
                params["lam"] = params.pop("lambda")
            try:
                values["mfocuss_params"] = MfocussParams(**params)
            except (TypeError, ArgumentError) as exc:
                raise ConfigError(f"Invalid mfocuss_params: {exc}") from exc
        try:
            return cls(**values).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _flatten_sections(data: Dict[str, Any]) -> Dict[str, Any]:
    """Merge the config.json sections into flat ExperimentConfig keys"""
    if "experiment" not in data:
        return dict(data)
    flat = dict(data.get("experiment", {}))
    if "mfocuss" in data:
        flat["mfocuss_params"] = dict(data["mfocuss"])
    flat.update(data.get("runtime", {}))
    return flat


def load_experiment_config(config_path: Optional[str] = None,
                           overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Experiment configuration from a JSON file (or defaults) plus overrides

    Overrides whose value is None are ignored, so unset CLI flags keep the
    file's values.
    """
    data: Dict[str, Any] = {}
    if config_path is not None:
        try:
            data = load_config(config_path)
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: invalid JSON ({exc})") from exc
        data = _flatten_sections(data)

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    config = ExperimentConfig.from_dict(data)
    if config.full_scale:
        config = config.apply_full_scale()
    return config
