#!/usr/bin/env python3
"""
Run Configuration for ParetoCover
Loads, validates and snapshots the JSON configuration of a BO run.

This module provides:
- Default configuration with every tunable of a run
- Dotted-path access (config.get('acquisition.beta'))
- Strict merging: unknown keys are rejected with their dotted path
- Type and range validation
- Counter-hash seed derivation for iterations and replications
"""

import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional


# ============================================================================
# CONFIGURATION
# ============================================================================

SCHEMA_VERSION = 1
CONFIG_FILE = 'config.json'

ACQUISITION_KINDS = ('pehvi', 'wpehvi', 'iehvi', 'random')
SEED_NAMES = ('design', 'u_samples', 'optimizer', 'pareto', 'fit')

DEFAULT_RUN_CONFIG = {
    'schema_version': SCHEMA_VERSION,
    'problem': '4d',                       # catalog name or {"external": {...}}
    'initial_design': {
        'size': None                       # None: 10 * (n_x + n_u)
    },
    'budget': 20,                          # points added after the initial design
    'acquisition': {
        'kind': 'iehvi',                   # 'pehvi', 'wpehvi', 'iehvi', 'random'
        'beta': 10.0,                      # > 0 pessimistic conditional fronts
        'n_pareto': 256,                   # |X_pareto|
        'pareto_resample': True,           # new X_pareto every iteration
        'n_u': 32,                         # IEHVI U samples
        'crn': True,                       # keep the IEHVI U samples fixed
        'n_samples': 4096,                 # Sobol draws for 3-objective EHVI
        'reference': {
            'margin': 0.1,
            'floor': 1e-6,
            'fixed': None
        }
    },
    'optimizer': {
        'n_init': 512,                     # random probes
        'top_k': 5,                        # Nelder-Mead starts
        'max_iter': 100
    },
    'gp': {
        'n_restarts': 8,
        'warm_restarts': 1,                # fresh restarts next to the warm start
        'lengthscale_bounds': [1e-2, 1e2],
        'signal_variance_bounds': [1e-3, 1e3],
        'jitter': 1e-8,
        'max_jitter': 1e-2
    },
    'seeds': {
        'design': 0,
        'u_samples': 1,
        'optimizer': 2,
        'pareto': 3,
        'fit': 4
    },
    'output_dir': 'runs/run',
    'threads': 1
}


class ConfigError(ValueError):
    """Invalid configuration value; `path` is the dotted key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ============================================================================
# SEED DERIVATION
# ============================================================================

def derive_seed(master: int, *labels) -> int:
    """
    Deterministic 63-bit seed from a master seed and a label path.

    Example:
        >>> derive_seed(0, 'iehvi', 3) == derive_seed(0, 'iehvi', 3)
        True
    """
    digest = hashlib.sha256()
    digest.update(str(int(master)).encode('utf-8'))
    for label in labels:
        digest.update(b'/')
        digest.update(str(label).encode('utf-8'))
    return int.from_bytes(digest.digest()[:8], 'big') >> 1


# ============================================================================
# CONFIG DATA
# ============================================================================

def _merge(defaults: Dict[str, Any], overrides: Dict[str, Any], prefix: str = '') -> Dict[str, Any]:
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(path, "unknown key")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(path, "expected an object")
            merged[key] = _merge(defaults[key], value, prefix=f"{path}.")
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _valid_bounds(value) -> bool:
    return (isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value)
            and 0 < value[0] < value[1])


class RunConfig:
    """Validated run configuration."""

    def __init__(self, data: Optional[Dict[str, Any]] = None):
        """Merge `data` over the defaults and validate."""
        data = data or {}
        if 'schema_version' in data and data['schema_version'] != SCHEMA_VERSION:
            raise ConfigError('schema_version',
                              f"unsupported version {data['schema_version']!r} (expected {SCHEMA_VERSION})")
        self.data = _merge(DEFAULT_RUN_CONFIG, data)
        self.validate()

    def __repr__(self):
        return f"<RunConfig problem={self.data['problem']!r} kind={self.get('acquisition.kind')}>"

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Value at a dotted path.

        Example:
            >>> RunConfig().get('acquisition.beta')
            10.0
        """
        value = self.data
        for key in key_path.split('.'):
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default
        return value

    def set(self, key_path: str, value: Any):
        """Set an existing dotted key and revalidate."""
        keys = key_path.split('.')
        data = self.data
        for i, key in enumerate(keys[:-1]):
            if not isinstance(data.get(key), dict):
                raise ConfigError('.'.join(keys[:i + 1]), "unknown key")
            data = data[key]
        if keys[-1] not in data:
            raise ConfigError(key_path, "unknown key")
        data[keys[-1]] = value
        self.validate()

    def validate(self):
        """Raise ConfigError for the first invalid field."""
        checks = [
            ('budget', lambda v: _is_int(v) and v >= 0, "must be an integer >= 0"),
            ('initial_design.size', lambda v: v is None or (_is_int(v) and v >= 2),
             "must be null or an integer >= 2"),
            ('acquisition.kind', lambda v: v in ACQUISITION_KINDS,
             f"must be one of {', '.join(ACQUISITION_KINDS)}"),
            ('acquisition.beta', _is_number, "must be a number"),
            ('acquisition.n_pareto', lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
            ('acquisition.pareto_resample', lambda v: isinstance(v, bool), "must be true or false"),
            ('acquisition.n_u', lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
            ('acquisition.crn', lambda v: isinstance(v, bool), "must be true or false"),
            ('acquisition.n_samples', lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
            ('acquisition.reference.margin', lambda v: _is_number(v) and v >= 0, "must be >= 0"),
            ('acquisition.reference.floor', lambda v: _is_number(v) and v > 0, "must be > 0"),
            ('acquisition.reference.fixed',
             lambda v: v is None or (isinstance(v, list) and all(_is_number(x) for x in v)),
             "must be null or a list of numbers"),
            ('optimizer.n_init', lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
            ('optimizer.top_k', lambda v: _is_int(v) and v >= 0, "must be an integer >= 0"),
            ('optimizer.max_iter', lambda v: _is_int(v) and v >= 0, "must be an integer >= 0"),
            ('gp.n_restarts', lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
            ('gp.warm_restarts', lambda v: _is_int(v) and v >= 0, "must be an integer >= 0"),
            ('gp.lengthscale_bounds', _valid_bounds, "must be [low, high] with 0 < low < high"),
            ('gp.signal_variance_bounds', _valid_bounds, "must be [low, high] with 0 < low < high"),
            ('gp.jitter', lambda v: _is_number(v) and v >= 0, "must be >= 0"),
            ('gp.max_jitter', lambda v: _is_number(v) and v >= self.data['gp']['jitter'],
             "must be >= gp.jitter"),
            ('output_dir', lambda v: isinstance(v, str) and v != '', "must be a non-empty path"),
            ('threads', lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        ]
        checks += [(f"seeds.{name}", _is_int, "must be an integer") for name in SEED_NAMES]

        for path, check, message in checks:
            if not check(self.get(path)):
                raise ConfigError(path, f"{message} (got {self.get(path)!r})")

        problem = self.data['problem']
        if not (isinstance(problem, str) or (isinstance(problem, dict) and set(problem) == {'external'})):
            raise ConfigError('problem', "must be a catalog name or {\"external\": {...}}")

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.data)

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> 'RunConfig':
        return RunConfig(data)

    def apply_master_seed(self, master: int):
        """Replace every seed by one derived from a single master seed."""
        for name in SEED_NAMES:
            self.data['seeds'][name] = derive_seed(master, name)
        self.validate()

    def initial_size(self, n_x: int, n_u: int) -> int:
        size = self.get('initial_design.size')
        return 10 * (n_x + n_u) if size is None else size


# ============================================================================
# PERSISTENCE
# ============================================================================

def load_run_config(path) -> RunConfig:
    """
    Read and validate a JSON run configuration.

    Raises:
        ConfigError: for malformed JSON or invalid fields
    """
    logger = logging.getLogger('ParetoCover')
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError('<file>', f"{path} is not valid JSON: {e}") from e
    except OSError as e:
        logger.error(f"Cannot read config {path}: {e}")
        raise ConfigError('<file>', f"cannot read {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError('<file>', "top level must be an object")
    return RunConfig(data)


def save_run_config(config: RunConfig, run_dir) -> Path:
    """Write the effective configuration snapshot into the run directory."""
    logger = logging.getLogger('ParetoCover')
    run_dir = Path(run_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        path = run_dir / CONFIG_FILE
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(config.to_dict(), f, indent=2, ensure_ascii=False)
        logger.debug(f"Config snapshot saved: {path}")
        return path
    except Exception as e:
        logger.error(f"Failed to save config snapshot: {e}")
        raise


def same_experiment(a: RunConfig, b: RunConfig) -> bool:
    """True when two configs describe the same run (threads and output_dir ignored)."""
    left, right = a.to_dict(), b.to_dict()
    for key in ('threads', 'output_dir'):
        left.pop(key)
        right.pop(key)
    return left == right


def describe(config: RunConfig) -> List[str]:
    """Summary lines for the console banner."""
    return [
        f"  Problem: {config.get('problem')}",
        f"  Acquisition: {config.get('acquisition.kind')} (beta={config.get('acquisition.beta')}, "
        f"|X_pareto|={config.get('acquisition.n_pareto')})",
        f"  Initial design: {config.get('initial_design.size') or 'rule of thumb'}",
        f"  Budget: {config.get('budget')}",
        f"  Seeds: {config.get('seeds')}",
        f"  Output: {config.get('output_dir')}",
    ]
