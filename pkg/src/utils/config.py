"""
Run configuration: a sectioned JSON document (see config/settings.json).

Every key is required and unknown keys are rejected; the offending dotted key
travels on the ConfigError. The config hash covers every section except
`output`, so relocating a run does not change the hash embedded in its files.
"""
import copy
import hashlib
import json
from dataclasses import dataclass, asdict
from typing import List, Union

from src.utils.errors import ConfigError, LabError
from src.utils.logger import setup_logger

logger = setup_logger('Config')

SCHEMA = {
    'construction': {'delta': float, 'gamma': float, 'beta': float, 'R': float, 'R_list': list,
                     'mode_index': (str, int)},
    'pair': {'p': (float, str), 'q': float},
    'eigen': {'L': float, 'N': int, 'count': int, 'sector': float, 'sector_penalty': float,
              'oversample': int, 'maxiter': int},
    'grid': {'padding': float, 'points_per_mode_scale': float, 'z_margin': float, 'y_margin': float,
             'max_points': int},
    'tolerance': {'eigen_residual': float, 'boundary_decay': float, 'slope': float, 'slope_slack': float,
                  'quadrature_rtol': float, 'quadrature_max_nodes': int, 'blowup_tail': int,
                  'free_control_ratio': float},
    'evolve': {'R': float, 'dt': float, 'checkpoints': int, 'max_dt_potential': float,
               'max_dt_frequency': float},
    'output': {'directory': str},
}


@dataclass(frozen=True)
class ConstructionConfig:
    delta: float
    gamma: float
    beta: float
    R: float
    R_list: List[float]
    mode_index: Union[str, int]


@dataclass(frozen=True)
class PairConfig:
    p: Union[float, str]
    q: float


@dataclass(frozen=True)
class EigenConfig:
    L: float
    N: int
    count: int
    sector: float
    sector_penalty: float
    oversample: int
    maxiter: int


@dataclass(frozen=True)
class GridPolicyConfig:
    padding: float
    points_per_mode_scale: float
    z_margin: float
    y_margin: float
    max_points: int


@dataclass(frozen=True)
class ToleranceConfig:
    eigen_residual: float
    boundary_decay: float
    slope: float
    slope_slack: float
    quadrature_rtol: float
    quadrature_max_nodes: int
    blowup_tail: int
    free_control_ratio: float


@dataclass(frozen=True)
class EvolveConfig:
    R: float
    dt: float
    checkpoints: int
    max_dt_potential: float
    max_dt_frequency: float


@dataclass(frozen=True)
class OutputConfig:
    directory: str


@dataclass(frozen=True)
class RunConfig:
    construction: ConstructionConfig
    pair: PairConfig
    eigen: EigenConfig
    grid: GridPolicyConfig
    tolerance: ToleranceConfig
    evolve: EvolveConfig
    output: OutputConfig

    @property
    def hash(self):
        return config_hash(self.to_dict())

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, output_directory=None):
        data = self.to_dict()
        if output_directory is not None:
            data['output']['directory'] = output_directory
        return parse_config(data)


_SECTION_TYPES = {
    'construction': ConstructionConfig,
    'pair': PairConfig,
    'eigen': EigenConfig,
    'grid': GridPolicyConfig,
    'tolerance': ToleranceConfig,
    'evolve': EvolveConfig,
    'output': OutputConfig,
}


def config_hash(data):
    """First 16 hex digits of SHA-256 over the canonical JSON, `output` excluded."""
    hashed = {k: v for k, v in data.items() if k != 'output'}
    canonical = json.dumps(hashed, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


def _coerce(value, expected, key):
    types = expected if isinstance(expected, tuple) else (expected,)
    if isinstance(value, bool):
        raise ConfigError(f"'{key}' must not be a boolean", key)
    if isinstance(value, int) and float in types and int not in types:
        return float(value)
    if isinstance(value, float) and int in types and float not in types:
        if not value.is_integer():
            raise ConfigError(f"'{key}' must be an integer, got {value}", key)
        return int(value)
    if not isinstance(value, types):
        names = ' or '.join(t.__name__ for t in types)
        raise ConfigError(f"'{key}' must be {names}, got {type(value).__name__}", key)
    return value


def _check_keys(data, allowed, prefix):
    for key in data:
        if key not in allowed:
            dotted = f'{prefix}.{key}' if prefix else key
            raise ConfigError(f"Unknown config key '{dotted}'", dotted)
    for key in allowed:
        if key not in data:
            dotted = f'{prefix}.{key}' if prefix else key
            raise ConfigError(f"Missing config key '{dotted}'", dotted)


def parse_config(data):
    """Build and validate a RunConfig from a plain dict."""
    if not isinstance(data, dict):
        raise ConfigError("Config root must be an object")
    data = copy.deepcopy(data)
    _check_keys(data, SCHEMA, '')
    sections = {}
    for name, fields in SCHEMA.items():
        section = data[name]
        if not isinstance(section, dict):
            raise ConfigError(f"Config section '{name}' must be an object", name)
        _check_keys(section, fields, name)
        values = {key: _coerce(section[key], expected, f'{name}.{key}') for key, expected in fields.items()}
        sections[name] = values

    construction = sections['construction']
    construction['R_list'] = [float(_coerce(r, float, 'construction.R_list')) for r in construction['R_list']]
    if isinstance(construction['mode_index'], str) and construction['mode_index'] != 'auto':
        raise ConfigError("'construction.mode_index' must be 'auto' or an integer", 'construction.mode_index')
    pair = sections['pair']
    if isinstance(pair['p'], str):
        if pair['p'] != 'inf':
            raise ConfigError("'pair.p' must be a number or 'inf'", 'pair.p')
    config = RunConfig(**{name: _SECTION_TYPES[name](**values) for name, values in sections.items()})
    _validate_ranges(config)
    return config


def _validate_ranges(config):
    # Imported here: the domain modules import the logger and errors from utils
    from src.analysis.scaling_lab import admissible
    from src.core.grids import GridSpec2D
    from src.core.quasimode import ConstructionParams

    checks = [
        ('construction', lambda: ConstructionParams(config.construction.delta, config.construction.gamma,
                                                    config.construction.beta, config.construction.R)),
        ('construction.R_list', lambda: [ConstructionParams(config.construction.delta, config.construction.gamma,
                                                            config.construction.beta, r)
                                         for r in config.construction.R_list]),
        ('pair', lambda: admissible(config.pair.p, config.pair.q)),
        ('eigen', lambda: GridSpec2D(config.eigen.L, config.eigen.N)),
        ('evolve.R', lambda: ConstructionParams(config.construction.delta, config.construction.gamma,
                                                config.construction.beta, config.evolve.R)),
    ]
    for key, check in checks:
        try:
            check()
        except LabError as e:
            raise ConfigError(f"Invalid '{key}': {e}", key)
    positives = {
        'eigen.count': config.eigen.count, 'eigen.oversample': config.eigen.oversample,
        'eigen.maxiter': config.eigen.maxiter, 'grid.points_per_mode_scale': config.grid.points_per_mode_scale,
        'grid.max_points': config.grid.max_points, 'tolerance.eigen_residual': config.tolerance.eigen_residual,
        'tolerance.quadrature_rtol': config.tolerance.quadrature_rtol,
        'tolerance.quadrature_max_nodes': config.tolerance.quadrature_max_nodes,
        'tolerance.blowup_tail': config.tolerance.blowup_tail, 'evolve.dt': config.evolve.dt,
        'evolve.checkpoints': config.evolve.checkpoints,
    }
    for key, value in positives.items():
        if not value > 0:
            raise ConfigError(f"'{key}' must be positive, got {value}", key)
    if config.grid.padding < 2.0:
        raise ConfigError(f"'grid.padding' must be at least 2, got {config.grid.padding}", 'grid.padding')


def load_config(path):
    """Read, validate and return (RunConfig, hash) from a JSON file."""
    logger.debug(f"Loading run config from {path}")
    try:
        with open(path, 'r') as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    config = parse_config(data)
    logger.info(f"Successfully loaded config {path} (hash {config.hash})")
    return config, config.hash
