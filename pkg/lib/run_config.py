"""
Run configuration: profiles, config files and persistence

Precedence, lowest first: profile defaults, config file, command-line flags.
"""

from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError

from . import __version__
from .errors import ConfigError, IoError
from .models import Profile, RunConfig

CONFIG_FILE = 'config.yaml'
VERSION_FILE = 'version.txt'

PROFILE_DEFAULTS: Dict[Profile, Dict[str, Any]] = {
    Profile.PAPER: {'samples_per_pair': 1000, 'folds': 10, 'fold_limit': None, 'epochs': 12, 'batch_size': 128},
    # three folds of the ten-fold plan; folds must divide the 100 pairs
    Profile.QUICK: {'samples_per_pair': 200, 'folds': 10, 'fold_limit': 3, 'epochs': 6, 'batch_size': 128},
    Profile.CUSTOM: {},
}


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a flat YAML mapping of RunConfig keys"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'Config file not found: {path}')
    try:
        data = yaml.safe_load(path.read_text(encoding='utf-8'))
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f'Cannot read config file {path}: {e}')

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f'{path}: expected key-value pairs at top level')
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f'{path}: config must be flat, nested values for {", ".join(map(str, nested))}')
    return {str(k).replace('-', '_'): v for k, v in data.items()}


def _profile_of(*sources: Dict[str, Any]) -> Profile:
    for source in reversed(sources):
        if source.get('profile') is not None:
            try:
                return Profile(source['profile'])
            except ValueError:
                raise ConfigError(f"Unknown profile '{source['profile']}' "
                                  f"(choose from {', '.join(p.value for p in Profile)})")
    return Profile.PAPER


def build_run_config(file_values: Optional[Dict[str, Any]] = None,
                     cli_values: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Merge profile defaults, config file and CLI values into one validated RunConfig"""
    file_values = file_values or {}
    cli_values = {k: v for k, v in (cli_values or {}).items() if v is not None}
    profile = _profile_of(file_values, cli_values)

    merged = {**PROFILE_DEFAULTS[profile], **file_values, **cli_values, 'profile': profile}
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        problems = '; '.join(f"{'.'.join(map(str, err['loc'])) or 'config'}: {err['msg']}" for err in e.errors())
        raise ConfigError(f'Invalid configuration: {problems}')


def new_run_id() -> str:
    return datetime.now().strftime('%Y%m%d-%H%M%S')


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    return config.model_dump(mode='json')


def persist_config(config: RunConfig, directory: Path) -> Path:
    """Write config.yaml and version.txt into ``directory``"""
    directory = Path(directory)
    path = directory / CONFIG_FILE
    try:
        directory.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(config_to_dict(config), sort_keys=False), encoding='utf-8')
        (directory / VERSION_FILE).write_text(__version__ + '\n', encoding='utf-8')
    except OSError as e:
        raise IoError(path, e)
    return path


def load_persisted_config(directory: Path) -> RunConfig:
    """Rebuild the exact RunConfig written by persist_config"""
    values = load_config_file(Path(directory) / CONFIG_FILE)
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(f'Invalid persisted configuration in {directory}: {e}')
