#!/usr/bin/env python3
"""
Настройки index_workbench: корень репозитория, config/workbench.yaml, .env и калибровка.

    from config_loader import get_path, get_cache_dir, load_settings, load_calibration

    settings = load_settings()              # DEFAULT_SETTINGS, перекрытые workbench.yaml
    reports = get_path('reports')           # user_data/reports относительно корня
    cache = get_cache_dir(args.cache)       # --cache > WORKBENCH_CACHE_DIR > paths.cache

Запуск модуля напрямую печатает итоговые настройки и константы калибровки.
"""

import copy
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import dotenv_values, load_dotenv

# system/scripts/config_loader.py -> корень репозитория
_ROOT = Path(__file__).resolve().parents[2]
_CONFIG_DIR = _ROOT / "config"

CACHE_ENV_VAR = "WORKBENCH_CACHE_DIR"
CALIBRATION_SCHEMA_VERSION = 1

DEFAULT_SETTINGS: Dict[str, Any] = {
    'project': {'name': 'index_workbench'},
    'paths': {
        'reports': 'user_data/reports',
        'cache': 'user_data/cache',
        'scenarios': 'config/scenarios',
    },
    'operator_algebra': {
        'dense_cap': 4096,
        # Пары (R, L), для которых проверяется суммируемость
        'audit_pairs': [[3.141592653589793, 1.0], [8.0, 0.125]],
    },
    'functional_calculus': {
        'dense_cap': 8192,
        'chebyshev_degree_cap': 2000,
        'chebyshev_target': 1e-10,
        'enclosure_inflation': 1.01,
        'kernel_threshold': 1e-6,
    },
    'models': {
        'stencil': 'wilson',
        'wilson_mass': 1.0,
        'wilson_r': 1.0,
    },
}


def load_env_vars() -> Dict[str, str]:
    """
    Подхватить .env из корня (уже выставленные переменные не трогаются).

    Returns:
        Dict[str, str]: пары из .env; пустой словарь, если файла нет или он битый
    """
    env_file = _ROOT / ".env"
    if not env_file.exists():
        return {}
    try:
        load_dotenv(env_file, override=False)
        return {k: v for k, v in dotenv_values(env_file).items() if v is not None}
    except Exception as e:
        print(f"⚠️  .env не прочитан ({e}), работаем с os.environ", file=sys.stderr)
        return {}


def get_env_var(var_name: str, default: Optional[str] = None) -> Optional[str]:
    load_env_vars()
    return os.environ.get(var_name, default)


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Рекурсивное наложение словарей, base не меняется."""
    result = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = _merge(result[key], value)
        else:
            result[key] = value
    return result


def load_settings() -> Dict[str, Any]:
    """
    DEFAULT_SETTINGS, перекрытые config/workbench.yaml.

    Отсутствующий или нечитаемый workbench.yaml не ошибка: остаются значения по умолчанию,
    во втором случае с предупреждением в stderr.
    """
    settings_file = _CONFIG_DIR / "workbench.yaml"
    if not settings_file.exists():
        return copy.deepcopy(DEFAULT_SETTINGS)
    try:
        with open(settings_file, 'r', encoding='utf-8') as f:
            loaded = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        print(f"⚠️  workbench.yaml пропущен: {e}", file=sys.stderr)
        return copy.deepcopy(DEFAULT_SETTINGS)
    return _merge(DEFAULT_SETTINGS, loaded)


def get_path(path_name: str) -> Path:
    """
    Каталог из секции paths; относительные пути считаются от корня.

    Raises:
        KeyError: если такого имени в paths нет
    """
    paths = load_settings().get('paths', {})
    if path_name not in paths:
        raise KeyError(f"paths.{path_name} нет в workbench.yaml (есть: {', '.join(sorted(paths))})")
    path = Path(paths[path_name])
    return path if path.is_absolute() else _ROOT / path


def get_cache_dir(override: Optional[str] = None) -> Path:
    """Каталог кэша разложений: флаг --cache > WORKBENCH_CACHE_DIR > paths.cache."""
    if override:
        return Path(override)
    env_value = get_env_var(CACHE_ENV_VAR)
    if env_value:
        return Path(env_value)
    return get_path('cache')


def load_calibration(path: Optional[Path] = None) -> Dict[str, Any]:
    """
    Загрузить версионированный файл калибровки.

    Схема:
        schema_version: 1
        version: "<строка>"
        constants:
          <имя>: {re: float, im: float, note: str}

    Returns:
        Dict[str, Any]: {'version': ..., 'constants': {имя: complex}}

    Raises:
        ValueError: если файла нет или он не соответствует схеме
    """
    path = Path(path) if path is not None else _CONFIG_DIR / "calibration.yaml"
    if not path.exists():
        raise ValueError(f"Файл калибровки не найден: {path}")

    with open(path, 'r', encoding='utf-8') as f:
        raw = yaml.safe_load(f) or {}

    if raw.get('schema_version') != CALIBRATION_SCHEMA_VERSION:
        raise ValueError(
            f"calibration.schema_version: ожидается {CALIBRATION_SCHEMA_VERSION}, "
            f"получено {raw.get('schema_version')!r}"
        )
    if 'version' not in raw or not isinstance(raw.get('constants'), dict):
        raise ValueError("calibration: обязательны поля 'version' и 'constants'")

    constants = {}
    for name, entry in raw['constants'].items():
        if not isinstance(entry, dict) or 're' not in entry or 'im' not in entry:
            raise ValueError(f"calibration.constants.{name}: нужны поля 're' и 'im'")
        constants[name] = complex(float(entry['re']), float(entry['im']))

    return {'version': str(raw['version']), 'constants': constants}


load_env_vars()


if __name__ == "__main__":
    settings = load_settings()
    print(f"📂 {settings['project']['name']} @ {_ROOT}")
    for name in settings['paths']:
        print(f"   {name:<10} {get_path(name)}")
    print(f"   {'cache*':<10} {get_cache_dir()}  (с учётом {CACHE_ENV_VAR})")
    try:
        calibration = load_calibration()
    except ValueError as e:
        print(f"❌ {e}")
        sys.exit(1)
    print(f"\n🔧 calibration {calibration['version']}")
    for name, value in sorted(calibration['constants'].items()):
        print(f"   {name}: {value:.12g}")
