#!/usr/bin/env python3
"""
Загрузка и проверка YAML-сценариев верификации.

Схема (schema_version: 1):
    name, suite, seed
    geometry:      kind, extent, spacing, dimension, sizes
    model:         stencil, flux, flux_quanta, twist_quanta, mass, wilson_r, windings
    filter:        type, t, method, degree_cap, target
    folner:        schedule, radius, taper
    limit_policy:  window, tolerance, divergence
    tolerances:    имя → положительное число
    diagnostics:   analytic_bias
    output:        dir, format
    options:       параметры конкретного набора

Неизвестные ключи - ошибка (ScenarioConfigError называет поле).
"""

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from folner_trace import LimitPolicy
from scenario_report import FORMATS

SCHEMA_VERSION = 1

SUITES = ("verify-torus", "verify-plane", "verify-toeplitz",
          "cocycle-suite", "cover-suite", "updo-suite")

SECTION_KEYS = {
    'geometry': {'kind', 'extent', 'spacing', 'dimension', 'sizes'},
    'model': {'stencil', 'flux', 'flux_quanta', 'twist_quanta', 'mass', 'wilson_r', 'windings'},
    'filter': {'type', 't', 'method', 'degree_cap', 'target'},
    'folner': {'schedule', 'radius', 'taper'},
    'limit_policy': {'window', 'tolerance', 'divergence'},
    'diagnostics': {'analytic_bias'},
    'output': {'dir', 'format'},
}
TOP_LEVEL_KEYS = {'schema_version', 'name', 'suite', 'seed', 'tolerances', 'options'} | set(SECTION_KEYS)

DEFAULT_TOLERANCES = {
    'mckean_singer': 1e-8,
    'topological': 1e-6,
    'chebyshev': 1e-8,
    'plane_relative': 0.10,
    'monotone_floor': 1e-9,
    'toeplitz_residual': 1e-6,
    'cocycle': 1e-10,
    'pou': 1e-12,
    'assembly': 1e-8,
    'estimate_relative': 0.02,
}

SUITE_OPTIONS = {
    'verify-torus': {'check_chebyshev', 'check_quasilocality'},
    'verify-plane': {'kernel_threshold'},
    'verify-toeplitz': {'toeplitz_size', 'pairing_sizes', 'summability_size'},
    'cocycle-suite': {'n_modules', 'max_m', 'sites', 'rank'},
    'cover-suite': {'window', 'lengths', 'n_graphs', 'graph_nodes', 'graph_radius',
                    'n_pairs', 'pair_propagation', 'pair_window', 'pair_schedule'},
    'updo-suite': {'circle_size', 'patch_spacings', 'taper', 'xi_max', 'xi_step'},
}

FILTER_TYPES = ("gaussian",)


class ScenarioConfigError(ValueError):
    """Некорректный сценарий; field - путь к полю (например, 'folner.schedule')."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class Scenario:
    name: str
    suite: str
    seed: int
    geometry: Dict[str, Any] = field(default_factory=dict)
    model: Dict[str, Any] = field(default_factory=dict)
    filter: Dict[str, Any] = field(default_factory=dict)
    folner: Dict[str, Any] = field(default_factory=dict)
    limit_policy: LimitPolicy = field(default_factory=LimitPolicy)
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    output: Dict[str, Any] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None

    def tolerance(self, key: str) -> float:
        return float(self.tolerances[key])

    def option(self, key: str, default=None):
        return self.options.get(key, default)

    @property
    def filter_times(self):
        t = self.filter.get('t', 1.0)
        return [float(v) for v in (t if isinstance(t, list) else [t])]


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_keys(section: Dict[str, Any], allowed, prefix: str):
    if not isinstance(section, dict):
        raise ScenarioConfigError(prefix, "ожидается словарь")
    for key in section:
        if key not in allowed:
            raise ScenarioConfigError(f"{prefix}.{key}" if prefix else str(key), "неизвестный ключ")


def _check_schedule(schedule, field_name: str):
    if not isinstance(schedule, list) or not schedule:
        raise ScenarioConfigError(field_name, "нужен непустой список размеров")
    for value in schedule:
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ScenarioConfigError(field_name, f"размер {value!r} не положительное целое")
    if any(b <= a for a, b in zip(schedule[:-1], schedule[1:])):
        raise ScenarioConfigError(field_name, "размеры должны строго возрастать")


def validate_scenario(raw: Any, suite: Optional[str] = None, source: Optional[Path] = None) -> Scenario:
    """
    Проверить разобранный YAML и построить Scenario.

    Args:
        raw: содержимое YAML
        suite: ожидаемый набор (подкоманда CLI)

    Raises:
        ScenarioConfigError: нарушение схемы (сообщение называет поле)
    """
    if not isinstance(raw, dict):
        raise ScenarioConfigError("<root>", "сценарий должен быть словарём")
    _check_keys(raw, TOP_LEVEL_KEYS, "")

    if raw.get('schema_version') != SCHEMA_VERSION:
        raise ScenarioConfigError(
            "schema_version", f"ожидается {SCHEMA_VERSION}, получено {raw.get('schema_version')!r}"
        )

    scenario_suite = raw.get('suite', suite)
    if scenario_suite not in SUITES:
        raise ScenarioConfigError("suite", f"неизвестный набор {scenario_suite!r}, ожидается {SUITES}")
    if suite is not None and scenario_suite != suite:
        raise ScenarioConfigError("suite", f"сценарий для {scenario_suite!r}, а запущен {suite!r}")

    name = raw.get('name', scenario_suite)
    if not isinstance(name, str) or not name or any(c in name for c in '/\\'):
        raise ScenarioConfigError("name", f"некорректное имя {name!r}")

    seed = raw.get('seed', 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ScenarioConfigError("seed", f"нужно неотрицательное целое, получено {seed!r}")

    sections = {}
    for section, allowed in SECTION_KEYS.items():
        value = raw.get(section) or {}
        _check_keys(value, allowed, section)
        sections[section] = copy.deepcopy(value)

    folner = sections['folner']
    if 'schedule' in folner:
        _check_schedule(folner['schedule'], "folner.schedule")
    for key in ('radius', 'taper'):
        if key in folner and (not _is_number(folner[key]) or folner[key] <= 0):
            raise ScenarioConfigError(f"folner.{key}", "нужно положительное число")

    filter_spec = sections['filter']
    if filter_spec.get('type', 'gaussian') not in FILTER_TYPES:
        raise ScenarioConfigError("filter.type", f"ожидается один из {FILTER_TYPES}")
    times = filter_spec.get('t', 1.0)
    for t in (times if isinstance(times, list) else [times]):
        if not _is_number(t) or t <= 0:
            raise ScenarioConfigError("filter.t", f"время {t!r} должно быть положительным")
    if filter_spec.get('method', 'eigen') not in ("eigen", "chebyshev"):
        raise ScenarioConfigError("filter.method", "ожидается 'eigen' или 'chebyshev'")

    tolerances = dict(DEFAULT_TOLERANCES)
    raw_tolerances = raw.get('tolerances') or {}
    _check_keys(raw_tolerances, set(DEFAULT_TOLERANCES), "tolerances")
    for key, value in raw_tolerances.items():
        if not _is_number(value) or value <= 0:
            raise ScenarioConfigError(f"tolerances.{key}", f"допуск должен быть > 0, получено {value!r}")
        tolerances[key] = float(value)

    try:
        policy = LimitPolicy(**sections['limit_policy'])
    except (TypeError, ValueError) as e:
        raise ScenarioConfigError("limit_policy", str(e)) from e

    bias = sections['diagnostics'].get('analytic_bias', 0.0)
    if not _is_number(bias):
        raise ScenarioConfigError("diagnostics.analytic_bias", "нужно число")

    fmt = sections['output'].get('format', 'both')
    if fmt not in FORMATS:
        raise ScenarioConfigError("output.format", f"ожидается один из {FORMATS}")

    options = raw.get('options') or {}
    _check_keys(options, SUITE_OPTIONS[scenario_suite], "options")
    if 'pair_schedule' in options:
        _check_schedule(options['pair_schedule'], "options.pair_schedule")
    if 'lengths' in options:
        _check_schedule(options['lengths'], "options.lengths")

    return Scenario(name, scenario_suite, seed, sections['geometry'], sections['model'],
                    filter_spec, folner, policy, tolerances, sections['diagnostics'],
                    sections['output'], copy.deepcopy(options), source)


def load_scenario(path: Path, suite: Optional[str] = None) -> Scenario:
    """
    Прочитать и проверить файл сценария.

    Raises:
        ScenarioConfigError: файл не найден, не разбирается или нарушает схему
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioConfigError("--config", f"файл не найден: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ScenarioConfigError("--config", f"YAML не разбирается: {e}") from e
    return validate_scenario(raw, suite, path)
