#!/usr/bin/env python3
"""
Запуск сценариев верификации index_workbench.

Конвейер сценария: геометрия → модель → фильтр → следы → формы → сравнение.
Результат - JSON-отчёт, CSV-таблица сходимости и файл времён.

Коды выхода:
    0 - все критерии пройдены
    1 - хотя бы один критерий провален (или конвейер упал)
    2 - некорректный сценарий

Использование:
    python system/scripts/run_scenario.py verify-torus
    python system/scripts/run_scenario.py verify-plane --config config/scenarios/plane.yaml --out /tmp/r
"""

import argparse
import logging
import sys
import traceback
from datetime import datetime
from pathlib import Path
from typing import Optional, Tuple

# Добавить system/scripts в sys.path для импорта config_loader
SCRIPT_DIR = Path(__file__).parent
sys.path.insert(0, str(SCRIPT_DIR))

from config_loader import get_cache_dir, get_path, load_calibration, load_settings
from functional_calculus import EigenCache
from lattice_geometry import build_lattice
from scenario_config import SUITES, ScenarioConfigError, load_scenario
from scenario_report import FORMATS, Report, emit_report
from verification_suites import SUITE_RUNNERS, SuiteContext

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID_CONFIG = 2

MAX_SEED = 2 ** 64 - 1

DEFAULT_SCENARIOS = {
    'verify-torus': 'torus.yaml',
    'verify-plane': 'plane.yaml',
    'verify-toeplitz': 'toeplitz.yaml',
    'cocycle-suite': 'cocycle.yaml',
    'cover-suite': 'cover.yaml',
    'updo-suite': 'updo.yaml',
}

# Геометрия, которую набор достраивает по умолчанию (для предварительной проверки)
DEFAULT_GEOMETRY = {
    'verify-plane': {'kind': 'plane-window', 'extent': 64},
    'cover-suite': {'kind': 'plane-window', 'extent': 32},
}


def setup_logging(logs_dir: Path, name: str):
    """Журнал в <out>/logs и в stdout."""
    logs_dir.mkdir(parents=True, exist_ok=True)
    today = datetime.now().strftime("%Y-%m-%d")
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(logs_dir / f"{name}_{today}.log", encoding='utf-8'),
            logging.StreamHandler(sys.stdout)
        ]
    )


def _preflight(scenario):
    """Проверить геометрию до запуска тяжёлых вычислений."""
    if scenario.suite not in DEFAULT_GEOMETRY:
        return
    geometry = dict(DEFAULT_GEOMETRY[scenario.suite])
    geometry.update(scenario.geometry)
    try:
        build_lattice(geometry)
    except (TypeError, ValueError) as e:
        raise ScenarioConfigError("geometry", str(e)) from e


def run_scenario(config_path: Path, suite: Optional[str] = None, out_dir: Optional[Path] = None,
                 seed: Optional[int] = None, fmt: Optional[str] = None,
                 cache_dir: Optional[str] = None) -> Tuple[Report, int]:
    """
    Выполнить сценарий и записать отчёт.

    Returns:
        (Report, код выхода 0/1)

    Raises:
        ScenarioConfigError: сценарий не разбирается или нарушает схему
    """
    scenario = load_scenario(config_path, suite)
    if seed is not None:
        scenario.seed = seed
    _preflight(scenario)

    out_dir = Path(out_dir or scenario.output.get('dir') or get_path('reports'))
    fmt = fmt or scenario.output.get('format', 'both')
    setup_logging(out_dir / "logs", scenario.name)
    logging.info(f"Сценарий {scenario.name} ({scenario.suite}), seed={scenario.seed}")

    try:
        calibration = load_calibration()
    except ValueError as e:
        raise ScenarioConfigError("calibration", str(e)) from e
    cache = EigenCache(get_cache_dir(cache_dir))
    ctx = SuiteContext(cache, calibration, load_settings())

    try:
        report = SUITE_RUNNERS[scenario.suite](scenario, ctx)
    except Exception as e:
        # Сбой конвейера - провал критерия, а не тихий пропуск
        logging.error(f"Сбой конвейера {scenario.suite}: {e}")
        traceback.print_exc()
        report = Report(scenario.name, scenario.suite, scenario.seed)
        report.add_criterion("pipeline", f"{type(e).__name__}: {e}", "без исключений",
                             passed=False, comparison="=")

    report.timings['eigen_cache_hits'] = cache.hits
    report.timings['eigen_cache_misses'] = cache.misses

    try:
        emit_report(report, out_dir, fmt)
    except OSError as e:
        print(f"❌ Не удалось записать отчёт в {out_dir}: {e}", file=sys.stderr)
        return report, EXIT_FAILED

    report.print_summary()
    if report.has_failures():
        logging.warning(f"Провалено критериев: {len(report.failures())}")
        return report, EXIT_FAILED
    logging.info("Все критерии пройдены")
    return report, EXIT_OK


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed должен быть в [0, 2^64 − 1], получено {value}")
    return seed


def main(argv=None) -> int:
    """Главная функция."""
    parser = argparse.ArgumentParser(
        description='Верификация индексных формул на решётках',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры использования:
  %(prog)s verify-torus
  %(prog)s verify-plane --config config/scenarios/plane.yaml --out /tmp/reports
  %(prog)s cocycle-suite --seed 7 --format json
  %(prog)s updo-suite --cache /tmp/eigh-cache
        """
    )
    parser.add_argument('suite', choices=SUITES, help='Набор проверок')
    parser.add_argument('--config', type=Path, help='YAML-сценарий (по умолчанию config/scenarios/<набор>.yaml)')
    parser.add_argument('--out', type=Path, help='Каталог отчётов')
    parser.add_argument('--seed', type=_seed, help='Зерно генератора (u64)')
    parser.add_argument('--format', choices=FORMATS, help='Формат отчёта')
    parser.add_argument('--cache', help='Каталог кэша разложений (перекрывает WORKBENCH_CACHE_DIR)')

    args = parser.parse_args(argv)
    config = args.config or get_path('scenarios') / DEFAULT_SCENARIOS[args.suite]

    try:
        _, exit_code = run_scenario(config, args.suite, args.out, args.seed, args.format, args.cache)
    except ScenarioConfigError as e:
        print(f"❌ Некорректный сценарий: {e}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    return exit_code


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n⚠️ Прервано пользователем")
        sys.exit(0)
    except Exception as e:
        print(f"❌ Критическая ошибка: {e}", file=sys.stderr)
        traceback.print_exc()
        sys.exit(1)
