#!/usr/bin/env python3
"""
Отчёт сценария верификации.

Report собирает значения (аналитические, топологические, оракулы), критерии
pass/fail с допусками и таблицы сходимости. emit_report пишет:
- <name>.json - детерминированный полный отчёт (без времён);
- <name>.timings.json - замеры времени (отдельно, чтобы JSON был побайтно стабилен);
- <name>.csv - строка на каждое множество Фёльнера.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

CSV_COLUMNS = ("set_index", "set_size", "deficiency_r2", "analytic_density",
               "topological_density", "abs_diff")
FORMATS = ("json", "csv", "both")


class CriterionLevel:
    PASS = "pass"
    FAIL = "fail"


@dataclass
class Criterion:
    """Критерий: значение, допуск и сравнение (каждый вердикт ссылается на свой допуск)."""
    name: str
    value: Any
    tolerance: Any
    passed: bool
    comparison: str = "≤"
    note: str = ""

    def as_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'value': self.value,
            'tolerance': self.tolerance,
            'comparison': self.comparison,
            'status': CriterionLevel.PASS if self.passed else CriterionLevel.FAIL,
            'note': self.note,
        }


def jsonable(value: Any) -> Any:
    """Привести numpy/complex значения к JSON-совместимым."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(value.real), 'im': float(value.imag)}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return str(value)
        return value
    if hasattr(value, 'as_dict'):
        return jsonable(value.as_dict())
    return value


@dataclass
class Report:
    """Отчёт сценария."""
    name: str
    suite: str
    seed: int
    analytic: Dict[str, Any] = field(default_factory=dict)
    topological: Dict[str, Any] = field(default_factory=dict)
    oracle: Dict[str, Any] = field(default_factory=dict)
    diff: Dict[str, Any] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)
    deficiency_tables: Dict[str, Any] = field(default_factory=dict)
    calibration: Dict[str, Any] = field(default_factory=dict)
    convergence: List[Dict[str, Any]] = field(default_factory=list)
    criteria: List[Criterion] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    def add_criterion(self, name: str, value, tolerance, passed: Optional[bool] = None,
                      comparison: str = "≤", note: str = "") -> bool:
        """Добавить критерий; по умолчанию pass ⇔ value ≤ tolerance."""
        if passed is None:
            passed = bool(value <= tolerance)
        self.criteria.append(Criterion(name, jsonable(value), jsonable(tolerance),
                                       bool(passed), comparison, note))
        return bool(passed)

    def add_comparison(self, key: str, analytic, topological=None, oracle=None):
        """Записать значения и модуль разности с оракулом (или топологической стороной)."""
        self.analytic[key] = analytic
        if topological is not None:
            self.topological[key] = topological
        if oracle is not None:
            self.oracle[key] = oracle
        reference = oracle if oracle is not None else topological
        if reference is not None:
            self.diff[key] = abs(analytic - reference)

    def has_failures(self) -> bool:
        return any(not c.passed for c in self.criteria)

    def failures(self) -> List[Criterion]:
        return [c for c in self.criteria if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return jsonable({
            'name': self.name,
            'suite': self.suite,
            'seed': self.seed,
            'analytic': self.analytic,
            'topological': self.topological,
            'oracle': self.oracle,
            'diff': self.diff,
            'details': self.details,
            'deficiency_tables': self.deficiency_tables,
            'calibration': self.calibration,
            'convergence': self.convergence,
            'criteria': [c.as_dict() for c in self.criteria],
            'status': CriterionLevel.FAIL if self.has_failures() else CriterionLevel.PASS,
        })

    def print_summary(self):
        """Вывести краткую сводку."""
        passed = sum(1 for c in self.criteria if c.passed)
        print("\n" + "=" * 60)
        print(f"СВОДКА СЦЕНАРИЯ: {self.name} ({self.suite})")
        print("=" * 60)
        print(f"✅ Пройдено критериев: {passed}")
        print(f"❌ Провалено критериев: {len(self.criteria) - passed}")
        for c in self.failures():
            print(f"   ❌ {c.name}: {c.value} (допуск {c.comparison} {c.tolerance}) {c.note}")
        print("=" * 60 + "\n")


def serialize_json(data: Dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _format_number(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), '.17g')


def emit_report(report: Report, out_dir: Path, fmt: str = "both") -> List[Path]:
    """
    Записать отчёт в каталог.

    Args:
        fmt: 'json' | 'csv' | 'both'

    Returns:
        Список записанных файлов

    Raises:
        ValueError: неизвестный формат
        OSError: каталог недоступен для записи
    """
    if fmt not in FORMATS:
        raise ValueError(f"emit_report: неизвестный формат {fmt!r}, ожидается {FORMATS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if fmt in ("json", "both"):
        path = out_dir / f"{report.name}.json"
        with open(path, 'w', encoding='utf-8') as f:
            f.write(serialize_json(report.to_dict()))
        written.append(path)
        timings_path = out_dir / f"{report.name}.timings.json"
        with open(timings_path, 'w', encoding='utf-8') as f:
            f.write(serialize_json(jsonable(report.timings)))
        written.append(timings_path)

    if fmt in ("csv", "both"):
        path = out_dir / f"{report.name}.csv"
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for row in report.convergence:
                writer.writerow([_format_number(row[column]) for column in CSV_COLUMNS])
        written.append(path)

    for path in written:
        print(f"✅ Отчет сохранен: {path}")
    return written
