"""Тесты отчёта сценария: детерминированный JSON, CSV сходимости, файл времён."""

import csv
import json

import numpy as np
import pytest

from scenario_report import CSV_COLUMNS, Report, emit_report, jsonable, serialize_json


@pytest.fixture
def report():
    r = Report("demo", "verify-plane", 7)
    r.add_comparison("box", 0.0123, 0.0125)
    r.add_criterion("relative_error", 0.016, 0.10)
    r.add_criterion("topological_exact", 1.0e-3, 1.0e-8)
    for i, size in enumerate((256, 400, 576)):
        r.convergence.append({
            'set_index': i, 'set_size': size, 'deficiency_r2': 0.25 / (i + 1),
            'analytic_density': 1.0 / 3.0, 'topological_density': 0.1, 'abs_diff': 0.1 / 3.0,
        })
    r.timings['analytic'] = 1.25
    return r


class TestReport:
    def test_criteria_reference_tolerances(self, report):
        data = report.to_dict()
        assert data['status'] == "fail"
        assert [c['name'] for c in data['criteria']] == ["relative_error", "topological_exact"]
        assert data['criteria'][0]['tolerance'] == 0.10
        assert [c.name for c in report.failures()] == ["topological_exact"]

    def test_comparison_prefers_oracle(self):
        r = Report("x", "verify-torus", 0)
        r.add_comparison("case", 1.0 + 1e-9, topological=0.5, oracle=1)
        assert r.diff["case"] == pytest.approx(1e-9)

    def test_jsonable_values(self):
        value = jsonable({'z': 1 + 2j, 'n': np.int64(3), 'a': np.array([1.5]), 'bad': float('nan')})
        assert value == {'z': {'re': 1.0, 'im': 2.0}, 'n': 3, 'a': [1.5], 'bad': 'nan'}


class TestEmit:
    def test_json_is_byte_identical(self, report, tmp_path):
        emit_report(report, tmp_path / "a", "json")
        emit_report(report, tmp_path / "b", "json")
        first = (tmp_path / "a" / "demo.json").read_bytes()
        assert first == (tmp_path / "b" / "demo.json").read_bytes()
        assert first.endswith(b"\n")
        assert json.loads(first)['seed'] == 7

    def test_timings_are_separate(self, report, tmp_path):
        emit_report(report, tmp_path, "json")
        assert 'timings' not in json.loads((tmp_path / "demo.json").read_text(encoding='utf-8'))
        timings = json.loads((tmp_path / "demo.timings.json").read_text(encoding='utf-8'))
        assert timings == {'analytic': 1.25}

    def test_csv_rows(self, report, tmp_path):
        paths = emit_report(report, tmp_path, "csv")
        assert paths == [tmp_path / "demo.csv"]
        with open(tmp_path / "demo.csv", encoding='utf-8', newline='') as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 4
        assert rows[1][:2] == ["0", "256"]
        assert rows[1][3] == format(1.0 / 3.0, '.17g')
        assert float(rows[2][2]) == 0.125

    def test_both_formats(self, report, tmp_path):
        names = sorted(p.name for p in emit_report(report, tmp_path, "both"))
        assert names == ["demo.csv", "demo.json", "demo.timings.json"]

    def test_unknown_format(self, report, tmp_path):
        with pytest.raises(ValueError):
            emit_report(report, tmp_path, "xml")

    def test_serialization_is_sorted(self):
        assert serialize_json({'b': 1, 'a': "ё"}) == '{\n  "a": "ё",\n  "b": 1\n}\n'
