"""Тесты загрузки и проверки YAML-сценариев."""

import pytest
import yaml

from scenario_config import DEFAULT_TOLERANCES, ScenarioConfigError, load_scenario, validate_scenario


def minimal(**extra):
    raw = {'schema_version': 1, 'name': 'case', 'suite': 'verify-plane', 'seed': 3}
    raw.update(extra)
    return raw


class TestValidateScenario:
    def test_defaults(self):
        scenario = validate_scenario(minimal())
        assert scenario.suite == "verify-plane"
        assert scenario.tolerance('plane_relative') == DEFAULT_TOLERANCES['plane_relative']
        assert scenario.filter_times == [1.0]
        assert scenario.limit_policy.window == 3

    def test_filter_times_list(self):
        scenario = validate_scenario(minimal(filter={'t': [0.5, 2]}))
        assert scenario.filter_times == [0.5, 2.0]

    @pytest.mark.parametrize("schedule", [[32, 16], [], [16, 16], [8, -4], "16"])
    def test_malformed_schedule_names_field(self, schedule):
        with pytest.raises(ScenarioConfigError) as excinfo:
            validate_scenario(minimal(folner={'schedule': schedule}))
        assert excinfo.value.field == "folner.schedule"
        assert "folner.schedule" in str(excinfo.value)

    @pytest.mark.parametrize("raw,field", [
        (minimal(colour='red'), "colour"),
        (minimal(model={'spin': 1}), "model.spin"),
        (minimal(tolerances={'magic': 1.0}), "tolerances.magic"),
        (minimal(options={'check_chebyshev': True}), "options.check_chebyshev"),
    ])
    def test_unknown_keys(self, raw, field):
        with pytest.raises(ScenarioConfigError) as excinfo:
            validate_scenario(raw)
        assert excinfo.value.field == field

    def test_schema_version(self):
        with pytest.raises(ScenarioConfigError) as excinfo:
            validate_scenario(minimal(schema_version=2))
        assert excinfo.value.field == "schema_version"

    def test_suite_mismatch(self):
        with pytest.raises(ScenarioConfigError) as excinfo:
            validate_scenario(minimal(), suite="verify-torus")
        assert excinfo.value.field == "suite"

    @pytest.mark.parametrize("value", [0, -1.0, "small"])
    def test_tolerance_must_be_positive(self, value):
        with pytest.raises(ScenarioConfigError) as excinfo:
            validate_scenario(minimal(tolerances={'plane_relative': value}))
        assert excinfo.value.field == "tolerances.plane_relative"

    @pytest.mark.parametrize("section,field", [
        ({'filter': {'t': 0}}, "filter.t"),
        ({'filter': {'method': 'lanczos'}}, "filter.method"),
        ({'limit_policy': {'window': 1}}, "limit_policy"),
        ({'output': {'format': 'xml'}}, "output.format"),
        ({'seed': -5}, "seed"),
        ({'name': 'a/b'}, "name"),
        ({'diagnostics': {'analytic_bias': 'x'}}, "diagnostics.analytic_bias"),
    ])
    def test_invalid_values(self, section, field):
        with pytest.raises(ScenarioConfigError) as excinfo:
            validate_scenario(minimal(**section))
        assert excinfo.value.field == field


class TestLoadScenario:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioConfigError):
            load_scenario(tmp_path / "absent.yaml")

    def test_broken_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("name: [unclosed\n", encoding='utf-8')
        with pytest.raises(ScenarioConfigError):
            load_scenario(path)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "plane.yaml"
        path.write_text(yaml.safe_dump(minimal(folner={'schedule': [16, 20, 24]},
                                               tolerances={'plane_relative': 1.0e-1})),
                        encoding='utf-8')
        scenario = load_scenario(path, "verify-plane")
        assert scenario.folner['schedule'] == [16, 20, 24]
        assert scenario.source == path

    def test_shipped_scenarios_are_valid(self):
        from config_loader import get_path
        for path in sorted(get_path('scenarios').glob("*.yaml")):
            load_scenario(path)
