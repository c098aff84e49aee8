"""Сквозные тесты запуска сценариев через main()."""

import json

import numpy as np
import pytest
import yaml

from config_loader import get_path, load_calibration, load_settings
from functional_calculus import EigenCache
from run_scenario import EXIT_FAILED, EXIT_INVALID_CONFIG, EXIT_OK, main
from scenario_config import Scenario
from verification_suites import SuiteContext, _algebra_cap, _kernel_threshold, _model_options


def write_scenario(path, **raw):
    data = {'schema_version': 1}
    data.update(raw)
    path.write_text(yaml.safe_dump(data, allow_unicode=True), encoding='utf-8')
    return path


@pytest.fixture
def small_torus(tmp_path):
    return write_scenario(
        tmp_path / "torus_small.yaml", name="torus_small", suite="verify-torus", seed=0,
        geometry={'kind': 'torus', 'sizes': [8]},
        model={'stencil': 'wilson', 'flux_quanta': [0, 1], 'twist_quanta': 1},
        filter={'type': 'gaussian', 't': [1.0], 'method': 'eigen'},
        options={'check_chebyshev': True, 'check_quasilocality': False},
    )


def run(config, out, *extra):
    return main([*extra, '--config', str(config), '--out', str(out), '--cache', str(out / "cache")])


class TestTorusRun:
    def test_passes_with_all_fields(self, small_torus, tmp_path):
        out = tmp_path / "reports"
        assert run(small_torus, out, 'verify-torus') == EXIT_OK
        report = json.loads((out / "torus_small.json").read_text(encoding='utf-8'))
        assert report['status'] == "pass"
        for key in ("N8_q1_t1", "N8_q1_tw1_t1"):
            assert key in report['analytic']
            assert key in report['topological']
            assert key in report['oracle']
            assert report['diff'][key] < 1e-8
        assert report['oracle']['N8_q1_tw1_t1'] == 2
        assert report['calibration']['dirac_even_pairing'] == {'re': 1.0, 'im': 0.0}
        assert (out / "torus_small.csv").exists()
        assert (out / "torus_small.timings.json").exists()

    def test_reports_are_deterministic(self, small_torus, tmp_path):
        assert run(small_torus, tmp_path / "a", 'verify-torus', '--format', 'json') == EXIT_OK
        assert run(small_torus, tmp_path / "b", 'verify-torus', '--format', 'json') == EXIT_OK
        first = (tmp_path / "a" / "torus_small.json").read_bytes()
        assert first == (tmp_path / "b" / "torus_small.json").read_bytes()
        assert not (tmp_path / "a" / "torus_small.csv").exists()

    def test_cache_hits_go_to_timings(self, small_torus, tmp_path):
        out = tmp_path / "reports"
        run(small_torus, out, 'verify-torus')
        run(small_torus, out, 'verify-torus')
        timings = json.loads((out / "torus_small.timings.json").read_text(encoding='utf-8'))
        assert timings['eigen_cache_hits'] > 0

    def test_biased_analytic_side_fails(self, tmp_path):
        config = write_scenario(
            tmp_path / "torus_biased.yaml", name="torus_biased", suite="verify-torus", seed=0,
            geometry={'kind': 'torus', 'sizes': [8]},
            model={'flux_quanta': [1]},
            filter={'type': 'gaussian', 't': [1.0]},
            diagnostics={'analytic_bias': 0.5},
            options={'check_chebyshev': False, 'check_quasilocality': False},
        )
        out = tmp_path / "reports"
        assert run(config, out, 'verify-torus') == EXIT_FAILED
        report = json.loads((out / "torus_biased.json").read_text(encoding='utf-8'))
        assert report['status'] == "fail"
        failed = {c['name'] for c in report['criteria'] if c['status'] == "fail"}
        assert "mckean_singer[N8_q1_t1]" in failed


class TestInvalidScenario:
    def test_malformed_schedule(self, tmp_path, capsys):
        config = write_scenario(tmp_path / "bad.yaml", name="bad", suite="verify-plane",
                                folner={'schedule': [32, 16]})
        assert run(config, tmp_path / "out", 'verify-plane') == EXIT_INVALID_CONFIG
        assert "folner.schedule" in capsys.readouterr().err
        assert not (tmp_path / "out" / "bad.json").exists()

    def test_suite_mismatch(self, small_torus, tmp_path):
        assert run(small_torus, tmp_path / "out", 'verify-plane') == EXIT_INVALID_CONFIG

    def test_missing_config(self, tmp_path):
        assert run(tmp_path / "absent.yaml", tmp_path / "out", 'verify-torus') == EXIT_INVALID_CONFIG

    def test_degenerate_window(self, tmp_path):
        config = write_scenario(tmp_path / "tiny.yaml", name="tiny", suite="verify-plane",
                                geometry={'kind': 'plane-window', 'extent': 1})
        assert run(config, tmp_path / "out", 'verify-plane') == EXIT_INVALID_CONFIG

    @pytest.mark.parametrize("seed", ["-1", str(2 ** 64)])
    def test_seed_range(self, small_torus, tmp_path, seed):
        with pytest.raises(SystemExit) as excinfo:
            run(small_torus, tmp_path / "out", 'verify-torus', '--seed', seed)
        assert excinfo.value.code == 2


@pytest.mark.slow
class TestPlaneRun:
    def test_biased_analytic_side_fails(self, tmp_path):
        config = write_scenario(
            tmp_path / "plane_biased.yaml", name="plane_biased", suite="verify-plane", seed=0,
            geometry={'kind': 'plane-window', 'extent': 24},
            model={'stencil': 'wilson', 'flux': float(2 * np.pi / 16)},
            folner={'schedule': [6, 8, 10], 'radius': 2},
            limit_policy={'window': 2, 'tolerance': 1.0},
            diagnostics={'analytic_bias': 0.5},
            options={'kernel_threshold': 1.0e-2},
        )
        out = tmp_path / "reports"
        assert run(config, out, 'verify-plane') == EXIT_FAILED
        report = json.loads((out / "plane_biased.json").read_text(encoding='utf-8'))
        failed = [c for c in report['criteria'] if c['status'] == "fail"]
        assert any(c['name'].startswith("relative_error") for c in failed)
        assert all(c['tolerance'] == 0.10 for c in failed if c['name'].startswith("relative_error"))
        assert report['topological']


class TestShippedScenarios:
    @pytest.mark.parametrize("name,suite", [
        ("toeplitz", "verify-toeplitz"),
        ("cocycle", "cocycle-suite"),
        ("cover", "cover-suite"),
        ("updo", "updo-suite"),
    ])
    def test_suite_passes(self, tmp_path, name, suite):
        out = tmp_path / "reports"
        assert run(get_path('scenarios') / f"{name}.yaml", out, suite) == EXIT_OK
        report = json.loads((out / f"{name}.json").read_text(encoding='utf-8'))
        assert report['status'] == "pass"
        assert report['criteria']
        assert all(c['status'] == "pass" for c in report['criteria'])

    def test_toeplitz_topological_side(self, tmp_path):
        out = tmp_path / "reports"
        run(get_path('scenarios') / "toeplitz.yaml", out, 'verify-toeplitz')
        report = json.loads((out / "toeplitz.json").read_text(encoding='utf-8'))
        names = [c['name'] for c in report['criteria']]
        assert any(n.startswith("topological[") for n in names)
        for key, oracle in report['oracle'].items():
            if key in report['topological']:
                assert report['topological'][key] == pytest.approx(oracle, abs=1e-9)


class TestWorkbenchDefaults:
    @pytest.fixture
    def ctx(self):
        settings = {
            'models': {'stencil': 'one_sided', 'wilson_mass': 0.5, 'wilson_r': 2.0},
            'functional_calculus': {'kernel_threshold': 1e-3},
            'operator_algebra': {'dense_cap': 128},
        }
        return SuiteContext(EigenCache(), {'constants': {}}, settings)

    def test_settings_fill_missing_model_fields(self, ctx):
        options = _model_options(ctx, Scenario("m", "verify-torus", 0))
        assert options == {'stencil': 'one_sided', 'mass': 0.5, 'wilson_r': 2.0}

    def test_scenario_overrides_settings(self, ctx):
        scenario = Scenario("m", "verify-torus", 0, model={'stencil': 'wilson', 'mass': 1.5})
        assert _model_options(ctx, scenario) == {'stencil': 'wilson', 'mass': 1.5, 'wilson_r': 2.0}

    def test_thresholds_come_from_settings(self, ctx):
        assert _kernel_threshold(ctx) == 1e-3
        assert _algebra_cap(ctx) == 128

    def test_shipped_settings_are_consumed(self):
        settings = load_settings()
        ctx = SuiteContext(EigenCache(), load_calibration(), settings)
        assert _model_options(ctx, Scenario("m", "verify-torus", 0))['stencil'] == \
            settings['models']['stencil']
        assert _kernel_threshold(ctx) == settings['functional_calculus']['kernel_threshold']
        assert _algebra_cap(ctx) == settings['operator_algebra']['dense_cap']
        assert 'logs' not in settings['paths']
        assert set(load_calibration()['constants']) == {
            'hardy_odd_pairing', 'toeplitz_winding_sign', 'dirac_even_pairing'}
