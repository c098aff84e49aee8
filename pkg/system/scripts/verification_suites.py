#!/usr/bin/env python3
"""
Наборы проверок верстака.

Каждый набор получает Scenario и SuiteContext и возвращает Report:
- verify-torus: McKean–Singer и совпадение аналитической и топологической плотностей на торе
- verify-plane: Фёльнер-средние плотности индекса в окне плоскости
- verify-toeplitz: индекс Тёплица, нечётное спаривание, суммируемость модуля Харди
- cocycle-suite: циклические тождества характеров Черна–Конна
- cover-suite: дефициты, след Элека, точные формы, покрытия и разбиения единицы
- updo-suite: сборка ПДО, оценки символов, эллиптичность, расщепление
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import networkx as nx
import numpy as np
import scipy.sparse as sp

from chern_weil import (build_cutoffs, chern_character, exact_form_bound, exterior_derivative,
                        pair_compact, pair_form_current, random_codegree_one_form,
                        topological_index_density, volume_form, zero_form,
                        DiscreteForm)
from cyclic_cocycles import (alpha_current, cyclic_defect, even_character, hochschild_b,
                             hochschild_coboundary, odd_character, odd_pairing_raw,
                             periodicity_ratios, random_cochain)
from folner_trace import per_set_traces, site_averages, supertrace_density, estimate_from_values
from functional_calculus import (EigenCache, apply_filter, gaussian, kernel_width,
                                 quasilocality_profile)
from lattice_geometry import (build_colored_cover, build_lattice, color_intersection_graph,
                              folner_boxes, partition_of_unity)
from models import (ToeplitzModel, circle_lattice, hardy_module, hardy_trace_window, index_oracle,
                    magnetic_dirac, random_involutive_module, toeplitz_index, trivial_bundle,
                    twist_by_bundle, uniform_flux_bundle, winding_symbol)
from operator_algebra import (FinitePropOperator, LipschitzTestFamily, operator_norm,
                              shift_operator, summability_profile)
from scenario_config import Scenario
from scenario_report import Report
from symbols_updo import (assemble_updo, clutching_degree, ellipticity_check, global_multiplier,
                          sample_symbol, symbol_estimate, symbol_splitting)


@dataclass
class SuiteContext:
    """Общие ресурсы запуска: кэш разложений, калибровка, настройки верстака."""
    cache: EigenCache
    calibration: Dict[str, Any]
    settings: Dict[str, Any] = field(default_factory=dict)

    def constant(self, name: str) -> complex:
        constants = self.calibration.get('constants', {})
        if name not in constants:
            raise ValueError(f"calibration.constants.{name}: константа не найдена")
        return constants[name]


@contextmanager
def _timed(report: Report, stage: str):
    start = time.perf_counter()
    yield
    report.timings[stage] = report.timings.get(stage, 0.0) + time.perf_counter() - start


def _new_report(scenario: Scenario) -> Report:
    return Report(scenario.name, scenario.suite, scenario.seed)


def _use_constant(report: Report, ctx: SuiteContext, name: str) -> complex:
    value = ctx.constant(name)
    report.calibration['version'] = ctx.calibration.get('version')
    report.calibration[name] = value
    return value


# ---------------------------------------------------------------------------
# verify-torus
# ---------------------------------------------------------------------------

def _calculus_options(ctx: SuiteContext, scenario: Scenario) -> Dict[str, Any]:
    section = ctx.settings.get('functional_calculus', {})
    return {
        'dense_cap': int(section.get('dense_cap', 8192)),
        'degree_cap': int(scenario.filter.get('degree_cap', section.get('chebyshev_degree_cap', 2000))),
        'target': float(scenario.filter.get('target', section.get('chebyshev_target', 1e-10))),
        'inflation': float(section.get('enclosure_inflation', 1.01)),
    }


def _model_options(ctx: SuiteContext, scenario: Scenario) -> Dict[str, Any]:
    """stencil, mass, wilson_r: сценарий перекрывает секцию models из workbench.yaml."""
    section = ctx.settings.get('models', {})
    return {
        'stencil': scenario.model.get('stencil', section.get('stencil', 'wilson')),
        'mass': float(scenario.model.get('mass', section.get('wilson_mass', 1.0))),
        'wilson_r': float(scenario.model.get('wilson_r', section.get('wilson_r', 1.0))),
    }


def _algebra_cap(ctx: SuiteContext) -> int:
    return int(ctx.settings.get('operator_algebra', {}).get('dense_cap', 4096))


def _kernel_threshold(ctx: SuiteContext) -> float:
    return float(ctx.settings.get('functional_calculus', {}).get('kernel_threshold', 1e-6))


def _strictly_decreasing(values: List[float], floor: float = 1e-14) -> bool:
    meaningful = [v for v in values if v > floor]
    return all(b < a for a, b in zip(meaningful[:-1], meaningful[1:]))


def run_torus(scenario: Scenario, ctx: SuiteContext) -> Report:
    """Тор: Str f(D) против SVD-оракула, аналитика против ch(E) по плакетам."""
    report = _new_report(scenario)
    geometry = scenario.geometry
    sizes = geometry.get('sizes') or [geometry.get('extent', 8)]
    quanta_list = scenario.model.get('flux_quanta', [0, 1, 2, 3])
    twist = scenario.model.get('twist_quanta')
    model_options = _model_options(ctx, scenario)
    even_norm = _use_constant(report, ctx, 'dirac_even_pairing')
    bias = float(scenario.diagnostics.get('analytic_bias', 0.0))
    method = scenario.filter.get('method', 'eigen')
    calculus = _calculus_options(ctx, scenario)
    times = scenario.filter_times
    skipped = []

    for n in sizes:
        lattice = build_lattice({'kind': 'torus', 'extent': int(n),
                                 'spacing': geometry.get('spacing', 1.0)})
        volume = lattice.n_sites
        for q in quanta_list:
            if q > volume / 8:
                skipped.append({'N': n, 'flux_quanta': q, 'reason': 'n_φ > N²/8'})
                logging.warning(f"Пропуск N={n}, n_φ={q}: поток больше N²/8")
                continue
            with _timed(report, 'model'):
                base = magnetic_dirac(lattice, quanta=q, **model_options)
                cases = [(f"N{n}_q{q}", base, trivial_bundle(lattice))]
                if twist is not None:
                    e = uniform_flux_bundle(lattice, quanta=int(twist))
                    cases.append((f"N{n}_q{q}_tw{twist}", twist_by_bundle(base, e), e))

            for key, d, twist_bundle in cases:
                with _timed(report, 'oracle'):
                    oracle = index_oracle(d)
                with _timed(report, 'topological'):
                    # ch(u) ∧ ind(D): скручивание входит через u, модель - базовый оператор
                    topological = float((even_norm * topological_index_density(twist_bundle, base).limit).real) * volume
                for t in times:
                    with _timed(report, 'analytic'):
                        kernel = apply_filter(d.operator, gaussian(t), method=method,
                                              cache=ctx.cache, **calculus)
                        density = supertrace_density(d, kernel) * (1.0 + bias)
                    supertrace = float(np.sum(density))
                    case = f"{key}_t{t:g}"
                    report.add_comparison(case, supertrace, topological, oracle)
                    report.add_criterion(f"mckean_singer[{case}]", abs(supertrace - oracle),
                                         scenario.tolerance('mckean_singer'))
                    report.add_criterion(f"topological_match[{case}]", abs(supertrace - topological),
                                         scenario.tolerance('topological'))
                    report.convergence.append({
                        'set_index': len(report.convergence), 'set_size': volume,
                        'deficiency_r2': 0.0, 'analytic_density': supertrace / volume,
                        'topological_density': topological / volume,
                        'abs_diff': abs(supertrace - topological) / volume,
                    })
                report.add_criterion(f"topological_oracle[{key}]", abs(topological - oracle),
                                     scenario.tolerance('topological'))

            if scenario.option('check_chebyshev', True):
                with _timed(report, 'chebyshev'):
                    f = gaussian(times[0])
                    exact = apply_filter(base.operator, f, method="eigen", cache=ctx.cache, **calculus)
                    series = apply_filter(base.operator, f, method="chebyshev", **calculus)
                    gap = operator_norm(series.operator - exact.operator, calculus['dense_cap'])
                report.details[f"chebyshev[N{n}_q{q}]"] = {'degree': series.degree,
                                                           'residual_bound': series.residual_bound}
                report.add_criterion(f"chebyshev_vs_eigen[N{n}_q{q}]", gap,
                                     scenario.tolerance('chebyshev'))

        if scenario.option('check_quasilocality', True):
            with _timed(report, 'quasilocality'):
                d = magnetic_dirac(lattice, quanta=min(1, int(volume // 8)), **model_options)
                kernel = apply_filter(d.operator, gaussian(times[0]), cache=ctx.cache, **calculus)
                radii = [float(r) for r in range(2, int(lattice.distance_matrix.max()) + 1)]
                profile = quasilocality_profile(kernel, radii)
            report.details[f"quasilocality[N{n}]"] = profile.as_pairs()
            report.add_criterion(f"quasilocality_decreasing[N{n}]", _strictly_decreasing(profile.values),
                                 True, passed=_strictly_decreasing(profile.values), comparison="=")

    report.details['skipped'] = skipped
    return report


# ---------------------------------------------------------------------------
# verify-plane
# ---------------------------------------------------------------------------

def _interior_schedule(lattice, schedule: List[int], margin: int) -> List[int]:
    kept = []
    for size in schedule:
        fits = True
        for ext in lattice.extent:
            start = ext // 2 - size // 2
            fits &= start >= margin and start + size + margin <= ext
        if fits:
            kept.append(int(size))
    return kept


def run_plane(scenario: Scenario, ctx: SuiteContext) -> Report:
    """Окно плоскости: внутренние коробки Фёльнера против φ/2π."""
    report = _new_report(scenario)
    geometry = {'kind': 'plane-window', 'extent': 64}
    geometry.update(scenario.geometry)
    lattice = build_lattice(geometry)
    flux = float(scenario.model.get('flux', 2.0 * np.pi / 16.0))
    bias = float(scenario.diagnostics.get('analytic_bias', 0.0))
    calculus = _calculus_options(ctx, scenario)
    t = scenario.filter_times[0]
    radius = float(scenario.folner.get('radius', 2))
    schedule = scenario.folner.get('schedule', [16, 20, 24, 28, 32])
    expected = flux / (2.0 * np.pi)

    with _timed(report, 'model'):
        d = magnetic_dirac(lattice, flux=flux, **_model_options(ctx, scenario))
    with _timed(report, 'analytic'):
        kernel = apply_filter(d.operator, gaussian(t), method=scenario.filter.get('method', 'eigen'),
                              cache=ctx.cache, **calculus)
        density = supertrace_density(d, kernel) * (1.0 + bias)
    with _timed(report, 'kernel_width'):
        width = kernel_width(kernel, scenario.option('kernel_threshold', _kernel_threshold(ctx)))
    del kernel

    margin = int(np.ceil(max(width / lattice.spacing, radius)))
    interior = _interior_schedule(lattice, schedule, margin)
    report.details['kernel_width'] = width
    report.details['excluded_boxes'] = [s for s in schedule if s not in interior]
    report.add_criterion("interior_boxes", len(interior), 1, passed=len(interior) > 0,
                         comparison="≥", note=f"запас до края {margin}")
    if not interior:
        return report

    folner = folner_boxes(lattice, interior, radii=(radius,), margin=margin)
    with _timed(report, 'topological'):
        topological = topological_index_density(trivial_bundle(lattice), d, folner,
                                                scenario.limit_policy)
    analytic = estimate_from_values(site_averages(density, folner), folner, scenario.limit_policy,
                                    deficiency_radius=radius)
    report.details['analytic_estimate'] = analytic
    report.details['topological_estimate'] = topological
    report.deficiency_tables = {f"r={r:g}": list(v) for r, v in folner.deficiencies.items()}

    floor = scenario.tolerance('monotone_floor')
    previous = None
    monotone = True
    for i, size in enumerate(interior):
        value = analytic.values[i]
        top_value = topological.values[i]
        diff = abs(value - top_value)
        key = f"box{size}"
        report.add_comparison(key, value, top_value)
        report.add_criterion(f"relative_error[{key}]", abs(value - expected) / expected,
                             scenario.tolerance('plane_relative'))
        report.add_criterion(f"topological_exact[{key}]", abs(top_value - expected),
                             scenario.tolerance('topological'))
        report.convergence.append({
            'set_index': i, 'set_size': folner.sizes[i], 'deficiency_r2': folner.deficiency(i, 2.0),
            'analytic_density': value, 'topological_density': top_value, 'abs_diff': diff,
        })
        if previous is not None and diff > previous + floor:
            monotone = False
        previous = diff
    report.add_criterion("monotone_abs_diff", monotone, True, passed=monotone, comparison="=",
                         note=f"|diff| не растёт по расписанию (порог {floor:g})")
    return report


# ---------------------------------------------------------------------------
# verify-toeplitz
# ---------------------------------------------------------------------------

def run_toeplitz(scenario: Scenario, ctx: SuiteContext) -> Report:
    """Индекс Тёплица, откалиброванное нечётное спаривание, форма намотки."""
    report = _new_report(scenario)
    windings = scenario.model.get('windings', [-3, -2, -1, 0, 1, 2, 3])
    size = int(scenario.option('toeplitz_size', 128))
    pairing_sizes = scenario.option('pairing_sizes', [32, 64])
    kappa = _use_constant(report, ctx, 'hardy_odd_pairing')
    sign = _use_constant(report, ctx, 'toeplitz_winding_sign')

    lattice = circle_lattice(size)
    for k in windings:
        with _timed(report, 'toeplitz_index'):
            index = toeplitz_index(winding_symbol(lattice, int(k)))
        report.oracle[f"index_N{size}_k{k}"] = index
        report.add_criterion(f"toeplitz_index[k={k}]", abs(index + k), 0, comparison="=",
                             note="индекс = −k")

    row = 0
    for n in pairing_sizes:
        lat = circle_lattice(int(n))
        module = hardy_module(lat)
        window = hardy_trace_window(lat)
        for k in windings:
            u = winding_symbol(lat, int(k))
            key = f"N{n}_k{k}"
            with _timed(report, 'odd_pairing'):
                calibrated = kappa * odd_pairing_raw(module, u, window)
                oracle = toeplitz_index(u)
            with _timed(report, 'topological'):
                density = topological_index_density(trivial_bundle(lat), ToeplitzModel(lat, u)).limit
                topological = float((sign * density * n).real)
            residual = abs(calibrated - oracle)
            report.add_comparison(key, float(calibrated.real), topological, oracle)
            report.details[f"imag[{key}]"] = float(calibrated.imag)
            report.add_criterion(f"odd_pairing[{key}]", residual, scenario.tolerance('toeplitz_residual'))
            report.add_criterion(f"topological[{key}]", abs(topological - oracle),
                                 scenario.tolerance('topological'))
            report.convergence.append({
                'set_index': row, 'set_size': int(n), 'deficiency_r2': 0.0,
                'analytic_density': float(calibrated.real) / n, 'topological_density': topological / n,
                'abs_diff': residual / n,
            })
            row += 1

    summability_size = int(scenario.option('summability_size', 32))
    lat = circle_lattice(summability_size)
    module = hardy_module(lat)
    audit = ctx.settings.get('operator_algebra', {}).get('audit_pairs', [[np.pi, 1.0], [8.0, 0.125]])
    profiles = []
    with _timed(report, 'summability'):
        for diameter, lipschitz in audit:
            family = LipschitzTestFamily(lat, float(lipschitz), float(diameter),
                                         n_random=16, seed=scenario.seed)
            for p in (1.0, 2.0):
                estimate = summability_profile(module.operator, p, family, dense_cap=_algebra_cap(ctx))
                profiles.append({'R': diameter, 'L': lipschitz, 'p': p, 'value': estimate.value,
                                 'samples': estimate.sample_count})
    report.details['summability'] = profiles
    finite = all(np.isfinite(entry['value']) for entry in profiles)
    report.add_criterion("summability_finite", finite, True, passed=finite, comparison="=")
    return report


# ---------------------------------------------------------------------------
# cocycle-suite
# ---------------------------------------------------------------------------

def run_cocycles(scenario: Scenario, ctx: SuiteContext) -> Report:
    """Цикличность, b-замкнутость и α∘b = 0 на случайных инволютивных модулях."""
    report = _new_report(scenario)
    n_modules = int(scenario.option('n_modules', 50))
    max_m = int(scenario.option('max_m', 2))
    sites = int(scenario.option('sites', 3))
    rank = int(scenario.option('rank', 2))
    tol = scenario.tolerance('cocycle')
    rng = np.random.default_rng(scenario.seed)
    worst: Dict[str, float] = {}

    def record(name: str, value: float):
        worst[name] = max(worst.get(name, 0.0), float(value))

    def functions(count: int):
        return [rng.uniform(-1.0, 1.0, sites) for _ in range(count)]

    with _timed(report, 'cocycles'):
        for i in range(n_modules):
            module_seed = scenario.seed + i
            graded = random_involutive_module(module_seed, graded=True, sites=sites, rank=rank)
            for m in range(max_m + 1):
                phi = even_character(graded, m)
                record(f"even_cyclic_m{m}", cyclic_defect(phi, *functions(2 * m + 1)))
                record(f"even_b_m{m}", abs(hochschild_b(phi, *functions(2 * m + 2))))
            ungraded = random_involutive_module(module_seed, graded=False, sites=sites, rank=rank)
            for m in range(1, max_m + 1):
                phi = odd_character(ungraded, m)
                record(f"odd_cyclic_m{m}", cyclic_defect(phi, *functions(2 * m)))
                record(f"odd_b_m{m}", abs(hochschild_b(phi, *functions(2 * m + 1))))
            for p in range(1, 4):
                psi = random_cochain(p, sites, module_seed)
                fs = functions(p + 1)
                record(f"alpha_b_p{p}", abs(alpha_current(hochschild_coboundary(psi), *fs)))

    for name, value in sorted(worst.items()):
        report.add_criterion(name, value, tol)
    report.details['max_defects'] = worst

    module = random_involutive_module(scenario.seed, graded=True, sites=sites, rank=rank)
    projection = np.zeros(sites)
    projection[0] = 1.0
    values, ratios = periodicity_ratios(module, projection, max_m=min(max_m, 2))
    report.details['periodicity'] = {'pairings': values, 'ratios': ratios}
    return report


# ---------------------------------------------------------------------------
# cover-suite
# ---------------------------------------------------------------------------

def _banded_operator(lattice, rng, max_propagation: int) -> FinitePropOperator:
    width = int(rng.integers(1, max_propagation + 1))
    n = lattice.n_sites
    bands = [rng.standard_normal(n - abs(k)) + 1j * rng.standard_normal(n - abs(k))
             for k in range(-width, width + 1)]
    matrix = sp.diags(bands, list(range(-width, width + 1)), shape=(n, n), format='csr', dtype=complex)
    return FinitePropOperator(lattice, 1, matrix)


def _exact_form_checks(report: Report, label: str, folner, taper: int, rng, policy):
    lattice = folner.lattice
    cutoffs = build_cutoffs(folner, taper)
    gamma = random_codegree_one_form(lattice, rng)
    pairing = pair_form_current(exterior_derivative(gamma), folner, cutoffs, policy)
    normalisation = pair_form_current(volume_form(lattice), folner, cutoffs, policy)
    for i, value in enumerate(pairing.values):
        bound = exact_form_bound(cutoffs, gamma.sup_norm(), i)
        report.add_criterion(f"exact_form_bound[{label}, set {i}]", abs(value), bound)
    report.details[f"fundamental_class[{label}]"] = normalisation.values
    report.details[f"cutoff_lipschitz[{label}]"] = cutoffs.lipschitz_constants()


def run_covers(scenario: Scenario, ctx: SuiteContext) -> Report:
    """Дефициты, след Элека, точные формы, покрытия и разбиения единицы."""
    report = _new_report(scenario)
    rng = np.random.default_rng(scenario.seed)
    policy = scenario.limit_policy
    taper = int(scenario.folner.get('taper', 2))

    # Дефициты отрезков в одномерном окне: 6/L при r = 2
    window = int(scenario.option('window', 100))
    line = build_lattice({'kind': 'plane-window', 'extent': window, 'dimension': 1})
    lengths = scenario.option('lengths', [10, 20, 40])
    segments = folner_boxes(line, lengths, radii=(2,), margin=taper + 2)
    for i, length in enumerate(lengths):
        value = segments.deficiency(i, 2)
        report.add_criterion(f"deficiency_1d[L={length}]", abs(value - 6.0 / length), 1e-15,
                             note=f"ожидается {6.0 / length:g}")
        report.convergence.append({
            'set_index': i, 'set_size': segments.sizes[i], 'deficiency_r2': value,
            'analytic_density': value, 'topological_density': 6.0 / length,
            'abs_diff': abs(value - 6.0 / length),
        })
    report.deficiency_tables['segments'] = {f"r={r:g}": list(v) for r, v in segments.deficiencies.items()}
    _exact_form_checks(report, "1d", segments, taper, rng, policy)

    plane_geometry = {'kind': 'plane-window', 'extent': 32}
    plane_geometry.update(scenario.geometry)
    plane = build_lattice(plane_geometry)
    boxes = folner_boxes(plane, scenario.folner.get('schedule', [8, 12, 16]), radii=(2,),
                         margin=taper + 2)
    report.deficiency_tables['boxes'] = {f"r={r:g}": list(v) for r, v in boxes.deficiencies.items()}
    _exact_form_checks(report, "2d", boxes, taper, rng, policy)

    # Сертификат непрерывности спаривания с компактным носителем
    ind = chern_character(uniform_flux_bundle(plane, flux=2.0 * np.pi / 16.0))
    inner = boxes.sets[0]
    bump = np.zeros(plane.n_sites)
    bump[inner] = rng.uniform(-1.0, 1.0, inner.size)
    cell = np.zeros(plane.n_sites)
    cell[inner] = 1.0
    for label, phi in (("0-form", zero_form(plane, bump)), ("2-form", DiscreteForm(plane, 2, cell))):
        certificate = pair_compact(ind, phi)
        report.details[f"pair_compact[{label}]"] = certificate
        report.add_criterion(f"pair_compact[{label}]", abs(certificate.value), certificate.bound,
                             passed=certificate.holds)

    # След Элека на случайных ленточных парах
    pair_line = build_lattice({'kind': 'plane-window', 'extent': int(scenario.option('pair_window', 200)),
                               'dimension': 1})
    max_prop = int(scenario.option('pair_propagation', 3))
    pair_sets = folner_boxes(pair_line, scenario.option('pair_schedule', [20, 40, 80]),
                             radii=(), margin=2 * max_prop)
    worst_ratio, violations = 0.0, 0
    cap = _algebra_cap(ctx)
    with _timed(report, 'elek'):
        for _ in range(int(scenario.option('n_pairs', 100))):
            a = _banded_operator(pair_line, rng, max_prop)
            b = _banded_operator(pair_line, rng, max_prop)
            reach = a.propagation + b.propagation
            norms = 2.0 * operator_norm(a, cap) * operator_norm(b, cap)
            ab, ba = per_set_traces(a @ b, pair_sets), per_set_traces(b @ a, pair_sets)
            for i in range(len(pair_sets)):
                bound = norms * pair_sets.deficiency(i, reach)
                gap = abs(ab[i] - ba[i])
                if gap > bound:
                    violations += 1
                worst_ratio = max(worst_ratio, gap / bound if bound > 0 else 0.0)
    report.details['elek_worst_ratio'] = worst_ratio
    report.add_criterion("elek_trace_property", violations, 0, comparison="=",
                         note="|θ_i(AB) − θ_i(BA)| ≤ 2‖A‖‖B‖·deficiency(Γ_i, R_A + R_B)")

    # Раскраски случайных геометрических графов
    bad_colorings = 0
    for i in range(int(scenario.option('n_graphs', 100))):
        graph = nx.random_geometric_graph(int(scenario.option('graph_nodes', 40)),
                                          float(scenario.option('graph_radius', 0.25)),
                                          seed=scenario.seed + i)
        coloring = color_intersection_graph(graph)
        degree = max((deg for _, deg in graph.degree()), default=0)
        proper = all(coloring[u] != coloring[v] for u, v in graph.edges())
        if not proper or len(set(coloring.values())) > degree + 1:
            bad_colorings += 1
    report.add_criterion("greedy_coloring", bad_colorings, 0, comparison="=",
                         note="правильная раскраска в ≤ Δ+1 цветов")

    # Покрытия и разбиения единицы
    for kind, extent in (("torus", 16), ("plane-window", 20)):
        lattice = build_lattice({'kind': kind, 'extent': extent})
        cover = build_colored_cover(lattice, 4, 3.0)
        pou = partition_of_unity(cover, taper)
        label = f"{kind}{extent}"
        report.details[f"cover[{label}]"] = {'members': len(cover.members), 'colors': cover.n_colors,
                                             'max_degree': cover.max_degree,
                                             'multiplicity': cover.multiplicity}
        report.add_criterion(f"cover_colors[{label}]", cover.n_colors, cover.max_degree + 1)
        report.add_criterion(f"pou_sum[{label}]", pou.sum_deviation(), scenario.tolerance('pou'))
        report.add_criterion(f"pou_lipschitz[{label}]", float(pou.lipschitz_constants().max()),
                             1.0 / taper + 1e-12)
        report.add_criterion(f"pou_support[{label}]", pou.supported_in_members(), True,
                             passed=pou.supported_in_members(), comparison="=")
    return report


# ---------------------------------------------------------------------------
# updo-suite
# ---------------------------------------------------------------------------

def _shift_symbol(x, xi):
    return np.exp(1j * xi[..., 0])


def _laplace_symbol(x, xi):
    return 2.0 - 2.0 * np.cos(xi[..., 0])


def _quadratic_symbol(x, xi):
    return 1.0 + xi[..., 0] ** 2


def _sine_symbol(x, xi):
    return np.sin(xi[..., 0])


def _dirac_sphere_symbol(x, xi):
    z = xi[..., 0] + 1j * xi[..., 1]
    out = np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]) + (2, 2), dtype=complex)
    out[..., 0, 1] = np.conj(z)
    out[..., 1, 0] = z
    return out


def _chiral_sphere_symbol(x, xi):
    return xi[..., 0] + 1j * xi[..., 1]


def run_updo(scenario: Scenario, ctx: SuiteContext) -> Report:
    """Сборка по покрытиям, оценки символов, эллиптичность, расщепление и склейка."""
    report = _new_report(scenario)
    n = int(scenario.option('circle_size', 16))
    taper = int(scenario.option('taper', 2))
    lattice = build_lattice({'kind': 'circle', 'extent': n})
    tol = scenario.tolerance('assembly')
    exact_shift = shift_operator(lattice)

    with _timed(report, 'assembly'):
        for spacing in scenario.option('patch_spacings', [16, 8, 4]):
            cover = build_colored_cover(lattice, int(spacing), spacing / 2.0 + taper)
            pou = partition_of_unity(cover, taper)
            patches = len(cover.members)
            for name, func in (("shift", _shift_symbol), ("laplace", _laplace_symbol)):
                symbol = sample_symbol(func, lattice, regime="toroidal", cover=cover)
                assembled = assemble_updo(symbol, cover, pou)
                gap = float(np.max(np.abs(assembled.to_dense() - global_multiplier(symbol).to_dense())))
                report.add_criterion(f"assembly[{name}, {patches} patches]", gap, tol)
                if name == "shift":
                    exact_gap = float(np.max(np.abs(assembled.to_dense() - exact_shift.to_dense())))
                    report.add_criterion(f"assembly_exact_shift[{patches} patches]", exact_gap, tol)

    xi_max = float(scenario.option('xi_max', 64.0))
    xi_step = float(scenario.option('xi_step', 0.25))
    with _timed(report, 'estimates'):
        quadratic = sample_symbol(_quadratic_symbol, lattice, order=2, xi_max=xi_max, xi_step=xi_step)
        estimate = symbol_estimate(quadratic, k=2)
    relative = scenario.tolerance('estimate_relative')
    c00, c01 = estimate.constant(0, 0), estimate.constant(0, 1)
    report.details['estimates'] = {str(key): value for key, value in sorted(estimate.constants.items())}
    report.add_criterion("estimate_C00", abs(c00 - 1.0) / 1.0, relative, note="ожидается 1")
    report.add_criterion("estimate_C01", abs(c01 - 2.0) / 2.0, relative, note="ожидается 2")
    report.add_criterion("estimate_stable", estimate.stable, True, passed=estimate.stable, comparison="=")

    elliptic = ellipticity_check(quadratic, k=2, radius=4.0)
    report.details['ellipticity_quadratic'] = {'elliptic': elliptic.elliptic, 'constant': elliptic.constant}
    report.add_criterion("ellipticity_quadratic", elliptic.elliptic, True, passed=elliptic.elliptic,
                         comparison="=")
    sine = ellipticity_check(sample_symbol(_sine_symbol, lattice, xi_max=xi_max, xi_step=xi_step),
                             k=0, radius=4.0)
    report.details['ellipticity_sine'] = {'elliptic': sine.elliptic, 'witness': sine.witness}
    has_witness = (not sine.elliptic) and sine.witness is not None
    report.add_criterion("ellipticity_sine_witness", has_witness, True, passed=has_witness,
                         comparison="=")

    plane = build_lattice({'kind': 'torus', 'extent': 4})
    splitting = symbol_splitting(sample_symbol(_dirac_sphere_symbol, plane, regime="sphere"))
    degree = clutching_degree(sample_symbol(_chiral_sphere_symbol, plane, regime="sphere"))
    report.details['splitting'] = {'rank_plus': int(splitting.rank_plus.flat[0]),
                                   'constant_on_components': splitting.constant_on_components}
    report.add_criterion("splitting_constant", splitting.constant_on_components, True,
                         passed=splitting.constant_on_components, comparison="=")
    report.add_comparison("clutching_degree", degree, oracle=1)
    report.add_criterion("clutching_degree", abs(degree - 1), 0, comparison="=")
    return report


SUITE_RUNNERS: Dict[str, Callable[[Scenario, SuiteContext], Report]] = {
    'verify-torus': run_torus,
    'verify-plane': run_plane,
    'verify-toeplitz': run_toeplitz,
    'cocycle-suite': run_cocycles,
    'cover-suite': run_covers,
    'updo-suite': run_updo,
}
