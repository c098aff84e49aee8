"""Тесты функционального исчисления: фильтры, eigen/Чебышёв, кэш, квазилокальность."""

import numpy as np
import pytest

from functional_calculus import (MIN_NODES, NODES_PER_DEGREE, ChebyshevDegreeError, EigenCache,
                                 adaptive_coefficients, apply_filter,
                                 chebyshev_coefficients, gaussian, kernel_block, kernel_width,
                                 quasilocality_profile, spectral_enclosure, table_filter)
from lattice_geometry import build_lattice
from models import magnetic_dirac
from operator_algebra import operator_norm, shift_operator


@pytest.fixture
def hopping(window_line):
    """Самосопряжённый оператор перескока S + S* с распространением 1."""
    s = shift_operator(window_line)
    return s + s.adjoint()


@pytest.fixture
def dirac4():
    torus = build_lattice({'kind': 'torus', 'extent': 4})
    return magnetic_dirac(torus, quanta=1, stencil="one_sided")


class TestFilters:
    def test_gaussian_is_index_filter(self):
        f = gaussian(2.0)
        f.check_index_filter()
        assert f(1.0) == pytest.approx(np.exp(-2.0))

    def test_gaussian_needs_positive_time(self):
        with pytest.raises(ValueError):
            gaussian(0.0)

    def test_odd_table_is_rejected(self):
        with pytest.raises(ValueError):
            table_filter([0.0, 1.0], [1.0, 0.0]).check_index_filter()

    def test_table_nodes_must_increase(self):
        with pytest.raises(ValueError):
            table_filter([1.0, 0.0], [0.0, 1.0])

    def test_constant_has_single_coefficient(self):
        coeffs = chebyshev_coefficients(lambda x: np.ones_like(x), 2.0, 32)
        assert coeffs[0] == pytest.approx(1.0)
        assert np.max(np.abs(coeffs[1:])) < 1e-14

    def test_quadrature_grid_follows_degree(self):
        coeffs, degree, residual = adaptive_coefficients(lambda x: np.ones_like(x), 2.0, 1e-10, 2000)
        assert (degree, len(coeffs)) == (0, MIN_NODES)
        narrow = lambda x: np.exp(-x ** 2)
        coeffs, degree, residual = adaptive_coefficients(narrow, 10.0, 1e-10, 2000)
        assert residual <= 1e-10
        assert NODES_PER_DEGREE * (degree + 1) <= len(coeffs) < NODES_PER_DEGREE * 2000


class TestApplyFilter:
    def test_chebyshev_matches_eigen(self, dirac4):
        f = gaussian(1.0)
        exact = apply_filter(dirac4.operator, f, method="eigen")
        series = apply_filter(dirac4.operator, f, method="chebyshev")
        assert series.residual_bound <= 1e-10
        assert operator_norm(exact.operator - series.operator) <= 1e-8

    def test_enclosure_bounds_spectrum(self, hopping):
        a = spectral_enclosure(hopping)
        assert operator_norm(hopping) <= a
        assert a < 2.0 * 1.01 + 1e-12

    def test_fixed_degree_has_finite_propagation(self, hopping):
        kernel = apply_filter(hopping, gaussian(1.0), method="chebyshev", degree=4)
        assert kernel.degree == 4
        assert np.all(kernel_block(kernel, 50, 55) == 0)
        assert np.any(kernel_block(kernel, 50, 54) != 0)
        assert kernel_width(kernel) <= 4.0

    def test_degree_cap_too_small(self, hopping):
        with pytest.raises(ChebyshevDegreeError):
            apply_filter(hopping, gaussian(1.0), method="chebyshev", degree_cap=2)

    def test_rejects_non_self_adjoint(self, window_line):
        with pytest.raises(ValueError):
            apply_filter(shift_operator(window_line), gaussian(1.0))

    def test_rejects_unknown_method_and_size(self, hopping):
        with pytest.raises(ValueError):
            apply_filter(hopping, gaussian(1.0), method="pade")
        with pytest.raises(ValueError):
            apply_filter(hopping, gaussian(1.0), dense_cap=10)

    def test_kernel_block_outside_lattice(self, hopping):
        kernel = apply_filter(hopping, gaussian(1.0))
        with pytest.raises(ValueError):
            kernel_block(kernel, 0, 100)


class TestEigenCache:
    def test_disk_hit_reproduces_kernel(self, dirac4, tmp_path):
        cache = EigenCache(tmp_path)
        first = apply_filter(dirac4.operator, gaussian(1.0), cache=cache)
        second = apply_filter(dirac4.operator, gaussian(1.0), cache=cache)
        assert (cache.hits, cache.misses) == (1, 1)
        assert len(list(tmp_path.glob("eigh_*.npz"))) == 1
        assert np.array_equal(first.operator.to_dense(), second.operator.to_dense())
        assert first.source == second.source

    def test_memory_cache(self, dirac4):
        cache = EigenCache()
        apply_filter(dirac4.operator, gaussian(0.5), cache=cache)
        apply_filter(dirac4.operator, gaussian(2.0), cache=cache)
        assert (cache.hits, cache.misses) == (1, 1)


class TestQuasiLocality:
    def test_profile_decreases(self, hopping):
        kernel = apply_filter(hopping, gaussian(1.0))
        profile = quasilocality_profile(kernel, [1, 2, 3, 4])
        values = profile.values
        assert all(b <= a for a, b in zip(values[:-1], values[1:]))
        assert values[-1] < values[0]

    def test_radii_must_increase(self, hopping):
        kernel = apply_filter(hopping, gaussian(1.0))
        with pytest.raises(ValueError):
            quasilocality_profile(kernel, [2, 1])
