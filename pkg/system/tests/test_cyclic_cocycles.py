"""Тесты циклических коцепей Черна–Конна и спаривания с модулем Харди."""

import numpy as np
import pytest

from cyclic_cocycles import (CyclicCochain, alpha_current, cyclic_defect, even_character,
                             even_cocycle, hochschild_b, hochschild_coboundary, odd_character,
                             odd_cocycle, odd_pairing_raw, periodicity_ratios, random_cochain)
from models import (circle_lattice, hardy_module, hardy_trace_window, random_involutive_module,
                    winding_symbol)

HARDY_ODD_PAIRING = 1j / (4.0 * np.pi)
TOL = 1e-9


def _functions(rng, count, sites=3):
    return [rng.uniform(-1.0, 1.0, sites) for _ in range(count)]


class TestEvenCharacter:
    @pytest.mark.parametrize("m", [0, 1, 2])
    def test_cyclic_and_closed(self, m, rng):
        for seed in range(5):
            phi = even_character(random_involutive_module(seed, graded=True), m)
            assert cyclic_defect(phi, *_functions(rng, 2 * m + 1)) < TOL
            assert abs(hochschild_b(phi, *_functions(rng, 2 * m + 2))) < TOL

    def test_needs_graded_module(self):
        with pytest.raises(ValueError):
            even_cocycle(random_involutive_module(0, graded=False), 0, np.ones(3))

    def test_arity_is_checked(self, rng):
        module = random_involutive_module(0, graded=True)
        with pytest.raises(ValueError):
            even_cocycle(module, 1, *_functions(rng, 2))
        with pytest.raises(ValueError):
            even_character(module, 1)(*_functions(rng, 4))

    def test_periodicity_ratios(self):
        module = random_involutive_module(3, graded=True)
        projection = np.array([1.0, 0.0, 0.0])
        values, ratios = periodicity_ratios(module, projection, max_m=2)
        assert len(values) == 3
        assert len(ratios) == 2


class TestOddCharacter:
    @pytest.mark.parametrize("m", [1, 2])
    def test_cyclic_and_closed(self, m, rng):
        for seed in range(5):
            phi = odd_character(random_involutive_module(seed, graded=False), m)
            assert cyclic_defect(phi, *_functions(rng, 2 * m)) < TOL
            assert abs(hochschild_b(phi, *_functions(rng, 2 * m + 1))) < TOL

    def test_needs_ungraded_module(self):
        with pytest.raises(ValueError):
            odd_cocycle(random_involutive_module(0, graded=True), 1, np.ones(3), np.ones(3))

    def test_m_must_be_positive(self):
        with pytest.raises(ValueError):
            odd_cocycle(random_involutive_module(0, graded=False), 0)

    @pytest.mark.parametrize("k", [-2, -1, 1, 2])
    def test_hardy_pairing_matches_winding(self, k):
        lattice = circle_lattice(32)
        raw = odd_pairing_raw(hardy_module(lattice), winding_symbol(lattice, k),
                              window=hardy_trace_window(lattice))
        calibrated = HARDY_ODD_PAIRING * raw
        assert calibrated.real == pytest.approx(-k, abs=1e-6)
        assert abs(calibrated.imag) < 1e-6


class TestAlphaCurrent:
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_alpha_kills_coboundaries(self, p, rng):
        psi = random_cochain(p, 3, seed=p)
        assert abs(alpha_current(hochschild_coboundary(psi), *_functions(rng, p + 1))) < TOL

    def test_arity_mismatch(self, rng):
        with pytest.raises(ValueError):
            alpha_current(random_cochain(2, 3, seed=0), *_functions(rng, 3))

    def test_degree_limit(self, rng):
        with pytest.raises(ValueError):
            alpha_current(random_cochain(6, 2, seed=0), *_functions(rng, 6, sites=2))

    def test_b_needs_one_more_argument(self, rng):
        psi = random_cochain(2, 3, seed=0)
        with pytest.raises(ValueError):
            hochschild_b(psi, *_functions(rng, 2))

    def test_cochain_arity(self):
        phi = CyclicCochain(2, lambda a, b: 0.0)
        with pytest.raises(ValueError):
            phi(np.ones(3))
