"""Тесты расслоений, магнитного оператора Дирака, модулей Фредгольма и оракулов."""

import numpy as np
import pytest

from lattice_geometry import build_lattice
from models import (circle_lattice, direct_sum, gauge_transform, hardy_module, index_oracle,
                    magnetic_dirac, random_involutive_module, tensor_product, toeplitz_index,
                    trivial_bundle, twist_by_bundle, uniform_flux_bundle, winding_number,
                    winding_symbol)
from operator_algebra import singular_values


class TestBundles:
    def test_uniform_flux_is_unitary(self, torus8):
        bundle = uniform_flux_bundle(torus8, quanta=2)
        assert bundle.unitarity_defect() < 1e-14
        assert bundle.flux_quanta == 2
        assert bundle.descriptor['flux'] == pytest.approx(2 * 2 * np.pi / 64)

    def test_unquantized_flux_on_torus(self, torus8):
        with pytest.raises(ValueError):
            uniform_flux_bundle(torus8, flux=0.1)

    def test_window_accepts_any_flux(self):
        window = build_lattice({'kind': 'plane-window', 'extent': 5})
        assert uniform_flux_bundle(window, flux=0.1).flux_quanta is None

    def test_sum_and_product_ranks(self, torus8):
        e = uniform_flux_bundle(torus8, quanta=1)
        f = trivial_bundle(torus8, rank=2)
        assert direct_sum(e, f).rank == 3
        assert tensor_product(e, f).rank == 2
        assert direct_sum(e, f).unitarity_defect() < 1e-14

    def test_transport_operator_is_unitary(self, torus8):
        t = uniform_flux_bundle(torus8, quanta=1).transport_operator(0).toarray()
        assert np.allclose(t @ t.conj().T, np.eye(64))


class TestMagneticDirac:
    def test_overlap_grading_anticommutes(self, torus8):
        d = magnetic_dirac(torus8, quanta=1)
        assert d.self_adjointness_defect() < 1e-12
        assert d.odd_defect() < 1e-10

    @pytest.mark.parametrize("quanta", [0, 1, 2])
    def test_wilson_index_counts_flux(self, torus8, quanta):
        assert index_oracle(magnetic_dirac(torus8, quanta=quanta)) == quanta

    def test_one_sided_index_vanishes(self, torus8):
        d = magnetic_dirac(torus8, quanta=2, stencil="one_sided")
        assert index_oracle(d) == 0
        assert d.odd_defect() < 1e-12

    def test_twist_adds_flux(self, torus8):
        d = magnetic_dirac(torus8, quanta=1)
        twisted = twist_by_bundle(d, uniform_flux_bundle(torus8, quanta=1))
        assert index_oracle(twisted) == 2

    def test_direct_sum_doubles_index(self, torus8):
        e = uniform_flux_bundle(torus8, quanta=1)
        d = magnetic_dirac(torus8, bundle=direct_sum(e, e))
        assert index_oracle(d) == 2

    def test_gauge_invariance(self, torus8, rng):
        bundle = uniform_flux_bundle(torus8, quanta=1)
        g = np.exp(1j * rng.uniform(0, 2 * np.pi, torus8.n_sites))[:, None, None]
        d = magnetic_dirac(torus8, bundle=gauge_transform(bundle, g))
        assert index_oracle(d) == 1
        reference = singular_values(magnetic_dirac(torus8, bundle=bundle).operator)
        assert np.max(np.abs(singular_values(d.operator) - reference)) <= 1e-10

    def test_unknown_stencil(self, torus8):
        with pytest.raises(ValueError):
            magnetic_dirac(torus8, stencil="naive")

    def test_requires_planar_lattice(self):
        with pytest.raises(ValueError):
            magnetic_dirac(circle_lattice(8))


class TestToeplitz:
    @pytest.mark.parametrize("k", [-3, -2, -1, 0, 1, 2, 3])
    def test_index_is_minus_winding(self, k):
        u = winding_symbol(circle_lattice(128), k)
        assert winding_number(u) == k
        assert toeplitz_index(u) == -k

    def test_non_unimodular_symbol(self):
        u = 2.0 * winding_symbol(circle_lattice(16), 1)
        with pytest.raises(ValueError):
            toeplitz_index(u)

    def test_too_coarse_circle(self):
        with pytest.raises(ValueError):
            toeplitz_index(winding_symbol(circle_lattice(8), 3))


class TestFredholmModules:
    def test_hardy_module_is_involutive(self):
        module = hardy_module(circle_lattice(16))
        module.check()
        assert module.multidegree == -1

    def test_hardy_needs_circle(self, torus8):
        with pytest.raises(ValueError):
            hardy_module(torus8)
        with pytest.raises(ValueError):
            hardy_module(circle_lattice(4))

    @pytest.mark.parametrize("graded", [True, False])
    def test_random_modules(self, graded):
        module = random_involutive_module(3, graded=graded)
        module.check()
        assert module.operator.shape == (6, 6)
        assert (module.grading is not None) == graded

    def test_graded_module_needs_even_rank(self):
        with pytest.raises(ValueError):
            random_involutive_module(0, graded=True, rank=3)
