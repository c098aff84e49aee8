"""Тесты символов: сборка ПДО по покрытиям, оценки, эллиптичность, расщепление и склейка."""

import numpy as np
import pytest

from lattice_geometry import build_colored_cover, build_lattice, partition_of_unity
from operator_algebra import shift_operator
from symbols_updo import (assemble_updo, clutching_degree, ellipticity_check, global_multiplier,
                          sample_symbol, symbol_estimate, symbol_splitting)


def shift_symbol(x, xi):
    return np.exp(1j * xi[..., 0])


def laplace_symbol(x, xi):
    return 2.0 - 2.0 * np.cos(xi[..., 0])


def quadratic_symbol(x, xi):
    return 1.0 + xi[..., 0] ** 2


def dirac_symbol(x, xi):
    z = xi[..., 0] + 1j * xi[..., 1]
    out = np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]) + (2, 2), dtype=complex)
    out[..., 0, 1] = np.conj(z)
    out[..., 1, 0] = z
    return out


def chiral_symbol(x, xi):
    return xi[..., 0] + 1j * xi[..., 1]


@pytest.fixture
def circle16():
    return build_lattice({'kind': 'circle', 'extent': 16})


@pytest.fixture
def torus4():
    return build_lattice({'kind': 'torus', 'extent': 4})


class TestAssembly:
    @pytest.mark.parametrize("spacing", [16, 8, 4])
    def test_shift_is_reproduced(self, circle16, spacing):
        cover = build_colored_cover(circle16, spacing, spacing / 2.0 + 2)
        pou = partition_of_unity(cover, 2)
        symbol = sample_symbol(shift_symbol, circle16, regime="toroidal", cover=cover)
        assembled = assemble_updo(symbol, cover, pou).to_dense()
        assert np.max(np.abs(assembled - shift_operator(circle16).to_dense())) < 1e-8
        assert np.max(np.abs(assembled - global_multiplier(symbol).to_dense())) < 1e-8

    @pytest.mark.parametrize("spacing", [8, 4])
    def test_laplace_matches_global_operator(self, circle16, spacing):
        cover = build_colored_cover(circle16, spacing, spacing / 2.0 + 2)
        pou = partition_of_unity(cover, 2)
        symbol = sample_symbol(laplace_symbol, circle16, regime="toroidal", cover=cover)
        assert symbol.patch_agreement() == 0.0
        gap = assemble_updo(symbol, cover, pou).to_dense() - global_multiplier(symbol).to_dense()
        assert np.max(np.abs(gap)) < 1e-8

    def test_needs_toroidal_symbol(self, circle16):
        cover = build_colored_cover(circle16, 8, 6.0)
        symbol = sample_symbol(laplace_symbol, circle16, cover=cover, xi_max=4.0)
        with pytest.raises(ValueError):
            assemble_updo(symbol, cover, partition_of_unity(cover, 2))

    def test_unknown_regime(self, circle16):
        with pytest.raises(ValueError):
            sample_symbol(laplace_symbol, circle16, regime="dyadic")


class TestEstimates:
    def test_quadratic_symbol_constants(self, circle16):
        symbol = sample_symbol(quadratic_symbol, circle16, order=2, xi_max=64.0, xi_step=0.25)
        estimate = symbol_estimate(symbol, k=2)
        assert estimate.constant(0, 0) == pytest.approx(1.0, abs=1e-12)
        assert estimate.constant(0, 1) == pytest.approx(2.0, rel=0.02)
        assert estimate.constant(1, 0) == 0.0
        assert estimate.stable

    def test_needs_asymptotic_symbol(self, circle16):
        symbol = sample_symbol(laplace_symbol, circle16, regime="toroidal")
        with pytest.raises(ValueError):
            symbol_estimate(symbol, k=0)

    def test_order_limit(self, circle16):
        symbol = sample_symbol(quadratic_symbol, circle16, xi_max=8.0)
        with pytest.raises(ValueError):
            symbol_estimate(symbol, k=2, max_beta=4)


class TestEllipticity:
    def test_quadratic_is_elliptic(self, circle16):
        symbol = sample_symbol(quadratic_symbol, circle16, order=2, xi_max=64.0)
        result = ellipticity_check(symbol, k=2, radius=4.0)
        assert result.elliptic
        assert result.witness is None
        assert 0 < result.constant < 2.0

    def test_sine_has_witness(self, circle16):
        symbol = sample_symbol(lambda x, xi: np.sin(xi[..., 0]), circle16, xi_max=64.0)
        result = ellipticity_check(symbol, k=0, radius=4.0)
        assert not result.elliptic
        assert result.witness['reason'] in ("sigma_min", "det_sign_change")
        assert min(abs(v) for v in result.witness['xi']) > 4.0

    def test_radius_must_be_inside_grid(self, circle16):
        symbol = sample_symbol(quadratic_symbol, circle16, xi_max=8.0)
        with pytest.raises(ValueError):
            ellipticity_check(symbol, k=2, radius=4.0)


class TestSphere:
    def test_dirac_splitting(self, torus4):
        splitting = symbol_splitting(sample_symbol(dirac_symbol, torus4, regime="sphere"))
        assert splitting.constant_on_components
        assert np.all(splitting.rank_plus == 1)
        assert np.all(splitting.rank_minus == 1)
        p = splitting.projectors
        assert np.allclose(p @ p, p)

    def test_non_hermitian_layer(self, torus4):
        with pytest.raises(ValueError):
            symbol_splitting(sample_symbol(chiral_symbol, torus4, regime="sphere"))

    def test_clutching_degree(self, torus4):
        assert clutching_degree(sample_symbol(chiral_symbol, torus4, regime="sphere")) == 1
        conjugate = sample_symbol(lambda x, xi: xi[..., 0] - 1j * xi[..., 1], torus4, regime="sphere")
        assert clutching_degree(conjugate) == -1

    def test_clutching_needs_plane(self, circle16):
        with pytest.raises(ValueError):
            clutching_degree(sample_symbol(lambda x, xi: xi[..., 0], circle16, regime="sphere"))
