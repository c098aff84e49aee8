"""Тесты решёток, последовательностей Фёльнера, покрытий и разбиений единицы."""

import numpy as np
import pytest

from lattice_geometry import (build_colored_cover, build_lattice, folner_boxes, folner_deficiency,
                              partition_of_unity, whole_space)


class TestBuildLattice:
    def test_torus_is_periodic_and_regular(self, torus8):
        assert torus8.n_sites == 64
        assert torus8.periodic
        assert all(torus8.degree(x) == 4 for x in range(torus8.n_sites))
        assert not torus8.boundary.any()

    def test_window_boundary(self):
        lat = build_lattice({'kind': 'plane-window', 'extent': 5})
        assert lat.n_sites == 25
        assert int(lat.boundary.sum()) == 16

    def test_half_line_boundary_is_origin_only(self):
        lat = build_lattice({'kind': 'half-line', 'extent': 10})
        assert np.nonzero(lat.boundary)[0].tolist() == [0]

    def test_rectangular_extent(self):
        lat = build_lattice({'kind': 'torus', 'extent': [4, 6]})
        assert lat.extent == (4, 6)
        assert lat.site_index((4, 6)) == lat.site_index((0, 0))

    def test_spacing_scales_distances(self):
        lat = build_lattice({'kind': 'circle', 'extent': 8, 'spacing': 0.5})
        assert lat.distance(0, 4) == pytest.approx(2.0)
        assert lat.distance(0, 7) == pytest.approx(0.5)

    @pytest.mark.parametrize("spec", [
        {'kind': 'sphere', 'extent': 4},
        {'kind': 'torus', 'extent': 1},
        {'kind': 'circle', 'extent': [4, 4]},
        {'kind': 'torus', 'extent': 4, 'spacing': 0.0},
    ])
    def test_invalid_specs(self, spec):
        with pytest.raises(ValueError):
            build_lattice(spec)

    def test_metric_axioms(self, torus8):
        assert torus8.check_metric()
        window = build_lattice({'kind': 'plane-window', 'extent': 7})
        assert window.check_metric(seed=3)

    def test_distance_to_set_matches_matrix(self):
        lat = build_lattice({'kind': 'plane-window', 'extent': 6})
        subset = [0, 7, 20]
        expected = lat.distance_matrix[:, subset].min(axis=1)
        assert np.allclose(lat.distance_to_set(subset), expected)


class TestFolner:
    def test_segment_deficiencies(self, window_line):
        seq = folner_boxes(window_line, [10, 20, 40], radii=(2,))
        assert [seq.deficiency(i, 2) for i in range(3)] == [0.6, 0.3, 0.15]

    def test_nested_boxes(self):
        lat = build_lattice({'kind': 'plane-window', 'extent': 32})
        seq = folner_boxes(lat, [8, 12, 16])
        assert seq.is_nested()
        assert seq.sizes == (64, 144, 256)
        assert list(seq.deficiencies[2]) == sorted(seq.deficiencies[2], reverse=True)

    def test_box_must_fit_with_margin(self):
        lat = build_lattice({'kind': 'plane-window', 'extent': 20})
        with pytest.raises(ValueError):
            folner_boxes(lat, [18], radii=(2,))

    def test_half_line_segments_anchor_at_origin(self):
        lat = build_lattice({'kind': 'half-line', 'extent': 60})
        seq = folner_boxes(lat, [10, 20], radii=(1,))
        assert seq.sets[0].tolist() == list(range(10))

    def test_torus_is_whole_space(self, torus8):
        seq = whole_space(torus8)
        assert seq.deficiency(0, 2) == 0.0
        assert folner_deficiency(torus8, np.arange(torus8.n_sites), 3) == 0.0

    def test_invalid_deficiency_arguments(self, window_line):
        with pytest.raises(ValueError):
            folner_deficiency(window_line, [], 2)
        with pytest.raises(ValueError):
            folner_deficiency(window_line, [3, 4], 0)

    def test_unsorted_schedule(self, window_line):
        with pytest.raises(ValueError):
            folner_boxes(window_line, [20, 10])


class TestCovers:
    def test_torus_cover_is_proper(self):
        lat = build_lattice({'kind': 'torus', 'extent': 16})
        cover = build_colored_cover(lat, 4, 3.0)
        assert cover.covers_all()
        assert cover.is_proper()
        assert cover.n_colors <= cover.max_degree + 1
        assert len(cover.members) == 16

    def test_packing_needs_one_color(self):
        lat = build_lattice({'kind': 'torus', 'extent': 16})
        cover = build_colored_cover(lat, 4, 1.0, require_cover=False)
        assert cover.n_colors == 1
        assert not cover.covers_all()

    def test_small_radius_rejected(self):
        lat = build_lattice({'kind': 'torus', 'extent': 16})
        with pytest.raises(ValueError):
            build_colored_cover(lat, 4, 1.0)

    @pytest.mark.parametrize("kind, extent", [("torus", 16), ("plane-window", 20)])
    def test_partition_of_unity(self, kind, extent):
        lat = build_lattice({'kind': kind, 'extent': extent})
        cover = build_colored_cover(lat, 4, 3.0)
        pou = partition_of_unity(cover, 2)
        assert pou.sum_deviation() <= 1e-12
        assert pou.lipschitz_constants().max() <= 0.5 + 1e-12
        assert pou.supported_in_members()

    def test_taper_longer_than_spacing(self):
        lat = build_lattice({'kind': 'torus', 'extent': 16})
        cover = build_colored_cover(lat, 4, 3.0)
        with pytest.raises(ValueError):
            partition_of_unity(cover, 5)

    def test_torus_not_divisible_by_spacing(self):
        lat = build_lattice({'kind': 'torus', 'extent': 10})
        cover = build_colored_cover(lat, 4, 3.0)
        with pytest.raises(ValueError):
            partition_of_unity(cover, 2)

    def test_window_line_cover_needs_two_colors(self):
        lat = build_lattice({'kind': 'plane-window', 'extent': 10, 'dimension': 1})
        cover = build_colored_cover(lat, 2, 1.25)
        assert [m.tolist() for m in cover.members] == [[0, 1], [1, 2, 3], [3, 4, 5], [5, 6, 7], [7, 8, 9]]
        assert cover.max_degree == 2
        assert cover.n_colors == 2
        assert cover.is_proper()

    @pytest.mark.parametrize("taper", [1, 2])
    def test_partition_slope_is_bounded_by_taper(self, taper):
        lat = build_lattice({'kind': 'plane-window', 'extent': 10, 'dimension': 1})
        pou = partition_of_unity(build_colored_cover(lat, 2, 1.25), taper)
        assert pou.sum_deviation() <= 1e-12
        assert pou.lipschitz_constants().max() <= 1.0 / taper + 1e-12
        assert pou.supported_in_members()
