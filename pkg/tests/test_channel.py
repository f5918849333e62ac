import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpa_codebook.channel import (SPEED_OF_LIGHT, ArrayConfig, ConfigurationError, DomainError,
                                  PathLoss, ScenarioParams, aggregate_channel, apply_one_to_m,
                                  channel_matrix_per_path, combine_vertical, complex_gaussian,
                                  element_channel, generate_channels, horizontal_offset,
                                  large_scale_coefficient, line_panel_order, port_channel,
                                  sample_paths, txru_weight, vectorize_channel, vertical_offset)

LAM = SPEED_OF_LIGHT / 900e6


def test_desk_geometry(desk):
    assert (desk.rows, desk.cols) == (8, 4)
    assert desk.ports_v == 1
    assert desk.n_ports == 8
    assert desk.wavelength == pytest.approx(LAM)


class TestPaths:
    def test_table_defaults_give_twenty_paths_in_range(self):
        p = sample_paths(ArrayConfig(), ScenarioParams(), np.random.default_rng(0))
        assert len(p) == 20
        assert np.all((p.horizontal_angles >= 0) & (p.horizontal_angles <= np.pi))
        assert np.all((p.vertical_angles >= 0) & (p.vertical_angles <= np.pi / 36))
        assert p.gains.shape == (2, 20)

    def test_point_interval(self):
        sc = ScenarioParams(n_paths=1, horizontal_angle_range=(0.3, 0.3),
                            vertical_angle_range=(0.1, 0.1))
        p = sample_paths(ArrayConfig(), sc, np.random.default_rng(0))
        assert p.horizontal_angles.tolist() == [0.3]
        assert p.vertical_angles.tolist() == [0.1]

    def test_gain_power_is_unit(self):
        z = complex_gaussian(np.random.default_rng(5), 100_000)
        assert abs(np.mean(np.abs(z) ** 2) - 1) < 0.05

    def test_empty_range_rejected(self):
        with pytest.raises(ConfigurationError):
            ScenarioParams(horizontal_angle_range=(1.0, 0.5))


class TestLargeScale:
    def test_zero_and_twenty_db(self):
        assert large_scale_coefficient(1, 1.0, PathLoss(0.0, 0.0)) == pytest.approx(1.0)
        assert large_scale_coefficient(1, 1.0, PathLoss(20.0, 0.0)) == pytest.approx(0.1)

    def test_hundred_meters(self):
        expected = 10 ** (-(8 + 37.6 * 2) / 20)
        assert large_scale_coefficient(1, 100.0) == pytest.approx(expected, rel=1e-12)

    def test_nonpositive_distance(self):
        with pytest.raises(DomainError):
            large_scale_coefficient(1, 0.0)


class TestOffsets:
    def test_vertical_examples(self, desk):
        z_n = desk.elem_spacing_v
        z_m = desk.panel_gap_v
        cfg = ArrayConfig(n_panels_v=2)
        assert vertical_offset(desk, 1) == 0
        assert vertical_offset(desk, 8) == pytest.approx(7 * z_n)
        assert vertical_offset(cfg, 9) == pytest.approx(z_m + 7 * z_n)

    def test_horizontal_second_panel(self, desk):
        y_n, y_m = desk.elem_spacing_h, desk.panel_gap_h
        assert horizontal_offset(desk, 2) == pytest.approx(y_n)
        assert horizontal_offset(desk, 3) == pytest.approx(y_m + y_n)

    def test_out_of_range(self, desk):
        with pytest.raises(DomainError):
            vertical_offset(desk, 0)
        with pytest.raises(DomainError):
            horizontal_offset(desk, desk.cols + 1)


class TestPerPath:
    def test_broadside_is_flat(self, desk):
        H = channel_matrix_per_path(desk, 0.0, np.pi / 2, 0.5 + 0.5j)
        assert np.allclose(H, 0.5 + 0.5j, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, np.pi), st.floats(0, np.pi), st.complex_numbers(max_magnitude=10))
    def test_unit_modulus(self, v, h, rho):
        H = channel_matrix_per_path(ArrayConfig(), v, h, rho)
        assert np.allclose(np.abs(H), abs(rho), rtol=1e-12, atol=1e-300)

    def test_full_turn(self):
        cfg = ArrayConfig(n_elems_v=2, vertical_combining=1, elem_spacing_v=LAM)
        H = channel_matrix_per_path(cfg, np.pi / 2, np.pi / 2, 1.0)
        assert H[1, 0] == pytest.approx(1.0, abs=1e-12)


class TestAggregate:
    def test_examples(self):
        H = np.arange(6).reshape(2, 3) + 1j
        assert np.allclose(aggregate_channel([H]), H)
        assert np.allclose(aggregate_channel([H] * 4), 2 * H)
        assert np.allclose(aggregate_channel([H, -H]), 0)

    def test_fused_sum_matches_per_path(self, desk):
        rng = np.random.default_rng(3)
        p = sample_paths(desk, ScenarioParams(), rng)
        rho = large_scale_coefficient(p.gains[0], p.distance)
        ref = aggregate_channel([channel_matrix_per_path(desk, v, h, r) for v, h, r in
                                 zip(p.vertical_angles, p.horizontal_angles, rho)])
        assert np.allclose(element_channel(desk, p, 0), ref, rtol=1e-12, atol=1e-18)


class TestVectorize:
    def test_examples(self):
        assert vectorize_channel(np.array([[3 + 1j]])).tolist() == [3 + 1j]
        assert np.allclose(vectorize_channel(np.ones((2, 2))), 0.5)

    def test_column_major(self):
        H = np.array([[1, 2], [3, 4]])
        assert np.allclose(vectorize_channel(H) * 2, [1, 3, 2, 4])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
    def test_isometry(self, r, c, seed):
        H = complex_gaussian(np.random.default_rng(seed), (r, c))
        v = vectorize_channel(H)
        assert np.linalg.norm(v) ** 2 * H.size == pytest.approx(np.linalg.norm(H) ** 2, rel=1e-12)


class TestOneToM:
    def test_single_element(self):
        cfg = ArrayConfig(vertical_combining=1)
        assert np.allclose(txru_weight(cfg, 0.3), [1.0])

    def test_unit_norm_and_zero_tilt_phase(self, desk):
        u = txru_weight(desk, 0.27)
        assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(txru_weight(desk, np.pi / 2), 1 / math.sqrt(8), atol=1e-12)

    def test_identity_mapping(self):
        cfg = ArrayConfig(vertical_combining=1)
        H = complex_gaussian(np.random.default_rng(0), (cfg.rows, cfg.cols))
        assert np.allclose(apply_one_to_m(H, [1.0], cfg), vectorize_channel(H))

    def test_pair_combining(self):
        u = np.array([1, 1]) / math.sqrt(2)
        a = 0.3 - 0.2j
        out = combine_vertical(np.array([[a], [a]]), u)
        assert out[0, 0] == pytest.approx(a * math.sqrt(2))

    def test_output_length(self, desk):
        rng = np.random.default_rng(1)
        p = sample_paths(desk, ScenarioParams(), rng)
        h = port_channel(desk, p, 0.3)
        assert h.shape == (desk.n_ports,)

    def test_indivisible_combining(self):
        with pytest.raises(ConfigurationError):
            ArrayConfig(vertical_combining=3)


def test_channels_are_seed_deterministic(desk):
    a = generate_channels(desk, ScenarioParams(), np.random.default_rng(7))
    b = generate_channels(desk, ScenarioParams(), np.random.default_rng(7))
    assert a.shape == (3, 8)
    assert np.array_equal(a, b)


def test_line_panel_order_is_permutation(desk):
    order = line_panel_order(desk)
    assert sorted(order) == list(range(desk.n_ports))
    # panel 0 keeps columns 0-1 of both polarizations
    assert list(order[:4]) == [0, 1, 4, 5]
