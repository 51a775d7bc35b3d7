import math

import numpy as np
import pytest

from dipolesmooth.geometry import (
    Dipole,
    DipoleState,
    GeometryError,
    Leadfield,
    LeadfieldFileError,
    SensorArray,
    SourceGrid,
    build_grid,
    build_sensor_cap,
    load_leadfield,
    load_sensors,
    predict_data,
    predict_data_batch,
    sarvas_leadfield,
    save_leadfield,
    save_sensors,
)

from field_oracle import conducting_sphere_field


class TestBuildGrid:
    def test_spacing_beyond_diameter_leaves_origin(self):
        grid = build_grid(0.09, 0.20, 0.0)
        assert len(grid) == 1
        np.testing.assert_array_equal(grid.points, [[0.0, 0.0, 0.0]])

    def test_all_points_within_margin(self):
        grid = build_grid(0.09, 0.02, 0.005)
        norms = np.linalg.norm(grid.points, axis=1)
        assert np.all(norms <= 0.09 - 0.005 + 1e-15)

    def test_count_matches_bruteforce_enumeration(self):
        radius, spacing, margin = 0.09, 0.02, 0.005
        grid = build_grid(radius, spacing, margin)
        # independent triple-loop count
        count = 0
        k = 10  # generous bound: k*spacing > radius
        for ix in range(-k, k + 1):
            for iy in range(-k, k + 1):
                for iz in range(-k, k + 1):
                    r = spacing * math.sqrt(ix**2 + iy**2 + iz**2)
                    if r <= radius - margin:
                        count += 1
        assert len(grid) == count

    def test_lexicographic_order_and_determinism(self):
        g1 = build_grid(0.09, 0.03, 0.0)
        g2 = build_grid(0.09, 0.03, 0.0)
        np.testing.assert_array_equal(g1.points, g2.points)
        # lexicographic by lattice index: first point has the smallest x,
        # ties broken by y then z
        keys = [tuple(np.round(p / 0.03).astype(int)) for p in g1.points]
        assert keys == sorted(keys)

    def test_empty_grid_raises(self):
        # the origin lattice point survives any margin below the radius
        with pytest.raises(GeometryError, match="empty grid"):
            build_grid(0.09, 0.02, 0.09)

    def test_bad_arguments(self):
        with pytest.raises(GeometryError):
            build_grid(-1.0, 0.02, 0.0)
        with pytest.raises(GeometryError):
            build_grid(0.09, 0.0, 0.0)
        with pytest.raises(GeometryError):
            build_grid(0.09, 0.02, -0.1)


class TestSensors:
    def test_cap_layout(self):
        sensors = build_sensor_cap(60, 0.12)
        assert len(sensors) == 60
        np.testing.assert_allclose(np.linalg.norm(sensors.positions, axis=1), 0.12)
        np.testing.assert_allclose(np.linalg.norm(sensors.orientations, axis=1), 1.0)
        # radial orientations
        np.testing.assert_allclose(
            sensors.positions, 0.12 * sensors.orientations, atol=1e-15
        )

    def test_non_unit_orientation_rejected(self):
        with pytest.raises(GeometryError, match="unit norm"):
            SensorArray([[0.0, 0.0, 0.2]], [[0.0, 0.0, 1.1]])

    def test_sensor_file_roundtrip(self, tmp_path):
        sensors = build_sensor_cap(7, 0.13)
        path = tmp_path / "sensors.txt"
        save_sensors(path, sensors)
        back = load_sensors(path)
        np.testing.assert_array_equal(back.positions, sensors.positions)
        np.testing.assert_array_equal(back.orientations, sensors.orientations)


class TestSarvasLeadfield:
    def test_central_dipole_is_silent(self, desk_grid, desk_leadfield):
        center = int(np.argmin(np.linalg.norm(desk_grid.points, axis=1)))
        assert np.linalg.norm(desk_grid.points[center]) == 0.0
        state = DipoleState([Dipole(center, (1e-8, 2e-8, -3e-8))])
        np.testing.assert_array_equal(predict_data(state, desk_leadfield), 0.0)

    def test_radial_dipole_is_silent(self, desk_grid, desk_leadfield):
        scale = np.max(np.abs(desk_leadfield.blocks)) * 1e-8
        for idx in (3, 100, 400):
            r = desk_grid.points[idx]
            if np.linalg.norm(r) == 0.0:
                continue
            state = DipoleState([Dipole(idx, 1e-8 * r / np.linalg.norm(r))])
            datum = predict_data(state, desk_leadfield)
            assert np.max(np.abs(datum)) < 1e-12 * scale + 1e-40

    def test_radial_moment_component_invariance(self, desk_grid, desk_leadfield, rng):
        for _ in range(5):
            idx = int(rng.integers(len(desk_grid)))
            r = desk_grid.points[idx]
            if np.linalg.norm(r) == 0.0:
                continue
            q = 1e-8 * rng.standard_normal(3)
            # radial component comparable in size to the moment itself
            lam = rng.normal() * np.linalg.norm(q) / np.linalg.norm(r)
            a = predict_data(DipoleState([Dipole(idx, q)]), desk_leadfield)
            b = predict_data(DipoleState([Dipole(idx, q + lam * r)]), desk_leadfield)
            np.testing.assert_allclose(a, b, atol=1e-12 * np.max(np.abs(a)) + 1e-40)

    def test_moment_linearity(self, desk_grid, desk_leadfield, rng):
        idx = int(rng.integers(len(desk_grid)))
        q = 1e-8 * rng.standard_normal(3)
        one = predict_data(DipoleState([Dipole(idx, q)]), desk_leadfield)
        scaled = predict_data(DipoleState([Dipole(idx, 3.5 * q)]), desk_leadfield)
        np.testing.assert_allclose(scaled, 3.5 * one, rtol=1e-12)

    def test_sensor_inside_conductor_rejected(self, desk_grid):
        sensors = SensorArray([[0.0, 0.0, 0.05]], [[0.0, 0.0, 1.0]])
        with pytest.raises(GeometryError, match="inside"):
            sarvas_leadfield(desk_grid, sensors)

    def test_against_quadrature_oracle(self, desk_grid, desk_sensors, desk_leadfield):
        # independent route: spectral solve of the interior potential plus
        # surface quadrature of the return-current integral
        rng = np.random.default_rng(20240917)
        checked = 0
        while checked < 20:
            gi = int(rng.integers(len(desk_grid)))
            r0 = desk_grid.points[gi]
            if np.linalg.norm(r0) < 1e-12:
                continue
            q = rng.standard_normal(3)
            q *= 1e-8 / np.linalg.norm(q)
            si = int(rng.integers(len(desk_sensors)))
            b = conducting_sphere_field(r0, q, desk_sensors.positions[si], 0.09)
            datum = desk_leadfield.blocks[gi][si] @ q
            oracle_datum = b @ desk_sensors.orientations[si]
            assert abs(datum - oracle_datum) < 1e-3 * np.linalg.norm(b)
            checked += 1


class TestPredict:
    def test_empty_state_gives_zero(self, desk_leadfield):
        np.testing.assert_array_equal(
            predict_data(DipoleState(), desk_leadfield), 0.0
        )

    def test_single_dipole_is_block_product(self, desk_leadfield):
        q = np.array([1e-8, -2e-8, 5e-9])
        state = DipoleState([Dipole(37, q)])
        np.testing.assert_array_equal(
            predict_data(state, desk_leadfield), desk_leadfield.blocks[37] @ q
        )

    def test_two_dipole_superposition(self, desk_leadfield):
        d1 = Dipole(10, (1e-8, 0.0, 0.0))
        d2 = Dipole(77, (0.0, -1e-8, 2e-8))
        lhs = predict_data(DipoleState([d1, d2]), desk_leadfield)
        rhs = predict_data(DipoleState([d1]), desk_leadfield) + predict_data(
            DipoleState([d2]), desk_leadfield
        )
        np.testing.assert_allclose(lhs, rhs, rtol=1e-15)

    def test_batch_matches_scalar(self, desk_leadfield, rng):
        states = [
            DipoleState(
                Dipole(int(rng.integers(600)), 1e-8 * rng.standard_normal(3))
                for _ in range(rng.integers(0, 3))
            )
            for _ in range(8)
        ]
        batch = predict_data_batch(states, desk_leadfield)
        for i, st in enumerate(states):
            # summation order differs between the two paths
            np.testing.assert_allclose(
                batch[i], predict_data(st, desk_leadfield), rtol=1e-12, atol=1e-40
            )

    def test_out_of_range_index(self, desk_leadfield):
        state = DipoleState([Dipole(10**6, (1e-8, 0, 0))])
        with pytest.raises(IndexError):
            predict_data(state, desk_leadfield)


class TestDipoleState:
    def test_permutation_invariance(self):
        a = Dipole(3, (1e-8, 0, 0))
        b = Dipole(7, (0, 1e-8, 0))
        assert DipoleState([a, b]) == DipoleState([b, a])
        assert hash(DipoleState([a, b])) == hash(DipoleState([b, a]))

    def test_distinct_states_differ(self):
        a = Dipole(3, (1e-8, 0, 0))
        b = Dipole(3, (2e-8, 0, 0))
        assert DipoleState([a]) != DipoleState([b])


class TestLeadfieldFiles:
    def test_roundtrip_bit_exact(self, tmp_path, small_grid, small_sensors, small_leadfield):
        path = tmp_path / "lf.txt"
        save_leadfield(path, small_leadfield)
        back = load_leadfield(path, small_grid, len(small_sensors))
        np.testing.assert_array_equal(back.blocks, small_leadfield.blocks)

    def test_zero_file_predicts_zero(self, tmp_path, small_grid, small_sensors):
        path = tmp_path / "lf.txt"
        zeros = Leadfield(np.zeros((len(small_grid), len(small_sensors), 3)))
        save_leadfield(path, zeros)
        lf = load_leadfield(path, small_grid, len(small_sensors))
        state = DipoleState([Dipole(5, (1e-8, 1e-8, 1e-8))])
        np.testing.assert_array_equal(predict_data(state, lf), 0.0)

    def test_nan_entry_reports_coordinates(self, tmp_path, small_grid, small_sensors, small_leadfield):
        path = tmp_path / "lf.txt"
        blocks = small_leadfield.blocks.copy()
        blocks[3, 7, 1] = np.nan
        # write manually to bypass the constructor's finite check
        with open(path, "w") as fh:
            fh.write(f"{blocks.shape[0]} {blocks.shape[1]}\n")
            for p in range(blocks.shape[0]):
                for c in range(3):
                    fh.write(" ".join(repr(float(v)) for v in blocks[p, :, c]) + "\n")
        with pytest.raises(LeadfieldFileError, match="point 3.*column 1.*sensor 7"):
            load_leadfield(path, small_grid, len(small_sensors))

    def test_dimension_mismatch(self, tmp_path, small_grid, small_sensors, small_leadfield):
        path = tmp_path / "lf.txt"
        save_leadfield(path, small_leadfield)
        with pytest.raises(LeadfieldFileError, match="sensors"):
            load_leadfield(path, small_grid, len(small_sensors) + 1)

    def test_malformed_file(self, tmp_path, small_grid):
        path = tmp_path / "lf.txt"
        path.write_text("not a header\n")
        with pytest.raises(LeadfieldFileError):
            load_leadfield(path, small_grid, 12)

    def test_truncated_file(self, tmp_path, small_grid, small_sensors, small_leadfield):
        path = tmp_path / "lf.txt"
        save_leadfield(path, small_leadfield)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:10]) + "\n")
        with pytest.raises(LeadfieldFileError, match="truncated"):
            load_leadfield(path, small_grid, len(small_sensors))
