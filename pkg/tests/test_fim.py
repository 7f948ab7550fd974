"""Variance models, gradients, Jacobian blocks and snapshot information."""

import math

import numpy as np
import pytest

from mpslam_bounds.fim import (
    SPEED_OF_LIGHT,
    ComponentOrder,
    IsotropicAperture,
    UniformLinearArray,
    ZeroApertureError,
    angle_variance,
    azimuth_gradient,
    channel_fim,
    departure_mapping_block,
    distance_gradient,
    global_jacobian,
    global_snapshot_fim,
    mapping_block,
    mapping_submatrices,
    orientation_entry,
    positioning_submatrices,
    ranging_variance,
)
from mpslam_bounds.geometry import (
    AgentPose,
    Anchor,
    DegenerateGeometryError,
    PathComponent,
    SurfaceMap,
    channel_params,
    wrap_angle,
)
from tests.test_geometry import random_geometry


def fd_channel_gradient(agent, anchor, path, surfaces, coord, step=1e-6):
    """Central difference of (distance, aoa, aod) w.r.t. one joint-state coord.

    coord: 0..1 agent position, 2 orientation, 3 + 2*(s-1) + axis surface point.
    """

    def evaluate(delta):
        position = agent.position.copy()
        orientation = agent.orientation
        pts = surfaces.points.copy()
        if coord < 2:
            position[coord] += delta
        elif coord == 2:
            orientation += delta
        else:
            s, axis = divmod(coord - 3, 2)
            pts[s, axis] += delta
        pose = AgentPose(position=position, velocity=agent.velocity,
                         orientation=orientation)
        return channel_params(pose, anchor, path, SurfaceMap(pts)).as_array()

    base = (agent.position[coord] if coord < 2
            else agent.orientation if coord == 2
            else surfaces.points[(coord - 3) // 2, (coord - 3) % 2])
    h = step * max(1.0, abs(base))
    diff = evaluate(h) - evaluate(-h)
    diff[1] = wrap_angle(diff[1])
    diff[2] = wrap_angle(diff[2])
    return diff / (2.0 * h)


def rel_err(analytic, numeric):
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-9)
    return np.linalg.norm(np.asarray(analytic) - np.asarray(numeric)) / scale


class TestVarianceModels:
    def test_doubling_amplitude_quarters_ranging_variance(self):
        assert ranging_variance(2.0, 1e8) == pytest.approx(ranging_variance(1.0, 1e8) / 4)

    def test_unit_ranging_variance(self):
        bandwidth = SPEED_OF_LIGHT / (math.sqrt(8.0) * math.pi)
        assert ranging_variance(1.0, bandwidth) == pytest.approx(1.0)

    def test_ranging_variance_decreases_monotonically(self):
        values = [ranging_variance(u, 1e8) for u in (1.0, 5.0, 50.0, 5000.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_nonpositive_inputs_rejected(self):
        with pytest.raises(ValueError):
            ranging_variance(0.0, 1e8)
        with pytest.raises(ValueError):
            ranging_variance(1.0, 0.0)
        with pytest.raises(ValueError):
            angle_variance(-1.0, 1e9, 0.01)

    def test_doubling_carrier_quarters_angle_variance(self):
        assert angle_variance(1.0, 2e9, 0.01) == pytest.approx(
            angle_variance(1.0, 1e9, 0.01) / 4
        )

    def test_angle_variance_by_direct_substitution(self):
        # c / f_c = 2 pi D  =>  variance = 1/2
        d_squared = 0.01
        carrier = SPEED_OF_LIGHT / (2.0 * math.pi * math.sqrt(d_squared))
        assert angle_variance(1.0, carrier, d_squared) == pytest.approx(0.5)

    def test_zero_aperture_raises(self):
        with pytest.raises(ZeroApertureError):
            angle_variance(1.0, 1e9, 1e-20)

    def test_ula_aperture_zero_at_endfire(self):
        ula = UniformLinearArray(num_elements=8, element_spacing=0.05, broadside=0.0)
        assert ula.squared_aperture(math.pi / 2) == pytest.approx(0.0, abs=1e-30)
        peak = ula.squared_aperture(0.0)
        assert peak == pytest.approx(0.05**2 * 8 * 63 / 12)

    def test_isotropic_aperture_direction_independent(self):
        iso = IsotropicAperture(0.02)
        assert iso.squared_aperture(0.3) == iso.squared_aperture(-2.0) == 0.02


class TestComponentOrder:
    def test_canonical_layout(self):
        order = ComponentOrder.canonical(2)
        pairs = [c.pair for c in order]
        assert pairs == [(0, 0), (1, 1), (2, 2), (1, 2), (2, 1)]
        assert order.size == 5
        assert order.dim == 15

    def test_index_maps_partition_blocks(self):
        order = ComponentOrder.canonical(3)
        k_total = order.size
        for k in range(k_total):
            assert order.dist_index(k) == k
            assert order.aoa_index(k) == k_total + k
            assert order.aod_index(k) == 2 * k_total + k

    def test_duplicate_components_rejected(self):
        with pytest.raises(ValueError):
            ComponentOrder([PathComponent.los(), PathComponent.los()])


class TestGradients:
    def test_azimuth_gradient_axis_cases(self):
        np.testing.assert_allclose(azimuth_gradient([1.0, 0.0]), [0.0, 1.0])
        np.testing.assert_allclose(azimuth_gradient([0.0, 2.0]), [-0.5, 0.0])

    def test_azimuth_gradient_matches_finite_difference(self):
        r = np.array([3.0, 4.0])
        h = 1e-7
        numeric = np.array([
            (math.atan2(4, 3 + h) - math.atan2(4, 3 - h)) / (2 * h),
            (math.atan2(4 + h, 3) - math.atan2(4 - h, 3)) / (2 * h),
        ])
        np.testing.assert_allclose(azimuth_gradient(r), numeric, atol=1e-7)

    def test_azimuth_gradient_orthogonal_with_inverse_norm(self):
        r = np.array([-2.0, 5.0])
        g = azimuth_gradient(r)
        assert g @ r == pytest.approx(0.0, abs=1e-15)
        assert np.linalg.norm(g) == pytest.approx(1.0 / np.linalg.norm(r))

    def test_distance_gradient_unit_vector(self):
        np.testing.assert_allclose(distance_gradient([3.0, 4.0]), [0.6, 0.8])
        rng = np.random.default_rng(0)
        for _ in range(20):
            r = rng.uniform(-5, 5, size=2)
            if np.linalg.norm(r) > 0.1:
                assert np.linalg.norm(distance_gradient(r)) == pytest.approx(1.0)

    def test_distance_gradient_matches_finite_difference(self):
        r = np.array([-1.0, 2.0])
        h = 1e-7
        numeric = np.array([
            (np.linalg.norm([-1 + h, 2]) - np.linalg.norm([-1 - h, 2])) / (2 * h),
            (np.linalg.norm([-1, 2 + h]) - np.linalg.norm([-1, 2 - h])) / (2 * h),
        ])
        np.testing.assert_allclose(distance_gradient(r), numeric, atol=1e-7)

    def test_degenerate_at_origin(self):
        with pytest.raises(DegenerateGeometryError):
            azimuth_gradient([0.0, 0.0])
        with pytest.raises(DegenerateGeometryError):
            distance_gradient([1e-12, 0.0])


class TestMappingBlock:
    def test_los_block_is_zero(self):
        surfaces = SurfaceMap([[2.0, 0.0]])
        anchor = Anchor(position=[1.0, 1.0])
        np.testing.assert_allclose(
            mapping_block(anchor, PathComponent.los(), surfaces, 1), np.zeros((2, 2))
        )

    def test_single_bounce_block_with_anchor_at_origin(self):
        surfaces = SurfaceMap([[2.0, 0.0]])
        anchor = Anchor(position=[0.0, 0.0])
        np.testing.assert_allclose(
            mapping_block(anchor, PathComponent.single_bounce(1), surfaces, 1),
            -np.eye(2),
        )

    def test_uninvolved_surface_gives_zero_block(self):
        surfaces = SurfaceMap([[2.0, 0.0], [0.0, 3.0]])
        anchor = Anchor(position=[1.0, 0.5])
        np.testing.assert_allclose(
            mapping_block(anchor, PathComponent.single_bounce(1), surfaces, 2),
            np.zeros((2, 2)),
        )

    def test_blocks_match_finite_differences_of_direct_vector(self):
        """All three closed forms vs FD of the virtual-anchor-to-agent vector."""
        from mpslam_bounds.geometry import path_geometry

        rng = np.random.default_rng(29)
        for _ in range(30):
            agent, anchor, surfaces, paths = random_geometry(rng, 2)
            for path in paths:
                for s in path.bounces:
                    block = mapping_block(anchor, path, surfaces, s)
                    numeric = np.zeros((2, 2))
                    for axis in range(2):
                        h = 1e-6 * max(1.0, abs(surfaces.point(s)[axis]))
                        for sign in (1.0, -1.0):
                            pts = surfaces.points.copy()
                            pts[s - 1, axis] += sign * h
                            geom = path_geometry(agent, anchor, path, SurfaceMap(pts))
                            numeric[axis, :] += sign * geom.va_to_agent / (2 * h)
                    assert rel_err(block, numeric) < 1e-6

    def test_departure_blocks_match_finite_differences_of_mirrored_vector(self):
        from mpslam_bounds.geometry import path_geometry

        rng = np.random.default_rng(31)
        for _ in range(30):
            agent, anchor, surfaces, paths = random_geometry(rng, 2)
            for path in paths:
                for s in path.bounces:
                    block = departure_mapping_block(agent, path, surfaces, s)
                    numeric = np.zeros((2, 2))
                    for axis in range(2):
                        h = 1e-6 * max(1.0, abs(surfaces.point(s)[axis]))
                        for sign in (1.0, -1.0):
                            pts = surfaces.points.copy()
                            pts[s - 1, axis] += sign * h
                            geom = path_geometry(agent, anchor, path, SurfaceMap(pts))
                            numeric[axis, :] += sign * geom.anchor_to_mirrored / (2 * h)
                    assert rel_err(block, numeric) < 1e-6


class TestPositioningSubmatrices:
    def test_los_distance_column_is_unit_direction(self):
        anchor = Anchor(position=[0.0, 0.0], orientation=0.0)
        agent = AgentPose(position=[3.0, 4.0], velocity=[0, 0], orientation=0.0)
        surfaces = SurfaceMap([[20.0, 0.0]])
        dist_col, aoa_col, aod_col = positioning_submatrices(
            agent, anchor, PathComponent.los(), surfaces
        )
        np.testing.assert_allclose(dist_col, [0.6, 0.8], atol=1e-12)
        assert np.linalg.norm(aoa_col) == pytest.approx(1.0 / 5.0)

    def test_columns_match_finite_differences(self):
        rng = np.random.default_rng(41)
        for _ in range(25):
            agent, anchor, surfaces, paths = random_geometry(rng, 2)
            for path in paths:
                dist_col, aoa_col, aod_col = positioning_submatrices(
                    agent, anchor, path, surfaces
                )
                for coord in (0, 1):
                    fd = fd_channel_gradient(agent, anchor, path, surfaces, coord)
                    assert abs(dist_col[coord] - fd[0]) < 1e-6 * max(1, abs(fd[0]))
                    assert abs(aoa_col[coord] - fd[1]) < 1e-6 * max(1, abs(fd[1]))
                    assert abs(aod_col[coord] - fd[2]) < 1e-6 * max(1, abs(fd[2]))


class TestOrientationEntry:
    def test_equals_minus_one_for_all_component_kinds(self):
        rng = np.random.default_rng(43)
        for _ in range(25):
            agent, anchor, surfaces, paths = random_geometry(rng, 3)
            for path in paths:
                assert abs(orientation_entry(agent, anchor, path, surfaces) + 1.0) < 1e-12


class TestMappingSubmatrices:
    def test_los_columns_are_zero(self):
        anchor = Anchor(position=[1.0, 0.0], orientation=0.1)
        agent = AgentPose(position=[3.0, 4.0], velocity=[0, 0], orientation=0.2)
        surfaces = SurfaceMap([[2.0, 0.0]])
        cols = mapping_submatrices(agent, anchor, PathComponent.los(), surfaces, 1)
        for col in cols:
            np.testing.assert_allclose(col, np.zeros(2))

    def test_single_bounce_distance_column_with_anchor_at_origin(self):
        # mapping block is -I there, so the column is minus the positioning one
        anchor = Anchor(position=[0.0, 0.0], orientation=0.15)
        agent = AgentPose(position=[0.5, 2.0], velocity=[0, 0], orientation=-0.4)
        surfaces = SurfaceMap([[2.0, 0.0]])
        path = PathComponent.single_bounce(1)
        pos_cols = positioning_submatrices(agent, anchor, path, surfaces)
        map_cols = mapping_submatrices(agent, anchor, path, surfaces, 1)
        np.testing.assert_allclose(map_cols[0], -pos_cols[0], atol=1e-12)

    def test_columns_match_finite_differences(self):
        rng = np.random.default_rng(47)
        for _ in range(25):
            agent, anchor, surfaces, paths = random_geometry(rng, 2)
            for path in paths:
                for s in path.bounces:
                    cols = mapping_submatrices(agent, anchor, path, surfaces, s)
                    for axis in (0, 1):
                        coord = 3 + 2 * (s - 1) + axis
                        fd = fd_channel_gradient(agent, anchor, path, surfaces, coord)
                        for i, col in enumerate(cols):
                            assert abs(col[axis] - fd[i]) < 1e-6 * max(1, abs(fd[i]))


class TestChannelFim:
    def _order2(self):
        return ComponentOrder([PathComponent.los(), PathComponent.single_bounce(1)])

    def test_existence_zeroing(self):
        order = self._order2()
        params = [None, None]
        params[0] = channel_params(
            AgentPose(position=[3, 4], velocity=[0, 0]), Anchor(position=[0, 0]),
            PathComponent.los(), SurfaceMap([[2.0, 0.0]]),
        )
        bandwidth = SPEED_OF_LIGHT / (math.sqrt(8.0) * math.pi) / 0.1  # var 0.01 at u=1
        diag = channel_fim(
            order, params, np.array([1.0, 1.0]), np.array([1, 0]),
            carrier_freq=1e9, rms_bandwidth=bandwidth,
            rx_aperture=IsotropicAperture(0.01), tx_aperture=IsotropicAperture(0.01),
        )
        assert diag[order.dist_index(0)] == pytest.approx(100.0)
        assert diag[order.dist_index(1)] == 0.0
        assert diag[order.aoa_index(1)] == 0.0
        assert diag[order.aod_index(1)] == 0.0

    def test_all_absent_gives_zero_matrix(self):
        order = self._order2()
        diag = channel_fim(
            order, [None, None], np.ones(2), np.zeros(2, dtype=int),
            carrier_freq=1e9, rms_bandwidth=1e8,
            rx_aperture=IsotropicAperture(0.01), tx_aperture=IsotropicAperture(0.01),
        )
        np.testing.assert_allclose(diag, np.zeros(6))

    def test_endfire_error_propagates_only_for_existing_components(self):
        order = self._order2()
        surfaces = SurfaceMap([[2.0, 0.0]])
        anchor = Anchor(position=[0, 0])
        agent = AgentPose(position=[3, 4], velocity=[0, 0])
        params = [channel_params(agent, anchor, c, surfaces) for c in order]
        # transmit array endfire-aligned with the LOS departure azimuth
        endfire = UniformLinearArray(num_elements=4, element_spacing=0.05,
                                     broadside=params[0].aod + math.pi / 2)
        kwargs = dict(carrier_freq=1e9, rms_bandwidth=1e8,
                      rx_aperture=IsotropicAperture(0.01), tx_aperture=endfire)
        with pytest.raises(ZeroApertureError):
            channel_fim(order, params, np.ones(2), np.ones(2, dtype=int), **kwargs)
        # absent components never touch the variance models
        diag = channel_fim(order, params, np.ones(2), np.array([0, 1]), **kwargs)
        assert diag[order.dist_index(0)] == 0.0
        assert diag[order.dist_index(1)] > 0.0

    def test_amplitude_scaling_is_quadratic(self):
        order = self._order2()
        surfaces = SurfaceMap([[2.0, 0.0]])
        anchor = Anchor(position=[0, 0])
        agent = AgentPose(position=[3, 4], velocity=[0, 0])
        params = [channel_params(agent, anchor, c, surfaces) for c in order]
        kwargs = dict(carrier_freq=1e9, rms_bandwidth=1e8,
                      rx_aperture=IsotropicAperture(0.01),
                      tx_aperture=IsotropicAperture(0.01))
        base = channel_fim(order, params, np.array([1.0, 2.0]), np.ones(2, dtype=int),
                           **kwargs)
        scaled = channel_fim(order, params, 3.0 * np.array([1.0, 2.0]),
                             np.ones(2, dtype=int), **kwargs)
        np.testing.assert_allclose(scaled, 9.0 * base, rtol=1e-12)


class TestGlobalJacobian:
    def _instance(self, seed=53, num_surfaces=2):
        rng = np.random.default_rng(seed)
        agent, anchor, surfaces, _ = random_geometry(rng, num_surfaces)
        return agent, anchor, surfaces, ComponentOrder.canonical(num_surfaces)

    def test_velocity_rows_are_zero(self):
        agent, anchor, surfaces, order = self._instance()
        jac = global_jacobian(agent, anchor, order, surfaces)
        np.testing.assert_allclose(jac[2:4, :], 0.0)

    def test_orientation_row_structure(self):
        agent, anchor, surfaces, order = self._instance()
        jac = global_jacobian(agent, anchor, order, surfaces)
        k_total = order.size
        np.testing.assert_allclose(jac[4, :k_total], 0.0)
        np.testing.assert_allclose(jac[4, 2 * k_total:], 0.0)
        np.testing.assert_allclose(jac[4, k_total:2 * k_total], -1.0, atol=1e-12)

    def test_los_only_leaves_surface_rows_zero(self):
        agent, anchor, surfaces, _ = self._instance(num_surfaces=1)
        order = ComponentOrder([PathComponent.los()])
        jac = global_jacobian(agent, anchor, order, surfaces)
        np.testing.assert_allclose(jac[5:, :], 0.0)

    def test_absent_components_get_zero_columns(self):
        agent, anchor, surfaces, order = self._instance()
        exist = np.ones(order.size, dtype=int)
        exist[1] = 0
        jac = global_jacobian(agent, anchor, order, surfaces, exist)
        for idx in (order.dist_index(1), order.aoa_index(1), order.aod_index(1)):
            np.testing.assert_allclose(jac[:, idx], 0.0)


class TestSnapshotFim:
    def _terms(self, seed=59, num_surfaces=2, n_anchors=2):
        rng = np.random.default_rng(seed)
        agent, anchor, surfaces, _ = random_geometry(rng, num_surfaces)
        order = ComponentOrder.canonical(num_surfaces)
        anchors = [anchor]
        while len(anchors) < n_anchors:
            cand = Anchor(position=rng.uniform(-6, 6, size=2),
                          orientation=rng.uniform(-np.pi, np.pi))
            try:
                params = [channel_params(agent, cand, c, surfaces) for c in order]
            except DegenerateGeometryError:
                continue
            if min(p.distance for p in params) > 0.5:
                anchors.append(cand)
        aperture = IsotropicAperture(0.01)
        terms = []
        for a in anchors:
            params = [channel_params(agent, a, c, surfaces) for c in order]
            amps = np.array([2.0 / p.distance for p in params])
            exist = np.ones(order.size, dtype=int)
            jac = global_jacobian(agent, a, order, surfaces, exist)
            lam = channel_fim(order, params, amps, exist, 6e9, 1e8, aperture, aperture)
            terms.append((jac, lam))
        return terms

    def test_two_identical_anchors_double_the_information(self):
        terms = self._terms(n_anchors=1)
        single = global_snapshot_fim(terms)
        double = global_snapshot_fim(terms + terms)
        np.testing.assert_allclose(double, 2.0 * single, rtol=1e-12)

    def test_all_absent_gives_zero(self):
        terms = self._terms(n_anchors=1)
        jac, lam = terms[0]
        zero = global_snapshot_fim([(np.zeros_like(jac), np.zeros_like(lam))])
        np.testing.assert_allclose(zero, 0.0)

    def test_psd_and_anchor_increment_psd(self):
        terms = self._terms(n_anchors=2)
        one = global_snapshot_fim(terms[:1])
        both = global_snapshot_fim(terms)
        for matrix in (one, both, both - one):
            eigs = np.linalg.eigvalsh(matrix)
            assert eigs[0] >= -1e-10 * max(matrix.trace(), 1.0)

    def test_enabling_a_component_adds_psd_information(self):
        rng = np.random.default_rng(61)
        agent, anchor, surfaces, _ = random_geometry(rng, 2)
        order = ComponentOrder.canonical(2)
        aperture = IsotropicAperture(0.01)
        params = [channel_params(agent, anchor, c, surfaces) for c in order]
        amps = np.array([2.0 / p.distance for p in params])
        exist_off = np.ones(order.size, dtype=int)
        exist_off[2] = 0
        exist_on = np.ones(order.size, dtype=int)
        terms = []
        for exist in (exist_off, exist_on):
            jac = global_jacobian(agent, anchor, order, surfaces, exist)
            lam = channel_fim(order, params, amps, exist, 6e9, 1e8, aperture, aperture)
            terms.append(global_snapshot_fim([(jac, lam)]))
        diff = terms[1] - terms[0]
        assert np.linalg.eigvalsh(diff)[0] >= -1e-10 * max(diff.trace(), 1.0)

    def test_dense_channel_information_accepted(self):
        terms = self._terms(n_anchors=1)
        jac, lam = terms[0]
        dense = np.diag(lam)
        out_diag = global_snapshot_fim([(jac, lam)])
        out_dense = global_snapshot_fim([(jac, dense)])
        np.testing.assert_allclose(out_diag, out_dense, rtol=1e-12)
        # a correlated PSD channel matrix also works and stays PSD overall
        rng = np.random.default_rng(67)
        noise = rng.normal(size=dense.shape) * np.sqrt(np.outer(lam, lam)) * 0.01
        corr = dense + 0.5 * (noise + noise.T)
        corr += np.eye(dense.shape[0]) * 1e-6 * max(lam.max(), 1.0)
        eigs = np.linalg.eigvalsh(corr)
        if eigs[0] > 0:
            out_corr = global_snapshot_fim([(jac, corr)])
            assert np.linalg.eigvalsh(out_corr)[0] >= -1e-10 * max(out_corr.trace(), 1.0)

    def test_dimension_mismatch_rejected(self):
        terms = self._terms(n_anchors=1)
        jac, lam = terms[0]
        with pytest.raises(ValueError):
            global_snapshot_fim([(jac, lam[:-1])])
        with pytest.raises(ValueError):
            global_snapshot_fim([(jac, lam), (jac[:-1, :], lam)])
