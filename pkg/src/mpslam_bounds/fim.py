"""Fisher information assembly for the joint agent-plus-map state.

The joint state of dimension N = 5 + 2S stacks

    [agent position (2) | agent velocity (2) | agent orientation (1) |
     surface 1 point (2) | ... | surface S point (2)]

(0-based row indices: position 0:2, velocity 2:4, orientation 4, surface s
at 5 + 2*(s-1)). Each anchor observes, per path component, a distance, an
arrival azimuth (agent frame) and a departure azimuth (anchor frame); the
noise variances follow from the component amplitude, the signal bandwidth
and carrier, and the array apertures. With K components per anchor, the
per-anchor channel parameter vector stacks the K distances, then the K
arrival azimuths, then the K departure azimuths (3K entries).

Per anchor j this module builds

* the diagonal channel information ``lambda_j`` (length 3K, entries
  existence / variance),
* the gradient matrix ``H_j`` of shape (N, 3K) whose column i is the
  gradient of channel parameter i w.r.t. the joint state,

and accumulates the snapshot information ``sum_j H_j diag(lambda_j) H_j^T``.
Velocity rows are identically zero: a single snapshot carries no velocity
information. The orientation row is nonzero only in the arrival-azimuth
block, where every entry equals -1 in the plane.

A dense (3K, 3K) positive-semidefinite channel information matrix may be
passed in place of the diagonal one; the accumulation is agnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (
    AgentPose,
    Anchor,
    ChannelParams,
    DegenerateGeometryError,
    PathComponent,
    PathGeometry,
    SurfaceMap,
    path_geometry,
    rotation_matrix,
    rotation_matrix_derivative,
)

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Squared apertures below this (m^2) make the angle variance blow up
# (array endfire); treat as no usable angle information.
ZERO_APERTURE_EPS = 1e-18


class ZeroApertureError(ValueError):
    """Squared array aperture vanished (endfire); angle variance undefined."""


@dataclass(frozen=True)
class IsotropicAperture:
    """Direction-independent squared array aperture (m^2)."""

    d_squared: float

    def __post_init__(self):
        if not (self.d_squared > 0 and math.isfinite(self.d_squared)):
            raise ValueError("squared aperture must be positive and finite")

    def squared_aperture(self, azimuth: float) -> float:
        return self.d_squared


@dataclass(frozen=True)
class UniformLinearArray:
    """Uniform linear array with centered element coordinates.

    The squared aperture seen from azimuth psi is
    ``spacing^2 cos^2(psi - broadside) * M (M^2 - 1) / 12``; it vanishes at
    endfire, where angle measurements carry no information.
    """

    num_elements: int
    element_spacing: float
    broadside: float = 0.0

    def __post_init__(self):
        if self.num_elements < 2:
            raise ValueError("a linear array needs at least 2 elements")
        if not (self.element_spacing > 0 and math.isfinite(self.element_spacing)):
            raise ValueError("element spacing must be positive and finite")

    def squared_aperture(self, azimuth: float) -> float:
        m = self.num_elements
        gain = m * (m * m - 1) / 12.0
        return (self.element_spacing * math.cos(azimuth - self.broadside)) ** 2 * gain


ApertureModel = IsotropicAperture | UniformLinearArray


def ranging_variance(amplitude: float, rms_bandwidth: float) -> float:
    """Distance measurement variance (m^2) at a given normalized amplitude.

    c^2 / (8 pi^2 beta^2 u^2) with beta the root-mean-square signal
    bandwidth in Hz and u the amplitude (square root of component SNR).
    """
    if not amplitude > 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    if not rms_bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {rms_bandwidth}")
    return SPEED_OF_LIGHT**2 / (8.0 * math.pi**2 * rms_bandwidth**2 * amplitude**2)


def angle_variance(amplitude: float, carrier_freq: float, squared_aperture: float) -> float:
    """Azimuth measurement variance (rad^2); same form for arrival and departure.

    c^2 / (8 pi^2 f_c^2 u^2 D^2) with D^2 the squared array aperture (m^2)
    evaluated at the relevant azimuth. Raises :class:`ZeroApertureError`
    near endfire (D^2 < 1e-18 m^2); callers must mark such components
    nonexistent or use an isotropic aperture.
    """
    if not amplitude > 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    if not carrier_freq > 0:
        raise ValueError(f"carrier frequency must be positive, got {carrier_freq}")
    if squared_aperture < ZERO_APERTURE_EPS:
        raise ZeroApertureError(
            f"squared aperture {squared_aperture} below {ZERO_APERTURE_EPS} m^2"
        )
    return SPEED_OF_LIGHT**2 / (
        8.0 * math.pi**2 * carrier_freq**2 * amplitude**2 * squared_aperture
    )


def measurement_variances(
    params: ChannelParams,
    amplitude: float,
    carrier_freq: float,
    rms_bandwidth: float,
    rx_aperture: ApertureModel,
    tx_aperture: ApertureModel,
) -> tuple[float, float, float]:
    """(distance, arrival-azimuth, departure-azimuth) variances of one component.

    The receive (agent) aperture is evaluated at the arrival azimuth, the
    transmit (anchor) aperture at the departure azimuth. This is the single
    source of truth shared by the bound, the measurement generator and the
    estimator.
    """
    var_d = ranging_variance(amplitude, rms_bandwidth)
    var_aoa = angle_variance(
        amplitude, carrier_freq, rx_aperture.squared_aperture(params.aoa)
    )
    var_aod = angle_variance(
        amplitude, carrier_freq, tx_aperture.squared_aperture(params.aod)
    )
    return var_d, var_aoa, var_aod


class ComponentOrder:
    """Canonical ordering of the path components observed by one anchor.

    Fixes the component set and the index maps into the stacked channel
    parameter vector: component k occupies entries k (distance), K + k
    (arrival azimuth) and 2K + k (departure azimuth). The canonical order is
    LOS first, then single bounces by ascending surface, then double bounces
    lexicographically by (first, second) surface.
    """

    def __init__(self, components: Sequence[PathComponent]):
        comps = tuple(
            c if isinstance(c, PathComponent) else PathComponent(tuple(c))
            for c in components
        )
        if not comps:
            raise ValueError("component order must not be empty")
        pairs = [c.pair for c in comps]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate path components in order")
        self._components = comps
        self._index = {c.bounces: k for k, c in enumerate(comps)}

    @classmethod
    def canonical(cls, num_surfaces: int) -> "ComponentOrder":
        """Full component set for S surfaces: LOS, S single, S(S-1) double bounces."""
        comps = [PathComponent.los()]
        comps += [PathComponent.single_bounce(s) for s in range(1, num_surfaces + 1)]
        comps += [
            PathComponent.double_bounce(s, s2)
            for s in range(1, num_surfaces + 1)
            for s2 in range(1, num_surfaces + 1)
            if s != s2
        ]
        return cls(comps)

    @property
    def components(self) -> tuple[PathComponent, ...]:
        return self._components

    @property
    def size(self) -> int:
        """Number of components K."""
        return len(self._components)

    @property
    def dim(self) -> int:
        """Stacked channel parameter dimension 3K."""
        return 3 * len(self._components)

    def index_of(self, path: PathComponent) -> int:
        return self._index[path.bounces]

    def dist_index(self, k: int) -> int:
        return k

    def aoa_index(self, k: int) -> int:
        return self.size + k

    def aod_index(self, k: int) -> int:
        return 2 * self.size + k

    def __iter__(self):
        return iter(self._components)

    def __len__(self) -> int:
        return len(self._components)


def azimuth_gradient(r: np.ndarray) -> np.ndarray:
    """Gradient of atan2(r_y, r_x) w.r.t. r: (-r_y, r_x) / ||r||^2.

    Orthogonal to r with norm 1/||r||; degenerate at the origin.
    """
    r = np.asarray(r, dtype=float)
    sq = float(r @ r)
    if sq <= 1e-18:
        raise DegenerateGeometryError("azimuth gradient undefined at the origin")
    return np.array([-r[1], r[0]]) / sq


def distance_gradient(r: np.ndarray) -> np.ndarray:
    """Gradient of ||r|| w.r.t. r: the unit vector along r."""
    r = np.asarray(r, dtype=float)
    norm = float(np.linalg.norm(r))
    if norm <= 1e-9:
        raise DegenerateGeometryError("distance gradient undefined at the origin")
    return r / norm


def _reflection_source_block(source: np.ndarray, surface_point: np.ndarray) -> np.ndarray:
    """Sensitivity of the mirrored-source-to-agent vector to the surface point.

    Gradient-layout 2x2 block for a single reflection of ``source``:
    2 a p^T / ||p||^2 + 2 (a . p / ||p||^2) H - I with a the source position
    and p the surface point.
    """
    p = np.asarray(surface_point, dtype=float)
    sq = float(p @ p)
    if sq <= 1e-18:
        raise ValueError("surface through the origin is not representable")
    house = np.eye(2) - (2.0 / sq) * np.outer(p, p)
    return (
        (2.0 / sq) * np.outer(source, p)
        + (2.0 * float(source @ p) / sq) * house
        - np.eye(2)
    )


def mapping_block(
    anchor: Anchor, path: PathComponent, surfaces: SurfaceMap, target_surface: int
) -> np.ndarray:
    """Sensitivity of the virtual-anchor-to-agent vector to one surface point.

    Gradient-layout 2x2 block d(vector)^T / d(surface point). Zero when the
    surface does not participate in the path (always for LOS). For a double
    bounce the block w.r.t. the anchor-side surface right-multiplies the
    single-bounce block by the other surface's Householder matrix; the block
    w.r.t. the agent-side surface reuses the single-bounce form with the
    anchor replaced by its single-bounce virtual anchor.
    """
    if not path.involves(target_surface):
        return np.zeros((2, 2))
    if path.n_bounces == 1:
        return _reflection_source_block(anchor.position, surfaces.point(target_surface))
    first, second = path.bounces
    if target_surface == first:
        sb = _reflection_source_block(anchor.position, surfaces.point(first))
        return sb @ surfaces.householder(second)
    va_first = surfaces.mirror(anchor.position, first)
    return _reflection_source_block(va_first, surfaces.point(second))


def departure_mapping_block(
    agent: AgentPose, path: PathComponent, surfaces: SurfaceMap, target_surface: int
) -> np.ndarray:
    """Sensitivity of the anchor-to-mirrored-agent vector to one surface point.

    Gradient-layout 2x2 block d(vector)^T / d(surface point). Same closed
    forms as :func:`mapping_block` with the anchor and agent roles swapped
    (the mirrored agent folds the reversed bounce sequence) and the overall
    sign flipped (the mirrored agent enters the vector with a plus). Moving a
    surface moves the mirrored agent both through the path endpoints and by
    rotating the mirror itself, so this block differs from pushing
    :func:`mapping_block` through the reflection chain.
    """
    if not path.involves(target_surface):
        return np.zeros((2, 2))
    if path.n_bounces == 1:
        return -_reflection_source_block(agent.position, surfaces.point(target_surface))
    first, second = path.bounces
    if target_surface == second:
        sb = _reflection_source_block(agent.position, surfaces.point(second))
        return -sb @ surfaces.householder(first)
    vm_second = surfaces.mirror(agent.position, second)
    return -_reflection_source_block(vm_second, surfaces.point(first))


def positioning_submatrices(
    agent: AgentPose,
    anchor: Anchor,
    path: PathComponent,
    surfaces: SurfaceMap,
    geom: PathGeometry | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of (distance, arrival az., departure az.) w.r.t. agent position.

    Distance and departure flow through the mirrored-agent chain and the
    anchor rotation; arrival flows directly through the agent rotation.
    """
    if geom is None:
        geom = path_geometry(agent, anchor, path, surfaces)
    rot_anchor = rotation_matrix(anchor.orientation)
    rot_agent = rotation_matrix(agent.orientation)
    transfer = geom.chain @ rot_anchor
    dist_col = transfer @ distance_gradient(geom.departure_local)
    aod_col = transfer @ azimuth_gradient(geom.departure_local)
    aoa_col = -(rot_agent @ azimuth_gradient(geom.arrival_local))
    return dist_col, aoa_col, aod_col


def orientation_entry(
    agent: AgentPose,
    anchor: Anchor,
    path: PathComponent,
    surfaces: SurfaceMap,
    geom: PathGeometry | None = None,
) -> float:
    """Gradient of the arrival azimuth w.r.t. the agent orientation.

    Closed form: (-r^T Rdot(orientation)) . azimuth_gradient(arrival_local)
    with r the virtual-anchor-to-agent vector. Identically -1 in the plane
    for every component kind.
    """
    if geom is None:
        geom = path_geometry(agent, anchor, path, surfaces)
    frame_sensitivity = -(geom.va_to_agent @ rotation_matrix_derivative(agent.orientation))
    return float(frame_sensitivity @ azimuth_gradient(geom.arrival_local))


def mapping_submatrices(
    agent: AgentPose,
    anchor: Anchor,
    path: PathComponent,
    surfaces: SurfaceMap,
    target_surface: int,
    geom: PathGeometry | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of (distance, arrival az., departure az.) w.r.t. one surface point.

    Distance and arrival azimuth depend on the surface only through the
    virtual-anchor-to-agent vector, so their columns push the corresponding
    gradient through :func:`mapping_block`. The departure azimuth lives on
    the anchor-to-mirrored-agent vector, whose own surface sensitivity
    (:func:`departure_mapping_block`) includes the rotation of the mirror.
    LOS paths yield zero columns.
    """
    if geom is None:
        geom = path_geometry(agent, anchor, path, surfaces)
    if not path.involves(target_surface):
        zero = np.zeros(2)
        return zero, zero.copy(), zero.copy()
    block = mapping_block(anchor, path, surfaces, target_surface)
    rot_anchor = rotation_matrix(anchor.orientation)
    dist_col = block @ (geom.va_to_agent / geom.params.distance)
    aoa_col = block @ (
        -(rotation_matrix(agent.orientation) @ azimuth_gradient(geom.arrival_local))
    )
    aod_col = (
        departure_mapping_block(agent, path, surfaces, target_surface)
        @ rot_anchor
        @ azimuth_gradient(geom.departure_local)
    )
    return dist_col, aoa_col, aod_col


def global_jacobian(
    agent: AgentPose,
    anchor: Anchor,
    order: ComponentOrder,
    surfaces: SurfaceMap,
    existences: np.ndarray | None = None,
    geoms: Sequence[PathGeometry | None] | None = None,
) -> np.ndarray:
    """Gradient matrix (N, 3K) of the channel parameters w.r.t. the joint state.

    Column i holds the gradient of channel parameter i. Velocity rows are
    identically zero. Components flagged nonexistent get zero columns (their
    channel information is zero anyway; zero keeps the output deterministic).
    ``geoms`` may carry already-resolved path geometries (one slot per
    component, ``None`` to resolve here).
    """
    num_surfaces = len(surfaces)
    dim_state = 5 + 2 * num_surfaces
    k_total = order.size
    jac = np.zeros((dim_state, 3 * k_total))
    for k, comp in enumerate(order):
        if existences is not None and not existences[k]:
            continue
        geom = geoms[k] if geoms is not None and geoms[k] is not None else None
        if geom is None:
            geom = path_geometry(agent, anchor, comp, surfaces)
        dist_col, aoa_col, aod_col = positioning_submatrices(
            agent, anchor, comp, surfaces, geom
        )
        i_d, i_aoa, i_aod = order.dist_index(k), order.aoa_index(k), order.aod_index(k)
        jac[0:2, i_d] = dist_col
        jac[0:2, i_aoa] = aoa_col
        jac[0:2, i_aod] = aod_col
        jac[4, i_aoa] = orientation_entry(agent, anchor, comp, surfaces, geom)
        for s in comp.bounces:
            row = 5 + 2 * (s - 1)
            m_d, m_aoa, m_aod = mapping_submatrices(
                agent, anchor, comp, surfaces, s, geom
            )
            jac[row : row + 2, i_d] = m_d
            jac[row : row + 2, i_aoa] = m_aoa
            jac[row : row + 2, i_aod] = m_aod
    return jac


def channel_fim(
    order: ComponentOrder,
    params: Sequence[ChannelParams | None],
    amplitudes: np.ndarray,
    existences: np.ndarray,
    carrier_freq: float,
    rms_bandwidth: float,
    rx_aperture: ApertureModel,
    tx_aperture: ApertureModel,
) -> np.ndarray:
    """Diagonal per-anchor channel information, returned as a length-3K vector.

    Entry existence/variance per channel parameter; exactly zero where the
    existence flag is zero (parameter and amplitude values of nonexistent
    components are never touched, so placeholders are fine there).
    """
    k_total = order.size
    if len(params) != k_total or len(amplitudes) != k_total or len(existences) != k_total:
        raise ValueError("params, amplitudes and existences must all have length K")
    diag = np.zeros(3 * k_total)
    for k in range(k_total):
        if not existences[k]:
            continue
        var_d, var_aoa, var_aod = measurement_variances(
            params[k], float(amplitudes[k]), carrier_freq, rms_bandwidth,
            rx_aperture, tx_aperture,
        )
        diag[order.dist_index(k)] = 1.0 / var_d
        diag[order.aoa_index(k)] = 1.0 / var_aoa
        diag[order.aod_index(k)] = 1.0 / var_aod
    return diag


def global_snapshot_fim(
    anchor_terms: Sequence[tuple[np.ndarray, np.ndarray]],
) -> np.ndarray:
    """Accumulate the snapshot information sum_j H_j Lambda_j H_j^T.

    ``anchor_terms`` holds per anchor the (N, 3K) gradient matrix and the
    channel information, either a length-3K diagonal vector or a dense
    (3K, 3K) matrix. Anchors are summed in the given order so the floating
    point result is reproducible. Symmetric positive semidefinite.
    """
    if not anchor_terms:
        raise ValueError("at least one anchor term is required")
    dim_state = anchor_terms[0][0].shape[0]
    total = np.zeros((dim_state, dim_state))
    for jac, lam in anchor_terms:
        lam = np.asarray(lam, dtype=float)
        if jac.shape[0] != dim_state:
            raise ValueError("inconsistent state dimensions across anchors")
        if lam.ndim == 1:
            if lam.shape[0] != jac.shape[1]:
                raise ValueError("channel information length must match 3K")
            total += (jac * lam) @ jac.T
        elif lam.ndim == 2:
            if lam.shape != (jac.shape[1], jac.shape[1]):
                raise ValueError("dense channel information must be (3K, 3K)")
            total += jac @ lam @ jac.T
        else:
            raise ValueError("channel information must be a vector or a matrix")
    return 0.5 * (total + total.T)
