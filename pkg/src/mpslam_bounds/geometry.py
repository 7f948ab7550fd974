"""Specular reflection geometry for multipath SLAM in the plane.

Each reflecting surface (an infinite wall line) is represented by a single
2-D point: the mirror image of the global origin about the wall. That point
encodes both the wall orientation (its direction is the wall normal) and the
wall offset (half its norm). Mirroring a point x about surface s is the
affine map

    mirror(x) = H_s x + p_s,      H_s = I - 2 p_s p_s^T / ||p_s||^2,

with H_s the Householder reflection about the wall direction. Folding this
map over a bounce sequence produces virtual anchors (anchor mirrored towards
the agent) and mirrored agents (agent mirrored towards the anchor), from
which noise-free channel parameters (path distance, angle of arrival at the
agent, angle of departure at the anchor) follow.

Conventions
-----------
* Surfaces are indexed 1..S. A surface line through the origin is not
  representable and is rejected.
* A propagation path stores its bounce surfaces transmit side first: the
  first entry is the reflection adjacent to the anchor, the last the one
  adjacent to the agent.
* Angles live in (-pi, pi].

All functions are pure; nothing here holds mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .fim import ApertureModel

# Direction vectors shorter than this are treated as degenerate geometry.
DEGENERACY_EPS = 1e-9


class DegenerateGeometryError(ValueError):
    """A direction vector collapsed (agent on top of a virtual anchor, ...)."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle (radians) into (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def rotation_matrix(angle: float) -> np.ndarray:
    """2x2 counterclockwise rotation matrix."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_matrix_derivative(angle: float) -> np.ndarray:
    """Derivative of :func:`rotation_matrix` w.r.t. the angle.

    Equals ``rotation_matrix(angle + pi/2)``.
    """
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[-s, -c], [c, -s]])


def _as_vec2(value, name: str) -> np.ndarray:
    vec = np.asarray(value, dtype=float)
    if vec.shape != (2,):
        raise ValueError(f"{name} must be a 2-vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} must be finite, got {vec}")
    return vec


def householder(surface_point: np.ndarray) -> np.ndarray:
    """Householder reflection matrix of the surface encoded by ``surface_point``.

    Symmetric, involutory, determinant -1. Raises ``ValueError`` for a
    surface through the origin (zero norm), where the reflection is
    undefined.
    """
    p = _as_vec2(surface_point, "surface point")
    sq = float(p @ p)
    if sq <= DEGENERACY_EPS**2:
        raise ValueError("surface through the origin is not representable")
    return np.eye(2) - (2.0 / sq) * np.outer(p, p)


def mirror_point(x: np.ndarray, surface_point: np.ndarray) -> np.ndarray:
    """Mirror ``x`` about the surface encoded by ``surface_point``.

    Involutory; points on the surface line are fixed; the origin maps to the
    surface point itself.
    """
    return householder(surface_point) @ np.asarray(x, dtype=float) + np.asarray(
        surface_point, dtype=float
    )


class SurfaceMap:
    """Collection of S reflecting surfaces, each stored as its origin-mirror point."""

    def __init__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"surface map must be (S, 2), got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("surface points must be finite")
        norms = np.linalg.norm(pts, axis=1)
        bad = np.nonzero(norms <= DEGENERACY_EPS)[0]
        if bad.size:
            raise ValueError(
                f"surface {bad[0] + 1} passes through the origin and is not representable"
            )
        self._points = pts
        self._houses = [householder(p) for p in pts]

    def __len__(self) -> int:
        return self._points.shape[0]

    @property
    def points(self) -> np.ndarray:
        """All surface points as an (S, 2) array (read-only view)."""
        view = self._points.view()
        view.flags.writeable = False
        return view

    def point(self, surface: int) -> np.ndarray:
        """Surface point of surface ``surface`` (1-based)."""
        self._check_index(surface)
        return self._points[surface - 1]

    def householder(self, surface: int) -> np.ndarray:
        """Cached Householder reflection of surface ``surface`` (1-based)."""
        self._check_index(surface)
        return self._houses[surface - 1]

    def mirror(self, x: np.ndarray, surface: int) -> np.ndarray:
        """Mirror ``x`` about surface ``surface`` (1-based)."""
        self._check_index(surface)
        return self._houses[surface - 1] @ np.asarray(x, dtype=float) + self._points[
            surface - 1
        ]

    def _check_index(self, surface: int) -> None:
        if not 1 <= surface <= len(self):
            raise ValueError(f"surface index {surface} outside 1..{len(self)}")


@dataclass
class Anchor:
    """Fixed transceiver with known position, orientation and array aperture."""

    position: np.ndarray
    orientation: float = 0.0
    aperture: "ApertureModel | None" = None

    def __post_init__(self):
        self.position = _as_vec2(self.position, "anchor position")
        if not math.isfinite(self.orientation):
            raise ValueError("anchor orientation must be finite")
        self.orientation = wrap_angle(float(self.orientation))


@dataclass
class AgentPose:
    """Kinematic agent state: position, velocity and heading offset."""

    position: np.ndarray
    velocity: np.ndarray
    orientation: float = 0.0

    def __post_init__(self):
        self.position = _as_vec2(self.position, "agent position")
        self.velocity = _as_vec2(self.velocity, "agent velocity")
        if not math.isfinite(self.orientation):
            raise ValueError("agent orientation must be finite")
        self.orientation = wrap_angle(float(self.orientation))

    def as_state(self) -> np.ndarray:
        """5-vector [px, py, vx, vy, orientation]."""
        return np.concatenate([self.position, self.velocity, [self.orientation]])

    @classmethod
    def from_state(cls, state: np.ndarray) -> "AgentPose":
        state = np.asarray(state, dtype=float)
        return cls(position=state[0:2], velocity=state[2:4], orientation=float(state[4]))


@dataclass(frozen=True)
class PathComponent:
    """A propagation path with its visibility flag and normalized amplitude.

    ``bounces`` lists the reflecting surfaces transmit side first:
    ``()`` is the direct line-of-sight path, ``(s,)`` a single bounce at
    surface s, ``(s, s2)`` a double bounce hitting s first (anchor side)
    and s2 second (agent side). The amplitude is the square root of the
    component SNR and must be positive whenever the component exists.
    """

    bounces: tuple[int, ...] = ()
    existence: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        if len(self.bounces) > 2:
            raise ValueError("at most two bounces are supported")
        if any(int(s) < 1 for s in self.bounces):
            raise ValueError("surface indices are 1-based")
        if len(self.bounces) == 2 and self.bounces[0] == self.bounces[1]:
            raise ValueError("double bounce requires two distinct surfaces")
        if self.existence not in (0, 1):
            raise ValueError("existence flag must be 0 or 1")
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite and >= 0")
        if self.existence == 1 and self.amplitude <= 0:
            raise ValueError("an existing component needs a positive amplitude")

    @classmethod
    def los(cls, existence: int = 1, amplitude: float = 1.0) -> "PathComponent":
        return cls((), existence, amplitude)

    @classmethod
    def single_bounce(cls, surface: int, existence: int = 1, amplitude: float = 1.0):
        return cls((int(surface),), existence, amplitude)

    @classmethod
    def double_bounce(
        cls, first: int, second: int, existence: int = 1, amplitude: float = 1.0
    ):
        return cls((int(first), int(second)), existence, amplitude)

    @property
    def is_los(self) -> bool:
        return not self.bounces

    @property
    def n_bounces(self) -> int:
        return len(self.bounces)

    @property
    def pair(self) -> tuple[int, int]:
        """(s, s') pair identity: (0, 0) for LOS, (s, s) for a single bounce."""
        if not self.bounces:
            return (0, 0)
        if len(self.bounces) == 1:
            return (self.bounces[0], self.bounces[0])
        return (self.bounces[0], self.bounces[1])

    def involves(self, surface: int) -> bool:
        return surface in self.bounces


@dataclass(frozen=True)
class ChannelParams:
    """Noise-free channel parameters of one path component."""

    distance: float  # meters, total reflected path length
    aoa: float  # radians, arrival azimuth in the agent frame
    aod: float  # radians, departure azimuth in the anchor frame

    def as_array(self) -> np.ndarray:
        return np.array([self.distance, self.aoa, self.aod])


def bounce_sequence(path: PathComponent) -> list[int]:
    """Ordered surface indices of a path, transmit side first (empty for LOS)."""
    return list(path.bounces)


def virtual_anchor(anchor: Anchor, path: PathComponent, surfaces: SurfaceMap) -> np.ndarray:
    """Mirror the anchor through the bounce sequence (LOS returns the anchor)."""
    point = anchor.position
    for s in path.bounces:
        point = surfaces.mirror(point, s)
    return point


def mirrored_agent(
    agent_position: np.ndarray, path: PathComponent, surfaces: SurfaceMap
) -> np.ndarray:
    """Mirror the agent position through the reversed bounce sequence.

    The mirrored agent sits where the anchor "sees" the agent arrive from;
    its distance to the anchor equals the distance from the virtual anchor
    to the agent exactly.
    """
    point = np.asarray(agent_position, dtype=float)
    for s in reversed(path.bounces):
        point = surfaces.mirror(point, s)
    return point


def householder_chain(path: PathComponent, surfaces: SurfaceMap) -> np.ndarray:
    """Gradient-layout sensitivity of the anchor-to-mirrored-agent vector.

    Returns the 2x2 matrix d(anchor->mirrored-agent)^T / d(agent position):
    identity for LOS, H_s for a single bounce at s, H_{s2} H_s for a double
    bounce (s, s2). The same matrix maps the virtual-anchor-to-agent vector
    onto the anchor-to-mirrored-agent vector.
    """
    chain = np.eye(2)
    for s in reversed(path.bounces):
        chain = chain @ surfaces.householder(s)
    return chain


@dataclass(frozen=True)
class PathGeometry:
    """All geometric quantities of one (agent, anchor, path) triple."""

    virtual_anchor: np.ndarray  # anchor mirrored along the bounce sequence
    mirrored_agent: np.ndarray  # agent mirrored along the reversed sequence
    va_to_agent: np.ndarray  # agent position minus virtual anchor (global frame)
    anchor_to_mirrored: np.ndarray  # mirrored agent minus anchor (global frame)
    departure_local: np.ndarray  # anchor_to_mirrored rotated into the anchor frame
    arrival_local: np.ndarray  # -va_to_agent rotated into the agent frame
    chain: np.ndarray  # householder_chain of the path
    params: ChannelParams = field(repr=False)


def path_geometry(
    agent: AgentPose, anchor: Anchor, path: PathComponent, surfaces: SurfaceMap
) -> PathGeometry:
    """Resolve the full mirror geometry and channel parameters of one path.

    Raises :class:`DegenerateGeometryError` when the agent coincides with the
    virtual anchor (or, equivalently, the mirrored agent with the anchor).
    """
    va = virtual_anchor(anchor, path, surfaces)
    vm = mirrored_agent(agent.position, path, surfaces)
    r = agent.position - va
    r_t = vm - anchor.position
    dist = float(np.linalg.norm(r))
    if dist <= DEGENERACY_EPS or np.linalg.norm(r_t) <= DEGENERACY_EPS:
        raise DegenerateGeometryError(
            f"agent coincides with virtual anchor for path {path.bounces}"
        )
    departure_local = rotation_matrix(anchor.orientation).T @ r_t
    arrival_local = -(rotation_matrix(agent.orientation).T @ r)
    params = ChannelParams(
        distance=dist,
        aoa=math.atan2(arrival_local[1], arrival_local[0]),
        aod=math.atan2(departure_local[1], departure_local[0]),
    )
    return PathGeometry(
        virtual_anchor=va,
        mirrored_agent=vm,
        va_to_agent=r,
        anchor_to_mirrored=r_t,
        departure_local=departure_local,
        arrival_local=arrival_local,
        chain=householder_chain(path, surfaces),
        params=params,
    )


def channel_params(
    agent: AgentPose, anchor: Anchor, path: PathComponent, surfaces: SurfaceMap
) -> ChannelParams:
    """Noise-free distance, arrival and departure azimuth of one path."""
    return path_geometry(agent, anchor, path, surfaces).params
