"""Scenario definition, loading, ground truth and synthetic measurements.

A scenario bundles anchors, the surface map, signal parameters, the
state-transition model, a ground-truth trajectory specification, an
amplitude model, a per-component visibility schedule, the initial prior and
Monte-Carlo settings. Scenario files are YAML mappings whose keys mirror
the dataclass fields below exactly; unknown keys are rejected with the
offending path so typos cannot silently change an experiment.

Measurement generation and bound evaluation share the same channel
parameter and variance code (:mod:`.geometry`, :mod:`.fim`), so estimator
and bound are model-matched by construction. Draw order is fixed: steps
ascending, anchors ascending, components in canonical order, and per
component distance, arrival azimuth, departure azimuth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .fim import (
    ApertureModel,
    ComponentOrder,
    IsotropicAperture,
    UniformLinearArray,
    channel_fim,
    global_jacobian,
    global_snapshot_fim,
    measurement_variances,
)
from .geometry import AgentPose, Anchor, SurfaceMap, path_geometry, wrap_angle
from .pcrlb import StateSpaceModel, gain_matrix
from .streams import RandomStream, trajectory_stream

DEFAULT_ORIENTATION_PRIOR_VAR = math.radians(10.0) ** 2


class ScenarioError(ValueError):
    """Scenario file failed validation; the message names the offending field."""


@dataclass(frozen=True)
class SignalModel:
    """Transmit signal parameters: carrier frequency and RMS bandwidth (Hz)."""

    carrier_freq: float
    rms_bandwidth: float

    def __post_init__(self):
        if not self.carrier_freq > 0:
            raise ValueError("carrier_freq must be positive")
        if not self.rms_bandwidth > 0:
            raise ValueError("rms_bandwidth must be positive")


@dataclass(frozen=True)
class AmplitudeModel:
    """Normalized amplitude vs distance: u = u_ref * (1 m / d) * loss^bounces."""

    reference_amplitude: float
    bounce_loss: float = 0.5

    def __post_init__(self):
        if not self.reference_amplitude > 0:
            raise ValueError("reference_amplitude must be positive")
        if not 0 < self.bounce_loss <= 1:
            raise ValueError("bounce_loss must lie in (0, 1]")

    def amplitude(self, distance: float, n_bounces: int) -> float:
        if not distance > 0:
            raise ValueError("distance must be positive")
        return self.reference_amplitude * (1.0 / distance) * self.bounce_loss**n_bounces


@dataclass(frozen=True)
class WaypointTrajectory:
    """Deterministic piecewise-linear trajectory; orientation follows the heading."""

    n_steps: int
    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        positions = np.asarray(self.positions, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("waypoints need at least two timed points")
        if positions.shape != (times.size, 2):
            raise ValueError("waypoint positions must be (M, 2)")
        if np.any(np.diff(times) <= 0):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


@dataclass(frozen=True)
class NcvTrajectory:
    """Trajectory sampled from the nearly-constant-velocity model itself."""

    n_steps: int
    initial: AgentPose

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


TrajectorySpec = WaypointTrajectory | NcvTrajectory


@dataclass(frozen=True)
class VisibilityRule:
    """One schedule override; ``None`` fields match everything.

    Anchors and steps are 1-based in rules (matching report columns);
    components are (s, s') pairs with (0, 0) the line-of-sight path.
    """

    visible: bool
    anchors: tuple[int, ...] | None = None
    components: tuple[tuple[int, int], ...] | None = None
    steps: tuple[int, ...] | None = None


class VisibilitySchedule:
    """Resolved existence flags per (anchor, step, component)."""

    def __init__(self, table: np.ndarray):
        self._table = table

    @classmethod
    def resolve(
        cls,
        default_visible: bool,
        rules: list[VisibilityRule],
        n_anchors: int,
        n_steps: int,
        order: ComponentOrder,
    ) -> "VisibilitySchedule":
        pair_to_index = {c.pair: k for k, c in enumerate(order)}
        table = np.full(
            (n_anchors, n_steps + 1, order.size), 1 if default_visible else 0, dtype=np.int8
        )
        for rule in rules:
            anchors = (
                range(n_anchors)
                if rule.anchors is None
                else [a - 1 for a in rule.anchors]
            )
            steps = range(1, n_steps + 1) if rule.steps is None else rule.steps
            if rule.components is None:
                comp_idx = range(order.size)
            else:
                comp_idx = []
                for pair in rule.components:
                    if pair not in pair_to_index:
                        raise ScenarioError(f"visibility rule names unknown component {pair}")
                    comp_idx.append(pair_to_index[pair])
            for j in anchors:
                if not 0 <= j < n_anchors:
                    raise ScenarioError(f"visibility rule anchor {j + 1} out of range")
                for n in steps:
                    if not 1 <= n <= n_steps:
                        raise ScenarioError(f"visibility rule step {n} outside 1..{n_steps}")
                    for k in comp_idx:
                        table[j, n, k] = 1 if rule.visible else 0
        return cls(table)

    def flags(self, anchor_index: int, step: int) -> np.ndarray:
        """Existence flags of anchor ``anchor_index`` (0-based) at ``step`` (1-based)."""
        return self._table[anchor_index, step]


@dataclass(frozen=True)
class MonteCarloConfig:
    runs: int
    seed: int

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("mc.runs must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("mc.seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class PriorSpec:
    """Diagonal initial covariance of the joint state.

    ``surface_var`` is either one variance shared by all surfaces or a
    per-surface tuple (walls may be known with different certainty).
    """

    position_var: float = 1.0
    velocity_var: float = 1.0
    orientation_var: float = DEFAULT_ORIENTATION_PRIOR_VAR
    surface_var: float | tuple[float, ...] = 100.0

    def __post_init__(self):
        for name in ("position_var", "velocity_var", "orientation_var"):
            if not getattr(self, name) > 0:
                raise ValueError(f"prior.{name} must be positive")
        values = (
            self.surface_var
            if isinstance(self.surface_var, tuple)
            else (self.surface_var,)
        )
        if not values or any(not v > 0 for v in values):
            raise ValueError("prior.surface_var entries must be positive")

    def surface_vars(self, num_surfaces: int) -> tuple[float, ...]:
        if isinstance(self.surface_var, tuple):
            if len(self.surface_var) != num_surfaces:
                raise ValueError(
                    f"prior.surface_var lists {len(self.surface_var)} surfaces, "
                    f"scenario has {num_surfaces}"
                )
            return self.surface_var
        return (self.surface_var,) * num_surfaces


@dataclass(frozen=True)
class Measurement:
    """One noisy component observation (angles wrapped to (-pi, pi])."""

    distance: float
    aoa: float
    aod: float
    amplitude: float
    component: int  # index into the scenario's component order
    anchor: int  # 0-based anchor index
    step: int  # 1-based time index


@dataclass
class Scenario:
    anchors: list[Anchor]
    surfaces: SurfaceMap
    signal: SignalModel
    model: StateSpaceModel
    trajectory: TrajectorySpec
    amplitude_model: AmplitudeModel
    visibility: VisibilitySchedule
    prior: PriorSpec
    mc: MonteCarloConfig
    agent_aperture: ApertureModel
    order: ComponentOrder = field(init=False)

    def __post_init__(self):
        if not self.anchors:
            raise ValueError("scenario needs at least one anchor")
        if self.model.num_surfaces != len(self.surfaces):
            raise ValueError("model surface count does not match the surface map")
        for j, anchor in enumerate(self.anchors):
            if anchor.aperture is None:
                raise ValueError(f"anchor {j + 1} has no aperture model")
        self.order = ComponentOrder.canonical(len(self.surfaces))

    @property
    def n_steps(self) -> int:
        return self.trajectory.n_steps

    @property
    def dim(self) -> int:
        return self.model.dim

    def prior_covariance(self) -> np.ndarray:
        """Diagonal of the initial joint-state covariance."""
        diag = [self.prior.position_var] * 2 + [self.prior.velocity_var] * 2
        diag += [self.prior.orientation_var]
        for var in self.prior.surface_vars(len(self.surfaces)):
            diag += [var, var]
        return np.array(diag)


# ---------------------------------------------------------------------------
# Ground truth


def generate_trajectory(
    spec: TrajectorySpec, model: StateSpaceModel, rng: RandomStream | None = None
) -> list[AgentPose]:
    """Ground-truth poses at steps 0..n_steps (step n at time n * time_step).

    Waypoint trajectories are deterministic and never touch ``rng``; sampled
    trajectories draw two acceleration variates and one orientation variate
    per step from it.
    """
    if isinstance(spec, WaypointTrajectory):
        return _waypoint_poses(spec, model.time_step)
    if isinstance(spec, NcvTrajectory):
        if rng is None:
            raise ValueError("a sampled trajectory needs a random stream")
        return _sampled_poses(spec, model, rng)
    raise TypeError(f"unknown trajectory spec {type(spec)!r}")


def _waypoint_poses(spec: WaypointTrajectory, time_step: float) -> list[AgentPose]:
    horizon = spec.n_steps * time_step
    if spec.times[0] > 1e-12:
        raise ValueError("first waypoint must be at time <= 0")
    if spec.times[-1] < horizon - 1e-9:
        raise ValueError(
            f"waypoints end at {spec.times[-1]} s but the trajectory needs {horizon} s"
        )
    poses = []
    heading = 0.0
    for n in range(spec.n_steps + 1):
        t = n * time_step
        seg = int(np.searchsorted(spec.times, t, side="right")) - 1
        seg = min(max(seg, 0), spec.times.size - 2)
        dt = spec.times[seg + 1] - spec.times[seg]
        velocity = (spec.positions[seg + 1] - spec.positions[seg]) / dt
        alpha = (t - spec.times[seg]) / dt
        position = spec.positions[seg] + alpha * (spec.positions[seg + 1] - spec.positions[seg])
        if np.linalg.norm(velocity) > 1e-12:
            heading = math.atan2(velocity[1], velocity[0])
        poses.append(AgentPose(position=position, velocity=velocity, orientation=heading))
    return poses


def _sampled_poses(
    spec: NcvTrajectory, model: StateSpaceModel, rng: RandomStream
) -> list[AgentPose]:
    t = model.time_step
    gain = gain_matrix(t)
    accel_std = math.sqrt(model.accel_noise_var)
    orient_std = math.sqrt(model.orient_noise_var)
    poses = [spec.initial]
    kin = np.concatenate([spec.initial.position, spec.initial.velocity])
    heading = spec.initial.orientation
    for _ in range(spec.n_steps):
        kin = np.array([kin[0] + t * kin[2], kin[1] + t * kin[3], kin[2], kin[3]])
        kin = kin + gain @ (accel_std * rng.standard_normal(2))
        heading = wrap_angle(heading + orient_std * rng.standard_normal())
        poses.append(AgentPose(position=kin[0:2], velocity=kin[2:4], orientation=heading))
    return poses


def ground_truth(scenario: Scenario) -> list[AgentPose]:
    """Ground-truth poses of a scenario; the trajectory stream is only
    created for sampled trajectories, so bound-only evaluation of waypoint
    scenarios never constructs a random generator."""
    if isinstance(scenario.trajectory, NcvTrajectory):
        rng = trajectory_stream(scenario.mc.seed)
    else:
        rng = None
    return generate_trajectory(scenario.trajectory, scenario.model, rng)


# ---------------------------------------------------------------------------
# Snapshot information and measurements


def snapshot_fim(scenario: Scenario, pose: AgentPose, step: int) -> np.ndarray:
    """Snapshot information at one ground-truth pose under the schedule at ``step``."""
    terms = []
    for j, anchor in enumerate(scenario.anchors):
        exist = scenario.visibility.flags(j, step)
        params = [None] * scenario.order.size
        amps = np.ones(scenario.order.size)
        for k, comp in enumerate(scenario.order):
            if not exist[k]:
                continue
            geom = path_geometry(pose, anchor, comp, scenario.surfaces)
            params[k] = geom.params
            amps[k] = scenario.amplitude_model.amplitude(
                geom.params.distance, comp.n_bounces
            )
        jac = global_jacobian(pose, anchor, scenario.order, scenario.surfaces, exist)
        lam = channel_fim(
            scenario.order,
            params,
            amps,
            exist,
            scenario.signal.carrier_freq,
            scenario.signal.rms_bandwidth,
            scenario.agent_aperture,
            anchor.aperture,
        )
        terms.append((jac, lam))
    return global_snapshot_fim(terms)


@dataclass(frozen=True)
class ComponentTruth:
    """Noise-free observation of one visible component (generator input)."""

    step: int
    anchor: int
    component: int
    distance: float
    aoa: float
    aod: float
    amplitude: float
    stds: tuple[float, float, float]


def measurement_truth(scenario: Scenario, truth: list[AgentPose]) -> list[ComponentTruth]:
    """Noise-free means and noise levels of every visible component observation."""
    rows: list[ComponentTruth] = []
    for n in range(1, scenario.n_steps + 1):
        pose = truth[n]
        for j, anchor in enumerate(scenario.anchors):
            exist = scenario.visibility.flags(j, n)
            for k, comp in enumerate(scenario.order):
                if not exist[k]:
                    continue
                geom = path_geometry(pose, anchor, comp, scenario.surfaces)
                amp = scenario.amplitude_model.amplitude(
                    geom.params.distance, comp.n_bounces
                )
                var_d, var_aoa, var_aod = measurement_variances(
                    geom.params,
                    amp,
                    scenario.signal.carrier_freq,
                    scenario.signal.rms_bandwidth,
                    scenario.agent_aperture,
                    anchor.aperture,
                )
                rows.append(
                    ComponentTruth(
                        step=n,
                        anchor=j,
                        component=k,
                        distance=geom.params.distance,
                        aoa=geom.params.aoa,
                        aod=geom.params.aod,
                        amplitude=amp,
                        stds=(math.sqrt(var_d), math.sqrt(var_aoa), math.sqrt(var_aod)),
                    )
                )
    return rows


def draw_measurements(
    table: list[ComponentTruth], rng: RandomStream
) -> list[Measurement]:
    """Draw noisy measurements for a precomputed truth table (fixed draw order)."""
    out: list[Measurement] = []
    for row in table:
        std_d, std_aoa, std_aod = row.stds
        out.append(
            Measurement(
                distance=rng.normal(row.distance, std_d),
                aoa=wrap_angle(rng.normal(row.aoa, std_aoa)),
                aod=wrap_angle(rng.normal(row.aod, std_aod)),
                amplitude=row.amplitude,
                component=row.component,
                anchor=row.anchor,
                step=row.step,
            )
        )
    return out


def generate_measurements(
    scenario: Scenario, truth: list[AgentPose], rng: RandomStream
) -> list[Measurement]:
    """Noisy measurements of all visible components along the ground truth.

    Distances and azimuths are Gaussian around the noise-free channel
    parameters with the amplitude-dependent variances; azimuths are wrapped.
    The reported amplitude is the true one (amplitude noise carries no state
    information here). Components with existence 0 emit nothing.
    """
    return draw_measurements(measurement_truth(scenario, truth), rng)


# ---------------------------------------------------------------------------
# Scenario file loading


def _require_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ScenarioError(f"{path}: expected a mapping, got {type(node).__name__}")
    return dict(node)


def _reject_unknown(node: dict, path: str) -> None:
    if node:
        key = sorted(str(k) for k in node)[0]
        raise ScenarioError(f"{path}.{key}: unknown key")


def _as_float(value, path: str) -> float:
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}: expected a number, got {value!r}") from None
    if not math.isfinite(result):
        raise ScenarioError(f"{path}: must be finite, got {result}")
    return result


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        try:
            if float(value) != int(float(value)):
                raise ValueError
            value = int(float(value))
        except (TypeError, ValueError):
            raise ScenarioError(f"{path}: expected an integer, got {value!r}") from None
    return int(value)


def _as_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ScenarioError(f"{path}: expected true/false, got {value!r}")
    return value


def _as_vec2(value, path: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"{path}: expected [x, y]")
    return np.array([_as_float(value[0], f"{path}[0]"), _as_float(value[1], f"{path}[1]")])


def _take(node: dict, key: str, path: str, default=None, required: bool = False):
    if key in node:
        return node.pop(key)
    if required:
        raise ScenarioError(f"{path}.{key}: missing required key")
    return default


def _parse_aperture(node, path: str) -> ApertureModel:
    node = _require_mapping(node, path)
    kind = _take(node, "kind", path, required=True)
    if kind == "isotropic":
        d_squared = _as_float(_take(node, "d_squared", path, required=True), f"{path}.d_squared")
        _reject_unknown(node, path)
        try:
            return IsotropicAperture(d_squared)
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    if kind == "ula":
        num = _as_int(_take(node, "num_elements", path, required=True), f"{path}.num_elements")
        spacing = _as_float(
            _take(node, "element_spacing", path, required=True), f"{path}.element_spacing"
        )
        broadside = _as_float(_take(node, "broadside", path, default=0.0), f"{path}.broadside")
        _reject_unknown(node, path)
        try:
            return UniformLinearArray(num, spacing, broadside)
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    raise ScenarioError(f"{path}.kind: expected 'isotropic' or 'ula', got {kind!r}")


def _parse_trajectory(node, path: str) -> TrajectorySpec:
    node = _require_mapping(node, path)
    kind = _take(node, "kind", path, required=True)
    n_steps = _as_int(_take(node, "n_steps", path, required=True), f"{path}.n_steps")
    if n_steps < 1:
        raise ScenarioError(f"{path}.n_steps: must be >= 1")
    if kind == "waypoints":
        raw_points = _take(node, "points", path, required=True)
        _reject_unknown(node, path)
        if not isinstance(raw_points, list) or len(raw_points) < 2:
            raise ScenarioError(f"{path}.points: need at least two waypoints")
        times, positions = [], []
        for i, entry in enumerate(raw_points):
            entry = _require_mapping(entry, f"{path}.points[{i}]")
            times.append(_as_float(_take(entry, "time", f"{path}.points[{i}]", required=True),
                                   f"{path}.points[{i}].time"))
            positions.append(_as_vec2(_take(entry, "position", f"{path}.points[{i}]",
                                            required=True), f"{path}.points[{i}].position"))
            _reject_unknown(entry, f"{path}.points[{i}]")
        try:
            return WaypointTrajectory(n_steps=n_steps, times=np.array(times),
                                      positions=np.array(positions))
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    if kind == "sampled_ncv":
        position = _as_vec2(_take(node, "position", path, required=True), f"{path}.position")
        velocity = _as_vec2(_take(node, "velocity", path, required=True), f"{path}.velocity")
        orientation = _as_float(_take(node, "orientation", path, default=0.0),
                                f"{path}.orientation")
        _reject_unknown(node, path)
        initial = AgentPose(position=position, velocity=velocity, orientation=orientation)
        return NcvTrajectory(n_steps=n_steps, initial=initial)
    raise ScenarioError(f"{path}.kind: expected 'waypoints' or 'sampled_ncv', got {kind!r}")


def _parse_steps(node, path: str, n_steps: int) -> tuple[int, ...] | None:
    if node is None:
        return None
    if isinstance(node, dict):
        node = dict(node)
        start = _as_int(_take(node, "from", path, default=1), f"{path}.from")
        stop = _as_int(_take(node, "to", path, default=n_steps), f"{path}.to")
        _reject_unknown(node, path)
        if not 1 <= start <= stop <= n_steps:
            raise ScenarioError(f"{path}: range {start}..{stop} outside 1..{n_steps}")
        return tuple(range(start, stop + 1))
    if isinstance(node, list):
        return tuple(_as_int(v, f"{path}[{i}]") for i, v in enumerate(node))
    raise ScenarioError(f"{path}: expected a list of steps or {{from, to}}")


def _parse_visibility(node, path: str, n_anchors: int, n_steps: int,
                      order: ComponentOrder) -> VisibilitySchedule:
    if node is None:
        return VisibilitySchedule.resolve(True, [], n_anchors, n_steps, order)
    node = _require_mapping(node, path)
    default = _as_bool(_take(node, "default", path, default=True), f"{path}.default")
    raw_rules = _take(node, "rules", path, default=[])
    _reject_unknown(node, path)
    if not isinstance(raw_rules, list):
        raise ScenarioError(f"{path}.rules: expected a list")
    rules = []
    for i, raw in enumerate(raw_rules):
        rpath = f"{path}.rules[{i}]"
        raw = _require_mapping(raw, rpath)
        visible = _as_bool(_take(raw, "visible", rpath, required=True), f"{rpath}.visible")
        anchors = _take(raw, "anchors", rpath)
        if anchors is not None:
            if not isinstance(anchors, list):
                raise ScenarioError(f"{rpath}.anchors: expected a list")
            anchors = tuple(_as_int(a, f"{rpath}.anchors[{ai}]") for ai, a in enumerate(anchors))
        components = _take(raw, "components", rpath)
        if components is not None:
            if not isinstance(components, list):
                raise ScenarioError(f"{rpath}.components: expected a list of [s, s'] pairs")
            pairs = []
            for ci, pair in enumerate(components):
                if not isinstance(pair, list) or len(pair) != 2:
                    raise ScenarioError(f"{rpath}.components[{ci}]: expected [s, s']")
                pairs.append((
                    _as_int(pair[0], f"{rpath}.components[{ci}][0]"),
                    _as_int(pair[1], f"{rpath}.components[{ci}][1]"),
                ))
            components = tuple(pairs)
        steps = _parse_steps(_take(raw, "steps", rpath), f"{rpath}.steps", n_steps)
        _reject_unknown(raw, rpath)
        rules.append(VisibilityRule(visible=visible, anchors=anchors,
                                    components=components, steps=steps))
    return VisibilitySchedule.resolve(default, rules, n_anchors, n_steps, order)


def load_scenario(path: str | Path) -> Scenario:
    """Load and fully validate a scenario file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from None
    try:
        root = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: invalid YAML: {exc}") from None
    return scenario_from_mapping(root)


def scenario_from_mapping(root) -> Scenario:
    """Build a scenario from an already-parsed mapping (the file's structure)."""
    root = _require_mapping(root, "scenario")

    raw_anchors = _take(root, "anchors", "scenario", required=True)
    if not isinstance(raw_anchors, list) or not raw_anchors:
        raise ScenarioError("scenario.anchors: expected a non-empty list")
    anchors = []
    for i, raw in enumerate(raw_anchors):
        apath = f"scenario.anchors[{i}]"
        raw = _require_mapping(raw, apath)
        position = _as_vec2(_take(raw, "position", apath, required=True), f"{apath}.position")
        orientation = _as_float(_take(raw, "orientation", apath, default=0.0),
                                f"{apath}.orientation")
        aperture = _parse_aperture(_take(raw, "aperture", apath, required=True),
                                   f"{apath}.aperture")
        _reject_unknown(raw, apath)
        anchors.append(Anchor(position=position, orientation=orientation, aperture=aperture))

    raw_surfaces = _take(root, "surfaces", "scenario", required=True)
    if not isinstance(raw_surfaces, list) or not raw_surfaces:
        raise ScenarioError("scenario.surfaces: expected a non-empty list of [x, y] points")
    surface_points = [_as_vec2(p, f"scenario.surfaces[{i}]") for i, p in enumerate(raw_surfaces)]
    try:
        surfaces = SurfaceMap(np.array(surface_points))
    except ValueError as exc:
        raise ScenarioError(f"scenario.surfaces: {exc}") from None

    sig = _require_mapping(_take(root, "signal", "scenario", required=True), "scenario.signal")
    try:
        signal = SignalModel(
            carrier_freq=_as_float(_take(sig, "carrier_freq", "scenario.signal", required=True),
                                   "scenario.signal.carrier_freq"),
            rms_bandwidth=_as_float(_take(sig, "rms_bandwidth", "scenario.signal", required=True),
                                    "scenario.signal.rms_bandwidth"),
        )
    except ValueError as exc:
        raise ScenarioError(f"scenario.signal: {exc}") from None
    _reject_unknown(sig, "scenario.signal")

    mod = _require_mapping(_take(root, "model", "scenario", required=True), "scenario.model")
    try:
        model = StateSpaceModel(
            time_step=_as_float(_take(mod, "time_step", "scenario.model", required=True),
                                "scenario.model.time_step"),
            num_surfaces=len(surfaces),
            accel_noise_var=_as_float(_take(mod, "accel_noise_var", "scenario.model",
                                            default=0.0), "scenario.model.accel_noise_var"),
            orient_noise_var=_as_float(_take(mod, "orient_noise_var", "scenario.model",
                                             default=0.0), "scenario.model.orient_noise_var"),
            surface_noise_var=_as_float(_take(mod, "surface_noise_var", "scenario.model",
                                              default=0.0), "scenario.model.surface_noise_var"),
        )
    except ValueError as exc:
        raise ScenarioError(f"scenario.model: {exc}") from None
    _reject_unknown(mod, "scenario.model")

    trajectory = _parse_trajectory(_take(root, "trajectory", "scenario", required=True),
                                   "scenario.trajectory")

    amp = _require_mapping(_take(root, "amplitude_model", "scenario", required=True),
                           "scenario.amplitude_model")
    try:
        amplitude_model = AmplitudeModel(
            reference_amplitude=_as_float(
                _take(amp, "reference_amplitude", "scenario.amplitude_model", required=True),
                "scenario.amplitude_model.reference_amplitude"),
            bounce_loss=_as_float(_take(amp, "bounce_loss", "scenario.amplitude_model",
                                        default=0.5), "scenario.amplitude_model.bounce_loss"),
        )
    except ValueError as exc:
        raise ScenarioError(f"scenario.amplitude_model: {exc}") from None
    _reject_unknown(amp, "scenario.amplitude_model")

    pri = _require_mapping(_take(root, "prior", "scenario", default={}), "scenario.prior")
    raw_surface_var = _take(pri, "surface_var", "scenario.prior", default=100.0)
    if isinstance(raw_surface_var, list):
        surface_var = tuple(
            _as_float(v, f"scenario.prior.surface_var[{i}]")
            for i, v in enumerate(raw_surface_var)
        )
        if len(surface_var) != len(surfaces):
            raise ScenarioError(
                f"scenario.prior.surface_var: expected {len(surfaces)} entries, "
                f"got {len(surface_var)}"
            )
    else:
        surface_var = _as_float(raw_surface_var, "scenario.prior.surface_var")
    try:
        prior = PriorSpec(
            position_var=_as_float(_take(pri, "position_var", "scenario.prior", default=1.0),
                                   "scenario.prior.position_var"),
            velocity_var=_as_float(_take(pri, "velocity_var", "scenario.prior", default=1.0),
                                   "scenario.prior.velocity_var"),
            orientation_var=_as_float(
                _take(pri, "orientation_var", "scenario.prior",
                      default=DEFAULT_ORIENTATION_PRIOR_VAR),
                "scenario.prior.orientation_var"),
            surface_var=surface_var,
        )
    except ValueError as exc:
        raise ScenarioError(f"scenario.prior: {exc}") from None
    _reject_unknown(pri, "scenario.prior")

    mc_node = _require_mapping(_take(root, "mc", "scenario", required=True), "scenario.mc")
    try:
        mc = MonteCarloConfig(
            runs=_as_int(_take(mc_node, "runs", "scenario.mc", required=True),
                         "scenario.mc.runs"),
            seed=_as_int(_take(mc_node, "seed", "scenario.mc", required=True),
                         "scenario.mc.seed"),
        )
    except ValueError as exc:
        raise ScenarioError(f"scenario.mc: {exc}") from None
    _reject_unknown(mc_node, "scenario.mc")

    agent_aperture = _parse_aperture(_take(root, "agent_aperture", "scenario", required=True),
                                     "scenario.agent_aperture")

    order = ComponentOrder.canonical(len(surfaces))
    visibility = _parse_visibility(_take(root, "visibility", "scenario"), "scenario.visibility",
                                   len(anchors), trajectory.n_steps, order)
    _reject_unknown(root, "scenario")

    try:
        return Scenario(
            anchors=anchors,
            surfaces=surfaces,
            signal=signal,
            model=model,
            trajectory=trajectory,
            amplitude_model=amplitude_model,
            visibility=visibility,
            prior=prior,
            mc=mc,
            agent_aperture=agent_aperture,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
