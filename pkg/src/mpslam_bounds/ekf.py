"""Reference EKF-SLAM estimator with oracle data association.

The filter tracks the same joint state as the bound recursion (agent
position, velocity, orientation plus all surface points) under the same
transition model, and linearizes the measurement model with the very same
gradient code used to assemble the snapshot information: the measurement
matrix of an update is the transposed joint-state gradient matrix restricted
to the measured components. Each measurement carries its true component id
(oracle association), matching the assumptions under which the bound holds,
so the filter's error is expected to approach the bound at high SNR.

Per Monte-Carlo run the initial state estimate is drawn around the true
initial state from the scenario prior (so the run ensemble is consistent
with the prior the recursion starts from), measurements are drawn from the
run's own stream, and squared errors are recorded per step. Runs are
aggregated into RMSE time series paired with the bound records evaluated on
the same ground truth.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .fim import ChannelParams, ZeroApertureError, global_jacobian, measurement_variances
from .geometry import AgentPose, DegenerateGeometryError, SurfaceMap, path_geometry, wrap_angle
from .pcrlb import BoundRecord, run_recursion, transition_matrix, process_noise_cov
from .scenario import Measurement, Scenario, draw_measurements, ground_truth, measurement_truth
from .streams import derive_run_stream

log = logging.getLogger(__name__)

# Estimated surface points closer to the origin than this are not usable for
# linearization (the mirror representation degenerates there).
_SURFACE_NORM_FLOOR = 1e-6


@dataclass
class EkfState:
    """Joint-state mean and covariance (same layout as the bound recursion)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        n = self.mean.shape[0]
        if self.cov.shape != (n, n):
            raise ValueError("covariance shape must match the mean")


def ekf_predict(state: EkfState, transition: np.ndarray, noise_cov: np.ndarray) -> EkfState:
    """Time update: mean through the transition, covariance plus process noise."""
    mean = transition @ state.mean
    cov = transition @ state.cov @ transition.T + noise_cov
    return EkfState(mean=mean, cov=0.5 * (cov + cov.T))


def _linearize(
    mean: np.ndarray, measurements: list[Measurement], scenario: Scenario
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Measurement model linearization at the current mean.

    Returns (H, observed, predicted, noise_diag, angle_row) over the usable
    measurement rows; rows whose geometry or noise model cannot be evaluated
    at the current estimate are dropped with a diagnostic.
    """
    pose = AgentPose.from_state(mean[:5])
    raw_points = mean[5:].reshape(-1, 2)
    usable_surface = np.linalg.norm(raw_points, axis=1) > _SURFACE_NORM_FLOOR
    safe_points = np.where(usable_surface[:, None], raw_points, [[1.0, 0.0]])
    surfaces = SurfaceMap(safe_points)
    order = scenario.order

    by_anchor: dict[int, list[Measurement]] = {}
    for m in measurements:
        by_anchor.setdefault(m.anchor, []).append(m)

    h_rows, z_rows, pred_rows, var_rows, angle_rows = [], [], [], [], []
    for j in sorted(by_anchor):
        anchor = scenario.anchors[j]
        geoms: list = [None] * order.size
        used: list[tuple[Measurement, int]] = []
        existences = np.zeros(order.size, dtype=np.int8)
        for m in by_anchor[j]:
            comp = order.components[m.component]
            if any(not usable_surface[s - 1] for s in comp.bounces):
                log.warning(
                    "step %d anchor %d: surface estimate near origin, skipping "
                    "component %s", m.step, j + 1, comp.bounces,
                )
                continue
            try:
                geoms[m.component] = path_geometry(pose, anchor, comp, surfaces)
            except DegenerateGeometryError as exc:
                log.warning("step %d anchor %d: %s, skipping component", m.step, j + 1, exc)
                continue
            existences[m.component] = 1
            used.append((m, m.component))
        if not used:
            continue
        jac = global_jacobian(pose, anchor, order, surfaces, existences, geoms)
        for m, k in used:
            try:
                variances = measurement_variances(
                    ChannelParams(m.distance, m.aoa, m.aod),
                    m.amplitude,
                    scenario.signal.carrier_freq,
                    scenario.signal.rms_bandwidth,
                    scenario.agent_aperture,
                    anchor.aperture,
                )
            except (ValueError, ZeroApertureError) as exc:
                log.warning("step %d anchor %d: %s, skipping component", m.step, j + 1, exc)
                continue
            params = geoms[k].params
            cols = (order.dist_index(k), order.aoa_index(k), order.aod_index(k))
            for col, observed, predicted, variance, is_angle in zip(
                cols,
                (m.distance, m.aoa, m.aod),
                (params.distance, params.aoa, params.aod),
                variances,
                (False, True, True),
            ):
                h_rows.append(jac[:, col])
                z_rows.append(observed)
                pred_rows.append(predicted)
                var_rows.append(variance)
                angle_rows.append(is_angle)

    if not h_rows:
        n = mean.shape[0]
        return (np.zeros((0, n)), np.zeros(0), np.zeros(0), np.zeros(0),
                np.zeros(0, dtype=bool))
    return (
        np.array(h_rows),
        np.array(z_rows),
        np.array(pred_rows),
        np.array(var_rows),
        np.array(angle_rows),
    )


def ekf_update(state: EkfState, measurements: list[Measurement], scenario: Scenario) -> EkfState:
    """Measurement update with all components of one step stacked.

    Innovations of angle rows are wrapped; the covariance update uses the
    Joseph form and is symmetrized. A numerically singular innovation
    covariance skips the whole stacked update with a diagnostic.
    """
    if not measurements:
        return state
    h_mat, observed, predicted, noise_diag, angle_row = _linearize(
        state.mean, measurements, scenario
    )
    if h_mat.shape[0] == 0:
        return state
    innovation = observed - predicted
    innovation[angle_row] = np.array([wrap_angle(v) for v in innovation[angle_row]])
    innovation_cov = h_mat @ state.cov @ h_mat.T + np.diag(noise_diag)
    try:
        factor = cho_factor(0.5 * (innovation_cov + innovation_cov.T), lower=True)
    except (LinAlgError, ValueError):
        log.warning(
            "step %d: singular innovation covariance, skipping update",
            measurements[0].step,
        )
        return state
    gain = cho_solve(factor, h_mat @ state.cov).T
    mean = state.mean + gain @ innovation
    mean[4] = wrap_angle(mean[4])
    identity = np.eye(state.mean.shape[0])
    shrink = identity - gain @ h_mat
    cov = shrink @ state.cov @ shrink.T + (gain * noise_diag) @ gain.T
    return EkfState(mean=mean, cov=0.5 * (cov + cov.T))


@dataclass
class RunMetrics:
    """Per-step squared errors of a single run (steps 1..N)."""

    position_sq: np.ndarray
    velocity_sq: np.ndarray
    orientation_sq: np.ndarray
    map_sq: np.ndarray  # (N, S)


@dataclass
class MonteCarloResult:
    """Aggregated RMSE time series paired with the bound records (steps 1..N)."""

    bounds: list[BoundRecord]
    rmse_position: np.ndarray
    rmse_velocity: np.ndarray
    rmse_orientation: np.ndarray
    rmse_map: np.ndarray  # (N, S)
    runs: int


def _joint_truth(pose: AgentPose, surfaces: SurfaceMap) -> np.ndarray:
    return np.concatenate([pose.as_state(), surfaces.points.ravel()])


def run_single(
    scenario: Scenario,
    truth,
    table,
    run_index: int,
) -> RunMetrics:
    """One Monte-Carlo run: draw initial error and measurements, filter, record errors."""
    rng = derive_run_stream(scenario.mc.seed, run_index)
    prior_diag = scenario.prior_covariance()
    truth0 = _joint_truth(truth[0], scenario.surfaces)
    mean0 = truth0 + np.sqrt(prior_diag) * rng.standard_normal(prior_diag.size)
    mean0[4] = wrap_angle(mean0[4])
    state = EkfState(mean=mean0, cov=np.diag(prior_diag))

    by_step: dict[int, list[Measurement]] = {}
    for m in draw_measurements(table, rng):
        by_step.setdefault(m.step, []).append(m)

    transition = transition_matrix(scenario.model)
    noise_cov = process_noise_cov(scenario.model)
    n_steps = scenario.n_steps
    num_surfaces = len(scenario.surfaces)
    metrics = RunMetrics(
        position_sq=np.zeros(n_steps),
        velocity_sq=np.zeros(n_steps),
        orientation_sq=np.zeros(n_steps),
        map_sq=np.zeros((n_steps, num_surfaces)),
    )
    for n in range(1, n_steps + 1):
        state = ekf_predict(state, transition, noise_cov)
        state = ekf_update(state, by_step.get(n, []), scenario)
        truth_state = _joint_truth(truth[n], scenario.surfaces)
        err = state.mean - truth_state
        metrics.position_sq[n - 1] = float(err[0] ** 2 + err[1] ** 2)
        metrics.velocity_sq[n - 1] = float(err[2] ** 2 + err[3] ** 2)
        metrics.orientation_sq[n - 1] = wrap_angle(float(err[4])) ** 2
        for s in range(num_surfaces):
            block = err[5 + 2 * s : 7 + 2 * s]
            metrics.map_sq[n - 1, s] = float(block @ block)
    return metrics


def run_monte_carlo(scenario: Scenario) -> MonteCarloResult:
    """Bounds plus estimator RMSE over the scenario's Monte-Carlo ensemble.

    The ground truth is fixed across runs; runs differ in their initial
    estimate draw and measurement noise. Runs execute sequentially in run
    order (independent streams make the aggregation order-independent up to
    the fixed summation order used here).
    """
    truth = ground_truth(scenario)
    bounds = run_recursion(scenario)
    table = measurement_truth(scenario, truth)

    n_steps = scenario.n_steps
    num_surfaces = len(scenario.surfaces)
    sums = RunMetrics(
        position_sq=np.zeros(n_steps),
        velocity_sq=np.zeros(n_steps),
        orientation_sq=np.zeros(n_steps),
        map_sq=np.zeros((n_steps, num_surfaces)),
    )
    for run in range(scenario.mc.runs):
        try:
            metrics = run_single(scenario, truth, table, run)
        except Exception as exc:
            raise RuntimeError(f"Monte-Carlo run {run} failed: {exc}") from exc
        sums.position_sq += metrics.position_sq
        sums.velocity_sq += metrics.velocity_sq
        sums.orientation_sq += metrics.orientation_sq
        sums.map_sq += metrics.map_sq

    runs = scenario.mc.runs
    return MonteCarloResult(
        bounds=bounds,
        rmse_position=np.sqrt(sums.position_sq / runs),
        rmse_velocity=np.sqrt(sums.velocity_sq / runs),
        rmse_orientation=np.sqrt(sums.orientation_sq / runs),
        rmse_map=np.sqrt(sums.map_sq / runs),
        runs=runs,
    )
