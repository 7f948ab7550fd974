"""Numerical invariant suite behind the command line's ``--self-check``.

Validates, on randomized nondegenerate geometry, that the analytic gradient
machinery agrees with central finite differences, that the mirror
construction preserves path lengths, that the orientation sensitivity is the
constant it must be in the plane, and that snapshot information matrices are
positive semidefinite and grow when observations are added. Every check is
deterministic (fixed seed) and reports violations as human-readable strings;
an empty report means the build is numerically sound.
"""

from __future__ import annotations

import numpy as np

from .fim import (
    ComponentOrder,
    IsotropicAperture,
    channel_fim,
    global_jacobian,
    global_snapshot_fim,
    orientation_entry,
)
from .geometry import (
    AgentPose,
    Anchor,
    DegenerateGeometryError,
    SurfaceMap,
    channel_params,
    householder_chain,
    mirrored_agent,
    virtual_anchor,
    wrap_angle,
)

FD_STEP = 1e-6
FD_TOL = 1e-6


def random_instance(rng: np.random.Generator, num_surfaces: int):
    """Random nondegenerate (agent, anchor, surfaces) with all components usable."""
    while True:
        points = []
        for _ in range(num_surfaces):
            angle = rng.uniform(-np.pi, np.pi)
            radius = rng.uniform(1.5, 18.0)
            points.append(radius * np.array([np.cos(angle), np.sin(angle)]))
        surfaces = SurfaceMap(np.array(points))
        anchor = Anchor(
            position=rng.uniform(-6.0, 6.0, size=2),
            orientation=rng.uniform(-np.pi, np.pi),
            aperture=IsotropicAperture(0.01),
        )
        agent = AgentPose(
            position=rng.uniform(-6.0, 6.0, size=2),
            velocity=rng.uniform(-2.0, 2.0, size=2),
            orientation=rng.uniform(-np.pi, np.pi),
        )
        order = ComponentOrder.canonical(num_surfaces)
        try:
            distances = [
                channel_params(agent, anchor, comp, surfaces).distance for comp in order
            ]
        except DegenerateGeometryError:
            continue
        if min(distances) > 0.5:
            return agent, anchor, surfaces, order


def channel_vector(state: np.ndarray, anchor: Anchor, order: ComponentOrder) -> np.ndarray:
    """Stacked channel parameters [distances | arrival az. | departure az.]."""
    pose = AgentPose.from_state(state[:5])
    surfaces = SurfaceMap(state[5:].reshape(-1, 2))
    out = np.zeros(order.dim)
    for k, comp in enumerate(order):
        params = channel_params(pose, anchor, comp, surfaces)
        out[order.dist_index(k)] = params.distance
        out[order.aoa_index(k)] = params.aoa
        out[order.aod_index(k)] = params.aod
    return out


def finite_difference_jacobian(
    state: np.ndarray, anchor: Anchor, order: ComponentOrder, step: float = FD_STEP
) -> np.ndarray:
    """Central-difference gradient matrix of the channel vector (angle-aware)."""
    dim_state = state.shape[0]
    k_total = order.size
    jac = np.zeros((dim_state, 3 * k_total))
    angle_entry = np.zeros(3 * k_total, dtype=bool)
    angle_entry[k_total:] = True
    for i in range(dim_state):
        h = step * max(1.0, abs(state[i]))
        forward = state.copy()
        forward[i] += h
        backward = state.copy()
        backward[i] -= h
        f_plus = channel_vector(forward, anchor, order)
        f_minus = channel_vector(backward, anchor, order)
        diff = f_plus - f_minus
        diff[angle_entry] = [wrap_angle(v) for v in diff[angle_entry]]
        jac[i, :] = diff / (2.0 * h)
    return jac


def column_mismatch(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst per-column relative deviation between two gradient matrices."""
    worst = 0.0
    for col in range(analytic.shape[1]):
        a, f = analytic[:, col], numeric[:, col]
        scale = max(np.linalg.norm(a), np.linalg.norm(f), 1e-9)
        worst = max(worst, float(np.linalg.norm(a - f) / scale))
    return worst


def _joint_state(agent: AgentPose, surfaces: SurfaceMap) -> np.ndarray:
    return np.concatenate([agent.as_state(), surfaces.points.ravel()])


def check_jacobian_fd(rng: np.random.Generator, instances: int = 50) -> list[str]:
    failures = []
    for i in range(instances):
        num_surfaces = int(rng.integers(1, 5))
        agent, anchor, surfaces, order = random_instance(rng, num_surfaces)
        analytic = global_jacobian(agent, anchor, order, surfaces)
        numeric = finite_difference_jacobian(_joint_state(agent, surfaces), anchor, order)
        worst = column_mismatch(analytic, numeric)
        if worst > FD_TOL:
            failures.append(
                f"gradient vs finite differences: instance {i} deviates by {worst:.3e}"
            )
    return failures


def check_orientation_identity(rng: np.random.Generator, instances: int = 50) -> list[str]:
    failures = []
    for i in range(instances):
        agent, anchor, surfaces, order = random_instance(rng, int(rng.integers(1, 5)))
        for comp in order:
            value = orientation_entry(agent, anchor, comp, surfaces)
            if abs(value + 1.0) > 1e-12:
                failures.append(
                    f"orientation sensitivity: instance {i} path {comp.bounces} "
                    f"gave {value!r} instead of -1"
                )
    return failures


def check_mirror_lengths(rng: np.random.Generator, instances: int = 200) -> list[str]:
    failures = []
    for i in range(instances):
        agent, anchor, surfaces, order = random_instance(rng, int(rng.integers(2, 5)))
        for comp in order:
            if comp.is_los:
                continue
            va = virtual_anchor(anchor, comp, surfaces)
            vm = mirrored_agent(agent.position, comp, surfaces)
            direct = np.linalg.norm(agent.position - va)
            mirrored = np.linalg.norm(vm - anchor.position)
            if abs(direct - mirrored) > 1e-12 * max(1.0, direct):
                failures.append(
                    f"mirror length: instance {i} path {comp.bounces} "
                    f"|{mirrored} - {direct}| too large"
                )
    return failures


def check_chain_fd(rng: np.random.Generator, instances: int = 50) -> list[str]:
    failures = []
    for i in range(instances):
        agent, anchor, surfaces, order = random_instance(rng, int(rng.integers(2, 5)))
        for comp in order:
            chain = householder_chain(comp, surfaces)
            numeric = np.zeros((2, 2))
            for axis in range(2):
                h = FD_STEP * max(1.0, abs(agent.position[axis]))
                for sign, target in ((1.0, 1), (-1.0, -1)):
                    shifted = agent.position.copy()
                    shifted[axis] += sign * h
                    vm = mirrored_agent(shifted, comp, surfaces)
                    numeric[:, axis] += target * (vm - anchor.position) / (2.0 * h)
            if np.max(np.abs(numeric - chain.T)) > FD_TOL:
                failures.append(
                    f"mirrored-agent sensitivity: instance {i} path {comp.bounces} "
                    f"deviates from the reflection product"
                )
    return failures


def check_snapshot_psd(rng: np.random.Generator, instances: int = 25) -> list[str]:
    failures = []
    aperture = IsotropicAperture(0.01)
    for i in range(instances):
        num_surfaces = int(rng.integers(1, 4))
        agent, anchor, surfaces, order = random_instance(rng, num_surfaces)
        agent2, anchor2, _, _ = random_instance(rng, num_surfaces)
        existences = (rng.random(order.size) < 0.7).astype(np.int8)
        terms = []
        for a in (anchor, anchor2):
            params = [None] * order.size
            amps = np.ones(order.size)
            skip = False
            for k, comp in enumerate(order):
                if not existences[k]:
                    continue
                try:
                    params[k] = channel_params(agent, a, comp, surfaces)
                except DegenerateGeometryError:
                    skip = True
                    break
                amps[k] = 2.0 / params[k].distance
            if skip:
                break
            jac = global_jacobian(agent, a, order, surfaces, existences)
            lam = channel_fim(order, params, amps, existences, 6e9, 1e8, aperture, aperture)
            terms.append((jac, lam))
        if len(terms) != 2:
            continue
        single = global_snapshot_fim(terms[:1])
        both = global_snapshot_fim(terms)
        for name, matrix in (("one anchor", single), ("two anchors", both),
                             ("anchor increment", both - single)):
            min_eig = float(np.linalg.eigvalsh(matrix)[0])
            if min_eig < -1e-10 * max(matrix.trace(), 1.0):
                failures.append(
                    f"snapshot information: instance {i} {name} has eigenvalue {min_eig:.3e}"
                )
        if np.any(single[2:4, :] != 0.0) or np.any(single[:, 2:4] != 0.0):
            failures.append(f"snapshot information: instance {i} has velocity coupling")
    return failures


def run_self_check(seed: int = 20240917) -> list[str]:
    """Run every invariant check; returns the list of violations (empty = pass)."""
    failures = []
    failures += check_jacobian_fd(np.random.default_rng(seed))
    failures += check_orientation_identity(np.random.default_rng(seed + 1))
    failures += check_mirror_lengths(np.random.default_rng(seed + 2))
    failures += check_chain_fd(np.random.default_rng(seed + 3))
    failures += check_snapshot_psd(np.random.default_rng(seed + 4))
    return failures
