"""Recursive posterior Cramer-Rao bound over the joint agent-plus-map state.

The joint state follows a nearly-constant-velocity transition: position
integrates velocity over the step length, orientation and surface points
random-walk. Posterior information is propagated as

    J_pred = (F J_prev^{-1} F^T + Q)^{-1}        (prediction)
    J_post = J_snapshot + J_pred                 (fusion)

and the error bounds are square roots of traces of blocks of J_post^{-1}:
position (PEB), velocity (VEB), orientation (OEB) and one mapping bound per
surface (MEB). Every inversion goes through a symmetric positive-definite
factorization followed by symmetrization; information matrices with
condition number beyond 1e14 are rejected as singular.

State layout (0-based): position 0:2, velocity 2:4, orientation 4,
surface s (1-based) at 5 + 2*(s-1). Reports use 1-based surface ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

CONDITION_LIMIT = 1e14


class SingularFimError(RuntimeError):
    """An information matrix was numerically singular (missing prior information)."""


@dataclass(frozen=True)
class StateSpaceModel:
    """Joint-state transition model parameters.

    ``accel_noise_var`` drives the kinematic agent block ((m/s^2)^2),
    ``orient_noise_var`` the orientation random walk (rad^2 per step) and
    ``surface_noise_var`` each surface coordinate (m^2 per step, accounting
    for wall non-idealities).
    """

    time_step: float
    num_surfaces: int
    accel_noise_var: float = 0.0
    orient_noise_var: float = 0.0
    surface_noise_var: float = 0.0

    def __post_init__(self):
        if not self.time_step > 0:
            raise ValueError("time step must be positive")
        if self.num_surfaces < 0:
            raise ValueError("surface count must be >= 0")
        for name in ("accel_noise_var", "orient_noise_var", "surface_noise_var"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def dim(self) -> int:
        return 5 + 2 * self.num_surfaces


def surface_slice(surface: int) -> slice:
    """State slice of surface ``surface`` (1-based)."""
    start = 5 + 2 * (surface - 1)
    return slice(start, start + 2)


def gain_matrix(time_step: float) -> np.ndarray:
    """4x2 noise gain of the kinematic block: acceleration to (position, velocity)."""
    t = float(time_step)
    half_t2 = 0.5 * t * t
    return np.array([[half_t2, 0.0], [0.0, half_t2], [t, 0.0], [0.0, t]])


def transition_matrix(model: StateSpaceModel) -> np.ndarray:
    """N x N transition: identity plus position-from-velocity coupling."""
    f = np.eye(model.dim)
    f[0, 2] = model.time_step
    f[1, 3] = model.time_step
    return f


def process_noise_cov(model: StateSpaceModel) -> np.ndarray:
    """N x N process noise covariance; symmetric positive semidefinite."""
    q = np.zeros((model.dim, model.dim))
    gain = gain_matrix(model.time_step)
    q[0:4, 0:4] = model.accel_noise_var * (gain @ gain.T)
    q[4, 4] = model.orient_noise_var
    for s in range(1, model.num_surfaces + 1):
        sl = surface_slice(s)
        q[sl, sl] = model.surface_noise_var * np.eye(2)
    return q


def _spd_inverse(matrix: np.ndarray, what: str) -> np.ndarray:
    """Invert a symmetric positive-definite matrix; symmetrized output.

    Raises :class:`SingularFimError` when the factorization fails or the
    condition number exceeds ``CONDITION_LIMIT``.
    """
    sym = 0.5 * (matrix + matrix.T)
    try:
        factor = cho_factor(sym, lower=True, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SingularFimError(f"{what} is not positive definite: {exc}") from exc
    eigvals = np.linalg.eigvalsh(sym)
    if eigvals[0] <= 0 or eigvals[-1] / eigvals[0] > CONDITION_LIMIT:
        raise SingularFimError(
            f"{what} is numerically singular (condition number above {CONDITION_LIMIT:g})"
        )
    inv = cho_solve(factor, np.eye(sym.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def predict_fim(
    j_post: np.ndarray, transition: np.ndarray, process_cov: np.ndarray
) -> np.ndarray:
    """Propagate posterior information one step: (F J^{-1} F^T + Q)^{-1}."""
    cov = _spd_inverse(j_post, "posterior information")
    predicted_cov = transition @ cov @ transition.T + process_cov
    return _spd_inverse(predicted_cov, "predicted covariance")


def fuse(j_pred: np.ndarray, j_snapshot: np.ndarray) -> np.ndarray:
    """Add snapshot information to predicted information."""
    if j_pred.shape != j_snapshot.shape:
        raise ValueError(
            f"information shapes differ: {j_pred.shape} vs {j_snapshot.shape}"
        )
    return j_pred + j_snapshot


@dataclass(frozen=True)
class BoundRecord:
    """Error bounds extracted from one posterior information matrix."""

    step: int
    peb: float  # m, position
    veb: float  # m/s, velocity
    oeb: float  # rad, orientation
    meb: np.ndarray = field(repr=False)  # m, one entry per surface (1-based id s -> meb[s-1])


def extract_bounds(j_post: np.ndarray, num_surfaces: int, step: int = 0) -> BoundRecord:
    """Square-root trace bounds of the posterior covariance blocks."""
    cov = _spd_inverse(j_post, "posterior information")
    peb = float(np.sqrt(cov[0, 0] + cov[1, 1]))
    veb = float(np.sqrt(cov[2, 2] + cov[3, 3]))
    oeb = float(np.sqrt(cov[4, 4]))
    meb = np.empty(num_surfaces)
    for s in range(1, num_surfaces + 1):
        sl = surface_slice(s)
        meb[s - 1] = np.sqrt(cov[sl, sl].trace())
    return BoundRecord(step=step, peb=peb, veb=veb, oeb=oeb, meb=meb)


def _describe_weak_block(j: np.ndarray, num_surfaces: int) -> str:
    """Name the state block with the least diagonal information (diagnostics)."""
    diag = np.diag(j)
    idx = int(np.argmin(diag))
    if idx < 2:
        return "agent position"
    if idx < 4:
        return "agent velocity"
    if idx == 4:
        return "agent orientation"
    return f"surface {1 + (idx - 5) // 2}"


def run_recursion(scenario, prior: np.ndarray | None = None) -> list[BoundRecord]:
    """Evaluate the bound recursion along a scenario's ground-truth trajectory.

    Starts from the diagonal prior covariance (the scenario's unless an
    explicit diagonal is given), then alternates prediction, snapshot
    information built from the true geometry and the visibility schedule,
    and fusion. Deterministic: identical inputs give bit-identical output.
    """
    # Imported here: scenario assembly depends on this module for the model.
    from .scenario import ground_truth, snapshot_fim

    model = scenario.model
    if prior is None:
        prior = scenario.prior_covariance()
    prior = np.asarray(prior, dtype=float)
    if prior.ndim != 1 or prior.shape[0] != model.dim:
        raise ValueError(f"prior covariance diagonal must have length {model.dim}")
    if not np.all(prior > 0):
        raise ValueError("prior variances must be positive")

    transition = transition_matrix(model)
    noise_cov = process_noise_cov(model)
    truth = ground_truth(scenario)
    j_post = np.diag(1.0 / prior)
    records: list[BoundRecord] = []
    for n in range(1, scenario.n_steps + 1):
        try:
            j_pred = predict_fim(j_post, transition, noise_cov)
            j_post = fuse(j_pred, snapshot_fim(scenario, truth[n], n))
            records.append(extract_bounds(j_post, model.num_surfaces, step=n))
        except SingularFimError as exc:
            raise SingularFimError(
                f"step {n}: {exc} (weakest block: "
                f"{_describe_weak_block(j_post, model.num_surfaces)})"
            ) from exc
    return records
