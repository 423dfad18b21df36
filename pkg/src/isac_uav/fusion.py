"""EKF fusion of radar fixes with communication-location uncertainty.

The communication channel enters as the covariance added in every
prediction; radar range/bearing fixes drive the update.  Sensing accuracy
is measured empirically across Monte Carlo trials as the variance of the
range error, never read off the filter covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .exceptions import DomainError, FilterDivergenceError
from .kinematics import (
    STATE_DIM,
    ObserverPose,
    TargetState,
    generate_trajectory,
    initial_state,
    motion_jacobian,
    propagate_state,
    wrap_angle,
)
from .measurement import (
    MeasurementNoise,
    ProcessNoise,
    RadarMeasurement,
    measurement_jacobian,
    observe,
    polar_to_cartesian_covariance,
    sample_noisy_measurement,
    target_position_from_measurement,
)

MAX_INNOVATION_COND = 1e12


@dataclass(frozen=True, eq=False)
class FilterState:
    """Mean, covariance and step index of the filter.

    ``previous`` keeps the last posterior mean; only the literal
    observation-prediction mode reads it.
    """

    estimate: np.ndarray
    covariance: np.ndarray
    k: int = 0
    previous: np.ndarray | None = None

    @property
    def target(self) -> TargetState:
        return TargetState.from_array(self.estimate)

    def position(self) -> np.ndarray:
        return self.estimate[:2]


@dataclass(frozen=True)
class FusionMetrics:
    dr_rad: float
    dr_com: float | None
    dr_ekf: float
    rho_s: float


def _noise_matrix(noise, cls):
    if isinstance(noise, cls):
        return noise.covariance
    return cls(np.asarray(noise, dtype=float)).covariance


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def predict(f: FilterState, dt: float, q) -> FilterState:
    """Propagate mean and covariance one step and add the state uncertainty."""
    Q = _noise_matrix(q, ProcessNoise)
    F = motion_jacobian(dt)
    mean = propagate_state(f.estimate, dt) if dt > 0 else f.estimate.copy()
    P = symmetrize(F @ f.covariance @ F.T + Q)
    return FilterState(mean, P, f.k, previous=f.estimate)


def kalman_correct(mean, P, residual, H, R, joseph=False, k=None):
    """Linear-Gaussian correction shared by every update flavour.

    Returns the posterior ``(mean, covariance)``.
    """
    mean = np.asarray(mean, dtype=float)
    P = np.asarray(P, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    S = H @ P @ H.T + R
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > MAX_INNOVATION_COND:
        raise FilterDivergenceError("innovation covariance is singular", step=k)
    # G = P H^T S^-1, via a solve on the symmetric S
    G = np.linalg.solve(S, H @ P).T
    new_mean = mean + G @ np.atleast_1d(residual)
    if joseph:
        A = np.eye(P.shape[0]) - G @ H
        new_P = A @ P @ A.T + G @ R @ G.T
    else:
        new_P = P - G @ H @ P
    new_P = symmetrize(new_P)
    if not (np.all(np.isfinite(new_mean)) and np.all(np.isfinite(new_P))):
        raise FilterDivergenceError("non-finite posterior", step=k)
    return new_mean, new_P


def update(
    f: FilterState,
    m: RadarMeasurement,
    r,
    pose: ObserverPose,
    joseph: bool = False,
    literal_observation: bool = False,
) -> FilterState:
    """Correct the predicted state with a radar range/bearing fix.

    With ``literal_observation`` the predicted measurement is the Jacobian
    applied to the previous posterior mean instead of ``h`` evaluated at the
    prediction.
    """
    R = _noise_matrix(r, MeasurementNoise)
    H = measurement_jacobian(pose, f.estimate)
    if literal_observation and f.previous is not None:
        predicted = H @ f.previous
    else:
        predicted = observe(pose, f.estimate).to_array()
    residual = m.to_array() - predicted
    residual[1] = wrap_angle(residual[1])
    mean, P = kalman_correct(f.estimate, f.covariance, residual, H, R, joseph=joseph, k=f.k)
    return FilterState(mean, P, f.k, previous=f.previous)


def initial_filter_state(
    pose: ObserverPose,
    m: RadarMeasurement,
    r: MeasurementNoise,
    velocity_var: float = 625.0,
    acceleration_var: float = 1.0,
) -> FilterState:
    """Position from the first fix, zero derivatives with loose variance."""
    x, y = target_position_from_measurement(pose, m)
    mean = np.array([x, y, 0.0, 0.0, 0.0, 0.0])
    P = np.zeros((STATE_DIM, STATE_DIM))
    P[:2, :2] = polar_to_cartesian_covariance(m, r)
    P[2, 2] = P[3, 3] = velocity_var
    P[4, 4] = P[5, 5] = acceleration_var
    return FilterState(mean, symmetrize(P), 0)


def sensing_improvement_ratio(dr_rad: float, dr_ekf: float) -> float:
    """Relative reduction of range-error variance achieved by fusion."""
    if not dr_rad > 0:
        raise DomainError(f"radar range-error variance must be > 0, got {dr_rad}")
    return (dr_rad - dr_ekf) / dr_rad


# --- Monte Carlo trial ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """Per-step outputs of one trial; row ``i`` is step ``k = i + 1``."""

    true_states: np.ndarray  # (k_max, 6)
    observer_positions: np.ndarray  # (k_max, 2)
    radar_range_error: np.ndarray
    fused_range_error: np.ndarray
    radar_position_error: np.ndarray
    fused_position_error: np.ndarray
    p_trace: np.ndarray
    p_min_eig: np.ndarray
    p_asymmetry: np.ndarray
    range_clamped: int = 0

    @property
    def k_max(self) -> int:
        return len(self.p_trace)


def scenario_truth(scenario: ScenarioConfig, k_max: int):
    """Ground-truth observer and target trajectories, ``k_max + 1`` states each."""
    obs_profile = scenario.observer_profile
    tgt_profile = scenario.target_profile
    obs0 = initial_state(obs_profile, 0.0, 0.0, scenario.observer_initial_speed)
    tgt0 = initial_state(
        tgt_profile,
        scenario.separation * math.cos(scenario.bearing),
        scenario.separation * math.sin(scenario.bearing),
        scenario.target_initial_speed,
    )
    observer = generate_trajectory(obs_profile, obs0, k_max, scenario.dt)
    target = generate_trajectory(tgt_profile, tgt0, k_max, scenario.dt)
    poses = [ObserverPose.from_state(s, obs_profile.initial_heading) for s in observer]
    return poses, target


def perturb_trajectory(nominal, q: ProcessNoise, dt: float, rng: np.random.Generator):
    """Add a Gaussian deviation that evolves under the filter's motion model.

    The deviation starts at zero and receives a draw with covariance ``q``
    every step, so the true state differs from the nominal one exactly as
    the prediction step assumes.
    """
    F = motion_jacobian(dt)
    w, v = np.linalg.eigh(q.covariance)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    dev = np.zeros(STATE_DIM)
    out = [nominal[0]]
    for s in nominal[1:]:
        dev = F @ dev + root @ rng.standard_normal(STATE_DIM)
        out.append(TargetState.from_array(s.to_array() + dev))
    return out


def run_fusion_trial(
    scenario: ScenarioConfig,
    k_max: int,
    rng: np.random.Generator,
    truth=None,
) -> TrialRecord:
    """One tracking run: initialise from a fix, then ``k_max`` predict/update steps.

    ``truth`` may carry precomputed ``(poses, target_states)`` from
    :func:`scenario_truth` to avoid regenerating identical trajectories.
    """
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    poses, nominal = truth if truth is not None else scenario_truth(scenario, k_max)
    R = MeasurementNoise(scenario.measurement_cov)
    Q = ProcessNoise(scenario.process_cov)
    diagnostics: dict = {}
    # separate streams keep draws at step k independent of k_max
    truth_rng, radar_rng = rng.spawn(2)
    if scenario.truth_noise:
        target = perturb_trajectory(nominal, Q, scenario.dt, truth_rng)
    else:
        target = list(nominal)

    m0 = sample_noisy_measurement(observe(poses[0], target[0]), R, radar_rng, diagnostics)
    init_var = (scenario.init_velocity_var, scenario.init_acceleration_var)
    if scenario.init == "truth":
        f = initial_filter_state(poses[0], observe(poses[0], target[0]), R, *init_var)
        f = FilterState(target[0].to_array(), f.covariance, 0)
    else:
        f = initial_filter_state(poses[0], m0, R, *init_var)

    cols = {name: np.empty(k_max) for name in (
        "radar_range_error", "fused_range_error", "radar_position_error",
        "fused_position_error", "p_trace", "p_min_eig", "p_asymmetry",
    )}
    true_states = np.empty((k_max, STATE_DIM))
    observer_positions = np.empty((k_max, 2))
    for k in range(1, k_max + 1):
        pose, truth_k = poses[k], target[k]
        true_m = observe(pose, truth_k)
        m = sample_noisy_measurement(true_m, R, radar_rng, diagnostics)
        f = predict(FilterState(f.estimate, f.covariance, k, f.previous), scenario.dt, Q)
        f = update(f, m, R, pose, joseph=scenario.joseph, literal_observation=scenario.literal_observation)

        true_xy = np.array([truth_k.x, truth_k.y])
        obs_xy = np.array([pose.x0, pose.y0])
        radar_xy = np.array(target_position_from_measurement(pose, m))
        fused_xy = f.estimate[:2]
        i = k - 1
        cols["radar_range_error"][i] = np.hypot(*(radar_xy - obs_xy)) - true_m.range
        cols["fused_range_error"][i] = np.hypot(*(fused_xy - obs_xy)) - true_m.range
        cols["radar_position_error"][i] = np.hypot(*(radar_xy - true_xy))
        cols["fused_position_error"][i] = np.hypot(*(fused_xy - true_xy))
        P = f.covariance
        cols["p_trace"][i] = np.trace(P)
        cols["p_min_eig"][i] = np.linalg.eigvalsh(P).min()
        cols["p_asymmetry"][i] = np.max(np.abs(P - P.T))
        true_states[i] = truth_k.to_array()
        observer_positions[i] = obs_xy
    return TrialRecord(
        true_states=true_states,
        observer_positions=observer_positions,
        range_clamped=diagnostics.get("range_clamped", 0),
        **cols,
    )


def sample_variance(values) -> float:
    """Unbiased variance; exactly zero when all values coincide."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise DomainError("need at least 2 samples for a variance")
    shifted = v - v[0]
    return float(np.var(shifted, ddof=1))


def estimate_error_variances(records, k: int, dr_com: float | None = None) -> FusionMetrics:
    """Range-error variances across trials at step ``k`` (1-based)."""
    records = list(records)
    if len(records) < 2:
        raise DomainError(f"need at least 2 trials, got {len(records)}")
    if not all(1 <= k <= r.k_max for r in records):
        raise DomainError(f"step {k} outside the recorded range")
    dr_rad = sample_variance([r.radar_range_error[k - 1] for r in records])
    dr_ekf = sample_variance([r.fused_range_error[k - 1] for r in records])
    rho = sensing_improvement_ratio(dr_rad, dr_ekf) if dr_rad > 0 else float("nan")
    return FusionMetrics(dr_rad, dr_com, dr_ekf, rho)
