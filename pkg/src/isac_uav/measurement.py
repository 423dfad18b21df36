"""Range/bearing radar observation model and its Gaussian error model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, SingularityError
from .kinematics import STATE_DIM, ObserverPose, TargetState, wrap_angle

#: Radar error covariance diag(range m^2, bearing rad^2) used by default.
DEFAULT_MEASUREMENT_COV = np.diag([10.0, 0.01])
#: Communication-location uncertainty injected at each prediction.
DEFAULT_PROCESS_COV = np.diag([10.0, 10.0, 1.0, 1.0, 0.1, 0.1])


@dataclass(frozen=True)
class RadarMeasurement:
    range: float
    bearing: float

    def __post_init__(self):
        if not (math.isfinite(self.range) and math.isfinite(self.bearing)):
            raise DomainError(f"non-finite measurement {self}")
        if self.range < 0:
            raise DomainError(f"range must be >= 0, got {self.range}")
        object.__setattr__(self, "bearing", wrap_angle(self.bearing))

    def to_array(self) -> np.ndarray:
        return np.array([self.range, self.bearing])


def _check_covariance(cov, dim, name, tol=1e-9):
    cov = np.array(cov, dtype=float)
    if cov.shape != (dim, dim):
        raise DomainError(f"{name} covariance must be {dim}x{dim}, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise DomainError(f"{name} covariance is not finite")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if not np.allclose(cov, cov.T, atol=tol * scale, rtol=0.0):
        raise DomainError(f"{name} covariance is not symmetric")
    if np.linalg.eigvalsh(cov).min() < -tol * scale:
        raise DomainError(f"{name} covariance is not positive semi-definite")
    return cov


@dataclass(frozen=True, eq=False)
class MeasurementNoise:
    """2x2 radar error covariance (m^2, rad^2 on the diagonal)."""

    covariance: np.ndarray = DEFAULT_MEASUREMENT_COV

    def __post_init__(self):
        object.__setattr__(self, "covariance", _check_covariance(self.covariance, 2, "measurement"))


@dataclass(frozen=True, eq=False)
class ProcessNoise:
    """6x6 state uncertainty added in each prediction step."""

    covariance: np.ndarray = DEFAULT_PROCESS_COV

    def __post_init__(self):
        object.__setattr__(self, "covariance", _check_covariance(self.covariance, STATE_DIM, "process"))


def _offset(pose: ObserverPose, s) -> tuple[float, float]:
    if isinstance(s, TargetState):
        x, y = s.x, s.y
    else:
        x, y = float(s[0]), float(s[1])
    return x - pose.x0, y - pose.y0


def observe(pose: ObserverPose, s) -> RadarMeasurement:
    """Noise-free range and bearing from the observer to the target."""
    dx, dy = _offset(pose, s)
    r = math.hypot(dx, dy)
    if r == 0.0:
        raise SingularityError("target coincides with observer; bearing undefined")
    return RadarMeasurement(r, math.atan2(dy, dx))


def target_position_from_measurement(pose: ObserverPose, m: RadarMeasurement) -> tuple[float, float]:
    return (
        pose.x0 + m.range * math.cos(m.bearing),
        pose.y0 + m.range * math.sin(m.bearing),
    )


def measurement_jacobian(pose: ObserverPose, s) -> np.ndarray:
    """2x6 Jacobian of (range, bearing) with respect to the state."""
    dx, dy = _offset(pose, s)
    r2 = dx * dx + dy * dy
    if r2 == 0.0:
        raise SingularityError("Jacobian undefined at zero range")
    r = math.sqrt(r2)
    H = np.zeros((2, STATE_DIM))
    H[0, 0], H[0, 1] = dx / r, dy / r
    H[1, 0], H[1, 1] = -dy / r2, dx / r2
    return H


def polar_to_cartesian_covariance(m: RadarMeasurement, noise: MeasurementNoise) -> np.ndarray:
    """First-order position covariance implied by a range/bearing fix."""
    c, s = math.cos(m.bearing), math.sin(m.bearing)
    J = np.array([[c, -m.range * s], [s, m.range * c]])
    return J @ noise.covariance @ J.T


def _matrix_sqrt(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_noisy_measurement(
    true_m: RadarMeasurement,
    noise: MeasurementNoise,
    rng: np.random.Generator,
    diagnostics: dict | None = None,
) -> RadarMeasurement:
    """Add a zero-mean Gaussian error to ``true_m``.

    Negative ranges are clamped to zero; when ``diagnostics`` is given its
    ``"range_clamped"`` counter is incremented on each clamp.
    """
    err = _matrix_sqrt(noise.covariance) @ rng.standard_normal(2)
    r = true_m.range + err[0]
    if r < 0.0:
        r = 0.0
        if diagnostics is not None:
            diagnostics["range_clamped"] = diagnostics.get("range_clamped", 0) + 1
    return RadarMeasurement(r, true_m.bearing + err[1])
