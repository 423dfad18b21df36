"""scikit-learn style wrapper around the range/bearing EKF.

Rows of ``X`` are time-ordered radar fixes::

    [range_m, bearing_rad, observer_x_m, observer_y_m]

The first row initialises the track; every later row is one
predict/update cycle.  ``transform`` returns the filtered 6-dim states and
``predict`` the filtered positions, so the filter can sit at the end of a
``Pipeline`` or be tuned with ``GridSearchCV`` via ``score``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fusion import initial_filter_state, predict, update
from .kinematics import ObserverPose
from .measurement import MeasurementNoise, ProcessNoise, RadarMeasurement

N_FEATURES = 4


class RangeBearingEKF(TransformerMixin, BaseEstimator):
    """Constant-acceleration EKF over a sequence of radar fixes.

    Parameters
    ----------
    dt : float
        Time between consecutive rows, seconds.
    measurement_var : tuple of 2 floats
        Radar range (m^2) and bearing (rad^2) error variances.
    process_var : tuple of 6 floats
        Uncertainty injected at each prediction, in state order
        ``x, y, vx, vy, ax, ay``.
    velocity_var, acceleration_var : float
        Initial variance of the (zero) velocity and acceleration guess.
    joseph : bool
        Use the Joseph-form covariance update.
    """

    def __init__(
        self,
        dt=0.8,
        measurement_var=(10.0, 0.01),
        process_var=(10.0, 10.0, 1.0, 1.0, 0.1, 0.1),
        velocity_var=625.0,
        acceleration_var=1.0,
        joseph=False,
    ):
        self.dt = dt
        self.measurement_var = measurement_var
        self.process_var = process_var
        self.velocity_var = velocity_var
        self.acceleration_var = acceleration_var
        self.joseph = joseph

    def _validate(self, X):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        if X.shape[1] != N_FEATURES:
            raise ValueError(f"X must have {N_FEATURES} columns (range, bearing, x0, y0), got {X.shape[1]}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        return X

    def _filter(self, X):
        R = MeasurementNoise(np.diag(self.measurement_var))
        Q = ProcessNoise(np.diag(self.process_var))
        states = np.empty((len(X), 6))
        covs = np.empty((len(X), 6, 6))
        f = None
        for i, (rng_m, bearing, x0, y0) in enumerate(X):
            pose = ObserverPose(x0, y0)
            m = RadarMeasurement(rng_m, bearing)
            if f is None:
                f = initial_filter_state(pose, m, R, self.velocity_var, self.acceleration_var)
            else:
                f = predict(f, self.dt, Q)
                f = update(f, m, R, pose, joseph=self.joseph)
            states[i], covs[i] = f.estimate, f.covariance
        return states, covs

    def fit(self, X, y=None):
        X = self._validate(X)
        self.n_features_in_ = X.shape[1]
        self.states_, self.covariances_ = self._filter(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "states_")
        return self._filter(self._validate(X))[0]

    def predict(self, X):
        return self.transform(X)[:, :2]

    def score(self, X, y):
        """Negative mean squared position error against true positions ``y``."""
        y = check_array(y, dtype=np.float64)
        err = self.predict(X) - y
        return -float(np.mean(np.sum(err * err, axis=1)))


def sequence_from_record(ranges, bearings, observer_xy) -> np.ndarray:
    """Stack fixes and observer positions into the ``X`` layout."""
    observer_xy = np.asarray(observer_xy, dtype=float)
    return np.column_stack([ranges, bearings, observer_xy[:, 0], observer_xy[:, 1]])
