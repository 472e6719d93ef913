"""Target dynamics, sensor models, and moment-propagation kernels.

State convention: x = [px, vx, py, vy] (meters, meters/second).  Two sensor
families are supported: a linear position sensor z = H x + v with
H = [[1,0,0,0],[0,0,1,0]], and a range-bearing sensor

    z = [ sqrt(dx^2 + dy^2), atan2(dx, dy) ] + v,   d* = target - sensor,

whose bearing is measured from the +y axis; atan2 gives full-circle
coverage.  The unscented kernel pushes a symmetric sigma set (alpha=1,
beta=0, kappa=3-d) through the range-bearing map and wraps every bearing
residual into (-pi, pi].

Update kernels are precomputed per mixture (gain, innovation covariance,
posterior covariance) and then applied to each measurement, since for a
fixed sensor those quantities do not depend on z.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gm import DegenerateCovarianceError, _LOG_2PI, _symmetrize

H_POSITION = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
H_POSITION.setflags(write=False)

LINEAR = "linear"
RANGE_BEARING = "range_bearing"


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    return np.arctan2(np.sin(a), np.cos(a))


@dataclass(frozen=True)
class MotionModel:
    """Constant-velocity dynamics: transition F, process noise Q, survival, step."""

    transition: np.ndarray
    process_noise: np.ndarray
    survival: float
    step: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        object.__setattr__(self, "process_noise", _symmetrize(self.process_noise))
        if not 0.0 <= self.survival <= 1.0:
            raise ValueError(f"survival probability {self.survival} outside [0, 1]")


def make_cv_model(step: float = 1.0, survival: float = 0.95, noise_intensity: float = 25.0) -> MotionModel:
    """Planar constant-velocity model F = I2 (x) [[1, dt], [0, 1]].

    Q = noise_intensity * I2 (x) [[dt^2/2, dt/2], [dt/2, dt]].
    """
    dt = float(step)
    F = np.kron(np.eye(2), np.array([[1.0, dt], [0.0, 1.0]]))
    Q = noise_intensity * np.kron(np.eye(2), np.array([[dt * dt / 2.0, dt / 2.0], [dt / 2.0, dt]]))
    return MotionModel(transition=F, process_noise=Q, survival=survival, step=dt)


@dataclass(frozen=True)
class SensorModel:
    """One sensor: detection probability, measurement model, clutter, field of view.

    fov is (xmin, xmax, ymin, ymax) for a linear sensor and a disk radius
    (meters, centered at the sensor position) for a range-bearing sensor.
    Clutter is uniform over the measurement region with Poisson rate
    clutter_rate per scan.
    """

    kind: str
    detection: float
    noise_cov: np.ndarray
    clutter_rate: float
    fov: tuple
    position: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (LINEAR, RANGE_BEARING):
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        if not 0.0 <= self.detection <= 1.0:
            raise ValueError(f"detection probability {self.detection} outside [0, 1]")
        if self.clutter_rate < 0:
            raise ValueError("clutter rate must be >= 0")
        object.__setattr__(self, "noise_cov", _symmetrize(self.noise_cov))
        if self.kind == RANGE_BEARING:
            if self.position is None:
                raise ValueError("range-bearing sensor needs a position")
            object.__setattr__(
                self, "position", np.asarray(self.position, dtype=float).reshape(2)
            )

    @property
    def fov_radius(self) -> float:
        if self.kind != RANGE_BEARING:
            raise ValueError("fov_radius only defined for range-bearing sensors")
        return float(self.fov if np.isscalar(self.fov) else self.fov[0])

    def region_volume(self) -> float:
        """Volume of the measurement region the clutter is uniform over."""
        if self.kind == LINEAR:
            xmin, xmax, ymin, ymax = self.fov
            return (xmax - xmin) * (ymax - ymin)
        return self.fov_radius * 2.0 * np.pi


def make_linear_sensor(
    noise_std: float = 10.0,
    detection: float = 0.9,
    clutter_rate: float = 10.0,
    fov=(-1000.0, 1000.0, -1000.0, 1000.0),
) -> SensorModel:
    R = np.diag([noise_std**2, noise_std**2])
    return SensorModel(LINEAR, detection, R, clutter_rate, tuple(fov))


def make_range_bearing_sensor(
    position,
    range_std: float = 10.0,
    bearing_std: float = np.pi / 90.0,
    detection: float = 0.9,
    clutter_rate: float = 10.0,
    fov_radius: float = 2000.0,
) -> SensorModel:
    R = np.diag([range_std**2, bearing_std**2])
    return SensorModel(RANGE_BEARING, detection, R, clutter_rate, (fov_radius,), np.asarray(position))


@dataclass(frozen=True)
class BirthModel:
    """Birth sites as (weight, mean, cov) triples.

    kind 'mb_birth' reads weights as per-site existence probabilities;
    'poisson_birth' reads them as intensity masses.  The PHD filter uses the
    first moment either way, so one site list serves heterogeneous filters.
    """

    kind: str
    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("mb_birth", "poisson_birth"):
            raise ValueError(f"unknown birth kind {self.kind!r}")
        comps = []
        for w, mu, P in self.components:
            if self.kind == "mb_birth" and not 0.0 <= w <= 1.0:
                raise ValueError(f"birth existence {w} outside [0, 1]")
            comps.append((float(w), np.asarray(mu, dtype=float).reshape(-1), _symmetrize(P)))
        object.__setattr__(self, "components", tuple(comps))


def make_mb_birth(sites, existence: float = 0.03, std=(10.0, 10.0, 10.0, 10.0)) -> BirthModel:
    """Birth sites given as planar (x, y) points or full state vectors."""
    cov = np.diag(np.square(np.asarray(std, dtype=float)))
    means = []
    for s in sites:
        s = np.asarray(s, dtype=float).reshape(-1)
        means.append(np.array([s[0], 0.0, s[1], 0.0]) if s.size == 2 else s)
    comps = tuple((existence, mu, cov) for mu in means)
    return BirthModel("mb_birth", comps)


def cv_predict(mean, covariance, model: MotionModel):
    """One Chapman-Kolmogorov step: (F mu, F Sigma F' + Q)."""
    F, Q = model.transition, model.process_noise
    mean = np.asarray(mean, dtype=float)
    covariance = np.asarray(covariance, dtype=float)
    return F @ mean, _symmetrize(F @ covariance @ F.T + Q)


def cv_predict_batch(means, covs, model: MotionModel):
    """cv_predict over stacked components: means (J, d), covs (J, d, d)."""
    F, Q = model.transition, model.process_noise
    new_means = means @ F.T
    new_covs = np.einsum("ab,jbc,dc->jad", F, covs, F) + Q
    return new_means, 0.5 * (new_covs + np.swapaxes(new_covs, -1, -2))


def range_bearing(x, sensor: SensorModel) -> np.ndarray:
    """Range and bearing (from +y axis) of a state seen from the sensor."""
    if sensor.kind != RANGE_BEARING:
        raise ValueError("sensor is not range-bearing")
    x = np.asarray(x, dtype=float)
    dx = x[0] - sensor.position[0]
    dy = x[2] - sensor.position[1]
    rng = np.hypot(dx, dy)
    if rng == 0.0:
        raise ValueError("target coincides with the sensor; bearing undefined")
    return np.array([rng, np.arctan2(dx, dy)])


def _range_bearing_batch(states, sensor: SensorModel) -> np.ndarray:
    dx = states[..., 0] - sensor.position[0]
    dy = states[..., 2] - sensor.position[1]
    return np.stack([np.hypot(dx, dy), np.arctan2(dx, dy)], axis=-1)


def invert_range_bearing(z, sensor: SensorModel) -> np.ndarray:
    """Planar position whose noiseless range-bearing measurement is z."""
    rng, bearing = float(z[0]), float(z[1])
    return sensor.position + rng * np.array([np.sin(bearing), np.cos(bearing)])


def clutter_intensity(z, sensor: SensorModel) -> float:
    """Uniform clutter density over the sensor's measurement region, else 0."""
    z = np.asarray(z, dtype=float)
    if sensor.kind == LINEAR:
        xmin, xmax, ymin, ymax = sensor.fov
        inside = xmin <= z[0] <= xmax and ymin <= z[1] <= ymax
    else:
        inside = 0.0 <= z[0] <= sensor.fov_radius
    return sensor.clutter_rate / sensor.region_volume() if inside else 0.0


def in_fov(position, sensor: SensorModel) -> bool:
    """Whether a planar position lies inside the sensor's field of view."""
    px, py = float(position[0]), float(position[1])
    if sensor.kind == LINEAR:
        xmin, xmax, ymin, ymax = sensor.fov
        return xmin <= px <= xmax and ymin <= py <= ymax
    return float(np.hypot(px - sensor.position[0], py - sensor.position[1])) <= sensor.fov_radius


class UpdateKernel:
    """Per-component measurement-update quantities shared by all measurements.

    Holds the predicted measurement, innovation covariance (with its
    Cholesky factor), Kalman gain, and posterior covariance for each of J
    components; apply(z) then yields the predictive likelihoods
    q_j(z) = N(z; z_pred_j, S_j) and posterior means.
    """

    def __init__(self, prior_means, prior_covs, z_pred, S, K, post_covs, angular: bool):
        self.prior_means = prior_means
        self.z_pred = z_pred
        self.S = S
        self.K = K
        self.post_covs = post_covs
        self.angular = angular
        try:
            self.S_chol = np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise DegenerateCovarianceError("innovation covariance not positive-definite") from exc
        diag = np.diagonal(self.S_chol, axis1=-2, axis2=-1)
        self._log_norm = 2.0 * np.sum(np.log(diag), axis=-1) + S.shape[-1] * _LOG_2PI

    def innovations(self, zs) -> np.ndarray:
        """Innovations of measurements zs (Z, 2) per component: (J, Z, 2)."""
        nu = np.asarray(zs, dtype=float).reshape(1, -1, 2) - self.z_pred[:, None, :]
        if self.angular:
            nu[..., 1] = wrap_angle(nu[..., 1])
        return nu

    def _quad(self, nu) -> np.ndarray:
        a = self.S[:, None, 0, 0]
        b = self.S[:, None, 0, 1]
        c = self.S[:, None, 1, 1]
        det = a * c - b * b
        x, y = nu[..., 0], nu[..., 1]
        return (c * x * x - 2.0 * b * x * y + a * y * y) / det

    def apply_all(self, zs):
        """Likelihoods q (J, Z) and posterior means (J, Z, d) for all measurements."""
        nu = self.innovations(zs)
        q = np.exp(-0.5 * (self._quad(nu) + self._log_norm[:, None]))
        post_means = self.prior_means[:, None, :] + np.einsum("jde,jze->jzd", self.K, nu)
        return q, post_means

    def apply(self, z):
        """Predictive likelihoods and posterior means for one measurement."""
        q, post_means = self.apply_all(np.asarray(z, dtype=float)[None, :])
        return q[:, 0], post_means[:, 0, :]

    def gate_sq_mahalanobis(self, z) -> np.ndarray:
        """Squared Mahalanobis distance of z to each predicted measurement."""
        return self._quad(self.innovations(np.asarray(z, dtype=float)[None, :]))[:, 0]


def kalman_kernel(means, covs, sensor: SensorModel) -> UpdateKernel:
    """Linear Kalman update kernel for stacked components."""
    if sensor.kind != LINEAR:
        raise ValueError("sensor is not linear")
    H, R = H_POSITION, sensor.noise_cov
    means = np.atleast_2d(np.asarray(means, dtype=float))
    covs = np.asarray(covs, dtype=float).reshape(means.shape[0], means.shape[1], means.shape[1])
    z_pred = means @ H.T
    PHt = np.einsum("jab,cb->jac", covs, H)
    S = np.einsum("ab,jbc->jac", H, PHt) + R
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    K = np.swapaxes(np.linalg.solve(S, np.swapaxes(PHt, -1, -2)), -1, -2)
    post_covs = covs - np.einsum("jab,jbc,jdc->jad", K, S, K)
    post_covs = 0.5 * (post_covs + np.swapaxes(post_covs, -1, -2))
    return UpdateKernel(means, covs, z_pred, S, K, post_covs, angular=False)


def _sigma_points_batch(means, covs, alpha: float = 1.0, kappa: float | None = None):
    """Symmetric sigma set per component: (J, 2d+1, d) points and weights."""
    J, d = means.shape
    if kappa is None:
        kappa = 3.0 - d
    lam = alpha * alpha * (d + kappa) - d
    scale = d + lam
    try:
        L = np.linalg.cholesky(scale * covs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError("prior covariance not positive-definite") from exc
    pts = np.empty((J, 2 * d + 1, d))
    pts[:, 0] = means
    pts[:, 1 : d + 1] = means[:, None, :] + np.swapaxes(L, -1, -2)
    pts[:, d + 1 :] = means[:, None, :] - np.swapaxes(L, -1, -2)
    wm = np.full(2 * d + 1, 1.0 / (2.0 * scale))
    wm[0] = lam / scale
    return pts, wm


def unscented_kernel(means, covs, h, R, angular: bool) -> UpdateKernel:
    """Unscented update kernel for stacked components through h (batched)."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    covs = np.asarray(covs, dtype=float).reshape(means.shape[0], means.shape[1], means.shape[1])
    pts, wm = _sigma_points_batch(means, covs)
    Z = h(pts)
    if angular:
        # align all sigma bearings to the central point's branch before averaging
        Z[..., 1] = Z[:, :1, 1] + wrap_angle(Z[..., 1] - Z[:, :1, 1])
    z_pred = np.einsum("s,jsz->jz", wm, Z)
    rz = Z - z_pred[:, None, :]
    if angular:
        rz[..., 1] = wrap_angle(rz[..., 1])
    rx = pts - means[:, None, :]
    S = np.einsum("s,jsa,jsb->jab", wm, rz, rz) + R
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    C = np.einsum("s,jsa,jsb->jab", wm, rx, rz)
    K = np.swapaxes(np.linalg.solve(S, np.swapaxes(C, -1, -2)), -1, -2)
    post_covs = covs - np.einsum("jab,jbc,jdc->jad", K, S, K)
    post_covs = 0.5 * (post_covs + np.swapaxes(post_covs, -1, -2))
    return UpdateKernel(means, covs, z_pred, S, K, post_covs, angular=angular)


def ut_kernel(means, covs, sensor: SensorModel) -> UpdateKernel:
    if sensor.kind != RANGE_BEARING:
        raise ValueError("sensor is not range-bearing")
    return unscented_kernel(
        means, covs, lambda pts: _range_bearing_batch(pts, sensor), sensor.noise_cov, angular=True
    )


def measurement_kernel(means, covs, sensor: SensorModel) -> UpdateKernel:
    return kalman_kernel(means, covs, sensor) if sensor.kind == LINEAR else ut_kernel(means, covs, sensor)


def linear_update(mean, covariance, z, sensor: SensorModel):
    """Single-component Kalman update: (posterior mean, cov, likelihood q(z))."""
    kern = kalman_kernel(np.asarray(mean)[None, :], np.asarray(covariance)[None, :, :], sensor)
    q, post_means = kern.apply(z)
    return post_means[0], kern.post_covs[0], float(q[0])


def ut_update(mean, covariance, z, sensor: SensorModel):
    """Single-component unscented update through the range-bearing map."""
    kern = ut_kernel(np.asarray(mean)[None, :], np.asarray(covariance)[None, :, :], sensor)
    q, post_means = kern.apply(z)
    return post_means[0], kern.post_covs[0], float(q[0])
