"""Kernel density estimation and the weighted regression smoothers.

Both regression estimators are "internal" Nadaraya-Watson smoothers: the
kernel weight at each sample point is normalized by the density estimate
at that point rather than by the sum of kernel weights.  Density values
below ``DENSITY_FLOOR`` at sample points that would actually contribute
raise ``DensityFloorHit`` instead of being clamped, since they signal
evaluation outside the region where the design density is bounded away
from zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AxisOutOfRange, DensityFloorHit
from .kernels import Kernel1D, ProductKernel
from .survival import CensoredSample

DENSITY_FLOOR = 1e-12

PSI_FORMS = ("identity_truncated", "indicator_below", "identity")

_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class PsiSpec:
    """Transformation applied to the follow-up times.

    ``identity_truncated`` is y * 1{y <= tau0}, ``indicator_below`` is
    1{y <= tau0}, ``identity`` is y itself; the truncated forms vanish
    beyond ``tau0``.  ``bound`` is a sup-norm bound used by the assumption
    checks (derived automatically for the truncated forms).  ``scale``
    multiplies the transformation.
    """

    form: str = "identity_truncated"
    tau0: float | None = None
    bound: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.form not in PSI_FORMS:
            raise ValueError(f"unknown psi form {self.form!r}; choose from {PSI_FORMS}")
        if self.form in ("identity_truncated", "indicator_below"):
            if self.tau0 is None:
                raise ValueError(f"psi form {self.form!r} requires tau0")
            if self.tau0 <= 0:
                raise ValueError("tau0 must be positive")
        if self.scale == 0:
            raise ValueError("scale must be nonzero")
        if self.bound is None:
            derived = None
            if self.form == "identity_truncated":
                derived = abs(self.scale) * self.tau0
            elif self.form == "indicator_below":
                derived = abs(self.scale)
            object.__setattr__(self, "bound", derived)
        elif self.bound <= 0:
            raise ValueError("bound must be positive")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.form == "identity":
            vals = y
        elif self.form == "identity_truncated":
            vals = np.where(y <= self.tau0, y, 0.0)
        else:
            vals = (y <= self.tau0).astype(float)
        return self.scale * vals

    def scaled(self, factor: float) -> "PsiSpec":
        bound = None if self.bound is None else abs(factor) * self.bound
        return PsiSpec(self.form, self.tau0, bound, self.scale * factor)


def _chunks(total: int, per_row: int):
    rows = max(1, _CHUNK_ELEMENTS // max(per_row, 1))
    for start in range(0, total, rows):
        yield slice(start, min(start + rows, total))


def _as_points(points, d: int):
    points = np.asarray(points, dtype=float)
    scalar = points.ndim == 1
    points = np.atleast_2d(points)
    if points.shape[1] != d:
        raise ValueError(f"points have {points.shape[1]} coordinates, expected {d}")
    return points, scalar


class DensityEstimate:
    """Kernel estimate of the covariate density.

    The estimate at x averages ``K((X_j - x) / h)`` over the sample and
    divides by ``h**d``.  With a higher-order kernel the estimate can be
    negative at isolated points; this is flagged by ``may_be_negative``
    and never clipped.
    """

    def __init__(self, sample: CensoredSample, kernel: ProductKernel, bandwidth: float):
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if kernel.dim != sample.d:
            raise ValueError("kernel dimension must match the sample")
        self.sample = sample
        self.kernel = kernel
        self.bandwidth = float(bandwidth)
        self.may_be_negative = not kernel.nonnegative
        self._at_sample = None

    def evaluate(self, points) -> np.ndarray:
        points, scalar = _as_points(points, self.sample.d)
        x = self.sample.x
        n = self.sample.n
        scale = 1.0 / (n * self.bandwidth**self.sample.d)
        out = np.empty(points.shape[0])
        for sl in _chunks(points.shape[0], n):
            diffs = (x[None, :, :] - points[sl, None, :]) / self.bandwidth
            out[sl] = self.kernel(diffs.reshape(-1, self.sample.d)).reshape(
                sl.stop - sl.start, n
            ).sum(axis=1) * scale
        return out[0] if scalar else out

    __call__ = evaluate

    def at_sample(self) -> np.ndarray:
        """Density values at the sample points themselves (cached)."""
        if self._at_sample is None:
            self._at_sample = self.evaluate(self.sample.x)
        return self._at_sample


def density_estimate(sample: CensoredSample, kernel: ProductKernel,
                     bandwidth: float) -> DensityEstimate:
    return DensityEstimate(sample, kernel, bandwidth)


def _floor_guard(weights: np.ndarray, low: np.ndarray):
    # `weights` is (points, n); complain about low-density sample points
    # only when they would actually contribute.
    if not low.any():
        return
    touched = np.any(weights[:, low] != 0.0, axis=0)
    if touched.any():
        raise DensityFloorHit(np.flatnonzero(low)[touched])


class InternalSmoother:
    """Weighted regression smoother with full-dimensional kernel weights.

    The weight of sample point i at x is
    ``K((x - X_i) / h) / (n h^d fhat_i)``; responses are combined
    linearly with these weights.
    """

    def __init__(self, x: np.ndarray, responses: np.ndarray, fhat_at_sample: np.ndarray,
                 kernel: ProductKernel, bandwidth: float, floor: float = DENSITY_FLOOR):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if kernel.dim != x.shape[1]:
            raise ValueError("kernel dimension must match the covariates")
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        self.x = x
        self.responses = np.asarray(responses, dtype=float).ravel()
        self.fhat_at_sample = np.asarray(fhat_at_sample, dtype=float).ravel()
        self.kernel = kernel
        self.bandwidth = float(bandwidth)
        self.floor = float(floor)
        n, d = x.shape
        self.low = self.fhat_at_sample < self.floor
        coef = np.zeros(n)
        ok = ~self.low
        coef[ok] = self.responses[ok] / (n * bandwidth**d * self.fhat_at_sample[ok])
        self._coef = coef

    def evaluate(self, points) -> np.ndarray:
        points, scalar = _as_points(points, self.x.shape[1])
        n, d = self.x.shape
        out = np.empty(points.shape[0])
        for sl in _chunks(points.shape[0], n):
            diffs = (points[sl, None, :] - self.x[None, :, :]) / self.bandwidth
            weights = self.kernel(diffs.reshape(-1, d)).reshape(sl.stop - sl.start, n)
            _floor_guard(weights, self.low)
            out[sl] = weights @ self._coef
        return out[0] if scalar else out

    __call__ = evaluate


class DirectionalSmoother:
    """Regression smoother with anisotropic weights for one component axis.

    The weight of sample point i at x multiplies a univariate kernel in
    coordinate ``axis`` at bandwidth ``h1`` with a (d-1)-dimensional
    product kernel in the remaining coordinates at bandwidth ``h2``,
    normalized by ``n * h1 * h2**(d-1) * fhat_i``.
    """

    def __init__(self, x: np.ndarray, responses: np.ndarray, fhat_at_sample: np.ndarray,
                 k1: Kernel1D, k2: ProductKernel, h1: float, h2: float, axis: int,
                 floor: float = DENSITY_FLOOR):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, d = x.shape
        if not 0 <= axis < d:
            raise AxisOutOfRange(f"axis {axis} out of range for dimension {d}")
        if k2.dim != d - 1:
            raise ValueError("nuisance kernel must have dimension d - 1")
        if h1 <= 0 or h2 <= 0:
            raise ValueError("bandwidths must be positive")
        self.x = x
        self.responses = np.asarray(responses, dtype=float).ravel()
        self.fhat_at_sample = np.asarray(fhat_at_sample, dtype=float).ravel()
        self.k1 = k1
        self.k2 = k2
        self.h1 = float(h1)
        self.h2 = float(h2)
        self.axis = int(axis)
        self.floor = float(floor)
        self.low = self.fhat_at_sample < self.floor
        coef = np.zeros(n)
        ok = ~self.low
        coef[ok] = self.responses[ok] / (
            n * self.h1 * self.h2 ** (d - 1) * self.fhat_at_sample[ok]
        )
        self._coef = coef
        self._rest = [j for j in range(d) if j != axis]

    def rest_factor(self, j: int) -> Kernel1D:
        """Univariate factor of the nuisance kernel acting on coordinate j."""
        return self.k2.factors[self._rest.index(j)]

    def weights_at(self, points) -> np.ndarray:
        points, _ = _as_points(points, self.x.shape[1])
        w = self.k1((points[:, None, self.axis] - self.x[None, :, self.axis]) / self.h1)
        for j in self._rest:
            w = w * self.rest_factor(j)(
                (points[:, None, j] - self.x[None, :, j]) / self.h2
            )
        return w

    def evaluate(self, points) -> np.ndarray:
        points, scalar = _as_points(points, self.x.shape[1])
        n = self.x.shape[0]
        out = np.empty(points.shape[0])
        for sl in _chunks(points.shape[0], n):
            w = self.weights_at(points[sl])
            _floor_guard(w, self.low)
            out[sl] = w @ self._coef
        return out[0] if scalar else out

    __call__ = evaluate


def nw_full(sample: CensoredSample, responses: np.ndarray, f_hat: DensityEstimate,
            k3: ProductKernel, h1: float, points) -> np.ndarray:
    """Full-dimensional weighted regression estimate at the given points."""
    smoother = InternalSmoother(sample.x, responses, f_hat.at_sample(), k3, h1)
    return smoother.evaluate(points)


def nw_directional(sample: CensoredSample, responses: np.ndarray, f_hat: DensityEstimate,
                   k1: Kernel1D, k2: ProductKernel, h1: float, h2: float,
                   axis: int, points) -> np.ndarray:
    """Directional weighted regression estimate at the given points."""
    smoother = DirectionalSmoother(
        sample.x, responses, f_hat.at_sample(), k1, k2, h1, h2, axis
    )
    return smoother.evaluate(points)
