"""The additivity test statistic, its scaling constants, and the p-value.

The statistic integrates the square of a kernel-smoothed weighted
residual field over the support of the indicator weight.  The centering
constant scales the weighted residual variance by the squared L2 norm of
the smoothing kernel; the scaling constant pairs the squared variance
with the squared-self-convolution integral.  Under the additive null the
standardized statistic is asymptotically standard normal, and the
reported p-value is the upper normal tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .additive import AdditiveFit, EvaluationRegion
from .errors import DensityFloorHit, GridTooCoarse, NonpositiveVariance
from .kernels import KernelConstants, ProductKernel
from .quad import GridSpec
from .smoothing import DENSITY_FLOOR, DensityEstimate, InternalSmoother, PsiSpec, _chunks
from .survival import CensoredSample, StepSurvival, ipcw_responses


@dataclass(frozen=True)
class ResidualVector:
    """Weighted residuals: IPCW response minus the additive fit at each point."""

    eps_star: np.ndarray

    def __post_init__(self):
        eps = np.asarray(self.eps_star, dtype=float).ravel()
        if not np.all(np.isfinite(eps)):
            raise ValueError("residuals must be finite")
        object.__setattr__(self, "eps_star", eps)

    def __len__(self) -> int:
        return self.eps_star.size


@dataclass(frozen=True)
class VarianceEstimates:
    """Centering and scaling constants with the variance curve behind them."""

    sigma0_sq_curve: np.ndarray
    B_hat: float
    V_hat: float
    mode: str

    def __post_init__(self):
        if self.mode not in ("plugin", "oracle"):
            raise ValueError(f"unknown variance mode {self.mode!r}")
        if self.V_hat <= 0:
            raise NonpositiveVariance(f"V_hat = {self.V_hat} is not positive")


@dataclass(frozen=True)
class TestReport:
    """Result of the additivity test with full provenance of tuning choices."""

    t_n_star: float
    ell_n: float
    n: int
    B_hat: float
    V_hat: float
    z: float
    p_value: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t_n_star < 0:
            raise ValueError("the test statistic cannot be negative")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "t_n_star": self.t_n_star,
            "ell_n": self.ell_n,
            "n": self.n,
            "B_hat": self.B_hat,
            "V_hat": self.V_hat,
            "z": self.z,
            "p_value": self.p_value,
            "provenance": self.provenance,
        }


def residuals(sample: CensoredSample, psi: PsiSpec, g_n: StepSurvival,
              fit: AdditiveFit) -> ResidualVector:
    """Weighted residuals of the additive fit at the sample points."""
    r = ipcw_responses(sample, g_n, psi)
    return ResidualVector(r - fit(sample.x))


def _field_coefficients(resid: np.ndarray, fhat_i: np.ndarray):
    low = fhat_i < DENSITY_FLOOR
    coef = np.zeros_like(resid)
    coef[~low] = resid[~low] / fhat_i[~low]
    return coef, low


def _tn_on_grid(x: np.ndarray, coef: np.ndarray, low: np.ndarray,
                kernel_l: ProductKernel, ell_n: float,
                points: np.ndarray, weights: np.ndarray) -> float:
    n, d = x.shape
    scale = 1.0 / (n * ell_n**d)
    total = 0.0
    for sl in _chunks(points.shape[0], n):
        diffs = (points[sl, None, :] - x[None, :, :]) / ell_n
        kmat = kernel_l(diffs.reshape(-1, d)).reshape(sl.stop - sl.start, n)
        if low.any():
            touched = np.any(kmat[:, low] != 0.0, axis=0)
            if touched.any():
                raise DensityFloorHit(np.flatnonzero(low)[touched])
        field_vals = scale * (kmat @ coef)
        total += float(np.sum(weights[sl] * field_vals**2))
    return total


def test_statistic(sample: CensoredSample, resid: ResidualVector | np.ndarray,
                   f_hat: DensityEstimate, kernel_l: ProductKernel, ell_n: float,
                   region: EvaluationRegion, grid_spec: GridSpec | None = None) -> float:
    """Integrated squared smoothed-residual field over the weight support.

    The outer integral uses a tensor rule over the indicator support from
    ``grid_spec``.  With ``check_refinement`` set, doubling the grid
    resolution must change the value by at most 1e-6 relative, otherwise
    ``GridTooCoarse`` is raised.
    """
    if grid_spec is None:
        grid_spec = GridSpec()
    if ell_n <= 0:
        raise ValueError("ell_n must be positive")
    eps = resid.eps_star if isinstance(resid, ResidualVector) else np.asarray(resid, float)
    coef, low = _field_coefficients(eps, f_hat.at_sample())

    points, weights = region.g_grid(grid_spec)
    value = _tn_on_grid(sample.x, coef, low, kernel_l, ell_n, points, weights)
    if grid_spec.check_refinement:
        fine_pts, fine_w = region.g_grid(grid_spec.refined())
        fine = _tn_on_grid(sample.x, coef, low, kernel_l, ell_n, fine_pts, fine_w)
        if abs(fine - value) > 1e-6 * max(abs(fine), 1e-300):
            raise GridTooCoarse(
                f"statistic moved by more than 1e-6 relative when doubling "
                f"{grid_spec.nodes} grid nodes per axis"
            )
    return value


def estimate_sigma0_sq(sample: CensoredSample, resid: ResidualVector | np.ndarray,
                       k3: ProductKernel, h_1n: float,
                       f_hat: DensityEstimate) -> InternalSmoother:
    """Conditional residual-variance estimate: smooth of the squared residuals.

    Reuses the full-dimensional regression weights, so the returned
    object can be evaluated anywhere the smoother can.
    """
    eps = resid.eps_star if isinstance(resid, ResidualVector) else np.asarray(resid, float)
    return InternalSmoother(sample.x, eps**2, f_hat.at_sample(), k3, h_1n)


def plugin_b_v(sigma0_sq, f, region: EvaluationRegion, constants: KernelConstants,
               grid_spec: GridSpec | None = None, mode: str = "plugin") -> VarianceEstimates:
    """Centering and scaling constants by quadrature over the weight support.

    ``sigma0_sq`` and ``f`` are callables on points (the plug-in variance
    smoother and density estimate, or analytic truths in oracle mode).
    Raises ``DensityFloorHit`` if the density drops to the floor on the
    weight support and ``NonpositiveVariance`` if the scaling constant is
    not positive.
    """
    if grid_spec is None:
        grid_spec = GridSpec()
    points, weights = region.g_grid(grid_spec)
    s_vals = np.asarray(sigma0_sq(points), dtype=float)
    f_vals = np.asarray(f(points), dtype=float)
    bad = f_vals < DENSITY_FLOOR
    if bad.any():
        raise DensityFloorHit(
            np.flatnonzero(bad),
            message=f"density estimate below floor at {int(bad.sum())} quadrature points "
                    "inside the weight support",
        )
    b_hat = float(np.sum(weights * s_vals / f_vals)) * constants.l2_norm_sq
    v_hat = 2.0 * float(np.sum(weights * s_vals**2 / f_vals**2)) * constants.conv_sq_integral
    if v_hat <= 0:
        raise NonpositiveVariance(f"V_hat = {v_hat} is not positive")
    return VarianceEstimates(sigma0_sq_curve=s_vals, B_hat=b_hat, V_hat=v_hat, mode=mode)


def standardize(t_n_star: float, b_hat: float, v_hat: float, n: int, d: int,
                ell_n: float, provenance: dict | None = None) -> TestReport:
    """Standardize the statistic and attach the upper-tail normal p-value."""
    if v_hat <= 0:
        raise NonpositiveVariance(f"V_hat = {v_hat} is not positive")
    half_pow = ell_n ** (d / 2.0)
    z = (n * half_pow * t_n_star - b_hat / half_pow) / np.sqrt(v_hat)
    p_value = float(stats.norm.sf(z))
    return TestReport(
        t_n_star=float(t_n_star),
        ell_n=float(ell_n),
        n=int(n),
        B_hat=float(b_hat),
        V_hat=float(v_hat),
        z=float(z),
        p_value=p_value,
        provenance=provenance or {},
    )
