"""Additive components by marginal integration and the additive fit.

Each component curve is obtained by integrating the directional smoother
against product weight densities: integrating out the nuisance
coordinates gives the raw curve, and subtracting its own integral against
the axis density centers it.  Because the smoother weights and the
weight densities are products across coordinates, every tensor-product
quadrature here factors into per-axis one-dimensional sums, which is what
the implementation computes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DensityFloorHit, GridTooCoarse
from .kernels import Kernel1D, KernelSet
from .quad import GridSpec, axis_rule, tensor_rule
from .smoothing import (
    DENSITY_FLOOR,
    DensityEstimate,
    DirectionalSmoother,
    PsiSpec,
    density_estimate,
)
from .survival import CensoredSample, StepSurvival, ipcw_responses, kaplan_meier_censoring

DEFAULT_CURVE_POINTS = 101


@dataclass(frozen=True)
class DensitySpec:
    """A univariate weight density on a compact interval.

    ``pdf`` may be omitted for the uniform density on the support.
    """

    name: str
    support: tuple[float, float]
    pdf: Callable | None = None

    def __post_init__(self):
        lo, hi = self.support
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise ValueError("support must be a finite interval of positive length")
        object.__setattr__(self, "support", (float(lo), float(hi)))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.support
        inside = (u >= lo) & (u <= hi)
        if self.pdf is None:
            return np.where(inside, 1.0 / (hi - lo), 0.0)
        return np.where(inside, self.pdf(u), 0.0)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "DensitySpec":
        return cls(name="uniform", support=(lo, hi))


class IntegrationDensities:
    """One weight density per coordinate, with product evaluators."""

    def __init__(self, specs):
        self.specs = tuple(specs)
        if not self.specs:
            raise ValueError("at least one density is required")
        for j, spec in enumerate(self.specs):
            if spec.pdf is not None:
                pts, wts = axis_rule(*spec.support, GridSpec(nodes=2048, rule="midpoint"))
                mass = float(np.sum(wts * spec(pts)))
                if abs(mass - 1.0) > 1e-8:
                    raise ValueError(
                        f"density {spec.name!r} on axis {j} integrates to {mass}, not 1"
                    )

    @property
    def d(self) -> int:
        return len(self.specs)

    def support(self, axis: int) -> tuple[float, float]:
        return self.specs[axis].support

    def q(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(points.shape[0])
        for j, spec in enumerate(self.specs):
            out *= spec(points[:, j])
        return out

    def q_minus(self, axis: int, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        rest = [j for j in range(self.d) if j != axis]
        out = np.ones(points.shape[0])
        for col, j in enumerate(rest):
            out *= self.specs[j](points[:, col])
        return out

    @classmethod
    def uniform_on_box(cls, bounds) -> "IntegrationDensities":
        bounds = np.asarray(bounds, dtype=float)
        return cls([DensitySpec.uniform(lo, hi) for lo, hi in bounds])


@dataclass(frozen=True)
class EvaluationRegion:
    """Compact evaluation box with an interior indicator weight.

    ``c_bounds`` is the working box (rows are per-axis intervals) on which
    the design density must stay positive within ``margin``; ``g_bounds``
    is the support of the indicator weight and must sit strictly inside
    the working box.
    """

    c_bounds: np.ndarray
    g_bounds: np.ndarray
    margin: float = 0.05

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c_bounds, dtype=float))
        g = np.atleast_2d(np.asarray(self.g_bounds, dtype=float))
        if c.shape != g.shape or c.shape[1] != 2:
            raise ValueError("c_bounds and g_bounds must both be (d, 2) arrays")
        if np.any(c[:, 1] <= c[:, 0]) or np.any(g[:, 1] <= g[:, 0]):
            raise ValueError("region intervals must have positive length")
        if np.any(g[:, 0] <= c[:, 0]) or np.any(g[:, 1] >= c[:, 1]):
            raise ValueError("weight support must lie strictly inside the working box")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        object.__setattr__(self, "c_bounds", c)
        object.__setattr__(self, "g_bounds", g)

    @property
    def d(self) -> int:
        return self.c_bounds.shape[0]

    def g_indicator(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.ones(points.shape[0], dtype=bool)
        for j in range(self.d):
            lo, hi = self.g_bounds[j]
            inside &= (points[:, j] >= lo) & (points[:, j] <= hi)
        return inside.astype(float)

    def g_volume(self) -> float:
        return float(np.prod(self.g_bounds[:, 1] - self.g_bounds[:, 0]))

    def g_grid(self, spec: GridSpec):
        return tensor_rule(self.g_bounds, spec)


@dataclass(frozen=True)
class ComponentCurve:
    """One additive component on a grid, evaluated by linear interpolation."""

    axis: int
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be equal-length vectors (>= 2)")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, u) -> np.ndarray:
        return np.interp(np.asarray(u, dtype=float), self.grid, self.values)

    def integral_against(self, density: DensitySpec) -> float:
        """Integral of the interpolated curve against a weight density.

        This is the canonical rule used both to center components and to
        verify the centering; for a uniform density it is the exact
        integral of the piecewise-linear interpolant.
        """
        if density.pdf is None:
            lo, hi = density.support
            pts = np.union1d(np.clip(self.grid, lo, hi), [lo, hi])
            return float(np.trapezoid(self(pts), pts) / (hi - lo))
        t, w = np.polynomial.legendre.leggauss(8)
        mid = 0.5 * (self.grid[1:] + self.grid[:-1])
        half = 0.5 * np.diff(self.grid)
        pts = mid[:, None] + half[:, None] * t[None, :]
        vals = self(pts.ravel()).reshape(pts.shape) * density(pts.ravel()).reshape(pts.shape)
        return float(np.sum(half * (vals @ w)))


@dataclass(frozen=True)
class AdditiveFit:
    """Fitted additive regression: an intercept plus one curve per axis."""

    mu_hat: float
    components: tuple[ComponentCurve, ...]
    provenance: dict = field(default_factory=dict)

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        scalar = points.ndim == 1
        points = np.atleast_2d(points)
        if points.shape[1] != len(self.components):
            raise ValueError("points must have one coordinate per component")
        out = np.full(points.shape[0], self.mu_hat)
        for curve in self.components:
            out += curve(points[:, curve.axis])
        return out[0] if scalar else out


def _axis_kernel_integrals(x_col: np.ndarray, kernel: Kernel1D, bandwidth: float,
                           nodes: np.ndarray, weights: np.ndarray,
                           dens_vals: np.ndarray) -> np.ndarray:
    # For each sample coordinate: integral of kernel((v - x_i)/h) q(v) dv.
    kmat = kernel((nodes[None, :] - x_col[:, None]) / bandwidth)
    return kmat @ (weights * dens_vals)


def _component_once(smoother: DirectionalSmoother, densities: IntegrationDensities,
                    spec: GridSpec, grid: np.ndarray):
    x = smoother.x
    n, d = x.shape
    axis = smoother.axis

    prod_rest = np.ones(n)
    for j in range(d):
        if j == axis:
            continue
        nodes, wts = axis_rule(*densities.support(j), spec)
        dens = densities.specs[j](nodes)
        prod_rest *= _axis_kernel_integrals(
            x[:, j], smoother.rest_factor(j), smoother.h2, nodes, wts, dens
        )

    k1_mat = smoother.k1((grid[:, None] - x[None, :, axis]) / smoother.h1)

    contributing = (prod_rest != 0.0) & np.any(k1_mat != 0.0, axis=0)
    offenders = contributing & smoother.low
    if offenders.any():
        raise DensityFloorHit(np.flatnonzero(offenders))

    coef = np.zeros(n)
    ok = ~smoother.low
    coef[ok] = (
        smoother.responses[ok]
        * prod_rest[ok]
        / (n * smoother.h1 * smoother.h2 ** (d - 1) * smoother.fhat_at_sample[ok])
    )
    raw = k1_mat @ coef
    centering = ComponentCurve(axis, grid, raw).integral_against(densities.specs[axis])
    return raw - centering


def estimate_component(smoother: DirectionalSmoother, densities: IntegrationDensities,
                       grid_spec: GridSpec | None = None,
                       curve_points: int = DEFAULT_CURVE_POINTS) -> ComponentCurve:
    """Marginal-integration estimate of one additive component.

    Integrates the directional smoother against the product of the
    nuisance-axis densities, then centers the curve so that its integral
    against the own-axis density vanishes.  With ``check_refinement`` set
    on the grid spec, doubling the quadrature resolution must move no
    curve value by more than 1e-4.
    """
    if grid_spec is None:
        grid_spec = GridSpec()
    if densities.d != smoother.x.shape[1]:
        raise ValueError("densities dimension must match the covariates")
    lo, hi = densities.support(smoother.axis)
    grid = np.linspace(lo, hi, curve_points)
    values = _component_once(smoother, densities, grid_spec, grid)
    if grid_spec.check_refinement:
        refined = _component_once(smoother, densities, grid_spec.refined(), grid)
        move = float(np.max(np.abs(refined - values)))
        if move > 1e-4:
            raise GridTooCoarse(
                f"component curve moved by {move:.3g} (> 1e-4) when doubling "
                f"{grid_spec.nodes} quadrature nodes on axis {smoother.axis}"
            )
    return ComponentCurve(smoother.axis, grid, values)


def _mu_once(sample: CensoredSample, responses: np.ndarray, fhat_i: np.ndarray,
             low: np.ndarray, kernels: KernelSet, h1: float,
             densities: IntegrationDensities, spec: GridSpec) -> float:
    n, d = sample.x.shape
    prod_all = np.ones(n)
    for j in range(d):
        nodes, wts = axis_rule(*densities.support(j), spec)
        dens = densities.specs[j](nodes)
        prod_all *= _axis_kernel_integrals(
            sample.x[:, j], kernels.K3.factors[j], h1, nodes, wts, dens
        )
    offenders = (prod_all != 0.0) & low
    if offenders.any():
        raise DensityFloorHit(np.flatnonzero(offenders))
    ok = ~low
    return float(np.sum(responses[ok] * prod_all[ok] / (n * h1**d * fhat_i[ok])))


def additive_fit(sample: CensoredSample, psi: PsiSpec, kernels: KernelSet,
                 bandwidths, densities: IntegrationDensities,
                 grid_spec: GridSpec | None = None,
                 curve_points: int = DEFAULT_CURVE_POINTS,
                 g_n: StepSurvival | None = None,
                 responses: np.ndarray | None = None,
                 f_hat: DensityEstimate | None = None) -> AdditiveFit:
    """Fit the additive regression of the transformed response.

    The intercept is the integral of the full-dimensional smoother
    against the product weight density; components come from
    ``estimate_component`` for each axis.  Precomputed pieces (censoring
    estimate, weighted responses, density estimate) may be supplied to
    share them with the test statistic.
    """
    if grid_spec is None:
        grid_spec = GridSpec()
    d = sample.d
    if kernels.d != d or densities.d != d:
        raise ValueError("kernels and densities must match the sample dimension")
    if g_n is None:
        g_n = kaplan_meier_censoring(sample)
    if responses is None:
        responses = ipcw_responses(sample, g_n, psi)
    if f_hat is None:
        f_hat = density_estimate(sample, kernels.K, bandwidths.h_n)
    fhat_i = f_hat.at_sample()
    low = fhat_i < DENSITY_FLOOR

    mu_hat = _mu_once(sample, responses, fhat_i, low, kernels,
                      bandwidths.h_1n, densities, grid_spec)
    if grid_spec.check_refinement:
        refined = _mu_once(sample, responses, fhat_i, low, kernels,
                           bandwidths.h_1n, densities, grid_spec.refined())
        if abs(refined - mu_hat) > 1e-4:
            raise GridTooCoarse(
                f"intercept moved by {abs(refined - mu_hat):.3g} (> 1e-4) when "
                f"doubling {grid_spec.nodes} quadrature nodes"
            )

    components = []
    for axis in range(d):
        smoother = DirectionalSmoother(
            sample.x, responses, fhat_i, kernels.K1, kernels.K2,
            bandwidths.h_1n, bandwidths.h_2n, axis,
        )
        components.append(
            estimate_component(smoother, densities, grid_spec, curve_points)
        )
    return AdditiveFit(mu_hat=mu_hat, components=tuple(components))
