"""Synthetic censored-regression models and the Monte Carlo harness.

The default model keeps every population quantity analytic: covariates
are uniform on a box, the noise is a truncated normal, and the censoring
time is exponential, so the regression of the transformed response, the
conditional residual variance, and the follow-up survival function are
all one-dimensional quadratures.  These truths feed the oracle mode of
the test and the consistency checks; nothing here estimates them from
data.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, stats

from . import pipeline
from .additive import EvaluationRegion, IntegrationDensities
from .errors import EstimationError
from .kernels import KernelSet, make_kernel_set
from .plan import BandwidthPlan, make_plan
from .quad import GridSpec, tensor_rule
from .smoothing import PsiSpec
from .survival import CensoredSample

_NOISE_QUAD_NODES = 96
_TRUTH_GRID = GridSpec(nodes=48, rule="gauss")


@dataclass(frozen=True)
class TruncatedNormalNoise:
    """Centered normal noise truncated to a symmetric interval."""

    sd: float = 0.5
    halfwidth: float = 1.5

    def __post_init__(self):
        if self.sd <= 0 or self.halfwidth <= 0:
            raise ValueError("sd and halfwidth must be positive")

    @property
    def _mass(self) -> float:
        a = self.halfwidth / self.sd
        return 2.0 * stats.norm.cdf(a) - 1.0

    def pdf(self, e):
        e = np.asarray(e, dtype=float)
        inside = np.abs(e) <= self.halfwidth
        vals = stats.norm.pdf(e / self.sd) / (self.sd * self._mass)
        return np.where(inside, vals, 0.0)

    def cdf(self, e):
        e = np.asarray(e, dtype=float)
        a = self.halfwidth / self.sd
        lo = stats.norm.cdf(-a)
        vals = (stats.norm.cdf(np.clip(e, -self.halfwidth, self.halfwidth) / self.sd) - lo)
        return np.clip(vals / self._mass, 0.0, 1.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        a = self.halfwidth / self.sd
        lo = stats.norm.cdf(-a)
        return self.sd * stats.norm.ppf(lo + u * self._mass)

    @property
    def variance(self) -> float:
        a = self.halfwidth / self.sd
        return self.sd**2 * (1.0 - 2.0 * a * stats.norm.pdf(a) / self._mass)


@dataclass(frozen=True)
class ExponentialCensoring:
    """Exponential censoring time; rate 0 means no censoring at all."""

    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, 1.0, np.exp(-self.rate * t))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.rate == 0.0:
            return np.full_like(u, np.inf)
        return -np.log1p(-u) / self.rate


@dataclass(frozen=True)
class UniformBox:
    """Uniform covariate law on a box, with analytic density and marginals."""

    bounds: np.ndarray

    def __post_init__(self):
        bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if bounds.shape[1] != 2 or np.any(bounds[:, 1] <= bounds[:, 0]):
            raise ValueError("bounds must be (d, 2) with positive lengths")
        object.__setattr__(self, "bounds", bounds)

    @property
    def d(self) -> int:
        return self.bounds.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.bounds[:, 1] - self.bounds[:, 0]))

    def density(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.ones(points.shape[0], dtype=bool)
        for j in range(self.d):
            lo, hi = self.bounds[j]
            inside &= (points[:, j] >= lo) & (points[:, j] <= hi)
        return np.where(inside, 1.0 / self.volume, 0.0)

    def marginal_density(self, axis: int, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = self.bounds[axis]
        return np.where((u >= lo) & (u <= hi), 1.0 / (hi - lo), 0.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, self.d))
        return self.bounds[:, 0] + u * (self.bounds[:, 1] - self.bounds[:, 0])


# Module-level component functions keep the default model picklable for
# process-based replicate workers.

def _ramp(u):
    return np.asarray(u, dtype=float) - 0.5


def _halfsine(u):
    return 0.5 * np.sin(2.0 * math.pi * np.asarray(u, dtype=float))


def _product_interaction(x):
    # Amplitude +-1 over the unit square, so strength 2 injects an
    # interaction comparable to the sum of the additive components.
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return 4.0 * (x[:, 0] - 0.5) * (x[:, 1] - 0.5)


@dataclass(frozen=True)
class TrueModel:
    """Analytic data-generating process for censored additive regression.

    The response is ``mu + sum_l m_l(x_l) + theta * interaction(x) +
    noise``; the follow-up time is its minimum with an independent
    censoring time.  ``theta = 0`` makes the regression surface additive.
    """

    dim: int
    mu: float
    components: tuple[Callable, ...]
    interaction: Callable
    theta: float
    noise: TruncatedNormalNoise
    covariates: UniformBox
    censoring: ExponentialCensoring
    recipe: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.components) != self.dim or self.covariates.d != self.dim:
            raise ValueError("components and covariate law must match the dimension")
        t, w = np.polynomial.legendre.leggauss(256)
        for axis, m_l in enumerate(self.components):
            lo, hi = self.covariates.bounds[axis]
            pts = 0.5 * (hi + lo) + 0.5 * (hi - lo) * t
            wts = 0.5 * (hi - lo) * w
            mean = float(np.sum(wts * m_l(pts) * self.covariates.marginal_density(axis, pts)))
            if abs(mean) > 1e-6:
                raise ValueError(
                    f"component {axis} has mean {mean} under the covariate law; "
                    "components must be centered"
                )

    # ---- regression surfaces ------------------------------------------------

    def m_reg(self, points) -> np.ndarray:
        """Regression of the raw response."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(points.shape[0], self.mu)
        for axis, m_l in enumerate(self.components):
            out += m_l(points[:, axis])
        if self.theta != 0.0:
            out += self.theta * self.interaction(points)
        return out

    def _noise_segments(self, upper: np.ndarray):
        # Gauss-Legendre nodes on [-halfwidth, min(upper, halfwidth)] per row.
        t, w = np.polynomial.legendre.leggauss(_NOISE_QUAD_NODES)
        hw = self.noise.halfwidth
        hi = np.clip(upper, -hw, hw)
        lo = -hw
        mid = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        nodes = mid[:, None] + half[:, None] * t[None, :]
        weights = half[:, None] * w[None, :]
        return nodes, weights

    def m_psi(self, points, psi: PsiSpec) -> np.ndarray:
        """Regression of the transformed response."""
        m = self.m_reg(points)
        if psi.form == "identity":
            return psi.scale * m
        cut = psi.tau0 - m
        nodes, weights = self._noise_segments(cut)
        y = m[:, None] + nodes
        if psi.form == "identity_truncated":
            integrand = y
        else:
            integrand = np.ones_like(y)
        vals = np.sum(weights * integrand * self.noise.pdf(nodes), axis=1)
        return psi.scale * vals

    def sigma0_sq(self, points, psi: PsiSpec) -> np.ndarray:
        """Conditional variance of the weighted residual, analytically."""
        m = self.m_reg(points)
        if psi.form == "identity":
            upper = np.full(m.shape, np.inf)
        else:
            upper = psi.tau0 - m
        nodes, weights = self._noise_segments(upper)
        y = m[:, None] + nodes
        if psi.form == "indicator_below":
            sq = np.ones_like(y)
        else:
            sq = y**2
        g_vals = self.censoring.survival(y)
        second = psi.scale**2 * np.sum(
            weights * sq / g_vals * self.noise.pdf(nodes), axis=1
        )
        return second - self.m_psi(points, psi) ** 2

    # ---- population distributions -------------------------------------------

    def _covariate_quadrature(self):
        points, weights = tensor_rule(self.covariates.bounds, _TRUTH_GRID)
        weights = weights * self.covariates.density(points)
        return points, weights

    def survival_y(self, t) -> np.ndarray:
        """Survival function of the raw response."""
        t = np.asarray(t, dtype=float)
        points, weights = self._covariate_quadrature()
        m = self.m_reg(points)
        tail = 1.0 - self.noise.cdf(np.atleast_1d(t)[:, None] - m[None, :])
        out = tail @ weights
        return out if t.ndim else out[0]

    def survival_z(self, t) -> np.ndarray:
        """Survival function of the follow-up time."""
        return self.survival_y(t) * self.censoring.survival(t)

    def response_range(self) -> tuple[float, float]:
        points, _ = self._covariate_quadrature()
        m = self.m_reg(points)
        return (float(m.min()) - self.noise.halfwidth,
                float(m.max()) + self.noise.halfwidth)

    def z_quantile(self, q: float) -> float:
        """Quantile of the follow-up time, from the analytic survival."""
        if not 0.0 < q < 1.0:
            raise ValueError("quantile level must be in (0, 1)")
        lo, hi = self.response_range()
        lo, hi = lo - 1e-9, hi + 1e-9
        target = 1.0 - q
        if float(self.survival_z(lo)) <= target:
            return lo
        return float(optimize.brentq(
            lambda t: float(self.survival_z(t)) - target, lo, hi, xtol=1e-12
        ))

    def uncensored_probability(self) -> float:
        """Probability that the response is observed rather than censored."""
        points, weights = self._covariate_quadrature()
        m = self.m_reg(points)
        nodes, nw = self._noise_segments(np.full(m.shape, np.inf))
        g_vals = self.censoring.survival(m[:, None] + nodes)
        per_point = np.sum(nw * g_vals * self.noise.pdf(nodes), axis=1)
        return float(np.sum(weights * per_point))

    def additive_truth(self, psi: PsiSpec, densities: IntegrationDensities,
                       curve_points: int = 201):
        """Marginal-integration functional of the true transformed regression.

        Returns the intercept and one curve per axis, computed by
        quadrature from the analytic regression surface; this is the
        estimand of the additive fit whether or not the surface is
        additive.
        """
        from .additive import ComponentCurve  # local import to avoid a cycle

        supports = [densities.support(j) for j in range(densities.d)]
        axis_rules = []
        for lo, hi in supports:
            t, w = np.polynomial.legendre.leggauss(64)
            axis_rules.append((0.5 * (hi + lo) + 0.5 * (hi - lo) * t,
                               0.5 * (hi - lo) * w))

        def q_weights(axis):
            pts, wts = axis_rules[axis]
            return pts, wts * densities.specs[axis](pts)

        # Full integral against the product density.
        grids = [q_weights(j) for j in range(densities.d)]
        mesh = np.meshgrid(*[g[0] for g in grids], indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        wts = np.ones(1)
        for _, w in grids:
            wts = np.multiply.outer(wts, w).ravel()
        mu_q = float(np.sum(wts * self.m_psi(pts, psi)))

        curves = []
        for axis in range(densities.d):
            lo, hi = supports[axis]
            grid = np.linspace(lo, hi, curve_points)
            rest = [j for j in range(densities.d) if j != axis]
            rest_rules = [q_weights(j) for j in rest]
            if rest_rules:
                mesh = np.meshgrid(*[g[0] for g in rest_rules], indexing="ij")
                rest_pts = np.stack([m.ravel() for m in mesh], axis=-1)
                rest_wts = np.ones(1)
                for _, w in rest_rules:
                    rest_wts = np.multiply.outer(rest_wts, w).ravel()
            else:
                rest_pts = np.zeros((1, 0))
                rest_wts = np.ones(1)
            vals = np.empty(grid.size)
            full = np.empty((rest_pts.shape[0], densities.d))
            for i, u in enumerate(grid):
                full[:, axis] = u
                full[:, rest] = rest_pts
                vals[i] = float(np.sum(rest_wts * self.m_psi(full, psi)))
            curves.append(ComponentCurve(axis, grid, vals - mu_q))
        return mu_q, tuple(curves)


def calibrate_censoring_rate(model_builder: Callable[[float], TrueModel],
                             target_uncensored: float,
                             bracket=(1e-9, 20.0)) -> float:
    """Solve for the exponential rate achieving a target observed fraction."""
    def gap(rate):
        return model_builder(rate).uncensored_probability() - target_uncensored
    return float(optimize.brentq(gap, *bracket, xtol=1e-10))


def default_null_model(theta: float = 0.0, mu: float = 4.05,
                       noise_sd: float = 0.5, noise_halfwidth: float = 1.5,
                       target_uncensored: float = 0.85) -> TrueModel:
    """Two-covariate model with centered ramp and half-sine components.

    The interaction term integrates to zero against either marginal, so
    switching ``theta`` on changes nothing about the additive components.
    The intercept keeps the response positive for strengths up to 2, and
    the censoring rate is calibrated so roughly 15% of responses are
    censored; heavier censoring inflates the weighted-residual variance
    to the point where moderate interactions are undetectable at desk
    sample sizes.
    """
    box = UniformBox(np.array([[0.0, 1.0], [0.0, 1.0]]))
    noise = TruncatedNormalNoise(sd=noise_sd, halfwidth=noise_halfwidth)

    def build(rate: float) -> TrueModel:
        return TrueModel(
            dim=2,
            mu=mu,
            components=(_ramp, _halfsine),
            interaction=_product_interaction,
            theta=theta,
            noise=noise,
            covariates=box,
            censoring=ExponentialCensoring(rate=rate),
            recipe={
                "name": "default_null",
                "mu": mu,
                "components": ["ramp", "halfsine"],
                "interaction": "product",
                "theta": theta,
                "noise_sd": noise_sd,
                "noise_halfwidth": noise_halfwidth,
                "censoring": "exponential",
                "censoring_rate": rate,
                "target_uncensored": target_uncensored,
            },
        )

    base = build(0.0)
    if target_uncensored >= 1.0:
        return base
    rate = calibrate_censoring_rate(build, target_uncensored)
    return build(rate)


def draw_sample(model: TrueModel, n: int, seed) -> CensoredSample:
    """Draw a censored sample; identical seeds give identical samples."""
    rng = np.random.default_rng(seed)
    x = model.covariates.sample(rng, n)
    noise = model.noise.ppf(rng.random(n))
    y = model.m_reg(x) + noise
    c = model.censoring.ppf(rng.random(n))
    z = np.minimum(y, c)
    delta = (y <= c).astype(float)
    return CensoredSample(x=x, z=z, delta=delta)


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to reproduce a Monte Carlo study."""

    model: TrueModel
    n: int
    replications: int
    seed: int
    psi: PsiSpec
    kernels: KernelSet
    plan: BandwidthPlan
    densities: IntegrationDensities
    region: EvaluationRegion
    bv_mode: str = "oracle"
    grid: GridSpec = GridSpec()
    curve_points: int = 101

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("at least one replication is required")
        if self.bv_mode not in ("plugin", "oracle"):
            raise ValueError("bv_mode must be 'plugin' or 'oracle'")

    def provenance(self) -> dict:
        return {
            "model": dict(self.model.recipe),
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "psi": {
                "form": self.psi.form,
                "tau0": self.psi.tau0,
                "bound": self.psi.bound,
                "scale": self.psi.scale,
            },
            "kernel_family": self.kernels.K1.name.split(":")[0],
            "k": self.kernels.k,
            "k_prime": self.kernels.k_prime,
            "c1": self.plan.c1,
            "c2": self.plan.c2,
            "c3": self.plan.c3,
            "gamma": self.plan.gamma,
            "c_bounds": self.region.c_bounds.tolist(),
            "g_bounds": self.region.g_bounds.tolist(),
            "grid_nodes": self.grid.nodes,
            "grid_rule": self.grid.rule,
            "curve_points": self.curve_points,
            "bv_mode": self.bv_mode,
        }


DEFAULT_CONSTANTS = {"c1": 0.6, "c2": 0.5, "c3": 0.8}
DEFAULT_REGION = EvaluationRegion(
    c_bounds=np.array([[0.1, 0.9], [0.1, 0.9]]),
    g_bounds=np.array([[0.2, 0.8], [0.2, 0.8]]),
    margin=0.05,
)


def default_config(n: int = 400, replications: int = 200, seed: int = 2024,
                   theta: float = 0.0, bv_mode: str = "oracle",
                   family: str = "epanechnikov", k: int = 2, k_prime: int = 6,
                   c1: float | None = None, c2: float | None = None,
                   c3: float | None = None, gamma: float | None = None,
                   psi_quantile: float = 0.99,
                   region: EvaluationRegion | None = None,
                   grid: GridSpec | None = None) -> SimulationConfig:
    """Assemble the default study configuration around the default model."""
    model = default_null_model(theta=theta)
    tau0 = model.z_quantile(psi_quantile)
    psi = PsiSpec(form="identity_truncated", tau0=tau0)
    region = DEFAULT_REGION if region is None else region
    kernels = make_kernel_set(model.dim, k, k_prime, family)
    plan = make_plan(
        model.dim, k, k_prime,
        c1=DEFAULT_CONSTANTS["c1"] if c1 is None else c1,
        c2=DEFAULT_CONSTANTS["c2"] if c2 is None else c2,
        c3=DEFAULT_CONSTANTS["c3"] if c3 is None else c3,
        gamma=gamma,
    )
    densities = IntegrationDensities.uniform_on_box(region.c_bounds)
    return SimulationConfig(
        model=model, n=n, replications=replications, seed=seed, psi=psi,
        kernels=kernels, plan=plan, densities=densities, region=region,
        bv_mode=bv_mode, grid=grid if grid is not None else GridSpec(),
    )


def run_replicate(config: SimulationConfig, rep: int):
    """One full pipeline pass on the rep-th derived seed."""
    sample = draw_sample(config.model, config.n, (config.seed, rep))
    bandwidths = config.plan.at(config.n)
    oracle_sigma0 = None
    oracle_density = None
    if config.bv_mode == "oracle":
        oracle_sigma0 = lambda pts: config.model.sigma0_sq(pts, config.psi)
        oracle_density = config.model.covariates.density
    provenance = config.provenance()
    provenance["replicate"] = rep
    return pipeline.additivity_test(
        sample, config.psi, config.kernels, bandwidths, config.densities,
        config.region, grid_spec=config.grid, curve_points=config.curve_points,
        bv_mode=config.bv_mode, oracle_sigma0=oracle_sigma0,
        oracle_density=oracle_density, ell_n=bandwidths.ell_n,
        provenance=provenance,
    )


def _replicate_row(args):
    config, rep = args
    try:
        report = run_replicate(config, rep)
        return rep, report.t_n_star, report.z, report.p_value, None
    except EstimationError as exc:
        return rep, math.nan, math.nan, math.nan, type(exc).__name__


@dataclass(frozen=True)
class MonteCarloResult:
    """Per-replicate statistics plus normality and size summaries."""

    t_n_star: np.ndarray
    z: np.ndarray
    p_value: np.ndarray
    failures: tuple[tuple[int, str], ...]
    provenance: dict = field(default_factory=dict)

    @property
    def replications(self) -> int:
        return self.t_n_star.size

    def summary(self) -> dict:
        ok = np.isfinite(self.z)
        z_ok = self.z[ok]
        rejection = float(np.mean(self.p_value[ok] <= 0.05))
        ks = float(stats.kstest(z_ok, "norm").statistic) if z_ok.size else math.nan
        return {
            "replications": int(self.replications),
            "failures": len(self.failures),
            "mean_z": float(np.mean(z_ok)),
            "var_z": float(np.var(z_ok, ddof=1)) if z_ok.size > 1 else math.nan,
            "rejection_rate_5pct": rejection,
            "ks_distance": ks,
            "mean_t_n_star": float(np.mean(self.t_n_star[ok])),
        }

    def rows(self):
        for rep in range(self.replications):
            yield rep, self.t_n_star[rep], self.z[rep], self.p_value[rep]


def run_monte_carlo(config: SimulationConfig, threads: int = 1) -> MonteCarloResult:
    """Run independent replicates of the full pipeline.

    Replicate seeds derive from the master seed by counter, so results do
    not depend on execution order or on the number of workers.  Aborts
    only when more than 5% of replicates fail with a numeric error.
    """
    jobs = [(config, rep) for rep in range(config.replications)]
    if threads <= 1:
        results = [_replicate_row(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_replicate_row, jobs, chunksize=8))
    results.sort(key=lambda row: row[0])

    t_vals = np.array([row[1] for row in results])
    z_vals = np.array([row[2] for row in results])
    p_vals = np.array([row[3] for row in results])
    failures = tuple((row[0], row[4]) for row in results if row[4] is not None)
    if len(failures) > 0.05 * config.replications:
        raise RuntimeError(
            f"{len(failures)} of {config.replications} replicates failed "
            f"({failures[:5]}...); aborting"
        )
    return MonteCarloResult(
        t_n_star=t_vals, z=z_vals, p_value=p_vals, failures=failures,
        provenance=config.provenance(),
    )
