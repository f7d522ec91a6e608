"""End-to-end orchestration: sample in, standardized test report out."""

from __future__ import annotations

import numpy as np

from .additive import EvaluationRegion, IntegrationDensities, additive_fit
from .kernels import KernelSet, kernel_constants
from .plan import Bandwidths
from .quad import GridSpec
from .smoothing import PsiSpec, density_estimate
from .survival import CensoredSample, kaplan_meier_censoring, ipcw_responses
from . import teststat


def additivity_test(sample: CensoredSample, psi: PsiSpec, kernels: KernelSet,
                    bandwidths: Bandwidths, densities: IntegrationDensities,
                    region: EvaluationRegion, grid_spec: GridSpec | None = None,
                    curve_points: int = 101, bv_mode: str = "plugin",
                    oracle_sigma0=None, oracle_density=None,
                    ell_n: float | None = None,
                    provenance: dict | None = None) -> teststat.TestReport:
    """Run the full additivity test on one sample.

    Fits the censoring survival, the density, and the additive regression,
    evaluates the statistic on the weight support, and standardizes it with
    either plug-in constants or, in oracle mode, caller-supplied analytic
    variance and density functions.
    """
    if grid_spec is None:
        grid_spec = GridSpec()
    if ell_n is None:
        ell_n = bandwidths.ell_n
    if bv_mode not in ("plugin", "oracle"):
        raise ValueError("bv_mode must be 'plugin' or 'oracle'")
    if bv_mode == "oracle" and (oracle_sigma0 is None or oracle_density is None):
        raise ValueError("oracle mode needs oracle_sigma0 and oracle_density")

    g_n = kaplan_meier_censoring(sample)
    responses = ipcw_responses(sample, g_n, psi)
    f_hat = density_estimate(sample, kernels.K, bandwidths.h_n)

    fit = additive_fit(
        sample, psi, kernels, bandwidths, densities,
        grid_spec=grid_spec, curve_points=curve_points,
        g_n=g_n, responses=responses, f_hat=f_hat,
    )
    resid = teststat.ResidualVector(responses - fit(sample.x))
    t_value = teststat.test_statistic(
        sample, resid, f_hat, kernels.L, ell_n, region, grid_spec
    )

    constants = kernel_constants(kernels.L)
    if bv_mode == "oracle":
        sigma0 = oracle_sigma0
        dens = oracle_density
    else:
        smoother = teststat.estimate_sigma0_sq(
            sample, resid, kernels.K3, bandwidths.h_1n, f_hat
        )
        sigma0 = smoother.evaluate
        dens = f_hat.evaluate
    estimates = teststat.plugin_b_v(
        sigma0, dens, region, constants, grid_spec, mode=bv_mode
    )

    prov = dict(provenance or {})
    prov.setdefault("bandwidths", {
        "h_n": bandwidths.h_n, "h_1n": bandwidths.h_1n,
        "h_2n": bandwidths.h_2n, "ell_n": ell_n,
    })
    prov.setdefault("mu_hat", fit.mu_hat)
    prov.setdefault("bv_mode", bv_mode)
    return teststat.standardize(
        t_value, estimates.B_hat, estimates.V_hat, sample.n, sample.d, ell_n,
        provenance=prov,
    )
