"""Bandwidth schedules and machine-checkable assumption validation.

The rate exponent for the statistic's smoothing sequence is constrained
from two sides: the effective cell count must diverge, and the squared
uniform fit error must vanish faster than the statistic's fluctuation
scale.  As printed, the second constraint uses an exponent that leaves no
feasible rate for any order and dimension; the schedules here use the
corrected exponent 2k/(2k+1), under which the two constraints bound a
nonempty open band.  ``limit_report`` evaluates both variants so the
discrepancy stays visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolated, InfeasibleExponent

_REPORT_SIZES = tuple(10**e for e in range(2, 9))


@dataclass(frozen=True)
class Bandwidths:
    """Realized bandwidth values at a specific sample size."""

    h_n: float
    h_1n: float
    h_2n: float
    ell_n: float


@dataclass(frozen=True)
class BandwidthPlan:
    """Deterministic bandwidth schedules as functions of the sample size.

    The density bandwidth decays like (log n / n) to the power
    1/(2k'+d), the regression bandwidths like the power 1/(2k+1), and
    the statistic's smoothing sequence like n**(-gamma).
    """

    d: int
    k: int
    k_prime: int
    c1: float
    c2: float
    c3: float
    gamma: float

    def h_n(self, n: int) -> float:
        return self.c1 * (math.log(n) / n) ** (1.0 / (2 * self.k_prime + self.d))

    def h_1n(self, n: int) -> float:
        return self.c2 * (math.log(n) / n) ** (1.0 / (2 * self.k + 1))

    def h_2n(self, n: int) -> float:
        return self.c2 * (math.log(n) / n) ** (1.0 / (2 * self.k + 1))

    def ell_n(self, n: int) -> float:
        return self.c3 * float(n) ** (-self.gamma)

    def at(self, n: int) -> Bandwidths:
        if n < 2:
            raise ValueError("bandwidth schedules require n >= 2")
        return Bandwidths(self.h_n(n), self.h_1n(n), self.h_2n(n), self.ell_n(n))

    def limit_report(self, sample_sizes=_REPORT_SIZES) -> dict:
        """Numeric check of both rate conditions on the smoothing sequence.

        Reports the printed exponent k/(2k+1) alongside the corrected
        2k/(2k+1) so the infeasibility of the printed form is visible.
        """
        ns = np.asarray(sample_sizes, dtype=float)
        ell = self.c3 * ns**-self.gamma
        cells = ns * ell**self.d
        report = {
            "gamma": self.gamma,
            "gamma_band": gamma_band(self.d, self.k),
            "cell_counts": cells.tolist(),
            "cell_counts_diverge": bool(np.all(np.diff(cells) > 0)),
        }
        for label, expo in (
            ("printed", self.k / (2 * self.k + 1)),
            ("corrected", 2 * self.k / (2 * self.k + 1)),
        ):
            seq = ns * (np.log(ns) / ns) ** expo * ell ** (self.d / 2)
            report[f"bias_scale_{label}"] = seq.tolist()
            report[f"bias_scale_{label}_vanishes"] = bool(
                np.all(np.diff(seq) < 0) and seq[-1] < seq[0]
            )
        return report


def gamma_band(d: int, k: int) -> tuple[float, float]:
    """Open interval of feasible rate exponents for the smoothing sequence."""
    return (2.0 / (d * (2 * k + 1)), 1.0 / d)


def make_plan(d: int, k: int, k_prime: int, c1: float = 1.0, c2: float = 1.0,
              c3: float = 1.0, gamma: float | None = None) -> BandwidthPlan:
    """Build a bandwidth plan, defaulting the rate exponent to the band midpoint.

    Raises ``InfeasibleExponent`` when the requested exponent falls on or
    outside the open feasibility band.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if k < 1:
        raise ValueError("order k must be at least 1")
    if k_prime <= k * d:
        raise ValueError(f"order k_prime = {k_prime} must exceed k*d = {k * d}")
    if min(c1, c2, c3) <= 0:
        raise ValueError("bandwidth constants must be positive")
    lo, hi = gamma_band(d, k)
    if gamma is None:
        gamma = 0.5 * (lo + hi)
    if not lo < gamma < hi:
        raise InfeasibleExponent(
            f"gamma = {gamma} outside the open feasibility band ({lo}, {hi}) "
            f"for d = {d}, k = {k}"
        )
    return BandwidthPlan(d=d, k=k, k_prime=k_prime, c1=c1, c2=c2, c3=c3, gamma=gamma)


@dataclass(frozen=True)
class AssumptionSpec:
    """Declared model assumptions, with the knobs the checker needs.

    ``mode_a`` selects which variant of the integrability assumption is
    claimed: a transformation vanishing beyond ``tau0`` (mode "A_i") or a
    tail-moment condition with exponent ``p`` (mode "A_ii").
    """

    mode_a: str = "A_i"
    tau0: float | None = None
    p: float | None = None
    independence_censoring: bool = True      # C.1
    continuous_censoring: bool = True        # C.2
    bounded_psi: bool = True                 # C.3
    smooth_regression: bool = True           # C.4
    positive_density: bool = True            # F.1
    smooth_density: bool = True              # F.2
    indicator_weight: bool = True            # G.1
    lipschitz_k1: bool = True                # K.1
    kernel_orders: bool = True               # K.2
    bounded_q: bool = True                   # Q.1
    smooth_q: bool = True                    # Q.2

    def __post_init__(self):
        if self.mode_a not in ("A_i", "A_ii"):
            raise ValueError("mode_a must be 'A_i' or 'A_ii'")
        if self.mode_a == "A_i" and self.tau0 is None:
            raise ValueError("mode A_i requires tau0")
        if self.mode_a == "A_ii" and self.p is None:
            raise ValueError("mode A_ii requires the exponent p")


def check_assumptions(assumptions: AssumptionSpec, sample=None, psi=None, g_n=None,
                      region=None, kernels=None, plan=None) -> list[str]:
    """Validate the checkable assumptions against the supplied objects.

    Hard failures raise ``AssumptionViolated``; soft findings come back
    as diagnostic strings.  Objects that are not supplied are skipped.
    """
    diagnostics: list[str] = []

    if assumptions.mode_a == "A_i":
        tau0 = assumptions.tau0
        if psi is not None:
            if psi.form == "identity":
                raise AssumptionViolated(
                    "A(i)", "the transformation must vanish beyond tau0; "
                            "the identity form does not"
                )
            if psi.tau0 is not None and psi.tau0 > tau0 + 1e-12:
                raise AssumptionViolated(
                    "A(i)", f"transformation truncates at {psi.tau0}, "
                            f"after the declared tau0 = {tau0}"
                )
        if g_n is not None and float(g_n(tau0)) <= 0.0:
            raise AssumptionViolated(
                "A(i)", f"censoring exhausts mass before tau0 = {tau0}"
            )
    else:
        p = assumptions.p
        if plan is not None:
            lo = plan.k / (2 * plan.k + 1)
            if not lo < p <= 0.5:
                raise AssumptionViolated(
                    "A(ii)(a)", f"p = {p} outside (k/(2k+1), 1/2] = ({lo}, 0.5]"
                )
            # A(ii)(c) references a regression bandwidth without fixing which;
            # check the divergence for both.
            ns = np.asarray(_REPORT_SIZES, dtype=float)
            for name, h in (("h_1n", plan.h_1n), ("h_2n", plan.h_2n)):
                hv = np.array([h(int(n)) for n in ns])
                seq = ns ** (2 * p - 1) / hv * np.abs(np.log(hv))
                if not seq[-1] > seq[0]:
                    diagnostics.append(
                        f"A(ii)(c): n^(2p-1)/{name} |log {name}| does not appear "
                        "to diverge over the probed sample sizes"
                    )

    if psi is not None and sample is not None and assumptions.bounded_psi:
        observed = float(np.max(np.abs(psi(sample.z)))) if sample.n else 0.0
        if psi.bound is None:
            diagnostics.append(
                "C.3: no sup-norm bound declared for the transformation"
            )
        elif observed > psi.bound + 1e-12:
            raise AssumptionViolated(
                "C.3", f"|psi| reaches {observed} on the observed range, "
                       f"above the declared bound {psi.bound}"
            )

    if region is not None and assumptions.indicator_weight:
        g, c = region.g_bounds, region.c_bounds
        if np.any(g[:, 0] <= c[:, 0]) or np.any(g[:, 1] >= c[:, 1]):
            raise AssumptionViolated(
                "G.1", "weight support must lie strictly inside the working box"
            )

    if kernels is not None:
        if assumptions.kernel_orders and kernels.k_prime <= kernels.k * kernels.d:
            raise AssumptionViolated(
                "K.2", f"density-kernel order {kernels.k_prime} must exceed "
                       f"k*d = {kernels.k * kernels.d}"
            )
        if assumptions.lipschitz_k1 and not kernels.K1.lipschitz:
            diagnostics.append(
                "K.1: the directional kernel is not Lipschitz "
                f"({kernels.K1.name}); smoothness conditions are weakened"
            )

    return diagnostics
