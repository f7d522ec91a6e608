"""Censored samples, the product-limit censoring estimate, and IPCW weights."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import CensoringDegenerate

if TYPE_CHECKING:  # pragma: no cover
    from .smoothing import PsiSpec


@dataclass(frozen=True)
class CensoredSample:
    """Observed triples (covariates, follow-up time, event indicator).

    ``z`` holds the minimum of the response and the censoring time;
    ``delta`` is 1 where the response was observed and 0 where it was
    censored.  The underlying response and censoring times are never
    stored.
    """

    x: np.ndarray
    z: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        z = np.asarray(self.z, dtype=float).ravel()
        delta = np.asarray(self.delta, dtype=float).ravel()
        if x.shape[0] != z.shape[0] or z.shape[0] != delta.shape[0]:
            raise ValueError(
                f"length mismatch: x has {x.shape[0]} rows, z {z.shape[0]}, "
                f"delta {delta.shape[0]}"
            )
        if x.shape[0] == 0:
            raise ValueError("sample must contain at least one observation")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(z)):
            raise ValueError("sample entries must be finite")
        if np.any(z < 0):
            raise ValueError("follow-up times must be nonnegative")
        if not np.all((delta == 0.0) | (delta == 1.0)):
            raise ValueError("event indicators must be 0 or 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "delta", delta)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


class StepSurvival:
    """Right-continuous, non-increasing step function on [0, inf).

    The value is 1 before the first jump time and ``values[j]`` on
    ``[jump_times[j], jump_times[j+1])``.
    """

    def __init__(self, jump_times, values):
        jump_times = np.asarray(jump_times, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if jump_times.shape != values.shape:
            raise ValueError("jump_times and values must have equal length")
        if jump_times.size and np.any(np.diff(jump_times) <= 0):
            raise ValueError("jump_times must be strictly increasing")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("survival values must lie in [0, 1]")
        if values.size and np.any(np.diff(values) > 0):
            raise ValueError("survival values must be non-increasing")
        self.jump_times = jump_times
        self.values = values

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(self.jump_times, y, side="right")
        padded = np.concatenate(([1.0], self.values))
        return padded[idx]

    def to_csv(self, path) -> None:
        """Write the step function as a two-column CSV (time, value)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "value"])
            for t, v in zip(self.jump_times, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])


def kaplan_meier_censoring(sample: CensoredSample,
                           counting: str = "at_risk") -> StepSurvival:
    """Product-limit estimate of the censoring survival function.

    Each censored observation at time t contributes the factor
    (N(t) - 1) / N(t); tied censored times each contribute their factor at
    the common time, and uncensored observations contribute nothing, so
    with no censoring the estimate is identically 1.

    ``counting`` selects what N(t) counts.  The default "at_risk" counts
    observations with follow-up >= t, which is the classical product-limit
    estimate and the one the pipeline uses: it is consistent for the
    censoring survival.  The "literal" variant counts observations with
    follow-up <= t instead; it degenerates to zero past the smallest
    censored time whenever that time is the sample minimum, and exists
    only to reproduce that written convention.
    """
    if counting not in ("at_risk", "literal"):
        raise ValueError("counting must be 'at_risk' or 'literal'")
    order = np.argsort(sample.z, kind="stable")
    z_sorted = sample.z[order]
    delta_sorted = sample.delta[order]

    if counting == "at_risk":
        counts = sample.n - np.searchsorted(z_sorted, z_sorted, side="left")
    else:
        counts = np.searchsorted(z_sorted, z_sorted, side="right")
    censored = delta_sorted == 0.0
    if not np.any(censored):
        return StepSurvival(np.empty(0), np.empty(0))

    times = z_sorted[censored]
    factors = (counts[censored] - 1.0) / counts[censored]
    jump_times, start = np.unique(times, return_index=True)
    grouped = np.multiply.reduceat(factors, start)
    values = np.cumprod(grouped)
    return StepSurvival(jump_times, values)


def ipcw_responses(sample: CensoredSample, g_n: StepSurvival, psi: "PsiSpec") -> np.ndarray:
    """Inverse-probability-of-censoring weighted responses.

    Returns the vector with entries ``delta_i * psi(z_i) / g_n(z_i)``.
    Entries with a censored observation or with ``psi(z_i) == 0`` are set
    to zero without evaluating the quotient.  Raises
    ``CensoringDegenerate`` when an uncensored observation with nonzero
    transformed response sits where the censoring survival estimate is
    zero.
    """
    psi_z = np.asarray(psi(sample.z), dtype=float)
    out = np.zeros(sample.n)
    active = (sample.delta == 1.0) & (psi_z != 0.0)
    if not np.any(active):
        return out
    g_at = g_n(sample.z[active])
    bad = g_at <= 0.0
    if np.any(bad):
        raise CensoringDegenerate(np.flatnonzero(active)[bad])
    out[active] = psi_z[active] / g_at
    return out
