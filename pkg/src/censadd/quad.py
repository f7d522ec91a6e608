"""Quadrature grids shared by the smoothing and integration routines."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Resolution and rule for a (tensor-product) quadrature grid.

    ``nodes`` is the number of nodes per axis.  ``rule`` selects the
    composite midpoint rule or Gauss-Legendre nodes.  When
    ``check_refinement`` is set, operations that accept a GridSpec verify
    their result against a doubled-resolution grid and raise
    ``GridTooCoarse`` if the change exceeds their documented tolerance.
    """

    nodes: int = 41
    rule: str = "midpoint"
    check_refinement: bool = False

    def __post_init__(self):
        if self.nodes < 1:
            raise ValueError("nodes must be a positive integer")
        if self.rule not in ("midpoint", "gauss"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")

    def refined(self) -> "GridSpec":
        return dataclasses.replace(self, nodes=2 * self.nodes, check_refinement=False)


def axis_rule(lo: float, hi: float, spec: GridSpec):
    """Return (nodes, weights) integrating over the interval [lo, hi]."""
    if hi <= lo:
        raise ValueError("interval must have positive length")
    if spec.rule == "midpoint":
        step = (hi - lo) / spec.nodes
        pts = lo + (np.arange(spec.nodes) + 0.5) * step
        wts = np.full(spec.nodes, step)
    else:
        t, w = np.polynomial.legendre.leggauss(spec.nodes)
        pts = 0.5 * (hi + lo) + 0.5 * (hi - lo) * t
        wts = 0.5 * (hi - lo) * w
    return pts, wts


def tensor_rule(bounds, spec: GridSpec):
    """Tensor-product rule over a box.

    ``bounds`` is a (d, 2) array of per-axis intervals.  Returns points of
    shape (m, d) and weights of shape (m,) with m = nodes**d.
    """
    bounds = np.asarray(bounds, dtype=float)
    axes = [axis_rule(lo, hi, spec) for lo, hi in bounds]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.ones(1)
    for _, w in axes:
        weights = np.multiply.outer(weights, w).ravel()
    return points, weights
