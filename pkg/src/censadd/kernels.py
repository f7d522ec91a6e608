"""Compactly supported polynomial kernels and their derived constants.

All kernels are polynomials on a compact support interval and zero
outside, so every integral appearing here (normalization, moments,
squared norms, self-convolutions) is a polynomial integral that
Gauss-Legendre quadrature captures exactly at modest node counts.
Higher even orders are obtained from a base shape by multiplying with an
even polynomial whose coefficients are solved from the moment
conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import GridTooCoarse, OrderInfeasible, UnknownFamily
from .quad import GridSpec

# Base shapes are densities in t = u / support_radius on [-1, 1]:
# coefficient vector (low degree first), default support radius, Lipschitz flag.
_BASE_SHAPES = {
    "uniform": (np.array([0.5]), 0.5, False),
    "epanechnikov": (np.array([0.75, 0.0, -0.75]), 1.0, True),
    "quartic": (np.array([0.9375, 0.0, -1.875, 0.0, 0.9375]), 1.0, True),
    # Classic minimal-degree polynomial kernels: the multiplier construction
    # applied to the flat shape on [-1, 1].
    "order_k_polynomial": (np.array([0.5]), 1.0, False),
}

FAMILIES = tuple(_BASE_SHAPES)

DEFAULT_KERNEL_QUADRATURE = GridSpec(nodes=64, rule="gauss")


@dataclass(frozen=True)
class Kernel1D:
    """A univariate kernel: a polynomial density on a symmetric interval.

    The kernel value is ``shape(u / support_radius) / support_radius`` for
    ``|u| <= support_radius`` and zero outside.  ``order`` is the first
    moment index with a nonvanishing moment; moments 1..order-1 are zero.
    ``lipschitz`` records whether the kernel is Lipschitz on the real line
    (false for shapes that do not vanish at the support edge).
    """

    name: str
    support_radius: float
    order: int
    shape_coeffs: np.ndarray
    lipschitz: bool
    nonnegative: bool

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        t = u / self.support_radius
        vals = npoly.polyval(t, self.shape_coeffs) / self.support_radius
        return np.where(np.abs(t) <= 1.0, vals, 0.0)


@dataclass(frozen=True)
class ProductKernel:
    """Tensor product of univariate kernels, one factor per coordinate.

    A zero-dimensional product (no factors) evaluates to 1; it stands in
    for the nuisance-direction kernel when d = 1.
    """

    factors: tuple[Kernel1D, ...]

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def order(self) -> int:
        if not self.factors:
            return 0
        return min(f.order for f in self.factors)

    @property
    def support_radii(self) -> np.ndarray:
        return np.array([f.support_radius for f in self.factors])

    @property
    def nonnegative(self) -> bool:
        return all(f.nonnegative for f in self.factors)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        squeeze = pts.ndim == 1 and self.dim > 0
        pts = np.atleast_2d(pts)
        if pts.shape[-1] != self.dim:
            raise ValueError(
                f"points have {pts.shape[-1]} coordinates, kernel has {self.dim}"
            )
        out = np.ones(pts.shape[:-1])
        for j, factor in enumerate(self.factors):
            out = out * factor(pts[..., j])
        return out[0] if squeeze else out


@dataclass(frozen=True)
class KernelConstants:
    """Squared L2 norm and squared-self-convolution integral of a kernel."""

    l2_norm_sq: float
    conv_sq_integral: float

    def __post_init__(self):
        if not (np.isfinite(self.l2_norm_sq) and self.l2_norm_sq > 0):
            raise ValueError("l2_norm_sq must be finite and positive")
        if not (np.isfinite(self.conv_sq_integral) and self.conv_sq_integral > 0):
            raise ValueError("conv_sq_integral must be finite and positive")


@dataclass(frozen=True)
class KernelSet:
    """The five kernels used by the estimation pipeline.

    ``L`` weights the test-statistic field, ``K`` estimates the covariate
    density, ``K1``/``K2`` build the directional regression weights and
    ``K3`` the full-dimensional ones.
    """

    L: ProductKernel
    K: ProductKernel
    K1: Kernel1D
    K2: ProductKernel
    K3: ProductKernel
    d: int
    k: int
    k_prime: int

    def __post_init__(self):
        if self.L.dim != self.d or self.K.dim != self.d or self.K3.dim != self.d:
            raise ValueError("L, K and K3 must be d-dimensional")
        if self.K2.dim != self.d - 1:
            raise ValueError("K2 must be (d-1)-dimensional")
        if self.K1.order != self.k or self.K3.order != self.k:
            raise OrderInfeasible("K1 and K3 must have order k")
        if self.K.order != self.k_prime:
            raise OrderInfeasible("K must have order k_prime")
        if self.k_prime <= self.k * self.d:
            raise OrderInfeasible(
                f"density-kernel order {self.k_prime} must exceed k*d = {self.k * self.d}"
            )


def _shape_moment(coeffs: np.ndarray, power: int) -> float:
    # Exact: integrate t^power * shape(t) over [-1, 1] via the antiderivative.
    shifted = np.concatenate([np.zeros(power), coeffs])
    integ = npoly.polyint(shifted)
    return float(npoly.polyval(1.0, integ) - npoly.polyval(-1.0, integ))


def _raise_order(base: np.ndarray, order: int) -> np.ndarray:
    """Multiply the base shape by an even polynomial killing moments 2..order-2."""
    half = order // 2
    moments = np.array([_shape_moment(base, 2 * m) for m in range(2 * half - 1)])
    system = np.empty((half, half))
    for m in range(half):
        for j in range(half):
            system[m, j] = moments[m + j]
    rhs = np.zeros(half)
    rhs[0] = 1.0
    mult = np.linalg.solve(system, rhs)
    mult_coeffs = np.zeros(2 * half - 1)
    mult_coeffs[::2] = mult
    return npoly.polymul(base, mult_coeffs)


def kernel_1d(family: str, order: int = 2, support_radius: float | None = None) -> Kernel1D:
    """Build a univariate kernel of the given family and even order.

    Raises ``UnknownFamily`` for unrecognized families and
    ``OrderInfeasible`` for orders that are not even integers >= 2.
    """
    if family not in _BASE_SHAPES:
        raise UnknownFamily(f"unknown kernel family {family!r}; choose from {FAMILIES}")
    if order < 2 or order % 2 != 0:
        raise OrderInfeasible(f"kernel order must be an even integer >= 2, got {order}")
    base, default_radius, lipschitz = _BASE_SHAPES[family]
    radius = float(default_radius if support_radius is None else support_radius)
    if radius <= 0:
        raise ValueError("support_radius must be positive")
    coeffs = base if order == 2 else _raise_order(base, order)

    # Guard the construction: unit mass, vanishing moments below `order`,
    # and a nonvanishing moment at `order`.
    assert abs(_shape_moment(coeffs, 0) - 1.0) < 1e-12
    for m in range(1, order):
        assert abs(_shape_moment(coeffs, m)) < 1e-10
    if abs(_shape_moment(coeffs, order)) < 1e-12:
        raise OrderInfeasible(f"constructed kernel degenerates at order {order}")

    probe = npoly.polyval(np.linspace(-1.0, 1.0, 2001), coeffs)
    name = family if order == 2 else f"{family}:k={order}"
    return Kernel1D(
        name=name,
        support_radius=radius,
        order=order,
        shape_coeffs=np.asarray(coeffs, dtype=float),
        lipschitz=lipschitz,
        nonnegative=bool(probe.min() >= -1e-12),
    )


def product_kernel(factor: Kernel1D, dim: int) -> ProductKernel:
    """Tensor product of ``dim`` copies of a univariate kernel."""
    if dim < 0:
        raise ValueError("dim must be nonnegative")
    return ProductKernel(factors=(factor,) * dim)


def make_kernel_set(d: int, k: int, k_prime: int, family: str = "epanechnikov") -> KernelSet:
    """Assemble the kernel bundle for a d-dimensional problem.

    ``k`` is the order of the regression kernels (K1, K3), ``k_prime`` the
    order of the density kernel K, constrained to exceed ``k * d``.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if k < 2 or k % 2 != 0:
        raise OrderInfeasible(f"regression-kernel order k must be even and >= 2, got {k}")
    if k_prime % 2 != 0:
        raise OrderInfeasible(
            f"density-kernel order k_prime must be even (symmetric construction), got {k_prime}"
        )
    if k_prime <= k * d:
        raise OrderInfeasible(
            f"density-kernel order k_prime = {k_prime} must exceed k*d = {k * d}"
        )
    base = kernel_1d(family, 2)
    k1 = kernel_1d(family, k)
    return KernelSet(
        L=product_kernel(base, d),
        K=product_kernel(kernel_1d(family, k_prime), d),
        K1=k1,
        K2=product_kernel(base, d - 1),
        K3=product_kernel(k1, d),
        d=d,
        k=k,
        k_prime=k_prime,
    )


def _factor_constants(factor: Kernel1D, nodes: int) -> tuple[float, float]:
    radius = factor.support_radius
    t, w = np.polynomial.legendre.leggauss(nodes)

    pts = radius * t
    wts = radius * w
    l2 = float(np.sum(wts * factor(pts) ** 2))

    # Self-convolution C(r) = int f(t) f(t - r) dt is even in r and supported
    # on [-2R, 2R]; integrate C(r)^2 over r >= 0 and double.
    r_pts = radius * (t + 1.0)
    r_wts = radius * w
    lo = r_pts - radius
    hi = np.full_like(r_pts, radius)
    mid = 0.5 * (lo + hi)
    halfw = 0.5 * (hi - lo)
    inner = mid[:, None] + halfw[:, None] * t[None, :]
    conv_vals = (factor(inner) * factor(inner - r_pts[:, None])) @ w * halfw
    conv = 2.0 * float(np.sum(r_wts * conv_vals**2))
    return l2, conv


def kernel_constants(kernel: ProductKernel | Kernel1D,
                     quadrature: GridSpec | None = None) -> KernelConstants:
    """Compute the squared L2 norm and squared-self-convolution integral.

    For a product kernel both constants factor across coordinates.  The
    result is verified against a doubled-resolution grid; a relative move
    above 1e-6 raises ``GridTooCoarse``.
    """
    if quadrature is None:
        quadrature = DEFAULT_KERNEL_QUADRATURE
    factors = kernel.factors if isinstance(kernel, ProductKernel) else (kernel,)

    def at(nodes: int) -> tuple[float, float]:
        l2, conv = 1.0, 1.0
        for f in factors:
            fl2, fconv = _factor_constants(f, nodes)
            l2 *= fl2
            conv *= fconv
        return l2, conv

    coarse = at(quadrature.nodes)
    fine = at(2 * quadrature.nodes)
    for name, c, f in zip(("l2_norm_sq", "conv_sq_integral"), coarse, fine):
        if abs(f - c) > 1e-6 * max(abs(f), 1e-300):
            raise GridTooCoarse(
                f"{name} moved by more than 1e-6 relative when doubling "
                f"{quadrature.nodes} quadrature nodes"
            )
    return KernelConstants(l2_norm_sq=fine[0], conv_sq_integral=fine[1])


def parse_kernel_spec(spec: str) -> tuple[str, int]:
    """Parse a kernel selection string like ``"epanechnikov:k=2"``.

    Returns (family, order); a bare family name means order 2.
    """
    family, sep, rest = spec.partition(":")
    family = family.strip()
    if family not in _BASE_SHAPES:
        raise UnknownFamily(f"unknown kernel family {family!r}; choose from {FAMILIES}")
    if not sep:
        return family, 2
    rest = rest.strip()
    if not rest.startswith("k="):
        raise ValueError(f"malformed kernel spec {spec!r}; expected 'family:k=<order>'")
    try:
        order = int(rest[2:])
    except ValueError as exc:
        raise ValueError(f"malformed kernel order in {spec!r}") from exc
    return family, order
