"""Model manifolds, their heat kernels, and radial grids with exact volume weights.

Two rotationally symmetric model geometries are supported: Euclidean space R^N
and hyperbolic space H^N with sectional curvature -a^2.  All fields in the rest
of the package are radial about a fixed pole, so the geometry layer reduces to
one-dimensional radial calculus plus the exact two-point distance formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma, gammaln

from .errors import ConfigurationError, DomainError, QuadratureFailure

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"

# exp(-_EXP_FLOOR) underflows double precision
_EXP_FLOOR = 745.0


def sphere_area(n_dim: int) -> float:
    """Surface area of the unit sphere S^(n_dim-1) in R^n_dim."""
    return 2.0 * math.pi ** (n_dim / 2.0) / gamma(n_dim / 2.0)


@dataclass(frozen=True)
class ManifoldModel:
    """A model geometry: Euclidean R^N or hyperbolic H^N with curvature -a^2.

    The assumption flags record which geometric hypotheses the model satisfies:
    a Euclidean-type Faber-Krahn inequality, the Cartan-Hadamard property, and
    a strictly negative curvature bound.  For these two models the flags are
    derived, not free.
    """

    kind: str
    dimension: int
    curvature: float = 1.0  # only meaningful for the hyperbolic model

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, HYPERBOLIC):
            raise ConfigurationError(f"unknown manifold kind {self.kind!r}")
        if self.dimension < 2:
            raise ConfigurationError("dimension must be >= 2")
        if self.kind == HYPERBOLIC and not self.curvature > 0:
            raise ConfigurationError("hyperbolic curvature parameter must be > 0")

    @property
    def is_hyperbolic(self) -> bool:
        return self.kind == HYPERBOLIC

    @property
    def faber_krahn(self) -> bool:
        return True

    @property
    def cartan_hadamard(self) -> bool:
        return True

    @property
    def strictly_negative_curvature(self) -> bool:
        return self.is_hyperbolic

    @property
    def ricci_lower_bound(self) -> float:
        """k such that Ricci >= -(N-1) k."""
        return self.curvature**2 if self.is_hyperbolic else 0.0

    @property
    def spectral_gap(self) -> float:
        """Bottom of the L^2 spectrum of the Laplace-Beltrami operator."""
        if self.is_hyperbolic:
            return (self.dimension - 1) ** 2 * self.curvature**2 / 4.0
        return 0.0

    def surface_area(self, r):
        """Area of the geodesic sphere of radius r."""
        r = np.asarray(r, dtype=float)
        omega = sphere_area(self.dimension)
        if self.is_hyperbolic:
            a = self.curvature
            return omega * (np.sinh(a * r) / a) ** (self.dimension - 1)
        return omega * r ** (self.dimension - 1)

    def ball_volume(self, r):
        """Exact volume of the geodesic ball of radius r."""
        r = np.asarray(r, dtype=float)
        n = self.dimension
        omega = sphere_area(n)
        if not self.is_hyperbolic:
            return omega * r**n / n
        a = self.curvature
        return omega * a ** (1 - n) * _sinh_power_integral(n - 1, a * r)

    def pair_distance(self, r1, r2, cos_phi):
        """Geodesic distance between points at radii r1, r2 with angle phi at the pole.

        Stable near cos_phi = 1 where the naive law-of-cosines cancels.
        """
        r1, r2, cos_phi = np.broadcast_arrays(
            np.asarray(r1, float), np.asarray(r2, float), np.asarray(cos_phi, float)
        )
        one_minus = np.maximum(1.0 - cos_phi, 0.0)
        if self.is_hyperbolic:
            a = self.curvature
            # cosh(a d) - 1, as a sum of nonnegative terms
            x = (
                2.0 * np.sinh(0.5 * a * (r1 - r2)) ** 2
                + np.sinh(a * r1) * np.sinh(a * r2) * one_minus
            )
            return np.log1p(x + np.sqrt(x * (x + 2.0))) / a
        d2 = (r1 - r2) ** 2 + 2.0 * r1 * r2 * one_minus
        return np.sqrt(np.maximum(d2, 0.0))


def _sinh_power_integral(p: int, x):
    """int_0^x sinh(u)^p du, exact for integer p >= 1.

    Uses the binomial expansion of sinh^p for x >= 1/2 and Gauss-Legendre
    quadrature below (the expansion cancels catastrophically as x -> 0, while
    the integrand is smooth there).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.5
    if np.any(small):
        xs = x[small]
        nodes, wts = leggauss(24)
        u = 0.5 * xs[..., None] * (nodes + 1.0)
        out[small] = 0.5 * xs * np.sum(wts * np.sinh(u) ** p, axis=-1)
    if np.any(~small):
        xl = x[~small]
        acc = np.zeros_like(xl)
        for k in range(p + 1):
            c = p - 2 * k
            coef = (-1.0) ** k * math.comb(p, k)
            if c == 0:
                acc += coef * xl
            else:
                acc += coef * np.expm1(c * xl) / c
        out[~small] = acc / 2.0**p
    return out


# ---------------------------------------------------------------------------
# heat kernels
# ---------------------------------------------------------------------------


def _euclidean_heat_kernel(n: int, t: float, r):
    return (4.0 * math.pi * t) ** (-n / 2.0) * np.exp(-np.asarray(r, float) ** 2 / (4.0 * t))


def _h3_heat_kernel(t: float, r):
    """Hyperbolic 3-space, curvature -1: closed form."""
    r = np.asarray(r, dtype=float)
    rs = np.where(r < 1e-12, 1e-12, r)
    ratio = np.where(r < 1e-12, 1.0, rs / np.sinh(rs))
    return (4.0 * math.pi * t) ** (-1.5) * ratio * np.exp(-t - r**2 / (4.0 * t))


@lru_cache(maxsize=8)
def _odd_descent_callable(m: int):
    """(sinh(r)^{-1} d/dr)^m exp(-r^2/(4t)) as a numpy-callable of (r, t)."""
    import sympy as sp

    r, t = sp.symbols("r t", positive=True)
    expr = sp.exp(-(r**2) / (4 * t))
    for _ in range(m):
        expr = sp.diff(expr, r) / sp.sinh(r)
    return sp.lambdify((r, t), sp.simplify(expr), modules="numpy")


def _odd_hyperbolic_heat_kernel(n: int, t: float, r):
    """H^n for odd n = 2m+1, curvature -1, via the Millson descent recursion."""
    m = (n - 1) // 2
    if n == 3:
        return _h3_heat_kernel(t, r)
    r = np.asarray(r, dtype=float)
    rs = np.maximum(r, 1e-6)  # recursion output is smooth; clamp avoids 0/0
    fn = _odd_descent_callable(m)
    pref = (-1.0) ** m / (2.0 * math.pi) ** m / math.sqrt(4.0 * math.pi * t)
    return pref * math.exp(-(m**2) * t) * np.asarray(fn(rs, t), dtype=float)


@lru_cache(maxsize=8)
def _even_descent_callable(m: int):
    """(sinh(s)^{-1} d/ds)^m [ s exp(-s^2/(4t)) / sinh(s) ] as callable of (s, t)."""
    import sympy as sp

    s, t = sp.symbols("s t", positive=True)
    expr = s * sp.exp(-(s**2) / (4 * t)) / sp.sinh(s)
    for _ in range(m):
        expr = sp.diff(expr, s) / sp.sinh(s)
    return sp.lambdify((s, t), sp.simplify(expr), modules="numpy")


def _even_hyperbolic_heat_kernel(n: int, t: float, r, rel_tol: float = 1e-10,
                                 validate: bool = False):
    """H^n for even n = 2m+2, curvature -1, by the descent integral.

    The half-integer descent from dimension 2m+1 is
        k_n = (-1)^m (2 pi)^{-m} sqrt(2) (4 pi t)^{-3/2} e^{-(2m+1)^2 t / 4}
              * D^m int_r^inf s e^{-s^2/(4t)} / sqrt(cosh s - cosh r) ds,
    with D = sinh(r)^{-1} d/dr.  Substituting w^2 = cosh s - cosh r turns D into
    the same operator in s under the integral sign and removes the endpoint
    singularity, leaving  2 int_0^inf D^m[s e^{-s^2/(4t)} / sinh s](s(w)) dw
    with s(w) = arccosh(cosh r + w^2).
    """
    m = (n - 2) // 2
    r = np.atleast_1d(np.asarray(r, dtype=float))
    decay = (2 * m + 1) ** 2 * t / 4.0
    if decay > _EXP_FLOOR:
        out = np.zeros_like(r)
        return out if out.ndim else float(out)

    fn = _even_descent_callable(m)
    s_max = np.minimum(np.sqrt(r**2 + 220.0 * t) + 1.0, 690.0)
    w_hi = np.sqrt(np.cosh(s_max) - np.cosh(r))
    # resolve the w ~ 0 region where s(w) varies fastest
    s_near = np.minimum(r + np.minimum(math.sqrt(t), 1.0), 690.0)
    w_sc = np.sqrt(np.maximum(np.cosh(s_near) - np.cosh(r), 1e-12))

    def integral(n_gl: int):
        nodes, wts = leggauss(n_gl)
        total = np.zeros_like(r)
        # geometric panels [w_sc 2^(k-1), w_sc 2^k] from 0 out to w_hi
        edges = [np.zeros_like(r)]
        k = 0
        while True:
            e = np.minimum(w_sc * 2.0**k, w_hi)
            edges.append(e)
            if np.all(e >= w_hi):
                break
            k += 1
            if k > 60:
                break
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            w = mid[..., None] + half[..., None] * nodes
            s = np.arccosh(np.cosh(r)[..., None] + w**2)
            s = np.maximum(s, 1e-6)
            vals = np.asarray(fn(s, t), dtype=float)
            total += half * np.sum(wts * vals, axis=-1)
        return 2.0 * total

    base = integral(16)
    if validate:
        refined = integral(32)
        resid = np.max(np.abs(refined - base) / np.maximum(np.abs(refined), 1e-300))
        if not np.isfinite(resid) or resid > rel_tol:
            raise QuadratureFailure("even-dimension hyperbolic heat kernel quadrature", resid)
        base = refined
    pref = (
        (-1.0) ** m
        / (2.0 * math.pi) ** m
        * math.sqrt(2.0)
        * (4.0 * math.pi * t) ** (-1.5)
        * math.exp(-decay)
    )
    return pref * base


def heat_kernel(model: ManifoldModel, t: float, r, validate: bool = False):
    """Heat kernel k(t, r) of the model at time t and geodesic distance r.

    Euclidean and odd-dimensional hyperbolic kernels are closed forms; even
    hyperbolic dimensions use the descent integral (relative tolerance 1e-10,
    checked when validate=True).
    """
    if t <= 0:
        raise DomainError(f"heat kernel needs t > 0, got {t}")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("heat kernel needs r >= 0")
    n = model.dimension
    if not model.is_hyperbolic:
        return _euclidean_heat_kernel(n, t, r)
    a = model.curvature
    # curvature scaling: k_a(t, r) = a^N k_1(a^2 t, a r)
    if n % 2 == 1:
        return a**n * _odd_hyperbolic_heat_kernel(n, a**2 * t, a * r)
    return a**n * _even_hyperbolic_heat_kernel(n, a**2 * t, a * r, validate=validate)


def heat_kernel_gaussian_bound(model: ManifoldModel, t_samples=None, r_samples=None,
                               c2: float = 0.25):
    """Fit C1 in the Gaussian envelope k(t,r) <= C1 t^{-N/2} exp(-C2 r^2/t).

    Returns (C1, C2) with C1 the smallest constant that works on the sample set.
    """
    if t_samples is None:
        t_samples = np.array([0.05, 0.1, 0.5, 1.0, 5.0, 10.0])
    if r_samples is None:
        r_samples = np.linspace(0.0, 8.0, 33)
    n = model.dimension
    c1 = 0.0
    for t in t_samples:
        k = heat_kernel(model, float(t), r_samples)
        envelope = t ** (-n / 2.0) * np.exp(-c2 * r_samples**2 / t)
        c1 = max(c1, float(np.max(k / envelope)))
    return c1, c2


# ---------------------------------------------------------------------------
# radial grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialGrid:
    """Radial nodes with exact per-cell volume weights.

    nodes[0] = 0 is the pole; cell i is [boundaries[i], boundaries[i+1]] and
    weights[i] is its exact volume, so sums of weights reproduce ball volumes.
    """

    model: ManifoldModel
    nodes: np.ndarray
    boundaries: np.ndarray
    weights: np.ndarray
    stretch: float = 1.0

    @property
    def r_max(self) -> float:
        return float(self.boundaries[-1])

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.nodes)))

    def spacing(self) -> np.ndarray:
        """Per-node cell widths."""
        return np.diff(self.boundaries)

    def ball_weight_sum(self, radius: float) -> float:
        """Sum of weights of the cells fully inside the ball of given radius."""
        inside = self.boundaries[1:] <= radius + 1e-15
        return float(np.sum(self.weights[inside]))

    def integrate(self, values) -> float:
        """Volume integral of a radial field sampled at the nodes."""
        return float(np.dot(np.asarray(values, float), self.weights))


def build_radial_grid(model: ManifoldModel, r_max: float, n_nodes: int,
                      stretch: float = 2.0) -> RadialGrid:
    """Graded radial grid on [0, r_max] with exact volume weights.

    Nodes follow r_i = r_max (i/M)^stretch, clustering at the pole for
    stretch > 1.  Cell boundaries sit at midpoints between nodes; each weight
    is the exact antiderivative of the area element over its cell.
    """
    if r_max <= 0:
        raise ConfigurationError("r_max must be > 0")
    if n_nodes < 16:
        raise ConfigurationError(f"need at least 16 nodes, got {n_nodes}")
    if stretch <= 0:
        raise ConfigurationError("stretch must be > 0")
    m = n_nodes
    idx = np.arange(m + 1, dtype=float) / m
    nodes = r_max * idx**stretch
    boundaries = np.empty(m + 2)
    boundaries[0] = 0.0
    boundaries[1:-1] = 0.5 * (nodes[:-1] + nodes[1:])
    boundaries[-1] = r_max
    vols = model.ball_volume(boundaries)
    weights = np.diff(vols)
    if np.any(weights <= 0):
        raise ConfigurationError("grid produced non-positive volume weights")
    return RadialGrid(model=model, nodes=nodes, boundaries=boundaries,
                      weights=weights, stretch=stretch)
