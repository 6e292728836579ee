"""Subordination quadrature in log time and the fractional time densities.

Everything fractional in this package is built from the heat kernel through
integrals of the form

    int_0^inf f(t) t^(-1-s) dt      (kernel weight, exponent s in (0,1))
    int_0^inf f(t) t^(s-1) dt       (inverse weight)

and from the subordinator density g_t^(s), the inverse Laplace transform of
x -> exp(-t x^s).  Both are handled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.special import gamma

from .errors import DomainError, QuadratureFailure
from .geometry import ManifoldModel, heat_kernel


def frac_constant(s: float) -> float:
    """Normalization 1/|Gamma(-s)| making the singular kernel nonnegative."""
    return 1.0 / abs(gamma(-s))


@dataclass(frozen=True)
class SubordinationQuadrature:
    """Gauss-Legendre panels in x = log t covering [t_lo, t_hi].

    The split point separates the small-t panels (which must resolve the
    double-exponential rise of heat-kernel integrands) from the large-t tail
    panels.  Weights for both power weights t^(-1-s) dt and t^(s-1) dt are
    derived from the same nodes.
    """

    s: float
    t_nodes: np.ndarray
    log_weights: np.ndarray  # weights for int f(e^x) dx
    t_split: float
    panels_small: int
    panels_large: int
    rel_tol: float

    @property
    def kernel_weights(self) -> np.ndarray:
        """Weights w_q such that sum w_q f(t_q) = int f(t) t^(-1-s) dt."""
        return self.log_weights * self.t_nodes ** (-self.s)

    @property
    def green_weights(self) -> np.ndarray:
        """Weights w_q such that sum w_q f(t_q) = int f(t) t^(s-1) dt."""
        return self.log_weights * self.t_nodes**self.s

    def integrate_kernel(self, f_values: np.ndarray) -> np.ndarray:
        """Apply the t^(-1-s) weight along the last axis of f(t_q) samples."""
        return np.asarray(f_values) @ self.kernel_weights

    def integrate_green(self, f_values: np.ndarray) -> np.ndarray:
        return np.asarray(f_values) @ self.green_weights

    @staticmethod
    def build(s: float, t_lo: float, t_hi: float, t_split: float | None = None,
              points_per_panel: int = 12, panel_width: float = 1.5,
              rel_tol: float = 1e-10) -> "SubordinationQuadrature":
        if not 0 < s < 1:
            raise DomainError(f"exponent s must lie in (0,1), got {s}")
        if not 0 < t_lo < t_hi:
            raise DomainError("need 0 < t_lo < t_hi")
        x_lo, x_hi = math.log(t_lo), math.log(t_hi)
        if t_split is None:
            t_split = math.sqrt(t_lo * t_hi)
        x_split = min(max(math.log(t_split), x_lo), x_hi)
        n_small = max(1, math.ceil((x_split - x_lo) / panel_width))
        n_large = max(1, math.ceil((x_hi - x_split) / panel_width))
        edges = np.concatenate([
            np.linspace(x_lo, x_split, n_small + 1),
            np.linspace(x_split, x_hi, n_large + 1)[1:],
        ])
        gl_x, gl_w = leggauss(points_per_panel)
        xs, ws = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            xs.append(0.5 * (hi + lo) + half * gl_x)
            ws.append(half * gl_w)
        x = np.concatenate(xs)
        return SubordinationQuadrature(
            s=s,
            t_nodes=np.exp(x),
            log_weights=np.concatenate(ws),
            t_split=t_split,
            panels_small=n_small,
            panels_large=n_large,
            rel_tol=rel_tol,
        )

    def check_gamma_identities(self, lam_values=(1e-2, 1e-1, 1.0, 1e1, 1e2)) -> float:
        """Worst relative error against the exact power-function integrals.

        int (e^(-lam t) - 1) t^(-1-s) dt = Gamma(-s) lam^s   and
        int e^(-lam t) t^(s-1) dt = Gamma(s) lam^(-s).
        """
        worst = 0.0
        for lam in lam_values:
            f = np.expm1(-lam * self.t_nodes)
            got = float(self.integrate_kernel(f))
            exact = gamma(-self.s) * lam**self.s
            worst = max(worst, abs(got - exact) / abs(exact))
            got2 = float(self.integrate_green(np.exp(-lam * self.t_nodes)))
            exact2 = gamma(self.s) * lam ** (-self.s)
            worst = max(worst, abs(got2 - exact2) / abs(exact2))
        return worst


def quadrature_for_rates(s: float, lam_min: float = 1e-2, lam_max: float = 1e2,
                         rel_tol: float = 1e-10) -> SubordinationQuadrature:
    """Quadrature adequate for exponentials with rates in [lam_min, lam_max]."""
    # truncation of (e^(-lam t)-1) t^(-1-s): below t_lo costs lam_max t_lo^(1-s)/(1-s);
    # the t^(s-1) weight costs t_lo^s/s against scale Gamma(s) lam_max^(-s)
    t_lo_kernel = (rel_tol * (1 - s) * lam_min**s / (10 * lam_max)) ** (1.0 / (1.0 - s))
    t_lo_green = (0.1 * rel_tol * s * gamma(s) * lam_max ** (-s)) ** (1.0 / s)
    t_lo = min(t_lo_kernel, t_lo_green)
    # above t_hi the kernel weight costs t_hi^(-s)/s against scale lam_min^s,
    # the inverse weight costs e^(-lam_min t) decay
    t_hi_kernel = (10.0 / (rel_tol * s * lam_min**s)) ** (1.0 / s)
    t_hi_green = (46.0 + 2.0 * abs(math.log(lam_min))) / lam_min
    return SubordinationQuadrature.build(s, t_lo, max(t_hi_kernel, t_hi_green),
                                         rel_tol=rel_tol)


def quadrature_for_distances(model: ManifoldModel, s: float, r_min: float,
                             r_max: float, rel_tol: float = 1e-10
                             ) -> SubordinationQuadrature:
    """Quadrature adequate for t-integrals of k(t, r) with r in [r_min, r_max].

    The integrand vanishes double-exponentially below t ~ r_min^2; the tail
    cutoff follows the kernel decay (power law on R^N, spectral gap on H^N).
    """
    n = model.dimension
    t_lo = r_min**2 / 700.0
    if model.is_hyperbolic:
        lam1 = model.spectral_gap
        t_hi = (60.0 + (n - 1) * model.curvature * r_max) / lam1
    else:
        # relative tail control against G(r_max) ~ r_max^(2s-N) for the weaker
        # t^(s-1) weight: t_hi^(s-N/2) <= tol * r_max^(2s-N)
        if n <= 2 * s:
            raise DomainError("need N > 2s for the inverse-power integrals")
        log_t_hi = math.log(10.0 * r_max ** (n - 2 * s) / rel_tol) / (n / 2.0 - s)
        t_hi = math.exp(min(max(log_t_hi, math.log(1e4)), math.log(1e16)))
    return SubordinationQuadrature.build(s, t_lo, t_hi, t_split=r_max**2,
                                         rel_tol=rel_tol)


# ---------------------------------------------------------------------------
# pointwise fractional kernels
# ---------------------------------------------------------------------------


def kernel_pointwise(model: ManifoldModel, s: float, r,
                     quadrature: SubordinationQuadrature | None = None):
    """Singular jump kernel K_s(r) = |Gamma(-s)|^-1 int k(t,r) t^(-1-s) dt."""
    from .errors import SingularityError

    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise SingularityError("the jump kernel is singular at r = 0")
    if quadrature is None:
        quadrature = quadrature_for_distances(model, s, float(r.min()), float(r.max()))
    k = np.stack([heat_kernel(model, t, r) for t in quadrature.t_nodes], axis=-1)
    return frac_constant(s) * quadrature.integrate_kernel(k)


def green_pointwise(model: ManifoldModel, s: float, r,
                    quadrature: SubordinationQuadrature | None = None):
    """Green function G_s(r) = Gamma(s)^-1 int k(t,r) t^(s-1) dt.

    Requires N > 2s; normalized so that the operator pair inverts, matching
    the classical constant on R^N.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        from .errors import SingularityError

        raise SingularityError("the Green function is singular at r = 0")
    if model.dimension <= 2 * s:
        raise DomainError("Green function needs N > 2s")
    if quadrature is None:
        quadrature = quadrature_for_distances(model, s, float(r.min()), float(r.max()))
    k = np.stack([heat_kernel(model, t, r) for t in quadrature.t_nodes], axis=-1)
    return quadrature.integrate_green(k) / gamma(s)


# ---------------------------------------------------------------------------
# subordinator density
# ---------------------------------------------------------------------------


def subordinator_density(s: float, t: float, v) -> np.ndarray:
    """Density g_t^(s)(v) with Laplace transform exp(-t x^s).

    Exact (Levy) formula at s = 1/2; for other s the classical real-axis
    inversion  g_1(v) = pi^-1 int_0^inf e^(-v x - x^s cos(pi s))
    sin(x^s sin(pi s)) dx  is evaluated adaptively, with the scaling
    g_t(v) = t^(-1/s) g_1(v t^(-1/s)).
    """
    if not 0 < s < 1:
        raise DomainError(f"subordination order must lie in (0,1), got {s}")
    if t <= 0:
        raise DomainError("need t > 0")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if s == 0.5:
        out = np.zeros_like(v)
        pos = v > 0
        vp = v[pos]
        out[pos] = t / math.sqrt(4.0 * math.pi) * vp**-1.5 * np.exp(-(t**2) / (4.0 * vp))
        return out
    scale = t ** (-1.0 / s)
    out = np.array([_stable_density_unit(s, float(u)) for u in v * scale])
    return scale * out


def _stable_density_unit(s: float, v: float) -> float:
    if v <= 0:
        return 0.0
    # left tail: g_1(v) <= exp(-(1-s) s^(s/(1-s)) v^(-s/(1-s))); below double
    # precision the oscillatory integral cannot resolve it, so cut it off
    tail_exponent = (1.0 - s) * s ** (s / (1.0 - s)) * v ** (-s / (1.0 - s))
    if tail_exponent > 40.0:
        return 0.0
    c, d = math.cos(math.pi * s), math.sin(math.pi * s)
    if v >= 1.0:
        # substitute u = v x so the e^(-u) decay sets the scale
        def f(u):
            y = (u / v) ** s
            return math.exp(-u - c * y) * math.sin(d * y) / v

        val, err = quad(f, 0.0, 60.0, limit=400)
    else:

        def f(x):
            return math.exp(-v * x - c * x**s) * math.sin(d * x**s)

        hi = 60.0 / v
        if c < 0:  # s > 1/2: growth |c| x^s before e^(-vx) wins
            for _ in range(40):
                hi = (60.0 + abs(c) * hi**s) / v
        val, err = quad(f, 0.0, hi, limit=800, full_output=1)[:2]
    if err > 1e-4 * max(abs(val), 1.0):
        raise QuadratureFailure("stable-density inversion", err)
    return max(val / math.pi, 0.0)


def subordinator_grid(s: float, t: float, n_panels: int | None = None,
                      points_per_panel: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Log-spaced Gauss-Legendre nodes/weights covering the mass of g_t^(s).

    The upper cutoff tracks the heavy tail g ~ v^(-1-s): mass beyond v_hi
    scales like v_hi^(-s), so v_hi grows as s decreases.
    """
    scale = t ** (1.0 / s)
    v_lo, v_hi = scale * 1e-5, scale * (3e7) ** (1.0 / s)
    if n_panels is None:
        n_panels = max(24, math.ceil((math.log(v_hi) - math.log(v_lo)) / 1.2))
    gl_x, gl_w = leggauss(points_per_panel)
    edges = np.linspace(math.log(v_lo), math.log(v_hi), n_panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        xs.append(0.5 * (hi + lo) + half * gl_x)
        ws.append(half * gl_w)
    x = np.concatenate(xs)
    v = np.exp(x)
    return v, np.concatenate(ws) * v  # weights include the dv = v dx measure


def subordinator_laplace(s: float, t: float, x: float) -> float:
    """Numerical Laplace transform of g_t^(s), for validation against exp(-t x^s)."""
    v, w = subordinator_grid(s, t)
    g = subordinator_density(s, t, v)
    return float(np.sum(w * g * np.exp(-x * v)))


def subordinator_moment(s: float, t: float, beta: float) -> float:
    """int g_t^(s)(v) v^(-beta) dv, finite for every beta > 0."""
    v, w = subordinator_grid(s, t)
    g = subordinator_density(s, t, v)
    return float(np.sum(w * g * v ** (-beta)))


def frac_heat_kernel(model: ManifoldModel, s: float, t: float, r) -> np.ndarray:
    """Pointwise kernel of exp(-t (-Laplacian)^s) by subordination in time."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    v, w = subordinator_grid(s, t)
    g = subordinator_density(s, t, v)
    k = np.stack([heat_kernel(model, float(vq), r) for vq in v], axis=-1)
    return k @ (w * g)
