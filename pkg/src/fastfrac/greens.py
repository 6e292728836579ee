"""Green function tables, ring averages, and the discrete potential operator.

Radial functions of distance (Green function, jump kernel, heat kernel) enter
the discretization through their averages over geodesic spheres.  In dimension
three the sphere average has an exact chord representation

    avg_{|y|=r2} f(d(x, y)) = [F(r1+r2) - F(|r1-r2|)] / nrm(r1, r2)

with F an antiderivative of f against the chord measure (delta d delta on R^3,
sinh(a delta) d delta on H^3), which this module exploits; other dimensions
fall back to angular Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import betainc, gamma

from .errors import DomainError, OperatorInconsistencyError
from .geometry import ManifoldModel, RadialGrid
from .subordination import SubordinationQuadrature, green_pointwise, quadrature_for_distances


def angular_cdf(n_dim: int, phi):
    """Normalized measure of the polar cap {angle <= phi} on S^(n_dim-1)."""
    phi = np.asarray(phi, dtype=float)
    if n_dim == 2:
        return np.clip(phi / math.pi, 0.0, 1.0)
    if n_dim == 3:
        return 0.5 * (1.0 - np.cos(np.clip(phi, 0.0, math.pi)))
    sin2 = np.sin(np.clip(phi, 0.0, math.pi)) ** 2
    half = 0.5 * betainc((n_dim - 1) / 2.0, 0.5, sin2)
    return np.where(phi <= math.pi / 2.0, half, 1.0 - half)


def angular_nodes(n_dim: int, peak_width: float, n_per_panel: int = 16):
    """Panels of Gauss-Legendre nodes on [0, pi], graded toward phi = 0.

    peak_width sets the first panel size; panels double until they reach pi.
    Returns (phi, weight) with weight containing the sin^(N-2) measure,
    normalized to integrate to 1.
    """
    edges = [0.0]
    w = max(min(peak_width, math.pi), 1e-4)
    while edges[-1] < math.pi:
        edges.append(min(edges[-1] + w, math.pi))
        w *= 2.0
    gl_x, gl_w = leggauss(n_per_panel)
    phis, wts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        phis.append(0.5 * (hi + lo) + half * gl_x)
        wts.append(half * gl_w)
    phi = np.concatenate(phis)
    wt = np.concatenate(wts) * np.sin(phi) ** (n_dim - 2)
    total = math.sqrt(math.pi) * gamma((n_dim - 1) / 2.0) / gamma(n_dim / 2.0)
    return phi, wt / total


def ring_average_quad(model: ManifoldModel, fn, r1: float, r2: float,
                      peak_width: float | None = None):
    """Sphere average of fn(distance) by angular quadrature (any dimension)."""
    if r1 == 0.0 or r2 == 0.0:
        return float(fn(np.array([max(r1, r2, 1e-300)]))[0])
    if peak_width is None:
        peak_width = 0.2
    phi, wt = angular_nodes(model.dimension, peak_width)
    d = model.pair_distance(r1, r2, np.cos(phi))
    return float(np.dot(fn(d), wt))


@dataclass
class RadialTable:
    """Log-log spline of a positive radial function with power/exponential tails.

    Inside [r_lo, r_hi] values come from a cubic spline of log f vs log r; below
    r_lo a power law fitted to the first points extends the table, above r_hi
    either a power law (Euclidean) or exp(-beta r) r^alpha law (hyperbolic).
    """

    r: np.ndarray
    values: np.ndarray
    spline: CubicSpline
    head_power: float
    head_coef: float
    tail_params: tuple  # ("power", c, p) or ("exp", log_a, alpha, beta)

    @staticmethod
    def build(r: np.ndarray, values: np.ndarray, hyperbolic_tail: bool,
              tail_alpha: float | None = None) -> "RadialTable":
        if np.any(values <= 0):
            raise DomainError("radial table requires positive values")
        logr, logv = np.log(r), np.log(values)
        spline = CubicSpline(logr, logv)
        # head: fit log f = log c + p log r on the first decade
        head = logr <= logr[0] + math.log(10.0)
        p_head, c_head = np.polyfit(logr[head], logv[head], 1)
        tail = logr >= logr[-1] - math.log(5.0)
        if hyperbolic_tail:
            # log f - alpha log r = log a - beta r with alpha fixed
            alpha = tail_alpha if tail_alpha is not None else 0.0
            rhs = logv[tail] - alpha * logr[tail]
            beta, log_a = np.polyfit(r[tail], rhs, 1)
            tail_params = ("exp", log_a, alpha, -beta)
        else:
            p_tail, c_tail = np.polyfit(logr[tail], logv[tail], 1)
            tail_params = ("power", c_tail, p_tail)
        return RadialTable(r=r, values=values, spline=spline,
                           head_power=p_head, head_coef=c_head,
                           tail_params=tail_params)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        lo, hi = self.r[0], self.r[-1]
        below = x < lo
        above = x > hi
        mid = ~(below | above)
        if np.any(mid):
            out[mid] = np.exp(self.spline(np.log(x[mid])))
        if np.any(below):
            out[below] = np.exp(self.head_coef + self.head_power * np.log(x[below]))
        if np.any(above):
            if self.tail_params[0] == "power":
                _, c, p = self.tail_params
                out[above] = np.exp(c + p * np.log(x[above]))
            else:
                _, log_a, alpha, beta = self.tail_params
                out[above] = np.exp(log_a + alpha * np.log(x[above]) - beta * x[above])
        return out


class ChordAntiderivative:
    """F(x) = int_anchor^x f(delta) cw(delta) d delta for the N=3 chord measure.

    cw is delta on R^3 and sinh(a delta) on H^3.  The anchor is the table head;
    below it the fitted head power law continues F analytically, which keeps
    ring averages correct across the kernel singularity.
    """

    def __init__(self, model: ManifoldModel, table: RadialTable, x_max: float):
        if model.dimension != 3:
            raise DomainError("chord antiderivative is specific to dimension 3")
        self.model = model
        self.table = table
        a = model.curvature if model.is_hyperbolic else 0.0
        self._a = a
        r_lo = table.r[0]
        mesh = np.geomspace(r_lo, max(x_max, 2 * r_lo), 4000)
        gl_x, gl_w = leggauss(8)
        mids = 0.5 * (mesh[1:] + mesh[:-1])
        halfs = 0.5 * (mesh[1:] - mesh[:-1])
        pts = mids[:, None] + halfs[:, None] * gl_x
        vals = table(pts.ravel()).reshape(pts.shape) * self._cw(pts)
        segs = halfs * np.sum(gl_w * vals, axis=1)
        self.mesh = mesh
        self.F = np.concatenate([[0.0], np.cumsum(segs)])
        self._interp = CubicSpline(np.log(mesh), self.F)
        # analytic continuation below the anchor: f ~ c x^p
        self._p = table.head_power
        self._c = math.exp(table.head_coef)

    def _cw(self, x):
        if self.model.is_hyperbolic:
            return np.sinh(self._a * np.asarray(x, float))
        return np.asarray(x, float)

    def _head_integral(self, x):
        """int_x^anchor f cw d delta for x below the anchor, via the head law."""
        p, c, lo = self._p, self._c, self.mesh[0]
        x = np.asarray(x, dtype=float)
        if self.model.is_hyperbolic:
            # sinh(a d) ~ a d (1 + (a d)^2/6) over the sub-anchor range
            a = self._a
            def prim(y):
                return c * a * (y ** (p + 2) / (p + 2) + a**2 * y ** (p + 4) / (6 * (p + 4)))
            return prim(lo) - prim(x)
        if abs(p + 2) < 1e-12:
            return c * np.log(lo / x)
        return c * (lo ** (p + 2) - x ** (p + 2)) / (p + 2)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        below = x < self.mesh[0]
        inside = (~below) & (x <= self.mesh[-1])
        above = x > self.mesh[-1]
        if np.any(inside):
            out[inside] = self._interp(np.log(x[inside]))
        if np.any(below):
            out[below] = -self._head_integral(x[below])
        if np.any(above):
            raise DomainError("chord antiderivative queried beyond its range")
        return out

    def ring_average(self, r1, r2):
        """Exact sphere average of the tabulated function between radii r1, r2."""
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        lo = np.abs(r1 - r2)
        hi = r1 + r2
        degenerate = (r1 < 1e-300) | (r2 < 1e-300)
        lo_safe = np.where(degenerate, 1.0, lo)
        hi_safe = np.where(degenerate, 2.0, hi)
        num = self(hi_safe) - self(lo_safe)
        if self.model.is_hyperbolic:
            a = self._a
            nrm = 2.0 * np.sinh(a * r1) * np.sinh(a * r2) / a
        else:
            nrm = 2.0 * r1 * r2
        nrm = np.where(degenerate, 1.0, nrm)
        out = num / nrm
        if np.any(degenerate):
            out = np.where(degenerate, self.table(np.maximum(np.maximum(r1, r2), 1e-300)), out)
        return out

    def ring_average_outside(self, r1, r2, radius: float):
        """Sphere average of f(d) 1_{d > radius}, used by off-center weighted norms."""
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        lo = np.maximum(np.abs(r1 - r2), radius)
        hi = r1 + r2
        empty = hi <= lo
        degenerate = (r1 < 1e-300) | (r2 < 1e-300)
        num = self(np.where(empty, 1.0, np.maximum(hi, lo))) - self(np.where(empty, 1.0, lo))
        if self.model.is_hyperbolic:
            a = self._a
            nrm = 2.0 * np.sinh(a * np.maximum(r1, 1e-300)) * np.sinh(a * np.maximum(r2, 1e-300)) / a
        else:
            nrm = 2.0 * np.maximum(r1, 1e-300) * np.maximum(r2, 1e-300)
        out = np.where(empty, 0.0, num / nrm)
        if np.any(degenerate):
            far = np.maximum(np.maximum(r1, r2), 1e-300)
            out = np.where(degenerate, np.where(far > radius, self.table(far), 0.0), out)
        return out


class GreenEvaluator:
    """Tabulated fractional Green function with its ring-averaged grid matrices.

    Provides the pointwise table G(r), the sphere-averaged matrix between grid
    nodes (cell-integrated near the diagonal, where the kernel singularity
    crosses the cell), the discrete potential operator, and ball integrals of
    powers of G for the integrated bound checks.
    """

    def __init__(self, model: ManifoldModel, s: float, table: RadialTable,
                 chord: ChordAntiderivative | None):
        self.model = model
        self.s = s
        self.table = table
        self._chord = chord

    # -- construction -------------------------------------------------------

    @staticmethod
    def build(model: ManifoldModel, s: float, r_max_table: float,
              r_lo: float = 1e-4, n_points: int = 600,
              quadrature: SubordinationQuadrature | None = None) -> "GreenEvaluator":
        r = np.geomspace(r_lo, r_max_table, n_points)
        if quadrature is None:
            quadrature = quadrature_for_distances(model, s, r_lo, r_max_table)
        vals = green_pointwise(model, s, r, quadrature)
        table = RadialTable.build(r, vals, hyperbolic_tail=model.is_hyperbolic,
                                  tail_alpha=s - 1.0)
        chord = None
        if model.dimension == 3:
            chord = ChordAntiderivative(model, table, x_max=2.5 * r_max_table)
        return GreenEvaluator(model, s, table, chord)

    def __call__(self, r):
        return self.table(np.asarray(r, dtype=float))

    # -- ring averages on a grid -------------------------------------------

    def ring_matrix(self, grid: RadialGrid) -> np.ndarray:
        """Sphere-averaged Green values between all node pairs.

        Entries where the kernel varies appreciably across the target cell
        (the diagonal band and the pole-adjacent block) are volume averages
        over that cell, so the matrix stays finite for every s even though the
        sphere through the singularity diverges for s <= 1/2.
        """
        nodes = grid.nodes
        if self._chord is not None:
            ri, rj = np.meshgrid(nodes, nodes, indexing="ij")
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                mat = np.asarray(self._chord.ring_average(ri, rj))
        else:
            m = nodes.size
            mat = np.empty((m, m))
            for i in range(m):
                for j in range(i, m):
                    d_gap = abs(nodes[i] - nodes[j])
                    pw = 0.5 * (d_gap + 0.05) / max(math.sqrt(nodes[i] * nodes[j]), 1e-6)
                    mat[i, j] = mat[j, i] = ring_average_quad(
                        self.model, self.table, nodes[i], nodes[j], peak_width=pw)
        self._cell_integrate_flagged(grid, mat)
        return mat

    def _cell_integrate_flagged(self, grid: RadialGrid, mat: np.ndarray):
        """Replace entries whose integrand is under-resolved by a node value."""
        nodes, bounds, w = grid.nodes, grid.boundaries, grid.weights
        h = grid.spacing()
        gap = np.abs(nodes[:, None] - nodes[None, :])
        rough = np.maximum(h[:, None], h[None, :]) * 3.0 / (
            gap + 0.5 * (h[:, None] + h[None, :])
        )
        flagged = rough > 0.6
        for i, j in zip(*np.nonzero(np.triu(flagged))):
            cij = self._cell_average(nodes[i], bounds[j], bounds[j + 1], w[j])
            cji = self._cell_average(nodes[j], bounds[i], bounds[i + 1], w[i])
            mat[i, j] = mat[j, i] = 0.5 * (cij + cji)

    def _cell_average(self, r_center: float, b_lo: float, b_hi: float,
                      w_cell: float) -> float:
        """(1/|cell|) int_cell ringavg(r_center, rho) sigma(rho) d rho."""
        pieces = []
        if b_lo < r_center < b_hi:
            pieces = [(b_lo, r_center), (r_center, b_hi)]
        else:
            pieces = [(b_lo, b_hi)]
        gl_x, gl_w = leggauss(8)
        total = 0.0
        for lo, hi in pieces:
            if hi <= lo:
                continue
            # grade geometrically toward the kink end nearest r_center
            kink_at_lo = abs(lo - r_center) < abs(hi - r_center)
            edges = _graded_edges(lo, hi, toward_lo=kink_at_lo, n_panels=4, ratio=4.0)
            for e0, e1 in zip(edges[:-1], edges[1:]):
                half = 0.5 * (e1 - e0)
                rho = 0.5 * (e1 + e0) + half * gl_x
                if self._chord is not None:
                    vals = self._chord.ring_average(np.full_like(rho, r_center), rho)
                else:
                    vals = np.array([
                        ring_average_quad(self.model, self.table, r_center, float(x),
                                          peak_width=0.5 * (abs(x - r_center) + 1e-3)
                                          / max(math.sqrt(max(r_center, 1e-6) * x), 1e-6))
                        for x in rho
                    ])
                sigma = np.asarray(self.model.surface_area(rho))
                total += half * float(np.sum(gl_w * vals * sigma))
        return total / w_cell

    # -- potential operator --------------------------------------------------

    def potential_matrix(self, grid: RadialGrid) -> np.ndarray:
        """Matrix P with (P psi)_i = sum_j ringavg(r_i, r_j) psi_j w_j."""
        return self.ring_matrix(grid) * grid.weights[None, :]

    def apply_potential(self, grid: RadialGrid, field, matrix: np.ndarray | None = None):
        field = np.asarray(field, dtype=float)
        if matrix is None:
            matrix = self.potential_matrix(grid)
        return matrix @ field

    # -- integrated bounds ----------------------------------------------------

    def ball_integral(self, q: float, radius: float) -> float:
        """int_{B_R} G^q dmu, by fine radial quadrature plus the head power law."""
        from .geometry import sphere_area

        n = self.model.dimension
        r_lo = self.table.r[0]
        p_head = self.table.head_power
        c_head = math.exp(self.table.head_coef)
        expo = n + q * p_head  # local power of the integrand's antiderivative
        if expo <= 0:
            raise DomainError("ball integral of G^q diverges at the pole")
        # analytic piece over [0, r_lo] using sigma ~ omega rho^(n-1)
        head = sphere_area(n) * c_head**q * min(r_lo, radius) ** expo / expo
        if radius <= r_lo:
            return head
        mesh = np.geomspace(r_lo, radius, 1200)
        gl_x, gl_w = leggauss(6)
        mids = 0.5 * (mesh[1:] + mesh[:-1])
        halfs = 0.5 * (mesh[1:] - mesh[:-1])
        pts = mids[:, None] + halfs[:, None] * gl_x
        vals = self.table(pts.ravel()).reshape(pts.shape) ** q
        sig = np.asarray(self.model.surface_area(pts.ravel())).reshape(pts.shape)
        body = float(np.sum(halfs * np.sum(gl_w * vals * sig, axis=1)))
        return head + body


def _graded_edges(lo: float, hi: float, toward_lo: bool, n_panels: int, ratio: float):
    """Panel edges on [lo, hi], geometrically refined toward one end."""
    lengths = ratio ** np.arange(n_panels, dtype=float)  # ascending
    if not toward_lo:
        lengths = lengths[::-1]
    lengths = lengths / lengths.sum() * (hi - lo)
    edges = np.concatenate([[lo], lo + np.cumsum(lengths)])
    edges[-1] = hi
    return edges
