"""Symmetric inclusion pairs and their periodic-trapezoid discretization.

The upper inclusion ``D1`` touches the line ``x2 = eps/2`` at ``x1 = 0`` and the
lower inclusion ``D2`` is its exact mirror image across the ``x1`` axis.  Each
boundary is described by a smooth 2*pi-periodic parametrization; a mesh is the
set of ``N`` equispaced parameter nodes per curve.

Near-contact accuracy comes from an analytic periodic reparametrization
(:class:`Graded`) whose node density follows the gap profile ``eps + lam x1^2``,
so product quadratures stay spectrally accurate in the new parameter while the
physical spacing at the contact point is a small fraction of ``eps``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize


class GapResolutionWarning(UserWarning):
    """The mesh spacing near the contact point is coarser than the gap scale."""


# ---------------------------------------------------------------------------
# Parametrized curves
# ---------------------------------------------------------------------------


class Curve:
    """A closed, positively oriented, 2*pi-periodic parametrized curve."""

    def evaluate(self, s):
        """Return position, first and second derivative, each of shape (n, 2)."""
        raise NotImplementedError

    def position(self, s):
        return self.evaluate(s)[0]


class Ellipse(Curve):
    def __init__(self, a: float, b: float, center=(0.0, 0.0)):
        self.a = float(a)
        self.b = float(b)
        self.center = np.asarray(center, dtype=float)

    def evaluate(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        c, sn = np.cos(s), np.sin(s)
        x = np.stack([self.center[0] + self.a * c, self.center[1] + self.b * sn], axis=-1)
        dx = np.stack([-self.a * sn, self.b * c], axis=-1)
        ddx = np.stack([-self.a * c, -self.b * sn], axis=-1)
        return x, dx, ddx


class FourierStar(Curve):
    """Radial curve ``r(t) (cos t, sin t)`` with ``r = a0 + sum a_m cos mt + b_m sin mt``."""

    def __init__(self, coefficients, center=(0.0, 0.0)):
        coefficients = [float(c) for c in coefficients]
        if len(coefficients) % 2 == 0:
            raise ValueError("fourier_star coefficients are [a0, a1, b1, a2, b2, ...]")
        self.a0 = coefficients[0]
        self.cos_coeffs = np.array(coefficients[1::2])
        self.sin_coeffs = np.array(coefficients[2::2])
        self.center = np.asarray(center, dtype=float)

    def _radius(self, s):
        m = np.arange(1, len(self.cos_coeffs) + 1)
        ms = np.outer(s, m)
        c, sn = np.cos(ms), np.sin(ms)
        r = self.a0 + c @ self.cos_coeffs + sn @ self.sin_coeffs
        dr = (-sn * m) @ self.cos_coeffs + (c * m) @ self.sin_coeffs
        ddr = (-c * m**2) @ self.cos_coeffs + (-sn * m**2) @ self.sin_coeffs
        return r, dr, ddr

    def evaluate(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        r, dr, ddr = self._radius(s)
        c, sn = np.cos(s), np.sin(s)
        x = np.stack([self.center[0] + r * c, self.center[1] + r * sn], axis=-1)
        dx = np.stack([dr * c - r * sn, dr * sn + r * c], axis=-1)
        ddx = np.stack(
            [ddr * c - 2 * dr * sn - r * c, ddr * sn + 2 * dr * c - r * sn], axis=-1
        )
        return x, dx, ddx


class Graded(Curve):
    """Reparametrization concentrating nodes where the gap ``kappa^2 + theta^2`` is small.

    The inverse map is ``u(theta) = (theta + m A(theta)) / c`` with
    ``A'(theta) = 1 / (kappa^2 + 4 sin^2(theta/2))``, so the node density in
    ``theta`` is ``u'(theta) = (1 + m / (kappa^2 + 4 sin^2(theta/2))) / c`` with
    ``m = rho^2 - kappa^2``.  Near the centre the physical spacing follows the
    gap profile; beyond ``|theta| ~ rho`` it is uniform.  Both ``u`` and its
    inverse are analytic and 2*pi-periodic up to the identity.
    """

    def __init__(self, base: Curve, s_center: float, kappa: float, rho: float):
        if not 0 < kappa < rho:
            raise ValueError("grading needs 0 < kappa < rho")
        self.base = base
        self.s_center = float(s_center)
        self.kappa = float(kappa)
        self.rho = float(rho)
        self._m = rho * rho - kappa * kappa
        self._K = math.sqrt(kappa * kappa + 4.0) / kappa
        self._a = 2.0 / (kappa * math.sqrt(kappa * kappa + 4.0))
        self.c = 1.0 + self._m / (kappa * math.sqrt(kappa * kappa + 4.0))

    def _u(self, theta):
        wrapped = np.remainder(theta + np.pi, 2 * np.pi) - np.pi
        turns = np.round((theta - wrapped) / (2 * np.pi))
        A = np.arctan2(self._K * np.sin(wrapped / 2), np.cos(wrapped / 2)) + turns * np.pi
        return (theta + self._m * self._a * A) / self.c

    def _du(self, theta):
        q = 4.0 * np.sin(theta / 2) ** 2
        return (1.0 + self._m / (self.kappa**2 + q)) / self.c, q

    def warp(self, s):
        """Return ``theta(s)``, ``theta'(s)`` and ``theta''(s)`` relative to the centre."""
        s = np.asarray(s, dtype=float) - self.s_center
        lo = s - np.pi
        hi = s + np.pi
        theta = s.copy()
        for _ in range(200):
            g = self._u(theta) - s
            lo = np.where(g < 0, theta, lo)
            hi = np.where(g > 0, theta, hi)
            du, _ = self._du(theta)
            step = theta - g / du
            bad = (step <= lo) | (step >= hi)
            new = np.where(bad, 0.5 * (lo + hi), step)
            if np.max(np.abs(new - theta)) < 1e-15:
                theta = new
                break
            theta = new
        du, q = self._du(theta)
        d2u = -self._m * 2.0 * np.sin(theta) / (self.kappa**2 + q) ** 2 / self.c
        return theta + self.s_center, 1.0 / du, -d2u / du**3

    def evaluate(self, s):
        theta, w1, w2 = self.warp(np.atleast_1d(s))
        x, dx, ddx = self.base.evaluate(theta)
        return x, dx * w1[:, None], ddx * (w1**2)[:, None] + dx * w2[:, None]


class Mirrored(Curve):
    """Reflection across the x1 axis with reversed parameter, keeping orientation."""

    def __init__(self, base: Curve):
        self.base = base

    def evaluate(self, s):
        x, dx, ddx = self.base.evaluate(-np.atleast_1d(np.asarray(s, dtype=float)))
        flip = np.array([1.0, -1.0])
        return x * flip, -dx * flip, ddx * flip


# ---------------------------------------------------------------------------
# Curve specification and the symmetric pair
# ---------------------------------------------------------------------------

CURVE_KINDS = ("disk", "ellipse", "fourier_star")
GRADING_SPREAD = 16.0


@dataclass(frozen=True)
class CurveSpec:
    """Shape of the upper inclusion, independent of its placement.

    ``disk`` takes ``radius``; ``ellipse`` takes ``a`` (horizontal) and ``b``
    (vertical) semi-axes; ``fourier_star`` takes ``coefficients``.
    """

    kind: str
    radius: float | None = None
    a: float | None = None
    b: float | None = None
    coefficients: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}; expected one of {CURVE_KINDS}")
        if self.kind == "disk" and not (self.radius and self.radius > 0):
            raise ValueError("disk requires a positive radius")
        if self.kind == "ellipse" and not (self.a and self.b and self.a > 0 and self.b > 0):
            raise ValueError("ellipse requires positive semi-axes a and b")
        if self.kind == "fourier_star":
            if not self.coefficients:
                raise ValueError("fourier_star requires coefficients")
            object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @classmethod
    def disk(cls, radius: float = 1.0) -> "CurveSpec":
        return cls("disk", radius=radius)

    @classmethod
    def ellipse(cls, a: float, b: float) -> "CurveSpec":
        return cls("ellipse", a=a, b=b)

    @classmethod
    def fourier_star(cls, coefficients) -> "CurveSpec":
        return cls("fourier_star", coefficients=tuple(coefficients))

    def curve(self, center=(0.0, 0.0)) -> Curve:
        if self.kind == "disk":
            return Ellipse(self.radius, self.radius, center)
        if self.kind == "ellipse":
            return Ellipse(self.a, self.b, center)
        return FourierStar(self.coefficients, center)


def _lowest_point(curve: Curve) -> float:
    """Parameter of the global minimum of x2 on the curve."""
    s = np.linspace(-np.pi, np.pi, 4096, endpoint=False)
    i = int(np.argmin(curve.position(s)[:, 1]))
    h = 2 * np.pi / 4096
    slope = lambda t: curve.evaluate(t)[1][0, 1]
    return float(optimize.brentq(slope, s[i] - h, s[i] + h, xtol=1e-15, rtol=1e-15))


def signed_curvature(dx: np.ndarray, ddx: np.ndarray) -> np.ndarray:
    speed = np.hypot(dx[:, 0], dx[:, 1])
    return (dx[:, 0] * ddx[:, 1] - dx[:, 1] * ddx[:, 0]) / speed**3


@dataclass(frozen=True)
class InclusionPair:
    """Upper curve ``D1`` touching ``x2 = eps/2`` at the origin's vertical and its mirror."""

    spec: CurveSpec
    epsilon: float
    upper: Curve  # D1 in its natural parameter
    contact_parameter: float
    lam: float  # curvature of the boundary at the contact points

    @property
    def lower(self) -> Curve:
        return Mirrored(self.upper)

    @property
    def closest_points(self) -> np.ndarray:
        return np.array([[0.0, self.epsilon / 2], [0.0, -self.epsilon / 2]])

    @property
    def contact_speed(self) -> float:
        _, dx, _ = self.upper.evaluate(self.contact_parameter)
        return float(np.hypot(*dx[0]))

    def grading(self, spread: float = GRADING_SPREAD) -> tuple[float, float] | None:
        """``(kappa, rho)`` of the graded parametrization, or None when the gap is wide.

        ``kappa`` is the gap half-scale ``sqrt(eps/lam)`` in parameter units and
        ``rho^2 = spread * kappa``.
        """
        kappa = math.sqrt(self.epsilon / self.lam) / self.contact_speed
        rho = min(math.sqrt(spread * kappa), 1.0)
        if rho <= 2.0 * kappa:
            return None
        return kappa, rho


def make_pair(spec: CurveSpec, epsilon: float) -> InclusionPair:
    """Place ``spec`` above the x1 axis so the mirror pair has gap ``epsilon`` at ``x1 = 0``."""
    if not epsilon > 0:
        raise ValueError("gap width epsilon must be positive")
    shape = spec.curve()
    s_c = _lowest_point(shape)
    x_c, dx_c, ddx_c = shape.evaluate(s_c)
    scale = float(np.max(np.abs(shape.position(np.linspace(0, 2 * np.pi, 64)))))
    if abs(x_c[0, 0]) > 1e-9 * scale:
        raise ValueError(
            f"closest approach of the curve is at x1 = {x_c[0, 0]:.3e}, not at x1 = 0"
        )
    lam = float(signed_curvature(dx_c, ddx_c)[0])
    if not lam > 1e-12:
        raise ValueError("contact point must be strictly convex (positive curvature)")
    offset = (0.0, epsilon / 2.0 - float(x_c[0, 1]))
    upper = spec.curve(center=offset)
    return InclusionPair(spec=spec, epsilon=float(epsilon), upper=upper,
                         contact_parameter=s_c, lam=lam)


# ---------------------------------------------------------------------------
# Mesh
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Mesh:
    """Nodes of one or two closed curves, stacked curve by curve.

    All per-node arrays have length ``n_curves * N``.  ``weights`` already include
    the speed ``|x'(s)|`` so that ``sum(weights * f)`` integrates ``f`` over arclength.
    """

    curves: tuple[Curve, ...]
    N: int
    s: np.ndarray
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    pair: InclusionPair | None = None
    mirror: np.ndarray | None = None  # node index of the reflected node, pairs only
    warnings_: tuple[str, ...] = field(default=())

    @property
    def n_curves(self) -> int:
        return len(self.curves)

    @property
    def size(self) -> int:
        return self.n_curves * self.N

    @property
    def h(self) -> float:
        return 2 * np.pi / self.N

    @cached_property
    def curve_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_curves), self.N)

    @cached_property
    def speed(self) -> np.ndarray:
        return np.hypot(self.d1[:, 0], self.d1[:, 1])

    @cached_property
    def weights(self) -> np.ndarray:
        return self.h * self.speed

    @cached_property
    def normals(self) -> np.ndarray:
        return np.stack([self.d1[:, 1], -self.d1[:, 0]], axis=-1) / self.speed[:, None]

    @cached_property
    def curvature(self) -> np.ndarray:
        return signed_curvature(self.d1, self.d2)

    def curve_slice(self, i: int) -> slice:
        return slice(i * self.N, (i + 1) * self.N)

    def indicator(self, i: int) -> np.ndarray:
        """Characteristic function of the i-th curve as a node vector."""
        return (self.curve_index == i).astype(float)

    @cached_property
    def arclengths(self) -> np.ndarray:
        return np.array([self.weights[self.curve_slice(i)].sum() for i in range(self.n_curves)])

    @cached_property
    def areas(self) -> np.ndarray:
        # divergence theorem with F = x / 2
        flux = 0.5 * np.einsum("ij,ij->i", self.nodes, self.normals) * self.weights
        return np.array([flux[self.curve_slice(i)].sum() for i in range(self.n_curves)])

    @cached_property
    def centroids(self) -> np.ndarray:
        out = []
        for i in range(self.n_curves):
            sl = self.curve_slice(i)
            x, nu, w = self.nodes[sl], self.normals[sl], self.weights[sl]
            # int_D x_j dA = int_dD x_j^2 / 2 nu_j ds
            out.append(0.5 * np.sum(x**2 * nu * w[:, None], axis=0) / self.areas[i])
        return np.array(out)

    @cached_property
    def diameter(self) -> float:
        lo, hi = self.nodes.min(axis=0), self.nodes.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def integrate(self, values, curve: int | None = None):
        values = np.asarray(values)
        if curve is None:
            return np.sum(self.weights * values)
        sl = self.curve_slice(curve)
        return np.sum(self.weights[sl] * values[sl])

    def l2_norm(self, values) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(values) ** 2)))

    def reflect(self, values) -> np.ndarray:
        """Pull back a node vector by the mirror map: ``(P f)(x) = f(x1, -x2)``."""
        if self.mirror is None:
            raise ValueError("mesh has no mirror symmetry")
        return np.asarray(values)[..., self.mirror]

    def area_quadrature(self, curve: int, n_radial: int = 16, stride: int = 1):
        """Points and weights for integrals over the region bounded by one curve.

        Uses rays from the centroid to every ``stride``-th node, Gauss-Legendre in
        the ray parameter and the trapezoid rule along the curve.  Needs the
        region to be star-shaped about its centroid.
        """
        sl = self.curve_slice(curve)
        c = self.centroids[curve]
        x = self.nodes[sl][::stride] - c
        dx = self.d1[sl][::stride]
        jac = (x[:, 0] * dx[:, 1] - x[:, 1] * dx[:, 0]) * (2 * np.pi * stride / self.N)
        if np.any(jac <= 0):
            raise ValueError("region is not star-shaped about its centroid")
        t, wt = np.polynomial.legendre.leggauss(n_radial)
        t, wt = 0.5 * (t + 1), 0.5 * wt
        pts = c + t[:, None, None] * x[None, :, :]
        w = (wt * t)[:, None] * jac[None, :]
        return pts.reshape(-1, 2), w.ravel()

    def fine_nodes(self, curve: int, factor: int):
        """Exact geometry at ``factor * N`` equispaced parameter values of one curve."""
        sl = self.curve_slice(curve)
        s0 = self.s[sl][0]
        s = s0 + 2 * np.pi * np.arange(factor * self.N) / (factor * self.N)
        x, dx, _ = self.curves[curve].evaluate(s)
        return s, x, dx


def mesh_from_curves(curves, N: int) -> Mesh:
    """Mesh of independent curves, each with ``N`` nodes starting at parameter 0."""
    _check_N(N)
    s = 2 * np.pi * np.arange(N) / N
    parts = [c.evaluate(s) for c in curves]
    return Mesh(
        curves=tuple(curves),
        N=N,
        s=np.tile(s, len(curves)),
        nodes=np.concatenate([p[0] for p in parts]),
        d1=np.concatenate([p[1] for p in parts]),
        d2=np.concatenate([p[2] for p in parts]),
    )


def _check_N(N: int) -> None:
    if N % 2 or N < 32:
        raise ValueError("N must be even and at least 32")


def discretize(pair: InclusionPair, N: int, grading: float | None = GRADING_SPREAD) -> Mesh:
    """Discretize both curves with ``N`` nodes each; node 0 sits on the contact point.

    The lower curve is built by reflecting the upper one node by node, so weights,
    curvatures and normals are mirror images exactly.
    """
    _check_N(N)
    params = pair.grading(grading) if grading else None
    upper = Graded(pair.upper, pair.contact_parameter, *params) if params else pair.upper
    s1 = pair.contact_parameter + 2 * np.pi * np.arange(N) / N
    x1, d1, dd1 = upper.evaluate(s1)
    # lower node j is the reflection of upper node (-j mod N), parameter -s1[-j]
    order = (-np.arange(N)) % N
    flip = np.array([1.0, -1.0])
    x2, d2, dd2 = x1[order] * flip, -d1[order] * flip, dd1[order] * flip
    s2 = -s1[order]
    mirror = np.concatenate([N + order, order])

    mesh = Mesh(
        curves=(upper, Mirrored(upper)),
        N=N,
        s=np.concatenate([s1, s2]),
        nodes=np.concatenate([x1, x2]),
        d1=np.concatenate([d1, d2]),
        d2=np.concatenate([dd1, dd2]),
        pair=pair,
        mirror=mirror,
    )
    spacing = float(mesh.weights[0])
    limit = math.sqrt(pair.epsilon / pair.lam) / 4.0
    if spacing > limit:
        msg = (f"node spacing {spacing:.3e} at the contact point exceeds "
               f"sqrt(eps/lambda)/4 = {limit:.3e}; the gap is under-resolved")
        warnings.warn(msg, GapResolutionWarning, stacklevel=2)
        object.__setattr__(mesh, "warnings_", (msg,))
    return mesh


def auto_nodes(pair: InclusionPair, minimum: int = 256) -> int:
    """Nodes per curve for the graded mesh, ``8 / kappa`` rounded up to even.

    The cross-curve kernel is near-singular at parameter distance about
    ``kappa`` from the real axis, so the trapezoid error behaves like
    ``exp(-c N kappa)``; ``N kappa = 8`` gives roughly 1e-7 in the capacitance.
    """
    params = pair.grading()
    n = minimum if params is None else max(minimum, int(math.ceil(8.0 / params[0])))
    return n + (n % 2)


# ---------------------------------------------------------------------------
# Gap region
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GapRegion:
    """Graph description ``x2 = eps/2 + H1(x1)`` of the upper boundary near contact."""

    pair: InclusionPair
    R0: float
    s_left: float
    s_right: float

    @property
    def epsilon(self) -> float:
        return self.pair.epsilon

    @property
    def lam(self) -> float:
        return self.pair.lam

    def _parameter_at(self, x1: float) -> float:
        curve = self.pair.upper
        f = lambda s: curve.position(s)[0, 0] - x1
        return optimize.brentq(f, self.s_left, self.s_right, xtol=1e-15, rtol=1e-15)

    def H1(self, x1: float) -> float:
        s = self._parameter_at(x1)
        return float(self.pair.upper.position(s)[0, 1] - self.pair.epsilon / 2.0)

    def H2(self, x1: float) -> float:
        return -self.H1(x1)

    def midline(self, x1: float) -> float:
        return 0.5 * (self.H1(x1) + self.H2(x1))


def gap_region(pair: InclusionPair) -> GapRegion:
    """Largest window where the boundary graph near contact has slope at most 1."""
    curve, s_c = pair.upper, pair.contact_parameter

    def slope_excess(s):
        _, dx, _ = curve.evaluate(s)
        return abs(dx[0, 1]) - abs(dx[0, 0])

    limits = []
    for direction in (+1.0, -1.0):
        ds = direction * np.pi / 512
        s = s_c
        while slope_excess(s + ds) < 0 and abs(s + ds - s_c) < np.pi:
            s += ds
        edge = optimize.brentq(slope_excess, s, s + ds) if abs(s + ds - s_c) < np.pi else s
        limits.append(edge)
    x_right = curve.position(limits[0])[0, 0]
    x_left = curve.position(limits[1])[0, 0]
    two_r0 = min(abs(x_right), abs(x_left))
    s_lo, s_hi = sorted(limits)
    return GapRegion(pair=pair, R0=two_r0 / 2.0, s_left=s_lo, s_right=s_hi)


def gap_width(region: GapRegion, x1: float) -> float:
    """Vertical distance ``eps + H1(x1) - H2(x1)`` between the two boundaries."""
    if abs(x1) >= 2 * region.R0:
        raise ValueError(f"x1 = {x1} lies outside the gap window |x1| < {2 * region.R0}")
    return region.epsilon + region.H1(x1) - region.H2(x1)
