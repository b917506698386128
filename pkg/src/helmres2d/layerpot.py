"""Nystrom discretization of single-layer and adjoint double-layer operators.

Self-interaction blocks use kernel splitting

    K(s, t) |x'(t)| = M1(s, t) ln(4 sin^2((s - t)/2)) + M2(s, t)

with the log part integrated by the spectrally accurate product rule of
:func:`kress_weights` and the smooth remainder ``M2`` by the trapezoid rule.
Blocks that couple two different curves are smooth and use the trapezoid rule
directly.

The wavenumber argument ``k`` is either a complex number or the string
``"static"`` for the Laplace kernel ``ln|x - y| / (2 pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import signal

from .geometry import Mesh
from .specfun import bessel_jy, eta, expansion_coeffs

STATIC = "static"

# direct quadrature is trusted beyond this many local node spacings
CLOSE_FACTOR = 5.0
MAX_UPSAMPLE = 16


def _is_static(k) -> bool:
    return isinstance(k, str) and k == STATIC


def kress_weights(N: int) -> np.ndarray:
    """Weights ``R_m`` with ``int ln(4 sin^2((s-t)/2)) f(t) dt ~ sum_m R_m f(s - t_m)``."""
    if N % 2:
        raise ValueError("log-singular product quadrature requires an even N")
    n = N // 2
    t = 2 * np.pi * np.arange(N) / N
    m = np.arange(1, n)
    R = -(2 * np.pi / n) * (np.cos(np.outer(t, m)) @ (1.0 / m)) - (np.pi / n**2) * np.cos(n * t)
    return R


@dataclass(frozen=True, eq=False)
class BoundaryOperatorMatrix:
    """Dense Nystrom matrix; ``rows`` are the target node indices it was built for."""

    entries: np.ndarray
    kernel_tag: str
    wavenumber: complex | str
    rows: np.ndarray

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, other):
        return self.entries @ np.asarray(other)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True, eq=False)
class Density:
    """Nodal values of a boundary density on all curves of a mesh."""

    mesh: Mesh
    values: np.ndarray

    @cached_property
    def integral(self) -> complex:
        return complex(np.sum(self.mesh.weights * self.values))

    def curve_integral(self, i: int) -> complex:
        return complex(self.mesh.integrate(self.values, curve=i))

    def norm(self) -> float:
        return self.mesh.l2_norm(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


# ---------------------------------------------------------------------------
# Pairwise geometry shared by all assemblies
# ---------------------------------------------------------------------------


@dataclass
class _Pairs:
    rows: np.ndarray
    diff: np.ndarray  # x_i - y_j, shape (R, M, 2)
    r: np.ndarray  # |x_i - y_j| with the self-pairs set to 1
    same: np.ndarray  # both nodes on one curve
    diag: np.ndarray  # i == j
    log4sin2: np.ndarray  # ln(4 sin^2((s_i - s_j)/2)) on same-curve pairs, 0 elsewhere
    kress: np.ndarray  # product weights on same-curve pairs, 0 elsewhere
    speed_j: np.ndarray
    normal_i: np.ndarray

    @property
    def ndotdiff(self) -> np.ndarray:
        """``(x_i - y_j) . nu(x_i)``."""
        return np.einsum("ijk,ik->ij", self.diff, self.normal_i)


def _pairs(mesh: Mesh, rows=None) -> _Pairs:
    rows = np.arange(mesh.size) if rows is None else np.asarray(rows)
    N = mesh.N
    x = mesh.nodes[rows]
    diff = x[:, None, :] - mesh.nodes[None, :, :]
    diag = rows[:, None] == np.arange(mesh.size)[None, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    r[diag] = 1.0
    same = mesh.curve_index[rows][:, None] == mesh.curve_index[None, :]
    m = (rows[:, None] % N - np.arange(mesh.size)[None, :] % N) % N
    with np.errstate(divide="ignore"):
        log4 = np.log(4.0 * np.sin(np.pi * m / N) ** 2)
    log4 = np.where(same & ~diag, log4, 0.0)
    kress = np.where(same, kress_weights(N)[m], 0.0)
    return _Pairs(
        rows=rows, diff=diff, r=r, same=same, diag=diag, log4sin2=log4, kress=kress,
        speed_j=mesh.speed[None, :], normal_i=mesh.normals[rows],
    )


def _split_assemble(mesh: Mesh, p: _Pairs, full, m1, m2_diag):
    """Combine a full kernel, its log coefficient and the diagonal of the smooth part.

    ``full`` is the kernel times the source speed; ``m1`` the coefficient of
    ``ln(4 sin^2)`` (also times source speed); ``m2_diag`` the limit of the smooth
    remainder on the diagonal for every row.
    """
    h = mesh.h
    m2 = full - m1 * p.log4sin2
    m2 = np.where(p.diag, m2_diag[:, None] if np.ndim(m2_diag) else m2_diag, m2)
    return np.where(p.same, p.kress * m1 + h * m2, h * full)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def assemble_S(mesh: Mesh, k=STATIC, hat: bool = False, rows=None) -> BoundaryOperatorMatrix:
    """Single-layer operator; ``hat=True`` gives the static operator plus ``eta_k`` times the mean.

    For ``hat`` the wavenumber only enters through ``eta_k``.
    """
    p = _pairs(mesh, rows)
    sp = p.speed_j
    sp_i = mesh.speed[p.rows]
    if _is_static(k) or hat:
        full = np.log(p.r) / (2 * np.pi) * sp
        m1 = np.broadcast_to(sp / (4 * np.pi), full.shape)
        d = np.log(sp_i**2) * sp_i / (4 * np.pi)
        entries = _split_assemble(mesh, p, full, m1, d)
        tag = "S"
        if hat:
            if _is_static(k):
                raise ValueError("S_hat requires a wavenumber")
            entries = entries + eta(k) * mesh.weights[None, :]
            tag = "S_hat"
        return BoundaryOperatorMatrix(entries, tag, STATIC if not hat else complex(k), p.rows)

    k = complex(k)
    j0, y0 = bessel_jy(0, k * p.r)
    full = (-0.25j * (j0 + 1j * y0)) * sp
    m1 = np.where(p.diag, 1.0, j0) * sp / (4 * np.pi)
    d = (eta(k) + np.log(sp_i) / (2 * np.pi)) * sp_i
    entries = _split_assemble(mesh, p, full, m1, d)
    return BoundaryOperatorMatrix(entries, "S", k, p.rows)


def assemble_Kstar(mesh: Mesh, k=STATIC, rows=None) -> BoundaryOperatorMatrix:
    """Adjoint double layer: principal-value normal derivative at the target node."""
    p = _pairs(mesh, rows)
    sp = p.speed_j
    nd = p.ndotdiff
    sp_i = mesh.speed[p.rows]
    d = mesh.curvature[p.rows] * sp_i / (4 * np.pi)
    if _is_static(k):
        full = nd / (2 * np.pi * p.r**2) * sp
        m1 = np.zeros_like(full)
        return BoundaryOperatorMatrix(_split_assemble(mesh, p, full, m1, d), "Kstar", STATIC, p.rows)
    k = complex(k)
    j1, y1 = bessel_jy(1, k * p.r)
    full = 0.25j * k * (j1 + 1j * y1) * nd / p.r * sp
    m1 = -k / (4 * np.pi) * j1 * nd / p.r * sp
    entries = _split_assemble(mesh, p, full, m1, d)
    return BoundaryOperatorMatrix(entries, "Kstar", k, p.rows)


@dataclass(frozen=True, eq=False)
class ExpansionTerms:
    """First-order terms of the small-``k`` expansion of ``S^k`` and ``K^{k,*}``.

    ``S^k ~ S_hat^k + k^2 ln k S1 + k^2 S2`` and likewise for ``K``.
    """

    S1: BoundaryOperatorMatrix
    S2: BoundaryOperatorMatrix
    K1: BoundaryOperatorMatrix
    K2: BoundaryOperatorMatrix


def assemble_expansion_terms(mesh: Mesh, rows=None) -> ExpansionTerms:
    coeffs = expansion_coeffs(1)
    b1, c1 = coeffs.b, coeffs.c
    p = _pairs(mesh, rows)
    sp = p.speed_j
    r2 = np.where(p.diag, 0.0, p.r**2)
    nd = np.where(p.diag, 0.0, p.ndotdiff)
    lnr2 = np.log(p.r**2)  # zero on the diagonal since r is set to 1 there
    zero = np.zeros(len(p.rows))

    h = mesh.h
    s1 = h * b1 * r2 * sp
    k1 = h * 2 * b1 * nd * sp
    s2 = _split_assemble(mesh, p, (0.5 * b1 * r2 * lnr2 + c1 * r2) * sp, 0.5 * b1 * r2 * sp, zero)
    k2 = _split_assemble(mesh, p, nd * (b1 * lnr2 + b1 + 2 * c1) * sp, b1 * nd * sp, zero)
    wrap = lambda a, tag: BoundaryOperatorMatrix(a, tag, STATIC, p.rows)
    return ExpansionTerms(wrap(s1, "S1"), wrap(s2, "S2"), wrap(k1, "K1"), wrap(k2, "K2"))


# ---------------------------------------------------------------------------
# Off-boundary evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NearestPoint:
    parameter: float
    point: np.ndarray
    distance: float
    outside: bool
    spacing: float  # local node spacing at the nearest point


def nearest_points(mesh: Mesh, curve: int, X):
    """Closest points of one curve to each row of ``X``: node search, then Newton.

    Returns arrays ``(parameter, point, distance, outside, spacing)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sl = mesh.curve_slice(curve)
    nodes = mesh.nodes[sl]
    d2 = np.sum((X[:, None, :] - nodes[None]) ** 2, axis=2)
    i = np.argmin(d2, axis=1)
    node_dist = np.sqrt(d2[np.arange(len(X)), i])
    s = mesh.s[sl][i].copy()
    h = mesh.h
    c = mesh.curves[curve]
    active = np.ones(len(X), dtype=bool)
    for _ in range(30):
        y, d1, dd = c.evaluate(s[active])
        r = y - X[active]
        g = np.einsum("pd,pd->p", r, d1)
        dg = np.einsum("pd,pd->p", d1, d1) + np.einsum("pd,pd->p", r, dd)
        step = np.where(dg > 0, -g / np.where(dg > 0, dg, 1.0), 0.0)
        step = np.clip(step, -h, h)
        s[active] += step
        active[np.flatnonzero(active)[np.abs(step) < 1e-15]] = False
        if not active.any():
            break
    y, d1, _ = c.evaluate(s)
    sp = np.hypot(d1[:, 0], d1[:, 1])
    normal = np.stack([d1[:, 1], -d1[:, 0]], axis=1) / sp[:, None]
    dist = np.hypot(*(X - y).T)
    # the node search may land on a non-global local minimum only for wildly
    # non-convex curves; fall back to the best node in that case
    worse = dist > node_dist
    y[worse] = nodes[i[worse]]
    dist[worse] = node_dist[worse]
    normal[worse] = mesh.normals[sl][i[worse]]
    sp[worse] = mesh.speed[sl][i[worse]]
    s[worse] = mesh.s[sl][i[worse]]
    outside = np.einsum("pd,pd->p", X - y, normal) > 0
    return s, y, dist, outside, sp * h


def nearest_point(mesh: Mesh, curve: int, x) -> NearestPoint:
    """Closest point of one curve to ``x``."""
    s, y, dist, outside, spacing = nearest_points(mesh, curve, np.asarray(x, dtype=float)[None])
    return NearestPoint(float(s[0]), y[0], float(dist[0]), bool(outside[0]), float(spacing[0]))


def locate(mesh: Mesh, x) -> int:
    """Index of the curve containing ``x``, or -1 for the exterior."""
    for i in range(mesh.n_curves):
        if not nearest_point(mesh, i, x).outside:
            return i
    return -1


def locate_points(mesh: Mesh, X) -> np.ndarray:
    """Vectorized :func:`locate`."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.full(len(X), -1, dtype=int)
    for i in reversed(range(mesh.n_curves)):
        out[~nearest_points(mesh, i, X)[3]] = i
    return out


def upsample_factor(distance: float, spacing: float) -> int:
    if distance >= CLOSE_FACTOR * spacing:
        return 1
    return int(min(MAX_UPSAMPLE, max(2, math.ceil(8.0 * spacing / distance))))


def _kernel_values(k, hat, diff, r, gradient: bool):
    if not gradient:
        if _is_static(k) or hat:
            return np.log(r) / (2 * np.pi)
        j0, y0 = bessel_jy(0, complex(k) * r)
        return -0.25j * (j0 + 1j * y0)
    if _is_static(k) or hat:
        dg = 1.0 / (2 * np.pi * r)
    else:
        k = complex(k)
        j1, y1 = bessel_jy(1, k * r)
        dg = 0.25j * k * (j1 + 1j * y1)
    return (dg / r)[..., None] * diff


def _evaluate(mesh: Mesh, density, k, points, hat: bool, gradient: bool):
    values = np.asarray(getattr(density, "values", density))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out_shape = (len(points), 2) if gradient else (len(points),)
    out = np.zeros(out_shape, dtype=complex)
    for c in range(mesh.n_curves):
        sl = mesh.curve_slice(c)
        factors = np.ones(len(points), dtype=int)
        # points far from every node of this curve need no nearest-point solve
        spacing = float(np.max(mesh.weights[sl]))
        node_dist = np.sqrt(np.min(np.sum((points[:, None, :] - mesh.nodes[sl][None]) ** 2, axis=2), axis=1))
        close = np.flatnonzero(node_dist < (CLOSE_FACTOR + 1) * spacing)
        if len(close):
            _, _, dist, _, local = nearest_points(mesh, c, points[close])
            on = dist < 1e-12 * mesh.diameter
            if on.any():
                raise ValueError(f"evaluation point {points[close][on][0]} lies on the boundary")
            factors[close] = [upsample_factor(d, sp) for d, sp in zip(dist, local)]
        for m in np.unique(factors):
            sel = factors == m
            if m == 1:
                y, w, f = mesh.nodes[sl], mesh.weights[sl], values[sl]
            else:
                _, y, dy = mesh.fine_nodes(c, m)
                w = (2 * np.pi / (m * mesh.N)) * np.hypot(dy[:, 0], dy[:, 1])
                f = signal.resample(values[sl], m * mesh.N)
            diff = points[sel][:, None, :] - y[None, :, :]
            r = np.hypot(diff[..., 0], diff[..., 1])
            kern = _kernel_values(k, hat, diff, r, gradient)
            if gradient:
                out[sel] += np.einsum("pjd,j->pd", kern, w * f)
            else:
                out[sel] += kern @ (w * f)
    if hat and not gradient:
        out += eta(k) * np.sum(mesh.weights * values)
    return out


def eval_potential(mesh: Mesh, density, k, points, hat: bool = False):
    """Single-layer potential at points off the boundary.

    Points closer than ``CLOSE_FACTOR`` local node spacings to a curve use a
    trigonometrically upsampled copy of that curve's density.  Returns a scalar
    for a single point.
    """
    single = np.ndim(points) == 1
    out = _evaluate(mesh, density, k, points, hat, gradient=False)
    return out[0] if single else out


def eval_gradient(mesh: Mesh, density, k, points, hat: bool = False):
    """Gradient of the single-layer potential; same close-evaluation rule."""
    single = np.ndim(points) == 1
    out = _evaluate(mesh, density, k, points, hat, gradient=True)
    return out[0] if single else out


def conormal_traces(mesh: Mesh, density, k=STATIC, offset: float | None = None, nodes=None):
    """One-sided normal derivatives of ``S[density]`` at boundary nodes.

    Gradients are sampled at ``x +- j t nu`` for ``j = 1, 2, 3`` and extrapolated
    to ``t = 0`` with the quadratic rule ``3 f1 - 3 f2 + f3``.  ``t`` defaults to
    half the local node spacing.  Returns ``(exterior, interior)``.
    """
    nodes = np.arange(mesh.size) if nodes is None else np.asarray(nodes)
    nu = mesh.normals[nodes]
    t = 0.5 * mesh.weights[nodes] if offset is None else np.full(len(nodes), offset)
    traces = []
    for side in (+1.0, -1.0):
        f = []
        for j in (1, 2, 3):
            pts = mesh.nodes[nodes] + side * j * t[:, None] * nu
            g = eval_gradient(mesh, density, k, pts)
            f.append(np.einsum("pd,pd->p", g, nu))
        traces.append(3 * f[0] - 3 * f[1] + f[2])
    return traces[0], traces[1]
