"""Resonant eigenmodes off the boundary and their behaviour in the narrow gap."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import CurveSpec, GapRegion, Mesh, auto_nodes, discretize, gap_region, gap_width, make_pair
from .layerpot import assemble_S, eval_gradient, eval_potential, locate_points
from .resonance import (
    MediumParams,
    ResonanceError,
    ResonanceResult,
    find_resonance,
    leading_order_omega1,
    leading_order_omega2,
)
from .statics import ConditioningError, compute_alpha, solve_zeta

K_REF = 1e-3


def _split_points(mesh: Mesh, points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    inside = locate_points(mesh, points) >= 0
    return points, inside


def eigenmode_field(mesh: Mesh, result: ResonanceResult, points, gradient: bool = False):
    """``S^{k_b}[phi]`` inside the inclusions and ``S^k[psi]`` outside."""
    medium = result.medium
    points, inside = _split_points(mesh, points)
    shape = (len(points), 2) if gradient else (len(points),)
    out = np.zeros(shape, dtype=complex)
    evaluate = eval_gradient if gradient else eval_potential
    k, kb = medium.k(result.omega), medium.k_b(result.omega)
    if np.any(inside):
        out[inside] = evaluate(mesh, result.phi, kb, points[inside])
    if np.any(~inside):
        out[~inside] = evaluate(mesh, result.psi, k, points[~inside])
    return out


def boundary_limits(mesh: Mesh, result: ResonanceResult, offset: float = 1e-3, nodes=None):
    """Interior and exterior limits of the mode at boundary nodes.

    Each side is sampled at ``x -+ j * offset * nu`` for ``j = 1, 2, 3`` and
    extrapolated with ``3 f1 - 3 f2 + f3``.  Returns ``(exterior, interior)``.
    """
    nodes = np.arange(mesh.size) if nodes is None else np.asarray(nodes)
    x, nu = mesh.nodes[nodes], mesh.normals[nodes]
    out = []
    for side in (+1.0, -1.0):
        f = [eigenmode_field(mesh, result, x + side * j * offset * nu) for j in (1, 2, 3)]
        out.append(3 * f[0] - 3 * f[1] + f[2])
    return out[0], out[1]


def boundary_means(mesh: Mesh, result: ResonanceResult) -> np.ndarray:
    """Arclength means of the exterior trace ``S^k[psi]`` on each curve."""
    k = result.medium.k(result.omega)
    trace = assemble_S(mesh, k).entries @ result.psi.values
    return np.array([mesh.integrate(trace, curve=i) / mesh.arclengths[i] for i in range(mesh.n_curves)])


def pinning_factor(mesh: Mesh, result: ResonanceResult) -> complex:
    """Scale that makes the mean of ``u`` over the upper boundary equal to +1.

    For the dipole the lower mean is then close to -1, for the monopole +1.
    """
    return 1.0 / boundary_means(mesh, result)[0]


@dataclass(frozen=True, eq=False)
class GapProfile:
    epsilon: float
    mode: str
    points: np.ndarray  # (n, 2) sample points, midline first then the vertical segment
    u: np.ndarray
    grad_u: np.ndarray  # (n, 2)
    on_midline: np.ndarray  # bool mask
    delta_of_x1: np.ndarray  # gap width at each sample's abscissa
    scale: complex  # normalization applied to the raw eigenmode
    center_gradient: complex  # d u / d x2 at the gap centre

    @property
    def grad_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.grad_u) ** 2, axis=1))

    @property
    def max_gradient(self) -> float:
        return float(np.max(self.grad_norm))


def gap_sample_points(region: GapRegion, n_samples: int):
    """Midline samples on ``|x1| <= R0/2`` and a vertical segment through the gap centre."""
    x1 = np.linspace(-region.R0 / 2, region.R0 / 2, n_samples)
    mid = np.array([[a, region.midline(a)] for a in x1])
    half = region.epsilon / 2
    x2 = np.linspace(-half, half, n_samples + 2)[1:-1]
    vert = np.stack([np.zeros_like(x2), x2], axis=1)
    return mid, vert


def gap_profile(mesh: Mesh, result: ResonanceResult, n_samples: int = 21, normalize: bool = True) -> GapProfile:
    """Eigenmode and gradient on the mid-gap curve and the contact axis."""
    pair = mesh.pair
    if pair is None:
        raise ValueError("gap profiles need a mesh built from an inclusion pair")
    if mesh.warnings_:
        warnings.warn(mesh.warnings_[0], stacklevel=2)
    region = gap_region(pair)
    mid, vert = gap_sample_points(region, n_samples)
    centre = np.array([[0.0, 0.0]])
    pts = np.vstack([mid, vert, centre])
    scale = pinning_factor(mesh, result) if normalize else 1.0
    u = scale * eigenmode_field(mesh, result, pts)
    g = scale * eigenmode_field(mesh, result, pts, gradient=True)
    widths = np.array([gap_width(region, x) for x in pts[:, 0]])
    n = len(mid) + len(vert)
    return GapProfile(
        epsilon=pair.epsilon,
        mode=result.mode,
        points=pts[:n],
        u=u[:n],
        grad_u=g[:n],
        on_midline=np.arange(n) < len(mid),
        delta_of_x1=widths[:n],
        scale=complex(scale),
        center_gradient=complex(g[n, 1]),
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlowupFit:
    """Least-squares fit ``log y = exponent * log(1/eps) + log(prefactor)``."""

    exponent: float
    prefactor: float
    r_squared: float
    n_points: int
    decades: float

    @property
    def reportable(self) -> bool:
        return self.n_points >= 4 and self.decades >= 1.5 - 1e-9 and self.r_squared >= 0.99

    @property
    def slope(self) -> float:
        """Slope of ``log y`` against ``log eps``."""
        return -self.exponent


def fit_power_law(epsilons, values) -> BlowupFit:
    eps = np.asarray(epsilons, dtype=float)
    y = np.abs(np.asarray(values))
    X = np.log(1.0 / eps)
    Y = np.log(y)
    p, c = np.polyfit(X, Y, 1)
    resid = Y - (p * X + c)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return BlowupFit(float(p), float(math.exp(c)), r2, len(eps), float(np.log10(eps.max() / eps.min())))


@dataclass(frozen=True)
class SweepPoint:
    epsilon: float
    N: int
    mutual: float  # Re(alpha_12 - alpha_11)
    omega: dict = field(default_factory=dict)  # mode -> complex omega
    center_gradient: dict = field(default_factory=dict)  # mode -> |d_x2 u(0, 0)|
    max_gradient: dict = field(default_factory=dict)  # mode -> max |grad u| over gap samples
    failure: str = ""


def resonance_pair(mesh: Mesh, medium: MediumParams, k_ref: float = K_REF, tol: float = 1e-12,
                   maxiter: int = 60, alpha=None):
    """Capacitance coefficients and both subwavelength resonances of a pair mesh.

    Returns ``(alpha, {"monopole": result, "dipole": result})``.  Each search
    is seeded from its leading-order formula; a search landing on the other
    mode raises :class:`ResonanceError`.
    """
    if alpha is None:
        alpha = compute_alpha(mesh, solve_zeta(mesh, k_ref))
    area = float(mesh.areas[0])
    seeds = {
        "monopole": leading_order_omega1(medium, area),
        "dipole": leading_order_omega2(medium, alpha, area),
    }
    results = {}
    for mode, seed in seeds.items():
        res = find_resonance(mesh, medium, seed, tol=tol, maxiter=maxiter)
        if res.mode != mode:
            raise ResonanceError(f"search seeded for the {mode} converged to a {res.mode}")
        results[mode] = res
    return alpha, results


def sweep_point(spec: CurveSpec, medium: MediumParams, epsilon: float, N: int | None = None,
                n_samples: int = 11, k_ref: float = K_REF) -> SweepPoint:
    """Full pipeline at one gap width: capacitance, both resonances, gap gradients."""
    pair = make_pair(spec, epsilon)
    N = auto_nodes(pair) if N is None else N
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mesh = discretize(pair, N)
    omega, centre, peak = {}, {}, {}
    try:
        alpha = compute_alpha(mesh, solve_zeta(mesh, k_ref))
    except ConditioningError as exc:
        return SweepPoint(epsilon, N, math.nan, failure=str(exc))
    try:
        _, results = resonance_pair(mesh, medium, k_ref, alpha=alpha)
        for mode, res in results.items():
            prof = gap_profile(mesh, res, n_samples)
            omega[mode] = res.omega
            centre[mode] = abs(prof.center_gradient)
            peak[mode] = prof.max_gradient
    except ResonanceError as exc:
        return SweepPoint(epsilon, N, float(alpha.mutual.real), omega, centre, peak, failure=str(exc))
    return SweepPoint(epsilon, N, float(alpha.mutual.real), omega, centre, peak)


@dataclass(frozen=True)
class SweepResult:
    points: list
    alpha_fit: BlowupFit | None
    fits: dict  # mode -> BlowupFit of the gap gradient


def blowup_sweep(spec: CurveSpec, medium: MediumParams, epsilons, N: int | None = None,
                 n_samples: int = 11, jobs: int = 1, k_ref: float = K_REF) -> SweepResult:
    """Run :func:`sweep_point` over ``epsilons`` and fit the blow-up exponents.

    The dipole is fitted on ``|d_x2 u(0,0)|``; the monopole gradient vanishes at
    the centre by symmetry, so its fit uses the maximum over the gap samples.
    """
    epsilons = sorted(float(e) for e in epsilons)
    if len(epsilons) < 4:
        raise ValueError("a blow-up fit needs at least four gap widths")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(sweep_point, spec, medium, e, N, n_samples, k_ref) for e in epsilons]
            points = [f.result() for f in futures]
    else:
        points = [sweep_point(spec, medium, e, N, n_samples, k_ref) for e in epsilons]
    good = [p for p in points if not p.failure]
    finite = [p for p in points if math.isfinite(p.mutual)]
    alpha_fit = fit_power_law([p.epsilon for p in finite], [p.mutual for p in finite]) if len(finite) >= 2 else None
    fits = {}
    if len(good) >= 2:
        eps = [p.epsilon for p in good]
        fits["dipole"] = fit_power_law(eps, [p.center_gradient["dipole"] for p in good])
        fits["monopole"] = fit_power_law(eps, [p.max_gradient["monopole"] for p in good])
    return SweepResult(points, alpha_fit, fits)


def l2_exterior_proxy(mesh: Mesh, result: ResonanceResult, n_radial: int = 24, n_angular: int = 64) -> float:
    """L2 norm of the mode over the disk of radius ``10 diam`` minus the inclusions.

    Stands in for the norm over the unbounded exterior, which is infinite for
    outgoing fields with complex frequency.
    """
    R = 10.0 * mesh.diameter
    r, wr = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * R * (r + 1)
    wr = 0.5 * R * wr
    th = 2 * np.pi * np.arange(n_angular) / n_angular
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([rr.ravel() * np.cos(tt.ravel()), rr.ravel() * np.sin(tt.ravel())], axis=1)
    w = (wr[:, None] * rr * (2 * np.pi / n_angular)).ravel()
    keep = locate_points(mesh, pts) < 0
    vals = eigenmode_field(mesh, result, pts[keep])
    return float(np.sqrt(np.sum(w[keep] * np.abs(vals) ** 2)))
