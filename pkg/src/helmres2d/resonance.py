"""Subwavelength resonances of the inclusion pair.

The densities ``(phi, psi)`` of the layer-potential representation satisfy
``A(omega, delta) [phi; psi] = rhs`` with

    A = [[ S^{k_b},               -S^k                  ],
         [ -1/2 + K^{k_b,*},      -delta (1/2 + K^{k,*}) ]]

A resonance is a complex ``omega`` at which ``A`` has a nontrivial kernel.  The
second block row is multiplied by the diameter of the pair so both rows carry
comparable scales.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import lambertw

from .geometry import Mesh
from .layerpot import Density, assemble_expansion_terms, assemble_Kstar, assemble_S
from .statics import AlphaMatrix


class ResonanceError(RuntimeError):
    pass


class ContrastWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MediumParams:
    """Densities and bulk moduli outside (``rho``, ``kappa``) and inside the inclusions."""

    rho: float
    kappa: float
    rho_b: float
    kappa_b: float

    def __post_init__(self):
        for name in ("rho", "kappa", "rho_b", "kappa_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_contrast(cls, delta: float, v: float = 1.0, v_b: float = 1.0) -> "MediumParams":
        return cls(rho=1.0, kappa=v * v, rho_b=delta, kappa_b=delta * v_b * v_b)

    @property
    def v(self) -> float:
        return math.sqrt(self.kappa / self.rho)

    @property
    def v_b(self) -> float:
        return math.sqrt(self.kappa_b / self.rho_b)

    @property
    def delta(self) -> float:
        return self.rho_b / self.rho

    @property
    def tau(self) -> float:
        return self.v / self.v_b

    def k(self, omega) -> complex:
        return omega / self.v

    def k_b(self, omega) -> complex:
        return omega / self.v_b

    def check_contrast(self) -> None:
        if self.delta > 0.1:
            warnings.warn(f"contrast delta = {self.delta} is not small", ContrastWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# Operator assembly
# ---------------------------------------------------------------------------


def _identity_rows(mesh: Mesh, rows) -> np.ndarray:
    I = np.zeros((len(rows), mesh.size))
    I[np.arange(len(rows)), rows] = 1.0
    return I


def assemble_A(mesh: Mesh, medium: MediumParams, omega, rows=None, scale: float | None = None):
    """Block matrix ``A(omega, delta)`` restricted to target ``rows`` of each block row.

    Returns an array of shape ``(2 R, 2 M)`` where ``R`` is the number of rows
    and ``M`` the number of nodes.  ``scale`` multiplies the second block row and
    defaults to the mesh diameter.
    """
    omega = complex(omega)
    if omega == 0:
        raise ValueError("omega must be nonzero")
    rows = np.arange(mesh.size) if rows is None else np.asarray(rows)
    scale = mesh.diameter if scale is None else scale
    k, kb = medium.k(omega), medium.k_b(omega)
    Sb = assemble_S(mesh, kb, rows=rows).entries
    Kb = assemble_Kstar(mesh, kb, rows=rows).entries
    if k == kb:
        S, K = Sb, Kb
    else:
        S = assemble_S(mesh, k, rows=rows).entries
        K = assemble_Kstar(mesh, k, rows=rows).entries
    I = _identity_rows(mesh, rows)
    top = np.hstack([Sb, -S])
    bottom = scale * np.hstack([-0.5 * I + Kb, -medium.delta * (0.5 * I + K)])
    return np.vstack([top, bottom])


@dataclass(frozen=True, eq=False)
class AExpansion:
    """Terms of ``A ~ A0 + w^2 ln w A11 + w^2 A12 + delta A01`` for ``v = v_b``.

    ``A0`` depends on ``omega`` only through the constant ``eta_k``.
    """

    A0: np.ndarray
    A11: np.ndarray
    A12: np.ndarray
    A01: np.ndarray


def expand_A(mesh: Mesh, medium: MediumParams, omega, scale: float | None = None) -> AExpansion:
    if medium.v != medium.v_b:
        raise ValueError("the expansion is implemented for equal wave speeds")
    omega = complex(omega)
    scale = mesh.diameter if scale is None else scale
    k = medium.k(omega)
    Sh = assemble_S(mesh, k, hat=True).entries
    K0 = assemble_Kstar(mesh).entries
    t = assemble_expansion_terms(mesh)
    I = np.eye(mesh.size)
    Z = np.zeros_like(Sh)
    # k = omega / v, so k^2 ln k = (omega^2 ln omega - omega^2 ln v) / v^2
    v2 = medium.v**2
    lv = math.log(medium.v)
    S1, S2, K1, K2 = t.S1.entries, t.S2.entries, t.K1.entries, t.K2.entries
    A0 = np.block([[Sh, -Sh], [scale * (-0.5 * I + K0), Z]])
    A11 = np.block([[S1, -S1], [scale * K1, Z]]) / v2
    A12 = np.block([[S2 - lv * S1, -(S2 - lv * S1)], [scale * (K2 - lv * K1), Z]]) / v2
    A01 = np.block([[Z, Z], [Z, -scale * (0.5 * I + K0)]])
    return AExpansion(A0, A11, A12, A01)


# ---------------------------------------------------------------------------
# Mirror-symmetry sectors
# ---------------------------------------------------------------------------

SECTORS = {"even": 1.0, "odd": -1.0}


def sector_matrix(mesh: Mesh, medium: MediumParams, omega, sector: str, scale=None):
    """``A`` restricted to mirror-even or mirror-odd densities, in curve-1 unknowns.

    Densities in a sector are determined by their values on curve 1:
    ``f(mirror(j)) = s f(j)`` with ``s = +1`` (even) or ``-1`` (odd).
    """
    s = SECTORS[sector]
    N = mesh.N
    rows = np.arange(N)
    B = assemble_A(mesh, medium, omega, rows=rows, scale=scale)
    M = mesh.size
    cols = np.concatenate([np.arange(N), M + np.arange(N)])
    mirrored = np.concatenate([mesh.mirror[:N], M + mesh.mirror[:N]])
    return B[:, cols] + s * B[:, mirrored]


def expand_sector_vector(mesh: Mesh, f: np.ndarray, sector: str) -> np.ndarray:
    """Full ``[phi; psi]`` from its curve-1 values in a symmetry sector."""
    s = SECTORS[sector]
    N, M = mesh.N, mesh.size
    out = []
    for block in (f[:N], f[N:]):
        full = np.empty(M, dtype=complex)
        full[:N] = block
        full[N:] = s * block[mesh.mirror[N:]]
        out.append(full)
    return np.concatenate(out)


def full_from_sector_rows(mesh: Mesh, B: np.ndarray) -> np.ndarray:
    """Rebuild the full ``A`` from its curve-1 rows using the mirror symmetry."""
    N, M = mesh.N, mesh.size
    perm = np.concatenate([mesh.mirror, M + mesh.mirror])
    blocks = []
    for b in range(2):
        top = B[b * N:(b + 1) * N]
        bottom = top[mesh.mirror[N:]][:, perm]
        blocks.extend([top, bottom])
    return np.vstack(blocks)


# ---------------------------------------------------------------------------
# Small singular values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmallestSingular:
    sigma: float
    right: np.ndarray
    left: np.ndarray


def smallest_singular(A: np.ndarray, lu=None, maxiter: int = 50, rtol: float = 1e-12) -> SmallestSingular:
    """Smallest singular triple by inverse iteration on ``A^H A`` with an LU of ``A``."""
    lu = linalg.lu_factor(A, check_finite=False) if lu is None else lu
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(A.shape[1]) + 1j * rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    sigma = np.inf
    for _ in range(maxiter):
        y = linalg.lu_solve(lu, x, trans=2, check_finite=False)
        z = linalg.lu_solve(lu, y, check_finite=False)
        nz = np.linalg.norm(z)
        x = z / nz
        new = float(np.linalg.norm(A @ x))
        if abs(new - sigma) <= rtol * max(new, 1e-300):
            sigma = new
            break
        sigma = new
    Ax = A @ x
    left = Ax / max(np.linalg.norm(Ax), 1e-300)
    return SmallestSingular(sigma, x, left)


def norm2_estimate(A: np.ndarray, iterations: int = 30) -> float:
    """Largest singular value by power iteration on ``A^H A``."""
    rng = np.random.default_rng(54321)
    x = rng.standard_normal(A.shape[1]).astype(complex)
    x /= np.linalg.norm(x)
    s = 0.0
    for _ in range(iterations):
        y = A.conj().T @ (A @ x)
        ny = np.linalg.norm(y)
        x = y / ny
        if abs(math.sqrt(ny) - s) <= 1e-6 * s:
            s = math.sqrt(ny)
            break
        s = math.sqrt(ny)
    return s


# ---------------------------------------------------------------------------
# Leading-order formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeadingOrderOmega1:
    omega: complex
    residual: float
    alternatives: tuple[complex, ...]


def _omega1_equation(medium: MediumParams, area: float):
    c = math.pi * medium.delta

    def f(w):
        return (w * w / medium.v_b**2) * np.log(w / medium.v) * area + c

    def df(w):
        return (area / medium.v_b**2) * (2 * w * np.log(w / medium.v) + w)

    return f, df


def _newton(f, df, w, maxiter=100, tol=1e-15):
    for _ in range(maxiter):
        step = f(w) / df(w)
        # safeguard: never move by more than half the current modulus
        if abs(step) > 0.5 * abs(w):
            step *= 0.5 * abs(w) / abs(step)
        w = w - step
        if abs(step) <= tol * abs(w):
            return w
    raise ResonanceError("Newton iteration for the monopole frequency did not converge")


def solve_leading_order_omega1(medium: MediumParams, area: float) -> LeadingOrderOmega1:
    """Roots of ``(w^2/v_b^2) ln(w/v) |D1| + pi delta = 0`` near the positive axis.

    With ``x = w/v`` the equation reads ``x^2 ln x = -c`` which is solved by Lambert
    W: ``x = exp(W(-2c)/2)``.  The ``k = -1`` branch gives the small,
    subwavelength root; the principal branch gives a root near ``x = 1`` that is
    returned as an alternative.
    """
    if not medium.delta > 0:
        raise ValueError("delta must be positive")
    f, df = _omega1_equation(medium, area)
    c = math.pi * medium.delta * medium.v_b**2 / (area * medium.v**2)
    roots = []
    for branch in (-1, 0):
        y = complex(lambertw(-2.0 * c, k=branch))
        roots.append(_newton(f, df, medium.v * np.exp(y / 2)))
    roots.sort(key=lambda w: (abs(w.imag), abs(w)))
    main = roots[0] if abs(roots[0].imag) < abs(roots[1].imag) else min(roots, key=abs)
    alternatives = tuple(r for r in roots if r is not main)
    return LeadingOrderOmega1(main, float(abs(f(main))), alternatives)


def leading_order_omega1(medium: MediumParams, area: float) -> complex:
    return solve_leading_order_omega1(medium, area).omega


def leading_order_omega2(medium: MediumParams, alpha: AlphaMatrix | complex, area: float) -> complex:
    """``v_b sqrt((alpha_12 - alpha_11)/|D1|) sqrt(delta)``."""
    mutual = alpha.mutual if isinstance(alpha, AlphaMatrix) else complex(alpha)
    if not mutual.real > 0:
        raise ValueError("alpha_12 - alpha_11 must have positive real part")
    return complex(medium.v_b * np.sqrt(mutual / area) * math.sqrt(medium.delta))


# ---------------------------------------------------------------------------
# Characteristic-value search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MullerResult:
    root: complex
    value: complex
    iterations: int
    converged: bool


def muller(f, z0: complex, z1: complex, z2: complex, tol: float = 1e-12, maxiter: int = 50,
           max_step: float = 0.1) -> MullerResult:
    """Muller's method for a root of the holomorphic function ``f``.

    Steps longer than ``max_step * |z|`` are shortened.
    """
    f0, f1, f2 = f(z0), f(z1), f(z2)
    for it in range(1, maxiter + 1):
        h1, h2 = z1 - z0, z2 - z1
        d1, d2 = (f1 - f0) / h1, (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        disc = np.sqrt(b * b - 4 * a * f2)
        den = b + disc if abs(b + disc) >= abs(b - disc) else b - disc
        if den == 0:
            return MullerResult(z2, f2, it, False)
        dz = -2 * f2 / den
        # keep the iterate in the same half-plane scale as the current guess
        if abs(dz) > max_step * abs(z2):
            dz *= max_step * abs(z2) / abs(dz)
        z0, z1, z2 = z1, z2, z2 + dz
        f0, f1, f2 = f1, f2, f(z2)
        if abs(dz) <= tol * abs(z2) or f2 == 0:
            return MullerResult(z2, f2, it, True)
    return MullerResult(z2, f2, maxiter, False)


@dataclass(frozen=True, eq=False)
class ResonanceResult:
    omega: complex
    sigma_min: float
    norm_A: float
    phi: Density
    psi: Density
    mode: str  # "monopole" or "dipole"
    leading_order_omega: complex
    iterations: int
    residual: float
    medium: MediumParams | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def relative_gap(self) -> float:
        return abs(self.omega - self.leading_order_omega) / abs(self.leading_order_omega)


def _normalize(mesh: Mesh, v: np.ndarray) -> np.ndarray:
    M = mesh.size
    psi = v[M:]
    scale = mesh.l2_norm(psi)
    mean1 = mesh.integrate(psi, curve=0)
    phase = mean1 / abs(mean1) if abs(mean1) > 0 else 1.0
    return v / (scale * phase)


def classify_mode(mesh: Mesh, psi: np.ndarray) -> str:
    """Monopole when ``psi`` is mirror-even, dipole when mirror-odd."""
    if mesh.mirror is not None:
        even = mesh.l2_norm(psi + mesh.reflect(psi))
        odd = mesh.l2_norm(psi - mesh.reflect(psi))
    else:
        even = abs(mesh.integrate(psi, 0) + mesh.integrate(psi, 1))
        odd = abs(mesh.integrate(psi, 0) - mesh.integrate(psi, 1))
    return "monopole" if even >= odd else "dipole"


def _preconditioned_builder(mesh, medium, sector, scale, omega_init):
    """``w -> P A(w)`` with ``P = diag(S_hat^{-1}, I)`` frozen at the seed wavenumber.

    ``S`` smooths, so the first block row of ``A`` carries a continuum of small
    singular values that can hide the resonance.  Multiplying that row by a
    fixed inverse single layer gives a second-kind system with the same
    characteristic values.
    """
    k0 = medium.k(omega_init.real)
    N = mesh.N
    if sector is None:
        Sh = assemble_S(mesh, k0, hat=True).entries
        n = mesh.size
    else:
        Sh = assemble_S(mesh, k0, hat=True, rows=np.arange(N)).entries
        Sh = Sh[:, :N] + SECTORS[sector] * Sh[:, mesh.mirror[:N]]
        n = N
    lu = linalg.lu_factor(Sh, check_finite=False)

    def build(w):
        if sector is None:
            A = assemble_A(mesh, medium, w, scale=scale)
        else:
            A = sector_matrix(mesh, medium, w, sector, scale=scale)
        A[:n] = linalg.lu_solve(lu, A[:n], check_finite=False)
        return A

    return build


def _search(build, omega_init, tol, maxiter):
    B0 = build(omega_init)
    lu0 = linalg.lu_factor(B0, check_finite=False)
    trip = smallest_singular(B0, lu0)
    x, y = trip.left, trip.right

    def g(w):
        z = linalg.lu_solve(linalg.lu_factor(build(w), check_finite=False), x, check_finite=False)
        return 1.0 / np.vdot(y, z)

    return muller(g, omega_init * (1 + 1e-2), omega_init * (1 - 1e-2), omega_init, tol=tol, maxiter=maxiter)


def find_resonance(
    mesh: Mesh,
    medium: MediumParams,
    omega_init: complex,
    sector: str | None = "auto",
    leading_order: complex | None = None,
    tol: float = 1e-12,
    maxiter: int = 60,
) -> ResonanceResult:
    """Locate the characteristic value of ``A`` closest to ``omega_init``.

    Muller iterates on ``g(w) = 1 / (y^H B(w)^{-1} x)`` where ``B`` is the
    preconditioned operator of :func:`_preconditioned_builder` and ``x, y`` are
    its smallest singular vectors at ``omega_init``; ``g`` is holomorphic near
    the characteristic value and has a simple zero there.  On mirror-symmetric meshes the search runs inside a
    symmetry sector; ``auto`` searches both and keeps the root nearest
    ``omega_init``.  The result is certified by the smallest singular value of
    the full matrix and labelled by the symmetry of its null vector.
    """
    medium.check_contrast()
    omega_init = complex(omega_init)
    scale = mesh.diameter
    if mesh.mirror is None:
        sectors = [None]
    elif sector == "auto":
        sectors = list(SECTORS)
    else:
        sectors = [sector]

    found = []
    for s in sectors:
        res = _search(_preconditioned_builder(mesh, medium, s, scale, omega_init), omega_init, tol, maxiter)
        if res.converged and np.isfinite(res.root) and res.root.real > 0:
            found.append((abs(res.root - omega_init), s, res))
    if not found:
        raise ResonanceError(f"characteristic-value search from {omega_init} did not converge")
    _, sector_used, res = min(found, key=lambda item: item[0])
    omega = res.root

    if sector_used is None:
        A_full = assemble_A(mesh, medium, omega, scale=scale)
    else:
        rows = np.arange(mesh.N)
        A_full = full_from_sector_rows(mesh, assemble_A(mesh, medium, omega, rows=rows, scale=scale))
    trip = smallest_singular(A_full)
    normA = norm2_estimate(A_full)
    v = _normalize(mesh, trip.right)
    residual = float(np.linalg.norm(A_full @ v) / np.linalg.norm(v))
    M = mesh.size
    psi = v[M:]
    return ResonanceResult(
        omega=complex(omega),
        sigma_min=trip.sigma,
        norm_A=normA,
        phi=Density(mesh, v[:M]),
        psi=Density(mesh, psi),
        mode=classify_mode(mesh, psi),
        leading_order_omega=complex(omega_init if leading_order is None else leading_order),
        iterations=res.iterations,
        residual=residual,
        medium=medium,
        diagnostics={"sector": sector_used, "row_scale": scale, "g_final": complex(res.value)},
    )


@dataclass(frozen=True)
class SigmaScan:
    """Smallest singular values along real frequencies.

    ``full`` is relative to ``||A||`` for the unpreconditioned system; the
    sector columns use the preconditioned sector operators of the search.
    """

    omega: np.ndarray
    full: np.ndarray
    sectors: dict  # sector -> array


def local_minima(values) -> np.ndarray:
    v = np.asarray(values)
    return np.flatnonzero((v[1:-1] < v[:-2]) & (v[1:-1] < v[2:])) + 1


def sigma_scan(mesh: Mesh, medium: MediumParams, omegas) -> SigmaScan:
    omegas = np.asarray(omegas, dtype=float)
    scale = mesh.diameter
    full = np.empty(len(omegas))
    sectors = {s: np.empty(len(omegas)) for s in SECTORS} if mesh.mirror is not None else {}
    for i, w in enumerate(omegas):
        A = assemble_A(mesh, medium, w, scale=scale)
        full[i] = smallest_singular(A).sigma / norm2_estimate(A)
        for s in sectors:
            B = _preconditioned_builder(mesh, medium, s, scale, complex(w))(w)
            sectors[s][i] = linalg.svdvals(B, check_finite=False)[-1]
    return SigmaScan(omegas, full, sectors)


# ---------------------------------------------------------------------------
# Driven problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityPair:
    phi: Density
    psi: Density
    omega: float
    rcond: float


def plane_wave(medium: MediumParams, omega: float, direction, amplitude: complex = 1.0):
    """Incident field ``u(x) = a exp(i k d.x)`` and its gradient as callables."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    k = medium.k(omega)

    def u(x):
        return amplitude * np.exp(1j * k * (np.atleast_2d(x) @ d))

    def grad(x):
        return 1j * k * u(x)[:, None] * d[None, :]

    return u, grad


def solve_scattering(mesh: Mesh, medium: MediumParams, omega: float, direction=(1.0, 0.0),
                     amplitude: complex = 1.0) -> DensityPair:
    """Solve ``A [phi; psi] = [u_in; delta d_nu u_in]`` for a plane wave."""
    if not (np.isreal(omega) and omega > 0):
        raise ValueError("scattering frequency must be real and positive")
    omega = float(np.real(omega))
    scale = mesh.diameter
    A = assemble_A(mesh, medium, omega, scale=scale)
    u, grad = plane_wave(medium, omega, direction, amplitude)
    uin = u(mesh.nodes)
    dn = np.einsum("pd,pd->p", grad(mesh.nodes), mesh.normals)
    rhs = np.concatenate([uin, scale * medium.delta * dn])
    lu, piv = linalg.lu_factor(A, check_finite=False)
    anorm = np.max(np.sum(np.abs(A), axis=0))
    rcond, _ = linalg.lapack.zgecon(lu, anorm, norm="1")
    if rcond < 1e-14:
        raise ResonanceError(f"scattering system is numerically singular (rcond {rcond:.1e})")
    sol = linalg.lu_solve((lu, piv), rhs, check_finite=False)
    sol = sol + linalg.lu_solve((lu, piv), rhs - A @ sol, check_finite=False)
    M = mesh.size
    return DensityPair(Density(mesh, sol[:M]), Density(mesh, sol[M:]), omega, float(rcond))
