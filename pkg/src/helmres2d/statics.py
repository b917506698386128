"""Capacitance-type densities and coefficients of the inclusion pair.

``zeta_i`` solves ``S_hat^k zeta_i = chi_i`` where ``chi_i`` is the indicator of
the i-th boundary; ``alpha_ij`` is the integral of ``zeta_i`` over the j-th one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .geometry import Mesh
from .layerpot import Density, assemble_Kstar, assemble_S


class ConditioningError(RuntimeError):
    pass


def solve_refined(A: np.ndarray, b: np.ndarray, steps: int = 1):
    """LU solve followed by ``steps`` rounds of iterative refinement."""
    lu = linalg.lu_factor(A, check_finite=False)
    x = linalg.lu_solve(lu, b, check_finite=False)
    for _ in range(steps):
        x = x + linalg.lu_solve(lu, b - A @ x, check_finite=False)
    return x


def smallest_singular_value(A: np.ndarray) -> float:
    return float(linalg.svdvals(A)[-1])


@dataclass(frozen=True)
class ZetaPair:
    zeta: tuple[Density, Density]
    k: complex
    residual: float


def solve_zeta(mesh: Mesh, k, rtol: float = 1e-10) -> ZetaPair:
    """Solve ``S_hat^k zeta_i = chi_i`` for both curves.

    Evaluating at the interior wavenumber gives the ``xi_i`` densities instead.
    """
    S = assemble_S(mesh, k, hat=True).entries
    chi = np.stack([mesh.indicator(i) for i in range(mesh.n_curves)], axis=1).astype(complex)
    z = solve_refined(S, chi)
    res = float(np.linalg.norm(S @ z - chi) / np.linalg.norm(chi))
    if not res <= rtol:
        raise ConditioningError(
            f"S_hat solve residual {res:.2e}; smallest singular value "
            f"{smallest_singular_value(S):.2e}"
        )
    return ZetaPair(tuple(Density(mesh, z[:, i]) for i in range(mesh.n_curves)), complex(k), res)


@dataclass(frozen=True)
class AlphaMatrix:
    """``alpha[i, j]`` is the integral of ``zeta_i`` over curve ``j``."""

    alpha: np.ndarray
    k_used: complex
    flux: np.ndarray  # the same coefficients from exterior normal-derivative fluxes

    @property
    def sum_alpha1(self) -> complex:
        return complex(self.alpha[0, 0] + self.alpha[0, 1])

    @property
    def sum_alpha2(self) -> complex:
        return complex(self.alpha[1, 0] + self.alpha[1, 1])

    @property
    def mutual(self) -> complex:
        """``alpha_12 - alpha_11``."""
        return complex(self.alpha[0, 1] - self.alpha[0, 0])


def compute_alpha(mesh: Mesh, zeta: ZetaPair) -> AlphaMatrix:
    n = mesh.n_curves
    alpha = np.array([[zeta.zeta[i].curve_integral(j) for j in range(n)] for i in range(n)])
    # exterior trace of the normal derivative is (1/2 + K*) zeta
    K = assemble_Kstar(mesh).entries
    flux = np.empty_like(alpha)
    for i in range(n):
        dn = 0.5 * zeta.zeta[i].values + K @ zeta.zeta[i].values
        for j in range(n):
            flux[i, j] = mesh.integrate(dn, curve=j)
    return AlphaMatrix(alpha=alpha, k_used=zeta.k, flux=flux)


@dataclass(frozen=True)
class LogExpansion:
    zeta10: Density
    t1: float
    constant: float


def solve_log_expansion(mesh: Mesh) -> LogExpansion:
    """Leading term of the small-``k`` expansion of ``zeta_1``.

    Solves ``S phi + c = chi_1`` with ``int phi = 0`` for ``(phi, c)``; the
    coefficient of ``1/ln k`` in ``alpha_1`` is ``t1 = 2 pi c``.
    """
    S = assemble_S(mesh).entries
    n = mesh.size
    T = np.zeros((n + 1, n + 1))
    T[:n, :n] = S
    T[:n, n] = 1.0
    T[n, :n] = mesh.weights
    rhs = np.zeros(n + 1)
    rhs[:n] = mesh.indicator(0)
    sol = solve_refined(T, rhs)
    res = np.linalg.norm(T @ sol - rhs) / np.linalg.norm(rhs)
    if not res <= 1e-10:
        raise ConditioningError(f"augmented system residual {res:.2e}")
    c = float(sol[n])
    return LogExpansion(zeta10=Density(mesh, sol[:n]), t1=2.0 * math.pi * c, constant=c)


def gap_capacitance_asymptotic(lam: float, epsilon: float) -> float:
    """Leading behaviour ``2 pi / sqrt(lam eps)`` of ``alpha_12 - alpha_11``."""
    if not (lam > 0 and epsilon > 0):
        raise ValueError("lambda and epsilon must be positive")
    return 2.0 * math.pi / math.sqrt(lam * epsilon)
