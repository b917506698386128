"""Cylinder functions of order 0 and 1 and the small-argument data of the 2D
Helmholtz fundamental solution.

Bessel functions are evaluated by their ascending power series for
``|z| <= Z_SWITCH`` and by the Hankel asymptotic expansion above it.  The
supported region is ``Re z >= 0`` with ``|Re z| <= 50`` and ``|Im z| <= 1``;
arguments outside it still evaluate but raise :class:`AccuracyWarning`.

The fundamental solution uses the sign convention

    G^k(r) = -(i/4) H_0^{(1)}(k r),

whose small-argument limit is ``ln(r)/(2 pi) + eta_k``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061
Z_SWITCH = 12.0
MAX_RELIABLE_ABS = 1.0e3

_SERIES_MAX_TERMS = 80
_ASYMPTOTIC_MAX_TERMS = 40


class AccuracyWarning(UserWarning):
    """Argument lies outside the validated range of the cylinder functions."""


def _check_argument(z: np.ndarray) -> None:
    if np.any(z == 0):
        raise ValueError("cylinder functions of the second kind are singular at z = 0")
    outside = (
        (z.real < 0)
        | (np.abs(z) > MAX_RELIABLE_ABS)
        | (np.abs(z.real) > 50.0)
        | (np.abs(z.imag) > 1.0)
    )
    if np.any(outside):
        warnings.warn(
            "argument outside the validated half-strip Re z in [0, 50], |Im z| <= 1",
            AccuracyWarning,
            stacklevel=3,
        )


def _series_jy(order: int, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending series for J_order and Y_order (order 0 or 1)."""
    q = -(z * z) / 4.0
    log_term = np.log(z / 2.0)
    if order == 0:
        term = np.ones_like(z)
        j = term.copy()
        ysum = np.zeros_like(z)
        harmonic = 0.0
        for m in range(1, _SERIES_MAX_TERMS):
            term = term * q / (m * m)
            harmonic += 1.0 / m
            j = j + term
            ysum = ysum + harmonic * term
            if np.max(np.abs(term)) <= 1e-17 * max(1.0, np.max(np.abs(j))):
                break
        # Y0 = (2/pi)[(ln(z/2) + gamma) J0 - sum_m H_m (-z^2/4)^m / (m!)^2]
        y = (2.0 / np.pi) * ((log_term + EULER_GAMMA) * j - ysum)
        return j, y

    half = z / 2.0
    term = half.copy()  # (z/2)^{2m+1} (-1)^m / (m! (m+1)!) at m = 0
    j = term.copy()
    psi_sum = (1.0 - 2.0 * EULER_GAMMA) * term  # psi(1) + psi(2) = 1 - 2 gamma
    harmonic = 0.0
    for m in range(1, _SERIES_MAX_TERMS):
        term = term * q / (m * (m + 1))
        harmonic_next = harmonic + 1.0 / m
        # psi(m+1) + psi(m+2) = H_m + H_{m+1} - 2 gamma
        coeff = harmonic_next + (harmonic_next + 1.0 / (m + 1)) - 2.0 * EULER_GAMMA
        harmonic = harmonic_next
        j = j + term
        psi_sum = psi_sum + coeff * term
        if np.max(np.abs(term)) <= 1e-17 * max(1.0, np.max(np.abs(j))):
            break
    y = -2.0 / (np.pi * z) + (2.0 / np.pi) * log_term * j - psi_sum / np.pi
    return j, y


def _asymptotic_h12(order: int, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hankel expansions of H^(1) and H^(2), truncated at the smallest term."""
    mu = 4.0 * order * order
    phase = z - order * np.pi / 2.0 - np.pi / 4.0
    pref = np.sqrt(2.0 / (np.pi * z))
    s1 = np.ones_like(z)
    s2 = np.ones_like(z)
    a = np.ones_like(z)
    best = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for m in range(1, _ASYMPTOTIC_MAX_TERMS):
        a = a * (mu - (2 * m - 1) ** 2) / (m * 8.0 * z)
        mag = np.abs(a)
        active &= mag < best
        if not np.any(active):
            break
        best = np.where(active, mag, best)
        s1 = np.where(active, s1 + (1j ** m) * a, s1)
        s2 = np.where(active, s2 + ((-1j) ** m) * a, s2)
    return pref * np.exp(1j * phase) * s1, pref * np.exp(-1j * phase) * s2


def bessel_jy(order: int, z) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(J_order(z), Y_order(z))`` for order 0 or 1 and complex ``z``."""
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are supported")
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    _check_argument(z)
    j = np.empty_like(z)
    y = np.empty_like(z)
    small = np.abs(z) <= Z_SWITCH
    if np.any(small):
        j[small], y[small] = _series_jy(order, z[small])
    if np.any(~small):
        h1, h2 = _asymptotic_h12(order, z[~small])
        j[~small] = 0.5 * (h1 + h2)
        y[~small] = (h1 - h2) / 2j
    if scalar:
        return j[0], y[0]
    return j, y


def hankel1(order: int, z):
    """Hankel function of the first kind, ``H_order^{(1)}(z) = J + iY``."""
    j, y = bessel_jy(order, z)
    return j + 1j * y


def eta(k) -> complex:
    """Constant term ``(ln k + gamma - ln 2)/(2 pi) - i/4`` of the kernel expansion."""
    k = complex(k)
    if k == 0:
        raise ValueError("eta is undefined at k = 0")
    return (np.log(k) + EULER_GAMMA - math.log(2.0)) / (2.0 * np.pi) - 0.25j


def green(k, r):
    """Fundamental solution ``-(i/4) H_0^{(1)}(k r)`` of the Helmholtz operator."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green requires a positive separation")
    return -0.25j * hankel1(0, complex(k) * r)


def green_radial_derivative(k, r):
    """d/dr of :func:`green`, equal to ``(i k / 4) H_1^{(1)}(k r)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green requires a positive separation")
    k = complex(k)
    return 0.25j * k * hankel1(1, k * r)


@dataclass(frozen=True)
class ExpansionCoeffs:
    j: int
    b: float
    c: complex


def expansion_coeffs(j: int) -> ExpansionCoeffs:
    """Coefficients of ``(b_j ln(k r) + c_j) (k r)^{2j}`` in the kernel expansion."""
    if j < 1:
        raise ValueError("expansion order starts at j = 1")
    b = (-1) ** j / (2.0 * np.pi * 4.0 ** j * math.factorial(j) ** 2)
    harmonic = sum(1.0 / n for n in range(1, j + 1))
    c = b * (EULER_GAMMA - math.log(2.0) - 0.5j * np.pi - harmonic)
    return ExpansionCoeffs(j=j, b=b, c=complex(c))
