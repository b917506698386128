"""Desk-scale invariant suite behind ``helmres2d validate``.

Every check is deterministic: random densities come from a seeded generator
and all loops run in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .geometry import CurveSpec, Ellipse, discretize, make_pair, mesh_from_curves
from .layerpot import (
    STATIC,
    assemble_expansion_terms,
    assemble_Kstar,
    assemble_S,
    conormal_traces,
    eval_potential,
)
from .oracles import BipolarPair, circle_kstar_eigenvalue, circle_single_layer_eigenvalue
from .resonance import MediumParams, assemble_A, expand_A
from .specfun import expansion_coeffs, hankel1
from .statics import compute_alpha, solve_log_expansion, solve_zeta

LE, GT, FACTOR, EQ = "le", "gt", "factor", "eq"


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    kind: str = LE

    @property
    def passed(self) -> bool:
        v, t = self.value, self.tolerance
        if not np.isfinite(v):
            return False
        if self.kind == LE:
            return v <= t
        if self.kind == GT:
            return v > t
        if self.kind == EQ:
            return v == t
        if self.kind == FACTOR:
            return 1.0 / t <= v <= t
        raise ValueError(f"unknown check kind {self.kind!r}")


@dataclass(frozen=True)
class ValidationSetup:
    spec: CurveSpec
    epsilon: float = 1e-2
    N: int = 256
    k_ref: float = 1e-3
    n_densities: int = 10
    seed: int = 20240607


def random_densities(mesh, n: int, rng, modes: int = 8) -> list[np.ndarray]:
    """Smooth complex densities: random trigonometric polynomials on each curve."""
    s = mesh.s
    out = []
    for _ in range(n):
        f = np.zeros(mesh.size, dtype=complex)
        for m in range(modes):
            a = rng.normal(size=2) + 1j * rng.normal(size=2)
            f += (a[0] * np.cos(m * s) + a[1] * np.sin(m * s)) / (1 + m)
        out.append(f)
    return out


def _rel(a, b) -> float:
    return float(abs(a - b) / abs(b))


def special_function_checks() -> list[Check]:
    x = np.array([1e-4, 0.5, 1.0, 5.0])
    err = np.max(np.abs(hankel1(0, x) - special.hankel1(0, x)) / np.abs(special.hankel1(0, x)))
    return [Check("hankel1_order0_vs_reference", float(err), 1e-10)]


def circle_checks(N: int = 128) -> list[Check]:
    checks = []
    theta = 2 * np.pi * np.arange(N) / N
    for R in (1.0, 2.0):
        mesh = mesh_from_curves([Ellipse(R, R)], N)
        S = assemble_S(mesh).entries
        K = assemble_Kstar(mesh).entries
        errS, errK = 0.0, 0.0
        for n in range(0, 11):
            e = np.exp(1j * n * theta)
            errS = max(errS, np.max(np.abs(S @ e - circle_single_layer_eigenvalue(R, n) * e)))
            errK = max(errK, np.max(np.abs(K @ e - circle_kstar_eigenvalue(n) * e)))
        tag = f"r{R:g}"
        checks.append(Check(f"circle_{tag}_single_layer_spectrum", float(errS), 1e-8))
        checks.append(Check(f"circle_{tag}_kstar_spectrum", float(errK), 1e-8))
        sv = np.linalg.svd(S, compute_uv=False)
        expected = 1.0 if R == 1.0 else 0.0
        checks.append(Check(f"circle_{tag}_near_null_count", float(np.sum(sv < 1e-6 * sv[0])), expected, EQ))
    mesh = mesh_from_curves([Ellipse(1.0, 1.0)], N)
    worst = min(
        np.linalg.svd(assemble_S(mesh, k, hat=True).entries, compute_uv=False)[-1] for k in (1e-5, 1e-3, 1e-1)
    )
    checks.append(Check("circle_r1_s_hat_smallest_singular", float(worst), 1e-3, GT))
    return checks


def pair_checks(setup: ValidationSetup, jump_sign: float = 1.0) -> list[Check]:
    pair = make_pair(setup.spec, setup.epsilon)
    mesh = discretize(pair, setup.N)
    rng = np.random.default_rng(setup.seed)
    dens = random_densities(mesh, setup.n_densities, rng)
    checks = []

    S0 = assemble_S(mesh).entries
    W = mesh.weights[:, None] * S0
    checks.append(Check("static_single_layer_self_adjoint", float(np.linalg.norm(W - W.T) / np.linalg.norm(W)), 1e-10))
    P = mesh.mirror
    Sk = assemble_S(mesh, 0.3).entries
    checks.append(
        Check("mirror_swap_commutes", float(np.linalg.norm(Sk[np.ix_(P, P)] - Sk) / np.linalg.norm(Sk)), 1e-10)
    )

    # jump relation on the first density (real part keeps it cheap)
    phi = dens[0].real.astype(complex)
    ext, intr = conormal_traces(mesh, phi, STATIC)
    err = mesh.l2_norm(ext - intr - jump_sign * phi) / mesh.l2_norm(phi)
    checks.append(Check("jump_relation", float(err), 1e-3))

    K = assemble_Kstar(mesh).entries
    terms = assemble_expansion_terms(mesh)
    b1 = expansion_coeffs(1).b
    k = setup.k_ref
    quad = [mesh.area_quadrature(i, n_radial=16, stride=2) for i in range(mesh.n_curves)]
    e_minus = e_plus = e_k1 = e_k2 = 0.0
    for f in dens:
        scale = mesh.integrate(np.abs(f))
        total = mesh.integrate(f)
        Sf = None
        for i in range(mesh.n_curves):
            chi = mesh.indicator(i)
            e_minus = max(e_minus, abs(mesh.integrate((-0.5 * f + K @ f) * chi)) / scale)
            e_plus = max(e_plus, abs(mesh.integrate((0.5 * f + K @ f) * chi) - mesh.integrate(f, i)) / scale)
            lhs = mesh.integrate((terms.K1.entries @ f) * chi)
            e_k1 = max(e_k1, _rel(lhs, 4 * b1 * mesh.areas[i] * total))
            pts, w = quad[i]
            Sf = eval_potential(mesh, f, k, pts, hat=True)
            rhs = -4 * b1 * math.log(k) * mesh.areas[i] * total - np.sum(w * Sf)
            e_k2 = max(e_k2, _rel(mesh.integrate((terms.K2.entries @ f) * chi), rhs))
    checks += [
        Check("kstar_minus_half_mean_zero", float(e_minus), 1e-8),
        Check("kstar_plus_half_flux", float(e_plus), 1e-8),
        Check("k1_area_identity", float(e_k1), 1e-6),
        Check("k2_area_identity", float(e_k2), 1e-4),
    ]

    log = solve_log_expansion(mesh)
    checks.append(Check("t1_equals_pi", abs(log.t1 - math.pi), 1e-6))

    alpha = compute_alpha(mesh, solve_zeta(mesh, k))
    a = alpha.alpha
    checks += [
        Check("alpha12_equals_alpha21", _rel(a[0, 1], a[1, 0]), 1e-8),
        Check("alpha11_equals_alpha22", _rel(a[0, 0], a[1, 1]), 1e-8),
        Check("alpha12_minus_alpha11_positive", float(alpha.mutual.real), 0.0, GT),
        Check("alpha_flux_agreement", float(np.max(np.abs(alpha.flux - a)) / np.max(np.abs(a))), 1e-4),
    ]
    if setup.spec.kind == "disk":
        bip = BipolarPair(setup.spec.radius, setup.epsilon)
        checks.append(Check("mutual_vs_bipolar", _rel(alpha.mutual.real, bip.mutual_capacitance), 5e-3))

    checks += expansion_checks(mesh)
    return checks


def _norm(M) -> float:
    return float(np.linalg.norm(M, 2))


def expansion_checks(mesh, ks=(1e-1, 1e-2), deltas=(1e-2, 1e-3)) -> list[Check]:
    """Remainder ratio tests of the small-frequency operator expansions.

    Each value is the measured remainder ratio between the two frequencies
    divided by the predicted one; it must lie within a factor of 2 of 1.
    """
    terms = assemble_expansion_terms(mesh)
    K0 = assemble_Kstar(mesh).entries
    rS, rK = [], []
    for k in ks:
        lk = math.log(k)
        S = assemble_S(mesh, k).entries
        Sh = assemble_S(mesh, k, hat=True).entries
        rS.append(_norm(S - (Sh + k * k * lk * terms.S1.entries + k * k * terms.S2.entries)))
        Kk = assemble_Kstar(mesh, k).entries
        rK.append(_norm(Kk - (K0 + k * k * lk * terms.K1.entries + k * k * terms.K2.entries)))
    order = lambda k: k**4 * abs(math.log(k))
    pred = order(ks[0]) / order(ks[1])
    checks = [
        Check("single_layer_expansion_ratio", rS[0] / rS[1] / pred, 2.0, FACTOR),
        Check("kstar_expansion_ratio", rK[0] / rK[1] / pred, 2.0, FACTOR),
    ]
    for d in deltas:
        medium = MediumParams.from_contrast(d)
        rem = []
        for w in ks:
            A = assemble_A(mesh, medium, w)
            E = expand_A(mesh, medium, w)
            rem.append(_norm(A - (E.A0 + w * w * math.log(w) * E.A11 + w * w * E.A12 + d * E.A01)))
        bound = lambda w: d * w * w * abs(math.log(w)) + w**4 * abs(math.log(w))
        checks.append(Check(f"system_expansion_ratio_delta_{d:g}", rem[0] / rem[1] / (bound(ks[0]) / bound(ks[1])), 2.0, FACTOR))
    return checks


def run_validation(setup: ValidationSetup, jump_sign: float = 1.0) -> list[Check]:
    """All checks in a fixed order.  ``jump_sign=-1`` corrupts the jump relation."""
    return special_function_checks() + circle_checks() + pair_checks(setup, jump_sign)
