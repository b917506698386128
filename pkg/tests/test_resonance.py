import math

import numpy as np
import pytest
from scipy import optimize

from conftest import pair_mesh, resonances
from helmres2d.layerpot import assemble_S
from helmres2d.oracles import BipolarPair
from helmres2d.resonance import (
    ContrastWarning,
    MediumParams,
    ResonanceError,
    assemble_A,
    classify_mode,
    expand_A,
    find_resonance,
    leading_order_omega1,
    leading_order_omega2,
    local_minima,
    muller,
    plane_wave,
    sigma_scan,
    solve_leading_order_omega1,
    solve_scattering,
)
from helmres2d.statics import solve_zeta

DELTAS = (1e-3, 1e-4)


def weighted_projection_residual(mesh, psi, basis):
    """``min_c ||psi - c basis|| / ||psi||`` in the arclength inner product."""
    w = mesh.weights
    c = np.sum(w * np.conj(basis) * psi) / np.sum(w * np.abs(basis) ** 2)
    return mesh.l2_norm(psi - c * basis) / mesh.l2_norm(psi)


# -- medium -----------------------------------------------------------------


def test_medium_derived_quantities():
    m = MediumParams(rho=2.0, kappa=8.0, rho_b=0.02, kappa_b=0.5)
    assert m.v == pytest.approx(2.0)
    assert m.v_b == pytest.approx(5.0)
    assert m.delta == pytest.approx(0.01)
    w = 0.3 - 0.01j
    assert m.k_b(w) / m.k(w) == pytest.approx(m.tau)
    with pytest.raises(ValueError):
        MediumParams(1.0, 1.0, 0.0, 1.0)
    with pytest.warns(ContrastWarning):
        MediumParams.from_contrast(0.5).check_contrast()


# -- operator ---------------------------------------------------------------


def test_assemble_A_mirror_swap(mesh):
    A = assemble_A(mesh, MediumParams.from_contrast(1.0), 0.4)
    M = mesh.size
    P = np.concatenate([mesh.mirror, M + mesh.mirror])
    assert A.shape == (2 * M, 2 * M)
    assert np.linalg.norm(A[np.ix_(P, P)] - A) <= 1e-10 * np.linalg.norm(A)
    with pytest.raises(ValueError):
        assemble_A(mesh, MediumParams.from_contrast(1e-3), 0.0)


def test_system_expansion_remainder_ratio(mesh):
    for d in (1e-2, 1e-3):
        medium = MediumParams.from_contrast(d)
        rem = []
        for w in (1e-1, 1e-2):
            E = expand_A(mesh, medium, w)
            approx = E.A0 + w * w * math.log(w) * E.A11 + w * w * E.A12 + d * E.A01
            rem.append(np.linalg.norm(assemble_A(mesh, medium, w) - approx, 2))
        bound = lambda w: d * w * w * abs(math.log(w)) + w**4 * abs(math.log(w))
        ratio = (rem[0] / rem[1]) / (bound(1e-1) / bound(1e-2))
        assert 0.5 <= ratio <= 2.0


def test_A0_null_space_spanned_by_capacitance_densities(mesh):
    k = 1e-3
    E = expand_A(mesh, MediumParams.from_contrast(1e-3), k)
    sv = np.linalg.svd(E.A0, compute_uv=False)
    assert np.sum(sv <= 1e-6 * sv[0]) == 2
    zeta = solve_zeta(mesh, k)
    for z in zeta.zeta:
        # with equal wave speeds the interior densities coincide with the exterior ones
        v = np.concatenate([z.values, z.values])
        assert np.linalg.norm(E.A0 @ v) <= 1e-6 * sv[0] * np.linalg.norm(v)


# -- leading-order formulas -------------------------------------------------


def test_omega1_against_bisection():
    medium = MediumParams.from_contrast(1e-4)
    sol = solve_leading_order_omega1(medium, math.pi)
    ref = optimize.brentq(lambda w: w * w * math.log(w) + 1e-4, 1e-6, math.exp(-0.5), xtol=1e-16)
    assert sol.omega.real == pytest.approx(ref, rel=1e-10)
    assert abs(sol.omega.imag) <= 1e-12
    assert sol.omega.real == pytest.approx(4.29e-3, rel=1e-2)
    assert sol.residual <= 1e-12 * math.pi * 1e-4
    assert all(abs(a) > 0.5 for a in sol.alternatives)


def test_omega1_monotone_in_delta():
    w = [abs(leading_order_omega1(MediumParams.from_contrast(d), math.pi)) for d in (1e-5, 4e-5, 1.6e-4)]
    assert w[0] < w[1] < w[2]


def test_omega1_complex_branch():
    # large contrast pushes the equation past the real fold; the root becomes complex
    medium = MediumParams.from_contrast(0.1)
    sol = solve_leading_order_omega1(medium, math.pi)
    w = sol.omega
    assert w.real > 0
    assert abs(w * w * np.log(w) * math.pi + math.pi * 0.1) <= 1e-12 * math.pi * 0.1


def test_omega2_values_and_scalings():
    mutual = BipolarPair(1.0, 1e-2).mutual_capacitance
    w = leading_order_omega2(MediumParams.from_contrast(1e-4), mutual, math.pi)
    assert w.real == pytest.approx(math.sqrt(62.86 / math.pi) * 1e-2, rel=1e-3)
    assert w.real == pytest.approx(4.47e-2, rel=2e-3)
    w4 = leading_order_omega2(MediumParams.from_contrast(4e-4), mutual, math.pi)
    assert w4 == pytest.approx(2 * w, rel=1e-14)
    # eps^(-1/4) scaling through the mutual coefficient
    w_far = leading_order_omega2(MediumParams.from_contrast(1e-4), BipolarPair(1.0, 1e-4).mutual_capacitance, math.pi)
    assert (w_far / w).real == pytest.approx(10**0.5, rel=1e-2)
    with pytest.raises(ValueError):
        leading_order_omega2(MediumParams.from_contrast(1e-4), -1.0, math.pi)


def test_muller_finds_polynomial_root():
    f = lambda z: (z - (0.3 - 0.02j)) * (z + 2)
    res = muller(f, 0.25, 0.35, 0.3)
    assert res.converged
    assert abs(res.root - (0.3 - 0.02j)) < 1e-12


# -- characteristic-value search --------------------------------------------


@pytest.mark.parametrize("delta", DELTAS)
def test_resonances_converge_physically(delta):
    mesh, _, results = resonances(delta)
    assert set(results) == {"monopole", "dipole"}
    for mode, res in results.items():
        assert res.mode == mode
        assert res.omega.real > 0
        assert res.omega.imag <= 0
        assert res.sigma_min <= 1e-8 * res.norm_A
        assert res.residual <= 1e-6
        assert mesh.l2_norm(res.psi.values) == pytest.approx(1.0, rel=1e-12)


def test_leading_order_agreement_improves():
    gaps = {mode: [resonances(d)[2][mode].relative_gap for d in DELTAS] for mode in ("monopole", "dipole")}
    assert gaps["dipole"][1] <= 0.10
    assert gaps["dipole"][1] < gaps["dipole"][0]
    assert gaps["monopole"][1] <= 0.20
    assert gaps["monopole"][1] < gaps["monopole"][0]


def test_subwavelength_regime():
    ratios = [abs(resonances(d)[2]["dipole"].omega.imag) / resonances(d)[2]["dipole"].omega.real for d in DELTAS]
    assert ratios[1] < ratios[0] < 0.1
    mono = [abs(resonances(d)[2]["monopole"].omega.imag) / resonances(d)[2]["monopole"].omega.real for d in DELTAS]
    assert mono[1] < mono[0]


@pytest.mark.parametrize("delta", DELTAS)
def test_eigenfunction_projections(delta):
    mesh, _, results = resonances(delta)
    for mode, res in results.items():
        zeta = solve_zeta(mesh, res.omega.real)
        z1, z2 = zeta.zeta[0].values, zeta.zeta[1].values
        psi = res.psi.values
        own, other = (z1 + z2, z1 - z2) if mode == "monopole" else (z1 - z2, z1 + z2)
        assert weighted_projection_residual(mesh, psi, own) <= 0.1
        # projection on the opposite symmetry vanishes
        w = mesh.weights
        cross = abs(np.sum(w * np.conj(other) * psi)) / (mesh.l2_norm(other) * mesh.l2_norm(psi))
        assert cross <= 1e-3


def test_classify_mode_by_symmetry(mesh):
    z = solve_zeta(mesh, 1e-3).zeta
    assert classify_mode(mesh, z[0].values + z[1].values) == "monopole"
    assert classify_mode(mesh, z[0].values - z[1].values) == "dipole"


def test_single_sector_search_matches_auto():
    mesh, _, results = resonances(1e-4)
    res = results["dipole"]
    odd = find_resonance(mesh, res.medium, res.leading_order_omega, sector="odd")
    assert abs(odd.omega - res.omega) <= 1e-10 * abs(res.omega)


def test_search_failure_is_reported():
    mesh = pair_mesh()
    medium = MediumParams.from_contrast(1e-4)
    with pytest.raises(ResonanceError):
        find_resonance(mesh, medium, 0.02 - 0.01j, maxiter=1)


# -- real-frequency scans -----------------------------------------------------


@pytest.fixture(scope="module")
def scan():
    mesh, _, results = resonances(1e-4)
    w2 = results["dipole"].omega.real
    omegas = np.geomspace(1e-3, 3 * w2, 32)
    return results, sigma_scan(mesh, MediumParams.from_contrast(1e-4), omegas)


def test_sector_scans_have_one_minimum_each(scan):
    results, sc = scan
    for sector, mode in (("even", "monopole"), ("odd", "dipole")):
        minima = local_minima(sc.sectors[sector])
        assert len(minima) == 1
        w = sc.omega[minima[0]]
        # the dip sits within one grid step of the resonance
        step = sc.omega[1] / sc.omega[0]
        assert 1 / step**1.01 <= w / results[mode].omega.real <= step**1.01


@pytest.mark.xfail(strict=True, reason="the odd-sector background hides the damped monopole dip in the full sigma_min")
def test_full_sigma_min_has_two_minima(scan):
    _, sc = scan
    assert len(local_minima(sc.full)) == 2


# -- driven problem -----------------------------------------------------------


def test_scattering_boundary_matching(mesh):
    medium = MediumParams.from_contrast(1e-4)
    w = 0.02
    sol = solve_scattering(mesh, medium, w, direction=(1.0, 0.3))
    u, _ = plane_wave(medium, w, (1.0, 0.3))
    lhs = u(mesh.nodes) + assemble_S(mesh, medium.k(w)).entries @ sol.psi.values
    rhs = assemble_S(mesh, medium.k_b(w)).entries @ sol.phi.values
    assert np.max(np.abs(lhs - rhs)) <= 1e-8 * np.max(np.abs(u(mesh.nodes)))
    with pytest.raises(ValueError):
        solve_scattering(mesh, medium, 0.02 - 0.001j)


def test_scattering_mirror_reciprocity(mesh):
    medium = MediumParams.from_contrast(1e-4)
    up = solve_scattering(mesh, medium, 0.03, direction=(0.0, 1.0))
    down = solve_scattering(mesh, medium, 0.03, direction=(0.0, -1.0))
    for a, b in ((up.psi.values, down.psi.values), (up.phi.values, down.phi.values)):
        assert np.max(np.abs(mesh.reflect(a) - b)) <= 1e-8 * np.max(np.abs(a))


def test_resonant_amplification():
    mesh, _, results = resonances(1e-4)
    medium = MediumParams.from_contrast(1e-4)
    w2 = results["dipole"].omega.real
    # vertical incidence excites the mirror-odd dipole
    peak = solve_scattering(mesh, medium, w2, direction=(0.0, 1.0)).psi.norm()
    off = solve_scattering(mesh, medium, 2 * w2, direction=(0.0, 1.0)).psi.norm()
    assert peak >= 10 * off
