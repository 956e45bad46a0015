import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberlab.grid import Envelope, TimeGrid, norms, spectral_shift
from fiberlab.orbital import (
    LocalWindowDistance,
    OrbitalDistance,
    h_window_factor,
    local_h1_window_distance,
    lyapunov_energy,
    modulus_phase,
    orbital_distance,
    stability_series,
    transformed_orbital_distance,
)
from fiberlab.propagator import EquationSpec, StepperConfig, propagate
from fiberlab.transform import TransformMap, push_derivative, push_field

GRID = TimeGrid(2048, -40.0, 40.0)
R = (np.sqrt(2.0) / np.cosh(GRID.t)).astype(complex)
SOLITON = Envelope(GRID, R)
PERT = 0.01 * np.exp(-GRID.t**2)
PERTURBED = Envelope(GRID, R + PERT)


# ---------------------------------------------------------------- orbit gap


def test_orbital_distance_input_validation():
    for bad in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(ValueError):
            orbital_distance(SOLITON, SOLITON, theta=bad)
    other = Envelope(TimeGrid(1024, -40.0, 40.0), np.zeros(1024, complex))
    with pytest.raises(ValueError):
        orbital_distance(SOLITON, other)
    with pytest.raises(ValueError):
        orbital_distance(SOLITON, SOLITON, coarse=2)
    with pytest.raises(ValueError):
        OrbitalDistance(theta_weight=1.0, t0_star=0.0, gamma_star=0.0, value=-1.0)


def test_self_distance_is_zero():
    od = orbital_distance(SOLITON, SOLITON)
    assert od.value <= 1e-12
    assert od.metric <= 1e-6
    assert abs(od.t0_star) < 1e-6
    assert min(od.gamma_star, 2.0 * np.pi - od.gamma_star) < 1e-6


def test_constructed_orbit_is_recovered():
    # psi(T) = Q(T + s) e^{i g}  =>  minimizer (T0, Gamma) = (-s, -g mod 2pi)
    s = 3.7 * GRID.dt
    g = 1.2
    psi = Envelope(GRID, spectral_shift(R, GRID, s) * np.exp(1j * g))
    od = orbital_distance(psi, SOLITON)
    assert od.value < 1e-8
    assert abs(od.t0_star + s) < 1e-6 < GRID.dt / 10
    assert abs(od.gamma_star - (2.0 * np.pi - g)) < 1e-6


@pytest.mark.parametrize("theta", [0.25, 1.0, 4.0])
def test_perturbation_bounds_the_orbit_gap(theta):
    od = orbital_distance(PERTURBED, SOLITON, theta=theta)
    h1_sq = norms(PERT.astype(complex), GRID).h1 ** 2
    assert 0.0 < od.value <= (1.0 + theta) * h1_sq
    assert od.metric == pytest.approx(np.sqrt(od.value))
    assert od.theta_weight == theta


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-25.0, 25.0), b=st.floats(0.0, 2.0 * np.pi))
def test_invariant_under_joint_shift_and_phase(a, b):
    # moving both fields along the orbit cannot change the gap
    base = orbital_distance(PERTURBED, SOLITON).value
    rot = np.exp(1j * b)
    psi = Envelope(GRID, spectral_shift(PERTURBED.values, GRID, a) * rot)
    ref = Envelope(GRID, spectral_shift(R, GRID, a) * rot)
    assert abs(orbital_distance(psi, ref).value - base) < 1e-10


# ------------------------------------------------------- energy and series


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
def test_lyapunov_energy_of_sech_profile(theta):
    # int |R'|^2/2 = 2/3, int |R|^4/4 = 4/3, int |R|^2 = 4
    assert lyapunov_energy(SOLITON, theta) == pytest.approx(
        -2.0 / 3.0 + 4.0 * theta, rel=1e-12)


def test_lyapunov_energy_rejects_bad_theta():
    with pytest.raises(ValueError):
        lyapunov_energy(SOLITON, 0.0)


def test_stability_series_tracks_perturbed_pulse():
    grid = TimeGrid(1024, -40.0, 40.0)
    ref = Envelope(grid, (np.sqrt(2.0) / np.cosh(grid.t)).astype(complex))
    u0 = Envelope(grid, ref.values + 0.01 * np.exp(-grid.t**2))
    cfg = StepperConfig(dz=5e-3, scheme="STRANG", store_every=100, guard_tol=None)
    traj = propagate(EquationSpec.snlse(1), u0, 2.5, cfg)

    rows = stability_series(traj, ref, theta=1.0)
    assert len(rows) == len(traj)
    assert set(rows[0]) == {"Z", "d_theta", "T0_star", "Gamma_star", "E"}
    zs = [r["Z"] for r in rows]
    assert zs == sorted(zs) and zs[0] == 0.0

    d = np.array([r["d_theta"] for r in rows])
    assert np.all(d > 0)
    assert np.max(d) <= 5.0 * d[0]  # orbit holds the pulse
    E = np.array([r["E"] for r in rows])
    assert np.max(np.abs(E - E[0])) <= 1e-6 * abs(E[0])


# ------------------------------------------------------- transformed metric


def _pushed_pair(z0, tmap, off_orbit=True):
    Zq = tmap.q(z0)
    Tgrid = GRID.scaled(tmap.pscale(z0))
    T = Tgrid.t
    qv = (np.sqrt(2.0) / np.cosh(T)).astype(complex) * np.exp(1j * Zq)
    if off_orbit:
        prof = (1.15 * np.sqrt(2.0) / np.cosh(T + 2.5)
                + 0.05 * np.exp(-((T - 1.0) ** 2)))
    else:
        prof = np.sqrt(2.0) / np.cosh(T + 2.5)
    qw = (prof * np.exp(1j * (Zq + 0.8))).astype(complex)
    v = push_field(tmap, Envelope(Tgrid, qv, z=Zq), z0)
    w = push_field(tmap, Envelope(Tgrid, qw, z=Zq), z0)
    return w, v, Envelope(Tgrid, qw), Envelope(Tgrid, qv)


@pytest.mark.parametrize("z0", [0.0, 1.7, 4.0])
@pytest.mark.parametrize("theta", [0.25, 1.0, 4.0])
def test_transformed_metric_equals_rescaled_frame_gap(z0, theta):
    # the decay prefactor and the chirp cross-term undo the map exactly
    tmap = TransformMap.dimensionless(0.1)
    w, v, qw, qv = _pushed_pair(z0, tmap)
    dtil = transformed_orbital_distance(w, v, theta, tmap)
    ref = orbital_distance(qw, qv, theta).value
    assert dtil == pytest.approx(ref, rel=1e-10)


def test_transformed_metric_vanishes_on_pushed_orbit():
    tmap = TransformMap.dimensionless(0.1)
    w, v, _, _ = _pushed_pair(1.7, tmap, off_orbit=False)
    assert transformed_orbital_distance(w, v, 1.0, tmap) < 1e-8


def test_transformed_metric_at_z_zero_is_dechirped_gap():
    tmap = TransformMap.dimensionless(0.1)
    chirped = np.exp(1j * tmap.chirp * GRID.t**2)
    w = Envelope(GRID, R * chirped * np.exp(0.3j))
    v = Envelope(GRID, R * chirped)
    assert transformed_orbital_distance(w, v, 1.0, tmap) < 1e-12


def test_transformed_metric_input_validation():
    dim = TransformMap.dimensional(alpha=0.2, beta2=1.0, gamma=1.3,
                                   kappa=1.0, chi=-1.0)
    with pytest.raises(ValueError, match="dimensionless"):
        transformed_orbital_distance(SOLITON, SOLITON, 1.0, dim)
    tmap = TransformMap.dimensionless(0.1)
    with pytest.raises(ValueError):
        transformed_orbital_distance(SOLITON, SOLITON, 0.0, tmap)
    with pytest.raises(ValueError):
        transformed_orbital_distance(SOLITON, Envelope(GRID, R, z=1.0), 1.0, tmap)
    other = Envelope(TimeGrid(1024, -40.0, 40.0), np.zeros(1024, complex))
    with pytest.raises(ValueError):
        transformed_orbital_distance(SOLITON, other, 1.0, tmap)


# --------------------------------------------------------- modulus / phase


def test_modulus_phase_of_plain_cw():
    grid = TimeGrid(256, -10.0, 10.0)
    q = Envelope(grid, np.sqrt(1.3) * np.exp(0.7j) * np.ones(256, complex))
    mp = modulus_phase(q, 1.3)
    assert mp.c == pytest.approx(0.7, abs=1e-14)
    assert np.max(np.abs(mp.A)) < 1e-14
    assert np.max(np.abs(mp.Omega)) < 1e-14
    assert mp.a_h1 < 1e-12 and mp.omega_t_l2 < 1e-12


def test_modulus_phase_recovers_constructed_field():
    grid = TimeGrid(1024, -8.0 * np.pi, 8.0 * np.pi)
    p0 = 1.3
    amp_mod = 0.01 * np.cos(grid.t)
    phase_mod = 0.02 * np.sin(grid.t)
    q = Envelope(grid, (np.sqrt(p0) + amp_mod) * np.exp(1j * phase_mod))
    mp = modulus_phase(q, p0)
    assert np.max(np.abs(mp.A - amp_mod)) < 1e-12
    assert np.max(np.abs(mp.Omega - phase_mod)) < 1e-12
    assert abs(mp.c) < 1e-14
    # ||A||^2 = 1e-4 W/2, ||A'||^2 = 1e-4 W/2; ||Omega'||^2 = 4e-4 W/2
    W = grid.width
    assert mp.a_h1 == pytest.approx(np.sqrt(1e-4 * W), rel=1e-6)
    assert mp.omega_t_l2 == pytest.approx(np.sqrt(2e-4 * W), rel=1e-3)
    # 1-d Sobolev: sup|A|^2 <= ||A|| ||A'|| <= a_h1^2 / 2
    assert np.max(np.abs(mp.A)) <= mp.a_h1 / np.sqrt(2.0) * (1 + 1e-9)


def test_modulus_phase_rejects_vanishing_modulus():
    grid = TimeGrid(256, -10.0, 10.0)
    q = Envelope(grid, np.sin(grid.t).astype(complex))  # zero at t = 0
    with pytest.raises(ValueError, match="unwrap"):
        modulus_phase(q, 1.0)
    with pytest.raises(ValueError):
        modulus_phase(Envelope(grid, np.ones(256, complex)), -1.0)


# ----------------------------------------------------------- window bound


def test_window_factor_frozen_values():
    assert h_window_factor(0.0, 1.0, 0.2) == pytest.approx(
        0.1 * np.sqrt(5.0) + 1.0, rel=1e-15)
    assert h_window_factor(0.0, 1.0, 0.2) == pytest.approx(1.223606797749979)
    # tau = 0 collapses the root
    z, c2 = 1.3, 0.4
    assert h_window_factor(z, 0.0, c2) == pytest.approx(
        0.5 * c2 * np.exp(c2 * z) + 1.0, rel=1e-15)
    with pytest.raises(ValueError):
        h_window_factor(0.0, -1.0, 0.2)


def test_local_window_distance_of_identical_fields():
    ld = local_h1_window_distance(SOLITON, SOLITON, t0=0.3, tau=1.0, c2=0.2)
    assert isinstance(ld, LocalWindowDistance)
    assert ld.value < 1e-12
    assert min(ld.gamma_star, 2.0 * np.pi - ld.gamma_star) < 1e-6
    assert ld.h_factor == pytest.approx(h_window_factor(0.0, 1.0, 0.2))


def test_local_window_distance_validation():
    with pytest.raises(ValueError, match="outside"):
        local_h1_window_distance(SOLITON, SOLITON, t0=39.9, tau=1.0)
    with pytest.raises(ValueError):
        local_h1_window_distance(SOLITON, SOLITON, t0=0.0, tau=-1.0)
    with pytest.raises(ValueError, match="fewer than two"):
        local_h1_window_distance(SOLITON, SOLITON, t0=GRID.dt / 2, tau=GRID.dt / 8)
    with pytest.raises(ValueError):
        local_h1_window_distance(SOLITON, Envelope(GRID, R, z=2.0), t0=0.0, tau=1.0)


def test_window_search_beats_antipodal_seed():
    # slowly varying phase mismatch: the pointwise seed is a starting
    # bracket only, the searched phase must do at least as well
    mism = 0.4 + 0.2 * np.tanh(GRID.t / 5.0)
    w = Envelope(GRID, R * np.exp(1j * mism))
    searched = local_h1_window_distance(w, SOLITON, t0=0.0, tau=5.0)
    i0 = int(np.argmin(np.abs(GRID.t)))
    gamma0 = float(np.pi - np.angle(w.values[i0] * np.conj(R[i0])))
    seeded = local_h1_window_distance(w, SOLITON, t0=0.0, tau=5.0,
                                      gamma0=gamma0, search=False)
    assert searched.value < seeded.value
    assert searched.value < 0.2  # aligned residual only carries the tanh spread


def test_chirped_cw_background_window_bound():
    """Perturbed CW under the defocusing flow stays H^1-close to the chirped
    CW in any fixed window, within the measured-size * growth-factor budget."""
    p0, c2 = 1.0, 0.2
    tmap = TransformMap.dimensionless(c2, c1=-1, rho=-1)
    Tgrid = TimeGrid(512, -20.0, 20.0)
    T = Tgrid.t
    q0 = (np.sqrt(p0) + 0.05 * np.exp(-T**2)) * np.exp(1j * 0.05 * np.exp(-T**2))
    cfg = StepperConfig(dz=1e-3, scheme="STRANG", store_every=100, guard_tol=None)
    traj = propagate(EquationSpec.snlse(-1), Envelope(Tgrid, q0.astype(complex)),
                     tmap.q(2.0), cfg)

    eps = 0.0
    for snap in traj:
        mp = modulus_phase(snap.envelope, p0)
        eps = max(eps, mp.a_h1, mp.omega_t_l2)
    assert 0.0 < eps < 0.5 * np.sqrt(p0)  # smallness hypothesis actually holds

    t0w, tau = 0.3, 1.0
    gaps = []
    for snap in traj.snapshots[::2]:
        Zj = snap.z
        zj = tmap.z_of(Zj)
        w = push_field(tmap, traj, zj)
        w_t = push_derivative(tmap, traj, zj)
        tg = w.grid
        cw = (tmap.amp(zj) * np.exp(1j * tmap.a(zj, tg.t))
              * np.sqrt(p0) * np.exp(-1j * p0 * Zj))
        v = Envelope(tg, cw, z=zj)
        v_t = 2j * tmap.chirp * tg.t * cw  # CW has no profile derivative
        ld = local_h1_window_distance(w, v, t0w, tau, c2=c2,
                                      derivatives=(w_t.values, v_t))
        assert ld.value <= eps * ld.h_factor
        gaps.append(ld.value)
    assert gaps[-1] < gaps[0]  # the decaying frame shrinks the gap
