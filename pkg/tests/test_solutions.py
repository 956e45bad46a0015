import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberlab.grid import TimeGrid, norms
from fiberlab.solutions import (
    CWSpec,
    SolitonSpec,
    cw,
    decay_bound,
    linearized_ops,
    mi_dispersion,
    soliton,
    soliton_ode_residual,
    vparam_single_mode,
)

from conftest import smooth_field


# --- CW ----------------------------------------------------------------------

def test_cw_validation():
    with pytest.raises(ValueError):
        CWSpec(p0=0.0)
    with pytest.raises(ValueError):
        CWSpec(p0=1.0, rho=2)


def test_cw_at_zero(grid_small):
    env = cw(CWSpec(p0=4.0), grid_small, Z=0.0)
    assert np.allclose(env.values, 2.0)
    assert env.z == 0.0


def test_cw_phase_advance(grid_small):
    # defocusing phase rotates as -P0 Z:  P0=1, Z=pi -> field -1
    env = cw(CWSpec(p0=1.0), grid_small, Z=np.pi)
    assert np.max(np.abs(env.values - (-1.0))) < 1e-12


def test_cw_focusing_sign(grid_small):
    env = cw(CWSpec(p0=1.0, rho=+1), grid_small, Z=np.pi / 2)
    assert np.max(np.abs(env.values - 1j)) < 1e-12


# --- soliton profiles ----------------------------------------------------------

def test_soliton_theta_one(grid_std):
    env = soliton(SolitonSpec(1.0), grid_std, Z=0.0)
    assert abs(np.max(np.abs(env.values)) - np.sqrt(2.0)) < 1e-12
    expected = np.sqrt(2.0) / np.cosh(grid_std.t)
    assert np.max(np.abs(env.values - expected)) < 1e-12


def test_conventions_coincide_at_theta_one(grid_std):
    a = soliton(SolitonSpec(1.0, "corrected"), grid_std)
    b = soliton(SolitonSpec(1.0, "original"), grid_std)
    assert np.array_equal(a.values, b.values)


def test_original_convention_warns():
    with pytest.warns(UserWarning):
        SolitonSpec(4.0, "original")


def test_soliton_validation():
    with pytest.raises(ValueError):
        SolitonSpec(-1.0)
    with pytest.raises(ValueError):
        SolitonSpec(1.0, "classic")


ARBITRATION_GRID = TimeGrid(4096, -80.0, 80.0)


@pytest.mark.parametrize("theta", [0.25, 1.0, 4.0])
def test_corrected_profile_solves_ode(theta):
    res = soliton_ode_residual(SolitonSpec(theta), ARBITRATION_GRID)
    assert res < 1e-8


@pytest.mark.parametrize("theta", [0.25, 4.0])
def test_original_profile_fails_ode(theta):
    with pytest.warns(UserWarning):
        spec = SolitonSpec(theta, "original")
    res = soliton_ode_residual(spec, ARBITRATION_GRID)
    assert res > 0.1
    # residual norm has the closed form theta*|theta-1|*sqrt(28/15)
    predicted = theta * abs(theta - 1.0) * np.sqrt(28.0 / 15.0)
    assert abs(res - predicted) < 1e-5 * predicted


def test_original_profile_ok_at_theta_one():
    res = soliton_ode_residual(SolitonSpec(1.0, "original"), ARBITRATION_GRID)
    assert res < 1e-8


def test_soliton_mass(grid_std):
    # mass of sqrt(2 th) sech(sqrt(th) T) is 4 sqrt(th)
    env = soliton(SolitonSpec(4.0), grid_std)
    assert abs(norms(env.values, grid_std).mass - 8.0) < 1e-10


# --- decay bound ---------------------------------------------------------------

@pytest.mark.parametrize("theta", [0.25, 1.0])
def test_decay_bound(theta):
    grid = TimeGrid(2048, -40.0, 40.0)
    a1, a2 = decay_bound(SolitonSpec(theta), grid)
    assert a2 == np.sqrt(theta)
    spec = SolitonSpec(theta)
    lhs = np.abs(spec.profile(grid.t)) + np.abs(spec.profile_derivative(grid.t))
    assert np.all(lhs <= a1 * np.exp(-a2 * np.abs(grid.t)) * (1 + 1e-12))
    # analytic asymptote of (|Phi|+|Phi'|) e^{sqrt(th)|T|}
    assert a1 <= 2.0 * np.sqrt(2 * theta) * (1 + np.sqrt(theta)) + 1e-9


def test_decay_bound_endpoint():
    # at T=0 the bound only needs A1 >= sqrt(2 th); sqrt(2 th)(1+th) suffices
    theta = 2.0
    spec = SolitonSpec(theta)
    assert np.sqrt(2 * theta) * (1 + theta) >= float(spec.profile(0.0))


def test_decay_bound_rejects_original():
    with pytest.raises(ValueError):
        decay_bound(SolitonSpec(1.0, "original"))


# --- modulation-instability dispersion -------------------------------------------

def test_mi_normal_dispersion_real():
    r = mi_dispersion(beta2=+1.0, gamma=1.0, p0=1.0, omega_samples=np.linspace(-5, 5, 101))
    assert np.max(np.abs(r.kappa.imag)) == 0.0
    assert r.band_edge is None


def test_mi_anomalous_point():
    r = mi_dispersion(beta2=-1.0, gamma=1.0, p0=1.0, omega_samples=[1.0])
    assert abs(r.kappa[0] - 0.5j * np.sqrt(3.0)) < 1e-12
    assert abs(r.gain[0] - 0.5 * np.sqrt(3.0)) < 1e-12


def test_mi_band_edge_zero():
    edge = np.sqrt(4.0)          # gamma=1, p0=1, |beta2|=1
    r = mi_dispersion(beta2=-1.0, gamma=1.0, p0=1.0, omega_samples=[edge])
    assert abs(r.kappa[0]) < 1e-12
    assert r.band_edge == edge


def test_mi_band_support():
    w = np.linspace(-4, 4, 401)
    r = mi_dispersion(beta2=-1.0, gamma=1.0, p0=1.0, omega_samples=w)
    # omega = 0 carries no gain (the |omega beta2|/2 prefactor vanishes)
    inside = (np.abs(w) < r.band_edge) & (w != 0)
    assert np.all(r.gain[inside] > 0)
    assert np.all(r.gain[~inside] == 0)


def test_mi_rejects_zero_beta2():
    with pytest.raises(ValueError):
        mi_dispersion(0.0, 1.0, 1.0, [1.0])


# --- V parameter ----------------------------------------------------------------

def test_vparam_fiber_example():
    v, single = vparam_single_mode(4.1, 1.55, 1.450, 1.445)
    assert single
    assert abs(v - 2.0) < 0.01
    assert abs(np.sqrt(1.450**2 - 1.445**2) - 0.12031) < 1e-5


def test_vparam_strict_threshold():
    # engineered so V == 2.405 exactly in floating point
    v, single = vparam_single_mode(2.405, 2.0 * np.pi, 1.25, 0.75)
    assert v == 2.405
    assert not single
    v2, single2 = vparam_single_mode(np.nextafter(2.405, 0.0), 2.0 * np.pi, 1.25, 0.75)
    assert single2


def test_vparam_rejects_nonguiding():
    with pytest.raises(ValueError):
        vparam_single_mode(4.1, 1.55, 1.445, 1.450)
    with pytest.raises(ValueError):
        vparam_single_mode(-1.0, 1.55, 1.45, 1.44)


# --- linearized operators ---------------------------------------------------------

def test_zero_modes(grid_std):
    ops = linearized_ops(grid_std)
    r = ops.residuals()
    assert r["l_minus_R"] < 1e-8
    assert r["l_plus_R_prime"] < 1e-6


def test_l_minus_zero_field(grid_std):
    ops = linearized_ops(grid_std)
    assert np.max(np.abs(ops.L_minus(np.zeros(grid_std.n)))) == 0.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_l_minus_nonnegative(seed):
    grid = TimeGrid(512, -40.0, 40.0)
    ops = linearized_ops(grid)
    v = smooth_field(grid, seed).real
    quad = grid.dt * float(np.sum(v * ops.L_minus(v)))
    assert quad >= -1e-10 * max(1.0, grid.dt * float(np.sum(v * v)))


# --- measured MI growth against the linearized rate --------------------------
# For i Q_Z + Q_TT + |Q|^2 Q = 0 about sqrt(P0): lambda^2 = omega^2 (2 P0 - omega^2),
# so the growth rate is g(omega) = |omega| sqrt(2 P0 - omega^2) on |omega| < sqrt(2 P0).

def linearized_rate(omega, p0=1.0):
    r = omega * omega * (2.0 * p0 - omega * omega)
    return np.sqrt(r) if r > 0 else 0.0


@pytest.mark.parametrize("k_mode", [8, 14])
def test_mi_growth_in_band(k_mode):
    from conftest import growth_rate, seeded_cw_run
    traj = seeded_cw_run(k_mode, rho=+1)
    measured = growth_rate(traj, k_mode)
    predicted = linearized_rate(k_mode / 16.0)
    assert abs(measured - predicted) < 0.05 * predicted


def test_mi_no_growth_outside_band():
    from conftest import growth_rate, seeded_cw_run
    traj = seeded_cw_run(28, rho=+1)           # omega = 1.75 > sqrt(2)
    assert abs(growth_rate(traj, 28)) < 1e-3


def test_cw_dichotomy_defocusing():
    # rho = -1: all perturbation modes stay bounded over Z in [0, 10]
    from conftest import modal_history, seeded_cw_run
    traj = seeded_cw_run(8, rho=-1, z_end=10.0)
    n = traj.snapshots[0].envelope.grid.n
    spectra = np.array([np.abs(np.fft.fft(s.envelope.values))
                        for s in traj.snapshots])
    seed0 = spectra[0, 8]
    nonpump = np.delete(spectra, 0, axis=1)    # drop the k=0 pump column
    assert nonpump.max() <= 5.0 * seed0
    _, amps = modal_history(traj, 8)
    assert amps[-1] <= 4.0 * amps[0]
