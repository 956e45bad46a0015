"""Orbit-factored distances and stability diagnostics.

The translation/phase orbit of a reference profile Q is
{Q(. + T0) e^{i Gamma}}, and the weighted H^1 gap from a field psi to that
orbit is

    d_theta(psi, Q)^2 = inf_{T0, Gamma} ||psi'(.+T0) e^{i Gamma} - Q'||^2
                                 + theta ||psi(.+T0) e^{i Gamma} - Q||^2

with theta > 0 weighting the L^2 part.  Parseval collapses both inner
products into one spectral correlator, so the (T0, Gamma) objective costs
a single FFT pair up front and O(n) per probe; the coarse 64x64 stage is
one vectorized sweep.

The same functional transfers to the decaying-frame fields through the
change of variables: `transformed_orbital_distance` evaluates the weighted
t-frame integrand directly and agrees with `orbital_distance` of the
pulled-back pair up to quadrature error.

`modulus_phase` and `local_h1_window_distance` cover the continuous-wave
side: background-relative modulus/phase diagnostics, and the windowed H^1
gap to a chirped CW reference together with its growth factor
`h_window_factor`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Envelope, TimeGrid, spectral_derivative, spectral_shift
from .propagator import Trajectory
from .transform import TransformMap, pull_field, push_field

__all__ = [
    "LocalWindowDistance",
    "ModulusPhase",
    "OrbitalDistance",
    "h_window_factor",
    "local_h1_window_distance",
    "lyapunov_energy",
    "modulus_phase",
    "orbital_distance",
    "stability_series",
    "transformed_orbital_distance",
]

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden(f, lo, hi, iters):
    """Golden-section minimum of f on [lo, hi]; returns (x_best, lo, hi)."""
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, a, b) if fc < fd else (d, a, b)


@dataclass(frozen=True)
class OrbitalDistance:
    """Attained infimum of the squared orbit functional.

    value is the squared gap; .metric is its square root.  (t0_star,
    gamma_star) is the minimizing shift/phase, gamma_star in [0, 2 pi).
    """

    theta_weight: float
    t0_star: float
    gamma_star: float
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("value is a squared distance; it cannot be negative")

    @property
    def metric(self) -> float:
        return float(np.sqrt(self.value))


def orbital_distance(psi: Envelope, reference: Envelope, theta: float = 1.0,
                     coarse: int = 64, refine_iters: int = 23) -> OrbitalDistance:
    """Distance from psi to the translation/phase orbit of reference.

    With m_k = (omega_k^2 + theta) psi_hat_k conj(Q_hat_k) dt/n the
    objective is

        J(T0, Gamma) = N - 2 Re[e^{i Gamma} c(T0)],
        c(T0) = sum_k m_k e^{i omega_k T0},

    minimized on a coarse x coarse grid (one period x [0, 2 pi)) and then
    by two interleaved rounds of golden-section per axis, each round
    continuing the bracket the previous one ended with.
    """
    if not (np.isfinite(theta) and theta > 0):
        raise ValueError("theta must be positive")
    if coarse < 4:
        raise ValueError("coarse must be at least 4")
    grid = psi.grid
    if not grid.compatible(reference.grid):
        raise ValueError("psi and reference live on different grids")

    weight = grid.omega**2 + theta
    fp = np.fft.fft(psi.values)
    fq = np.fft.fft(reference.values)
    scale = grid.dt / grid.n  # Parseval weight for <u,v> = dt sum u conj(v)
    m = scale * weight * fp * np.conj(fq)
    nsum = scale * float(np.sum(weight * (np.abs(fp) ** 2 + np.abs(fq) ** 2)))

    def corr(t0):
        return complex(np.sum(m * np.exp(1j * grid.omega * t0)))

    shifts = np.linspace(-grid.width / 2, grid.width / 2, coarse, endpoint=False)
    phases = 2.0 * np.pi * np.arange(coarse) / coarse
    cvals = np.exp(1j * np.outer(shifts, grid.omega)) @ m
    jgrid = nsum - 2.0 * np.real(cvals[:, None] * np.exp(1j * phases)[None, :])
    it, ig = np.unravel_index(int(np.argmin(jgrid)), jgrid.shape)

    dcell_t = shifts[1] - shifts[0]
    dcell_g = phases[1] - phases[0]
    t0, lo_t, hi_t = shifts[it], shifts[it] - dcell_t, shifts[it] + dcell_t
    gam, lo_g, hi_g = phases[ig], phases[ig] - dcell_g, phases[ig] + dcell_g

    for _ in range(2):
        t0, lo_t, hi_t = _golden(
            lambda s: nsum - 2.0 * np.real(np.exp(1j * gam) * corr(s)),
            lo_t, hi_t, refine_iters)
        cstar = corr(t0)
        gam, lo_g, hi_g = _golden(
            lambda g: nsum - 2.0 * np.real(np.exp(1j * g) * cstar),
            lo_g, hi_g, refine_iters)

    best = nsum - 2.0 * np.real(np.exp(1j * gam) * corr(t0))
    return OrbitalDistance(theta_weight=float(theta), t0_star=float(t0),
                           gamma_star=float(np.mod(gam, 2.0 * np.pi)),
                           value=max(float(best), 0.0))


def transformed_orbital_distance(w: Envelope, v: Envelope, theta: float,
                                 tmap: TransformMap) -> float:
    """Squared orbit gap between two decaying-frame fields at equal z.

    The orbit acts in the rescaled frame: pull both fields back, minimize
    there, push the optimal orbit element forward again, and integrate

        e^{2 lam z} int |(w_t - v_t) - 2 i chirp t (w - v)|^2 dt
                  + theta int |w - v|^2 dt

    on the t grid.  The weighted derivative difference is exactly the plain
    one upstairs, so this agrees with orbital_distance of the pulled pair
    up to quadrature error.  t-derivatives are spectral: the fields decay
    and the chirp's local frequency stays well under Nyquist on the
    working grids.
    """
    if tmap.kind != "dimensionless":
        raise ValueError("the metric needs the dimensionless (unit-prefactor) map")
    if not (np.isfinite(theta) and theta > 0):
        raise ValueError("theta must be positive")
    if not w.grid.compatible(v.grid):
        raise ValueError("w and v live on different grids")
    if abs(w.z - v.z) > 1e-12 * max(1.0, abs(w.z)):
        raise ValueError("w and v must sit at the same z")

    z = float(w.z)
    Z = tmap.q(z)
    qw = pull_field(tmap, w, Z)
    qv = pull_field(tmap, v, Z)
    od = orbital_distance(qw, qv, theta)

    moved = spectral_shift(qw.values, qw.grid, od.t0_star) * np.exp(1j * od.gamma_star)
    wstar = push_field(tmap, Envelope(qw.grid, moved, z=Z), z)

    grid = w.grid  # push of the dilation grid lands back on the original nodes
    wt = spectral_derivative(wstar.values, grid)
    vt = spectral_derivative(v.values, grid)
    diff = wstar.values - v.values
    weighted = (wt - vt) - 2j * tmap.chirp * grid.t * diff
    val = (np.exp(2.0 * tmap.lam * z) * grid.dt * np.sum(np.abs(weighted) ** 2)
           + theta * grid.dt * np.sum(np.abs(diff) ** 2))
    return float(max(val, 0.0))


def lyapunov_energy(q: Envelope, theta: float = 1.0) -> float:
    """E[q] = int( |q'|^2 / 2 - |q|^4 / 4 + theta |q|^2 ) dT.

    A conserved combination of the Hamiltonian and the mass for the
    rescaled focusing equation, so its drift is a clean orbit diagnostic.
    """
    if not (np.isfinite(theta) and theta > 0):
        raise ValueError("theta must be positive")
    qt = spectral_derivative(q.values, q.grid)
    a2 = np.abs(q.values) ** 2
    dens = 0.5 * np.abs(qt) ** 2 - 0.25 * a2**2 + theta * a2
    return float(q.grid.dt * np.sum(dens))


def stability_series(traj: Trajectory, reference: Envelope,
                     theta: float = 1.0) -> list:
    """Orbit gap and energy per stored snapshot.

    Rows {"Z", "d_theta", "T0_star", "Gamma_star", "E"}; d_theta is the
    metric (square root of the attained infimum).
    """
    rows = []
    for snap in traj:
        od = orbital_distance(snap.envelope, reference, theta)
        rows.append({
            "Z": float(snap.z),
            "d_theta": od.metric,
            "T0_star": od.t0_star,
            "Gamma_star": od.gamma_star,
            "E": lyapunov_energy(snap.envelope, theta),
        })
    return rows


@dataclass(frozen=True)
class ModulusPhase:
    """Background-relative split q = (sqrt(p0) + A) e^{i (c + Omega)}."""

    grid: TimeGrid
    p0: float
    A: np.ndarray
    Omega: np.ndarray
    c: float
    a_h1: float
    omega_t_l2: float


def modulus_phase(q: Envelope, p0: float) -> ModulusPhase:
    """Split q against the CW background of power p0.

    A = |q| - sqrt(p0).  The phase is unwrapped from the left grid edge by
    nearest-branch continuation and c is its mean, so Omega averages to
    zero.  Fields whose modulus comes near zero are rejected: the unwrap
    is meaningless across a vanishing modulus.

    a_h1 = ||A||_{H^1} with a spectral derivative (A inherits q's
    periodicity); omega_t_l2 = ||Omega'||_{L^2} with a finite-difference
    derivative, which tolerates the secular ramp of a winding phase.
    """
    if not (np.isfinite(p0) and p0 > 0):
        raise ValueError("p0 must be positive")
    amp = np.abs(q.values)
    low = float(np.min(amp))
    if low <= 1e-9 * np.sqrt(p0):
        raise ValueError(
            f"modulus dips to {low:.3e}: too close to zero for a stable phase unwrap")
    A = amp - np.sqrt(p0)
    full = np.unwrap(np.angle(q.values))
    c = float(np.mean(full))
    Omega = full - c
    At = spectral_derivative(A, q.grid)
    Ot = np.gradient(Omega, q.grid.t, edge_order=2)
    dt = q.grid.dt
    return ModulusPhase(
        grid=q.grid, p0=float(p0), A=A, Omega=Omega, c=c,
        a_h1=float(np.sqrt(dt * np.sum(A**2) + dt * np.sum(np.abs(At) ** 2))),
        omega_t_l2=float(np.sqrt(dt * np.sum(Ot**2))))


def h_window_factor(z: float, tau: float, c2: float) -> float:
    """(c2/2) e^{c2 z} sqrt(4 tau^2 e^{-2 c2 z} + 1) + 1."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return float(0.5 * c2 * np.exp(c2 * z)
                 * np.sqrt(4.0 * tau**2 * np.exp(-2.0 * c2 * z) + 1.0) + 1.0)


@dataclass(frozen=True)
class LocalWindowDistance:
    """Windowed H^1 gap (a norm, not its square) with its growth factor."""

    value: float
    gamma_star: float
    h_factor: float
    t0: float
    tau: float


def local_h1_window_distance(w: Envelope, v: Envelope, t0: float, tau: float,
                             c2: float = 0.0, gamma0: float | None = None,
                             search: bool = True,
                             derivatives=None) -> LocalWindowDistance:
    """min over Gamma of ||w e^{i Gamma} - v||_{H^1(t0 - tau, t0 + tau)}.

    Trapezoid quadrature on the window nodes.  Derivatives default to
    second-order finite differences -- chirped frames are not periodic, so
    spectral differentiation is wrong here; pass (w_t, v_t) arrays when
    analytic derivatives are available.  The default Gamma seed is the
    antipode of the pointwise phase mismatch at t0 (an initializer, nothing
    more); a coarse sweep plus golden-section runs from there unless
    search=False, in which case gamma0 is used as-is.  h_factor is
    h_window_factor(w.z, tau, c2).
    """
    grid = w.grid
    if not grid.compatible(v.grid):
        raise ValueError("w and v live on different grids")
    if abs(w.z - v.z) > 1e-12 * max(1.0, abs(w.z)):
        raise ValueError("w and v must sit at the same z")
    if not (np.isfinite(tau) and tau > 0):
        raise ValueError("tau must be positive")
    t = grid.t
    if t0 - tau < t[0] or t0 + tau > t[-1]:
        raise ValueError("window extends outside the grid")

    if derivatives is None:
        wt = np.gradient(w.values, t, edge_order=2)
        vt = np.gradient(v.values, t, edge_order=2)
    else:
        wt, vt = (np.asarray(d) for d in derivatives)

    mask = (t >= t0 - tau) & (t <= t0 + tau)
    if int(np.sum(mask)) < 2:
        raise ValueError("window contains fewer than two grid nodes")
    ww, vv = w.values[mask], v.values[mask]
    wwt, vvt = wt[mask], vt[mask]
    wts = np.full(ww.shape, grid.dt)
    wts[0] *= 0.5
    wts[-1] *= 0.5

    nsum = float(np.sum(wts * (np.abs(ww) ** 2 + np.abs(vv) ** 2
                               + np.abs(wwt) ** 2 + np.abs(vvt) ** 2)))
    cross = complex(np.sum(wts * (ww * np.conj(vv) + wwt * np.conj(vvt))))

    def objective(g):
        return nsum - 2.0 * np.real(np.exp(1j * g) * cross)

    if gamma0 is None:
        i0 = int(np.argmin(np.abs(t - t0)))
        gamma0 = float(np.pi - np.angle(w.values[i0] * np.conj(v.values[i0])))

    if search:
        probes = gamma0 - np.pi + 2.0 * np.pi * np.arange(64) / 64.0
        k = int(np.argmin(objective(probes)))
        cell = 2.0 * np.pi / 64.0
        gam, lo, hi = probes[k], probes[k] - cell, probes[k] + cell
        for _ in range(2):
            gam, lo, hi = _golden(objective, lo, hi, 23)
    else:
        gam = float(gamma0)

    return LocalWindowDistance(
        value=float(np.sqrt(max(objective(gam), 0.0))),
        gamma_star=float(np.mod(gam, 2.0 * np.pi)),
        h_factor=h_window_factor(float(w.z), tau, c2),
        t0=float(t0), tau=float(tau))
