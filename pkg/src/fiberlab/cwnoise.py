"""Linearized CW-plus-noise propagation under loss, normal dispersion.

Model: i u_z + (beta2/2) u_tt - gamma e^{-alpha z} |u|^2 u = 0 with beta2 > 0
(stable CW regime).  The perturbed carrier u = sqrt(P0) (1 + c) e^{-i theta}
is closed with the phase choice

    theta_z = gamma P0 e^{-alpha z} |1+c|^2 + (beta2/2) theta_t^2,

a Gaussian ansatz phi_t^2 = |c|^2 = e^{-alpha z} e^{-4 pi t^2 / P0}, and a
linearization in c = a + i b.  In the Fourier domain (A, B, Phi uppercase)
the system is, with k = (beta2/2) omega^2 and source
S(omega) = sqrt(P0/2) omega e^{-P0 omega^2 / (8 pi)}:

    A_z   =  k B + S e^{-alpha z / 2}
    B_z   = -k A
    Phi_z =  2 gamma P0 e^{-alpha z} A
             + gamma P0 (sqrt(P0)/2) e^{-2 alpha z} e^{-P0 omega^2/(16 pi)}
             + (beta2/2) (sqrt(P0)/2) e^{-alpha z} e^{-P0 omega^2/(16 pi)}

Two closed-form conventions are provided, mirroring the soliton-profile
arbitration:

* convention='corrected' (default) solves the system above exactly: the
  homogeneous modes oscillate (cos kz, sin kz) and no frequency is singular.
* convention='original' keeps the derivation that substitutes the B-integral
  with a dropped sign, yielding real exponential modes e^{+-kz}, resonance
  denominators (beta2 omega^2)^2 - alpha^2, and the singular frequencies
  +-sqrt(alpha/beta2), +-sqrt(2 alpha/beta2).  It satisfies the second-order
  equation A_zz = k^2 A - (alpha/2) S e^{-alpha z/2} (note the sign of k^2 A)
  and the B-row B_z = -k A, but not the A-row of the first-order system.

integrate_system is the arbiter: a fixed-step RK4 integration of the system
as displayed, vectorized over omega.  verify_closed_form compares either
convention against it and reports the mismatch instead of hiding it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Envelope, TimeGrid
from .propagator import EquationSpec, StepperConfig, propagate

__all__ = [
    "CWNoiseParams",
    "CWNoiseSolution",
    "IntegrationError",
    "SingularFrequencyError",
    "bounded_growth",
    "closed_form",
    "cosimulation_divergence",
    "fit_constants",
    "gaussian_ansatz",
    "integrate_system",
    "phase_equation_rhs",
    "singular_frequencies",
    "system_rhs",
    "verify_closed_form",
]


class SingularFrequencyError(ValueError):
    """omega within the exclusion radius of a resonance root."""

    def __init__(self, omega: float, root: float):
        super().__init__(
            f"omega = {omega:.6g} is within the exclusion radius of the "
            f"singular frequency {root:.6g}")
        self.omega = omega
        self.root = root


@dataclass(frozen=True)
class CWNoiseParams:
    """Loss alpha, normal dispersion beta2 > 0, Kerr gamma, carrier power p0.
    c1, c2, kappa1 are the homogeneous-mode constants of the 'original'
    closed form (defaults give the pure particular solution)."""

    alpha: float
    beta2: float
    gamma: float
    p0: float
    c1: float = 0.0
    c2: float = 0.0
    kappa1: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0.0 and np.isfinite(self.alpha)):
            raise ValueError("alpha must be positive")
        if not (self.beta2 > 0.0 and np.isfinite(self.beta2)):
            raise ValueError("beta2 must be positive (stable CW regime)")
        if not (self.gamma > 0.0 and np.isfinite(self.gamma)):
            raise ValueError("gamma must be positive")
        if not (self.p0 > 0.0 and np.isfinite(self.p0)):
            raise ValueError("p0 must be positive")

    def phi_nl(self, z):
        """Nonlinear phase of the noise-free carrier: int_0^z gamma P0 e^{-alpha s} ds."""
        return self.gamma * self.p0 * (-np.expm1(-self.alpha * np.asarray(z, float))) / self.alpha

    def describe(self) -> dict:
        return {"alpha": self.alpha, "beta2": self.beta2, "gamma": self.gamma,
                "p0": self.p0, "c1": self.c1, "c2": self.c2,
                "kappa1": self.kappa1}


@dataclass
class CWNoiseSolution:
    """omega-indexed table of the spectral perturbation components."""

    z: np.ndarray          # (nz,)
    omega: np.ndarray      # (nw,)
    A: np.ndarray          # (nz, nw)
    B: np.ndarray          # (nz, nw)
    Phi: np.ndarray        # (nz, nw)
    singular_omegas: tuple = ()


def singular_frequencies(params: CWNoiseParams) -> tuple:
    """Resonance roots of the 'original' closed form, sorted ascending."""
    r1 = np.sqrt(params.alpha / params.beta2)
    r2 = np.sqrt(2.0 * params.alpha / params.beta2)
    return (-r2, -r1, r1, r2)


def _source(params: CWNoiseParams, omega):
    # sqrt(P0/2) omega e^{-P0 omega^2 / (8 pi)}
    return (np.sqrt(params.p0 / 2.0) * omega
            * np.exp(-params.p0 * omega**2 / (8.0 * np.pi)))


def gaussian_ansatz(params: CWNoiseParams, z, t):
    """The assumed phi_t^2 = |c|^2 profile e^{-alpha z} e^{-4 pi t^2 / P0}."""
    z = np.asarray(z, float)
    t = np.asarray(t, float)
    return np.exp(-params.alpha * z) * np.exp(-4.0 * np.pi * t**2 / params.p0)


def phase_equation_rhs(params: CWNoiseParams, z, t, c_field=0.0, theta_t=0.0):
    """theta_z = gamma P0 e^{-alpha z} |1+c|^2 + (beta2/2) theta_t^2."""
    z = np.asarray(z, float)
    mod2 = np.abs(1.0 + np.asarray(c_field)) ** 2
    return (params.gamma * params.p0 * np.exp(-params.alpha * z) * mod2
            + 0.5 * params.beta2 * np.asarray(theta_t) ** 2)


def _check_singular(params, omega, radius):
    om = np.atleast_1d(np.asarray(omega, float))
    for root in singular_frequencies(params):
        hit = np.abs(om - root) < radius
        if np.any(hit):
            raise SingularFrequencyError(float(om[hit][0]), float(root))


def closed_form(params: CWNoiseParams, z, omega, convention: str = "corrected",
                constants=None, exclusion_radius: float = 1e-3):
    """Evaluate (A, B, Phi) at z, omega (broadcast together).

    convention='corrected': exact solution of the first-order system;
    constants = (a0, b0, phi0) initial values, default zeros; regular at
    every omega.  convention='original': the derived closed form with real
    exponential modes; constants = (c1, c2, kappa1), default the params
    fields, Phi fixed to its natural antiderivative; omega within
    exclusion_radius of a resonance root raises SingularFrequencyError.
    """
    if convention not in ("corrected", "original"):
        raise ValueError("convention must be 'corrected' or 'original'")
    z = np.asarray(z, float)
    omega = np.asarray(omega, float)
    al, b2, ga, p0 = params.alpha, params.beta2, params.gamma, params.p0
    k = 0.5 * b2 * omega**2
    S = _source(params, omega)
    e16 = np.exp(-p0 * omega**2 / (16.0 * np.pi))
    sq = np.sqrt(p0) / 2.0
    dec = np.exp(-0.5 * al * z)

    if convention == "corrected":
        a0, b0, phi0 = constants if constants is not None else (0.0, 0.0, 0.0)
        sig = (b2 * omega**2) ** 2 + al**2
        K = -2.0 * al * S / sig
        Bp = -2.0 * b2 * omega**2 * S / sig     # particular B amplitude
        h1 = np.asarray(a0, float) - K
        h2 = np.asarray(b0, float) - Bp
        ck, sk = np.cos(k * z), np.sin(k * z)
        A = K * dec + h1 * ck + h2 * sk
        B = Bp * dec - h1 * sk + h2 * ck
        # int_0^z e^{-al s} cos/sin(k s) ds
        den = al**2 + k**2
        ic = (al - np.exp(-al * z) * (al * ck - k * sk)) / den
        isn = (k - np.exp(-al * z) * (al * sk + k * ck)) / den
        Phi = (np.asarray(phi0, float)
               + 2.0 * ga * p0 * (K * (2.0 / (3.0 * al)) * (-np.expm1(-1.5 * al * z))
                                  + h1 * ic + h2 * isn)
               + ga * p0 * sq * e16 * (-np.expm1(-2.0 * al * z)) / (2.0 * al)
               + 0.5 * b2 * sq * e16 * (-np.expm1(-al * z)) / al)
        return A, B, Phi

    _check_singular(params, omega, exclusion_radius)
    c1, c2, k1 = (constants if constants is not None
                  else (params.c1, params.c2, params.kappa1))
    c1 = np.asarray(c1, float)
    c2 = np.asarray(c2, float)
    k1 = np.asarray(k1, float)
    D = (b2 * omega**2) ** 2 - al**2
    em, ep = np.exp(-k * z), np.exp(k * z)
    A = (2.0 * al * S / D) * dec + c1 * em + c2 * ep
    B = (2.0 * b2 * omega**2 * S / D) * dec + c1 * em - c2 * ep + k1
    Phi = (2.0 * ga * p0 * (-(4.0 / 3.0) * (S / D) * np.exp(-1.5 * al * z)
                            - 2.0 * c1 * np.exp(-(k + al) * z) / (b2 * omega**2 + 2.0 * al)
                            + 2.0 * c2 * np.exp((k - al) * z) / (b2 * omega**2 - 2.0 * al))
           - (ga * p0 / (2.0 * al)) * sq * np.exp(-2.0 * al * z) * e16
           - (b2 / (2.0 * al)) * sq * np.exp(-al * z) * e16)
    return A, B, Phi


def fit_constants(params: CWNoiseParams, omega, a0=0.0, az0=0.0, b0=0.0,
                  exclusion_radius: float = 1e-3):
    """(c1, c2, kappa1) of the 'original' form matching A(0), A_z(0), B(0).

    Default is the zero-initial-perturbation fit.  omega = 0 is degenerate
    (both homogeneous modes are constant there): the fit requires az0 = 0 at
    omega = 0 and splits a0 evenly.
    """
    omega = np.asarray(omega, float)
    _check_singular(params, omega, exclusion_radius)
    al, b2 = params.alpha, params.beta2
    k = 0.5 * b2 * omega**2
    S = _source(params, omega)
    D = (b2 * omega**2) ** 2 - al**2
    a0, az0, b0, k, S, D = np.broadcast_arrays(
        np.asarray(a0, float), np.asarray(az0, float), np.asarray(b0, float),
        k, S, D)
    zero_k = k == 0.0
    if np.any(zero_k & (np.abs(az0) > 1e-14)):
        raise ValueError("az0 must vanish at omega = 0 (constant modes)")
    s = a0 - 2.0 * al * S / D                     # c1 + c2
    diff = np.divide(az0 + al**2 * S / D, k,      # c2 - c1
                     out=np.zeros_like(s), where=~zero_k)
    c1 = 0.5 * (s - diff)
    c2 = 0.5 * (s + diff)
    kappa1 = b0 - 4.0 * k * S / D - c1 + c2   # 2 beta2 omega^2 = 4 k
    return c1, c2, kappa1


def system_rhs(params: CWNoiseParams, z, omega, A, B):
    """Right-hand sides (A_z, B_z, Phi_z) of the first-order system."""
    al, b2, ga, p0 = params.alpha, params.beta2, params.gamma, params.p0
    k = 0.5 * b2 * omega**2
    S = _source(params, omega)
    e16 = np.exp(-p0 * omega**2 / (16.0 * np.pi))
    sq = np.sqrt(p0) / 2.0
    Az = k * B + S * np.exp(-0.5 * al * z)
    Bz = -k * A
    Phiz = (2.0 * ga * p0 * np.exp(-al * z) * A
            + ga * p0 * sq * np.exp(-2.0 * al * z) * e16
            + 0.5 * b2 * sq * np.exp(-al * z) * e16)
    return Az, Bz, Phiz


class IntegrationError(RuntimeError):
    """Non-finite state during integration (step size too large)."""


def integrate_system(params: CWNoiseParams, z_end: float, omega,
                     initial=None, n_steps: int | None = None,
                     store_every: int | None = None) -> CWNoiseSolution:
    """Fixed-step RK4 integration of the system, vectorized over omega.

    initial = (A0, B0, Phi0), default zeros.  The default step targets
    ~1e-9 relative accuracy for the stiffest omega in the grid; it raises
    IntegrationError if the state stops being finite.
    """
    if not (z_end >= 0.0 and np.isfinite(z_end)):
        raise ValueError("z_end must be nonnegative and finite")
    omega = np.atleast_1d(np.asarray(omega, float))
    if n_steps is None:
        rate = max(float(np.max(0.5 * params.beta2 * omega**2)),
                   params.alpha, 1.0)
        n_steps = max(256, int(np.ceil(500.0 * rate * max(z_end, 1e-3))))
    if store_every is None:
        store_every = max(1, n_steps // 200)
    if initial is None:
        A = np.zeros_like(omega)
        B = np.zeros_like(omega)
        Phi = np.zeros_like(omega)
    else:
        A, B, Phi = (np.broadcast_to(np.asarray(x, float), omega.shape).copy()
                     for x in initial)
    dz = z_end / n_steps if n_steps else 0.0

    zs = [0.0]
    As, Bs, Ps = [A.copy()], [B.copy()], [Phi.copy()]
    z = 0.0
    # non-finite states are detected and turned into IntegrationError below
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(n_steps):
            k1 = system_rhs(params, z, omega, A, B)
            k2 = system_rhs(params, z + 0.5 * dz, omega,
                            A + 0.5 * dz * k1[0], B + 0.5 * dz * k1[1])
            k3 = system_rhs(params, z + 0.5 * dz, omega,
                            A + 0.5 * dz * k2[0], B + 0.5 * dz * k2[1])
            k4 = system_rhs(params, z + dz, omega,
                            A + dz * k3[0], B + dz * k3[1])
            A = A + (dz / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            B = B + (dz / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            Phi = Phi + (dz / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            z = (j + 1) * dz
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))
                    and np.all(np.isfinite(Phi))):
                raise IntegrationError(
                    f"non-finite state at z = {z:.6g}; reduce the step "
                    f"(n_steps = {n_steps} was too coarse for this omega grid)")
            if (j + 1) % store_every == 0 or j == n_steps - 1:
                zs.append(z)
                As.append(A.copy())
                Bs.append(B.copy())
                Ps.append(Phi.copy())

    return CWNoiseSolution(z=np.array(zs), omega=omega,
                           A=np.array(As), B=np.array(Bs), Phi=np.array(Ps),
                           singular_omegas=singular_frequencies(params))


def verify_closed_form(params: CWNoiseParams, z_end: float, omega,
                       convention: str = "corrected",
                       tol: float = 1e-6) -> dict:
    """Compare a closed-form convention against the RK4 oracle.

    Zero initial data on both sides ('original' gets the zero-initial
    constant fit).  Returns a report with the worst relative deviation per
    component; agree=False is reported, never raised, so a mismatch is
    visible rather than silently accepted.
    """
    omega = np.atleast_1d(np.asarray(omega, float))
    sol = integrate_system(params, z_end, omega)
    zcol = sol.z[:, None]
    if convention == "corrected":
        A, B, Phi = closed_form(params, zcol, omega[None, :], "corrected")
    else:
        c1, c2, k1 = fit_constants(params, omega)
        A, B, Phi = closed_form(params, zcol, omega[None, :], "original",
                                constants=(c1[None, :], c2[None, :], k1[None, :]))
        Phi = Phi - Phi[0:1, :]   # shift to Phi(0) = 0 to match zero initial
    report = {"convention": convention, "tol": tol, "z_end": float(z_end)}
    worst = 0.0
    for name, cf, rk in (("A", A, sol.A), ("B", B, sol.B), ("Phi", Phi, sol.Phi)):
        scale = max(float(np.max(np.abs(rk))), 1e-12)
        err = float(np.max(np.abs(cf - rk))) / scale
        i, j = np.unravel_index(int(np.argmax(np.abs(cf - rk))), cf.shape)
        report[name] = {"max_rel_error": err,
                        "worst_z": float(sol.z[i]),
                        "worst_omega": float(omega[j])}
        worst = max(worst, err)
    report["max_rel_error"] = worst
    report["agree"] = bool(worst < tol)
    return report


def bounded_growth(params: CWNoiseParams) -> bool:
    """True iff the 'original' homogeneous growing mode is absent (c2 = 0)."""
    return params.c2 == 0.0


def cosimulation_divergence(params: CWNoiseParams, epsilon: float,
                            omega0: float, z_end: float, grid: TimeGrid,
                            cfg: StepperConfig) -> dict:
    """Validity-envelope probe: propagate the full model from a CW with a
    single cosine power perturbation and compare the measured in-phase
    component against the linearized prediction a(z,t) = eps cos(kz) cos(w0 t).

    The linearization drops quadratic terms and folds the Kerr response into
    the phase equation, so the reported divergence grows with epsilon and
    with gamma P0 z; it is a diagnostic, not a bound.
    """
    al, b2, ga, p0 = params.alpha, params.beta2, params.gamma, params.p0
    eq = EquationSpec.general(f=lambda z: 0.5 * b2,
                              g=lambda z: -ga * np.exp(-al * z))
    t = grid.t
    u0 = Envelope(grid, np.sqrt(p0) * (1.0 + epsilon * np.cos(omega0 * t)) + 0j)
    traj = propagate(eq, u0, z_end, cfg)
    k = 0.5 * b2 * omega0**2
    div = 0.0
    for snap in traj:
        a_full = 0.5 * (np.abs(snap.envelope.values) ** 2 / p0 - 1.0)
        a_lin = epsilon * np.cos(k * snap.z) * np.cos(omega0 * t)
        div = max(div, float(np.sqrt(grid.dt * np.sum((a_full - a_lin) ** 2)))
                  / max(epsilon, 1e-300))
    return {"divergence": div, "epsilon": epsilon, "omega0": omega0,
            "z_end": float(z_end), "snapshots": len(traj)}
