"""Closed-form solution families and linear diagnostics.

Covers CW and bright-soliton solutions of the constant-coefficient model
i Q_Z + Q_TT + rho |Q|^2 Q = 0, the modulation-instability dispersion
relation of the dimensional fiber equation, the single-mode V-parameter
check, and the linearized operators about the ground state.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import Envelope, TimeGrid, spectral_derivative

__all__ = [
    "CWSpec",
    "SolitonSpec",
    "MIResult",
    "LinearizedOps",
    "cw",
    "soliton",
    "soliton_ode_residual",
    "decay_bound",
    "mi_dispersion",
    "vparam_single_mode",
    "linearized_ops",
]

#: the soliton profile conventions accepted by SolitonSpec
CONVENTIONS = ("corrected", "original")


@dataclass(frozen=True)
class CWSpec:
    """Continuous wave for i Q_Z + Q_TT + rho |Q|^2 Q = 0:
    Q(Z) = sqrt(P0) * exp(i rho P0 Z).  Default rho = -1 (defocusing)."""

    p0: float
    rho: int = -1

    def __post_init__(self):
        if not (self.p0 > 0 and np.isfinite(self.p0)):
            raise ValueError("p0 must be positive and finite")
        if self.rho not in (-1, 1):
            raise ValueError("rho must be +1 or -1")

    def closure(self):
        p0, rho = self.p0, self.rho

        def Q(Z, T):
            T = np.asarray(T, dtype=float)
            return np.sqrt(p0) * np.exp(1j * rho * p0 * Z) * np.ones_like(T, dtype=complex)

        return Q


@dataclass(frozen=True)
class SolitonSpec:
    """Bright soliton of the focusing model (rho = +1).

    convention='corrected' (default): Phi = sqrt(2 theta) sech(sqrt(theta) T),
    which satisfies Phi'' - theta Phi + Phi^3 = 0 for every theta > 0.
    convention='original' keeps the profile sqrt(2 theta)/cosh(theta T);
    it solves the profile equation only at theta = 1 and is retained for
    side-by-side comparison (a warning is emitted when theta != 1).
    """

    theta: float
    convention: str = "corrected"

    def __post_init__(self):
        if not (self.theta > 0 and np.isfinite(self.theta)):
            raise ValueError("theta must be positive and finite")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        if self.convention == "original" and self.theta != 1.0:
            warnings.warn(
                "original profile convention does not satisfy the profile "
                "equation for theta != 1; residuals will be large",
                stacklevel=2,
            )

    def profile(self, T):
        """Real positive profile Phi(T)."""
        T = np.asarray(T, dtype=float)
        th = self.theta
        if self.convention == "corrected":
            return np.sqrt(2 * th) / np.cosh(np.sqrt(th) * T)
        return np.sqrt(2 * th) / np.cosh(th * T)

    def profile_derivative(self, T):
        """Analytic Phi'(T) (avoids spectral ringing near window edges)."""
        T = np.asarray(T, dtype=float)
        th = self.theta
        k = np.sqrt(th) if self.convention == "corrected" else th
        return -np.sqrt(2 * th) * k * np.tanh(k * T) / np.cosh(k * T)

    def closure(self):
        th = self.theta
        prof = self.profile

        def Q(Z, T):
            return prof(T) * np.exp(1j * th * Z)

        return Q


def cw(spec: CWSpec, grid: TimeGrid, Z: float = 0.0) -> Envelope:
    return Envelope(grid, spec.closure()(Z, grid.t), z=Z)


def soliton(spec: SolitonSpec, grid: TimeGrid, Z: float = 0.0) -> Envelope:
    return Envelope(grid, spec.closure()(Z, grid.t), z=Z)


def soliton_ode_residual(spec: SolitonSpec, grid: TimeGrid) -> float:
    """L2 norm of Phi'' - theta Phi + Phi^3 sampled on the grid."""
    phi = spec.profile(grid.t).astype(complex)
    d2 = spectral_derivative(phi, grid, order=2)
    res = d2 - spec.theta * phi + phi**3
    return float(np.sqrt(grid.dt * np.sum(np.abs(res) ** 2)))


def decay_bound(spec: SolitonSpec, grid: TimeGrid | None = None) -> tuple[float, float]:
    """(A1, A2) with |Phi| + |Phi'| <= A1 exp(-A2 |T|), A2 = sqrt(theta).

    A1 is the smallest constant verified pointwise on the grid; the analytic
    asymptote is 2 sqrt(2 theta) (1 + sqrt(theta)).
    """
    if spec.convention != "corrected":
        raise ValueError("decay bound is only available for the corrected profile")
    if grid is None:
        grid = TimeGrid(2048, -40.0, 40.0)
    a2 = np.sqrt(spec.theta)
    T = grid.t
    envelope = (np.abs(spec.profile(T)) + np.abs(spec.profile_derivative(T))) * np.exp(
        a2 * np.abs(T)
    )
    return float(np.max(envelope)), float(a2)


@dataclass
class MIResult:
    """kappa(omega) of the linearized CW perturbation; gain = |Im kappa|."""

    omega: np.ndarray
    kappa: np.ndarray
    gain: np.ndarray
    band_edge: float | None = None


def mi_dispersion(beta2: float, gamma: float, p0: float, omega_samples) -> MIResult:
    """kappa = (|omega beta2|/2) sqrt(omega^2 + sgn(beta2) 4 gamma P0 / |beta2|).

    Principal branch: Im kappa >= 0 inside the instability band.  For
    beta2 > 0, kappa is real for every omega; for beta2 < 0 the band is
    |omega| < sqrt(4 gamma P0 / |beta2|).
    """
    if beta2 == 0:
        raise ValueError("beta2 must be nonzero")
    if gamma <= 0 or p0 <= 0:
        raise ValueError("gamma and p0 must be positive")
    w = np.atleast_1d(np.asarray(omega_samples, dtype=float))
    radicand = w * w + np.sign(beta2) * 4.0 * gamma * p0 / abs(beta2)
    kappa = (np.abs(w * beta2) / 2.0) * np.sqrt(radicand.astype(complex))
    # principal sqrt already gives Im >= 0 on the negative real axis
    gain = np.abs(kappa.imag)
    edge = float(np.sqrt(4.0 * gamma * p0 / abs(beta2))) if beta2 < 0 else None
    return MIResult(omega=w, kappa=kappa, gain=gain, band_edge=edge)


def vparam_single_mode(
    core_radius: float, wavelength: float, n1: float, n2: float
) -> tuple[float, bool]:
    """V = (2 pi / lambda) a sqrt(n1^2 - n2^2); single-mode iff V < 2.405."""
    if core_radius <= 0 or wavelength <= 0:
        raise ValueError("core_radius and wavelength must be positive")
    if not (n1 > n2 > 0):
        raise ValueError("need n1 > n2 > 0 for a guided mode")
    v = (2.0 * np.pi / wavelength) * core_radius * np.sqrt(n1 * n1 - n2 * n2)
    return float(v), bool(v < 2.405)


@dataclass
class LinearizedOps:
    """L+ = -d2/dT2 + 1 - 3 R^2 and L- = -d2/dT2 + 1 - R^2 about the
    ground state R = sqrt(2) sech(T)."""

    grid: TimeGrid
    R: np.ndarray = field(init=False)
    R_prime: np.ndarray = field(init=False)

    def __post_init__(self):
        T = self.grid.t
        self.R = np.sqrt(2.0) / np.cosh(T)
        self.R_prime = -np.sqrt(2.0) * np.tanh(T) / np.cosh(T)

    def _second(self, u):
        return spectral_derivative(np.asarray(u, dtype=complex), self.grid, order=2)

    def L_plus(self, u) -> np.ndarray:
        return (-self._second(u) + u - 3.0 * self.R**2 * u).real if np.isrealobj(u) \
            else -self._second(u) + u - 3.0 * self.R**2 * u

    def L_minus(self, u) -> np.ndarray:
        return (-self._second(u) + u - self.R**2 * u).real if np.isrealobj(u) \
            else -self._second(u) + u - self.R**2 * u

    def residuals(self) -> dict:
        """Kernel diagnostics: L- R = 0 (phase mode), L+ R' = 0 (translation)."""
        dt = self.grid.dt

        def l2(x):
            return float(np.sqrt(dt * np.sum(np.abs(x) ** 2)))

        return {
            "l_minus_R": l2(self.L_minus(self.R)),
            "l_plus_R_prime": l2(self.L_plus(self.R_prime)),
        }


def linearized_ops(grid: TimeGrid) -> LinearizedOps:
    return LinearizedOps(grid)
