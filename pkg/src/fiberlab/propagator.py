"""Split-step spectral propagation for the fiber Schrodinger models.

All models are cast as
    i u_z + f(z) u_tt + g(z) |u|^2 u + [V0(z) + V1(z) t + V2(z) t^2] u
         + i h(z) u = 0.

The linear (dispersion) substep is exact in Fourier space; the nonlinear /
potential / loss substep is exact pointwise for the frozen-coefficient
subflow, since |u|^2 evolves as |u0|^2 exp(-2 h s) along it.  Both
multipliers are unimodular apart from the loss factor, so the discrete mass
is conserved to roundoff whenever h == 0.

Schemes: LIE (phase then full linear, coefficients at the left endpoint)
and STRANG (half linear, full phase with coefficients at the midpoint,
half linear) — first and second order respectively.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import Envelope, NormReport, TimeGrid, guard_leak, norms, write_envelope_csv
from .serialize import dump_stable

__all__ = [
    "EquationSpec",
    "StepperConfig",
    "Snapshot",
    "Trajectory",
    "PropagationError",
    "GuardLeakError",
    "NonFiniteFieldError",
    "propagate",
    "residual",
    "export_trajectory",
]

KINDS = ("NLSE", "TNLSE", "SNLSE", "GENERAL")
SCHEMES = ("LIE", "STRANG")


def _zero(_z: float) -> float:
    return 0.0


@dataclass(frozen=True)
class EquationSpec:
    """Which model, plus its coefficients.

    NLSE:    i u_z + u_tt + c1 exp(-c2 z) |u|^2 u = 0
    TNLSE:   NLSE + (c2^2/4) t^2 u
    SNLSE:   i Q_Z + Q_TT + rho |Q|^2 Q = 0
    GENERAL: the full non-autonomous form with callables f, g, h, v0, v1, v2
    """

    kind: str
    c1: int = 1
    c2: float = 0.0
    rho: int = 1
    f: Callable[[float], float] | None = None
    g: Callable[[float], float] | None = None
    h: Callable[[float], float] | None = None
    v0: Callable[[float], float] | None = None
    v1: Callable[[float], float] | None = None
    v2: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.kind in ("NLSE", "TNLSE"):
            if self.c1 not in (-1, 1):
                raise ValueError("c1 must be +1 or -1")
            if not (self.c2 > 0 and np.isfinite(self.c2)):
                raise ValueError("c2 must be positive (loss coefficient)")
        elif self.kind == "SNLSE":
            if self.rho not in (-1, 1):
                raise ValueError("rho must be +1 or -1")
        else:  # GENERAL
            if self.f is None or self.g is None:
                raise ValueError("GENERAL requires f and g callables")

    # -- constructors ------------------------------------------------------
    @classmethod
    def nlse(cls, c1: int, c2: float) -> "EquationSpec":
        return cls(kind="NLSE", c1=c1, c2=c2)

    @classmethod
    def tnlse(cls, c1: int, c2: float) -> "EquationSpec":
        return cls(kind="TNLSE", c1=c1, c2=c2)

    @classmethod
    def snlse(cls, rho: int) -> "EquationSpec":
        return cls(kind="SNLSE", rho=rho)

    @classmethod
    def general(cls, f, g, h=None, v0=None, v1=None, v2=None) -> "EquationSpec":
        return cls(kind="GENERAL", f=f, g=g, h=h, v0=v0, v1=v1, v2=v2)

    # -- coefficient evaluation ---------------------------------------------
    def f_at(self, z: float) -> float:
        return float(self.f(z)) if self.kind == "GENERAL" else 1.0

    def g_at(self, z: float) -> float:
        if self.kind == "GENERAL":
            return float(self.g(z))
        if self.kind == "SNLSE":
            return float(self.rho)
        return self.c1 * float(np.exp(-self.c2 * z))

    def h_at(self, z: float) -> float:
        if self.kind == "GENERAL" and self.h is not None:
            return float(self.h(z))
        return 0.0

    def potential(self, t: np.ndarray, z: float):
        """V0 + V1 t + V2 t^2 evaluated on the grid (scalar 0.0 if absent)."""
        if self.kind == "TNLSE":
            return (self.c2 * self.c2 / 4.0) * t * t
        if self.kind == "GENERAL":
            v = 0.0
            if self.v0 is not None:
                v = v + float(self.v0(z))
            if self.v1 is not None:
                v = v + float(self.v1(z)) * t
            if self.v2 is not None:
                v = v + float(self.v2(z)) * t * t
            return v
        return 0.0

    @property
    def energy_sign(self) -> int:
        if self.kind in ("NLSE", "TNLSE"):
            return self.c1
        if self.kind == "SNLSE":
            return self.rho
        return 1

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("NLSE", "TNLSE"):
            d.update(c1=self.c1, c2=self.c2)
        elif self.kind == "SNLSE":
            d.update(rho=self.rho)
        return d


@dataclass(frozen=True)
class StepperConfig:
    dz: float
    scheme: str = "STRANG"
    store_every: int = 1
    guard_tol: float | None = 1e-8
    guard_frac: float = 0.25

    def __post_init__(self):
        if not (self.dz > 0 and np.isfinite(self.dz)):
            raise ValueError("dz must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")

    def describe(self) -> dict:
        return {
            "dz": self.dz,
            "scheme": self.scheme,
            "store_every": self.store_every,
            "guard_tol": self.guard_tol,
            "guard_frac": self.guard_frac,
        }


@dataclass
class Snapshot:
    z: float
    envelope: Envelope
    norms: NormReport


@dataclass
class Trajectory:
    snapshots: list
    equation: EquationSpec | None = None
    config: StepperConfig | None = None

    def __post_init__(self):
        zs = [s.z for s in self.snapshots]
        if any(b <= a for a, b in zip(zs, zs[1:])):
            raise ValueError("snapshot z values must be strictly increasing")

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    @property
    def z_values(self) -> np.ndarray:
        return np.array([s.z for s in self.snapshots])

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    @classmethod
    def from_closure(cls, closure, grid: TimeGrid, z_values, c1: int = 1) -> "Trajectory":
        """Sample an analytic solution u(z, t) into a trajectory."""
        snaps = []
        for z in z_values:
            vals = np.asarray(closure(z, grid.t), dtype=complex)
            snaps.append(Snapshot(float(z), Envelope(grid, vals, z=float(z)),
                                  norms(vals, grid, c1=c1)))
        return cls(snaps)


class PropagationError(RuntimeError):
    """Aborted run; .trajectory holds the snapshots up to the last good z."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class GuardLeakError(PropagationError):
    pass


class NonFiniteFieldError(PropagationError):
    pass


def _phase_step(u, t, eq: EquationSpec, z_eval: float, dz: float):
    """Exact frozen-coefficient subflow of
    i u_z + g |u|^2 u + V u + i h u = 0 over dz."""
    g = eq.g_at(z_eval)
    h = eq.h_at(z_eval)
    amp2 = u.real * u.real + u.imag * u.imag
    if h != 0.0:
        # along the subflow |u(s)|^2 = |u0|^2 e^{-2hs}; integral in closed form
        nl_phase = g * amp2 * (-np.expm1(-2.0 * h * dz) / (2.0 * h))
    else:
        nl_phase = g * amp2 * dz
    u = u * np.exp(1j * (nl_phase + dz * eq.potential(t, z_eval)))
    if h != 0.0:
        u = u * np.exp(-h * dz)
    return u


def propagate(
    eq: EquationSpec, u0: Envelope, z_end: float, cfg: StepperConfig
) -> Trajectory:
    """March u0 to z_end.  The step count is round((z_end - z0)/dz), and the
    actual step is adjusted to land on z_end exactly."""
    grid = u0.grid
    z0 = u0.z
    if z_end < z0:
        raise ValueError("z_end must not be behind the initial coordinate")

    def snap(z, u):
        return Snapshot(z, Envelope(grid, u.copy(), z=z),
                        norms(u, grid, c1=eq.energy_sign))

    u = u0.values.copy()
    snaps = [snap(z0, u)]
    if z_end == z0:
        return Trajectory(snaps, eq, cfg)

    n_steps = max(1, int(round((z_end - z0) / cfg.dz)))
    dz = (z_end - z0) / n_steps
    t = grid.t
    om2 = grid.omega**2
    strang = cfg.scheme == "STRANG"

    # constant-f models: precompute the dispersion multipliers once
    const_f = eq.kind != "GENERAL"
    if const_f:
        half_mult = np.exp(-0.5j * om2 * dz)
        full_mult = half_mult * half_mult

    def check(z, u):
        if not np.all(np.isfinite(u)):
            raise NonFiniteFieldError(
                f"non-finite field at z={z:.6g}; last good z={snaps[-1].z:.6g}",
                Trajectory(snaps, eq, cfg),
            )
        if cfg.guard_tol is not None:
            leak = guard_leak(u, grid, cfg.guard_frac)
            if leak > cfg.guard_tol:
                raise GuardLeakError(
                    f"guard-band leak {leak:.3g} exceeds {cfg.guard_tol:.3g} "
                    f"at z={z:.6g}",
                    Trajectory(snaps, eq, cfg),
                )

    check(z0, u)
    for k in range(n_steps):
        zl = z0 + k * dz
        if strang:
            if const_f:
                u = np.fft.ifft(np.fft.fft(u) * half_mult)
            else:
                u = np.fft.ifft(np.fft.fft(u) * np.exp(
                    -1j * eq.f_at(zl + 0.25 * dz) * om2 * (0.5 * dz)))
            u = _phase_step(u, t, eq, zl + 0.5 * dz, dz)
            if const_f:
                u = np.fft.ifft(np.fft.fft(u) * half_mult)
            else:
                u = np.fft.ifft(np.fft.fft(u) * np.exp(
                    -1j * eq.f_at(zl + 0.75 * dz) * om2 * (0.5 * dz)))
        else:
            u = _phase_step(u, t, eq, zl, dz)
            if const_f:
                u = np.fft.ifft(np.fft.fft(u) * full_mult)
            else:
                u = np.fft.ifft(np.fft.fft(u) * np.exp(-1j * eq.f_at(zl) * om2 * dz))
        if (k + 1) % cfg.store_every == 0 or k == n_steps - 1:
            z = z0 + (k + 1) * dz if k < n_steps - 1 else z_end
            check(z, u)
            snaps.append(snap(z, u))
    return Trajectory(snaps, eq, cfg)


def residual(eq: EquationSpec, traj: Trajectory):
    """Per-interior-snapshot L2 norm of
    i u_z + f u_tt + g |u|^2 u + V u + i h u,
    with u_z from the centered difference of adjacent snapshots and u_tt
    spectral.  Returns (z_interior, residual_norms)."""
    snaps = list(traj.snapshots)
    if len(snaps) < 3:
        raise ValueError("need at least 3 snapshots for the z-derivative stencil")
    zs, out = [], []
    for prev, cur, nxt in zip(snaps, snaps[1:], snaps[2:]):
        grid = cur.envelope.grid
        u = cur.envelope.values
        uz = (nxt.envelope.values - prev.envelope.values) / (nxt.z - prev.z)
        utt = np.fft.ifft(-(grid.omega**2) * np.fft.fft(u))
        z = cur.z
        res = (
            1j * uz
            + eq.f_at(z) * utt
            + eq.g_at(z) * (np.abs(u) ** 2) * u
            + eq.potential(grid.t, z) * u
            + 1j * eq.h_at(z) * u
        )
        zs.append(z)
        out.append(float(np.sqrt(grid.dt * np.sum(np.abs(res) ** 2))))
    return np.array(zs), np.array(out)


def export_trajectory(traj: Trajectory, out_dir) -> Path:
    """Write one CSV per snapshot plus a JSON index; returns the index path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, z_values, norm_rows = [], [], []
    for i, s in enumerate(traj.snapshots):
        name = f"snap_{i:05d}.csv"
        write_envelope_csv(s.envelope, out / name)
        files.append(name)
        z_values.append(s.z)
        norm_rows.append(s.norms.as_dict())
    index = {
        "z": z_values,
        "norms": norm_rows,
        "files": files,
        "config": traj.config.describe() if traj.config else None,
        "equation": traj.equation.describe() if traj.equation else None,
    }
    path = out / "trajectory.json"
    dump_stable(index, path)
    return path
