"""Distance budget between the decaying-nonlinearity model with and without
the parabolic potential.

Both equations are started from the same initial envelope.  The L2 distance
d(z) = ||v - u|| then obeys a differential inequality

    d'(z) <= 3 M^2 d(z) + (c2^2/4) ||t^2 v(z)||,

where M bounds sup|v|, sup|u| over the run (the cubic nonlinearity is
Lipschitz on the ball of radius M, with the decay factor exp(-c2 z) <= 1
absorbed).  Gronwall then gives a computable envelope once ||t^2 v|| is
controlled, which happens through the lens change: v maps onto a plain cubic
equation whose weighted norms grow at most like

    eta(Z, delta) = delta + (8/ct) [((c2/2)+1) delta + 1] (e^{ct Z/2} - 1) - 4Z,

with ct measured from the mapped run (ct = max{2 sup ||Q_TT||, sup |Q|^2})
and delta bounding ||t^2 v0|| and ||t dv0/dt||.  The closed-form envelope at
the end of the chain is

    (c2^2/4) * e^{2 c2 L} * eta(Z(L), delta) * z * e^{C |c1| z},

with C a Strichartz-type constant that is not computable from the run
(default 1, configurable).  The experiment driver therefore bases its verdict
on two checks that involve only measured quantities: the raw differential
inequality above, and the Gronwall envelope built directly from it,

    E(z) = (c2^2/4) * int_0^z e^{3 M^2 (z-s)} ||t^2 v(s)|| ds.

G, H and the suggested delta threshold are the small-interval bookkeeping
functions: delta below (G - H) / (1 + ((|c2|/2)+1) * growth) guarantees the
target distance eps on [0, L] for L small enough that G - H > 0.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import Envelope, norms
from .propagator import EquationSpec, StepperConfig, Trajectory, propagate
from .transform import TransformMap

__all__ = [
    "ClosenessBudget",
    "distance",
    "eta",
    "gronwall_envelope",
    "run_closeness",
]


def _growth(ct: float, Z):
    """(8/ct) * (e^{ct Z / 2} - 1), continuous through ct = 0 (limit 4Z)."""
    if ct == 0.0:
        return 4.0 * np.asarray(Z, dtype=float) + 0.0
    return 8.0 * np.expm1(0.5 * ct * np.asarray(Z, dtype=float)) / ct


@dataclass(frozen=True)
class ClosenessBudget:
    """Analytic budget: smallness delta, target eps, interval [0, L], measured
    growth constant c_tilde, and the configurable constant c_strichartz."""

    delta: float
    eps: float
    L: float
    c_tilde: float
    c2: float
    c1: int = 1
    c_strichartz: float = 1.0

    def __post_init__(self):
        if not (self.delta >= 0.0 and np.isfinite(self.delta)):
            raise ValueError("delta must be nonnegative")
        if not (self.eps > 0.0):
            raise ValueError("eps must be positive")
        if not (self.L > 0.0):
            raise ValueError("L must be positive")
        if not (self.c_tilde >= 0.0 and np.isfinite(self.c_tilde)):
            raise ValueError("c_tilde must be nonnegative")
        if not (self.c2 > 0.0):
            raise ValueError("c2 must be positive")
        if self.c1 not in (-1, 1):
            raise ValueError("c1 must be +1 or -1")
        if not (self.c_strichartz > 0.0):
            raise ValueError("c_strichartz must be positive")

    # map z -> Z under the lens change; Z(z) < 1/(2 c2) for all finite z
    def Z_of(self, z):
        return -np.expm1(-2.0 * self.c2 * np.asarray(z, dtype=float)) / (2.0 * self.c2)

    def eta_of(self, Z) -> float:
        return eta(self, Z)

    def G_of(self) -> float:
        c2, L = self.c2, self.L
        damp = (self.c_strichartz * abs(self.c1) / c2) * np.expm1(c2 * L)
        return self.eps * (4.0 / c2) / (-np.expm1(-c2 * L)) * np.exp(-damp)

    def H_of(self) -> float:
        ZL = self.Z_of(self.L)
        return float(_growth(self.c_tilde, ZL) - 4.0 * ZL)

    def suggested_delta(self) -> float:
        """Largest delta the small-interval argument certifies for (L, eps).
        Negative means no delta works at this L; shrink L."""
        ZL = self.Z_of(self.L)
        denom = 1.0 + (abs(self.c2) / 2.0 + 1.0) * _growth(self.c_tilde, ZL)
        return float((self.G_of() - self.H_of()) / denom)


def eta(budget: ClosenessBudget, Z):
    """Weighted-norm growth bound at mapped coordinate Z in [0, 1/(2 c2))."""
    Z = np.asarray(Z, dtype=float)
    horizon = 1.0 / (2.0 * budget.c2)
    if np.any(Z < 0.0) or np.any(Z >= horizon):
        raise ValueError(f"Z must lie in [0, {horizon!r})")
    coeff = (budget.c2 / 2.0 + 1.0) * budget.delta + 1.0
    out = budget.delta + coeff * _growth(budget.c_tilde, Z) - 4.0 * Z
    return float(out) if out.ndim == 0 else out


def gronwall_envelope(budget: ClosenessBudget, z):
    """Closed-form distance bound at z in [0, L]:
    (c2^2/4) e^{2 c2 L} eta(Z(L), delta) z e^{C |c1| z}."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0) or np.any(z > budget.L * (1.0 + 1e-12)):
        raise ValueError("z must lie in [0, L]")
    eta_L = eta(budget, budget.Z_of(budget.L))
    out = (0.25 * budget.c2**2 * np.exp(2.0 * budget.c2 * budget.L) * eta_L
           * z * np.exp(budget.c_strichartz * abs(budget.c1) * z))
    return float(out) if out.ndim == 0 else out


def distance(v: Envelope, u: Envelope) -> float:
    """L2 distance between two envelopes on the same grid."""
    if not v.grid.compatible(u.grid):
        raise ValueError("envelopes live on different grids")
    diff = v.values - u.values
    return float(np.sqrt(v.grid.dt * np.sum(np.abs(diff) ** 2)))


def _qtt_l2(rep) -> float:
    # ||Q_TT|| recovered from the Sobolev ladder: h2^2 - h1^2 = ||Q_TT||^2
    return float(np.sqrt(max(rep.h2**2 - rep.h1**2, 0.0)))


def run_closeness(
    v0: Envelope,
    c1: int,
    c2: float,
    L: float,
    cfg: StepperConfig,
    delta: float | None = None,
    eps: float = 1e-2,
    c_strichartz: float = 1.0,
    concurrent: bool = False,
) -> dict:
    """Propagate both models from v0 over [0, L] and check the budget.

    Three runs: v (with potential), u (without), and the mapped companion Q
    started from e^{-i (c2/4) t^2} v0, which supplies the growth constant
    c_tilde.  delta defaults to the measured max of ||t^2 v0||, ||t dv0/dt||
    (so the smallness hypotheses hold by construction); passing a smaller
    delta demotes a violated hypothesis to a report warning.

    The verdict is the conjunction of
      (a) d'(z) <= 3 M^2 d(z) + (c2^2/4) ||t^2 v(z)|| at every snapshot
          (centered differences inside, one-sided at the ends), and
      (b) d(z) <= E(z), the Gronwall envelope integrated from measured
          ||t^2 v|| with the measured M (trapezoid).
    """
    grid = v0.grid
    rep0 = norms(v0.values, grid, c1=c1)
    warn = []
    if delta is None:
        delta_used = max(rep0.wt2, rep0.wt1d) * (1.0 + 1e-9)
    else:
        delta_used = float(delta)
        if rep0.wt2 >= delta_used:
            warn.append(f"||t^2 v0|| = {rep0.wt2:.6g} >= delta = {delta_used:.6g}")
        if rep0.wt1d >= delta_used:
            warn.append(f"||t dv0/dt|| = {rep0.wt1d:.6g} >= delta = {delta_used:.6g}")

    tmap = TransformMap.dimensionless(c2, c1=c1, rho=c1)
    Z_L = tmap.q(L)
    q0 = Envelope(grid, np.exp(-0.25j * c2 * grid.t**2) * v0.values)

    jobs = (
        (EquationSpec.tnlse(c1=c1, c2=c2), v0, L),
        (EquationSpec.nlse(c1=c1, c2=c2), v0, L),
        (EquationSpec.snlse(rho=c1), q0, Z_L),
    )
    if concurrent:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            traj_v, traj_u, traj_q = pool.map(
                lambda j: propagate(j[0], j[1], j[2], cfg), jobs)
    else:
        traj_v, traj_u, traj_q = (propagate(*j, cfg) for j in jobs)

    zs = traj_v.z_values
    if not np.allclose(zs, traj_u.z_values):
        raise RuntimeError("paired runs stored different z values")

    sup_v = max(s.norms.sup for s in traj_v)
    sup_u = max(s.norms.sup for s in traj_u)
    M = max(sup_v, sup_u)
    c_tilde = max(max(2.0 * _qtt_l2(s.norms), s.norms.sup**2) for s in traj_q)

    budget = ClosenessBudget(delta=delta_used, eps=eps, L=L, c_tilde=c_tilde,
                             c2=c2, c1=c1, c_strichartz=c_strichartz)

    d = np.array([distance(sv.envelope, su.envelope)
                  for sv, su in zip(traj_v, traj_u)])
    wt2 = np.array([s.norms.wt2 for s in traj_v])

    # (a) raw differential inequality, finite-difference d'.  At z=0 the
    # inequality is an equality in the continuum (v-u departs exactly along
    # the potential direction, so d'(0) = (c2^2/4) ||t^2 v0|| with d(0)=0);
    # the relative tolerance absorbs the O(h^2) stencil truncation of that
    # equality case (measured ~4e-6 of the bound at h=1e-3).
    dprime = np.gradient(d, zs) if len(zs) > 2 else np.zeros_like(d)
    bound = 3.0 * M**2 * d + 0.25 * c2**2 * wt2
    slack = bound - dprime
    scale = float(np.max(bound))
    a_ok = bool(np.all(slack >= -(1e-4 * scale + 1e-15)))

    # (b) measured Gronwall envelope E(z), cumulative trapezoid
    f = np.exp(-3.0 * M**2 * zs) * wt2
    integral = np.concatenate(
        ([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(zs))))
    envelope = 0.25 * c2**2 * np.exp(3.0 * M**2 * zs) * integral
    b_ok = bool(np.all(d <= envelope * (1.0 + 1e-9) + 1e-12))

    # weighted-norm chain along the potential run (holds when the delta
    # hypotheses do); informative, not part of the verdict
    eta_chain = np.exp(2.0 * c2 * zs) * eta(budget, budget.Z_of(zs))
    chain_ok = bool(np.all(wt2 <= eta_chain * (1.0 + 1e-9)))

    snapshots = [
        {"z": float(z_), "d": float(d_), "envelope": float(e_),
         "wt2": float(w_), "slack": float(s_)}
        for z_, d_, e_, w_, s_ in zip(zs, d, envelope, wt2, slack)
    ]
    return {
        "delta_measured": float(delta_used),
        "wt2_initial": float(rep0.wt2),
        "wt1d_initial": float(rep0.wt1d),
        "c_tilde": float(c_tilde),
        "M": float(M),
        "c1": int(c1), "c2": float(c2), "L": float(L), "Z_L": float(Z_L),
        "G": budget.G_of(), "H": budget.H_of(),
        "suggested_delta": budget.suggested_delta(),
        "checks": {"raw_inequality": a_ok, "envelope": b_ok,
                   "weighted_chain": chain_ok},
        "warnings": warn,
        "snapshots": snapshots,
        "verdict": bool(a_ok and b_ok),
    }
