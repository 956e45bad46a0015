"""Exact frame exchange between the quadratic-potential model (z, t, v)
and the standard-frame model (Z, T, Q).

Dimensionless (relaxed convention, unit prefactors):

    T = e^{-c2 z} t,   Z = (1 - e^{-2 c2 z}) / (2 c2),
    v(z,t) = e^{i (c2/4) t^2 - (c2/2) z} Q(Z, T),

with inverse t = (1 - 2 c2 Z)^{-1/2} T, z = -ln(1 - 2 c2 Z)/(2 c2) on the
horizon-bounded range Z in [0, 1/(2 c2)).  Dimensional form for
i v_z + (b2/2) v_tt - gamma e^{-alpha z} |v|^2 v + (alpha^2/(2 b2)) t^2 v = 0
against i Q_Z + kappa Q_TT + chi |Q|^2 Q = 0:

    T = K e^{-alpha z} t,   Z = (K gamma / (2 alpha chi)) (e^{-2 alpha z} - 1),
    v = sqrt(K) e^{i (alpha/(2 b2)) t^2 - (alpha/2) z} Q(Z, T),
    K = -2 gamma kappa / (chi b2) > 0.

Pushing a Q-trajectory onto t-grids interpolates linearly in Z between
snapshots and trigonometrically (band-limited) in T; the default target
grid is the dilation t = T / pscale(z), which keeps nodes in pointwise
correspondence and makes the weighted-norm identity

    || t^2 v(z) || = e^{2 c2 z} || T^2 Q(Z) ||        (pscale-corrected
                                                       in dimensional form)
exact to roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Envelope, TimeGrid, norms, spectral_derivative
from .propagator import Snapshot, Trajectory

__all__ = [
    "TransformMap",
    "forward_coords",
    "inverse_coords",
    "push_field",
    "pull_field",
    "push_derivative",
    "push_trajectory",
    "trig_interpolate",
    "envelope_closure",
    "norm_ledger",
]


@dataclass(frozen=True)
class TransformMap:
    """Immutable frame map; build with .dimensionless() or .dimensional().

    lam     decay rate (c2, or alpha)
    pscale0 T = pscale0 e^{-lam z} t   (1, or K)
    amp0    field amplitude prefactor  (1, or sqrt(K))
    chirp   quadratic phase coefficient (c2/4, or alpha/(2 b2))
    z_scale Z = z_scale (1 - e^{-2 lam z}); horizon sup Z = z_scale
    """

    lam: float
    pscale0: float
    amp0: float
    chirp: float
    z_scale: float
    c1: int = 1
    rho: int = 1
    kind: str = "dimensionless"

    @classmethod
    def dimensionless(cls, c2: float, c1: int = 1, rho: int = 1) -> "TransformMap":
        if not (np.isfinite(c2) and c2 > 0):
            raise ValueError("c2 must be positive")
        if c1 * rho <= 0:
            raise ValueError("sign convention requires c1*rho > 0")
        return cls(lam=c2, pscale0=1.0, amp0=1.0, chirp=c2 / 4.0,
                   z_scale=1.0 / (2.0 * c2), c1=c1, rho=rho)

    @classmethod
    def dimensional(cls, alpha: float, beta2: float, gamma: float,
                    kappa: float, chi: float) -> "TransformMap":
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if beta2 == 0 or kappa == 0:
            raise ValueError("beta2 and kappa must be nonzero")
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if chi >= 0:
            raise ValueError("chi < 0 required for the bounded Z range")
        K = -2.0 * gamma * kappa / (chi * beta2)
        if K <= 0:
            raise ValueError("K = -2*gamma*kappa/(chi*beta2) must be positive")
        return cls(lam=alpha, pscale0=K, amp0=np.sqrt(K),
                   chirp=alpha / (2.0 * beta2),
                   z_scale=K * gamma / (2.0 * alpha * abs(chi)),
                   kind="dimensional")

    # -- derived scalar functions --------------------------------------

    def pscale(self, z: float) -> float:
        """dT/dt at z."""
        return self.pscale0 * np.exp(-self.lam * z)

    def amp(self, z: float) -> float:
        return self.amp0 * np.exp(-0.5 * self.lam * z)

    def c(self, z: float) -> float:
        return np.log(self.amp0) - 0.5 * self.lam * z

    def q(self, z: float) -> float:
        return self.z_scale * -np.expm1(-2.0 * self.lam * z)

    def a(self, z: float, t):
        return self.chirp * np.asarray(t) ** 2

    def p(self, z: float, t):
        return self.pscale(z) * np.asarray(t)

    def h1(self, z: float) -> float:
        return 0.0

    def h2(self, z: float) -> float:
        return 0.0

    def r(self, z: float) -> float:
        return 0.0

    def z_of(self, Z: float) -> float:
        if not (0.0 <= Z < self.z_scale):
            raise ValueError(
                f"Z={Z:.6g} outside [0, {self.z_scale:.6g}) (transformation horizon)"
            )
        return -np.log1p(-Z / self.z_scale) / (2.0 * self.lam)

    def jacobian(self, z: float, t: float = 0.0) -> float:
        """det d(Z,T)/d(z,t); dZ/dt = 0 so t drops out.  Never zero."""
        dZdz = 2.0 * self.lam * self.z_scale * np.exp(-2.0 * self.lam * z)
        return dZdz * self.pscale(z)

    def describe(self) -> dict:
        return {
            "kind": self.kind, "lam": self.lam, "pscale0": self.pscale0,
            "amp0": self.amp0, "chirp": self.chirp, "z_scale": self.z_scale,
        }


def forward_coords(tmap: TransformMap, z: float, t):
    """(z, t) -> (Z, T); z >= 0."""
    if z < 0:
        raise ValueError("the map is defined for z >= 0")
    return tmap.q(z), tmap.p(z, t)


def inverse_coords(tmap: TransformMap, Z: float, T):
    """(Z, T) -> (z, t); 0 <= Z < sup."""
    z = tmap.z_of(Z)
    return z, np.asarray(T) / tmap.pscale(z)


def trig_interpolate(values, grid: TimeGrid, targets):
    """Band-limited (trigonometric) interpolation of grid samples at
    arbitrary points; the Nyquist mode enters as a cosine so real fields
    stay real.  Exact at the nodes."""
    n = grid.n
    c = np.fft.fft(np.asarray(values)) / n
    xi = np.atleast_1d(np.asarray(targets, dtype=float)) - grid.t_min
    w = grid.omega.copy()
    phases = np.exp(1j * np.outer(xi, w))
    phases[:, n // 2] = np.cos(np.pi / grid.dt * xi)
    return phases @ c


def envelope_closure(env: Envelope) -> Callable:
    """Single-snapshot field as a closure (coordinate, points) -> values,
    band-limited in the point variable; the coordinate is ignored."""

    def closure(_coord, points):
        return trig_interpolate(env.values, env.grid, points)

    return closure


def _values_at(traj: Trajectory, x: float):
    """Linear interpolation of trajectory snapshots at coordinate x."""
    zs = np.asarray(traj.z_values)
    tol = 1e-12 * max(1.0, abs(x))
    if x < zs[0] - tol or x > zs[-1] + tol:
        raise ValueError(
            f"coordinate {x:.6g} outside the stored range [{zs[0]:.6g}, {zs[-1]:.6g}]"
        )
    i = int(np.searchsorted(zs, x))
    i = min(max(i, 0), len(zs) - 1)
    if abs(zs[i] - x) <= tol:
        return traj.snapshots[i].envelope.values, traj.snapshots[i].envelope.grid
    if zs[i] > x:
        i -= 1
    lam = (x - zs[i]) / (zs[i + 1] - zs[i])
    vals = (1.0 - lam) * traj.snapshots[i].envelope.values \
        + lam * traj.snapshots[i + 1].envelope.values
    return vals, traj.snapshots[i].envelope.grid


def _resolve_source(source, coord):
    """(values, grid) for a Trajectory or single Envelope, or (closure, None)."""
    if isinstance(source, Trajectory):
        return _values_at(source, coord)
    if isinstance(source, Envelope):
        if abs(source.z - coord) > 1e-9 * max(1.0, abs(coord)):
            raise ValueError(
                f"envelope is at coordinate {source.z:.6g}, not {coord:.6g}")
        return source.values, source.grid
    if callable(source):
        return source, None
    raise TypeError(
        "source must be a Trajectory, an Envelope, or a closure (coord, points)")


def push_field(tmap: TransformMap, source, z: float,
               grid: TimeGrid | None = None) -> Envelope:
    """v(z, .) from a Q source (SNLSE-frame Trajectory or closure Q(Z, T)).

    Default target grid is the dilation t = T / pscale(z) of the source
    grid (node-for-node, no T-interpolation); an explicit t-frame grid
    resamples trigonometrically."""
    if z < 0:
        raise ValueError("the map is defined for z >= 0")
    Zq = tmap.q(z)
    src, base_grid = _resolve_source(source, Zq)

    if base_grid is not None:  # trajectory
        if grid is None:
            tgrid = base_grid.scaled(1.0 / tmap.pscale(z))
            qvals = src
        else:
            tgrid = grid
            qvals = trig_interpolate(src, base_grid, tmap.p(z, grid.t))
    else:
        if grid is None:
            raise ValueError("a target grid is required for closure sources")
        tgrid = grid
        qvals = np.asarray(src(Zq, tmap.p(z, grid.t)))

    phase = np.exp(1j * tmap.a(z, tgrid.t))
    return Envelope(tgrid, tmap.amp(z) * phase * qvals, z=z)


def pull_field(tmap: TransformMap, source, Z: float,
               grid: TimeGrid | None = None) -> Envelope:
    """Q(Z, .) from a v source (t-frame Trajectory or closure v(z, t));
    exact inverse of push_field."""
    z = tmap.z_of(Z)
    src, base_grid = _resolve_source(source, z)

    if base_grid is not None:
        if grid is None:
            Tgrid = base_grid.scaled(tmap.pscale(z))
            vvals = src
        else:
            Tgrid = grid
            t_pts = np.asarray(grid.t) / tmap.pscale(z)
            vvals = trig_interpolate(src, base_grid, t_pts)
    else:
        if grid is None:
            raise ValueError("a target grid is required for closure sources")
        Tgrid = grid
        t_pts = np.asarray(grid.t) / tmap.pscale(z)
        vvals = np.asarray(src(z, t_pts))

    t_pts = np.asarray(Tgrid.t) / tmap.pscale(z)
    phase = np.exp(-1j * tmap.chirp * t_pts**2)
    return Envelope(Tgrid, phase * vvals / tmap.amp(z), z=Z)


def push_derivative(tmap: TransformMap, source, z: float,
                    grid: TimeGrid | None = None,
                    source_derivative=None) -> Envelope:
    """d/dt of the pushed field, evaluated analytically through the map:

        v_t = amp e^{i chirp t^2} [ 2 i chirp t Q + pscale(z) Q_T ].

    Avoids differentiating the chirp numerically (its oscillation defeats
    spectral differentiation on wide grids).  Q_T comes from the source
    trajectory spectrally, or from source_derivative for closures."""
    if z < 0:
        raise ValueError("the map is defined for z >= 0")
    Zq = tmap.q(z)
    src, base_grid = _resolve_source(source, Zq)

    if base_grid is not None:
        qt = spectral_derivative(src, base_grid)
        if grid is None:
            tgrid = base_grid.scaled(1.0 / tmap.pscale(z))
            qvals, qtvals = src, qt
        else:
            tgrid = grid
            targets = tmap.p(z, grid.t)
            qvals = trig_interpolate(src, base_grid, targets)
            qtvals = trig_interpolate(qt, base_grid, targets)
    else:
        if grid is None:
            raise ValueError("a target grid is required for closure sources")
        if source_derivative is None:
            raise ValueError("closure sources need source_derivative for Q_T")
        tgrid = grid
        targets = tmap.p(z, grid.t)
        qvals = np.asarray(src(Zq, targets))
        qtvals = np.asarray(source_derivative(Zq, targets))

    t = tgrid.t
    inner = 2j * tmap.chirp * t * qvals + tmap.pscale(z) * qtvals
    vt = tmap.amp(z) * np.exp(1j * tmap.a(z, t)) * inner
    return Envelope(tgrid, vt, z=z)


def push_trajectory(tmap: TransformMap, traj: Trajectory, z_values,
                    grid: TimeGrid) -> Trajectory:
    """Pushed snapshots on one shared t-grid (so finite differences across
    snapshots are meaningful); every Z(z) must lie in the stored range."""
    snaps = []
    for z in np.asarray(z_values, dtype=float):
        env = push_field(tmap, traj, float(z), grid=grid)
        snaps.append(Snapshot(float(z), env, norms(env.values, grid, c1=tmap.c1)))
    return Trajectory(snaps)


def norm_ledger(tmap: TransformMap, v_env: Envelope, q_env: Envelope) -> dict:
    """Both sides of ||t^2 v(z)|| = e^{2 lam z} pscale0^{-2} ||T^2 Q(Z)||
    and their relative deviation."""
    z = v_env.z
    lhs = norms(v_env.values, v_env.grid).wt2
    rhs = np.exp(2.0 * tmap.lam * z) / tmap.pscale0**2 \
        * norms(q_env.values, q_env.grid).wt2
    scale = max(lhs, rhs, 1e-300)
    return {"t2_v": lhs, "scaled_T2_Q": rhs, "rel_dev": abs(lhs - rhs) / scale}
