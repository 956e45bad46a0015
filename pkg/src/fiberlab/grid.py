"""Uniform periodic time grids, spectral calculus, and field norms.

Fields live on a uniform grid over [t_min, t_max) with n samples (n a power
of two) and are treated as one period of a periodic signal.  The transform
convention is the angular one, u_hat(w) = integral u(t) exp(-i w t) dt, so
the second derivative multiplies the spectrum by -w**2.  Quadrature is the
rectangle rule dt * sum(...), which on a periodic grid coincides with both
the trapezoid rule and spectral quadrature.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "TimeGrid",
    "Envelope",
    "NormReport",
    "spectral_derivative",
    "spectral_shift",
    "norms",
    "guard_leak",
    "window_width_ok",
    "read_envelope_csv",
    "write_envelope_csv",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform periodic grid: n samples on [t_min, t_max), dt = (t_max - t_min)/n."""

    n: int
    t_min: float
    t_max: float

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.t_min) and np.isfinite(self.t_max)):
            raise ValueError("t_min/t_max must be finite")
        if self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / self.n

    @cached_property
    def t(self) -> np.ndarray:
        return self.t_min + self.dt * np.arange(self.n)

    @cached_property
    def omega(self) -> np.ndarray:
        # FFT ordering: exactly one zero entry, antisymmetric up to Nyquist.
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dt)

    @property
    def width(self) -> float:
        return self.t_max - self.t_min

    def scaled(self, s: float) -> "TimeGrid":
        """Grid with endpoints dilated by s > 0 (same n)."""
        if s <= 0:
            raise ValueError("scale must be positive")
        return TimeGrid(self.n, s * self.t_min, s * self.t_max)

    def compatible(self, other: "TimeGrid", tol: float = 1e-12) -> bool:
        return (
            self.n == other.n
            and abs(self.t_min - other.t_min) <= tol * max(1.0, abs(self.t_min))
            and abs(self.t_max - other.t_max) <= tol * max(1.0, abs(self.t_max))
        )


@dataclass
class Envelope:
    """Complex field snapshot: values on grid.t, taken at propagation coordinate z."""

    grid: TimeGrid
    values: np.ndarray
    z: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.n,):
            raise ValueError(f"values must have shape ({self.grid.n},), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if not np.isfinite(self.z):
            raise ValueError("z must be finite")
        self.values = v

    def copy(self) -> "Envelope":
        return Envelope(self.grid, self.values.copy(), self.z)


def _as_values(u, grid=None):
    if isinstance(u, Envelope):
        return u.values, u.grid
    if grid is None:
        raise ValueError("grid required when u is a bare array")
    v = np.asarray(u, dtype=np.complex128)
    if v.shape != (grid.n,):
        raise ValueError("array length does not match grid")
    return v, grid


def spectral_derivative(u, grid: TimeGrid | None = None, order: int = 1) -> np.ndarray:
    """d^order/dt^order via FFT; order in {1, 2}."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    v, g = _as_values(u, grid)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite input")
    w = g.omega
    mult = 1j * w if order == 1 else -(w * w)
    return np.fft.ifft(mult * np.fft.fft(v))


def spectral_shift(u, grid: TimeGrid | None = None, s: float = 0.0) -> np.ndarray:
    """Periodic translation u(t + s), exact for band-limited fields."""
    v, g = _as_values(u, grid)
    return np.fft.ifft(np.fft.fft(v) * np.exp(1j * g.omega * s))


@dataclass
class NormReport:
    """Norm/functional panel of a single snapshot.  energy is the C2=0
    Hamiltonian 0.5*||u_t||^2 - (c1/4)*int |u|^4 (a diagnostic otherwise)."""

    l2: float
    h1: float
    h2: float
    sup: float
    wt2: float      # || t^2 u ||_L2
    wt1d: float     # || t u_t ||_L2
    mass: float
    energy: float
    zhidkov1: float  # sup|u| + ||u_t||_L2

    def __post_init__(self):
        for name in ("l2", "h1", "h2", "sup", "wt2", "wt1d", "mass", "zhidkov1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        # discrete Sobolev-embedding sanity (tiny slack for roundoff)
        if self.sup > self.h1 * (1.0 + 1e-9) + 1e-12:
            raise ValueError("sup-norm exceeds H1 norm")

    def as_dict(self) -> dict:
        return {
            "l2": self.l2, "h1": self.h1, "h2": self.h2, "sup": self.sup,
            "wt2": self.wt2, "wt1d": self.wt1d, "mass": self.mass,
            "energy": self.energy, "zhidkov1": self.zhidkov1,
        }


def norms(u, grid: TimeGrid | None = None, c1: float = 1.0) -> NormReport:
    """All norms of one snapshot in a single pass (one FFT reused)."""
    v, g = _as_values(u, grid)
    dt = g.dt
    t = g.t
    w = g.omega
    vhat = np.fft.fft(v)
    ut = np.fft.ifft(1j * w * vhat)
    utt = np.fft.ifft(-(w * w) * vhat)

    def l2sq(x):
        return dt * float(np.sum(np.abs(x) ** 2))

    mass = l2sq(v)
    dsq = l2sq(ut)
    ddsq = l2sq(utt)
    sup = float(np.max(np.abs(v))) if g.n else 0.0
    quart = dt * float(np.sum(np.abs(v) ** 4))
    return NormReport(
        l2=np.sqrt(mass),
        h1=np.sqrt(mass + dsq),
        h2=np.sqrt(mass + dsq + ddsq),
        sup=sup,
        wt2=np.sqrt(l2sq(t * t * v)),
        wt1d=np.sqrt(l2sq(t * ut)),
        mass=mass,
        energy=0.5 * dsq - (c1 / 4.0) * quart,
        zhidkov1=sup + np.sqrt(dsq),
    )


def guard_leak(u, grid: TimeGrid | None = None, frac: float = 0.25) -> float:
    """Relative field magnitude in the guard band (frac of the window at each
    edge).  0 means perfectly quiet; compare against a tolerance like 1e-8."""
    v, g = _as_values(u, grid)
    k = int(np.floor(g.n * frac))
    if k == 0:
        return 0.0
    sup = float(np.max(np.abs(v)))
    if sup == 0.0:
        return 0.0
    edge = max(float(np.max(np.abs(v[:k]))), float(np.max(np.abs(v[-k:]))))
    return edge / sup


def window_width_ok(width: float, field_width: float, factor: float = 10.0) -> bool:
    """Decaying fields want a window at least `factor` times their width."""
    return width >= factor * field_width


# ---------------------------------------------------------------------------
# CSV snapshot format: header "t,re,im", one row per sample, 17 significant
# digits, LF line endings, UTF-8.

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_envelope_csv(env: Envelope, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,re,im\n")
        for t, val in zip(env.grid.t, env.values):
            fh.write(f"{_fmt(t)},{_fmt(val.real)},{_fmt(val.imag)}\n")


def read_envelope_csv(path, z: float = 0.0) -> Envelope:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(io.StringIO(fh.read()))
        rows = list(reader)
    if not rows or [c.strip() for c in rows[0]] != ["t", "re", "im"]:
        raise ValueError("expected header 't,re,im'")
    data = np.array([[float(c) for c in row] for row in rows[1:]], dtype=float)
    if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] < 8:
        raise ValueError("malformed envelope CSV")
    t = data[:, 0]
    n = len(t)
    dt = t[1] - t[0]
    if dt <= 0 or np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(1.0, abs(dt)):
        raise ValueError("time column must be uniformly increasing")
    grid = TimeGrid(n, float(t[0]), float(t[0] + n * dt))
    return Envelope(grid, data[:, 1] + 1j * data[:, 2], z=z)
