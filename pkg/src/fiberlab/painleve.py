"""Integrability compatibility condition for the non-autonomous model

    i v_z + f(z) v_tt + g(z) |v|^2 v + [V0 + V1 t + V2 t^2] v + i h(z) v = 0.

The quadratic-potential coefficient V2(z) is not free: single-valuedness
about movable singularities forces

    (4 f^2 g g_z - 2 f f_z g^2) h - 4 f^2 g^2 h^2 - 2 f^2 g^2 h_z
      - g^2 f f_zz + f^2 g g_zz - 2 f^2 g_z^2 + f_z^2 g^2 + f f_z g g_z
      + 4 V2 f^3 g^2 = 0,

which this module solves for V2 and checks against a given equation.  The
h-free special case reduces to

    V2 = [g^2 f f_zz - f^2 g g_zz + 2 f^2 g_z^2 - g^2 f_z^2 - f f_z g g_z]
         / (4 f^3 g^2).

V0 and V1 stay arbitrary.  The gain/loss term is removable: if v solves the
equation with h, then w = v exp(+int_0^z h) solves the h-free equation with
g replaced by g exp(-2 int_0^z h); V2 is invariant under this substitution.
"""
from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Envelope
from .propagator import EquationSpec

__all__ = [
    "CoefficientFamily",
    "SingularCoefficientError",
    "compatibility_v2",
    "is_integrable",
    "family_from_equation",
    "eliminate_gain_loss",
]


class SingularCoefficientError(ValueError):
    """f or g vanishes where a derivative of the condition is needed."""


Coeffs = namedtuple("Coeffs", "f fz fzz g gz gzz h hz")

_FD_STEP = 2e-3  # ~eps**(1/6): balances truncation vs roundoff for d2


def _fd1(fn, z, s):
    return (-fn(z + 2 * s) + 8 * fn(z + s) - 8 * fn(z - s) + fn(z - 2 * s)) / (12 * s)


def _fd2(fn, z, s):
    return (
        -fn(z + 2 * s) + 16 * fn(z + s) - 30 * fn(z) + 16 * fn(z - s) - fn(z - 2 * s)
    ) / (12 * s * s)


@dataclass
class CoefficientFamily:
    """f, g (nonvanishing) and optional h, with derivative closures when
    available; missing derivatives fall back to 4th-order central
    differences of the supplied callables."""

    f: Callable[[float], float]
    g: Callable[[float], float]
    h: Callable[[float], float] | None = None
    df: Callable[[float], float] | None = None
    d2f: Callable[[float], float] | None = None
    dg: Callable[[float], float] | None = None
    d2g: Callable[[float], float] | None = None
    dh: Callable[[float], float] | None = None
    fd_step: float = _FD_STEP
    kind: str = "analytic"

    def eval(self, z: float) -> Coeffs:
        s = self.fd_step * max(1.0, abs(z))
        f = float(self.f(z))
        g = float(self.g(z))
        if abs(f) < 1e-14 or abs(g) < 1e-14:
            raise SingularCoefficientError(f"f or g vanishes at z={z:.6g}")
        fz = float(self.df(z)) if self.df else _fd1(self.f, z, s)
        fzz = float(self.d2f(z)) if self.d2f else _fd2(self.f, z, s)
        gz = float(self.dg(z)) if self.dg else _fd1(self.g, z, s)
        gzz = float(self.d2g(z)) if self.d2g else _fd2(self.g, z, s)
        if self.h is None:
            h = hz = 0.0
        else:
            h = float(self.h(z))
            hz = float(self.dh(z)) if self.dh else _fd1(self.h, z, s)
        return Coeffs(f, fz, fzz, g, gz, gzz, h, hz)

    @classmethod
    def tabulated(cls, z_grid, f_values, g_values, h_values=None) -> "CoefficientFamily":
        """Family sampled on a uniform z-grid; derivatives by 4th-order
        central differences, so evaluation is restricted to interior nodes
        (two in from each edge)."""
        z = np.asarray(z_grid, dtype=float)
        if z.ndim != 1 or len(z) < 5:
            raise ValueError("need a 1-d z grid with at least 5 nodes")
        dz = z[1] - z[0]
        if dz <= 0 or np.max(np.abs(np.diff(z) - dz)) > 1e-9 * abs(dz):
            raise ValueError("z grid must be uniformly increasing")

        def d1(a):
            return (-a[4:] + 8 * a[3:-1] - 8 * a[1:-3] + a[:-4]) / (12 * dz)

        def d2(a):
            return (-a[4:] + 16 * a[3:-1] - 30 * a[2:-2] + 16 * a[1:-3] - a[:-4]) / (
                12 * dz * dz
            )

        tables = {}
        for name, vals in (("f", f_values), ("g", g_values), ("h", h_values)):
            if vals is None:
                continue
            a = np.asarray(vals, dtype=float)
            if a.shape != z.shape:
                raise ValueError(f"{name} values must match the z grid")
            tables[name] = (a, d1(a), d2(a))

        zi = z[2:-2]

        def lookup(name, deriv):
            def fn(zq):
                i = int(round((zq - z[0]) / dz)) - 2
                if not (0 <= i < len(zi)) or abs(z[i + 2] - zq) > 1e-9 * max(1.0, abs(zq)):
                    raise ValueError(
                        f"tabulated family evaluable only at interior nodes; got z={zq}"
                    )
                return tables[name][deriv][i] if deriv else tables[name][0][i + 2]

            return fn

        fam = cls(
            f=lookup("f", 0), g=lookup("g", 0),
            h=lookup("h", 0) if "h" in tables else None,
            df=lookup("f", 1), d2f=lookup("f", 2),
            dg=lookup("g", 1), d2g=lookup("g", 2),
            dh=lookup("h", 1) if "h" in tables else None,
            kind="tabulated",
        )
        fam.interior_nodes = zi
        return fam


def compatibility_v2(fam: CoefficientFamily, z: float) -> float:
    """V2(z) solving the compatibility condition for this family."""
    c = fam.eval(z)
    f, fz, fzz, g, gz, gzz, h, hz = c
    f2, g2 = f * f, g * g
    num = (
        -(4 * f2 * g * gz - 2 * f * fz * g2) * h
        + 4 * f2 * g2 * h * h
        + 2 * f2 * g2 * hz
        + g2 * f * fzz
        - f2 * g * gzz
        + 2 * f2 * gz * gz
        - fz * fz * g2
        - f * fz * g * gz
    )
    return num / (4.0 * f2 * f * g2)


def condition_residual(fam: CoefficientFamily, z: float, v2: float) -> float:
    """LHS of the compatibility condition with a trial V2, scaled by the
    largest participating term (0 for a compatible V2)."""
    c = fam.eval(z)
    f, fz, fzz, g, gz, gzz, h, hz = c
    f2, g2 = f * f, g * g
    terms = [
        (4 * f2 * g * gz - 2 * f * fz * g2) * h,
        -4 * f2 * g2 * h * h,
        -2 * f2 * g2 * hz,
        -g2 * f * fzz,
        f2 * g * gzz,
        -2 * f2 * gz * gz,
        fz * fz * g2,
        f * fz * g * gz,
        4 * v2 * f2 * f * g2,
    ]
    scale = max(max(abs(t) for t in terms), 1e-300)
    return abs(sum(terms)) / scale


def family_from_equation(eq: EquationSpec) -> CoefficientFamily:
    """Coefficient family of a model; analytic derivatives for the named
    kinds, finite-difference fallback for GENERAL callables."""
    if eq.kind in ("NLSE", "TNLSE"):
        c1, c2 = eq.c1, eq.c2

        def g(z):
            return c1 * np.exp(-c2 * z)

        return CoefficientFamily(
            f=lambda z: 1.0, g=g,
            df=lambda z: 0.0, d2f=lambda z: 0.0,
            dg=lambda z: -c2 * g(z), d2g=lambda z: c2 * c2 * g(z),
        )
    if eq.kind == "SNLSE":
        rho = eq.rho
        return CoefficientFamily(
            f=lambda z: 1.0, g=lambda z: float(rho),
            df=lambda z: 0.0, d2f=lambda z: 0.0,
            dg=lambda z: 0.0, d2g=lambda z: 0.0,
        )
    return CoefficientFamily(f=eq.f, g=eq.g, h=eq.h)


def is_integrable(
    eq: EquationSpec,
    tol: float | None = None,
    z_span: tuple[float, float] = (0.0, 1.0),
    samples: int = 41,
    family: CoefficientFamily | None = None,
) -> tuple[bool, float]:
    """Does the equation's quadratic-potential coefficient match the
    compatibility value over z_span?  Returns (verdict, max deviation),
    deviation being |present - required| / max(1, |required|)."""
    fam = family if family is not None else family_from_equation(eq)
    if tol is None:
        tol = 1e-4 if fam.kind == "tabulated" else 1e-8

    def present_v2(z):
        if eq.kind == "TNLSE":
            return eq.c2 * eq.c2 / 4.0
        if eq.kind == "GENERAL" and eq.v2 is not None:
            return float(eq.v2(z))
        return 0.0

    zs = np.linspace(z_span[0], z_span[1], samples)
    dev = 0.0
    for z in zs:
        required = compatibility_v2(fam, float(z))
        dev = max(dev, abs(present_v2(float(z)) - required) / max(1.0, abs(required)))
    return dev < tol, dev


def _simpson_antiderivative(h: Callable[[float], float], panels: int = 256):
    """H(z) = int_0^z h by composite Simpson (panels per call)."""

    def H(z: float) -> float:
        if z == 0.0:
            return 0.0
        n = 2 * panels
        s = np.linspace(0.0, z, n + 1)
        vals = np.array([h(float(x)) for x in s])
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return float((z / n) / 3.0 * np.dot(w, vals))

    return H


def eliminate_gain_loss(eq: EquationSpec, H: Callable[[float], float] | None = None):
    """Remove the i h(z) u term from a GENERAL spec.

    Returns (eq2, lift): eq2 has h == 0 and g replaced by g exp(-2 H), and
    lift maps an Envelope solving eq to the Envelope w = v exp(+H(z))
    solving eq2.  H is the antiderivative of h with H(0)=0 (numerical
    quadrature when not supplied)."""
    if eq.kind != "GENERAL":
        raise ValueError("gain/loss elimination applies to GENERAL specs")
    if eq.h is None:
        return eq, lambda env: env
    if H is None:
        H = _simpson_antiderivative(eq.h)
    g_old = eq.g

    def g_new(z):
        return float(g_old(z)) * float(np.exp(-2.0 * H(z)))

    eq2 = EquationSpec.general(f=eq.f, g=g_new, h=None,
                               v0=eq.v0, v1=eq.v1, v2=eq.v2)

    def lift(env: Envelope) -> Envelope:
        return Envelope(env.grid, env.values * np.exp(H(env.z)), z=env.z)

    return eq2, lift
