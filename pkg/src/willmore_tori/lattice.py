"""Conformal classes of tori and the lattice Z + omega Z, with point reduction.

Everything here is a small immutable value type.  Moduli are kept in the
upper half plane (Teichmueller space); ``canonicalize`` maps a modulus into
the closed fundamental set

    M = { a + ib : b > 0, 0 <= a <= 1/2, a^2 + b^2 >= 1 }

and records the modular group element that was used.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModularReductionFailure, NonPositiveImaginaryPart

_MAX_ITER = 1000
_EPS = 1e-14


@dataclass(frozen=True)
class ConformalClass:
    """A modulus ``omega`` (Im > 0).

    ``matrix`` is the integer matrix ``[[a, b], [c, d]]`` (det 1) with
    ``omega_sl2 = (a*w + b) / (c*w + d)`` for the input ``w``; ``reflected``
    records the final ``omega -> -conj(omega)`` step.
    """

    omega: complex
    source: complex | None = None
    matrix: tuple[tuple[int, int], tuple[int, int]] = ((1, 0), (0, 1))
    reflected: bool = False

    def __post_init__(self) -> None:
        if not np.imag(self.omega) > 0:
            raise NonPositiveImaginaryPart(f"Im(omega) must be > 0, got {self.omega!r}")

    @property
    def in_fundamental_set(self) -> bool:
        return in_fundamental_set(self.omega)


def in_fundamental_set(omega: complex, tol: float = 1e-12) -> bool:
    a, b = omega.real, omega.imag
    return b > 0 and -tol <= a <= 0.5 + tol and a * a + b * b >= 1 - tol


def canonicalize(omega: complex) -> ConformalClass:
    """Reduce ``omega`` into the fundamental set by the standard algorithm.

    Translate the real part into [-1/2, 1/2], invert when |omega| < 1, repeat;
    finally reflect into a >= 0.  Boundary ties go to a = 1/2.
    """
    w = complex(omega)
    if not w.imag > 0:
        raise NonPositiveImaginaryPart(f"Im(omega) must be > 0, got {omega!r}")
    # track w_current = (a*w0 + b) / (c*w0 + d)
    a, b, c, d = 1, 0, 0, 1
    for _ in range(_MAX_ITER):
        n = int(np.floor(w.real + 0.5))
        if n:
            w -= n
            a, b = a - n * c, b - n * d
        if abs(w) ** 2 < 1.0 - _EPS:
            w = -1.0 / w
            a, b, c, d = -c, -d, a, b
            continue
        break
    else:
        raise ModularReductionFailure(f"modular reduction did not terminate for {omega!r}")
    if w.real < -0.5 + _EPS:  # a = -1/2 tie, map to +1/2
        w += 1
        a, b = a + c, b + d
    reflected = False
    if w.real < 0:
        w = complex(-w.real, w.imag)
        reflected = True
    if abs(w.real) < _EPS:
        w = complex(0.0, w.imag)
    return ConformalClass(w, source=complex(omega), matrix=((a, b), (c, d)), reflected=reflected)


@dataclass(frozen=True)
class Lattice:
    """The lattice Z*omega1 + Z*omega2 with omega1 = 1 and omega2 = omega."""

    omega: complex
    omega1: complex = field(default=1.0 + 0j)

    def __post_init__(self) -> None:
        if not np.imag(self.omega / self.omega1) > 0:
            raise NonPositiveImaginaryPart("generators must satisfy Im(omega2/omega1) > 0")

    @property
    def omega2(self) -> complex:
        return complex(self.omega)

    @property
    def generators(self) -> tuple[complex, complex]:
        return complex(self.omega1), complex(self.omega)

    @property
    def min_period(self) -> float:
        """Length of the shortest nonzero lattice vector."""
        cc = canonicalize(self.omega / self.omega1)
        (a, b), (c, d) = cc.matrix
        shortest = abs(c * self.omega + d * self.omega1)
        return float(shortest)

    @property
    def area(self) -> float:
        return float(abs((np.conj(self.omega1) * self.omega).imag))

    def coordinates(self, z):
        """Real coordinates (s, t) with z = s*omega1 + t*omega2."""
        z = np.asarray(z, dtype=complex)
        w1, w2 = complex(self.omega1), complex(self.omega)
        det = (np.conj(w1) * w2).imag
        s = (np.conj(z) * w2).imag / det
        t = (np.conj(w1) * z).imag / det
        return s, t

    def point(self, s, t):
        return np.asarray(s) * self.omega1 + np.asarray(t) * self.omega

    def nearest_lattice_vector(self, z):
        """Lattice vector nearest to z (exact search among neighbour candidates)."""
        z = np.asarray(z, dtype=complex)
        s, t = self.coordinates(z)
        m0, n0 = np.floor(s), np.floor(t)
        best = None
        best_d = None
        for dm in (-1, 0, 1, 2):
            for dn in (-1, 0, 1, 2):
                g = self.point(m0 + dm, n0 + dn)
                dist = np.abs(z - g)
                if best is None:
                    best, best_d = g, dist
                else:
                    better = dist < best_d
                    best = np.where(better, g, best)
                    best_d = np.where(better, dist, best_d)
        return best

    def distance_to_lattice(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(z - self.nearest_lattice_vector(z))


def reduce_point(lattice: Lattice, z):
    """Representative of z mod the lattice in the parallelogram {s*w1 + t*w2 : s,t in [0,1)}."""
    z = np.asarray(z, dtype=complex)
    s, t = lattice.coordinates(z)
    s = s - np.floor(s)
    t = t - np.floor(t)
    # floor can leave exactly 1.0 after round-off
    s = np.where(s >= 1.0, 0.0, s)
    t = np.where(t >= 1.0, 0.0, t)
    out = lattice.point(s, t)
    return out if out.ndim else complex(out)


def periodic_difference(lattice: Lattice, z, w):
    """The representative of z - w mod the lattice closest to the origin."""
    dz = np.asarray(z, dtype=complex) - np.asarray(w, dtype=complex)
    return dz - lattice.nearest_lattice_vector(dz)


@dataclass(frozen=True)
class TorusMap:
    """The real-linear map (x, y) -> x + sigma*y from C/(Z + iZ) onto C/(Z + sigma Z)."""

    sigma: complex

    def __post_init__(self) -> None:
        if not np.imag(self.sigma) > 0:
            raise NonPositiveImaginaryPart("sigma must have Im > 0")

    @property
    def matrix(self) -> np.ndarray:
        s = complex(self.sigma)
        return np.array([[1.0, s.real], [0.0, s.imag]])

    @property
    def jacobian(self) -> float:
        return float(np.imag(self.sigma))

    def inverse(self, z):
        """Reference-torus coordinates (x, y) of a point z."""
        z = np.asarray(z, dtype=complex)
        s = complex(self.sigma)
        y = z.imag / s.imag
        x = z.real - s.real * y
        return x, y


def torus_chart(A: TorusMap, p) -> complex:
    """Apply A to a representative p = (x, y) of a point on the reference torus."""
    x, y = p
    return np.asarray(x) + A.sigma * np.asarray(y)
