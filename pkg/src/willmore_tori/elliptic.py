"""Weierstrass elliptic functions on an arbitrary lattice.

Evaluation works in a reduced basis (Omega1, Omega2) of the lattice whose
ratio tau lies in the modular fundamental domain, so the nome
q = exp(i*pi*tau) satisfies |q| <= exp(-pi*sqrt(3)/2) and the q-series for
the logarithmic derivative of theta_1 converges geometrically.  With
u = z / Omega1 reduced to the centred period parallelogram,

    zeta(u)  = eta1*u + pi*cot(pi*u) + 4*pi * sum_n q^2n/(1-q^2n) sin(2 pi n u)
    wp(u)    = -zeta'(u)

and higher derivatives follow termwise.  The brute-force lattice sum is kept
in ``lattice_sum_wp`` as an independent oracle.
"""
from __future__ import annotations

import numpy as np
from scipy.special import zeta as riemann_zeta

from .errors import PoleAtInput
from .lattice import Lattice, canonicalize

_SMALL_U = 0.25
_N_SMALL = 24
# 2*zeta(2k), k = 1.._N_SMALL, for pi*cot(pi*u) - 1/u = -sum 2 zeta(2k) u^(2k-1)
_TWO_ZETA_EVEN = np.array([2.0 * riemann_zeta(2.0 * k, 1.0) for k in range(1, _N_SMALL + 1)])


def _cot_derivs(u, order):
    """Derivatives of pi*cot(pi*u) of orders 0..order (list)."""
    c = 1.0 / np.tan(np.pi * u)
    c2 = c * c
    pi = np.pi
    out = [pi * c]
    if order >= 1:
        out.append(-pi**2 * (1 + c2))
    if order >= 2:
        out.append(2 * pi**3 * c * (1 + c2))
    if order >= 3:
        out.append(-2 * pi**4 * (1 + c2) * (1 + 3 * c2))
    if order >= 4:
        out.append(8 * pi**5 * c * (2 + 3 * c2) * (1 + c2))
    return out


def _cot_regular_derivs(u, order):
    """Derivatives of pi*cot(pi*u) - 1/u for |u| < 1/4, via the zeta(2k) series."""
    out = []
    for j in range(order + 1):
        acc = np.zeros_like(u, dtype=complex)
        # term: -2zeta(2k) * d^j/du^j u^(2k-1)
        for k in range(_N_SMALL, 0, -1):
            p = 2 * k - 1
            if p < j:
                continue
            coeff = 1.0
            for i in range(j):
                coeff *= p - i
            acc = acc - _TWO_ZETA_EVEN[k - 1] * coeff * u ** (p - j)
        out.append(acc)
    return out


def _pole_part(u, j):
    """d^j/du^j (1/u)."""
    sign = -1.0 if j % 2 else 1.0
    fact = float(np.prod(np.arange(1, j + 1))) if j else 1.0
    return sign * fact / u ** (j + 1)


class EllipticKernel:
    """Weierstrass functions for the lattice Z*omega1 + Z*omega2.

    Parameters
    ----------
    lattice : Lattice or complex
        The lattice, or its modulus omega (then omega1 = 1).
    pole_exclusion : float
        Relative radius (times the minimal period) inside which plain
        evaluation raises ``PoleAtInput``.
    """

    def __init__(self, lattice, pole_exclusion: float = 1e-6, tol: float = 1e-16):
        if not isinstance(lattice, Lattice):
            lattice = Lattice(complex(lattice))
        self.lattice = lattice
        w1, w2 = lattice.generators
        cc = canonicalize(w2 / w1)
        (a, b), (c, d) = cc.matrix
        # reduced basis of the same lattice, tau = Omega2/Omega1 in the SL2 fundamental domain
        self._Om1 = c * w2 + d * w1
        self._Om2 = a * w2 + b * w1
        self._abcd = (a, b, c, d)
        tau = self._Om2 / self._Om1
        self.tau = tau
        self.min_period = abs(self._Om1)
        self.pole_exclusion = pole_exclusion * self.min_period
        self.tol = tol

        q2 = np.exp(2j * np.pi * tau)
        decay = np.pi * tau.imag  # |A|, |B| <= exp(-decay) on the centred cell
        n_terms = int(np.ceil((-np.log(tol) + 4 * np.log(60.0)) / decay)) + 2
        n = np.arange(1, n_terms + 1)
        self._n = n
        self._inv_1mq = 1.0 / (1.0 - q2**n)
        lam = q2**n * self._inv_1mq  # q^2n / (1 - q^2n)

        eta1n = (np.pi**2 / 3.0) * (1.0 - 24.0 * np.sum(n * lam))
        self._eta1n = eta1n
        self._eta2n = tau * eta1n - 2j * np.pi
        e4 = 1.0 + 240.0 * np.sum(n**3 * lam)
        e6 = 1.0 - 504.0 * np.sum(n**5 * lam)
        self.g2 = complex((4.0 * np.pi**4 / 3.0) * e4 / self._Om1**4)
        self.g3 = complex((8.0 * np.pi**6 / 27.0) * e6 / self._Om1**6)

        # quasi-periods along the reduced basis (per unit z)
        H1 = eta1n / self._Om1
        H2 = self._eta2n / self._Om1
        # w1 = a*Om1 - c*Om2, w2 = d*Om2 - b*Om1
        self.eta1 = complex(a * H1 - c * H2)
        self.eta2 = complex(d * H2 - b * H1)
        self._H = (H1, H2)

    # ------------------------------------------------------------------ core
    @property
    def omega(self) -> complex:
        return self.lattice.omega2

    @property
    def quasi_periods(self) -> tuple[complex, complex]:
        return self.eta1, self.eta2

    def quasi_period(self, gamma) -> complex:
        """zeta(z + gamma) - zeta(z) for a lattice vector gamma."""
        s, t = self.lattice.coordinates(gamma)
        m, n = np.rint(s), np.rint(t)
        return m * self.eta1 + n * self.eta2

    def _series_derivs(self, u, order):
        """Derivatives 0..order of 4*pi*sum lam_n sin(2 pi n u) (normalised u)."""
        tau = self.tau
        A = np.exp(2j * np.pi * (tau + u))
        B = np.exp(2j * np.pi * (tau - u))
        out = [np.zeros_like(u, dtype=complex) for _ in range(order + 1)]
        An = np.ones_like(u, dtype=complex)
        Bn = np.ones_like(u, dtype=complex)
        for n, inv in zip(self._n, self._inv_1mq):
            An = An * A
            Bn = Bn * B
            w = 2j * np.pi * n
            fa = An * inv
            fb = Bn * inv
            pw = 1.0
            for j in range(order + 1):
                # d^j/du^j of (A^n - B^n)/(2i(1-q^2n)) * 4 pi
                out[j] = out[j] + (4 * np.pi / 2j) * (pw * fa - ((-1) ** j) * pw * fb)
                pw = pw * w
        return out

    def _reduce_normalised(self, u):
        """u = u_red + m + n*tau with u_red in the centred cell."""
        tau = self.tau
        n = np.rint(u.imag / tau.imag)
        u1 = u - n * tau
        m = np.rint(u1.real)
        return u1 - m, m, n

    def zeta_derivs(self, z, order: int = 0, regular: bool = False, check: bool = True):
        """List [zeta(z), zeta'(z), ..., zeta^(order)(z)] on the lattice.

        With ``regular=True`` the argument must be a small displacement from the
        lattice point 0 and the singular part d^j(1/z) is subtracted.
        """
        z = np.asarray(z, dtype=complex)
        Om1 = self._Om1
        u = z / Om1
        if regular:
            if np.any(np.abs(u) > 0.5):
                raise ValueError("regular evaluation needs |z| small relative to the periods")
            m = n = None
            ur = u
        else:
            ur, m, n = self._reduce_normalised(u)
            if check and np.any(np.abs(ur) * abs(Om1) < self.pole_exclusion):
                raise PoleAtInput("evaluation point coincides with a lattice point")
        ser = self._series_derivs(ur, order)
        if regular:
            small = np.abs(ur) < _SMALL_U
            ur_safe = np.where(small, 0.5, ur)
            cot_big = _cot_derivs(ur_safe, order)
            cot_small = _cot_regular_derivs(np.where(small, ur, 0.0), order)
            cot = [
                np.where(small, cs, cb - _pole_part(ur_safe, j))
                for j, (cs, cb) in enumerate(zip(cot_small, cot_big))
            ]
        else:
            cot = _cot_derivs(ur, order)
        out = []
        for j in range(order + 1):
            v = cot[j] + ser[j]
            if j == 0:
                v = v + self._eta1n * ur
                if not regular:
                    v = v + m * self._eta1n + n * self._eta2n
            elif j == 1:
                v = v + self._eta1n
            out.append(v / Om1 ** (j + 1))
        return out

    # --------------------------------------------------------------- public
    def zeta(self, z, check: bool = True):
        return _scalar(self.zeta_derivs(z, 0, check=check)[0])

    def wp(self, z, check: bool = True):
        return _scalar(-self.zeta_derivs(z, 1, check=check)[1])

    def wp_prime(self, z, check: bool = True):
        return _scalar(-self.zeta_derivs(z, 2, check=check)[2])

    def wp_all(self, z, check: bool = True):
        """(wp, wp', wp'') evaluated together."""
        d = self.zeta_derivs(z, 3, check=check)
        return _scalar(-d[1]), _scalar(-d[2]), _scalar(-d[3])

    def invariants(self) -> tuple[complex, complex]:
        return self.g2, self.g3

    @property
    def discriminant(self) -> complex:
        return self.g2**3 - 27 * self.g3**2

    def half_periods(self) -> tuple[complex, complex, complex]:
        w1, w2 = self.lattice.generators
        return w1 / 2, (w1 + w2) / 2, w2 / 2

    def half_period_values(self) -> tuple[complex, complex, complex]:
        """(e1, e2, e3) = wp at (w1/2, (w1+w2)/2, w2/2)."""
        vals = self.wp(np.array(self.half_periods()))
        return complex(vals[0]), complex(vals[1]), complex(vals[2])

    def legendre_residual(self) -> float:
        w1, w2 = self.lattice.generators
        return abs(self.eta1 * w2 - self.eta2 * w1 - 2j * np.pi)

    def laurent_coefficients(self, n: int) -> np.ndarray:
        """c_k with wp(z) = 1/z^2 + sum_{k>=1} c_k z^(2k), k = 1..n."""
        c = np.zeros(n + 1, dtype=complex)
        if n >= 1:
            c[1] = self.g2 / 20
        if n >= 2:
            c[2] = self.g3 / 28
        for k in range(3, n + 1):
            s = sum(c[m] * c[k - 1 - m] for m in range(1, k - 1))
            c[k] = 3.0 / ((2 * k + 3) * (k - 2)) * s
        return c[1:]

    def __repr__(self) -> str:
        return f"EllipticKernel(omega={self.omega!r})"


def _scalar(v):
    return complex(v) if np.ndim(v) == 0 else v


def lattice_sum_wp(omega: complex, z, n_max: int):
    """Brute-force wp by the symmetric truncated lattice sum |m|,|n| <= n_max.

    Oracle only: the tail of the symmetric box sum decays like n_max^-2.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    m = np.arange(-n_max, n_max + 1, dtype=float)
    out = 1.0 / z**2
    for n in range(-n_max, n_max + 1):
        g = m + n * omega
        if n == 0:
            g = g[g != 0]
        inv2 = 1.0 / g**2
        out = out + np.sum(1.0 / (z[:, None] - g[None, :]) ** 2 - inv2[None, :], axis=1)
    return out


def lattice_sum_eisenstein(omega: complex, k: int, n_max: int) -> complex:
    """Truncated Eisenstein sum over the box |m|,|n| <= n_max, excluding 0."""
    m = np.arange(-n_max, n_max + 1, dtype=float)
    total = 0.0 + 0j
    for n in range(-n_max, n_max + 1):
        g = m + n * omega
        if n == 0:
            g = g[g != 0]
        total += np.sum(g ** (-k))
    return complex(total)


def row_sum_wp(omega: complex, z, n_rows: int = 60):
    """wp by rows of the lattice summed in closed form (Eisenstein order).

    Each row sum_m (z - m - n*omega)^-2 equals pi^2 csc^2(pi(z - n*omega));
    the constant is G2 summed in the same order.  Independent of the q-series
    evaluator and exponentially convergent in ``n_rows``.
    """
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    g2sum = np.pi**2 / 3.0
    for n in range(-n_rows, n_rows + 1):
        out = out + np.pi**2 / np.sin(np.pi * (z - n * omega)) ** 2
        if n != 0:
            g2sum += np.pi**2 / np.sin(np.pi * n * omega) ** 2
    return out - g2sum


def invariant_suite(omega: complex, grid: int = 20, tol: float = 1e-10, oracle_tol: float = 1e-8) -> dict:
    """Differential equation, Legendre relation, special-lattice invariants and oracle agreement."""
    k = EllipticKernel(complex(omega))
    lat = k.lattice
    s = (np.arange(grid) + 0.5) / grid
    S, T = np.meshgrid(s, s, indexing="ij")
    z = lat.point(S, T).ravel()
    wp, wpp, _ = k.wp_all(z)
    rhs = 4 * wp**3 - k.g2 * wp - k.g3
    ode = float(np.max(np.abs(wpp**2 - rhs) / np.maximum(1.0, np.abs(rhs))))
    leg = float(k.legendre_residual())
    g3_square = abs(EllipticKernel(1j).g3)
    g2_hex = abs(EllipticKernel(np.exp(1j * np.pi / 3)).g2)
    ref = row_sum_wp(lat.omega2, z)
    oracle = float(np.max(np.abs(wp - ref) / np.maximum(1.0, np.abs(ref))))
    checks = {
        "ode_residual": (ode, tol),
        "legendre_residual": (leg, tol),
        "g3_square_lattice": (g3_square, tol),
        "g2_hexagonal_lattice": (g2_hex, tol),
        "oracle_agreement": (oracle, oracle_tol),
    }
    out = {name: {"value": v, "tolerance": t, "pass": bool(v <= t)} for name, (v, t) in checks.items()}
    return {"checks": out, "pass": all(c["pass"] for c in out.values())}
