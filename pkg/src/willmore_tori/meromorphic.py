"""Elliptic functions with explicit pole ledgers.

A ``MeromorphicBlock`` is a finite combination of

    ZetaDiff(p, q)        zeta(z - p) - zeta(z - q)
    WpTranslate(p)        wp(z - p)
    WpPrimeTranslate(p)   wp'(z - p)
    Constant

on a fixed lattice.  Pole locations are stored reduced to the fundamental
parallelogram; the quasi-periodicity of zeta is folded into the constant so
the represented function never changes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import EllipticKernel
from .errors import (
    ContourHitsPole,
    ConvergenceFailure,
    CriticalValue,
    DuplicatePoles,
    NonSimpleZero,
    PoleAtInput,
    ResiduesDoNotSumToZero,
)
from .lattice import Lattice, periodic_difference, reduce_point

ZETA_DIFF = "zeta_diff"
WP = "wp"
WP_PRIME = "wp_prime"
CONST = "const"
_KINDS = (ZETA_DIFF, WP, WP_PRIME, CONST)

_MERGE_TOL = 1e-10


@dataclass(frozen=True)
class Term:
    kind: str
    coef: complex
    p: complex | None = None
    q: complex | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}")


@dataclass(frozen=True)
class PoleDatum:
    """Pole at ``location``; ``principal`` holds the coefficients of (z-p)^-1, (z-p)^-2, ..."""

    location: complex
    order: int
    principal: tuple[complex, ...]

    @property
    def residue(self) -> complex:
        return self.principal[0]


def ZetaDiff(p, q, coef=1.0) -> Term:
    return Term(ZETA_DIFF, complex(coef), complex(p), complex(q))


def WpTranslate(p, coef=1.0) -> Term:
    return Term(WP, complex(coef), complex(p))


def WpPrimeTranslate(p, coef=1.0) -> Term:
    return Term(WP_PRIME, complex(coef), complex(p))


def Constant(coef) -> Term:
    return Term(CONST, complex(coef))


class MeromorphicBlock:
    """A doubly periodic meromorphic function on ``kernel.lattice``."""

    def __init__(self, kernel: EllipticKernel, terms):
        self.kernel = kernel
        lat = kernel.lattice
        canon = []
        const = 0.0 + 0j
        for t in terms:
            if t.kind == CONST:
                const += t.coef
                continue
            p = complex(reduce_point(lat, t.p))
            if t.kind == ZETA_DIFF:
                q = complex(reduce_point(lat, t.q))
                # zeta(z - p0) = zeta(z - p) + eta(p - p0) with p0 = p + gamma
                const += t.coef * (kernel.quasi_period(p - t.p) - kernel.quasi_period(q - t.q))
                canon.append(Term(ZETA_DIFF, t.coef, p, q))
            else:
                canon.append(Term(t.kind, t.coef, p))
        if const != 0:
            canon.append(Term(CONST, const))
        self.terms = tuple(canon)
        self._aggregate()

    # ------------------------------------------------------------ structure
    def _slot(self, p):
        for i, loc in enumerate(self._locs):
            if abs(periodic_difference(self.kernel.lattice, p, loc)) < _MERGE_TOL:
                return i
        self._locs.append(p)
        self._zc.append(0j)
        self._wc.append(0j)
        self._wpc.append(0j)
        return len(self._locs) - 1

    def _aggregate(self):
        self._locs, self._zc, self._wc, self._wpc = [], [], [], []
        self.constant = 0j
        for t in self.terms:
            if t.kind == CONST:
                self.constant += t.coef
            elif t.kind == ZETA_DIFF:
                self._zc[self._slot(t.p)] += t.coef
                self._zc[self._slot(t.q)] -= t.coef
            elif t.kind == WP:
                self._wc[self._slot(t.p)] += t.coef
            else:
                self._wpc[self._slot(t.p)] += t.coef
        self._locs = np.array(self._locs, dtype=complex)
        self._zc = np.array(self._zc, dtype=complex)
        self._wc = np.array(self._wc, dtype=complex)
        self._wpc = np.array(self._wpc, dtype=complex)
        scale = max(1.0, float(np.max(np.abs(np.concatenate([self._zc, self._wc, self._wpc, [0]])))))
        tiny = 1e-13 * scale
        ledger = []
        for i, loc in enumerate(self._locs):
            r, c2, c3 = self._zc[i], self._wc[i], self._wpc[i]
            if abs(c3) > tiny:
                order = 3
            elif abs(c2) > tiny:
                order = 2
            elif abs(r) > tiny:
                order = 1
            else:
                continue
            principal = (complex(r), complex(c2), complex(-2 * c3))[:order]
            ledger.append(PoleDatum(complex(loc), order, principal))
        self.pole_ledger = tuple(ledger)

    @property
    def lattice(self) -> Lattice:
        return self.kernel.lattice

    @property
    def poles(self) -> np.ndarray:
        return np.array([d.location for d in self.pole_ledger], dtype=complex)

    @property
    def degree(self) -> int:
        return int(sum(d.order for d in self.pole_ledger))

    def residue_sum(self) -> complex:
        return complex(sum(d.residue for d in self.pole_ledger))

    # ----------------------------------------------------------- evaluation
    def derivs(self, z, order: int = 0, check: bool = True):
        """[f(z), f'(z), ..., f^(order)(z)]."""
        z = np.asarray(z, dtype=complex)
        out = [np.zeros_like(z) for _ in range(order + 1)]
        out[0] = out[0] + self.constant
        need = 0
        if np.any(self._wpc != 0):
            need = order + 2
        elif np.any(self._wc != 0):
            need = order + 1
        else:
            need = order
        for loc, r, c2, c3 in zip(self._locs, self._zc, self._wc, self._wpc):
            if r == 0 and c2 == 0 and c3 == 0:
                continue
            zd = self.kernel.zeta_derivs(z - loc, need, check=check)
            for j in range(order + 1):
                v = r * zd[j]
                if c2 != 0:
                    v = v - c2 * zd[j + 1]
                if c3 != 0:
                    v = v - c3 * zd[j + 2]
                out[j] = out[j] + v
        return out

    def __call__(self, z, check: bool = True):
        return _scalar(self.derivs(z, 0, check=check)[0])

    def evaluate(self, z, check: bool = True):
        return self(z, check=check)

    def derivative(self, z, order: int = 1, check: bool = True):
        return _scalar(self.derivs(z, order, check=check)[order])

    def pole_order_at(self, p) -> int:
        for d in self.pole_ledger:
            if abs(periodic_difference(self.lattice, p, d.location)) < _MERGE_TOL:
                return d.order
        return 0

    def laurent(self, p, dz, order: int = 0):
        """Principal part at the ledger pole ``p`` and regular-part derivatives at p + dz.

        Returns ``(principal, regular)``: ``principal[k-1]`` multiplies dz^-k and
        ``regular[j]`` is the j-th derivative of f(p + dz) - principal part.
        The regular part is computed without cancellation near dz = 0.
        """
        dz = np.asarray(dz, dtype=complex)
        z = p + dz
        principal = [0j, 0j, 0j]
        reg = [np.zeros_like(dz) for _ in range(order + 1)]
        reg[0] = reg[0] + self.constant
        for loc, r, c2, c3 in zip(self._locs, self._zc, self._wc, self._wpc):
            if r == 0 and c2 == 0 and c3 == 0:
                continue
            need = order + (2 if c3 != 0 else 1 if c2 != 0 else 0)
            here = abs(periodic_difference(self.lattice, loc, p)) < _MERGE_TOL
            if here:
                zd = self.kernel.zeta_derivs(dz, need, regular=True)
                principal[0] += r
                principal[1] += c2
                principal[2] += -2 * c3
            else:
                zd = self.kernel.zeta_derivs(z - loc, need, check=False)
            for j in range(order + 1):
                v = r * zd[j]
                if c2 != 0:
                    v = v - c2 * zd[j + 1]
                if c3 != 0:
                    v = v - c3 * zd[j + 2]
                reg[j] = reg[j] + v
        return np.array(principal), reg

    # --------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        return {
            "omega": _cdump(self.kernel.omega),
            "terms": [
                {
                    "kind": t.kind,
                    "coef": _cdump(t.coef),
                    **({"p": _cdump(t.p)} if t.p is not None else {}),
                    **({"q": _cdump(t.q)} if t.q is not None else {}),
                }
                for t in self.terms
            ],
            "pole_ledger": [
                {
                    "location": _cdump(d.location),
                    "order": d.order,
                    "principal": [_cdump(c) for c in d.principal],
                }
                for d in self.pole_ledger
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, kernel: EllipticKernel | None = None) -> "MeromorphicBlock":
        if kernel is None:
            kernel = EllipticKernel(_cload(data["omega"]))
        terms = []
        for t in data["terms"]:
            p = _cload(t["p"]) if "p" in t else None
            q = _cload(t["q"]) if "q" in t else None
            terms.append(Term(t["kind"], _cload(t["coef"]), p, q))
        block = cls(kernel, terms)
        if "pole_ledger" in data:
            stored = data["pole_ledger"]
            if len(stored) != len(block.pole_ledger):
                raise ValueError("pole ledger inconsistent with terms")
            for s, d in zip(stored, block.pole_ledger):
                if (
                    s["order"] != d.order
                    or abs(periodic_difference(kernel.lattice, _cload(s["location"]), d.location)) > 1e-9
                    or max(abs(_cload(a) - b) for a, b in zip(s["principal"], d.principal)) > 1e-9
                ):
                    raise ValueError("pole ledger inconsistent with terms")
        return block

    def __repr__(self) -> str:
        return f"MeromorphicBlock(degree={self.degree}, poles={len(self.pole_ledger)}, terms={len(self.terms)})"


def _scalar(v):
    return complex(v) if np.ndim(v) == 0 else v


def _cdump(c) -> dict:
    c = complex(c)
    return {"re": float(c.real), "im": float(c.imag)}


def _cload(d) -> complex:
    return complex(d["re"], d["im"])


# ------------------------------------------------------------------ builders
def make_simple_pole_function(kernel: EllipticKernel, poles, constant=0.0) -> MeromorphicBlock:
    """sum_j r_j zeta(z - p_j) + constant for poles [(p_j, r_j)] with sum r_j = 0."""
    poles = [(complex(p), complex(r)) for p, r in poles]
    if len(poles) < 2:
        raise ValueError("need at least two poles")
    scale = max(abs(r) for _, r in poles)
    if abs(sum(r for _, r in poles)) > 1e-12 * max(scale, 1.0):
        raise ResiduesDoNotSumToZero("residues must sum to zero for an elliptic function")
    lat = kernel.lattice
    for i in range(len(poles)):
        for j in range(i):
            if abs(periodic_difference(lat, poles[i][0], poles[j][0])) < 1e-9 * lat.min_period:
                raise DuplicatePoles("pole locations must be distinct mod the lattice")
    p0 = poles[0][0]
    terms = [ZetaDiff(p, p0, r) for p, r in poles[1:]]
    if constant:
        terms.append(Constant(constant))
    return MeromorphicBlock(kernel, terms)


def _seed_grid(lat: Lattice, n: int):
    s = (np.arange(n) + 0.5) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    return lat.point(S.ravel(), T.ravel())


def _dedupe(lat: Lattice, pts, radius):
    out = []
    for z in pts:
        if not np.isfinite(z):
            continue
        if all(abs(periodic_difference(lat, z, w)) > radius for w in out):
            out.append(complex(reduce_point(lat, z)))
    return out


def _newton(fn, z, iters=60, tol=1e-13, mult=None):
    """Vectorised Newton for fn(z) -> (g, g').  Diverging seeds become nan."""
    z = np.array(z, dtype=complex)
    m = 1.0 if mult is None else mult
    for _ in range(iters):
        with np.errstate(all="ignore"):
            g, dg = fn(z)
            step = m * g / dg
            step = np.where(np.isfinite(step), step, np.nan)
            # damp huge jumps
            big = np.abs(step) > 0.25
            step = np.where(big, 0.25 * step / np.abs(step), step)
        z = z - step
        if np.all(~np.isfinite(z) | (np.abs(step) < tol)):
            break
    return z


def solve_value(block: MeromorphicBlock, value: complex = 0.0, expected: int | None = None,
                seeds: int = 12, dedupe_radius: float = 1e-7):
    """All solutions of block(z) = value in the fundamental parallelogram (simple roots)."""
    lat = block.lattice
    if expected is None:
        expected = block.degree

    def fn(z):
        d = block.derivs(z, 1, check=False)
        return d[0] - value, d[1]

    n = seeds
    while n <= 64:
        z = _newton(fn, _seed_grid(lat, n))
        with np.errstate(all="ignore"):
            g = np.abs(fn(z)[0])
            ok = np.isfinite(z) & (g < 1e-8 * (1 + abs(value)))
        found = _dedupe(lat, z[ok], dedupe_radius * lat.min_period * 1e3)
        if len(found) >= expected:
            found = [complex(_newton(fn, np.array([w]), iters=8)[0]) for w in found]
            return sorted((complex(reduce_point(lat, w)) for w in found), key=_lex)
        n *= 2
    raise ConvergenceFailure(f"found {len(found)} of {expected} solutions")


def _lex(z):
    return (round(z.real, 9), round(z.imag, 9))


def contour_integral(fn, center: complex, radius: float, n: int = 256) -> complex:
    """(1/2 pi i) * integral of fn over the circle |z - center| = radius (trapezoid)."""
    th = 2 * np.pi * np.arange(n) / n
    e = np.exp(1j * th)
    vals = fn(center + radius * e)
    return complex(np.mean(vals * radius * e))


def residue(block: MeromorphicBlock, p: complex, radius: float | None = None, n: int = 256) -> complex:
    """Residue at p by contour integration on a small circle."""
    lat = block.lattice
    others = [d.location for d in block.pole_ledger
              if abs(periodic_difference(lat, d.location, p)) > _MERGE_TOL]
    dmin = min([abs(periodic_difference(lat, q, p)) for q in others] + [lat.min_period])
    if radius is None:
        radius = min(0.05 * lat.min_period, 0.4 * dmin)
    if dmin <= radius:
        raise ContourHitsPole("another pole lies inside the contour")
    return contour_integral(lambda z: block(z, check=False), p, radius, n)


def branch_points(block: MeromorphicBlock, seeds: int = 16):
    """Zeros of block' in the fundamental parallelogram with multiplicities.

    Returns a list of (location, multiplicity) sorted lexicographically.  The
    total multiplicity equals sum over poles of (order + 1).
    """
    lat = block.lattice
    if block.degree == 0:
        raise ValueError("block is constant")
    expected = sum(d.order + 1 for d in block.pole_ledger)

    def fn(z):
        d = block.derivs(z, 2, check=False)
        return d[1], d[2]

    n = seeds
    result = []
    while n <= 64:
        z = _newton(fn, _seed_grid(lat, n), iters=80)
        with np.errstate(all="ignore"):
            d = block.derivs(z, 2, check=False)
            scale = 1 + np.abs(d[2])
            ok = np.isfinite(z) & (np.abs(d[1]) < 1e-6 * scale)
        cand = _dedupe(lat, z[ok], 1e-4 * lat.min_period)
        # drop candidates sitting on poles
        cand = [w for w in cand
                if all(abs(periodic_difference(lat, w, q.location)) > 1e-3 * lat.min_period
                       for q in block.pole_ledger)]
        result = []
        for w in cand:
            m = _multiplicity(block, w)
            if m > 1:
                w = complex(_newton(fn, np.array([w]), iters=200, mult=float(m))[0])
            else:
                w = complex(_newton(fn, np.array([w]), iters=10)[0])
            result.append((complex(reduce_point(lat, w)), m))
        total = sum(m for _, m in result)
        if total == expected:
            return sorted(result, key=lambda t: _lex(t[0]))
        n *= 2
    raise ConvergenceFailure(f"branch point search found multiplicity {total}, expected {expected}")


def _multiplicity(block: MeromorphicBlock, w: complex) -> int:
    lat = block.lattice
    dpole = min([abs(periodic_difference(lat, w, q.location)) for q in block.pole_ledger]
                + [lat.min_period])
    r = min(0.02 * lat.min_period, 0.3 * dpole)

    def logderiv(z):
        d = block.derivs(z, 2, check=False)
        return d[2] / d[1]

    val = contour_integral(logderiv, w, r, 128)
    return max(1, int(round(val.real)))


def choose_contour_shift(lat: Lattice, points, n_candidates: int = 32) -> complex:
    """Shift xi maximising the distance from the boundary of xi + I to ``points``."""
    pts = np.asarray(points, dtype=complex)
    w1, w2 = lat.generators
    h1 = lat.area / abs(w1)  # distance between the edges parallel to w1
    h2 = lat.area / abs(w2)
    k = np.arange(n_candidates)
    # deterministic low-discrepancy candidates (golden-ratio lattice)
    cs = (k + 0.5) / n_candidates
    ct = np.mod(0.5 + k * 0.6180339887498949, 1.0)
    best, best_d = None, -1.0
    for s0, t0 in zip(cs, ct):
        xi = lat.point(s0, t0)
        if pts.size == 0:
            return complex(xi)
        s, t = lat.coordinates(pts - xi)
        s, t = s - np.floor(s), t - np.floor(t)
        d = np.minimum(np.minimum(s, 1 - s) * h2, np.minimum(t, 1 - t) * h1)
        dm = float(np.min(d))
        if dm > best_d:
            best, best_d = complex(xi), dm
    return best


def boundary_integral(fn, lat: Lattice, xi: complex, panels: int = 64, nodes: int = 16) -> complex:
    """(1/2 pi i) * integral of fn over the positively oriented boundary of xi + I."""
    w1, w2 = lat.generators
    x, wts = np.polynomial.legendre.leggauss(nodes)
    total = 0j
    corners = [xi, xi + w1, xi + w1 + w2, xi + w2, xi]
    for a, b in zip(corners[:-1], corners[1:]):
        edges = np.linspace(0, 1, panels + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        t = (lo + hi) / 2 + (hi - lo) / 2 * x[None, :]
        w = (hi - lo) / 2 * wts[None, :]
        z = a + (b - a) * t
        total += np.sum(fn(z) * w) * (b - a)
    return complex(total / (2j * np.pi))


def argument_principle_count(block: MeromorphicBlock, value: complex = 0.0) -> complex:
    """Zeros minus poles of block - value over a period parallelogram (should be 0)."""
    lat = block.lattice
    pts = list(block.poles) + solve_value(block, value)
    xi = choose_contour_shift(lat, pts)

    def logderiv(z):
        d = block.derivs(z, 1, check=False)
        return d[1] / (d[0] - value)

    return boundary_integral(logderiv, lat, xi)


def make_inverse_wp(kernel: EllipticKernel, alpha: complex, tol: float = 1e-8) -> MeromorphicBlock:
    """Block equal to 1 / (wp - alpha), written as r*(zeta(z - z+) - zeta(z + z+)) + C."""
    alpha = complex(alpha)
    e = kernel.half_period_values()
    scale = max(1.0, max(abs(v) for v in e))
    for v in e:
        if abs(alpha - v) < tol * scale:
            raise CriticalValue(f"alpha={alpha} is a branch value of wp")
    wp_block = MeromorphicBlock(kernel, [WpTranslate(0.0)])
    roots = solve_value(wp_block, alpha, expected=2)
    zp = roots[0]
    wpp = kernel.wp_prime(zp)
    if abs(wpp) < tol * scale:
        raise CriticalValue("alpha has a degenerate preimage")
    r = 1.0 / wpp
    block = MeromorphicBlock(kernel, [ZetaDiff(zp, -zp, r)])
    c = -complex(block(0.0))
    block = MeromorphicBlock(kernel, list(block.terms) + [Constant(c)])
    _check_against(block, lambda z: 1.0 / (kernel.wp(z) - alpha), kernel.lattice)
    return block


def _check_against(block, fn, lat, n=16, rtol=1e-8):
    rng = np.random.default_rng(12345)
    z = lat.point(rng.uniform(0, 1, n), rng.uniform(0, 1, n))
    a = block(z, check=False)
    b = fn(z)
    err = np.abs(a - b) / (1 + np.abs(b))
    if not np.all(err < rtol):
        raise ConvergenceFailure(f"block reconstruction mismatch {float(np.max(err)):.3e}")


def translate_argument(block: MeromorphicBlock, v: complex) -> MeromorphicBlock:
    """z -> block(z - v)."""
    v = complex(v)
    terms = []
    for t in block.terms:
        if t.kind == CONST:
            terms.append(t)
        elif t.kind == ZETA_DIFF:
            terms.append(Term(t.kind, t.coef, t.p + v, t.q + v))
        else:
            terms.append(Term(t.kind, t.coef, t.p + v))
    return MeromorphicBlock(block.kernel, terms)


def invert_after_shift(block: MeromorphicBlock, c: complex, simple_tol: float = 1e-6) -> MeromorphicBlock:
    """1 / (block - c) with recomputed simple poles at the zeros of block - c."""
    lat = block.lattice
    zeros = solve_value(block, c)
    res = []
    for z0 in zeros:
        d1 = block.derivative(z0, 1, check=False)
        if abs(d1) < simple_tol:
            raise NonSimpleZero(f"block - c has a multiple zero at {z0}")
        res.append(1.0 / d1)
    if abs(sum(res)) > 1e-8 * max(1.0, max(abs(r) for r in res)):
        raise ConvergenceFailure("residues of the inverted block do not sum to zero")
    # distribute round-off so the ledger is exactly elliptic
    res[0] = -sum(res[1:])
    out = make_simple_pole_function(block.kernel, list(zip(zeros, res)))
    # constant from a generic point
    rng = np.random.default_rng(777)
    for _ in range(20):
        zs = complex(lat.point(rng.uniform(), rng.uniform()))
        dist = min(abs(periodic_difference(lat, zs, w)) for w in list(zeros) + list(block.poles))
        if dist > 0.1 * lat.min_period:
            break
    cval = 1.0 / (block(zs) - c) - out(zs)
    out = MeromorphicBlock(block.kernel, list(out.terms) + [Constant(cval)])
    _check_against(out, lambda z: 1.0 / (block(z, check=False) - c), lat, rtol=1e-7)
    return out


def transform(block: MeromorphicBlock, kind: str, value: complex) -> MeromorphicBlock:
    if kind == "translate_argument":
        return translate_argument(block, value)
    if kind == "invert_after_shift":
        return invert_after_shift(block, value)
    raise ValueError(f"unknown transform {kind!r}")


def is_elliptic(block: MeromorphicBlock, n: int = 50, rtol: float = 1e-9, seed: int = 0) -> bool:
    lat = block.lattice
    rng = np.random.default_rng(seed)
    z = lat.point(rng.uniform(0, 1, n), rng.uniform(0, 1, n))
    try:
        f = block(z)
        ok = True
        for w in lat.generators:
            ok &= bool(np.all(np.abs(block(z + w) - f) <= rtol * (1 + np.abs(f))))
    except PoleAtInput:
        return False
    return ok
