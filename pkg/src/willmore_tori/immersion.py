"""Maps of a torus into R^4 = C^2 built from pairs of elliptic functions.

The uninverted map is a holomorphic pair G = (f + c1, h + c2), a branched
minimal surface in C^2 with one planar end per pole.  The inverted map
F = G / |G|^2 closes those ends up: every pole is sent to the origin, which
becomes a single point of density k.  Near each pole F is evaluated in a
chart built from Laurent data, F = conj(u)^m H / |H|^2 with H = u^m G(p + u)
holomorphic and nonvanishing, so values and derivatives stay accurate right
through the pole.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticKernel
from .errors import (
    ConvergenceFailure,
    PoleAtInput,
    RetryExhausted,
    UnexpectedPreimage,
)
from .lattice import ConformalClass, Lattice, periodic_difference, reduce_point
from .meromorphic import (
    Constant,
    MeromorphicBlock,
    WpTranslate,
    branch_points,
    invert_after_shift,
    make_simple_pole_function,
    solve_value,
    translate_argument,
)

_DEDUPE = 1e-6
_NEWTON_TOL = 1e-12


@dataclass(frozen=True)
class PoleChart:
    """Laurent chart around a pole of the pair; ``order`` is the larger of the two pole orders."""

    location: complex
    order: int
    radius: float


@dataclass(frozen=True)
class PairImmersion:
    component_1: MeromorphicBlock
    component_2: MeromorphicBlock
    inverted: bool = True
    translation_offset: tuple[complex, complex] = (0j, 0j)
    pole_charts: tuple[PoleChart, ...] = ()
    branch_hint: tuple[complex, ...] = field(default=(), compare=False)

    @property
    def kernel(self) -> EllipticKernel:
        return self.component_1.kernel

    @property
    def lattice(self) -> Lattice:
        return self.component_1.lattice

    @property
    def poles(self) -> np.ndarray:
        return np.array([c.location for c in self.pole_charts], dtype=complex)

    @property
    def offset_vector(self) -> np.ndarray:
        """The offset as a point of R^4."""
        c1, c2 = self.translation_offset
        return np.array([c1.real, c1.imag, c2.real, c2.imag])

    def with_inverted(self, inverted: bool) -> "PairImmersion":
        return PairImmersion(self.component_1, self.component_2, inverted,
                             self.translation_offset, self.pole_charts, self.branch_hint)

    def to_dict(self) -> dict:
        return {
            "component_1": self.component_1.to_dict(),
            "component_2": self.component_2.to_dict(),
            "inverted": bool(self.inverted),
            "translation_offset": [_cd(c) for c in self.translation_offset],
            "pole_charts": [
                {"location": _cd(c.location), "order": c.order, "radius": float(c.radius)}
                for c in self.pole_charts
            ],
            "branch_hint": [_cd(b) for b in self.branch_hint],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairImmersion":
        f = MeromorphicBlock.from_dict(d["component_1"])
        h = MeromorphicBlock.from_dict(d["component_2"], kernel=f.kernel)
        charts = tuple(PoleChart(_cl(c["location"]), int(c["order"]), float(c["radius"]))
                       for c in d["pole_charts"])
        return cls(f, h, bool(d["inverted"]), tuple(_cl(c) for c in d["translation_offset"]),
                   charts, tuple(_cl(b) for b in d.get("branch_hint", [])))


@dataclass(frozen=True)
class DoubleCover:
    """z -> (scale * wp(z) + shift, 0), inverted after adding (0, offset)."""

    kernel: EllipticKernel
    scale: complex = 1.0
    shift: complex = 0.0
    offset: complex = 1.0

    def as_pair(self, inverted: bool = True) -> PairImmersion:
        f = MeromorphicBlock(self.kernel, [WpTranslate(0.0, self.scale), Constant(self.shift)])
        h = MeromorphicBlock(self.kernel, [])
        charts = _make_charts(f, h, extra=self.kernel.half_periods()[1:])
        return PairImmersion(f, h, inverted, (0j, complex(self.offset)), charts,
                             tuple(self.kernel.half_periods()))

    def evaluate(self, z):
        """Uninverted value as a point of R^4."""
        w = self.scale * self.kernel.wp(z) + self.shift
        return np.stack([np.real(w), np.imag(w), np.zeros_like(np.real(w)),
                         np.zeros_like(np.real(w))], axis=-1)


def _cd(c):
    c = complex(c)
    return {"re": float(c.real), "im": float(c.imag)}


def _cl(d):
    return complex(d["re"], d["im"])


def as_pair(imm) -> PairImmersion:
    return imm.as_pair() if isinstance(imm, DoubleCover) else imm


# --------------------------------------------------------------------- charts
def _make_charts(f: MeromorphicBlock, h: MeromorphicBlock, extra=()) -> tuple[PoleChart, ...]:
    lat = f.lattice
    orders: dict[complex, int] = {}
    locs = []
    for blk in (f, h):
        for d in blk.pole_ledger:
            for i, q in enumerate(locs):
                if abs(periodic_difference(lat, q, d.location)) < 1e-9:
                    orders[i] = max(orders[i], d.order)
                    break
            else:
                locs.append(d.location)
                orders[len(locs) - 1] = d.order
    charts = []
    others_all = list(locs) + list(extra)
    for i, p in enumerate(locs):
        dists = [abs(periodic_difference(lat, p, q)) for q in others_all]
        dists = [d for d in dists if d > 1e-9]
        r = min([0.1 * d for d in dists] + [0.1 * lat.min_period])
        charts.append(PoleChart(complex(p), int(orders[i]), float(r)))
    return tuple(sorted(charts, key=lambda c: (round(c.location.real, 9), round(c.location.imag, 9))))


# ----------------------------------------------------------------- jets
@dataclass
class Jet:
    """Pointwise differential data of the map as complex C^2 vectors (last axis of size 2).

    ``F`` value, ``dF`` = d/dz F, ``dbF`` = d/dzbar F, ``ddbF`` = d/dz d/dzbar F;
    ``lam2`` conformal factor; ``ddlog`` = d/dz d/dzbar log(lam2);
    ``conf`` = complex bilinear conformality defect sum_k (d_z X_k)^2 over real components.
    """

    F: np.ndarray
    dF: np.ndarray
    dbF: np.ndarray
    ddbF: np.ndarray
    lam2: np.ndarray
    ddlog: np.ndarray
    conf: np.ndarray

    @property
    def laplacian(self):
        return 4.0 * self.ddbF

    @property
    def willmore_density(self):
        """(1/4)|Delta F|^2 / lam^2 per unit dx dy."""
        lap2 = np.sum(np.abs(self.laplacian) ** 2, axis=-1)
        return 0.25 * lap2 / self.lam2

    @property
    def gauss_density(self):
        """K dmu per unit dx dy."""
        return -2.0 * self.ddlog


def _wedge2(a, b):
    d = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return np.abs(d) ** 2


def _inversion_jet(G, G1, G2):
    """Derivatives of Q = G/|G|^2 for holomorphic G with derivatives G1, G2."""
    S = np.sum(np.abs(G) ** 2, axis=-1)[..., None]
    B = np.sum(G * np.conj(G1), axis=-1)[..., None]
    P = np.sum(np.abs(G1) ** 2, axis=-1)[..., None]
    Q = G / S
    dQ = G1 / S - G * np.conj(B) / S**2
    dbQ = -G * B / S**2
    ddbQ = -G1 * B / S**2 - G * P / S**2 + 2 * G * np.abs(B) ** 2 / S**3
    return Q, dQ, dbQ, ddbQ


def _finish(F, dF, dbF, ddbF, ddlog):
    lam2 = np.sum(np.abs(dF) ** 2 + np.abs(dbF) ** 2, axis=-1)
    conf = np.sum(dF * np.conj(dbF), axis=-1)
    return Jet(F, dF, dbF, ddbF, lam2, ddlog, conf)


def _far_jet(imm: PairImmersion, z, check=True):
    f = imm.component_1.derivs(z, 2, check=check)
    h = imm.component_2.derivs(z, 2, check=check)
    c1, c2 = imm.translation_offset
    G = np.stack([f[0] + c1, h[0] + c2], axis=-1)
    G1 = np.stack([f[1], h[1]], axis=-1)
    G2 = np.stack([f[2], h[2]], axis=-1)
    P = np.sum(np.abs(G1) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        curv = np.where(P > 0, _wedge2(G1, G2) / P**2, 0.0)
    if not imm.inverted:
        zero = np.zeros_like(G)
        return _finish(G, G1, zero, zero, curv)
    S = np.sum(np.abs(G) ** 2, axis=-1)
    F, dF, dbF, ddbF = _inversion_jet(G, G1, G2)
    return _finish(F, dF, dbF, ddbF, curv - 2 * _wedge2(G, G1) / S**2)


def _chart_holo(imm: PairImmersion, chart: PoleChart, u):
    """H = u^m G(p + u) and its first two derivatives."""
    m = chart.order
    comps = []
    for blk, c in zip((imm.component_1, imm.component_2), imm.translation_offset):
        a, reg = blk.laurent(chart.location, u, order=2)
        R0, R1, R2 = reg[0] + c, reg[1], reg[2]
        # polynomial part sum_k a_k u^(m-k)
        P0 = np.zeros_like(u)
        P1 = np.zeros_like(u)
        P2 = np.zeros_like(u)
        for k in range(1, m + 1):
            e = m - k
            ak = a[k - 1]
            if ak == 0:
                continue
            P0 = P0 + ak * u**e
            if e >= 1:
                P1 = P1 + ak * e * u ** (e - 1)
            if e >= 2:
                P2 = P2 + ak * e * (e - 1) * u ** (e - 2)
        um = u**m
        um1 = m * u ** (m - 1)
        um2 = m * (m - 1) * u ** (m - 2) if m >= 2 else np.zeros_like(u)
        H0 = P0 + um * R0
        H1 = P1 + um1 * R0 + um * R1
        H2 = P2 + um2 * R0 + 2 * um1 * R1 + um * R2
        comps.append((H0, H1, H2))
    H = np.stack([comps[0][0], comps[1][0]], axis=-1)
    H1 = np.stack([comps[0][1], comps[1][1]], axis=-1)
    H2 = np.stack([comps[0][2], comps[1][2]], axis=-1)
    return H, H1, H2


def _chart_jet(imm: PairImmersion, chart: PoleChart, u):
    m = chart.order
    H, H1, H2 = _chart_holo(imm, chart, u)
    Q, dQ, dbQ, ddbQ = _inversion_jet(H, H1, H2)
    ub = np.conj(u)[..., None]
    ubm = ub**m
    ubm1 = m * ub ** (m - 1)
    F = ubm * Q
    dF = ubm * dQ
    dbF = ubm1 * Q + ubm * dbQ
    ddbF = ubm1 * dQ + ubm * ddbQ
    V = u[..., None] * H1 - m * H
    V1 = u[..., None] * H2 + (1 - m) * H1
    nV = np.sum(np.abs(V) ** 2, axis=-1)
    nH = np.sum(np.abs(H) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(nV > 0, _wedge2(V, V1) / nV**2, 0.0)
    ddlog = t1 - 2 * _wedge2(H, H1) / nH**2
    return _finish(F, dF, dbF, ddbF, ddlog)


def jet(imm, z, use_charts: bool = True) -> Jet:
    """Differential data of the (possibly inverted) map at the points z."""
    imm = as_pair(imm)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    shape = z.shape
    z = z.ravel()
    lat = imm.lattice
    assign = np.full(z.shape, -1)
    offsets = np.zeros_like(z)
    if imm.inverted and use_charts:
        for i, c in enumerate(imm.pole_charts):
            d = periodic_difference(lat, z, c.location)
            inside = (np.abs(d) < c.radius) & (assign < 0)
            assign[inside] = i
            offsets[inside] = d[inside]
    parts = {}
    far = assign < 0
    if np.any(far):
        parts[-1] = (far, _far_jet(imm, z[far], check=True))
    for i, c in enumerate(imm.pole_charts):
        sel = assign == i
        if np.any(sel):
            parts[i] = (sel, _chart_jet(imm, c, offsets[sel]))
    out = {}
    for name in ("F", "dF", "dbF", "ddbF", "lam2", "ddlog", "conf"):
        sample = next(iter(parts.values()))[1]
        arr = getattr(sample, name)
        full = np.zeros(z.shape + arr.shape[1:], dtype=arr.dtype)
        for sel, j in parts.values():
            full[sel] = getattr(j, name)
        out[name] = full.reshape(shape + arr.shape[1:])
    return Jet(**out)


def to_real(v):
    """C^2 vectors -> R^4 vectors."""
    v = np.asarray(v)
    return np.stack([v[..., 0].real, v[..., 0].imag, v[..., 1].real, v[..., 1].imag], axis=-1)


def evaluate_r4(imm, z):
    """The map at z as a point of R^4 (array of shape z.shape + (4,))."""
    imm = as_pair(imm)
    scalar = np.ndim(z) == 0
    if not imm.inverted:
        z = np.asarray(z, dtype=complex)
        f = imm.component_1(z)
        h = imm.component_2(z)
        c1, c2 = imm.translation_offset
        out = to_real(np.stack([np.asarray(f) + c1, np.asarray(h) + c2], axis=-1))
    else:
        out = to_real(jet(imm, z).F)
    return out[0] if scalar and out.ndim > 1 else out


def wirtinger_jacobian(imm, z):
    """(d/dz, d/dzbar) of the four real components, each of shape z.shape + (4,).

    For a real component X = Re(F_c) or Im(F_c): d/dz Re F_c = (dF_c + conj(dbF_c))/2 and
    d/dz Im F_c = (dF_c - conj(dbF_c))/(2i).  d/dzbar of a real function is the conjugate.
    """
    j = jet(imm, z)
    a, b = j.dF, np.conj(j.dbF)
    re = (a + b) / 2
    im = (a - b) / 2j
    dz = np.stack([re[..., 0], im[..., 0], re[..., 1], im[..., 1]], axis=-1)
    if np.ndim(z) == 0:
        dz = dz[0]
    return dz, np.conj(dz)


def real_jacobian(imm, z):
    """The real 4x2 differential (columns d/dx, d/dy)."""
    dz, _ = wirtinger_jacobian(imm, z)
    X_x = 2 * dz.real
    X_y = -2 * dz.imag
    return np.stack([X_x, X_y], axis=-1)


def singular_values(J):
    """Singular values (largest, smallest) of stacked 4x2 real matrices."""
    g11 = np.sum(J[..., 0] ** 2, axis=-1)
    g22 = np.sum(J[..., 1] ** 2, axis=-1)
    g12 = np.sum(J[..., 0] * J[..., 1], axis=-1)
    tr = g11 + g22
    disc = np.sqrt(np.maximum((g11 - g22) ** 2 + 4 * g12**2, 0.0))
    return np.sqrt((tr + disc) / 2), np.sqrt(np.maximum((tr - disc) / 2, 0.0))


# --------------------------------------------------------------- builders
def _random_point(lat, rng):
    return complex(lat.point(rng.uniform(), rng.uniform()))


def _min_dist(lat, a, b):
    if len(a) == 0 or len(b) == 0:
        return np.inf
    return min(abs(periodic_difference(lat, x, y)) for x in a for y in b)


def _spread_points(lat, n, rng, sep):
    pts = []
    for _ in range(10000):
        z = _random_point(lat, rng)
        if all(abs(periodic_difference(lat, z, q)) > sep for q in pts):
            pts.append(z)
            if len(pts) == n:
                return pts
    raise RetryExhausted("could not place separated poles")


def choose_offset(f: MeromorphicBlock, h: MeromorphicBlock, rng, candidates: int = 16):
    """Offset (c1, c2) from the unit ball of C^2 keeping (f + c1, h + c2) away from 0.

    The margin of a candidate is min |h(z) + c2| over the solutions of f(z) = -c1,
    which is the distance of the curve to the origin along the fibre over c1.
    """
    best, best_m = None, -1.0
    for _ in range(candidates):
        v = rng.normal(size=4)
        v *= rng.uniform() ** 0.25 / np.linalg.norm(v)
        c1, c2 = complex(v[0], v[1]), complex(v[2], v[3])
        if f.degree == 0:
            m = abs(complex(f.constant) + c1)
        else:
            zs = solve_value(f, -c1)
            m = min(abs(h(z, check=False) + c2) if h.pole_order_at(z) == 0 else np.inf for z in zs)
        if m > best_m:
            best, best_m = (c1, c2), m
    return best, best_m


def build_willmore_torus(omega, k: int, seed: int = 0, max_retries: int = 100) -> PairImmersion:
    """Inverted minimal torus with k planar ends glued into one density-k point."""
    if k < 3:
        raise ValueError("k must be at least 3")
    om = omega.omega if isinstance(omega, ConformalClass) else complex(omega)
    kernel = EllipticKernel(Lattice(om))
    lat = kernel.lattice
    rng = np.random.default_rng(seed)
    mp = lat.min_period
    sep = 0.08 * mp
    branch_sep = 0.02 * mp

    for attempt in range(max_retries):
        if k >= 4:
            m = k - 2
            locs = _spread_points(lat, m, rng, 2 * sep)
            res = rng.normal(size=m) + 1j * rng.normal(size=m)
            res -= res.mean()
            res /= np.max(np.abs(res))
            f = make_simple_pole_function(kernel, list(zip(locs, res)))
            q = _spread_points(lat, 2, rng, 2 * sep)
            h0 = make_simple_pole_function(kernel, [(q[0], 1.0), (q[1], -1.0)])
        else:
            p = _spread_points(lat, 2, rng, 2 * sep)
            f = make_simple_pole_function(kernel, [(p[0], 1.0), (p[1], -1.0)])
            q = _spread_points(lat, 2, rng, 2 * sep)
            g0 = make_simple_pole_function(kernel, [(q[0], 1.0), (q[1], -1.0)])
            v = _random_point(lat, rng)
            g = translate_argument(g0, v)
            if min(abs(periodic_difference(lat, p[0], w)) for w in g.poles) < sep:
                continue
            if abs(g.derivative(p[0])) < 1e-3:
                continue
            try:
                h0 = invert_after_shift(g, g(p[0]))
            except Exception:
                continue
        try:
            bf = [b for b, _ in branch_points(f)]
            bh0 = [b for b, _ in branch_points(h0)]
        except ConvergenceFailure:
            continue
        v = _random_point(lat, rng) if k >= 4 else 0j
        h = translate_argument(h0, v) if k >= 4 else h0
        bh = [complex(reduce_point(lat, b + v)) for b in bh0]
        fp, hp = list(f.poles), list(h.poles)
        shared = [x for x in hp if _min_dist(lat, [x], fp) < 1e-9]
        own_h = [x for x in hp if _min_dist(lat, [x], fp) >= 1e-9]
        ok = _min_dist(lat, bf, bh) > branch_sep
        ok &= _min_dist(lat, fp, own_h) > sep
        ok &= _min_dist(lat, bh, fp) > branch_sep  # h unbranched at the poles of f
        ok &= _min_dist(lat, bf, own_h) > branch_sep
        ok &= len(fp) + len(own_h) == k
        ok &= len(shared) == (1 if k == 3 else 0)
        if not ok:
            continue
        (c1, c2), margin = choose_offset(f, h, rng)
        if margin < 1e-2:
            continue
        charts = _make_charts(f, h, extra=bf + bh)
        return PairImmersion(f, h, True, (c1, c2), charts, tuple(bf + bh))
    raise RetryExhausted(f"no admissible configuration after {max_retries} attempts")


def build_double_cover(omega) -> DoubleCover:
    """The degree-two map by wp, normalised so its branch values have unit size."""
    om = omega.omega if isinstance(omega, ConformalClass) else complex(omega)
    kernel = EllipticKernel(Lattice(om))
    e = kernel.half_period_values()
    scale = 1.0 / max(1.0, max(abs(x) for x in e))
    return DoubleCover(kernel, complex(scale), 0j, 1.0 + 0j)


# ------------------------------------------------------------ diagnostics
def chart_overlap_error(imm, n: int = 32) -> float:
    """Largest mismatch of value and Wirtinger derivatives between chart and far formulas."""
    imm = as_pair(imm)
    worst = 0.0
    th = 2 * np.pi * (np.arange(n) + 0.5) / n
    for c in imm.pole_charts:
        for frac in (0.5, 0.99):
            u = frac * c.radius * np.exp(1j * th)
            a = _chart_jet(imm, c, u)
            b = _far_jet(imm, c.location + u)
            for name in ("F", "dF", "dbF"):
                x, y = getattr(a, name), getattr(b, name)
                scale = np.max(np.abs(y)) + 1e-300
                worst = max(worst, float(np.max(np.abs(x - y)) / max(scale, 1.0)))
    return worst


def conformality_grid(imm, n: int = 256):
    """Max relative conformality defect and min/max singular value over an n x n grid."""
    imm = as_pair(imm)
    lat = imm.lattice
    s = (np.arange(n) + 0.5) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    z = lat.point(S, T).ravel()
    j = jet(imm, z)
    rel = np.abs(j.conf) / (0.5 * j.lam2)
    J = real_jacobian(imm, z)
    smax, smin = singular_values(J)
    return {
        "max_conformality_residual": float(np.max(rel)),
        "min_singular_value": float(np.min(smin)),
        "max_singular_value": float(np.max(smax)),
    }


def pole_regularity(imm):
    """Per pole: value, |d/dz|, |d/dzbar| and the determinant of the real differential."""
    imm = as_pair(imm)
    out = []
    for c in imm.pole_charts:
        j = _chart_jet(imm, c, np.array([0j]))
        dz = float(np.sqrt(np.sum(np.abs(j.dF[0]) ** 2)))
        dbz = float(np.sqrt(np.sum(np.abs(j.dbF[0]) ** 2)))
        out.append({
            "location": c.location,
            "value": to_real(j.F)[0],
            "abs_dz": dz,
            "abs_dzbar": dbz,
            "det": dz**2 - dbz**2,
        })
    return out


def _gauss_newton_zero(imm, z0, iters=50):
    z = complex(z0)
    for _ in range(iters):
        F = to_real(jet(imm, np.array([z])).F)[0]
        J = real_jacobian(imm, np.array([z]))[0]
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        z = z + complex(step[0], step[1])
        if np.hypot(*step) < _NEWTON_TOL:
            break
    F = to_real(jet(imm, np.array([z])).F)[0]
    return z, float(np.linalg.norm(F))


def density_report(imm, grid: int = 96, delta: float | None = None):
    """Verify that the origin is hit exactly at the poles; returns (point, density, details)."""
    imm = as_pair(imm)
    if not imm.inverted:
        raise ValueError("density report needs the inverted map")
    lat = imm.lattice
    s = (np.arange(grid) + 0.5) / grid
    S, T = np.meshgrid(s, s, indexing="ij")
    z = lat.point(S, T)
    r = np.linalg.norm(to_real(jet(imm, z.ravel()).F), axis=-1).reshape(z.shape)
    if delta is None:
        delta = 0.5 * float(np.median(r))
    # local minima below delta (periodic neighbours)
    nb = [np.roll(np.roll(r, a, 0), b, 1) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)]
    mins = (r <= np.min(nb, axis=0)) & (r < delta)
    found = []
    for z0 in z[mins]:
        zz, res = _gauss_newton_zero(imm, z0)
        if res < 1e-9 and all(abs(periodic_difference(lat, zz, w)) > _DEDUPE for w in found):
            found.append(complex(reduce_point(lat, zz)))
    poles = list(imm.poles)
    extra = [w for w in found if _min_dist(lat, [w], poles) > 1e-6]
    if extra:
        raise UnexpectedPreimage(f"origin has {len(extra)} preimages away from the poles")
    reg = pole_regularity(imm)
    for item in reg:
        if not np.all(item["value"] == 0.0):
            raise UnexpectedPreimage("pole not mapped exactly to the origin")
    full_rank = all(abs(item["det"]) > 0 for item in reg)
    return np.zeros(4), len(poles), {"zeros_found": len(found), "full_rank": full_rank,
                                      "poles": poles, "regularity": reg}


def preimage_count(cover: DoubleCover, value: complex, starts: int = 1000, seed: int = 0) -> int:
    """Number of distinct solutions of scale*wp + shift = value from random Newton starts."""
    kernel = cover.kernel
    lat = kernel.lattice
    rng = np.random.default_rng(seed)
    z = lat.point(rng.uniform(size=starts), rng.uniform(size=starts))
    target = (value - cover.shift) / cover.scale
    for _ in range(80):
        with np.errstate(all="ignore"):
            d = kernel.zeta_derivs(z, 2, check=False)
            g = -d[1] - target
            step = g / (-d[2])
            big = np.abs(step) > 0.25
            step = np.where(big, 0.25 * step / np.abs(step), step)
            z = z - step
    with np.errstate(all="ignore"):
        ok = np.isfinite(z) & (np.abs(-kernel.zeta_derivs(z, 1, check=False)[1] - target) < 1e-8)
    sols = []
    for w in z[ok]:
        if all(abs(periodic_difference(lat, w, u)) > _DEDUPE for u in sols):
            sols.append(w)
    return len(sols)


def regularity_suite(imm, grid: int = 256, tol: float = 1e-10, overlap_tol: float = 1e-8) -> dict:
    """Pole values, Wirtinger derivatives at poles, chart overlap and grid conformality.

    The d/dzbar check applies to simple poles, which become immersed points.
    Poles of higher order are branch points of the inverted map, and there
    the check is that d/dzbar vanishes.
    """
    imm = as_pair(imm)
    if not imm.inverted:
        imm = imm.with_inverted(True)
    reg = pole_regularity(imm)
    orders = [c.order for c in imm.pole_charts]
    poles = [{
        "location": {"re": r["location"].real, "im": r["location"].imag},
        "order": m,
        "value_exactly_zero": bool(np.all(r["value"] == 0.0)),
        "abs_dz": r["abs_dz"],
        "abs_dzbar": r["abs_dzbar"],
    } for r, m in zip(reg, orders)]
    simple = [p for p in poles if p["order"] == 1]
    # a pole of order m >= 2 is a branch point of order m - 1 of the inverted map
    higher = [p for p in poles if p["order"] > 1]
    overlap = chart_overlap_error(imm)
    conf = conformality_grid(imm, grid)
    checks = {
        "pole_values_zero": all(p["value_exactly_zero"] for p in poles),
        "pole_dz_small": all(p["abs_dz"] <= tol for p in poles),
        "pole_dzbar_positive": all(p["abs_dzbar"] > 0 for p in simple),
        "higher_order_poles_branched": all(p["abs_dzbar"] <= tol for p in higher),
        "chart_overlap": overlap <= overlap_tol,
        "conformality": conf["max_conformality_residual"] <= tol,
    }
    return {
        "poles": poles,
        "chart_overlap_error": overlap,
        "grid": conf,
        "checks": checks,
        "pass": all(checks.values()),
    }
