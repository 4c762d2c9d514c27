"""Curvature of maps of tori and the integrals built from it.

Quadrature runs over the unit square of lattice coordinates (s, t) with
z = s + t*omega, so dx dy = Im(omega) ds dt.  The square is cut into tiles,
each integrated by a tensor Gauss-Legendre rule; tiles that carry a large
share of the energy or touch a pole/branch chart are split dyadically.

The conformal modulus of a metric on the reference torus R^2/Z^2 is found
from its two harmonic coordinates u_a = x_a + v_a (v_a periodic), computed
with P1 finite elements.  The Dirichlet matrix
M_ab = int (e_a + grad v_a)^T K (e_b + grad v_b), K = sqrt(det g) g^-1,
determines the modulus as tau = (-M_12 + i sqrt(det M)) / M_22.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DegeneratePoint,
    NonPositiveDefiniteMetric,
    RefinementBudgetExceeded,
    SolverDivergence,
)
from .immersion import as_pair, jet, real_jacobian, singular_values, to_real
from .lattice import canonicalize, periodic_difference

GL_NODES = 8
REFINE_SHARE = 1e-3


def thread_count() -> int:
    """Worker threads for quadrature, from WILLMORE_THREADS (default: all cores)."""
    env = os.environ.get("WILLMORE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ------------------------------------------------------------------ samples
@dataclass(frozen=True)
class MetricSample:
    point: complex
    conformal_factor_sq: float
    metric_2x2: np.ndarray
    anisotropy: float


def pullback_metric(imm, z) -> MetricSample:
    J = real_jacobian(imm, np.array([complex(z)]))[0]
    g = J.T @ J
    smax, smin = singular_values(J[None])
    if smin[0] < 1e-12 * smax[0]:
        raise DegeneratePoint(f"differential degenerates at {z}")
    lam2 = 0.5 * (g[0, 0] + g[1, 1])
    aniso = float(np.linalg.norm(g - lam2 * np.eye(2)) / lam2)
    return MetricSample(complex(z), float(lam2), g, aniso)


def _normal_part(v, X_x, X_y):
    """Component of v orthogonal to span(X_x, X_y) (stacked real vectors)."""
    g11 = np.sum(X_x * X_x, -1)
    g12 = np.sum(X_x * X_y, -1)
    g22 = np.sum(X_y * X_y, -1)
    det = g11 * g22 - g12**2
    a = np.sum(v * X_x, -1)
    b = np.sum(v * X_y, -1)
    cx = (g22 * a - g12 * b) / det
    cy = (g11 * b - g12 * a) / det
    return v - cx[..., None] * X_x - cy[..., None] * X_y


def mean_curvature(imm, z, method: str = "analytic", step: float = 1e-4, points: int = 16):
    """Mean curvature vector (trace convention, H = Delta_g F) in R^4.

    ``method``: "analytic" uses the closed-form second Wirtinger derivatives;
    "fd" a 5-point Laplacian with the given step; "mean_value" the circle-mean
    Laplacian 4*(mean over an n-gon of radius ``step`` - F)/step^2, which is
    exact up to round-off for harmonic maps.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    J = real_jacobian(imm, z)
    X_x, X_y = J[..., 0], J[..., 1]
    lam2 = 0.5 * (np.sum(X_x**2, -1) + np.sum(X_y**2, -1))
    smax, smin = singular_values(J)
    if np.any(smin < 1e-12 * smax):
        raise DegeneratePoint("differential degenerates")
    if method == "analytic":
        lap = to_real(jet(imm, z).laplacian)
    else:
        from .immersion import evaluate_r4

        F0 = evaluate_r4(imm, z)
        if method == "fd":
            h = step
            acc = sum(evaluate_r4(imm, z + d) for d in (h, -h, 1j * h, -1j * h))
            lap = (acc - 4 * F0) / h**2
            Fx = (evaluate_r4(imm, z + h) - evaluate_r4(imm, z - h)) / (2 * h)
            Fy = (evaluate_r4(imm, z + 1j * h) - evaluate_r4(imm, z - 1j * h)) / (2 * h)
            lam2 = 0.5 * (np.sum(Fx**2, -1) + np.sum(Fy**2, -1))
        elif method == "mean_value":
            th = 2 * np.pi * np.arange(points) / points
            acc = sum(evaluate_r4(imm, z + step * np.exp(1j * t)) for t in th) / points
            lap = 4 * (acc - F0) / step**2
        else:
            raise ValueError(f"unknown method {method!r}")
    return _normal_part(lap, X_x, X_y) / lam2[..., None]


def second_fundamental_norm(imm, z) -> np.ndarray:
    """|A| from the analytic jet via Gauss: |A|^2 = |H|^2 - 2K for a conformal map."""
    j = jet(imm, np.atleast_1d(z))
    H2 = np.sum(np.abs(j.laplacian) ** 2, -1) / j.lam2**2
    K = j.gauss_density / j.lam2
    return np.sqrt(np.maximum(H2 - 2 * K, 0.0))


def sphere_gauge_mean_curvature(H, x, X_x, X_y):
    """Mean curvature for the target metric mu^2 g_euc with mu = 2/(1+|x|^2).

    Trace convention: H_hat = mu^-2 (H - 2 mu^-1 (grad mu)^perp).
    ``H`` is the flat mean curvature vector at the image point ``x``.
    """
    r2 = np.sum(x * x, -1)
    mu = 2.0 / (1.0 + r2)
    grad_mu = -4.0 * x / (1.0 + r2)[..., None] ** 2
    perp = _normal_part(grad_mu, X_x, X_y)
    return (H - 2.0 * perp / mu[..., None]) / mu[..., None] ** 2


# ----------------------------------------------------- general real surfaces
def invert_real(X, X_x, X_y, X_xx, X_xy, X_yy):
    """Derivatives of X/|X|^2 up to second order from those of X (last axis = R^n)."""
    r2 = np.sum(X * X, -1)[..., None]
    rho = 1.0 / r2
    px = np.sum(X * X_x, -1)[..., None]
    py = np.sum(X * X_y, -1)[..., None]
    rho_x = -2 * px / r2**2
    rho_y = -2 * py / r2**2
    rho_xx = -2 * (np.sum(X_x * X_x, -1)[..., None] + np.sum(X * X_xx, -1)[..., None]) / r2**2 \
        + 8 * px * px / r2**3
    rho_xy = -2 * (np.sum(X_x * X_y, -1)[..., None] + np.sum(X * X_xy, -1)[..., None]) / r2**2 \
        + 8 * px * py / r2**3
    rho_yy = -2 * (np.sum(X_y * X_y, -1)[..., None] + np.sum(X * X_yy, -1)[..., None]) / r2**2 \
        + 8 * py * py / r2**3
    F = rho * X
    F_x = rho * X_x + rho_x * X
    F_y = rho * X_y + rho_y * X
    F_xx = rho * X_xx + 2 * rho_x * X_x + rho_xx * X
    F_xy = rho * X_xy + rho_x * X_y + rho_y * X_x + rho_xy * X
    F_yy = rho * X_yy + 2 * rho_y * X_y + rho_yy * X
    return F, F_x, F_y, F_xx, F_xy, F_yy


def surface_densities(X_x, X_y, X_xx, X_xy, X_yy):
    """Pointwise curvature data of an immersed surface in any R^n.

    Returns a dict with the mean curvature vector ``H`` (trace convention),
    the Willmore density (1/4)|H|^2 sqrt(det g), the Gauss density
    K sqrt(det g) (Gauss equation), sqrt(det g) and the smaller singular value.
    """
    g11 = np.sum(X_x * X_x, -1)
    g12 = np.sum(X_x * X_y, -1)
    g22 = np.sum(X_y * X_y, -1)
    det = g11 * g22 - g12**2
    A_xx = _normal_part(X_xx, X_x, X_y)
    A_xy = _normal_part(X_xy, X_x, X_y)
    A_yy = _normal_part(X_yy, X_x, X_y)
    H = (g22[..., None] * A_xx - 2 * g12[..., None] * A_xy + g11[..., None] * A_yy) / det[..., None]
    sq = np.sqrt(det)
    K = (np.sum(A_xx * A_yy, -1) - np.sum(A_xy * A_xy, -1)) / det
    tr = g11 + g22
    smin = np.sqrt(np.maximum((tr - np.sqrt(np.maximum((g11 - g22) ** 2 + 4 * g12**2, 0))) / 2, 0))
    return {
        "H": H,
        "willmore": 0.25 * np.sum(H * H, -1) * sq,
        "gauss": K * sq,
        "area": sq,
        "min_singular_value": smin,
    }


# --------------------------------------------------------------- quadrature
@dataclass
class QuadratureResult:
    totals: dict
    level_totals: list
    error: dict
    n_tiles: int
    n_points: int
    extrema: dict = field(default_factory=dict)


def _gl_tile_points(s0, t0, h, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = (x + 1) / 2
    w = w / 2
    S = s0[:, None, None] + h[:, None, None] * x[None, :, None]
    T = t0[:, None, None] + h[:, None, None] * x[None, None, :]
    W = (h**2)[:, None, None] * (w[:, None] * w[None, :])[None]
    S, T = np.broadcast_arrays(S, T)
    return S, T, W


def _evaluate_tiles(fn, s0, t0, h, nodes, chunk=2048):
    """Integrate every quantity returned by fn(s, t) over each tile; returns dict of per-tile sums."""
    n = len(s0)
    starts = list(range(0, n, chunk))

    def work(a):
        b = min(a + chunk, n)
        S, T, W = _gl_tile_points(s0[a:b], t0[a:b], h[a:b], nodes)
        vals = fn(S.ravel(), T.ravel())
        sums = {k: np.sum(v.reshape(S.shape) * W, axis=(1, 2)) for k, v in vals.items()
                if not k.startswith("max_") and not k.startswith("min_")}
        ext = {k: (float(np.max(v)) if k.startswith("max_") else float(np.min(v)))
               for k, v in vals.items() if k.startswith(("max_", "min_"))}
        return sums, ext

    threads = thread_count()
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(work, starts))
    else:
        results = [work(a) for a in starts]
    keys = results[0][0].keys()
    sums = {k: np.concatenate([r[0][k] for r in results]) for k in keys}
    ext = {}
    for r in results:
        for k, v in r[1].items():
            if k not in ext:
                ext[k] = v
            else:
                ext[k] = max(ext[k], v) if k.startswith("max_") else min(ext[k], v)
    return sums, ext


def tile_quadrature(fn: Callable, grid_n: int, refine_levels: int, key: str,
                    touches: Callable | None = None, nodes: int = GL_NODES,
                    budget: int = 20_000_000) -> QuadratureResult:
    """Adaptive tensor Gauss-Legendre quadrature over the unit square.

    ``fn(s, t)`` returns a dict of integrand arrays; ``key`` names the one that
    drives refinement.  ``touches(s0, t0, h)`` flags tiles to refine regardless
    of their share.  Level L refines the flagged leaves of level L-1 into four.
    """
    m = max(1, grid_n // nodes)
    h0 = 1.0 / m
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    s0 = (i.ravel() * h0).astype(float)
    t0 = (j.ravel() * h0).astype(float)
    h = np.full(s0.shape, h0)
    sums, ext = _evaluate_tiles(fn, s0, t0, h, nodes)
    n_points = len(s0) * nodes**2
    level_totals = [{k: float(np.sum(v)) for k, v in sums.items()}]
    for _ in range(refine_levels):
        total = abs(level_totals[-1][key])
        flag = np.abs(sums[key]) > REFINE_SHARE * total
        if touches is not None:
            flag |= touches(s0, t0, h)
        if not np.any(flag):
            level_totals.append(dict(level_totals[-1]))
            continue
        fs, ft, fh = s0[flag], t0[flag], h[flag] / 2
        cs = np.concatenate([fs, fs + fh, fs, fs + fh])
        ct = np.concatenate([ft, ft, ft + fh, ft + fh])
        ch = np.concatenate([fh] * 4)
        n_points += len(cs) * nodes**2
        if n_points > budget:
            raise RefinementBudgetExceeded(f"quadrature exceeded {budget} evaluations")
        csums, cext = _evaluate_tiles(fn, cs, ct, ch, nodes)
        keep = ~flag
        s0 = np.concatenate([s0[keep], cs])
        t0 = np.concatenate([t0[keep], ct])
        h = np.concatenate([h[keep], ch])
        sums = {k: np.concatenate([v[keep], csums[k]]) for k, v in sums.items()}
        for k, v in cext.items():
            ext[k] = max(ext[k], v) if k.startswith("max_") else min(ext[k], v)
        # sort leaves so the summation order is fixed
        order = np.lexsort((t0, s0, h))
        s0, t0, h = s0[order], t0[order], h[order]
        sums = {k: v[order] for k, v in sums.items()}
        level_totals.append({k: float(np.sum(v)) for k, v in sums.items()})
    totals = level_totals[-1]
    # change under the last refinement, floored by the round-off of the final sum
    floor = {k: float(np.finfo(float).eps * np.sqrt(len(v)) * np.sum(np.abs(v))) for k, v in sums.items()}
    if len(level_totals) > 1:
        error = {k: abs(level_totals[-1][k] - level_totals[-2][k]) + floor[k] for k in totals}
    else:
        error = {k: float("nan") for k in totals}
    return QuadratureResult(totals, level_totals, error, len(s0), n_points, ext)


def chart_toucher(lattice, centers, radii):
    """Tile predicate: does the tile come within ``radius`` of a chart centre?"""
    centers = np.asarray(centers, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    w1, w2 = lattice.generators
    diag = max(abs(w1 + w2), abs(w1 - w2)) / 2

    def touches(s0, t0, h):
        mid = lattice.point(s0 + h / 2, t0 + h / 2)
        out = np.zeros(mid.shape, dtype=bool)
        for c, r in zip(centers, radii):
            d = np.abs(periodic_difference(lattice, mid, c))
            out |= d < r + diag * h
        return out

    return touches


@dataclass
class EnergyReport:
    willmore_energy: float
    error_indicator: float
    total_gauss_curvature: float
    gauss_error_indicator: float
    max_conformality_residual: float
    min_conformal_factor: float
    grid_n: int
    refine_levels: int
    level_energies: list
    n_tiles: int
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def willmore_energy(imm, grid_n: int = 512, refine_levels: int = 3,
                    exclude_radius: float = 0.0) -> EnergyReport:
    """W = (1/4) int |H|^2 dmu and int K dmu by adaptive tile quadrature.

    ``exclude_radius`` > 0 drops the discs of that radius around the poles
    (used for the uninverted pair, whose ends have infinite area).
    """
    pair = as_pair(imm)
    lat = pair.lattice
    jac = lat.area
    poles = pair.poles

    def fn(s, t):
        z = lat.point(s, t)
        if exclude_radius > 0 and len(poles):
            mask = np.ones(z.shape, dtype=bool)
            for p in poles:
                mask &= np.abs(periodic_difference(lat, z, p)) >= exclude_radius
        else:
            mask = np.ones(z.shape, dtype=bool)
        W = np.zeros(z.shape)
        K = np.zeros(z.shape)
        conf = np.zeros(z.shape)
        lam = np.full(z.shape, np.inf)
        if np.any(mask):
            j = jet(pair, z[mask])
            W[mask] = j.willmore_density * jac
            K[mask] = j.gauss_density * jac
            conf[mask] = np.abs(j.conf) / (0.5 * j.lam2)
            lam[mask] = j.lam2
        return {"W": W, "K": K, "max_conf": conf, "min_lam2": lam}

    centers = [c.location for c in pair.pole_charts] + list(pair.branch_hint)
    radii = [c.radius for c in pair.pole_charts] + [0.1 * lat.min_period * 0.5] * len(pair.branch_hint)
    res = tile_quadrature(fn, grid_n, refine_levels, "W", chart_toucher(lat, centers, radii))
    return EnergyReport(
        willmore_energy=res.totals["W"],
        error_indicator=res.error["W"],
        total_gauss_curvature=res.totals["K"],
        gauss_error_indicator=res.error["K"],
        max_conformality_residual=res.extrema.get("max_conf", float("nan")),
        min_conformal_factor=res.extrema.get("min_lam2", float("nan")),
        grid_n=grid_n,
        refine_levels=refine_levels,
        level_energies=[lv["W"] for lv in res.level_totals],
        n_tiles=res.n_tiles,
        n_points=res.n_points,
    )


# ------------------------------------------------------------------ modulus
@dataclass
class ModulusReport:
    estimated_modulus: complex
    canonical_modulus: complex
    solver_residual: float
    period_residual: float
    grid_n: int
    iterations: int

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("estimated_modulus", "canonical_modulus"):
            c = complex(d[k])
            d[k] = {"re": c.real, "im": c.imag}
        return d


def _p1_gradients(n):
    """Basis gradients (times h) for the lower and upper triangle of a cell."""
    lower = np.array([[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]])  # nodes 00, 10, 11
    upper = np.array([[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]])  # nodes 00, 11, 01
    return lower, upper


def estimate_modulus(metric_field: Callable, grid_n: int = 256, tol: float = 1e-10,
                     maxiter: int | None = None) -> ModulusReport:
    """Conformal modulus of a metric on R^2/Z^2.

    ``metric_field(x, y)`` returns (g11, g12, g22) arrays.  Each grid cell is
    split into two triangles whose coefficient is sampled at the centroid.
    """
    n = int(grid_n)
    h = 1.0 / n
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    cx = np.concatenate([(i + 2 / 3) * h, (i + 1 / 3) * h])
    cy = np.concatenate([(j + 1 / 3) * h, (j + 2 / 3) * h])
    g11, g12, g22 = (np.asarray(a, dtype=float) for a in metric_field(cx, cy))
    det = g11 * g22 - g12**2
    if not (np.all(np.isfinite(det)) and np.all(det > 0) and np.all(g11 > 0)):
        raise NonPositiveDefiniteMetric("metric field is not positive definite")
    sq = np.sqrt(det)
    K = np.stack([np.stack([g22 / sq, -g12 / sq], -1), np.stack([-g12 / sq, g11 / sq], -1)], -2)

    def idx(a, b):
        return (a % n) * n + (b % n)

    lower, upper = _p1_gradients(n)
    nodes_l = np.stack([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)], -1)
    nodes_u = np.stack([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)], -1)
    nodes = np.concatenate([nodes_l, nodes_u])
    grads = np.concatenate([np.broadcast_to(lower, (n * n, 3, 2)),
                            np.broadcast_to(upper, (n * n, 3, 2))]) / h
    area = 0.5 * h * h
    KG = np.einsum("tab,tkb->tka", K, grads)  # K grad phi_k
    local = area * np.einsum("tka,tla->tkl", grads, KG)
    rows = np.repeat(nodes, 3, axis=1).ravel()
    cols = np.tile(nodes, (1, 3)).ravel()
    A = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n * n, n * n))
    # v is defined up to a constant: pin node 0 so the reduced system is SPD
    Ar = A[1:, 1:].tocsr()
    M_pre = sp.diags(1.0 / Ar.diagonal())
    sols, residual, iters = [], 0.0, 0
    for a in range(2):
        load = -area * KG[:, :, a]  # -|T| grad phi_k . K e_a
        b = np.zeros(n * n)
        np.add.at(b, nodes.ravel(), load.ravel())
        # size of the load before cancellation between neighbouring triangles
        scale = np.zeros(n * n)
        np.add.at(scale, nodes.ravel(), np.abs(load).ravel())
        bnorm = float(np.linalg.norm(scale))
        count = [0]

        def cb(_x):
            count[0] += 1

        xr, info = spla.cg(Ar, b[1:], rtol=0.0, atol=tol * bnorm, M=M_pre, maxiter=maxiter or 20 * n,
                           callback=cb)
        x = np.concatenate([[0.0], xr])
        if info != 0:
            raise SolverDivergence(f"conjugate gradients did not converge (info={info})")
        r = np.linalg.norm(A @ x - b) / bnorm
        residual = max(residual, float(r))
        iters += count[0]
        sols.append(x)
    # gradients of u_a = x_a + v_a on every triangle
    Du = []
    for a, x in enumerate(sols):
        gv = np.einsum("tk,tkc->tc", x[nodes], grads)
        gv[:, a] += 1.0
        Du.append(gv)
    M = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            M[a, b] = area * np.sum(np.einsum("tc,tcd,td->t", Du[a], K, Du[b]))
    M = 0.5 * (M + M.T)
    dM = M[0, 0] * M[1, 1] - M[0, 1] ** 2
    tau = complex(-M[0, 1] / M[1, 1], np.sqrt(dM) / M[1, 1])
    return ModulusReport(tau, canonicalize(tau).omega, residual, float(abs(dM - 1.0)), n, iters)


def linear_metric(sigma: complex):
    """Metric field A_sigma^* g_euc of (x, y) -> x + sigma*y."""
    s = complex(sigma)

    def field(x, y):
        one = np.ones_like(np.asarray(x, dtype=float))
        return one, s.real * one, abs(s) ** 2 * one

    return field


def modulus_suite(omega: complex, grid_n: int = 256, tol: float = 1e-6) -> dict:
    """Constant-metric oracle, conformal rescaling invariance, reported with solver residuals."""
    s = complex(omega)
    base = estimate_modulus(linear_metric(s), grid_n)
    err_const = abs(base.estimated_modulus - s)

    def rescaled(x, y):
        g11, g12, g22 = linear_metric(s)(x, y)
        c = np.exp(0.3 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y) + 0.2 * np.cos(2 * np.pi * x))
        return c * g11, c * g12, c * g22

    resc = estimate_modulus(rescaled, grid_n)
    err_resc = abs(resc.estimated_modulus - base.estimated_modulus)
    bound = max(tol, 10 * (base.solver_residual + resc.solver_residual))
    checks = {
        "constant_metric": {"value": err_const, "tolerance": tol, "pass": bool(err_const <= tol)},
        "rescaling_invariance": {"value": err_resc, "tolerance": bound, "pass": bool(err_resc <= bound)},
    }
    return {
        "constant_metric": base.to_dict(),
        "rescaled_metric": resc.to_dict(),
        "checks": checks,
        "pass": all(c["pass"] for c in checks.values()),
    }
