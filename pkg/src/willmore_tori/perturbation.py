"""Smoothing the branched double cover into immersed tori with energy near 8 pi.

Everything lives on the reference torus R^2/Z^2 with coordinates (x, y).
For a modulus sigma the linear chart w = x + sigma*y identifies it with
C/(Z + sigma Z), and

    f_sigma(x, y) = c / (wp_sigma(w) - alpha)

is a degree-two map with two simple poles and four branch points sitting at
the half-lattice points b_j.  On a ball of radius 2*delta around each b_j the
second component eps * w_loc (w_loc the local chart value) removes the
branching; a smooth cutoff switches it off by radius 3*delta.  The modulus
sigma is then adjusted so that the conformal class of the perturbed map
equals the target omega.

The constant c is fixed by c * delta * min_j |f''(b_j)| = 1 (see
``branch_normalization``), which makes eps a dimensionless size of the
perturbation relative to f on the branch balls.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticKernel
from .errors import ChartPackingFailure, CriticalValue, NewtonDivergence, NonPositiveDefiniteMetric
from .geometry import estimate_modulus, invert_real, surface_densities, tile_quadrature
from .io import csv_text
from .lattice import ConformalClass, Lattice, TorusMap
from .meromorphic import make_inverse_wp

BRANCH_REF = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]])


# ------------------------------------------------------------------ cutoff
def _h(s):
    """exp(-1/s) for s > 0 with its first two derivatives, 0 for s <= 0."""
    s = np.asarray(s, dtype=float)
    pos = s > 5e-3
    ss = np.where(pos, s, 1.0)
    e = np.where(pos, np.exp(-1.0 / ss), 0.0)
    d1 = e / ss**2
    d2 = e * (1.0 / ss**4 - 2.0 / ss**3)
    return e, np.where(pos, d1, 0.0), np.where(pos, d2, 0.0)


def smooth_step(t):
    """C-infinity step equal to 1 for t <= 0 and 0 for t >= 1, with two derivatives."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    a, a1, a2 = _h(1.0 - t)
    b, b1, b2 = _h(t)
    a1, a2 = -a1, a2  # d/dt of h(1 - t)
    den = a + b
    N = a1 * b - a * b1
    N1 = a2 * b - a * b2
    psi = a / den
    d1 = N / den**2
    d2 = N1 / den**2 - 2 * N * (a1 + b1) / den**3
    return psi, d1, d2


def cutoff(r, delta):
    """eta(r): 1 on r <= 2 delta, 0 on r >= 3 delta; returns eta, eta_r, eta_rr."""
    psi, d1, d2 = smooth_step((np.asarray(r) - 2 * delta) / delta)
    return psi, d1 / delta, d2 / delta**2


def _radial_derivs(ux, uy, delta):
    r = np.hypot(ux, uy)
    eta, er, err = cutoff(r, delta)
    rs = np.where(r > 0, r, 1.0)
    nx, ny = ux / rs, uy / rs
    er = np.where(r > 0, er, 0.0)
    err = np.where(r > 0, err, 0.0)
    ex, ey = er * nx, er * ny
    exx = err * nx * nx + er * (1 - nx * nx) / rs
    exy = err * nx * ny - er * nx * ny / rs
    eyy = err * ny * ny + er * (1 - ny * ny) / rs
    return eta, ex, ey, exx, exy, eyy


def _wrap(d):
    return d - np.round(d)


# ------------------------------------------------------------------ family
@dataclass(frozen=True)
class PerturbationFamily:
    omega: ConformalClass
    alpha: complex
    delta: float
    epsilon: float
    sigma: complex
    offset: complex = 1.0
    f_scale: float = 1.0
    kernel: EllipticKernel = field(init=False, repr=False, compare=False)
    block: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kernel = EllipticKernel(Lattice(complex(self.sigma)))
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "block", make_inverse_wp(kernel, self.alpha))

    @property
    def chart(self) -> TorusMap:
        return TorusMap(complex(self.sigma))

    @property
    def poles_ref(self) -> np.ndarray:
        """The two poles in reference coordinates, reduced to [0, 1)^2."""
        x, y = self.chart.inverse(np.array([d.location for d in self.block.pole_ledger]))
        return np.stack([x - np.floor(x), y - np.floor(y)], -1)

    @property
    def branch_ref(self) -> np.ndarray:
        return BRANCH_REF.copy()

    def with_params(self, sigma=None, epsilon=None) -> "PerturbationFamily":
        return PerturbationFamily(self.omega, self.alpha, self.delta,
                                  self.epsilon if epsilon is None else float(epsilon),
                                  self.sigma if sigma is None else complex(sigma), self.offset,
                                  self.f_scale)

    def packing_distance(self) -> float:
        pts = np.concatenate([self.poles_ref, BRANCH_REF])
        best = np.inf
        for i in range(len(pts)):
            for j in range(i):
                d = _wrap(pts[i] - pts[j])
                best = min(best, float(np.hypot(*d)))
        return best

    def to_dict(self) -> dict:
        return {
            "omega": {"re": self.omega.omega.real, "im": self.omega.omega.imag},
            "alpha": {"re": complex(self.alpha).real, "im": complex(self.alpha).imag},
            "delta": self.delta,
            "epsilon": self.epsilon,
            "f_scale": self.f_scale,
            "sigma": {"re": complex(self.sigma).real, "im": complex(self.sigma).imag},
            "poles": self.poles_ref.tolist(),
            "branch_points": BRANCH_REF.tolist(),
        }


def _packing(kernel_sigma, z_plus, sigma):
    A = TorusMap(sigma)
    x, y = A.inverse(np.array([z_plus, -z_plus]))
    pts = np.concatenate([np.stack([x, y], -1), BRANCH_REF])
    best = np.inf
    for i in range(len(pts)):
        for j in range(i):
            best = min(best, float(np.hypot(*_wrap(pts[i] - pts[j]))))
    return best


def choose_alpha(kernel: EllipticKernel, n: int = 8):
    """Value alpha = wp(z0) over an n x n candidate grid maximising the packing distance.

    Candidates at half-lattice points are skipped; ties go to larger |wp'|.
    """
    best, key = None, None
    for i in range(n):
        for j in range(n):
            if (2 * i) % n == 0 and (2 * j) % n == 0:
                continue
            z0 = complex(kernel.lattice.point(i / n, j / n))
            wp, wpp = kernel.wp(z0), kernel.wp_prime(z0)
            k = (round(_packing(kernel, z0, kernel.omega), 12), abs(wpp))
            if key is None or k > key:
                best, key = complex(wp), k
    return best


def build_family(omega, alpha=None, delta=None, seed: int = 0, epsilon: float = 0.0,
                 max_halvings: int = 6) -> PerturbationFamily:
    """Family around the conformal class ``omega`` with sigma = omega."""
    cc = omega if isinstance(omega, ConformalClass) else ConformalClass(complex(omega))
    kernel = EllipticKernel(Lattice(cc.omega))
    if alpha is None:
        alpha = choose_alpha(kernel)
    e = kernel.half_period_values()
    scale = max(1.0, max(abs(v) for v in e))
    if min(abs(alpha - v) for v in e) < 1e-6 * scale:
        raise CriticalValue("alpha is a branch value of wp")
    fam = PerturbationFamily(cc, complex(alpha), 0.1, float(epsilon), cc.omega)
    dmin = fam.packing_distance()
    d = min(0.25 * dmin, 0.1) if delta is None else float(delta)
    for _ in range(max_halvings + 1):
        if 6 * d < dmin:
            break
        d /= 2
    else:
        raise ChartPackingFailure(f"3*delta balls overlap (packing distance {dmin:.3e})")
    fam = PerturbationFamily(cc, complex(alpha), d, float(epsilon), cc.omega)
    return PerturbationFamily(cc, complex(alpha), d, float(epsilon), cc.omega,
                              f_scale=branch_normalization(fam))


def branch_normalization(fam: PerturbationFamily) -> float:
    """Factor c making c * delta * min_j |f''(b_j)| = 1.

    Multiplying f by c is the same as dividing eps by c (Willmore energy is
    dilation invariant), so this fixes the meaning of eps: the perturbation
    eps * phi has the same size, relative to c*f, at radius delta from every
    branch point, whatever the lattice and alpha.
    """
    s = complex(fam.sigma)
    second = [abs(complex(fam.block.derivs(complex(b[0] + s * b[1]), 2, check=False)[2]))
              for b in BRANCH_REF]
    return 1.0 / (fam.delta * min(second))


# -------------------------------------------------------------- evaluation
def _to_r2(c):
    return np.stack([c.real, c.imag], -1)


def real_jet(fam: PerturbationFamily, x, y):
    """Uninverted map X = (f, eps*phi) and its derivatives in (x, y), as R^4 vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = complex(fam.sigma)
    w = x + s * y
    f0, f1, f2 = fam.block.derivs(w, 2, check=False)
    c = fam.f_scale
    Fc = [c * f0, c * f1, c * s * f1, c * f2, c * s * f2, c * s * s * f2]
    P = [np.zeros_like(w) for _ in range(6)]
    if fam.epsilon != 0.0:
        for b in BRANCH_REF:
            ux, uy = _wrap(x - b[0]), _wrap(y - b[1])
            near = np.hypot(ux, uy) < 3 * fam.delta
            if not np.any(near):
                continue
            eta, ex, ey, exx, exy, eyy = _radial_derivs(ux[near], uy[near], fam.delta)
            W = ux[near] + s * uy[near]
            vals = [
                eta * W,
                ex * W + eta,
                ey * W + eta * s,
                exx * W + 2 * ex,
                exy * W + ex * s + ey,
                eyy * W + 2 * ey * s,
            ]
            for k in range(6):
                P[k][near] += fam.epsilon * vals[k]
    P[0] = P[0] + fam.offset
    out = [np.concatenate([_to_r2(a), _to_r2(b)], -1) for a, b in zip(Fc, P)]
    return out  # X, X_x, X_y, X_xx, X_xy, X_yy


def perturbed_map(fam: PerturbationFamily, p):
    """(f_sigma(p), eps*phi_sigma(p)) as a point of R^4 (without the inversion offset)."""
    x, y = p
    X = real_jet(fam, np.atleast_1d(x), np.atleast_1d(y))[0]
    X[..., 2] -= complex(fam.offset).real
    X[..., 3] -= complex(fam.offset).imag
    return X[0] if np.ndim(x) == 0 else X


def differential(fam: PerturbationFamily, x, y):
    J = real_jet(fam, x, y)
    return np.stack([J[1], J[2]], -1)


def _branch_distance(fam, x, y):
    r = np.full(np.shape(x), np.inf)
    for b in BRANCH_REF:
        r = np.minimum(r, np.hypot(_wrap(x - b[0]), _wrap(y - b[1])))
    return r


# ----------------------------------------------------------------- metric
def regularized_metric(fam: PerturbationFamily):
    """Metric field lambda_{sigma,eps} * (f_sigma, eps phi_sigma)^* g_euc on the reference torus.

    Where a cutoff equals 1 the product collapses exactly to A_sigma^* g_euc,
    so that value is used directly; near poles the product is written as
    (|f'|^2 + eta (1 - |f'|^2)) A_sigma^* g_euc, which has no 0 * inf.
    """
    s = complex(fam.sigma)
    delta = fam.delta
    poles = fam.poles_ref
    eps = fam.epsilon

    def field(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w = x + s * y
        d = fam.block.derivs(w, 1, check=False)
        fp2 = np.abs(fam.f_scale * d[1]) ** 2
        conf = fp2.copy()  # conformal factor relative to A*g where the metric is conformal
        aniso = np.zeros(x.shape, dtype=bool)
        g_full = None
        for b in BRANCH_REF:
            r = np.hypot(_wrap(x - b[0]), _wrap(y - b[1]))
            inner = r <= 2 * delta
            conf = np.where(inner, 1.0, conf)
            ann = (r > 2 * delta) & (r < 3 * delta)
            aniso |= ann
        for p in poles:
            r = np.hypot(_wrap(x - p[0]), _wrap(y - p[1]))
            eta = cutoff(r, delta)[0]
            ball = r < 3 * delta
            conf = np.where(ball, np.where(eta >= 1.0, 1.0, (1.0 - eta) * fp2 + eta), conf)
        g11 = conf * 1.0
        g12 = conf * s.real
        g22 = conf * abs(s) ** 2
        if np.any(aniso):
            xa, ya = x[aniso], y[aniso]
            J = real_jet(fam, xa, ya)
            Xx, Xy = J[1], J[2]
            lam = np.ones(xa.shape)
            for b in BRANCH_REF:
                r = np.hypot(_wrap(xa - b[0]), _wrap(ya - b[1]))
                eta = cutoff(r, delta)[0]
                lam = lam + eta * (1.0 / (fp2[aniso] + eps**2) - 1.0)
            g11 = g11.copy(); g12 = g12.copy(); g22 = g22.copy()
            g11[aniso] = lam * np.sum(Xx * Xx, -1)
            g12[aniso] = lam * np.sum(Xx * Xy, -1)
            g22[aniso] = lam * np.sum(Xy * Xy, -1)
        det = g11 * g22 - g12**2
        if not (np.all(det > 0) and np.all(g11 > 0)):
            raise NonPositiveDefiniteMetric("regularized metric is not positive definite")
        return g11, g12, g22

    return field


def tau(fam: PerturbationFamily, grid_n: int = 256):
    """Conformal class of the perturbed map (estimated modulus report)."""
    return estimate_modulus(regularized_metric(fam), grid_n)


# ------------------------------------------------------------------ solver
@dataclass
class ConstraintSolution:
    sigma: complex
    tau: complex
    residual: float
    iterations: int
    trace: list

    def to_dict(self):
        return {
            "sigma": {"re": self.sigma.real, "im": self.sigma.imag},
            "tau": {"re": self.tau.real, "im": self.tau.imag},
            "residual": self.residual,
            "iterations": self.iterations,
            "trace": self.trace,
        }


def solve_conformal_constraint(fam: PerturbationFamily, epsilon: float, initial_sigma=None,
                               grid_n: int = 256, tol: float = 1e-4, fd_step: float = 1e-3,
                               max_iter: int = 12) -> ConstraintSolution:
    """Find sigma with tau(sigma, eps) = omega by Broyden's method.

    The Jacobian starts from a forward-difference estimate at the initial
    point; steps are halved while the residual grows.
    """
    target = fam.omega.omega
    sigma = complex(target if initial_sigma is None else initial_sigma)

    def F(sg):
        t = tau(fam.with_params(sigma=sg, epsilon=epsilon), grid_n).estimated_modulus
        return np.array([(t - target).real, (t - target).imag]), t

    r, t = F(sigma)
    trace = [{"sigma": [sigma.real, sigma.imag], "residual": float(np.hypot(*r))}]
    if np.hypot(*r) <= tol:
        return ConstraintSolution(sigma, t, float(np.hypot(*r)), 0, trace)
    J = np.empty((2, 2))
    for k, d in enumerate((fd_step, 1j * fd_step)):
        rk, _ = F(sigma + d)
        J[:, k] = (rk - r) / fd_step
    for it in range(1, max_iter + 1):
        step = -np.linalg.solve(J, r)
        lam = 1.0
        while True:
            cand = sigma + lam * complex(step[0], step[1])
            if cand.imag <= 0:
                lam /= 2
                continue
            rn, tn = F(cand)
            if np.hypot(*rn) < np.hypot(*r) or lam < 1e-3:
                break
            lam /= 2
        if np.hypot(*rn) >= np.hypot(*r):
            raise NewtonDivergence(f"constraint solve stalled: trace={trace}")
        s_vec = lam * step
        J = J + np.outer(rn - r - J @ s_vec, s_vec) / (s_vec @ s_vec)
        sigma, r, t = cand, rn, tn
        trace.append({"sigma": [sigma.real, sigma.imag], "residual": float(np.hypot(*r))})
        if np.hypot(*r) <= tol:
            return ConstraintSolution(sigma, t, float(np.hypot(*r)), it, trace)
    raise NewtonDivergence(f"no convergence in {max_iter} iterations: trace={trace}")


# ------------------------------------------------------------------ energy
@dataclass
class PerturbedEnergy:
    willmore_energy: float
    error_indicator: float
    excess_energy: float
    excess_error_indicator: float
    total_gauss_curvature: float
    min_singular_value: float
    level_energies: list


def perturbed_energy(fam: PerturbationFamily, grid_n: int = 256, refine_levels: int = 3):
    """W of the inverted map and the flat W of the uninverted map over the annuli."""
    delta = fam.delta
    jac = 1.0  # reference coordinates are the integration variables

    def fn(x, y):
        J = real_jet(fam, x, y)
        F = invert_real(*J)
        inv = surface_densities(*F[1:])
        rb = _branch_distance(fam, x, y)
        ann = (rb > 2 * delta) & (rb < 3 * delta)
        exc = np.zeros(x.shape)
        if np.any(ann) and fam.epsilon != 0.0:
            sub = surface_densities(*(a[ann] for a in J[1:]))
            exc[ann] = sub["willmore"]
        return {
            "W": inv["willmore"] * jac,
            "K": inv["gauss"] * jac,
            "excess": exc,
            "min_sv": inv["min_singular_value"],
        }

    centers = np.concatenate([BRANCH_REF, fam.poles_ref])

    def touches(s0, t0, h):
        mx, my = s0 + h / 2, t0 + h / 2
        out = np.zeros(mx.shape, dtype=bool)
        for c in centers:
            d = np.hypot(_wrap(mx - c[0]), _wrap(my - c[1]))
            out |= d < 3 * delta + h
        return out

    res = tile_quadrature(fn, grid_n, refine_levels, "W", touches)
    return PerturbedEnergy(
        willmore_energy=res.totals["W"],
        error_indicator=res.error["W"],
        excess_energy=res.totals["excess"],
        excess_error_indicator=res.error["excess"],
        total_gauss_curvature=res.totals["K"],
        min_singular_value=float(np.min(_grid_min_sv(fam, fn))),
        level_energies=[lv["W"] for lv in res.level_totals],
    )


def _grid_min_sv(fam, fn, n: int = 256):
    s = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(s, s, indexing="ij")
    return fn(X.ravel(), Y.ravel())["min_sv"]


SWEEP_COLUMNS = ["epsilon", "sigma_re", "sigma_im", "tau_residual", "willmore_energy",
                 "energy_error_indicator", "min_singular_value"]


def energy_sweep(omega, epsilons, grid_n: int = 256, refine_levels: int = 3, alpha=None,
                 delta=None, seed: int = 0):
    """Solve the constraint and compute W for each eps (descending); returns rows and details."""
    eps = [float(e) for e in epsilons]
    if any(a < b for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be sorted in descending order")
    fam = build_family(omega, alpha=alpha, delta=delta, seed=seed)
    rows, details = [], []
    sigma = fam.omega.omega
    for e in eps:
        sol = solve_conformal_constraint(fam, e, sigma, grid_n=grid_n)
        sigma = sol.sigma
        f_e = fam.with_params(sigma=sigma, epsilon=e)
        en = perturbed_energy(f_e, grid_n, refine_levels)
        rows.append({
            "epsilon": e,
            "sigma_re": sigma.real,
            "sigma_im": sigma.imag,
            "tau_residual": sol.residual,
            "willmore_energy": en.willmore_energy,
            "energy_error_indicator": en.error_indicator,
            "min_singular_value": en.min_singular_value,
        })
        details.append({"solve": sol.to_dict(), "energy": en.__dict__, "family": f_e.to_dict()})
    return rows, details


def rows_to_csv(rows, columns=SWEEP_COLUMNS) -> str:
    return csv_text(rows, columns)
