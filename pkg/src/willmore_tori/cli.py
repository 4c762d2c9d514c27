"""Command-line entry point.

Subcommands: construct, energy, verify {elliptic, immersion,
nonexistence-algebra, branch-algebra, modulus}, perturb, mesh, sweep.

Values come from built-in defaults, then an optional JSON config file
(--config), then command-line flags.  Every run writes a JSON report that
embeds the effective configuration, seed, tolerances and package version.
Exit codes: 0 success, 1 invalid input, 2 numerical failure or failed check.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalFailure, ValidationError

VERIFY_TARGETS = ("elliptic", "immersion", "nonexistence-algebra", "branch-algebra", "modulus")
COMMANDS = ("construct", "energy", "verify", "perturb", "mesh", "sweep")
SWEEP_COLUMNS = ["omega_re", "omega_im", "k", "willmore_energy", "reference_energy",
                 "relative_error", "energy_error_indicator"]

DEFAULT_TOLERANCES = {
    "elliptic": 1e-10,
    "elliptic_oracle": 1e-8,
    "regularity": 1e-10,
    "chart_overlap": 1e-8,
    "algebra": 1e-8,
    "modulus": 1e-6,
    "energy_relative": 1e-2,
    "tau_residual": 1e-3,
}


class ArgumentError(ValidationError):
    pass


def parse_complex(text) -> complex:
    """Parse '0.5+1.2i', '1.2j', 'i' or a {"re", "im"} mapping."""
    if isinstance(text, dict):
        return complex(float(text["re"]), float(text["im"]))
    if isinstance(text, (int, float, complex)):
        return complex(text)
    s = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError as exc:
        raise ArgumentError(f"cannot parse complex number {text!r}") from exc


def parse_float_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ArgumentError(f"cannot parse list {text!r}") from exc


def parse_int_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ArgumentError(f"cannot parse list {text!r}") from exc


def parse_complex_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [parse_complex(x) for x in text]
    return [parse_complex(x) for x in str(text).split(",") if x.strip()]


@dataclass
class RunConfig:
    command: str
    target: str | None = None
    omega: complex = 1j
    omegas: list = field(default_factory=lambda: [1j])
    k: int = 4
    ks: list = field(default_factory=lambda: [3, 4, 5, 6])
    double_cover: bool = False
    grid: int | None = None
    refine: int = 3
    eps_list: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    delta: float | None = None
    alpha: complex | None = None
    mesh_n: int = 64
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    input: str | None = None
    out: str | None = None
    csv: str | None = None
    report: str | None = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ArgumentError(f"unknown command {self.command!r}")
        if self.command == "verify" and self.target not in VERIFY_TARGETS:
            raise ArgumentError(f"verify target must be one of {VERIFY_TARGETS}")
        for om in [self.omega] + list(self.omegas):
            if not complex(om).imag > 0:
                raise ArgumentError("omega must have positive imaginary part")
        if self.k < 3 or any(k < 3 for k in self.ks):
            raise ArgumentError("k must be at least 3")
        if self.grid is None:
            self.grid = 256 if self.command in ("perturb", "verify") else 512
        if self.grid < 8 or self.grid % 8:
            raise ArgumentError("grid must be a positive multiple of 8")
        if self.refine < 0:
            raise ArgumentError("refine must be nonnegative")
        if not self.eps_list or any(e < 0 for e in self.eps_list):
            raise ArgumentError("eps-list must be a nonempty list of nonnegative values")
        if any(a < b for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ArgumentError("eps-list must be sorted in descending order")
        if self.delta is not None and not self.delta > 0:
            raise ArgumentError("delta must be positive")
        if self.mesh_n < 2:
            raise ArgumentError("mesh resolution must be at least 2")
        if self.seed < 0:
            raise ArgumentError("seed must be nonnegative")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_CONVERTERS = {
    "omega": parse_complex,
    "alpha": lambda v: None if v is None else parse_complex(v),
    "omegas": parse_complex_list,
    "ks": parse_int_list,
    "eps_list": parse_float_list,
    "k": int, "grid": int, "refine": int, "mesh_n": int, "seed": int,
    "delta": lambda v: None if v is None else float(v),
    "double_cover": bool,
}


def build_config(command: str, target, file_values: dict, flag_values: dict) -> RunConfig:
    """Layer the config file over the defaults and the flags over both, then validate."""
    names = {f.name for f in dataclasses.fields(RunConfig)}
    merged = {}
    for source in (file_values, flag_values):
        for key, val in source.items():
            key = key.replace("-", "_")
            if key not in names or key in ("command", "target") or val is None:
                continue
            if key == "tolerances":
                merged.setdefault("tolerances", dict(DEFAULT_TOLERANCES)).update(val)
                continue
            try:
                merged[key] = _CONVERTERS.get(key, lambda v: v)(val)
            except (TypeError, ValueError) as exc:
                raise ArgumentError(f"invalid value for {key}: {val!r}") from exc
    return RunConfig(command=command, target=target, **merged).validate()


# ----------------------------------------------------------------- parser
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _common(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="willmore-tori", description="Willmore tori in R^4: constructions and checks")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def imm_source(p):
        p.add_argument("--in", dest="input", help="immersion JSON written by construct")
        p.add_argument("--omega")
        p.add_argument("--k", type=int)
        p.add_argument("--double-cover", action="store_true", default=None)

    p = sub.add_parser("construct", help="build an immersion and write it as JSON")
    _common(p)
    p.add_argument("--omega")
    p.add_argument("--k", type=int)
    p.add_argument("--double-cover", action="store_true", default=None)

    p = sub.add_parser("energy", help="Willmore energy of an immersion")
    _common(p)
    imm_source(p)
    p.add_argument("--grid", type=int)
    p.add_argument("--refine", type=int)

    p = sub.add_parser("verify", help="run a verification suite")
    _common(p)
    p.add_argument("target", choices=VERIFY_TARGETS)
    imm_source(p)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("perturb", help="perturbation sweep toward energy 8 pi")
    _common(p)
    p.add_argument("--omega")
    p.add_argument("--eps-list")
    p.add_argument("--grid", type=int)
    p.add_argument("--refine", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha")
    p.add_argument("--csv", help="CSV output path (default: --out with .csv suffix)")

    p = sub.add_parser("mesh", help="export an OBJ quad mesh")
    _common(p)
    imm_source(p)
    p.add_argument("--n", dest="mesh_n", type=int)
    p.add_argument("--report", help="JSON report path (default: --out with .json suffix)")

    p = sub.add_parser("sweep", help="energies over several moduli and pole counts")
    _common(p)
    p.add_argument("--omegas")
    p.add_argument("--ks")
    p.add_argument("--grid", type=int)
    p.add_argument("--refine", type=int)
    p.add_argument("--csv", help="CSV output path (default: --out with .csv suffix)")
    return parser


# --------------------------------------------------------------- commands
def _meta(cfg: RunConfig) -> dict:
    return {"config": cfg.to_dict(), "seed": cfg.seed, "tolerances": cfg.tolerances,
            "version": __version__}


def _load_immersion(cfg: RunConfig):
    from .immersion import PairImmersion, build_double_cover, build_willmore_torus
    from .io import read_json

    if cfg.input:
        try:
            data = read_json(cfg.input)
        except (OSError, ValueError) as exc:
            raise ArgumentError(f"cannot read immersion file: {exc}") from exc
        return PairImmersion.from_dict(data["immersion"] if "immersion" in data else data)
    if cfg.double_cover:
        return build_double_cover(cfg.omega).as_pair()
    return build_willmore_torus(cfg.omega, cfg.k, seed=cfg.seed)


def reference_energy(imm) -> float:
    """4 pi times the total pole order of the uninverted pair."""
    return 4 * np.pi * sum(c.order for c in imm.pole_charts)


def cmd_construct(cfg):
    from .immersion import density_report

    imm = _load_immersion(cfg)
    _, density, info = density_report(imm)
    report = dict(_meta(cfg), immersion=imm.to_dict(),
                  summary={"poles": len(imm.poles), "density_at_origin": density,
                           "full_rank_at_poles": info["full_rank"],
                           "reference_energy": reference_energy(imm)})
    return report, True, {}


def cmd_energy(cfg):
    from .geometry import willmore_energy

    imm = _load_immersion(cfg)
    rep = willmore_energy(imm, cfg.grid, cfg.refine)
    ref = reference_energy(imm)
    rel = abs(rep.willmore_energy - ref) / ref
    ok = rel <= cfg.tolerances["energy_relative"]
    report = dict(_meta(cfg), energy=rep.to_dict(), reference_energy=ref, relative_error=rel)
    report["pass"] = bool(ok)
    return report, ok, {}


def cmd_verify(cfg):
    t = cfg.tolerances
    if cfg.target == "elliptic":
        from .elliptic import invariant_suite
        res = invariant_suite(cfg.omega, tol=t["elliptic"], oracle_tol=t["elliptic_oracle"])
    elif cfg.target == "immersion":
        from .geometry import mean_curvature
        from .immersion import regularity_suite
        imm = _load_immersion(cfg)
        res = regularity_suite(imm, grid=min(cfg.grid, 256), tol=t["regularity"],
                               overlap_tol=t["chart_overlap"])
        res["minimality"] = _minimality(imm, mean_curvature, cfg.seed)
        res["pass"] = bool(res["pass"] and res["minimality"]["pass"])
    elif cfg.target == "nonexistence-algebra":
        from .analysis import algebra_suite
        res = algebra_suite(cfg.omega, seed=cfg.seed, tol=t["algebra"])
    elif cfg.target == "branch-algebra":
        from .analysis import branch_suite
        res = branch_suite(cfg.omega, seed=cfg.seed, tol=t["algebra"])
    else:
        from .geometry import modulus_suite
        from .perturbation import build_family, tau
        res = modulus_suite(cfg.omega, grid_n=min(cfg.grid, 256), tol=t["modulus"])
        fam = build_family(cfg.omega, seed=cfg.seed)
        m = tau(fam, min(cfg.grid, 256))
        err = abs(m.estimated_modulus - cfg.omega)
        res["checks"]["unperturbed_class"] = {"value": err, "tolerance": t["tau_residual"],
                                             "pass": bool(err <= t["tau_residual"])}
        res["pass"] = all(c["pass"] for c in res["checks"].values())
    return dict(_meta(cfg), result=res, **{"pass": bool(res["pass"])}), bool(res["pass"]), {}


def _minimality(imm, mean_curvature, seed, n=64, clearance=0.05, tol=1e-8):
    """|H| of the uninverted pair, relative to 1 + |A|, at points away from the poles."""
    from .geometry import second_fundamental_norm
    from .lattice import periodic_difference

    pair = imm.with_inverted(False)
    lat = pair.lattice
    rng = np.random.default_rng(seed)
    z = lat.point(rng.random(4 * n), rng.random(4 * n))
    far = np.ones(z.shape, dtype=bool)
    for p in pair.poles:
        far &= np.abs(periodic_difference(lat, z, p)) >= clearance * lat.min_period
    z = z[far][:n]
    # circle-mean Laplacian: independent of the closed-form jet
    H = np.linalg.norm(mean_curvature(pair, z, "mean_value", step=0.01 * lat.min_period), axis=-1)
    A = second_fundamental_norm(pair, z)
    val = float(np.max(H / (1 + A)))
    return {"value": val, "tolerance": tol, "samples": int(z.size), "pass": bool(val <= tol)}


def cmd_perturb(cfg):
    from .io import write_csv
    from .perturbation import SWEEP_COLUMNS as COLS
    from .perturbation import energy_sweep

    rows, details = energy_sweep(cfg.omega, cfg.eps_list, grid_n=cfg.grid,
                                 refine_levels=cfg.refine, alpha=cfg.alpha, delta=cfg.delta,
                                 seed=cfg.seed)
    excess = [r["willmore_energy"] - 8 * np.pi for r in rows]
    decreasing = all(a > b for a, b in zip(excess, excess[1:]))
    tau_ok = all(r["tau_residual"] <= cfg.tolerances["tau_residual"] for r in rows)
    report = dict(_meta(cfg), rows=rows, details=details, energy_minus_8pi=excess,
                  decreasing=decreasing, tau_residuals_ok=tau_ok)
    report["pass"] = bool(decreasing and tau_ok and all(e > 0 for e in excess))
    artifacts = {}
    csv_path = cfg.csv or (str(Path(cfg.out).with_suffix(".csv")) if cfg.out else None)
    if csv_path:
        artifacts[csv_path] = (write_csv, (rows, COLS, csv_path))
    return report, report["pass"], artifacts


def cmd_mesh(cfg):
    from .io import write_obj

    imm = _load_immersion(cfg)
    out = cfg.out or "mesh.obj"
    report = dict(_meta(cfg), mesh={"path": out, "n": cfg.mesh_n, "vertices": (cfg.mesh_n + 1) ** 2,
                                    "faces": cfg.mesh_n**2})
    report["pass"] = True
    return report, True, {out: (write_obj, (imm, out, cfg.mesh_n))}


def cmd_sweep(cfg):
    from .geometry import willmore_energy
    from .immersion import build_willmore_torus
    from .io import write_csv

    rows = []
    for om in cfg.omegas:
        for k in cfg.ks:
            imm = build_willmore_torus(om, k, seed=cfg.seed)
            rep = willmore_energy(imm, cfg.grid, cfg.refine)
            ref = 4 * np.pi * k
            rows.append({"omega_re": complex(om).real, "omega_im": complex(om).imag, "k": k,
                         "willmore_energy": rep.willmore_energy, "reference_energy": ref,
                         "relative_error": abs(rep.willmore_energy - ref) / ref,
                         "energy_error_indicator": rep.error_indicator})
    ok = all(r["relative_error"] <= cfg.tolerances["energy_relative"] for r in rows)
    report = dict(_meta(cfg), rows=rows)
    report["pass"] = ok
    artifacts = {}
    csv_path = cfg.csv or (str(Path(cfg.out).with_suffix(".csv")) if cfg.out else None)
    if csv_path:
        artifacts[csv_path] = (write_csv, (rows, SWEEP_COLUMNS, csv_path))
    return report, ok, artifacts


HANDLERS = {"construct": cmd_construct, "energy": cmd_energy, "verify": cmd_verify,
            "perturb": cmd_perturb, "mesh": cmd_mesh, "sweep": cmd_sweep}


def _report_path(cfg: RunConfig):
    if cfg.command == "mesh":
        if cfg.report:
            return cfg.report
        return str(Path(cfg.out).with_suffix(".json")) if cfg.out else None
    return cfg.out


def _emit(report, path, stream):
    from .io import dumps_json, write_json

    if path:
        write_json(report, path)
    else:
        stream.write(dumps_json(report))


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute a validated config; returns the exit code."""
    stdout = stdout or sys.stdout
    try:
        report, ok, artifacts = HANDLERS[cfg.command](cfg)
    except ValidationError as exc:
        _emit(dict(_meta(cfg), error={"type": type(exc).__name__, "message": str(exc)},
                   **{"pass": False}), _report_path(cfg), sys.stderr if not _report_path(cfg) else stdout)
        return 1
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        _emit(dict(_meta(cfg), error={"type": type(exc).__name__, "message": str(exc)},
                   **{"pass": False}), _report_path(cfg), sys.stderr if not _report_path(cfg) else stdout)
        return 2
    for _, (writer, args) in sorted(artifacts.items()):
        writer(*args)
    _emit(report, _report_path(cfg), stdout)
    return 0 if ok else 2


def main(argv=None) -> int:
    from .io import dumps_json, read_json

    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = make_parser().parse_args(argv)
        if ns.command is None:
            raise ArgumentError("a subcommand is required")
        flags = {k: v for k, v in vars(ns).items() if k not in ("command", "target", "config")}
        file_values = {}
        if ns.config:
            try:
                file_values = read_json(ns.config)
            except (OSError, ValueError) as exc:
                raise ArgumentError(f"cannot read config file: {exc}") from exc
        cfg = build_config(ns.command, getattr(ns, "target", None), file_values, flags)
    except ValidationError as exc:
        sys.stderr.write(dumps_json({"error": {"type": type(exc).__name__, "message": str(exc)},
                                     "pass": False, "version": __version__}))
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
