"""Command implementations behind ``bhlab <command>``.

Every command returns ``(passed, artifacts)`` where ``artifacts`` maps file
names to their text or bytes.  Nothing here touches the output directory;
:mod:`bhlab.cli.main` writes the artifacts and the manifest.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .. import __version__
from .. import barriers as bar
from .. import geometry as geo
from ..harness import (CSV_COLUMNS, EstimateError, Member, build_family, estimate_backward_harnack,
                       estimate_boundary_harnack_elliptic, estimate_carleson, estimate_holder_decay,
                       estimate_interior_harnack, estimate_linear_rate, refinement_study)
from ..operators import Ellipticity
from ..solver import CoefficientField, GridSpec, ProblemSpec, heat_reference, sector_eigenfunction
from .artifacts import MANIFEST, csv_text, json_text
from .config import ConfigError

__all__ = ["run_command", "SWEEP_COLUMNS", "MARGIN_COLUMNS", "ERROR_COLUMNS"]

SWEEP_COLUMNS = ("parameter", "value", "estimator") + CSV_COLUMNS
MARGIN_COLUMNS = ("barrier", "region", "parameter", "min_margin", "argmin", "samples", "pass")
ERROR_COLUMNS = ("h", "dt", "nsteps", "sup", "max_error", "ratio")


def _need(cfg: dict, key: str) -> dict:
    if key not in cfg:
        raise ConfigError(key, "required section is missing for this command")
    return cfg[key]


# ---------------------------------------------------------------------------
# builders

def _domain_spec(d: dict) -> dict:
    d = dict(d)
    if "omega_over_pi" in d:
        if "omega" in d:
            raise ConfigError("domain.omega_over_pi", "give omega or omega_over_pi, not both")
        d["omega"] = d.pop("omega_over_pi") * math.pi
    if "base" in d:
        d["base"] = _domain_spec(d["base"])
    return d


def build_domain(cfg: dict) -> geo.Domain:
    try:
        return geo.make_domain(_domain_spec(_need(cfg, "domain")))
    except (TypeError, ValueError) as exc:
        raise ConfigError("domain", str(exc)) from exc


def _sector_of(domain):
    d = domain.base if isinstance(domain, geo.Window) else domain
    if not isinstance(d, geo.Sector):
        raise ConfigError("initial", "sector_mode needs a sector domain")
    return d


def build_initial(spec: dict, domain):
    kind = spec["kind"]
    amp = spec.get("amplitude", 1.0)
    scale = spec.get("scale", 1.0)
    if kind == "strip_sine":
        return lambda X: amp * heat_reference(X[:, 0], 0.0)
    if kind == "gaussian":
        ts = spec.get("t_shift", 0.05)
        return lambda X: amp * heat_reference(X, 0.0, "gaussian", t_shift=ts)
    if kind == "distance":
        return lambda X: amp * np.maximum(0.0, -domain.sd(X)) / scale
    if kind == "distance_wave":
        def f(X):
            phase = 7 * X[:, 0] / scale + (3 * X[:, 1] / scale if X.shape[1] > 1 else 0.0)
            return amp * np.maximum(0.0, -domain.sd(X)) / scale * (1.5 + np.sin(phase))
        return f
    if kind == "sector_mode":
        sec = _sector_of(domain)
        return lambda X: amp * sector_eigenfunction(X, sec.omega, sec.radius)
    return float(spec.get("value", 0.0))


def _initials(cfg, domain):
    specs = cfg.get("initial") or [{"kind": "strip_sine"}]
    return [build_initial(s, domain) for s in specs]


def build_problem(op: dict, initial, seed: int, p=None) -> ProblemSpec:
    kind = op["kind"]
    p = op.get("p") if p is None else p
    try:
        if kind == "heat":
            return ProblemSpec("linear_nondiv", Ellipticity(1.0, 1.0), initial, label="heat")
        ell = Ellipticity(op.get("lam", 1.0), op.get("Lam", 1.0), op.get("a", 0.0), op.get("b", 0.0))
        if kind == "p_laplacian":
            if p is None:
                raise ConfigError("operator.p", "p_laplacian needs p")
            return ProblemSpec("p_laplacian", p=float(p), initial=initial, eps_g=op.get("eps_g", 1e-8),
                               label=f"p_laplacian[{p:g}]")
        if kind == "linear_nondiv":
            coeff = op.get("coeff", "identity")
            cf = CoefficientField("random", seed=seed, cell=op.get("coeff_cell", 0.05)) if coeff == "random" \
                else CoefficientField("identity")
            return ProblemSpec("linear_nondiv", ell, initial, coeff=cf, label=f"linear[{seed}]")
        return ProblemSpec(kind, ell, initial, label=kind)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("operator", str(exc)) from exc


def _grid_hs(grid: dict, r=None) -> list:
    if "r_per_h" in grid:
        if "h" in grid:
            raise ConfigError("grid.r_per_h", "give h or r_per_h, not both")
        if r is None:
            raise ConfigError("grid.r_per_h", "r_per_h needs an estimator radius r")
        return [r / k for k in grid["r_per_h"]]
    if "h" not in grid:
        raise ConfigError("grid.h", "a lattice step is required")
    h = grid["h"]
    return [float(x) for x in h] if isinstance(h, list) else [float(h)]


def _grid_kw(grid: dict, extra_times=()) -> dict:
    kw = {k: grid[k] for k in ("c_cfl", "theta_min", "n_saves", "t_end") if k in grid}
    times = sorted(set(grid.get("save_times", [])) | {float(t) for t in extra_times if t >= 0})
    kw["save_times"] = tuple(times)
    return kw


def _cylinder(cfg, domain):
    grid = _need(cfg, "grid")
    try:
        return geo.Cylinder(domain, float(grid["T"]))
    except ValueError as exc:
        raise ConfigError("grid.T", str(exc)) from exc


def build_members(cfg: dict, domain, cyl, h: float, seed: int, extra_times=(), p=None, heat=False):
    """The family (``[family]`` section) or the single configured member."""
    grid = cfg["grid"]
    inits = _initials(cfg, domain)
    kw = _grid_kw(grid, extra_times)
    if "family" in cfg and not heat:
        fam = cfg["family"]
        ell = Ellipticity(fam.get("lam", 1.0), fam.get("Lam", 1.0), fam.get("a", 0.0))
        if len(inits) < 2:
            raise ConfigError("initial", "a family needs at least two initial data")
        p_list = fam.get("p_list", [1.5, 2.0, 3.0, 4.0]) if p is None else [p]
        return build_family(cyl, h, ell, inits, seed=seed, p_list=p_list, n_linear=fam.get("n_linear", 4),
                            coeff_cell=fam.get("coeff_cell", 0.05), grid_kw=kw,
                            kinds=tuple(fam.get("kinds", ("linear", "extremal", "p"))))
    op = {"kind": "heat"} if heat else _need(cfg, "operator")
    pr = build_problem(op, inits[0], seed, p=p)
    try:
        g = GridSpec(cyl, h, **kw)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from exc
    return [Member(pr, g, seed, pr.label or op["kind"])]


# ---------------------------------------------------------------------------
# solve

def _oracle_values(oracle: dict, domain, X, t):
    kind = oracle["kind"]
    if kind == "strip_sine":
        return heat_reference(X[:, 0], t)
    if kind == "gaussian":
        return heat_reference(X, t, "gaussian", t_shift=oracle.get("t_shift", 0.05))
    sec = _sector_of(domain)
    return sector_eigenfunction(X, sec.omega, sec.radius, t)


def cmd_solve(cfg, seed):
    domain = build_domain(cfg)
    cyl = _cylinder(cfg, domain)
    grid = cfg["grid"]
    out_cfg = cfg.get("output", {})
    backend = grid.get("backend")
    arts, rows, runs = {}, [], []
    oracle = cfg.get("oracle")
    passed = True
    prev = None
    for k, h in enumerate(_grid_hs(grid)):
        (m,) = build_members(cfg, domain, cyl, h, seed)
        f = m.solve(backend)
        run = {"h": h, "dt": f.dt, "nsteps": f.meta["nsteps"], "rate": f.meta["rate"], "sup": f.sup(),
               "min": float(f.values.min()), "backend": f.meta["backend"]}
        err = ratio = None
        if oracle is not None:
            X = f.interior_coords()
            err = max(float(np.max(np.abs(f.interior(j) - _oracle_values(oracle, domain, X, t))))
                      for j, t in enumerate(f.times))
            ratio = prev / err if prev is not None and err > 0 else None
            prev = err
            run["max_error"] = err
            if ratio is not None:
                run["ratio"] = ratio
            if "tolerance" in oracle and not err < oracle["tolerance"]:
                passed = False
        runs.append(run)
        rows.append({"h": repr(h), "dt": repr(f.dt), "nsteps": f.meta["nsteps"], "sup": repr(f.sup()),
                     "max_error": "" if err is None else repr(err), "ratio": "" if ratio is None else repr(ratio)})
        if out_cfg.get("field", True):
            arts[f"field_{k}.bhgf"] = f.to_bytes()
            try:
                arts[f"field_{k}.csv"] = f.to_csv(out_cfg.get("csv_max_rows", 200_000))
            except ValueError:
                pass  # too large for CSV; the binary file carries the data
    report = {"command": "solve", "problem": m.problem.describe(), "runs": runs, "pass": passed,
              "oracle": oracle}
    arts["solve.json"] = json_text(report)
    arts["solve.csv"] = csv_text("solve", ERROR_COLUMNS, rows)
    return passed, arts


# ---------------------------------------------------------------------------
# barrier-verify

def cmd_barrier(cfg, seed):
    b = _need(cfg, "barrier")
    op = cfg.get("operator", {"kind": "extremal_plus"})
    ell = Ellipticity(op.get("lam", 1.0), op.get("Lam", 1.0), op.get("a", 0.0))
    per_unit = b.get("per_unit", 64)
    kind = b["kind"]
    param = b.get("parameter", "calibrate")
    try:
        if kind in ("exp", "power"):
            domain = build_domain(cfg)
            Q = np.asarray(b.get("Q", [0.0] * domain.dim), float)
            s, r = float(b.get("s", 0.0)), float(b.get("r", 0.1))
            xi1, xi2 = geo.xi_points(domain, Q, r)
            T = float(cfg["grid"]["T"]) if "grid" in cfg else max(2 * s, s + r * r)
            if param == "calibrate":
                ck = "exp_alpha" if kind == "exp" else "power_k"
                _, rep = bar.calibrate_exponent(ck, ell, domain, Q, s, r, per_unit, T=T)
            elif kind == "exp":
                rep = bar.verify_differential_inequality(bar.ExpBarrier(xi1, s, r, float(param)),
                                                         geo.lens(domain, Q, s, r), ell,
                                                         "subsolution_of_Lminus", per_unit)
            else:
                rep = bar.verify_differential_inequality(bar.PowerBarrier(xi2, s, r, float(param)),
                                                         bar.power_region(geo.Cylinder(domain, T), Q, s, r),
                                                         ell, "supersolution_of_Lplus", per_unit)
        else:
            theta = float(b.get("theta", math.pi / 4))
            cone = bar.solve_cone_profile(theta, ell, safety=b.get("safety", 0.9))
            if kind == "cone":
                rep = bar.verify_differential_inequality(cone, geo.cone(theta, cone.R0, cone.dim), ell,
                                                         "supersolution_of_Lplus", per_unit)
            else:
                wb = bar.build_wedge_barrier(cone, b.get("r"))
                rep = bar.verify_differential_inequality(wb, wb.region(), ell, "supersolution_of_Lplus", per_unit)
    except (bar.BarrierError, geo.GeometryError) as exc:
        raise ConfigError("barrier", str(exc)) from exc
    d = rep.to_dict()
    row = {"barrier": d["barrier"], "region": d["region"], "parameter": repr(d["parameter"]),
           "min_margin": repr(d["min_margin"]), "argmin": " ".join(repr(v) for v in d["argmin"]),
           "samples": d["samples"], "pass": str(d["pass"]).lower()}
    return rep.passed, {"margins.json": json_text(d), "margins.csv": csv_text("margins", MARGIN_COLUMNS, [row])}


# ---------------------------------------------------------------------------
# estimate / sweep

def _s0(est, r):
    if "s0" in est:
        return float(est["s0"])
    if "s0_per_r2" in est:
        return est["s0_per_r2"] * r * r
    return None


def _needed_times(est, r):
    """Save times the estimator reads, so it never interpolates across coarse slices."""
    s0 = _s0(est, r)
    name = est["estimator"]
    if name == "carleson":
        return (s0 - r * r / 64, s0, s0 + r * r / 64, s0 + 2 * r * r)
    if name in ("holder_decay", "linear_rate") and s0 is not None:
        return (s0,)
    return ()


def _run_estimator(est, members, domain, r, delta):
    name = est["estimator"]
    Q0 = np.asarray(est.get("Q0", [0.0] * domain.dim), float)
    s0 = _s0(est, r)
    if name in ("carleson", "holder_decay", "linear_rate") and s0 is None:
        raise ConfigError("estimate.s0", f"{name} needs s0 or s0_per_r2")
    if name == "carleson":
        return estimate_carleson(members, Q0, s0, r)
    if name == "holder_decay":
        return estimate_holder_decay(members, Q0, s0, r)
    if name == "linear_rate":
        if len(members) != 1:
            raise ConfigError("estimate.estimator", "linear_rate runs on a single member")
        return estimate_linear_rate(members[0], Q0, s0, r, est.get("delta_max", 1 / 32))
    if name == "backward_harnack":
        X0 = est.get("X0")
        return estimate_backward_harnack(members, X0=None if X0 is None else np.asarray(X0, float),
                                         delta=delta, r=r)
    if name == "boundary_harnack_elliptic":
        return estimate_boundary_harnack_elliptic(members, delta)
    x0 = est.get("X0")
    return estimate_interior_harnack(members, est.get("eta", 2.0), est.get("sigma", 0.5), r,
                                     x0=None if x0 is None else np.asarray(x0, float))


def _expected(est, r):
    if est.get("expect") == "backward_heat_closed_form":
        return math.exp(-4 * math.pi ** 2 * r * r)
    return None


def _estimate_series(cfg, seed, r=None, p=None, delta=None, hs=None, heat=False):
    """One estimator on the configured grid series; returns (rows, report, passed)."""
    est = _need(cfg, "estimate")
    domain = build_domain(cfg)
    cyl = _cylinder(cfg, domain)
    r = float(est.get("r", 0.1)) if r is None else r
    delta = float(est.get("delta", 0.1)) if delta is None else delta
    hs = _grid_hs(cfg["grid"], r) if hs is None else hs
    backend = cfg["grid"].get("backend")
    times = _needed_times(est, r)

    def invoke(h):
        members = build_members(cfg, domain, cyl, h, seed, times, p=p, heat=heat)
        for m in members:
            m.solve(backend)
        res = _run_estimator(est, members, domain, r, delta)
        res.meta.setdefault("seed", seed)
        res.meta.setdefault("r", r)
        return res

    expect = _expected(est, r)
    rtol = est.get("rtol", 1e-3)
    try:
        if len(hs) == 3:
            rep = refinement_study(invoke, hs, threshold=est.get("threshold", 0.2))
            rows = rep.csv_rows()
            report = rep.to_dict()
            passed = rep.passed
            final = rep.results[-1]
        elif len(hs) == 1:
            final = invoke(hs[0])
            rows = [final.csv_row(grid=hs[0])]
            report = final.to_dict()
            passed = True
        else:
            raise ConfigError("grid.h", "give one grid or a nested series of three")
    except EstimateError as exc:
        return [], {"error": str(exc), "pass": False}, False
    if expect is not None:
        dev = abs(final.estimate - expect) / expect
        ok = dev < rtol
        report["expectation"] = {"value": expect, "relative_error": dev, "rtol": rtol, "pass": ok}
        passed = passed and ok
        if len(hs) == 1:
            rows = [final.csv_row(deviation=dev, passed=ok, grid=hs[0])]
    report["pass"] = passed = passed and math.isfinite(final.estimate)
    return rows, report, passed


def cmd_estimate(cfg, seed):
    rows, report, passed = _estimate_series(cfg, seed)
    report = {"command": "estimate", "estimator": cfg["estimate"]["estimator"], **report}
    return passed, {"estimate.json": json_text(report), "estimate.csv": csv_text("estimate", CSV_COLUMNS, rows)}


def cmd_sweep(cfg, seed):
    sw = _need(cfg, "sweep")
    _need(cfg, "estimate")
    name = cfg["estimate"]["estimator"]
    param = sw["parameter"]
    all_rows, reports, passed = [], [], True
    cases = [(v, False) for v in sw["values"]]
    if sw.get("heat_row"):
        cases.append(("heat", True))
    for value, heat in cases:
        kw = {}
        if not heat:
            if param == "h":
                kw["hs"] = [float(value)]
            elif param == "seed":
                if int(value) != value or value < 0:
                    raise ConfigError("sweep.values", "seeds must be nonnegative integers")
            else:
                kw[param] = float(value)
        s = int(value) if param == "seed" and not heat else seed
        rows, rep, ok = _estimate_series(cfg, s, heat=heat, **kw)
        passed &= ok
        label = "heat" if heat else repr(float(value))
        reports.append({"value": label, **rep})
        for row in rows or [{c: "" for c in CSV_COLUMNS} | {"theorem": name, "pass": "false"}]:
            all_rows.append({"parameter": param, "value": label, "estimator": name, **row})
    report = {"command": "sweep", "parameter": param, "estimator": name, "cases": reports, "pass": passed}
    return passed, {"sweep.json": json_text(report), "sweep.csv": csv_text("sweep", SWEEP_COLUMNS, all_rows)}


# ---------------------------------------------------------------------------
# report

def cmd_report(cfg, seed, base: Path):
    rep = _need(cfg, "report")
    summary, rows, passed = [], [], True
    columns = ["source", "file"]
    for entry in rep["inputs"]:
        d = Path(entry) if Path(entry).is_absolute() else base / entry
        man_path = d / MANIFEST
        if not man_path.exists():
            raise ConfigError("report.inputs", f"{entry} holds no {MANIFEST}")
        man = json.loads(man_path.read_text(encoding="utf-8"))
        summary.append({"source": entry, "command": man.get("command"), "status": man.get("status"),
                        "exit_code": man.get("exit_code"), "config_sha256": man.get("config_sha256")})
        passed &= man.get("exit_code") == 0
        for f in man.get("files", []):
            if not f["name"].endswith(".csv") or f["name"].startswith("field_"):
                continue
            lines = (d / f["name"]).read_text(encoding="utf-8").splitlines()
            if not lines or not lines[0].startswith("# bhlab-csv"):
                continue
            header = lines[1].split(",")
            columns += [c for c in header if c not in columns]
            for rec in csv.DictReader(lines[1:]):
                rows.append({"source": entry, "file": f["name"], **rec})
    report = {"command": "report", "inputs": summary, "rows": len(rows), "pass": passed}
    return passed, {"report.json": json_text(report), "report.csv": csv_text("report", columns, rows)}



def run_command(command: str, cfg: dict, seed: int, base: Path):
    if command == "solve":
        return cmd_solve(cfg, seed)
    if command == "barrier-verify":
        return cmd_barrier(cfg, seed)
    if command == "estimate":
        return cmd_estimate(cfg, seed)
    if command == "sweep":
        return cmd_sweep(cfg, seed)
    if command == "report":
        return cmd_report(cfg, seed, base)
    raise ConfigError("command", f"unknown command {command!r}")


def code_version() -> str:
    return __version__
