"""Command-line entry point: ``qaap {catalog,norm,classify,convolve,evolve,suite}``.

Exit codes: 0 success / expected verdict, 2 the method says no (verdict
differs from the expected one, or an acceptance criterion failed), 1 the
tool failed (bad input, infeasible window).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import catalog as cat
from .classify import CLASSES, ScanConfig, classify, test_sap_omega, test_sp_sap_omega
from .convolution import CertificationRefused, convolve, exp_kernel, matexp_kernel
from .dichotomy import ContractionError, ConvergenceError
from .report import (dumps, report_render, write_curve_csv, write_json,
                     write_trajectory_csv)
from .signal import Grid, SampledSignal, read_csv, write_csv

EXIT_OK, EXIT_ERROR, EXIT_NO = 0, 1, 2


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    seed: int = 0
    paths: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "ExperimentConfig":
        params, paths = {}, {}
        for k, v in vars(ns).items():
            if k in ("func", "command"):
                continue
            if k in ("signal", "out", "json", "curve_csv", "cert", "matrix") and v is not None:
                paths[k] = str(Path(v).resolve())
            else:
                params[k] = v
        return cls(ns.command, params, getattr(ns, "seed", 0) or 0, paths)

    def record(self) -> dict:
        return {"command": self.command, "params": self.params, "seed": self.seed,
                "paths": self.paths}


def _emit(obj, path: str | None) -> None:
    text = dumps(obj)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_signal(ns) -> SampledSignal:
    if getattr(ns, "signal", None):
        return read_csv(ns.signal, norm=getattr(ns, "norm", "sup") or "sup")
    if getattr(ns, "entry", None):
        e = cat.get(ns.entry)
        w0, w1 = e.window
        t0 = ns.t0 if ns.t0 is not None else w0
        t1 = ns.t1 if ns.t1 is not None else w1
        return e.render(t0, t1, ns.step)
    raise ValueError("give --signal CSV or --entry NAME")


def _add_source(p):
    p.add_argument("--signal", help="signal CSV (header t,v0,...)")
    p.add_argument("--entry", help="catalog entry instead of a CSV")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--norm", choices=["sup", "euclidean"], default="sup")


# ---------------------------------------------------------------------------

def cmd_catalog(ns, cfg) -> int:
    if ns.action == "list":
        rows = {n: {"domain": e.domain, "labels": e.labels, "window": list(e.window),
                    "bound": e.bound} for n, e in cat.CATALOG.items()}
        _emit(rows, ns.json)
        return EXIT_OK
    if not ns.name:
        raise ValueError("catalog render needs an entry name")
    if ns.name == "c0_sequence":
        sig = cat.render_c0(ns.t1 if ns.t1 is not None else 10.0, ns.step, ns.dim)
    else:
        sig = cat.render(ns.name, ns.t0, ns.t1, ns.step)
    out = ns.out or f"{ns.name}.csv"
    write_csv(sig, out)
    _emit({"entry": ns.name, "csv": str(Path(out).resolve()),
           "grid": {"t_start": sig.grid.t_start, "step": sig.grid.step,
                    "count": sig.grid.count}, "config": cfg.record()}, ns.json)
    return EXIT_OK


def cmd_norm(ns, cfg) -> int:
    from .stepanov import StepanovParams, stepanov_metric, stepanov_norm, weyl_distance
    from .signal import sup_norm
    f = _load_signal(ns)
    if ns.metric == "sup":
        val, seq = sup_norm(f), None
    elif ns.metric == "stepanov":
        if ns.tau:
            from .stepanov import shifted_pair
            moved, base = shifted_pair(f, ns.tau)
            val = stepanov_metric(moved, base, StepanovParams(ns.p, ns.l))
        elif ns.l == 1.0:
            val = stepanov_norm(f, ns.p)
        else:
            zero = f.with_values(np.zeros_like(f.values))
            val = stepanov_metric(f, zero, StepanovParams(ns.p, ns.l))
        seq = None
    else:
        ls = ns.l_list or [ns.l]
        est = weyl_distance(f, ns.tau or 0.0, ns.p, ls)
        val, seq = est.estimate, {"l": list(est.windows), "value": list(est.values)}
    _emit({"metric": ns.metric, "value": val, "window_sequence": seq, "p": ns.p,
           "resolution": {"step": f.grid.step, "window": [f.grid.t_start, f.grid.t_end]},
           "config": cfg.record()}, ns.json)
    return EXIT_OK


def cmd_classify(ns, cfg) -> int:
    f = _load_signal(ns)
    if ns.window:
        f = f.restrict(*ns.window)
    if ns.cls in ("SAP", "SP_SAP"):
        if ns.omega is None:
            raise ValueError("SAP tests need --omega")
        far = max(abs(f.grid.t_start), abs(f.grid.t_end))
        Ms = np.geomspace(1.0, max(1.0 + 1e-9, 0.75 * far), 20)
        rep = (test_sap_omega(f, ns.omega, ns.epsilon, Ms) if ns.cls == "SAP" else
               test_sp_sap_omega(f, ns.omega, ns.p, ns.epsilon, Ms))
    else:
        conf = ScanConfig.default(f, ns.epsilon, p=ns.p, omega=ns.omega, tau_max=ns.tau_max)
        anchors = None
        if ns.anchors == "odd":
            anchors = cat.odd_integer_anchors(f.grid.t_start, f.grid.t_end)
        elif ns.anchors == "plateau":
            anchors = cat.plateau_anchors(f.grid.t_start, f.grid.t_end)
        rep = classify(f, conf, ns.cls, anchors=anchors)
    doc = {"report": rep.to_dict(include_curves=ns.full), "config": cfg.record()}
    _emit(doc, ns.json)
    if ns.curve_csv:
        write_curve_csv(rep, ns.curve_csv)
    if ns.expect == "any":
        return EXIT_OK
    return EXIT_OK if rep.verdict == ns.expect else EXIT_NO


def _kernel(spec: str, norm: str):
    kind, _, arg = spec.partition(":")
    if kind == "exp":
        return exp_kernel(float(arg) if arg else 1.0)
    if kind == "matexp":
        path = Path(arg)
        A = json.loads(path.read_text()) if path.suffix == ".json" else np.loadtxt(path, delimiter=",", ndmin=2)
        if isinstance(A, dict):
            A = A["A"]
        return matexp_kernel(np.asarray(A, dtype=float), norm)
    raise ValueError(f"unknown kernel {spec!r}; use exp:LAMBDA or matexp:FILE")


def cmd_convolve(ns, cfg) -> int:
    from .convolution import finite_convolution, infinite_convolution, ConvolutionCertificate, kernel_l1_norm
    f = _load_signal(ns)
    R = _kernel(ns.kernel, f.norm)
    if ns.mode == "finite":
        out = finite_convolution(R, f)
        cert = ConvolutionCertificate("finite", R.name, f.grid.step, kernel_l1_norm(R, norm=f.norm))
    elif ns.mode == "infinite":
        out, cert = infinite_convolution(R, f, ns.tail_tol)
    else:
        out, cert = convolve(R, f, ns.tail_tol)
    write_csv(out, ns.out or "convolution.csv")
    _emit({"certificate": cert.to_dict(), "config": cfg.record(),
           "output": {"t_start": out.grid.t_start, "step": out.grid.step,
                      "count": out.grid.count}}, ns.json)
    return EXIT_OK


def _forcing_signal(spec: str | None, grid: Grid, dim: int) -> SampledSignal:
    if spec is None:
        return SampledSignal(grid, np.zeros((grid.count, dim)),
                             "half_line" if grid.t_start >= 0 else "full_line")
    kind, _, arg = spec.partition(":")
    if kind == "catalog":
        sig = cat.get(arg).render(grid.t_start, grid.t_end, grid.step)
    elif kind == "csv":
        sig = read_csv(arg)
        if sig.grid != grid:
            grid = sig.grid
    else:
        raise ValueError(f"unknown forcing {spec!r}; use catalog:NAME or csv:FILE")
    if sig.dim == 1 and dim > 1:
        sig = sig.with_values(np.repeat(sig.values, dim, axis=1))
    if sig.dim != dim:
        raise ValueError(f"forcing has dimension {sig.dim}, system needs {dim}")
    return sig


def cmd_evolve(ns, cfg) -> int:
    from . import dichotomy as dy
    from .heat import heat_build, heat_solve
    if ns.system == "heat":
        sys_h = heat_build(ns.gamma0, None, ns.modes, ns.grid_points)
        scal = None
        if ns.forcing:
            kind, _, arg = ns.forcing.partition(":")
            if kind != "catalog":
                raise ValueError("heat forcing must be catalog:NAME (time profile)")
            scal = cat.get(arg)
        prof = (lambda x: x * (math.pi - x)) if ns.profile == "parabola" else np.sin
        forcing = None if scal is None else (lambda t, x: np.outer(scal(t), prof(x)))
        u0 = (lambda x: ns.u0_amplitude * np.sin(x)) if ns.u0_amplitude else None
        n_out = int(round(ns.t_end / ns.dt_out)) + 1
        traj = heat_solve(sys_h, forcing, u0, ns.t_end, n_out, cross_validate=ns.cross_validate,
                          dt_split=ns.dt_split)
        write_trajectory_csv(traj.times, traj.grid_values(), ns.out or "trajectory.csv")
        cert = {"M_prime": sys_h.M_prime, "omega": sys_h.omega, "modes": sys_h.N,
                "grid_points": sys_h.N_x, "two_path_gap": traj.discrepancy,
                "highest_mode_decay_at_end": float(traj.truncation_indicator()[-1]),
                "exp_floor": dy.EXP_FLOOR}
        _emit({"certificate": cert, "config": cfg.record()}, ns.json)
        return EXIT_OK

    kind, _, arg = ns.system.partition(":")
    if kind != "diag":
        raise ValueError("system must be heat or diag:FILE")
    spec = json.loads(Path(arg).read_text())
    if "rates" in spec:
        sysd = dy.constant_diagonal(spec["rates"])
    elif "A" in spec:
        sysd = dy.autonomous_system(spec["A"])
    else:
        raise ValueError("system file needs 'rates' or 'A'")
    grid = Grid.from_range(ns.t0, ns.t1, ns.step)
    f = _forcing_signal(ns.forcing, grid, sysd.dim)
    cert = {"M_prime": sysd.M_prime, "omega": sysd.omega, "system": sysd.name}
    if ns.semilinear:
        if ns.lipschitz is None:
            raise ValueError("--semilinear needs --lipschitz")
        L = ns.lipschitz
        tt, fv = f.times, f.values

        def F(t, x):
            g = np.stack([np.interp(t, tt, fv[:, j]) for j in range(sysd.dim)], axis=1)
            return g + L * np.sin(x)

        res = dy.picard_semilinear(sysd, F, L, f.grid, f.domain, x0=ns.x0,
                                   max_iter=ns.max_iter, seed=cfg.seed)
        u = res.solution
        cert["picard"] = res.to_dict()
    elif f.domain == "full_line":
        u, mc = dy.mild_solution_line(sysd, f, ns.tail_tol)
        cert["mild"] = mc.to_dict()
    else:
        x0 = np.zeros(sysd.dim) if ns.x0 is None else np.asarray(ns.x0, dtype=float)
        u = dy.mild_solution_halfline(sysd, x0, f)
    write_csv(u, ns.out or "trajectory.csv")
    _emit({"certificate": cert, "config": cfg.record()}, ns.json)
    return EXIT_OK


def cmd_suite(ns, cfg) -> int:
    from .checks import run_all
    ids = ns.only or None
    results = run_all(ids)
    for r in results:
        sys.stderr.write(r.line() + "\n")
    summary = report_render(results, {"suite": ns.name, "seed": cfg.seed})
    _emit(summary, ns.json or ns.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NO


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qaap", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomised sampling")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", parents=[common], help="list catalog entries or render one to CSV")
    p.add_argument("action", choices=["list", "render"])
    p.add_argument("name", nargs="?")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--dim", type=int, help="truncation dimension for c0_sequence")
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("norm", parents=[common], help="sup, Stepanov or Weyl quantities of a signal")
    _add_source(p)
    p.add_argument("--metric", choices=["sup", "stepanov", "weyl"], default="stepanov")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--l", type=float, default=1.0)
    p.add_argument("--l-list", type=float, nargs="+")
    p.add_argument("--tau", type=float)
    p.add_argument("--json")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("classify", parents=[common], help="class membership evidence")
    _add_source(p)
    p.add_argument("--class", dest="cls", required=True, choices=list(CLASSES) + ["SAP", "SP_SAP"])
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--window", type=float, nargs=2)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--omega", type=float)
    p.add_argument("--tau-max", type=float)
    p.add_argument("--anchors", choices=["none", "odd", "plateau"], default="none")
    p.add_argument("--expect", choices=["supported", "falsified", "inconclusive", "any"],
                   default="supported")
    p.add_argument("--full", action="store_true", help="include per-tau residual curves")
    p.add_argument("--json")
    p.add_argument("--curve-csv")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("convolve", parents=[common], help="finite or infinite convolution with a kernel")
    _add_source(p)
    p.add_argument("--kernel", default="exp:1", help="exp:LAMBDA or matexp:FILE (JSON/CSV)")
    p.add_argument("--mode", choices=["auto", "finite", "infinite"], default="auto")
    p.add_argument("--tail-tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("evolve", parents=[common], help="mild solutions of linear/semilinear problems")
    p.add_argument("--system", required=True, help="heat or diag:FILE (JSON with rates or A)")
    p.add_argument("--gamma0", type=float, default=1.0)
    p.add_argument("--modes", type=int, default=64)
    p.add_argument("--grid-points", type=int, default=257)
    p.add_argument("--profile", choices=["parabola", "sin"], default="parabola")
    p.add_argument("--u0-amplitude", type=float, default=0.0)
    p.add_argument("--forcing", help="catalog:NAME or csv:FILE")
    p.add_argument("--t0", type=float, default=-20.0)
    p.add_argument("--t1", type=float, default=20.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--dt-out", type=float, default=0.1)
    p.add_argument("--dt-split", type=float, default=1e-3)
    p.add_argument("--cross-validate", action="store_true")
    p.add_argument("--tail-tol", type=float, default=1e-6)
    p.add_argument("--x0", type=float, nargs="+")
    p.add_argument("--semilinear", action="store_true")
    p.add_argument("--lipschitz", type=float)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    p.add_argument("name", choices=["paper-checks"])
    p.add_argument("--only", type=int, nargs="+", help="criterion ids")
    p.add_argument("--out", help="summary JSON path (stdout if omitted)")
    p.add_argument("--json")
    p.set_defaults(func=cmd_suite)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.from_args(ns)
        return ns.func(ns, cfg)
    except (ContractionError, CertificationRefused, ConvergenceError) as exc:
        sys.stderr.write(f"refused: {exc}\n")
        return EXIT_NO
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
