"""Command-line front end: ``conecanon <command> --spec cone.json ...``.

Exit status is 0 when every checked property holds, 1 when one fails (the
report carries the witness) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction

import numpy as np

from . import certify, cones, duality, foliation, geometry, ipm, suite
from . import ma_solver as ms
from .barriers import canonical_potential, canonical_residual
from .errors import ConeError
from .sampling import sample_cone, sample_domain

USAGE_ERROR = 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ inputs


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _load_spec(path):
    obj = _load_json(path)
    try:
        return cones.from_json(obj)
    except ConeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _vector(text):
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _spacing(text):
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a number or fraction, got {text!r}") from None


def reference_potential(spec, h=1 / 64, anchor=None):
    """Closed form when one exists, otherwise the numerical solution at relative spacing h."""
    try:
        return canonical_potential(spec, anchor)
    except NotImplementedError:
        return suite.numeric_potential(spec, h)


def _samples(F, spec, count, seed, depth):
    if isinstance(F, ms.RadialSolution):
        return ms.probe_points(F.grid, count, seed=seed)
    return sample_cone(spec, count, seed=seed, depth=depth)


# ----------------------------------------------------------------- outputs


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _emit(args, report, lines):
    report = _clean(report)
    report["seed"] = getattr(args, "seed", None)
    if args.json:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if args.json == "-":
            sys.stdout.write(text)
        else:
            with open(args.json, "w") as fh:
                fh.write(text)
    if args.json != "-":
        for line in lines:
            print(line)
    return 0 if report.get("pass", True) else 1


# ---------------------------------------------------------------- commands


def cmd_validate(args):
    spec = _load_spec(args.spec)
    rep = cones.validate_proper(spec)
    report = {"command": "validate", "cone": repr(spec), "pass": rep.proper,
              "witness": None if rep.witness is None else rep.witness, "margin": rep.margin, "reason": rep.reason}
    return _emit(args, report, [f"{spec!r} proper={rep.proper} margin={rep.margin:.6g}" + (f" ({rep.reason})" if rep.reason else "")])


def cmd_potential(args):
    spec = _load_spec(args.spec)
    F = reference_potential(spec, args.h, args.anchor)
    x = args.at
    if len(x) != spec.dim:
        raise UsageError(f"--at needs {spec.dim} coordinates")
    J = F.jets(x[None])[0]
    res = float(canonical_residual(F, x[None])[0])
    report = {"command": "potential", "cone": repr(spec), "point": x, "F": float(J.value), "gradient": J.grad,
              "residual": res, "source": F.label}
    # adding 0.0 prints a zero value without a sign
    return _emit(args, report, [f"F={float(J.value) + 0.0:.15g}", "dF=" + ",".join(f"{g + 0.0:.15g}" for g in J.grad)])


def cmd_geom(args):
    spec = _load_spec(args.spec)
    F = canonical_potential(spec)
    X = sample_cone(spec, args.samples, seed=args.seed, depth=args.depth)
    G = geometry.geometry_batch(F, X)
    d = geometry.identity_defects(F, X, G)
    unit = 1 + G["cond"]
    scaled = {k: float((v / unit).max()) for k, v in d.items()}
    curv = geometry.curvature_bounds_check(F, X, tol=args.tol)
    ok = curv.passed and all(v <= args.tol for v in scaled.values())
    if args.csv:
        rows = geometry.scalar_rows(F, X)
        with open(args.csv, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
            wr.writeheader()
            wr.writerows(rows)
    report = {"command": "geom", "cone": repr(spec), "samples": args.samples, "pass": ok,
              "scaled_defects": scaled, "curvature": vars(curv)}
    lines = [f"{k} {v:.3e}" for k, v in scaled.items()]
    lines.append(f"ricci [{curv.min_eigenvalue:.6f}, {curv.max_eigenvalue:.6f}] bound {curv.lower_bound:.6f} pass={curv.passed}")
    return _emit(args, report, lines)


def cmd_certify(args):
    obj = _load_json(args.spec)
    if args.property == "subsol":
        if "domain" in obj:
            dom = cones.PolyhedralDomain(obj["domain"]["A"], obj["domain"]["b"])
            G = certify.polyhedral_log_barrier(dom)
            X = sample_domain(dom, args.samples, seed=args.seed, depth=args.depth)
        else:
            spec = cones.from_json(obj)
            G = reference_potential(spec, args.h)
            X = _samples(G, spec, args.samples, args.seed, args.depth)
        rep = certify.subsolution_check(G, X, tol=args.tol)
    else:
        spec = cones.from_json(obj)
        F = reference_potential(spec, args.h)
        X = _samples(F, spec, args.samples, args.seed, args.depth)
        if args.property == "sc":
            rep = certify.self_concordance_sup(F, X, dirs_per_sample=args.dirs, seed=args.seed, tol=args.tol)
        elif args.property == "nu":
            rep = certify.barrier_parameter_sup(F, X, dirs=args.dirs, seed=args.seed, tol=args.tol)
        else:
            reps = [certify.schwarz_dominance(F, G, X, tol=args.tol) for G in ms.circumscribed_potentials(spec)]
            rep = max(reps, key=lambda r: r.statistic)
    report = {"command": "certify", **rep.to_dict()}
    return _emit(args, report, [f"{rep.property} statistic={rep.statistic:.12g} threshold={rep.threshold:.12g} "
                                f"count={rep.count} pass={rep.passed}"])


def cmd_solve(args):
    spec = _load_spec(args.spec)
    w = cones.validate_proper(spec).witness
    cs = cones.cross_section(spec, w)
    h = args.h * float(np.max(cs.hi - cs.lo))
    grid = ms.solve_dirichlet_ma(cs, h, tol=args.tol, max_iter=args.max_iter)
    sol = ms.lift_to_cone(grid)
    probes = ms.probe_points(grid, args.samples, seed=args.seed)
    res = ms.residual_sup(sol, probes)
    if args.out:
        ms.write_grid_csv(grid, args.out)
    report = {"command": "solve", "cone": repr(spec), "h": grid.h, "form": grid.form, "iterations": grid.iterations,
              "solver_residual": grid.residual, "residual_sup": res, "k": grid.k, "calibrated_k": sol.calibrated_k,
              "pass": bool(grid.residual <= args.tol)}
    return _emit(args, report, [f"h={grid.h:.6g} form={grid.form} iterations={grid.iterations} "
                                f"solver_residual={grid.residual:.3e} residual_sup={res:.3e}"])


def cmd_dual(args):
    spec = _load_spec(args.spec)
    F = canonical_potential(spec)
    Fd = duality.dual_potential(spec)
    X = sample_cone(spec, args.samples, seed=args.seed, depth=args.depth)
    checks = {
        "identity": lambda: duality.duality_identity_defect(F, Fd, X),
        "roundtrip": lambda: duality.inverse_map_roundtrip(F, Fd, X),
        "isometry": lambda: duality.pullback_isometry_defect(F, Fd, X, seed=args.seed),
    }
    value = checks[args.check]()
    margin = float(duality.dual_margins(F, X).min())
    ok = value <= args.tol and not margin <= 0
    report = {"command": "dual", "cone": repr(spec), "check": args.check, "defect": value,
              "dual_margin_min": margin, "threshold": args.tol, "pass": ok}
    return _emit(args, report, [f"{args.check} defect={value:.3e} dual_margin_min={margin:.3e} pass={ok}"])


def cmd_foliate(args):
    spec = _load_spec(args.spec)
    F = canonical_potential(spec)
    mesh = foliation.level_set_mesh(F, args.level, args.res)
    if args.out:
        side = args.out.rsplit(".", 1)[0] + ".csv"
        foliation.write_obj(mesh, args.out, sidecar=side)
    n = spec.dim - 1
    closed = float(foliation.affine_mean_curvature(n, args.level))
    err = float(np.abs(mesh.curvature - closed).max())
    radial = float(mesh.radial_defect().max())
    ok = err <= 1e-8 and radial <= 1e-10 and mesh.level_defect <= 1e-10
    report = {"command": "foliate", "cone": repr(spec), "level": args.level, "vertices": len(mesh.vertices),
              "Lambda_mean": float(mesh.curvature.mean()), "Lambda_closed_form": closed,
              "Lambda_error": err, "radial_defect": radial, "level_defect": mesh.level_defect, "pass": ok}
    return _emit(args, report, [f"vertices={len(mesh.vertices)} Lambda={mesh.curvature.mean():.12g} "
                                f"closed_form={closed:.12g} radial_defect={radial:.2e}"])


def cmd_ipm(args):
    prog_obj = _load_json(args.prog)
    spec = _load_spec(args.spec) if args.spec else None
    try:
        program = ipm.ConicProgram.from_json(prog_obj, cone=spec)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{args.prog}: {exc}") from None
    x, trace = ipm.solve_conic(program, eps=args.eps, theta=args.theta)
    if args.trace:
        trace.write_csv(args.trace)
    ok = trace.gap_bound <= args.eps and trace.iterations <= trace.iteration_bound
    report = {"command": "ipm", "x": x, "objective": float(program.c @ x), "gap_bound": trace.gap_bound,
              "nu": trace.nu, "iterations": trace.iterations, "iteration_bound": trace.iteration_bound,
              "status": trace.status, "pass": ok}
    return _emit(args, report, [f"objective={float(program.c @ x):.12g} gap_bound={trace.gap_bound:.3e} "
                                f"iterations={trace.iterations}/{trace.iteration_bound}"])


def cmd_suite(args):
    results = suite.run_suite(quick=args.quick, emit=None if args.json == "-" else lambda r: print(r.line(), flush=True))
    ok = all(r.passed for r in results)
    report = {"command": "suite", "quick": args.quick, "criteria": [r.to_dict() for r in results], "pass": ok}
    if args.json:
        report = _clean(report)
        report["seed"] = suite.SEED
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if args.json == "-":
            sys.stdout.write(text)
        else:
            with open(args.json, "w") as fh:
                fh.write(text)
    if args.json != "-":
        print(f"suite {'PASS' if ok else 'FAIL'}: {sum(r.passed for r in results)}/{len(results)} criteria")
    return 0 if ok else 1


# ------------------------------------------------------------------ parser


def build_parser():
    p = argparse.ArgumentParser(prog="conecanon", description="Canonical potentials of proper convex cones.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text, spec=True):
        sp = sub.add_parser(name, help=help_text)
        if spec:
            sp.add_argument("--spec", required=True, help="cone JSON file")
        sp.add_argument("--json", nargs="?", const="-", help="write a JSON report to a file, or stdout without a value")
        sp.set_defaults(func=fn)
        return sp

    def sampling(sp, samples=1000, depth=3.0):
        sp.add_argument("--samples", type=int, default=samples)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--depth", type=float, default=depth, help="boundary depth exponent of the sampler")

    add("validate", cmd_validate, "check that the cone is proper")

    sp = add("potential", cmd_potential, "evaluate F at a point")
    sp.add_argument("--at", type=_vector, required=True)
    sp.add_argument("--anchor", type=_vector, default=None, help="point fixing the additive constant")
    sp.add_argument("--h", type=_spacing, default=1 / 64, help="relative spacing when F is numerical")

    sp = add("geom", cmd_geom, "Hessian-geometry identities and curvature bounds")
    sampling(sp)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--csv", help="per-sample scalar invariants")

    sp = add("certify", cmd_certify, "sampled barrier certificates")
    sp.add_argument("--property", choices=["sc", "nu", "subsol", "dominate"], required=True)
    sampling(sp, samples=10000, depth=6.0)
    sp.add_argument("--dirs", type=int, default=8)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--h", type=_spacing, default=1 / 64, help="relative spacing when F is numerical")

    sp = add("solve", cmd_solve, "numerical canonical potential on a slice")
    sp.add_argument("--h", type=_spacing, default=1 / 64, help="lattice spacing relative to the chart diameter")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=200)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="grid CSV")

    sp = add("dual", cmd_dual, "duality checks for the gradient map")
    sp.add_argument("--check", choices=["identity", "roundtrip", "isometry"], default="identity")
    sampling(sp)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("foliate", cmd_foliate, "level-set mesh with equiaffine data")
    sp.add_argument("--level", type=float, default=0.0)
    sp.add_argument("--res", type=int, default=24)
    sp.add_argument("--out", help="OBJ path; per-vertex scalars go to a CSV next to it")

    sp = add("ipm", cmd_ipm, "short-step interior-point solve", spec=False)
    sp.add_argument("--prog", required=True, help="program JSON with c, A, b and cone")
    sp.add_argument("--spec", help="cone JSON overriding the program's cone")
    sp.add_argument("--eps", type=float, default=1e-8)
    sp.add_argument("--theta", type=float, default=0.1)
    sp.add_argument("--trace", help="per-iteration CSV")

    sp = add("suite", cmd_suite, "acceptance battery", spec=False)
    sp.add_argument("--quick", action="store_true", help="smaller sample counts and coarser grids")
    return p


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"conecanon: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ConeError as exc:
        print(f"conecanon: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())
