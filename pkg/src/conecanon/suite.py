"""Acceptance battery shared by the CLI ``suite`` command and the test suite.

Every criterion is a function returning a CriterionResult. Measured values
are rounded to seven significant digits in reports so that repeated runs
print identical bytes; timings are kept out of the report body.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import certify, cones, duality, foliation, geometry, ipm
from . import ma_solver as ms
from .barriers import canonical_potential, canonical_residual
from .sampling import draw, sample_cone, sample_domain

SEED = 20240611


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict
    seconds: float = 0.0
    time_limit: float | None = None
    notes: list = field(default_factory=list)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        vals = " ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"criterion {self.number:2d} {status} {self.title}: {vals}"

    def to_dict(self):
        return {"criterion": self.number, "title": self.title, "pass": self.passed,
                "measured": {k: _jsonable(v) for k, v in self.measured.items()}, "notes": list(self.notes)}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.7g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.7g}")
    return v


def _timed(fn):
    def run(quick=False):
        t = time.perf_counter()
        res = fn(quick)
        res.seconds = time.perf_counter() - t
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# ------------------------------------------------------------- fixtures


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_matrix(seed, dim, stream=11):
    """A well-conditioned random matrix: identity plus a bounded perturbation."""
    R = draw(seed, stream, 1, lambda g, s: g.uniform(-0.4, 0.4, size=(s, dim * dim)))[0]
    return np.eye(dim) + R.reshape(dim, dim)


def jittered_polygon_cone(seed, sides=6):
    """Cone over a polygon whose vertices sit at jittered regular angles on a circle of radius 0.8."""
    jitter = draw(seed, 13, 1, lambda g, s: g.uniform(-0.25, 0.25, size=(s, sides)))[0]
    ang = 2 * np.pi * np.arange(sides) / sides + jitter
    gens = np.stack([np.ones(sides), 0.8 * np.cos(ang), 0.8 * np.sin(ang)], 1)
    N = np.array([np.cross(gens[i], gens[(i + 1) % sides]) for i in range(sides)])
    N *= np.sign(N @ np.array([1.0, 0.0, 0.0]))[:, None]
    return cones.polyhedral(N)


def closed_form_cones():
    out = [cones.orthant(k) for k in range(2, 7)]
    out += [cones.lorentz(k) for k in range(2, 7)]
    out += [cones.psd(2), cones.psd(3)]
    return out


def residual_cones():
    out = closed_form_cones()
    out.append(cones.product([cones.lorentz(3), cones.orthant(2)]))
    out.append(cones.product([cones.psd(2), cones.lorentz(2)]))
    out.append(cones.linear_image(cones.lorentz(3), random_matrix(SEED, 3)))
    out.append(cones.linear_image(cones.orthant(4), random_matrix(SEED + 1, 4)))
    out.append(cones.linear_image(cones.psd(2), random_matrix(SEED + 2, 3)))
    return out


def numeric_potential(spec, h_rel):
    """Numerical canonical potential on the default slice, lattice spacing h_rel times the chart diameter."""
    cs = cones.cross_section(spec, cones.validate_proper(spec).witness)
    diam = float(np.max(cs.hi - cs.lo))
    return ms.lift_to_cone(ms.solve_dirichlet_ma(cs, h_rel * diam))


def _chart_diameter(sol):
    cs = sol.grid.cs
    return float(np.max(cs.hi - cs.lo))


def _deep_inside(sol, X, margin):
    """Mask of cone points whose slice image has boundary distance >= margin."""
    cs = sol.grid.cs
    Y = cs.to_chart(np.atleast_2d(X))
    if cs.n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        a = np.linspace(0, 2 * np.pi, 32, endpoint=False)
        dirs = np.stack([np.cos(a), np.sin(a)], 1)
    ok = np.ones(len(Y), bool)
    for d in dirs:
        ok &= cs.inside(Y + margin * d)
    return ok


# ----------------------------------------------------------- criteria


@_timed
def closed_form_residual(quick=False):
    """|H(F) e^{-2F} - 1| <= 1e-10 at seeded samples of every closed-form family."""
    count = 200 if quick else 1000
    worst = 0.0
    for spec in residual_cones():
        X = sample_cone(spec, count, seed=SEED, depth=2.0)
        worst = max(worst, float(canonical_residual(canonical_potential(spec), X).max()))
    return CriterionResult(1, "closed-form canonical residual", worst <= 1e-10,
                           {"cones": len(residual_cones()), "samples": count, "residual_sup": worst}, time_limit=10.0)


@_timed
def lorentz_constant(quick=False):
    """F(1, 0) = log 2 on the two-dimensional Lorentz cone."""
    F = canonical_potential(cones.lorentz(2))
    err = abs(float(F.value(np.array([[1.0, 0.0]]))[0]) - math.log(2))
    return CriterionResult(2, "Lorentz(2) constant", err <= 1e-12, {"abs_error": err}, time_limit=1.0)


@_timed
def barrier_certification(quick=False):
    """Self-concordance and barrier-parameter sups over (point, direction) samples."""
    count = 1000 if quick else 10000
    sc_worst, nu_worst = 0.0, 0.0
    ok = True
    for spec in closed_form_cones():
        F = canonical_potential(spec)
        X = sample_cone(spec, count, seed=SEED)
        sc = certify.self_concordance_sup(F, X, dirs_per_sample=8, seed=SEED)
        nu = certify.barrier_parameter_sup(F, X, dirs=8, seed=SEED)
        gap = abs(nu.statistic - spec.dim)
        sc_worst = max(sc_worst, sc.statistic)
        nu_worst = max(nu_worst, gap)
        ok &= sc.statistic <= 1 + 1e-9 and gap <= 1e-6
    return CriterionResult(3, "barrier certification", bool(ok),
                           {"samples": count, "directions": 8, "sc_sup": sc_worst, "nu_gap_max": nu_worst},
                           time_limit=60.0)


def _geometry_cones():
    return closed_form_cones() + [cones.linear_image(cones.orthant(3), random_matrix(SEED, 3))]


@_timed
def geometry_identities(quick=False):
    """Canonical identities of the Hessian geometry; defects scaled by 1 + cond(g)."""
    count = 200 if quick else 1000
    limits = {"grad_norm2": 1e-10, "laplacian": 1e-8, "kappa_einstein": 1e-9,
              "koszul_canonical": 1e-10, "scalar_identity": 1e-8}
    worst = dict.fromkeys(limits, 0.0)
    for spec in _geometry_cones():
        F = canonical_potential(spec)
        X = sample_cone(spec, count, seed=SEED, depth=3.0)
        G = geometry.geometry_batch(F, X)
        d = geometry.identity_defects(F, X, G)
        unit = 1 + G["cond"]
        for k in limits:
            worst[k] = max(worst[k], float((d[k] / unit).max()))
    ok = all(worst[k] <= limits[k] for k in limits)
    return CriterionResult(4, "geometry identities", ok, {"samples": count, **worst})


@_timed
def curvature_bounds(quick=False):
    """Whitened Ricci spectrum in [-(n-1)/(n+1), 0], flat orthants, Lorentz(3) scalar curvature, Pick bound."""
    count = 200 if quick else 1000
    ok = True
    lower_v = upper_v = pick_v = 0.0
    flat = 0.0
    for spec in _geometry_cones():
        F = canonical_potential(spec)
        X = sample_cone(spec, count, seed=SEED, depth=3.0)
        r = geometry.curvature_bounds_check(F, X, tol=1e-8)
        ok &= r.passed
        lower_v, upper_v = max(lower_v, r.lower_violation), max(upper_v, r.upper_violation)
        pick_v = max(pick_v, r.pick_violation)
        if spec.variant == "Orthant":
            flat = max(flat, abs(r.max_eigenvalue), abs(r.min_eigenvalue))
    L3 = canonical_potential(cones.lorentz(3))
    at_axis = abs(geometry.geometry_at(L3, np.array([1.0, 0.0, 0.0])).scalar_curvature + 2 / 3)
    G = geometry.geometry_batch(L3, sample_cone(cones.lorentz(3), count, seed=SEED, depth=3.0))
    scaled = float((np.abs(G["scalar_curvature"] + 2 / 3) / (1 + G["cond"])).max())
    ok = ok and flat <= 1e-10 and at_axis <= 1e-8 and scaled <= 1e-8
    return CriterionResult(5, "curvature bounds", bool(ok),
                           {"lower_violation": lower_v, "upper_violation": upper_v, "pick_violation": pick_v,
                            "flat_eig_max": flat, "lorentz3_scalar_error_at_axis": at_axis,
                            "lorentz3_scalar_error_scaled": scaled})


def polyhedral_examples():
    triangle = cones.PolyhedralDomain([[1, 0], [0, 1], [-1, -1]], [0, 0, 1])
    square = cones.PolyhedralDomain([[1, 0], [-1, 0], [0, 1], [0, -1]], [0, 1, 0, 1])
    corner = cones.PolyhedralDomain([[1, 0], [0, 1], [1, 1]], [0, 0, -1])
    return {"triangle": (triangle, math.log(math.sqrt(3))), "square": (square, math.log(2)),
            "cut_quadrant": (corner, math.log(math.sqrt(2)))}


@_timed
def polyhedral_constants(quick=False):
    """Sharp constants of the log-barrier subsolutions, and the subsolution inequality at samples."""
    count = 200 if quick else 1000
    measured = {}
    ok = True
    for name, (dom, want) in polyhedral_examples().items():
        G = certify.polyhedral_log_barrier(dom)
        err = abs(G.info["c"] - want)
        stat = certify.subsolution_check(G, sample_domain(dom, count, seed=SEED)).statistic
        measured[f"{name}_c_error"] = err
        measured[f"{name}_subsolution_inf"] = stat
        # only the triangle and square constants are acceptance anchors
        ok &= (err <= 1e-9 or name == "cut_quadrant") and stat >= 1 - 1e-9
    return CriterionResult(6, "polyhedral constants", bool(ok), measured)


@_timed
def schwarz_dominance(quick=False):
    """Circumscribed simplicial potentials sit below F; numeric F stays inside the sandwich."""
    count = 300 if quick else 1000
    h_rel = 1 / 32 if quick else 1 / 64
    lorentz = cones.lorentz(3)
    polygon = jittered_polygon_cone(SEED)
    worst_dom = -np.inf
    F = canonical_potential(lorentz)
    X = sample_cone(lorentz, count, seed=SEED, depth=3.0)
    for G in ms.circumscribed_potentials(lorentz, count=8):
        worst_dom = max(worst_dom, certify.schwarz_dominance(F, G, X).statistic)
    Fp = numeric_potential(polygon, h_rel)
    Xp = ms.probe_points(Fp.grid, count, seed=SEED)
    for G in ms.circumscribed_potentials(polygon):
        worst_dom = max(worst_dom, certify.schwarz_dominance(Fp, G, Xp).statistic)
    slack = 0.0
    probes = 10 if quick else 40
    for spec in (lorentz, polygon):
        sol = numeric_potential(spec, h_rel)
        h = sol.grid.h
        P = ms.probe_points(sol.grid, probes, seed=SEED + 1)
        vals = sol.value(P)
        for x, v in zip(P, vals):
            lo, hi = ms.sandwich_bounds(spec, x, count=12)
            slack = max(slack, (lo - v) / h**2, (v - hi) / h**2)
    ok = worst_dom <= 1e-8 and slack <= 10
    return CriterionResult(7, "Schwarz dominance and sandwich", bool(ok),
                           {"dominance_sup": worst_dom, "sandwich_excess_over_h2": slack})


@_timed
def solver_convergence(quick=False):
    """Rotated quadrant convergence order, and the Lorentz(3) disk against its closed form."""
    spec = cones.linear_image(cones.orthant(2), rotation(0.4))
    F = canonical_potential(spec)
    cs = cones.cross_section(spec, cones.validate_proper(spec).witness)
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        sol = ms.lift_to_cone(ms.solve_dirichlet_ma(cs, h))
        P = ms.probe_points(sol.grid, 300, margin=0.1)
        errs.append(float(np.abs(sol.value(P) - F.value(P)).max()))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    disk = cones.lorentz(3)
    dcs = cones.cross_section(disk, np.array([1.0, 0.0, 0.0]))
    h = 2 / 64
    sol = ms.lift_to_cone(ms.solve_dirichlet_ma(dcs, h))
    P = ms.probe_points(sol.grid, 300, seed=SEED, margin=0.1)
    disk_err = float(np.abs(sol.value(P) - canonical_potential(disk).value(P)).max())
    ok = min(orders) >= 1.5 and disk_err <= 1e-2
    return CriterionResult(8, "solver convergence", bool(ok),
                           {"err_h32": errs[0], "err_h64": errs[1], "err_h128": errs[2],
                            "order_min": min(orders), "disk64_error": disk_err}, time_limit=300.0)


def _numeric_duality(spec, h_rel, count):
    """Identity and round-trip defects of numeric potentials on a cone and its dual, with the solver tolerance.

    The tolerance is the larger of the canonical residual at the check points
    and the change of F between lattice spacings 2h and h there.
    """
    dspec = cones.dual_cone(spec)
    F, Fd = numeric_potential(spec, h_rel), numeric_potential(dspec, h_rel)
    F2, Fd2 = numeric_potential(spec, 2 * h_rel), numeric_potential(dspec, 2 * h_rel)
    X = ms.probe_points(F.grid, count, seed=SEED, margin=0.1 * _chart_diameter(F))
    Y = duality.gradient_map(F, X)
    keep = _deep_inside(Fd, Y, 0.1 * _chart_diameter(Fd))
    X, Y = X[keep], Y[keep]
    tol = max(ms.residual_sup(F, X), ms.residual_sup(Fd, Y),
              float(np.abs(F.value(X) - F2.value(X)).max()), float(np.abs(Fd.value(Y) - Fd2.value(Y)).max()))
    return (duality.duality_identity_defect(F, Fd, X), duality.inverse_map_roundtrip(F, Fd, X), tol,
            float(cones.contains(dspec, Y).min()))


@_timed
def duality_checks(quick=False):
    """Closed-form and numeric duality identities, round trips and dual margins."""
    count = 200 if quick else 1000
    ident = rt = 0.0
    margin = np.inf
    for spec in closed_form_cones() + [cones.product([cones.lorentz(3), cones.orthant(2)])]:
        F, Fd = canonical_potential(spec), duality.dual_potential(spec)
        X = sample_cone(spec, count, seed=SEED, depth=3.0)
        ident = max(ident, duality.duality_identity_defect(F, Fd, X))
        rt = max(rt, duality.inverse_map_roundtrip(F, Fd, X))
        margin = min(margin, float(duality.dual_margins(F, X).min()))
    h_rel = 1 / 64 if quick else 1 / 128
    num_id, num_rt, tol, num_margin = _numeric_duality(jittered_polygon_cone(SEED), h_rel, 200 if quick else 400)
    ok = ident <= 1e-10 and rt <= 1e-10 and margin > 0 and num_id <= 10 * tol and num_rt <= 10 * tol and num_margin > 0
    return CriterionResult(9, "duality", bool(ok),
                           {"closed_identity": ident, "closed_roundtrip": rt, "closed_dual_margin_min": margin,
                            "numeric_identity": num_id, "numeric_roundtrip": num_rt, "numeric_tolerance": tol,
                            "numeric_dual_margin_min": num_margin})


def foliation_cones():
    return [cones.orthant(2), cones.lorentz(2), cones.orthant(3), cones.lorentz(3), cones.psd(2)]


@_timed
def foliation_curvature(quick=False):
    """Mean curvature of the level sets at r = 0 and r = 1, and radial equiaffine normals."""
    res = 12 if quick else 24
    base_err = ratio_err = radial = 0.0
    law_err = 0.0
    for spec in foliation_cones():
        F = canonical_potential(spec)
        n = spec.dim - 1
        m0, m1 = foliation.level_set_mesh(F, 0.0, res), foliation.level_set_mesh(F, 1.0, res)
        base_err = max(base_err, float(np.abs(m0.curvature + (n + 1) ** (-(n + 1) / (n + 2))).max()))
        ratio = m1.curvature / m0.curvature
        ratio_err = max(ratio_err, float(np.abs(ratio - math.exp(2 / (n + 1))).max()))
        law_err = max(law_err, float(np.abs(ratio - math.exp(2 / (n + 2))).max()))
        radial = max(radial, float(m0.radial_defect().max()), float(m1.radial_defect().max()))
    ok = base_err <= 1e-8 and ratio_err <= 1e-8 and radial <= 1e-10
    return CriterionResult(10, "foliation mean curvature", bool(ok),
                           {"lambda0_error": base_err, "ratio_error_vs_e^(2/(n+1))": ratio_err,
                            "ratio_error_vs_e^(2/(n+2))": law_err, "radial_defect": radial},
                           notes=["the ratio follows e^(2/(n+2)); see ratio_error_vs_e^(2/(n+2))"])


@_timed
def derived_metrics(quick=False):
    """Lorentzian and Riemannian constant-determinant metrics built from F."""
    count = 100
    lor = 0.0
    inertia_ok = True
    ma_res = 0.0
    ma_ok = True
    exact = foliation.lorentzian_u(canonical_potential(cones.orthant(2)), np.array([1.3, 0.7]))
    exact_err = float(np.abs(exact.metric - np.array([[0.0, -1.0], [-1.0, 0.0]])).max() + exact.residual)
    for spec in closed_form_cones():
        F = canonical_potential(spec)
        n = spec.dim - 1
        X = sample_cone(spec, count, seed=SEED, depth=2.0)
        for x in X:
            r = foliation.lorentzian_u(F, x)
            lor = max(lor, r.residual)
            inertia_ok &= r.inertia in ((n, 1), (1, n))
        # move samples onto levels F in (0, 3], inside the region F > log(B/C) = 0
        target = np.linspace(0.03, 3.0, count)
        Xr = X * np.exp((F.value(X) - target) / (n + 1))[:, None]
        for x in Xr:
            r = foliation.ma_riemannian_metric(F, 1.0, 1.0, x)
            ma_res = max(ma_res, r.residual)
            ma_ok &= r.inertia == (n + 1, 0)
    ok = lor <= 1e-10 and exact_err <= 1e-15 and inertia_ok and ma_res <= 1e-8 and ma_ok
    return CriterionResult(11, "derived Monge-Ampere metrics", bool(ok),
                           {"lorentzian_residual": lor, "orthant_exact_error": exact_err,
                            "lorentzian_inertia_ok": bool(inertia_ok), "riemannian_residual": ma_res,
                            "riemannian_positive": bool(ma_ok)})


@_timed
def interior_point(quick=False):
    """LP and SOCP instances to certified gap 1e-8, with an affinely reparametrized LP."""
    lp = ipm.ConicProgram([1, 0], [[1, 1]], [1], cones.orthant(2))
    socp = ipm.ConicProgram([1, 0], [[0, 1]], [1], cones.lorentz(2))
    M = np.array([[2.0, 1.0], [0.5, 3.0]])
    Minv = np.linalg.inv(M)
    moved = ipm.ConicProgram(np.array([1.0, 0.0]) @ Minv, np.array([[1.0, 1.0]]) @ Minv, [1],
                             cones.linear_image(cones.orthant(2), M))
    x_lp, t_lp = ipm.solve_conic(lp, eps=1e-8)
    x_so, t_so = ipm.solve_conic(socp, eps=1e-8)
    x_mv, t_mv = ipm.solve_conic(moved, eps=1e-8)
    gaps = [t.gap_bound for t in (t_lp, t_so, t_mv)]
    within = all(t.iterations <= t.iteration_bound for t in (t_lp, t_so, t_mv))
    lp_obj, so_obj, mv_obj = float(lp.c @ x_lp), float(socp.c @ x_so), float(moved.c @ x_mv)
    ok = (max(gaps) <= 1e-8 and within and lp_obj - 0.0 <= 1e-8 and abs(so_obj - 1.0) <= 1e-8
          and abs(mv_obj - lp_obj) <= 1e-8)
    return CriterionResult(12, "interior-point solves", bool(ok),
                           {"lp_objective": lp_obj, "socp_objective": so_obj, "moved_objective": mv_obj,
                            "gap_bound_max": max(gaps), "iterations_lp": t_lp.iterations,
                            "iteration_bound_lp": t_lp.iteration_bound, "within_bound": bool(within)},
                           time_limit=10.0)


CRITERIA = [closed_form_residual, lorentz_constant, barrier_certification, geometry_identities, curvature_bounds,
            polyhedral_constants, schwarz_dominance, solver_convergence, duality_checks, foliation_curvature,
            derived_metrics, interior_point]


def run_suite(quick=False, emit=None):
    """Run criteria 1-12 in order; ``emit`` receives each result as it completes."""
    results = []
    for crit in CRITERIA:
        r = crit(quick)
        results.append(r)
        if emit is not None:
            emit(r)
    return results
