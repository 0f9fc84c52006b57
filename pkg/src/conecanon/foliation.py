"""Level sets of the canonical potential as affine spheres, and metrics built from F."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from . import cones
from .errors import ConeError, OutsideRegion, RayMiss


def affine_mean_curvature(n, r, B=1.0):
    """Closed form -(n+1)^{-(n+1)/(n+2)} |B|^{1/(n+2)} e^{2r/(n+2)} of the level set {F = r}.

    Here F is normalized by H(F) = B e^{2F} with homogeneity degree -(n+1).
    """
    return -((n + 1) ** (-(n + 1) / (n + 2))) * abs(B) ** (1 / (n + 2)) * np.exp(2 * r / (n + 2))


def _koszul_up(J):
    ginv = np.linalg.inv(J.hess)
    H = np.einsum("nipq,npq->ni", J.third, ginv)
    return np.einsum("nij,nj->ni", ginv, H), ginv


def equiaffine_data(F, X):
    """Equiaffine normal, ambient form of the equiaffine metric, and mean curvature at level-set points.

    The normal is (1/(n+2)) |alpha|^{-(n+1)/(n+2)} |H(F)|^{1/(n+2)} (alpha H^i - n E^i)
    with H^i the raised Koszul form. The mean curvature is read off from the
    normal through nu = -Lambda E, i.e. Lambda = -F_i nu^i / alpha.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1] - 1
    alpha = F.alpha
    J = F.jets(X)
    Hup, _ = _koszul_up(J)
    detH = np.exp(J.log_hessian_det())
    scale = abs(alpha) ** (-(n + 1) / (n + 2)) * detH ** (1 / (n + 2)) / (n + 2)
    nu = scale[:, None] * (alpha * Hup - n * X)
    lam = -np.einsum("ni,ni->n", J.grad, nu) / alpha
    h = ((n + 1) ** (-1 / (n + 2)) * np.exp(-2 * J.value / (n + 2)))[:, None, None] * (
        J.hess - np.einsum("ni,nj->nij", J.grad, J.grad) / (n + 1))
    return {"nu": nu, "h": h, "Lambda": lam, "value": J.value, "grad": J.grad}


def radial_level_points(F, P, r, tol=1e-13, max_iter=20):
    """Points t p with F(t p) = r along rays through P, by Newton in log t."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    s = np.zeros(len(P))
    for _ in range(max_iter):
        X = np.exp(s)[:, None] * P
        try:
            J = F.jets(X)
        except ConeError as exc:
            raise RayMiss(f"a ray leaves the domain of the potential: {exc}") from None
        slope = np.einsum("ni,ni->n", J.grad, X)
        if not np.all(np.isfinite(J.value)) or np.any(slope >= 0):
            raise RayMiss("a ray does not cross the level set")
        step = (J.value - r) / slope
        s = s - step
        if np.max(np.abs(step)) < tol:
            break
    return np.exp(s)[:, None] * P


@dataclass
class LevelSetMesh:
    level: float
    vertices: np.ndarray
    normals: np.ndarray
    metrics: np.ndarray
    curvature: np.ndarray
    cells: np.ndarray
    level_defect: float
    info: dict = field(default_factory=dict)

    def radial_defect(self):
        """Per-vertex max |nu_i E_j - nu_j E_i| / (|nu| |E|)."""
        W = np.einsum("ni,nj->nij", self.normals, self.vertices)
        W = W - W.transpose(0, 2, 1)
        return np.abs(W).max(axis=(1, 2)) / (np.linalg.norm(self.normals, axis=1) * np.linalg.norm(self.vertices, axis=1))


def _chart_nodes(cs, resolution, margin_frac):
    diam = float(np.max(cs.hi - cs.lo))
    margin = margin_frac * diam
    if cs.n == 1:
        a, b = cs.lo[0] + margin, cs.hi[0] - margin
        Y = np.linspace(a, b, resolution)[:, None]
        cells = np.stack([np.arange(resolution - 1), np.arange(1, resolution)], 1)
        return Y, cells
    axes = [np.linspace(cs.lo[i], cs.hi[i], resolution) for i in range(2)]
    Y = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
    ok = cs.inside(Y)
    ang = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    for d in np.stack([np.cos(ang), np.sin(ang)], 1):
        ok &= cs.inside(Y + margin * d)
    Y = Y[ok]
    if len(Y) < 3:
        raise RayMiss("resolution too coarse for the slice")
    return Y, Delaunay(Y).simplices


def level_set_mesh(F, r, resolution=24, w=None, margin_frac=0.05):
    """Vertices of {F = r} over a lattice on a slice, with per-vertex equiaffine data."""
    spec = F.cone
    if w is None:
        w = cones.validate_proper(spec).witness
    cs = cones.cross_section(spec, w)
    Y, cells = _chart_nodes(cs, resolution, margin_frac)
    V = radial_level_points(F, cs.to_cone(Y), r)
    data = equiaffine_data(F, V)
    n = spec.dim - 1
    return LevelSetMesh(
        r, V, data["nu"], data["h"], data["Lambda"], cells,
        float(np.max(np.abs(data["value"] - r))),
        {"Lambda_closed_form": float(affine_mean_curvature(n, r)), "n": n},
    )


def tangential_pairing(mesh):
    """sup |h(nu, t)| over vertices and tangent vectors t of the level set (h from the ambient form)."""
    worst = 0.0
    for x, nu, h in zip(mesh.vertices, mesh.normals, mesh.metrics):
        grad = -(h @ x)  # h(x, .) is proportional to dF on the level set; use it to build a tangent basis
        basis = np.linalg.svd(grad[None])[2][1:]
        worst = max(worst, float(np.max(np.abs(basis @ h @ nu)) / (np.linalg.norm(nu) * np.abs(h).max())))
    return worst


# ----------------------------------------------------------- product isometry


def product_map(F, X):
    """x -> (e^{-F/(n+1)}, e^{F/(n+1)} x) onto (0, inf) x {F = 0}."""
    X = np.atleast_2d(X)
    n1 = X.shape[1]
    f = F.value(X)
    return np.column_stack([np.exp(-f / n1), np.exp(f / n1)[:, None] * X])


def product_isometry_check(F, samples, step=1e-4):
    """sup over samples of |K - I| in g-orthonormal directions, K the pulled-back product metric.

    The Jacobian of the product map is taken by central differences along
    g-unit directions L^{-T} e_k, which stay inside the Dikin ellipsoid.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    N, d = X.shape
    n = d - 1
    worst = 0.0
    L = np.linalg.cholesky(F.jets(X).hess)
    for i, x in enumerate(X):
        D = np.linalg.inv(L[i]).T
        Jac = np.column_stack([(product_map(F, x + step * v)[0] - product_map(F, x - step * v)[0]) / (2 * step) for v in D.T])
        rho_z = product_map(F, x)[0]
        rho, z = rho_z[0], rho_z[1:]
        Jz = F.jets(z[None])
        h = (n + 1) ** (-1 / (n + 2)) * np.exp(-2 * Jz.value[0] / (n + 2)) * (Jz.hess[0] - np.outer(Jz.grad[0], Jz.grad[0]) / (n + 1))
        K = (n + 1) * (np.outer(Jac[0], Jac[0]) / rho**2 + (n + 1) ** (-(n + 1) / (n + 2)) * Jac[1:].T @ h @ Jac[1:])
        worst = max(worst, float(np.max(np.abs(np.linalg.eigvalsh(K - np.eye(d))))))
    return worst


# ---------------------------------------------------------- derived metrics


@dataclass
class DerivedMetricReport:
    kind: str
    point: np.ndarray
    metric: np.ndarray
    residual: float
    inertia: tuple
    info: dict = field(default_factory=dict)


def _inertia(M):
    ev = np.linalg.eigvalsh(M)
    tol = 1e-12 * np.abs(ev).max()
    return int((ev > tol).sum()), int((ev < -tol).sum())


def psi_rates(t, n, B, C):
    """(psi', psi''/psi') of the first integral psi'^{n+1} = e^{-t}(C - B e^{-t})."""
    gap = C - B * np.exp(-t)
    d1 = (np.exp(-t) * gap) ** (1 / (n + 1))
    return d1, (2 * B * np.exp(-t) - C) / ((n + 1) * gap)


def ma_riemannian_metric(F, B, C, x):
    """Hessian of psi(F) with constant determinant B on {F > log(B/C)}."""
    if B <= 0 or C <= 0:
        raise ValueError("B and C must be positive")
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    J = F.jets(x[None])[0]
    t = float(J.value)
    if t <= np.log(B / C):
        raise OutsideRegion(f"F(x) = {t:.6g} is not above log(B/C) = {np.log(B / C):.6g}")
    d1, ratio = psi_rates(t, n, B, C)
    M = d1 * J.hess + d1 * ratio * np.outer(J.grad, J.grad)
    det = float(np.linalg.det(M))
    radial = float(x @ M @ x)
    return DerivedMetricReport(
        "riemannian", x, M, abs(det - B), _inertia(M),
        {"B": B, "C": C, "psi_dot": d1, "radial": radial,
         "radial_closed_form": (n + 1) * d1 * B / (C * np.exp(t) - B)},
    )


def lorentzian_u(F, x):
    """u = -((n+1)/2) e^{-2F/(n+1)}, whose Hessian has determinant -1 and Lorentzian signature."""
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    J = F.jets(x[None])[0]
    e = np.exp(-2 * J.value / (n + 1))
    K = e * (J.hess - (2 / (n + 1)) * np.outer(J.grad, J.grad))
    return DerivedMetricReport(
        "lorentzian", x, K, abs(float(np.linalg.det(K)) + 1), _inertia(K),
        {"u": float(-(n + 1) / 2 * e)},
    )


def reparametrization_defect(F, samples, rates):
    """sup relative gap between det(psi' g + psi'' dF dF) and psi'^{n+1} (1 + c |dF|^2_g) H(F).

    ``rates`` maps values t to (psi'(t), psi''(t)); c = psi''/psi'.
    """
    X = np.atleast_2d(samples)
    J = F.jets(X)
    d1, d2 = rates(J.value)
    M = d1[:, None, None] * J.hess + d2[:, None, None] * np.einsum("ni,nj->nij", J.grad, J.grad)
    direct = np.linalg.det(M)
    n1 = X.shape[1]
    gn = np.einsum("ni,nij,nj->n", J.grad, np.linalg.inv(J.hess), J.grad)
    formula = d1**n1 * (1 + d2 / d1 * gn) * np.linalg.det(J.hess)
    return float(np.max(np.abs(direct - formula) / np.abs(formula)))


def lagrangian_graph_report(F, samples, rel_step=1e-4):
    """Nondegeneracy, conicity and mean-curvature defect of the graph of -du."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    n1 = X.shape[1]

    def du(P):
        J = F.jets(P)
        return np.exp(-2 * J.value / n1)[:, None] * J.grad

    def logdet(P):
        J = F.jets(P)
        e = np.exp(-2 * J.value / n1)
        K = e[:, None, None] * (J.hess - (2 / n1) * np.einsum("ni,nj->nij", J.grad, J.grad))
        return np.log(np.abs(np.linalg.det(K))), K

    ld, K = logdet(X)
    nondeg = float(np.abs(np.linalg.eigvalsh(K)).min())
    y = -du(X)
    conic = float(np.max(np.linalg.norm(-du(2 * X) - 2 * y, axis=1) / np.linalg.norm(y, axis=1)))
    grad = np.zeros_like(X)
    for k in range(n1):
        step = rel_step * np.linalg.norm(X, axis=1)[:, None] * np.eye(n1)[k]
        grad[:, k] = (logdet(X + step)[0] - logdet(X - step)[0]) / (2 * step[:, k])
    scale = np.linalg.norm(X, axis=1)
    return {"nondegeneracy": nondeg, "conicity": conic,
            "mean_curvature_defect": float(np.max(np.linalg.norm(grad, axis=1) * scale)),
            "det_min": float(np.min(-np.exp(ld))), "det_max": float(np.max(-np.exp(ld)))}


# ------------------------------------------------------------------ export


def write_obj(mesh, path, sidecar=None):
    """OBJ vertices and faces (lines for curves); per-vertex scalars go to the sidecar CSV."""
    with open(path, "w") as fh:
        fh.write(f"# level set F = {mesh.level!r}\n")
        for v in mesh.vertices:
            # OBJ vertices are 3D; curves in the plane get a zero third coordinate
            fh.write("v " + " ".join(repr(float(c)) for c in np.pad(v, (0, max(0, 3 - len(v))))) + "\n")
        tag = "l" if mesh.cells.shape[1] == 2 else "f"
        for c in mesh.cells:
            fh.write(tag + " " + " ".join(str(int(i) + 1) for i in c) + "\n")
    if sidecar:
        radial = mesh.radial_defect()
        with open(sidecar, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["vertex", "Lambda", "radial_defect"])
            for i, (lam, rd) in enumerate(zip(mesh.curvature, radial)):
                wr.writerow([i + 1, repr(float(lam)), repr(float(rd))])
