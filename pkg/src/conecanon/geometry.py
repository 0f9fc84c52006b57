"""Hessian-metric tensors of a potential: Koszul form, Ricci tensors, Pick tensor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateHessian, IllConditionedMetric

COND_MAX = 1e12
FD_STEP = 2e-2


@dataclass
class GeometryReport:
    """Tensor fields at one point; indices are coordinate indices of the cone."""

    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    koszul: np.ndarray
    koszul_fd: np.ndarray
    koszul_discrepancy: float
    kappa: np.ndarray
    kappa_scalar: float
    ricci: np.ndarray
    scalar_curvature: float
    pick: np.ndarray
    pick_norm2: float
    grad_norm2: float
    laplacian: float
    flat_laplacian: float
    cond: float


def _factor(g):
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise DegenerateHessian("metric is not positive definite") from None
    Linv = np.linalg.inv(L)
    return L, Linv, np.einsum("nai,naj->nij", Linv, Linv)


def _koszul(J, ginv):
    return np.einsum("nipq,npq->ni", J.third, ginv)


def _richardson(X, dirs, quantity, levels=3):
    """Richardson-extrapolated directional derivatives of ``quantity``.

    ``dirs`` has shape (N, k, d): k step vectors per point. Central differences
    at fractions 1, 1/2, 1/4 of each step are combined to sixth order.
    Returns the derivatives with shape (N, k, ...), per unit step vector.
    """
    N, d = X.shape
    k = dirs.shape[1]
    fracs = 0.5 ** np.arange(levels)
    offsets = np.concatenate([[f, -f] for f in fracs])
    P = X[:, None, None, :] + offsets[None, None, :, None] * dirs[:, :, None, :]
    Q = quantity(P.reshape(-1, d), np.repeat(np.arange(N), k * 2 * levels))
    Q = Q.reshape((N, k, 2 * levels) + Q.shape[1:])
    table = [(Q[:, :, 2 * j] - Q[:, :, 2 * j + 1]) / (2 * fracs[j]) for j in range(levels)]
    for order in range(1, levels):
        factor = 4.0**order
        table = [(factor * table[j + 1] - table[j]) / (factor - 1) for j in range(len(table) - 1)]
    return table[0]


def geometry_batch(F, X, fd_step=FD_STEP, check_cond=True):
    """All tensors of the Hessian geometry at a batch of points (dict of arrays)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    n = d - 1
    J = F.jets(X)
    g = J.hess
    L, Linv, ginv = _factor(g)
    ev = np.linalg.eigvalsh(g)
    cond = ev[:, -1] / ev[:, 0]
    if check_cond and np.any(cond > COND_MAX):
        raise IllConditionedMetric(f"metric condition number {cond.max():.3g} exceeds {COND_MAX:.0e}")
    T = J.third
    H = _koszul(J, ginv)
    # metric-unit step vectors v_a = fd_step * L^{-T} e_a; derivatives come out whitened
    V = fd_step * Linv.transpose(0, 2, 1)
    dirs = V.transpose(0, 2, 1)

    def logdet(P, owner):
        return np.linalg.slogdet(F.jets(P).hess)[1]

    def koszul_at(P, owner):
        Jp = F.jets(P)
        return np.einsum("mi,mia->ma", _koszul(Jp, np.linalg.inv(Jp.hess)), Linv.transpose(0, 2, 1)[owner])

    H_fd = np.einsum("nij,nj->ni", L, _richardson(X, dirs, logdet)) / fd_step
    dH = _richardson(X, dirs, koszul_at) / fd_step
    kw = -0.5 * (dH + dH.transpose(0, 2, 1))
    kappa = np.einsum("nia,nab,njb->nij", L, kw, L)

    Fup = np.einsum("nipr,nrq->nipq", T, ginv)
    term1 = np.einsum("nipq,njqp->nij", Fup, Fup)
    term2 = np.einsum("nijr,nrp,np->nij", T, ginv, H)
    ricci = 0.25 * (term1 - term2)

    E = np.einsum("nij,nj->ni", g, X)
    sym = (np.einsum("ni,njk->nijk", E, g) + np.einsum("nj,nik->nijk", E, g) + np.einsum("nk,nij->nijk", E, g)) / 3
    pick = T + (6.0 / d) * sym - (4.0 / d**2) * np.einsum("ni,nj,nk->nijk", E, E, E)
    pick_w = np.einsum("nabc,nia,njb,nkc->nijk", pick, Linv, Linv, Linv)

    dF = J.grad
    flat_lap = np.einsum("nij,nij->n", ginv, g)
    return {
        "x": X, "jet": J, "g": g, "L": L, "Linv": Linv, "g_inv": ginv, "cond": cond,
        "koszul": H, "koszul_fd": H_fd, "kappa": kappa,
        "kappa_scalar": np.einsum("nij,nij->n", ginv, kappa),
        "ricci": ricci, "scalar_curvature": np.einsum("nij,nij->n", ginv, ricci),
        "pick": pick, "pick_norm2": (pick_w**2).sum(axis=(1, 2, 3)),
        "grad_norm2": np.einsum("ni,nij,nj->n", dF, ginv, dF),
        "flat_laplacian": flat_lap,
        "laplacian": flat_lap - 0.5 * np.einsum("ni,nij,nj->n", H, ginv, dF),
        "n": n,
    }


def geometry_at(F, x, fd_step=FD_STEP):
    """GeometryReport at a single interior point."""
    G = geometry_batch(F, np.asarray(x, dtype=float)[None], fd_step)
    diff = G["koszul"][0] - G["koszul_fd"][0]
    return GeometryReport(
        point=G["x"][0], g=G["g"][0], g_inv=G["g_inv"][0],
        koszul=G["koszul"][0], koszul_fd=G["koszul_fd"][0],
        koszul_discrepancy=float(np.sqrt(diff @ G["g_inv"][0] @ diff)),
        kappa=G["kappa"][0], kappa_scalar=float(G["kappa_scalar"][0]),
        ricci=G["ricci"][0], scalar_curvature=float(G["scalar_curvature"][0]),
        pick=G["pick"][0], pick_norm2=float(G["pick_norm2"][0]),
        grad_norm2=float(G["grad_norm2"][0]), laplacian=float(G["laplacian"][0]),
        flat_laplacian=float(G["flat_laplacian"][0]), cond=float(G["cond"][0]),
    )


def _gnorm(v, ginv):
    return np.sqrt(np.abs(np.einsum("ni,nij,nj->n", v, ginv, v)))


def _whiten(M, Linv):
    return np.einsum("nia,nab,njb->nij", Linv, M, Linv)


def identity_defects(F, X, G=None):
    """Per-point defects of the canonical-potential identities, in metric-invariant norms.

    Covectors are measured in the dual metric and 2-tensors by the largest
    absolute eigenvalue after whitening, so the numbers do not depend on how
    close a point is to the boundary.
    """
    G = G or geometry_batch(F, X)
    d = G["n"] + 1
    n = G["n"]
    ginv, Linv = G["g_inv"], G["Linv"]
    dF = G["jet"].grad
    A = G["pick"]
    return {
        "grad_norm2": np.abs(G["grad_norm2"] - d),
        "laplacian": np.abs(G["laplacian"]),
        "flat_laplacian": np.abs(G["flat_laplacian"] - d),
        "kappa_einstein": np.abs(np.linalg.eigvalsh(_whiten(G["kappa"] + 2 * G["g"], Linv))).max(axis=1),
        "koszul_canonical": _gnorm(G["koszul"] - 2 * dF, ginv),
        "koszul_fd": _gnorm(G["koszul"] - G["koszul_fd"], ginv),
        "scalar_identity": np.abs(G["scalar_curvature"] - (0.25 * G["pick_norm2"] - n * (n - 1) / (n + 1))),
        "pick_trace": _gnorm(np.einsum("nijk,njk->ni", A, ginv), ginv),
        "pick_radial": np.abs(np.linalg.eigvalsh(_whiten(np.einsum("nijk,nk->nij", A, G["x"]), Linv))).max(axis=1),
    }


@dataclass
class CurvatureReport:
    max_eigenvalue: float
    min_eigenvalue: float
    lower_bound: float
    lower_violation: float
    upper_violation: float
    pick_max: float
    pick_bound: float
    pick_violation: float
    scalar_min: float
    scalar_max: float
    count: int
    passed: bool


def curvature_bounds_check(F, samples, tol=1e-8):
    """Ricci pinching and Pick-norm bounds at each sample.

    Eigenvalues are taken of the whitened Ricci tensor L^-1 R L^-T, which must
    lie in [-(n-1)/(n+1), 0]; the sharper lower bound R >= -(n-1)/(n+1) (g - dF dF/(n+1))
    is tested on its whitened difference. Violations are reported relative to
    1 + cond(g), so ``tol`` is compared against condition-scaled values.
    """
    G = geometry_batch(F, samples)
    n = G["n"]
    c = (n - 1) / (n + 1)
    Linv = G["Linv"]
    W = _whiten(G["ricci"], Linv)
    ev = np.linalg.eigvalsh(W)
    f = np.einsum("nij,nj->ni", Linv, G["jet"].grad)
    I = np.eye(n + 1)
    lower = W + c * (I[None] - np.einsum("ni,nj->nij", f, f) / (n + 1))
    low_ev = np.linalg.eigvalsh(lower)
    pick_bound = 4 * n * (n - 1) / (n + 1)
    # violations are measured in units of tol * (1 + cond(g)) per sample
    unit = 1 + G["cond"]
    lower_violation = float(max(0.0, (-low_ev[:, 0] / unit).max(), ((-c - ev[:, 0]) / unit).max()))
    upper_violation = float(max(0.0, (ev[:, -1] / unit).max()))
    pick = G["pick_norm2"]
    pick_violation = float(max(0.0, ((pick - pick_bound) / unit).max(), (-pick / unit).max()))
    passed = lower_violation <= tol and upper_violation <= tol and pick_violation <= tol
    return CurvatureReport(
        float(ev[:, -1].max()), float(ev[:, 0].min()), -c, lower_violation, upper_violation,
        float(pick.max()), pick_bound, pick_violation, float(G["scalar_curvature"].min()), float(G["scalar_curvature"].max()),
        len(ev), bool(passed),
    )


def harmonicity_check(F, samples):
    """Sups of |Laplacian F|, |flat Laplacian F - (n+1)| and ||dF|^2_g - (n+1)|."""
    G = geometry_batch(F, samples)
    d = G["n"] + 1
    return {
        "laplacian": float(np.abs(G["laplacian"]).max()),
        "flat_laplacian": float(np.abs(G["flat_laplacian"] - d).max()),
        "grad_norm2": float(np.abs(G["grad_norm2"] - d).max()),
    }


SCALAR_COLUMNS = ("kappa_scalar", "scalar_curvature", "pick_norm2", "grad_norm2", "laplacian", "flat_laplacian", "cond")


def scalar_rows(F, samples):
    """One dict per sample with the scalar invariants, for CSV export."""
    G = geometry_batch(F, samples)
    rows = []
    for i, x in enumerate(G["x"]):
        row = {f"x{j}": float(v) for j, v in enumerate(x)}
        row.update({k: float(G[k][i]) for k in SCALAR_COLUMNS})
        rows.append(row)
    return rows
