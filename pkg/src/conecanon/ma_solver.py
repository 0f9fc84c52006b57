"""Numerical canonical potentials of cones of dimension 2 and 3.

The cone is cut by a slice {w.x = 1}; on the slice chart the potential is
f = F(origin + B y) and solves the reduced Monge-Ampere problem

    (n+1) det(D^2 f - df df / (n+1)) = delta^2 e^{2f}

with f -> +infinity at the boundary. Writing f = -(n+1) log(k |u|) turns this
into the Dirichlet problem |u|^{n+2} det D^2 u = 1, u = 0 on the boundary,
with k = |delta|^{1/(n+1)} / sqrt(n+1). Three discretizations are used:

* n = 1: w = u^2 on an endpoint-aligned grid, -w w'' + w'^2 / 2 = 2.
* n = 2, polyhedral slice: f = -sum log l_a + v with smooth v, solved for v
  with nine-point stencils inside and least-squares cubic fits near the
  boundary.
* n = 2, curved slice: w = u^2, w det D^2 w - adj(D^2 w)(dw, dw) / 2 = 4 with
  four-direction stencils whose boundary arms end exactly on the boundary.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import InterpolatedUnivariateSpline, RectBivariateSpline
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from . import cones
from .barriers import Jet3, PotentialHandle, canonical_residual, transport, orthant_potential
from .cones import bisect_exit
from .errors import NoConvergence, NoInscribedSimplex, NonConvexIterate, NonInteriorPoint, UnliftablePoint

MAX_DIM = 3
# a stalled line search below this residual is rounding error, not failure
STALL_FLOOR = 1e-8
# off-domain lattice nodes this close (in units of h) get smooth extrapolated values
EXTRAPOLATION_BAND = 14
# least-squares cubic stencils near the boundary use at least this many nodes
STENCIL_MIN_NODES = 30


@dataclass
class CrossSectionGrid:
    """Solved lattice on a slice chart.

    ``u`` is stored on the full lattice (zero off the domain) and ``smooth``
    holds the field actually solved for: v in the log form, w = u^2 in the
    power forms.
    """

    cs: cones.CrossSection
    h: float
    axes: list
    mask: np.ndarray
    u: np.ndarray
    smooth: np.ndarray
    form: str
    k: float
    iterations: int
    residual: float
    tol: float
    info: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.cs.n

    @property
    def lattice(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), -1)

    @property
    def nodes(self):
        return self.lattice[self.mask]


def lift_constant(cs):
    return abs(cs.delta) ** (1.0 / (cs.n + 1)) / np.sqrt(cs.n + 1)


# ------------------------------------------------------------------ n = 1


def _interval(cs):
    if cs.facets is not None:
        return float(cs.lo[0]), float(cs.hi[0])
    c = cs.center[None]
    t = bisect_exit(cs.inside, np.repeat(c, 2, 0), np.array([[1.0], [-1.0]]), t_hi=1.0, iters=80)
    return float(cs.center[0] - t[1]), float(cs.center[0] + t[0])


def _newton_ptc(residual, w, tol, max_iter, positive=True):
    """Newton with pseudo-transient continuation; returns (w, iterations, sup residual)."""
    dt = 1e-2
    R, J = residual(w)
    nr = np.linalg.norm(R)
    scale = np.abs(J.diagonal()).max()
    I = sp.identity(len(w), format="csc")
    for it in range(1, max_iter + 1):
        A = (J + I * (scale / dt)).tocsc() if dt < 1e12 else J.tocsc()
        dw = spsolve(A, -R)
        t = 1.0
        while positive and np.any(w + t * dw <= 0) and t > 1e-12:
            t *= 0.5
        wn = w + t * dw
        Rn, Jn = residual(wn)
        nrn = np.linalg.norm(Rn)
        if nrn < nr:
            if t == 1.0:
                dt = min(dt * max(2.0, nr / max(nrn, 1e-300)), 1e13)
            w, R, J, nr = wn, Rn, Jn, nrn
        else:
            dt *= 0.25
            if dt < 1e-14:
                break
        if np.abs(R).max() < tol:
            return w, it, float(np.abs(R).max())
    raise NoConvergence(f"no convergence in {max_iter} iterations (residual {np.abs(R).max():.3g})")


def _solve_1d(cs, h, tol, max_iter):
    a, b = _interval(cs)
    M = int(np.ceil((b - a) / h))
    if M < 6:
        raise NoConvergence(f"only {M - 1} interior nodes; at least 5 are needed")
    he = (b - a) / M
    s = a + he * np.arange(M + 1)
    m = M - 1
    main = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="csr") / he**2
    fwd = (sp.diags([-np.ones(m), np.ones(m - 1)], [0, 1], format="csr")) / he
    bwd = (sp.diags([np.ones(m), -np.ones(m - 1)], [0, -1], format="csr")) / he

    def residual(w):
        d2 = main @ w
        dp, dm = fwd @ w, bwd @ w
        R = -w * d2 + 0.25 * (dp * dp + dm * dm) - 2.0
        J = sp.diags(-d2) - sp.diags(w) @ main + 0.5 * (sp.diags(dp) @ fwd + sp.diags(dm) @ bwd)
        return R, J.tocsr()

    si = s[1:-1]
    w0 = 2.0 * (si - a) * (b - si) / (b - a)
    w, it, res = _newton_ptc(residual, w0, tol, max_iter)
    full = np.r_[0.0, w, 0.0]
    mask = np.zeros(M + 1, bool)
    mask[1:-1] = True
    return [s], mask, full, "power", it, res, {"interval": (a, b)}


# ------------------------------------------------------------------ n = 2


def _lattice(cs, h):
    lo, hi, c = cs.lo, cs.hi, cs.center
    kmin = np.floor((lo - c) / h).astype(int) - 1
    kmax = np.ceil((hi - c) / h).astype(int) + 1
    axes = [c[i] + h * np.arange(kmin[i], kmax[i] + 1) for i in range(2)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    mask = cs.inside(mesh.reshape(-1, 2)).reshape(mesh.shape[:2])
    if min(mask.any(axis=0).sum(), mask.any(axis=1).sum()) < 7:
        raise NoConvergence("fewer than 5 interior nodes per axis")
    return axes, mesh, mask


_MONOMIALS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]


def _log_form_ops(mask, h):
    """Sparse operators for (d/dx, d/dy, d2/dx2, d2/dxdy, d2/dy2) at the inside nodes."""
    nx, ny = mask.shape
    idx = -np.ones(mask.shape, int)
    idx[mask] = np.arange(mask.sum())
    I, Jn = np.nonzero(mask)
    targets = [(1, 1 / h), (2, 1 / h), (3, 2 / h**2), (4, 1 / h**2), (5, 2 / h**2)]
    entries = [([], [], []) for _ in range(5)]
    for r, (i, j) in enumerate(zip(I, Jn)):
        if 0 < i < nx - 1 and 0 < j < ny - 1 and mask[i - 1:i + 2, j - 1:j + 2].all():
            c = lambda a, b: idx[i + a, j + b]
            st = [
                [(c(1, 0), 0.5 / h), (c(-1, 0), -0.5 / h)],
                [(c(0, 1), 0.5 / h), (c(0, -1), -0.5 / h)],
                [(c(1, 0), 1 / h**2), (c(0, 0), -2 / h**2), (c(-1, 0), 1 / h**2)],
                [(c(1, 1), 0.25 / h**2), (c(-1, -1), 0.25 / h**2), (c(1, -1), -0.25 / h**2), (c(-1, 1), -0.25 / h**2)],
                [(c(0, 1), 1 / h**2), (c(0, 0), -2 / h**2), (c(0, -1), 1 / h**2)],
            ]
        else:
            rad = 3
            while True:
                ii, jj = np.mgrid[max(i - rad, 0):min(i + rad + 1, nx), max(j - rad, 0):min(j + rad + 1, ny)]
                m = mask[ii, jj] & ((ii - i) ** 2 + (jj - j) ** 2 <= rad * rad + 0.5)
                if m.sum() >= STENCIL_MIN_NODES:
                    break
                rad += 1
            di, dj = (ii[m] - i).astype(float), (jj[m] - j).astype(float)
            V = np.stack([di**a * dj**b for a, b in _MONOMIALS], 1)
            wt = 1 / (1 + di * di + dj * dj)
            pinv = np.linalg.pinv(V * wt[:, None]) * wt[None, :]
            ids = idx[ii[m], jj[m]]
            st = [[(ids[q], pinv[t, q] * f) for q in range(len(ids))] for t, f in targets]
        for q in range(5):
            for cc, vv in st[q]:
                entries[q][0].append(r)
                entries[q][1].append(cc)
                entries[q][2].append(vv)
    N = len(I)
    return [sp.csr_matrix((v, (r, c)), shape=(N, N)) for r, c, v in entries]


def _solve_log_form(cs, h, tol, max_iter):
    axes, mesh, mask = _lattice(cs, h)
    pts = mesh[mask]
    Dx, Dy, Dxx, Dxy, Dyy = _log_form_ops(mask, h)
    Ac, bc = cs.facets
    r = 1.0 / cs.facet_values(pts)
    fb = np.log(r).sum(axis=1)
    gb = -r @ Ac
    Hb = np.einsum("na,ai,aj->nij", r * r, Ac, Ac)
    rhs = np.log(cs.delta**2 / 3)
    D = sp.diags

    def parts(v):
        gx, gy = gb[:, 0] + Dx @ v, gb[:, 1] + Dy @ v
        a = Hb[:, 0, 0] + Dxx @ v - gx * gx / 3
        c = Hb[:, 1, 1] + Dyy @ v - gy * gy / 3
        e = Hb[:, 0, 1] + Dxy @ v - gx * gy / 3
        return gx, gy, a, c, e

    def residual(v):
        gx, gy, a, c, e = parts(v)
        det = a * c - e * e
        with np.errstate(invalid="ignore"):
            R = np.log(det) - 2 * (fb + v) - rhs
        return R, det, a

    def jacobian(v):
        gx, gy, a, c, e = parts(v)
        det = a * c - e * e
        da = Dxx - D(2 * gx / 3) @ Dx
        dc = Dyy - D(2 * gy / 3) @ Dy
        de = Dxy - D(gy / 3) @ Dx - D(gx / 3) @ Dy
        return (D(1 / det) @ (D(c) @ da + D(a) @ dc - D(2 * e) @ de) - 2 * sp.identity(len(v))).tocsc()

    v = np.zeros(len(pts))
    R0, det0, a0 = residual(v)
    if np.any(det0 <= 0) or np.any(a0 <= 0):
        raise NonConvexIterate("the facet barrier is not convex on the chart")
    v += np.median(R0) / 2
    R, _, _ = residual(v)
    nr = np.linalg.norm(R)
    it = 0
    while np.abs(R).max() >= tol:
        it += 1
        if it > max_iter:
            raise NoConvergence(f"no convergence in {max_iter} iterations (residual {np.abs(R).max():.3g})")
        dv = spsolve(jacobian(v), -R)
        t = 1.0
        while True:
            Rn, dn, an = residual(v + t * dv)
            convex = np.all(dn > 0) and np.all(an > 0)
            if convex and np.linalg.norm(Rn) < nr:
                break
            t *= 0.5
            if t < 1e-8:
                if not convex:
                    raise NonConvexIterate("no Newton step keeps the discrete Hessian positive definite")
                if np.abs(R).max() < STALL_FLOOR:
                    break
                raise NoConvergence(f"line search stalled at residual {np.abs(R).max():.3g}")
        if t < 1e-8:
            break
        v = v + t * dv
        R, nr = Rn, np.linalg.norm(Rn)
    k = lift_constant(cs)
    smooth = np.full(mask.shape, np.nan)
    smooth[mask] = v
    u = np.zeros(mask.shape)
    u[mask] = -np.exp(-(fb + v) / 3) / k
    return axes, mask, u, smooth, "log", it, float(np.abs(R).max())


def _power_form_ops(cs, mesh, mask, h):
    """One-sided and second differences along e1, e2, e1+e2, e1-e2 with exact boundary arms."""
    shape = mask.shape
    flat_mask = mask.reshape(-1)
    idx = -np.ones(flat_mask.size, int)
    idx[flat_mask] = np.arange(flat_mask.sum())
    pts = mesh[mask]
    N = len(pts)
    multi = np.stack(np.nonzero(mask), -1)
    rows = np.arange(N)
    ops = []
    for d in (np.array([1, 0]), np.array([0, 1]), np.array([1, 1]), np.array([1, -1])):
        L = np.linalg.norm(d) * h
        unit = d / np.linalg.norm(d)
        arms, cols = [], []
        for sgn in (1, -1):
            nb = multi + sgn * d
            ok = np.all((nb >= 0) & (nb < np.array(shape)), 1)
            flat = np.full(N, -1)
            flat[ok] = np.ravel_multi_index(tuple(nb[ok].T), shape)
            j = np.where(flat >= 0, idx[np.maximum(flat, 0)], -1)
            arm = np.full(N, L)
            out = j < 0
            if out.any():
                t = bisect_exit(cs.inside, pts[out], np.repeat((sgn * unit)[None], out.sum(), 0), t_hi=L, iters=55)
                arm[out] = t
            arms.append(arm)
            cols.append(j)
        (hp, hm), (jp, jm) = arms, cols

        def mat(wp, w0, wm):
            r = np.concatenate([rows, rows[jp >= 0], rows[jm >= 0]])
            c = np.concatenate([rows, jp[jp >= 0], jm[jm >= 0]])
            v = np.concatenate([w0, wp[jp >= 0], wm[jm >= 0]])
            return sp.csr_matrix((v, (r, c)), shape=(N, N))

        D1 = mat(hm / (hp * (hp + hm)), (hp - hm) / (hp * hm), -hp / (hm * (hp + hm)))
        D2 = mat(2 / (hp * (hp + hm)), -2 / (hp * hm), 2 / (hm * (hp + hm)))
        ops.append((D1, D2))
    return ops


def _power_parts(w, ops):
    P, Q, dP, dQ = [], [], [], []
    D = sp.diags
    for D1, D2 in ops:
        c = D1 @ w
        P.append(D2 @ w)
        dP.append(D2)
        Q.append(c * c)
        dQ.append(D(2 * c) @ D1)
    return P, Q, dP, dQ


def _solve_power_form(cs, h, tol, max_iter):
    axes, mesh, mask = _lattice(cs, h)
    ops = _power_form_ops(cs, mesh, mask, h)
    pts = mesh[mask]
    D = sp.diags

    def residual(w):
        P, Q, dP, dQ = _power_parts(w, ops)
        hxx, hyy, hxy = P[0], P[1], 0.5 * (P[2] - P[3])
        gxx, gyy, gxy = Q[0], Q[1], 0.5 * (Q[2] - Q[3])
        det = hxx * hyy - hxy * hxy
        q = hyy * gxx - 2 * hxy * gxy + hxx * gyy
        R = w * det - 0.5 * q - 4.0
        dhxy = 0.5 * (dP[2] - dP[3])
        dgxy = 0.5 * (dQ[2] - dQ[3])
        ddet = D(hyy) @ dP[0] + D(hxx) @ dP[1] - D(2 * hxy) @ dhxy
        dq = (D(gxx) @ dP[1] + D(hyy) @ dQ[0] - D(2 * gxy) @ dhxy - D(2 * hxy) @ dgxy
              + D(gyy) @ dP[0] + D(hxx) @ dQ[1])
        return R, (D(det) + D(w) @ ddet - 0.5 * dq).tocsr()

    # start from 1 - gauge of the slice about its center, a positive concave guess
    rel = pts - cs.center
    r = np.linalg.norm(rel, axis=1)
    dirs = rel / np.maximum(r, 1e-300)[:, None]
    dirs[r == 0] = (1.0, 0.0)
    reach = bisect_exit(cs.inside, np.repeat(cs.center[None], len(pts), 0), dirs, t_hi=float(np.max(cs.hi - cs.lo)))
    w0 = np.clip(1 - r / reach, 1e-3 * h, None) * float(reach.min())
    w, it, res = _newton_ptc(residual, w0, tol, max_iter)
    P, Q, _, _ = _power_parts(w, ops)
    mxx = P[0] - Q[0] / (2 * w)
    myy = P[1] - Q[1] / (2 * w)
    mxy = 0.5 * (P[2] - P[3]) - 0.25 * (Q[2] - Q[3]) / w
    if np.any(mxx >= 0) or np.any(mxx * myy - mxy * mxy <= 0):
        raise NonConvexIterate("discrete Hessian of u is not positive definite")
    smooth = np.full(mask.shape, np.nan)
    smooth[mask] = w
    u = np.zeros(mask.shape)
    u[mask] = -np.sqrt(w)
    return axes, mask, u, smooth, "power", it, res


def solve_dirichlet_ma(cs, h, tol=1e-10, max_iter=200):
    """Solve the slice Dirichlet problem on a lattice of spacing ``h``."""
    if cs.n + 1 > MAX_DIM:
        raise NotImplementedError("the solver handles cones of dimension 2 and 3")
    if cs.n == 1:
        axes, mask, u_or_w, form, it, res, info = _solve_1d(cs, h, tol, max_iter)
        k = lift_constant(cs)
        return CrossSectionGrid(cs, float(axes[0][1] - axes[0][0]), axes, mask, -np.sqrt(u_or_w) / k,
                                np.where(mask, u_or_w, np.nan), form, k, it, res, tol, info)
    if cs.facets is not None:
        axes, mask, u, smooth, form, it, res = _solve_log_form(cs, h, tol, max_iter)
    else:
        axes, mask, u, smooth, form, it, res = _solve_power_form(cs, h, tol, max_iter)
        u = u / lift_constant(cs)
    return CrossSectionGrid(cs, h, axes, mask, u, smooth, form, lift_constant(cs), it, res, tol)


# ---------------------------------------------------------------- lifting


def _filled_lattice(grid):
    """Smooth field on the full lattice; off-domain nodes get local cubic extrapolations."""
    Z = grid.smooth.copy()
    mesh = grid.lattice
    inside = mesh[grid.mask]
    vals = grid.smooth[grid.mask]
    outside = ~grid.mask
    tree = cKDTree(inside)
    P = mesh[outside]
    dist, nbr = tree.query(P, k=36)
    near = dist[:, 0] <= EXTRAPOLATION_BAND * grid.h
    out = np.empty(len(P))
    for i in np.nonzero(near)[0]:
        d = (inside[nbr[i]] - P[i]) / grid.h
        V = np.stack([d[:, 0] ** a * d[:, 1] ** b for a, b in _MONOMIALS], 1)
        out[i] = np.linalg.lstsq(V, vals[nbr[i]], rcond=None)[0][0]
    out[~near] = vals[nbr[~near, 0]]
    Z[outside] = out
    return Z


def _chart_derivatives(grid):
    """Callable Y -> (f, df, d2f, d3f) for the slice potential on the chart."""
    n = grid.n
    p = (n + 1) / 2
    c0 = -(n + 1) * np.log(grid.k)
    if n == 1:
        spline = InterpolatedUnivariateSpline(grid.axes[0], np.where(grid.mask, grid.smooth, 0.0), k=5)

        def w_jets(Y):
            w, w1, w2, w3 = (spline(Y[:, 0], nu=m) for m in range(4))
            return w, w1[:, None], w2[:, None, None], w3[:, None, None, None]
    else:
        spline = RectBivariateSpline(grid.axes[0], grid.axes[1], _filled_lattice(grid), kx=5, ky=5)

        def w_jets(Y):
            x, y = Y[:, 0], Y[:, 1]
            e = lambda a, b: spline.ev(x, y, dx=a, dy=b)
            w = e(0, 0)
            g = np.stack([e(1, 0), e(0, 1)], 1)
            H = np.empty((len(Y), 2, 2))
            H[:, 0, 0], H[:, 1, 1] = e(2, 0), e(0, 2)
            H[:, 0, 1] = H[:, 1, 0] = e(1, 1)
            T = np.empty((len(Y), 2, 2, 2))
            for a, b, c in itertools.product(range(2), repeat=3):
                s = a + b + c
                T[:, a, b, c] = e(3 - s, s)
            return w, g, H, T

    if grid.form == "log":
        Ac, bc = grid.cs.facets

        def chart(Y):
            r = 1.0 / grid.cs.facet_values(Y)
            v, g, H, T = w_jets(Y)
            return (np.log(r).sum(axis=1) + v, -r @ Ac + g,
                    np.einsum("na,ai,aj->nij", r * r, Ac, Ac) + H,
                    -2 * np.einsum("na,ai,aj,ak->nijk", r**3, Ac, Ac, Ac) + T)
        return chart

    def chart(Y):
        w, g, H, T = w_jets(Y)
        if np.any(w <= 0):
            raise UnliftablePoint("point lies outside the resolved part of the slice")
        a = g / w[:, None]
        B = H / w[:, None, None]
        f1 = -p * a
        f2 = -p * (B - np.einsum("ni,nj->nij", a, a))
        sym = np.einsum("nij,nk->nijk", B, a)
        f3 = -p * (T / w[:, None, None, None] - (sym + sym.transpose(0, 1, 3, 2) + sym.transpose(0, 3, 1, 2))
                   + 2 * np.einsum("ni,nj,nk->nijk", a, a, a))
        return c0 - p * np.log(w), f1, f2, f3

    return chart


@dataclass(eq=False)
class RadialSolution(PotentialHandle):
    """Numerically computed canonical potential, extended from the slice by log-homogeneity."""

    grid: CrossSectionGrid | None = None
    calibrated_k: float = float("nan")

    def jets(self, X):
        try:
            return super().jets(X)
        except NonInteriorPoint as exc:
            raise UnliftablePoint(str(exc)) from None

    def chart_points(self, X):
        return self.grid.cs.to_chart(np.atleast_2d(X))


def lift_to_cone(grid):
    """Log-homogeneous extension F(t p) = F(p) - (n+1) log t of the slice solution."""
    cs = grid.cs
    n = cs.n
    w, B = cs.w, cs.basis
    chart = _chart_derivatives(grid)

    def ev(X):
        s = X @ w
        Y = (X @ B) / s[:, None]
        f, f1, f2, f3 = chart(Y)
        # derivatives of y(x) = B^T x / (w.x) at the slice point p = x / s
        Dy = B.T[None] - np.einsum("na,i->nai", Y, w)
        Dyy = -(np.einsum("ia,j->aij", B, w) + np.einsum("ja,i->aij", B, w))[None] + 2 * np.einsum("na,i,j->naij", Y, w, w)
        sym = np.einsum("ia,j,k->aijk", B, w, w)
        Dyyy = 2 * (sym + sym.transpose(0, 2, 1, 3) + sym.transpose(0, 2, 3, 1))[None] - 6 * np.einsum("na,i,j,k->naijk", Y, w, w, w)
        ww = np.outer(w, w)
        g = np.einsum("na,nai->ni", f1, Dy) - (n + 1) * w
        H = np.einsum("nab,nai,nbj->nij", f2, Dy, Dy) + np.einsum("na,naij->nij", f1, Dyy) + (n + 1) * ww
        cross = np.einsum("nab,naij,nbk->nijk", f2, Dyy, Dy)
        T = (np.einsum("nabc,nai,nbj,nck->nijk", f3, Dy, Dy, Dy)
             + cross + cross.transpose(0, 1, 3, 2) + cross.transpose(0, 3, 2, 1)
             + np.einsum("na,naijk->nijk", f1, Dyyy) - 2 * (n + 1) * np.einsum("ij,k->ijk", ww, w)[None])
        return Jet3(f - (n + 1) * np.log(s), g / s[:, None], H / s[:, None, None] ** 2, T / s[:, None, None, None] ** 3)

    sol = RadialSolution(ev, cs.cone, -float(n + 1), "numeric", grid=grid)
    bary = cs.to_cone(_barycenter(grid)[None])
    res = float(np.exp(sol.jets(bary).log_hessian_det() - 2 * sol.jets(bary).value)[0])
    sol.calibrated_k = grid.k * res ** (-1 / (2 * (n + 1)))
    sol.info = {"k": grid.k, "calibrated_k": sol.calibrated_k, "h": grid.h, "iterations": grid.iterations,
                "solver_residual": grid.residual}
    return sol


def _barycenter(grid):
    return grid.nodes.mean(axis=0) if grid.n > 1 else np.array([np.mean(grid.info["interval"])])


def probe_points(grid, count=200, seed=0, margin=None):
    """Chart points at boundary distance at least ``margin`` (default 5h), as cone points."""
    from .sampling import sample_chart

    cs = grid.cs
    margin = 5 * grid.h if margin is None else margin
    if cs.n == 1:
        a, b = grid.info["interval"]
        Y = np.linspace(a + margin, b - margin, count)[:, None]
    else:
        Y = sample_chart(cs, count, seed=seed, min_dist=margin)
    return cs.to_cone(Y)


def residual_sup(sol, probes):
    """sup |H(F) e^{-2F} - 1| over probe points (cone points or chart points)."""
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    if isinstance(sol, RadialSolution) and P.shape[1] == sol.grid.n:
        P = sol.grid.cs.to_cone(P)
    return float(np.max(canonical_residual(sol, P)))


# ---------------------------------------------------------- sandwich bounds


def simplicial_from_generators(R):
    """Canonical potential of the simplicial cone spanned by the columns of R."""
    return transport(orthant_potential(R.shape[0]), R)


def _boundary_generators(spec, count):
    """Extreme directions on the boundary of a slice, evenly spread by angle."""
    cs = cones.cross_section(spec, cones.validate_proper(spec).witness)
    if spec.dim == 2 or cs.facets is not None:
        return _polyhedral_generators(spec)
    ang = np.linspace(0, 2 * np.pi, count, endpoint=False)
    D = np.stack([np.cos(ang), np.sin(ang)], 1)
    t = bisect_exit(cs.inside, np.repeat(cs.center[None], count, 0), D, t_hi=float(np.max(cs.hi - cs.lo)), iters=80)
    return cs.to_cone(cs.center + t[:, None] * D)


def _polyhedral_generators(spec):
    N = cones.facet_form(spec)
    return cones.extreme_rays(N)


def _dual_generators(spec, count):
    """Boundary rays of the dual cone; each gives a supporting half-space of the cone."""
    N = cones.facet_form(spec)
    if N is not None:
        return N
    return _boundary_generators(cones.dual_cone(spec), count)


def circumscribed_potentials(cone, count=24):
    """Canonical potentials of simplicial cones cut out by triples of supporting half-spaces."""
    d = cone.dim
    normals = _dual_generators(cone, count)
    out = []
    for T in itertools.combinations(range(len(normals)), d):
        Nm = normals[list(T)]
        if abs(np.linalg.det(Nm)) < 1e-12 * np.prod(np.linalg.norm(Nm, axis=1)):
            continue
        out.append(transport(orthant_potential(d), np.linalg.inv(Nm)))
    return out


def sandwich_bounds(cone, x, count=24):
    """(lower, upper) from circumscribed and inscribed simplicial cones.

    A simplicial cone containing the cone has a smaller canonical potential and
    one contained in it has a larger one, so the maximum over circumscribed
    cones and the minimum over inscribed cones bracket F(x).
    """
    x = np.asarray(x, dtype=float)
    d = cone.dim
    if d > MAX_DIM:
        raise NotImplementedError("sandwich bounds are implemented for dimension 2 and 3")
    rays = _boundary_generators(cone, count)
    upper = np.inf
    for T in itertools.combinations(range(len(rays)), d):
        R = rays[list(T)].T
        if abs(np.linalg.det(R)) < 1e-12 * np.prod(np.linalg.norm(R, axis=0)):
            continue
        coef = np.linalg.solve(R, x)
        if coef.min() > 1e-9 * np.abs(coef).max():
            upper = min(upper, float(simplicial_from_generators(R).value(x[None])[0]))
    if not np.isfinite(upper):
        raise NoInscribedSimplex("no inscribed simplicial cone contains the point")
    x1 = x[None]
    lower = max(float(G.value(x1)[0]) for G in circumscribed_potentials(cone, count))
    return lower, upper


# ----------------------------------------------------------------- export


def write_grid_csv(grid, path):
    """Metadata rows prefixed with '#', then one row per lattice node: coordinates, mask, u."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["#w", *map(repr, grid.cs.w.tolist())])
        wr.writerow(["#origin", *map(repr, grid.cs.origin.tolist())])
        for j, col in enumerate(grid.cs.basis.T):
            wr.writerow([f"#basis{j}", *map(repr, col.tolist())])
        wr.writerow(["#h", repr(grid.h)])
        wr.writerow(["#k", repr(grid.k)])
        wr.writerow(["#form", grid.form])
        wr.writerow([*(f"y{i}" for i in range(grid.n)), "inside", "u"])
        mesh = grid.lattice.reshape(-1, grid.n) if grid.n > 1 else grid.axes[0][:, None]
        for y, m, u in zip(mesh, grid.mask.reshape(-1), grid.u.reshape(-1)):
            wr.writerow([*map(repr, y.tolist()), int(m), repr(float(u))])
