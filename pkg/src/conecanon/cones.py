"""Proper convex cones: construction, membership, duals and cross-sections."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionMismatch,
    MalformedSpec,
    SliceUnbounded,
    UnsupportedDual,
)

VARIANTS = ("Orthant", "Lorentz", "PSD", "Polyhedral", "LinearImage", "Product")
POLYHEDRAL_DUAL_CAP = 4


@dataclass(frozen=True, eq=False)
class ConeSpec:
    """Construction tree of a cone in R^dim.

    Only the fields relevant to ``variant`` are populated: ``order`` for PSD,
    ``normals`` for Polyhedral (rows are facet covectors), ``inner`` and ``A``
    for LinearImage, ``factors`` for Product.
    """

    variant: str
    dim: int
    order: int | None = None
    normals: np.ndarray | None = None
    A: np.ndarray | None = None
    inner: ConeSpec | None = None
    factors: tuple = ()

    def __repr__(self):
        if self.variant == "PSD":
            return f"PSD({self.order})"
        if self.variant == "Polyhedral":
            return f"Polyhedral({len(self.normals)} facets in R^{self.dim})"
        if self.variant == "LinearImage":
            return f"LinearImage({self.inner!r})"
        if self.variant == "Product":
            return "Product(" + ", ".join(repr(f) for f in self.factors) + ")"
        return f"{self.variant}({self.dim})"


def orthant(dim):
    if int(dim) < 1:
        raise MalformedSpec("orthant dimension must be positive")
    return ConeSpec("Orthant", int(dim))


def lorentz(dim):
    if int(dim) < 2:
        raise MalformedSpec("Lorentz cone needs dimension >= 2")
    return ConeSpec("Lorentz", int(dim))


def psd(m):
    m = int(m)
    if m < 1:
        raise MalformedSpec("matrix order must be positive")
    return ConeSpec("PSD", m * (m + 1) // 2, order=m)


def polyhedral(normals):
    N = np.array(normals, dtype=float)
    if N.ndim != 2 or N.shape[0] == 0 or not np.all(np.isfinite(N)):
        raise MalformedSpec("normals must be a non-empty finite matrix")
    if np.any(np.linalg.norm(N, axis=1) == 0):
        raise MalformedSpec("zero facet normal")
    N.setflags(write=False)
    return ConeSpec("Polyhedral", N.shape[1], normals=N)


def linear_image(inner, A):
    A = np.array(A, dtype=float)
    if A.shape != (inner.dim, inner.dim) or not np.all(np.isfinite(A)):
        raise MalformedSpec(f"image matrix must be {inner.dim}x{inner.dim}")
    if abs(np.linalg.det(A)) <= 1e-14 * max(1.0, np.abs(A).max()) ** inner.dim:
        raise MalformedSpec("image matrix is singular")
    A.setflags(write=False)
    return ConeSpec("LinearImage", inner.dim, A=A, inner=inner)


def product(factors):
    factors = tuple(factors)
    if not factors:
        raise MalformedSpec("product needs at least one factor")
    return ConeSpec("Product", sum(f.dim for f in factors), factors=factors)


def blocks(spec):
    """Index slices of the factors of a product cone."""
    out, start = [], 0
    for f in spec.factors:
        out.append(slice(start, start + f.dim))
        start += f.dim
    return out


# ---------------------------------------------------------------- JSON


def from_json(obj):
    """Build a ConeSpec from a parsed JSON object or a JSON string."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "variant" not in obj:
        raise MalformedSpec("cone spec must be an object with a 'variant' key")
    v = obj["variant"]
    try:
        if v == "Orthant":
            return orthant(obj["dim"])
        if v == "Lorentz":
            return lorentz(obj["dim"])
        if v == "PSD":
            if "order" in obj:
                return psd(obj["order"])
            dim = int(obj["dim"])
            m = int(round((np.sqrt(8 * dim + 1) - 1) / 2))
            if m * (m + 1) // 2 != dim:
                raise MalformedSpec(f"{dim} is not a triangular number")
            return psd(m)
        if v == "Polyhedral":
            spec = polyhedral(obj["normals"])
            if "dim" in obj and int(obj["dim"]) != spec.dim:
                raise MalformedSpec("dim disagrees with normals")
            return spec
        if v == "LinearImage":
            return linear_image(from_json(obj["inner"]), obj["A"])
        if v == "Product":
            return product([from_json(f) for f in obj["factors"]])
    except KeyError as exc:
        raise MalformedSpec(f"missing field {exc} for variant {v}") from None
    raise MalformedSpec(f"unknown variant {v!r}")


def to_json(spec):
    out = {"variant": spec.variant, "dim": spec.dim}
    if spec.variant == "PSD":
        out["order"] = spec.order
    elif spec.variant == "Polyhedral":
        out["normals"] = spec.normals.tolist()
    elif spec.variant == "LinearImage":
        out["A"] = spec.A.tolist()
        out["inner"] = to_json(spec.inner)
    elif spec.variant == "Product":
        out["factors"] = [to_json(f) for f in spec.factors]
    return out


# ------------------------------------------------------- PSD embedding


def svec_basis(m):
    """Orthonormal basis E_k of symmetric m x m matrices for the trace pairing.

    Ordering is row-major over i <= j; off-diagonal elements carry 1/sqrt(2).
    """
    E = []
    for i in range(m):
        for j in range(i, m):
            B = np.zeros((m, m))
            if i == j:
                B[i, i] = 1.0
            else:
                B[i, j] = B[j, i] = 1 / np.sqrt(2)
            E.append(B)
    return np.array(E)


def smat(v, m):
    """Symmetric matrices from embedded coordinates, batched over leading axes."""
    return np.einsum("...k,kij->...ij", v, svec_basis(m))


def svec(X):
    m = X.shape[-1]
    return np.einsum("...ij,kij->...k", X, svec_basis(m))


# ---------------------------------------------------------- membership


def _margin(spec, X):
    v = spec.variant
    if v == "Orthant":
        return X.min(axis=1)
    if v == "Lorentz":
        return X[:, 0] - np.linalg.norm(X[:, 1:], axis=1)
    if v == "PSD":
        return np.linalg.eigvalsh(smat(X, spec.order))[:, 0]
    if v == "Polyhedral":
        N = spec.normals / np.linalg.norm(spec.normals, axis=1)[:, None]
        return (X @ N.T).min(axis=1)
    if v == "LinearImage":
        return _margin(spec.inner, np.linalg.solve(spec.A, X.T).T)
    if v == "Product":
        return np.min([_margin(f, X[:, s]) for f, s in zip(spec.factors, blocks(spec))], axis=0)
    raise MalformedSpec(f"unknown variant {v!r}")


def contains(spec, x):
    """Signed membership margin: positive inside, negative outside.

    Accepts a single point or an (N, dim) batch.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[-1] != spec.dim:
        raise DimensionMismatch(f"point has {X2.shape[-1]} coordinates, cone has dim {spec.dim}")
    m = spec.margin(X2) if isinstance(spec, PolyhedralDomain) else _margin(spec, X2)
    return float(m[0]) if single else m


# ------------------------------------------------------------ validity


@dataclass
class ValidityReport:
    proper: bool
    witness: np.ndarray | None
    margin: float
    reason: str = ""


def _poly_interior(N):
    """Chebyshev-like interior point of {N x > 0} inside the unit box, with its depth."""
    Nn = N / np.linalg.norm(N, axis=1)[:, None]
    d = N.shape[1]
    res = linprog(
        np.r_[np.zeros(d), -1.0],
        A_ub=np.c_[-Nn, np.ones(len(N))],
        b_ub=np.zeros(len(N)),
        bounds=[(-1, 1)] * d + [(None, 1)],
        method="highs",
    )
    if res.status != 0:
        return None, 0.0
    return res.x[:d], -res.fun


def interior_point(spec):
    """A canonical interior point: all-ones, axis vector, identity, or LP center."""
    v = spec.variant
    if v == "Orthant":
        return np.ones(spec.dim)
    if v == "Lorentz":
        return np.eye(spec.dim)[0]
    if v == "PSD":
        return svec(np.eye(spec.order))
    if v == "Polyhedral":
        x, depth = _poly_interior(spec.normals)
        if x is None or depth <= 1e-12:
            raise MalformedSpec("polyhedral cone has empty interior")
        return x / np.linalg.norm(x)
    if v == "LinearImage":
        return spec.A @ interior_point(spec.inner)
    return np.concatenate([interior_point(f) for f in spec.factors])


def _structural_witness(spec):
    v = spec.variant
    if v in ("Orthant", "Lorentz", "PSD"):
        return interior_point(spec), ""
    if v == "Polyhedral":
        N = spec.normals
        if np.linalg.matrix_rank(N) < spec.dim:
            return None, "facet normals are rank deficient: the cone contains a line"
        x, depth = _poly_interior(N)
        if x is None or depth <= 1e-12:
            return None, "cone has empty interior"
        return (N / np.linalg.norm(N, axis=1)[:, None]).sum(axis=0), ""
    if v == "LinearImage":
        y, why = _structural_witness(spec.inner)
        return (None, why) if y is None else (np.linalg.solve(spec.A.T, y), "")
    parts = []
    for f in spec.factors:
        y, why = _structural_witness(f)
        if y is None:
            return None, why
        parts.append(y)
    return np.concatenate(parts), ""


def validate_proper(spec, margin=1e-9):
    """Decide properness and return an interior dual witness y.

    The witness pairs with every unit generator x of the closed cone as
    y.x >= margin; ``margin`` in the report is the witness's dual-membership
    margin divided by |y|.
    """
    y, why = _structural_witness(spec)
    if y is None:
        return ValidityReport(False, None, float("-inf"), why)
    try:
        m = contains(dual_cone(spec), y) / np.linalg.norm(y)
    except UnsupportedDual:
        m = _lp_dual_margin(spec, y)
    return ValidityReport(bool(m >= margin), y, float(m), "" if m >= margin else "witness too close to dual boundary")


def _lp_dual_margin(spec, y):
    # smallest y.x over unit-1-norm points of a high-dimensional polyhedral cone
    N = spec.normals
    d = spec.dim
    res = linprog(
        np.r_[y, -y],
        A_ub=-np.c_[N, -N],
        b_ub=np.zeros(len(N)),
        A_eq=np.ones((1, 2 * d)),
        b_eq=[1.0],
        bounds=[(0, None)] * (2 * d),
        method="highs",
    )
    return float(res.fun) / np.linalg.norm(y) if res.status == 0 else float("-inf")


# ---------------------------------------------------------------- duals


def extreme_rays(N, tol=1e-10):
    """Unit extreme rays of the closed cone {N x >= 0} by facet-subset enumeration."""
    N = np.asarray(N, dtype=float)
    d = N.shape[1]
    Nn = N / np.linalg.norm(N, axis=1)[:, None]
    rays = []
    for rows in itertools.combinations(range(len(Nn)), d - 1):
        sub = Nn[list(rows)]
        if d > 1 and np.linalg.matrix_rank(sub, tol=1e-9) < d - 1:
            continue
        r = np.linalg.svd(sub)[2][-1] if d > 1 else np.ones(1)
        for s in (r, -r):
            if np.all(Nn @ s >= -tol) and not any(np.allclose(s, q, atol=1e-9) for q in rays):
                rays.append(s / np.linalg.norm(s))
    return np.array(rays)


def dual_cone(spec):
    """Dual cone {y : y.x > 0 for all x in the closure of the cone}."""
    v = spec.variant
    if v in ("Orthant", "Lorentz", "PSD"):
        return spec
    if v == "Polyhedral":
        if spec.dim > POLYHEDRAL_DUAL_CAP:
            raise UnsupportedDual(f"polyhedral duals are limited to dimension <= {POLYHEDRAL_DUAL_CAP}")
        rays = extreme_rays(spec.normals)
        if len(rays) < spec.dim:
            raise UnsupportedDual("cone is not proper; its dual has empty interior")
        return polyhedral(rays)
    if v == "LinearImage":
        return linear_image(dual_cone(spec.inner), np.linalg.inv(spec.A).T)
    return product([dual_cone(f) for f in spec.factors])


def facet_form(spec):
    """Matrix N with cone = {N x > 0} when the cone is polyhedral in disguise, else None."""
    v = spec.variant
    if v == "Orthant":
        return np.eye(spec.dim)
    if v == "Polyhedral":
        return np.array(spec.normals)
    if v == "PSD" and spec.order == 1:
        return np.eye(1)
    if v == "Lorentz" and spec.dim == 2:
        return np.array([[1.0, -1.0], [1.0, 1.0]])
    if v == "LinearImage":
        inner = facet_form(spec.inner)
        return None if inner is None else inner @ np.linalg.inv(spec.A)
    if v == "Product":
        parts = [facet_form(f) for f in spec.factors]
        if any(p is None for p in parts):
            return None
        out = np.zeros((sum(len(p) for p in parts), spec.dim))
        r = 0
        for p, s in zip(parts, blocks(spec)):
            out[r : r + len(p), s] = p
            r += len(p)
        return out
    return None


# -------------------------------------------------------- cross-sections


def bisect_exit(inside, P, D, t_hi=1.0, iters=60):
    """Largest t (to bisection accuracy) with inside(P + t D) along each row.

    ``inside`` maps an (N, k) batch to booleans; P must be inside. Returns the
    last inside parameter, so the returned points are strictly interior.
    """
    P = np.atleast_2d(P)
    D = np.atleast_2d(D)
    hi = np.full(len(P), float(t_hi))
    for _ in range(200):
        still = inside(P + hi[:, None] * D)
        if not still.any():
            break
        hi = np.where(still, 2 * hi, hi)
    else:
        raise SliceUnbounded("ray does not leave the region")
    lo = np.zeros(len(P))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        q = inside(P + mid[:, None] * D)
        lo = np.where(q, mid, lo)
        hi = np.where(q, hi, mid)
    return lo


@dataclass(eq=False)
class CrossSection:
    """Slice {x : w.x = 1} of a cone with the chart x = origin + basis @ y.

    ``origin`` is w/|w|^2 and ``basis`` is an orthonormal basis of the
    complement of w, so the chart is an isometry onto the slice.
    """

    cone: ConeSpec
    w: np.ndarray
    origin: np.ndarray
    basis: np.ndarray
    center: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    facets: tuple | None = None
    n: int = field(init=False)

    def __post_init__(self):
        self.n = self.basis.shape[1]

    @property
    def delta(self):
        """Determinant of the frame [origin, basis] (chart volume factor)."""
        return float(np.linalg.det(np.column_stack([self.origin, self.basis])))

    def to_cone(self, Y):
        Y = np.asarray(Y, dtype=float)
        return self.origin + Y @ self.basis.T

    def to_chart(self, X):
        X = np.asarray(X, dtype=float)
        tau = X @ self.w
        return (X @ self.basis) / tau[..., None]

    def inside(self, Y):
        return contains(self.cone, self.to_cone(np.atleast_2d(Y))) > 0

    def facet_values(self, Y):
        """Affine facet functions l_a(y) = Ac y + bc (polyhedral slices only)."""
        Ac, bc = self.facets
        return np.atleast_2d(Y) @ Ac.T + bc

    def boundary_distance(self, Y, D):
        """Distance from chart points Y to the boundary along unit directions D."""
        return bisect_exit(self.inside, Y, D, t_hi=float(np.max(self.hi - self.lo)))


def _orthonormal_complement(w):
    q = np.linalg.qr(np.column_stack([w, np.eye(len(w))]))[0]
    B = q[:, 1:]
    if np.linalg.det(np.column_stack([w, B])) < 0:
        B[:, 0] = -B[:, 0]
    return B


def cross_section(spec, w):
    """Bounded chart of the slice {w.x = 1}; w must lie inside the dual cone."""
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.dim,):
        raise DimensionMismatch("slice covector has the wrong length")
    if spec.dim < 2:
        raise SliceUnbounded("a one-dimensional cone has a single-point slice")
    try:
        inside_dual = contains(dual_cone(spec), w) > 0
    except UnsupportedDual:
        inside_dual = _lp_dual_margin(spec, w) > 0
    if not inside_dual:
        raise SliceUnbounded("slice covector is not interior to the dual cone")
    origin = w / (w @ w)
    B = _orthonormal_complement(w)
    N = facet_form(spec)
    facets = None
    if N is not None:
        facets = (N @ B, N @ origin)
    cs = CrossSection(spec, w, origin, B, np.zeros(B.shape[1]), np.zeros(B.shape[1]), np.zeros(B.shape[1]), facets)
    n = cs.n
    if facets is not None:
        Ac, bc = facets
        norms = np.linalg.norm(Ac, axis=1)
        res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.c_[-Ac, norms], b_ub=bc,
                      bounds=[(None, None)] * n + [(None, None)], method="highs")
        cs.center = res.x[:n]
        lo, hi = np.zeros(n), np.zeros(n)
        for k in range(n):
            e = np.eye(n)[k]
            lo[k] = linprog(e, A_ub=-Ac, b_ub=bc, bounds=[(None, None)] * n, method="highs").fun
            hi[k] = -linprog(-e, A_ub=-Ac, b_ub=bc, bounds=[(None, None)] * n, method="highs").fun
        cs.lo, cs.hi = lo, hi
        return cs
    x0 = interior_point(spec)
    cs.center = cs.to_chart(x0)
    if n == 1:
        D = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        D = np.stack([np.cos(ang), np.sin(ang)], 1) if n == 2 else np.random.default_rng(0).normal(size=(4000, n))
        D /= np.linalg.norm(D, axis=1)[:, None]
    C = np.repeat(cs.center[None], len(D), 0)
    t = bisect_exit(cs.inside, C, D, t_hi=1.0)
    pts = C + t[:, None] * D
    pad = 2e-3 * t.max()
    cs.lo, cs.hi = pts.min(0) - pad, pts.max(0) + pad
    return cs


# ------------------------------------------------ bounded polyhedral domain


@dataclass(eq=False)
class PolyhedralDomain:
    """Open region {y : A y + b > 0} in R^dim (not a cone)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.array(self.A, dtype=float)
        self.b = np.array(self.b, dtype=float)
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise MalformedSpec("domain needs an (m, n) matrix and m offsets")

    @property
    def dim(self):
        return self.A.shape[1]

    def values(self, Y):
        return np.atleast_2d(Y) @ self.A.T + self.b

    def margin(self, Y):
        return (self.values(Y) / np.linalg.norm(self.A, axis=1)).min(axis=1)

    def chebyshev_center(self, cap=10.0):
        n = self.dim
        norms = np.linalg.norm(self.A, axis=1)
        res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.c_[-self.A, norms], b_ub=self.b,
                      bounds=[(-cap, cap)] * n + [(None, None)], method="highs")
        if res.status != 0 or -res.fun <= 0:
            raise MalformedSpec("polyhedral domain has empty interior")
        return res.x[:n]
