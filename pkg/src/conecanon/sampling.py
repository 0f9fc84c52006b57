"""Counter-based reproducible sampling of interior points.

Every sample index i lives in block i // 256, and each block draws from its
own Philox stream keyed by (seed, block, stream). Results therefore depend
only on the seed and the index range, never on how work is split up.
"""

import numpy as np

from .cones import bisect_exit, contains, cross_section, validate_proper

BLOCK = 256


def block_generator(seed, block, stream=0):
    key = (int(seed) & (2**64 - 1)) | (int(block) << 64) | (int(stream) << 96)
    return np.random.Generator(np.random.Philox(key=key))


def draw(seed, stream, count, fn, start=0):
    """Concatenate per-sample rows produced by ``fn(generator, BLOCK)`` block by block."""
    out = []
    i = start
    stop = start + count
    while i < stop:
        b = i // BLOCK
        rows = fn(block_generator(seed, b, stream), BLOCK)
        lo = i - b * BLOCK
        hi = min(BLOCK, stop - b * BLOCK)
        out.append(rows[lo:hi])
        i = b * BLOCK + hi
    if not out:
        return fn(block_generator(seed, 0, stream), BLOCK)[:0]
    return np.concatenate(out)


def _slice_frame(spec):
    w = validate_proper(spec).witness
    if w is None:
        raise ValueError("cannot sample a cone that is not proper")
    cs = cross_section(spec, w)
    return cs


def sample_cone(spec, count, seed=0, depth=6.0, start=0, stream=0):
    """Interior points biased toward the boundary.

    A random direction in the slice is followed from the slice center to the
    boundary; the point is placed at relative depth 10^-k of the way back, with
    k uniform in [0, depth], then rescaled by a log-uniform factor in [1/e, e].
    """
    cs = _slice_frame(spec)
    d = spec.dim
    n = cs.n

    def rows(gen, size):
        return np.column_stack([
            gen.normal(size=(size, n)),
            gen.uniform(0, 1, size=size),
            gen.uniform(-1, 1, size=size),
        ])

    R = draw(seed, stream, count, rows, start)
    D = R[:, :n] / np.linalg.norm(R[:, :n], axis=1)[:, None]
    k = depth * R[:, n]
    scale = np.exp(R[:, n + 1])
    C = np.repeat(cs.center[None], count, 0)
    T = bisect_exit(cs.inside, C, D, t_hi=float(np.max(cs.hi - cs.lo)))
    Y = C + ((1 - 10.0 ** (-k)) * T)[:, None] * D
    X = cs.to_cone(Y) * scale[:, None]
    return X.reshape(count, d)


def sample_domain(domain, count, seed=0, depth=6.0, start=0, stream=0, cap=20.0):
    """Boundary-biased points of a PolyhedralDomain; rays through unbounded parts are capped."""
    c = domain.chebyshev_center()
    n = domain.dim

    def rows(gen, size):
        return np.column_stack([gen.normal(size=(size, n)), gen.uniform(0, 1, size=size)])

    R = draw(seed, stream, count, rows, start)
    D = R[:, :n] / np.linalg.norm(R[:, :n], axis=1)[:, None]
    k = depth * R[:, n]
    C = np.repeat(c[None], count, 0)
    far = C + cap * D
    bounded = contains(domain, far) <= 0
    T = np.full(count, cap)
    if bounded.any():
        T[bounded] = bisect_exit(lambda P: contains(domain, P) > 0, C[bounded], D[bounded], t_hi=cap)
    return C + ((1 - 10.0 ** (-k)) * T)[:, None] * D


def sample_chart(cs, count, seed=0, min_dist=0.0, start=0, stream=0, max_rounds=200):
    """Uniform chart points whose boundary distance is at least ``min_dist``.

    Distance is tested along 32 directions, which is accurate to a relative
    2e-2 of ``min_dist`` on convex charts.
    """
    n = cs.n
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        a = np.linspace(0, 2 * np.pi, 32, endpoint=False)
        dirs = np.stack([np.cos(a), np.sin(a)], 1)
    got = []
    total = 0
    block_start = start
    for _ in range(max_rounds):
        U = draw(seed, stream, 4 * BLOCK, lambda g, s: g.uniform(0, 1, size=(s, n)), block_start)
        block_start += 4 * BLOCK
        Y = cs.lo + U * (cs.hi - cs.lo)
        ok = cs.inside(Y)
        if min_dist > 0:
            for dv in dirs:
                ok &= cs.inside(Y + min_dist * dv)
        got.append(Y[ok])
        total += ok.sum()
        if total >= count:
            break
    Y = np.concatenate(got)
    if len(Y) < count:
        raise ValueError("chart too thin for the requested boundary distance")
    return Y[:count]


def unit_directions(seed, count, dim, per_sample, stream=1, start=0):
    """Per-sample random unit directions, shape (count, per_sample, dim)."""
    R = draw(seed, stream, count, lambda g, s: g.normal(size=(s, per_sample * dim)), start)
    R = R.reshape(count, per_sample, dim)
    return R / np.linalg.norm(R, axis=2, keepdims=True)
