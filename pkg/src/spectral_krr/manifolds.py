"""Closed-form Laplace-Beltrami spectra on S^1, T^m (m <= 4), S^2 and S^3.

Eigenfunctions are orthonormal with respect to the *unnormalized* volume
measure.  Within-level basis conventions:

circle
    constant 1/sqrt(2 pi), then for each l >= 1: cos(l theta)/sqrt(pi),
    sin(l theta)/sqrt(pi).
torus
    products of circle factors.  Inside a level, nonnegative frequency
    vectors n (|n|^2 = lambda) are taken in lexicographic order and, for
    each n, the cos/sin choices on its nonzero coordinates are taken in
    lexicographic order with cos before sin.
sphere2
    real spherical harmonics for m = -l..l; m < 0 uses sin(|m| phi),
    m > 0 uses cos(m phi), no Condon-Shortley phase.
sphere3
    with x = (sin(chi) w, cos(chi)) for w on S^2, the degree-l space is
    spanned by N_lj sin(chi)^j C_{l-j}^{(j+1)}(cos chi) Y_jm(w) for
    j = 0..l, m = -j..j (in that order), C the Gegenbauer polynomials and
    N_lj the constant making each function unit norm.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidPointError, UnsupportedManifoldError

TWO_PI = 2.0 * math.pi
UNIT_TOL = 1e-12
MAX_TORUS_DIM = 4

_KINDS = ("circle", "torus", "sphere2", "sphere3")


@dataclass(frozen=True)
class SpectralManifold:
    kind: str
    dim: int
    volume: float
    curvature_kappa: float = 0.0
    ricci_lower_K1: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise UnsupportedManifoldError(f"unknown manifold kind {self.kind!r}")
        if self.dim < 1 or self.volume <= 0 or self.curvature_kappa < 0:
            raise UnsupportedManifoldError("need dim >= 1, volume > 0, kappa >= 0")
        if self.kind == "torus" and self.dim > MAX_TORUS_DIM:
            raise UnsupportedManifoldError(
                f"torus dimension {self.dim} > {MAX_TORUS_DIM} is not supported"
            )

    @property
    def name(self):
        return f"torus{self.dim}" if self.kind == "torus" else self.kind

    @property
    def coord_dim(self):
        """Length of the coordinate vector of a point."""
        if self.kind in ("circle", "torus"):
            return self.dim
        return self.dim + 1

    @property
    def is_sphere(self):
        return self.kind in ("sphere2", "sphere3")


def circle():
    return SpectralManifold("circle", 1, TWO_PI, 0.0, 0.0)


def torus(m):
    if not 1 <= int(m) <= MAX_TORUS_DIM:
        raise UnsupportedManifoldError(
            f"torus dimension {m} outside 1..{MAX_TORUS_DIM}"
        )
    return SpectralManifold("torus", int(m), TWO_PI ** int(m), 0.0, 0.0)


def sphere2():
    return SpectralManifold("sphere2", 2, 4.0 * math.pi, 1.0, 0.0)


def sphere3():
    return SpectralManifold("sphere3", 3, 2.0 * math.pi**2, 1.0, 0.0)


def get_manifold(name):
    """Look up a built-in manifold by name (``circle``, ``torusM``, ``sphere2``, ``sphere3``)."""
    name = str(name).strip().lower()
    aliases = {"s1": "circle", "s2": "sphere2", "s3": "sphere3"}
    name = aliases.get(name, name)
    if name == "circle":
        return circle()
    if name == "sphere2":
        return sphere2()
    if name == "sphere3":
        return sphere3()
    if name.startswith("torus"):
        suffix = name[5:].strip("()")
        if suffix.isdigit():
            return torus(int(suffix))
    if name.startswith("t") and name[1:].isdigit():
        return torus(int(name[1:]))
    raise UnsupportedManifoldError(f"unknown manifold {name!r}")


@dataclass(frozen=True)
class EigLevel:
    index: int
    lam: float
    multiplicity: int


# ---------------------------------------------------------------------------
# level enumeration


def _lambda_floor(lambda_max):
    # all built-in eigenvalues are integers
    if lambda_max < 0:
        raise ValueError("lambda_max must be nonnegative")
    if math.isinf(lambda_max):
        raise ValueError("lambda_max must be finite")
    return int(math.floor(lambda_max))


def _max_degree(kind, lam_int):
    """Largest l with lambda(l) <= lam_int for the circle and spheres."""
    if kind == "circle":
        return math.isqrt(lam_int)
    if kind == "sphere2":
        l = (math.isqrt(4 * lam_int + 1) - 1) // 2
        while (l + 1) * (l + 2) <= lam_int:
            l += 1
        return l
    if kind == "sphere3":
        return math.isqrt(lam_int + 1) - 1
    raise AssertionError(kind)


def _degree_lambda(kind, l):
    if kind == "circle":
        return l * l
    if kind == "sphere2":
        return l * (l + 1)
    return l * (l + 2)


def _degree_mult(kind, l):
    if kind == "circle":
        return 1 if l == 0 else 2
    if kind == "sphere2":
        return 2 * l + 1
    return (l + 1) ** 2


@lru_cache(maxsize=64)
def _torus_vectors(m, lam_int):
    """Nonnegative frequency vectors with |n|^2 <= lam_int, ordered by (|n|^2, lex)."""
    J = math.isqrt(lam_int)
    grids = np.indices((J + 1,) * m).reshape(m, -1).T
    sq = (grids**2).sum(axis=1)
    keep = sq <= lam_int
    grids, sq = grids[keep], sq[keep]
    order = np.lexsort(tuple(grids[:, i] for i in range(m - 1, -1, -1)) + (sq,))
    vecs = grids[order]
    vecs.setflags(write=False)
    return vecs


@lru_cache(maxsize=256)
def _levels_cached(manifold, lam_int):
    if manifold.kind == "torus":
        vecs = _torus_vectors(manifold.dim, lam_int)
        sq = (vecs**2).sum(axis=1)
        mult_vec = 2 ** (vecs > 0).sum(axis=1)
        values, starts = np.unique(sq, return_index=True)
        counts = np.add.reduceat(mult_vec, starts)
        return tuple(
            EigLevel(i, float(v), int(c)) for i, (v, c) in enumerate(zip(values, counts))
        )
    L = _max_degree(manifold.kind, lam_int)
    return tuple(
        EigLevel(l, float(_degree_lambda(manifold.kind, l)), _degree_mult(manifold.kind, l))
        for l in range(L + 1)
    )


def list_levels(manifold, lambda_max):
    """All eigen-levels with eigenvalue <= ``lambda_max``, ascending."""
    return list(_levels_cached(manifold, _lambda_floor(lambda_max)))


def levels_up_to_count(manifold, count):
    """The first ``count`` levels (count >= 1)."""
    lam = 0
    while True:
        levels = list_levels(manifold, lam)
        if len(levels) >= count:
            return levels[:count]
        lam = max(2 * lam, 4)


def next_level(manifold, lam):
    """The first level with eigenvalue strictly above ``lam``."""
    cap = max(4.0, 2.0 * lam + 4.0)
    while True:
        above = [lv for lv in list_levels(manifold, cap) if lv.lam > lam]
        if above:
            return above[0]
        cap *= 2


def basis_size(manifold, lambda_max):
    return sum(lv.multiplicity for lv in list_levels(manifold, lambda_max))


def basis_lambdas(manifold, lambda_max):
    """Eigenvalue attached to every basis function, in basis order."""
    levels = list_levels(manifold, lambda_max)
    return np.repeat([lv.lam for lv in levels], [lv.multiplicity for lv in levels])


# ---------------------------------------------------------------------------
# points


def as_points(manifold, X):
    """Validate and canonicalize a batch of points to shape (n, coord_dim).

    Angles are reduced mod 2 pi; sphere points within ``UNIT_TOL`` of unit
    norm are renormalized, others raise :class:`InvalidPointError`.
    """
    X = np.asarray(X, dtype=float)
    d = manifold.coord_dim
    if manifold.kind == "circle":
        if X.ndim == 2 and X.shape[1] == 1:
            pass
        elif X.ndim <= 1:
            X = X.reshape(-1, 1)
        else:
            raise InvalidPointError(f"bad circle point array of shape {X.shape}")
    else:
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != d:
            raise InvalidPointError(
                f"{manifold.name} points need {d} coordinates, got shape {X.shape}"
            )
    if not np.all(np.isfinite(X)):
        raise InvalidPointError("non-finite point coordinates")
    if manifold.is_sphere:
        norms = np.linalg.norm(X, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise InvalidPointError(f"sphere point off the unit sphere by {worst:.3g}")
        return X / norms[:, None]
    return np.mod(X, TWO_PI)


def as_point(manifold, x):
    P = as_points(manifold, x)
    if P.shape[0] != 1:
        raise InvalidPointError("expected a single point")
    return P


def geodesic_distance(manifold, x, y):
    """Geodesic distance between paired points (scalar for single points)."""
    X, Y = as_points(manifold, x), as_points(manifold, y)
    if manifold.is_sphere:
        d = np.arccos(np.clip(np.sum(X * Y, axis=1), -1.0, 1.0))
    else:
        diff = _wrap(X - Y)
        d = np.sqrt(np.sum(diff**2, axis=1))
    return float(d[0]) if d.shape[0] == 1 else d


def _wrap(diff):
    """Map angle differences to [-pi, pi]."""
    return np.abs(np.mod(diff + math.pi, TWO_PI) - math.pi)


def sample_uniform(manifold, n, seed):
    """``n`` i.i.d. points from the normalized volume measure."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if manifold.is_sphere:
        Z = rng.standard_normal((n, manifold.coord_dim))
        return Z / np.linalg.norm(Z, axis=1)[:, None]
    return rng.uniform(0.0, TWO_PI, size=(n, manifold.dim))


# ---------------------------------------------------------------------------
# eigenfunctions


def _circle_factor_table(theta, J):
    """Rows: 1/sqrt(2pi), then cos(j t)/sqrt(pi), sin(j t)/sqrt(pi) for j=1..J."""
    out = np.empty((2 * J + 1, theta.shape[0]))
    out[0] = 1.0 / math.sqrt(TWO_PI)
    if J:
        jt = np.outer(np.arange(1, J + 1), theta)
        out[1::2] = np.cos(jt) / math.sqrt(math.pi)
        out[2::2] = np.sin(jt) / math.sqrt(math.pi)
    return out


def _normalized_legendre(L, x, s):
    """Fully normalized associated Legendre functions.

    Returns ``P[l][m]`` arrays with ``2 pi * int P^2 dx = 1`` for m = 0 and
    the half of that for m > 0, i.e. sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m.
    """
    P = [[None] * (l + 1) for l in range(L + 1)]
    P[0][0] = np.full_like(x, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(1, L + 1):
        P[m][m] = math.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1][m - 1]
    for m in range(0, L):
        P[m + 1][m] = math.sqrt(2 * m + 3) * x * P[m][m]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            P[l][m] = a * (x * P[l - 1][m] - b * P[l - 2][m])
    return P


def _real_sph_harm_blocks(L, U):
    """Real spherical harmonics of unit vectors ``U`` (n, 3), one (2l+1, n) block per l."""
    z = np.clip(U[:, 2], -1.0, 1.0)
    s = np.hypot(U[:, 0], U[:, 1])
    phi = np.arctan2(U[:, 1], U[:, 0])
    P = _normalized_legendre(L, z, s)
    blocks = []
    r2 = math.sqrt(2.0)
    for l in range(L + 1):
        B = np.empty((2 * l + 1, U.shape[0]))
        B[l] = P[l][0]
        for m in range(1, l + 1):
            B[l - m] = r2 * P[l][m] * np.sin(m * phi)
            B[l + m] = r2 * P[l][m] * np.cos(m * phi)
        blocks.append(B)
    return blocks


def _gegenbauer_table(nmax, lam, x):
    C = np.empty((nmax + 1, x.shape[0]))
    C[0] = 1.0
    if nmax >= 1:
        C[1] = 2.0 * lam * x
    for n in range(2, nmax + 1):
        C[n] = (2.0 * x * (n + lam - 1) * C[n - 1] - (n + 2 * lam - 2) * C[n - 2]) / n
    return C


def _gegenbauer_log_norm(n, lam):
    # log of  int_{-1}^{1} (1-x^2)^(lam-1/2) C_n^lam(x)^2 dx
    return (
        math.log(math.pi)
        + (1 - 2 * lam) * math.log(2.0)
        + math.lgamma(n + 2 * lam)
        - math.lgamma(n + 1)
        - math.log(n + lam)
        - 2 * math.lgamma(lam)
    )


def _sphere3_blocks(L, X):
    x4 = np.clip(X[:, 3], -1.0, 1.0)
    r = np.linalg.norm(X[:, :3], axis=1)
    W = np.zeros((X.shape[0], 3))
    W[:, 2] = 1.0
    nz = r > 0
    W[nz] = X[nz, :3] / r[nz, None]
    Y = _real_sph_harm_blocks(L, W)
    gegen = [_gegenbauer_table(L - j, j + 1.0, x4) for j in range(L + 1)]
    blocks = []
    for l in range(L + 1):
        rows = []
        for j in range(l + 1):
            norm = math.exp(-0.5 * _gegenbauer_log_norm(l - j, j + 1.0))
            radial = norm * r**j * gegen[j][l - j]
            rows.append(radial[None, :] * Y[j])
        blocks.append(np.vstack(rows))
    return blocks


def _torus_functions(X, vecs):
    """Rows of product eigenfunctions for the given frequency vectors, in basis order."""
    m = X.shape[1]
    J = int(vecs.max()) if vecs.size else 0
    tables = [_circle_factor_table(X[:, i], J) for i in range(m)]
    rows = []
    for n in vecs:
        nzi = [i for i in range(m) if n[i] > 0]
        base = np.ones(X.shape[0])
        for i in range(m):
            if n[i] == 0:
                base = base * tables[i][0]
        for choice in itertools.product((0, 1), repeat=len(nzi)):
            row = base.copy()
            for i, c in zip(nzi, choice):
                row *= tables[i][2 * n[i] - 1 + c]
            rows.append(row)
    return np.vstack(rows) if rows else np.empty((0, X.shape[0]))


def eigenfunction_matrix(manifold, X, lambda_max):
    """Eigenfunction values at a batch of points, shape (n, basis_size)."""
    X = as_points(manifold, X)
    lam_int = _lambda_floor(lambda_max)
    kind = manifold.kind
    if kind == "circle":
        J = math.isqrt(lam_int)
        return _circle_factor_table(X[:, 0], J).T
    if kind == "torus":
        return _torus_functions(X, _torus_vectors(manifold.dim, lam_int)).T
    L = _max_degree(kind, lam_int)
    if kind == "sphere2":
        return np.vstack(_real_sph_harm_blocks(L, X)).T
    return np.vstack(_sphere3_blocks(L, X)).T


def eval_eigenfunctions(manifold, x, lambda_max):
    """Eigenfunction values at a single point, in basis order."""
    return eigenfunction_matrix(manifold, as_point(manifold, x), lambda_max)[0]


# ---------------------------------------------------------------------------
# zonal (addition theorem) sums


def iter_zonal_sums(manifold, levels, X, Y):
    """Yield sum_{j in level} u_j(x) u_j(y) for each level, over paired points.

    ``X`` and ``Y`` must already be canonical (see :func:`as_points`) and
    broadcast against each other along the first axis.  Each yielded array
    has the broadcast pair shape.
    """
    kind = manifold.kind
    if not levels:
        return
    if kind == "circle":
        d = (X - Y)[..., 0]
        for lv in levels:
            l = _circle_degree(lv)
            if l == 0:
                yield np.full(d.shape, 1.0 / TWO_PI)
            else:
                yield np.cos(l * d) / math.pi
        return
    if kind == "torus":
        yield from _iter_torus_zonal(manifold, levels, X - Y)
        return
    c = np.clip(np.sum(X * Y, axis=-1), -1.0, 1.0)
    Lmax = levels[-1].index
    if kind == "sphere2":
        prev, cur = None, np.ones_like(c)
        want = {lv.index for lv in levels}
        for l in range(Lmax + 1):
            if l == 1:
                prev, cur = cur, c.copy()
            elif l >= 2:
                prev, cur = cur, ((2 * l - 1) * c * cur - (l - 1) * prev) / l
            if l in want:
                yield (2 * l + 1) / (4.0 * math.pi) * cur
        return
    # sphere3: Chebyshev polynomials of the second kind
    prev, cur = None, np.ones_like(c)
    want = {lv.index for lv in levels}
    vol = 2.0 * math.pi**2
    for l in range(Lmax + 1):
        if l == 1:
            prev, cur = cur, 2.0 * c
        elif l >= 2:
            prev, cur = cur, 2.0 * c * cur - prev
        if l in want:
            yield (l + 1) / vol * cur


def _circle_degree(level):
    return math.isqrt(int(level.lam))


def _iter_torus_zonal(manifold, levels, diff):
    m = manifold.dim
    lam_top = int(levels[-1].lam)
    vecs = _torus_vectors(m, lam_top)
    sq = (vecs**2).sum(axis=1)
    J = math.isqrt(lam_top)
    j = np.arange(J + 1).reshape((-1,) + (1,) * (diff.ndim - 1))
    tables = []
    for i in range(m):
        T = np.cos(j * diff[..., i][None]) / math.pi
        T[0] = 1.0 / TWO_PI
        tables.append(T)
    for lv in levels:
        lam = int(lv.lam)
        lo, hi = np.searchsorted(sq, lam, "left"), np.searchsorted(sq, lam, "right")
        acc = np.zeros(diff.shape[:-1])
        for n in vecs[lo:hi]:
            term = tables[0][n[0]]
            for i in range(1, m):
                term = term * tables[i][n[i]]
            acc = acc + term
        yield acc


def zonal_level_sum(manifold, level, x, y):
    """Closed-form within-level sum of u_j(x) u_j(y) for a single pair."""
    X, Y = as_point(manifold, x), as_point(manifold, y)
    lam_levels = list_levels(manifold, level.lam)
    lv = lam_levels[-1]
    if lv.lam != level.lam:
        raise ValueError(f"{level} is not an eigen-level of {manifold.name}")
    (val,) = iter_zonal_sums(manifold, [lv], X, Y)
    return float(val[0])
