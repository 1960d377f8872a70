"""
Radial basis sets (B-polynomials and B-splines) and their single-particle
matrix elements.

B-polynomial matrices use the closed forms; B-spline matrices are built by
Gauss-Legendre quadrature on every knot interval, exact for the polynomial
part of each integrand.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import mpmath

from tpdc.core.errors import DomainError, SingularEntryError
from tpdc.core.specfun import (
    PrecisionCtx, DEFAULT_CTX, binomial, gauss_legendre_nodes, hyp2f1, inc_beta,
    reg_hyp2f3, sph_bessel_j, to_decimal,
)

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = "137.0359895"     # a.u.; CODATA 1986 value of 1/alpha


class BasisKind(str, Enum):
    BPOLYNOMIAL = "bpoly"
    BSPLINE = "bspline"


class NuclearShape(str, Enum):
    POINT = "point"
    UNIFORM = "uniform"


class MatrixTag(str, Enum):
    C = "C"
    D = "D"
    KAPPA_OVER_R = "kappa/r"
    V = "V"
    BESSEL_J = "j_L"


def real(ctx: PrecisionCtx, x) -> mpmath.mpf:
    """Convert config-style numbers to mpf; floats go through their shortest repr."""
    if isinstance(x, float):
        return ctx.mpf(repr(x))
    return ctx.mpf(x)


def exponential_knots(order: int, count: int, radius: float, first_knot: float = 1e-3) -> tuple:
    """Knot vector with k-fold end knots and exponentially spaced interior knots."""
    if count < order:
        raise DomainError(f"B-spline count {count} must be >= order {order}")
    if not 0 < first_knot < radius:
        raise DomainError(f"first knot {first_knot} must lie in (0, {radius})")
    m = count - order + 1
    interior = []
    if m > 1:
        ratio = radius / first_knot
        interior = [first_knot * ratio ** ((j - 1) / (m - 1)) for j in range(1, m)]
    return (0.0,) * order + tuple(interior) + (float(radius),) * order


@dataclass(frozen=True)
class BasisSpec:
    """Finite radial basis: kind, order k, count N, cavity radius R, knots."""
    kind: BasisKind
    order: int
    count: int
    radius: float
    knots: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if self.radius <= 0:
            raise DomainError(f"cavity radius must be positive, got {self.radius}")
        if self.order < 1 or self.count < 2:
            raise DomainError(f"invalid basis size: order={self.order}, count={self.count}")
        if self.kind is BasisKind.BPOLYNOMIAL:
            if self.count != self.order + 1:
                raise DomainError(
                    f"B-polynomials of order {self.order} give {self.order + 1} functions, not {self.count}")
            if self.knots is not None:
                raise DomainError("B-polynomial bases take no knot sequence")
            return
        if self.knots is None:
            raise DomainError("B-spline basis requires a knot sequence")
        knots = tuple(float(t) for t in self.knots)
        object.__setattr__(self, "knots", knots)
        k, n = self.order, self.count
        if len(knots) != n + k:
            raise DomainError(f"expected {n + k} knots, got {len(knots)}")
        if any(b < a for a, b in zip(knots, knots[1:])):
            raise DomainError("knot sequence must be non-decreasing")
        if any(t != 0 for t in knots[:k]) or any(t != self.radius for t in knots[-k:]):
            raise DomainError(f"first {k} knots must be 0 and last {k} knots must be R")

    @classmethod
    def bpolynomial(cls, count: int, radius: float) -> "BasisSpec":
        return cls(BasisKind.BPOLYNOMIAL, count - 1, count, radius)

    @classmethod
    def bspline(cls, order: int, count: int, radius: float, first_knot: float = 1e-3) -> "BasisSpec":
        return cls(BasisKind.BSPLINE, order, count, radius,
                   exponential_knots(order, count, radius, first_knot))

    @property
    def active(self) -> tuple:
        """Basis indices kept in the Dirac expansion (the function non-zero at r=0 is dropped)."""
        return tuple(range(1, self.count))

    def breakpoints(self) -> list:
        """Distinct knots (B-splines) or the two cavity ends (B-polynomials)."""
        if self.kind is BasisKind.BPOLYNOMIAL:
            return [0.0, float(self.radius)]
        return sorted(set(self.knots))

    def describe(self) -> dict:
        d = {"kind": self.kind.value, "order": self.order, "count": self.count,
             "radius": repr(float(self.radius))}
        if self.knots is not None:
            d["knots"] = [repr(t) for t in self.knots]
        return d


@dataclass(frozen=True)
class NuclearModel:
    """Nuclear charge Z with a point or uniformly charged spherical shape."""
    Z: float
    shape: NuclearShape = NuclearShape.POINT
    r_n: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", NuclearShape(self.shape))
        if self.Z <= 0:
            raise DomainError(f"nuclear charge must be positive, got {self.Z}")
        if self.shape is NuclearShape.UNIFORM and (self.r_n is None or self.r_n <= 0):
            raise DomainError("uniform-sphere nucleus needs a positive radius r_N")

    def potential(self, r, ctx: PrecisionCtx):
        Z = real(ctx, self.Z)
        if self.shape is NuclearShape.UNIFORM:
            rn = real(ctx, self.r_n)
            if r <= rn:
                return Z / (2 * rn) * ((r / rn) ** 2 - 3)
        return -Z / r

    def describe(self) -> dict:
        d = {"Z": repr(float(self.Z)), "shape": self.shape.value}
        if self.r_n is not None:
            d["r_n"] = repr(float(self.r_n))
        return d


@dataclass(frozen=True)
class BasisMatrix:
    """Matrix of basis integrals over the index set *indices*."""
    tag: MatrixTag
    indices: tuple
    values: mpmath.matrix = field(repr=False, compare=False)
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_pos", {b: p for p, b in enumerate(self.indices)})

    def __getitem__(self, ij):
        i, j = ij
        return self.values[self._pos[i], self._pos[j]]

    @property
    def size(self) -> int:
        return len(self.indices)

    def to_csv(self, digits: int) -> str:
        """row,col,value lines at full precision (debugging dump)."""
        lines = ["row,col,value"]
        for p, i in enumerate(self.indices):
            for q, j in enumerate(self.indices):
                lines.append(f"{i},{j},{to_decimal(self.values[p, q], digits)}")
        return "\n".join(lines) + "\n"


# ── Basis function evaluation ─────────────────────────────────────────

def _check_r(spec: BasisSpec, r, ctx: PrecisionCtx):
    r = real(ctx, r)
    if r < 0 or r > real(ctx, spec.radius):
        raise DomainError(f"r = {r} outside the cavity [0, {spec.radius}]")
    return r


def _spline_values(knots, order: int, r, ctx: PrecisionCtx, at_end: bool) -> list:
    """Cox-de Boor recurrence; 0/0 terms are dropped."""
    mp = ctx.mp
    n_int = len(knots) - 1
    vals = []
    last_open = max(i for i in range(n_int) if knots[i] < knots[i + 1])
    for i in range(n_int):
        inside = knots[i] <= r < knots[i + 1] or (at_end and i == last_open)
        vals.append(mp.mpf(1) if inside else mp.mpf(0))
    for m in range(2, order + 1):
        nxt = []
        for i in range(len(vals) - 1):
            v = mp.mpf(0)
            d1 = knots[i + m - 1] - knots[i]
            if d1 != 0 and vals[i] != 0:
                v += (r - knots[i]) / d1 * vals[i]
            d2 = knots[i + m] - knots[i + 1]
            if d2 != 0 and vals[i + 1] != 0:
                v += (knots[i + m] - r) / d2 * vals[i + 1]
            nxt.append(v)
        vals = nxt
    return vals


@lru_cache(maxsize=64)
def _mp_knots(spec: BasisSpec, ctx: PrecisionCtx) -> tuple:
    return tuple(real(ctx, t) for t in spec.knots)


def basis_values(spec: BasisSpec, r, ctx: PrecisionCtx | None = None) -> list:
    """All N basis functions at r."""
    ctx = ctx or DEFAULT_CTX
    r = _check_r(spec, r, ctx)
    R = real(ctx, spec.radius)
    if spec.kind is BasisKind.BPOLYNOMIAL:
        k = spec.order
        t = r / R
        return [binomial(k, i, ctx) * t ** i * (1 - t) ** (k - i) for i in range(k + 1)]
    return _spline_values(_mp_knots(spec, ctx), spec.order, r, ctx, at_end=(r == R))


def basis_derivatives(spec: BasisSpec, r, ctx: PrecisionCtx | None = None) -> list:
    """d/dr of all N basis functions at r."""
    ctx = ctx or DEFAULT_CTX
    r = _check_r(spec, r, ctx)
    R = real(ctx, spec.radius)
    k = spec.order
    if spec.kind is BasisKind.BPOLYNOMIAL:
        t = r / R
        lower = [binomial(k - 1, i, ctx) * t ** i * (1 - t) ** (k - 1 - i) for i in range(k)]
        lower = [ctx.mpf(0)] + lower + [ctx.mpf(0)]
        return [k * (lower[i] - lower[i + 1]) / R for i in range(k + 1)]
    knots = _mp_knots(spec, ctx)
    if k == 1:
        return [ctx.mpf(0)] * spec.count
    prev = _spline_values(knots, k - 1, r, ctx, at_end=(r == R))
    out = []
    for i in range(spec.count):
        v = ctx.mpf(0)
        d1 = knots[i + k - 1] - knots[i]
        if d1 != 0:
            v += prev[i] / d1
        d2 = knots[i + k] - knots[i + 1]
        if d2 != 0:
            v -= prev[i + 1] / d2
        out.append((k - 1) * v)
    return out


def eval_basis(spec: BasisSpec, i: int, r, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """B_i(r) for 0 <= i < N."""
    if not 0 <= i < spec.count:
        raise DomainError(f"basis index {i} outside 0..{spec.count - 1}")
    return basis_values(spec, r, ctx)[i]


def endpoint_values(spec: BasisSpec, ctx: PrecisionCtx | None = None) -> tuple:
    """(B_i(0) for all i, B_i(R) for all i)."""
    return basis_values(spec, 0, ctx), basis_values(spec, spec.radius, ctx)


# ── Quadrature assembly (B-splines, oracle checks) ────────────────────

def _quadrature_matrix(spec: BasisSpec, indices, ctx: PrecisionCtx, weight, nodes_for,
                       derivative: bool = False, extra_breaks=()) -> mpmath.matrix:
    mp = ctx.mp
    breaks = sorted(set(real(ctx, b) for b in spec.breakpoints()) | set(real(ctx, b) for b in extra_breaks))
    n = len(indices)
    acc = [[mp.mpf(0)] * n for _ in range(n)]
    for a, b in zip(breaks, breaks[1:]):
        if b <= a:
            continue
        half, mid = (b - a) / 2, (b + a) / 2
        for x, w in gauss_legendre_nodes(nodes_for(a, b), ctx):
            r = mid + half * x
            vals = basis_values(spec, r, ctx)
            right = basis_derivatives(spec, r, ctx) if derivative else vals
            wr = half * w * weight(r)
            live = [(p, vals[i]) for p, i in enumerate(indices) if vals[i] != 0]
            live_r = [(q, right[j]) for q, j in enumerate(indices) if right[j] != 0]
            for p, vi in live:
                f = wr * vi
                for q, vj in live_r:
                    acc[p][q] += f * vj
    return mp.matrix(acc)


def _default_nodes(spec: BasisSpec):
    n = spec.order + 2
    return lambda a, b: n


def _check_indices(spec: BasisSpec, indices):
    indices = tuple(range(spec.count)) if indices is None else tuple(indices)
    if any(not 0 <= i < spec.count for i in indices):
        raise DomainError(f"basis indices must lie in 0..{spec.count - 1}")
    return indices


def _closed_form(indices, ctx: PrecisionCtx, entry) -> mpmath.matrix:
    n = len(indices)
    m = ctx.mp.matrix(n, n)
    for p, i in enumerate(indices):
        for q in range(p, n):
            v = entry(i, indices[q])
            m[p, q] = v
            m[q, p] = v
    return m


# ── Matrices ──────────────────────────────────────────────────────────

def gram_matrix(spec: BasisSpec, indices=None, ctx: PrecisionCtx | None = None) -> BasisMatrix:
    """(C)_ij = integral B_i B_j dr."""
    ctx = ctx or DEFAULT_CTX
    indices = _check_indices(spec, indices)
    if spec.kind is BasisKind.BPOLYNOMIAL:
        k, R = spec.order, real(ctx, spec.radius)

        def entry(i, j):
            return R * binomial(k, i, ctx) * binomial(k, j, ctx) / ((2 * k + 1) * binomial(2 * k, i + j, ctx))

        values = _closed_form(indices, ctx, entry)
    else:
        values = _quadrature_matrix(spec, indices, ctx, lambda r: 1, _default_nodes(spec))
    return BasisMatrix(MatrixTag.C, indices, values)


def derivative_matrix(spec: BasisSpec, indices=None, ctx: PrecisionCtx | None = None) -> BasisMatrix:
    """(D)_ij = integral B_i B_j' dr (not symmetric)."""
    ctx = ctx or DEFAULT_CTX
    indices = _check_indices(spec, indices)
    mp = ctx.mp
    n = len(indices)
    if spec.kind is BasisKind.BPOLYNOMIAL:
        k = spec.order
        values = mp.matrix(n, n)
        for p, i in enumerate(indices):
            for q, j in enumerate(indices):
                if i == j:
                    # [B_i^2]_0^R / 2: only the two end functions contribute
                    values[p, q] = mp.mpf(-1) / 2 if i == 0 else (mp.mpf(1) / 2 if i == k else mp.mpf(0))
                else:
                    values[p, q] = (binomial(k, i, ctx) * binomial(k, j, ctx) * (j - i)
                                    / (2 * (i + j) * binomial(2 * k - 1, i + j, ctx)))
    else:
        values = _quadrature_matrix(spec, indices, ctx, lambda r: 1, _default_nodes(spec), derivative=True)
    return BasisMatrix(MatrixTag.D, indices, values)


def _reject_origin_pair(indices, what: str):
    if 0 in indices:
        raise SingularEntryError(
            f"{what}: the (0,0) integrand B_0 B_0 / r is not integrable; drop basis function 0")


def _inverse_r_entry(spec: BasisSpec, ctx: PrecisionCtx):
    k = spec.order

    def entry(i, j):
        return binomial(k, i, ctx) * binomial(k, j, ctx) / ((i + j) * binomial(2 * k, i + j, ctx))

    return entry


def kappa_over_r_matrix(spec: BasisSpec, kappa: int, indices=None,
                        ctx: PrecisionCtx | None = None) -> BasisMatrix:
    """(kappa/r)_ij = integral B_i (kappa/r) B_j dr."""
    ctx = ctx or DEFAULT_CTX
    if kappa == 0:
        raise DomainError("kappa must be a non-zero integer")
    indices = _check_indices(spec, indices)
    _reject_origin_pair(indices, "kappa/r matrix")
    if spec.kind is BasisKind.BPOLYNOMIAL:
        base = _inverse_r_entry(spec, ctx)
        values = _closed_form(indices, ctx, lambda i, j: kappa * base(i, j))
    else:
        values = _quadrature_matrix(spec, indices, ctx, lambda r: kappa / r, _default_nodes(spec))
    return BasisMatrix(MatrixTag.KAPPA_OVER_R, indices, values)


def potential_matrix(spec: BasisSpec, nuc: NuclearModel, indices=None,
                     ctx: PrecisionCtx | None = None) -> BasisMatrix:
    """(V)_ij for a point or uniformly charged spherical nucleus."""
    ctx = ctx or DEFAULT_CTX
    indices = _check_indices(spec, indices)
    _reject_origin_pair(indices, "potential matrix")
    Z = real(ctx, nuc.Z)
    uniform = nuc.shape is NuclearShape.UNIFORM
    if uniform and not 0 < nuc.r_n < spec.radius:
        raise DomainError(f"nuclear radius {nuc.r_n} must lie inside the cavity (0, {spec.radius})")
    if spec.kind is BasisKind.BSPLINE:
        extra = (nuc.r_n,) if uniform else ()
        values = _quadrature_matrix(spec, indices, ctx, lambda r: nuc.potential(r, ctx),
                                    _default_nodes(spec), extra_breaks=extra)
        return BasisMatrix(MatrixTag.V, indices, values)

    k = spec.order
    base = _inverse_r_entry(spec, ctx)
    if not uniform:
        values = _closed_form(indices, ctx, lambda i, j: -Z * base(i, j))
        return BasisMatrix(MatrixTag.V, indices, values)

    x = real(ctx, nuc.r_n) / real(ctx, spec.radius)
    cache = {}

    def shape_term(m):
        # integral over r < r_N of (V^U - V^p) t^m (1-t)^(2k-m), divided by Z
        if m not in cache:
            half = ctx.mpf(1) / 2
            cache[m] = (inc_beta(x, m, 1 - m + 2 * k, ctx)
                        - 3 * half * x ** m * hyp2f1(1 + m, m - 2 * k, 2 + m, x, ctx) / (1 + m)
                        + half * x ** m * hyp2f1(3 + m, m - 2 * k, 4 + m, x, ctx) / (3 + m))
        return cache[m]

    def entry(i, j):
        cc = binomial(k, i, ctx) * binomial(k, j, ctx)
        return -Z * base(i, j) + Z * cc * shape_term(i + j)

    return BasisMatrix(MatrixTag.V, indices, _closed_form(indices, ctx, entry))


def bessel_matrix(spec: BasisSpec, L: int, omega, indices=None, ctx: PrecisionCtx | None = None,
                  c=None) -> BasisMatrix:
    """(j_L)_ij = integral B_i B_j j_L(omega r / c) dr."""
    ctx = ctx or DEFAULT_CTX
    if L < 0:
        raise DomainError(f"multipole order must be non-negative, got {L}")
    omega = real(ctx, omega)
    if omega < 0:
        raise DomainError(f"photon energy must be non-negative, got {omega}")
    c = real(ctx, SPEED_OF_LIGHT if c is None else c)
    indices = _check_indices(spec, indices)
    mp = ctx.mp
    R = real(ctx, spec.radius)

    if spec.kind is BasisKind.BSPLINE:
        kappa_wave = omega / c

        def nodes_for(a, b):
            return max(spec.order + 2, int(mp.ceil(kappa_wave * (b - a))) + 4)

        values = _quadrature_matrix(spec, indices, ctx,
                                    lambda r: sph_bessel_j(L, kappa_wave * r, ctx), nodes_for)
        return BasisMatrix(MatrixTag.BESSEL_J, indices, values)

    k = spec.order
    y = omega * R / c
    arg = -(y / 2) ** 2
    scale = R * y ** L * mp.pi / mp.mpf(2) ** (2 * (L + k + 1))
    b1 = mp.mpf(2 * L + 3) / 2
    b2 = mp.mpf(2 * k + L + 2) / 2
    b3 = mp.mpf(2 * k + L + 3) / 2
    cache = {}

    def kernel(m):
        if m not in cache:
            if y == 0 and L > 0:
                cache[m] = mp.mpf(0)
            else:
                cache[m] = (scale * mp.factorial(m + L) * mp.factorial(2 * k - m)
                            * reg_hyp2f3(mp.mpf(m + L + 1) / 2, mp.mpf(m + L + 2) / 2, b1, b2, b3, arg, ctx))
        return cache[m]

    def entry(i, j):
        return binomial(k, i, ctx) * binomial(k, j, ctx) * kernel(i + j)

    return BasisMatrix(MatrixTag.BESSEL_J, indices, _closed_form(indices, ctx, entry))
