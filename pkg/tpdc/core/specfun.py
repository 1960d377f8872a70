"""
Extended-precision scalars and the special functions used by the analytic
matrix-element formulas.

Every function takes a PrecisionCtx.  The context owns a private mpmath
MPContext, so two contexts with different digit counts can be used from
different threads without touching the global ``mpmath.mp``.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
from mpmath.libmp import NoConvergence

from tpdc.core.errors import ConvergenceError, DomainError, PoleError

logger = logging.getLogger(__name__)

DEFAULT_DIGITS = 34          # IEEE binary128 ("quadruple") significand
MIN_DIGITS = 16
SERIES_GUARD_DIGITS = 4      # series stop below 10^-(digits+4) of the partial sum
SERIES_MAX_TERMS = 100_000


@dataclass(frozen=True)
class PrecisionCtx:
    """Working decimal-digit count threaded through all arithmetic."""
    digits: int = DEFAULT_DIGITS
    mp: mpmath.MPContext = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.digits, int) or self.digits < MIN_DIGITS:
            raise DomainError(f"digits must be an integer >= {MIN_DIGITS}, got {self.digits!r}")
        ctx = mpmath.MPContext()
        ctx.dps = self.digits
        object.__setattr__(self, "mp", ctx)

    def mpf(self, x) -> mpmath.mpf:
        """Convert *x* (int, str, float, mpf) to a real at this precision."""
        return self.mp.mpf(x)

    @property
    def eps(self) -> mpmath.mpf:
        """10^(1-digits): relative rounding bound of a single operation."""
        return self.mp.mpf(10) ** (1 - self.digits)

    @property
    def series_tol(self) -> mpmath.mpf:
        return self.mp.mpf(10) ** (-self.digits - SERIES_GUARD_DIGITS)

    def rel_tol(self, guard: int) -> mpmath.mpf:
        """Tolerance 10^(guard-digits) used by the property checks."""
        return self.mp.mpf(10) ** (guard - self.digits)

    def with_digits(self, digits: int) -> "PrecisionCtx":
        return PrecisionCtx(digits)


DEFAULT_CTX = PrecisionCtx()


def _ctx(ctx: PrecisionCtx | None) -> PrecisionCtx:
    return DEFAULT_CTX if ctx is None else ctx


def _is_nonpositive_int(ctx: PrecisionCtx, x) -> bool:
    return ctx.mp.isint(x) and x <= 0


# ── Combinatorics ─────────────────────────────────────────────────────

def binomial(n: int, k: int, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """n!/(k!(n-k)!) exactly; zero outside 0 <= k <= n."""
    ctx = _ctx(ctx)
    if k < 0 or k > n:
        return ctx.mpf(0)
    return ctx.mpf(math.comb(n, k))


def pochhammer(a, s: int, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """Rising factorial a(a+1)...(a+s-1); 1 for s = 0."""
    ctx = _ctx(ctx)
    if s < 0:
        raise DomainError(f"pochhammer order must be non-negative, got {s}")
    return ctx.mp.rf(ctx.mpf(a), s)


def gamma(x, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    ctx = _ctx(ctx)
    x = ctx.mpf(x)
    if _is_nonpositive_int(ctx, x):
        raise PoleError(f"gamma has a pole at {x}")
    return ctx.mp.gamma(x)


# ── Incomplete beta and hypergeometric series ─────────────────────────

def inc_beta(x, h, k, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """B(x; h, k) = integral_0^x t^(h-1) (1-t)^(k-1) dt."""
    ctx = _ctx(ctx)
    x, h, k = ctx.mpf(x), ctx.mpf(h), ctx.mpf(k)
    if x < 0 or x > 1:
        raise DomainError(f"inc_beta argument must lie in [0, 1], got {x}")
    if h <= 0:
        raise DomainError(f"inc_beta requires h > 0, got {h}")
    if x == 0:
        return ctx.mpf(0)
    try:
        return ctx.mp.betainc(h, k, 0, x)
    except NoConvergence as e:
        raise ConvergenceError(f"incomplete beta B({x}; {h}, {k}) did not converge") from e


def hyp2f1(a, b, c, x, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """Gauss 2F1; terminating cases (a or b a non-positive integer) are finite sums."""
    ctx = _ctx(ctx)
    a, b, c, x = (ctx.mpf(v) for v in (a, b, c, x))
    if abs(x) > 1:
        raise DomainError(f"hyp2f1 requires |x| <= 1, got {x}")
    if x == 0:
        return ctx.mpf(1)
    terminates = _is_nonpositive_int(ctx, a) or _is_nonpositive_int(ctx, b)
    if _is_nonpositive_int(ctx, c) and not terminates:
        raise PoleError(f"hyp2f1 lower parameter {c} is a non-positive integer")
    try:
        return ctx.mp.hyp2f1(a, b, c, x)
    except NoConvergence as e:
        raise ConvergenceError(f"2F1({a}, {b}; {c}; {x}) did not converge") from e


def reg_hyp2f3(a1, a2, b1, b2, b3, x, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """Regularized 2F3: the 2F3 series divided by Gamma(b1) Gamma(b2) Gamma(b3).

    When every lower parameter is regular this is mpmath's 2F3 (which raises
    its own precision against cancellation) times three reciprocal gammas.
    Non-positive integer lower parameters are summed term by term with
    1/Gamma(b+s), which is zero on the poles.
    """
    ctx = _ctx(ctx)
    a1, a2, b1, b2, b3, x = (ctx.mpf(v) for v in (a1, a2, b1, b2, b3, x))
    lower = (b1, b2, b3)
    if not any(_is_nonpositive_int(ctx, b) for b in lower):
        norm = ctx.mp.rgamma(b1) * ctx.mp.rgamma(b2) * ctx.mp.rgamma(b3)
        if x == 0:
            return norm
        try:
            return ctx.mp.hyp2f3(a1, a2, b1, b2, b3, x) * norm
        except NoConvergence as e:
            raise ConvergenceError(f"2F3 at x={x} did not converge") from e
    return _regularized_series(ctx, (a1, a2), lower, x)


def _regularized_series(ctx: PrecisionCtx, upper, lower, x) -> mpmath.mpf:
    """Sum_s prod (a)_s / prod Gamma(b+s) * x^s/s!, guarding against cancellation."""
    guard = 10
    while True:
        with ctx.mp.workdps(ctx.digits + guard):
            total, largest = _series_pass(ctx, upper, lower, x)
            if total == 0:
                return ctx.mpf(0)
            lost = int(ctx.mp.log10(largest / abs(total))) if largest > abs(total) else 0
        if lost + SERIES_GUARD_DIGITS <= guard:
            return +total
        logger.debug("regularized series lost %d digits, retrying with more guard digits", lost)
        guard = lost + 2 * SERIES_GUARD_DIGITS


def _series_pass(ctx: PrecisionCtx, upper, lower, x):
    mp = ctx.mp
    stop_after = None
    for a in upper:
        if _is_nonpositive_int(ctx, a):
            n = int(-a)
            stop_after = n if stop_after is None else min(stop_after, n)
    tol = mp.mpf(10) ** (-ctx.digits - SERIES_GUARD_DIGITS)
    total = mp.mpf(0)
    largest = mp.mpf(0)
    coeff = mp.mpf(1)           # prod (a)_s * x^s / s!
    for s in range(SERIES_MAX_TERMS):
        if stop_after is not None and s > stop_after:
            return total, largest
        term = coeff
        for b in lower:
            term *= mp.rgamma(b + s)
        total += term
        largest = max(largest, abs(term))
        past_poles = all(b + s > 0 for b in lower)
        if stop_after is None and past_poles and term != 0 and abs(term) < tol * abs(total):
            return total, largest
        coeff = coeff * (upper[0] + s) * (upper[1] + s) * x / (s + 1)
        if coeff == 0 and past_poles:
            return total, largest
    raise ConvergenceError(f"regularized series did not converge in {SERIES_MAX_TERMS} terms")


# ── Spherical Bessel functions ────────────────────────────────────────

def sph_bessel_j(L: int, x, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """j_L(x); the small-argument region x < L uses the ascending series."""
    ctx = _ctx(ctx)
    x = ctx.mpf(x)
    if L < 0:
        raise DomainError(f"Bessel order must be non-negative, got {L}")
    if x < 0:
        raise DomainError(f"sph_bessel_j requires x >= 0, got {x}")
    mp = ctx.mp
    if x == 0:
        return ctx.mpf(1) if L == 0 else ctx.mpf(0)
    if x < L:
        # j_L(x) = sqrt(pi)/2 (x/2)^L / Gamma(L+3/2) * 0F1(; L+3/2; -x^2/4)
        nu = mp.mpf(L) + mp.mpf(1) / 2
        return mp.sqrt(mp.pi) / 2 * (x / 2) ** L * mp.rgamma(nu + 1) * mp.hyp0f1(nu + 1, -x * x / 4)
    return mp.sqrt(mp.pi / (2 * x)) * mp.besselj(mp.mpf(L) + mp.mpf(1) / 2, x)


# ── Gauss-Legendre quadrature ─────────────────────────────────────────

@lru_cache(maxsize=256)
def gauss_legendre_nodes(n: int, ctx: PrecisionCtx | None = None) -> tuple:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].

    Roots are polished by Newton iteration on P_n at ten guard digits, so
    any working precision is supported.  Returned ascending as
    ``((x0, w0), (x1, w1), ...)``.
    """
    ctx = _ctx(ctx)
    if n < 1:
        raise DomainError(f"Gauss-Legendre rule needs n >= 1, got {n}")
    mp = ctx.mp
    pairs = []
    with mp.workdps(ctx.digits + 10):
        tol = mp.mpf(10) ** (-ctx.digits - 8)

        def dlegendre(x):
            return n * (x * mp.legendre(n, x) - mp.legendre(n - 1, x)) / (x * x - 1)

        for k in range(1, n + 1):
            x = mp.cos(mp.pi * (4 * k - 1) / (4 * n + 2))
            for _ in range(100):
                dx = mp.legendre(n, x) / dlegendre(x)
                x -= dx
                if abs(dx) < tol:
                    break
            else:
                raise ConvergenceError(f"Newton iteration for Gauss-Legendre root {k}/{n} failed")
            d = dlegendre(x)
            pairs.append((x, 2 / ((1 - x * x) * d * d)))
    pairs.sort(key=lambda p: p[0])
    return tuple((+x, +w) for x, w in pairs)


def gauss_legendre_integrate(f, a, b, n: int, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """Integrate *f* over [a, b] with the n-point rule mapped from [-1, 1]."""
    ctx = _ctx(ctx)
    a, b = ctx.mpf(a), ctx.mpf(b)
    half = (b - a) / 2
    mid = (b + a) / 2
    return half * ctx.mp.fsum(w * f(mid + half * x) for x, w in gauss_legendre_nodes(n, ctx))


def to_decimal(x, digits: int) -> str:
    """Scientific-notation decimal string with an explicit exponent."""
    return mpmath.nstr(x, digits, strip_zeros=False, min_fixed=1, max_fixed=0)
