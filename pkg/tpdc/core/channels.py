"""
Multipole channel registry and angular algebra.

Each two-photon channel pairs two photon multipoles (E1, M1, E2, M2).
Reduced matrix elements of the normalized spherical harmonic C_L and the
Wigner 3j/6j symbols are exact (sympy) and converted to the working
precision on demand.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import mpmath
from sympy import Rational, sign
from sympy.physics.wigner import wigner_3j, wigner_6j

from tpdc.core.errors import DomainError, SelectionRuleError
from tpdc.core.specfun import DEFAULT_CTX, PrecisionCtx

logger = logging.getLogger(__name__)


class MultipoleType(str, Enum):
    ELECTRIC = "E"
    MAGNETIC = "M"


@dataclass(frozen=True)
class Multipole:
    """One photon multipole sigma L."""
    sigma: MultipoleType
    L: int

    def __post_init__(self):
        object.__setattr__(self, "sigma", MultipoleType(self.sigma))
        if self.L < 1:
            raise DomainError(f"photon multipole order must be >= 1, got {self.L}")

    @property
    def name(self) -> str:
        return f"{self.sigma.value}{self.L}"

    @property
    def is_electric(self) -> bool:
        return self.sigma is MultipoleType.ELECTRIC

    def connects(self, kappa_b: int, kappa_a: int) -> bool:
        """Parity and triangle rules for <kappa_b || T || kappa_a>."""
        two_ja, two_jb = 2 * abs(kappa_a) - 1, 2 * abs(kappa_b) - 1
        if not abs(two_ja - two_jb) <= 2 * self.L <= two_ja + two_jb:
            return False
        parity = (orbital_l(kappa_a) + orbital_l(kappa_b) + self.L) % 2
        return parity == (0 if self.is_electric else 1)


@dataclass(frozen=True)
class MultipoleChannel:
    """Two-photon channel: photon 1 carries `first`, photon 2 `second`."""
    name: str
    first: Multipole
    second: Multipole
    description: str = ""

    @property
    def mixed(self) -> bool:
        return self.first != self.second

    @property
    def magnetic_only(self) -> bool:
        return not (self.first.is_electric or self.second.is_electric)

    def assignments(self) -> list:
        """Ordered (T1, T2) multipole assignments summed for this channel."""
        if self.mixed:
            return [(self.first, self.second), (self.second, self.first)]
        return [(self.first, self.second)]

    def ranks(self, kappa_i: int, kappa_f: int) -> list:
        """Total ranks K coupling both photons and both electron states."""
        two_ji, two_jf = 2 * abs(kappa_i) - 1, 2 * abs(kappa_f) - 1
        L1, L2 = self.first.L, self.second.L
        lo = max(abs(two_ji - two_jf) // 2, abs(L1 - L2))
        hi = min((two_ji + two_jf) // 2, L1 + L2)
        return list(range(lo, hi + 1))

    def check(self, kappa_i: int, kappa_f: int):
        """Raise SelectionRuleError unless the channel connects kappa_i to kappa_f."""
        if not self.ranks(kappa_i, kappa_f):
            raise SelectionRuleError(
                f"{self.name}: no total rank couples j_i={abs(kappa_i) - 0.5} and j_f={abs(kappa_f) - 0.5}")
        for t1, t2 in self.assignments():
            if intermediate_kappas(t1, t2, kappa_i, kappa_f):
                return
        raise SelectionRuleError(
            f"{self.name}: no intermediate symmetry connects kappa_i={kappa_i} to kappa_f={kappa_f}")


_CHANNELS = [
    MultipoleChannel("2E1", Multipole("E", 1), Multipole("E", 1), "two electric dipole photons"),
    MultipoleChannel("E1M2", Multipole("E", 1), Multipole("M", 2), "electric dipole + magnetic quadrupole"),
    MultipoleChannel("2M1", Multipole("M", 1), Multipole("M", 1), "two magnetic dipole photons"),
    MultipoleChannel("2E2", Multipole("E", 2), Multipole("E", 2), "two electric quadrupole photons"),
    MultipoleChannel("2M2", Multipole("M", 2), Multipole("M", 2), "two magnetic quadrupole photons"),
    MultipoleChannel("E2M1", Multipole("E", 2), Multipole("M", 1), "electric quadrupole + magnetic dipole"),
]

CHANNELS = {ch.name: ch for ch in _CHANNELS}
DEFAULT_CHANNELS = tuple(CHANNELS)

CHANNEL_HELP_TEXT = """\
Two-photon multipole channels:
  2E1   two electric dipole photons (dominant for ns -> n's)
  E1M2  electric dipole + magnetic quadrupole
  2M1   two magnetic dipole photons (gauge independent)
  2E2   two electric quadrupole photons
  2M2   two magnetic quadrupole photons (gauge independent)
  E2M1  electric quadrupole + magnetic dipole
"""


def get_channel(name: str) -> MultipoleChannel:
    try:
        return CHANNELS[name.strip().upper()]
    except KeyError:
        raise SelectionRuleError(
            f"unknown multipole channel {name!r}; choose from {', '.join(CHANNELS)}") from None


# ── Gauge ─────────────────────────────────────────────────────────────

class GaugeKind(str, Enum):
    VELOCITY = "velocity"
    LENGTH = "length"
    CUSTOM = "custom"


@dataclass(frozen=True)
class GaugeChoice:
    """Gauge of the electric multipole operators.

    Velocity is G = 0, length is G = sqrt((L+1)/L) per multipole order,
    custom uses one fixed G for every multipole.
    """
    kind: GaugeKind
    value: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GaugeKind(self.kind))
        if (self.kind is GaugeKind.CUSTOM) != (self.value is not None):
            raise DomainError("a custom gauge needs a value; velocity and length take none")

    @classmethod
    def velocity(cls) -> "GaugeChoice":
        return cls(GaugeKind.VELOCITY)

    @classmethod
    def length(cls) -> "GaugeChoice":
        return cls(GaugeKind.LENGTH)

    @classmethod
    def custom(cls, G) -> "GaugeChoice":
        return cls(GaugeKind.CUSTOM, str(G))

    def parameter(self, L: int, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
        ctx = ctx or DEFAULT_CTX
        if self.kind is GaugeKind.VELOCITY:
            return ctx.mpf(0)
        if self.kind is GaugeKind.LENGTH:
            return ctx.mp.sqrt(ctx.mpf(L + 1) / L)
        return ctx.mpf(self.value)


# ── Angular momentum algebra ──────────────────────────────────────────

def orbital_l(kappa: int) -> int:
    return kappa if kappa > 0 else -kappa - 1


def _half(two_j: int) -> Rational:
    return Rational(two_j, 2)


def _to_mpf(expr, ctx: PrecisionCtx) -> mpmath.mpf:
    # 3j and 6j symbols are +- square roots of rationals
    if expr == 0:
        return ctx.mpf(0)
    sq = Rational(expr ** 2)
    return int(sign(expr)) * ctx.mp.sqrt(ctx.mpf(sq.p) / sq.q)


@lru_cache(maxsize=4096)
def _three_j_exact(two_j1, two_j2, two_j3, two_m1, two_m2, two_m3):
    return wigner_3j(_half(two_j1), _half(two_j2), _half(two_j3),
                     _half(two_m1), _half(two_m2), _half(two_m3))


@lru_cache(maxsize=4096)
def _six_j_exact(two_j1, two_j2, two_j3, two_j4, two_j5, two_j6):
    return wigner_6j(_half(two_j1), _half(two_j2), _half(two_j3),
                     _half(two_j4), _half(two_j5), _half(two_j6))


def three_j(two_j1, two_j2, two_j3, two_m1, two_m2, two_m3, ctx: PrecisionCtx | None = None):
    """Wigner 3j symbol; arguments are doubled so half-integers stay integral."""
    return _to_mpf(_three_j_exact(two_j1, two_j2, two_j3, two_m1, two_m2, two_m3), ctx or DEFAULT_CTX)


def six_j(two_j1, two_j2, two_j3, two_j4, two_j5, two_j6, ctx: PrecisionCtx | None = None):
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6}, doubled arguments."""
    return _to_mpf(_six_j_exact(two_j1, two_j2, two_j3, two_j4, two_j5, two_j6), ctx or DEFAULT_CTX)


def reduced_c(kappa_b: int, L: int, kappa_a: int, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """<kappa_b || C_L || kappa_a>, zero unless l_b + L + l_a is even."""
    ctx = ctx or DEFAULT_CTX
    if (orbital_l(kappa_b) + L + orbital_l(kappa_a)) % 2:
        return ctx.mpf(0)
    two_ja, two_jb = 2 * abs(kappa_a) - 1, 2 * abs(kappa_b) - 1
    phase = -1 if ((two_jb + 1) // 2) % 2 else 1
    return (phase * ctx.mp.sqrt(ctx.mpf((two_ja + 1) * (two_jb + 1)))
            * three_j(two_jb, two_ja, 2 * L, -1, 1, 0, ctx))


def intermediate_kappas(t1: Multipole, t2: Multipole, kappa_i: int, kappa_f: int) -> list:
    """kappa_nu reachable from kappa_i by t1 and leading to kappa_f by t2."""
    reach = max(abs(kappa_i), abs(kappa_f)) + max(t1.L, t2.L) + 1
    out = []
    for k in range(1, reach + 1):
        for kappa in (-k, k):
            if t1.connects(kappa, kappa_i) and t2.connects(kappa_f, kappa):
                out.append(kappa)
    return out


def channel_kappas(channels, kappa_i: int, kappa_f: int) -> list:
    """Every intermediate kappa needed by any assignment of the given channels."""
    seen = []
    for ch in channels:
        for t1, t2 in ch.assignments():
            for order in ((t1, t2), (t2, t1)):
                for kappa in intermediate_kappas(order[0], order[1], kappa_i, kappa_f):
                    if kappa not in seen:
                        seen.append(kappa)
    return seen
