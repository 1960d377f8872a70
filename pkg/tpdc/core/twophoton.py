"""
Two-photon decay rates from second-order perturbation theory.

The intermediate-state sum runs over every pseudostate of each allowed
kappa symmetry, including the negative continuum.  Radial integrals are
bilinear forms of the expansion coefficients against the spherical Bessel
matrix of the basis; products of that matrix with the initial and final
orbitals are cached per (L, omega) so each intermediate state costs only
dot products.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import mpmath

from tpdc.core.basis import BasisSpec, SPEED_OF_LIGHT, bessel_matrix, real
from tpdc.core.channels import (
    GaugeChoice, GaugeKind, Multipole, MultipoleChannel, intermediate_kappas, reduced_c, six_j,
)
from tpdc.core.dirac import RadialOrbital
from tpdc.core.errors import DomainError, ResonanceError, SelectionRuleError, SpectrumError
from tpdc.core.specfun import DEFAULT_CTX, PrecisionCtx, gauss_legendre_nodes, to_decimal

logger = logging.getLogger(__name__)

ATOMIC_TIME = "2.418884326505e-17"      # s per atomic unit of time
RESONANCE_GUARD = "1e-8"                 # hartree
DEFAULT_QUAD_POINTS = 15


class Restriction(str, Enum):
    ALL = "all"
    POSITIVE = "pos"
    NEGATIVE = "neg"

    def admits(self, orbital: RadialOrbital) -> bool:
        if self is Restriction.ALL:
            return True
        return orbital.is_positive_spectrum == (self is Restriction.POSITIVE)


GAUGES = (GaugeChoice.length(), GaugeChoice.velocity())


# ── Radial integrals ──────────────────────────────────────────────────

def _p(orbital: RadialOrbital, active) -> list:
    return [orbital.p_coeffs[i] for i in active]


def _q(orbital: RadialOrbital, active) -> list:
    return [orbital.q_coeffs[i] for i in active]


class RadialKernel:
    """Bessel matrices j_L(omega r/c) on one basis and their orbital products.

    Products are keyed by (L, omega, kappa, spectrum index), so one kernel
    must only see orbitals of a single spectrum set.
    """

    def __init__(self, spec: BasisSpec, ctx: PrecisionCtx, c=None):
        self.spec = spec
        self.ctx = ctx
        self.c = real(ctx, SPEED_OF_LIGHT if c is None else c)
        self.active = spec.active
        self._matrices = {}
        self._products = {}

    def matrix(self, L: int, omega):
        key = (L, omega)
        if key not in self._matrices:
            self._matrices[key] = bessel_matrix(self.spec, L, omega, self.active, self.ctx, self.c).values
        return self._matrices[key]

    def products(self, L: int, omega, orbital: RadialOrbital) -> tuple:
        """(M p, M q) as lists for the Bessel matrix M of order L."""
        key = (L, omega, orbital.kappa.kappa, orbital.index)
        if key not in self._products:
            M = self.matrix(L, omega)
            mp = self.ctx.mp
            p = mp.matrix(_p(orbital, self.active))
            q = mp.matrix(_q(orbital, self.active))
            Mp, Mq = M * p, M * q
            n = len(self.active)
            self._products[key] = ([Mp[r] for r in range(n)], [Mq[r] for r in range(n)])
        return self._products[key]

    def integrals(self, L: int, omega, b: RadialOrbital, a: RadialOrbital, fixed: str = "right") -> tuple:
        """(I+, I-, J) of order L between final-side b and initial-side a.

        `fixed` names the orbital whose Bessel products are cached.
        """
        if L < 0:
            zero = self.ctx.mpf(0)
            return zero, zero, zero
        fdot = self.ctx.mp.fdot
        if fixed == "right":
            Mp, Mq = self.products(L, omega, a)
            pb, qb = _p(b, self.active), _q(b, self.active)
            pq, qp = fdot(pb, Mq), fdot(qb, Mp)
            J = fdot(pb, Mp) + fdot(qb, Mq)
        else:
            Mp, Mq = self.products(L, omega, b)
            pa, qa = _p(a, self.active), _q(a, self.active)
            pq, qp = fdot(Mp, qa), fdot(Mq, pa)
            J = fdot(Mp, pa) + fdot(Mq, qa)
        return pq + qp, pq - qp, J


def radial_I(L: int, pm: int, f: RadialOrbital, i: RadialOrbital, omega, spec: BasisSpec,
             ctx: PrecisionCtx | None = None, c=None) -> mpmath.mpf:
    """integral [P_f Q_i +- Q_f P_i] j_L(omega r / c) dr."""
    if pm not in (1, -1):
        raise DomainError(f"pm must be +1 or -1, got {pm}")
    ctx = ctx or DEFAULT_CTX
    plus, minus, _ = RadialKernel(spec, ctx, c).integrals(L, real(ctx, omega), f, i)
    return plus if pm > 0 else minus


def radial_J(L: int, f: RadialOrbital, i: RadialOrbital, omega, spec: BasisSpec,
             ctx: PrecisionCtx | None = None, c=None) -> mpmath.mpf:
    """integral [P_f P_i + Q_f Q_i] j_L(omega r / c) dr."""
    ctx = ctx or DEFAULT_CTX
    return RadialKernel(spec, ctx, c).integrals(L, real(ctx, omega), f, i)[2]


# ── One-photon multipole amplitudes ───────────────────────────────────

def _electric_parts(L: int, kb: int, ka: int, ints, ctx: PrecisionCtx) -> tuple:
    """(velocity, length) amplitudes of an electric multipole, common factor included."""
    C = reduced_c(kb, L, ka, ctx)
    if C == 0:
        zero = ctx.mpf(0)
        return zero, zero
    mp = ctx.mp
    dk = ka - kb
    ip_lo, im_lo, _ = ints(L - 1)
    _, _, j_mid = ints(L)
    ip_hi, im_hi, _ = ints(L + 1)
    length = j_mid + mp.mpf(dk) / (L + 1) * ip_hi - im_hi
    velocity = (-mp.mpf(dk) / (2 * L + 1) * ip_lo
                + mp.mpf(dk * L) / ((L + 1) * (2 * L + 1)) * ip_hi
                - mp.mpf(L) / (2 * L + 1) * (im_lo + im_hi))
    pref = mp.sqrt(mp.mpf(L + 1) / L) * C
    return pref * velocity, pref * length


def _magnetic(L: int, kb: int, ka: int, ints, ctx: PrecisionCtx) -> mpmath.mpf:
    C = reduced_c(-kb, L, ka, ctx)
    if C == 0 or ka + kb == 0:
        return ctx.mpf(0)
    mp = ctx.mp
    ip, _, _ = ints(L)
    return mp.sqrt(mp.mpf(L + 1) / L) * mp.mpf(ka + kb) / (L + 1) * C * ip


def _combine(L: int, G, velocity, length, ctx: PrecisionCtx):
    # T(G) = T_vel + G sqrt(L/(L+1)) (T_len - T_vel)
    return velocity + G * ctx.mp.sqrt(ctx.mpf(L) / (L + 1)) * (length - velocity)


def _amplitude_parts(multipole: Multipole, b: RadialOrbital, a: RadialOrbital, omega,
                     kernel: RadialKernel, fixed: str) -> tuple:
    ctx = kernel.ctx

    def ints(order):
        return kernel.integrals(order, omega, b, a, fixed)

    kb, ka = b.kappa.kappa, a.kappa.kappa
    if multipole.is_electric:
        return _electric_parts(multipole.L, kb, ka, ints, ctx)
    m = _magnetic(multipole.L, kb, ka, ints, ctx)
    return m, m


def reduced_amplitude(multipole: Multipole, gauge: GaugeChoice, f: RadialOrbital, i: RadialOrbital,
                      omega, spec: BasisSpec, ctx: PrecisionCtx | None = None, c=None,
                      kernel: RadialKernel | None = None, strict: bool = False) -> mpmath.mpf:
    """<f || T^(sigma L)(G, omega) || i>; magnetic multipoles ignore the gauge.

    A forbidden transition gives zero, or SelectionRuleError when `strict`.
    """
    ctx = ctx or DEFAULT_CTX
    if not multipole.connects(f.kappa.kappa, i.kappa.kappa):
        if strict:
            raise SelectionRuleError(
                f"{multipole.name} does not connect kappa={i.kappa.kappa} to kappa={f.kappa.kappa}")
        return ctx.mpf(0)
    kernel = kernel or RadialKernel(spec, ctx, c)
    omega = real(ctx, omega)
    velocity, length = _amplitude_parts(multipole, f, i, omega, kernel, "right")
    if not multipole.is_electric:
        return velocity
    return _combine(multipole.L, gauge.parameter(multipole.L, ctx), velocity, length, ctx)


# ── Second-order sum ──────────────────────────────────────────────────

def _transition_energy(i: RadialOrbital, f: RadialOrbital):
    omega_t = i.energy - f.energy
    if omega_t <= 0:
        raise DomainError(f"initial state must lie above the final state (omega_t = {omega_t})")
    return omega_t


def _check_spectra(spectra: dict, kappas) -> BasisSpec:
    missing = [k for k in kappas if k not in spectra]
    if missing:
        raise SpectrumError(f"intermediate spectra missing for kappa {missing}")
    specs = {spectra[k].spec for k in kappas}
    if len(specs) > 1:
        raise SpectrumError("intermediate spectra were computed in different bases")
    return next(iter(specs))


class _SecondOrder:
    """Per-node accumulation of X_K for every gauge and restriction."""

    def __init__(self, channel: MultipoleChannel, i: RadialOrbital, f: RadialOrbital, spectra: dict,
                 ctx: PrecisionCtx, c=None, kernel: RadialKernel | None = None):
        channel.check(i.kappa.kappa, f.kappa.kappa)
        self.channel, self.i, self.f = channel, i, f
        self.ctx = ctx
        self.omega_t = _transition_energy(i, f)
        self.ranks = channel.ranks(i.kappa.kappa, f.kappa.kappa)
        kappas = []
        for t1, t2 in channel.assignments():
            for order in ((t1, t2), (t2, t1)):
                for k in intermediate_kappas(order[0], order[1], i.kappa.kappa, f.kappa.kappa):
                    if k not in kappas:
                        kappas.append(k)
        spec = _check_spectra(spectra, kappas)
        self.spectra = {k: spectra[k] for k in kappas}
        self.kernel = kernel or RadialKernel(spec, ctx, c)
        self.guard = ctx.mpf(RESONANCE_GUARD)

    def amplitudes(self, omega1, t1: Multipole, t2: Multipole) -> dict:
        """{(gauge kind, restriction): {K: X_K}} for the ordered assignment (t1, t2)."""
        ctx, mp = self.ctx, self.ctx.mp
        i, f = self.i, self.f
        omega2 = self.omega_t - omega1
        two_ji, two_jf = i.kappa.two_j, f.kappa.two_j
        L1, L2 = t1.L, t2.L
        g1 = {g.kind: g.parameter(L1, ctx) for g in GAUGES}
        g2 = {g.kind: g.parameter(L2, ctx) for g in GAUGES}
        sums = {(g.kind, r): {K: mp.mpf(0) for K in self.ranks}
                for g in GAUGES for r in (Restriction.POSITIVE, Restriction.NEGATIVE)}

        first = set(intermediate_kappas(t1, t2, i.kappa.kappa, f.kappa.kappa))
        second = set(intermediate_kappas(t2, t1, i.kappa.kappa, f.kappa.kappa))
        for kappa_nu in sorted(first | second, key=lambda k: (abs(k), k)):
            spectrum = self.spectra[kappa_nu]
            two_jn = spectrum.kappa.two_j
            w1 = {K: six_j(2 * L2, 2 * L1, 2 * K, two_ji, two_jf, two_jn, ctx) for K in self.ranks}
            w2 = {K: (-1) ** (L1 + L2 - K) * six_j(2 * L1, 2 * L2, 2 * K, two_ji, two_jf, two_jn, ctx)
                  for K in self.ranks}
            for nu in spectrum.orbitals:
                d1 = nu.energy - i.energy + omega1
                d2 = nu.energy - i.energy + omega2
                if abs(d1) < self.guard or abs(d2) < self.guard:
                    raise ResonanceError(
                        f"{self.channel.name}: intermediate state {nu.index} of kappa={kappa_nu} is resonant "
                        f"at omega1={mpmath.nstr(omega1, 10)}")
                part = Restriction.POSITIVE if Restriction.POSITIVE.admits(nu) else Restriction.NEGATIVE
                if kappa_nu in first:
                    a1 = _amplitude_parts(t1, nu, i, omega1, self.kernel, "right")
                    a2 = _amplitude_parts(t2, f, nu, omega2, self.kernel, "left")
                    for kind in g1:
                        term = (_pick(t2, g2[kind], a2, ctx) * _pick(t1, g1[kind], a1, ctx)) / d1
                        acc = sums[(kind, part)]
                        for K in self.ranks:
                            acc[K] += w1[K] * term
                if kappa_nu in second:
                    b2 = _amplitude_parts(t2, nu, i, omega2, self.kernel, "right")
                    b1 = _amplitude_parts(t1, f, nu, omega1, self.kernel, "left")
                    for kind in g1:
                        term = (_pick(t1, g1[kind], b1, ctx) * _pick(t2, g2[kind], b2, ctx)) / d2
                        acc = sums[(kind, part)]
                        for K in self.ranks:
                            acc[K] += w2[K] * term

        out = {}
        for kind in g1:
            pos, neg = sums[(kind, Restriction.POSITIVE)], sums[(kind, Restriction.NEGATIVE)]
            for r, parts in ((Restriction.POSITIVE, (pos,)), (Restriction.NEGATIVE, (neg,)),
                             (Restriction.ALL, (pos, neg))):
                out[(kind, r)] = {
                    K: (-1) ** ((two_ji + two_jf) // 2 + K) * mp.sqrt(2 * K + 1) * mp.fsum(p[K] for p in parts)
                    for K in self.ranks
                }
        return out

    def density(self, omega1) -> dict:
        """{(gauge kind, restriction): dw/domega1} in atomic units, all assignments summed."""
        ctx, mp = self.ctx, self.ctx.mp
        c = self.kernel.c
        omega2 = self.omega_t - omega1
        out = {}
        for t1, t2 in self.channel.assignments():
            pref = (omega1 * omega2 * (2 * t1.L + 1) * (2 * t2.L + 1)
                    / (mp.pi * c * c * (self.i.kappa.two_j + 1)))
            for key, xs in self.amplitudes(omega1, t1, t2).items():
                out[key] = out.get(key, mp.mpf(0)) + pref * mp.fsum(x * x for x in xs.values())
        return out


def _pick(multipole: Multipole, G, parts: tuple, ctx: PrecisionCtx):
    velocity, length = parts
    if not multipole.is_electric:
        return velocity
    return _combine(multipole.L, G, velocity, length, ctx)


def _spectra_ctx(spectra: dict) -> PrecisionCtx:
    digits = {s.digits for s in spectra.values()}
    if len(digits) != 1:
        raise SpectrumError(f"spectra computed at different precisions: {sorted(digits)}")
    return PrecisionCtx(digits.pop())


def _spectra_c(spectra: dict) -> str:
    cs = {s.c for s in spectra.values()}
    if len(cs) != 1:
        raise SpectrumError("spectra computed with different speeds of light")
    return cs.pop()


def second_order_sum(channel: MultipoleChannel, gauge: GaugeChoice, spectra: dict,
                     i: RadialOrbital, f: RadialOrbital, omega1,
                     restriction: Restriction = Restriction.ALL, assignment: tuple | None = None) -> dict:
    """{K: X_K} for one ordered multipole assignment (default: channel order)."""
    ctx = _spectra_ctx(spectra)
    engine = _SecondOrder(channel, i, f, spectra, ctx, _spectra_c(spectra))
    omega1 = real(ctx, omega1)
    if not 0 < omega1 < engine.omega_t:
        raise DomainError(f"omega1 must lie strictly inside (0, {mpmath.nstr(engine.omega_t, 12)})")
    if gauge.kind is GaugeKind.CUSTOM:
        raise DomainError("second-order sums are tabulated for the length and velocity gauges only")
    t1, t2 = assignment or (channel.first, channel.second)
    return engine.amplitudes(omega1, t1, t2)[(gauge.kind, Restriction(restriction))]


def differential_rate(channel: MultipoleChannel, gauge: GaugeChoice, i: RadialOrbital, f: RadialOrbital,
                      omega1, spectra: dict, restriction: Restriction = Restriction.ALL) -> mpmath.mpf:
    """dw/domega1 in s^-1 per hartree of omega1."""
    ctx = _spectra_ctx(spectra)
    engine = _SecondOrder(channel, i, f, spectra, ctx, _spectra_c(spectra))
    omega1 = real(ctx, omega1)
    if not 0 <= omega1 <= engine.omega_t:
        raise DomainError("omega1 must lie in [0, omega_t]")
    if omega1 == 0 or omega1 == engine.omega_t:
        return ctx.mpf(0)
    if gauge.kind is GaugeKind.CUSTOM:
        raise DomainError("rates are tabulated for the length and velocity gauges only")
    return engine.density(omega1)[(gauge.kind, Restriction(restriction))] / ctx.mpf(ATOMIC_TIME)


# ── Totals ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RateResult:
    """Total rates of one channel in both gauges and all three restrictions (s^-1)."""
    channel: str
    Z: float
    omega_t: mpmath.mpf
    split: dict = field(repr=False)          # {gauge: {restriction: rate}}
    differential: tuple = field(repr=False)  # ((omega1, dw/domega1), ...) length gauge, full sum
    magnetic_only: bool = False
    quad_points: int = DEFAULT_QUAD_POINTS
    digits: int = 34

    @property
    def total_length(self) -> mpmath.mpf:
        return self.split[GaugeKind.LENGTH.value][Restriction.ALL.value]

    @property
    def total_velocity(self) -> mpmath.mpf:
        return self.split[GaugeKind.VELOCITY.value][Restriction.ALL.value]

    @property
    def delta_lv(self):
        """|W_len - W_vel| / W_len, or None for gauge-independent channels."""
        if self.magnetic_only:
            return None
        return abs(self.total_length - self.total_velocity) / self.total_length

    @property
    def lifetime(self) -> mpmath.mpf:
        """Partial lifetime 1/W^T in seconds."""
        return 1 / self.total_length

    def rate(self, gauge: str = "length", restriction: str = "all") -> mpmath.mpf:
        return self.split[GaugeKind(gauge).value][Restriction(restriction).value]

    def rows(self) -> list:
        """One row per (gauge, restriction); magnetic-only channels report one gauge."""
        gauges = ("velocity",) if self.magnetic_only else ("length", "velocity")
        delta = self.delta_lv
        return [
            {"Z": self.Z, "channel": self.channel, "restriction": r.value, "gauge": g,
             "rate": self.split[g][r.value], "delta_lv": delta}
            for g in gauges for r in Restriction
        ]

    def to_dict(self) -> dict:
        def fmt(x):
            # guard digits so a reloaded result prints exactly like a fresh one
            return None if x is None else to_decimal(x, self.digits + 5)

        return {
            "channel": self.channel,
            "Z": self.Z,
            "omega_t": fmt(self.omega_t),
            "quad_points": self.quad_points,
            "digits": self.digits,
            "rates": {g: {r: fmt(v) for r, v in by_r.items()} for g, by_r in self.split.items()},
            "delta_lv": fmt(self.delta_lv),
            "lifetime": fmt(self.lifetime),
            "differential": [[fmt(w), fmt(d)] for w, d in self.differential],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RateResult":
        ctx = PrecisionCtx(int(data["digits"]))
        split = {g: {r: ctx.mpf(v) for r, v in by_r.items()} for g, by_r in data["rates"].items()}
        differential = tuple((ctx.mpf(w), ctx.mpf(d)) for w, d in data["differential"])
        return cls(data["channel"], data["Z"], ctx.mpf(data["omega_t"]), split, differential,
                   data["delta_lv"] is None, int(data["quad_points"]), ctx.digits)


def total_rate(channel: MultipoleChannel, i: RadialOrbital, f: RadialOrbital, spectra: dict,
               quad_points: int = DEFAULT_QUAD_POINTS, cancel=None) -> RateResult:
    """Gauss-Legendre integral of dw/domega1 over [0, omega_t].

    `cancel`, if given, is polled between quadrature nodes and aborts the
    run by returning None when it reports true.
    """
    ctx = _spectra_ctx(spectra)
    engine = _SecondOrder(channel, i, f, spectra, ctx, _spectra_c(spectra))
    mp = ctx.mp
    half = engine.omega_t / 2
    tau = ctx.mpf(ATOMIC_TIME)
    acc = {}
    differential = []
    for node, (x, w) in enumerate(gauss_legendre_nodes(quad_points, ctx), start=1):
        if cancel is not None and cancel():
            logger.info("%s: cancelled after %d of %d nodes", channel.name, node - 1, quad_points)
            return None
        omega1 = half + half * x
        dens = engine.density(omega1)
        for key, value in dens.items():
            acc[key] = acc.get(key, mp.mpf(0)) + half * w * value
        differential.append((omega1, dens[(GaugeKind.LENGTH, Restriction.ALL)] / tau))
        logger.debug("%s node %d/%d: omega1=%s", channel.name, node, quad_points, mpmath.nstr(omega1, 10))

    split = {g.kind.value: {r.value: acc[(g.kind, r)] / tau for r in Restriction} for g in GAUGES}
    spectrum = next(iter(spectra.values()))
    result = RateResult(channel.name, spectrum.nuc.Z, engine.omega_t, split, tuple(differential),
                        channel.magnetic_only, quad_points, ctx.digits)
    logger.info("%s Z=%s: W^T = %s s^-1", channel.name, spectrum.nuc.Z, mpmath.nstr(result.total_length, 11))
    return result


def channel_sum(channels, i: RadialOrbital, f: RadialOrbital, spectra: dict,
                quad_points: int = DEFAULT_QUAD_POINTS) -> tuple:
    """(summed W^T in the length gauge, per-channel RateResults)."""
    names = [ch.name for ch in channels]
    if len(set(names)) != len(names):
        raise DomainError(f"channels must be distinct, got {names}")
    results = [total_rate(ch, i, f, spectra, quad_points) for ch in channels]
    return sum_results(results), results


def sum_results(results) -> mpmath.mpf:
    """Channels add incoherently after angular integration."""
    if not results:
        raise DomainError("no channel results to sum")
    ctx = PrecisionCtx(results[0].digits)
    return ctx.mp.fsum(r.total_length for r in results)


def transition_states(spectra: dict, initial: tuple, final: tuple) -> tuple:
    """(i, f) orbitals for (n, kappa) labels, e.g. ((2, -1), (1, -1))."""
    out = []
    for n, kappa in (initial, final):
        if kappa not in spectra:
            raise SpectrumError(f"no spectrum for kappa={kappa}")
        out.append(spectra[kappa].bound_state(n))
    return tuple(out)
