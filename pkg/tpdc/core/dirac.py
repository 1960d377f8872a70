"""
Radial Dirac equation in a spherical cavity.

Builds the symmetric generalized eigenproblem A v = eps B v from the basis
matrices, solves it at working precision, classifies the pseudospectrum
and reconstructs radial orbitals.  Energies are total energies minus c^2.
"""

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum

import mpmath
import numpy as np
import scipy.linalg

from tpdc.core.basis import (
    BasisSpec, NuclearModel, SPEED_OF_LIGHT, basis_values, derivative_matrix, endpoint_values,
    gram_matrix, kappa_over_r_matrix, potential_matrix, real,
)
from tpdc.core.errors import (
    DomainError, NotPositiveDefinite, SpectrumError, SpuriousStateWarning,
)
from tpdc.core.specfun import DEFAULT_CTX, PrecisionCtx, to_decimal

logger = logging.getLogger(__name__)

SOLVERS = ("auto", "mpmath", "lapack")
BOND_VARIANTS = ("johnson", "literal")
LAPACK_MAX_DIGITS = 16
SPURIOUS_MARGIN = "1e-3"        # hartree below the lowest physical bound state


# ── Angular quantum numbers ───────────────────────────────────────────

@dataclass(frozen=True)
class AngularKappa:
    """Relativistic angular quantum number kappa."""
    kappa: int

    def __post_init__(self):
        if not isinstance(self.kappa, int) or self.kappa == 0:
            raise DomainError(f"kappa must be a non-zero integer, got {self.kappa!r}")

    @property
    def l(self) -> int:
        return self.kappa if self.kappa > 0 else -self.kappa - 1

    @property
    def two_j(self) -> int:
        return 2 * abs(self.kappa) - 1

    @property
    def j(self):
        return mpmath.mpf(self.two_j) / 2

    @property
    def label(self) -> str:
        """Spectroscopic symmetry label, e.g. s1/2, p1/2, p3/2."""
        return f"{'spdfghik'[self.l]}{self.two_j}/2"

    @classmethod
    def from_lj(cls, l: int, two_j: int) -> "AngularKappa":
        if two_j == 2 * l - 1 and l > 0:
            return cls(l)
        if two_j == 2 * l + 1:
            return cls(-(l + 1))
        raise DomainError(f"j = {two_j}/2 is not l +- 1/2 for l = {l}")


def _as_kappa(kappa) -> AngularKappa:
    return kappa if isinstance(kappa, AngularKappa) else AngularKappa(int(kappa))


# ── Orbitals and spectra ──────────────────────────────────────────────

class OrbitalClass(str, Enum):
    NEGATIVE_CONTINUUM = "negative"
    BOUND = "bound"
    POSITIVE_CONTINUUM = "positive"


@dataclass(frozen=True)
class RadialOrbital:
    """One pseudostate: energy and expansion coefficients of P and Q.

    Coefficient tuples have one entry per basis function; the entry of the
    function dropped at the origin is always zero.  P(R) = Q(R) is the
    natural boundary condition of the wall term, not a constraint on the
    trial space: bound states meet it, high pseudostates only roughly.
    """
    kappa: AngularKappa
    energy: mpmath.mpf
    p_coeffs: tuple = field(repr=False)
    q_coeffs: tuple = field(repr=False)
    orbital_class: OrbitalClass
    index: int = 0              # 1-based position in the ascending spectrum

    @property
    def is_positive_spectrum(self) -> bool:
        return self.orbital_class is not OrbitalClass.NEGATIVE_CONTINUUM


@dataclass(frozen=True)
class DiracSpectrum:
    """All 2n pseudostates of one kappa symmetry, ascending in energy."""
    spec: BasisSpec
    nuc: NuclearModel
    kappa: AngularKappa
    orbitals: tuple = field(repr=False)
    c: str = SPEED_OF_LIGHT
    digits: int = DEFAULT_CTX.digits
    bond_variant: str = "johnson"

    @property
    def ctx(self) -> PrecisionCtx:
        return PrecisionCtx(self.digits)

    def of_class(self, cls: OrbitalClass) -> list:
        return [o for o in self.orbitals if o.orbital_class is cls]

    @property
    def bound(self) -> list:
        return self.of_class(OrbitalClass.BOUND)

    def bound_state(self, n: int) -> RadialOrbital:
        """Bound orbital with principal quantum number n."""
        n_min = self.kappa.l + 1
        bound = self.bound
        if not n_min <= n < n_min + len(bound):
            raise SpectrumError(
                f"no bound {n}{self.kappa.label} state: basis holds n = {n_min}..{n_min + len(bound) - 1}")
        return bound[n - n_min]

    def diagnostics(self) -> dict:
        """Class counts, largest eigenpair residual and B-orthonormality defect."""
        ctx = self.ctx
        mp = ctx.mp
        A, B = assemble(self.spec, self.nuc, self.kappa, self.c, ctx, self.bond_variant)
        active = self.spec.active
        vectors = [_stack(mp, o, active) for o in self.orbitals]
        residual = mp.mpf(0)
        for o, v in zip(self.orbitals, vectors):
            r = A * v - o.energy * (B * v)
            scale = mp.mnorm(A, 1) + abs(o.energy) * mp.mnorm(B, 1)
            residual = max(residual, mp.norm(r) / scale)
        defect = mp.mpf(0)
        Bv = [B * v for v in vectors]
        for a, va in enumerate(vectors):
            for b in range(a, len(vectors)):
                dot = (va.T * Bv[b])[0, 0]
                defect = max(defect, abs(dot - (1 if a == b else 0)))
        return {
            "counts": {cls.value: len(self.of_class(cls)) for cls in OrbitalClass},
            "residual": residual,
            "orthonormality": defect,
        }

    # JSON-ready dump with full-precision decimal strings.
    def to_dict(self) -> dict:
        width = self.digits + 5
        return {
            "kappa": self.kappa.kappa,
            "c": self.c,
            "digits": self.digits,
            "bond_variant": self.bond_variant,
            "basis": self.spec.describe(),
            "nucleus": self.nuc.describe(),
            "orbitals": [
                {
                    "energy": to_decimal(o.energy, width),
                    "class": o.orbital_class.value,
                    "p": [to_decimal(x, width) for x in o.p_coeffs],
                    "q": [to_decimal(x, width) for x in o.q_coeffs],
                }
                for o in self.orbitals
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiracSpectrum":
        ctx = PrecisionCtx(int(data["digits"]))
        b = data["basis"]
        knots = tuple(float(t) for t in b["knots"]) if "knots" in b else None
        spec = BasisSpec(b["kind"], int(b["order"]), int(b["count"]), float(b["radius"]), knots)
        n = data["nucleus"]
        nuc = NuclearModel(float(n["Z"]), n["shape"], float(n["r_n"]) if "r_n" in n else None)
        kappa = AngularKappa(int(data["kappa"]))
        orbitals = tuple(
            RadialOrbital(kappa, ctx.mpf(o["energy"]),
                          tuple(ctx.mpf(x) for x in o["p"]), tuple(ctx.mpf(x) for x in o["q"]),
                          OrbitalClass(o["class"]), idx)
            for idx, o in enumerate(data["orbitals"], start=1)
        )
        return cls(spec, nuc, kappa, orbitals, data["c"], ctx.digits, data["bond_variant"])


def _stack(mp, orbital: RadialOrbital, active) -> mpmath.matrix:
    return mp.matrix([orbital.p_coeffs[i] for i in active] + [orbital.q_coeffs[i] for i in active])


# ── Assembly ──────────────────────────────────────────────────────────

def assemble(spec: BasisSpec, nuc: NuclearModel, kappa, c=None, ctx: PrecisionCtx | None = None,
             bond_variant: str = "johnson") -> tuple:
    """(A, B) over the active basis, P block first then Q block.

    A = [[V + c/2 b b^T,  c (Ds - K)],
         [-c (Ds + K),    V - 2c^2 C - c/2 b b^T]]
    with Ds = (D - D^T)/2, K the kappa/r matrix and b_i = B_i(R);
    B = diag(C, C).
    """
    ctx = ctx or DEFAULT_CTX
    if bond_variant not in BOND_VARIANTS:
        raise DomainError(f"unknown bond variant {bond_variant!r}; expected one of {BOND_VARIANTS}")
    kappa = _as_kappa(kappa)
    mp = ctx.mp
    c = real(ctx, SPEED_OF_LIGHT if c is None else c)
    active = spec.active
    n = len(active)

    C = gram_matrix(spec, active, ctx).values
    D = derivative_matrix(spec, active, ctx).values
    K = kappa_over_r_matrix(spec, kappa.kappa, active, ctx).values
    V = potential_matrix(spec, nuc, active, ctx).values
    at_origin, at_wall = endpoint_values(spec, ctx)
    a = [at_origin[i] for i in active]
    b = [at_wall[i] for i in active]

    # origin terms of the boundary action; a vanishes on the active set
    origin_pp = c if (kappa.kappa > 0 and bond_variant == "literal") else 1
    half_c = c / 2

    A = mp.matrix(2 * n, 2 * n)
    Bm = mp.matrix(2 * n, 2 * n)
    for p in range(n):
        for q in range(n):
            ds = (D[p, q] - D[q, p]) / 2
            A[p, q] = V[p, q] + half_c * b[p] * b[q] - c * origin_pp * a[p] * a[q]
            A[p, n + q] = c * (ds - K[p, q]) + half_c * a[p] * a[q]
            A[n + p, q] = -c * (ds + K[p, q]) + half_c * a[p] * a[q]
            A[n + p, n + q] = V[p, q] - 2 * c * c * C[p, q] - half_c * b[p] * b[q]
            Bm[p, q] = C[p, q]
            Bm[n + p, n + q] = C[p, q]
    logger.debug("assembled %dx%d Dirac matrices for kappa=%d", 2 * n, 2 * n, kappa.kappa)
    return A, Bm


# ── Generalized symmetric-definite eigenproblem ───────────────────────

def solve_generalized_eig(A, B, ctx: PrecisionCtx | None = None, solver: str = "auto") -> list:
    """Eigenpairs (eps, v) of A v = eps B v, ascending, with v^T B v = 1.

    The mpmath path factors B = L L^T, diagonalizes L^-1 A L^-T with
    Householder tridiagonalization and implicit QL, and back-transforms.
    The lapack path does the same in float64 through scipy.
    """
    ctx = ctx or DEFAULT_CTX
    if solver not in SOLVERS:
        raise DomainError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    if solver == "lapack" or (solver == "auto" and ctx.digits <= LAPACK_MAX_DIGITS):
        return _solve_lapack(A, B, ctx)
    mp = ctx.mp
    try:
        L = mp.cholesky(B)
    except (ValueError, ZeroDivisionError) as e:
        raise NotPositiveDefinite(
            f"Cholesky factorization of the {B.rows}x{B.rows} Gram matrix failed at {ctx.digits} digits "
            "(basis nearly linearly dependent)") from e
    L_inv = mp.inverse(L)
    S = L_inv * A * L_inv.T
    S = (S + S.T) / 2
    evals, evecs = mp.eigsy(S)
    back = L_inv.T * evecs
    size = A.rows
    pairs = []
    for k in range(size):
        v = mp.matrix([back[r, k] for r in range(size)])
        pairs.append((evals[k], v))
    pairs.sort(key=lambda ev: ev[0])
    return pairs


def _solve_lapack(A, B, ctx: PrecisionCtx) -> list:
    size = A.rows
    a = np.array([[float(A[r, s]) for s in range(size)] for r in range(size)])
    b = np.array([[float(B[r, s]) for s in range(size)] for r in range(size)])
    try:
        w, v = scipy.linalg.eigh(a, b)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"LAPACK generalized eigensolver rejected the Gram matrix: {e}") from e
    logger.debug("solved %dx%d generalized problem in float64", size, size)
    return [(ctx.mpf(float(w[k])), ctx.mp.matrix([ctx.mpf(float(x)) for x in v[:, k]]))
            for k in range(size)]


# ── Classification ────────────────────────────────────────────────────

def _fix_sign(p: list, q: list, ctx: PrecisionCtx):
    """Orient the vector so that P is positive next to the origin."""
    comps = p if any(x != 0 for x in p) else q
    big = max(abs(x) for x in comps)
    if big == 0:
        return p, q
    first = next(x for x in comps if abs(x) > big * ctx.eps * 100)
    if first < 0:
        return [-x for x in p], [-x for x in q]
    return p, q


def classify(pairs: list, spec: BasisSpec, nuc: NuclearModel, kappa, c=None,
             ctx: PrecisionCtx | None = None, bond_variant: str = "johnson") -> DiracSpectrum:
    """Label eigenpairs as negative continuum, bound, or positive continuum."""
    ctx = ctx or DEFAULT_CTX
    kappa = _as_kappa(kappa)
    c_str = SPEED_OF_LIGHT if c is None else str(c)
    c = real(ctx, c_str)
    threshold = -2 * c * c
    active = spec.active
    n = len(active)
    if len(pairs) != 2 * n:
        raise SpectrumError(f"expected {2 * n} eigenpairs, got {len(pairs)}")

    orbitals = []
    for idx, (eps, v) in enumerate(sorted(pairs, key=lambda ev: ev[0]), start=1):
        p = [ctx.mpf(0)] * spec.count
        q = [ctx.mpf(0)] * spec.count
        for pos, i in enumerate(active):
            p[i] = v[pos]
            q[i] = v[n + pos]
        p, q = _fix_sign(p, q, ctx)
        if eps <= threshold:
            cls = OrbitalClass.NEGATIVE_CONTINUUM
        elif eps < 0:
            cls = OrbitalClass.BOUND
        else:
            cls = OrbitalClass.POSITIVE_CONTINUUM
        orbitals.append(RadialOrbital(kappa, eps, tuple(p), tuple(q), cls, idx))

    below = sum(1 for o in orbitals if o.orbital_class is OrbitalClass.NEGATIVE_CONTINUUM)
    if below != n:
        raise SpectrumError(
            f"kappa={kappa.kappa}: {below} states below -2c^2, expected {n} "
            f"(basis {spec.kind.value} count={spec.count} R={spec.radius}, {ctx.digits} digits)")

    spectrum = DiracSpectrum(spec, nuc, kappa, tuple(orbitals), c_str, ctx.digits, bond_variant)
    if kappa.kappa > 0:
        _check_spurious(spectrum, c, ctx)
    return spectrum


def _check_spurious(spectrum: DiracSpectrum, c, ctx: PrecisionCtx):
    kappa = spectrum.kappa
    Z = real(ctx, spectrum.nuc.Z)
    if Z >= abs(kappa.kappa) * c:
        return
    floor = exact_energy(kappa.l + 1, kappa.kappa, Z, c, ctx) - ctx.mpf(SPURIOUS_MARGIN)
    intruders = [o for o in spectrum.orbitals if o.is_positive_spectrum and o.energy < floor]
    if intruders:
        msg = (f"kappa={kappa.kappa}: {len(intruders)} eigenvalue(s) below the lowest physical "
               f"{kappa.l + 1}{kappa.label} level, lowest {mpmath.nstr(intruders[0].energy, 12)}")
        logger.warning(msg)
        warnings.warn(msg, SpuriousStateWarning, stacklevel=3)


# ── Convenience, oracle, reconstruction ───────────────────────────────

def solve_spectrum(spec: BasisSpec, nuc: NuclearModel, kappa, ctx: PrecisionCtx | None = None,
                   c=None, solver: str = "auto", bond_variant: str = "johnson") -> DiracSpectrum:
    """assemble -> solve_generalized_eig -> classify."""
    ctx = ctx or DEFAULT_CTX
    kappa = _as_kappa(kappa)
    logger.info("solving kappa=%d spectrum: Z=%s, %s count=%d R=%s, %d digits",
                kappa.kappa, nuc.Z, spec.kind.value, spec.count, spec.radius, ctx.digits)
    A, B = assemble(spec, nuc, kappa, c, ctx, bond_variant)
    pairs = solve_generalized_eig(A, B, ctx, solver)
    return classify(pairs, spec, nuc, kappa, c, ctx, bond_variant)


def exact_energy(n: int, kappa, Z, c=None, ctx: PrecisionCtx | None = None) -> mpmath.mpf:
    """Point-nucleus Dirac bound-state energy minus c^2."""
    ctx = ctx or DEFAULT_CTX
    k = kappa.kappa if isinstance(kappa, AngularKappa) else int(kappa)
    if k == 0:
        raise DomainError("kappa must be non-zero")
    if n < abs(k) or (k > 0 and n == k):
        raise DomainError(f"no bound state with n={n}, kappa={k}")
    mp = ctx.mp
    c = real(ctx, SPEED_OF_LIGHT if c is None else c)
    za = real(ctx, Z) / c
    if za >= abs(k):
        raise DomainError(f"Z alpha = {za} must be below |kappa| = {abs(k)}")
    gamma = mp.sqrt(k * k - za * za)
    return c * c / mp.sqrt(1 + (za / (n - abs(k) + gamma)) ** 2) - c * c


def reconstruct(orbital: RadialOrbital, spec: BasisSpec, r, ctx: PrecisionCtx | None = None) -> tuple:
    """(P(r), Q(r)) from the expansion coefficients."""
    ctx = ctx or DEFAULT_CTX
    vals = basis_values(spec, r, ctx)
    P = ctx.mp.fdot(orbital.p_coeffs, vals)
    Q = ctx.mp.fdot(orbital.q_coeffs, vals)
    return P, Q
