import math
import threading

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from tpdc.core.errors import DomainError, PoleError
from tpdc.core.specfun import (
    PrecisionCtx, binomial, gamma, gauss_legendre_integrate, gauss_legendre_nodes, hyp2f1,
    inc_beta, pochhammer, reg_hyp2f3, sph_bessel_j, to_decimal,
)


def close(a, b, tol):
    return abs(a - b) <= tol * max(1, abs(b))


class TestPrecisionCtx:
    def test_rejects_low_precision(self):
        with pytest.raises(DomainError):
            PrecisionCtx(8)

    def test_contexts_are_independent(self):
        low, high = PrecisionCtx(20), PrecisionCtx(60)
        third_low = low.mpf(1) / 3
        third_high = high.mpf(1) / 3
        assert abs(third_high - high.mpf("0.333333333333333333333333333333333333333333333")) < high.rel_tol(16)
        assert third_low != third_high
        assert mpmath.mp.dps == 15

    def test_equal_digits_hash_alike(self):
        assert PrecisionCtx(40) == PrecisionCtx(40)
        assert hash(PrecisionCtx(40)) == hash(PrecisionCtx(40))

    def test_threads_do_not_share_precision(self):
        results = {}

        def work(digits):
            ctx = PrecisionCtx(digits)
            results[digits] = to_decimal(ctx.mp.sqrt(ctx.mpf(2)), digits)

        threads = [threading.Thread(target=work, args=(d,)) for d in (20, 50)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results[50].startswith("1.4142135623730950488016887242096980785696718753769")
        assert results[20].startswith("1.4142135623730950488")


class TestCombinatorics:
    @given(st.integers(0, 60), st.integers(-3, 63))
    def test_binomial_matches_math_comb(self, n, k):
        expected = math.comb(n, k) if 0 <= k <= n else 0
        assert binomial(n, k) == expected

    def test_pochhammer(self, ctx):
        assert pochhammer(3, 0, ctx) == 1
        assert pochhammer(3, 4, ctx) == 3 * 4 * 5 * 6
        assert close(pochhammer("0.5", 2, ctx), ctx.mpf("0.75"), ctx.eps)
        with pytest.raises(DomainError):
            pochhammer(1, -1, ctx)

    def test_gamma_pole(self, ctx):
        assert gamma(5, ctx) == 24
        with pytest.raises(PoleError):
            gamma(-2, ctx)


class TestHypergeometric:
    def test_inc_beta_complete(self, ctx):
        # B(1; h, k) = Gamma(h)Gamma(k)/Gamma(h+k)
        assert close(inc_beta(1, 3, 4, ctx), ctx.mpf(1) / 60, ctx.rel_tol(3))

    def test_inc_beta_polynomial(self, ctx):
        # k = 1: integral of t^(h-1) = x^h / h
        x = ctx.mpf("0.3")
        assert close(inc_beta(x, 4, 1, ctx), x ** 4 / 4, ctx.rel_tol(3))

    @pytest.mark.parametrize("x, h, k", [("0.3", 3, 4), ("0.7", "2.5", 5), ("0.05", 10, 21)])
    def test_inc_beta_complement(self, ctx, x, h, k):
        # B(x; h, k) + B(1 - x; k, h) = B(1; h, k)
        x, h, k = ctx.mpf(x), ctx.mpf(h), ctx.mpf(k)
        whole = ctx.mp.beta(h, k)
        assert close(inc_beta(x, h, k, ctx) + inc_beta(1 - x, k, h, ctx), whole, ctx.rel_tol(4))

    def test_inc_beta_domain(self, ctx):
        with pytest.raises(DomainError):
            inc_beta(2, 1, 1, ctx)
        assert inc_beta(0, 2, 3, ctx) == 0

    def test_hyp2f1_terminating(self, ctx):
        # 2F1(-2, b; c; x) = 1 - 2bx/c + b(b+1)x^2/(c(c+1))
        b, c, x = 3, 5, ctx.mpf("0.4")
        expected = 1 - 2 * b * x / c + b * (b + 1) * x ** 2 / (c * (c + 1))
        assert close(hyp2f1(-2, b, c, x, ctx), expected, ctx.rel_tol(3))

    def test_hyp2f1_pole(self, ctx):
        with pytest.raises(PoleError):
            hyp2f1(1, 2, -3, "0.5", ctx)

    def test_reg_hyp2f3_at_zero(self, ctx):
        mp = ctx.mp
        value = reg_hyp2f3(1, 2, "1.5", "2.5", "3.5", 0, ctx)
        assert close(value, mp.rgamma(1.5) * mp.rgamma(2.5) * mp.rgamma(3.5), ctx.rel_tol(3))

    def test_reg_hyp2f3_nonpositive_lower(self, ctx):
        # 1/Gamma(b) vanishes on the pole; the series starts where b + s > 0
        value = reg_hyp2f3(1, 1, 0, 1, 1, "-0.5", ctx)
        mp = ctx.mp
        direct = mp.nsum(lambda s: mp.rf(1, s) ** 2 * mp.rgamma(s) * mp.rgamma(1 + s) ** 2
                         * mp.mpf("-0.5") ** s / mp.factorial(s), [1, mp.inf])
        assert close(value, direct, ctx.rel_tol(6))

    def test_reg_hyp2f3_matches_mpmath(self, ctx50):
        mp = ctx50.mp
        args = (mp.mpf("1.5"), mp.mpf(2), mp.mpf("2.5"), mp.mpf(10), mp.mpf("10.5"), mp.mpf(-30))
        ref = mp.hyp2f3(*args) * mp.rgamma(args[2]) * mp.rgamma(args[3]) * mp.rgamma(args[4])
        assert close(reg_hyp2f3(*args, ctx50), ref, ctx50.rel_tol(8))


class TestBessel:
    @pytest.mark.parametrize("L", [0, 1, 2, 5])
    def test_closed_forms(self, ctx, L):
        mp = ctx.mp
        x = ctx.mpf("2.75")
        closed = {
            0: mp.sin(x) / x,
            1: mp.sin(x) / x ** 2 - mp.cos(x) / x,
            2: (3 / x ** 2 - 1) * mp.sin(x) / x - 3 * mp.cos(x) / x ** 2,
        }
        value = sph_bessel_j(L, x, ctx)
        if L in closed:
            assert close(value, closed[L], ctx.rel_tol(4))
        else:
            # recurrence j_{L+1} = (2L+1)/x j_L - j_{L-1}
            lhs = sph_bessel_j(L, x, ctx)
            rhs = (2 * L - 1) / x * sph_bessel_j(L - 1, x, ctx) - sph_bessel_j(L - 2, x, ctx)
            assert close(lhs, rhs, ctx.rel_tol(6))

    def test_small_argument_branch(self, ctx):
        x = ctx.mpf("1e-3")
        # leading term x^L / (2L+1)!!
        assert close(sph_bessel_j(3, x, ctx), x ** 3 / 105, ctx.mpf("1e-6"))

    def test_origin(self, ctx):
        assert sph_bessel_j(0, 0, ctx) == 1
        assert sph_bessel_j(2, 0, ctx) == 0

    def test_domain(self, ctx):
        with pytest.raises(DomainError):
            sph_bessel_j(-1, 1, ctx)
        with pytest.raises(DomainError):
            sph_bessel_j(1, -1, ctx)


class TestQuadrature:
    def test_weights_sum_to_two(self, ctx):
        for n in (1, 5, 15):
            assert close(ctx.mp.fsum(w for _, w in gauss_legendre_nodes(n, ctx)), 2, ctx.rel_tol(3))

    def test_nodes_ascending_and_symmetric(self, ctx):
        nodes = [x for x, _ in gauss_legendre_nodes(8, ctx)]
        assert nodes == sorted(nodes)
        for a, b in zip(nodes, reversed(nodes)):
            assert abs(a + b) < ctx.rel_tol(3)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 29))
    def test_exact_for_polynomials(self, degree):
        ctx = PrecisionCtx(34)
        value = gauss_legendre_integrate(lambda x: x ** degree, 0, 2, 15, ctx)
        assert close(value, ctx.mpf(2) ** (degree + 1) / (degree + 1), ctx.rel_tol(4))

    def test_rejects_empty_rule(self, ctx):
        with pytest.raises(DomainError):
            gauss_legendre_nodes(0, ctx)


def test_to_decimal_is_scientific(ctx):
    assert to_decimal(ctx.mpf("0.5"), 5) == "5.0000e-1"
    assert to_decimal(ctx.mpf(1234), 3) == "1.23e+3"
