import pytest
from hypothesis import given, settings, strategies as st

from tpdc.core.basis import (
    BasisKind, BasisSpec, MatrixTag, NuclearModel, basis_derivatives, basis_values, bessel_matrix,
    derivative_matrix, endpoint_values, eval_basis, exponential_knots, gram_matrix,
    kappa_over_r_matrix, potential_matrix,
)
from tpdc.core.errors import DomainError, SingularEntryError
from tpdc.core.specfun import PrecisionCtx, sph_bessel_j

CTX = PrecisionCtx(34)


def quad(ctx, f, points):
    return ctx.mp.quad(f, points)


class TestBasisSpec:
    def test_bpolynomial_order_is_count_minus_one(self):
        spec = BasisSpec.bpolynomial(10, 5.0)
        assert spec.kind is BasisKind.BPOLYNOMIAL
        assert spec.order == 9
        assert spec.active == tuple(range(1, 10))

    def test_bpolynomial_rejects_knots(self):
        with pytest.raises(DomainError):
            BasisSpec(BasisKind.BPOLYNOMIAL, 3, 4, 1.0, (0, 1))

    def test_spline_knots(self):
        spec = BasisSpec.bspline(4, 10, 30.0, 1e-2)
        assert len(spec.knots) == 14
        assert spec.knots[:4] == (0.0,) * 4
        assert spec.knots[-4:] == (30.0,) * 4
        assert list(spec.knots) == sorted(spec.knots)

    def test_spline_rejects_bad_knots(self):
        with pytest.raises(DomainError):
            BasisSpec(BasisKind.BSPLINE, 2, 3, 1.0, (0, 0, 0.5, 0.4, 1))
        with pytest.raises(DomainError):
            BasisSpec(BasisKind.BSPLINE, 2, 3, 1.0, (0, 0, 0.5, 1))

    def test_exponential_knots_validation(self):
        with pytest.raises(DomainError):
            exponential_knots(5, 4, 10.0)
        with pytest.raises(DomainError):
            exponential_knots(3, 8, 1.0, first_knot=2.0)

    def test_radius_must_be_positive(self):
        with pytest.raises(DomainError):
            BasisSpec.bpolynomial(5, 0.0)

    def test_describe_is_json_ready(self):
        d = BasisSpec.bspline(3, 5, 2.0, 0.1).describe()
        assert d["kind"] == "bspline"
        assert all(isinstance(t, str) for t in d["knots"])


class TestEvaluation:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 1), st.sampled_from(["bpoly", "bspline"]))
    def test_partition_of_unity(self, frac, kind):
        spec = BasisSpec.bpolynomial(8, 3.0) if kind == "bpoly" else BasisSpec.bspline(4, 9, 3.0, 0.05)
        values = basis_values(spec, frac * 3.0, CTX)
        assert abs(CTX.mp.fsum(values) - 1) < CTX.rel_tol(4)
        assert all(v >= -CTX.rel_tol(4) for v in values)

    @pytest.mark.parametrize("spec", [BasisSpec.bpolynomial(7, 2.0), BasisSpec.bspline(4, 8, 2.0, 0.05)])
    def test_endpoint_values(self, spec):
        origin, wall = endpoint_values(spec, CTX)
        assert origin == [1] + [0] * (spec.count - 1)
        assert wall == [0] * (spec.count - 1) + [1]

    @pytest.mark.parametrize("spec", [BasisSpec.bpolynomial(6, 2.0), BasisSpec.bspline(4, 8, 2.0, 0.05)])
    def test_derivatives_match_finite_difference(self, spec):
        mp = CTX.mp
        r = CTX.mpf("0.7")
        h = CTX.mpf("1e-12")
        plus, minus = basis_values(spec, r + h, CTX), basis_values(spec, r - h, CTX)
        for d, a, b in zip(basis_derivatives(spec, r, CTX), plus, minus):
            assert abs(d - (a - b) / (2 * h)) < mp.mpf("1e-15")

    def test_eval_basis_bounds(self):
        spec = BasisSpec.bpolynomial(4, 1.0)
        with pytest.raises(DomainError):
            eval_basis(spec, 4, 0.5)
        with pytest.raises(DomainError):
            eval_basis(spec, 0, 1.5)


class TestMatrices:
    spec = BasisSpec.bpolynomial(7, 3.0)

    def test_gram_closed_form_matches_quadrature(self):
        C = gram_matrix(self.spec, ctx=CTX)
        assert C.tag is MatrixTag.C
        for i, j in [(0, 0), (1, 4), (3, 3), (6, 2)]:
            ref = quad(CTX, lambda r: eval_basis(self.spec, i, r, CTX) * eval_basis(self.spec, j, r, CTX), [0, 3])
            assert abs(C[i, j] - ref) < CTX.rel_tol(6)

    def test_gram_sums_to_radius(self):
        # sum_ij B_i B_j = 1, so the entries integrate to R
        C = gram_matrix(self.spec, ctx=CTX)
        total = CTX.mp.fsum(C.values[p, q] for p in range(C.size) for q in range(C.size))
        assert abs(total - 3) < CTX.rel_tol(4)

    def test_derivative_matrix_closed_form(self):
        D = derivative_matrix(self.spec, ctx=CTX)
        for i, j in [(0, 1), (2, 5), (4, 4), (6, 0)]:
            ref = quad(CTX, lambda r: basis_values(self.spec, r, CTX)[i]
                       * basis_derivatives(self.spec, r, CTX)[j], [0, 3])
            assert abs(D[i, j] - ref) < CTX.rel_tol(6)

    @pytest.mark.parametrize("spec", [BasisSpec.bpolynomial(7, 3.0), BasisSpec.bspline(4, 9, 3.0, 0.05)])
    def test_derivative_matrix_integration_by_parts(self, spec):
        # D_ij + D_ji = B_i(R) B_j(R) - B_i(0) B_j(0)
        D = derivative_matrix(spec, ctx=CTX)
        origin, wall = endpoint_values(spec, CTX)
        for i in range(spec.count):
            for j in range(spec.count):
                expected = wall[i] * wall[j] - origin[i] * origin[j]
                assert abs(D[i, j] + D[j, i] - expected) < CTX.rel_tol(6)

    def test_kappa_over_r_rejects_origin_function(self):
        with pytest.raises(SingularEntryError):
            kappa_over_r_matrix(self.spec, -1, ctx=CTX)
        with pytest.raises(DomainError):
            kappa_over_r_matrix(self.spec, 0, self.spec.active, CTX)

    def test_kappa_over_r_matches_quadrature(self):
        K = kappa_over_r_matrix(self.spec, 2, self.spec.active, CTX)
        ref = quad(CTX, lambda r: 2 * eval_basis(self.spec, 1, r, CTX) * eval_basis(self.spec, 3, r, CTX) / r,
                   [0, 3])
        assert abs(K[1, 3] - ref) < CTX.rel_tol(6)

    def test_point_potential_is_scaled_inverse_r(self):
        active = self.spec.active
        V = potential_matrix(self.spec, NuclearModel(3.0), active, CTX)
        K = kappa_over_r_matrix(self.spec, 1, active, CTX)
        for i in active:
            for j in active:
                assert abs(V[i, j] + 3 * K[i, j]) < CTX.rel_tol(4)

    # splines integrate 1/r by fixed-order Gauss rules, good to a few digits
    @pytest.mark.parametrize("spec, tol", [(BasisSpec.bpolynomial(7, 3.0), "1e-20"),
                                           (BasisSpec.bspline(4, 9, 3.0, 0.05), "1e-3")])
    def test_uniform_sphere_potential(self, spec, tol):
        nuc = NuclearModel(10.0, "uniform", 0.2)
        V = potential_matrix(spec, nuc, spec.active, CTX)
        breaks = sorted(set([0.0, 0.2, 3.0] + spec.breakpoints()))
        for i, j in [(1, 1), (1, 2), (3, 5), (6, 6)]:
            ref = quad(CTX, lambda r: eval_basis(spec, i, r, CTX) * eval_basis(spec, j, r, CTX)
                       * nuc.potential(r, CTX), breaks)
            assert abs(V[i, j] - ref) < CTX.mpf(tol) * max(1, abs(ref))

    def test_uniform_sphere_must_fit_in_cavity(self):
        with pytest.raises(DomainError):
            potential_matrix(self.spec, NuclearModel(1.0, "uniform", 5.0), self.spec.active, CTX)


class TestBesselMatrix:
    spec = BasisSpec.bpolynomial(7, 3.0)

    def test_zero_frequency_monopole_is_gram(self):
        J = bessel_matrix(self.spec, 0, 0, ctx=CTX)
        C = gram_matrix(self.spec, ctx=CTX)
        for i in range(7):
            for j in range(7):
                assert abs(J[i, j] - C[i, j]) < CTX.rel_tol(4)

    def test_zero_frequency_higher_orders_vanish(self):
        J = bessel_matrix(self.spec, 2, 0, ctx=CTX)
        assert all(J.values[p, q] == 0 for p in range(7) for q in range(7))

    @pytest.mark.parametrize("L", [0, 1, 3])
    def test_closed_form_matches_quadrature(self, L):
        c = "137.0359895"
        omega = CTX.mpf(400)
        J = bessel_matrix(self.spec, L, omega, ctx=CTX, c=c)
        k = omega / CTX.mpf(c)
        for i, j in [(0, 0), (2, 4), (6, 6)]:
            ref = quad(CTX, lambda r: eval_basis(self.spec, i, r, CTX) * eval_basis(self.spec, j, r, CTX)
                       * sph_bessel_j(L, k * r, CTX), [0, 1.5, 3])
            assert abs(J[i, j] - ref) < CTX.mpf("1e-22")

    @pytest.mark.parametrize("L", [0, 1, 2])
    def test_continuous_in_frequency(self, L):
        omega = CTX.mpf(50)
        J = bessel_matrix(self.spec, L, omega, ctx=CTX)
        nudged = bessel_matrix(self.spec, L, omega + CTX.mpf("1e-12"), ctx=CTX)
        for i, j in [(0, 0), (1, 5), (6, 6)]:
            assert abs(nudged[i, j] - J[i, j]) < CTX.mpf("1e-12")

    def test_small_frequency_approaches_gram(self):
        J = bessel_matrix(self.spec, 0, "1e-8", ctx=CTX)
        C = gram_matrix(self.spec, ctx=CTX)
        assert max(abs(J[i, j] - C[i, j]) for i in range(7) for j in range(7)) < CTX.mpf("1e-18")

    def test_spline_quadrature_matches_adaptive(self):
        spec = BasisSpec.bspline(4, 8, 3.0, 0.05)
        omega = CTX.mpf(200)
        J = bessel_matrix(spec, 1, omega, spec.active, CTX)
        k = omega / CTX.mpf("137.0359895")
        ref = quad(CTX, lambda r: eval_basis(spec, 4, r, CTX) ** 2 * sph_bessel_j(1, k * r, CTX),
                   spec.breakpoints())
        assert abs(J[4, 4] - ref) < CTX.mpf("1e-6")

    def test_domain(self):
        with pytest.raises(DomainError):
            bessel_matrix(self.spec, -1, 1, ctx=CTX)
        with pytest.raises(DomainError):
            bessel_matrix(self.spec, 1, -1, ctx=CTX)

    def test_lookup_by_basis_index(self):
        C = gram_matrix(self.spec, (2, 5), CTX)
        assert C[5, 2] == C.values[1, 0]
        assert C[2, 2] == C.values[0, 0]
        with pytest.raises(KeyError):
            C[0, 0]

    def test_csv_dump(self):
        C = gram_matrix(self.spec, (1, 2), CTX)
        lines = C.to_csv(10).splitlines()
        assert lines[0] == "row,col,value"
        assert len(lines) == 5
        assert lines[1].startswith("1,1,")
