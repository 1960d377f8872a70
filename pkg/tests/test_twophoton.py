import json

import pytest

from tpdc.core.channels import GaugeChoice, Multipole, get_channel
from tpdc.core.errors import DomainError, ResonanceError, SelectionRuleError, SpectrumError
from tpdc.core.twophoton import (
    RadialKernel, RateResult, Restriction, channel_sum, differential_rate, radial_I, radial_J,
    reduced_amplitude, second_order_sum, sum_results, total_rate, transition_states,
)

E1 = Multipole("E", 1)
M1 = Multipole("M", 1)

# 2s1/2 -> 1s1/2 in hydrogen
REFERENCE_2E1 = 8.2290591586


@pytest.fixture(scope="module")
def states(spectra):
    return transition_states(spectra, (2, -1), (1, -1))


@pytest.fixture(scope="module")
def rate_2e1(spectra, states):
    i, f = states
    return total_rate(get_channel("2E1"), i, f, spectra, quad_points=6)


@pytest.fixture(scope="module")
def rate_2m1(spectra, states):
    i, f = states
    return total_rate(get_channel("2M1"), i, f, spectra, quad_points=4)


def rel(a, b):
    return abs(a - b) / abs(b)


class TestRadialIntegrals:
    def test_symmetry_under_exchange(self, spectra, small_spec, ctx):
        a = spectra[-1].bound_state(2)
        b = spectra[1].bound_state(2)
        omega = ctx.mpf("0.3")
        assert rel(radial_I(1, 1, a, b, omega, small_spec, ctx), radial_I(1, 1, b, a, omega, small_spec, ctx)) \
            < ctx.rel_tol(6)
        assert abs(radial_I(1, -1, a, b, omega, small_spec, ctx)
                   + radial_I(1, -1, b, a, omega, small_spec, ctx)) < ctx.rel_tol(6)
        assert rel(radial_J(2, a, b, omega, small_spec, ctx), radial_J(2, b, a, omega, small_spec, ctx)) \
            < ctx.rel_tol(6)

    def test_static_monopole_is_overlap(self, spectra, small_spec, ctx):
        one_s, two_s = spectra[-1].bound_state(1), spectra[-1].bound_state(2)
        assert abs(radial_J(0, one_s, one_s, 0, small_spec, ctx) - 1) < 1e-15
        assert abs(radial_J(0, two_s, one_s, 0, small_spec, ctx)) < 1e-15

    def test_negative_order_is_zero(self, spectra, small_spec, ctx):
        kernel = RadialKernel(small_spec, ctx)
        a = spectra[-1].bound_state(1)
        assert kernel.integrals(-1, ctx.mpf(1), a, a) == (0, 0, 0)

    def test_invalid_sign(self, spectra, small_spec, ctx):
        a = spectra[-1].bound_state(1)
        with pytest.raises(DomainError):
            radial_I(1, 0, a, a, 1, small_spec, ctx)


class TestOnePhotonAmplitudes:
    def test_magnetic_ignores_gauge(self, spectra, small_spec, ctx):
        i, f = spectra[-1].bound_state(2), spectra[-1].bound_state(1)
        omega = i.energy - f.energy
        length = reduced_amplitude(M1, GaugeChoice.length(), f, i, omega, small_spec, ctx)
        velocity = reduced_amplitude(M1, GaugeChoice.velocity(), f, i, omega, small_spec, ctx)
        assert length == velocity

    def test_forbidden_transition(self, spectra, small_spec, ctx):
        i, f = spectra[-1].bound_state(2), spectra[-1].bound_state(1)
        assert reduced_amplitude(E1, GaugeChoice.length(), f, i, "0.1", small_spec, ctx) == 0
        with pytest.raises(SelectionRuleError):
            reduced_amplitude(E1, GaugeChoice.length(), f, i, "0.1", small_spec, ctx, strict=True)

    def test_on_shell_dipole_is_gauge_invariant(self, spectra, small_spec, ctx):
        i, f = spectra[1].bound_state(2), spectra[-1].bound_state(1)
        omega = i.energy - f.energy
        gauges = [GaugeChoice.length(), GaugeChoice.velocity(), GaugeChoice.custom("0.5")]
        amps = [reduced_amplitude(E1, g, f, i, omega, small_spec, ctx) for g in gauges]
        assert amps[0] != 0
        for amp in amps[1:]:
            assert rel(amp, amps[0]) < 1e-3


class TestSecondOrder:
    def test_intermediate_partition(self, spectra, states, ctx):
        i, f = states
        channel = get_channel("2E1")
        omega1 = (i.energy - f.energy) / 3
        full = second_order_sum(channel, GaugeChoice.length(), spectra, i, f, omega1, Restriction.ALL)
        pos = second_order_sum(channel, GaugeChoice.length(), spectra, i, f, omega1, Restriction.POSITIVE)
        neg = second_order_sum(channel, GaugeChoice.length(), spectra, i, f, omega1, Restriction.NEGATIVE)
        assert set(full) == {0, 1}
        for K in full:
            assert abs(full[K] - pos[K] - neg[K]) <= ctx.rel_tol(6) * (1 + abs(full[K]))

    def test_omega_must_be_inside_the_band(self, spectra, states):
        i, f = states
        with pytest.raises(DomainError):
            second_order_sum(get_channel("2E1"), GaugeChoice.length(), spectra, i, f, i.energy - f.energy)

    def test_custom_gauge_rejected(self, spectra, states):
        i, f = states
        omega1 = (i.energy - f.energy) / 2
        with pytest.raises(DomainError):
            second_order_sum(get_channel("2E1"), GaugeChoice.custom(1), spectra, i, f, omega1)
        with pytest.raises(DomainError):
            differential_rate(get_channel("2E1"), GaugeChoice.custom(1), i, f, omega1, spectra)

    def test_resonant_denominator(self, spectra, states, ctx):
        i, f = states
        omega1 = i.energy - f.energy - ctx.mpf("1e-10")
        with pytest.raises(ResonanceError):
            second_order_sum(get_channel("2M1"), GaugeChoice.velocity(), spectra, i, f, omega1)

    def test_missing_intermediate_spectrum(self, spectra, states):
        i, f = states
        partial = {-1: spectra[-1]}
        with pytest.raises(SpectrumError):
            differential_rate(get_channel("2E1"), GaugeChoice.length(), i, f, "0.1", partial)

    def test_wrong_selection_rules(self, spectra):
        i, f = spectra[1].bound_state(2), spectra[-1].bound_state(1)
        with pytest.raises(SelectionRuleError):
            second_order_sum(get_channel("2E1"), GaugeChoice.length(), spectra, i, f, "0.1")


class TestDifferentialRate:
    def test_symmetric_in_photon_energies(self, spectra, states, ctx):
        i, f = states
        omega_t = i.energy - f.energy
        channel = get_channel("2E1")
        left = differential_rate(channel, GaugeChoice.length(), i, f, omega_t / 5, spectra)
        right = differential_rate(channel, GaugeChoice.length(), i, f, omega_t - omega_t / 5, spectra)
        assert left > 0
        assert rel(left, right) < 1e-15

    def test_vanishes_at_the_endpoints(self, spectra, states):
        i, f = states
        channel = get_channel("2E1")
        assert differential_rate(channel, GaugeChoice.length(), i, f, 0, spectra) == 0
        assert differential_rate(channel, GaugeChoice.velocity(), i, f, i.energy - f.energy, spectra) == 0

    def test_outside_the_band(self, spectra, states):
        i, f = states
        with pytest.raises(DomainError):
            differential_rate(get_channel("2E1"), GaugeChoice.length(), i, f, 1, spectra)


class TestTotals:
    def test_2e1_rate(self, rate_2e1):
        assert rel(rate_2e1.total_length, REFERENCE_2E1) < 1e-2
        assert rate_2e1.delta_lv < 1e-6
        assert rate_2e1.lifetime == 1 / rate_2e1.total_length

    def test_2e1_rows(self, rate_2e1):
        rows = rate_2e1.rows()
        assert len(rows) == 6
        assert {r["gauge"] for r in rows} == {"length", "velocity"}
        positive = rate_2e1.rate("length", "pos")
        assert 0 < positive
        assert rate_2e1.rate("velocity", "all") == rate_2e1.total_velocity

    def test_differential_samples(self, rate_2e1):
        assert len(rate_2e1.differential) == 6
        omegas = [w for w, _ in rate_2e1.differential]
        assert omegas == sorted(omegas)
        assert all(d > 0 for _, d in rate_2e1.differential)

    def test_magnetic_channel_has_one_gauge(self, rate_2m1):
        assert rate_2m1.magnetic_only
        assert rate_2m1.delta_lv is None
        assert rate_2m1.total_length == rate_2m1.total_velocity
        assert len(rate_2m1.rows()) == 3
        assert 0 < rate_2m1.total_length < 1e-6

    def test_json_round_trip(self, rate_2e1, ctx):
        restored = RateResult.from_dict(json.loads(json.dumps(rate_2e1.to_dict())))
        assert restored.channel == "2E1"
        assert restored.magnetic_only is False
        assert rel(restored.total_length, rate_2e1.total_length) < ctx.rel_tol(2)
        # guard digits make the reload exact, so warm reports match cold ones
        assert restored.split == rate_2e1.split
        assert len(restored.differential) == len(rate_2e1.differential)

    def test_channel_totals_add(self, rate_2e1, rate_2m1):
        total = sum_results([rate_2e1, rate_2m1])
        assert total == rate_2e1.total_length + rate_2m1.total_length
        with pytest.raises(DomainError):
            sum_results([])

    def test_channel_sum_rejects_duplicates(self, spectra, states):
        i, f = states
        with pytest.raises(DomainError):
            channel_sum([get_channel("2E1"), get_channel("2E1")], i, f, spectra, 2)

    def test_cancellation(self, spectra, states):
        i, f = states
        assert total_rate(get_channel("2E1"), i, f, spectra, 3, cancel=lambda: True) is None

    def test_transition_states(self, spectra):
        with pytest.raises(SpectrumError):
            transition_states(spectra, (3, 2), (1, -1))
        with pytest.raises(DomainError):
            total_rate(get_channel("2E1"), *transition_states(spectra, (1, -1), (2, -1)), spectra, 2)
