import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wcpqkd.analytics import (
    ProtocolKind,
    beamsplit_leakage,
    default_t_grid,
    delta_for_rate,
    fig3_curves,
    honest_receive_rate,
    inconclusive_prob,
    info_2,
    info_4,
    info_42,
    intercept_prediction,
    mu_for_delta,
    pns_leakage,
    qber_2,
    qber_42,
    rate,
    rate_2,
    rate_4,
    rate_42,
)
from wcpqkd.errors import DomainError, InfeasibleError
from wcpqkd.qmath import (
    OverlapAngle,
    PhotonDistribution,
    SourceKind,
    max_extractable_info,
    multiphoton_fraction,
    overlap_angle,
)

# 40-digit mpmath evaluations, frozen
RATE4_01 = 0.047581290982020213418
EXP_M02 = 0.81873075307798185867
INFO42_009 = 0.11533208528077460990
PNS_POISSON = 0.49166805522495037595
PNS_THERMAL = 10 / 11

mus = st.floats(min_value=0.0, max_value=10.0)
deltas = st.floats(min_value=1e-6, max_value=math.pi / 2 - 1e-6)


class TestRates:
    @pytest.mark.parametrize("fn, limit", [(rate_4, 0.5), (rate_2, 1.0), (rate_42, 0.5)])
    def test_limits(self, fn, limit):
        assert fn(0.0) == 0.0
        assert fn(60.0) == pytest.approx(limit, abs=1e-15)

    def test_rate4_value(self):
        assert rate_4(0.1) == pytest.approx(RATE4_01, rel=1e-14)

    def test_inconclusive(self):
        assert inconclusive_prob(0.0) == 1.0
        assert inconclusive_prob(0.1) == pytest.approx(EXP_M02, rel=1e-14)

    @given(mus)
    def test_structural_identities(self, mu):
        assert rate_42(mu) == rate_2(mu) / 2
        assert inconclusive_prob(mu) == pytest.approx(overlap_angle(mu).cos_delta, rel=1e-14)
        assert rate_2(mu) == pytest.approx(1 - overlap_angle(mu).cos_delta, abs=1e-15)

    @pytest.mark.parametrize("fn", [rate_4, rate_2, rate_42, inconclusive_prob])
    def test_negative_mu(self, fn):
        with pytest.raises(DomainError):
            fn(-0.1)

    def test_dispatch(self):
        assert rate("2state", 0.1) == rate_2(0.1)
        assert rate(ProtocolKind.FOUR_STATE, 0.1) == rate_4(0.1)


class TestFourState:
    @pytest.mark.parametrize("q, expected", [(0.0, 0.0), (0.25, 0.5), (0.1, 0.2)])
    def test_line(self, q, expected):
        report = info_4(q)
        assert report.i_ae == pytest.approx(expected)
        assert report.i_eb == pytest.approx(expected)

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            info_4(0.3)


class TestTwoState:
    @pytest.mark.parametrize("eta, delta, q", [(0.0, 0.4, 0.0), (1.0, 0.0, 0.5), (1.0, math.pi / 6, 0.25)])
    def test_qber(self, eta, delta, q):
        assert qber_2(eta, delta) == pytest.approx(q, abs=1e-15)

    def test_zero(self):
        r = info_2(0.0, 0.5)
        assert (r.i_ae, r.i_eb) == (0.0, 0.0)

    def test_full_interception(self):
        d = overlap_angle(0.09)
        r = info_2(qber_2(1.0, d), d)
        assert r.i_eb == pytest.approx(1.0)
        assert r.i_ae == pytest.approx(0.23066417056154921980, rel=1e-12)

    def test_infeasible(self):
        d = overlap_angle(0.1)
        with pytest.raises(InfeasibleError):
            info_2(qber_2(1.0, d) * 1.01, d)

    @given(deltas, st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_linear_in_q(self, delta, e1, e2):
        a, b = info_2(qber_2(e1, delta), delta), info_2(qber_2(e2, delta), delta)
        assert a.i_ae * e2 == pytest.approx(b.i_ae * e1, rel=1e-9, abs=1e-15)
        assert a.i_eb * e2 == pytest.approx(b.i_eb * e1, rel=1e-9)


class TestFourPlusTwo:
    @pytest.mark.parametrize("delta, q", [(0.0, 0.5), (math.pi / 2, 0.25)])
    def test_qber(self, delta, q):
        assert qber_42(1.0, delta) == pytest.approx(q, abs=1e-15)
        assert qber_42(0.0, delta) == 0.0

    def test_single_photon_limit(self):
        r = info_42(qber_42(1.0, math.pi / 2), math.pi / 2)
        assert r.i_ae == pytest.approx(0.5, abs=1e-12)
        assert r.i_eb == pytest.approx(0.5, abs=1e-12)

    def test_value(self):
        d = overlap_angle(0.09)
        assert info_42(qber_42(1.0, d), d).i_ae == pytest.approx(INFO42_009, rel=1e-12)

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            info_42(0.49, math.pi / 2)

    @given(deltas)
    def test_qber_decomposition(self, delta):
        s = OverlapAngle.from_delta(delta).sin_delta
        assert qber_42(1.0, delta) == pytest.approx(0.5 * 0.5 + 0.5 * (1 - s) / 2, abs=1e-15)

    @given(deltas)
    def test_half_of_two_state(self, delta):
        i2 = info_2(qber_2(1.0, delta), delta)
        i42 = info_42(qber_42(1.0, delta), delta)
        assert i42.i_ae == pytest.approx(i2.i_ae / 2, rel=1e-12, abs=1e-15)
        assert i42.i_eb == pytest.approx(i2.i_eb / 2, rel=1e-12)

    @given(deltas, st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_linear_in_q(self, delta, e1, e2):
        a, b = info_42(qber_42(e1, delta), delta), info_42(qber_42(e2, delta), delta)
        assert a.i_eb * e2 == pytest.approx(b.i_eb * e1, rel=1e-9)


class TestInterceptPrediction:
    def test_four_state(self):
        q, info = intercept_prediction("4state", 0.1, 1.0)
        assert q == 0.25 and info.i_ae == 0.5

    @pytest.mark.parametrize("proto", ["2state", "4+2"])
    def test_eta_zero(self, proto):
        q, info = intercept_prediction(proto, 0.1, 0.0)
        assert q == 0.0 and info.i_ae == 0.0 and info.i_eb == 0.0


class TestRateInversion:
    @pytest.mark.parametrize("t", default_t_grid())
    def test_round_trip(self, t):
        assert rate_2(mu_for_delta(delta_for_rate("2state", t))) == pytest.approx(t, abs=1e-10)
        if t < 0.5:
            assert rate_42(mu_for_delta(delta_for_rate("4+2", t))) == pytest.approx(t, abs=1e-10)

    def test_root_finding_oracle(self):
        from scipy.optimize import brentq

        for t in (1e-3, 0.05, 0.3):
            mu = brentq(lambda m, t=t: rate_2(m) - t, 0, 50, xtol=1e-15)
            assert delta_for_rate("2state", t).delta == pytest.approx(overlap_angle(mu).delta, rel=1e-9)

    @pytest.mark.parametrize("proto, t", [("2state", 1.0), ("4+2", 0.5), ("2state", 0.0), ("4state", 0.1)])
    def test_out_of_range(self, proto, t):
        with pytest.raises(DomainError):
            delta_for_rate(proto, t)


class TestFig3:
    def setup_method(self):
        self.curves = fig3_curves()
        self.two = self.curves[ProtocolKind.TWO_STATE]
        self.four2 = self.curves[ProtocolKind.FOUR_PLUS_TWO]

    def test_grid(self):
        assert len(self.two) == len(self.four2) == 50
        assert self.two[0].t == pytest.approx(1e-4) and self.two[-1].t == pytest.approx(0.4)

    def test_ordering(self):
        for a, b in zip(self.two, self.four2):
            assert b.error is None and a.error is None
            assert b.norm_i_ae < 1.0
            assert b.norm_i_ae < a.norm_i_ae
            assert 0.5 <= b.norm_i_eb <= 1.0
            assert a.norm_i_eb >= 1.0

    def test_two_state_crosses_one(self):
        values = [p.norm_i_ae for p in self.two]
        assert values[0] < 1.0 < values[-1]

    def test_small_t_limit(self):
        p2, p42 = fig3_curves([1e-9]).values()
        assert p2[0].norm_i_ae < 1e-3 and p42[0].norm_i_ae < 1e-3

    def test_two_state_eb_diverges(self):
        (p,) = fig3_curves([1 - 1e-9])[ProtocolKind.TWO_STATE]
        assert p.norm_i_eb > 1e3

    def test_infeasible_point_marked(self):
        curves = fig3_curves([0.1, 0.7])
        bad = curves[ProtocolKind.FOUR_PLUS_TWO][1]
        assert bad.error and math.isnan(bad.norm_i_ae)
        assert curves[ProtocolKind.TWO_STATE][1].error is None

    def test_ratio_matches_explicit_division(self):
        # divide the unnormalized values at eta = 1 instead of using the ratio form
        t = 0.05
        d = delta_for_rate("2state", t)
        q = qber_2(1.0, d)
        explicit = info_2(q, d).i_ae / info_4(0.25).i_ae * (0.25 / q)
        (p,) = fig3_curves([t])[ProtocolKind.TWO_STATE]
        assert p.norm_i_ae == pytest.approx(explicit, rel=1e-12)


class TestLeakage:
    def test_pns_poisson(self):
        r = pns_leakage(PhotonDistribution(SourceKind.POISSON, 0.1), 0.9)
        assert r.eve_known_fraction == pytest.approx(PNS_POISSON, rel=1e-12)
        assert r.induced_qber == 0.0

    def test_pns_thermal(self):
        r = pns_leakage(PhotonDistribution(SourceKind.THERMAL, 0.1), 0.9)
        assert r.eve_known_fraction == pytest.approx(PNS_THERMAL, rel=1e-12)

    @pytest.mark.parametrize("kind", list(SourceKind))
    def test_lossless_is_conditional_fraction(self, kind):
        dist = PhotonDistribution(kind, 0.05)
        r = pns_leakage(dist, 0.0)
        assert r.eve_known_fraction == pytest.approx(multiphoton_fraction(dist).p_multi_given_nonzero, rel=1e-12)

    def test_pns_capped(self):
        assert pns_leakage(PhotonDistribution(SourceKind.THERMAL, 0.1), 0.99).eve_known_fraction == 1.0

    def test_pns_total_loss(self):
        with pytest.raises(DomainError):
            pns_leakage(PhotonDistribution(SourceKind.POISSON, 0.1), 1.0)

    def test_honest_rate(self):
        dist = PhotonDistribution(SourceKind.POISSON, 0.1)
        assert honest_receive_rate(dist, 0.9) == pytest.approx(0.1 * -math.expm1(-0.1))

    @given(mus, st.floats(0.0, 0.999))
    def test_pns_never_errs(self, mu, loss):
        assert pns_leakage(PhotonDistribution(SourceKind.POISSON, mu), loss).induced_qber == 0.0

    def test_beamsplit_value(self):
        value = beamsplit_leakage(0.1, 0.9)
        assert 0.225 <= value <= 0.235
        assert value == pytest.approx(max_extractable_info(overlap_angle(0.09)), rel=1e-12)

    def test_beamsplit_lossless(self):
        assert beamsplit_leakage(0.1, 0.0) == 0.0

    @pytest.mark.parametrize("mu", [0.01, 0.1, 1.0])
    def test_beamsplit_increasing(self, mu):
        values = [beamsplit_leakage(mu, x) for x in np.linspace(0.0, 0.99, 40)]
        assert np.all(np.diff(values) > 0)
