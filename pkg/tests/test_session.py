import math

import numpy as np
import pytest

from wcpqkd.adversary import StrategyConfig
from wcpqkd.analytics import intercept_prediction, rate
from wcpqkd.errors import ConfigError, SessionError, UndefinedEstimate
from wcpqkd.pulses import INCONCLUSIVE, FiberModel
from wcpqkd.session import (
    Counters,
    ProtocolConfig,
    SiftedKey,
    empirical_mutual_info,
    empirical_qber,
    run_session,
    sift,
)

N = 1_000_000


def z(observed, expected, sd):
    return abs(observed - expected) / sd


class TestSift:
    def test_all_inconclusive(self):
        key, idx = sift([0, 1], [0, 0], [0, 0], [INCONCLUSIVE] * 2, "2state")
        assert len(key) == 0 and len(idx) == 0

    def test_basis_mismatch_dropped(self):
        key, idx = sift([0, 1, 1, 0], [0, 1, 0, 1], [0, 0, 0, 1], [0, 1, 1, INCONCLUSIVE], "4+2")
        assert list(idx) == [0, 2]
        assert list(key.alice) == [0, 1] and list(key.bob) == [0, 1]

    def test_two_state_keeps_conclusive(self):
        key, idx = sift([1, 0, 1], [0, 0, 0], [0, 0, 0], [1, INCONCLUSIVE, 0], "2state")
        assert list(idx) == [0, 2] and list(key.bob) == [1, 0]


class TestEstimators:
    def test_qber_limits(self):
        same = SiftedKey(np.array([0, 1, 1]), np.array([0, 1, 1]))
        flip = SiftedKey(np.array([0, 1]), np.array([1, 0]))
        assert empirical_qber(same).value == 0.0
        q = empirical_qber(flip)
        assert q.value == 1.0 and not q.in_model_range

    def test_qber_empty(self):
        with pytest.raises(UndefinedEstimate):
            empirical_qber(SiftedKey(np.array([]), np.array([])))

    def test_mi_limits(self):
        assert empirical_mutual_info([[500, 0], [0, 500]]).bits == pytest.approx(1.0)
        assert empirical_mutual_info([[250, 250], [250, 250]]).bits == pytest.approx(0.0)

    def test_mi_degenerate(self):
        mi = empirical_mutual_info([[10, 0], [0, 0]])
        assert mi.bits == 0.0 and mi.degenerate

    def test_mi_empty(self):
        with pytest.raises(UndefinedEstimate):
            empirical_mutual_info([[0, 0], [0, 0]])

    def test_mi_sampled_bsc(self, rng):
        from wcpqkd.qmath import (
            max_extractable_info,
            overlap_angle,
            sym_projection_error,
        )

        d = overlap_angle(0.1)
        q = sym_projection_error(d)
        x = rng.integers(0, 2, N)
        y = x ^ (rng.random(N) < q)
        table = [[np.sum((x == a) & (y == b)) for b in (0, 1)] for a in (0, 1)]
        mi = empirical_mutual_info(table)
        assert z(mi.bits, max_extractable_info(d), mi.sigma) < 3

    def test_counters_add(self):
        a = Counters(pulses=3, sifted=1)
        a.ae[0, 0] = 1
        total = a + a
        assert total.pulses == 6 and total.ae[0, 0] == 2


class TestRunSession:
    def test_empty(self):
        report, _ = run_session(ProtocolConfig("2state", 0.1, 0, seed=1))
        assert report.pulses_sent == 0 and report.sifted_length == 0
        assert math.isnan(report.empirical_qber)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            ProtocolConfig("2state", 0.1, -1, seed=1)

    @pytest.mark.parametrize("proto", ["4state", "2state", "4+2"])
    @pytest.mark.parametrize("mu", [0.05, 0.1, 0.2])
    def test_rate_agreement(self, proto, mu):
        report, _ = run_session(ProtocolConfig(proto, mu, 200_000, seed=11))
        t = rate(proto, mu)
        assert z(report.sifted_fraction, t, math.sqrt(t * (1 - t) / report.pulses_sent)) < 3
        if proto != "4state":
            assert report.error_count == 0

    def test_determinism_across_workers(self):
        cfg = ProtocolConfig("4+2", 0.1, 300_000, seed=5, strategy=StrategyConfig("intercept-conjugate", 0.5),
                             block_size=50_000)
        serial, _ = run_session(cfg, workers=1)
        parallel, _ = run_session(cfg, workers=3)
        assert serial == parallel
        assert run_session(cfg)[0] == serial

    def test_block_size_changes_stream_only(self):
        a, _ = run_session(ProtocolConfig("2state", 0.1, 100_000, seed=5, block_size=10_000))
        b, _ = run_session(ProtocolConfig("2state", 0.1, 100_000, seed=5, block_size=20_000))
        assert a.pulses_sent == b.pulses_sent

    def test_four_plus_two_half_eta(self):
        cfg = ProtocolConfig("4+2", 0.1, N, seed=3, strategy=StrategyConfig("intercept-conjugate", 0.5))
        report, _ = run_session(cfg)
        q, _ = intercept_prediction("4+2", 0.1, 0.5)
        assert z(report.empirical_qber, q, report.qber.stderr(q)) < 3

    @pytest.mark.parametrize("eta", [0.0, 0.3, 1.0])
    def test_four_state_qber(self, eta):
        cfg = ProtocolConfig("4state", 0.1, 400_000, seed=4,
                             strategy=StrategyConfig("intercept-conjugate", eta) if eta else None)
        report, _ = run_session(cfg)
        q, _ = intercept_prediction("4state", 0.1, eta)
        sd = report.qber.stderr(q) if q else 1.0 / report.sifted_length
        assert z(report.empirical_qber, q, sd) < 3

    def test_two_state_eve_bob_perfect(self):
        cfg = ProtocolConfig("2state", 0.1, 300_000, seed=9, strategy=StrategyConfig("intercept-symmetric", 1.0))
        report, ledger = run_session(cfg, keep_ledger=True)
        eb = np.array(report.eb_table)
        assert eb[0, 1] == 0 and eb[1, 0] == 0
        assert len(ledger) == 300_000 and ledger.attacked.all()

    def test_error_carries_pulse_index(self):
        cfg = ProtocolConfig("2state", 0.1, 100, seed=1, strategy=StrategyConfig("pns"), block_size=40)
        with pytest.raises(SessionError) as info:
            run_session(cfg)
        assert info.value.pulse_index == 0

    def test_lossy_line_rate(self):
        fiber = FiberModel.from_loss_db(10)
        report, _ = run_session(ProtocolConfig("2state", 0.1, 500_000, seed=2, fiber=fiber))
        t = rate("2state", 0.01)
        assert z(report.sifted_fraction, t, math.sqrt(t * (1 - t) / 500_000)) < 3
