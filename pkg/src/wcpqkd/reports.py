"""CSV rows for analytic sweeps, normalized curves, sessions and attack scenarios."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from . import analytics as an
from .adversary import StrategyKind
from .analytics import ProtocolKind
from .qmath import PhotonDistribution, SourceKind, overlap_angle
from .session import ProtocolConfig, SessionReport

Z_LIMIT = 3.0


def fmt(value) -> str:
    """Render one CSV cell; floats keep 17 significant digits so they re-parse exactly."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, "#.17g")
    if value is None:
        return ""
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(row.get(h)) for h in header])
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    """Read back a report; numeric-looking cells become floats."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            try:
                parsed[k] = float(v)
            except ValueError:
                parsed[k] = v
        out.append(parsed)
    return out


def z_score(observed: float, predicted: float, sigma: float) -> float:
    if math.isnan(observed) or math.isnan(predicted):
        return math.nan
    diff = observed - predicted
    if sigma == 0.0 or math.isnan(sigma):
        return 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)
    return diff / sigma


# --- analytic sweep ---------------------------------------------------------

ANALYTIC_COLUMNS = ("protocol", "mu", "delta", "t", "Q_eta1", "i_ae", "i_eb")


def analytic_row(protocol: ProtocolKind, mu: float) -> dict:
    """Closed-form rate and full-interception (eta = 1) error rate and information."""
    protocol = ProtocolKind(protocol)
    q, info = an.intercept_prediction(protocol, mu, 1.0)
    # polarization states of one basis are orthogonal
    delta = math.pi / 2 if protocol is ProtocolKind.FOUR_STATE else overlap_angle(mu).delta
    return {
        "protocol": protocol.value,
        "mu": float(mu),
        "delta": delta,
        "t": an.rate(protocol, mu),
        "Q_eta1": q,
        "i_ae": info.i_ae,
        "i_eb": info.i_eb,
    }


def analytic_rows(mus: Iterable[float], protocols: Sequence[ProtocolKind]) -> list[dict]:
    return [analytic_row(p, mu) for mu in mus for p in protocols]


# --- normalized information curves -----------------------------------------

FIG3_COLUMNS = ("t", "norm_i_ae_2", "norm_i_eb_2", "norm_i_ae_42", "norm_i_eb_42", "status")


def fig3_rows(t_grid: Sequence[float]) -> list[dict]:
    curves = an.fig3_curves(t_grid)
    rows = []
    for two, four2 in zip(curves[ProtocolKind.TWO_STATE], curves[ProtocolKind.FOUR_PLUS_TWO]):
        problems = [e for e in (two.error, four2.error) if e]
        rows.append({
            "t": two.t,
            "norm_i_ae_2": two.norm_i_ae,
            "norm_i_eb_2": two.norm_i_eb,
            "norm_i_ae_42": four2.norm_i_ae,
            "norm_i_eb_42": four2.norm_i_eb,
            "status": "; ".join(problems) if problems else "ok",
        })
    return rows


# --- session predictions ----------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    rate: float = math.nan
    qber: float = math.nan
    i_ae: float = math.nan
    i_eb: float = math.nan


def predict(config: ProtocolConfig) -> Prediction:
    """Closed-form expectations for a session, NaN where no closed form applies.

    Intercept/resend predictions assume dark-count-free detectors.
    """
    nan = math.nan
    if config.dark_count > 0:
        return Prediction()
    p, mu, T = config.protocol, config.mu, config.fiber.transmittance
    strategy = config.strategy
    phase = p is not ProtocolKind.FOUR_STATE
    if config.source_kind is SourceKind.THERMAL:
        honest = 0.5 * PhotonDistribution(config.source_kind, mu * T).sf(0)
    else:
        honest = an.rate(p, mu * T)
    if strategy is None or strategy.eta == 0.0:
        return Prediction(honest, 0.0, 0.0, 0.0)
    eta, kind = strategy.eta, strategy.kind

    if kind in (StrategyKind.INTERCEPT_RESEND_CONJUGATE, StrategyKind.INTERCEPT_RESEND_SYMMETRIC):
        q, info = an.intercept_prediction(p, mu, eta)
        if phase:
            rate = honest
        elif config.source_kind is SourceKind.POISSON:
            # attacked pulses reach Bob as single photons
            rate = eta * an.rate_4(mu) * T + (1 - eta) * honest
        else:
            rate = nan
        return Prediction(rate, q, info.i_ae, info.i_eb)

    if kind is StrategyKind.POVM_MIMIC and p is ProtocolKind.TWO_STATE:
        conclusive = an.rate_2(mu)
        return Prediction(honest, eta * (1 - conclusive) / 2, eta * conclusive, eta * conclusive)

    if kind is StrategyKind.BEAM_SPLIT and phase:
        split = config.fiber.loss_fraction if strategy.split_fraction is None else strategy.split_fraction
        # attacked pulses travel Eve's lossless line, the rest the real fiber
        rate = eta * an.rate(p, mu * (1 - split)) + (1 - eta) * honest
        info = eta * an.beamsplit_leakage(mu, split)
        # Bob's key equals Alice's, so Eve shares the same information with both
        return Prediction(rate, 0.0, info, info)

    if kind is StrategyKind.PHOTON_NUMBER_SPLIT:
        return Prediction(nan, 0.0, nan, nan)
    return Prediction()


SIMULATE_COLUMNS = (
    "protocol", "source", "mu", "strategy", "eta", "loss", "n_pulses", "seed",
    "sifted_length", "rate", "rate_pred", "rate_z",
    "qber", "qber_pred", "qber_z",
    "i_ae", "i_ae_pred", "i_ae_z",
    "i_eb", "i_eb_pred", "i_eb_z",
    "i_eb_attacked", "eve_known_fraction", "inconclusive", "double_clicks", "status",
)


def simulate_row(config: ProtocolConfig, report: SessionReport) -> dict:
    pred = predict(config)
    n = report.pulses_sent
    rate = report.sifted_fraction
    rate_sigma = math.sqrt(pred.rate * (1 - pred.rate) / n) if n and not math.isnan(pred.rate) else math.nan
    qber = report.empirical_qber
    qber_sigma = (math.sqrt(pred.qber * (1 - pred.qber) / report.sifted_length)
                  if report.sifted_length and not math.isnan(pred.qber) else math.nan)
    z = {
        "rate_z": z_score(rate, pred.rate, rate_sigma),
        "qber_z": z_score(qber, pred.qber, qber_sigma),
        "i_ae_z": z_score(report.empirical_i_ae, pred.i_ae, report.i_ae_stderr),
        "i_eb_z": z_score(report.empirical_i_eb, pred.i_eb, report.i_eb_stderr),
    }
    failed = [k for k, v in z.items() if not math.isnan(v) and abs(v) > Z_LIMIT]
    strategy = config.strategy
    return {
        "protocol": config.protocol.value,
        "source": config.source_kind.value,
        "mu": config.mu,
        "strategy": strategy.kind.value if strategy else "none",
        "eta": strategy.eta if strategy else 0.0,
        "loss": config.fiber.loss_fraction,
        "n_pulses": n,
        "seed": config.seed,
        "sifted_length": report.sifted_length,
        "rate": rate,
        "rate_pred": pred.rate,
        "qber": qber,
        "qber_pred": pred.qber,
        "i_ae": report.empirical_i_ae,
        "i_ae_pred": pred.i_ae,
        "i_eb": report.empirical_i_eb,
        "i_eb_pred": pred.i_eb,
        "i_eb_attacked": report.empirical_i_eb_attacked,
        "eve_known_fraction": report.eve_known_fraction,
        "inconclusive": report.inconclusive_count,
        "double_clicks": report.double_click_count,
        "status": "FAILED:" + ",".join(failed) if failed else "ok",
        **z,
    }


# --- attack scenarios -------------------------------------------------------

ATTACK_COLUMNS = (
    "strategy", "protocol", "source", "mu", "loss", "n_pulses", "seed",
    "eve_metric_kind", "eve_metric", "eve_metric_analytic",
    "induced_qber", "induced_qber_analytic", "bob_rate", "bob_rate_analytic", "sifted_length",
)


def _block_analytic(config: ProtocolConfig) -> tuple[float, float, float]:
    """(Eve-known fraction, QBER, Bob conclusive rate) for blocking on the 2-state protocol."""
    mu, T = config.mu, config.fiber.transmittance
    eve_conclusive = an.rate_2(mu)
    forwarded = eve_conclusive * an.rate_2(mu * T)
    if config.reference_free:
        return 1.0 if forwarded else math.nan, 0.0, forwarded
    # reference with an empty signal: each port sees mu T / 2
    stray = (1 - eve_conclusive) * -math.expm1(-mu * T)
    total = forwarded + stray
    if total == 0:
        return math.nan, math.nan, 0.0
    return forwarded / total, stray / 2 / total, total


def attack_row(config: ProtocolConfig, report: SessionReport) -> dict:
    kind = config.strategy.kind
    mu, loss = config.mu, config.fiber.loss_fraction
    n = report.pulses_sent
    bob_rate = (n - report.inconclusive_count) / n if n else math.nan
    nan = math.nan
    if kind is StrategyKind.PHOTON_NUMBER_SPLIT:
        leak = an.pns_leakage(PhotonDistribution(config.source_kind, mu), loss)
        metric_kind, metric, analytic = "eve_known_fraction", report.eve_known_fraction, leak.eve_known_fraction
        qber_a, rate_a = leak.induced_qber, leak.bob_receive_rate
    elif kind is StrategyKind.BEAM_SPLIT:
        metric_kind, metric = "eve_bits_per_key_bit", report.empirical_i_ae
        split = loss if config.strategy.split_fraction is None else config.strategy.split_fraction
        phase = config.protocol is not ProtocolKind.FOUR_STATE
        analytic = an.beamsplit_leakage(mu, split) if phase else nan
        qber_a = 0.0
        mu_bob = mu * config.fiber.transmittance if config.strategy.split_fraction is None else mu * (1 - split)
        rate_a = -math.expm1(-2 * mu_bob) if phase else -math.expm1(-mu_bob)
    else:
        metric_kind, metric = "eve_known_fraction", report.eve_known_fraction
        if config.protocol is ProtocolKind.TWO_STATE:
            analytic, qber_a, rate_a = _block_analytic(config)
        else:
            analytic = qber_a = rate_a = nan
    return {
        "strategy": kind.value,
        "protocol": config.protocol.value,
        "source": config.source_kind.value,
        "mu": mu,
        "loss": loss,
        "n_pulses": report.pulses_sent,
        "seed": config.seed,
        "eve_metric_kind": metric_kind,
        "eve_metric": metric,
        "eve_metric_analytic": analytic,
        "induced_qber": report.empirical_qber,
        "induced_qber_analytic": qber_a,
        "bob_rate": bob_rate,
        "bob_rate_analytic": rate_a,
        "sifted_length": report.sifted_length,
    }


LEDGER_COLUMNS = ("pulse_index", "attacked", "guess", "basis_used", "deferred_state", "certain")


def ledger_rows(ledger) -> Iterable[dict]:
    for r in ledger.records():
        if not r.attacked:
            continue
        yield {
            "pulse_index": r.pulse_index,
            "attacked": r.attacked,
            "guess": "" if r.guess is None else r.guess,
            "basis_used": {None: "", 0: "B0", 1: "B1", 2: "Bsym"}[r.basis_used],
            "deferred_state": "" if r.deferred_state is None else repr(r.deferred_state),
            "certain": r.certain,
        }

