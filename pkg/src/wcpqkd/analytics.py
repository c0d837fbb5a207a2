"""Closed-form rates, error rates and Eve's information for the three protocols.

All information quantities assume intercept/resend on a fraction ``eta`` of the
pulses and are therefore linear in the error rate ``Q`` at fixed overlap.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InfeasibleError
from .qmath import (
    OverlapAngle,
    PhotonDistribution,
    _as_delta,
    _check_mu,
    _check_probability,
    max_extractable_info,
    multiphoton_fraction,
    overlap_angle,
    sym_projection_error,
)

# slack for Q values that are exactly at a feasibility limit but computed in floating point
_FEAS_TOL = 1e-12


class ProtocolKind(enum.Enum):
    FOUR_STATE = "4state"
    TWO_STATE = "2state"
    FOUR_PLUS_TWO = "4+2"


@dataclass(frozen=True)
class InfoReport:
    protocol: ProtocolKind
    i_ae: float
    i_eb: float
    transmission_rate: float = math.nan


@dataclass(frozen=True)
class InfoCurvePoint:
    t: float
    norm_i_ae: float
    norm_i_eb: float
    #: set when t cannot be reached by the protocol; ratios are NaN then
    error: str | None = None


def _check_eta(eta: float) -> float:
    return _check_probability(eta, "eta")


def _check_q(q: float) -> float:
    q = float(q)
    if not (0.0 <= q <= 0.5):
        raise DomainError(f"error rate must lie in [0, 0.5], got {q!r}")
    return q


def rate_4(mu: float) -> float:
    """Sifted bits per pulse for weak-pulse 4-state: half of the non-empty pulses."""
    return -math.expm1(-_check_mu(mu)) / 2.0


def info_4(q_error: float) -> InfoReport:
    q_error = _check_q(q_error)
    if q_error > 0.25 + _FEAS_TOL:
        raise InfeasibleError(f"4-state intercept/resend cannot produce Q={q_error} (max 0.25)")
    return InfoReport(ProtocolKind.FOUR_STATE, 2.0 * q_error, 2.0 * q_error)


def inconclusive_prob(mu: float) -> float:
    return math.exp(-2.0 * _check_mu(mu))


def rate_2(mu: float) -> float:
    return -math.expm1(-2.0 * _check_mu(mu))


def qber_2(eta: float, delta: OverlapAngle | float) -> float:
    return _check_eta(eta) * sym_projection_error(delta)


def info_2(q_error: float, delta: OverlapAngle | float) -> InfoReport:
    """Alice-Eve and Eve-Bob information of the 2-state protocol at error rate ``q_error``."""
    q_error = _check_q(q_error)
    d = _as_delta(delta)
    per_pulse_q = (1.0 - d.sin_delta) / 2.0
    if q_error == 0.0:
        return InfoReport(ProtocolKind.TWO_STATE, 0.0, 0.0)
    if q_error > per_pulse_q + _FEAS_TOL:
        raise InfeasibleError(
            f"Q={q_error} needs eta={q_error / per_pulse_q if per_pulse_q else math.inf} > 1"
        )
    eta = min(1.0, q_error / per_pulse_q)
    return InfoReport(ProtocolKind.TWO_STATE, eta * max_extractable_info(d), eta)


def rate_42(mu: float) -> float:
    return -math.expm1(-2.0 * _check_mu(mu)) / 2.0


def qber_42(eta: float, delta: OverlapAngle | float) -> float:
    s = _as_delta(delta).sin_delta
    return _check_eta(eta) / 2.0 * (1.0 - s / 2.0)


def info_42(q_error: float, delta: OverlapAngle | float) -> InfoReport:
    q_error = _check_q(q_error)
    d = _as_delta(delta)
    denom = 1.0 - d.sin_delta / 2.0
    eta = 2.0 * q_error / denom
    if eta > 1.0 + _FEAS_TOL:
        raise InfeasibleError(f"Q={q_error} needs eta={eta} > 1")
    eta = min(1.0, eta)
    return InfoReport(ProtocolKind.FOUR_PLUS_TWO, eta / 2.0 * max_extractable_info(d), eta / 2.0)


def rate(protocol: ProtocolKind, mu: float) -> float:
    return {
        ProtocolKind.FOUR_STATE: rate_4,
        ProtocolKind.TWO_STATE: rate_2,
        ProtocolKind.FOUR_PLUS_TWO: rate_42,
    }[ProtocolKind(protocol)](mu)


def intercept_prediction(protocol: ProtocolKind, mu: float, eta: float) -> tuple[float, InfoReport]:
    """(QBER, information) under intercept/resend on a fraction ``eta``.

    4-state uses the conjugate-basis attack, 2-state the symmetric projection and
    4+2 the conjugate-basis attack with the symmetric projection inside a basis.
    """
    protocol = ProtocolKind(protocol)
    if protocol is ProtocolKind.FOUR_STATE:
        q = _check_eta(eta) / 4.0
        return q, info_4(q)
    d = overlap_angle(mu)
    if protocol is ProtocolKind.TWO_STATE:
        q = qber_2(eta, d)
        return q, info_2(q, d)
    q = qber_42(eta, d)
    return q, info_42(q, d)


def delta_for_rate(protocol: ProtocolKind, t: float) -> OverlapAngle:
    """Invert the transmission rate to the overlap angle that produces it."""
    protocol = ProtocolKind(protocol)
    t = float(t)
    if protocol is ProtocolKind.TWO_STATE:
        cos_d = 1.0 - t
    elif protocol is ProtocolKind.FOUR_PLUS_TWO:
        cos_d = 1.0 - 2.0 * t
    else:
        raise DomainError("the 4-state rate does not fix an overlap angle")
    if not (0.0 < cos_d <= 1.0) or not (t > 0.0):
        raise DomainError(f"t={t} outside the invertible range for {protocol.value}")
    return OverlapAngle.from_cos(cos_d)


def mu_for_delta(delta: OverlapAngle | float) -> float:
    return -math.log(_as_delta(delta).cos_delta) / 2.0


def _normalized(protocol: ProtocolKind, t: float) -> InfoCurvePoint:
    try:
        d = delta_for_rate(protocol, t)
    except DomainError as exc:
        return InfoCurvePoint(t, math.nan, math.nan, str(exc))
    s = d.sin_delta
    # 4-state information is 2Q; eta cancels in the ratio
    denom = 1.0 - s if protocol is ProtocolKind.TWO_STATE else 2.0 - s
    if denom == 0.0:
        return InfoCurvePoint(t, math.inf, math.inf)
    return InfoCurvePoint(t, max_extractable_info(d) / denom, 1.0 / denom)


def default_t_grid(n: int = 50, lo: float = 1e-4, hi: float = 0.4) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def fig3_curves(t_grid: Sequence[float] | None = None) -> dict[ProtocolKind, list[InfoCurvePoint]]:
    """Eve's information normalized to the 4-state system, as a function of transmission rate."""
    if t_grid is None:
        t_grid = default_t_grid()
    return {
        p: [_normalized(p, float(t)) for t in t_grid]
        for p in (ProtocolKind.TWO_STATE, ProtocolKind.FOUR_PLUS_TWO)
    }


class PnsLeakage(NamedTuple):
    eve_known_fraction: float
    induced_qber: float
    bob_receive_rate: float
    p_multi: float


def honest_receive_rate(dist: PhotonDistribution, loss_fraction: float) -> float:
    """Bob's expected receptions per pulse on the honest lossy line, to first order in mu."""
    return (1.0 - loss_fraction) * dist.sf(0)


def pns_leakage(dist: PhotonDistribution, loss_fraction: float) -> PnsLeakage:
    """Fraction of Bob's bits known to Eve under photon-number splitting.

    Eve keeps one photon of every multiphoton pulse, forwards the other over a
    lossless line, and fills the remaining budget of Bob's expected receptions
    with single-photon pulses.
    """
    loss_fraction = _check_probability(loss_fraction, "loss_fraction")
    if loss_fraction >= 1.0:
        raise DomainError("loss_fraction = 1: Bob expects nothing, the leakage is undefined")
    p_multi = multiphoton_fraction(dist).p_multi
    bob = honest_receive_rate(dist, loss_fraction)
    if bob == 0.0:
        return PnsLeakage(math.nan, 0.0, 0.0, p_multi)
    return PnsLeakage(min(1.0, p_multi / bob), 0.0, bob, p_multi)


def beamsplit_leakage(mu: float, loss_fraction: float) -> float:
    """Bits per key bit Eve can extract from the diverted part after basis disclosure."""
    loss_fraction = _check_probability(loss_fraction, "loss_fraction")
    if loss_fraction >= 1.0:
        raise DomainError("loss_fraction must be < 1")
    return max_extractable_info(overlap_angle(_check_mu(mu) * loss_fraction))
