"""Eavesdropping strategies applied between Alice and the fiber.

Each strategy takes a :class:`~wcpqkd.pulses.PulseBatch`, returns the batch
forwarded towards Bob, and an :class:`EveLedger` describing what Eve learned or
stored. Deferred measurements (photon-number splitting, beam splitting) are
resolved by :func:`eve_decode_after_disclosure` once the bases are public.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterator
from dataclasses import dataclass, field, replace

import numpy as np

from .analytics import ProtocolKind, honest_receive_rate
from .errors import ConfigError, StrategyRejected
from .pulses import (
    INCONCLUSIVE,
    Encoding,
    FiberModel,
    Origin,
    PulseBatch,
    PulseFrame,
    Source,
    interferometer_clicks,
    polarization_clicks,
    resolve_clicks,
)

NO_GUESS = -1
NO_BASIS = -1
BASIS_SYM = 2

DEFERRED_NONE = 0
DEFERRED_PHOTON = 1
DEFERRED_AMPLITUDE = 2


class StrategyKind(enum.Enum):
    INTERCEPT_RESEND_CONJUGATE = "intercept-conjugate"
    INTERCEPT_RESEND_SYMMETRIC = "intercept-symmetric"
    POVM_MIMIC = "povm-mimic"
    BLOCK_ON_INCONCLUSIVE = "block"
    BEAM_SPLIT = "beam-split"
    PHOTON_NUMBER_SPLIT = "pns"


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind
    eta: float = 1.0
    #: beam-split fraction; None means "match the fiber loss"
    split_fraction: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if not (0.0 <= self.eta <= 1.0):
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta!r}")
        if self.split_fraction is not None and not (0.0 <= self.split_fraction < 1.0):
            raise ConfigError(f"split fraction must lie in [0, 1), got {self.split_fraction!r}")


@dataclass(frozen=True)
class EveRecord:
    pulse_index: int
    attacked: bool
    guess: int | None
    basis_used: int | None
    #: stored photon angle or field amplitude, None if nothing was kept
    deferred_state: complex | float | None = None
    certain: bool = False


@dataclass
class EveLedger:
    """Per-pulse record of Eve's actions, as parallel arrays."""

    attacked: np.ndarray
    guess: np.ndarray
    basis_used: np.ndarray
    deferred_kind: np.ndarray
    #: stored field amplitude (DEFERRED_AMPLITUDE)
    deferred_amplitude: np.ndarray
    #: stored photon polarization (DEFERRED_PHOTON)
    deferred_angle: np.ndarray
    #: guess known to equal Alice's bit
    certain: np.ndarray
    pulse_index: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.pulse_index is None:
            self.pulse_index = np.arange(len(self.attacked), dtype=np.int64)

    @classmethod
    def empty(cls, n: int) -> EveLedger:
        return cls(
            np.zeros(n, dtype=bool),
            np.full(n, NO_GUESS, dtype=np.int8),
            np.full(n, NO_BASIS, dtype=np.int8),
            np.zeros(n, dtype=np.int8),
            np.zeros(n, dtype=complex),
            np.full(n, np.nan),
            np.zeros(n, dtype=bool),
        )

    def __len__(self):
        return len(self.attacked)

    def subset(self, idx) -> EveLedger:
        return EveLedger(*(getattr(self, f)[idx] for f in _LEDGER_FIELDS))

    def offset(self, start: int) -> EveLedger:
        return replace(self, pulse_index=self.pulse_index + start)

    @staticmethod
    def concat(parts: list[EveLedger]) -> EveLedger:
        return EveLedger(*(np.concatenate([getattr(p, f) for p in parts]) for f in _LEDGER_FIELDS))

    def records(self) -> Iterator[EveRecord]:
        for i in range(len(self)):
            kind = int(self.deferred_kind[i])
            if kind == DEFERRED_PHOTON:
                state = float(self.deferred_angle[i])
            elif kind == DEFERRED_AMPLITUDE:
                state = complex(self.deferred_amplitude[i])
            else:
                state = None
            g, b = int(self.guess[i]), int(self.basis_used[i])
            yield EveRecord(
                int(self.pulse_index[i]),
                bool(self.attacked[i]),
                None if g == NO_GUESS else g,
                None if b == NO_BASIS else b,
                state,
                bool(self.certain[i]),
            )


_LEDGER_FIELDS = ("attacked", "guess", "basis_used", "deferred_kind", "deferred_amplitude",
                  "deferred_angle", "certain", "pulse_index")


def symmetric_projection(signal, basis, rng: np.random.Generator) -> np.ndarray:
    """Eve's bit from projecting onto the symmetric orthogonal basis of a state pair.

    For the pair ``|+-a e^{i phi}>`` selected by ``basis`` the guess is wrong with
    probability (1 - sin d)/2, d being the overlap angle at the pulse's own
    intensity. Fields with a component ``c`` along the pair (c in [-1, 1]) give
    P(0) = (1 + c sin d)/2, so a state of the conjugate pair yields a coin flip.
    """
    signal = np.asarray(signal, dtype=complex)
    axis = np.exp(1j * np.pi / 2 * np.asarray(basis))
    mag = np.abs(signal)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(mag > 0, np.real(signal * np.conj(axis)) / mag, 0.0)
    cos_d = np.exp(-2.0 * mag**2)
    sin_d = np.sqrt((1.0 - cos_d) * (1.0 + cos_d))
    p0 = (1.0 + c * sin_d) / 2.0
    return (rng.random(len(signal)) >= p0).astype(np.int8)


def _random_bases(source: Source, rng: np.random.Generator, n: int) -> np.ndarray:
    bases = rng.integers(0, 2, n)
    if source.protocol is ProtocolKind.TWO_STATE:
        bases[:] = 0
    return bases


def _require_phase(batch: PulseBatch, what: str):
    if batch.encoding is not Encoding.PHASE:
        raise ConfigError(f"{what} needs a phase-encoded pulse")


def _eve_receiver(source: Source, batch: PulseBatch, bases, rng):
    """Eve's copy of the interferometric receiver, with her own nominal local amplitude."""
    local = math.sqrt(source.mu) * np.exp(1j * np.pi / 2 * bases)
    d2, d3 = interferometer_clicks(batch.signal, local, rng)
    return resolve_clicks(d2, d3, rng.random(len(batch)))


def intercept_resend_conjugate(batch: PulseBatch, eta: float, source: Source,
                               rng: np.random.Generator) -> tuple[PulseBatch, EveLedger]:
    """Measure a fraction ``eta`` of the pulses in a randomly chosen protocol basis and resend.

    4-state: Malus-law polarization measurement, and a single photon is resent
    for every click; an empty pulse gives no click and is passed on as it is.
    4+2: symmetric
    projection inside Eve's basis, which is always conclusive.
    """
    if source.protocol is ProtocolKind.TWO_STATE:
        raise ConfigError("conjugate-basis interception needs the 4-state or 4+2 protocol")
    n = len(batch)
    attacked = rng.random(n) < eta
    bases = rng.integers(0, 2, n)
    if batch.encoding is Encoding.POLARIZATION:
        d2, d3 = polarization_clicks(batch.photons, batch.polarization, bases * (np.pi / 4), rng)
        guess = resolve_clicks(d2, d3, rng.random(n))
    else:
        guess = symmetric_projection(batch.signal, bases, rng)
    guess = np.where(attacked, guess, NO_GUESS).astype(np.int8)
    fresh = source.emit(np.maximum(guess, 0), bases, rng, origin=Origin.EVE)
    if batch.encoding is Encoding.POLARIZATION:
        # one photon per click keeps Bob's reception rate at the honest value
        fresh.photons[:] = 1
        fresh.signal[:] = 1.0
    out = batch.where(guess != NO_GUESS, fresh)

    ledger = EveLedger.empty(n)
    ledger.attacked = attacked
    ledger.guess = guess
    ledger.basis_used = np.where(attacked, bases, NO_BASIS).astype(np.int8)
    # clicks in the right basis are exact for polarization; known only after disclosure
    if batch.encoding is Encoding.POLARIZATION:
        ledger.certain = (guess != NO_GUESS) & ~(d2 & d3)
    return out, ledger


def intercept_resend_symmetric(batch: PulseBatch, eta: float, source: Source,
                               rng: np.random.Generator) -> tuple[PulseBatch, EveLedger]:
    """Project a fraction ``eta`` of the 2-state pulses on the symmetric basis and resend."""
    _require_phase(batch, "symmetric projection")
    if source.protocol is not ProtocolKind.TWO_STATE:
        raise ConfigError("symmetric interception is defined on the 2-state protocol")
    n = len(batch)
    attacked = rng.random(n) < eta
    guess = symmetric_projection(batch.signal, np.zeros(n, dtype=np.int64), rng)
    guess = np.where(attacked, guess, NO_GUESS).astype(np.int8)
    fresh = source.emit(np.maximum(guess, 0), np.zeros(n, dtype=np.int64), rng, origin=Origin.EVE)
    out = batch.where(attacked, fresh)
    ledger = EveLedger.empty(n)
    ledger.attacked = attacked
    ledger.guess = guess
    ledger.basis_used = np.where(attacked, BASIS_SYM, NO_BASIS).astype(np.int8)
    return out, ledger


def povm_mimic(batch: PulseBatch, eta: float, source: Source,
               rng: np.random.Generator) -> tuple[PulseBatch, EveLedger]:
    """Run Bob's receiver; resend the detected state, or a random one when inconclusive."""
    _require_phase(batch, "the unambiguous receiver")
    n = len(batch)
    attacked = rng.random(n) < eta
    bases = _random_bases(source, rng, n)
    result = _eve_receiver(source, batch, bases, rng)
    coin = rng.integers(0, 2, n)
    sent = np.where(result == INCONCLUSIVE, coin, result)
    fresh = source.emit(sent, bases, rng, origin=Origin.EVE)
    out = batch.where(attacked, fresh)
    ledger = EveLedger.empty(n)
    ledger.attacked = attacked
    ledger.guess = np.where(attacked, result, NO_GUESS).astype(np.int8)
    ledger.basis_used = np.where(attacked, bases, NO_BASIS).astype(np.int8)
    ledger.certain = attacked & (result != INCONCLUSIVE)
    return out, ledger


def block_on_inconclusive(batch: PulseBatch, eta: float, source: Source,
                          rng: np.random.Generator) -> tuple[PulseBatch, EveLedger]:
    """Resend only conclusive results; otherwise send nothing.

    With a parallel reference Eve still has to forward the strong reference
    (with an empty signal); in the reference-free scheme the whole pulse vanishes.
    """
    _require_phase(batch, "the unambiguous receiver")
    n = len(batch)
    attacked = rng.random(n) < eta
    bases = _random_bases(source, rng, n)
    result = _eve_receiver(source, batch, bases, rng)
    fresh = source.emit(np.maximum(result, 0), bases, rng, origin=Origin.EVE)
    blocked = attacked & (result == INCONCLUSIVE)
    fresh.signal[blocked] = 0.0
    if source.reference_free:
        fresh.reference[blocked] = 0.0
    out = batch.where(attacked, fresh)
    ledger = EveLedger.empty(n)
    ledger.attacked = attacked
    ledger.guess = np.where(attacked, result, NO_GUESS).astype(np.int8)
    ledger.basis_used = np.where(attacked, bases, NO_BASIS).astype(np.int8)
    ledger.certain = attacked & (result != INCONCLUSIVE)
    return out, ledger


def beam_split(batch: PulseBatch, split_fraction: float, rng: np.random.Generator,
               eta: float = 1.0) -> tuple[PulseBatch, EveLedger]:
    """Divert ``split_fraction`` of each pulse and forward the rest on a lossless line.

    Phase pulses: Eve stores the diverted field amplitude. Polarization pulses:
    photons are split binomially and Eve stores the polarization of any photon she
    kept.
    """
    if not (0.0 <= split_fraction < 1.0):
        raise ConfigError(f"split fraction must lie in [0, 1), got {split_fraction!r}")
    n = len(batch)
    attacked = rng.random(n) < eta
    keep = math.sqrt(1.0 - split_fraction)
    out = batch.copy()
    out.signal = np.where(attacked, batch.signal * keep, batch.signal)
    out.reference = np.where(attacked, batch.reference * keep, batch.reference)
    out.lossless = batch.lossless | attacked
    ledger = EveLedger.empty(n)
    ledger.attacked = attacked
    diverted = rng.binomial(np.maximum(batch.photons, 0), split_fraction)
    if batch.encoding is Encoding.PHASE:
        ledger.deferred_kind = np.where(attacked, DEFERRED_AMPLITUDE, 0).astype(np.int8)
        ledger.deferred_amplitude = np.where(attacked, batch.signal * math.sqrt(split_fraction), 0)
    else:
        kept = attacked & (diverted > 0)
        out.photons = np.where(attacked, batch.photons - diverted, batch.photons)
        ledger.deferred_kind = np.where(kept, DEFERRED_PHOTON, 0).astype(np.int8)
        ledger.deferred_angle = np.where(kept, batch.polarization, np.nan)
    return out, ledger


@dataclass(frozen=True)
class PnsBudget:
    """Forwarding probabilities that keep Bob's reception rate at the honest value."""

    forward_multi: float
    forward_single: float

    @classmethod
    def for_line(cls, source: Source, fiber: FiberModel) -> PnsBudget:
        dist = source.distribution
        target = honest_receive_rate(dist, fiber.loss_fraction)
        p1 = dist.pmf(1)
        p_multi = dist.sf(1)
        if p_multi == 0.0:
            return cls(0.0, min(1.0, target / p1) if p1 else 0.0)
        forward_multi = min(1.0, target / p_multi)
        spare = max(0.0, target - p_multi)
        return cls(forward_multi, min(1.0, spare / p1) if p1 else 0.0)


def photon_number_split(batch: PulseBatch, budget: PnsBudget, rng: np.random.Generator,
                        eta: float = 1.0) -> tuple[PulseBatch, EveLedger]:
    """Keep one photon of every multiphoton pulse, forward one losslessly.

    Single-photon pulses are forwarded with the probability that fills Bob's
    expected reception rate, and blocked otherwise. Untouched polarization.
    """
    if batch.encoding is not Encoding.POLARIZATION:
        raise StrategyRejected("photon-number splitting randomizes the phase of phase-encoded pulses")
    n = len(batch)
    attacked = rng.random(n) < eta
    u = rng.random(n)
    multi = attacked & (batch.photons >= 2)
    single = attacked & (batch.photons == 1)
    forward = (multi & (u < budget.forward_multi)) | (single & (u < budget.forward_single))
    out = batch.copy()
    out.photons = np.where(attacked, np.where(forward, 1, 0), batch.photons)
    out.signal = np.where(attacked, np.where(forward, 1.0, 0.0), batch.signal)
    out.lossless = batch.lossless | attacked
    ledger = EveLedger.empty(n)
    ledger.attacked = attacked
    ledger.deferred_kind = np.where(multi, DEFERRED_PHOTON, 0).astype(np.int8)
    ledger.deferred_angle = np.where(multi, batch.polarization, np.nan)
    return out, ledger


def apply_strategy(strategy: StrategyConfig, batch: PulseBatch, source: Source, fiber: FiberModel,
                   rng: np.random.Generator) -> tuple[PulseBatch, EveLedger]:
    kind = strategy.kind
    if kind is StrategyKind.INTERCEPT_RESEND_CONJUGATE:
        return intercept_resend_conjugate(batch, strategy.eta, source, rng)
    if kind is StrategyKind.INTERCEPT_RESEND_SYMMETRIC:
        return intercept_resend_symmetric(batch, strategy.eta, source, rng)
    if kind is StrategyKind.POVM_MIMIC:
        return povm_mimic(batch, strategy.eta, source, rng)
    if kind is StrategyKind.BLOCK_ON_INCONCLUSIVE:
        return block_on_inconclusive(batch, strategy.eta, source, rng)
    if kind is StrategyKind.BEAM_SPLIT:
        split = fiber.loss_fraction if strategy.split_fraction is None else strategy.split_fraction
        return beam_split(batch, split, rng, strategy.eta)
    if kind is StrategyKind.PHOTON_NUMBER_SPLIT:
        return photon_number_split(batch, PnsBudget.for_line(source, fiber), rng, strategy.eta)
    raise ConfigError(f"unknown strategy {kind!r}")


def eve_decode_after_disclosure(ledger: EveLedger, disclosed_bases, rng: np.random.Generator) -> EveLedger:
    """Resolve Eve's knowledge once the bases of these pulses are public.

    Guesses made in a basis other than the disclosed one are dropped (Eve knows
    they are uncorrelated); stored photons are measured in the disclosed basis
    and stored amplitudes are projected on the symmetric basis of the disclosed
    pair. ``disclosed_bases`` holds -1 where nothing was disclosed.
    """
    disclosed = np.asarray(disclosed_bases, dtype=np.int64)
    if disclosed.shape != ledger.attacked.shape:
        raise ValueError("one disclosed basis per ledger entry is required")
    needs = ledger.attacked & ((ledger.deferred_kind != DEFERRED_NONE) |
                               np.isin(ledger.basis_used, (0, 1)))
    missing = needs & (disclosed < 0)
    if np.any(missing):
        first = int(ledger.pulse_index[np.argmax(missing)])
        raise ValueError(f"no basis disclosed for attacked pulse {first}")
    out = replace(ledger, guess=ledger.guess.copy(), certain=ledger.certain.copy())
    basis = np.maximum(disclosed, 0)

    wrong = np.isin(ledger.basis_used, (0, 1)) & (ledger.basis_used != disclosed)
    out.guess[wrong] = NO_GUESS
    out.certain[wrong] = False

    photon = ledger.deferred_kind == DEFERRED_PHOTON
    p_par = np.cos(np.nan_to_num(ledger.deferred_angle) - basis * (np.pi / 4)) ** 2
    photon_bit = (rng.random(len(ledger)) >= p_par).astype(np.int8)
    out.guess[photon] = photon_bit[photon]
    # exact when the stored photon lies on an axis of the disclosed basis
    aligned = np.isclose(p_par, 0.0, atol=1e-12) | np.isclose(p_par, 1.0, atol=1e-12)
    out.certain[photon] = aligned[photon]

    amp = ledger.deferred_kind == DEFERRED_AMPLITUDE
    amp_bit = symmetric_projection(ledger.deferred_amplitude, basis, rng)
    out.guess[amp] = amp_bit[amp]
    out.certain[amp] = False
    return out


def attack_pulse(strategy: StrategyConfig, pulse: PulseFrame, source: Source, fiber: FiberModel,
                 rng: np.random.Generator) -> tuple[PulseFrame, EveRecord]:
    """Single-pulse form of :func:`apply_strategy`."""
    out, ledger = apply_strategy(strategy, pulse.batch(), source, fiber, rng)
    return out.frame(0), next(ledger.records())

