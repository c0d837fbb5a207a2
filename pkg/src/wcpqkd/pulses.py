"""Semi-classical pulse model: Alice's source, the fiber, and Bob's receivers.

Pulses are handled in batches of numpy arrays; the single-pulse functions
(:func:`emit_pulse`, :func:`transmit_pulse`, :func:`detect_pulse`) wrap the
batch code with length-1 arrays so there is only one physics path.

Phase encodings carry a complex signal amplitude and a strong reference on the
orthogonal polarization. Bob taps a fraction of the reference equal in
amplitude to the nominal signal and interferes it with the signal at a 50/50
combiner; a detector behind a port of intensity ``I`` clicks with probability
``1 - exp(-I)``. Polarization encoding tracks the photon number and the
polarization angle; photons are routed by Malus' law.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .analytics import ProtocolKind
from .errors import ConfigError
from .qmath import PhotonDistribution, SourceKind, _check_mu

INCONCLUSIVE = -1
NO_PHOTONS = -1


class Encoding(enum.Enum):
    PHASE = "phase"
    POLARIZATION = "polarization"


class Basis(enum.IntEnum):
    B0 = 0
    B1 = 1


class Origin(enum.IntEnum):
    ALICE = 0
    EVE = 1


def encoding_for(protocol: ProtocolKind) -> Encoding:
    if ProtocolKind(protocol) is ProtocolKind.FOUR_STATE:
        return Encoding.POLARIZATION
    return Encoding.PHASE


def signal_phase(bit, basis):
    """Phase of the weak signal: 0/pi in B0, pi/2 and 3pi/2 in B1."""
    return np.asarray(basis) * (np.pi / 2) + np.asarray(bit) * np.pi


def polarization_angle(bit, basis):
    """Polarization angle: vertical/horizontal in B0, diagonal/antidiagonal in B1."""
    return np.asarray(basis) * (np.pi / 4) + np.asarray(bit) * (np.pi / 2)


@dataclass
class PulseBatch:
    encoding: Encoding
    signal: np.ndarray
    reference: np.ndarray
    #: photon number for polarization encoding, NO_PHOTONS for phase encoding
    photons: np.ndarray
    #: polarization angle in radians; NaN for phase encoding
    polarization: np.ndarray
    origin: np.ndarray
    #: pulse travels on a line Eve substituted and is not attenuated any more
    lossless: np.ndarray

    def __len__(self):
        return len(self.signal)

    def copy(self) -> PulseBatch:
        return replace(
            self,
            signal=self.signal.copy(),
            reference=self.reference.copy(),
            photons=self.photons.copy(),
            polarization=self.polarization.copy(),
            origin=self.origin.copy(),
            lossless=self.lossless.copy(),
        )

    def where(self, mask: np.ndarray, other: PulseBatch) -> PulseBatch:
        """Take ``other`` where ``mask`` is set, ``self`` elsewhere."""
        if other.encoding is not self.encoding:
            raise ConfigError("cannot mix encodings in one batch")
        return PulseBatch(
            self.encoding,
            np.where(mask, other.signal, self.signal),
            np.where(mask, other.reference, self.reference),
            np.where(mask, other.photons, self.photons),
            np.where(mask, other.polarization, self.polarization),
            np.where(mask, other.origin, self.origin),
            np.where(mask, other.lossless, self.lossless),
        )

    def frame(self, i: int) -> PulseFrame:
        return PulseFrame(
            signal_amplitude=complex(self.signal[i]),
            reference_amplitude=complex(self.reference[i]),
            encoding=self.encoding,
            origin=Origin(int(self.origin[i])),
            photons=int(self.photons[i]),
            polarization=float(self.polarization[i]),
            lossless=bool(self.lossless[i]),
        )


@dataclass(frozen=True)
class PulseFrame:
    """One transmitted signal."""

    signal_amplitude: complex
    reference_amplitude: complex
    encoding: Encoding
    origin: Origin = Origin.ALICE
    photons: int = NO_PHOTONS
    polarization: float = math.nan
    lossless: bool = False

    @property
    def intensity(self) -> float:
        return abs(self.signal_amplitude) ** 2

    def batch(self) -> PulseBatch:
        return PulseBatch(
            self.encoding,
            np.array([self.signal_amplitude], dtype=complex),
            np.array([self.reference_amplitude], dtype=complex),
            np.array([self.photons], dtype=np.int64),
            np.array([self.polarization], dtype=float),
            np.array([int(self.origin)], dtype=np.int8),
            np.array([self.lossless]),
        )


@dataclass(frozen=True)
class AliceChoice:
    bit: int
    basis: Basis = Basis.B0


@dataclass(frozen=True)
class Source:
    """Alice's transmitter for one protocol.

    ``reference_ratio`` is |beta|^2 / mu. A reference-free source sends
    ``beta = alpha`` in the sequential style, so Eve can block it together with the
    signal.
    """

    protocol: ProtocolKind
    mu: float
    kind: SourceKind = SourceKind.POISSON
    reference_ratio: float = 100.0
    reference_free: bool = False

    def __post_init__(self):
        object.__setattr__(self, "protocol", ProtocolKind(self.protocol))
        object.__setattr__(self, "kind", SourceKind(self.kind))
        _check_mu(self.mu)
        if self.reference_ratio < 1.0:
            raise ConfigError("the reference must be at least as strong as the signal")
        if self.kind is SourceKind.THERMAL and self.encoding is Encoding.PHASE:
            raise ConfigError("thermal light carries no stable phase; use it with the 4-state protocol")

    @property
    def encoding(self) -> Encoding:
        return encoding_for(self.protocol)

    @property
    def distribution(self) -> PhotonDistribution:
        return PhotonDistribution(self.kind, self.mu)

    @property
    def tap_ratio(self) -> float:
        """Intensity ratio reference / local oscillator at Bob's tap."""
        return 1.0 if self.reference_free else self.reference_ratio

    @property
    def reference_amplitude(self) -> float:
        return math.sqrt(self.tap_ratio * self.mu)

    def check_choices(self, bits, bases):
        bits = np.asarray(bits)
        bases = np.asarray(bases)
        if np.any((bits != 0) & (bits != 1)):
            raise ConfigError("bits must be 0 or 1")
        if np.any((bases != 0) & (bases != 1)):
            raise ConfigError("bases must be B0 or B1")
        if self.protocol is ProtocolKind.TWO_STATE and np.any(bases != 0):
            raise ConfigError("the 2-state protocol only uses basis B0")

    def emit(self, bits, bases, rng: np.random.Generator, origin: Origin = Origin.ALICE) -> PulseBatch:
        """Prepare one pulse per (bit, basis).

        Draws photon numbers for the polarization encoding only; phase pulses
        consume no randomness.
        """
        bits = np.asarray(bits, dtype=np.int64)
        bases = np.asarray(bases, dtype=np.int64)
        self.check_choices(bits, bases)
        n = len(bits)
        amp = math.sqrt(self.mu)
        if self.encoding is Encoding.PHASE:
            return PulseBatch(
                Encoding.PHASE,
                amp * np.exp(1j * signal_phase(bits, bases)),
                np.full(n, self.reference_amplitude, dtype=complex),
                np.full(n, NO_PHOTONS, dtype=np.int64),
                np.full(n, np.nan),
                np.full(n, int(origin), dtype=np.int8),
                np.zeros(n, dtype=bool),
            )
        return PulseBatch(
            Encoding.POLARIZATION,
            np.full(n, amp, dtype=complex),
            np.zeros(n, dtype=complex),
            self.distribution.sample(rng, n).astype(np.int64),
            polarization_angle(bits, bases).astype(float),
            np.full(n, int(origin), dtype=np.int8),
            np.zeros(n, dtype=bool),
        )


def emit_pulse(protocol: ProtocolKind, choice: AliceChoice, mu: float, rng: np.random.Generator,
               kind: SourceKind = SourceKind.POISSON, reference_ratio: float = 100.0) -> PulseFrame:
    source = Source(protocol, mu, kind, reference_ratio)
    return source.emit([choice.bit], [int(choice.basis)], rng).frame(0)


@dataclass(frozen=True)
class FiberModel:
    length_km: float = 0.0
    attenuation_db_per_km: float = 0.2
    #: extra loss in dB on top of the length-dependent part
    extra_loss_db: float = 0.0

    def __post_init__(self):
        for name in ("length_km", "attenuation_db_per_km", "extra_loss_db"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")

    @classmethod
    def from_loss_db(cls, loss_db: float) -> FiberModel:
        return cls(0.0, 0.2, loss_db)

    @classmethod
    def from_loss_fraction(cls, loss: float) -> FiberModel:
        if not (0.0 <= loss < 1.0):
            raise ConfigError(f"loss fraction must lie in [0, 1), got {loss!r}")
        return cls.from_loss_db(-10.0 * math.log10(1.0 - loss))

    @property
    def loss_db(self) -> float:
        return self.length_km * self.attenuation_db_per_km + self.extra_loss_db

    @property
    def transmittance(self) -> float:
        return 10.0 ** (-self.loss_db / 10.0)

    @property
    def loss_fraction(self) -> float:
        return 1.0 - self.transmittance


def transmit(batch: PulseBatch, fiber: FiberModel, rng: np.random.Generator) -> PulseBatch:
    """Attenuate every pulse not already on a substituted lossless line.

    Amplitudes scale by sqrt(transmittance); tracked photon numbers are thinned
    binomially. One binomial draw is made per pulse regardless of encoding.
    """
    eta = np.where(batch.lossless, 1.0, fiber.transmittance)
    out = batch.copy()
    out.signal = batch.signal * np.sqrt(eta)
    out.reference = batch.reference * np.sqrt(eta)
    kept = rng.binomial(np.maximum(batch.photons, 0), eta)
    out.photons = np.where(batch.photons >= 0, kept, NO_PHOTONS)
    return out


def transmit_pulse(pulse: PulseFrame, fiber: FiberModel, rng: np.random.Generator) -> PulseFrame:
    return transmit(pulse.batch(), fiber, rng).frame(0)


@dataclass
class Detections:
    """Batch of receiver outcomes: 0, 1 or INCONCLUSIVE plus raw clicks."""

    result: np.ndarray
    d2: np.ndarray
    d3: np.ndarray

    @property
    def double_click(self) -> np.ndarray:
        return self.d2 & self.d3

    @property
    def conclusive(self) -> np.ndarray:
        return self.result != INCONCLUSIVE

    def outcome(self, i: int) -> DetectionOutcome:
        return DetectionOutcome(int(self.result[i]), (bool(self.d2[i]), bool(self.d3[i])))


@dataclass(frozen=True)
class DetectionOutcome:
    #: 0, 1 or INCONCLUSIVE
    result: int
    clicks: tuple[bool, bool] = field(default=(False, False))

    @property
    def double_click(self) -> bool:
        return self.clicks[0] and self.clicks[1]

    @property
    def inconclusive(self) -> bool:
        return self.result == INCONCLUSIVE


def resolve_clicks(d2: np.ndarray, d3: np.ndarray, tie: np.ndarray) -> np.ndarray:
    """D2 alone reads 0, D3 alone reads 1, both read a uniformly random bit."""
    result = np.full(d2.shape, INCONCLUSIVE, dtype=np.int8)
    result[d2 & ~d3] = 0
    result[d3 & ~d2] = 1
    both = d2 & d3
    result[both] = (tie[both] >= 0.5).astype(np.int8)
    return result


def port_intensities(signal, local):
    """Intensities at the two outputs of the 50/50 combiner, (D2, D3)."""
    return np.abs(signal + local) ** 2 / 2.0, np.abs(signal - local) ** 2 / 2.0


def click_probability(intensity, dark=0.0):
    return 1.0 - (1.0 - dark) * np.exp(-intensity)


def interferometer_clicks(signal, local, rng: np.random.Generator, dark=0.0):
    i2, i3 = port_intensities(signal, local)
    u = rng.random((2, len(signal)))
    return u[0] < click_probability(i2, dark), u[1] < click_probability(i3, dark)


def polarization_clicks(photons, angle, analyzer, rng: np.random.Generator, dark=0.0):
    """Route each photon to the 'parallel' (D2) or 'orthogonal' (D3) output."""
    p_par = np.cos(np.nan_to_num(angle) - analyzer) ** 2
    n = np.maximum(photons, 0)
    n_par = rng.binomial(n, np.clip(p_par, 0.0, 1.0))
    u = rng.random((2, len(n)))
    return (n_par > 0) | (u[0] < dark), (n - n_par > 0) | (u[1] < dark)


@dataclass(frozen=True)
class Receiver:
    """Bob's detection setup.

    For phase encodings ``tap_ratio`` converts the received reference into the
    local amplitude; the basis B1 adds a pi/2 phase shift to that arm. Dark counts
    in the phase receiver are gated by the reference trigger (D1).
    """

    encoding: Encoding
    tap_ratio: float = 100.0
    dark_count: float = 0.0

    @classmethod
    def for_source(cls, source: Source, dark_count: float = 0.0) -> Receiver:
        return cls(source.encoding, source.tap_ratio, dark_count)

    def local_amplitude(self, reference, basis):
        return reference / math.sqrt(self.tap_ratio) * np.exp(1j * np.pi / 2 * np.asarray(basis))

    def detect(self, batch: PulseBatch, basis, rng: np.random.Generator) -> Detections:
        if batch.encoding is not self.encoding:
            raise ConfigError(f"{batch.encoding.value} pulse sent to a {self.encoding.value} receiver")
        basis = np.broadcast_to(np.asarray(basis, dtype=np.int64), (len(batch),))
        if self.encoding is Encoding.PHASE:
            local = self.local_amplitude(batch.reference, basis)
            dark = np.where(np.abs(batch.reference) > 0, self.dark_count, 0.0)
            d2, d3 = interferometer_clicks(batch.signal, local, rng, dark)
        else:
            d2, d3 = polarization_clicks(batch.photons, batch.polarization, basis * (np.pi / 4), rng,
                                         self.dark_count)
        tie = rng.random(len(batch))
        return Detections(resolve_clicks(d2, d3, tie), d2, d3)


def detect_pulse(pulse: PulseFrame, bob_basis: Basis, rng: np.random.Generator,
                 tap_ratio: float = 100.0, dark_count: float = 0.0) -> DetectionOutcome:
    receiver = Receiver(pulse.encoding, tap_ratio, dark_count)
    return receiver.detect(pulse.batch(), [int(bob_basis)], rng).outcome(0)


def outcome_probabilities(signal: complex, local: complex) -> dict:
    """Closed-form P(0), P(1), P(?) for one phase pulse with a random double-click tie-break."""
    i2, i3 = port_intensities(np.asarray(signal), np.asarray(local))
    p2, p3 = float(click_probability(i2)), float(click_probability(i3))
    both = p2 * p3
    return {
        0: p2 * (1 - p3) + both / 2,
        1: p3 * (1 - p2) + both / 2,
        INCONCLUSIVE: (1 - p2) * (1 - p3),
    }
