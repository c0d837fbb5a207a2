"""Coherent-state overlap geometry, photon statistics and binary-channel information.

Everything here is a pure function of the mean photon number ``mu = |alpha|^2``
(or of the overlap angle derived from it), so the module is safe to call from
any number of worker processes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import DomainError

#: pmf truncation point: the tail beyond n_max carries less than this mass.
TAIL_MASS = 1e-12


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not math.isfinite(mu) or mu < 0:
        raise DomainError(f"mean photon number must be finite and >= 0, got {mu!r}")
    return mu


def _check_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")
    return p


@dataclass(frozen=True)
class OverlapAngle:
    """Angle between the two signal states ``|alpha>`` and ``|-alpha>``.

    ``cos_delta`` is the overlap ``|<alpha|-alpha>| = exp(-2 mu)``; ``delta`` runs
    from 0 (identical states) to pi/2 (orthogonal states).
    """

    delta: float
    cos_delta: float

    def __post_init__(self):
        if not (0.0 <= self.delta <= math.pi / 2):
            raise DomainError(f"overlap angle must lie in [0, pi/2], got {self.delta!r}")
        if not (0.0 <= self.cos_delta <= 1.0):
            raise DomainError(f"cos(delta) must lie in [0, 1], got {self.cos_delta!r}")

    @classmethod
    def from_delta(cls, delta: float) -> OverlapAngle:
        delta = float(delta)
        if not (0.0 <= delta <= math.pi / 2):
            raise DomainError(f"overlap angle must lie in [0, pi/2], got {delta!r}")
        return cls(delta, math.cos(delta))

    @classmethod
    def from_cos(cls, cos_delta: float) -> OverlapAngle:
        cos_delta = _check_probability(cos_delta, "cos(delta)")
        return cls(math.acos(cos_delta), cos_delta)

    @property
    def sin_delta(self) -> float:
        # sqrt(1 - cos^2) keeps full precision near delta = 0 where sin(acos(x)) does not
        c = self.cos_delta
        return math.sqrt((1.0 - c) * (1.0 + c))


def _as_delta(delta: OverlapAngle | float) -> OverlapAngle:
    if isinstance(delta, OverlapAngle):
        return delta
    return OverlapAngle.from_delta(delta)


def overlap_angle(mu: float) -> OverlapAngle:
    """Overlap angle of ``|+alpha>`` and ``|-alpha>`` for mean photon number ``mu``.

    >>> overlap_angle(0.0).delta
    0.0
    """
    mu = _check_mu(mu)
    return OverlapAngle.from_cos(math.exp(-2.0 * mu))


def sym_projection_error(delta: OverlapAngle | float) -> float:
    """Error probability of the symmetric orthogonal-basis projection, ``(1 - sin d)/2``."""
    d = _as_delta(delta)
    return (1.0 - d.sin_delta) / 2.0


def binary_entropy(p: float) -> float:
    """Shannon entropy of a Bernoulli(p) variable in bits, with 0 log 0 = 0."""
    p = _check_probability(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def max_extractable_info(delta: OverlapAngle | float) -> float:
    """Capacity (bits) of the binary symmetric channel set up by the symmetric projection.

    This is the most information a measurement can extract from one of two
    equiprobable pure states with overlap ``cos(delta)``.
    """
    return 1.0 - binary_entropy(sym_projection_error(delta))


def max_extractable_info_sum(delta: OverlapAngle | float) -> float:
    """Same quantity as :func:`max_extractable_info`, written as the explicit two-term sum.

    Kept as an independent route for cross-checking.
    """
    s = _as_delta(delta).sin_delta
    total = 1.0
    for p in ((1.0 - s) / 2.0, (1.0 + s) / 2.0):
        if p > 0.0:
            total += p * math.log2(p)
    return total


class SourceKind(enum.Enum):
    POISSON = "poisson"
    THERMAL = "thermal"


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number statistics of one pulse: Poisson (coherent) or Bose-Einstein (thermal)."""

    kind: SourceKind
    mean: float

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        object.__setattr__(self, "mean", _check_mu(self.mean))

    def pmf(self, n):
        n = np.asarray(n)
        if np.any(n < 0):
            raise DomainError("photon number must be >= 0")
        mu = self.mean
        if self.kind is SourceKind.POISSON:
            out = stats.poisson.pmf(n, mu)
        else:
            # mu^n / (1+mu)^(n+1), written in log space for large n
            if mu == 0.0:
                out = np.where(n == 0, 1.0, 0.0)
            else:
                out = np.exp(n * math.log(mu) - (n + 1) * math.log1p(mu))
        return float(out) if out.ndim == 0 else out

    def sf(self, n: int) -> float:
        """P(N > n)."""
        mu = self.mean
        if self.kind is SourceKind.POISSON:
            return float(stats.poisson.sf(n, mu))
        # geometric tail in closed form
        return (mu / (1.0 + mu)) ** (n + 1)

    def n_max(self) -> int:
        """Smallest truncation point whose tail mass is below :data:`TAIL_MASS`."""
        n = 0
        while self.sf(n) >= TAIL_MASS:
            n += 1
        return n

    def truncated_pmf(self) -> np.ndarray:
        return self.pmf(np.arange(self.n_max() + 1))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind is SourceKind.POISSON:
            return rng.poisson(self.mean, size)
        if self.mean == 0.0:
            return np.zeros(size, dtype=np.int64)
        # numpy's geometric counts trials to first success, support starts at 1
        return rng.geometric(1.0 / (1.0 + self.mean), size) - 1

    def scaled(self, factor: float) -> PhotonDistribution:
        """Distribution after binomial thinning with survival ``factor``.

        Both families are closed under thinning with the mean scaled.
        """
        return PhotonDistribution(self.kind, self.mean * factor)


def photon_number_pmf(dist: PhotonDistribution, n: int) -> float:
    return dist.pmf(n)


class MultiphotonFraction(NamedTuple):
    p_multi: float
    #: NaN when the source never emits a photon (mean 0)
    p_multi_given_nonzero: float


def multiphoton_fraction(dist: PhotonDistribution) -> MultiphotonFraction:
    # P(N > 1) rather than 1 - P(0) - P(1): no cancellation for weak pulses
    p_multi = dist.sf(1)
    p_nonzero = dist.sf(0)
    if p_nonzero == 0.0:
        return MultiphotonFraction(0.0, math.nan)
    return MultiphotonFraction(p_multi, p_multi / p_nonzero)
