"""Monte Carlo session: source -> adversary -> fiber -> receiver -> sifting -> estimates.

Pulses are processed in fixed-size blocks. Block ``b`` draws all of its
randomness from ``SeedSequence(seed, spawn_key=(b,))``, and blocks are merged
by adding integer counters, so the report is identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .adversary import (
    NO_GUESS,
    EveLedger,
    StrategyConfig,
    apply_strategy,
    eve_decode_after_disclosure,
)
from .analytics import ProtocolKind
from .errors import ConfigError, SessionError, UndefinedEstimate
from .pulses import FiberModel, Receiver, Source, transmit
from .qmath import SourceKind

DEFAULT_BLOCK = 1 << 16


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: ProtocolKind
    mu: float
    n_pulses: int
    seed: int
    fiber: FiberModel = field(default_factory=FiberModel)
    strategy: StrategyConfig | None = None
    source_kind: SourceKind = SourceKind.POISSON
    reference_ratio: float = 100.0
    reference_free: bool = False
    dark_count: float = 0.0
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        object.__setattr__(self, "protocol", ProtocolKind(self.protocol))
        object.__setattr__(self, "source_kind", SourceKind(self.source_kind))
        if self.n_pulses < 0:
            raise ConfigError("n_pulses must be >= 0")
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if not (0.0 <= self.dark_count <= 1.0):
            raise ConfigError("dark_count must lie in [0, 1]")
        Source(self.protocol, self.mu, self.source_kind, self.reference_ratio, self.reference_free)

    @property
    def source(self) -> Source:
        return Source(self.protocol, self.mu, self.source_kind, self.reference_ratio, self.reference_free)

    @property
    def receiver(self) -> Receiver:
        return Receiver.for_source(self.source, self.dark_count)

    @property
    def n_blocks(self) -> int:
        return -(-self.n_pulses // self.block_size)


@dataclass
class SiftedKey:
    alice: np.ndarray
    bob: np.ndarray
    #: Eve's aligned guesses (NO_GUESS where she has none), if an adversary was present
    eve: np.ndarray | None = None
    #: Eve attacked the pulse behind this position
    attacked: np.ndarray | None = None

    def __len__(self):
        return len(self.alice)


def sift(alice_bits, alice_bases, bob_bases, results, protocol: ProtocolKind,
         ledger: EveLedger | None = None) -> tuple[SiftedKey, np.ndarray]:
    """Keep conclusive results, and for the two-basis protocols only matching bases.

    Returns the key and the indices of the kept pulses, in transmission order.
    """
    results = np.asarray(results)
    keep = results >= 0
    if ProtocolKind(protocol) is not ProtocolKind.TWO_STATE:
        keep &= np.asarray(alice_bases) == np.asarray(bob_bases)
    idx = np.flatnonzero(keep)
    key = SiftedKey(np.asarray(alice_bits)[idx].astype(np.int8), results[idx].astype(np.int8))
    if ledger is not None:
        key.eve = ledger.guess[idx]
        key.attacked = ledger.attacked[idx]
    return key, idx


@dataclass(frozen=True)
class QberEstimate:
    errors: int
    length: int

    @property
    def value(self) -> float:
        return self.errors / self.length

    @property
    def in_model_range(self) -> bool:
        return self.value <= 0.5

    def stderr(self, p: float | None = None) -> float:
        """Binomial standard error, at the predicted value ``p`` when given."""
        p = self.value if p is None else p
        return math.sqrt(p * (1.0 - p) / self.length)


def empirical_qber(key: SiftedKey) -> QberEstimate:
    if len(key) == 0:
        raise UndefinedEstimate("QBER of an empty key is undefined")
    return QberEstimate(int(np.count_nonzero(key.alice != key.bob)), len(key))


@dataclass(frozen=True)
class MutualInfo:
    bits: float
    #: delta-method standard error
    stderr: float
    n: int
    #: Miller-Madow bias scale (R-1)(C-1) / (2 n ln 2) of the plug-in estimate
    bias: float = 0.0
    #: a marginal is concentrated on one value; bits is 0 by convention
    degenerate: bool = False

    @property
    def sigma(self) -> float:
        """Uncertainty used for z-scores.

        The delta-method term vanishes for deterministic channels with a fair
        input, where the plug-in bias then dominates; both are combined.
        """
        return math.hypot(self.stderr, self.bias)


def empirical_mutual_info(table) -> MutualInfo:
    """Plug-in mutual information (bits) of a joint count table.

    The standard error is the first-order delta-method estimate
    sqrt((E[L^2] - I^2) / n), L being the pointwise log-ratio.
    """
    counts = np.asarray(table, dtype=float)
    n = counts.sum()
    if n <= 0:
        raise UndefinedEstimate("mutual information of an empty table is undefined")
    p = counts / n
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    if np.count_nonzero(px) < 2 or np.count_nonzero(py) < 2:
        return MutualInfo(0.0, 0.0, int(n), degenerate=True)
    nz = p > 0
    ratio = np.log2(p[nz] / (px @ py)[nz])
    info = float(np.sum(p[nz] * ratio))
    var = float(np.sum(p[nz] * ratio**2)) - info**2
    bias = (np.count_nonzero(px) - 1) * (np.count_nonzero(py) - 1) / (2.0 * n * math.log(2))
    return MutualInfo(max(info, 0.0), math.sqrt(max(var, 0.0) / n), int(n), bias)


def _eve_column(guess):
    """Eve's symbol as a table column: 0, 1, or 2 for 'no information'."""
    return np.where(guess == NO_GUESS, 2, guess).astype(np.int64)


def _table(rows, cols, shape):
    out = np.zeros(shape, dtype=np.int64)
    np.add.at(out, (rows, cols), 1)
    return out


@dataclass
class Counters:
    """Additive sufficient statistics of a session."""

    pulses: int = 0
    sifted: int = 0
    errors: int = 0
    inconclusive: int = 0
    double_clicks: int = 0
    attacked_sifted: int = 0
    eve_certain: int = 0
    #: Alice bit x Eve symbol (0, 1, none) over sifted positions
    ae: np.ndarray = field(default_factory=lambda: np.zeros((2, 3), dtype=np.int64))
    #: Eve symbol x Bob bit over sifted positions
    eb: np.ndarray = field(default_factory=lambda: np.zeros((3, 2), dtype=np.int64))

    def __add__(self, other: Counters) -> Counters:
        return Counters(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


@dataclass
class BlockResult:
    counters: Counters
    ledger: EveLedger | None = None


def run_block(config: ProtocolConfig, block: int, keep_ledger: bool = False) -> BlockResult:
    start = block * config.block_size
    n = min(config.block_size, config.n_pulses - start)
    rng = block_rng(config.seed, block)
    source = config.source
    two_state = config.protocol is ProtocolKind.TWO_STATE

    bits = rng.integers(0, 2, n)
    alice_bases = np.zeros(n, dtype=np.int64) if two_state else rng.integers(0, 2, n)
    bob_bases = np.zeros(n, dtype=np.int64) if two_state else rng.integers(0, 2, n)

    try:
        batch = source.emit(bits, alice_bases, rng)
        ledger = None
        if config.strategy is not None:
            batch, ledger = apply_strategy(config.strategy, batch, source, config.fiber, rng)
        batch = transmit(batch, config.fiber, rng)
        det = config.receiver.detect(batch, bob_bases, rng)
    except (ConfigError, ValueError) as exc:
        raise SessionError(start, exc) from exc

    key, idx = sift(bits, alice_bases, bob_bases, det.result, config.protocol)
    c = Counters(
        pulses=n,
        sifted=len(key),
        errors=int(np.count_nonzero(key.alice != key.bob)),
        inconclusive=int(np.count_nonzero(~det.conclusive)),
        double_clicks=int(np.count_nonzero(det.double_click)),
    )
    if ledger is not None:
        decoded = eve_decode_after_disclosure(ledger.subset(idx), alice_bases[idx], rng)
        eve = _eve_column(decoded.guess)
        c.attacked_sifted = int(np.count_nonzero(decoded.attacked))
        c.eve_certain = int(np.count_nonzero(decoded.certain))
        c.ae = _table(key.alice, eve, (2, 3))
        c.eb = _table(eve, key.bob, (3, 2))
        if keep_ledger:
            ledger.guess[idx] = decoded.guess
            ledger.certain[idx] = decoded.certain
            ledger = ledger.offset(start)
    else:
        c.ae = _table(key.alice, np.full(len(key), 2), (2, 3))
        c.eb = _table(np.full(len(key), 2), key.bob, (3, 2))
    return BlockResult(c, ledger if keep_ledger else None)


def _tuple(table: np.ndarray) -> tuple:
    return tuple(tuple(int(v) for v in row) for row in table)


def _mi(table) -> MutualInfo | None:
    try:
        return empirical_mutual_info(table)
    except UndefinedEstimate:
        return None


@dataclass(frozen=True)
class SessionReport:
    pulses_sent: int
    sifted_length: int
    error_count: int
    empirical_qber: float
    empirical_i_ae: float
    empirical_i_eb: float
    #: Eve-Bob information restricted to sifted positions where Eve holds a guess
    empirical_i_eb_attacked: float
    #: combined delta-method and plug-in bias uncertainty, see MutualInfo.sigma
    i_ae_stderr: float
    i_eb_stderr: float
    i_eb_attacked_stderr: float
    inconclusive_count: int
    double_click_count: int
    attacked_sifted: int
    eve_known_count: int
    seed: int
    ae_table: tuple = ()
    eb_table: tuple = ()

    @property
    def sifted_fraction(self) -> float:
        return self.sifted_length / self.pulses_sent if self.pulses_sent else math.nan

    @property
    def eve_known_fraction(self) -> float:
        return self.eve_known_count / self.sifted_length if self.sifted_length else math.nan

    @property
    def qber(self) -> QberEstimate:
        return QberEstimate(self.error_count, self.sifted_length)

    @classmethod
    def from_counters(cls, c: Counters, seed: int) -> SessionReport:
        ae, eb = _mi(c.ae), _mi(c.eb)
        eba = _mi(c.eb[:2, :])
        nan = math.nan
        return cls(
            pulses_sent=c.pulses,
            sifted_length=c.sifted,
            error_count=c.errors,
            empirical_qber=c.errors / c.sifted if c.sifted else nan,
            empirical_i_ae=ae.bits if ae else nan,
            empirical_i_eb=eb.bits if eb else nan,
            empirical_i_eb_attacked=eba.bits if eba else nan,
            i_ae_stderr=ae.sigma if ae else nan,
            i_eb_stderr=eb.sigma if eb else nan,
            i_eb_attacked_stderr=eba.sigma if eba else nan,
            inconclusive_count=c.inconclusive,
            double_click_count=c.double_clicks,
            attacked_sifted=c.attacked_sifted,
            eve_known_count=c.eve_certain,
            seed=seed,
            ae_table=_tuple(c.ae),
            eb_table=_tuple(c.eb),
        )

    def as_dict(self) -> dict:
        return asdict(self)


def _run_block_star(args):
    return run_block(*args)


def run_session(config: ProtocolConfig, workers: int = 1,
                keep_ledger: bool = False) -> tuple[SessionReport, EveLedger | None]:
    """Run the whole session; the report does not depend on ``workers``."""
    jobs = [(config, b, keep_ledger) for b in range(config.n_blocks)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block_star, jobs))
    else:
        results = [_run_block_star(j) for j in jobs]
    total = Counters()
    for r in results:
        total = total + r.counters
    ledger = None
    if keep_ledger and config.strategy is not None and results:
        ledger = EveLedger.concat([r.ledger for r in results])
    return SessionReport.from_counters(total, config.seed), ledger
