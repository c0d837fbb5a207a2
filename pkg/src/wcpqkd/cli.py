"""Command-line driver: ``wcpqkd {analytic,fig3,simulate,attack}``.

Settings come from an optional ``key = value`` file (``--config``); flags given
on the command line override it. Exit status: 0 success, 1 usage error,
2 a simulated quantity disagrees with its closed form by more than 3 sigma,
3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analytics as an
from . import reports
from .adversary import StrategyConfig, StrategyKind
from .analytics import ProtocolKind
from .errors import ConfigError, DomainError, SessionError, StrategyRejected
from .pulses import FiberModel
from .qmath import SourceKind
from .session import ProtocolConfig, run_session

log = logging.getLogger("wcpqkd")

EXIT_OK, EXIT_USAGE, EXIT_STATS, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULTS = {
    "protocol": None,
    "mu": 0.1,
    "eta": 1.0,
    "loss_db": None,
    "length_km": None,
    "atten_db_per_km": 0.2,
    "n_pulses": 1_000_000,
    "seed": None,
    "strategy": None,
    "grid": None,
    "out": None,
    "source": "poisson",
    "split": None,
    "dark_count": 0.0,
    "reference_ratio": 100.0,
    "reference_free": False,
    "workers": 1,
    "block_size": 1 << 16,
    "figure": None,
    "ledger": None,
}

PROTOCOL_ALIASES = {
    "4state": ProtocolKind.FOUR_STATE, "4": ProtocolKind.FOUR_STATE, "bb84": ProtocolKind.FOUR_STATE,
    "2state": ProtocolKind.TWO_STATE, "2": ProtocolKind.TWO_STATE, "b92": ProtocolKind.TWO_STATE,
    "4+2": ProtocolKind.FOUR_PLUS_TWO, "42": ProtocolKind.FOUR_PLUS_TWO,
}

ATTACK_STRATEGIES = {StrategyKind.BEAM_SPLIT, StrategyKind.PHOTON_NUMBER_SPLIT,
                     StrategyKind.BLOCK_ON_INCONCLUSIVE}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> np.ndarray:
    """``a,b,c`` | ``lin:lo:hi:n`` | ``log:lo:hi:n``."""
    try:
        if text.startswith(("lin:", "log:")):
            kind, lo, hi, n = text.split(":")
            lo, hi, n = float(lo), float(hi), int(n)
            if n < 1:
                raise ValueError
            return np.linspace(lo, hi, n) if kind == "lin" else np.geomspace(lo, hi, n)
        values = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"bad grid {text!r}; use a,b,c or lin:lo:hi:n or log:lo:hi:n") from None
    if len(values) == 0 or not np.all(np.isfinite(values)):
        raise UsageError(f"bad grid {text!r}")
    return values


def read_config(path: str) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value):
    if value is None:
        return None
    default = DEFAULTS[key]
    if isinstance(default, bool):
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
    if key in ("n_pulses", "seed", "workers", "block_size"):
        return int(value)
    if isinstance(default, float) or key in ("loss_db", "length_km", "split"):
        return float(value)
    return value


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command-line flags."""
    settings = dict(DEFAULTS)
    if args.config:
        settings.update(read_config(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            settings[key] = v
    try:
        return {k: _coerce(k, v) for k, v in settings.items()}
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _protocol(name) -> ProtocolKind:
    try:
        return PROTOCOL_ALIASES[str(name).lower()]
    except KeyError:
        raise UsageError(f"unknown protocol {name!r}; choose 4state, 2state or 4+2") from None


def _fiber(s: dict) -> FiberModel:
    if s["loss_db"] is not None and s["length_km"] is not None:
        raise UsageError("give either --loss-db or --length-km, not both")
    try:
        if s["loss_db"] is not None:
            return FiberModel.from_loss_db(s["loss_db"])
        return FiberModel(s["length_km"] or 0.0, s["atten_db_per_km"])
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _strategy(s: dict) -> StrategyConfig | None:
    name = s["strategy"]
    if name in (None, "", "none"):
        return None
    try:
        return StrategyConfig(StrategyKind(name), s["eta"], s["split"])
    except ValueError as exc:
        choices = ", ".join(k.value for k in StrategyKind)
        raise UsageError(f"bad strategy {name!r} ({exc}); choose one of {choices}") from None


def _session_config(s: dict, default_protocol: ProtocolKind) -> ProtocolConfig:
    if s["seed"] is None:
        raise UsageError("--seed is required")
    if s["n_pulses"] < 1:
        raise UsageError("--n-pulses must be >= 1")
    protocol = _protocol(s["protocol"]) if s["protocol"] else default_protocol
    try:
        return ProtocolConfig(
            protocol=protocol,
            mu=s["mu"],
            n_pulses=s["n_pulses"],
            seed=s["seed"],
            fiber=_fiber(s),
            strategy=_strategy(s),
            source_kind=SourceKind(s["source"]),
            reference_ratio=s["reference_ratio"],
            reference_free=s["reference_free"],
            dark_count=s["dark_count"],
            block_size=s["block_size"],
        )
    except (ConfigError, DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, s: dict):
    if s["out"]:
        Path(s["out"]).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_analytic(s: dict) -> int:
    mus = parse_grid(s["grid"]) if s["grid"] else np.array([s["mu"]])
    if np.any(mus < 0):
        raise UsageError("mu grid must be >= 0")
    protocols = [_protocol(s["protocol"])] if s["protocol"] else list(ProtocolKind)
    rows = reports.analytic_rows(mus, protocols)
    _emit(reports.render_csv(reports.ANALYTIC_COLUMNS, rows), s)
    if s["figure"]:
        from .plotting import plot_analytic
        plot_analytic(rows, s["figure"])
    return EXIT_OK


def cmd_fig3(s: dict) -> int:
    t_grid = parse_grid(s["grid"]) if s["grid"] else an.default_t_grid()
    rows = reports.fig3_rows(t_grid)
    _emit(reports.render_csv(reports.FIG3_COLUMNS, rows), s)
    if s["figure"]:
        from .plotting import plot_fig3
        plot_fig3(rows, s["figure"])
    return EXIT_OK


def cmd_simulate(s: dict) -> int:
    config = _session_config(s, ProtocolKind.TWO_STATE)
    report, ledger = run_session(config, workers=s["workers"], keep_ledger=bool(s["ledger"]))
    row = reports.simulate_row(config, report)
    _emit(reports.render_csv(reports.SIMULATE_COLUMNS, [row]), s)
    if s["ledger"] and ledger is not None:
        Path(s["ledger"]).write_text(reports.render_csv(reports.LEDGER_COLUMNS, reports.ledger_rows(ledger)))
    if row["status"] != "ok":
        log.error("statistical disagreement: %s", row["status"])
        return EXIT_STATS
    return EXIT_OK


def cmd_attack(s: dict) -> int:
    if s["strategy"] is None:
        raise UsageError("--strategy is required (beam-split, pns or block)")
    default = ProtocolKind.FOUR_STATE if s["strategy"] == "pns" else ProtocolKind.TWO_STATE
    config = _session_config(s, default)
    if config.strategy.kind not in ATTACK_STRATEGIES:
        raise UsageError("attack scenarios cover beam-split, pns and block")
    if config.strategy.kind is StrategyKind.PHOTON_NUMBER_SPLIT and config.protocol is not ProtocolKind.FOUR_STATE:
        raise UsageError("photon-number splitting needs the polarization (4state) protocol")
    if config.strategy.kind is StrategyKind.BLOCK_ON_INCONCLUSIVE and config.protocol is ProtocolKind.FOUR_STATE:
        raise UsageError("blocking needs a phase-encoded protocol (2state or 4+2)")
    report, _ = run_session(config, workers=s["workers"])
    _emit(reports.render_csv(reports.ATTACK_COLUMNS, [reports.attack_row(config, report)]), s)
    return EXIT_OK


COMMANDS = {"analytic": cmd_analytic, "fig3": cmd_fig3, "simulate": cmd_simulate, "attack": cmd_attack}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="key = value settings file; flags override it")
    g.add_argument("--protocol", help="4state | 2state | 4+2")
    g.add_argument("--mu", type=float, help="mean photon number per pulse")
    g.add_argument("--eta", type=float, help="fraction of pulses Eve attacks")
    g.add_argument("--loss-db", type=float, dest="loss_db", help="total line loss in dB")
    g.add_argument("--length-km", type=float, dest="length_km", help="fiber length")
    g.add_argument("--atten-db-per-km", type=float, dest="atten_db_per_km")
    g.add_argument("--n-pulses", type=int, dest="n_pulses")
    g.add_argument("--seed", type=int)
    g.add_argument("--strategy", help=" | ".join(k.value for k in StrategyKind))
    g.add_argument("--split", type=float, help="beam-split fraction (default: the line loss)")
    g.add_argument("--source", choices=[k.value for k in SourceKind])
    g.add_argument("--dark-count", type=float, dest="dark_count")
    g.add_argument("--reference-ratio", type=float, dest="reference_ratio")
    g.add_argument("--reference-free", action="store_true", default=None, dest="reference_free")
    g.add_argument("--grid", help="a,b,c | lin:lo:hi:n | log:lo:hi:n")
    g.add_argument("--workers", type=int)
    g.add_argument("--block-size", type=int, dest="block_size")
    g.add_argument("--out", help="CSV output path (default stdout)")
    g.add_argument("--figure", help="also render a figure to this path")
    g.add_argument("--ledger", help="write Eve's per-pulse records (simulate)")

    parser = _Parser(prog="wcpqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analytic", parents=[common], help="closed-form rates, QBER and information")
    sub.add_parser("fig3", parents=[common], help="information normalized to the 4-state system")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo session with z-scores")
    sub.add_parser("attack", parents=[common], help="lossy-line attack scenarios")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="%(levelname)s: %(message)s", level=logging.INFO)
    args = build_parser().parse_args(argv)
    try:
        settings = resolve(args)
        return COMMANDS[args.command](settings)
    except (UsageError, StrategyRejected, OSError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except SessionError as exc:
        if isinstance(exc.cause, ConfigError):
            log.error("%s", exc.cause)
            return EXIT_USAGE
        log.error("session failed at pulse %s: %s", exc.pulse_index, exc.cause)
        return EXIT_INTERNAL
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
