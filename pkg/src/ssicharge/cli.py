"""Command-line entry point.

Exit codes: 0 success, 1 a flow or scenario assertion failed, 2 usage or
input error. Settings come from built-in defaults, then a TOML config file
(``--config`` or ``$SSICHARGE_CONFIG``), then flags, later sources winning.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .codec import CodecError, decode
from .crypto.backend import make_backend
from .crypto.primitives import open_keystore, seal_keystore
from .crypto.rng import Rng
from .errors import ScriptError, SsiChargeError
from .harness.bench import FLOWS, bench
from .harness.demo import run_demo
from .harness.scenario import load_scenario, run_scenario
from .ledger import STEWARD, DidRecord, Ledger, LogEntry, dump_genesis

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
CONFIG_ENV = "SSICHARGE_CONFIG"
PASSPHRASE_ENV = "SSICHARGE_PASSPHRASE"
KEY_ROLES = ("steward", "emsp", "ev", "oem")
PROFILES = ("test", "512", "1024", "2048")

DEFAULTS: dict[str, Any] = {
    "backend": "concrete",
    "profile": "test",
    "seed": 0,
    "format": "table",
    "verbose": 0,
    "revoke_before_charge": False,
    "repetitions": 100,
    "bench_profile": "2048",
    "flows": list(FLOWS),
    "scenario": None,
    "trace_out": None,
    "ledger_out": None,
    "output": None,
    "out": None,
    "passphrase": None,
    "genesis_out": None,
}

log = logging.getLogger("ssicharge")


class UsageError(Exception):
    pass


def load_config(path: str | None) -> dict[str, Any]:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"bad config {path}: {exc}") from None
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}")
    return cfg


def settings(args: argparse.Namespace) -> dict[str, Any]:
    merged = {**DEFAULTS, **load_config(args.config)}
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if merged["backend"] not in ("concrete", "symbolic"):
        raise UsageError(f"unknown backend {merged['backend']!r}")
    if merged["format"] not in ("table", "csv"):
        raise UsageError(f"unknown format {merged['format']!r}")
    if merged["profile"] not in PROFILES or merged["bench_profile"] not in PROFILES:
        raise UsageError(f"key profile must be one of {', '.join(PROFILES)}")
    if not isinstance(merged["seed"], int) or not 0 <= merged["seed"] < 2**64:
        raise UsageError("seed must be an integer in [0, 2**64)")
    if isinstance(merged["flows"], str):
        merged["flows"] = merged["flows"].split(",")
    return merged


def _rows_out(rows: Sequence[Sequence[Any]], fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "csv":
        csv.writer(out, lineterminator="\n").writerows(rows)
        return
    text = [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in text) for i in range(len(text[0]))]
    for r in text:
        out.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")


# -- ledger export ------------------------------------------------------------


def export_ledger(ledger: Ledger) -> str:
    """Genesis records followed by the write log, codec-hex one per line."""
    return dump_genesis(ledger.genesis) + "".join(e.to_bytes().hex() + "\n" for e in ledger.log)


def import_ledger(text: str) -> Ledger:
    genesis, entries = [], []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            raw = bytes.fromhex(line)
            tag = decode(raw).tag
        except (ValueError, CodecError, AttributeError):
            raise UsageError(f"ledger file line {n} is not a codec record") from None
        if tag == DidRecord.TAG:
            genesis.append(DidRecord.from_bytes(raw))
        elif tag == LogEntry.TAG:
            entries.append(LogEntry.from_bytes(raw))
        else:
            raise UsageError(f"ledger file line {n}: unexpected record tag {tag:#06x}")
    return Ledger.replay(genesis, entries)


def ledger_rows(ledger: Ledger) -> list[tuple]:
    st = ledger.state
    rows: list[tuple] = [("kind", "id", "detail")]
    rows += [("did", d.did, f"{d.role} {d.alias}") for d in st.dids.values()]
    rows += [("schema", s.id, f"{s.name} {s.version} {','.join(s.attr_names)}") for s in st.schemas.values()]
    rows += [("cred_def", c.id, f"issuer {c.issuer_did} emsp {c.emsp_id}") for c in st.cred_defs.values()]
    rows += [("registry", r.registry_id, f"version {r.version}, {len(r.deltas)} deltas") for r in st.registries.values()]
    return rows


# -- commands -------------------------------------------------------------------


def cmd_demo(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    res = run_demo(cfg["backend"], cfg["profile"], cfg["seed"], cfg["revoke_before_charge"])
    rows = [("step", "status", "action", "detail")]
    rows += [(s.number, "ok" if s.ok else "FAIL", s.title, s.detail) for s in res.steps]
    _rows_out(rows, cfg["format"])
    for r in res.runs:
        log.info("%s -> %s %s", r.step, r.outcome, r.detail)
    _write(cfg["trace_out"], res.world.export_trace())
    _write(cfg["ledger_out"], export_ledger(res.world.ledger))
    if not res.ok:
        print(f"error: {res.failure or 'billing commit not reached'}", file=sys.stderr)
        return EXIT_FAILED
    log.info("completed in %.3fs", res.seconds)
    return EXIT_OK


def cmd_scenario(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    path = args.path or cfg["scenario"]
    if not path:
        raise UsageError("no scenario path given")
    try:
        scenario = load_scenario(path)
    except OSError as exc:
        raise UsageError(f"cannot read scenario {path}: {exc.strerror}") from None
    result = run_scenario(scenario)
    steps = [(i, r.step, "ok" if r.ok else "-", r.outcome, r.detail) for i, r in enumerate(result.steps, 1)]
    checks = [(i, a.text, "PASS" if a.ok else "FAIL", a.detail) for i, a in enumerate(result.assertions, 1)]
    if cfg["format"] == "csv":
        rows = [("kind", "#", "item", "status", "outcome", "detail")]
        rows += [("step", *r) for r in steps]
        rows += [("assertion", i, text, status, "", detail) for i, text, status, detail in checks]
        _rows_out(rows, "csv")
    else:
        _rows_out([("#", "step", "ok", "outcome", "detail"), *steps], "table")
        sys.stdout.write("\n")
        _rows_out([("#", "assertion", "result", "detail"), *checks], "table")
    _write(cfg["trace_out"], result.trace())
    return EXIT_OK if result.ok else EXIT_FAILED


def cmd_bench(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    flows = tuple(cfg["flows"])
    if set(flows) - set(FLOWS) or not flows:
        raise UsageError(f"flows must be a subset of {','.join(FLOWS)}")
    if cfg["repetitions"] < 1:
        raise UsageError("repetitions must be positive")
    log.info("bench: %s, N=%d, profile %s", ",".join(flows), cfg["repetitions"], cfg["bench_profile"])
    report = bench(flows, cfg["repetitions"], cfg["bench_profile"], cfg["seed"])
    text = report.csv() if cfg["format"] == "csv" else report.table()
    sys.stdout.write(text)
    _write(cfg["output"], text)
    return EXIT_OK


def cmd_ledger_dump(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    if args.source:
        try:
            text = Path(args.source).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read {args.source}: {exc.strerror}") from None
        ledger = import_ledger(text)
    else:
        ledger = run_demo(cfg["backend"], cfg["profile"], cfg["seed"]).world.ledger
    for line in ledger.dump_lines():
        print(line)
    # human-readable summary on stderr with -v
    if log.isEnabledFor(logging.INFO):
        buf = io.StringIO()
        _rows_out(ledger_rows(ledger), cfg["format"], buf)
        log.info("ledger at version %d\n%s", ledger.version, buf.getvalue().rstrip())
    return EXIT_OK


def cmd_keygen(args: argparse.Namespace, cfg: dict[str, Any]) -> int:
    passphrase = cfg["passphrase"] or os.environ.get(PASSPHRASE_ENV)
    if not passphrase:
        raise UsageError(f"a passphrase is required (--passphrase or ${PASSPHRASE_ENV})")
    if cfg["genesis_out"] and args.role != "steward":
        raise UsageError("--genesis-out only applies to the steward role")
    rng = Rng(cfg["seed"]).child(f"keygen:{args.role}")
    keys = make_backend(cfg["backend"], rng.child("keys")).gen_did_keys()
    blob = seal_keystore(args.role, keys, passphrase, rng.child("keystore"))
    out = Path(cfg["out"] or f"{args.role}.keystore")
    out.write_bytes(blob)
    # read back so a bad write never goes unnoticed
    role, _ = open_keystore(out.read_bytes(), passphrase)
    if role != args.role:
        raise RuntimeError(f"keystore at {out} reads back as role {role!r}")
    print(f"{args.role} {keys.did} -> {out}")
    if cfg["genesis_out"]:
        record = DidRecord(keys.did, keys.sig_pk, keys.enc_pk, STEWARD, "steward", "steward")
        Path(cfg["genesis_out"]).write_text(dump_genesis([record]), encoding="utf-8")
        print(f"genesis -> {cfg['genesis_out']}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"TOML config file (default ${CONFIG_ENV})")
    common.add_argument("--backend", choices=("concrete", "symbolic"), default=None)
    common.add_argument("--profile", default=None, help="key size profile for flows: test, 1024 or 2048")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", choices=("table", "csv"), default=None)
    common.add_argument("-v", "--verbose", action="count", default=None)

    p = _Parser(prog="ssicharge", description="SSI-based EV charging authorization engine")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("demo", parents=[common], help="run the end-to-end flow")
    d.add_argument("--revoke-before-charge", action="store_true", default=None)
    d.add_argument("--trace-out", help="write the trace export here")
    d.add_argument("--ledger-out", help="write genesis and ledger log here")
    d.set_defaults(func=cmd_demo)

    s = sub.add_parser("scenario", parents=[common], help="run a scenario file")
    s.add_argument("path", nargs="?")
    s.add_argument("--trace-out", help="write the trace export here")
    s.set_defaults(func=cmd_scenario)

    b = sub.add_parser("bench", parents=[common], help="measure message sizes and handler times")
    b.add_argument("-n", "--repetitions", type=int, default=None)
    b.add_argument("--bench-profile", default=None, help="key size profile (default 2048)")
    b.add_argument("--flows", default=None, help="comma-separated subset of install,charge")
    b.add_argument("--output", help="also write the report here")
    b.set_defaults(func=cmd_bench)

    lg = sub.add_parser("ledger", help="inspect ledger state")
    lsub = lg.add_subparsers(dest="ledger_command", required=True, parser_class=_Parser)
    ld = lsub.add_parser("dump", parents=[common], help="print every stored object as codec hex, one per line")
    ld.add_argument("source", nargs="?", help="ledger file from demo --ledger-out; default runs the demo")
    ld.set_defaults(func=cmd_ledger_dump)

    k = sub.add_parser("keygen", parents=[common], help="generate a DID keystore")
    k.add_argument("role", choices=KEY_ROLES)
    k.add_argument("--out", help="keystore path (default <role>.keystore)")
    k.add_argument("--passphrase", help=f"keystore passphrase (default ${PASSPHRASE_ENV})")
    k.add_argument("--genesis-out", help="steward only: write a genesis file")
    k.set_defaults(func=cmd_keygen)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = settings(args)
        level = {0: logging.WARNING, 1: logging.INFO}.get(cfg["verbose"], logging.DEBUG)
        logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
        return args.func(args, cfg)
    except (UsageError, ScriptError) as exc:
        print(f"ssicharge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SsiChargeError, RuntimeError) as exc:
        print(f"ssicharge: failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
