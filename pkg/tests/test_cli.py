from __future__ import annotations

import argparse
from pathlib import Path

import pytest

from ssicharge.cli import DEFAULTS, EXIT_FAILED, EXIT_OK, EXIT_USAGE, build_parser, main, settings
from ssicharge.codec import decode, tag_name
from ssicharge.crypto.primitives import open_keystore
from ssicharge.crypto.types import RevocationRegistryState
from ssicharge.harness.world import World
from ssicharge.ledger import Ledger, load_genesis

SCENARIOS = sorted((Path(__file__).parent.parent / "scenarios").glob("*.toml"))


def test_demo_succeeds(capsys, tmp_path):
    trace = tmp_path / "trace.hex"
    assert main(["demo", "--seed", "3", "--trace-out", str(trace)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count(" ok ") == 12
    assert trace.read_text().count("\n") > 20


def test_demo_symbolic_csv(capsys):
    assert main(["demo", "--backend", "symbolic", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "step,status,action,detail" and len(lines) == 13


def test_demo_revoked_fails(capsys):
    assert main(["demo", "--backend", "symbolic", "--revoke-before-charge"]) == EXIT_FAILED
    assert "RevokedCredential" in capsys.readouterr().err


def test_ledger_dump_after_demo(capsys, tmp_path):
    ledger_file = tmp_path / "ledger.hex"
    assert main(["demo", "--backend", "symbolic", "--ledger-out", str(ledger_file)]) == EXIT_OK
    capsys.readouterr()
    assert main(["ledger", "dump", str(ledger_file), "-v"]) == EXIT_OK
    captured = capsys.readouterr()
    objs = [decode(bytes.fromhex(line)) for line in captured.out.splitlines()]
    kinds = [tag_name(o.tag) for o in objs]
    # steward, emsp verinym and the EV provisioning DID
    assert kinds.count("DidRecord") == 3
    assert kinds.count("CredentialSchema") == kinds.count("CredentialDefinition") == 1
    assert kinds.count("RevocationRegistryState") == 1
    registry = RevocationRegistryState.from_bytes(bytes.fromhex(captured.out.splitlines()[kinds.index("RevocationRegistryState")]))
    assert registry.version == 1
    assert "registry" in captured.err and "version 1" in captured.err


def test_ledger_dump_matches_replayed_state(capsys, tmp_path):
    ledger_file = tmp_path / "ledger.hex"
    main(["demo", "--backend", "symbolic", "--seed", "2", "--ledger-out", str(ledger_file)])
    capsys.readouterr()
    main(["ledger", "dump", str(ledger_file)])
    from_file = capsys.readouterr().out
    main(["ledger", "dump", "--backend", "symbolic", "--seed", "2"])
    assert capsys.readouterr().out == from_file


def test_ledger_dump_runs_demo_by_default(capsys):
    assert main(["ledger", "dump", "--backend", "symbolic"]) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == 6


def test_ledger_dump_rejects_garbage(tmp_path, capsys):
    bad = tmp_path / "bad.hex"
    bad.write_text("not hex\n")
    assert main(["ledger", "dump", str(bad)]) == EXIT_USAGE
    assert main(["ledger", "dump", str(tmp_path / "missing")]) == EXIT_USAGE


def test_keygen_is_deterministic(tmp_path, capsys):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["keygen", "ev", "--seed", "5", "--passphrase", "pw", "--out", str(a)]) == EXIT_OK
    assert main(["keygen", "ev", "--seed", "5", "--passphrase", "pw", "--out", str(b)]) == EXIT_OK
    assert main(["keygen", "ev", "--seed", "6", "--passphrase", "pw", "--out", str(c)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    role, _ = open_keystore(a.read_bytes(), "pw")
    assert role == "ev"


def test_keygen_steward_genesis(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SSICHARGE_PASSPHRASE", "secret")
    genesis = tmp_path / "genesis.hex"
    assert main(["keygen", "steward", "--out", str(tmp_path / "s"), "--genesis-out", str(genesis)]) == EXIT_OK
    records = load_genesis(genesis.read_text())
    assert len(records) == 1 and Ledger(records).version == 1
    assert records[0].did in capsys.readouterr().out


def test_keygen_usage_errors(tmp_path, monkeypatch):
    monkeypatch.delenv("SSICHARGE_PASSPHRASE", raising=False)
    assert main(["keygen", "ev", "--out", str(tmp_path / "k")]) == EXIT_USAGE
    out = tmp_path / "ev.keystore"
    assert main(["keygen", "ev", "--passphrase", "x", "--out", str(out), "--genesis-out", str(tmp_path / "g")]) == EXIT_USAGE
    assert not out.exists()


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_shipped_scenarios_pass(path, capsys):
    assert main(["scenario", str(path)]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_scenario_failure_and_csv(tmp_path, capsys):
    f = tmp_path / "s.toml"
    f.write_text('seed = 1\nscript = ["onboard emsp1"]\nassertions = ["billing emsp1 1"]\n')
    assert main(["scenario", str(f), "--format", "csv"]) == EXIT_FAILED
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "kind,#,item,status,outcome,detail"
    assert out[-1].startswith("assertion,1,billing emsp1 1,FAIL")


def test_scenario_trace_matches_world(tmp_path, capsys):
    f = tmp_path / "s.toml"
    f.write_text('seed = 12\nscript = ["onboard emsp1", "provision ev1"]\n')
    out = tmp_path / "t.hex"
    assert main(["scenario", str(f), "--trace-out", str(out)]) == EXIT_OK
    w = World(seed=12)
    w.run_step("onboard emsp1")
    w.run_step("provision ev1")
    assert out.read_text() == w.export_trace()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["fly"],
        ["demo", "--backend", "quantum"],
        ["demo", "--seed", "x"],
        ["demo", "--profile", "999"],
        ["demo", "--seed", "-1"],
        ["scenario"],
        ["scenario", "/nonexistent.toml"],
        ["bench", "--flows", "teleport", "-n", "1", "--bench-profile", "test"],
        ["bench", "-n", "0", "--bench-profile", "test"],
        ["ledger"],
        ["keygen", "admin"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == EXIT_USAGE


def test_bad_scenario_file_is_usage_error(tmp_path, capsys):
    f = tmp_path / "s.toml"
    f.write_text('seed = 1\nscript = ["charge ev1 emsp1"]\n')
    assert main(["scenario", str(f)]) == EXIT_USAGE
    assert "not a ChargePoint" in capsys.readouterr().err


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text('backend = "symbolic"\nseed = 9\nformat = "csv"\n')
    parser = build_parser()
    merged = settings(parser.parse_args(["demo", "--config", str(cfg), "--seed", "4"]))
    assert (merged["backend"], merged["seed"], merged["format"]) == ("symbolic", 4, "csv")
    monkeypatch.setenv("SSICHARGE_CONFIG", str(cfg))
    merged = settings(parser.parse_args(["demo"]))
    assert merged["seed"] == 9
    merged = settings(parser.parse_args(["demo", "--backend", "concrete"]))
    assert merged["backend"] == "concrete"


def _options(parser: argparse.ArgumentParser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                yield from _options(sub)
        elif action.option_strings:
            yield action.dest


def test_every_flag_has_a_config_key():
    exempt = {"help", "version", "config"}
    assert set(_options(build_parser())) - exempt <= set(DEFAULTS)


def test_output_paths_from_config(tmp_path, capsys):
    trace = tmp_path / "trace.hex"
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'backend = "symbolic"\ntrace_out = "{trace}"\n')
    assert main(["demo", "--config", str(cfg)]) == EXIT_OK
    assert trace.exists()


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "c.toml"
    bad.write_text("colour = 1\n")
    assert main(["demo", "--config", str(bad)]) == EXIT_USAGE
    bad.write_text("seed = [")
    assert main(["demo", "--config", str(bad)]) == EXIT_USAGE
    assert main(["demo", "--config", str(tmp_path / "none.toml")]) == EXIT_USAGE


def test_bench_cli_small(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code = main(["bench", "-n", "1", "--bench-profile", "test", "--flows", "charge", "--format", "csv", "--output", str(out)])
    assert code == EXIT_OK
    text = out.read_text()
    assert "ValidateContractProofReq" in text and "GetCredOfferReq" not in text
