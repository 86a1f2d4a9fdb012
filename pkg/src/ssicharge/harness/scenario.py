"""Scenario files: TOML documents that script a world and assert on its trace.

Grammar::

    seed = 7                      # required, 0 <= seed < 2**64
    backend = "symbolic"          # or "concrete"
    profile = "test"              # key size profile
    script = ["onboard emsp1", "provision ev1", ...]
    assertions = ["agreement all", "outcome 5 Authorized", ...]

    [actors]                      # counts per role, all optional
    evs = 1
    emsps = 1
    cps = 1
    cpos = 1
    offline = ["ev1"]             # actors whose traffic is relayed by cp1

    [adversary]
    mode = "passive"              # passive | replay-all | dolevyao
    drop = 0.05                   # dolevyao per-packet rates
    replay = 0.1
    reorder = 0.1
    inject = 0.05
    modify = 0.05

Script steps::

    onboard EMSP | provision EV | contract EV EMSP | install EV EMSP
    charge EV CP | bill CP | revoke EV EMSP | advance SECONDS
    reveal ACTOR | impersonate-install EV EMSP

Assertions::

    agreement LABEL|all           injective agreement holds
    outcome STEP OUTCOME          1-based step index has this outcome
    commits LABEL N               exactly N Commit events for LABEL
    billing EMSP N                EMSP's billing store holds N entries
    secrecy EV                    no wallet secret appears in any payload
    ends-with LABEL               last Commit in the trace carries LABEL
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..actors.base import COMMIT, LABELS
from ..errors import ScriptError
from .adversary import DY_ACTIONS
from .properties import check_injective_agreement, count_commits, scan_secrets, wallet_secrets
from .world import StepResult, World

ASSERTIONS = ("agreement", "outcome", "commits", "billing", "secrecy", "ends-with")


@dataclass
class Scenario:
    seed: int
    script: list[str]
    backend: str = "symbolic"
    profile: str = "test"
    evs: int = 1
    emsps: int = 1
    cps: int = 1
    cpos: int = 1
    offline: tuple[str, ...] = ()
    adversary: str = "passive"
    rates: dict[str, float] = field(default_factory=dict)
    assertions: list[str] = field(default_factory=list)
    name: str = "scenario"


@dataclass(frozen=True)
class AssertionResult:
    text: str
    ok: bool
    detail: str = ""


@dataclass
class ScenarioResult:
    scenario: Scenario
    world: World
    steps: list[StepResult]
    assertions: list[AssertionResult]

    @property
    def ok(self) -> bool:
        return all(a.ok for a in self.assertions)

    @property
    def events(self):
        return self.world.events

    def trace(self) -> str:
        return self.world.export_trace()


def _expect(table: dict, key: str, kind: type, default: Any = None) -> Any:
    if key not in table:
        if default is None:
            raise ScriptError(f"missing required key {key!r}")
        return default
    value = table[key]
    ok = isinstance(value, kind) and not (kind is int and isinstance(value, bool))
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if not ok:
        raise ScriptError(f"{key!r} must be {kind.__name__}")
    return value


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScriptError(f"bad scenario file: {exc}") from None
    known = {"seed", "backend", "profile", "script", "assertions", "actors", "adversary"}
    extra = set(doc) - known
    if extra:
        raise ScriptError(f"unknown keys {sorted(extra)}")
    seed = _expect(doc, "seed", int)
    if not 0 <= seed < 2**64:
        raise ScriptError("seed must fit in 64 bits")
    script = _expect(doc, "script", list)
    assertions = _expect(doc, "assertions", list, [])
    if not all(isinstance(s, str) for s in script + assertions):
        raise ScriptError("script and assertions must be lists of strings")
    actors = _expect(doc, "actors", dict, {})
    adv = dict(_expect(doc, "adversary", dict, {}))
    mode = adv.pop("mode", "passive")
    rates = {}
    for k in list(adv):
        if k not in DY_ACTIONS:
            raise ScriptError(f"unknown adversary key {k!r}")
        rates[k] = float(_expect(adv, k, float))
    counts = {k: _expect(actors, k, int, 1) for k in ("evs", "emsps", "cps", "cpos")}
    extra = set(actors) - set(counts) - {"offline"}
    if extra:
        raise ScriptError(f"unknown actor keys {sorted(extra)}")
    return Scenario(
        seed=seed,
        script=list(script),
        backend=_expect(doc, "backend", str, "symbolic"),
        profile=_expect(doc, "profile", str, "test"),
        offline=tuple(_expect(actors, "offline", list, [])),
        adversary=mode,
        rates=rates,
        assertions=list(assertions),
        name=name,
        **counts,
    )


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    return parse_scenario(p.read_text(encoding="utf-8"), p.stem)


def _labels(arg: str) -> tuple[str, ...]:
    if arg == "all":
        return LABELS
    if arg not in LABELS:
        raise ScriptError(f"unknown label {arg!r}")
    return (arg,)


def _int(arg: str) -> int:
    try:
        return int(arg)
    except ValueError:
        raise ScriptError(f"expected an integer, got {arg!r}") from None


def _parse_assertion(text: str) -> tuple[str, list[str]]:
    parts = text.split()
    arity = {"agreement": 1, "outcome": 2, "commits": 2, "billing": 2, "secrecy": 1, "ends-with": 1}
    if not parts or parts[0] not in arity:
        raise ScriptError(f"unknown assertion {text!r}")
    if len(parts) - 1 != arity[parts[0]]:
        raise ScriptError(f"assertion {parts[0]} takes {arity[parts[0]]} argument(s)")
    return parts[0], parts[1:]


def evaluate(text: str, world: World, steps: list[StepResult]) -> AssertionResult:
    name, args = _parse_assertion(text)
    events = world.events
    if name == "agreement":
        for label in _labels(args[0]):
            v = check_injective_agreement(events, label)
            if not v.ok:
                return AssertionResult(text, False, v.counterexample.describe())
        return AssertionResult(text, True)
    if name == "outcome":
        i = _int(args[0])
        if not 1 <= i <= len(steps):
            raise ScriptError(f"no step {i}")
        got = steps[i - 1].outcome
        return AssertionResult(text, got == args[1], f"step {i} outcome {got}")
    if name == "commits":
        _labels(args[0])
        n = count_commits(events, args[0])
        return AssertionResult(text, n == _int(args[1]), f"{n} commits")
    if name == "billing":
        n = len(world.actor(args[0]).billing)
        return AssertionResult(text, n == _int(args[1]), f"{n} entries")
    if name == "secrecy":
        rep = scan_secrets(world.bus_payloads(), wallet_secrets(world.actor(args[0])))
        return AssertionResult(text, rep.ok, ", ".join(f"{n} in payload {i}" for n, i in rep.leaks))
    commits = [e for e in events if e.kind == COMMIT]
    last = commits[-1].label if commits else "none"
    return AssertionResult(text, last == args[0], f"last commit {last}")


def build_world(s: Scenario) -> World:
    return World(
        seed=s.seed,
        backend=s.backend,
        profile=s.profile,
        evs=s.evs,
        emsps=s.emsps,
        cps=s.cps,
        cpos=s.cpos,
        adversary=s.adversary,
        adversary_rates=s.rates,
        offline=s.offline,
    )


def run_scenario(s: Scenario) -> ScenarioResult:
    """Run a scenario to the end; actor errors land in the result, not as exceptions."""
    try:
        world = build_world(s)
    except (ValueError, TypeError) as exc:
        raise ScriptError(str(exc)) from None
    for line in s.script:
        world.parse_step(line)
    for text in s.assertions:
        _parse_assertion(text)
    steps = [world.run_step(line) for line in s.script]
    return ScenarioResult(s, world, steps, [evaluate(a, world, steps) for a in s.assertions])
