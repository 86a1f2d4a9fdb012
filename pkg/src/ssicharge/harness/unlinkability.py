"""Field-level unlinkability experiment.

Two EVs with contracts at the same EMSP charge repeatedly at a mix of charge
points. An observer's view is flattened into (field path, value) pairs per
session. A field links sessions when it is constant across each EV's own
sessions but not across all sessions; the honest protocol should leave only
fields that are constant for everybody (protocol constants, the credential
definition, the revealed emsp_id).
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterator

from ..codec import WireRecord
from .world import World

CP_CPO = "cp+cpo"
EMSP = "emsp"
OBSERVERS = (CP_CPO, EMSP)


def flatten(value: Any, path: str) -> Iterator[tuple[str, str]]:
    if isinstance(value, WireRecord):
        for name in value.__dataclass_fields__:
            yield from flatten(getattr(value, name), f"{path}.{name}")
    elif isinstance(value, dict):
        for k in sorted(value):
            yield from flatten(value[k], f"{path}.{k}")
    elif isinstance(value, (tuple, list)):
        if not value:
            yield path, "()"
        for i, v in enumerate(value):
            yield from flatten(v, f"{path}[{i}]")
    elif isinstance(value, bytes):
        yield path, value.hex()
    else:
        yield path, repr(value)


@dataclass
class UnlinkabilityReport:
    observer: str
    sessions: int
    values: dict[str, Counter] = field(default_factory=dict)
    constant_within: set[str] = field(default_factory=set)
    constant_across: set[str] = field(default_factory=set)

    @property
    def linking_paths(self) -> set[str]:
        return self.constant_within - self.constant_across

    @property
    def linking_fields(self) -> set[str]:
        return {p.rsplit(".", 1)[-1] for p in self.linking_paths}

    @property
    def ok(self) -> bool:
        return not self.linking_paths

    def summary(self) -> str:
        if self.ok:
            return f"{self.observer}: Pass over {self.sessions} sessions, no linking field"
        note = " (expected: the EMSP bills per contract)" if self.observer == EMSP else ""
        return f"{self.observer}: linking fields {sorted(self.linking_fields)}{note}"


def _views(world: World, observer: str) -> list[tuple[bytes, WireRecord]]:
    if observer == CP_CPO:
        actors = [*world.cps, *world.cpos]
    elif observer == EMSP:
        actors = world.emsps
    else:
        raise ValueError(f"unknown observer {observer!r}")
    return [obs for a in actors for obs in a.observed]


def analyse(world: World, observer: str) -> UnlinkabilityReport:
    owner = {s.session_id: ev.name for ev in world.evs for s in ev.sessions if s.session_id}
    per_session: dict[bytes, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
    for sid, rec in _views(world, observer):
        if sid not in owner:
            continue
        for path, v in flatten(rec, type(rec).__name__):
            per_session[sid][path].add(v)

    report = UnlinkabilityReport(observer, len(per_session))
    by_ev: dict[str, list[bytes]] = defaultdict(list)
    for sid in per_session:
        by_ev[owner[sid]].append(sid)
    paths = {p for fields in per_session.values() for p in fields}
    for p in sorted(paths):
        report.values[p] = Counter(v for fields in per_session.values() for v in fields.get(p, ()))

    def constant(sids: list[bytes], path: str) -> bool:
        seen: set[str] = set()
        for sid in sids:
            vals = per_session[sid].get(path)
            if not vals:
                return False
            seen |= vals
        return len(seen) == 1

    everyone = list(per_session)
    for p in paths:
        if by_ev and all(constant(sids, p) for sids in by_ev.values()):
            report.constant_within.add(p)
        if constant(everyone, p):
            report.constant_across.add(p)
    return report


def build_world(seed: int, sessions: int, cps: int = 3, backend: str = "symbolic", leaky: bool = False) -> World:
    world = World(seed=seed, backend=backend, evs=2, emsps=1, cps=cps, cpos=1)
    steps = ["onboard emsp1"]
    for ev in ("ev1", "ev2"):
        steps += [f"provision {ev}", f"contract {ev} emsp1", f"install {ev} emsp1"]
    for line in steps:
        res = world.run_step(line)
        if not res.ok:
            raise RuntimeError(f"setup step {line!r} failed: {res.outcome}")
    for ev in world.evs:
        ev.leak_contract_id = leaky
    for i in range(sessions):
        for j, ev in enumerate(world.evs):
            cp = world.cps[(i + j) % len(world.cps)].name
            res = world.run_step(f"charge {ev.name} {cp}")
            if not res.ok:
                raise RuntimeError(f"charge {ev.name} {cp} failed: {res.outcome}")
            world.run_step(f"bill {cp}")
    return world


def run_unlinkability_game(
    seed: int = 0, sessions: int = 10, observers: tuple[str, ...] = OBSERVERS, leaky: bool = False, backend: str = "symbolic"
) -> dict[str, UnlinkabilityReport]:
    world = build_world(seed, sessions, backend=backend, leaky=leaky)
    return {obs: analyse(world, obs) for obs in observers}
