"""Network adversaries.

The adversary sits between ``transmit`` and the delivery queue. It sees every
packet but holds no private keys: anything it learns about secrets comes
from explicit key reveals in a scenario, which are handled by the world, not
here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..crypto.rng import Rng
from .bus import Packet

if TYPE_CHECKING:
    from .bus import Bus

DY_ACTIONS = ("drop", "replay", "reorder", "inject", "modify")


class Adversary:
    """Passive, honest-but-curious: records everything, changes nothing."""

    mode = "passive"

    def __init__(self) -> None:
        self.seen: list[Packet] = []

    def intercept(self, pkt: Packet, bus: Bus) -> list[Packet]:
        self.seen.append(pkt)
        return [pkt]

    def flush(self, bus: Bus) -> list[Packet]:
        """Packets to release once the network is otherwise idle."""
        return []


class ReplayAll(Adversary):
    """Delivers everything, then replays every original packet once."""

    mode = "replay-all"

    def __init__(self) -> None:
        super().__init__()
        self._replayed = 0

    def flush(self, bus: Bus) -> list[Packet]:
        out = self.seen[self._replayed :]
        self._replayed = len(self.seen)
        for pkt in out:
            bus.note("replay", pkt)
        # replays are not added to ``seen`` so each original goes out twice at most
        return list(out)

    def intercept(self, pkt: Packet, bus: Bus) -> list[Packet]:
        self.seen.append(pkt)
        return [pkt]


@dataclass
class DolevYaoSchedule:
    drop: float = 0.05
    replay: float = 0.1
    reorder: float = 0.1
    inject: float = 0.05
    modify: float = 0.05
    actions: tuple[str, ...] = DY_ACTIONS

    def weight(self, action: str) -> float:
        return getattr(self, action) if action in self.actions else 0.0


class DolevYao(Adversary):
    """Seeded active attacker: drop, replay, reorder, inject and modify.

    Injected packets are recombinations of observed traffic sent to arbitrary
    addresses under spoofed sources; modifications flip one byte.
    """

    mode = "dolevyao"

    def __init__(self, rng: Rng, schedule: DolevYaoSchedule | None = None, addresses: tuple[str, ...] = ()):
        super().__init__()
        self.rng = rng
        self.schedule = schedule or DolevYaoSchedule()
        self.addresses = addresses
        self._held: list[Packet] = []
        self.counts = {a: 0 for a in DY_ACTIONS}

    def _choose(self) -> str:
        x = self.rng.below(1_000_000) / 1_000_000
        acc = 0.0
        for action in DY_ACTIONS:
            acc += self.schedule.weight(action)
            if x < acc:
                return action
        return "deliver"

    def _pick(self, items):
        return items[self.rng.below(len(items))]

    def intercept(self, pkt: Packet, bus: Bus) -> list[Packet]:
        self.seen.append(pkt)
        released, self._held = self._held, []
        action = self._choose()
        if action != "deliver":
            self.counts[action] += 1
        if action == "drop":
            bus.note("drop", pkt)
            return released
        if action == "reorder":
            bus.note("reorder", pkt, "held behind the next packet")
            self._held.append(pkt)
            return released
        if action == "modify":
            data = bytearray(pkt.data)
            i = self.rng.below(len(data))
            data[i] ^= 1 << self.rng.below(8)
            forged = Packet(pkt.src, pkt.dst, bytes(data))
            bus.note("modify", forged, f"flipped byte {i}")
            return [forged] + released
        out = [pkt] + released
        if action == "replay":
            old = self._pick(self.seen)
            bus.note("replay", old)
            out.append(old)
        elif action == "inject":
            old = self._pick(self.seen)
            targets = self.addresses or (old.dst,)
            forged = Packet(self._pick(targets), self._pick(targets), old.data)
            bus.note("inject", forged, "observed payload, spoofed route")
            out.append(forged)
        return out

    def flush(self, bus: Bus) -> list[Packet]:
        released, self._held = self._held, []
        return released


def make_adversary(mode: str, rng: Rng, addresses: tuple[str, ...] = (), **rates: float) -> Adversary:
    if mode == "passive":
        return Adversary()
    if mode == "replay-all":
        return ReplayAll()
    if mode == "dolevyao":
        return DolevYao(rng, DolevYaoSchedule(**rates), addresses)
    raise ValueError(f"unknown adversary mode {mode!r}")
