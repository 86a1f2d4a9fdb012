"""Deterministic message bus with a logical clock and an adversary hook."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

from ..codec import WireRecord, wire_record

if TYPE_CHECKING:
    from .adversary import Adversary

EPOCH = 1_700_000_000
MAX_DELIVERIES = 100_000


@wire_record(0x0300)
class BusRecord(WireRecord):
    seq: int
    time: int
    kind: str  # send, deliver, error, or an adversary action
    src: str
    dst: str
    data: bytes
    note: str


@dataclass(frozen=True)
class Packet:
    src: str
    dst: str
    data: bytes


class Clock:
    def __init__(self, start: int = EPOCH):
        self.time = start

    def now(self) -> int:
        return self.time

    def advance(self, seconds: int = 1) -> int:
        self.time += seconds
        return self.time


class Bus:
    """FIFO delivery, one packet at a time; the clock ticks once per delivery.

    ``deliver`` is called for every packet that reaches its destination and
    returns an error code (or None). Every send, delivery, error and adversary
    action goes to ``log``.
    """

    def __init__(
        self,
        clock: Clock,
        adversary: Adversary,
        deliver: Callable[[Packet], str | None],
        log: Callable[[BusRecord], None],
    ):
        self.clock = clock
        self.adversary = adversary
        self._deliver = deliver
        self._log = log
        self._seq = 0
        self.queue: deque[Packet] = deque()

    def note(self, kind: str, pkt: Packet, note: str = "") -> None:
        self._seq += 1
        self._log(BusRecord(self._seq, self.clock.now(), kind, pkt.src, pkt.dst, pkt.data, note))

    def transmit(self, src: str, dst: str, data: bytes) -> None:
        pkt = Packet(src, dst, data)
        self.note("send", pkt)
        self.queue.extend(self.adversary.intercept(pkt, self))

    def run(self, limit: int = MAX_DELIVERIES) -> int:
        """Deliver until the network is quiet; returns the number of deliveries."""
        count = 0
        while count < limit:
            if not self.queue:
                late = self.adversary.flush(self)
                if not late:
                    break
                self.queue.extend(late)
                continue
            pkt = self.queue.popleft()
            self.clock.advance(1)
            self.note("deliver", pkt)
            err = self._deliver(pkt)
            if err:
                self.note("error", pkt, err)
            count += 1
        return count
