"""Actor plumbing shared by every role: envelope dispatch, relaying, tracing."""

from __future__ import annotations

from typing import ClassVar, Protocol

from ..codec import CodecError, WireRecord, decode_envelope, encode, encode_envelope, wire_record
from ..crypto.backend import CryptoBackend
from ..errors import DecryptFailed, UnexpectedMessage
from ..ledger import Ledger
from .messages import MESSAGE_BY_TAG, RelayFrame

RUNNING = "Running"
COMMIT = "Commit"
REVEAL = "Reveal"

# peer of a Commit when the responder cannot name the initiator
ANONYMOUS = "anonymous"

LABELS = ("StewardVerinym", "ProvDid", "CredInstall", "ChargeAuth", "Billing")


@wire_record(0x0030)
class TraceEvent(WireRecord):
    kind: str
    label: str
    actor: str
    peer: str
    ds: bytes
    time: int


class Context(Protocol):
    backend: CryptoBackend
    ledger: Ledger

    def now(self) -> int: ...

    def transmit(self, src: str, dst: str, data: bytes) -> None: ...

    def record(self, event: TraceEvent) -> None: ...


def signing_input(label: str, *parts) -> bytes:
    return encode((label, *parts))


class Actor:
    """Single-threaded state machine bound to one bus address.

    Subclasses map message classes to handler names in ``HANDLES``. A message
    with no handler, or one the handler does not expect in the current
    state, raises :class:`UnexpectedMessage`.
    """

    HANDLES: ClassVar[dict[type, str]] = {}
    # a relay forwards RelayFrames instead of unwrapping them
    IS_RELAY: ClassVar[bool] = False

    def __init__(self, name: str, ctx: Context):
        self.name = name
        self.ctx = ctx
        self.relay_via: str | None = None
        self._routes: dict[str, str] = {}
        self.errors: list[tuple[int, str, str]] = []
        # observation hook: every protocol value this actor learns, per session
        self.observed: list[tuple[bytes, WireRecord]] = []
        self.trace_enabled = True

    @property
    def backend(self) -> CryptoBackend:
        return self.ctx.backend

    @property
    def ledger(self) -> Ledger:
        return self.ctx.ledger

    def fresh(self, n: int = 16) -> bytes:
        return self.backend.random_bytes(n)

    # -- bus I/O ---------------------------------------------------------------

    def send(self, dst: str, msg: WireRecord) -> None:
        data = encode_envelope(msg)
        hop = self._routes.get(dst)
        if hop is None and self.relay_via is not None and dst != self.relay_via:
            hop = self.relay_via
        if hop is not None:
            data = encode_envelope(RelayFrame(dst, data))
            dst = hop
        self.ctx.transmit(self.name, dst, data)

    def receive(self, src: str, data: bytes) -> None:
        env = decode_envelope(data)
        cls = MESSAGE_BY_TAG.get(env.msg_type)
        if cls is None:
            raise UnexpectedMessage(f"{self.name}: unknown message tag {env.msg_type:#06x}")
        msg = cls.from_wire(env.payload)
        if isinstance(msg, RelayFrame) and not self.IS_RELAY:
            # reply to the origin through the same relay
            self._routes[msg.target] = src
            return self.receive(msg.target, msg.inner)
        handler = self.HANDLES.get(cls)
        if handler is None:
            raise UnexpectedMessage(f"{self.name} does not accept {cls.__name__}")
        getattr(self, handler)(src, msg)

    # -- helpers ---------------------------------------------------------------

    def emit(self, kind: str, label: str, actor: str, peer: str, ds: bytes) -> None:
        if self.trace_enabled:
            self.ctx.record(TraceEvent(kind, label, actor, peer, ds, self.ctx.now()))

    def open_sealed(self, enc_sk: bytes, blob: bytes, cls: type[WireRecord]):
        plain = self.backend.pk_decrypt(enc_sk, blob)
        try:
            return cls.from_bytes(plain)
        except CodecError as exc:
            raise DecryptFailed(f"sealed {cls.__name__} does not parse: {exc}") from None

    def seal(self, enc_pk: bytes, body: WireRecord) -> bytes:
        return self.backend.pk_encrypt(enc_pk, body.to_bytes())

