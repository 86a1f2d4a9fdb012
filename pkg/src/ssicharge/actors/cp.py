from __future__ import annotations

from dataclasses import dataclass

from ..codec import encode_envelope
from ..crypto.types import ProofRequest, sha256
from ..errors import (
    NoCommonMode,
    NotFound,
    ProofInvalid,
    SsiChargeError,
    StaleRegistryVersion,
    UnexpectedMessage,
)
from .base import ANONYMOUS, COMMIT, Actor, Context
from .messages import (
    AUTHORIZED,
    CONTRACT_PROOF,
    EXTERNAL_PAYMENT,
    MODE_PREFERENCE,
    PNC_PKI,
    BillingAck,
    BillingForwardReq,
    RelayFrame,
    RequestProofReq,
    RequestProofRes,
    ServiceDiscoveryReq,
    ServiceDiscoveryRes,
    ValidateContractProofReq,
    ValidateContractProofRes,
)

REVEALED_ATTRS = ("emsp_id",)


@dataclass
class CpSession:
    session_id: bytes
    peer: str
    mode: str
    state: str = "discovered"
    request: ProofRequest | None = None
    status: str = ""
    emsp_id: str = ""
    auth_blob: bytes = b""
    billed: str = ""


class ChargePoint(Actor):
    """Verifier of contract proofs; also relays opaque frames for offline EVs."""

    HANDLES = {
        ServiceDiscoveryReq: "on_discovery",
        RequestProofReq: "on_request_proof",
        ValidateContractProofReq: "on_validate",
        BillingAck: "on_billing_ack",
        RelayFrame: "on_relay",
    }
    IS_RELAY = True

    def __init__(
        self,
        name: str,
        ctx: Context,
        cpo: str,
        location: str,
        modes: tuple[str, ...] = (CONTRACT_PROOF, PNC_PKI, EXTERNAL_PAYMENT),
        accepted_cred_defs: tuple[str, ...] | None = None,
    ):
        super().__init__(name, ctx)
        self.cpo = cpo
        self.location = location
        self.modes = modes
        # None accepts every credential definition on the ledger
        self.accepted_cred_defs = accepted_cred_defs
        self.sessions: dict[bytes, CpSession] = {}

    def _get(self, session_id: bytes, state: str) -> CpSession:
        s = self.sessions.get(session_id)
        if s is None or s.state != state:
            raise UnexpectedMessage(f"session not in state {state!r}")
        return s

    def on_discovery(self, src: str, req: ServiceDiscoveryReq) -> None:
        common = [m for m in MODE_PREFERENCE if m in self.modes and m in req.modes]
        session_id = self.fresh()
        self.observed.append((session_id, req))
        if not common:
            self.sessions[session_id] = CpSession(session_id, src, "", "closed", status=NoCommonMode.__name__)
            self.send(src, ServiceDiscoveryRes(session_id, ""))
            raise NoCommonMode(f"EV offers {req.modes}, CP supports {self.modes}")
        mode = common[0]
        self.sessions[session_id] = CpSession(session_id, src, mode)
        self.send(src, ServiceDiscoveryRes(session_id, mode))

    def _accepted(self) -> list[str]:
        ids = self.accepted_cred_defs
        if ids is None:
            ids = tuple(sorted(self.ledger.state.cred_defs))
        return [i for i in ids if i in self.ledger.state.cred_defs]

    def on_request_proof(self, src: str, req: RequestProofReq) -> None:
        s = self._get(req.session_id, "discovered")
        self.observed.append((req.session_id, req))
        if s.mode != CONTRACT_PROOF:
            raise UnexpectedMessage(f"session negotiated {s.mode}")
        cred_defs = tuple((cd, self.ledger.registry_for_cred_def(cd).version) for cd in self._accepted())
        s.request = ProofRequest(self.fresh(), REVEALED_ATTRS, cred_defs)
        s.state = "proof_requested"
        self.send(src, RequestProofRes(req.session_id, s.request))

    def on_validate(self, src: str, msg: ValidateContractProofReq) -> None:
        s = self._get(msg.session_id, "proof_requested")
        self.observed.append((msg.session_id, msg))
        try:
            self._validate(s, msg)
        except SsiChargeError as exc:
            s.state, s.status = "closed", exc.code
            self.send(src, ValidateContractProofRes(msg.session_id, exc.code))
            raise
        s.state, s.status = "authorized", AUTHORIZED
        s.emsp_id, s.auth_blob = msg.presentation.revealed["emsp_id"], msg.auth_blob
        ds = sha256(s.request.to_bytes()) + sha256(msg.presentation.to_bytes())
        self.emit(COMMIT, "ChargeAuth", self.name, ANONYMOUS, ds)
        self.send(src, ValidateContractProofRes(msg.session_id, AUTHORIZED))

    def _validate(self, s: CpSession, msg: ValidateContractProofReq) -> None:
        pres, req = msg.presentation, s.request
        version = req.version_for(pres.cred_def_id)
        if version is None:
            raise ProofInvalid("credential definition not accepted")
        if pres.registry_version != version:
            raise StaleRegistryVersion(f"proof targets version {pres.registry_version}, requested {version}")
        try:
            pk = self.ledger.get_cred_def(pres.cred_def_id).public_key
            registry = self.ledger.registry_for_cred_def(pres.cred_def_id)
        except NotFound as exc:
            raise ProofInvalid(str(exc)) from None
        if not self.backend.verify_presentation(pres, req, pk, registry):
            raise ProofInvalid("presentation does not verify")

    # -- billing --------------------------------------------------------------------

    def bill(self, meter_wh: dict[bytes, int] | None = None) -> int:
        """Forward every authorized, unbilled session to the CPO."""
        count = 0
        for s in self.sessions.values():
            if s.state == "authorized" and not s.billed:
                meter = (meter_wh or {}).get(s.session_id, 1000 + self.backend.rng.below(50000))
                req_hash = sha256(s.request.to_bytes())
                fwd = BillingForwardReq(s.session_id, meter, req_hash, s.emsp_id, s.auth_blob, self.location)
                s.billed = "sent"
                self.send(self.cpo, fwd)
                count += 1
        return count

    def on_billing_ack(self, src: str, ack: BillingAck) -> None:
        s = self.sessions.get(ack.session_id)
        if s is None or s.billed != "sent" or src != self.cpo:
            raise UnexpectedMessage("unsolicited BillingAck")
        s.billed = "accepted" if ack.accepted else f"rejected:{ack.reason}"

    # -- relay --------------------------------------------------------------------------

    def on_relay(self, src: str, frame: RelayFrame) -> None:
        # opaque forwarding; the receiver learns the origin from the target field
        self.ctx.transmit(self.name, frame.target, encode_envelope(RelayFrame(src, frame.inner)))


class Cpo(Actor):
    """Charge point operator: forwards billing data to the EMSP named in the proof."""

    HANDLES = {BillingForwardReq: "on_forward", BillingAck: "on_ack"}

    def __init__(self, name: str, ctx: Context):
        super().__init__(name, ctx)
        self.forwarded: dict[bytes, tuple[str, BillingForwardReq]] = {}
        # fixture hook: send billing for an emsp_id to a different address
        self.misroute: dict[str, str] = {}

    def on_forward(self, src: str, req: BillingForwardReq) -> None:
        if req.location is None:
            raise UnexpectedMessage("billing from a CP must carry its location")
        self.observed.append((req.session_id, req))
        try:
            emsp = self.ledger.emsp_record(req.emsp_id)
        except NotFound:
            self.send(src, BillingAck(req.session_id, False, "UnknownEmsp"))
            raise
        stripped = BillingForwardReq(req.session_id, req.meter_wh, req.req_hash, req.emsp_id, req.auth_blob, None)
        self.forwarded[req.session_id] = (src, stripped)
        self.send(self.misroute.get(req.emsp_id, emsp.endpoint), stripped)

    def resubmit(self, session_id: bytes) -> None:
        """Send an already forwarded billing record again."""
        cp, stripped = self.forwarded[session_id]
        emsp = self.ledger.emsp_record(stripped.emsp_id)
        self.send(emsp.endpoint, stripped)

    def on_ack(self, src: str, ack: BillingAck) -> None:
        entry = self.forwarded.get(ack.session_id)
        if entry is None:
            raise UnexpectedMessage("BillingAck for unknown session")
        self.send(entry[0], ack)
