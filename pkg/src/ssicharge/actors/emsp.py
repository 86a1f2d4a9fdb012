from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..crypto.contract_auth import DEFAULT_WINDOW, check_contract_auth
from ..crypto.types import DidKeys, IssuerSecretKey, sha256
from ..errors import (
    AuthFailed,
    BadSignature,
    DecryptFailed,
    NoContract,
    NotFound,
    SsiChargeError,
    UnexpectedMessage,
    UnknownDid,
)
from ..ledger import CLIENT, VERINYM, DidRecord, make_cred_def, make_schema
from .base import COMMIT, RUNNING, Actor, Context, signing_input
from .messages import (
    BillingAck,
    BillingForwardReq,
    CreateContractCredentialReq,
    CreateContractCredentialRes,
    CredIssueBody,
    CredOffer,
    CredRequestBody,
    GetCredOfferReq,
    GetCredOfferRes,
    SignedOffer,
    WriteVerinymReq,
    WriteVerinymRes,
)
from .steward import verinym_mac_input, verinym_pop_input, verinym_res_mac_input

SCHEMA_NAME = "ev-charging-contract"
SCHEMA_VERSION = "1.0"
SCHEMA_ATTRS = ("emsp_id", "tariff", "valid_until")

PENDING = "pending"
ACTIVE = "active"
REVOKED = "revoked"


def offer_signing_input(offer: CredOffer) -> bytes:
    return signing_input("cred-offer", offer)


def request_signing_input(offer_nonce: bytes, emsp_did: str, blinded) -> bytes:
    return signing_input("cred-request", offer_nonce, emsp_did, blinded)


def issue_signing_input(body: CredIssueBody) -> bytes:
    return signing_input("cred-issue", dataclasses.replace(body, sig=b""))


def install_request_ds(offer: CredOffer, blinded) -> bytes:
    return sha256(offer.to_bytes()) + sha256(blinded.to_bytes())


def install_response_ds(offer: CredOffer, blinded, pre_credential) -> bytes:
    return install_request_ds(offer, blinded) + sha256(pre_credential.to_bytes())


def billing_ds(req_hash: bytes, contract_id: bytes, timestamp: int) -> bytes:
    return req_hash + contract_id + timestamp.to_bytes(8, "big")


@dataclass
class Contract:
    contract_id: bytes
    contract_key: bytes
    prov_did: str
    attrs: dict[str, str]
    status: str = PENDING
    rev_index_prime: int | None = None


@dataclass(frozen=True)
class BillingEntry:
    contract_id: bytes
    session_id: bytes
    meter_wh: int
    timestamp: int


@dataclass
class _Offer:
    offer: CredOffer
    contract_id: bytes


class Emsp(Actor):
    """Issuer of contract credentials and the billing end of a charge session."""

    HANDLES = {
        WriteVerinymRes: "on_verinym_res",
        GetCredOfferReq: "on_offer_req",
        CreateContractCredentialReq: "on_credential_req",
        BillingForwardReq: "on_billing",
    }

    def __init__(
        self,
        name: str,
        ctx: Context,
        keys: DidKeys,
        emsp_id: str,
        psk: bytes,
        steward: str,
        key_bits: int,
        window: int = DEFAULT_WINDOW,
    ):
        super().__init__(name, ctx)
        self.keys = keys
        self.emsp_id = emsp_id
        self.psk = psk
        self.steward = steward
        self.key_bits = key_bits
        self.window = window
        self.onboarded = False
        self.issuer_sk: IssuerSecretKey | None = None
        self.cred_def_id: str | None = None
        self.registry_id: str | None = None
        self.contracts: dict[bytes, Contract] = {}
        self.billing: list[BillingEntry] = []
        self._seen: set = set()
        self._offers: dict[bytes, _Offer] = {}
        self._nonce_st: bytes | None = None

    @property
    def did(self) -> str:
        return self.keys.did

    def did_record(self) -> DidRecord:
        return DidRecord(self.did, self.keys.sig_pk, self.keys.enc_pk, VERINYM, self.name, self.emsp_id)

    # -- onboarding ---------------------------------------------------------------

    def _signed_req(self, stage: int, record, nonce_st: bytes, pop: bytes) -> WriteVerinymReq:
        unsigned = WriteVerinymReq(self.emsp_id, stage, record, nonce_st, pop, b"")
        return WriteVerinymReq(
            self.emsp_id, stage, record, nonce_st, pop, self.backend.hmac_tag(self.psk, verinym_mac_input(unsigned))
        )

    def start_onboarding(self) -> None:
        self.send(self.steward, self._signed_req(0, None, b"", b""))

    def on_verinym_res(self, src: str, res: WriteVerinymRes) -> None:
        if not self.backend.hmac_verify(self.psk, verinym_res_mac_input(res), res.mac):
            raise AuthFailed("WriteVerinymRes not authenticated")
        if res.stage == 0 and self._nonce_st is None and not self.onboarded:
            self._nonce_st = res.nonce_st
            record = self.did_record()
            pop = self.backend.sign(self.keys.sig_sk, verinym_pop_input(res.nonce_st, record))
            self.emit(RUNNING, "StewardVerinym", self.did, self.ledger.did_at_endpoint(self.steward).did, record.to_bytes())
            self.send(src, self._signed_req(1, record, res.nonce_st, pop))
        elif res.stage == 1 and res.nonce_st == self._nonce_st and res.status == "ok":
            self._nonce_st = None
            self.onboarded = True
            self.publish_issuer_material()
        else:
            raise UnexpectedMessage("WriteVerinymRes out of sequence")

    def publish_issuer_material(self) -> None:
        schema = make_schema(SCHEMA_NAME, SCHEMA_VERSION, SCHEMA_ATTRS)
        self.ledger.publish_schema(self.did, schema)
        pk, sk = self.backend.issuer_keygen(SCHEMA_ATTRS, self.key_bits)
        cred_def = make_cred_def(schema.id, self.did, self.emsp_id, pk)
        self.ledger.publish_cred_def(self.did, cred_def)
        registry = self.backend.registry_setup(sk, cred_def.id)
        self.ledger.publish_registry(self.did, registry)
        self.issuer_sk, self.cred_def_id, self.registry_id = sk, cred_def.id, registry.registry_id

    # -- contracts ------------------------------------------------------------------

    def register_contract(self, prov_did: str, attrs: dict[str, str] | None = None) -> bytes:
        """Out-of-band contract negotiation (QR code hand-over)."""
        try:
            record = self.ledger.resolve_did(prov_did)
        except NotFound:
            raise UnknownDid(prov_did) from None
        if record.role != CLIENT:
            raise UnknownDid(f"{prov_did} is not a provisioning DID")
        values = {"tariff": "standard", "valid_until": "2030-12-31", **(attrs or {}), "emsp_id": self.emsp_id}
        contract = Contract(self.fresh(16), self.fresh(32), prov_did, values)
        self.contracts[contract.contract_id] = contract
        return contract.contract_id

    def _pending_contract(self, prov_did: str) -> Contract:
        for c in self.contracts.values():
            if c.prov_did == prov_did and c.status == PENDING:
                return c
        raise NoContract(f"no pending contract for {prov_did}")

    def on_offer_req(self, src: str, req: GetCredOfferReq) -> None:
        if self.cred_def_id is None:
            raise UnexpectedMessage("issuer material not published yet")
        contract = self._pending_contract(req.prov_did)
        offer = CredOffer(self.cred_def_id, self.fresh(), req.prov_did, self.did)
        sig = self.backend.sign(self.keys.sig_sk, offer_signing_input(offer))
        prov = self.ledger.resolve_did(req.prov_did)
        self._offers[offer.nonce] = _Offer(offer, contract.contract_id)
        self.send(src, GetCredOfferRes(self.did, self.seal(prov.enc_pk, SignedOffer(offer, sig))))

    def on_credential_req(self, src: str, msg: CreateContractCredentialReq) -> None:
        body: CredRequestBody = self.open_sealed(self.keys.enc_sk, msg.blob, CredRequestBody)
        pending = self._offers.get(body.offer_nonce)
        if pending is None or pending.offer.prov_did != body.prov_did:
            raise UnexpectedMessage("credential request for an unknown offer")
        prov = self.ledger.resolve_did(body.prov_did)
        if not self.backend.verify(prov.sig_pk, request_signing_input(body.offer_nonce, self.did, body.blinded), body.sig):
            raise BadSignature("credential request not signed by the provisioning DID")
        contract = self.contracts.get(pending.contract_id)
        if contract is None or contract.status != PENDING:
            raise NoContract("contract no longer pending")
        registry = self.ledger.get_registry(self.registry_id)
        result = self.backend.issue_credential(
            self.issuer_sk, body.blinded, contract.attrs, body.offer_nonce, registry
        )
        del self._offers[body.offer_nonce]
        delta = result.registry.deltas[-1]
        self.ledger.update_accumulator(self.did, self.registry_id, delta, registry.version)
        contract.status = ACTIVE
        contract.rev_index_prime = result.rev_index_prime
        offer = pending.offer
        self.emit(COMMIT, "CredInstall", self.did, body.prov_did, install_request_ds(offer, body.blinded))
        issued = CredIssueBody(
            body.offer_nonce,
            self.cred_def_id,
            dict(contract.attrs),
            result.pre_credential,
            result.rev_index_prime,
            result.witness,
            self.registry_id,
            result.registry.version,
            contract.contract_id,
            contract.contract_key,
            b"",
        )
        issued = self.tamper_issue(issued)
        signed = dataclasses.replace(issued, sig=self.backend.sign(self.keys.sig_sk, issue_signing_input(issued)))
        ds = install_response_ds(offer, body.blinded, result.pre_credential)
        self.emit(RUNNING, "CredInstall", self.did, body.prov_did, ds)
        self.send(src, CreateContractCredentialRes(self.seal(prov.enc_pk, signed)))

    def tamper_issue(self, body: CredIssueBody) -> CredIssueBody:
        """Identity; fixtures override it to model a misbehaving issuer."""
        return body

    # -- revocation -----------------------------------------------------------------

    def revoke(self, contract_id: bytes) -> int:
        contract = self.contracts.get(contract_id)
        if contract is None or contract.status != ACTIVE:
            raise NoContract("no active contract to revoke")
        registry = self.ledger.get_registry(self.registry_id)
        updated = self.backend.acc_revoke(registry, contract.rev_index_prime, self.issuer_sk)
        version = self.ledger.update_accumulator(self.did, self.registry_id, updated.deltas[-1], registry.version)
        contract.status = REVOKED
        return version

    # -- billing ------------------------------------------------------------------------

    def on_billing(self, src: str, req: BillingForwardReq) -> None:
        self.observed.append((req.session_id, req))
        keys = {cid: c.contract_key for cid, c in self.contracts.items()}
        try:
            data = check_contract_auth(
                self.backend, self.keys.enc_sk, keys, req.auth_blob, req.req_hash, self.ctx.now(), self._seen, self.window
            )
        except DecryptFailed:
            self.send(src, BillingAck(req.session_id, False, "UnknownEmsp"))
            raise
        except SsiChargeError as exc:
            self.send(src, BillingAck(req.session_id, False, exc.code))
            raise
        self.observed.append((req.session_id, data))
        contract = self.contracts[data.contract_id]
        self.billing.append(BillingEntry(data.contract_id, req.session_id, req.meter_wh, data.timestamp))
        self.emit(COMMIT, "Billing", self.did, contract.prov_did, billing_ds(req.req_hash, data.contract_id, data.timestamp))
        self.send(src, BillingAck(req.session_id, True, ""))
