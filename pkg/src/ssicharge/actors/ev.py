from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..crypto.contract_auth import make_contract_auth
from ..crypto.types import ContractCredential, DidKeys, ProofRequest, sha256
from ..errors import (
    BadSignature,
    NoCommonMode,
    NonceMismatch,
    Revoked,
    StaleWitness,
    UnexpectedMessage,
)
from ..ledger import CLIENT, VERINYM, DidRecord
from .base import COMMIT, RUNNING, Actor, Context
from .emsp import (
    billing_ds,
    install_request_ds,
    install_response_ds,
    issue_signing_input,
    offer_signing_input,
    request_signing_input,
)
from .messages import (
    CONTRACT_PROOF,
    EXTERNAL_PAYMENT,
    PNC_PKI,
    CreateContractCredentialReq,
    CreateContractCredentialRes,
    CredIssueBody,
    CredRequestBody,
    GetCredOfferReq,
    GetCredOfferRes,
    InitNymBody,
    InitNymReq,
    InitNymRes,
    ProvDidBody,
    RegisterProvisioningDid,
    RequestProofReq,
    RequestProofRes,
    ServiceDiscoveryReq,
    ServiceDiscoveryRes,
    SignedOffer,
    ValidateContractProofReq,
    ValidateContractProofRes,
)
from .steward import initnym_input, provdid_oem_input, provdid_pop_input

# charge session outcomes that are not error codes
IN_PROGRESS = "InProgress"
NOT_IMPLEMENTED = "NotImplementedMode"


@dataclass
class _Install:
    emsp: str
    offer: object = None
    blinded: object = None
    v_prime: int = 0
    master_secret: int = 0


@dataclass
class ChargeSession:
    cp: str
    session_id: bytes = b""
    state: str = "discovery"
    outcome: str = IN_PROGRESS
    request: ProofRequest | None = None
    contract_id: bytes = b""


class EvWallet(Actor):
    """EV (with its embedded OEM identity) acting as SSI wallet.

    Master secrets and contract keys only leave the wallet blinded (issuance)
    or MAC'd and encrypted for the issuer (ContractAuthData).
    """

    HANDLES = {
        InitNymRes: "on_init_nym_res",
        GetCredOfferRes: "on_offer_res",
        CreateContractCredentialRes: "on_credential_res",
        ServiceDiscoveryRes: "on_discovery_res",
        RequestProofRes: "on_proof_request",
        ValidateContractProofRes: "on_validate_res",
    }

    def __init__(
        self,
        name: str,
        ctx: Context,
        oem_id: str,
        oem_keys: DidKeys,
        steward: str,
        steward_sig_pk: bytes,
        steward_enc_pk: bytes,
        modes: tuple[str, ...] = (CONTRACT_PROOF, EXTERNAL_PAYMENT),
    ):
        super().__init__(name, ctx)
        self.oem_id = oem_id
        self.oem_keys = oem_keys
        self.steward = steward
        self.steward_sig_pk = steward_sig_pk
        self.steward_enc_pk = steward_enc_pk
        self.modes = modes
        self.prov_keys: DidKeys | None = None
        self.credentials: list[ContractCredential] = []
        self.sessions: list[ChargeSession] = []
        # fixture: a wallet that leaks its contract id in the proof extensions
        self.leak_contract_id = False
        self._nonce_ev: bytes | None = None
        self._installs: dict[str, _Install] = {}

    @property
    def did(self) -> str:
        return self.prov_keys.did if self.prov_keys else f"unprovisioned:{self.name}"

    # -- provisioning ---------------------------------------------------------------

    def start_provisioning(self) -> None:
        self.prov_keys = self.backend.gen_did_keys()
        self._nonce_ev = self.fresh()
        self.send(self.steward, InitNymReq(self.oem_id, self._nonce_ev))

    def on_init_nym_res(self, src: str, res: InitNymRes) -> None:
        if self._nonce_ev is None or self.prov_keys is None:
            raise UnexpectedMessage("no provisioning in progress")
        body: InitNymBody = self.open_sealed(self.oem_keys.enc_sk, res.blob, InitNymBody)
        if not self.backend.verify(self.steward_sig_pk, initnym_input(body.nonce_ev, body.nonce_st, body.oem_id), body.sig):
            raise BadSignature("InitNymRes not signed by the steward")
        if body.nonce_ev != self._nonce_ev or body.oem_id != self.oem_id:
            raise NonceMismatch("InitNymRes does not answer our InitNymReq")
        self._nonce_ev = None
        k = self.prov_keys
        record = DidRecord(k.did, k.sig_pk, k.enc_pk, CLIENT, self.name, "")
        pop = self.backend.sign(k.sig_sk, provdid_pop_input(body.nonce_st, record))
        oem_sig = self.backend.sign(self.oem_keys.sig_sk, provdid_oem_input(record, body.nonce_ev, body.nonce_st))
        out = ProvDidBody(record, body.nonce_ev, body.nonce_st, self.oem_id, pop, oem_sig)
        ds = record.to_bytes() + body.nonce_ev + body.nonce_st
        self.emit(RUNNING, "ProvDid", k.did, body.steward_did, ds)
        self.send(src, RegisterProvisioningDid(self.seal(self.steward_enc_pk, out)))

    # -- credential installation -------------------------------------------------------

    def start_install(self, emsp: str) -> None:
        if self.prov_keys is None:
            raise UnexpectedMessage("EV has no provisioning DID")
        self._installs[emsp] = _Install(emsp)
        self.send(emsp, GetCredOfferReq(self.prov_keys.did))

    def _issuer_record(self, did: str) -> DidRecord:
        rec = self.ledger.resolve_did(did)
        if rec.role != VERINYM:
            raise BadSignature(f"{did} is not an authorized issuer")
        return rec

    def on_offer_res(self, src: str, res: GetCredOfferRes) -> None:
        pending = self._installs.get(src)
        if pending is None or pending.offer is not None:
            raise UnexpectedMessage("no credential offer expected from this peer")
        signed: SignedOffer = self.open_sealed(self.prov_keys.enc_sk, res.blob, SignedOffer)
        offer = signed.offer
        issuer = self._issuer_record(offer.emsp_did)
        if not self.backend.verify(issuer.sig_pk, offer_signing_input(offer), signed.sig):
            raise BadSignature("credential offer signature does not verify")
        if offer.prov_did != self.prov_keys.did or offer.emsp_did != res.emsp_did:
            raise NonceMismatch("offer was made for someone else")
        cred_def = self.ledger.get_cred_def(offer.cred_def_id)
        if cred_def.issuer_did != offer.emsp_did:
            raise BadSignature("offer names a credential definition of another issuer")
        ms = self.backend.new_master_secret()
        blinded, v_prime = self.backend.blind_master_secret(cred_def.public_key, ms, offer.nonce)
        sig = self.backend.sign(self.prov_keys.sig_sk, request_signing_input(offer.nonce, offer.emsp_did, blinded))
        body = CredRequestBody(offer.nonce, self.prov_keys.did, blinded, sig)
        pending.offer, pending.blinded, pending.v_prime, pending.master_secret = offer, blinded, v_prime, ms
        self.emit(RUNNING, "CredInstall", self.prov_keys.did, offer.emsp_did, install_request_ds(offer, blinded))
        self.send(src, CreateContractCredentialReq(self.seal(issuer.enc_pk, body)))

    def on_credential_res(self, src: str, res: CreateContractCredentialRes) -> None:
        pending = self._installs.get(src)
        if pending is None or pending.offer is None:
            raise UnexpectedMessage("no credential expected from this peer")
        body: CredIssueBody = self.open_sealed(self.prov_keys.enc_sk, res.blob, CredIssueBody)
        offer = pending.offer
        issuer = self._issuer_record(offer.emsp_did)
        if not self.backend.verify(issuer.sig_pk, issue_signing_input(body), body.sig):
            raise BadSignature("issued credential not signed by the offering EMSP")
        if body.offer_nonce != offer.nonce or body.cred_def_id != offer.cred_def_id:
            raise NonceMismatch("credential does not answer our request")
        pk = self.ledger.get_cred_def(body.cred_def_id).public_key
        A, e, v = self.backend.complete_credential(
            body.pre_credential, pending.v_prime, pending.master_secret, body.attrs, body.rev_index_prime, pk
        )
        cred = ContractCredential(
            body.cred_def_id,
            dict(body.attrs),
            A,
            e,
            v,
            pending.master_secret,
            body.rev_index_prime,
            body.witness,
            body.registry_id,
            body.registry_version,
            body.contract_key,
            body.contract_id,
        )
        registry = self.ledger.get_registry(body.registry_id)
        if not self.backend.witness_valid(body.witness, body.rev_index_prime, registry.value_at(body.registry_version), registry):
            raise BadSignature("issued revocation witness does not verify")
        del self._installs[src]
        self.credentials.append(cred)
        ds = install_response_ds(offer, pending.blinded, body.pre_credential)
        self.emit(COMMIT, "CredInstall", self.prov_keys.did, offer.emsp_did, ds)

    # -- charging -----------------------------------------------------------------------

    def start_charge(self, cp: str) -> ChargeSession:
        session = ChargeSession(cp)
        self.sessions.append(session)
        self.send(cp, ServiceDiscoveryReq(self.modes))
        return session

    def _session(self, src: str, state: str, session_id: bytes | None = None) -> ChargeSession:
        for s in reversed(self.sessions):
            if s.cp == src and s.state == state and (session_id is None or s.session_id == session_id):
                return s
        raise UnexpectedMessage(f"no charge session in state {state!r} with {src}")

    def on_discovery_res(self, src: str, res: ServiceDiscoveryRes) -> None:
        s = self._session(src, "discovery")
        s.session_id = res.session_id
        if res.mode not in self.modes:
            s.state, s.outcome = "closed", NoCommonMode.__name__
            raise NoCommonMode(f"CP chose {res.mode!r}, EV supports {self.modes}")
        if res.mode == CONTRACT_PROOF:
            s.state = "requesting"
            self.send(src, RequestProofReq(res.session_id))
        elif res.mode == PNC_PKI:
            s.state, s.outcome = "closed", NOT_IMPLEMENTED
        else:
            s.state, s.outcome = "closed", EXTERNAL_PAYMENT

    def _credential_for(self, req: ProofRequest) -> ContractCredential:
        for cred in reversed(self.credentials):
            if req.version_for(cred.cred_def_id) is not None:
                return cred
        raise UnexpectedMessage("no credential matches the proof request")

    def refresh_witness(self, cred: ContractCredential, version: int) -> ContractCredential:
        """Bring the witness to ``version`` using the ledger's delta log."""
        if cred.witness_version == version:
            return cred
        if cred.witness_version > version:
            raise StaleWitness(f"witness at {cred.witness_version} is ahead of requested {version}")
        registry = self.ledger.get_registry(cred.registry_id)
        deltas = [d for d in registry.deltas_since(cred.witness_version) if d.version <= version]
        w = self.backend.witness_update(cred.rev_witness, cred.rev_index_prime, deltas, registry)
        updated = dataclasses.replace(cred, rev_witness=w, witness_version=version)
        self.credentials[self.credentials.index(cred)] = updated
        return updated

    def on_proof_request(self, src: str, res: RequestProofRes) -> None:
        s = self._session(src, "requesting", res.session_id)
        req = res.proof_request
        s.request = req
        cred = self._credential_for(req)
        try:
            cred = self.refresh_witness(cred, req.version_for(cred.cred_def_id))
        except Revoked:
            s.state, s.outcome = "closed", "RevokedCredential"
            raise
        except StaleWitness:
            s.state, s.outcome = "closed", "StaleRegistryVersion"
            raise
        registry = self.ledger.get_registry(cred.registry_id)
        pk = self.ledger.get_cred_def(cred.cred_def_id).public_key
        pres = self.backend.create_presentation(cred, req, registry, pk)
        emsp = self.ledger.emsp_record(cred.attrs["emsp_id"])
        req_bytes = req.to_bytes()
        auth, blob = make_contract_auth(self.backend, cred, req_bytes, self.ctx.now(), emsp.enc_pk)
        extensions = {"contract_id": cred.contract_id} if self.leak_contract_id else {}
        s.state, s.contract_id = "submitted", cred.contract_id
        self.emit(RUNNING, "ChargeAuth", self.did, src, sha256(req_bytes) + sha256(pres.to_bytes()))
        self.emit(RUNNING, "Billing", self.did, emsp.did, billing_ds(sha256(req_bytes), auth.contract_id, auth.timestamp))
        self.send(src, ValidateContractProofReq(res.session_id, pres, blob, extensions))

    def on_validate_res(self, src: str, res: ValidateContractProofRes) -> None:
        s = self._session(src, "submitted", res.session_id)
        s.state = "closed"
        s.outcome = res.status

    @property
    def last_outcome(self) -> str | None:
        return self.sessions[-1].outcome if self.sessions else None

