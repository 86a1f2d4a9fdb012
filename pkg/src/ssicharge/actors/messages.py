"""Message catalogue.

Top-level messages (0x0001-0x0012) travel inside an envelope on the bus.
Body records (0x0020-0x002F) only ever appear signed and/or encrypted inside
a message.
"""

from __future__ import annotations

from ..codec import WireRecord, wire_record
from ..crypto.types import BlindedSecret, PreCredential, Presentation, ProofRequest
from ..ledger import DidRecord

# service modes offered in ServiceDiscovery
EXTERNAL_PAYMENT = "ExternalPayment"
PNC_PKI = "PnC-PKI"
CONTRACT_PROOF = "ContractProof"
MODE_PREFERENCE = (CONTRACT_PROOF, PNC_PKI, EXTERNAL_PAYMENT)

AUTHORIZED = "Authorized"


# -- provisioning -------------------------------------------------------------


@wire_record(0x0001)
class InitNymReq(WireRecord):
    oem_id: str
    nonce_ev: bytes


@wire_record(0x0002)
class InitNymRes(WireRecord):
    blob: bytes  # InitNymBody, encrypted for the OEM


@wire_record(0x0003)
class RegisterProvisioningDid(WireRecord):
    blob: bytes  # ProvDidBody, encrypted for the steward


@wire_record(0x0004)
class WriteVerinymReq(WireRecord):
    alias: str
    stage: int
    record: DidRecord | None
    nonce_st: bytes
    pop: bytes
    mac: bytes


@wire_record(0x0005)
class WriteVerinymRes(WireRecord):
    stage: int
    nonce_st: bytes
    status: str
    version: int
    mac: bytes


# -- credential installation ---------------------------------------------------


@wire_record(0x0006)
class GetCredOfferReq(WireRecord):
    prov_did: str


@wire_record(0x0007)
class GetCredOfferRes(WireRecord):
    emsp_did: str
    blob: bytes  # SignedOffer, encrypted for the provisioning DID


@wire_record(0x0008)
class CreateContractCredentialReq(WireRecord):
    blob: bytes  # CredRequestBody, encrypted for the EMSP


@wire_record(0x0009)
class CreateContractCredentialRes(WireRecord):
    blob: bytes  # CredIssueBody, encrypted for the provisioning DID


# -- charging ------------------------------------------------------------------


@wire_record(0x000A)
class ServiceDiscoveryReq(WireRecord):
    modes: tuple[str, ...]


@wire_record(0x000B)
class ServiceDiscoveryRes(WireRecord):
    session_id: bytes
    mode: str  # empty when there is no common mode


@wire_record(0x000C)
class RequestProofReq(WireRecord):
    session_id: bytes


@wire_record(0x000D)
class RequestProofRes(WireRecord):
    session_id: bytes
    proof_request: ProofRequest


@wire_record(0x000E)
class ValidateContractProofReq(WireRecord):
    session_id: bytes
    presentation: Presentation
    auth_blob: bytes
    extensions: dict[str, bytes]


@wire_record(0x000F)
class ValidateContractProofRes(WireRecord):
    session_id: bytes
    status: str


@wire_record(0x0010)
class BillingForwardReq(WireRecord):
    session_id: bytes
    meter_wh: int
    req_hash: bytes
    emsp_id: str
    auth_blob: bytes
    location: str | None  # dropped by the CPO before forwarding


@wire_record(0x0011)
class BillingAck(WireRecord):
    session_id: bytes
    accepted: bool
    reason: str


@wire_record(0x0012)
class RelayFrame(WireRecord):
    target: str
    inner: bytes


# -- bodies --------------------------------------------------------------------


@wire_record(0x0020)
class InitNymBody(WireRecord):
    steward_did: str
    nonce_ev: bytes
    nonce_st: bytes
    oem_id: str
    sig: bytes


@wire_record(0x0021)
class ProvDidBody(WireRecord):
    record: DidRecord
    nonce_ev: bytes
    nonce_st: bytes
    oem_id: str
    pop: bytes
    oem_sig: bytes


@wire_record(0x0022)
class CredOffer(WireRecord):
    cred_def_id: str
    nonce: bytes
    prov_did: str
    emsp_did: str


@wire_record(0x0023)
class SignedOffer(WireRecord):
    offer: CredOffer
    sig: bytes


@wire_record(0x0024)
class CredRequestBody(WireRecord):
    offer_nonce: bytes
    prov_did: str
    blinded: BlindedSecret
    sig: bytes


@wire_record(0x0025)
class CredIssueBody(WireRecord):
    offer_nonce: bytes
    cred_def_id: str
    attrs: dict[str, str]
    pre_credential: PreCredential
    rev_index_prime: int
    witness: int
    registry_id: str
    registry_version: int
    contract_id: bytes
    contract_key: bytes
    sig: bytes


MESSAGE_TYPES: tuple[type[WireRecord], ...] = (
    InitNymReq,
    InitNymRes,
    RegisterProvisioningDid,
    WriteVerinymReq,
    WriteVerinymRes,
    GetCredOfferReq,
    GetCredOfferRes,
    CreateContractCredentialReq,
    CreateContractCredentialRes,
    ServiceDiscoveryReq,
    ServiceDiscoveryRes,
    RequestProofReq,
    RequestProofRes,
    ValidateContractProofReq,
    ValidateContractProofRes,
    BillingForwardReq,
    BillingAck,
    RelayFrame,
)
MESSAGE_BY_TAG: dict[int, type[WireRecord]] = {m.TAG: m for m in MESSAGE_TYPES}
