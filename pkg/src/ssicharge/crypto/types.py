"""Data types shared by both crypto backends.

Both backends fill the same records; the symbolic backend stores opaque
tokens where the concrete one stores group elements.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..codec import WireRecord, encode, wire_record

MASTER_SECRET = "master_secret"
REV_INDEX = "rev_index"
RESERVED_ATTRS = (MASTER_SECRET, REV_INDEX)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def encode_attr(value: str) -> int:
    """Integer encoding of a credential attribute value (256-bit digest)."""
    return int.from_bytes(sha256(value.encode("utf-8")), "big")


def registry_digest(cred_def_id: str, modulus: int, u: int, g: int, h: int) -> str:
    """Content-derived revocation registry id."""
    return "reg:" + sha256(encode((cred_def_id, modulus, u, g, h)))[:16].hex()


@wire_record(0x0100)
class DidKeys(WireRecord):
    did: str
    sig_sk: bytes
    sig_pk: bytes
    enc_sk: bytes
    enc_pk: bytes


@wire_record(0x0101)
class IssuerPublicKey(WireRecord):
    n: int
    S: int
    Z: int
    R: tuple[int, ...]
    attr_names: tuple[str, ...]

    def index(self, name: str) -> int:
        return self.attr_names.index(name)

    @property
    def schema_attrs(self) -> tuple[str, ...]:
        return tuple(a for a in self.attr_names if a not in RESERVED_ATTRS)


@wire_record(0x0102)
class IssuerSecretKey(WireRecord):
    public: IssuerPublicKey
    p_prime: int
    q_prime: int
    x_z: int
    x_r: tuple[int, ...]

    @property
    def order(self) -> int:
        return self.p_prime * self.q_prime


@wire_record(0x0103)
class BlindingProof(WireRecord):
    challenge: int
    v_prime_hat: int
    ms_hat: int


@wire_record(0x0104)
class BlindedSecret(WireRecord):
    U: int
    proof: BlindingProof


@wire_record(0x0105)
class PreCredential(WireRecord):
    A: int
    e: int
    v_dprime: int


@wire_record(0x0106)
class RegistryDelta(WireRecord):
    version: int
    op: str
    element: int
    value: int


@wire_record(0x0107)
class RevocationRegistryState(WireRecord):
    registry_id: str
    cred_def_id: str
    acc_modulus: int
    u: int
    commit_g: int
    commit_h: int
    value: int
    version: int
    deltas: tuple[RegistryDelta, ...]

    def value_at(self, version: int) -> int:
        if version == 0:
            return self.u
        for d in self.deltas:
            if d.version == version:
                return d.value
        raise KeyError(version)

    def active_set(self, version: int | None = None) -> list[int]:
        active: list[int] = []
        for d in self.deltas:
            if version is not None and d.version > version:
                break
            if d.op == "add":
                active.append(d.element)
            else:
                active.remove(d.element)
        return active

    def deltas_since(self, version: int) -> tuple[RegistryDelta, ...]:
        return tuple(d for d in self.deltas if d.version > version)


@wire_record(0x0108)
class ContractCredential(WireRecord):
    cred_def_id: str
    attrs: dict[str, str]
    A: int
    e: int
    v: int
    master_secret: int
    rev_index_prime: int
    rev_witness: int
    registry_id: str
    witness_version: int
    contract_key: bytes
    contract_id: bytes


@wire_record(0x0109)
class ProofRequest(WireRecord):
    nonce: bytes
    requested_reveal: tuple[str, ...]
    # accepted credential definitions and the registry version each must target
    cred_defs: tuple[tuple[str, int], ...]

    def version_for(self, cred_def_id: str) -> int | None:
        for cid, version in self.cred_defs:
            if cid == cred_def_id:
                return version
        return None


@wire_record(0x010A)
class NonRevocationProof(WireRecord):
    C_e: int
    C_w: int
    C_r: int
    r1_hat: int
    r2_hat: int
    r3_hat: int
    d1_hat: int
    d2_hat: int


@wire_record(0x010B)
class Presentation(WireRecord):
    cred_def_id: str
    registry_version: int
    A_prime: int
    e_hat: int
    v_hat: int
    m_hat: dict[str, int]
    revealed: dict[str, str]
    nonrev: NonRevocationProof
    challenge: int
    challenge_input_hash: bytes


@wire_record(0x010C)
class ContractAuthData(WireRecord):
    contract_id: bytes
    timestamp: int
    hmac_tag: bytes


@wire_record(0x010D)
class Keystore(WireRecord):
    version: int
    role: str
    salt: bytes
    nonce: bytes
    ciphertext: bytes


@wire_record(0x010E)
class SymbolicToken(WireRecord):
    op: str
    key_id: bytes
    digest: bytes


@dataclass(frozen=True)
class IssuanceResult:
    pre_credential: PreCredential
    rev_index_prime: int
    registry: RevocationRegistryState
    witness: int
