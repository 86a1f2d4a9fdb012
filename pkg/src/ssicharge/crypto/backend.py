"""The crypto backend interface and its concrete implementation."""

from __future__ import annotations

from abc import ABC, abstractmethod

from . import cl, primitives
from .params import L_ATTR
from .rng import Rng
from .types import (
    BlindedSecret,
    ContractCredential,
    DidKeys,
    IssuanceResult,
    IssuerPublicKey,
    IssuerSecretKey,
    PreCredential,
    Presentation,
    ProofRequest,
    RevocationRegistryState,
    sha256,
)


class CryptoBackend(ABC):
    """Operations every actor needs; one instance per simulated world.

    All randomness is drawn from ``self.rng`` so a seeded backend is fully
    reproducible.
    """

    name: str

    def __init__(self, rng: Rng | None = None):
        self.rng = rng if rng is not None else Rng()

    # shared helpers

    @staticmethod
    def hash(data: bytes) -> bytes:
        return sha256(data)

    def random_bytes(self, n: int) -> bytes:
        return self.rng.bytes(n)

    def new_master_secret(self) -> int:
        return self.rng.bits(L_ATTR)

    # DID keys and classic primitives

    @abstractmethod
    def gen_did_keys(self, seed: bytes | None = None) -> DidKeys: ...

    @abstractmethod
    def sign(self, sig_sk: bytes, msg: bytes) -> bytes: ...

    @abstractmethod
    def verify(self, sig_pk: bytes, msg: bytes, sig: bytes) -> bool: ...

    @abstractmethod
    def pk_encrypt(self, receiver_pk: bytes, msg: bytes, sender_sk: bytes | None = None) -> bytes: ...

    @abstractmethod
    def pk_decrypt(self, receiver_sk: bytes, blob: bytes) -> bytes: ...

    @abstractmethod
    def hmac_tag(self, key: bytes, msg: bytes) -> bytes: ...

    @abstractmethod
    def hmac_verify(self, key: bytes, msg: bytes, tag: bytes) -> bool: ...

    # anonymous credentials

    @abstractmethod
    def issuer_keygen(self, attr_names: tuple[str, ...], bits: int) -> tuple[IssuerPublicKey, IssuerSecretKey]: ...

    @abstractmethod
    def registry_setup(self, sk: IssuerSecretKey, cred_def_id: str) -> RevocationRegistryState: ...

    @abstractmethod
    def blind_master_secret(self, pk: IssuerPublicKey, ms: int, offer_nonce: bytes) -> tuple[BlindedSecret, int]: ...

    @abstractmethod
    def verify_blinding(self, pk: IssuerPublicKey, blinded: BlindedSecret, offer_nonce: bytes) -> bool: ...

    @abstractmethod
    def issue_credential(
        self,
        sk: IssuerSecretKey,
        blinded: BlindedSecret,
        attrs: dict[str, str],
        offer_nonce: bytes,
        registry: RevocationRegistryState,
    ) -> IssuanceResult: ...

    @abstractmethod
    def complete_credential(
        self,
        pre: PreCredential,
        v_prime: int,
        ms: int,
        attrs: dict[str, str],
        rev_index_prime: int,
        pk: IssuerPublicKey,
    ) -> tuple[int, int, int]: ...

    @abstractmethod
    def verify_credential(self, cred: ContractCredential, pk: IssuerPublicKey) -> bool: ...

    @abstractmethod
    def create_presentation(
        self,
        cred: ContractCredential,
        req: ProofRequest,
        registry: RevocationRegistryState,
        pk: IssuerPublicKey,
    ) -> Presentation: ...

    @abstractmethod
    def verify_presentation(
        self,
        pres: Presentation,
        req: ProofRequest,
        pk: IssuerPublicKey,
        registry: RevocationRegistryState,
        acc_value: int | None = None,
    ) -> bool: ...

    # accumulator

    @abstractmethod
    def acc_add(self, registry: RevocationRegistryState, e: int) -> RevocationRegistryState: ...

    @abstractmethod
    def acc_revoke(self, registry: RevocationRegistryState, e: int, sk: IssuerSecretKey) -> RevocationRegistryState: ...

    @abstractmethod
    def witness_update(self, w: int, own_e: int, deltas, registry: RevocationRegistryState) -> int: ...

    @abstractmethod
    def witness_valid(self, w: int, e: int, value: int, registry: RevocationRegistryState) -> bool: ...


class ConcreteBackend(CryptoBackend):
    name = "concrete"

    def gen_did_keys(self, seed=None):
        return primitives.gen_did_keys(seed, self.rng)

    def sign(self, sig_sk, msg):
        return primitives.sign(sig_sk, msg)

    def verify(self, sig_pk, msg, sig):
        return primitives.verify(sig_pk, msg, sig)

    def pk_encrypt(self, receiver_pk, msg, sender_sk=None):
        return primitives.pk_encrypt(receiver_pk, msg, self.rng, sender_sk)

    def pk_decrypt(self, receiver_sk, blob):
        return primitives.pk_decrypt(receiver_sk, blob)

    def hmac_tag(self, key, msg):
        return primitives.hmac_tag(key, msg)

    def hmac_verify(self, key, msg, tag):
        return primitives.hmac_verify(key, msg, tag)

    def issuer_keygen(self, attr_names, bits):
        return cl.issuer_keygen(attr_names, bits, self.rng)

    def registry_setup(self, sk, cred_def_id):
        return cl.registry_setup(sk, cred_def_id, self.rng)

    def blind_master_secret(self, pk, ms, offer_nonce):
        return cl.blind_master_secret(pk, ms, offer_nonce, self.rng)

    def verify_blinding(self, pk, blinded, offer_nonce):
        return cl.verify_blinding(pk, blinded, offer_nonce)

    def issue_credential(self, sk, blinded, attrs, offer_nonce, registry):
        return cl.issue_credential(sk, blinded, attrs, offer_nonce, registry, self.rng)

    def complete_credential(self, pre, v_prime, ms, attrs, rev_index_prime, pk):
        return cl.complete_credential(pre, v_prime, ms, attrs, rev_index_prime, pk)

    def verify_credential(self, cred, pk):
        return cl.verify_signature(pk, cred.A, cred.e, cred.v, cl.credential_values(cred))

    def create_presentation(self, cred, req, registry, pk):
        return cl.create_presentation(cred, req, registry, pk, self.rng)

    def verify_presentation(self, pres, req, pk, registry, acc_value=None):
        return cl.verify_presentation(pres, req, pk, registry, acc_value)

    def acc_add(self, registry, e):
        return cl.acc_add(registry, e)

    def acc_revoke(self, registry, e, sk):
        return cl.acc_revoke(registry, e, sk)

    def witness_update(self, w, own_e, deltas, registry):
        return cl.witness_update(w, own_e, deltas, registry.acc_modulus)

    def witness_valid(self, w, e, value, registry):
        return cl.witness_valid(w, e, value, registry.acc_modulus)


def make_backend(name: str, rng: Rng | None = None) -> CryptoBackend:
    from .symbolic import SymbolicBackend

    if name == "concrete":
        return ConcreteBackend(rng)
    if name == "symbolic":
        return SymbolicBackend(rng)
    raise ValueError(f"unknown backend {name!r}")
