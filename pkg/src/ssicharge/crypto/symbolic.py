"""Symbolic backend with perfect-cryptography semantics.

Every cryptographic value is an opaque token. The backend keeps a private
table of the facts behind each token (who signed what, which plaintext a
ciphertext hides, which credential a presentation was built from) and the
verification operations consult that table. Nothing can be forged or opened
without the matching secret, and any change to a token's bytes makes the
lookup fail. This mirrors the symbolic protocol model and keeps the protocol
tests fast.
"""

from __future__ import annotations

from ..codec import Malformed, decode, encode
from ..errors import (
    DecryptFailed,
    InvalidBlinding,
    InvalidSignature,
    Revoked,
    SchemaMismatch,
    StaleWitness,
    UnknownElement,
)
from .backend import CryptoBackend
from .primitives import derive_did
from .types import (
    RESERVED_ATTRS,
    BlindedSecret,
    BlindingProof,
    DidKeys,
    IssuanceResult,
    IssuerPublicKey,
    IssuerSecretKey,
    NonRevocationProof,
    PreCredential,
    Presentation,
    RegistryDelta,
    RevocationRegistryState,
    SymbolicToken,
    registry_digest,
    sha256,
)

TOKEN_BITS = 256


class SymbolicBackend(CryptoBackend):
    name = "symbolic"

    def __init__(self, rng=None):
        super().__init__(rng)
        self._sigs: set[tuple[bytes, bytes, bytes]] = set()
        self._ciphers: dict[bytes, tuple[bytes, bytes]] = {}
        self._issuers: dict[int, tuple[int, int]] = {}
        self._blinds: dict[int, tuple] = {}
        self._creds: dict[int, tuple] = {}
        self._acc: dict[tuple[int, int], frozenset] = {}
        self._presentations: dict[bytes, tuple] = {}

    def _tok(self, op: str, *parts: bytes, fresh: bool = True) -> int:
        salt = self.rng.bytes(16) if fresh else b""
        digest = sha256(op.encode() + b"\x00" + b"\x00".join(parts) + salt)
        return int.from_bytes(digest, "big") | (1 << (TOKEN_BITS - 1))

    # -- keys, signatures, encryption ----------------------------------------

    def gen_did_keys(self, seed=None):
        if seed is None:
            seed = self.rng.bytes(32)
        if len(seed) < 32:
            raise ValueError("seed must be at least 32 bytes")
        sig_sk = sha256(b"sym-sig" + seed)
        enc_sk = sha256(b"sym-enc" + seed)
        sig_pk = sha256(b"sym-pk" + sig_sk)
        enc_pk = sha256(b"sym-pk" + enc_sk)
        return DidKeys(derive_did(sig_pk, enc_pk), sig_sk, sig_pk, enc_sk, enc_pk)

    def sign(self, sig_sk, msg):
        sig_pk = sha256(b"sym-pk" + sig_sk)
        sig = SymbolicToken("sig", sha256(sig_pk)[:8], sha256(sig_sk + msg)).to_bytes()
        self._sigs.add((sig_pk, sha256(msg), sig))
        return sig

    def verify(self, sig_pk, msg, sig):
        return (sig_pk, sha256(msg), sig) in self._sigs

    def pk_encrypt(self, receiver_pk, msg, sender_sk=None):
        handle = self.rng.bytes(16)
        blob = SymbolicToken("enc", sha256(receiver_pk + handle)[:8], sha256(msg + handle)).to_bytes()
        self._ciphers[sha256(blob)] = (receiver_pk, msg)
        return blob

    def pk_decrypt(self, receiver_sk, blob):
        entry = self._ciphers.get(sha256(blob))
        if entry is None or entry[0] != sha256(b"sym-pk" + receiver_sk):
            raise DecryptFailed("no matching key for symbolic ciphertext")
        return entry[1]

    def hmac_tag(self, key, msg):
        if len(key) != 32:
            raise ValueError("HMAC key must be 32 bytes")
        return sha256(b"sym-hmac" + key + sha256(msg))

    def hmac_verify(self, key, msg, tag):
        return self.hmac_tag(key, msg) == tag

    # -- issuer keys and registry --------------------------------------------

    def issuer_keygen(self, attr_names, bits):
        names = RESERVED_ATTRS + tuple(a for a in attr_names if a not in RESERVED_ATTRS)
        n = self._tok("n")
        pk = IssuerPublicKey(
            n=n, S=self._tok("S"), Z=self._tok("Z"), R=tuple(self._tok("R") for _ in names), attr_names=names
        )
        sk = IssuerSecretKey(pk, self._tok("p"), self._tok("q"), self._tok("xz"), tuple(self._tok("xr") for _ in names))
        self._issuers[n] = (sk.p_prime, sk.q_prime)
        return pk, sk

    def _check_custody(self, sk: IssuerSecretKey) -> None:
        if self._issuers.get(sk.public.n) != (sk.p_prime, sk.q_prime):
            raise InvalidSignature("issuer secret key does not match")

    def _acc_value(self, modulus: int, active: frozenset) -> int:
        body = encode((modulus, tuple(sorted(active))))
        value = int.from_bytes(sha256(b"sym-acc" + body), "big") | (1 << (TOKEN_BITS - 1))
        self._acc[(modulus, value)] = active
        return value

    def registry_setup(self, sk, cred_def_id):
        self._check_custody(sk)
        n = sk.public.n
        u = self._acc_value(n, frozenset())
        g, h = self._tok("g"), self._tok("h")
        registry_id = registry_digest(cred_def_id, n, u, g, h)
        return RevocationRegistryState(registry_id, cred_def_id, n, u, g, h, u, 0, ())

    # -- issuance --------------------------------------------------------------

    def blind_master_secret(self, pk, ms, offer_nonce):
        v_prime = self.rng.bits(TOKEN_BITS)
        U = self._tok("blind", pk.n.to_bytes(32, "big"))
        proof = BlindingProof(self._tok("c"), self._tok("vhat"), self._tok("mshat"))
        self._blinds[U] = (pk.n, ms, v_prime, offer_nonce, proof)
        return BlindedSecret(U, proof), v_prime

    def verify_blinding(self, pk, blinded, offer_nonce):
        entry = self._blinds.get(blinded.U)
        return (
            entry is not None
            and entry[0] == pk.n
            and entry[3] == offer_nonce
            and entry[4] == blinded.proof
        )

    def issue_credential(self, sk, blinded, attrs, offer_nonce, registry):
        self._check_custody(sk)
        pk = sk.public
        if not self.verify_blinding(pk, blinded, offer_nonce):
            raise InvalidBlinding("blinded master secret proof does not verify")
        if set(attrs) != set(pk.schema_attrs):
            raise SchemaMismatch("attributes do not match schema")
        used = {d.element for d in registry.deltas}
        e_rev = self._tok("erev")
        while e_rev in used:
            e_rev = self._tok("erev")
        A, e = self._tok("A"), self._tok("e")
        v_dprime = self.rng.bits(TOKEN_BITS)
        self._creds[A] = (pk.n, e, v_dprime, blinded.U, tuple(sorted(attrs.items())), e_rev)
        updated = self.acc_add(registry, e_rev)
        witness = self._witness(updated.acc_modulus, e_rev, updated.value)
        return IssuanceResult(PreCredential(A, e, v_dprime), e_rev, updated, witness)

    def _cred_ok(self, pk, A, e, v, ms, attrs, e_rev) -> bool:
        entry = self._creds.get(A)
        if entry is None:
            return False
        n, e0, v_dprime, U, attr_items, e_rev0 = entry
        blind = self._blinds.get(U)
        return (
            n == pk.n
            and e0 == e
            and e_rev0 == e_rev
            and attr_items == tuple(sorted(attrs.items()))
            and blind is not None
            and blind[1] == ms
            and blind[2] + v_dprime == v
        )

    def complete_credential(self, pre, v_prime, ms, attrs, rev_index_prime, pk):
        v = v_prime + pre.v_dprime
        if not self._cred_ok(pk, pre.A, pre.e, v, ms, attrs, rev_index_prime):
            raise InvalidSignature("symbolic credential does not verify")
        return pre.A, pre.e, v

    def verify_credential(self, cred, pk):
        return self._cred_ok(pk, cred.A, cred.e, cred.v, cred.master_secret, cred.attrs, cred.rev_index_prime)

    # -- presentations -----------------------------------------------------------

    def create_presentation(self, cred, req, registry, pk):
        version = req.version_for(cred.cred_def_id)
        if version is None:
            raise ValueError("proof request does not accept this credential definition")
        if cred.witness_version != version:
            raise StaleWitness(f"witness at version {cred.witness_version}, request wants {version}")
        V = registry.value_at(version)
        reveal = tuple(sorted(req.requested_reveal))
        if not set(reveal) <= set(cred.attrs):
            raise ValueError("requested attributes are not in the credential")
        hidden = [a for a in pk.attr_names if a not in reveal]
        nonrev = NonRevocationProof(*(self._tok("nr") for _ in range(8)))
        A_prime, e_hat, v_hat = self._tok("A'"), self._tok("ehat"), self._tok("vhat")
        m_hat = {a: self._tok("mhat") for a in hidden}
        revealed = {a: cred.attrs[a] for a in reveal}
        c = self._tok("chal")
        cih = sha256(encode(req) + encode((A_prime, c, nonrev)))
        pres = Presentation(cred.cred_def_id, version, A_prime, e_hat, v_hat, m_hat, revealed, nonrev, c, cih)
        if self.verify_credential(cred, pk) and self.witness_valid(cred.rev_witness, cred.rev_index_prime, V, registry):
            self._presentations[sha256(pres.to_bytes())] = (pk.n, sha256(encode(req)), cred.rev_index_prime, V)
        return pres

    def verify_presentation(self, pres, req, pk, registry, acc_value=None):
        try:
            fact = self._presentations.get(sha256(pres.to_bytes()))
        except Exception:
            return False
        if fact is None:
            return False
        n, req_digest, e_rev, V_at_creation = fact
        version = req.version_for(pres.cred_def_id)
        if version is None or version != pres.registry_version:
            return False
        if registry.cred_def_id != pres.cred_def_id or registry.acc_modulus != pk.n:
            return False
        try:
            V = registry.value_at(version) if acc_value is None else acc_value
        except KeyError:
            return False
        if set(pres.revealed) != set(req.requested_reveal):
            return False
        return (
            n == pk.n
            and req_digest == sha256(encode(req))
            and V == V_at_creation
            and e_rev in self._acc.get((registry.acc_modulus, V), frozenset())
        )

    # -- accumulator -----------------------------------------------------------

    def _active(self, registry) -> frozenset:
        return frozenset(registry.active_set())

    def _append(self, registry, op, e, active):
        value = self._acc_value(registry.acc_modulus, active)
        version = registry.version + 1
        return RevocationRegistryState(
            registry.registry_id,
            registry.cred_def_id,
            registry.acc_modulus,
            registry.u,
            registry.commit_g,
            registry.commit_h,
            value,
            version,
            registry.deltas + (RegistryDelta(version, op, e, value),),
        )

    def acc_add(self, registry, e):
        active = self._active(registry)
        if e in active:
            raise ValueError("element already accumulated")
        return self._append(registry, "add", e, active | {e})

    def acc_revoke(self, registry, e, sk):
        self._check_custody(sk)
        active = self._active(registry)
        if e not in active:
            raise UnknownElement("element is not in the active set")
        return self._append(registry, "remove", e, active - {e})

    def _witness(self, modulus: int, e: int, value: int) -> int:
        body = encode((modulus, e, value))
        return int.from_bytes(sha256(b"sym-wit" + body), "big")

    def witness_update(self, w, own_e, deltas, registry):
        deltas = tuple(deltas)
        for d in deltas:
            if d.element == own_e and d.op == "remove":
                raise Revoked("own element was removed from the accumulator")
        if not deltas:
            return w
        return self._witness(registry.acc_modulus, own_e, deltas[-1].value)

    def witness_valid(self, w, e, value, registry):
        active = self._acc.get((registry.acc_modulus, value))
        return active is not None and e in active and w == self._witness(registry.acc_modulus, e, value)


def parse_token(blob: bytes) -> SymbolicToken | None:
    try:
        return SymbolicToken.from_wire(decode(blob))
    except (Malformed, ValueError):
        return None
