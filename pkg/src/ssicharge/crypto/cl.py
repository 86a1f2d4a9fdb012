"""Camenisch-Lysyanskaya credentials and an RSA accumulator over QR_n.

Everything here is integer arithmetic modulo an RSA modulus n = p*q with
p = 2p'+1 and q = 2q'+1 safe primes. The issuer knows the group order p'q';
holders and verifiers never do.

Signature on attributes m_0..m_L (m_0 master secret, m_1 revocation prime):

    Z = A^e * S^v * prod R_i^{m_i}  (mod n)

Presentations are Fiat-Shamir Schnorr proofs over A' = A * S^r. The
non-revocation part proves knowledge of a witness w with w^{e_rev} = V using
commitments in the same group, sharing the e_rev response with the
signature proof so both statements talk about the same hidden prime.
"""

from __future__ import annotations

import functools
import hashlib

import gmpy2

from ..codec import encode
from ..errors import (
    InvalidBlinding,
    InvalidSignature,
    Revoked,
    SchemaMismatch,
    StaleWitness,
    UnknownElement,
)
from .params import ClParams, params_for_bits
from .rng import Rng
from .types import (
    MASTER_SECRET,
    RESERVED_ATTRS,
    REV_INDEX,
    BlindedSecret,
    BlindingProof,
    ContractCredential,
    IssuanceResult,
    IssuerPublicKey,
    IssuerSecretKey,
    NonRevocationProof,
    PreCredential,
    Presentation,
    ProofRequest,
    RegistryDelta,
    RevocationRegistryState,
    encode_attr,
    registry_digest,
    sha256,
)

DOMAIN_BLIND = b"ssicharge/blind/v1"
DOMAIN_PRESENT = b"ssicharge/present/v1"
REV_PRIME_BITS = 254
MAX_ATTRS = 64

_SMALL_PRIMORIAL = int(gmpy2.primorial(2000))


def powmod(base: int, exp: int, mod: int) -> int:
    return int(gmpy2.powmod(base, exp, mod))


def is_prime(x: int) -> bool:
    return bool(gmpy2.is_prime(x, 40))


def _hash_int(*parts: bytes) -> int:
    return int.from_bytes(hashlib.sha256(b"".join(parts)).digest(), "big")


def params_of(pk: IssuerPublicKey) -> ClParams:
    return params_for_bits(pk.n.bit_length())


# -- key generation ----------------------------------------------------------


def safe_prime(bits: int, rng: Rng) -> tuple[int, int]:
    """Return (p, p') with p = 2p'+1, both prime, p exactly ``bits`` bits."""
    while True:
        # top two bits set so that a product of two such primes has full length
        q = rng.bits(bits - 1) | (3 << (bits - 3)) | 1
        p = 2 * q + 1
        if gmpy2.gcd(q, _SMALL_PRIMORIAL) != 1 or gmpy2.gcd(p, _SMALL_PRIMORIAL) != 1:
            continue
        if not gmpy2.is_prime(q, 1) or not gmpy2.is_prime(p, 1):
            continue
        if is_prime(q) and is_prime(p):
            return p, q


def random_qr(n: int, rng: Rng) -> int:
    while True:
        x = rng.between(2, n - 1)
        if gmpy2.gcd(x, n) == 1:
            return powmod(x, 2, n)


@functools.lru_cache(maxsize=16)
def _cached_modulus(bits: int, seed: bytes) -> tuple[int, int, int, int]:
    rng = Rng(seed)
    p, p_prime = safe_prime(bits // 2, rng)
    while True:
        q, q_prime = safe_prime(bits // 2, rng)
        if q != p:
            return p, p_prime, q, q_prime


def issuer_keygen(attr_names: tuple[str, ...], bits: int, rng: Rng) -> tuple[IssuerPublicKey, IssuerSecretKey]:
    """Generate a CL issuer key for the reserved slots plus ``attr_names``."""
    if bits not in (512, 1024, 2048):
        raise ValueError("bits must be 512, 1024 or 2048")
    names = RESERVED_ATTRS + tuple(a for a in attr_names if a not in RESERVED_ATTRS)
    if len(names) > MAX_ATTRS:
        raise ValueError("too many attributes")
    if rng.deterministic:
        # safe-prime search dominates keygen; memoize by the derived seed
        _, p_prime, _, q_prime = _cached_modulus(bits, rng.bytes(32))
    else:
        _, p_prime, _, q_prime = _cached_modulus.__wrapped__(bits, rng.bytes(32))
    n = (2 * p_prime + 1) * (2 * q_prime + 1)
    order = p_prime * q_prime
    S = random_qr(n, rng)
    x_z = rng.between(2, order)
    x_r = tuple(rng.between(2, order) for _ in names)
    Z = powmod(S, x_z, n)
    R = tuple(powmod(S, x, n) for x in x_r)
    pk = IssuerPublicKey(n=n, S=S, Z=Z, R=R, attr_names=names)
    return pk, IssuerSecretKey(public=pk, p_prime=p_prime, q_prime=q_prime, x_z=x_z, x_r=x_r)


def registry_setup(sk: IssuerSecretKey, cred_def_id: str, rng: Rng) -> RevocationRegistryState:
    """Empty accumulator in the issuer's group: V_0 = u."""
    pk = sk.public
    u = powmod(pk.S, rng.between(2, sk.order), pk.n)
    g = powmod(pk.S, rng.between(2, sk.order), pk.n)
    h = powmod(pk.S, rng.between(2, sk.order), pk.n)
    registry_id = registry_digest(cred_def_id, pk.n, u, g, h)
    return RevocationRegistryState(registry_id, cred_def_id, pk.n, u, g, h, u, 0, ())


# -- blinded master secret ---------------------------------------------------


def blind_master_secret(pk: IssuerPublicKey, ms: int, offer_nonce: bytes, rng: Rng) -> tuple[BlindedSecret, int]:
    prm = params_of(pk)
    if not 0 <= ms < 1 << prm.l_m:
        raise ValueError("master secret out of range")
    n, S, R_ms = pk.n, pk.S, pk.R[pk.index(MASTER_SECRET)]
    v_prime = rng.bits(prm.l_v_prime)
    U = powmod(S, v_prime, n) * powmod(R_ms, ms, n) % n
    v_t = rng.bits(prm.l_v_prime_tilde)
    ms_t = rng.bits(prm.l_m_tilde)
    U_t = powmod(S, v_t, n) * powmod(R_ms, ms_t, n) % n
    c = _hash_int(DOMAIN_BLIND, encode((n, U, U_t, offer_nonce)))
    proof = BlindingProof(challenge=c, v_prime_hat=v_t + c * v_prime, ms_hat=ms_t + c * ms)
    return BlindedSecret(U=U, proof=proof), v_prime


def verify_blinding(pk: IssuerPublicKey, blinded: BlindedSecret, offer_nonce: bytes) -> bool:
    prm = params_of(pk)
    n, U, pr = pk.n, blinded.U, blinded.proof
    if not 1 < U < n or pr.ms_hat.bit_length() > prm.l_m_tilde + 1:
        return False
    if pr.v_prime_hat.bit_length() > prm.l_v_prime_tilde + 1:
        return False
    try:
        U_hat = (
            powmod(U, -pr.challenge, n)
            * powmod(pk.S, pr.v_prime_hat, n)
            * powmod(pk.R[pk.index(MASTER_SECRET)], pr.ms_hat, n)
        ) % n
    except ZeroDivisionError:
        return False
    return pr.challenge == _hash_int(DOMAIN_BLIND, encode((n, U, U_hat, offer_nonce)))


# -- issuance ----------------------------------------------------------------


def _attr_product(pk: IssuerPublicKey, values: dict[str, int]) -> int:
    acc = 1
    for name, m in values.items():
        acc = acc * powmod(pk.R[pk.index(name)], m, pk.n) % pk.n
    return acc


def _check_schema(pk: IssuerPublicKey, attrs: dict[str, str]) -> None:
    if set(attrs) != set(pk.schema_attrs):
        raise SchemaMismatch(f"attributes {sorted(attrs)} do not match schema {sorted(pk.schema_attrs)}")


def _random_prime(lo: int, hi: int, rng: Rng) -> int:
    while True:
        x = int(gmpy2.next_prime(rng.between(lo, hi)))
        if x < hi:
            return x


def new_rev_prime(sk: IssuerSecretKey, registry: RevocationRegistryState, rng: Rng) -> int:
    taken = set(d.element for d in registry.deltas)
    while True:
        e = _random_prime(1 << (REV_PRIME_BITS - 1), 1 << REV_PRIME_BITS, rng)
        if e not in taken and e not in (sk.p_prime, sk.q_prime):
            return e


def issue_credential(
    sk: IssuerSecretKey,
    blinded: BlindedSecret,
    attrs: dict[str, str],
    offer_nonce: bytes,
    registry: RevocationRegistryState,
    rng: Rng,
) -> IssuanceResult:
    pk = sk.public
    prm = params_of(pk)
    if not verify_blinding(pk, blinded, offer_nonce):
        raise InvalidBlinding("blinded master secret proof does not verify")
    _check_schema(pk, attrs)
    n = pk.n
    e_rev = new_rev_prime(sk, registry, rng)
    e = _random_prime(prm.e_start, prm.e_end, rng)
    v_dprime = (1 << (prm.l_v - 1)) | rng.bits(prm.l_v - 1)
    known = {name: encode_attr(val) for name, val in attrs.items()}
    known[REV_INDEX] = e_rev
    Q = blinded.U * powmod(pk.S, v_dprime, n) * _attr_product(pk, known) % n
    Q = pk.Z * int(gmpy2.invert(Q, n)) % n
    A = powmod(Q, int(gmpy2.invert(e, sk.order)), n)
    witness = registry.value
    updated = acc_add(registry, e_rev)
    return IssuanceResult(PreCredential(A, e, v_dprime), e_rev, updated, witness)


def verify_signature(pk: IssuerPublicKey, A: int, e: int, v: int, values: dict[str, int]) -> bool:
    prm = params_of(pk)
    if set(values) != set(pk.attr_names):
        return False
    if not prm.e_start <= e < prm.e_end or not is_prime(e):
        return False
    if not 1 < A < pk.n:
        return False
    rhs = powmod(A, e, pk.n) * powmod(pk.S, v, pk.n) * _attr_product(pk, values) % pk.n
    return rhs == pk.Z


def credential_values(cred: ContractCredential) -> dict[str, int]:
    values = {name: encode_attr(val) for name, val in cred.attrs.items()}
    values[MASTER_SECRET] = cred.master_secret
    values[REV_INDEX] = cred.rev_index_prime
    return values


def complete_credential(
    pre: PreCredential,
    v_prime: int,
    ms: int,
    attrs: dict[str, str],
    rev_index_prime: int,
    pk: IssuerPublicKey,
) -> tuple[int, int, int]:
    """Unblind v and check the CL equation; returns (A, e, v)."""
    v = v_prime + pre.v_dprime
    values = {name: encode_attr(val) for name, val in attrs.items()}
    values[MASTER_SECRET] = ms
    values[REV_INDEX] = rev_index_prime
    if not verify_signature(pk, pre.A, pre.e, v, values):
        raise InvalidSignature("CL signature does not verify")
    return pre.A, pre.e, v


# -- accumulator -------------------------------------------------------------


def acc_add(registry: RevocationRegistryState, e: int) -> RevocationRegistryState:
    if not is_prime(e):
        raise ValueError("accumulated elements must be prime")
    if e in registry.active_set():
        raise ValueError("element already accumulated")
    value = powmod(registry.value, e, registry.acc_modulus)
    return _append(registry, "add", e, value)


def acc_revoke(registry: RevocationRegistryState, e: int, sk: IssuerSecretKey) -> RevocationRegistryState:
    if e not in registry.active_set():
        raise UnknownElement("element is not in the active set")
    value = powmod(registry.value, int(gmpy2.invert(e, sk.order)), registry.acc_modulus)
    return _append(registry, "remove", e, value)


def _append(registry: RevocationRegistryState, op: str, e: int, value: int) -> RevocationRegistryState:
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


def witness_update(w: int, own_e: int, deltas, modulus: int) -> int:
    for d in deltas:
        if d.element == own_e:
            if d.op == "remove":
                raise Revoked("own element was removed from the accumulator")
            continue
        if d.op == "add":
            w = powmod(w, d.element, modulus)
        else:
            g, a, b = gmpy2.gcdext(own_e, d.element)
            if g != 1:
                raise ValueError("accumulated elements must be coprime")
            w = powmod(w, int(b), modulus) * powmod(d.value, int(a), modulus) % modulus
    return w


def witness_valid(w: int, e: int, value: int, modulus: int) -> bool:
    return powmod(w, e, modulus) == value


# -- presentation ------------------------------------------------------------


def _challenge_input(req: ProofRequest, parts: tuple) -> bytes:
    return sha256(encode(req) + encode(parts))


def create_presentation(
    cred: ContractCredential,
    req: ProofRequest,
    registry: RevocationRegistryState,
    pk: IssuerPublicKey,
    rng: Rng,
) -> Presentation:
    prm = params_of(pk)
    version = req.version_for(cred.cred_def_id)
    if version is None:
        raise ValueError("proof request does not accept this credential definition")
    if cred.witness_version != version:
        raise StaleWitness(f"witness at version {cred.witness_version}, request wants {version}")
    V = registry.value_at(version)
    reveal = tuple(sorted(req.requested_reveal))
    if not set(reveal) <= set(cred.attrs):
        raise ValueError("requested attributes are not in the credential")
    n, S = pk.n, pk.S
    values = credential_values(cred)
    hidden = [a for a in pk.attr_names if a not in reveal]
    g, h = registry.commit_g, registry.commit_h

    while True:
        r = rng.bits(prm.l_r)
        A_prime = cred.A * powmod(S, r, n) % n
        v_prime = cred.v - cred.e * r
        e_prime = cred.e - prm.e_start

        e_t = rng.bits(prm.l_e_tilde)
        v_t = rng.bits(prm.l_v_tilde)
        m_t = {a: rng.bits(prm.l_m_tilde) for a in hidden}
        T = powmod(A_prime, e_t, n) * powmod(S, v_t, n) * _attr_product(pk, m_t) % n

        # non-revocation: C_e = g^e h^r1, C_w = w h^r2, C_r = g^r2 h^r3
        e_rev, w = cred.rev_index_prime, cred.rev_witness
        r1, r2, r3 = rng.bits(prm.l_n), rng.bits(prm.l_n), rng.bits(prm.l_n)
        d1, d2 = e_rev * r2, e_rev * r3
        C_e = powmod(g, e_rev, n) * powmod(h, r1, n) % n
        C_w = w * powmod(h, r2, n) % n
        C_r = powmod(g, r2, n) * powmod(h, r3, n) % n
        r_bits = prm.l_n + prm.l_statzk + prm.l_h
        d_bits = prm.l_n + prm.l_m + prm.l_statzk + prm.l_h
        r1_t, r2_t, r3_t = rng.bits(r_bits), rng.bits(r_bits), rng.bits(r_bits)
        d1_t, d2_t = rng.bits(d_bits), rng.bits(d_bits)
        e_rev_t = m_t[REV_INDEX]
        T1 = powmod(g, e_rev_t, n) * powmod(h, r1_t, n) % n
        T2 = powmod(g, r2_t, n) * powmod(h, r3_t, n) % n
        T3 = powmod(C_r, e_rev_t, n) * powmod(g, -d1_t, n) * powmod(h, -d2_t, n) % n
        T4 = powmod(C_w, e_rev_t, n) * powmod(h, -d1_t, n) % n

        revealed = {a: cred.attrs[a] for a in reveal}
        cih = _challenge_input(
            req, (cred.cred_def_id, version, V, A_prime, C_e, C_w, C_r, T, T1, T2, T3, T4, tuple(sorted(revealed.items())))
        )
        c = _hash_int(DOMAIN_PRESENT, cih)
        v_hat = v_t + c * v_prime
        if v_hat < 0:
            continue
        m_hat = {a: m_t[a] + c * values[a] for a in hidden}
        nonrev = NonRevocationProof(
            C_e, C_w, C_r, r1_t + c * r1, r2_t + c * r2, r3_t + c * r3, d1_t + c * d1, d2_t + c * d2
        )
        return Presentation(
            cred_def_id=cred.cred_def_id,
            registry_version=version,
            A_prime=A_prime,
            e_hat=e_t + c * e_prime,
            v_hat=v_hat,
            m_hat=m_hat,
            revealed=revealed,
            nonrev=nonrev,
            challenge=c,
            challenge_input_hash=cih,
        )


def verify_presentation(
    pres: Presentation,
    req: ProofRequest,
    pk: IssuerPublicKey,
    registry: RevocationRegistryState,
    acc_value: int | None = None,
) -> bool:
    try:
        return _verify_presentation(pres, req, pk, registry, acc_value)
    except (ValueError, ZeroDivisionError, KeyError, TypeError, AttributeError):
        return False


def _verify_presentation(pres, req, pk, registry, acc_value) -> bool:
    prm = params_of(pk)
    n = pk.n
    version = req.version_for(pres.cred_def_id)
    if version is None or pres.registry_version != version:
        return False
    if registry.cred_def_id != pres.cred_def_id or registry.acc_modulus != n:
        return False
    V = registry.value_at(version) if acc_value is None else acc_value
    if set(pres.revealed) != set(req.requested_reveal):
        return False
    if set(pres.revealed) & set(RESERVED_ATTRS):
        return False
    hidden = [a for a in pk.attr_names if a not in pres.revealed]
    if set(pres.m_hat) != set(hidden):
        return False
    if not 1 < pres.A_prime < n:
        return False
    if pres.e_hat.bit_length() > prm.l_e_tilde + 1:
        return False
    if any(m.bit_length() > prm.l_m_tilde + 1 for m in pres.m_hat.values()):
        return False
    c = pres.challenge
    if c.bit_length() > prm.l_h:
        return False

    revealed_values = {a: encode_attr(v) for a, v in pres.revealed.items()}
    denom = powmod(pres.A_prime, prm.e_start, n) * _attr_product(pk, revealed_values) % n
    base = pk.Z * int(gmpy2.invert(denom, n)) % n
    T = (
        powmod(base, -c, n)
        * powmod(pres.A_prime, pres.e_hat, n)
        * powmod(pk.S, pres.v_hat, n)
        * _attr_product(pk, pres.m_hat)
    ) % n

    nr = pres.nonrev
    g, h = registry.commit_g, registry.commit_h
    for x in (nr.C_e, nr.C_w, nr.C_r):
        if not 1 < x < n:
            return False
    e_hat = pres.m_hat[REV_INDEX]
    T1 = powmod(nr.C_e, -c, n) * powmod(g, e_hat, n) * powmod(h, nr.r1_hat, n) % n
    T2 = powmod(nr.C_r, -c, n) * powmod(g, nr.r2_hat, n) * powmod(h, nr.r3_hat, n) % n
    T3 = powmod(nr.C_r, e_hat, n) * powmod(g, -nr.d1_hat, n) * powmod(h, -nr.d2_hat, n) % n
    T4 = powmod(V, -c, n) * powmod(nr.C_w, e_hat, n) * powmod(h, -nr.d1_hat, n) % n

    cih = _challenge_input(
        req,
        (
            pres.cred_def_id,
            version,
            V,
            pres.A_prime,
            nr.C_e,
            nr.C_w,
            nr.C_r,
            T,
            T1,
            T2,
            T3,
            T4,
            tuple(sorted(pres.revealed.items())),
        ),
    )
    if cih != pres.challenge_input_hash:
        return False
    return c == _hash_int(DOMAIN_PRESENT, cih)
