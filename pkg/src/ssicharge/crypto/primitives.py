"""Concrete DID keys, signatures, public-key encryption, HMAC and keystore.

Signatures are Ed25519; encryption is X25519 ECDH + HKDF-SHA256 +
ChaCha20-Poly1305 with an ephemeral sender key per message. When a sender
secret key is supplied the static-static DH output is mixed into the key
derivation as well, so only the holder of that key could have produced the
ciphertext.
"""

from __future__ import annotations

import base64
import hashlib
import hmac as _hmac

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from ..codec import encode
from ..errors import DecryptFailed
from .rng import Rng
from .types import DidKeys, Keystore, sha256

DID_PREFIX = "did:evssi:"
DID_LENGTH = len(DID_PREFIX) + 26

_MODE_ANON = 1
_MODE_AUTH = 2


def derive_did(sig_pk: bytes, enc_pk: bytes) -> str:
    digest = sha256(b"did" + sig_pk + enc_pk)[:16]
    return DID_PREFIX + base64.b32encode(digest).decode().rstrip("=").lower()


def gen_did_keys(seed: bytes | None = None, rng: Rng | None = None) -> DidKeys:
    if seed is None:
        seed = (rng or Rng()).bytes(32)
    if len(seed) < 32:
        raise ValueError("seed must be at least 32 bytes")
    sig_seed = sha256(b"ed25519" + seed)
    enc_seed = sha256(b"x25519" + seed)
    sig = Ed25519PrivateKey.from_private_bytes(sig_seed)
    enc = X25519PrivateKey.from_private_bytes(enc_seed)
    sig_pk = sig.public_key().public_bytes_raw()
    enc_pk = enc.public_key().public_bytes_raw()
    return DidKeys(derive_did(sig_pk, enc_pk), sig_seed, sig_pk, enc_seed, enc_pk)


def sign(sig_sk: bytes, msg: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(sig_sk).sign(msg)


def verify(sig_pk: bytes, msg: bytes, sig: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(sig_pk).verify(sig, msg)
        return True
    except Exception:
        return False


def _kdf(shared: bytes, context: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=b"ssicharge-pke" + context).derive(shared)


def pk_encrypt(receiver_pk: bytes, msg: bytes, rng: Rng, sender_sk: bytes | None = None) -> bytes:
    eph = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    eph_pk = eph.public_key().public_bytes_raw()
    receiver = X25519PublicKey.from_public_bytes(receiver_pk)
    shared = eph.exchange(receiver)
    header = bytes([_MODE_ANON]) + eph_pk
    if sender_sk is not None:
        static = X25519PrivateKey.from_private_bytes(sender_sk)
        shared += static.exchange(receiver)
        header = bytes([_MODE_AUTH]) + eph_pk + static.public_key().public_bytes_raw()
    key = _kdf(shared, header + receiver_pk)
    nonce = rng.bytes(12)
    return header + nonce + ChaCha20Poly1305(key).encrypt(nonce, msg, header)


def pk_decrypt(receiver_sk: bytes, blob: bytes) -> bytes:
    try:
        mode = blob[0]
        me = X25519PrivateKey.from_private_bytes(receiver_sk)
        eph_pk = blob[1:33]
        shared = me.exchange(X25519PublicKey.from_public_bytes(eph_pk))
        if mode == _MODE_ANON:
            header, rest = blob[:33], blob[33:]
        elif mode == _MODE_AUTH:
            sender_pk = blob[33:65]
            shared += me.exchange(X25519PublicKey.from_public_bytes(sender_pk))
            header, rest = blob[:65], blob[65:]
        else:
            raise DecryptFailed("unknown encryption mode")
        receiver_pk = me.public_key().public_bytes_raw()
        key = _kdf(shared, header + receiver_pk)
        nonce, ct = rest[:12], rest[12:]
        if len(nonce) != 12:
            raise DecryptFailed("truncated ciphertext")
        return ChaCha20Poly1305(key).decrypt(nonce, ct, header)
    except DecryptFailed:
        raise
    except (InvalidTag, ValueError, IndexError) as exc:
        raise DecryptFailed(str(exc) or type(exc).__name__) from None


def hmac_sha256(key: bytes, msg: bytes) -> bytes:
    return _hmac.new(key, msg, hashlib.sha256).digest()


def hmac_tag(key: bytes, msg: bytes) -> bytes:
    if len(key) != 32:
        raise ValueError("HMAC key must be 32 bytes")
    return hmac_sha256(key, msg)


def hmac_verify(key: bytes, msg: bytes, tag: bytes) -> bool:
    return _hmac.compare_digest(_hmac.new(key, msg, hashlib.sha256).digest(), tag)


# -- keystore ---------------------------------------------------------------

_SCRYPT = dict(n=2**14, r=8, p=1)


def _passphrase_key(passphrase: str, salt: bytes) -> bytes:
    return hashlib.scrypt(passphrase.encode(), salt=salt, dklen=32, **_SCRYPT)


def seal_keystore(role: str, secret: object, passphrase: str, rng: Rng) -> bytes:
    """Encrypt any codec-encodable secret under a passphrase-derived key."""
    salt = rng.bytes(16)
    nonce = rng.bytes(12)
    key = _passphrase_key(passphrase, salt)
    plain = encode(secret)
    ct = ChaCha20Poly1305(key).encrypt(nonce, plain, role.encode())
    return Keystore(1, role, salt, nonce, ct).to_bytes()


def open_keystore(blob: bytes, passphrase: str) -> tuple[str, bytes]:
    ks = Keystore.from_bytes(blob)
    key = _passphrase_key(passphrase, ks.salt)
    try:
        plain = ChaCha20Poly1305(key).decrypt(ks.nonce, ks.ciphertext, ks.role.encode())
    except InvalidTag:
        raise DecryptFailed("wrong passphrase or corrupted keystore") from None
    return ks.role, plain
