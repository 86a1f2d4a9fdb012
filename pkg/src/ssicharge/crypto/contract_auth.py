"""Billing token binding a charge session to a contract.

The EV MACs ``H(proof request) | contract_id | timestamp`` under its
symmetric contract key and encrypts the result for its EMSP. Only the EMSP
can open it, and only the matching contract key verifies the tag.
"""

from __future__ import annotations

from collections.abc import Mapping, MutableSet

from ..codec import CodecError
from ..errors import BadTag, DecryptFailed, Expired, Replayed
from .backend import CryptoBackend
from .types import ContractAuthData, ContractCredential, sha256

DEFAULT_WINDOW = 86400


def auth_message(req_hash: bytes, contract_id: bytes, timestamp: int) -> bytes:
    return req_hash + contract_id + timestamp.to_bytes(8, "big")


def make_contract_auth(
    backend: CryptoBackend,
    cred: ContractCredential,
    req_bytes: bytes,
    now: int,
    emsp_enc_pk: bytes,
) -> tuple[ContractAuthData, bytes]:
    req_hash = sha256(req_bytes)
    tag = backend.hmac_tag(cred.contract_key, auth_message(req_hash, cred.contract_id, now))
    data = ContractAuthData(cred.contract_id, now, tag)
    return data, backend.pk_encrypt(emsp_enc_pk, data.to_bytes())


def open_contract_auth(backend: CryptoBackend, emsp_enc_sk: bytes, blob: bytes) -> ContractAuthData:
    plain = backend.pk_decrypt(emsp_enc_sk, blob)
    try:
        return ContractAuthData.from_bytes(plain)
    except CodecError as exc:
        raise DecryptFailed(f"garbled contract auth data: {exc}") from None


def check_contract_auth(
    backend: CryptoBackend,
    emsp_enc_sk: bytes,
    contract_keys: Mapping[bytes, bytes],
    blob: bytes,
    req_hash: bytes,
    now: int,
    seen: MutableSet,
    window: int = DEFAULT_WINDOW,
) -> ContractAuthData:
    """Return the opened token if it is authentic, fresh and unseen.

    ``seen`` is updated in place on success; it is keyed by (contract_id, tag).
    """
    data = open_contract_auth(backend, emsp_enc_sk, blob)
    key = contract_keys.get(data.contract_id)
    if key is None:
        raise BadTag("unknown contract id")
    if not backend.hmac_verify(key, auth_message(req_hash, data.contract_id, data.timestamp), data.hmac_tag):
        raise BadTag("contract auth tag does not verify")
    if abs(now - data.timestamp) > window:
        raise Expired(f"timestamp {data.timestamp} outside +-{window}s of {now}")
    marker = (data.contract_id, data.hmac_tag)
    if marker in seen:
        raise Replayed("contract auth data already submitted")
    seen.add(marker)
    return data
