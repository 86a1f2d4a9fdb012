"""Independent reference computations used to cross-check the implementation.

Nothing here imports the crypto module's arithmetic: big-integer work uses
Python's built-in ``pow`` and sympy, hashing uses hashlib directly, and HMAC
values are the published RFC 4231 vectors.
"""

from __future__ import annotations

import hashlib
import math

import sympy

# RFC 4231 HMAC-SHA-256 test cases 1, 2, 3, 4, 6, 7 (key, data, tag)
RFC4231_SHA256 = [
    (
        bytes([0x0B] * 20),
        b"Hi There",
        "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7",
    ),
    (
        b"Jefe",
        b"what do ya want for nothing?",
        "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843",
    ),
    (
        bytes([0xAA] * 20),
        bytes([0xDD] * 50),
        "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe",
    ),
    (
        bytes(range(1, 26)),
        bytes([0xCD] * 50),
        "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b",
    ),
    (
        bytes([0xAA] * 131),
        b"Test Using Larger Than Block-Size Key - Hash Key First",
        "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54",
    ),
    (
        bytes([0xAA] * 131),
        b"This is a test using a larger than block-size key and a larger than block-size data. "
        b"The key needs to be hashed before being used by the HMAC algorithm.",
        "9b09ffa71b942fcb27635fbcd5b0e944bfdc63644f0713938a7f51535c3a35e2",
    ),
]


def is_safe_prime(p: int) -> bool:
    return sympy.isprime(p) and sympy.isprime((p - 1) // 2)


def attr_int(value: str) -> int:
    return int.from_bytes(hashlib.sha256(value.encode("utf-8")).digest(), "big")


def accumulator_value(u: int, elements, modulus: int) -> int:
    """V = u^(product of active elements) mod n, computed from scratch."""
    exp = math.prod(elements)
    return pow(u, exp, modulus)


def witness_from_scratch(u: int, own: int, others, modulus: int) -> int:
    """Fresh witness for ``own``: u raised to every other active element."""
    return pow(u, math.prod(others), modulus)


def witness_by_root(value: int, own: int, order: int, modulus: int) -> int:
    """Witness computed with the trapdoor: V^(1/own) in the group of known order."""
    return pow(value, pow(own, -1, order), modulus)


def cl_equation(n: int, S: int, Z: int, R: dict[str, int], A: int, e: int, v: int, m: dict[str, int]) -> bool:
    rhs = pow(A, e, n) * pow(S, v, n) % n
    for name, val in m.items():
        rhs = rhs * pow(R[name], val, n) % n
    return rhs == Z


def blinded_commitment(n: int, S: int, R_ms: int, v_prime: int, ms: int) -> int:
    return pow(S, v_prime, n) * pow(R_ms, ms, n) % n


def is_qr_mod_safe_composite(x: int, p: int, q: int) -> bool:
    """Euler criterion in both prime factors."""
    return pow(x, (p - 1) // 2, p) == 1 and pow(x, (q - 1) // 2, q) == 1


def tlv(tag: int, payload: bytes) -> bytes:
    return tag.to_bytes(2, "big") + len(payload).to_bytes(4, "big") + payload


def ref_encode(value) -> bytes:
    """Reference encoder for primitive wire values (no records)."""
    if isinstance(value, int):
        return tlv(0xFF01, value.to_bytes((value.bit_length() + 7) // 8, "big"))
    if isinstance(value, bytes):
        return tlv(0xFF02, value)
    if isinstance(value, str):
        return tlv(0xFF03, value.encode("utf-8"))
    if isinstance(value, tuple):
        return tlv(0xFF04, b"".join(ref_encode(v) for v in value))
    raise TypeError(type(value))


def hmac_from_definition(key: bytes, msg: bytes) -> bytes:
    """H((K ^ opad) | H((K ^ ipad) | m)) with SHA-256, block size 64."""
    if len(key) > 64:
        key = hashlib.sha256(key).digest()
    key = key.ljust(64, b"\x00")
    inner = hashlib.sha256(bytes(k ^ 0x36 for k in key) + msg).digest()
    return hashlib.sha256(bytes(k ^ 0x5C for k in key) + inner).digest()
