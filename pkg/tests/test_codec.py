from __future__ import annotations

import hashlib

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from oracles import ref_encode, tlv

from ssicharge.actors import messages
from ssicharge.codec import (
    Malformed,
    Record,
    UnknownTag,
    decode,
    decode_envelope,
    encode,
    encode_envelope,
    registered_tags,
    tag_for,
)
from ssicharge.ledger import DidRecord

primitives = st.one_of(
    st.integers(min_value=0, max_value=2**600),
    st.binary(max_size=40),
    st.text(max_size=20),
)
wire_values = st.recursive(primitives, lambda inner: st.lists(inner, max_size=5).map(tuple), max_leaves=25)

# a registered record with three fields, used for record-level properties
DID_TAG = DidRecord.TAG


def test_zero_has_empty_magnitude():
    assert encode(0) == bytes.fromhex("ff01 00000000".replace(" ", ""))


def test_string_example():
    assert encode("EMSP-A") == b"\xff\x03\x00\x00\x00\x06EMSP-A"


def test_integer_with_leading_zero_rejected():
    with pytest.raises(Malformed):
        decode(tlv(0xFF01, b"\x00\x01"))


def test_truncated_length_rejected():
    good = encode((1, "x"))
    for cut in range(1, len(good)):
        with pytest.raises(Malformed):
            decode(good[:cut])


def test_trailing_bytes_rejected():
    with pytest.raises(Malformed):
        decode(encode(5) + b"\x00")


def test_invalid_utf8_rejected():
    with pytest.raises(Malformed):
        decode(tlv(0xFF03, b"\xff\xfe"))


def test_unknown_tag_on_encode():
    with pytest.raises(UnknownTag):
        encode(Record(0x7777, (1,)))


def test_unknown_tag_on_decode():
    with pytest.raises(Malformed):
        decode(tlv(0x7777, b""))


def test_record_field_count_checked():
    with pytest.raises(Malformed):
        decode(tlv(DID_TAG, encode("only one field")))


def test_negative_and_bool_refused():
    with pytest.raises(ValueError):
        encode(-1)
    with pytest.raises(ValueError):
        encode(True)


@given(wire_values)
def test_matches_reference_encoder(v):
    assert encode(v) == ref_encode(v)


@given(wire_values)
def test_round_trip(v):
    assert decode(encode(v)) == v


@given(wire_values)
def test_encode_decode_encode_is_identity_on_bytes(v):
    b = encode(v)
    assert encode(decode(b)) == b


@settings(suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(wire_values, min_size=2, max_size=40, unique_by=repr))
def test_injective_over_corpus(values):
    # repr distinguishes 1 from b"\x01" and "1"; equal reprs are equal values
    seen: dict[bytes, object] = {}
    for v in values:
        b = encode(v)
        if b in seen:
            assert seen[b] == v
        seen[b] = v


@given(wire_values, st.data())
def test_single_byte_mutation_never_silently_equal(v, data):
    b = bytearray(encode(v))
    i = data.draw(st.integers(0, len(b) - 1))
    b[i] ^= data.draw(st.integers(1, 255))
    try:
        w = decode(bytes(b))
    except Malformed:
        return
    assert w != v
    # anything accepted is itself canonical
    assert encode(w) == bytes(b)


def test_every_message_type_has_one_tag():
    tags = registered_tags()
    names = [cls.__name__ for cls in messages.MESSAGE_TYPES]
    assert len(set(names)) == len(names)
    for cls in messages.MESSAGE_TYPES:
        assert tags[cls.TAG] == cls.__name__
        assert tag_for(cls.__name__) == cls.TAG
    assert len({cls.TAG for cls in messages.MESSAGE_TYPES}) == len(messages.MESSAGE_TYPES)


def test_published_tag_constants():
    assert messages.InitNymReq.TAG == 0x0001
    assert messages.BillingForwardReq.TAG == 0x0010
    assert messages.BillingAck.TAG == 0x0011


def test_envelope_round_trip_and_size():
    msg = messages.GetCredOfferReq("did:evssi:abc")
    data = encode_envelope(msg, sender_hint="did:evssi:abc")
    env = decode_envelope(data)
    assert env.msg_type == messages.GetCredOfferReq.TAG
    assert env.sender_hint == "did:evssi:abc"
    assert messages.GetCredOfferReq.from_wire(env.payload) == msg
    # reported size is the byte count
    assert len(data) == len(encode(decode(data)))


def test_optional_field_round_trip():
    a = messages.BillingForwardReq(b"s", 10, b"h" * 32, "EMSP-A", b"blob", None)
    b = messages.BillingForwardReq(b"s", 10, b"h" * 32, "EMSP-A", b"blob", "location-1")
    for m in (a, b):
        assert messages.BillingForwardReq.from_bytes(m.to_bytes()) == m
    assert a.to_bytes() != b.to_bytes()


def test_dict_fields_are_order_independent():
    d1 = {"b": b"2", "a": b"1"}
    d2 = {"a": b"1", "b": b"2"}
    r1 = messages.ValidateContractProofReq(b"s", _dummy_presentation(), b"", d1)
    r2 = messages.ValidateContractProofReq(b"s", _dummy_presentation(), b"", d2)
    assert r1.to_bytes() == r2.to_bytes()


def _dummy_presentation():
    from ssicharge.crypto.types import NonRevocationProof, Presentation

    return Presentation("cd", 0, 2, 3, 4, {}, {}, NonRevocationProof(1, 1, 1, 1, 1, 1, 1, 1), 5, b"")


def test_record_digest_stable_across_reencode():
    rec = DidRecord("did:x", b"s" * 32, b"e" * 32, "Client", "", "")
    b1 = rec.to_bytes()
    b2 = DidRecord.from_bytes(b1).to_bytes()
    assert hashlib.sha256(b1).digest() == hashlib.sha256(b2).digest()
