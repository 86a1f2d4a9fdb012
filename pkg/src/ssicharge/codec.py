"""Canonical tag-length-value encoding for protocol messages and crypto values.

Every value is written as ``tag (u16 BE) | length (u32 BE) | payload``.
Four reserved tags carry the primitive kinds; every other tag names a
record type registered in the tag table::

    0xFF01  unsigned integer, minimal big-endian magnitude (zero is empty)
    0xFF02  byte string
    0xFF03  UTF-8 string
    0xFF04  sequence of values
    other   tagged record: payload is the concatenation of its fields

Decoding is strict: trailing bytes, truncated headers, leading zero bytes in
integers, invalid UTF-8, unknown record tags and wrong field counts are all
rejected with :class:`Malformed`. Together with the minimal integer rule this
makes the encoding a bijection between values and byte strings.
"""

from __future__ import annotations

import dataclasses
import functools
import struct
import types
import typing
from dataclasses import dataclass
from typing import Any, ClassVar, Union

__all__ = [
    "CodecError",
    "Malformed",
    "UnknownTag",
    "Record",
    "WireValue",
    "WireRecord",
    "encode",
    "decode",
    "register_tag",
    "tag_name",
    "tag_fields",
    "tag_for",
    "registered_tags",
    "encode_envelope",
    "decode_envelope",
    "Envelope",
    "ENVELOPE_VERSION",
]

TAG_UINT = 0xFF01
TAG_BYTES = 0xFF02
TAG_TEXT = 0xFF03
TAG_SEQ = 0xFF04
TAG_ENVELOPE = 0xFE00

ENVELOPE_VERSION = 1
MAX_DEPTH = 64

_HEADER = struct.Struct(">HI")


class CodecError(ValueError):
    pass


class Malformed(CodecError):
    pass


class UnknownTag(CodecError):
    pass


@dataclass(frozen=True)
class Record:
    tag: int
    fields: tuple

    def __post_init__(self):
        if not isinstance(self.fields, tuple):
            object.__setattr__(self, "fields", tuple(self.fields))


WireValue = Union[int, bytes, str, tuple, Record]

# tag -> (name, field names)
_TAGS: dict[int, tuple[str, tuple[str, ...]]] = {}
_NAMES: dict[str, int] = {}


def register_tag(tag: int, name: str, fields: typing.Sequence[str]) -> None:
    if not 0 < tag < 0xFE00:
        raise ValueError(f"tag {tag:#06x} outside the record range")
    existing = _TAGS.get(tag)
    if existing is not None:
        if existing == (name, tuple(fields)):
            return
        raise ValueError(f"tag {tag:#06x} already registered as {existing[0]}")
    if name in _NAMES:
        raise ValueError(f"record name {name!r} already registered")
    _TAGS[tag] = (name, tuple(fields))
    _NAMES[name] = tag


def tag_name(tag: int) -> str:
    try:
        return _TAGS[tag][0]
    except KeyError:
        raise UnknownTag(f"unregistered tag {tag:#06x}") from None


def tag_fields(tag: int) -> tuple[str, ...]:
    try:
        return _TAGS[tag][1]
    except KeyError:
        raise UnknownTag(f"unregistered tag {tag:#06x}") from None


def tag_for(name: str) -> int:
    return _NAMES[name]


def registered_tags() -> dict[int, str]:
    return {tag: name for tag, (name, _) in sorted(_TAGS.items())}


# --------------------------------------------------------------------------
# encoding


def _tlv(tag: int, payload: bytes) -> bytes:
    if len(payload) > 0xFFFFFFFF:
        raise CodecError("payload exceeds 32-bit length field")
    return _HEADER.pack(tag, len(payload)) + payload


def _encode(value: Any, out: list, depth: int) -> None:
    if depth > MAX_DEPTH:
        raise CodecError("nesting too deep")
    if isinstance(value, bool):
        raise CodecError("booleans are not wire values; use 0/1")
    if isinstance(value, int):
        if value < 0:
            raise CodecError("integers must be non-negative")
        out.append(_tlv(TAG_UINT, value.to_bytes((value.bit_length() + 7) // 8, "big")))
    elif isinstance(value, (bytes, bytearray, memoryview)):
        out.append(_tlv(TAG_BYTES, bytes(value)))
    elif isinstance(value, str):
        out.append(_tlv(TAG_TEXT, value.encode("utf-8")))
    elif isinstance(value, (tuple, list)):
        parts: list = []
        for item in value:
            _encode(item, parts, depth + 1)
        out.append(_tlv(TAG_SEQ, b"".join(parts)))
    elif isinstance(value, Record):
        fields = tag_fields(value.tag)
        if len(fields) != len(value.fields):
            raise CodecError(
                f"{tag_name(value.tag)} expects {len(fields)} fields, got {len(value.fields)}"
            )
        parts = []
        for item in value.fields:
            _encode(item, parts, depth + 1)
        out.append(_tlv(value.tag, b"".join(parts)))
    elif isinstance(value, WireRecord):
        _encode(value.to_wire(), out, depth)
    else:
        raise CodecError(f"cannot encode {type(value).__name__}")


def encode(value: Any) -> bytes:
    """Encode a wire value (or a :class:`WireRecord`) to canonical bytes."""
    out: list[bytes] = []
    _encode(value, out, 0)
    return b"".join(out)


# --------------------------------------------------------------------------
# decoding


def _decode_at(buf: bytes, pos: int, end: int, depth: int) -> tuple[WireValue, int]:
    if depth > MAX_DEPTH:
        raise Malformed("nesting too deep")
    if end - pos < _HEADER.size:
        raise Malformed("truncated header")
    tag, length = _HEADER.unpack_from(buf, pos)
    start = pos + _HEADER.size
    stop = start + length
    if stop > end:
        raise Malformed("truncated payload")
    if tag == TAG_UINT:
        if length and buf[start] == 0:
            raise Malformed("non-minimal integer")
        return int.from_bytes(buf[start:stop], "big"), stop
    if tag == TAG_BYTES:
        return bytes(buf[start:stop]), stop
    if tag == TAG_TEXT:
        try:
            return bytes(buf[start:stop]).decode("utf-8"), stop
        except UnicodeDecodeError as exc:
            raise Malformed("invalid utf-8") from exc
    items = []
    cursor = start
    while cursor < stop:
        item, cursor = _decode_at(buf, cursor, stop, depth + 1)
        items.append(item)
    if tag == TAG_SEQ:
        return tuple(items), stop
    if tag not in _TAGS:
        raise Malformed(f"unknown record tag {tag:#06x}")
    if len(items) != len(_TAGS[tag][1]):
        raise Malformed(f"{_TAGS[tag][0]}: wrong field count")
    return Record(tag, tuple(items)), stop


def decode(data: bytes) -> WireValue:
    """Decode exactly one value; anything non-canonical raises :class:`Malformed`."""
    buf = bytes(data)
    value, pos = _decode_at(buf, 0, len(buf), 0)
    if pos != len(buf):
        raise Malformed("trailing bytes")
    return value


# --------------------------------------------------------------------------
# typed records


def _to_wire(value: Any) -> WireValue:
    if isinstance(value, WireRecord):
        return value.to_wire()
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, dict):
        pairs = [(_to_wire(k), _to_wire(v)) for k, v in value.items()]
        pairs.sort(key=lambda kv: encode(kv[0]))
        return tuple(pairs)
    if isinstance(value, (frozenset, set)):
        return tuple(sorted((_to_wire(v) for v in value), key=encode))
    if isinstance(value, (tuple, list)):
        return tuple(_to_wire(v) for v in value)
    return value


def _from_wire(tp: Any, value: WireValue) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is Union or origin is types.UnionType:
        # Optional[X] is carried as a zero- or one-element sequence
        inner = [a for a in args if a is not type(None)][0]
        if not isinstance(value, tuple) or len(value) > 1:
            raise Malformed("bad optional")
        return _from_wire(inner, value[0]) if value else None
    if origin is tuple:
        if not isinstance(value, tuple):
            raise Malformed("expected sequence")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_from_wire(args[0], v) for v in value)
        if len(args) != len(value):
            raise Malformed("wrong tuple arity")
        return tuple(_from_wire(a, v) for a, v in zip(args, value))
    if origin is frozenset:
        if not isinstance(value, tuple):
            raise Malformed("expected sequence")
        if list(value) != sorted(value, key=encode) or len(set(value)) != len(value):
            raise Malformed("set not in canonical order")
        return frozenset(_from_wire(args[0], v) for v in value)
    if origin is dict:
        if not isinstance(value, tuple):
            raise Malformed("expected sequence")
        out = {}
        keys = []
        for pair in value:
            if not isinstance(pair, tuple) or len(pair) != 2:
                raise Malformed("bad map entry")
            keys.append(encode(pair[0]))
            out[_from_wire(args[0], pair[0])] = _from_wire(args[1], pair[1])
        if keys != sorted(keys) or len(set(keys)) != len(keys):
            raise Malformed("map not in canonical order")
        return out
    if isinstance(tp, type) and issubclass(tp, WireRecord):
        return tp.from_wire(value)
    if tp is bool:
        if value not in (0, 1):
            raise Malformed("expected 0/1")
        return bool(value)
    if tp is int:
        if not isinstance(value, int):
            raise Malformed("expected integer")
        return value
    if tp is bytes:
        if not isinstance(value, bytes):
            raise Malformed("expected bytes")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise Malformed("expected string")
        return value
    raise TypeError(f"unsupported field type {tp!r}")


@functools.lru_cache(maxsize=None)
def _optional_fields(cls: type) -> frozenset[str]:
    hints = typing.get_type_hints(cls)
    out = set()
    for name, tp in hints.items():
        if typing.get_origin(tp) in (Union, types.UnionType) and type(None) in typing.get_args(tp):
            out.add(name)
    return frozenset(out)


class WireRecord:
    """Mixin for dataclasses that serialize as a tagged record.

    Subclasses set ``TAG``; field order is the dataclass field order. Supported
    field types are int, bytes, str, bool, Optional, tuple, frozenset, dict and
    nested WireRecords.
    """

    TAG: ClassVar[int]

    @classmethod
    def _register(cls) -> None:
        register_tag(cls.TAG, cls.__name__, [f.name for f in dataclasses.fields(cls)])

    def to_wire(self) -> Record:
        optional = _optional_fields(type(self))
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in optional:
                out.append(() if v is None else (_to_wire(v),))
            else:
                out.append(_to_wire(v))
        return Record(self.TAG, tuple(out))

    @classmethod
    def from_wire(cls, value: WireValue):
        if not isinstance(value, Record) or value.tag != cls.TAG:
            raise Malformed(f"expected {cls.__name__} record")
        hints = typing.get_type_hints(cls)
        fields = dataclasses.fields(cls)
        if len(fields) != len(value.fields):
            raise Malformed(f"{cls.__name__}: wrong field count")
        kwargs = {f.name: _from_wire(hints[f.name], v) for f, v in zip(fields, value.fields)}
        return cls(**kwargs)

    def to_bytes(self) -> bytes:
        return encode(self.to_wire())

    @classmethod
    def from_bytes(cls, data: bytes):
        return cls.from_wire(decode(data))


def wire_record(tag: int):
    """Class decorator: make a frozen dataclass and register its tag."""

    def wrap(cls):
        cls.TAG = tag
        cls = dataclass(frozen=True)(cls)
        cls._register()
        return cls

    return wrap


# --------------------------------------------------------------------------
# message envelope

register_tag(TAG_ENVELOPE - 1, "Envelope", ("version", "sender_hint", "payload"))
_ENVELOPE_RECORD = TAG_ENVELOPE - 1


@dataclass(frozen=True)
class Envelope:
    msg_type: int
    payload: Record
    sender_hint: str | None = None

    @property
    def name(self) -> str:
        return tag_name(self.msg_type)


def encode_envelope(payload: Record | WireRecord, sender_hint: str | None = None) -> bytes:
    rec = payload.to_wire() if isinstance(payload, WireRecord) else payload
    hint = (sender_hint,) if sender_hint is not None else ()
    return encode(Record(_ENVELOPE_RECORD, (ENVELOPE_VERSION, hint, rec)))


def decode_envelope(data: bytes) -> Envelope:
    value = decode(data)
    if not isinstance(value, Record) or value.tag != _ENVELOPE_RECORD:
        raise Malformed("not an envelope")
    version, hint, payload = value.fields
    if version != ENVELOPE_VERSION:
        raise Malformed(f"unsupported envelope version {version!r}")
    if not isinstance(hint, tuple) or len(hint) > 1 or (hint and not isinstance(hint[0], str)):
        raise Malformed("bad sender hint")
    if not isinstance(payload, Record):
        raise Malformed("envelope payload must be a record")
    return Envelope(payload.tag, payload, hint[0] if hint else None)
