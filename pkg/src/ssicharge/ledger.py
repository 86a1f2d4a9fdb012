"""In-memory verifiable data registry.

Holds DID records, credential schemas, credential definitions and revocation
registries under a two-level write permission model: stewards onboard
verinyms and provisioning DIDs, verinym holders publish issuer material.

State is copy-on-write. Writers take a single lock, build a new
:class:`LedgerState` and swap it in; readers grab whatever state is current
and never block. Every successful write is appended to a log that can be
replayed from genesis to reproduce the state bit for bit.
"""

from __future__ import annotations

import dataclasses
import threading
from collections.abc import Iterable
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .codec import CodecError, WireRecord, encode, wire_record
from .crypto.types import (
    RESERVED_ATTRS,
    IssuerPublicKey,
    RegistryDelta,
    RevocationRegistryState,
    registry_digest,
    sha256,
)
from .errors import (
    DanglingReference,
    DuplicateDid,
    InvalidObject,
    NotFound,
    PermissionDenied,
    VersionConflict,
)

STEWARD = "Steward"
VERINYM = "Verinym"
CLIENT = "Client"
ROLES = (STEWARD, VERINYM, CLIENT)

EMSP_ID_ATTR = "emsp_id"


@wire_record(0x0200)
class DidRecord(WireRecord):
    did: str
    sig_pk: bytes
    enc_pk: bytes
    role: str
    endpoint: str
    alias: str


@wire_record(0x0201)
class CredentialSchema(WireRecord):
    id: str
    name: str
    version: str
    attr_names: tuple[str, ...]


@wire_record(0x0202)
class CredentialDefinition(WireRecord):
    id: str
    schema_id: str
    issuer_did: str
    # lets a verifier route billing data to the issuer's DID record
    emsp_id: str
    public_key: IssuerPublicKey


@wire_record(0x0203)
class LogEntry(WireRecord):
    seq: int
    caller: str
    op: str
    obj: bytes


@wire_record(0x0204)
class StateDigest(WireRecord):
    version: int
    dids: tuple[DidRecord, ...]
    schemas: tuple[CredentialSchema, ...]
    cred_defs: tuple[CredentialDefinition, ...]
    registries: tuple[RevocationRegistryState, ...]


def schema_id_for(name: str, version: str, attr_names: Iterable[str]) -> str:
    return "schema:" + sha256(encode((name, version, tuple(attr_names))))[:16].hex()


def make_schema(name: str, version: str, attr_names: Iterable[str]) -> CredentialSchema:
    attrs = tuple(attr_names)
    return CredentialSchema(schema_id_for(name, version, attrs), name, version, attrs)


def cred_def_id_for(schema_id: str, issuer_did: str, emsp_id: str, public_key: IssuerPublicKey) -> str:
    return "creddef:" + sha256(encode((schema_id, issuer_did, emsp_id, public_key)))[:16].hex()


def make_cred_def(
    schema_id: str, issuer_did: str, emsp_id: str, public_key: IssuerPublicKey
) -> CredentialDefinition:
    return CredentialDefinition(
        cred_def_id_for(schema_id, issuer_did, emsp_id, public_key), schema_id, issuer_did, emsp_id, public_key
    )


@dataclass(frozen=True)
class LedgerState:
    version: int
    dids: Mapping[str, DidRecord]
    schemas: Mapping[str, CredentialSchema]
    cred_defs: Mapping[str, CredentialDefinition]
    registries: Mapping[str, RevocationRegistryState]

    @classmethod
    def empty(cls) -> LedgerState:
        return cls(0, MappingProxyType({}), MappingProxyType({}), MappingProxyType({}), MappingProxyType({}))

    def role_of(self, did: str) -> str | None:
        rec = self.dids.get(did)
        return rec.role if rec is not None else None

    def digest_record(self) -> StateDigest:
        return StateDigest(
            self.version,
            tuple(self.dids[k] for k in sorted(self.dids)),
            tuple(self.schemas[k] for k in sorted(self.schemas)),
            tuple(self.cred_defs[k] for k in sorted(self.cred_defs)),
            tuple(self.registries[k] for k in sorted(self.registries)),
        )

    def to_bytes(self) -> bytes:
        return self.digest_record().to_bytes()


def _with(state: LedgerState, field: str, key: str, value) -> LedgerState:
    table = dict(getattr(state, field))
    table[key] = value
    return dataclasses.replace(state, **{field: MappingProxyType(table), "version": state.version + 1})


class Ledger:
    def __init__(self, genesis: Iterable[DidRecord] = ()):
        self._lock = threading.Lock()
        self._genesis = tuple(genesis)
        state = LedgerState.empty()
        for rec in self._genesis:
            if rec.role != STEWARD:
                raise InvalidObject("genesis may only contain steward records")
            if rec.did in state.dids:
                raise DuplicateDid(rec.did)
            state = _with(state, "dids", rec.did, rec)
        self._state = state
        self._log: list[LogEntry] = []

    # -- reads ---------------------------------------------------------------

    @property
    def state(self) -> LedgerState:
        return self._state

    @property
    def version(self) -> int:
        return self._state.version

    @property
    def genesis(self) -> tuple[DidRecord, ...]:
        return self._genesis

    @property
    def log(self) -> tuple[LogEntry, ...]:
        return tuple(self._log)

    def read(self, key: str) -> tuple[WireRecord, int]:
        """Look up a DID, schema, cred_def or registry; returns (object, version)."""
        st = self._state
        for table in (st.dids, st.schemas, st.cred_defs, st.registries):
            if key in table:
                return table[key], st.version
        raise NotFound(key)

    def resolve_did(self, did: str) -> DidRecord:
        rec = self._state.dids.get(did)
        if rec is None:
            raise NotFound(did)
        return rec

    def did_at_endpoint(self, endpoint: str) -> DidRecord:
        for rec in self._state.dids.values():
            if rec.endpoint == endpoint:
                return rec
        raise NotFound(endpoint)

    def get_schema(self, schema_id: str) -> CredentialSchema:
        try:
            return self._state.schemas[schema_id]
        except KeyError:
            raise NotFound(schema_id) from None

    def get_cred_def(self, cred_def_id: str) -> CredentialDefinition:
        try:
            return self._state.cred_defs[cred_def_id]
        except KeyError:
            raise NotFound(cred_def_id) from None

    def get_registry(self, registry_id: str) -> RevocationRegistryState:
        try:
            return self._state.registries[registry_id]
        except KeyError:
            raise NotFound(registry_id) from None

    def registry_for_cred_def(self, cred_def_id: str) -> RevocationRegistryState:
        for reg in self._state.registries.values():
            if reg.cred_def_id == cred_def_id:
                return reg
        raise NotFound(f"no registry for {cred_def_id}")

    def cred_defs_for_emsp(self, emsp_id: str) -> list[CredentialDefinition]:
        return [cd for cd in self._state.cred_defs.values() if cd.emsp_id == emsp_id]

    def emsp_record(self, emsp_id: str) -> DidRecord:
        """DID record of the issuer behind a revealed emsp_id."""
        for cd in self.cred_defs_for_emsp(emsp_id):
            return self.resolve_did(cd.issuer_did)
        raise NotFound(f"no credential definition for emsp {emsp_id!r}")

    def get_registry_delta(self, registry_id: str, from_version: int) -> tuple[RegistryDelta, ...]:
        return self.get_registry(registry_id).deltas_since(from_version)

    # -- writes --------------------------------------------------------------

    def _commit(self, caller: str, op: str, obj: WireRecord, state: LedgerState) -> int:
        self._log.append(LogEntry(len(self._log) + 1, caller, op, obj.to_bytes()))
        self._state = state
        return state.version

    def write_did(self, caller: str, record: DidRecord) -> int:
        if record.role not in ROLES:
            raise InvalidObject(f"unknown role {record.role!r}")
        with self._lock:
            st = self._state
            existing = st.dids.get(record.did)
            if existing is not None:
                if caller != record.did:
                    raise DuplicateDid(record.did)
                if existing.role != record.role:
                    raise PermissionDenied("a DID cannot change its own role")
            else:
                if st.role_of(caller) != STEWARD:
                    raise PermissionDenied(f"{caller} may not create DID records")
                if record.role == STEWARD:
                    raise PermissionDenied("stewards are only created at genesis")
            return self._commit(caller, "write_did", record, _with(st, "dids", record.did, record))

    def _require_verinym(self, st: LedgerState, caller: str) -> None:
        if st.role_of(caller) not in (VERINYM, STEWARD):
            raise PermissionDenied(f"{caller} holds no write permission")

    def publish_schema(self, caller: str, schema: CredentialSchema) -> str:
        if schema.id != schema_id_for(schema.name, schema.version, schema.attr_names):
            raise InvalidObject("schema id is not the digest of its content")
        if EMSP_ID_ATTR not in schema.attr_names:
            raise InvalidObject(f"schema must contain {EMSP_ID_ATTR!r}")
        if set(schema.attr_names) & set(RESERVED_ATTRS) or len(set(schema.attr_names)) != len(schema.attr_names):
            raise InvalidObject("schema attribute names must be unique and not reserved")
        with self._lock:
            st = self._state
            self._require_verinym(st, caller)
            if schema.id in st.schemas:
                return schema.id
            self._commit(caller, "publish_schema", schema, _with(st, "schemas", schema.id, schema))
            return schema.id

    def publish_cred_def(self, caller: str, cred_def: CredentialDefinition) -> str:
        if cred_def.id != cred_def_id_for(cred_def.schema_id, cred_def.issuer_did, cred_def.emsp_id, cred_def.public_key):
            raise InvalidObject("cred_def id is not the digest of its content")
        with self._lock:
            st = self._state
            self._require_verinym(st, caller)
            if caller != cred_def.issuer_did:
                raise PermissionDenied("cred_def issuer must be the caller")
            schema = st.schemas.get(cred_def.schema_id)
            if schema is None:
                raise DanglingReference(f"schema {cred_def.schema_id} not on ledger")
            if cred_def.public_key.attr_names != RESERVED_ATTRS + schema.attr_names:
                raise InvalidObject("issuer key attribute slots do not match the schema")
            if cred_def.id in st.cred_defs:
                return cred_def.id
            self._commit(caller, "publish_cred_def", cred_def, _with(st, "cred_defs", cred_def.id, cred_def))
            return cred_def.id

    def publish_registry(self, caller: str, registry: RevocationRegistryState) -> str:
        expected = registry_digest(registry.cred_def_id, registry.acc_modulus, registry.u, registry.commit_g, registry.commit_h)
        if registry.registry_id != expected:
            raise InvalidObject("registry id is not the digest of its content")
        if registry.version != 0 or registry.deltas or registry.value != registry.u:
            raise InvalidObject("a registry must be published empty")
        with self._lock:
            st = self._state
            cd = st.cred_defs.get(registry.cred_def_id)
            if cd is None:
                raise DanglingReference(f"cred_def {registry.cred_def_id} not on ledger")
            if caller != cd.issuer_did:
                raise PermissionDenied("only the cred_def issuer may publish its registry")
            if registry.registry_id in st.registries:
                raise InvalidObject("registry already published")
            self._commit(caller, "publish_registry", registry, _with(st, "registries", registry.registry_id, registry))
            return registry.registry_id

    def update_accumulator(self, caller: str, registry_id: str, delta: RegistryDelta, base_version: int) -> int:
        """Append one delta; ``base_version`` must equal the current registry version."""
        with self._lock:
            st = self._state
            reg = st.registries.get(registry_id)
            if reg is None:
                raise NotFound(registry_id)
            if caller != st.cred_defs[reg.cred_def_id].issuer_did:
                raise PermissionDenied("only the issuer may update its accumulator")
            if base_version != reg.version:
                raise VersionConflict(f"base version {base_version}, registry at {reg.version}")
            if delta.version != reg.version + 1:
                raise InvalidObject("delta version must follow the registry version")
            active = reg.active_set()
            if delta.op == "add":
                if delta.element in active:
                    raise InvalidObject("element already active")
            elif delta.op == "remove":
                if delta.element not in active:
                    raise InvalidObject("element not active")
            else:
                raise InvalidObject(f"unknown delta op {delta.op!r}")
            updated = dataclasses.replace(reg, value=delta.value, version=delta.version, deltas=reg.deltas + (delta,))
            entry = UpdateAccumulator(registry_id, base_version, delta)
            return self._commit(caller, "update_accumulator", entry, _with(st, "registries", registry_id, updated))

    # -- audit ---------------------------------------------------------------

    @classmethod
    def replay(cls, genesis: Iterable[DidRecord], log: Iterable[LogEntry]) -> Ledger:
        """Rebuild a ledger by re-applying every logged write with its caller."""
        ledger = cls(genesis)
        for entry in log:
            obj = _LOG_TYPES[entry.op].from_bytes(entry.obj)
            if entry.op == "update_accumulator":
                ledger.update_accumulator(entry.caller, obj.registry_id, obj.delta, obj.base_version)
            else:
                getattr(ledger, entry.op)(entry.caller, obj)
        return ledger

    def dump_lines(self) -> list[str]:
        """Every stored object as codec hex, one per line."""
        st = self._state.digest_record()
        objs: list[WireRecord] = [*st.dids, *st.schemas, *st.cred_defs, *st.registries]
        return [o.to_bytes().hex() for o in objs]


@wire_record(0x0205)
class UpdateAccumulator(WireRecord):
    registry_id: str
    base_version: int
    delta: RegistryDelta


_LOG_TYPES: dict[str, type[WireRecord]] = {
    "write_did": DidRecord,
    "publish_schema": CredentialSchema,
    "publish_cred_def": CredentialDefinition,
    "publish_registry": RevocationRegistryState,
    "update_accumulator": UpdateAccumulator,
}


def dump_genesis(records: Iterable[DidRecord]) -> str:
    return "".join(r.to_bytes().hex() + "\n" for r in records)


def load_genesis(text: str) -> list[DidRecord]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(DidRecord.from_bytes(bytes.fromhex(line)))
        except (ValueError, CodecError) as exc:
            raise InvalidObject(f"genesis line {n}: {exc}") from None
    return out
