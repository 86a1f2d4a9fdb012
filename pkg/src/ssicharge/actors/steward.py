from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..crypto.types import DidKeys
from ..errors import AuthFailed, BadSignature, NonceMismatch, PopFailed, UnexpectedMessage, UnknownDid
from ..ledger import VERINYM, DidRecord
from .base import COMMIT, Actor, Context, signing_input
from .messages import (
    InitNymBody,
    InitNymReq,
    InitNymRes,
    ProvDidBody,
    RegisterProvisioningDid,
    WriteVerinymReq,
    WriteVerinymRes,
)


@dataclass(frozen=True)
class OemAnchor:
    sig_pk: bytes
    enc_pk: bytes


def verinym_mac_input(req: WriteVerinymReq) -> bytes:
    return dataclasses.replace(req, mac=b"").to_bytes()


def verinym_res_mac_input(res: WriteVerinymRes) -> bytes:
    return dataclasses.replace(res, mac=b"").to_bytes()


def verinym_pop_input(nonce_st: bytes, record: DidRecord) -> bytes:
    return signing_input("verinym-pop", nonce_st, record)


def provdid_pop_input(nonce_st: bytes, record: DidRecord) -> bytes:
    return signing_input("provdid-pop", nonce_st, record)


def provdid_oem_input(record: DidRecord, nonce_ev: bytes, nonce_st: bytes) -> bytes:
    return signing_input("provdid-oem", record, nonce_ev, nonce_st)


def initnym_input(nonce_ev: bytes, nonce_st: bytes, oem_id: str) -> bytes:
    return signing_input("initnym", nonce_ev, nonce_st, oem_id)


class Steward(Actor):
    """First-level ledger writer: onboards EMSP verinyms and EV provisioning DIDs."""

    HANDLES = {
        WriteVerinymReq: "on_write_verinym",
        InitNymReq: "on_init_nym",
        RegisterProvisioningDid: "on_register_prov_did",
    }

    def __init__(self, name: str, ctx: Context, keys: DidKeys):
        super().__init__(name, ctx)
        self.keys = keys
        self.oems: dict[str, OemAnchor] = {}
        self.psks: dict[str, bytes] = {}
        self._verinym_nonces: dict[bytes, str] = {}
        self._prov_nonces: dict[bytes, tuple[str, bytes]] = {}

    @property
    def did(self) -> str:
        return self.keys.did

    def trust_oem(self, oem_id: str, sig_pk: bytes, enc_pk: bytes) -> None:
        self.oems[oem_id] = OemAnchor(sig_pk, enc_pk)

    def share_psk(self, alias: str, key: bytes) -> None:
        self.psks[alias] = key

    # -- verinym onboarding ------------------------------------------------------

    def _mac(self, alias: str, res: WriteVerinymRes) -> WriteVerinymRes:
        tag = self.backend.hmac_tag(self.psks[alias], verinym_res_mac_input(res))
        return WriteVerinymRes(res.stage, res.nonce_st, res.status, res.version, tag)

    def on_write_verinym(self, src: str, req: WriteVerinymReq) -> None:
        psk = self.psks.get(req.alias)
        if psk is None or not self.backend.hmac_verify(psk, verinym_mac_input(req), req.mac):
            raise AuthFailed(f"WriteVerinymReq from {req.alias!r} not authenticated")
        if req.stage == 0:
            nonce_st = self.fresh()
            self._verinym_nonces[nonce_st] = req.alias
            self.send(src, self._mac(req.alias, WriteVerinymRes(0, nonce_st, "challenge", 0, b"")))
            return
        if req.stage != 1 or req.record is None:
            raise UnexpectedMessage("malformed verinym stage")
        if self._verinym_nonces.get(req.nonce_st) != req.alias:
            raise NonceMismatch("steward nonce unknown or already used")
        record = req.record
        if record.role != VERINYM:
            raise PopFailed("record does not request the verinym role")
        if not self.backend.verify(record.sig_pk, verinym_pop_input(req.nonce_st, record), req.pop):
            raise PopFailed("proof of possession does not verify")
        del self._verinym_nonces[req.nonce_st]
        version = self.ledger.write_did(self.did, record)
        self.emit(COMMIT, "StewardVerinym", self.did, record.did, record.to_bytes())
        self.send(src, self._mac(req.alias, WriteVerinymRes(1, req.nonce_st, "ok", version, b"")))

    # -- provisioning DIDs --------------------------------------------------------

    def on_init_nym(self, src: str, req: InitNymReq) -> None:
        oem = self.oems.get(req.oem_id)
        if oem is None:
            raise UnknownDid(f"unknown OEM {req.oem_id!r}")
        nonce_st = self.fresh()
        self._prov_nonces[nonce_st] = (req.oem_id, req.nonce_ev)
        sig = self.backend.sign(self.keys.sig_sk, initnym_input(req.nonce_ev, nonce_st, req.oem_id))
        body = InitNymBody(self.did, req.nonce_ev, nonce_st, req.oem_id, sig)
        self.send(src, InitNymRes(self.seal(oem.enc_pk, body)))

    def on_register_prov_did(self, src: str, msg: RegisterProvisioningDid) -> None:
        body: ProvDidBody = self.open_sealed(self.keys.enc_sk, msg.blob, ProvDidBody)
        pending = self._prov_nonces.get(body.nonce_st)
        if pending is None or pending != (body.oem_id, body.nonce_ev):
            raise NonceMismatch("provisioning nonces do not match a pending InitNym")
        oem = self.oems[body.oem_id]
        record = body.record
        if not self.backend.verify(oem.sig_pk, provdid_oem_input(record, body.nonce_ev, body.nonce_st), body.oem_sig):
            raise BadSignature("OEM signature over provisioning DID does not verify")
        if not self.backend.verify(record.sig_pk, provdid_pop_input(body.nonce_st, record), body.pop):
            raise PopFailed("provisioning DID key possession not proven")
        del self._prov_nonces[body.nonce_st]
        self.ledger.write_did(self.did, record)
        ds = record.to_bytes() + body.nonce_ev + body.nonce_st
        self.emit(COMMIT, "ProvDid", self.did, record.did, ds)
