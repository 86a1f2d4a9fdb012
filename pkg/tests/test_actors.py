from __future__ import annotations

import dataclasses

import pytest

from ssicharge.actors import COMMIT, RUNNING
from ssicharge.actors.messages import (
    AUTHORIZED,
    CONTRACT_PROOF,
    EXTERNAL_PAYMENT,
    MESSAGE_BY_TAG,
    PNC_PKI,
    BillingForwardReq,
    GetCredOfferReq,
    GetCredOfferRes,
    RequestProofReq,
    RequestProofRes,
    ServiceDiscoveryReq,
    ServiceDiscoveryRes,
    ValidateContractProofReq,
    WriteVerinymReq,
    WriteVerinymRes,
)
from ssicharge.actors.steward import verinym_pop_input
from ssicharge.codec import decode_envelope, encode_envelope, tag_for
from ssicharge.errors import (
    AuthFailed,
    DecryptFailed,
    NonceMismatch,
    PopFailed,
    ProofInvalid,
    UnexpectedMessage,
    UnknownDid,
)
from ssicharge.harness.bus import BusRecord
from ssicharge.harness.properties import check_all, scan_secrets, wallet_secrets
from ssicharge.harness.world import World
from ssicharge.ledger import VERINYM

BACKENDS = ["symbolic", "concrete"]


def ready_world(backend: str = "symbolic", **kw) -> World:
    w = World(seed=kw.pop("seed", 3), backend=backend, **kw)
    for emsp in w.emsps:
        assert w.onboard(emsp.name).ok
    for ev in w.evs:
        assert w.provision(ev.name).ok
    return w


def installed_world(backend: str = "symbolic", **kw) -> World:
    w = ready_world(backend, **kw)
    for ev in w.evs:
        assert w.contract(ev.name, "emsp1").ok
        assert w.install(ev.name, "emsp1").ok
    return w


def sent(world: World, name: str, src: str | None = None, dst: str | None = None) -> list[BusRecord]:
    tag = tag_for(name)
    return [
        r
        for r in world.records
        if isinstance(r, BusRecord)
        and r.kind == "send"
        and decode_envelope(r.data).msg_type == tag
        and (src is None or r.src == src)
        and (dst is None or r.dst == dst)
    ]


def direct(world: World, dst: str, src: str, msg) -> list:
    """Hand a message straight to an actor; return the replies it queued."""
    world.bus.queue.clear()
    world.actor(dst).receive(src, encode_envelope(msg))
    out = []
    for pkt in list(world.bus.queue):
        env = decode_envelope(pkt.data)
        out.append(MESSAGE_BY_TAG[env.msg_type].from_wire(env.payload))
    world.bus.queue.clear()
    return out


# -- steward ------------------------------------------------------------------------


def test_verinym_onboarding_writes_record():
    w = ready_world()
    emsp = w.emsps[0]
    assert w.ledger.resolve_did(emsp.did).role == VERINYM
    assert emsp.cred_def_id in w.ledger.state.cred_defs
    kinds = [(e.kind, e.label) for e in w.events if e.label == "StewardVerinym"]
    assert kinds == [(RUNNING, "StewardVerinym"), (COMMIT, "StewardVerinym")]


def test_replayed_verinym_request_rejected():
    w = ready_world()
    records = sent(w, "WriteVerinymReq", src="emsp1")
    assert len(records) == 2
    with pytest.raises(NonceMismatch):
        w.steward.receive("emsp1", records[1].data)


def test_wrong_psk_rejected():
    w = World(seed=4, emsps=1)
    emsp = w.emsps[0]
    emsp.psk = b"\x01" * 32
    res = w.onboard("emsp1")
    assert not res.ok and res.outcome == "AuthFailed"
    req = WriteVerinymReq(emsp.emsp_id, 0, None, b"", b"", b"\x00" * 32)
    with pytest.raises(AuthFailed):
        direct(w, "steward", "emsp1", req)
    with pytest.raises(AuthFailed):
        direct(w, "steward", "emsp1", dataclasses.replace(req, alias="EMSP-Unknown"))


def _challenge(w: World, emsp) -> bytes:
    (res,) = direct(w, "steward", emsp.name, emsp._signed_req(0, None, b"", b""))
    assert isinstance(res, WriteVerinymRes) and res.stage == 0
    return res.nonce_st


def test_stale_nonce_rejected():
    w = World(seed=5)
    emsp = w.emsps[0]
    _challenge(w, emsp)
    record = emsp.did_record()
    fake = b"\x07" * 16
    pop = w.backend.sign(emsp.keys.sig_sk, verinym_pop_input(fake, record))
    with pytest.raises(NonceMismatch):
        direct(w, "steward", "emsp1", emsp._signed_req(1, record, fake, pop))


def test_record_modified_after_pop_rejected():
    w = World(seed=6)
    emsp = w.emsps[0]
    nonce = _challenge(w, emsp)
    record = emsp.did_record()
    pop = w.backend.sign(emsp.keys.sig_sk, verinym_pop_input(nonce, record))
    swapped = dataclasses.replace(record, endpoint="elsewhere")
    with pytest.raises(PopFailed):
        direct(w, "steward", "emsp1", emsp._signed_req(1, swapped, nonce, pop))
    # a verinym record signed with some other key also fails possession
    other = w.backend.gen_did_keys()
    stolen = dataclasses.replace(record, sig_pk=other.sig_pk)
    with pytest.raises(PopFailed):
        direct(w, "steward", "emsp1", emsp._signed_req(1, stolen, nonce, pop))
    # the nonce is still good for the honest record
    direct(w, "steward", "emsp1", emsp._signed_req(1, record, nonce, pop))
    assert w.ledger.resolve_did(emsp.did).role == VERINYM


def test_unknown_oem_rejected():
    w = World(seed=7)
    ev = w.evs[0]
    ev.oem_id = "OEM-Other"
    res = w.provision("ev1")
    assert not res.ok and res.outcome == "UnknownDid"


def test_provisioning_response_replay_rejected():
    w = ready_world()
    (reg,) = sent(w, "RegisterProvisioningDid", src="ev1")
    with pytest.raises(NonceMismatch):
        w.steward.receive("ev1", reg.data)


# -- contracts and installation ---------------------------------------------------------


def test_contract_ids_distinct():
    w = ready_world()
    a = w.emsps[0].register_contract(w.evs[0].did)
    b = w.emsps[0].register_contract(w.evs[0].did)
    assert a != b and len(a) == 16


def test_contract_requires_known_client_did():
    w = ready_world()
    with pytest.raises(UnknownDid):
        w.emsps[0].register_contract("did:evssi:nobody")
    with pytest.raises(UnknownDid):
        w.emsps[0].register_contract(w.emsps[0].did)
    fresh = World(seed=8)
    assert fresh.contract("ev1", "emsp1").outcome == "UnknownDid"


def test_install_without_contract():
    w = ready_world()
    res = w.install("ev1", "emsp1")
    assert not res.ok and res.outcome == "NoContract"


@pytest.mark.parametrize("backend", BACKENDS)
def test_install_commits_both_directions(backend):
    w = installed_world(backend)
    labels = [(e.kind, e.actor) for e in w.events if e.label == "CredInstall"]
    ev, emsp = w.evs[0].did, w.emsps[0].did
    assert labels == [(RUNNING, ev), (COMMIT, emsp), (RUNNING, emsp), (COMMIT, ev)]
    assert all(v.ok for v in check_all(w.events).values())
    cred = w.evs[0].credentials[0]
    assert cred.contract_id == w.contracts[("ev1", "emsp1")]
    assert w.emsps[0].contracts[cred.contract_id].status == "active"


def test_offer_replayed_to_other_ev_is_undecryptable():
    w = ready_world(evs=2)
    for ev in ("ev1", "ev2"):
        w.contract(ev, "emsp1")
    assert w.install("ev1", "emsp1").ok
    (offer,) = sent(w, "GetCredOfferRes", src="emsp1", dst="ev1")
    w.evs[1].start_install("emsp1")
    w.bus.queue.clear()
    with pytest.raises(DecryptFailed):
        w.evs[1].receive("emsp1", offer.data)
    # replay to the original EV is refused by state
    with pytest.raises(UnexpectedMessage):
        w.evs[0].receive("emsp1", offer.data)


@pytest.mark.parametrize("backend", BACKENDS)
def test_tampered_attributes_fail_completion(backend):
    w = ready_world(backend)
    emsp = w.emsps[0]
    emsp.tamper_issue = lambda body: dataclasses.replace(body, attrs={**body.attrs, "tariff": "premium"})
    w.contract("ev1", "emsp1")
    res = w.install("ev1", "emsp1")
    assert not res.ok and res.outcome == "InvalidSignature"
    assert w.evs[0].credentials == []


def test_offer_signature_by_wrong_emsp():
    w = ready_world(emsps=2)
    w.contract("ev1", "emsp1")
    w.evs[0].start_install("emsp1")
    w.bus.queue.clear()
    # the offer is genuine, but the response claims to come from emsp2
    (res,) = direct(w, "emsp1", "ev1", GetCredOfferReq(w.evs[0].did))
    forged = GetCredOfferRes(w.emsps[1].did, res.blob)
    with pytest.raises(NonceMismatch):
        w.evs[0].receive("emsp1", encode_envelope(forged))


# -- discovery and charging --------------------------------------------------------------


@pytest.mark.parametrize("backend", BACKENDS)
def test_charge_authorizes(backend):
    w = installed_world(backend)
    res = w.charge("ev1", "cp1")
    assert res.ok and res.outcome == AUTHORIZED
    cp_session = next(iter(w.cps[0].sessions.values()))
    assert cp_session.emsp_id == "EMSP-A"
    commit = [e for e in w.events if e.kind == COMMIT and e.label == "ChargeAuth"]
    assert len(commit) == 1 and commit[0].peer == "anonymous"


def test_pnc_only_is_not_implemented():
    w = installed_world()
    w.evs[0].modes = (PNC_PKI,)
    res = w.charge("ev1", "cp1")
    assert not res.ok and res.outcome == "NotImplementedMode"


def test_external_payment_fallback():
    w = installed_world()
    w.cps[0].modes = (EXTERNAL_PAYMENT,)
    assert w.charge("ev1", "cp1").outcome == EXTERNAL_PAYMENT


def test_no_common_mode():
    w = installed_world()
    w.evs[0].modes = (CONTRACT_PROOF,)
    w.cps[0].modes = (PNC_PKI,)
    res = w.charge("ev1", "cp1")
    assert not res.ok and res.outcome == "NoCommonMode"
    assert ("cp1", "NoCommonMode") in w.error_log


def test_contract_proof_without_credential():
    w = ready_world()
    res = w.charge("ev1", "cp1")
    assert not res.ok


@pytest.mark.parametrize("backend", BACKENDS)
def test_presentation_replayed_under_new_nonce(backend):
    w = installed_world(backend)
    assert w.charge("ev1", "cp1").ok
    (old,) = sent(w, "ValidateContractProofReq", src="ev1")
    old_msg = ValidateContractProofReq.from_wire(decode_envelope(old.data).payload)
    (disc,) = direct(w, "cp1", "attacker", ServiceDiscoveryReq((CONTRACT_PROOF,)))
    assert isinstance(disc, ServiceDiscoveryRes)
    (req,) = direct(w, "cp1", "attacker", RequestProofReq(disc.session_id))
    assert isinstance(req, RequestProofRes)
    replay = dataclasses.replace(old_msg, session_id=disc.session_id)
    with pytest.raises(ProofInvalid):
        direct(w, "cp1", "attacker", replay)
    assert w.cps[0].sessions[disc.session_id].status == "ProofInvalid"


def test_validate_in_wrong_state():
    w = installed_world()
    w.charge("ev1", "cp1")
    (old,) = sent(w, "ValidateContractProofReq", src="ev1")
    with pytest.raises(UnexpectedMessage):
        w.cps[0].receive("ev1", old.data)


@pytest.mark.parametrize("backend", BACKENDS)
def test_revoked_credential_is_refused(backend):
    w = installed_world(backend)
    assert w.charge("ev1", "cp1").outcome == AUTHORIZED
    assert w.revoke("ev1", "emsp1").ok
    res = w.charge("ev1", "cp1")
    assert res.outcome == "RevokedCredential"
    assert w.revoke("ev1", "emsp1").outcome == "NoContract"


def test_witness_follows_other_installs():
    w = installed_world(evs=3)
    # ev1's witness dates from before ev2 and ev3 were added
    assert w.evs[0].credentials[0].witness_version < w.ledger.get_registry(w.emsps[0].registry_id).version
    assert w.charge("ev1", "cp1").ok
    assert w.revoke("ev2", "emsp1").ok
    assert w.charge("ev3", "cp1").ok
    assert w.charge("ev1", "cp1").ok


# -- billing -------------------------------------------------------------------------------


@pytest.mark.parametrize("backend", BACKENDS)
def test_billing_reaches_issuer(backend):
    w = installed_world(backend)
    w.charge("ev1", "cp1")
    res = w.bill("cp1")
    assert res.ok and res.outcome == "Accepted"
    (entry,) = w.emsps[0].billing
    assert entry.contract_id == w.contracts[("ev1", "emsp1")]
    assert all(v.ok for v in check_all(w.events).values())
    assert w.bill("cp1").outcome == "NothingToBill"


def test_location_stripped_before_emsp():
    w = installed_world()
    w.charge("ev1", "cp1")
    w.bill("cp1")
    (to_cpo,) = sent(w, "BillingForwardReq", src="cp1")
    (to_emsp,) = sent(w, "BillingForwardReq", src="cpo1")
    assert BillingForwardReq.from_wire(decode_envelope(to_cpo.data).payload).location == "location-1"
    assert BillingForwardReq.from_wire(decode_envelope(to_emsp.data).payload).location is None
    assert all(m.location is None for _, m in w.emsps[0].observed if isinstance(m, BillingForwardReq))


def test_billing_resubmission_is_replayed():
    w = installed_world()
    w.charge("ev1", "cp1")
    w.bill("cp1")
    sid = next(iter(w.cps[0].sessions))
    w.cpos[0].resubmit(sid)
    w.bus.run()
    assert ("emsp1", "Replayed") in w.error_log
    assert len(w.emsps[0].billing) == 1


def test_billing_misroute_rejected():
    w = installed_world(emsps=2)
    w.charge("ev1", "cp1")
    w.cpos[0].misroute["EMSP-A"] = "emsp2"
    res = w.bill("cp1")
    assert not res.ok and res.outcome == "UnknownEmsp"
    assert w.emsps[1].billing == [] and w.emsps[0].billing == []


def test_billing_after_window_expires():
    w = installed_world()
    w.charge("ev1", "cp1")
    w.advance(2 * 86400)
    res = w.bill("cp1")
    assert res.outcome == "Expired"


def test_billing_for_unknown_emsp_id():
    w = installed_world()
    w.charge("ev1", "cp1")
    s = next(iter(w.cps[0].sessions.values()))
    s.emsp_id = "EMSP-Z"
    res = w.bill("cp1")
    assert res.outcome == "UnknownEmsp"


# -- offline relay and secrecy ---------------------------------------------------------


@pytest.mark.parametrize("backend", BACKENDS)
def test_offline_ev_relays_through_cp(backend):
    w = installed_world(backend, offline=("ev1",))
    assert w.charge("ev1", "cp1").ok
    assert w.bill("cp1").ok
    ev_sends = [r for r in w.records if isinstance(r, BusRecord) and r.kind == "send" and r.src == "ev1"]
    assert ev_sends and {r.dst for r in ev_sends} == {"cp1"}
    assert all(v.ok for v in check_all(w.events).values())


@pytest.mark.parametrize("backend", BACKENDS)
def test_wallet_secrets_never_on_wire(backend):
    w = installed_world(backend, evs=2)
    for ev in ("ev1", "ev2"):
        w.charge(ev, "cp1")
    w.bill("cp1")
    for ev in w.evs:
        secrets = wallet_secrets(ev)
        assert len(secrets) == 5
        report = scan_secrets(w.bus_payloads(), secrets)
        assert report.ok, report.leaks


def test_secret_scan_catches_a_leaky_wallet():
    w = installed_world()
    w.evs[0].leak_contract_id = True
    w.charge("ev1", "cp1")
    report = scan_secrets(w.bus_payloads(), wallet_secrets(w.evs[0]))
    assert [name for name, _ in report.leaks] == ["contract_id[0]"]
