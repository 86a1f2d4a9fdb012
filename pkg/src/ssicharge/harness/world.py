"""A simulated deployment: ledger, bus, clock, actors and scripted steps.

Every step method runs the bus until it is quiet and returns a
:class:`StepResult`. Actor errors are recorded, never raised, so a scenario
always runs to the end.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass

from ..actors import REVEAL, ChargePoint, Cpo, Emsp, EvWallet, Steward, TraceEvent
from ..actors.messages import AUTHORIZED
from ..codec import CodecError, WireRecord, decode_envelope, tag_name
from ..crypto.backend import make_backend
from ..crypto.params import profile_bits
from ..crypto.rng import Rng
from ..errors import ScriptError, SsiChargeError
from ..ledger import STEWARD, DidRecord, Ledger
from .adversary import Adversary, make_adversary
from .bus import Bus, BusRecord, Clock, Packet

EMSP_IDS = ("EMSP-A", "EMSP-B", "EMSP-C", "EMSP-D")
OEM_ID = "OEM-1"
INTRUDER = "intruder"


@dataclass(frozen=True)
class StepResult:
    step: str
    ok: bool
    outcome: str
    detail: str = ""


@dataclass(frozen=True)
class MetricsSample:
    name: str
    src: str
    dst: str
    size: int
    ms: float


def _addresses(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(1, n + 1)]


class World:
    def __init__(
        self,
        seed: int = 0,
        backend: str = "symbolic",
        profile: str = "test",
        evs: int = 1,
        emsps: int = 1,
        cps: int = 1,
        cpos: int = 1,
        adversary: str | Adversary = "passive",
        adversary_rates: dict[str, float] | None = None,
        offline: tuple[str, ...] = (),
        metrics: bool = False,
    ):
        if not (1 <= emsps <= len(EMSP_IDS)) or min(evs, cps, cpos) < 0 or (cps and not cpos):
            raise ScriptError("unsupported actor counts")
        self.seed = seed
        self.rng = Rng(seed)
        self.backend = make_backend(backend, self.rng.child("crypto"))
        self.key_bits = profile_bits(profile)
        self.clock = Clock()
        self.records: list[WireRecord] = []
        self.events: list[TraceEvent] = []
        self.revealed: set[str] = set()
        self.collect_metrics = metrics
        self.metrics: list[MetricsSample] = []
        self._scopes: list[list[tuple[str, str, str, int]]] = []
        self.contracts: dict[tuple[str, str], bytes] = {}
        self.error_log: list[tuple[str, str]] = []
        self.actors: dict = {}

        steward_keys = self.backend.gen_did_keys()
        genesis = DidRecord(steward_keys.did, steward_keys.sig_pk, steward_keys.enc_pk, STEWARD, "steward", "steward")
        self.ledger = Ledger([genesis])
        self.steward = self._add(Steward("steward", self, steward_keys))

        oem_keys = self.backend.gen_did_keys()
        self.steward.trust_oem(OEM_ID, oem_keys.sig_pk, oem_keys.enc_pk)
        self.emsps: list[Emsp] = []
        for name, emsp_id in zip(_addresses("emsp", emsps), EMSP_IDS):
            psk = self.backend.random_bytes(32)
            self.steward.share_psk(emsp_id, psk)
            keys = self.backend.gen_did_keys()
            self.emsps.append(self._add(Emsp(name, self, keys, emsp_id, psk, "steward", self.key_bits)))
        self.cpos = [self._add(Cpo(name, self)) for name in _addresses("cpo", cpos)]
        self.cps: list[ChargePoint] = []
        for i, name in enumerate(_addresses("cp", cps)):
            cpo = self.cpos[i % len(self.cpos)].name
            self.cps.append(self._add(ChargePoint(name, self, cpo, f"location-{i + 1}")))
        self.evs: list[EvWallet] = []
        for name in _addresses("ev", evs):
            ev = EvWallet(name, self, OEM_ID, oem_keys, "steward", steward_keys.sig_pk, steward_keys.enc_pk)
            self.evs.append(self._add(ev))
        for name in offline:
            self.actor(name).relay_via = self.cps[0].name if self.cps else None

        if isinstance(adversary, str):
            adversary = make_adversary(
                adversary, self.rng.child("adversary"), tuple(sorted(self.actors)), **(adversary_rates or {})
            )
        self.adversary = adversary
        self.bus = Bus(self.clock, adversary, self._deliver, self._log)

    def _add(self, actor):
        self.actors[actor.name] = actor
        return actor

    def actor(self, name: str):
        try:
            return self.actors[name]
        except KeyError:
            raise ScriptError(f"no actor named {name!r}") from None

    # -- Context for actors -------------------------------------------------------------

    def now(self) -> int:
        return self.clock.now()

    def transmit(self, src: str, dst: str, data: bytes) -> None:
        if self._scopes:
            try:
                name = tag_name(decode_envelope(data).msg_type)
            except CodecError:
                name = "?"
            self._scopes[-1].append((name, src, dst, len(data)))
        self.bus.transmit(src, dst, data)

    def record(self, event: TraceEvent) -> None:
        self.events.append(event)
        self.records.append(event)

    # -- bus plumbing -----------------------------------------------------------------

    def _log(self, rec: BusRecord) -> None:
        self.records.append(rec)

    @contextmanager
    def _handler_scope(self):
        if not self.collect_metrics:
            yield
            return
        sent: list[tuple[str, str, str, int]] = []
        self._scopes.append(sent)
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = (time.perf_counter() - start) * 1000.0
            self._scopes.pop()
            self.metrics.extend(MetricsSample(n, s, d, size, elapsed) for n, s, d, size in sent)

    def _deliver(self, pkt: Packet) -> str | None:
        actor = self.actors.get(pkt.dst)
        if actor is None:
            return "NoSuchActor"
        try:
            with self._handler_scope():
                actor.receive(pkt.src, pkt.data)
        except SsiChargeError as exc:
            return self._fail(actor, pkt.src, exc.code)
        except CodecError:
            return self._fail(actor, pkt.src, "Malformed")
        return None

    def _fail(self, actor, src: str, code: str) -> str:
        actor.errors.append((self.now(), src, code))
        self.error_log.append((actor.name, code))
        return code

    def _initiate(self, fn, *args):
        """Run an actor's start method as a timed handler, then drain the bus."""
        with self._handler_scope():
            result = fn(*args)
        self.bus.run()
        return result

    def error_count(self) -> int:
        return len(self.error_log)

    # -- scripted steps ------------------------------------------------------------------

    def onboard(self, emsp_name: str) -> StepResult:
        emsp: Emsp = self.actor(emsp_name)
        before = self.error_count()
        try:
            self._initiate(emsp.start_onboarding)
        except SsiChargeError as exc:
            return StepResult(f"onboard {emsp_name}", False, exc.code)
        ok = emsp.onboarded and emsp.registry_id is not None
        return self._result(f"onboard {emsp_name}", ok, "Onboarded" if ok else "Incomplete", before)

    def provision(self, ev_name: str) -> StepResult:
        ev: EvWallet = self.actor(ev_name)
        before = self.error_count()
        self._initiate(ev.start_provisioning)
        ok = ev.prov_keys is not None and ev.prov_keys.did in self.ledger.state.dids
        return self._result(f"provision {ev_name}", ok, "Registered" if ok else "Incomplete", before)

    def contract(self, ev_name: str, emsp_name: str, attrs: dict[str, str] | None = None) -> StepResult:
        ev: EvWallet = self.actor(ev_name)
        emsp: Emsp = self.actor(emsp_name)
        step = f"contract {ev_name} {emsp_name}"
        if ev.prov_keys is None:
            return StepResult(step, False, "UnknownDid", "EV is not provisioned")
        try:
            self.contracts[(ev_name, emsp_name)] = emsp.register_contract(ev.prov_keys.did, attrs)
        except SsiChargeError as exc:
            return StepResult(step, False, exc.code, str(exc))
        return StepResult(step, True, "Registered", self.contracts[(ev_name, emsp_name)].hex())

    def install(self, ev_name: str, emsp_name: str) -> StepResult:
        ev: EvWallet = self.actor(ev_name)
        emsp: Emsp = self.actor(emsp_name)
        before = self.error_count()
        n = len(ev.credentials)
        try:
            self._initiate(ev.start_install, emsp_name)
        except SsiChargeError as exc:
            return StepResult(f"install {ev_name} {emsp_name}", False, exc.code)
        ok = len(ev.credentials) > n and ev.credentials[-1].cred_def_id == emsp.cred_def_id
        return self._result(f"install {ev_name} {emsp_name}", ok, "Installed" if ok else "Incomplete", before)

    def charge(self, ev_name: str, cp_name: str) -> StepResult:
        ev: EvWallet = self.actor(ev_name)
        self.actor(cp_name)
        before = self.error_count()
        session = self._initiate(ev.start_charge, cp_name)
        outcome = session.outcome if session.outcome != "InProgress" else "Incomplete"
        ok = outcome == AUTHORIZED
        return self._result(f"charge {ev_name} {cp_name}", ok, outcome, before, keep_outcome=True)

    def bill(self, cp_name: str) -> StepResult:
        cp: ChargePoint = self.actor(cp_name)
        before = self.error_count()
        pending = [s for s in cp.sessions.values() if s.state == "authorized" and not s.billed]
        self._initiate(cp.bill)
        states = [s.billed for s in pending]
        ok = all(b == "accepted" for b in states)
        if ok:
            outcome = "Accepted" if states else "NothingToBill"
        else:
            outcome = next((b.split(":", 1)[1] for b in states if b.startswith("rejected:")), "Incomplete")
        return self._result(f"bill {cp_name}", ok, outcome, before, keep_outcome=True)

    def revoke(self, ev_name: str, emsp_name: str) -> StepResult:
        emsp: Emsp = self.actor(emsp_name)
        contract_id = self.contracts.get((ev_name, emsp_name))
        step = f"revoke {ev_name} {emsp_name}"
        if contract_id is None:
            return StepResult(step, False, "NoContract")
        try:
            version = emsp.revoke(contract_id)
        except SsiChargeError as exc:
            return StepResult(step, False, exc.code, str(exc))
        return StepResult(step, True, "Revoked", f"registry version {version}")

    def advance(self, seconds: int) -> StepResult:
        self.clock.advance(seconds)
        return StepResult(f"advance {seconds}", True, "Advanced", str(self.now()))

    def reveal(self, name: str) -> StepResult:
        """Leak an actor's long-term keys to the adversary."""
        actor = self.actor(name)
        did = getattr(actor, "did", name)
        self.revealed.add(did)
        self.record(TraceEvent(REVEAL, "", did, "", b"", self.now()))
        return StepResult(f"reveal {name}", True, "Revealed", did)

    def impersonate_install(self, ev_name: str, emsp_name: str) -> StepResult:
        """Adversary with the EV's revealed keys runs credential installation."""
        ev: EvWallet = self.actor(ev_name)
        step = f"impersonate-install {ev_name} {emsp_name}"
        if ev.prov_keys is None or ev.prov_keys.did not in self.revealed:
            return StepResult(step, False, "ScriptError", "EV keys must be revealed first")
        intruder = self.actors.get(INTRUDER)
        if intruder is None:
            intruder = self._add(
                EvWallet(INTRUDER, self, ev.oem_id, ev.oem_keys, "steward", ev.steward_sig_pk, ev.steward_enc_pk)
            )
            intruder.trace_enabled = False
        intruder.prov_keys = ev.prov_keys
        before = self.error_count()
        n = len(intruder.credentials)
        self._initiate(intruder.start_install, emsp_name)
        ok = len(intruder.credentials) > n
        return self._result(step, ok, "Impersonated" if ok else "Incomplete", before)

    def _result(self, step: str, ok: bool, outcome: str, before: int, keep_outcome: bool = False) -> StepResult:
        errors = [f"{name}:{code}" for name, code in self.error_log[before:]]
        if not ok and errors and not keep_outcome:
            outcome = errors[0].split(":", 1)[1]
        return StepResult(step, ok, outcome, ", ".join(errors))

    # -- script interpreter ----------------------------------------------------------------

    STEPS = {
        "onboard": ("emsp",),
        "provision": ("ev",),
        "contract": ("ev", "emsp"),
        "install": ("ev", "emsp"),
        "charge": ("ev", "cp"),
        "bill": ("cp",),
        "revoke": ("ev", "emsp"),
        "advance": ("int",),
        "reveal": ("actor",),
        "impersonate-install": ("ev", "emsp"),
    }

    def parse_step(self, line: str) -> tuple[str, list]:
        """Check a script line against the step grammar and declared actors."""
        parts = line.split()
        if not parts:
            raise ScriptError("empty step")
        op, args = parts[0], parts[1:]
        kinds = self.STEPS.get(op)
        if kinds is None:
            raise ScriptError(f"unknown step {op!r}")
        if len(args) != len(kinds):
            raise ScriptError(f"{op} takes {len(kinds)} argument(s), got {len(args)}")
        out: list = []
        for kind, arg in zip(kinds, args):
            if kind == "int":
                try:
                    out.append(int(arg))
                except ValueError:
                    raise ScriptError(f"{op} needs an integer, got {arg!r}") from None
                continue
            actor = self.actor(arg)
            cls = {"ev": EvWallet, "emsp": Emsp, "cp": ChargePoint}.get(kind)
            if cls is not None and not isinstance(actor, cls):
                raise ScriptError(f"{op}: {arg!r} is not a {cls.__name__}")
            out.append(actor.name)
        return op, out

    def run_step(self, line: str) -> StepResult:
        op, args = self.parse_step(line)
        return getattr(self, op.replace("-", "_"))(*args)

    # -- export ----------------------------------------------------------------------------

    def export_trace(self) -> str:
        """Every bus record and trace event, codec-hex, one per line."""
        return "".join(r.to_bytes().hex() + "\n" for r in self.records)

    def bus_payloads(self) -> list[bytes]:
        return [r.data for r in self.records if isinstance(r, BusRecord) and r.kind == "send"]

