"""Trace-level security properties.

The agreement checker walks the event list once. Each Commit for the label
must be matched to an earlier, not yet consumed Running event that agrees on
the data set and on who talked to whom. Commits whose actor or named peer had
its long-term key revealed before the Commit are exempt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from ..actors.base import ANONYMOUS, COMMIT, LABELS, REVEAL, RUNNING, TraceEvent

Honesty = Callable[[str], bool]


@dataclass(frozen=True)
class Counterexample:
    commit: TraceEvent
    running: TraceEvent | None  # the already-consumed match, if the failure is a duplicate
    reason: str

    def describe(self) -> str:
        c = self.commit
        head = f"{self.reason}: Commit({c.label}) by {c.actor} peer {c.peer} at t={c.time} ds={c.ds[:8].hex()}"
        if self.running is not None:
            r = self.running
            head += f"; matches Running by {r.actor} at t={r.time}, already consumed"
        return head


@dataclass(frozen=True)
class Verdict:
    label: str
    ok: bool
    commits: int
    exempt: int
    counterexample: Counterexample | None = None

    def __bool__(self) -> bool:
        return self.ok


def _agrees(running: TraceEvent, commit: TraceEvent) -> bool:
    if running.ds != commit.ds or running.peer != commit.actor:
        return False
    return commit.peer == ANONYMOUS or running.actor == commit.peer


def check_injective_agreement(
    events: Sequence[TraceEvent], label: str, honest: Honesty | None = None
) -> Verdict:
    """Injective agreement on ``label`` over a recorded trace.

    ``honest`` is an extra predicate over party identifiers; a Commit involving
    a party it rejects is treated like one whose key was revealed.
    """
    revealed: set[str] = set()
    open_runs: list[TraceEvent] = []
    consumed: list[TraceEvent] = []
    commits = exempt = 0
    for ev in events:
        if ev.kind == REVEAL:
            revealed.add(ev.actor)
            continue
        if ev.label != label:
            continue
        if ev.kind == RUNNING:
            open_runs.append(ev)
            continue
        if ev.kind != COMMIT:
            continue
        commits += 1
        parties = [ev.actor] + ([] if ev.peer == ANONYMOUS else [ev.peer])
        if any(p in revealed or (honest is not None and not honest(p)) for p in parties):
            exempt += 1
            continue
        match = next((r for r in open_runs if _agrees(r, ev)), None)
        if match is not None:
            open_runs.remove(match)
            consumed.append(match)
            continue
        dup = next((r for r in consumed if _agrees(r, ev)), None)
        reason = "no unique prior Running" if dup is not None else "no prior Running"
        return Verdict(label, False, commits, exempt, Counterexample(ev, dup, reason))
    return Verdict(label, True, commits, exempt)


def check_all(events: Sequence[TraceEvent], labels: Iterable[str] = LABELS, honest: Honesty | None = None) -> dict[str, Verdict]:
    return {label: check_injective_agreement(events, label, honest) for label in labels}


def count_commits(events: Iterable[TraceEvent], label: str | None = None) -> int:
    return sum(1 for e in events if e.kind == COMMIT and (label is None or e.label == label))


@dataclass
class SecrecyReport:
    checked: int
    leaks: list[tuple[str, int]] = field(default_factory=list)  # (secret name, payload index)

    @property
    def ok(self) -> bool:
        return not self.leaks


def int_bytes(x: int) -> bytes:
    return x.to_bytes(max(1, (x.bit_length() + 7) // 8), "big")


def scan_secrets(payloads: Sequence[bytes], secrets: dict[str, bytes]) -> SecrecyReport:
    """Look for any secret as a raw substring of observed traffic."""
    report = SecrecyReport(len(payloads))
    for name, value in secrets.items():
        if len(value) < 8:
            continue  # too short to be meaningful as a substring
        for i, data in enumerate(payloads):
            if value in data:
                report.leaks.append((name, i))
                break
    return report


def wallet_secrets(ev) -> dict[str, bytes]:
    """Everything an EV wallet must never put on the wire in clear."""
    out: dict[str, bytes] = {}
    if ev.prov_keys is not None:
        out["prov_sig_sk"] = ev.prov_keys.sig_sk
        out["prov_enc_sk"] = ev.prov_keys.enc_sk
    for i, cred in enumerate(ev.credentials):
        out[f"master_secret[{i}]"] = int_bytes(cred.master_secret)
        out[f"contract_key[{i}]"] = cred.contract_key
        out[f"contract_id[{i}]"] = cred.contract_id
    return out
