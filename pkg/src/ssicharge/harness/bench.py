"""Message size and handler latency benchmark.

Each row is one message type. Its time is the wall time of the handler that
produced the message (the sender's processing), and its size is the encoded
envelope length. Reference figures from the original prototype sit next to
the measured ones for comparison; they were taken on different hardware with
a different encoding, so only the order of magnitude is meaningful.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass, field

from ..crypto.params import profile_bits
from .world import World

INSTALL = "install"
CHARGE = "charge"
FLOWS = (INSTALL, CHARGE)

# message -> (flow, reference ms, reference bytes)
REFERENCE: dict[str, tuple[str, float, int]] = {
    "GetCredOfferReq": (INSTALL, 4.0, 106),
    "GetCredOfferRes": (INSTALL, 44.613, 6710),
    "CreateContractCredentialReq": (INSTALL, 134.429, 2185),
    "CreateContractCredentialRes": (INSTALL, 2603.864, 5961),
    "RequestProofReq": (CHARGE, 65.3, 58),
    "RequestProofRes": (CHARGE, 3.6, 266),
    "ValidateContractProofReq": (CHARGE, 282.302, 7281),
    "ValidateContractProofRes": (CHARGE, 136.3, 55),
}
CHARGE_AUTH_REFERENCE_MS = sum(ms for flow, ms, _ in REFERENCE.values() if flow == CHARGE)


@dataclass(frozen=True)
class BenchRow:
    message: str
    flow: str
    n: int
    mean_ms: float
    stdev_ms: float
    mean_bytes: float
    min_bytes: int
    max_bytes: int
    ref_ms: float
    ref_bytes: int


@dataclass
class BenchReport:
    profile: str
    key_bits: int
    repetitions: int
    seed: int
    setup_seconds: float
    rows: list[BenchRow] = field(default_factory=list)

    def row(self, message: str) -> BenchRow:
        return next(r for r in self.rows if r.message == message)

    def flow_total_ms(self, flow: str) -> float:
        return sum(r.mean_ms for r in self.rows if r.flow == flow)

    def flow_total_bytes(self, flow: str) -> float:
        return sum(r.mean_bytes for r in self.rows if r.flow == flow)

    @property
    def charge_auth_ms(self) -> float:
        return self.flow_total_ms(CHARGE)

    def table(self) -> str:
        head = ("message", "time [ms]", "ref [ms]", "size [bytes]", "ref [bytes]")
        lines = [head]
        for flow in FLOWS:
            rows = [r for r in self.rows if r.flow == flow]
            for r in rows:
                size = f"{r.mean_bytes:.0f}" if r.min_bytes == r.max_bytes else f"{r.mean_bytes:.1f} ({r.min_bytes}-{r.max_bytes})"
                lines.append((r.message, f"{r.mean_ms:.3f}", f"{r.ref_ms:.3f}", size, str(r.ref_bytes)))
            if rows:
                ref_ms = sum(r.ref_ms for r in rows)
                ref_b = sum(r.ref_bytes for r in rows)
                lines.append(
                    (f"{flow} total", f"{self.flow_total_ms(flow):.3f}", f"{ref_ms:.3f}",
                     f"{self.flow_total_bytes(flow):.0f}", str(ref_b))
                )
        widths = [max(len(line[i]) for line in lines) for i in range(len(head))]
        out = [f"# {self.key_bits}-bit keys, N={self.repetitions}, seed={self.seed}, setup {self.setup_seconds:.1f}s"]
        for k, line in enumerate(lines):
            out.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(line, widths))))
            if k == 0:
                out.append("  ".join("-" * w for w in widths))
        return "\n".join(out) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["message", "flow", "n", "mean_ms", "stdev_ms", "mean_bytes", "min_bytes", "max_bytes", "ref_ms", "ref_bytes"])
        for r in self.rows:
            w.writerow([r.message, r.flow, r.n, f"{r.mean_ms:.4f}", f"{r.stdev_ms:.4f}", f"{r.mean_bytes:.2f}",
                        r.min_bytes, r.max_bytes, r.ref_ms, r.ref_bytes])
        return buf.getvalue()


def _step(world: World, line: str) -> None:
    res = world.run_step(line)
    if not res.ok:
        raise RuntimeError(f"bench step {line!r} failed: {res.outcome} {res.detail}")


def bench(
    flows: tuple[str, ...] = FLOWS,
    repetitions: int = 100,
    profile: str = "2048",
    seed: int = 0,
    backend: str = "concrete",
) -> BenchReport:
    unknown = set(flows) - set(FLOWS)
    if unknown:
        raise ValueError(f"unknown flows {sorted(unknown)}")
    if backend != "concrete":
        raise ValueError("timings are only meaningful with the concrete backend")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    start = time.perf_counter()
    world = World(seed=seed, backend=backend, profile=profile, metrics=False)
    for line in ("onboard emsp1", "provision ev1"):
        _step(world, line)
    if CHARGE in flows:
        _step(world, "contract ev1 emsp1")
        _step(world, "install ev1 emsp1")
    report = BenchReport(profile, profile_bits(profile), repetitions, seed, time.perf_counter() - start)

    world.collect_metrics = True
    for _ in range(repetitions):
        if CHARGE in flows:
            _step(world, "charge ev1 cp1")
        if INSTALL in flows:
            world.collect_metrics = False
            _step(world, "contract ev1 emsp1")
            world.collect_metrics = True
            _step(world, "install ev1 emsp1")
    world.collect_metrics = False

    by_name: dict[str, list] = {}
    for m in world.metrics:
        by_name.setdefault(m.name, []).append(m)
    for name, (flow, ref_ms, ref_b) in REFERENCE.items():
        if flow not in flows:
            continue
        samples = by_name.get(name, [])
        if len(samples) != repetitions:
            raise RuntimeError(f"{name}: expected {repetitions} samples, got {len(samples)}")
        ms = [s.ms for s in samples]
        sizes = [s.size for s in samples]
        report.rows.append(
            BenchRow(
                name, flow, len(samples), statistics.fmean(ms), statistics.pstdev(ms),
                statistics.fmean(sizes), min(sizes), max(sizes), ref_ms, ref_b,
            )
        )
    return report
