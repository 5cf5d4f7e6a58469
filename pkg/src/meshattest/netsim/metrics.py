"""Run metrics: byte accounting, per-period protocol health, attestation stats.

Byte counters are indexed by device id (row 0 = the operator) and traffic
phase; they count the accountable wire size of every transmitted/delivered
message, so totals match the serialized sizes exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .. import wire


@dataclass(slots=True)
class PeriodRecord:
    period: int
    start: float
    coverage: float
    false_positives: int
    completion: float | None          # seconds from period start to full coverage
    holders: int
    alive: int


@dataclass(slots=True)
class AttestationRecord:
    ts: int
    issue_time: float
    entry: int
    mode: str
    informative: bool
    complete_time: float | None = None   # all devices hold the full result
    res_time: float | None = None        # operator received the final report
    verdict: str | None = None
    accepted: bool | None = None


class Metrics:
    """Everything a run reports; convertible to long-format CSV rows."""

    def __init__(self, n: int, per_device_periods: bool = True):
        self.n = n
        self.bytes_sent = np.zeros((n + 1, wire.N_PHASES), dtype=np.int64)
        self.bytes_recv = np.zeros((n + 1, wire.N_PHASES), dtype=np.int64)
        self.msg_sent_by_type: dict[int, int] = {}
        self.msgs_by_period_phase: dict[tuple[int, int], int] = {}
        self.periods: list[PeriodRecord] = []
        self.attestations: dict[int, AttestationRecord] = {}
        self.le_samples: list[tuple[float, float, int]] = []
        self.first_fp_time: float | None = None
        self.recovery_requests: list[tuple[float, int]] = []
        self.rejected_msgs = 0
        self.compromised_acquisitions: list[tuple[float, int, str]] = []
        self.delivered_bytes = 0
        self.dropped_msgs = 0
        self._per_device_periods = per_device_periods
        self.period_device_bytes: dict[int, np.ndarray] = {}
        self._last_snapshot = None

    # -- recording ----------------------------------------------------------

    def grow(self) -> None:
        """Extend per-device counters for a late-enrolled device."""
        self.n += 1
        pad = np.zeros((1, wire.N_PHASES), dtype=np.int64)
        self.bytes_sent = np.vstack([self.bytes_sent, pad])
        self.bytes_recv = np.vstack([self.bytes_recv, pad])
        if self._last_snapshot is not None:
            self._last_snapshot = np.vstack([self._last_snapshot, pad])

    def count_sent(self, src: int, msg, period: int) -> None:
        phase = wire.PHASE_OF[msg.mtype]
        self.bytes_sent[src, phase] += msg.size
        self.msg_sent_by_type[msg.mtype] = self.msg_sent_by_type.get(msg.mtype, 0) + 1
        key = (period, phase)
        self.msgs_by_period_phase[key] = self.msgs_by_period_phase.get(key, 0) + 1

    def count_delivered(self, dst: int, msg) -> None:
        self.bytes_recv[dst, wire.PHASE_OF[msg.mtype]] += msg.size
        self.delivered_bytes += msg.size

    def snapshot_period_bytes(self, period: int) -> None:
        """Store per-device traffic (sent + received) attributable to one period."""
        if not self._per_device_periods:
            return
        total = self.bytes_sent + self.bytes_recv
        if self._last_snapshot is None:
            self.period_device_bytes[period] = total.copy()
        else:
            self.period_device_bytes[period] = total - self._last_snapshot
        self._last_snapshot = total.copy()

    # -- queries -------------------------------------------------------------

    def device_period_bytes(self, period: int, device: int,
                            phases=(wire.PHASE_HB,)) -> int:
        snap = self.period_device_bytes[period]
        return int(sum(snap[device, p] for p in phases))

    def heartbeat_msgs_in_period(self, period: int) -> int:
        return self.msgs_by_period_phase.get((period, wire.PHASE_HB), 0)

    def completion(self, period: int) -> float | None:
        for rec in self.periods:
            if rec.period == period:
                return rec.completion
        return None

    def total_bytes(self) -> int:
        return int(self.bytes_sent.sum())

    # -- export ---------------------------------------------------------------

    def to_rows(self, scenario: str, seed: int) -> list[tuple]:
        rows: list[tuple] = []

        def add(metric: str, time: float, value):
            rows.append((scenario, seed, metric, _fmt(time), _fmt(value)))

        for rec in self.periods:
            add(f"coverage[period={rec.period}]", rec.start, rec.coverage)
            add(f"false_positives[period={rec.period}]", rec.start, rec.false_positives)
            if rec.completion is not None:
                add(f"hb_completion[period={rec.period}]", rec.start, rec.completion)
        if self.first_fp_time is not None:
            add("first_false_positive_time", self.first_fp_time, self.first_fp_time)
        for mtype, count in sorted(self.msg_sent_by_type.items()):
            add(f"msgs_sent[{wire.TYPE_NAMES[mtype]}]", 0.0, count)
        for phase in range(wire.N_PHASES):
            add(f"bytes_sent[{wire.PHASE_NAMES[phase]}]", 0.0,
                int(self.bytes_sent[:, phase].sum()))
        for ts, rec in sorted(self.attestations.items()):
            if rec.complete_time is not None:
                add(f"att_complete[ts={ts}]", rec.issue_time,
                    rec.complete_time - rec.issue_time)
            if rec.res_time is not None:
                add(f"att_res[ts={ts}]", rec.issue_time, rec.res_time - rec.issue_time)
            if rec.verdict is not None:
                add(f"verdict[ts={ts}]", rec.res_time or 0.0, rec.verdict)
        for time, frac, leader in self.le_samples:
            add(f"le_agreement[leader={leader}]", time, frac)
        return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def write_csv(rows, fp) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(("scenario", "seed", "metric", "time", "value"))
    writer.writerows(rows)
