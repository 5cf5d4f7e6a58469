"""Link delay model.

Point-to-point delivery over a contention-free half-duplex radio: a message
of ``size`` bytes occupies the sender's radio for ``size*8/throughput``; its
first bit reaches the receiver after a fixed base latency and reception then
occupies the receiver's radio for the same transmission time (concurrent with
the sender's).  Unloaded end-to-end delay is therefore
``base + size*8/throughput``; a busy receiver radio delays reception, which
is what serializes simultaneous uploads from several children.  The default
base latency is calibrated so a 1-byte message has exactly the measured
13.5 ms end-to-end delay at 35 kbps.  No PHY/MAC contention is modelled;
acceptance tolerances absorb that fidelity gap.
"""

from __future__ import annotations

from dataclasses import dataclass

MEASURED_THROUGHPUT = 35_000.0     # bits/s, application layer
MEASURED_MIN_E2E = 13.5e-3         # seconds, smallest message


def calibrated_base_latency(throughput: float = MEASURED_THROUGHPUT) -> float:
    return MEASURED_MIN_E2E - 8.0 / throughput


@dataclass(frozen=True, slots=True)
class DelayModel:
    base_latency: float
    throughput: float = MEASURED_THROUGHPUT

    @classmethod
    def default(cls, base_latency: float | None = None,
                throughput: float = MEASURED_THROUGHPUT) -> "DelayModel":
        if base_latency is None:
            base_latency = calibrated_base_latency(throughput)
        return cls(base_latency=base_latency, throughput=throughput)

    def tx_time(self, size: int) -> float:
        return size * 8.0 / self.throughput

    def end_to_end(self, size: int) -> float:
        """Unloaded delivery time from send start to handler dispatch."""
        return self.tx_time(size) + self.base_latency
