"""Deterministic discrete-event simulator driving the protocol state machines.

One scenario = one single-threaded event loop.  Events are processed in
(time, sequence) order; handlers may only schedule into the future, and all
randomness flows from the single seeded generator, so a (config, seed) pair
fixes the entire trace byte for byte.

The simulator owns the radios (half-duplex occupancy per device), the CPU
cost accounting (measured crypto runtimes charged as virtual time), the
adversary schedule, and all metrics.  It exposes the context surface the
device handlers call into (``send``, ``charge``, ``neighbors``,
note-callbacks), plus an oracle API used by scripted attack strategies.
"""

from __future__ import annotations

import heapq

import numpy as np

from .. import wire
from ..crypto import get_backend
from ..tee import OPERATOR_ID, Phase, Tee, checktime
from ..verifier import NetworkOperator
from .adversary import (
    Callback, CompromiseSoftware, DropLink, PhysicalCompromise, TakeOffline,
)
from .config import ScenarioConfig
from .delay import DelayModel
from .metrics import AttestationRecord, Metrics, PeriodRecord
from .topology import build_topology

_ARRIVE, _PROCESS, _TIMER, _ACTION = range(4)


class InvariantViolation(AssertionError):
    pass


class Simulation:
    """Event loop plus the context object seen by device handlers."""

    def __init__(self, cfg: ScenarioConfig, seed: int):
        cfg.validate()
        self.cfg = cfg
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.backend = get_backend(cfg.crypto)
        self.timecfg = cfg.timecfg()
        self.delay = DelayModel.default(cfg.base_latency, cfg.throughput)
        self.topology = build_topology(cfg, self.rng)
        self.operator, self.devices = NetworkOperator.enroll(
            cfg.n, self.rng, self.backend,
            t_attack=self.timecfg.t_attack, fw_size=cfg.fw_size)
        self.metrics = Metrics(cfg.n, per_device_periods=cfg.per_device_periods_on)
        self.clock = 0.0
        self.stop_time = cfg.end_time()
        self._seq = 0
        self._q: list[tuple] = []
        self._debug = cfg.debug_on
        size = cfg.n + 1
        self.radio_free = np.zeros(size)
        self.cpu_free = np.zeros(size)
        self.offline_until = np.zeros(size)
        self._offline_since = np.full(size, -1.0)
        self._dropped_links: dict[tuple[int, int], float] = {}
        self.compromised: set[int] = set()
        self.believed_leaders: set[int] = {1}
        self.trace: list[str] | None = [] if cfg.record_trace else None

        # context surface for device handlers
        self.le_enabled = cfg.le_enabled
        self.ke_retry_after = cfg.ke_retry_after
        self.req_debounce = 2.0
        self.fw_size = cfg.fw_size
        plan = cfg.attestation
        self.att_mode = plan.mode if plan else "tree"
        self.att_informative = plan.informative if plan else True
        self.att_s = plan.s if plan else 128
        self.att_freshness = (plan.freshness if plan and plan.freshness is not None
                              else self.timecfg.delta)
        self._att_margin = self._derive_att_margin(plan) if plan else 0.0

        # per-period bookkeeping; enrollment hands every device the heartbeat
        # of the first period, so period 1 is covered by construction
        self._ref_hb: dict[int, bytes] = {1: self.devices[1].hb_next.data}
        self._ref_leader: dict[int, int] = {1: 1}
        self._le_candidates: dict[int, tuple[int, Tee]] = {}
        self._holder_count = 0
        self._period_target = cfg.n
        self._completion: dict[int, float] = {}
        self._att_full: set[int] = set()

        # handler invocation scratch
        self._out: list[tuple[int, wire.Msg]] | None = None
        self._cost = 0.0

        # oracle hooks
        self._tap_types: set[int] | None = None
        self.tapped: list[tuple[float, wire.Msg, int | None, int]] = []
        self._corrupt: dict[int, int] = {}

        self._schedule_initial()

    # ------------------------------------------------------------------ setup

    def _derive_att_margin(self, plan) -> float:
        # time reserved for the final report to reach the operator
        n = self.cfg.n
        if plan.mode == "dynamic":
            max_report = (2 * n + plan.s) // 8 + 9
        elif plan.informative:
            max_report = n // 8 + 18
        else:
            max_report = 18
        return plan.collect_margin + 2 * self.delay.tx_time(max_report) + 1.0

    def _schedule_initial(self) -> None:
        delta = self.timecfg.delta
        self._push(delta, _TIMER, ("period", 2))
        if self.cfg.poll_interval:
            self._push(self.cfg.poll_interval, _TIMER, ("poll",))
        if self.topology.is_mobile:
            self._push(self.cfg.mobility_tick, _TIMER, ("mobility",))
        if self.cfg.agreement_sample:
            self._push(self.cfg.agreement_sample, _TIMER, ("agreement",))
        for action in self.cfg.adversary:
            self._push(action.time, _ACTION, action)
        if self.cfg.attestation:
            self._push(self.cfg.attestation.at_time, _ACTION, ("issue_att",))

    def _push(self, time: float, kind: int, data) -> None:
        self._seq += 1
        heapq.heappush(self._q, (time, self._seq, kind, data))

    # ------------------------------------------------------------- event loop

    def run(self) -> Metrics:
        q = self._q
        stop = self.stop_time
        while q:
            time, _seq, kind, data = heapq.heappop(q)
            if time > stop:
                break
            if self._debug and time < self.clock - 1e-9:
                raise InvariantViolation(
                    f"event time {time} precedes clock {self.clock}")
            self.clock = time
            if kind == _ARRIVE:
                self._on_arrive(*data)
            elif kind == _PROCESS:
                self._on_process(*data)
            elif kind == _TIMER:
                self._on_timer(data)
            else:
                self._on_action(data)
        if self.metrics.delivered_bytes != int(self.metrics.bytes_recv.sum()):
            raise InvariantViolation("delivered bytes do not match receive counters")
        return self.metrics

    # -------------------------------------------------------------- transport

    def _period_index(self, clock: float) -> int:
        return int(clock // self.timecfg.delta) + 1

    def is_offline(self, dev_id: int) -> bool:
        return self.offline_until[dev_id] > self.clock

    def _link_dropped(self, a: int, b: int) -> bool:
        if not self._dropped_links:
            return False
        key = (a, b) if a < b else (b, a)
        until = self._dropped_links.get(key)
        return until is not None and until > self.clock

    def _transmit(self, src: int | None, dst: int, msg: wire.Msg,
                  ready: float) -> None:
        tx = self.delay.tx_time(msg.size)
        if src is None:
            start = ready  # adversarial injection: no sender radio, no accounting
        else:
            start = max(ready, self.radio_free[src])
            self.radio_free[src] = start + tx
            self.metrics.count_sent(src, msg, self._period_index(start))
            if self.trace is not None:
                self.trace.append(
                    f"{start:.6f} SEND {wire.TYPE_NAMES[msg.mtype]} {src}->{dst} {msg.size}B")
        # first bit reaches the receiver after the base latency; reception
        # occupies the receiver's radio for the transmission time
        self._push(start + self.delay.base_latency, _ARRIVE, (msg, src, dst, tx))

    def _on_arrive(self, msg, src, dst, tx) -> None:
        if self.is_offline(dst) or (src is not None and self._link_dropped(src, dst)):
            self.metrics.dropped_msgs += 1
            return
        if self._corrupt.get(msg.mtype):
            self._corrupt[msg.mtype] -= 1
            msg = _flip_one_bit(msg)
        rx_start = max(self.clock, self.radio_free[dst])
        self.radio_free[dst] = rx_start + tx
        self._push(rx_start + tx, _PROCESS, (msg, src, dst))

    def _on_process(self, msg, src, dst) -> None:
        if self.is_offline(dst):
            self.metrics.dropped_msgs += 1
            return
        if self._tap_types is not None and msg.mtype in self._tap_types:
            self.tapped.append((self.clock, msg, src, dst))
        self.metrics.count_delivered(dst, msg)
        if self.trace is not None:
            self.trace.append(
                f"{self.clock:.6f} RECV {wire.TYPE_NAMES[msg.mtype]} {src}->{dst}")
        if dst == OPERATOR_ID:
            if msg.mtype == wire.MSG_RES:
                self._operator_receive(msg)
            return
        dev = self.devices[dst]
        mtype = msg.mtype
        if mtype == wire.MSG_NEW:
            self._invoke(dst, dev.on_msg_new, src)
        elif mtype == wire.MSG_REQ:
            self._invoke(dst, dev.on_msg_req, src, msg.body)
        elif mtype == wire.MSG_HB:
            self._invoke(dst, dev.on_msg_hb, src, msg.body)
        elif mtype in (wire.MSG_PK, wire.MSG_PK_REPLY):
            self._invoke(dst, dev.on_msg_pk, src, msg.body,
                         mtype == wire.MSG_PK_REPLY)
        elif mtype == wire.MSG_LE_REQ:
            self._invoke(dst, dev.on_msg_le_req, src, msg.body)
        elif mtype == wire.MSG_LE_HB:
            self._invoke(dst, dev.on_msg_le_hb, src, msg.body)
        elif mtype == wire.MSG_LEADER:
            self._invoke(dst, dev.on_msg_leader, src, msg.body)
        elif mtype == wire.MSG_V:
            self._invoke(dst, dev.on_attestation_request, msg.body)
        elif mtype == wire.MSG_ATT:
            self._invoke(dst, dev.on_msg_att, src, msg.body)
        elif mtype == wire.MSG_AGG:
            self._invoke(dst, dev.on_msg_agg, src, msg.body)

    def _invoke(self, dev_id: int, fn, *args) -> None:
        """Run one handler, then charge its compute cost and flush its sends."""
        outer_out, outer_cost = self._out, self._cost
        self._out, self._cost = [], 0.0
        try:
            fn(self, *args)
            cost = self._cost
            if cost > 0.0:
                start = max(self.clock, self.cpu_free[dev_id])
                done = start + cost
                self.cpu_free[dev_id] = done
            else:
                done = self.clock
            for dst, msg in self._out:
                self._transmit(dev_id, dst, msg, done)
        finally:
            self._out, self._cost = outer_out, outer_cost

    # ---------------------------------------------------- context for devices

    def neighbors(self, dev_id: int):
        return self.topology.neighbors(dev_id)

    def send(self, src: int, dst: int, msg: wire.Msg) -> None:
        self._out.append((dst, msg))

    def charge(self, dev_id: int, cost: float) -> None:
        self._cost += cost

    def schedule_att_timeout(self, dev_id: int, ts: int) -> None:
        """Give-up point for a device waiting on spanning-tree children.

        Timeouts are anchored to the session deadline and staggered by join
        time: devices that joined later (deeper in the tree) give up earlier,
        so a partial aggregate always has time to climb past every ancestor
        before that ancestor's own timeout.  With a fixed per-device timeout a
        single dead child would erase its whole branch from the report.
        """
        plan = self.cfg.attestation
        if plan is not None and plan.child_timeout is not None:
            fire = self.clock + plan.child_timeout
        else:
            deadline = ts + self.timecfg.t_attack - self._att_margin
            fire = max(self.clock + 0.05, deadline - 3.0 * (self.clock - ts))
        self._push(fire, _TIMER, ("att_timeout", dev_id, ts))

    def emit_recovery(self, dev_id: int) -> None:
        self.metrics.recovery_requests.append((self.clock, dev_id))

    def note_emission(self, dev_id: int, new_t: int, hb_next) -> None:
        period = self._period_index(self.clock)
        cur = self._ref_leader.get(period)
        if cur is None or dev_id < cur:
            self._ref_leader[period] = dev_id
            self._ref_hb[period] = hb_next.data
        self._holder_count += 1
        self._check_completion()

    def note_acquired(self, dev_id: int, via: str) -> None:
        dev = self.devices[dev_id]
        if dev.compromised:
            self.metrics.compromised_acquisitions.append((self.clock, dev_id, via))
        if via == "hb":
            self._holder_count += 1
            self._check_completion()
        elif via == "le_init":
            period = self._period_index(self.clock)
            best = self._le_candidates.get(period)
            if best is None or dev_id < best[0]:
                self._le_candidates[period] = (dev_id, dev)

    def _check_completion(self) -> None:
        period = self._period_index(self.clock)
        if (self._holder_count >= self._period_target
                and period not in self._completion):
            self._completion[period] = self.clock - self.timecfg.period_start(period)

    def note_rejected(self, dev_id: int, sender: int, mtype: int) -> None:
        self.metrics.rejected_msgs += 1

    def note_leader_belief(self, dev_id: int, value: int) -> None:
        if value == dev_id:
            self.believed_leaders.add(dev_id)
        else:
            self.believed_leaders.discard(dev_id)

    def note_att_join(self, dev_id: int, ts: int, report) -> None:
        self.note_att_progress(dev_id, ts, report)

    def note_att_progress(self, dev_id: int, ts: int, report) -> None:
        rec = self.metrics.attestations.get(ts)
        if rec is None:
            return
        count = report.count()
        if count is not None and count >= self.cfg.n:
            self._att_full.add(dev_id)
            if rec.complete_time is None and len(self._att_full) >= self.cfg.n:
                rec.complete_time = self.clock

    # ----------------------------------------------------------------- timers

    def _on_timer(self, data) -> None:
        kind = data[0]
        if kind == "period":
            self._on_period_start(data[1])
        elif kind == "le":
            self._on_le_phase(data[1])
        elif kind == "poll":
            self._on_poll()
        elif kind == "mobility":
            self._on_mobility()
        elif kind == "att_timeout":
            _, dev_id, ts = data
            dev = self.devices[dev_id]
            if not self.is_offline(dev_id):
                self._invoke(dev_id, dev.on_child_timeout, ts)
        elif kind == "agreement":
            self._sample_agreement()

    def _on_period_start(self, period: int) -> None:
        self._bookkeep_period(period - 1)
        self._holder_count = 0
        self._period_target = sum(
            1 for i in range(1, self.cfg.n + 1)
            if not self.is_offline(i) and not self.devices[i].compromised)
        tc = self.timecfg
        if self.le_enabled:
            self._push(tc.period_start(period) + tc.delta_hb, _TIMER, ("le", period))
        for leader_id in sorted(self.believed_leaders):
            if self.is_offline(leader_id):
                continue
            dev = self.devices[leader_id]
            self._invoke(leader_id, dev.leader_emit)
        nxt = tc.period_start(period + 1)
        if nxt <= self.stop_time:
            self._push(nxt, _TIMER, ("period", period + 1))

    def _bookkeep_period(self, period: int) -> None:
        if period < 1:
            return
        ref = self._ref_hb.get(period)
        if ref is None:
            cand = self._le_candidates.get(period)
            if cand is not None:
                ref = cand[1].hb_next.data
        holders = 0
        fps = 0
        alive = 0
        for i in range(1, self.cfg.n + 1):
            dev = self.devices[i]
            if dev.compromised or self.is_offline(i):
                continue
            alive += 1
            if ref is not None and dev.hb_next.data == ref:
                holders += 1
                if self._debug and not dev.is_ahead(self.clock - 1e-9, self.timecfg):
                    raise InvariantViolation(
                        f"device {i} holds the period-{period} heartbeat but its "
                        f"time pointer {dev.t} is not ahead at the boundary")
            else:
                fps += 1
        if self._debug:
            limit = period + 1
            for i in range(1, self.cfg.n + 1):
                if self.devices[i].t > limit:
                    raise InvariantViolation(
                        f"device {i} time pointer {self.devices[i].t} is more than "
                        f"one period ahead of {period}")
        coverage = holders / alive if alive else 0.0
        if fps and self.metrics.first_fp_time is None:
            self.metrics.first_fp_time = self.clock
        self.metrics.periods.append(PeriodRecord(
            period=period, start=self.timecfg.period_start(period),
            coverage=coverage, false_positives=fps,
            completion=self._completion.get(period), holders=holders, alive=alive))
        self.metrics.snapshot_period_bytes(period)

    def _on_le_phase(self, period: int) -> None:
        for i in range(1, self.cfg.n + 1):
            if self.is_offline(i):
                continue
            dev = self.devices[i]
            if checktime(dev.t, self.clock, self.timecfg) is Phase.LE:
                self._invoke(i, dev.le_init)

    def _on_poll(self) -> None:
        # Re-announcement tick: every device holding the upcoming heartbeat
        # offers it to its current neighbours (mobile networks only).
        for i in range(1, self.cfg.n + 1):
            if self.is_offline(i):
                continue
            dev = self.devices[i]
            if dev.is_ahead(self.clock, self.timecfg):
                for peer in self.topology.neighbors(i):
                    self._transmit(i, peer, wire.msg_new(), self.clock)
        nxt = self.clock + self.cfg.poll_interval
        if nxt <= self.stop_time:
            self._push(nxt, _TIMER, ("poll",))

    def _on_mobility(self) -> None:
        new_pairs = self.topology.step(self.cfg.mobility_tick, self.rng)
        for a, b in new_pairs:
            for dev_id, peer in ((a, b), (b, a)):
                if self.is_offline(dev_id):
                    continue
                dev = self.devices[dev_id]
                if dev.session is not None and not dev.session.done:
                    self._invoke(dev_id, dev.on_new_neighbor, peer)
                # an active election participant advertises to every fresh
                # contact; waiting for the next announcement tick would let
                # short encounters slip by
                if self.clock < dev.le_until and not self.is_offline(peer):
                    self._transmit(dev_id, peer, wire.msg_new(), self.clock)
        nxt = self.clock + self.cfg.mobility_tick
        if nxt <= self.stop_time:
            self._push(nxt, _TIMER, ("mobility",))

    def _sample_agreement(self) -> None:
        counts: dict[int, int] = {}
        alive = 0
        for i in range(1, self.cfg.n + 1):
            if self.is_offline(i) or self.devices[i].compromised:
                continue
            alive += 1
            belief = self.devices[i].d_min
            counts[belief] = counts.get(belief, 0) + 1
        if alive:
            leader, best = min(
                ((lid, c) for lid, c in counts.items()),
                key=lambda kv: (-kv[1], kv[0]))
            self.metrics.le_samples.append((self.clock, best / alive, leader))
        nxt = self.clock + self.cfg.agreement_sample
        if nxt <= self.stop_time:
            self._push(nxt, _TIMER, ("agreement",))

    # ---------------------------------------------------------------- actions

    def _on_action(self, action) -> None:
        if isinstance(action, tuple):
            if action[0] == "issue_att":
                self._issue_attestation()
            elif action[0] == "collect":
                self._collect(action[1])
            return
        if isinstance(action, TakeOffline):
            self.offline_until[action.device] = self.clock + action.duration
            self._offline_since[action.device] = self.clock
        elif isinstance(action, PhysicalCompromise):
            self._apply_compromise(action.device)
        elif isinstance(action, CompromiseSoftware):
            self.devices[action.device].fw_dirty = True
        elif isinstance(action, DropLink):
            key = (action.a, action.b) if action.a < action.b else (action.b, action.a)
            self._dropped_links[key] = action.until
        elif isinstance(action, Callback):
            action.fn(self)

    def _apply_compromise(self, dev_id: int) -> None:
        since = self._offline_since[dev_id]
        if (since < 0 or not self.is_offline(dev_id)
                or self.clock - since < self.timecfg.t_attack - 1e-9):
            raise InvariantViolation(
                f"physical compromise of device {dev_id} without a preceding "
                f"offline window of t_attack={self.timecfg.t_attack}s")
        self.devices[dev_id].compromised = True
        self.compromised.add(dev_id)

    # ---------------------------------------------------------- oracle API

    def leak_state(self, dev_id: int) -> Tee:
        """Adversary access to a captured device's protocol state."""
        if dev_id not in self.compromised:
            raise InvariantViolation(
                f"adversary tried to read the TEE of uncompromised device {dev_id}")
        return self.devices[dev_id]

    def inject(self, dst: int, msg: wire.Msg, claim_from: int | None = None) -> None:
        """Deliver an adversary-synthesized or replayed message.

        The Dolev-Yao adversary can put anything on the air, optionally with a
        spoofed sender identity; injections bypass sender-side accounting.
        """
        tx = self.delay.tx_time(msg.size)
        self._push(self.clock + self.delay.base_latency, _ARRIVE,
                   (msg, claim_from, dst, tx))

    def start_tap(self, *mtypes: int) -> None:
        """Record delivered messages of the given types (eavesdropping)."""
        self._tap_types = set(mtypes)

    def stop_tap(self) -> None:
        self._tap_types = None

    def corrupt_in_flight(self, mtype: int, count: int = 1) -> None:
        """Flip one ciphertext bit in the next ``count`` messages of a type."""
        self._corrupt[mtype] = self._corrupt.get(mtype, 0) + count

    def at(self, time: float, fn) -> None:
        """Schedule a scripted-action callback (used by attack strategies)."""
        self._push(time, _ACTION, Callback(time, fn))

    # -------------------------------------------------------------- operator

    def enroll_late(self, donor_id: int, neighbors: list[int],
                    fw_type: int = 0) -> int:
        """Operator adds one device mid-run, keyed to a healthy donor's state.

        Only graph topologies support this (the new device needs explicit
        links).  Returns the new device id.
        """
        from .topology import GraphTopology

        if not isinstance(self.topology, GraphTopology):
            raise InvariantViolation("late enrollment needs a graph topology")
        donor = self.devices[donor_id]
        dev = self.operator.enroll_late(donor, self.rng, fw_type=fw_type)
        self.devices.append(dev)
        self.cfg.n += 1
        new_id = dev.self_id
        adj = dict(self.topology._adj)
        adj[new_id] = tuple(sorted(neighbors))
        for peer in neighbors:
            adj[peer] = tuple(sorted(set(adj[peer]) | {new_id}))
        self.topology._adj = adj
        self.topology.n = new_id
        self.metrics.grow()
        for arr_name in ("radio_free", "cpu_free", "offline_until"):
            setattr(self, arr_name, np.append(getattr(self, arr_name), 0.0))
        self._offline_since = np.append(self._offline_since, -1.0)
        return new_id

    def _issue_attestation(self) -> None:
        self.issue_attestation(self.cfg.attestation)

    def issue_attestation(self, plan) -> int:
        """Operator connects to the entry device and emits a fresh request."""
        self.att_mode = plan.mode
        self.att_informative = plan.informative
        self.att_s = plan.s
        ts, msg = self.operator.issue_request(
            plan.entry, self.clock, mode=plan.mode,
            informative=plan.informative, software=plan.software, s=plan.s)
        self.metrics.attestations[ts] = AttestationRecord(
            ts=ts, issue_time=self.clock, entry=plan.entry,
            mode=plan.mode, informative=plan.informative)
        self._att_full = set()
        self._transmit(OPERATOR_ID, plan.entry, msg, self.clock)
        if plan.mode == "dynamic":
            pull_at = self.clock + self.timecfg.t_attack - plan.collect_margin
            self._push(pull_at, _ACTION, ("collect", ts))
        return ts

    def _collect(self, ts: int) -> None:
        rec = self.metrics.attestations.get(ts)
        if rec is None or rec.res_time is not None:
            return
        entry = rec.entry
        if self.is_offline(entry):
            return
        dev = self.devices[entry]
        self._invoke(entry, dev.on_collect, ts)

    def _operator_receive(self, msg: wire.Msg) -> None:
        open_ts = [ts for ts, rec in self.metrics.attestations.items()
                   if rec.res_time is None]
        if not open_ts:
            return
        ts = max(open_ts)
        verdict = self.operator.collect_and_verify(msg.body, ts, self.clock)
        rec = self.metrics.attestations[ts]
        rec.res_time = self.clock
        rec.verdict = verdict.bitstring()
        rec.accepted = not verdict.is_rejected()


def _flip_one_bit(msg: wire.Msg) -> wire.Msg:
    ct = msg.body
    payload = bytearray(ct.payload)
    if payload:
        payload[0] ^= 0x01
        corrupted = type(ct)(payload=bytes(payload), auth_tag=ct.auth_tag,
                             nonce=ct.nonce)
    else:
        tag = bytearray(ct.auth_tag)
        tag[0] ^= 0x01
        corrupted = type(ct)(payload=ct.payload, auth_tag=bytes(tag), nonce=ct.nonce)
    return wire.Msg(msg.mtype, corrupted, msg.size)


def run_scenario(cfg: ScenarioConfig, seed: int) -> Metrics:
    """Convenience wrapper: build, run, return metrics."""
    return Simulation(cfg, seed).run()
