"""Per-device protocol state machine, emulating the trusted execution space.

Each device keeps exactly two group secrets (the current and the next
heartbeat), a pointer ``t`` to the time period it has secrets for, pairwise
channel keys, and its device key.  All device-to-device traffic is encrypted
under the *session key* ``hb_cur XOR k_ij``, so a peer must know both the
current heartbeat and the pairwise channel key for any message to be
accepted.  A device that stays offline through a full period misses that
period's heartbeat and can never re-enter the stream.

Time is split into fixed periods of length ``delta``; each period has a
heartbeat sub-phase (``delta_hb``) and an optional leader-election sub-phase
(the remainder).  The pointer being one period ahead of the wall clock means
the device already holds the upcoming heartbeat.

Handlers receive a ``ctx`` object (the simulation event loop) that provides
the clock, RNG, crypto backend, neighbour lookup, message transmission and
compute-cost charging.  A handler may mutate only its own device state.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

from . import wire
from .aggregation import (
    DynamicReport, TreeReport, dynamic_merge, frame_tree, rle_decode,
    rle_encode, tree_merge, unframe_tree,
)
from .crypto import ComputeCosts, Digest, KeyPair, SymmetricKey, sample_heartbeat

OPERATOR_ID = 0


class Phase(enum.Enum):
    HB = "HB"
    LE = "LE"
    NONE = "NONE"


@dataclass(frozen=True, slots=True)
class TimeConfig:
    """Period timing: ``delta`` split into ``delta_hb`` + leader-election rest.

    Security requires ``delta <= t_attack / 2``: an attack taking ``t_attack``
    then forces the victim to miss at least one full period.
    """

    delta: float
    delta_hb: float
    t_attack: float

    @property
    def delta_le(self) -> float:
        return self.delta - self.delta_hb

    def period_start(self, t: int) -> float:
        return (t - 1) * self.delta

    def validate(self, allow_insecure: bool = False) -> None:
        if not 0 < self.delta_hb <= self.delta:
            raise ValueError("delta_hb must be in (0, delta]")
        if self.delta > self.t_attack / 2 and not allow_insecure:
            raise ValueError(
                f"delta exceeds t_attack/2 ({self.delta} > {self.t_attack / 2}); "
                "offline attacks could span a single period boundary"
            )


def checktime(t: int, clock: float, tc: TimeConfig) -> Phase:
    """Classify ``clock`` against period ``t``: HB sub-phase, LE sub-phase or neither."""
    start = tc.period_start(t)
    if start <= clock < start + tc.delta_hb:
        return Phase.HB
    if start + tc.delta_hb <= clock < start + tc.delta:
        return Phase.LE
    return Phase.NONE


def firmware_digest(backend, fw_type: int, dirty: bool, fw_size: int) -> Digest:
    """Measurement of a device's (simulated) firmware image.

    The real backend hashes a full deterministic image of ``fw_size`` bytes;
    the null backend hashes a short token with identical semantics.  A dirty
    image never matches the clean reference.
    """
    if backend.name == "null":
        token = b"fw%d:%d" % (fw_type, 1 if dirty else 0)
        return Digest(hashlib.sha512(token).digest())
    image = hashlib.shake_256(b"fw%d:%d" % (fw_type, 1 if dirty else 0)).digest(fw_size)
    return backend.hash(image)


class AttSession:
    """State of one attestation run on a device, keyed by the request timestamp."""

    __slots__ = ("ts", "n", "mode", "informative", "s", "tss", "req_plain",
                 "report", "parent", "pending", "done")

    def __init__(self, ts, n, mode, informative, s, tss, req_plain, report, parent):
        self.ts = ts
        self.n = n
        self.mode = mode                # "tree" | "dynamic"
        self.informative = informative
        self.s = s
        self.tss = tss                  # dict type -> Digest, or None
        self.req_plain = req_plain      # forwarded verbatim in msg_att
        self.report = report
        self.parent = parent            # upstream hop; OPERATOR_ID at the entry
        self.pending = set()            # children not yet reported (tree mode)
        self.done = False


class Tee:
    """Protocol state and handlers for one device."""

    __slots__ = (
        "self_id", "t", "hb_cur", "hb_next", "dk", "keypair", "channel_keys",
        "d_min", "sw_trustworthy", "compromised", "fw_type", "fw_dirty",
        "last_ts", "session", "_ke_pending", "req_inflight_until", "le_until",
    )

    def __init__(self, self_id: int, t: int, hb_cur: SymmetricKey,
                 hb_next: SymmetricKey, dk: SymmetricKey, keypair: KeyPair,
                 d_min: int, fw_type: int = 0):
        self.self_id = self_id
        self.t = t
        self.hb_cur = hb_cur
        self.hb_next = hb_next
        self.dk = dk
        self.keypair = keypair
        self.channel_keys: dict[int, SymmetricKey] = {}
        self.d_min = d_min
        self.sw_trustworthy = True
        self.compromised = False
        self.fw_type = fw_type
        self.fw_dirty = False
        self.last_ts = -1
        self.session: AttSession | None = None
        self._ke_pending: dict[int, tuple[float, dict]] | None = None
        self.req_inflight_until = 0.0   # debounce for heartbeat requests
        self.le_until = 0.0             # end of the election round we joined

    # -- small helpers ------------------------------------------------------

    def is_ahead(self, clock: float, tc: TimeConfig) -> bool:
        """True once the device holds the heartbeat of the upcoming period."""
        return clock < tc.period_start(self.t)

    def session_key(self, peer: int) -> SymmetricKey | None:
        k = self.channel_keys.get(peer)
        return None if k is None else self.hb_cur ^ k

    def _sync_period(self, ctx) -> None:
        # Lazy promotion: the first protocol activity inside a new period
        # rolls hb_next into hb_cur (idempotent until the next acquisition).
        if checktime(self.t, ctx.clock, ctx.timecfg) is Phase.HB:
            self.hb_cur = self.hb_next

    def _aenc(self, ctx, key, plaintext):
        ctx.charge(self.self_id, ComputeCosts.encrypt(len(plaintext)))
        return ctx.backend.aenc(key, plaintext)

    def _adec(self, ctx, key, ct):
        ctx.charge(self.self_id, ComputeCosts.decrypt(len(ct.payload)))
        return ctx.backend.adec(key, ct)

    # -- channel establishment ---------------------------------------------

    def ensure_channel(self, ctx, peer: int, resume_kind: str) -> bool:
        """Return True if a channel key with ``peer`` exists.

        Otherwise start (or refresh) a public-key handshake and remember the
        triggering action so it can be re-dispatched once keys are derived.
        The handshake itself needs no heartbeat; the first session-key-encrypted
        message afterwards is what proves liveness to the peer.
        """
        if peer in self.channel_keys:
            return True
        if self._ke_pending is None:
            self._ke_pending = {}
        entry = self._ke_pending.get(peer)
        if entry is None:
            self._ke_pending[peer] = (ctx.clock, {resume_kind: None})
            ctx.send(self.self_id, peer, wire.msg_pk(self.keypair.public, reply=False))
        else:
            started, kinds = entry
            kinds[resume_kind] = None
            if ctx.clock - started > ctx.ke_retry_after:
                self._ke_pending[peer] = (ctx.clock, kinds)
                ctx.send(self.self_id, peer, wire.msg_pk(self.keypair.public, reply=False))
        return False

    def on_msg_pk(self, ctx, sender: int, public: bytes, is_reply: bool) -> None:
        if sender not in self.channel_keys:
            ctx.charge(self.self_id, ComputeCosts.KEY_EXCHANGE)
            self.channel_keys[sender] = ctx.backend.key_exchange(
                self.keypair.secret, public)
        if not is_reply:
            ctx.send(self.self_id, sender, wire.msg_pk(self.keypair.public, reply=True))
        if self._ke_pending and sender in self._ke_pending:
            _, kinds = self._ke_pending.pop(sender)
            for kind in kinds:
                if kind == "announce":
                    self.on_msg_new(ctx, sender)
                elif kind == "send_att":
                    self._probe_neighbor(ctx, sender)

    # -- heartbeat transmission ---------------------------------------------

    def leader_emit(self, ctx) -> None:
        """Begin a new period: rotate heartbeats, sample a fresh one, announce."""
        if self.d_min != self.self_id:
            return
        if checktime(self.t, ctx.clock, ctx.timecfg) is not Phase.HB:
            return
        self.hb_cur = self.hb_next
        self.hb_next = sample_heartbeat(ctx.rng)
        self.t += 1
        ctx.note_emission(self.self_id, self.t, self.hb_next)
        for peer in ctx.neighbors(self.self_id):
            ctx.send(self.self_id, peer, wire.msg_new())

    def on_msg_new(self, ctx, sender: int) -> None:
        tc = ctx.timecfg
        phase = checktime(self.t, ctx.clock, tc)
        if phase is Phase.HB:
            # Period turned and we lack the next heartbeat: request it.
            # One request at a time; duplicate announcements are debounced.
            self.hb_cur = self.hb_next
            if ctx.clock < self.req_inflight_until:
                return
            if not self.ensure_channel(ctx, sender, "announce"):
                return
            self.req_inflight_until = ctx.clock + ctx.req_debounce
            ct = self._aenc(ctx, self.session_key(sender), wire.ZERO_BLOCK)
            ctx.send(self.self_id, sender, wire.msg_req(ct))
            return
        if not ctx.le_enabled:
            return
        if phase is Phase.LE:
            self.le_init(ctx)
        if checktime(self.t - 1, ctx.clock, tc) is Phase.LE:
            if not self.ensure_channel(ctx, sender, "announce"):
                return
            ct = self._aenc(ctx, self.session_key(sender), wire.ZERO_BLOCK)
            ctx.send(self.self_id, sender, wire.msg_le_req(ct))

    def on_msg_req(self, ctx, sender: int, ct) -> None:
        self._sync_period(ctx)
        if checktime(self.t - 1, ctx.clock, ctx.timecfg) is not Phase.HB:
            return
        key = self.session_key(sender)
        if key is None:
            return
        z = self._adec(ctx, key, ct)
        if z is None:
            # Requester lacked the current heartbeat or the channel key:
            # stay silent.  This is the exclusion mechanism.
            ctx.note_rejected(self.self_id, sender, wire.MSG_REQ)
            return
        if z == wire.ZERO_BLOCK:
            reply = self._aenc(ctx, key, self.hb_next.data)
            ctx.send(self.self_id, sender, wire.msg_hb(reply))

    def on_msg_hb(self, ctx, sender: int, ct) -> None:
        if checktime(self.t, ctx.clock, ctx.timecfg) is not Phase.HB:
            return
        key = self.session_key(sender)
        if key is None:
            return
        pt = self._adec(ctx, key, ct)
        if pt is None:
            ctx.note_rejected(self.self_id, sender, wire.MSG_HB)
            return
        self.hb_next = SymmetricKey(pt)
        self.t += 1
        self.req_inflight_until = 0.0
        # d_min is the persistent leader belief; heartbeat receipt does not
        # change who we think the leader is.
        ctx.note_acquired(self.self_id, "hb")
        for peer in ctx.neighbors(self.self_id):
            if peer != sender:
                ctx.send(self.self_id, peer, wire.msg_new())

    # -- leader election ------------------------------------------------------

    def le_init(self, ctx) -> None:
        """No heartbeat arrived within delta_hb: claim candidacy with own key."""
        if checktime(self.t, ctx.clock, ctx.timecfg) is not Phase.LE:
            return
        self.hb_cur = self.hb_next
        self.hb_next = sample_heartbeat(ctx.rng)
        self.t += 1
        self.le_until = ctx.timecfg.period_start(self.t)
        self._set_dmin(ctx, self.self_id)
        ctx.note_acquired(self.self_id, "le_init")
        for peer in ctx.neighbors(self.self_id):
            ctx.send(self.self_id, peer, wire.msg_new())

    def _set_dmin(self, ctx, value: int) -> None:
        if value != self.d_min:
            self.d_min = value
            ctx.note_leader_belief(self.self_id, value)

    def on_msg_le_req(self, ctx, sender: int, ct) -> None:
        if checktime(self.t - 1, ctx.clock, ctx.timecfg) is not Phase.LE:
            return
        key = self.session_key(sender)
        if key is None:
            return
        z = self._adec(ctx, key, ct)
        if z is None:
            ctx.note_rejected(self.self_id, sender, wire.MSG_LE_REQ)
            return
        if z == wire.ZERO_BLOCK:
            payload = wire.pack_le_payload(self.hb_next.data, self.d_min)
            ctx.send(self.self_id, sender, wire.msg_le_hb(self._aenc(ctx, key, payload)))

    def on_msg_le_hb(self, ctx, sender: int, ct) -> None:
        if checktime(self.t - 1, ctx.clock, ctx.timecfg) is not Phase.LE:
            return
        key = self.session_key(sender)
        if key is None:
            return
        pt = self._adec(ctx, key, ct)
        if pt is None:
            ctx.note_rejected(self.self_id, sender, wire.MSG_LE_HB)
            return
        hb, dmin = wire.unpack_le_payload(pt)
        updated = dmin < self.d_min
        if updated:
            self.hb_next = SymmetricKey(hb)
            self._set_dmin(ctx, dmin)
        payload = wire.pack_le_payload(self.hb_next.data, self.d_min)
        ctx.send(self.self_id, sender, wire.msg_leader(self._aenc(ctx, key, payload)))
        if updated:
            self._broadcast_new(ctx, skip=sender)

    def on_msg_leader(self, ctx, sender: int, ct) -> None:
        if checktime(self.t - 1, ctx.clock, ctx.timecfg) is not Phase.LE:
            return
        key = self.session_key(sender)
        if key is None:
            return
        pt = self._adec(ctx, key, ct)
        if pt is None:
            ctx.note_rejected(self.self_id, sender, wire.MSG_LEADER)
            return
        hb, dmin = wire.unpack_le_payload(pt)
        if dmin < self.d_min:
            self.hb_next = SymmetricKey(hb)
            self._set_dmin(ctx, dmin)
            self._broadcast_new(ctx, skip=sender)

    def _broadcast_new(self, ctx, skip: int | None = None) -> None:
        for peer in ctx.neighbors(self.self_id):
            if peer != skip:
                ctx.send(self.self_id, peer, wire.msg_new())

    # -- software integrity ----------------------------------------------------

    def measure_software(self, ctx, tss: dict[int, Digest] | None) -> bool:
        """Measure own firmware against the trusted reference set.

        A device whose type has no reference, or whose measurement mismatches,
        is untrustworthy: it aborts attestation and requests recovery.
        """
        if tss is None:
            return True
        ctx.charge(self.self_id, ComputeCosts.hash(ctx.fw_size))
        ref = tss.get(self.fw_type)
        ok = ref is not None and firmware_digest(
            ctx.backend, self.fw_type, self.fw_dirty, ctx.fw_size).data == ref.data
        self.sw_trustworthy = ok
        if not ok:
            ctx.emit_recovery(self.self_id)
        return ok

    # -- attestation --------------------------------------------------------

    def _is_valid_req(self, ctx, ts: int) -> bool:
        return ts > self.last_ts and ctx.clock - ts <= ctx.att_freshness

    def _join_session(self, ctx, ts, n, tss_digest, req_plain, parent) -> bool:
        tss = {0: tss_digest} if tss_digest is not None else None
        if not self.measure_software(ctx, tss):
            return False
        self.last_ts = ts
        mode, informative, s = ctx.att_mode, ctx.att_informative, ctx.att_s
        if mode == "dynamic":
            ctx.charge(self.self_id, ComputeCosts.hash(20))
            report = DynamicReport.single(self.self_id, self.dk, ts, n, s)
        else:
            ctx.charge(self.self_id, ComputeCosts.encrypt(16))
            report = TreeReport.single(self.self_id, self.dk, ts,
                                       boolean=not informative)
        self.session = AttSession(ts, n, mode, informative, s, tss,
                                  req_plain, report, parent)
        ctx.note_att_join(self.self_id, ts, report)
        return True

    def _report_bytes(self) -> bytes:
        s = self.session
        if s.mode == "dynamic":
            return rle_encode(s.report)
        return frame_tree(s.report, s.n)

    def _send_report(self, ctx, dst: int) -> None:
        s = self.session
        body = self._report_bytes()
        if dst == OPERATOR_ID:
            ctx.send(self.self_id, OPERATOR_ID,
                     wire.msg_res(self._aenc(ctx, self.dk, body)))
            return
        key = self.session_key(dst)
        if key is None:
            return
        ctx.send(self.self_id, dst, wire.msg_agg(self._aenc(ctx, key, body)))

    def on_attestation_request(self, ctx, ct) -> None:
        """Entry-device handler for the operator's request."""
        pt = self._adec(ctx, self.dk, ct)
        if pt is None:
            return
        ts, n, tss_digest = wire.unpack_request(pt)
        if not self._is_valid_req(ctx, ts):
            return
        if not self._join_session(ctx, ts, n, tss_digest, pt, OPERATOR_ID):
            return
        self._spread_request(ctx, exclude=None)
        self._maybe_finish_tree(ctx)

    def on_msg_att(self, ctx, sender: int, ct) -> None:
        self._sync_period(ctx)
        key = self.session_key(sender)
        if key is None:
            return
        pt = self._adec(ctx, key, ct)
        if pt is None:
            ctx.note_rejected(self.self_id, sender, wire.MSG_ATT)
            return
        ts, n, tss_digest = wire.unpack_request(pt)
        s = self.session
        if s is not None and s.ts == ts:
            # Already participating: acknowledge so the sender does not wait.
            if s.mode == "dynamic":
                self._send_report(ctx, sender)
            else:
                empty = frame_tree(TreeReport.empty(boolean=s.report.boolean_mode), s.n)
                ctx.send(self.self_id, sender,
                         wire.msg_agg(self._aenc(ctx, key, empty)))
            return
        if not self._is_valid_req(ctx, ts):
            return
        if not self._join_session(ctx, ts, n, tss_digest, pt, sender):
            return
        s = self.session
        if s.mode == "dynamic":
            self._send_report(ctx, sender)
            self._spread_request(ctx, exclude=sender)
        else:
            self._spread_request(ctx, exclude=sender)
            self._maybe_finish_tree(ctx)

    def _spread_request(self, ctx, exclude: int | None) -> None:
        s = self.session
        for peer in ctx.neighbors(self.self_id):
            if peer == exclude:
                continue
            if s.mode == "tree":
                s.pending.add(peer)
            self._forward_att(ctx, peer)
        if s.mode == "tree" and s.pending:
            ctx.schedule_att_timeout(self.self_id, s.ts)

    def _forward_att(self, ctx, peer: int) -> None:
        s = self.session
        if not self.ensure_channel(ctx, peer, "send_att"):
            return
        ct = self._aenc(ctx, self.session_key(peer), s.req_plain)
        ctx.send(self.self_id, peer, wire.msg_att(ct))

    def _probe_neighbor(self, ctx, peer: int) -> None:
        """Offer the active session to a (possibly new) neighbour."""
        s = self.session
        if s is None or s.done:
            return
        if s.mode == "tree":
            return
        self._forward_att(ctx, peer)

    def on_new_neighbor(self, ctx, peer: int) -> None:
        if self.session is not None and self.session.mode == "dynamic":
            self._probe_neighbor(ctx, peer)

    def on_msg_agg(self, ctx, sender: int, ct) -> None:
        s = self.session
        if s is None:
            return
        key = self.session_key(sender)
        if key is None:
            return
        pt = self._adec(ctx, key, ct)
        if pt is None:
            ctx.note_rejected(self.self_id, sender, wire.MSG_AGG)
            if s.mode == "tree":
                # That subtree's report is lost; its devices will appear
                # compromised rather than stalling the session.
                s.pending.discard(sender)
                self._maybe_finish_tree(ctx)
            return
        if s.mode == "dynamic":
            incoming = rle_decode(pt)
            before = s.report.count()
            s.report = dynamic_merge(s.report, incoming)
            ctx.note_att_progress(self.self_id, s.ts, s.report)
            if s.report.count() > before:
                for peer in ctx.neighbors(self.self_id):
                    if peer != sender:
                        self._send_report(ctx, peer)
            if (s.parent == OPERATOR_ID and not s.done
                    and s.report.count() >= s.n):
                s.done = True
                self._send_report(ctx, OPERATOR_ID)
            return
        if s.done or sender not in s.pending:
            return
        incoming = unframe_tree(pt, s.n)
        s.report = tree_merge(s.report, incoming)
        s.pending.discard(sender)
        self._maybe_finish_tree(ctx)

    def _maybe_finish_tree(self, ctx) -> None:
        s = self.session
        if s is None or s.done or s.mode != "tree" or s.pending:
            return
        s.done = True
        self._send_report(ctx, s.parent)

    def on_child_timeout(self, ctx, ts: int) -> None:
        """Forward the partial aggregate; silent children appear compromised."""
        s = self.session
        if s is None or s.ts != ts or s.done or s.mode != "tree":
            return
        s.pending.clear()
        self._maybe_finish_tree(ctx)

    def on_collect(self, ctx, ts: int) -> None:
        """Operator pull at the attack-time deadline (dynamic sessions)."""
        s = self.session
        if s is None or s.ts != ts or s.done or s.parent != OPERATOR_ID:
            return
        s.done = True
        self._send_report(ctx, OPERATOR_ID)
