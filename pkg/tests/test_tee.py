"""Time-phase classification and single-device state transitions."""

import numpy as np
import pytest

from meshattest.crypto import RealCrypto
from meshattest.tee import Phase, TimeConfig, checktime

from conftest import DirectCtx, make_devices

DELTA = 10.0
TC = TimeConfig(delta=DELTA, delta_hb=6.0, t_attack=20.0)


class TestChecktime:
    def test_heartbeat_phase_at_period_boundary(self):
        tc = TimeConfig(delta=DELTA, delta_hb=0.6 * DELTA, t_attack=20 * DELTA)
        assert checktime(2, DELTA, tc) is Phase.HB

    def test_le_phase_late_in_period(self):
        tc = TimeConfig(delta=DELTA, delta_hb=0.6 * DELTA, t_attack=20 * DELTA)
        assert checktime(2, 1.7 * DELTA, tc) is Phase.LE

    def test_pointer_far_ahead_is_none(self):
        tc = TimeConfig(delta=DELTA, delta_hb=0.6 * DELTA, t_attack=20 * DELTA)
        assert checktime(5, DELTA, tc) is Phase.NONE

    def test_exactly_one_phase_per_instant(self):
        for clock in np.linspace(0, 4 * DELTA, 200):
            tags = [checktime(t, clock, TC) for t in range(1, 6)]
            live = [tag for tag in tags if tag is not Phase.NONE]
            assert len(live) <= 1

    def test_whole_period_heartbeat_when_no_le_subphase(self):
        tc = TimeConfig(delta=DELTA, delta_hb=DELTA, t_attack=20.0)
        assert checktime(1, 0.0, tc) is Phase.HB
        assert checktime(1, DELTA - 1e-9, tc) is Phase.HB


class TestTimeConfig:
    def test_delta_bound(self):
        with pytest.raises(ValueError, match="t_attack/2"):
            TimeConfig(delta=11.0, delta_hb=6.0, t_attack=20.0).validate()

    def test_insecure_override(self):
        TimeConfig(delta=11.0, delta_hb=6.0, t_attack=20.0).validate(allow_insecure=True)

    def test_subphase_bound(self):
        with pytest.raises(ValueError, match="delta_hb"):
            TimeConfig(delta=10.0, delta_hb=11.0, t_attack=40.0).validate()

    def test_delta_le(self):
        assert TC.delta_le == pytest.approx(4.0)


class TestLeaderEmit:
    def _ctx(self, clock):
        return DirectCtx(RealCrypto(), TC, clock=clock)

    def test_rotates_and_samples(self):
        ctx = self._ctx(clock=DELTA)  # period 2 starts
        devs = make_devices(ctx.backend, [1, 2])
        leader = devs[1]
        old_next = leader.hb_next
        ctx.add(leader, neighbors=(2,))
        leader.leader_emit(ctx)
        assert leader.t == 3
        assert leader.hb_cur == old_next
        assert leader.hb_next != old_next
        assert len(ctx.outbox) == 1  # one announcement per neighbour

    def test_guard_wrong_phase(self):
        ctx = self._ctx(clock=0.0)  # still period 1, pointer is ahead
        devs = make_devices(ctx.backend, [1])
        leader = devs[1]
        snapshot = (leader.t, leader.hb_cur, leader.hb_next)
        ctx.add(leader)
        leader.leader_emit(ctx)
        assert (leader.t, leader.hb_cur, leader.hb_next) == snapshot

    def test_guard_not_leader(self):
        ctx = self._ctx(clock=DELTA)
        devs = make_devices(ctx.backend, [1, 2])
        follower = devs[2]
        ctx.add(follower, neighbors=(1,))
        follower.leader_emit(ctx)
        assert follower.t == 2
        assert ctx.outbox == []

    def test_consecutive_emissions_fresh(self):
        ctx = self._ctx(clock=DELTA)
        devs = make_devices(ctx.backend, [1])
        leader = devs[1]
        ctx.add(leader)
        leader.leader_emit(ctx)
        first = leader.hb_next
        ctx.clock = 2 * DELTA
        leader.leader_emit(ctx)
        assert leader.hb_next != first


class TestStateInvariants:
    def test_two_heartbeats_only(self):
        # the state machine has exactly two heartbeat slots by construction
        ctx = DirectCtx(RealCrypto(), TC, clock=DELTA)
        devs = make_devices(ctx.backend, [1])
        hb_fields = [f for f in devs[1].__slots__ if f.startswith("hb_")]
        assert hb_fields == ["hb_cur", "hb_next"]

    def test_is_ahead(self):
        ctx = DirectCtx(RealCrypto(), TC, clock=0.0)
        dev = make_devices(ctx.backend, [1])[1]
        assert dev.t == 2
        assert dev.is_ahead(0.0, TC)          # enrolled holding next heartbeat
        assert not dev.is_ahead(DELTA, TC)    # period 2 began, no longer ahead
