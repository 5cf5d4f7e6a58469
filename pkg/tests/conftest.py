import numpy as np
import pytest

from meshattest.crypto import NullCrypto, RealCrypto, SymmetricKey, sample_heartbeat
from meshattest.netsim.config import ScenarioConfig
from meshattest.netsim.sim import Simulation
from meshattest.tee import Tee


@pytest.fixture(params=["real", "null"])
def backend(request):
    return RealCrypto() if request.param == "real" else NullCrypto()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_sim(n, topology, *, delta=10.0, delta_hb=None, t_attack=None,
             periods=4, le=False, poll=None, attestation=None, adversary=(),
             crypto="real", seed=1, **kw) -> Simulation:
    if le and delta_hb is None:
        delta_hb = 0.6 * delta
    cfg = ScenarioConfig(
        n=n, topology=topology, delta=delta, delta_hb=delta_hb,
        t_attack=t_attack, periods=periods, le_enabled=le,
        poll_interval=poll, attestation=attestation,
        adversary=list(adversary), crypto=crypto, **kw)
    return Simulation(cfg, seed)


def line_topology(n):
    return {"kind": "graph", "edges": [(i, i + 1) for i in range(1, n)]}


class DirectCtx:
    """Synchronous harness for driving Tee handlers without the event loop."""

    def __init__(self, backend, timecfg, clock=0.0, seed=0, le_enabled=True):
        self.backend = backend
        self.timecfg = timecfg
        self.clock = clock
        self.rng = np.random.default_rng(seed)
        self.le_enabled = le_enabled
        self.ke_retry_after = 10.0
        self.req_debounce = 2.0
        self.fw_size = 30720
        self.att_mode = "tree"
        self.att_informative = True
        self.att_s = 32
        self.att_freshness = timecfg.delta
        self.devices: dict[int, Tee] = {}
        self.graph: dict[int, tuple[int, ...]] = {}
        self.outbox: list[tuple[int, int, object]] = []
        self.sent_log: list[tuple[int, int, object]] = []
        self.acquired: list[tuple[int, str]] = []
        self.rejections = 0
        self.recoveries: list[int] = []
        self.charges: list[tuple[int, float]] = []

    def add(self, dev: Tee, neighbors=()):
        self.devices[dev.self_id] = dev
        self.graph[dev.self_id] = tuple(neighbors)

    # context surface
    def neighbors(self, dev_id):
        return self.graph.get(dev_id, ())

    def send(self, src, dst, msg):
        self.outbox.append((src, dst, msg))
        self.sent_log.append((src, dst, msg))

    def charge(self, dev_id, cost):
        self.charges.append((dev_id, cost))

    def note_emission(self, dev_id, t, hb):
        pass

    def note_acquired(self, dev_id, via):
        self.acquired.append((dev_id, via))

    def note_rejected(self, dev_id, sender, mtype):
        self.rejections += 1

    def note_leader_belief(self, dev_id, value):
        pass

    def note_att_join(self, dev_id, ts, report):
        pass

    def note_att_progress(self, dev_id, ts, report):
        pass

    def emit_recovery(self, dev_id):
        self.recoveries.append(dev_id)

    def schedule_att_timeout(self, dev_id, ts):
        pass

    def pump(self, limit=10_000):
        """Deliver queued messages synchronously until quiet."""
        from meshattest import wire

        handlers = {
            wire.MSG_NEW: lambda d, s, m: d.on_msg_new(self, s),
            wire.MSG_PK: lambda d, s, m: d.on_msg_pk(self, s, m.body, False),
            wire.MSG_PK_REPLY: lambda d, s, m: d.on_msg_pk(self, s, m.body, True),
            wire.MSG_REQ: lambda d, s, m: d.on_msg_req(self, s, m.body),
            wire.MSG_HB: lambda d, s, m: d.on_msg_hb(self, s, m.body),
            wire.MSG_LE_REQ: lambda d, s, m: d.on_msg_le_req(self, s, m.body),
            wire.MSG_LE_HB: lambda d, s, m: d.on_msg_le_hb(self, s, m.body),
            wire.MSG_LEADER: lambda d, s, m: d.on_msg_leader(self, s, m.body),
            wire.MSG_V: lambda d, s, m: d.on_attestation_request(self, m.body),
            wire.MSG_ATT: lambda d, s, m: d.on_msg_att(self, s, m.body),
            wire.MSG_AGG: lambda d, s, m: d.on_msg_agg(self, s, m.body),
        }
        steps = 0
        while self.outbox and steps < limit:
            src, dst, msg = self.outbox.pop(0)
            dev = self.devices.get(dst)
            if dev is not None:
                handlers[msg.mtype](dev, src, msg)
            steps += 1
        assert not self.outbox, "message pump did not quiesce"


def make_devices(backend, ids, *, t=2, d_min=None, seed=0):
    """Hand-built device population sharing two initial heartbeats."""
    gen = np.random.default_rng(seed)
    hb_cur = sample_heartbeat(gen)
    hb_next = sample_heartbeat(gen)
    devs = {}
    for i in ids:
        devs[i] = Tee(
            self_id=i, t=t, hb_cur=hb_cur, hb_next=hb_next,
            dk=SymmetricKey(gen.bytes(16)),
            keypair=backend.keypair_generate(gen),
            d_min=min(ids) if d_min is None else d_min)
    return devs


def link(backend, a: Tee, b: Tee):
    """Establish a channel key pair directly (enrolment-time shortcut)."""
    k = backend.key_exchange(a.keypair.secret, b.keypair.public)
    a.channel_keys[b.self_id] = k
    b.channel_keys[a.self_id] = k
    return k
