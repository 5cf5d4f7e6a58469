"""The trusted network operator: enrollment, requests, report verification.

The operator provisions every device before deployment (shared initial
heartbeats, unique device key, key-exchange pair), keeps all device keys, and
is the only party that can verify attestation reports.  After enrollment the
operator holds no heartbeats; it talks to the network through a single entry
device, protected by that device's key.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import wire
from .aggregation import Verdict, rle_decode, unframe_tree, verify_dynamic, verify_tree
from .crypto import Ciphertext, CryptoBackend, Digest, SymmetricKey, sample_heartbeat
from .tee import Tee, firmware_digest


@dataclass(slots=True)
class IssuedRequest:
    ts: int
    issue_time: float
    entry: int
    mode: str
    informative: bool
    s: int


@dataclass
class NetworkOperator:
    """Operator state: enrolled population, reference measurements, open requests."""

    backend: CryptoBackend
    n: int
    t_attack: float
    fw_size: int = 30720
    device_keys: dict[int, SymmetricKey] = field(default_factory=dict)
    device_types: dict[int, int] = field(default_factory=dict)
    tss: dict[int, Digest] = field(default_factory=dict)
    issued: dict[int, IssuedRequest] = field(default_factory=dict)
    last_ts: int = -1

    @classmethod
    def enroll(cls, n: int, rng: np.random.Generator, backend: CryptoBackend,
               t_attack: float, fw_size: int = 30720,
               fw_types: dict[int, int] | None = None,
               ) -> tuple["NetworkOperator", list[Tee | None]]:
        """Initialize ``n`` devices with shared heartbeats and unique secrets.

        All devices start with the same two heartbeats and their period
        pointer one ahead (they already hold the upcoming period's key); the
        leader is the first device.  Returns the operator and a device list
        indexed by id (slot 0 unused).
        """
        if n < 1:
            raise ValueError("need at least one device")
        op = cls(backend=backend, n=n, t_attack=t_attack, fw_size=fw_size)
        hb_cur = sample_heartbeat(rng)
        hb_next = sample_heartbeat(rng)
        devices: list[Tee | None] = [None]
        for i in range(1, n + 1):
            dk = SymmetricKey(rng.bytes(16))
            keypair = backend.keypair_generate(rng)
            fw_type = (fw_types or {}).get(i, 0)
            devices.append(Tee(
                self_id=i, t=2, hb_cur=hb_cur, hb_next=hb_next,
                dk=dk, keypair=keypair, d_min=1, fw_type=fw_type,
            ))
            op.device_keys[i] = dk
            op.device_types[i] = fw_type
        for fw_type in sorted(set(op.device_types.values())):
            op.tss[fw_type] = firmware_digest(backend, fw_type, False, fw_size)
        return op, devices

    def enroll_late(self, donor: Tee, rng: np.random.Generator,
                    fw_type: int = 0) -> Tee:
        """Add one device mid-run by issuing it the current heartbeats.

        The operator provisions the newcomer with the heartbeat state of a
        healthy donor device, so it can participate from the current period.
        """
        self.n += 1
        new_id = self.n
        dk = SymmetricKey(rng.bytes(16))
        dev = Tee(
            self_id=new_id, t=donor.t, hb_cur=donor.hb_cur, hb_next=donor.hb_next,
            dk=dk, keypair=self.backend.keypair_generate(rng),
            d_min=donor.d_min, fw_type=fw_type,
        )
        self.device_keys[new_id] = dk
        self.device_types[new_id] = fw_type
        if fw_type not in self.tss:
            self.tss[fw_type] = firmware_digest(self.backend, fw_type, False, self.fw_size)
        return dev

    def issue_request(self, entry: int, clock: float, mode: str = "tree",
                      informative: bool = True, software: bool = False,
                      s: int = 128) -> tuple[int, "wire.Msg"]:
        """Create a fresh attestation request for the entry device."""
        if entry not in self.device_keys:
            raise KeyError(f"device {entry} is not enrolled")
        if mode not in ("tree", "dynamic"):
            raise ValueError(f"unknown attestation mode {mode!r}")
        ts = max(int(clock), self.last_ts + 1)
        self.last_ts = ts
        digest = self.tss[self.device_types[entry]] if software else None
        payload = wire.pack_request(ts, self.n, digest)
        ct = self.backend.aenc(self.device_keys[entry], payload)
        self.issued[ts] = IssuedRequest(ts, clock, entry, mode, informative, s)
        return ts, wire.msg_v(ct)

    def collect_and_verify(self, ct: Ciphertext, ts: int, clock: float) -> Verdict:
        """Decrypt the entry device's final report and produce the verdict.

        A report arriving after the attack-time deadline, or failing
        decryption or recomputation, yields the all-zero verdict.
        """
        req = self.issued.get(ts)
        if req is None:
            return Verdict.rejected(self.n)
        if clock - req.issue_time > self.t_attack:
            return Verdict.rejected(self.n)
        pt = self.backend.adec(self.device_keys[req.entry], ct)
        if pt is None:
            return Verdict.rejected(self.n)
        try:
            if req.mode == "dynamic":
                report = rle_decode(pt)
                return verify_dynamic(report, ts, self.device_keys, self.n, req.s)
            report = unframe_tree(pt, self.n)
        except ValueError:
            return Verdict.rejected(self.n)
        if req.informative == report.boolean_mode:
            return Verdict.rejected(self.n)
        return verify_tree(report, ts, self.device_keys, self.n)
