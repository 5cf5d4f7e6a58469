"""Wire messages and the byte-accounting model.

Every message is framed as a 1-byte type identifier followed by its payload.
For encrypted messages the accounted payload size equals the plaintext length:
the cipher is CTR-based so ciphertext bytes match plaintext bytes, and the
nonce/authenticator are treated as link-layer framing that the reference
per-message byte counts exclude.  This reproduces that accounting
exactly: ``msg_new`` is 1 byte, ``msg_req`` and ``msg_hb`` are 17 bytes, and a
public-key message is 33 bytes.

``Msg.size`` is the number that the delay model and all byte metrics use;
``Msg.to_bytes`` emits exactly that many bytes for the fixed-layout messages.
"""

from __future__ import annotations

import struct

from .crypto import Ciphertext, Digest

# message type identifiers (the single wire type byte)
MSG_NEW = 0x01
MSG_PK = 0x02        # public key, handshake initiation
MSG_PK_REPLY = 0x03  # public key, handshake response
MSG_REQ = 0x04
MSG_HB = 0x05
MSG_LE_REQ = 0x06
MSG_LE_HB = 0x07
MSG_LEADER = 0x08
MSG_V = 0x09
MSG_ATT = 0x0A
MSG_AGG = 0x0B
MSG_RES = 0x0C

TYPE_NAMES = {
    MSG_NEW: "msg_new",
    MSG_PK: "msg_pk",
    MSG_PK_REPLY: "msg_pk_reply",
    MSG_REQ: "msg_req",
    MSG_HB: "msg_hb",
    MSG_LE_REQ: "msg_le_req",
    MSG_LE_HB: "msg_le_hb",
    MSG_LEADER: "msg_leader",
    MSG_V: "msg_v",
    MSG_ATT: "msg_att",
    MSG_AGG: "msg_agg",
    MSG_RES: "msg_res",
}

# traffic phase buckets for per-device byte accounting
PHASE_HB = 0
PHASE_KE = 1
PHASE_LE = 2
PHASE_ATT = 3
N_PHASES = 4
PHASE_NAMES = ("heartbeat", "key_exchange", "leader_election", "attestation")

PHASE_OF = {
    MSG_NEW: PHASE_HB,
    MSG_REQ: PHASE_HB,
    MSG_HB: PHASE_HB,
    MSG_PK: PHASE_KE,
    MSG_PK_REPLY: PHASE_KE,
    MSG_LE_REQ: PHASE_LE,
    MSG_LE_HB: PHASE_LE,
    MSG_LEADER: PHASE_LE,
    MSG_V: PHASE_ATT,
    MSG_ATT: PHASE_ATT,
    MSG_AGG: PHASE_ATT,
    MSG_RES: PHASE_ATT,
}

# The fixed request/confirmation plaintext: one full cipher block.
ZERO_BLOCK = bytes(16)


class Msg:
    """A protocol message in flight: type, decoded or opaque body, wire size."""

    __slots__ = ("mtype", "body", "size")

    def __init__(self, mtype: int, body, size: int):
        self.mtype = mtype
        self.body = body
        self.size = size

    def __repr__(self):
        return f"Msg({TYPE_NAMES[self.mtype]}, {self.size}B)"

    def to_bytes(self) -> bytes:
        """Serialize the accountable wire bytes (type byte + payload)."""
        head = bytes([self.mtype])
        if self.mtype == MSG_NEW:
            return head
        if self.mtype in (MSG_PK, MSG_PK_REPLY):
            return head + self.body
        body = self.body
        if isinstance(body, Ciphertext):
            return head + body.payload
        raise TypeError(f"no canonical byte form for {TYPE_NAMES[self.mtype]}")


def msg_new() -> Msg:
    return Msg(MSG_NEW, None, 1)


def msg_pk(public: bytes, reply: bool) -> Msg:
    return Msg(MSG_PK_REPLY if reply else MSG_PK, public, 1 + len(public))


def _enc_msg(mtype: int, ct: Ciphertext) -> Msg:
    return Msg(mtype, ct, 1 + len(ct.payload))


def msg_req(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_REQ, ct)


def msg_hb(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_HB, ct)


def msg_le_req(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_LE_REQ, ct)


def msg_le_hb(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_LE_HB, ct)


def msg_leader(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_LEADER, ct)


def msg_v(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_V, ct)


def msg_att(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_ATT, ct)


def msg_agg(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_AGG, ct)


def msg_res(ct: Ciphertext) -> Msg:
    return _enc_msg(MSG_RES, ct)


# ---------------------------------------------------------------------------
# plaintext layouts

def pack_le_payload(hb: bytes, device_id: int) -> bytes:
    """Leader-election payload: candidate heartbeat followed by a 32-bit id."""
    return hb + struct.pack(">I", device_id)


def unpack_le_payload(data: bytes) -> tuple[bytes, int]:
    if len(data) != 20:
        raise ValueError("bad leader-election payload")
    return data[:16], struct.unpack(">I", data[16:])[0]


def pack_request(ts: int, n: int, tss_digest: Digest | None = None) -> bytes:
    """Attestation request plaintext: ts(4) | n(4) [| reference digest(64)]."""
    out = struct.pack(">II", ts, n)
    if tss_digest is not None:
        out += tss_digest.data
    return out


def unpack_request(data: bytes) -> tuple[int, int, Digest | None]:
    if len(data) < 8:
        raise ValueError("bad attestation request payload")
    ts, n = struct.unpack(">II", data[:8])
    tss = Digest(data[8:72]) if len(data) >= 72 else None
    return ts, n, tss
