"""Attestation report aggregation.

Two report representations are provided:

* :class:`TreeReport` -- spanning-tree aggregation.  Each device contributes a
  deterministic 16-byte tag bound to the request timestamp; tags are folded
  with XOR, and the device description (id list or presence bit vector) says
  exactly which tags are in the fold.  Merging requires disjoint descriptions
  because XOR is not idempotent.  In *boolean* mode the description is dropped
  entirely and only a complete fold over all devices verifies.

* :class:`DynamicReport` -- greedy aggregation for mobile, partitioned
  networks.  Each device sets one bit in an ``n``-bit membership vector and
  one bit (derived from a hash of its device key and the timestamp) in an
  ``n + s``-bit attest vector.  Reports merge with bitwise OR, which tolerates
  arbitrary overlap; ``s`` is the statistical security level in bits.

The verifier recomputes every claimed tag/bit from the enrolled device keys,
so a report only verifies if it was built from the genuine per-device secrets.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass

import numpy as np

from .crypto import Digest, SymmetricKey

ATTEST_LEN = 16
ZERO_TAG = bytes(ATTEST_LEN)


class MergeError(ValueError):
    """Two tree reports with overlapping descriptions were merged (routing bug)."""


def _ts_bytes(ts: int) -> bytes:
    return struct.pack(">I", ts)


def make_attest(dk: SymmetricKey, ts: int) -> bytes:
    """Deterministic per-device tag for ``ts``: keyed MAC truncated to 16 bytes."""
    return hmac.new(dk.data, _ts_bytes(ts), hashlib.sha512).digest()[:ATTEST_LEN]


def compress(digest: Digest, n_s: int) -> int:
    """Reduce a digest to an index in ``[0, n_s)``, near-uniform for uniform input."""
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    return digest.as_int() % n_s


def attest_bit(dk: SymmetricKey, ts: int, n_s: int) -> int:
    """Dynamic-mode attest: the bit position derived from hash(dk | ts)."""
    return compress(Digest(hashlib.sha512(dk.data + _ts_bytes(ts)).digest()), n_s)


def _xor16(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(ATTEST_LEN, "big")


# ---------------------------------------------------------------------------
# spanning-tree reports

@dataclass(slots=True)
class TreeReport:
    """XOR-aggregated report; ``devices is None`` means boolean (no description)."""

    devices: set[int] | None
    aggregate: bytes = ZERO_TAG

    @property
    def boolean_mode(self) -> bool:
        return self.devices is None

    @classmethod
    def empty(cls, boolean: bool = False) -> "TreeReport":
        return cls(devices=None if boolean else set(), aggregate=ZERO_TAG)

    @classmethod
    def single(cls, device_id: int, dk: SymmetricKey, ts: int, boolean: bool = False) -> "TreeReport":
        return cls(
            devices=None if boolean else {device_id},
            aggregate=make_attest(dk, ts),
        )

    def count(self) -> int | None:
        return None if self.devices is None else len(self.devices)


def tree_merge(a: TreeReport, b: TreeReport) -> TreeReport:
    """Merge two reports: union the descriptions, XOR the aggregates.

    Descriptions must be disjoint; overlap would cancel tags out of the XOR.
    """
    if a.boolean_mode != b.boolean_mode:
        raise MergeError("cannot merge boolean and informative reports")
    agg = _xor16(a.aggregate, b.aggregate)
    if a.boolean_mode:
        return TreeReport(devices=None, aggregate=agg)
    if a.devices & b.devices:
        raise MergeError(f"overlapping descriptions: {sorted(a.devices & b.devices)}")
    return TreeReport(devices=a.devices | b.devices, aggregate=agg)


# ---------------------------------------------------------------------------
# dynamic (OR bit-vector) reports

@dataclass(slots=True)
class DynamicReport:
    """OR-mergeable report: ``n``-bit membership vector + ``n+s``-bit attest vector.

    Vectors are stored as ints (bit ``i-1`` = device ``i``); serialized raw
    form is the two vectors packed back to back, ``2n + s`` bits total.
    """

    n: int
    s: int
    devices: int = 0
    attest_bits: int = 0

    @property
    def n_s(self) -> int:
        return self.n + self.s

    @classmethod
    def single(cls, device_id: int, dk: SymmetricKey, ts: int, n: int, s: int) -> "DynamicReport":
        return cls(
            n=n, s=s,
            devices=1 << (device_id - 1),
            attest_bits=1 << attest_bit(dk, ts, n + s),
        )

    def count(self) -> int:
        return bin(self.devices).count("1")

    def device_ids(self) -> list[int]:
        return [i + 1 for i in range(self.n) if self.devices >> i & 1]


def dynamic_merge(a: DynamicReport, b: DynamicReport) -> DynamicReport:
    """Bitwise OR of both vectors; idempotent, so intersecting reports are fine."""
    if (a.n, a.s) != (b.n, b.s):
        raise ValueError("reports have mismatched dimensions")
    return DynamicReport(a.n, a.s, a.devices | b.devices, a.attest_bits | b.attest_bits)


# ---------------------------------------------------------------------------
# verification

@dataclass(slots=True)
class Verdict:
    """Per-device health bits: 1 = healthy, 0 = compromised. All-zero = rejected."""

    bits: np.ndarray  # uint8, index i-1 = device i

    @classmethod
    def rejected(cls, n: int) -> "Verdict":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def from_ids(cls, ids, n: int) -> "Verdict":
        bits = np.zeros(n, dtype=np.uint8)
        for i in ids:
            bits[i - 1] = 1
        return cls(bits)

    def __getitem__(self, device_id: int) -> int:
        return int(self.bits[device_id - 1])

    def all_healthy(self) -> bool:
        return bool(self.bits.all())

    def is_rejected(self) -> bool:
        return not self.bits.any()

    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


def verify_tree(report: TreeReport, ts: int, device_keys: dict[int, SymmetricKey], n: int) -> Verdict:
    """Recompute the XOR of claimed tags; accept only on exact match.

    Boolean reports must cover all ``n`` devices; informative reports need at
    least ``n/2`` described devices.  Undescribed devices stay at 0.
    """
    if report.boolean_mode:
        claimed = range(1, n + 1)
    else:
        claimed = sorted(report.devices)
        if any(i < 1 or i > n for i in claimed):
            return Verdict.rejected(n)
        if 2 * len(claimed) < n:
            return Verdict.rejected(n)
    agg = 0
    for i in claimed:
        agg ^= int.from_bytes(make_attest(device_keys[i], ts), "big")
    if agg.to_bytes(ATTEST_LEN, "big") != report.aggregate:
        return Verdict.rejected(n)
    return Verdict.from_ids(claimed, n)


def verify_dynamic(report: DynamicReport, ts: int, device_keys: dict[int, SymmetricKey],
                   n: int, s: int) -> Verdict:
    """Recompute the OR of claimed attest bits; a single mismatch rejects."""
    if (report.n, report.s) != (n, s):
        return Verdict.rejected(n)
    claimed = report.device_ids()
    if 2 * len(claimed) < n:
        return Verdict.rejected(n)
    expected = 0
    for i in claimed:
        expected |= 1 << attest_bit(device_keys[i], ts, n + s)
    if expected != report.attest_bits:
        return Verdict.rejected(n)
    return Verdict.from_ids(claimed, n)


# ---------------------------------------------------------------------------
# serialization
#
# Framed tree form: flag byte | description | 16-byte aggregate.  The flag
# records boolean mode and which description encoding was chosen; for a small
# number of devices the description is an explicit id list, otherwise the
# n-bit presence vector (whichever actually encodes smaller).
#
# Dynamic raw form: the two vectors as one contiguous bitstream of 2n+s bits
# (no framing), so the raw size law is exactly ceil((2n+s)/8) bytes.

_FLAG_BOOLEAN = 0x01
_FLAG_BITVEC = 0x02


def _id_width(n: int) -> int:
    return max(1, (n.bit_length() + 7) // 8)


def _bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(bits).tobytes()


def _bytes_to_bits(data: bytes, nbits: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:nbits]


def _mask_to_bits(mask: int, nbits: int) -> np.ndarray:
    raw = mask.to_bytes((nbits + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:nbits]


def _bits_to_mask(bits: np.ndarray) -> int:
    packed = np.packbits(bits, bitorder="little").tobytes()
    return int.from_bytes(packed, "little")


def frame_tree(report: TreeReport, n: int) -> bytes:
    if report.boolean_mode:
        return bytes([_FLAG_BOOLEAN]) + report.aggregate
    ids = sorted(report.devices)
    k = len(ids)
    width = _id_width(n)
    if 4 + k * width < (n + 7) // 8:
        desc = struct.pack(">I", k) + b"".join(i.to_bytes(width, "big") for i in ids)
        return bytes([0]) + desc + report.aggregate
    bits = np.zeros(n, dtype=np.uint8)
    for i in ids:
        bits[i - 1] = 1
    return bytes([_FLAG_BITVEC]) + _bits_to_bytes(bits) + report.aggregate


def unframe_tree(data: bytes, n: int) -> TreeReport:
    flag = data[0]
    if flag & _FLAG_BOOLEAN:
        if len(data) != 1 + ATTEST_LEN:
            raise ValueError("bad boolean report length")
        return TreeReport(devices=None, aggregate=data[1:])
    if flag & _FLAG_BITVEC:
        nbytes = (n + 7) // 8
        bits = _bytes_to_bits(data[1:1 + nbytes], n)
        devices = {int(i) + 1 for i in np.flatnonzero(bits)}
        return TreeReport(devices=devices, aggregate=data[1 + nbytes:1 + nbytes + ATTEST_LEN])
    k = struct.unpack(">I", data[1:5])[0]
    width = _id_width(n)
    ids = set()
    off = 5
    for _ in range(k):
        ids.add(int.from_bytes(data[off:off + width], "big"))
        off += width
    return TreeReport(devices=ids, aggregate=data[off:off + ATTEST_LEN])


def pack_dynamic_raw(report: DynamicReport) -> bytes:
    """Raw serialized form: devices bits then attest bits, 2n+s bits packed."""
    bits = np.concatenate([
        _mask_to_bits(report.devices, report.n),
        _mask_to_bits(report.attest_bits, report.n_s),
    ])
    return _bits_to_bytes(bits)


def unpack_dynamic_raw(data: bytes, n: int, s: int) -> DynamicReport:
    total = 2 * n + s
    if len(data) != (total + 7) // 8:
        raise ValueError("bad dynamic report length")
    bits = _bytes_to_bits(data, total)
    return DynamicReport(
        n=n, s=s,
        devices=_bits_to_mask(bits[:n]),
        attest_bits=_bits_to_mask(bits[n:]),
    )


def dynamic_raw_size(n: int, s: int) -> int:
    return (2 * n + s + 7) // 8


# ---------------------------------------------------------------------------
# run-length encoding
#
# Bitstream RLE: alternating run lengths as LEB128 varints, first run counts
# zeros (possibly zero-length).  A leading format byte falls back to the raw
# packed vector when RLE would not shrink it, so the encoded size never
# exceeds raw size + 1.

_RLE_RAW = 0x00
_RLE_RUNS = 0x01


def _varint(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_varint(data: bytes, off: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if off >= len(data):
            raise ValueError("truncated varint")
        byte = data[off]
        off += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, off
        shift += 7


def rle_encode_bits(bits: np.ndarray) -> bytes:
    """Encode a bit vector; round-trips with :func:`rle_decode_bits`."""
    bits = np.asarray(bits, dtype=np.uint8)
    raw = _bits_to_bytes(bits)
    runs = bytearray()
    if bits.size:
        change = np.flatnonzero(np.diff(bits)) + 1
        bounds = np.concatenate([[0], change, [bits.size]])
        lengths = np.diff(bounds)
        if bits[0] == 1:
            runs += _varint(0)
        for length in lengths:
            runs += _varint(int(length))
    if len(runs) < len(raw):
        return bytes([_RLE_RUNS]) + bytes(runs)
    return bytes([_RLE_RAW]) + raw


def rle_decode_bits(data: bytes, nbits: int) -> np.ndarray:
    if not data:
        raise ValueError("empty stream")
    kind, body = data[0], data[1:]
    if kind == _RLE_RAW:
        if len(body) != (nbits + 7) // 8:
            raise ValueError("raw body has wrong length")
        return _bytes_to_bits(body, nbits)
    if kind != _RLE_RUNS:
        raise ValueError(f"unknown RLE format byte {kind:#x}")
    bits = np.zeros(nbits, dtype=np.uint8)
    off = 0
    pos = 0
    value = 0
    while pos < nbits:
        length, off = _read_varint(body, off)
        if pos + length > nbits:
            raise ValueError("runs overflow the vector")
        if value:
            bits[pos:pos + length] = 1
        pos += length
        value ^= 1
    if off != len(body):
        raise ValueError("trailing bytes after runs")
    return bits


def rle_encode(report: DynamicReport) -> bytes:
    """Self-describing compressed dynamic report: n(4) | s(2) | RLE bitstream."""
    bits = np.concatenate([
        _mask_to_bits(report.devices, report.n),
        _mask_to_bits(report.attest_bits, report.n_s),
    ])
    return struct.pack(">IH", report.n, report.s) + rle_encode_bits(bits)


def rle_decode(data: bytes) -> DynamicReport:
    if len(data) < 7:
        raise ValueError("truncated report")
    n, s = struct.unpack(">IH", data[:6])
    bits = rle_decode_bits(data[6:], 2 * n + s)
    return DynamicReport(n=n, s=s,
                         devices=_bits_to_mask(bits[:n]),
                         attest_bits=_bits_to_mask(bits[n:]))
