"""Cryptographic contracts used by the mesh attestation protocol.

Two interchangeable backends implement the same interface:

* :class:`RealCrypto` -- AES-128-GCM authenticated encryption, X25519 key
  exchange and SHA-512 hashing (via the ``cryptography`` package).
* :class:`NullCrypto` -- structural stand-in for very large simulations.
  Ciphertexts carry the plaintext plus a keyed checksum, so wrong-key and
  tampered-message rejection still behave like the real thing while costing
  almost nothing.

Protocol code never looks inside a :class:`Ciphertext`; it only calls the
backend, so both backends are drop-in equivalent for simulation purposes.
Every operation carries a simulated compute cost (seconds on the reference
microcontroller) exposed through :class:`ComputeCosts`; the simulator charges
these as virtual time, they never affect wall-clock behaviour.
"""

from __future__ import annotations

import hashlib
import hmac
import zlib
from dataclasses import dataclass

import numpy as np

KEY_LEN = 16
DIGEST_LEN = 64
PUBLIC_KEY_LEN = 32


class DecryptionError(Exception):
    """Authenticated decryption failed (wrong key or tampered ciphertext)."""


@dataclass(frozen=True, slots=True)
class SymmetricKey:
    """A 16-byte symmetric key. XOR of two keys is again a valid key."""

    data: bytes

    def __post_init__(self):
        if len(self.data) != KEY_LEN:
            raise ValueError(f"key must be {KEY_LEN} bytes, got {len(self.data)}")

    def __xor__(self, other: "SymmetricKey") -> "SymmetricKey":
        return SymmetricKey(bytes(a ^ b for a, b in zip(self.data, other.data)))


@dataclass(frozen=True, slots=True)
class KeyPair:
    """Key-exchange key pair; ``exchange(a.secret, b.public) == exchange(b.secret, a.public)``."""

    public: bytes
    secret: bytes


@dataclass(frozen=True, slots=True)
class Ciphertext:
    """Authenticated ciphertext.

    ``payload`` has the same length as the plaintext (CTR-style cipher); the
    nonce and authenticator ride alongside and are not counted against the
    wire-size model (see ``wire.py``).
    """

    payload: bytes
    auth_tag: bytes
    nonce: bytes = b""


@dataclass(frozen=True, slots=True)
class Digest:
    """Fixed-length hash output (64 bytes, SHA-512)."""

    data: bytes

    def __post_init__(self):
        if len(self.data) != DIGEST_LEN:
            raise ValueError(f"digest must be {DIGEST_LEN} bytes")

    def as_int(self) -> int:
        return int.from_bytes(self.data, "big")


def _interp_cost(size: int, anchors: list[tuple[int, float]]) -> float:
    """Piecewise-linear interpolation through measured (size, seconds) anchors."""
    if size <= anchors[0][0]:
        return anchors[0][1]
    for (s0, c0), (s1, c1) in zip(anchors, anchors[1:]):
        if size <= s1:
            return c0 + (c1 - c0) * (size - s0) / (s1 - s0)
    # extrapolate with the final slope
    (s0, c0), (s1, c1) = anchors[-2], anchors[-1]
    return c1 + (c1 - c0) * (size - s1) / (s1 - s0)


class ComputeCosts:
    """Measured runtimes of crypto operations on the reference board.

    Values are attached to operations as simulation cost annotations and
    interpolated linearly between the measured sizes.
    """

    GEN_KEY = 18e-3
    KEY_EXCHANGE = 48e-3
    _CIPHER = [(16, 0.1e-3), (1024, 1.8e-3)]
    _HASH = [(16, 0.4e-3), (1024, 3.1e-3), (30720, 81.9e-3)]

    @classmethod
    def encrypt(cls, nbytes: int) -> float:
        return _interp_cost(nbytes, cls._CIPHER)

    @classmethod
    def decrypt(cls, nbytes: int) -> float:
        return _interp_cost(nbytes, cls._CIPHER)

    @classmethod
    def hash(cls, nbytes: int) -> float:
        return _interp_cost(nbytes, cls._HASH)


class CryptoBackend:
    """Interface both backends implement; see module docstring."""

    name = "abstract"

    def keypair_generate(self, rng: np.random.Generator) -> KeyPair:
        raise NotImplementedError

    def key_exchange(self, own_secret: bytes, peer_public: bytes) -> SymmetricKey:
        raise NotImplementedError

    def aenc(self, key: SymmetricKey, plaintext: bytes) -> Ciphertext:
        raise NotImplementedError

    def adec(self, key: SymmetricKey, ct: Ciphertext) -> bytes | None:
        """Return the plaintext, or None if the key is wrong / data tampered."""
        raise NotImplementedError

    def adec_or_abort(self, key: SymmetricKey, ct: Ciphertext) -> bytes:
        """Like :meth:`adec` but raises, so protocol handlers can abort."""
        pt = self.adec(key, ct)
        if pt is None:
            raise DecryptionError("authentication failure")
        return pt

    def hash(self, data: bytes) -> Digest:
        return Digest(hashlib.sha512(data).digest())

    def prf(self, key: SymmetricKey, data: bytes, out_len: int = KEY_LEN) -> bytes:
        """Deterministic keyed tag, recomputable by anyone holding the key."""
        return hmac.new(key.data, data, hashlib.sha512).digest()[:out_len]


class RealCrypto(CryptoBackend):
    """AES-128-GCM + X25519 + SHA-512."""

    name = "real"

    def __init__(self):
        from cryptography.hazmat.primitives.ciphers.aead import AESGCM

        self._aesgcm = AESGCM
        self._nonce_counter = 0

    def keypair_generate(self, rng: np.random.Generator) -> KeyPair:
        from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
        from cryptography.hazmat.primitives.serialization import (
            Encoding, PublicFormat,
        )

        secret = rng.bytes(32)
        priv = X25519PrivateKey.from_private_bytes(secret)
        public = priv.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        return KeyPair(public=public, secret=secret)

    def key_exchange(self, own_secret: bytes, peer_public: bytes) -> SymmetricKey:
        from cryptography.hazmat.primitives.asymmetric.x25519 import (
            X25519PrivateKey, X25519PublicKey,
        )

        shared = X25519PrivateKey.from_private_bytes(own_secret).exchange(
            X25519PublicKey.from_public_bytes(peer_public)
        )
        return SymmetricKey(shared[:KEY_LEN])

    def _next_nonce(self) -> bytes:
        # Fresh per call; a counter keeps runs reproducible.
        self._nonce_counter += 1
        return self._nonce_counter.to_bytes(12, "big")

    def aenc(self, key: SymmetricKey, plaintext: bytes) -> Ciphertext:
        nonce = self._next_nonce()
        out = self._aesgcm(key.data).encrypt(nonce, plaintext, None)
        return Ciphertext(payload=out[:-16], auth_tag=out[-16:], nonce=nonce)

    def adec(self, key: SymmetricKey, ct: Ciphertext) -> bytes | None:
        from cryptography.exceptions import InvalidTag

        try:
            return self._aesgcm(key.data).decrypt(
                ct.nonce, ct.payload + ct.auth_tag, None
            )
        except InvalidTag:
            return None


class NullCrypto(CryptoBackend):
    """Structural backend for million-device runs.

    The payload is the plaintext itself and the tag is a checksum keyed on the
    key bytes, so decryption with the wrong key or a flipped bit still fails.
    No secrecy is provided; adversary strategies in the simulator only ever
    forge messages with keys they legitimately leaked, which works identically
    under both backends.
    """

    name = "null"

    def keypair_generate(self, rng: np.random.Generator) -> KeyPair:
        secret = rng.bytes(32)
        public = hashlib.sha512(b"pub" + secret).digest()[:PUBLIC_KEY_LEN]
        return KeyPair(public=public, secret=secret)

    def key_exchange(self, own_secret: bytes, peer_public: bytes) -> SymmetricKey:
        own_public = hashlib.sha512(b"pub" + own_secret).digest()[:PUBLIC_KEY_LEN]
        lo, hi = sorted((own_public, peer_public))
        return SymmetricKey(hashlib.sha512(b"kx" + lo + hi).digest()[:KEY_LEN])

    def aenc(self, key: SymmetricKey, plaintext: bytes) -> Ciphertext:
        tag = zlib.crc32(key.data + plaintext).to_bytes(4, "big")
        return Ciphertext(payload=plaintext, auth_tag=tag)

    def adec(self, key: SymmetricKey, ct: Ciphertext) -> bytes | None:
        tag = zlib.crc32(key.data + ct.payload).to_bytes(4, "big")
        if tag != ct.auth_tag:
            return None
        return ct.payload


def sample_heartbeat(rng: np.random.Generator) -> SymmetricKey:
    """Draw a fresh uniformly random heartbeat key from the scenario RNG."""
    return SymmetricKey(rng.bytes(KEY_LEN))


def get_backend(name: str) -> CryptoBackend:
    if name == "real":
        return RealCrypto()
    if name == "null":
        return NullCrypto()
    raise ValueError(f"unknown crypto backend {name!r}")
