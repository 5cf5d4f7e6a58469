import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshattest.crypto import (
    ComputeCosts, DecryptionError, Digest, NullCrypto, RealCrypto,
    SymmetricKey, get_backend, sample_heartbeat,
)


def key(backend_or_seed=0):
    gen = np.random.default_rng(backend_or_seed)
    return SymmetricKey(gen.bytes(16))


class TestSymmetricKey:
    def test_length_enforced(self):
        with pytest.raises(ValueError):
            SymmetricKey(b"short")

    def test_xor_is_a_key(self):
        a, b = key(1), key(2)
        assert isinstance(a ^ b, SymmetricKey)
        assert (a ^ b) ^ b == a


class TestAuthenticatedEncryption:
    def test_round_trip(self, backend, rng):
        k = SymmetricKey(rng.bytes(16))
        for msg in (b"", b"0", b"hello world", rng.bytes(200)):
            assert backend.adec(k, backend.aenc(k, msg)) == msg

    def test_wrong_key_rejected(self, backend, rng):
        k1, k2 = SymmetricKey(rng.bytes(16)), SymmetricKey(rng.bytes(16))
        ct = backend.aenc(k1, b"payload")
        assert backend.adec(k2, ct) is None

    def test_session_key_round_trip(self, backend, rng):
        hb = SymmetricKey(rng.bytes(16))
        channel = SymmetricKey(rng.bytes(16))
        session = hb ^ channel
        ct = backend.aenc(session, hb.data)
        assert backend.adec(session, ct) == hb.data

    def test_adec_or_abort_raises(self, backend, rng):
        k = SymmetricKey(rng.bytes(16))
        with pytest.raises(DecryptionError):
            backend.adec_or_abort(SymmetricKey(rng.bytes(16)),
                                  backend.aenc(k, b"x"))

    def test_distinct_plaintexts_distinct_ciphertexts(self, backend, rng):
        k = SymmetricKey(rng.bytes(16))
        seen = {backend.aenc(k, bytes([i] * 16)).payload for i in range(64)}
        assert len(seen) == 64

    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(data=st.binary(min_size=1, max_size=64), flip=st.integers(0, 10 ** 9))
    def test_single_bit_flip_rejected(self, data, flip):
        for backend in (RealCrypto(), NullCrypto()):
            k = key(7)
            ct = backend.aenc(k, data)
            blob = bytearray(ct.payload + ct.auth_tag)
            pos = flip % (len(blob) * 8)
            blob[pos // 8] ^= 1 << (pos % 8)
            tampered = type(ct)(
                payload=bytes(blob[:len(ct.payload)]),
                auth_tag=bytes(blob[len(ct.payload):]),
                nonce=ct.nonce)
            assert backend.adec(k, tampered) is None


class TestKeyExchange:
    def test_symmetry(self, backend, rng):
        a = backend.keypair_generate(rng)
        b = backend.keypair_generate(rng)
        assert (backend.key_exchange(a.secret, b.public)
                == backend.key_exchange(b.secret, a.public))

    def test_distinct_pairs_distinct_keys(self, backend, rng):
        a, b, c = (backend.keypair_generate(rng) for _ in range(3))
        k_ab = backend.key_exchange(a.secret, b.public)
        k_ac = backend.key_exchange(a.secret, c.public)
        assert k_ab != k_ac


class TestHeartbeatSampling:
    def test_different_seeds_differ(self):
        a = sample_heartbeat(np.random.default_rng(1))
        b = sample_heartbeat(np.random.default_rng(2))
        assert a != b

    def test_same_seed_same_sequence(self):
        draws1 = [sample_heartbeat(g) for g in [np.random.default_rng(5)] * 1
                  for _ in range(10)]
        gen = np.random.default_rng(5)
        draws1 = [sample_heartbeat(gen) for _ in range(10)]
        gen = np.random.default_rng(5)
        draws2 = [sample_heartbeat(gen) for _ in range(10)]
        assert draws1 == draws2

    def test_no_collisions_at_scale(self):
        gen = np.random.default_rng(0)
        draws = {sample_heartbeat(gen).data for _ in range(20_000)}
        assert len(draws) == 20_000

    def test_uniformity_chi_square(self):
        # first byte of 1e5 draws against 256 equiprobable bins
        from scipy.stats import chisquare

        gen = np.random.default_rng(1234)
        counts = np.zeros(256, dtype=int)
        for _ in range(100_000):
            counts[sample_heartbeat(gen).data[0]] += 1
        _, p = chisquare(counts)
        assert p > 0.01


class TestComputeCosts:
    def test_measured_anchor_values(self):
        assert ComputeCosts.encrypt(16) == pytest.approx(0.1e-3)
        assert ComputeCosts.decrypt(1024) == pytest.approx(1.8e-3)
        assert ComputeCosts.hash(16) == pytest.approx(0.4e-3)
        assert ComputeCosts.hash(1024) == pytest.approx(3.1e-3)
        assert ComputeCosts.hash(30720) == pytest.approx(81.9e-3)
        assert ComputeCosts.KEY_EXCHANGE == pytest.approx(48e-3)
        assert ComputeCosts.GEN_KEY == pytest.approx(18e-3)

    def test_interpolation_monotone(self):
        sizes = [16, 100, 512, 1024, 5000, 30720, 60000]
        costs = [ComputeCosts.hash(s) for s in sizes]
        assert costs == sorted(costs)


class TestMisc:
    def test_digest_length(self):
        with pytest.raises(ValueError):
            Digest(b"too short")

    def test_get_backend(self):
        assert get_backend("real").name == "real"
        assert get_backend("null").name == "null"
        with pytest.raises(ValueError):
            get_backend("bogus")

    def test_backends_interoperate_on_sizes(self):
        # payload length equals plaintext length for both backends
        for backend in (RealCrypto(), NullCrypto()):
            ct = backend.aenc(key(3), b"x" * 37)
            assert len(ct.payload) == 37
