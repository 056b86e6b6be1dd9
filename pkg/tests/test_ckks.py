import numpy as np
import pytest

from rnsckks import serialize
from rnsckks.ckks import CkksContext
from rnsckks.errors import DomainError, ParameterError


@pytest.fixture(scope="module")
def ctx(small_params):
    return CkksContext(small_params, backend="butterfly", seed=99)


@pytest.fixture(scope="module")
def keys(ctx):
    sk, pk = ctx.keygen()
    rlk = ctx.make_relin_key(sk)
    return sk, pk, rlk


def rand_slots(ctx, rng, real=False):
    s = ctx.params.slots
    z = rng.uniform(-1, 1, s)
    if not real:
        z = z + 1j * rng.uniform(-1, 1, s)
    return z


class TestEncoding:
    def test_encode_decode_roundtrip(self, ctx, rng):
        z = rand_slots(ctx, rng)
        pt = ctx.encode(z)
        assert np.max(np.abs(ctx.decode(pt) - z)) < 2 ** -25

    def test_short_vector_padded(self, ctx, rng):
        z = rng.uniform(-1, 1, 5)
        got = ctx.decode(ctx.encode(z))
        assert np.max(np.abs(got[:5] - z)) < 2 ** -25
        assert np.max(np.abs(got[5:])) < 2 ** -25

    def test_too_many_slots_rejected(self, ctx):
        with pytest.raises(ParameterError):
            ctx.encode(np.zeros(ctx.params.slots + 1))

    def test_level_controls_basis(self, ctx):
        pt = ctx.encode([1.0], level=1)
        assert pt.poly.basis == ctx.params.q_basis(1)


class TestEncryption:
    def test_roundtrip_precision(self, ctx, keys, rng):
        sk, pk, _ = keys
        z = rand_slots(ctx, rng)
        ct = ctx.encrypt(pk, ctx.encode(z))
        assert np.max(np.abs(ctx.decrypt_decode(sk, ct) - z)) < 2 ** -20

    def test_fresh_ciphertexts_differ(self, ctx, keys):
        _, pk, _ = keys
        pt = ctx.encode([0.5])
        c1, c2 = ctx.encrypt(pk, pt), ctx.encrypt(pk, pt)
        assert not np.array_equal(c1.a.rows, c2.a.rows)

    def test_reduced_level_encrypt(self, ctx, keys, rng):
        sk, pk, _ = keys
        z = rand_slots(ctx, rng)
        ct = ctx.encrypt(pk, ctx.encode(z, level=1))
        assert ct.level == 1
        assert np.max(np.abs(ctx.decrypt_decode(sk, ct) - z)) < 2 ** -20


class TestHomomorphicOps:
    def test_hadd_hsub(self, ctx, keys, rng):
        sk, pk, _ = keys
        z, w = rand_slots(ctx, rng), rand_slots(ctx, rng)
        c0 = ctx.encrypt(pk, ctx.encode(z))
        c1 = ctx.encrypt(pk, ctx.encode(w))
        assert np.max(np.abs(ctx.decrypt_decode(sk, ctx.hadd(c0, c1))
                             - (z + w))) < 2 ** -19
        assert np.max(np.abs(ctx.decrypt_decode(sk, ctx.hsub(c0, c1))
                             - (z - w))) < 2 ** -19

    def test_cmult_rescale(self, ctx, keys, rng):
        sk, pk, _ = keys
        z, w = rand_slots(ctx, rng), rand_slots(ctx, rng)
        ct = ctx.encrypt(pk, ctx.encode(z))
        out = ctx.rescale(ctx.cmult(ct, ctx.encode(w)))
        assert out.level == ct.level - 1
        assert np.max(np.abs(ctx.decrypt_decode(sk, out) - z * w)) < 2 ** -18

    def test_hmult_rescale(self, ctx, keys, rng):
        sk, pk, rlk = keys
        z, w = rand_slots(ctx, rng), rand_slots(ctx, rng)
        c0 = ctx.encrypt(pk, ctx.encode(z))
        c1 = ctx.encrypt(pk, ctx.encode(w))
        out = ctx.rescale(ctx.hmult(c0, c1, rlk))
        assert np.max(np.abs(ctx.decrypt_decode(sk, out) - z * w)) < 2 ** -18

    def test_three_level_circuit(self, ctx, keys, rng):
        # a 2^35 scale keeps three squarings inside the shrinking modulus:
        # the scale drifts by (scale/q_i) per rescale with 30-bit primes
        sk, pk, rlk = keys
        z = rand_slots(ctx, rng) * 0.7
        ct = ctx.encrypt(pk, ctx.encode(z, scale=1 << 35))
        acc, want = ct, z
        for _ in range(3):
            acc = ctx.rescale(ctx.hmult(acc, acc, rlk))
            want = want * want
            acc = ctx.hadd(acc, acc)
            want = want + want
        assert acc.level == ct.level - 3
        assert np.max(np.abs(ctx.decrypt_decode(sk, acc) - want)) < 2 ** -15

    def test_rescale_exhausted(self, ctx, keys, rng):
        _, pk, _ = keys
        ct = ctx.encrypt(pk, ctx.encode([0.5], level=0))
        with pytest.raises(ParameterError):
            ctx.rescale(ct)

    def test_mismatched_levels_rejected(self, ctx, keys):
        _, pk, _ = keys
        c0 = ctx.encrypt(pk, ctx.encode([0.5]))
        c1 = ctx.encrypt(pk, ctx.encode([0.5], level=1))
        with pytest.raises(ParameterError):
            ctx.hadd(c0, c1)


class TestRotation:
    def test_slot_shift(self, ctx, keys, rng):
        sk, pk, _ = keys
        rk = ctx.make_rotation_key(sk, 1)
        z = rand_slots(ctx, rng)
        ct = ctx.encrypt(pk, ctx.encode(z))
        got = ctx.decrypt_decode(sk, ctx.hrotate(ct, 1, rk))
        assert np.max(np.abs(got - np.roll(z, -1))) < 2 ** -18

    def test_rotation_inverse(self, ctx, keys, rng):
        sk, pk, _ = keys
        s = ctx.params.slots
        r = 3
        z = rand_slots(ctx, rng)
        ct = ctx.encrypt(pk, ctx.encode(z))
        fwd = ctx.hrotate(ct, r, ctx.make_rotation_key(sk, r))
        back = ctx.hrotate(fwd, s - r, ctx.make_rotation_key(sk, s - r))
        assert np.max(np.abs(ctx.decrypt_decode(sk, back) - z)) < 2 ** -17

    def test_rotation_composition(self, ctx, keys, rng):
        sk, pk, _ = keys
        z = rand_slots(ctx, rng)
        ct = ctx.encrypt(pk, ctx.encode(z))
        a = ctx.hrotate(ctx.hrotate(ct, 2, ctx.make_rotation_key(sk, 2)),
                        3, ctx.make_rotation_key(sk, 3))
        b = ctx.hrotate(ct, 5, ctx.make_rotation_key(sk, 5))
        got_a = ctx.decrypt_decode(sk, a)
        got_b = ctx.decrypt_decode(sk, b)
        assert np.max(np.abs(got_a - got_b)) < 2 ** -17

    def test_conjugation(self, ctx, keys, rng):
        sk, pk, _ = keys
        ck = ctx.make_conjugation_key(sk)
        z = rand_slots(ctx, rng)
        ct = ctx.encrypt(pk, ctx.encode(z))
        got = ctx.decrypt_decode(sk, ctx.hconjugate(ct, ck))
        assert np.max(np.abs(got - np.conj(z))) < 2 ** -18


class TestKeySwitch:
    def test_self_switch_preserves_decryption(self, ctx, keys, rng):
        sk, pk, _ = keys
        swk = ctx.make_switching_key(sk, sk.s)
        z = rand_slots(ctx, rng)
        ct = ctx.encrypt(pk, ctx.encode(z))
        ksb, ksa = ctx.key_switch(ct.a, swk)
        from rnsckks import kernels
        from rnsckks.ckks import Ciphertext
        out = Ciphertext(b=kernels.ele_add(ct.b, ksb), a=ksa,
                         scale=ct.scale, level=ct.level)
        assert np.max(np.abs(ctx.decrypt_decode(sk, out) - z)) < 2 ** -18

    def test_reduced_level_switch(self, ctx, keys, rng):
        # fewer chain primes than alpha covers means ragged slices
        sk, pk, rlk = keys
        z, w = rand_slots(ctx, rng), rand_slots(ctx, rng)
        c0 = ctx.encrypt(pk, ctx.encode(z, level=2, scale=1 << 35))
        c1 = ctx.encrypt(pk, ctx.encode(w, level=2, scale=1 << 35))
        out = ctx.rescale(ctx.hmult(c0, c1, rlk))
        assert np.max(np.abs(ctx.decrypt_decode(sk, out) - z * w)) < 2 ** -18

    def test_coeff_domain_rejected(self, ctx, keys, rng):
        sk, pk, _ = keys
        swk = ctx.make_switching_key(sk, sk.s)
        ct = ctx.encrypt(pk, ctx.encode([0.5]))
        coeff = ctx.to_coeff(ct.a)
        with pytest.raises(DomainError):
            ctx.key_switch(coeff, swk)


class TestDeterminism:
    def test_seeded_contexts_agree(self, small_params, rng):
        a = CkksContext(small_params, seed=5)
        b = CkksContext(small_params, seed=5)
        ska, _ = a.keygen()
        skb, _ = b.keygen()
        assert np.array_equal(ska.s.rows, skb.s.rows)

    def test_backend_independent_results(self, small_params, rng):
        z = rng.uniform(-1, 1, small_params.slots)
        outs = []
        for backend in ("butterfly", "gemm", "segmented"):
            c = CkksContext(small_params, backend=backend, seed=5)
            sk, pk = c.keygen()
            ct = c.encrypt(pk, c.encode(z))
            outs.append(ct.b.rows)
        assert np.array_equal(outs[0], outs[1])
        assert np.array_equal(outs[0], outs[2])


class TestSerialization:
    def test_ciphertext_roundtrip(self, ctx, keys, rng):
        _, pk, _ = keys
        digest = ctx.params.digest()
        ct = ctx.encrypt(pk, ctx.encode(rand_slots(ctx, rng)))
        blob = serialize.dump_ciphertext(ct, digest)
        again = serialize.load_ciphertext(blob, digest)
        assert np.array_equal(again.b.rows, ct.b.rows)
        assert np.array_equal(again.a.rows, ct.a.rows)
        assert again.scale == ct.scale
        assert again.level == ct.level
        assert again.b.basis == ct.b.basis

    def test_key_roundtrips(self, ctx, keys):
        sk, pk, rlk = keys
        digest = ctx.params.digest()
        sk2 = serialize.load_secret_key(
            serialize.dump_secret_key(sk, digest), digest)
        assert np.array_equal(sk2.s.rows, sk.s.rows)
        pk2 = serialize.load_public_key(
            serialize.dump_public_key(pk, digest), digest)
        assert np.array_equal(pk2.b.rows, pk.b.rows)
        rlk2 = serialize.load_switching_key(
            serialize.dump_switching_key(rlk, digest), digest)
        assert len(rlk2.pairs) == len(rlk.pairs)
        for (b1, a1), (b2, a2) in zip(rlk.pairs, rlk2.pairs):
            assert np.array_equal(b1.rows, b2.rows)
            assert np.array_equal(a1.rows, a2.rows)

    def test_digest_mismatch_rejected(self, ctx, keys, rng):
        _, pk, _ = keys
        ct = ctx.encrypt(pk, ctx.encode([0.25]))
        blob = serialize.dump_ciphertext(ct, ctx.params.digest())
        with pytest.raises(ParameterError):
            serialize.load_ciphertext(blob, b"\x00" * 8)

    def test_bad_magic_rejected(self, ctx):
        with pytest.raises(ParameterError):
            serialize.load_ciphertext(b"NOPE1" + b"\x00" * 20,
                                      ctx.params.digest())
