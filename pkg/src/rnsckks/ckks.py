"""RNS-CKKS scheme operations on top of the NTT and kernel layers.

The context owns the parameter set, the per-prime NTT tables and the chosen
transform backend; everything it produces (keys, ciphertexts) carries plain
RnsPolynomial components so the backends stay interchangeable.

Key switching follows the generalized decomposition: the L+1 chain primes
split into dnum slices of alpha primes, each slice is raised to the full
extended basis (ModUp), paired against one switching-key element, and the
accumulated result is scaled back down by the special modulus (ModDown).
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels, ntt
from .errors import DomainError, ParameterError
from .rns import (COEFF, NTT, RnsPolynomial, crt_compose, crt_decompose,
                  fast_basis_conv)

SIGMA = 3.2
NOISE_BOUND = 19  # ~6 sigma truncation


@dataclass(frozen=True)
class Plaintext:
    poly: RnsPolynomial       # ntt domain
    scale: Fraction
    level: int


@dataclass(frozen=True)
class Ciphertext:
    b: RnsPolynomial          # ntt domain
    a: RnsPolynomial
    scale: Fraction
    level: int

    def __post_init__(self):
        if self.b.basis != self.a.basis:
            raise ParameterError("ciphertext component bases differ")


@dataclass(frozen=True)
class SecretKey:
    s: RnsPolynomial          # ntt domain, over the full extended basis


@dataclass(frozen=True)
class PublicKey:
    b: RnsPolynomial
    a: RnsPolynomial


@dataclass(frozen=True)
class SwitchingKey:
    """dnum pairs (b_j, a_j) over the extended basis, ntt domain."""
    pairs: tuple


class CkksContext:
    """Stateful CKKS engine bound to one parameter set and NTT backend."""

    def __init__(self, params, backend="butterfly", seed=0, workers=None):
        if backend not in ntt.BACKENDS:
            raise ParameterError(f"unknown backend {backend!r}")
        self.params = params
        self.backend = backend
        self.workers = workers
        self.rng = np.random.default_rng(seed)
        self.ext_basis = params.chain.q + params.chain.p
        self.table = ntt.TwiddleTable(params.n, self.ext_basis)
        self._rot_index = self._slot_index_table()

    # -- transforms --------------------------------------------------------

    def to_ntt(self, poly):
        return ntt.ntt_forward(poly, self.table, self.backend, self.workers)

    def to_coeff(self, poly):
        return ntt.ntt_inverse(poly, self.table, self.backend, self.workers)

    # -- sampling ----------------------------------------------------------

    def _sample_gaussian(self):
        e = np.rint(self.rng.normal(0.0, SIGMA, self.params.n)).astype(np.int64)
        return np.clip(e, -NOISE_BOUND, NOISE_BOUND)

    def _sample_ternary(self, hamming=None):
        n = self.params.n
        s = np.zeros(n, dtype=np.int64)
        if hamming is None:
            s[:] = self.rng.integers(-1, 2, n)
        else:
            pos = self.rng.choice(n, size=hamming, replace=False)
            s[pos] = self.rng.choice([-1, 1], size=hamming)
        return s

    def _sample_uniform(self, basis):
        rows = np.empty((len(basis), self.params.n), dtype=np.uint32)
        for i, q in enumerate(basis):
            rows[i] = self.rng.integers(0, q, self.params.n, dtype=np.uint64)
        return RnsPolynomial(rows=rows, basis=basis, domain=NTT)

    def _encode_signed(self, vals, basis):
        return self.to_ntt(crt_decompose(vals, basis))

    # -- key generation ----------------------------------------------------

    def keygen(self):
        """Secret key plus the matching public key."""
        s = self._sample_ternary(self.params.h)
        sk = SecretKey(s=self._encode_signed(s, self.ext_basis))
        pk = self._make_encryption_key(sk)
        return sk, pk

    def _make_encryption_key(self, sk):
        basis = self.params.q_basis()
        a = self._sample_uniform(basis)
        e = self._encode_signed(self._sample_gaussian(), basis)
        s_q = sk.s.restrict(basis)
        b = kernels.ele_sub(e, kernels.hada_mult(a, s_q))
        return PublicKey(b=b, a=a)

    def make_switching_key(self, sk, target_s):
        """Key that re-expresses a ciphertext under target_s in terms of sk.

        target_s is the source secret (ntt domain, extended basis); each of
        the dnum key elements embeds P * target_s on one slice of the chain
        primes and encrypts it under sk over the full extended basis.
        """
        p = self.params
        big_p = p.special_modulus()
        pairs = []
        for j in range(p.dnum):
            a = self._sample_uniform(self.ext_basis)
            e = self._encode_signed(self._sample_gaussian(), self.ext_basis)
            b = kernels.ele_sub(e, kernels.hada_mult(a, sk.s))
            # add f_j * target_s, where f_j is P on slice j's chain primes
            rows = b.rows.copy()
            lo, hi = j * p.alpha, (j + 1) * p.alpha
            for i in range(lo, hi):
                q = self.ext_basis[i]
                f = np.uint64(big_p % q)
                rows[i] = (rows[i].astype(np.uint64)
                           + target_s.rows[i].astype(np.uint64) * f
                           % np.uint64(q)) % np.uint64(q)
            pairs.append((b.with_rows(rows), a))
        return SwitchingKey(pairs=tuple(pairs))

    def make_relin_key(self, sk):
        s2 = kernels.hada_mult(sk.s, sk.s)
        return self.make_switching_key(sk, s2)

    def make_rotation_key(self, sk, r):
        return self.make_switching_key(sk, kernels.forbenius_map(sk.s, r))

    def make_conjugation_key(self, sk):
        return self.make_switching_key(sk, kernels.conjugate(sk.s))

    # -- encoding ----------------------------------------------------------

    def _slot_index_table(self):
        n = self.params.n
        idx = np.empty(n // 2, dtype=np.int64)
        cidx = np.empty(n // 2, dtype=np.int64)
        g = 1
        for j in range(n // 2):
            idx[j] = (g - 1) // 2
            cidx[j] = (2 * n - g - 1) // 2
            g = (g * kernels.GALOIS_GEN) % (2 * n)
        return idx, cidx

    def encode(self, values, level=None, scale=None):
        """Embed up to n/2 complex slots into a scaled integer polynomial."""
        p = self.params
        if level is None:
            level = p.l_max
        if scale is None:
            scale = p.default_scale
        n = p.n
        z = np.zeros(n // 2, dtype=np.complex128)
        values = np.asarray(values)
        if values.size > n // 2:
            raise ParameterError(f"too many slots: {values.size} > {n // 2}")
        z[:values.size] = values
        idx, cidx = self._rot_index
        evals = np.zeros(n, dtype=np.complex128)
        evals[idx] = z * float(scale)
        evals[cidx] = np.conj(z) * float(scale)
        m = np.arange(n)
        zeta = np.exp(1j * np.pi / n)
        coeffs = np.real(np.fft.fft(evals) / n * zeta ** (-m))
        ints = [int(c) for c in np.rint(coeffs)]
        basis = p.q_basis(level)
        return Plaintext(poly=self.to_ntt(crt_decompose(ints, basis)),
                         scale=Fraction(scale), level=level)

    def decode(self, pt):
        """Recover the complex slot values of a plaintext."""
        coeffs = self._centered(self.to_coeff(pt.poly))
        return self._decode_ints(coeffs, pt.scale)

    def _decode_ints(self, coeffs, scale):
        n = self.params.n
        m = np.arange(n)
        zeta = np.exp(1j * np.pi / n)
        vals = np.array([float(c) for c in coeffs]) * zeta ** m
        evals = n * np.fft.ifft(vals)
        idx, _ = self._rot_index
        return evals[idx] / float(scale)

    def _centered(self, poly):
        """Coefficient list in (-Q/2, Q/2] from a coeff-domain polynomial."""
        big_q = 1
        for q in poly.basis:
            big_q *= q
        half = big_q // 2
        return [c - big_q if c > half else c for c in crt_compose(poly)]

    # -- encryption --------------------------------------------------------

    def encrypt(self, pk, pt):
        basis = pt.poly.basis
        v = self._encode_signed(self._sample_ternary(), basis)
        e0 = self._encode_signed(self._sample_gaussian(), basis)
        e1 = self._encode_signed(self._sample_gaussian(), basis)
        b = kernels.ele_add(
            kernels.ele_add(kernels.hada_mult(v, pk.b.restrict(basis)), e0),
            pt.poly)
        a = kernels.ele_add(kernels.hada_mult(v, pk.a.restrict(basis)), e1)
        return Ciphertext(b=b, a=a, scale=pt.scale, level=pt.level)

    def decrypt(self, sk, ct):
        s = sk.s.restrict(ct.b.basis)
        m = kernels.ele_add(ct.b, kernels.hada_mult(ct.a, s))
        return Plaintext(poly=m, scale=ct.scale, level=ct.level)

    def decrypt_decode(self, sk, ct):
        return self.decode(self.decrypt(sk, ct))

    # -- homomorphic operations -------------------------------------------

    def hadd(self, c0, c1):
        self._check_aligned(c0, c1)
        return Ciphertext(b=kernels.ele_add(c0.b, c1.b),
                          a=kernels.ele_add(c0.a, c1.a),
                          scale=c0.scale, level=c0.level)

    def hsub(self, c0, c1):
        self._check_aligned(c0, c1)
        return Ciphertext(b=kernels.ele_sub(c0.b, c1.b),
                          a=kernels.ele_sub(c0.a, c1.a),
                          scale=c0.scale, level=c0.level)

    def cmult(self, ct, pt):
        if pt.level != ct.level:
            raise ParameterError("plaintext level does not match ciphertext")
        return Ciphertext(b=kernels.hada_mult(ct.b, pt.poly),
                          a=kernels.hada_mult(ct.a, pt.poly),
                          scale=ct.scale * pt.scale, level=ct.level)

    def hmult(self, c0, c1, rlk):
        self._check_aligned(c0, c1, scale=False)
        d0 = kernels.hada_mult(c0.b, c1.b)
        d1 = kernels.ele_add(kernels.hada_mult(c0.a, c1.b),
                             kernels.hada_mult(c1.a, c0.b))
        d2 = kernels.hada_mult(c0.a, c1.a)
        ksb, ksa = self.key_switch(d2, rlk)
        return Ciphertext(b=kernels.ele_add(d0, ksb),
                          a=kernels.ele_add(d1, ksa),
                          scale=c0.scale * c1.scale, level=c0.level)

    def hrotate(self, ct, r, rot_key):
        """Cyclically rotate the slots left by r: out[j] = in[(j+r) % slots]."""
        b = kernels.forbenius_map(ct.b, r)
        a = kernels.forbenius_map(ct.a, r)
        ksb, ksa = self.key_switch(a, rot_key)
        return Ciphertext(b=kernels.ele_add(b, ksb), a=ksa,
                          scale=ct.scale, level=ct.level)

    def hconjugate(self, ct, conj_key):
        b = kernels.conjugate(ct.b)
        a = kernels.conjugate(ct.a)
        ksb, ksa = self.key_switch(a, conj_key)
        return Ciphertext(b=kernels.ele_add(b, ksb), a=ksa,
                          scale=ct.scale, level=ct.level)

    def rescale(self, ct):
        """Drop the top chain prime and divide the scale by it."""
        if ct.level < 1:
            raise ParameterError("no levels left to rescale")
        q_top = ct.b.basis[-1]
        b = self._rescale_poly(ct.b, q_top)
        a = self._rescale_poly(ct.a, q_top)
        return Ciphertext(b=b, a=a, scale=ct.scale / q_top,
                          level=ct.level - 1)

    def _rescale_poly(self, poly, q_top):
        c = self.to_coeff(poly)
        top = c.rows[-1].astype(np.uint64)
        out = np.empty((c.level_count - 1, c.n), dtype=np.uint32)
        for i, q in enumerate(c.basis[:-1]):
            qq = np.uint64(q)
            inv = np.uint64(pow(q_top, -1, q))
            diff = (c.rows[i].astype(np.uint64) + qq - top % qq) % qq
            out[i] = diff * inv % qq
        return self.to_ntt(RnsPolynomial(rows=out, basis=c.basis[:-1],
                                         domain=COEFF))

    def _check_aligned(self, c0, c1, scale=True):
        if c0.level != c1.level:
            raise ParameterError("ciphertext levels differ")
        if scale and c0.scale != c1.scale:
            raise ParameterError("ciphertext scales differ")

    # -- key switching -----------------------------------------------------

    def key_switch(self, d, swk):
        """Switch d (ntt domain, chain-prime basis) to the key's secret.

        Returns the (b, a) pair over d's basis.  Each nonempty prefix slice
        of d's rows is raised to the extended basis (chain primes at d's
        level plus the specials), multiplied against its key pair and summed;
        the total is divided by the special modulus P.
        """
        if d.domain != NTT:
            raise DomainError("key_switch needs an ntt-domain input")
        p = self.params
        basis = d.basis
        level = len(basis) - 1
        ext = basis + p.special_basis
        acc_b = RnsPolynomial.zero(ext, d.n, domain=NTT)
        acc_a = RnsPolynomial.zero(ext, d.n, domain=NTT)
        for j in range(p.dnum):
            lo = j * p.alpha
            if lo > level:
                break
            hi = min((j + 1) * p.alpha, level + 1)
            part = RnsPolynomial(rows=d.rows[lo:hi], basis=basis[lo:hi],
                                 domain=NTT)
            raised = self._mod_up(part, ext)
            kb, ka = swk.pairs[j]
            acc_b = kernels.ele_add(acc_b,
                                    kernels.hada_mult(raised,
                                                      kb.restrict(ext)))
            acc_a = kernels.ele_add(acc_a,
                                    kernels.hada_mult(raised,
                                                      ka.restrict(ext)))
        return self._mod_down(acc_b, basis), self._mod_down(acc_a, basis)

    def _mod_up(self, part, ext):
        """Extend a slice to the full basis via fast base conversion."""
        coeff = self.to_coeff(part)
        missing = tuple(q for q in ext if q not in part.basis)
        conv = self.to_ntt(fast_basis_conv(coeff, missing))
        rows = np.empty((len(ext), part.n), dtype=np.uint32)
        for i, q in enumerate(ext):
            if q in part.basis:
                rows[i] = part.rows[part.basis.index(q)]
            else:
                rows[i] = conv.rows[missing.index(q)]
        return RnsPolynomial(rows=rows, basis=ext, domain=NTT)

    def _mod_down(self, poly, target):
        """Divide by the special modulus P and return to the chain basis."""
        p = self.params
        specials = p.special_basis
        special_part = self.to_coeff(poly.restrict(specials))
        conv = self.to_ntt(fast_basis_conv(special_part, target))
        big_p = p.special_modulus()
        out = np.empty((len(target), poly.n), dtype=np.uint32)
        for i, q in enumerate(target):
            qq = np.uint64(q)
            inv = np.uint64(pow(big_p, -1, q))
            x = poly.rows[poly.basis.index(q)].astype(np.uint64)
            y = conv.rows[i].astype(np.uint64)
            out[i] = (x + qq - y) % qq * inv % qq
        return RnsPolynomial(rows=out, basis=tuple(target), domain=NTT)
