import numpy as np
import pytest

from rnsckks import kernels, ntt
from rnsckks import params as par
from rnsckks.errors import DomainError, ParameterError
from rnsckks.rns import COEFF, NTT, RnsPolynomial

N = 64
BASIS = tuple(par.generate_primes(N, [30, 26]))


def rand_poly(rng, domain=NTT):
    rows = np.stack([rng.integers(0, q, N).astype(np.uint32) for q in BASIS])
    return RnsPolynomial(rows=rows, basis=BASIS, domain=domain)


class TestElementwise:
    def test_add_sub_mult_against_bigint(self, rng):
        a = rand_poly(rng)
        b = rand_poly(rng)
        s = kernels.ele_add(a, b)
        d = kernels.ele_sub(a, b)
        m = kernels.hada_mult(a, b)
        for i, q in enumerate(BASIS):
            for j in range(N):
                x, y = int(a.rows[i][j]), int(b.rows[i][j])
                assert s.rows[i][j] == (x + y) % q
                assert d.rows[i][j] == (x - y) % q
                assert m.rows[i][j] == x * y % q

    def test_add_sub_inverse(self, rng):
        a = rand_poly(rng)
        b = rand_poly(rng)
        assert np.array_equal(kernels.ele_sub(kernels.ele_add(a, b), b).rows,
                              a.rows)

    def test_negate(self, rng):
        a = rand_poly(rng)
        z = kernels.ele_add(a, kernels.negate(a))
        assert not z.rows.any()

    def test_hada_mult_requires_ntt_domain(self, rng):
        a = rand_poly(rng, COEFF)
        with pytest.raises(DomainError):
            kernels.hada_mult(a, a)

    def test_mismatched_bases_rejected(self, rng):
        a = rand_poly(rng)
        b = a.restrict(BASIS[:1])
        with pytest.raises(ParameterError):
            kernels.ele_add(a, b)

    def test_scalar_rows_mult(self, rng):
        a = rand_poly(rng)
        out = kernels.scalar_rows_mult(a, [3, 5])
        for i, (q, c) in enumerate(zip(BASIS, [3, 5])):
            assert np.array_equal(
                out.rows[i],
                (a.rows[i].astype(np.uint64) * c % q).astype(np.uint32))


class TestAutomorphisms:
    def test_coeff_matches_polynomial_substitution(self, rng):
        # x -> x^t on coefficients, checked against big-int substitution
        a = rand_poly(rng, COEFF)
        t = 5
        out = kernels.apply_automorphism(a, t)
        for i, q in enumerate(BASIS):
            want = [0] * N
            for m in range(N):
                e = (t * m) % (2 * N)
                v = int(a.rows[i][m])
                if e >= N:
                    want[e - N] = (-v) % q
                else:
                    want[e] = v
            assert out.rows[i].tolist() == want

    def test_ntt_and_coeff_agree(self, rng):
        table = ntt.TwiddleTable(N, BASIS)
        a = rand_poly(rng, COEFF)
        for t in (5, 25, 2 * N - 1):
            via_coeff = ntt.ntt_forward(kernels.apply_automorphism(a, t),
                                        table)
            via_ntt = kernels.apply_automorphism(ntt.ntt_forward(a, table), t)
            assert np.array_equal(via_coeff.rows, via_ntt.rows)

    def test_even_exponent_rejected(self, rng):
        with pytest.raises(ParameterError):
            kernels.apply_automorphism(rand_poly(rng), 4)

    def test_rotation_composition(self, rng):
        a = rand_poly(rng)
        r1r2 = kernels.forbenius_map(kernels.forbenius_map(a, 3), 4)
        direct = kernels.forbenius_map(a, 7)
        assert np.array_equal(r1r2.rows, direct.rows)

    def test_rotation_full_cycle_is_identity(self, rng):
        a = rand_poly(rng)
        out = kernels.forbenius_map(a, N // 2)
        assert np.array_equal(out.rows, a.rows)

    def test_conjugate_involution(self, rng):
        a = rand_poly(rng)
        out = kernels.conjugate(kernels.conjugate(a))
        assert np.array_equal(out.rows, a.rows)

    def test_galois_element_values(self):
        assert kernels.galois_element(0, N) == 1
        assert kernels.galois_element(1, N) == 5
        assert kernels.galois_element(0, N, conj=True) == 2 * N - 1
