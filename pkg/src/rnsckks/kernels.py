"""Elementwise polynomial kernels and Galois automorphisms.

All kernels are row-parallel over the residue basis and return new
polynomials; operands must agree on basis and domain.
"""

import numpy as np

from .errors import DomainError, ParameterError
from .rns import COEFF, NTT, RnsPolynomial

GALOIS_GEN = 5  # generator of the slot-rotation subgroup mod 2n


def _check_pair(a, b):
    if a.basis != b.basis:
        raise ParameterError("operand bases differ")
    if a.domain != b.domain:
        raise DomainError("operand domains differ")
    if a.n != b.n:
        raise ParameterError("operand degrees differ")


def _rowwise(a, b, fn):
    _check_pair(a, b)
    out = np.empty_like(a.rows)
    for i, q in enumerate(a.basis):
        out[i] = fn(a.rows[i].astype(np.uint64),
                    b.rows[i].astype(np.uint64), np.uint64(q))
    return a.with_rows(out)


def ele_add(a, b):
    """Residue-wise (a + b) mod q_i."""
    return _rowwise(a, b, lambda x, y, q: (x + y) % q)


def ele_sub(a, b):
    """Residue-wise (a - b) mod q_i."""
    return _rowwise(a, b, lambda x, y, q: (x + q - y) % q)


def hada_mult(a, b):
    """Hadamard (slot-wise) product; only meaningful in the ntt domain."""
    if a.domain != NTT:
        raise DomainError("hada_mult needs ntt-domain operands")
    return _rowwise(a, b, lambda x, y, q: x * y % q)


def scalar_rows_mult(a, scalars):
    """Multiply row i by the constant scalars[i] (already reduced mod q_i)."""
    if len(scalars) != a.level_count:
        raise ParameterError("one scalar per residue row required")
    out = np.empty_like(a.rows)
    for i, q in enumerate(a.basis):
        out[i] = a.rows[i].astype(np.uint64) * np.uint64(scalars[i] % q) \
            % np.uint64(q)
    return a.with_rows(out)


def negate(a):
    """Residue-wise additive inverse."""
    out = np.empty_like(a.rows)
    for i, q in enumerate(a.basis):
        row = a.rows[i].astype(np.uint64)
        out[i] = (np.uint64(q) - row) % np.uint64(q)
    return a.with_rows(out)


def galois_element(r, n, conj=False):
    """The automorphism exponent t with x -> x^t for rotation step r."""
    if conj:
        return 2 * n - 1
    return pow(GALOIS_GEN, r % n, 2 * n)


def _ntt_permutation(t, n):
    """Index map for x -> x^t applied to the ntt evaluation grid.

    Point k holds the evaluation at psi^(2k+1); after the automorphism it
    must hold the evaluation at psi^(t(2k+1)), which lives at index
    (t(2k+1) - 1)/2 mod n of the input.
    """
    k = np.arange(n, dtype=np.int64)
    return ((t * (2 * k + 1)) % (2 * n) - 1) // 2


def apply_automorphism(a, t):
    """Apply the ring automorphism x -> x^t (t odd) to every residue row."""
    n = a.n
    if t % 2 == 0:
        raise ParameterError("automorphism exponent must be odd")
    t %= 2 * n
    if a.domain == NTT:
        src = _ntt_permutation(t, n)
        return a.with_rows(np.ascontiguousarray(a.rows[:, src]))
    # coefficient domain: x^i -> x^(ti), folding x^n = -1 into a sign
    i = np.arange(n, dtype=np.int64)
    e = (t * i) % (2 * n)
    dest = e % n
    neg = e >= n
    out = np.zeros_like(a.rows)
    for row, q in enumerate(a.basis):
        vals = a.rows[row].astype(np.uint64)
        vals = np.where(neg, (np.uint64(q) - vals) % np.uint64(q), vals)
        out[row, dest] = vals
    return a.with_rows(out)


def forbenius_map(a, r):
    """Slot-rotation automorphism for step r (x -> x^(5^r))."""
    return apply_automorphism(a, galois_element(r, a.n))


def conjugate(a):
    """Complex-conjugation automorphism (x -> x^(2n-1))."""
    return apply_automorphism(a, 2 * a.n - 1)
