"""Residue-number-system polynomials and base conversion.

An RnsPolynomial stores one residue row per prime; rows are independent, so
every operation here (and in the kernels built on top) is row-parallel.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

COEFF = "coeff"
NTT = "ntt"


@dataclass(frozen=True)
class RnsPolynomial:
    """A degree-n polynomial as residue rows of 32-bit coefficients.

    Treat instances as immutable: operations return new objects and the
    backing array is marked read-only.
    """
    rows: np.ndarray        # (len(basis), n) uint32
    basis: tuple            # primes, one per row
    domain: str             # COEFF | NTT

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.uint32)
        if rows.ndim != 2 or rows.shape[0] != len(self.basis):
            raise ParameterError("row count must equal basis length")
        if self.domain not in (COEFF, NTT):
            raise ParameterError(f"bad domain {self.domain!r}")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "basis", tuple(self.basis))

    @property
    def n(self):
        return self.rows.shape[1]

    @property
    def level_count(self):
        return len(self.basis)

    def check_bounds(self):
        """Assert every residue is strictly below its row's prime."""
        q = np.array(self.basis, dtype=np.uint32)[:, None]
        assert np.all(self.rows < q), "residue out of range"

    def with_rows(self, rows, basis=None, domain=None):
        return RnsPolynomial(rows=rows,
                            basis=self.basis if basis is None else basis,
                            domain=self.domain if domain is None else domain)

    def restrict(self, basis):
        """Rows for a sub-basis, in the order given."""
        idx = [self.basis.index(r) for r in basis]
        return RnsPolynomial(rows=self.rows[idx], basis=tuple(basis),
                            domain=self.domain)

    @classmethod
    def zero(cls, basis, n, domain=COEFF):
        return cls(rows=np.zeros((len(basis), n), dtype=np.uint32),
                   basis=tuple(basis), domain=domain)

    def to_csv(self, path):
        """Debug dump: one CSV row per prime (prime first, then residues)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["prime"] + [f"c{i}" for i in range(self.n)])
            for q, row in zip(self.basis, self.rows):
                w.writerow([q] + row.tolist())


def crt_decompose(coeffs, basis):
    """Reduce arbitrary-precision coefficients into residue rows.

    Accepts a list of Python ints (any size) or an integer ndarray.
    Negative values are mapped to their canonical nonnegative residues.
    """
    basis = tuple(basis)
    if not basis:
        raise ParameterError("empty basis")
    coeffs = [int(c) for c in coeffs]
    rows = np.empty((len(basis), len(coeffs)), dtype=np.uint32)
    for i, q in enumerate(basis):
        rows[i] = np.array([c % q for c in coeffs], dtype=np.uint32)
    return RnsPolynomial(rows=rows, basis=basis, domain=COEFF)


def crt_compose(poly):
    """CRT-reconstruct the unique representatives in [0, prod(basis)).

    Returns a list of Python ints.
    """
    if poly.domain != COEFF:
        raise DomainError("crt_compose needs coefficient-domain input")
    basis = poly.basis
    big_q = 1
    for q in basis:
        big_q *= q
    terms = []
    for i, q in enumerate(basis):
        m_i = big_q // q
        y_i = pow(m_i, -1, q)
        terms.append((m_i * y_i, poly.rows[i]))
    out = []
    for j in range(poly.n):
        acc = 0
        for factor, row in terms:
            acc += factor * int(row[j])
        out.append(acc % big_q)
    return out


def fast_basis_conv(poly, target):
    """Approximate RNS base conversion from poly.basis to target primes.

    Computes b_j = sum_i [a_i * (Q/q_i)^{-1}]_{q_i} * (Q/q_i) mod p_j.
    The result can exceed the exact conversion by e*Q with
    0 <= e < len(poly.basis); downstream ModDown absorbs that slack.
    Shared primes between the two bases are copied through unchanged.
    """
    if poly.domain != COEFF:
        raise DomainError("fast_basis_conv needs coefficient-domain input")
    target = tuple(target)
    if not target:
        raise ParameterError("empty target basis")
    src = poly.basis
    big_q = 1
    for q in src:
        big_q *= q
    # y_i = [a_i * (Q/q_i)^{-1}]_{q_i}
    ys = []
    for i, q in enumerate(src):
        qhat_inv = pow(big_q // q, -1, q)
        ys.append((poly.rows[i].astype(np.uint64) * np.uint64(qhat_inv))
                  % np.uint64(q))
    out = np.empty((len(target), poly.n), dtype=np.uint32)
    for j, p in enumerate(target):
        if p in src:
            out[j] = poly.rows[src.index(p)]
            continue
        acc = np.zeros(poly.n, dtype=np.uint64)
        pj = np.uint64(p)
        for i, q in enumerate(src):
            f = np.uint64((big_q // q) % p)
            acc = (acc + ys[i] * f % pj) % pj
        out[j] = acc
    return RnsPolynomial(rows=out, basis=target, domain=COEFF)


def gks_decompose(poly, dnum):
    """Split the residue rows into dnum contiguous slices of alpha rows."""
    if poly.domain != COEFF:
        raise DomainError("gks_decompose needs coefficient-domain input")
    count = poly.level_count
    if count % dnum != 0:
        raise ParameterError(f"basis length {count} not divisible by {dnum}")
    alpha = count // dnum
    out = []
    for j in range(dnum):
        sl = slice(j * alpha, (j + 1) * alpha)
        out.append(RnsPolynomial(rows=poly.rows[sl], basis=poly.basis[sl],
                                domain=poly.domain))
    return out
