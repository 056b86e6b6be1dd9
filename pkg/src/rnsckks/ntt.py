"""Negacyclic NTT/INTT with three interchangeable backends.

All backends compute the same transform bit-exactly:

    A_k = sum_n a_n * psi^(2nk+n) mod q        (psi of order 2n)

* ``butterfly``  -- reference in-place Cooley-Tukey (forward) and
  Gentleman-Sande (inverse) butterflies.
* ``gemm``       -- the transform as three matrix multiplications over the
  Cooley-Tukey split n = n1*n2, with 64-bit accumulation and reductions
  spaced as widely as the prime width allows.
* ``segmented``  -- the gemm route with every u32 matrix split into four
  byte planes, multiplied pairwise under emulated tensor-core constraints
  (8-bit operands, 32-bit signed accumulators) and re-fused mod q.

Index mapping for the gemm route (fixed by requiring oracle equality):
input a reshaped row-major to (n1, n2); output matrix flattened
column-major, i.e. out[n1*k2 + k1] = Y[k1][k2].
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import params as par
from .errors import DomainError, ParameterError
from .rns import COEFF, NTT, RnsPolynomial

BACKENDS = ("butterfly", "gemm", "segmented")

#: Running instrumentation for the emulated tensor-core constraint checks.
TCU_STATS = {"gemm_calls": 0, "max_accumulator": 0, "max_operand": 0}


def reset_tcu_stats():
    TCU_STATS.update(gemm_calls=0, max_accumulator=0, max_operand=0)


# ---------------------------------------------------------------------------
# reference oracle
# ---------------------------------------------------------------------------

def ntt_oracle(a, q, psi):
    """Ground-truth negacyclic NTT by direct O(n^2) evaluation.

    Each product is reduced before the 64-bit summation, so no intermediate
    can overflow for n <= 2^18 and q < 2^32.
    """
    a = np.asarray(a, dtype=np.uint64)
    n = a.shape[0]
    pows = par._power_table(psi, 2 * n, q)
    k = np.arange(n, dtype=np.int64)
    out = np.empty(n, dtype=np.uint64)
    qq = np.uint64(q)
    for kk in range(n):
        exps = (2 * kk * k + k) % (2 * n)
        out[kk] = np.sum(pows[exps] * a % qq) % qq
    return out


# ---------------------------------------------------------------------------
# modular matmul with spaced reductions
# ---------------------------------------------------------------------------

def _chunk_terms(q):
    """How many 64-bit product terms can accumulate before a reduction."""
    return max(1, int(((1 << 64) - q) // ((q - 1) ** 2)))


def matmul_mod(a, b, q):
    """(a @ b) mod q for uint64 operands with entries < q.

    Accumulates in 64 bits, reducing once per chunk of the inner dimension;
    for primes of 24 bits or less the chunk covers the whole inner dimension,
    i.e. a single final reduction.
    """
    inner = a.shape[-1]
    chunk = _chunk_terms(q)
    qq = np.uint64(q)
    acc = None
    for s in range(0, inner, chunk):
        part = a[..., s:s + chunk] @ b[..., s:s + chunk, :]
        acc = part % qq if acc is None else (acc + part % qq) % qq
    return acc


# ---------------------------------------------------------------------------
# twiddle/butterfly table container
# ---------------------------------------------------------------------------

def _bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


@dataclass
class _PrimeTables:
    q: int
    psi: int
    n_inv: int
    fwd: par.TwiddleFactorSet = None
    inv: par.TwiddleFactorSet = None
    fwd_seg: par.SegmentedTwiddles = None
    inv_seg: par.SegmentedTwiddles = None
    psi_br: np.ndarray = None       # psi^brv(i), CT forward
    psi_inv_br: np.ndarray = None   # psi^-brv(i), GS inverse


class TwiddleTable:
    """Lazily built per-prime NTT tables for one polynomial degree."""

    def __init__(self, n, primes):
        self.n = n
        self.plan = par.build_ntt_plan(n)
        self._entries = {}
        for q in primes:
            psi = par.find_negacyclic_root(q, n)
            self._entries[q] = _PrimeTables(q=q, psi=psi,
                                            n_inv=pow(n, q - 2, q))
        self._rev = _bit_reverse_indices(n)

    @property
    def primes(self):
        return tuple(self._entries)

    def entry(self, q):
        try:
            return self._entries[q]
        except KeyError:
            raise ParameterError(f"no twiddles prepared for prime {q}")

    def twiddles(self, q, direction):
        e = self.entry(q)
        if direction == "fwd":
            if e.fwd is None:
                e.fwd = par.build_twiddles(self.plan, q, e.psi, "fwd")
            return e.fwd
        if e.inv is None:
            e.inv = par.build_twiddles(self.plan, q, e.psi, "inv")
        return e.inv

    def segmented(self, q, direction):
        e = self.entry(q)
        if direction == "fwd":
            if e.fwd_seg is None:
                e.fwd_seg = par.segment_twiddles(self.twiddles(q, "fwd"))
            return e.fwd_seg
        if e.inv_seg is None:
            e.inv_seg = par.segment_twiddles(self.twiddles(q, "inv"))
        return e.inv_seg

    def butterfly(self, q):
        e = self.entry(q)
        if e.psi_br is None:
            pows = par._power_table(e.psi, self.n, q)
            ipows = par._power_table(pow(e.psi, q - 2, q), self.n, q)
            e.psi_br = pows[self._rev]
            e.psi_inv_br = ipows[self._rev]
        return e


# ---------------------------------------------------------------------------
# butterfly backend (batched over leading axis)
# ---------------------------------------------------------------------------

def _butterfly_forward(x, q, tables, rev):
    """CT decimation-in-time forward butterflies, natural-order output."""
    b, n = x.shape
    qq = np.uint64(q)
    psi_br = tables.psi_br
    t, m = n, 1
    while m < n:
        t //= 2
        x = x.reshape(b, m, 2 * t)
        s = psi_br[m:2 * m][None, :, None]
        u = x[:, :, :t]
        v = x[:, :, t:] * s % qq
        x = np.concatenate(((u + v) % qq, (u + qq - v) % qq), axis=2)
        m *= 2
    return x.reshape(b, n)[:, rev]


def _butterfly_inverse(x, q, tables, rev):
    """GS decimation-in-frequency inverse butterflies plus the n^-1 factor."""
    b, n = x.shape
    qq = np.uint64(q)
    ipsi_br = tables.psi_inv_br
    x = x[:, rev]
    t, m = 1, n
    while m > 1:
        h = m // 2
        x = x.reshape(b, h, 2 * t)
        s = ipsi_br[h:2 * h][None, :, None]
        u = x[:, :, :t]
        v = x[:, :, t:]
        x = np.concatenate(((u + v) % qq, (u + qq - v) * s % qq), axis=2)
        t *= 2
        m = h
    return x.reshape(b, n) * np.uint64(tables.n_inv) % qq


# ---------------------------------------------------------------------------
# gemm backend
# ---------------------------------------------------------------------------

def _gemm_transform(x, q, tw, plan, n_inv=None):
    b = x.shape[0]
    n1, n2 = plan.n1, plan.n2
    qq = np.uint64(q)
    a = x.reshape(b, n1, n2)
    s = matmul_mod(np.broadcast_to(tw.w1, (b, n1, n1)), a, q)
    p = s * tw.w2[None] % qq
    y = matmul_mod(p, tw.w3, q)
    if n_inv is not None:
        y = y * np.uint64(n_inv) % qq
    return y.transpose(0, 2, 1).reshape(b, plan.n)


# ---------------------------------------------------------------------------
# segmented (emulated tensor-core) backend
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ByteMatrix:
    """An 8-bit operand matrix with its declared storage order."""
    data: np.ndarray   # uint8, logical shape (rows, cols)
    layout: str        # "row" | "col"

    def __post_init__(self):
        if self.data.dtype != np.uint8:
            raise ParameterError("ByteMatrix requires uint8 elements")
        if self.layout not in ("row", "col"):
            raise ParameterError(f"bad layout {self.layout!r}")


def segment_matrix(m):
    """Stage 1: split a u32 matrix into four column-major byte planes."""
    planes = par.split_bytes(m)
    return [ByteMatrix(data=np.asfortranarray(p), layout="col")
            for p in planes]


def _tcu_gemm_raw(a, b):
    """Exact byte-matrix product under the emulated TCU contract.

    Operands must be uint8 (the hardware's 8-bit limit); accumulation is
    exact in int64 and asserted to stay below 2^31, mirroring the 32-bit
    signed accumulator.  No modular reduction happens here.
    """
    if a.dtype != np.uint8 or b.dtype != np.uint8:
        raise ParameterError("tcu operands must be 8-bit")
    inner = a.shape[-1]
    if inner != b.shape[-2]:
        raise ParameterError("tcu operand shapes do not match")
    if inner > par.MAX_N1:
        raise ParameterError(f"inner dimension {inner} risks 32-bit overflow")
    out = a.astype(np.int64) @ b.astype(np.int64)
    peak = int(out.max(initial=0))
    TCU_STATS["gemm_calls"] += 1
    TCU_STATS["max_accumulator"] = max(TCU_STATS["max_accumulator"], peak)
    TCU_STATS["max_operand"] = max(TCU_STATS["max_operand"],
                                   int(a.max(initial=0)), int(b.max(initial=0)))
    assert peak < 1 << 31, "emulated 32-bit accumulator overflow"
    return out.astype(np.int32)


def tcu_gemm(a, b):
    """Stages 2 and 4: one partial byte-matrix GEMM, 32-bit accumulation."""
    return _tcu_gemm_raw(a.data, b.data)


def fuse_partials(partials, q):
    """Stages 3/5: recombine the 16 partial products into a mod-q matrix.

    ``partials`` is indexed [i][j] (byte plane of the left and right
    operand); each partial is reduced mod q before being weighted by
    2^(8(i+j)) mod q, and the weighted sum is reduced in 64 bits.
    """
    partials = np.asarray(partials)
    qq = np.uint64(q)
    acc = np.zeros(partials.shape[2:], dtype=np.uint64)
    for i in range(4):
        for j in range(4):
            w = np.uint64(pow(1 << (8 * (i + j)), 1, q))
            acc = (acc + partials[i, j].astype(np.uint64) % qq * w % qq) % qq
    return acc.astype(np.uint32)


def hadamard_stage(fused, w2, q):
    """Stage 3 tail: (fused . w2) mod q, re-segmented for the next GEMM."""
    if fused.shape != w2.shape:
        raise ParameterError("hadamard operands must share a shape")
    qq = np.uint64(q)
    prod = (fused.astype(np.uint64) * np.asarray(w2, dtype=np.uint64) % qq)
    return segment_matrix(prod.astype(np.uint32))


def _segmented_stage_pairs(left_planes, right_planes, workers=None):
    """Run the 16 partial GEMMs; order-free tasks, deterministic fusion."""
    keys = [(i, j) for i in range(4) for j in range(4)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {k: pool.submit(_tcu_gemm_raw, left_planes[k[0]],
                                   right_planes[k[1]]) for k in keys}
            results = {k: f.result() for k, f in futs.items()}
    else:
        results = {k: _tcu_gemm_raw(left_planes[k[0]], right_planes[k[1]])
                   for k in keys}
    shape = results[(0, 0)].shape
    out = np.empty((4, 4) + shape, dtype=np.int64)
    for (i, j), v in results.items():
        out[i, j] = v
    return out


def _segmented_transform(x, q, seg, plan, n_inv=None, workers=None):
    b = x.shape[0]
    n1, n2 = plan.n1, plan.n2
    qq = np.uint64(q)
    a = x.reshape(b, n1, n2).astype(np.uint32)
    t_planes = par.split_bytes(a)                      # (4, b, n1, n2)
    w1_planes = seg.w1_planes[:, None]                 # (4, 1, n1, n1)
    o = _segmented_stage_pairs(np.broadcast_to(w1_planes, (4, b, n1, n1)),
                               t_planes, workers)
    fused = fuse_partials(o, q)                        # = (W1 @ a) mod q
    w2 = par.fuse_bytes(seg.w2_planes)
    had = fused.astype(np.uint64) * w2[None].astype(np.uint64) % qq
    t2_planes = par.split_bytes(had.astype(np.uint32))
    w3_planes = np.broadcast_to(seg.w3_planes[:, None], (4, b, n2, n2))
    o2 = _segmented_stage_pairs(t2_planes, w3_planes, workers)
    y = fuse_partials(o2, q).astype(np.uint64)
    if n_inv is not None:
        y = y * np.uint64(n_inv) % qq
    return y.transpose(0, 2, 1).reshape(b, plan.n)


# ---------------------------------------------------------------------------
# public row-level and polynomial-level API
# ---------------------------------------------------------------------------

def transform_rows(x, q, table, backend, inverse=False, workers=None):
    """Transform a (batch, n) block of residues for a single prime."""
    if backend not in BACKENDS:
        raise ParameterError(f"unknown backend {backend!r}")
    x = np.ascontiguousarray(x, dtype=np.uint64)
    if backend == "butterfly":
        e = table.butterfly(q)
        if inverse:
            return _butterfly_inverse(x, q, e, table._rev)
        return _butterfly_forward(x, q, e, table._rev)
    direction = "inv" if inverse else "fwd"
    n_inv = table.entry(q).n_inv if inverse else None
    if backend == "gemm":
        tw = table.twiddles(q, direction)
        return _gemm_transform(x, q, tw, table.plan, n_inv)
    seg = table.segmented(q, direction)
    return _segmented_transform(x, q, seg, table.plan, n_inv, workers)


def ntt_forward(poly, table, backend="butterfly", workers=None):
    """Forward negacyclic NTT of every residue row; flips domain to ntt."""
    if poly.domain != COEFF:
        raise DomainError("ntt_forward needs a coefficient-domain input")
    out = np.empty_like(poly.rows)
    for i, q in enumerate(poly.basis):
        out[i] = transform_rows(poly.rows[i:i + 1], q, table, backend,
                                workers=workers)[0]
    return RnsPolynomial(rows=out, basis=poly.basis, domain=NTT)


def ntt_inverse(poly, table, backend="butterfly", workers=None):
    """Inverse transform (with the n^-1 factor); flips domain to coeff."""
    if poly.domain != NTT:
        raise DomainError("ntt_inverse needs an ntt-domain input")
    out = np.empty_like(poly.rows)
    for i, q in enumerate(poly.basis):
        out[i] = transform_rows(poly.rows[i:i + 1], q, table, backend,
                                inverse=True, workers=workers)[0]
    return RnsPolynomial(rows=out, basis=poly.basis, domain=COEFF)


def write_test_vectors(path, n, q, count=10, seed=0):
    """Export CSV test vectors: input row, q, psi and expected NTT output."""
    import csv

    psi = par.find_negacyclic_root(q, n)
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "psi"] + [f"in{i}" for i in range(n)]
                   + [f"out{i}" for i in range(n)])
        for _ in range(count):
            a = rng.integers(0, q, n, dtype=np.uint64)
            out = ntt_oracle(a, q, psi)
            w.writerow([q, psi] + a.tolist() + out.tolist())
