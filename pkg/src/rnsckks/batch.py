"""Operation-level batching over a level-major (L, B, N) buffer.

Packing B same-level operands level-major means each transform level is one
contiguous B x N block, so a kernel touches a single region per prime and
shares one twiddle table across the whole batch.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, ntt
from .errors import BatchError, CapacityError, ParameterError
from .rns import COEFF, NTT, RnsPolynomial

MAX_BATCH = 1024

BATCH_KERNELS = ("ntt", "intt", "hada_mult", "ele_add", "ele_sub",
                 "forbenius_map")


@dataclass(frozen=True)
class BatchBuffer:
    """B same-basis polynomials stored level-major as (L+1, B, N) uint32."""
    data: np.ndarray
    basis: tuple
    domain: str

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint32)
        if data.ndim != 3 or data.shape[0] != len(self.basis):
            raise BatchError("buffer must be (levels, batch, degree)")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "basis", tuple(self.basis))

    @property
    def batch_size(self):
        return self.data.shape[1]

    @property
    def n(self):
        return self.data.shape[2]

    @property
    def level_count(self):
        return self.data.shape[0]


def pack(items):
    """Stack B polynomials with identical basis/domain into one buffer."""
    if not items:
        raise BatchError("cannot pack an empty batch")
    first = items[0]
    for it in items[1:]:
        if it.basis != first.basis or it.domain != first.domain \
                or it.n != first.n:
            raise BatchError("batch members must share basis, domain and n")
    data = np.stack([it.rows for it in items], axis=1)
    return BatchBuffer(data=data, basis=first.basis, domain=first.domain)


def unpack(buf):
    """Recover the B member polynomials in their original order."""
    return [RnsPolynomial(rows=np.ascontiguousarray(buf.data[:, b]),
                          basis=buf.basis, domain=buf.domain)
            for b in range(buf.batch_size)]


def reorder_layout(src):
    """Permute a (B, L, N) array into the level-major (L, B, N) layout."""
    src = np.asarray(src)
    if src.ndim != 3:
        raise BatchError("expected a three-axis buffer")
    return np.ascontiguousarray(src.transpose(1, 0, 2))


def batched_apply(buf, kernel, aux=None, table=None, backend="butterfly",
                  workers=None):
    """Run one kernel over every batch member; bit-exact vs sequential.

    aux is the kernel-specific operand: a second BatchBuffer for the binary
    kernels, the rotation step for forbenius_map, unused for the transforms.
    """
    if kernel not in BATCH_KERNELS:
        raise BatchError(f"unknown batch kernel {kernel!r}")
    if kernel in ("ntt", "intt"):
        if table is None:
            raise ParameterError("transforms need a twiddle table")
        inverse = kernel == "intt"
        want = NTT if inverse else COEFF
        if buf.domain != want:
            raise BatchError(f"{kernel} needs {want}-domain input")
        out = np.empty_like(buf.data)
        for i, q in enumerate(buf.basis):
            out[i] = ntt.transform_rows(buf.data[i], q, table, backend,
                                        inverse=inverse, workers=workers)
        return BatchBuffer(data=out, basis=buf.basis,
                           domain=COEFF if inverse else NTT)
    if kernel == "forbenius_map":
        if buf.domain != NTT:
            raise BatchError("forbenius_map needs ntt-domain input")
        t = kernels.galois_element(int(aux), buf.n)
        src = kernels._ntt_permutation(t, buf.n)
        return BatchBuffer(data=np.ascontiguousarray(buf.data[:, :, src]),
                           basis=buf.basis, domain=buf.domain)
    # binary elementwise kernels
    other = aux
    if not isinstance(other, BatchBuffer):
        raise BatchError(f"{kernel} needs a second BatchBuffer operand")
    if other.basis != buf.basis or other.data.shape != buf.data.shape \
            or other.domain != buf.domain:
        raise BatchError("operand buffers must match in basis, shape, domain")
    if kernel == "hada_mult" and buf.domain != NTT:
        raise BatchError("hada_mult needs ntt-domain operands")
    out = np.empty_like(buf.data)
    for i, q in enumerate(buf.basis):
        qq = np.uint64(q)
        x = buf.data[i].astype(np.uint64)
        y = other.data[i].astype(np.uint64)
        if kernel == "ele_add":
            out[i] = (x + y) % qq
        elif kernel == "ele_sub":
            out[i] = (x + qq - y) % qq
        else:
            out[i] = x * y % qq
    return BatchBuffer(data=out, basis=buf.basis, domain=buf.domain)


#: Working-set multiplier per operation: how many (levels, B, N) u32 arrays
#: the op holds live at once (inputs, intermediates, outputs).
OP_FOOTPRINT = {
    "ntt": 3, "intt": 3, "forbenius_map": 2,
    "hada_mult": 3, "ele_add": 3, "ele_sub": 3,
    "hmult": 8, "hadd": 6, "cmult": 5, "rescale": 5, "hrotate": 10,
}


def working_set_bytes(params, op, batch, level=None):
    """Projected bytes touched by one batched op at the given level."""
    if level is None:
        level = params.l_max
    factor = OP_FOOTPRINT.get(op)
    if factor is None:
        raise ParameterError(f"no working-set model for op {op!r}")
    return factor * batch * (level + 1) * params.n * 4


def plan_batch_size(available_memory, params, op, level=None,
                    max_batch=MAX_BATCH):
    """Largest power-of-two B whose working set fits the byte budget."""
    if working_set_bytes(params, op, 1, level) > available_memory:
        raise CapacityError(
            f"budget {available_memory} B cannot hold a single {op} operand")
    b = 1
    while b < max_batch and \
            working_set_bytes(params, op, b * 2, level) <= available_memory:
        b *= 2
    return b
