"""Scheme parameters: prime chains, roots of unity, NTT plans and twiddle factors.

Everything here is deterministic given its inputs, so two constructions with
the same arguments produce bit-identical tables.
"""

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from sympy import isprime

from .errors import ParameterError

#: Largest allowed first dimension of the Cooley-Tukey split.  Keeps the
#: segmented backend's 32-bit accumulators safe: n1 * 255^2 < 2^31.
MAX_N1 = 1 << 15


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def _factorize(m):
    """Prime factors of m (m < 2^34 or so; trial division is fine here)."""
    factors = set()
    d = 2
    while d * d <= m:
        while m % d == 0:
            factors.add(d)
            m //= d
        d += 1 if d == 2 else 2
    if m > 1:
        factors.add(m)
    return sorted(factors)


def find_primitive_root(q):
    """Smallest generator of the multiplicative group mod prime q."""
    factors = _factorize(q - 1)
    g = 2
    while g < q:
        if all(pow(g, (q - 1) // f, q) != 1 for f in factors):
            return g
        g += 1
    raise ParameterError(f"no primitive root found for {q}")


def find_negacyclic_root(q, n):
    """Primitive 2n-th root of unity psi mod q, with psi^n = -1.

    Derived deterministically from the smallest primitive root g as
    g^((q-1)/2n), so repeated calls agree bit for bit.
    """
    if (q - 1) % (2 * n) != 0:
        raise ParameterError(f"prime {q} is not 1 mod {2 * n}")
    g = find_primitive_root(q)
    psi = pow(g, (q - 1) // (2 * n), q)
    assert pow(psi, n, q) == q - 1
    return psi


def generate_primes(n, widths, exclude=()):
    """One prime per requested bit width, each = 1 (mod 2n), all distinct.

    The search descends from 2^w in steps of 2n, so results are deterministic
    and as large as possible for their width.  Repeated widths continue the
    descent past earlier hits.
    """
    if not _is_power_of_two(n):
        raise ParameterError(f"degree {n} is not a power of two")
    step = 2 * n
    used = set(exclude)
    cursors = {}
    out = []
    for w in widths:
        if w > 32:
            raise ParameterError(f"prime width {w} exceeds 32 bits")
        c = cursors.get(w)
        if c is None:
            top = 1 << w
            c = top - (top - 1) % step  # largest value = 1 mod 2n below 2^w
        lo = 1 << (w - 1)
        while c > lo:
            if c not in used and isprime(c):
                break
            c -= step
        else:
            raise ParameterError(
                f"not enough {w}-bit primes = 1 mod {step} (n={n})")
        used.add(c)
        out.append(c)
        cursors[w] = c - step
    return out


@dataclass(frozen=True)
class PrimeData:
    """Per-prime NTT constants for a fixed degree n."""
    q: int
    g: int
    psi: int
    psi_inv: int
    n_inv: int

    @classmethod
    def for_prime(cls, q, n):
        g = find_primitive_root(q)
        psi = pow(g, (q - 1) // (2 * n), q)
        return cls(q=q, g=g, psi=psi, psi_inv=pow(psi, q - 2, q),
                   n_inv=pow(n, q - 2, q))


@dataclass(frozen=True)
class ModulusChain:
    """The prime chain q_0..q_L plus K special primes, with their roots."""
    n: int
    q: tuple
    p: tuple
    roots: dict = field(repr=False)  # prime -> PrimeData

    def __post_init__(self):
        step = 2 * self.n
        for r in self.q + self.p:
            if r % step != 1:
                raise ParameterError(f"prime {r} is not 1 mod {step}")
            if r >= 1 << 32:
                raise ParameterError(f"prime {r} does not fit in 32 bits")
        if len(set(self.q + self.p)) != len(self.q) + len(self.p):
            raise ParameterError("chain primes are not distinct")

    @property
    def all_primes(self):
        return self.q + self.p

    def data(self, prime):
        return self.roots[prime]


def generate_prime_chain(n, l_max, k, bit_size):
    """Build the full modulus chain: L+1 chain primes and K special primes.

    Special primes are found first (and are therefore the largest), then the
    chain primes continue the same descending search.
    """
    return generate_chain_widths(n, [bit_size] * (l_max + 1), [bit_size] * k)


def generate_chain_widths(n, q_widths, p_widths):
    """Chain with explicit per-prime widths (presets use uneven widths)."""
    specials = generate_primes(n, p_widths)
    chain = generate_primes(n, q_widths, exclude=specials)
    roots = {r: PrimeData.for_prime(r, n) for r in specials + chain}
    return ModulusChain(n=n, q=tuple(chain), p=tuple(specials), roots=roots)


@dataclass(frozen=True)
class NttPlan:
    """Cooley-Tukey split n = n1 * n2 for the GEMM-formulated transform."""
    n1: int
    n2: int

    @property
    def n(self):
        return self.n1 * self.n2


def build_ntt_plan(n):
    if not _is_power_of_two(n) or n < 4:
        raise ParameterError(f"degree {n} must be a power of two >= 4")
    n1 = 1 << (n.bit_length() - 1) // 2
    n1 = min(n1, MAX_N1)
    return NttPlan(n1=n1, n2=n // n1)


def _power_table(base, length, q):
    """[base^0, base^1, ..., base^(length-1)] mod q as uint64."""
    t = np.empty(length, dtype=np.uint64)
    acc = 1
    for i in range(length):
        t[i] = acc
        acc = (acc * base) % q
    return t


@dataclass(frozen=True)
class TwiddleFactorSet:
    """The three GEMM twiddle matrices for one prime and one direction."""
    q: int
    direction: str  # "fwd" | "inv"
    w1: np.ndarray  # (n1, n1) uint64
    w2: np.ndarray  # (n1, n2) uint64
    w3: np.ndarray  # (n2, n2) uint64


def build_twiddles(plan, q, psi, direction):
    """Populate W1/W2/W3 for one prime.

    Forward elements follow the closed forms
      w1[i,j] = psi_{2n1}^{2ij+j},  w2[i,j] = psi_{2n}^{2ij+j},
      w3[i,j] = psi_{2n2}^{2ij},
    where psi_{2n1} = psi^{n2} and psi_{2n2} = psi^{n1}.  The inverse set is
    built from psi^{-1} with the negacyclic correction folded in; the n^{-1}
    factor is applied at the backend's output stage, not here.
    """
    n1, n2, n = plan.n1, plan.n2, plan.n
    if direction not in ("fwd", "inv"):
        raise ParameterError(f"bad direction {direction!r}")
    if direction == "inv":
        psi = pow(psi, q - 2, q)
    p_2n = _power_table(psi, 2 * n, q)
    p_2n1 = _power_table(pow(psi, n2, q), 2 * n1, q)
    p_2n2 = _power_table(pow(psi, n1, q), 2 * n2, q)

    i1 = np.arange(n1, dtype=np.int64)
    i2 = np.arange(n2, dtype=np.int64)
    if direction == "fwd":
        e1 = (2 * np.outer(i1, i1) + i1[None, :]) % (2 * n1)
        e2 = (2 * np.outer(i1, i2) + i2[None, :]) % (2 * n)
        e3 = (2 * np.outer(i2, i2)) % (2 * n2)
    else:
        e1 = (2 * np.outer(i1, i1)) % (2 * n1)
        e2 = (2 * np.outer(i1, i2) + i1[:, None]) % (2 * n)
        e3 = (2 * np.outer(i2, i2) + i2[None, :]) % (2 * n2)
    return TwiddleFactorSet(q=q, direction=direction,
                            w1=p_2n1[e1], w2=p_2n[e2], w3=p_2n2[e3])


def split_bytes(m):
    """Split a u32 matrix into its four byte planes, shape (4, rows, cols)."""
    m = np.asarray(m, dtype=np.uint32)
    return np.stack([((m >> np.uint32(8 * b)) & np.uint32(0xFF)).astype(np.uint8)
                     for b in range(4)])


def fuse_bytes(planes):
    """Inverse of split_bytes: recombine byte planes into a u32 matrix."""
    planes = np.asarray(planes)
    out = np.zeros(planes.shape[1:], dtype=np.uint32)
    for b in range(4):
        out |= planes[b].astype(np.uint32) << np.uint32(8 * b)
    return out


@dataclass(frozen=True)
class SegmentedTwiddles:
    """8-bit byte planes of W1/W2/W3, pre-split for the segmented backend.

    Layout flags record the storage order each consuming stage expects:
    GEMM left operands row-major, right operands column-major.
    """
    q: int
    direction: str
    w1_planes: np.ndarray  # (4, n1, n1) uint8
    w2_planes: np.ndarray  # (4, n1, n2) uint8
    w3_planes: np.ndarray  # (4, n2, n2) uint8
    w1_layout: str = "row"
    w2_layout: str = "row"
    w3_layout: str = "col"


def segment_twiddles(tw):
    """Pre-split every twiddle matrix of a set into four byte planes."""
    return SegmentedTwiddles(
        q=tw.q, direction=tw.direction,
        w1_planes=split_bytes(tw.w1),
        w2_planes=split_bytes(tw.w2),
        w3_planes=split_bytes(tw.w3),
    )


class CkksParams:
    """Immutable bundle of all CKKS scheme parameters.

    Construction validates the chain invariants (primes = 1 mod 2N, GKS
    condition P > max_j Q_j, dnum | L+1) and precomputes the NTT plan.
    """

    def __init__(self, n, l_max, k, dnum, chain, scale_bits=40, h=None):
        if not _is_power_of_two(n) or not (1 << 10) // 64 <= n <= (1 << 18):
            # desk-scale builds allow n below 2^10 for tests/sweeps
            raise ParameterError(f"unsupported degree {n}")
        if (l_max + 1) % dnum != 0:
            raise ParameterError(f"dnum={dnum} does not divide L+1={l_max + 1}")
        if len(chain.q) != l_max + 1 or len(chain.p) != k:
            raise ParameterError("chain size does not match (l_max, k)")
        self.n = n
        self.l_max = l_max
        self.k = k
        self.dnum = dnum
        self.alpha = (l_max + 1) // dnum
        self.scale_bits = scale_bits
        self.h = n // 2 if h is None else h
        self.chain = chain
        self.plan = build_ntt_plan(n)
        self._check_gks()

    def _check_gks(self):
        big_p = 1
        for r in self.chain.p:
            big_p *= r
        worst = 0
        for j in range(self.dnum):
            qj = 1
            for r in self.chain.q[j * self.alpha:(j + 1) * self.alpha]:
                qj *= r
            worst = max(worst, qj)
        if big_p <= worst:
            raise ParameterError(
                "GKS condition violated: P must exceed every slice product Q_j")

    # -- derived quantities ------------------------------------------------

    @property
    def slots(self):
        return self.n // 2

    @property
    def default_scale(self):
        return Fraction(1 << self.scale_bits)

    def q_basis(self, level=None):
        if level is None:
            level = self.l_max
        return self.chain.q[:level + 1]

    @property
    def special_basis(self):
        return self.chain.p

    def modulus(self, level=None):
        big_q = 1
        for r in self.q_basis(level):
            big_q *= r
        return big_q

    def special_modulus(self):
        big_p = 1
        for r in self.chain.p:
            big_p *= r
        return big_p

    # -- serialization -----------------------------------------------------

    def to_json(self):
        doc = {
            "n": self.n, "l_max": self.l_max, "k": self.k, "dnum": self.dnum,
            "scale_bits": self.scale_bits, "h": self.h,
            "q": [str(r) for r in self.chain.q],
            "p": [str(r) for r in self.chain.p],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        n = doc["n"]
        q = tuple(int(s) for s in doc["q"])
        p = tuple(int(s) for s in doc["p"])
        roots = {r: PrimeData.for_prime(r, n) for r in q + p}
        chain = ModulusChain(n=n, q=q, p=p, roots=roots)
        return cls(n=n, l_max=doc["l_max"], k=doc["k"], dnum=doc["dnum"],
                   chain=chain, scale_bits=doc["scale_bits"], h=doc["h"])

    def digest(self):
        """Stable short hash of the parameter set, used by the wire format."""
        return hashlib.sha256(self.to_json().encode()).digest()[:8]

    @classmethod
    def generate(cls, n, l_max, k, dnum, bit_size=30, scale_bits=40, h=None):
        chain = generate_prime_chain(n, l_max, k, bit_size)
        return cls(n=n, l_max=l_max, k=k, dnum=dnum, chain=chain,
                   scale_bits=scale_bits, h=h)

    @classmethod
    def from_preset(cls, name):
        try:
            cfg = PRESETS[name]
        except KeyError:
            raise ParameterError(
                f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        chain = generate_chain_widths(cfg["n"], cfg["q_widths"],
                                      cfg["p_widths"])
        return cls(n=cfg["n"], l_max=len(cfg["q_widths"]) - 1,
                   k=len(cfg["p_widths"]), dnum=cfg["dnum"], chain=chain,
                   scale_bits=cfg.get("scale_bits", 40),
                   h=cfg.get("h"))


# Named parameter sets.  `default` is desk-scale (small enough that the full
# property suites run in minutes); the workload presets reproduce the shapes
# of the published N / L / K / logPQ configurations with per-prime widths
# chosen so the total modulus width matches exactly under the 32-bit prime
# constraint.
PRESETS = {
    "default": dict(n=1 << 12, q_widths=[30] * 6, p_widths=[30] * 3, dnum=3,
                    scale_bits=40),
    "set_a": dict(n=1 << 12, q_widths=[28, 26], p_widths=[27, 27], dnum=2),
    "set_b": dict(n=1 << 13, q_widths=[31] * 3, p_widths=[31] * 4, dnum=3),
    "set_c": dict(n=1 << 14, q_widths=[28] + [27] * 7,
                  p_widths=[28] * 4 + [27] * 4, dnum=4),
    "resnet20": dict(n=1 << 16, q_widths=[28] * 13 + [27] * 6 + [26] * 11,
                     p_widths=[28], dnum=30),
    "lr": dict(n=1 << 16, q_widths=[28] * 19 + [27] * 12 + [26] * 8,
               p_widths=[28], dnum=39),
    "lstm": dict(n=1 << 15, q_widths=[27] * 25 + [26], p_widths=[27], dnum=26),
    "packed_boot": dict(n=1 << 16,
                        q_widths=[29] * 3 + [28] * 28 + [27] * 22 + [26] * 5,
                        p_widths=[29], dnum=58),
}

#: Total modulus width (sum of per-prime widths) each benchmark set targets.
PRESET_LOG_PQ = {"set_a": 108, "set_b": 217, "set_c": 437,
                 "resnet20": 840, "lr": 1092, "lstm": 728,
                 "packed_boot": 1624}
