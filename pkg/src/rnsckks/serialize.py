"""Length-prefixed binary serialization for polynomials, ciphertexts, keys.

Wire layout (all integers little-endian):

    magic "TFHE1" | u8 kind | 8-byte params digest | u8 domain
    | u32 basis length | basis primes as u32
    | u32 n | row data as u32, one basis row after another

Ciphertexts append two polynomial payloads plus scale (as a numerator and
denominator pair of u64) and a u32 level; switching keys append dnum pairs.
A digest mismatch on load raises a parameter error, so fixtures are never
silently decoded under the wrong scheme parameters.
"""

import struct
from fractions import Fraction

import numpy as np

from .ckks import Ciphertext, Plaintext, PublicKey, SecretKey, SwitchingKey
from .errors import ParameterError
from .rns import RnsPolynomial

MAGIC = b"TFHE1"
_KIND_POLY = 1
_KIND_CT = 2
_KIND_SWK = 3
_KIND_PK = 4
_KIND_SK = 5
_KIND_PT = 6

_DOMAINS = ("coeff", "ntt")


def _pack_poly(poly):
    out = [struct.pack("<BI", _DOMAINS.index(poly.domain), len(poly.basis))]
    out.append(np.array(poly.basis, dtype="<u4").tobytes())
    out.append(struct.pack("<I", poly.n))
    out.append(poly.rows.astype("<u4").tobytes())
    return b"".join(out)


def _unpack_poly(buf, off):
    dom, blen = struct.unpack_from("<BI", buf, off)
    off += 5
    basis = tuple(int(x) for x in np.frombuffer(buf, "<u4", blen, off))
    off += 4 * blen
    (n,) = struct.unpack_from("<I", buf, off)
    off += 4
    rows = np.frombuffer(buf, "<u4", blen * n, off).reshape(blen, n).copy()
    off += 4 * blen * n
    return RnsPolynomial(rows=rows, basis=basis, domain=_DOMAINS[dom]), off


def _pack_scale(scale):
    f = Fraction(scale)
    return struct.pack("<QQ", f.numerator, f.denominator)


def _unpack_scale(buf, off):
    num, den = struct.unpack_from("<QQ", buf, off)
    return Fraction(num, den), off + 16


def _header(kind, digest):
    if len(digest) != 8:
        raise ParameterError("params digest must be 8 bytes")
    return MAGIC + struct.pack("<B", kind) + digest


def _check_header(buf, kind, digest):
    if buf[:5] != MAGIC:
        raise ParameterError("bad magic bytes")
    if buf[5] != kind:
        raise ParameterError(f"wrong payload kind {buf[5]}, wanted {kind}")
    if buf[6:14] != digest:
        raise ParameterError("params digest mismatch")
    return 14


def dump_polynomial(poly, digest):
    return _header(_KIND_POLY, digest) + _pack_poly(poly)


def load_polynomial(buf, digest):
    off = _check_header(buf, _KIND_POLY, digest)
    poly, _ = _unpack_poly(buf, off)
    return poly


def dump_ciphertext(ct, digest):
    return (_header(_KIND_CT, digest) + _pack_poly(ct.b) + _pack_poly(ct.a)
            + _pack_scale(ct.scale) + struct.pack("<I", ct.level))


def load_ciphertext(buf, digest):
    off = _check_header(buf, _KIND_CT, digest)
    b, off = _unpack_poly(buf, off)
    a, off = _unpack_poly(buf, off)
    scale, off = _unpack_scale(buf, off)
    (level,) = struct.unpack_from("<I", buf, off)
    return Ciphertext(b=b, a=a, scale=scale, level=level)


def dump_plaintext(pt, digest):
    return (_header(_KIND_PT, digest) + _pack_poly(pt.poly)
            + _pack_scale(pt.scale) + struct.pack("<I", pt.level))


def load_plaintext(buf, digest):
    off = _check_header(buf, _KIND_PT, digest)
    poly, off = _unpack_poly(buf, off)
    scale, off = _unpack_scale(buf, off)
    (level,) = struct.unpack_from("<I", buf, off)
    return Plaintext(poly=poly, scale=scale, level=level)


def dump_public_key(pk, digest):
    return _header(_KIND_PK, digest) + _pack_poly(pk.b) + _pack_poly(pk.a)


def load_public_key(buf, digest):
    off = _check_header(buf, _KIND_PK, digest)
    b, off = _unpack_poly(buf, off)
    a, _ = _unpack_poly(buf, off)
    return PublicKey(b=b, a=a)


def dump_secret_key(sk, digest):
    return _header(_KIND_SK, digest) + _pack_poly(sk.s)


def load_secret_key(buf, digest):
    off = _check_header(buf, _KIND_SK, digest)
    s, _ = _unpack_poly(buf, off)
    return SecretKey(s=s)


def dump_switching_key(swk, digest):
    out = [_header(_KIND_SWK, digest),
           struct.pack("<I", len(swk.pairs))]
    for b, a in swk.pairs:
        out.append(_pack_poly(b))
        out.append(_pack_poly(a))
    return b"".join(out)


def load_switching_key(buf, digest):
    off = _check_header(buf, _KIND_SWK, digest)
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    pairs = []
    for _ in range(count):
        b, off = _unpack_poly(buf, off)
        a, off = _unpack_poly(buf, off)
        pairs.append((b, a))
    return SwitchingKey(pairs=tuple(pairs))
