"""Counter-based Philox4x32-10 streams.

Every random number is a pure function of (seed, counter), so sample ``i`` at
frequency ``n`` can be regenerated in isolation, in any order, with any chunk
size. The counter layout is

    (index_lo, index_hi, frequency as uint32, stream)

and the 64-bit seed is the key. One Philox block yields two 53-bit uniforms:
``u1`` drives the modulus (|g|^2 = -log(1 - u1) is exactly Exp(1)) and ``u2``
the phase, so a complex coefficient with E|g|^2 = 1 costs one block, and the
modulus alone can be regenerated without the phase.
"""

import hashlib

import numpy as np
import numba as nb

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_INV53 = 1.0 / 9007199254740992.0

# stream ids; equal (seed, index, n) in different streams are independent
STREAM_FIELD = 0
STREAM_AUX = 1

CHUNK = 1 << 13


@nb.njit(cache=True, inline="always")
def _philox(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> _S32) ^ c1 ^ k0, p1 & _MASK, (p0 >> _S32) ^ c3 ^ k1, p0 & _MASK
    return c0, c1, c2, c3


@nb.njit(cache=True)
def philox4x32(counter, key):
    """Raw Philox4x32-10 block; ``counter`` has 4 words, ``key`` 2."""
    x = _philox(np.uint64(counter[0]) & _MASK, np.uint64(counter[1]) & _MASK,
                np.uint64(counter[2]) & _MASK, np.uint64(counter[3]) & _MASK,
                np.uint64(key[0]) & _MASK, np.uint64(key[1]) & _MASK)
    out = np.empty(4, dtype=np.uint64)
    for i in range(4):
        out[i] = x[i]
    return out


# Row kernels are kept separate from the sample loop: with contiguous 1-d
# outputs LLVM vectorises the 32x32->64 multiplies.
@nb.njit(cache=True, boundscheck=False)
def _row_u1(lo, hi, fr, st, k0, k1, a):
    for j in range(fr.size):
        x0, x1, _, _ = _philox(lo, hi, fr[j], st, k0, k1)
        a[j] = np.int64(((x0 >> np.uint64(5)) << np.uint64(26)) | (x1 >> np.uint64(6))) * _INV53


@nb.njit(cache=True, boundscheck=False)
def _row_u12(lo, hi, fr, st, k0, k1, a, b):
    for j in range(fr.size):
        x0, x1, x2, x3 = _philox(lo, hi, fr[j], st, k0, k1)
        a[j] = np.int64(((x0 >> np.uint64(5)) << np.uint64(26)) | (x1 >> np.uint64(6))) * _INV53
        b[j] = np.int64(((x2 >> np.uint64(5)) << np.uint64(26)) | (x3 >> np.uint64(6))) * _INV53


@nb.njit(cache=True)
def _uniforms(seed, start, count, freqs, stream, both):
    n = freqs.size
    u1 = np.empty((count, n))
    u2 = np.empty((count, n) if both else (0, n))
    k0 = np.uint64(seed) & _MASK
    k1 = (np.uint64(seed) >> _S32) & _MASK
    fr = np.empty(n, dtype=np.uint64)
    for j in range(n):
        fr[j] = np.uint64(freqs[j] & 0xFFFFFFFF)
    st = np.uint64(stream)
    for i in range(count):
        ii = np.uint64(start + i)
        if both:
            _row_u12(ii & _MASK, ii >> _S32, fr, st, k0, k1, u1[i], u2[i])
        else:
            _row_u1(ii & _MASK, ii >> _S32, fr, st, k0, k1, u1[i])
    return u1, u2


@nb.njit(cache=True)
def _uniforms_at(seed, indices, freqs, stream, both):
    n = freqs.size
    count = indices.size
    u1 = np.empty((count, n))
    u2 = np.empty((count, n) if both else (0, n))
    k0 = np.uint64(seed) & _MASK
    k1 = (np.uint64(seed) >> _S32) & _MASK
    fr = np.empty(n, dtype=np.uint64)
    for j in range(n):
        fr[j] = np.uint64(freqs[j] & 0xFFFFFFFF)
    st = np.uint64(stream)
    for i in range(count):
        ii = np.uint64(indices[i])
        if both:
            _row_u12(ii & _MASK, ii >> _S32, fr, st, k0, k1, u1[i], u2[i])
        else:
            _row_u1(ii & _MASK, ii >> _S32, fr, st, k0, k1, u1[i])
    return u1, u2


def _check(seed, start, count):
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")
    if start < 0 or count < 0 or start + count > 2**63:
        raise ValueError("sample indices must lie in [0, 2**63)")


def uniforms(seed, start, count, freqs, stream=STREAM_FIELD):
    """Uniform pairs in [0, 1), each array of shape (count, len(freqs))."""
    _check(seed, start, count)
    freqs = np.ascontiguousarray(freqs, dtype=np.int64)
    return _uniforms(np.uint64(seed), np.int64(start), np.int64(count), freqs,
                     np.int64(stream), True)


def exponentials(seed, start, count, freqs, stream=STREAM_FIELD):
    """|g|^2 ~ Exp(1) for the same draws as ``complex_gaussians``."""
    _check(seed, start, count)
    freqs = np.ascontiguousarray(freqs, dtype=np.int64)
    u1, _ = _uniforms(np.uint64(seed), np.int64(start), np.int64(count), freqs,
                      np.int64(stream), False)
    # 1 - u1 is exact for a 53-bit u1, so log is as good as log1p here
    np.subtract(1.0, u1, out=u1)
    np.log(u1, out=u1)
    np.negative(u1, out=u1)
    return u1


@nb.njit(cache=True)
def _polar(u1, u2):
    out = np.empty(u1.shape, dtype=np.complex128)
    a = u1.ravel()
    b = u2.ravel()
    o = out.ravel()
    for i in range(a.size):
        r = np.sqrt(-np.log(1.0 - a[i]))
        # centred angle: the libm trig is faster and more accurate on [-pi, pi)
        t = 2.0 * np.pi * (b[i] - 0.5)
        o[i] = complex(r * np.cos(t), r * np.sin(t))
    return out


def complex_gaussians(seed, start, count, freqs, stream=STREAM_FIELD):
    """Standard complex Gaussians (Re, Im ~ N(0, 1/2)), shape (count, len(freqs))."""
    _check(seed, start, count)
    freqs = np.ascontiguousarray(freqs, dtype=np.int64)
    u1, u2 = _uniforms(np.uint64(seed), np.int64(start), np.int64(count), freqs,
                       np.int64(stream), True)
    return _polar(u1, u2)


def complex_gaussians_at(seed, indices, freqs, stream=STREAM_FIELD):
    """``complex_gaussians`` for an arbitrary list of sample indices."""
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    if indices.size:
        _check(seed, int(indices.min()), 1)
    freqs = np.ascontiguousarray(freqs, dtype=np.int64)
    u1, u2 = _uniforms_at(np.uint64(seed), indices, freqs, np.int64(stream), True)
    return _polar(u1, u2)


def derive_seed(seed: int, tag: str) -> int:
    """Independent 64-bit key for a named sub-experiment."""
    digest = hashlib.sha256(f"{int(seed)}/{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def chunks(count, size=CHUNK):
    """(start, length) pairs covering range(count) in fixed-size pieces."""
    for start in range(0, count, size):
        yield start, min(size, count - start)
