"""Truncated random Fourier series on the torus.

A field is stored through its Gaussian coefficients g_n, n = -n_max..n_max, and
represents

    u(x) = sum_n g_n / <n> e^{inx},    <n> = sqrt(1 + n^2).

Most functions accept either a ``FourierField`` or a raw complex array whose
last axis holds the 2 n_max + 1 coefficients (any leading axes are batch axes).
Frequency n lives at position n + n_max.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import rng


def japanese_bracket(n):
    return np.sqrt(1.0 + np.asarray(n, dtype=float) ** 2)


def frequencies(n_max: int) -> np.ndarray:
    return np.arange(-n_max, n_max + 1)


def n_max_of(g) -> int:
    size = np.shape(g)[-1]
    if size % 2 != 1:
        raise ValueError(f"coefficient axis must have odd length, got {size}")
    return (size - 1) // 2


@dataclass(frozen=True)
class FourierField:
    n_max: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != (2 * self.n_max + 1,):
            raise ValueError(f"expected {2 * self.n_max + 1} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, n_max: int) -> "FourierField":
        return cls(n_max, np.zeros(2 * n_max + 1, dtype=complex))

    @classmethod
    def from_modes(cls, n_max: int, modes: dict) -> "FourierField":
        """Field with g_n = modes[n] and all other coefficients zero."""
        c = np.zeros(2 * n_max + 1, dtype=complex)
        for n, v in modes.items():
            if abs(n) > n_max:
                raise ValueError(f"frequency {n} outside [-{n_max}, {n_max}]")
            c[n + n_max] = v
        return cls(n_max, c)

    def g(self, n: int) -> complex:
        return complex(self.coeffs[n + self.n_max]) if abs(n) <= self.n_max else 0j

    def weighted_coefficient(self, n: int) -> complex:
        """Fourier coefficient of u at n, i.e. g_n / <n>."""
        return self.g(n) / float(japanese_bracket(n))

    def weighted(self) -> np.ndarray:
        return self.coeffs / japanese_bracket(frequencies(self.n_max))

    def truncate(self, n_max: int) -> "FourierField":
        """Restrict or zero-pad to a new cutoff."""
        if n_max <= self.n_max:
            return FourierField(n_max, self.coeffs[self.n_max - n_max:self.n_max + n_max + 1])
        c = np.zeros(2 * n_max + 1, dtype=complex)
        c[n_max - self.n_max:n_max + self.n_max + 1] = self.coeffs
        return FourierField(n_max, c)

    def to_record(self) -> dict:
        """JSON record: n_max then interleaved (Re g_n, Im g_n), n ascending."""
        inter = np.empty(2 * self.coeffs.size)
        inter[0::2] = self.coeffs.real
        inter[1::2] = self.coeffs.imag
        return {"n_max": self.n_max, "coeffs": inter.tolist()}

    @classmethod
    def from_record(cls, rec: dict) -> "FourierField":
        inter = np.asarray(rec["coeffs"], dtype=float)
        return cls(int(rec["n_max"]), inter[0::2] + 1j * inter[1::2])

    def to_json(self) -> str:
        return json.dumps(self.to_record())

    @classmethod
    def from_json(cls, text: str) -> "FourierField":
        return cls.from_record(json.loads(text))

    def __eq__(self, other):
        return (isinstance(other, FourierField) and self.n_max == other.n_max
                and np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None


def as_array(u) -> np.ndarray:
    return u.coeffs if isinstance(u, FourierField) else np.asarray(u, dtype=complex)


def _wrap(like, c):
    if isinstance(like, FourierField):
        return FourierField(like.n_max, c)
    return c


# -- sampling -----------------------------------------------------------------

def sample_coefficients(seed: int, start: int, count: int, n_max: int) -> np.ndarray:
    """Coefficients of samples start..start+count-1, shape (count, 2 n_max + 1).

    Coefficient (i, n) depends only on (seed, i, n), so low frequencies agree
    across different n_max.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    return rng.complex_gaussians(seed, start, count, frequencies(n_max))


def sample_gaussian_field(seed: int, index: int, n_max: int) -> FourierField:
    return FourierField(n_max, sample_coefficients(seed, index, 1, n_max)[0])


def sample_mass(seed: int, start: int, count: int, n_max: int,
                exclude: tuple = (), chunk: int = rng.CHUNK) -> np.ndarray:
    """Mass sum_n |g_n|^2/<n>^2 of each sample, from the moduli alone.

    Frequencies listed in ``exclude`` are left out of the sum.
    """
    f = frequencies(n_max)
    keep = ~np.isin(f, np.asarray(exclude, dtype=int))
    f = f[keep]
    w = 1.0 / (1.0 + f.astype(float) ** 2)
    out = np.empty(count)
    for s, c in rng.chunks(count, chunk):
        out[s:s + c] = rng.exponentials(seed, start + s, c, f) @ w
    return out


@dataclass
class SampleBatch:
    """Reproducible collection of draws from the base measure."""
    seed: int
    count: int
    n_max: int
    start: int = 0
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.count,):
                raise ValueError("need one weight per sample")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("weights must be finite and nonnegative")
            self.weights = w

    def coeffs(self, start: int = 0, count: int | None = None) -> np.ndarray:
        count = self.count - start if count is None else count
        return sample_coefficients(self.seed, self.start + start, count, self.n_max)

    def chunks(self, size: int = rng.CHUNK) -> Iterator[tuple[int, np.ndarray]]:
        for s, c in rng.chunks(self.count, size):
            yield s, self.coeffs(s, c)

    def __getitem__(self, i: int) -> FourierField:
        if not 0 <= i < self.count:
            raise IndexError(i)
        return sample_gaussian_field(self.seed, self.start + i, self.n_max)

    def __len__(self):
        return self.count


# -- projections --------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionMask:
    """Even set Q of frequencies, given by a vectorised predicate."""
    predicate: Callable[[np.ndarray], np.ndarray]
    name: str = "Q"

    def __call__(self, n_max: int) -> np.ndarray:
        f = frequencies(n_max)
        m = np.asarray(self.predicate(f), dtype=bool)
        if m.shape != f.shape:
            raise ValueError(f"mask {self.name} returned the wrong shape")
        if not np.array_equal(m, m[::-1]):
            raise ValueError(f"mask {self.name} is not even: n in Q must imply -n in Q")
        return m

    @classmethod
    def from_set(cls, q) -> "ProjectionMask":
        q = frozenset(int(n) for n in q)
        bad = sorted(n for n in q if -n not in q)
        if bad:
            raise ValueError(f"set is not even; missing partners of {bad}")
        arr = np.array(sorted(q), dtype=int)
        return cls(lambda f: np.isin(f, arr), name=f"{{{', '.join(map(str, sorted(q)))}}}")

    @classmethod
    def everything(cls) -> "ProjectionMask":
        return cls(lambda f: np.ones(f.shape, bool), name="Z")

    @classmethod
    def nothing(cls) -> "ProjectionMask":
        return cls(lambda f: np.zeros(f.shape, bool), name="empty")

    @classmethod
    def pair(cls, k: int) -> "ProjectionMask":
        k = abs(int(k))
        return cls(lambda f: np.abs(f) == k, name=f"{{+-{k}}}")

    @classmethod
    def dyadic(cls, N: int) -> "ProjectionMask":
        _check_dyadic(N)
        return cls(lambda f: (2 * np.abs(f) > N) & (np.abs(f) <= N), name=f"|n|~{N}")

    @classmethod
    def low(cls, N: int) -> "ProjectionMask":
        return cls(lambda f: np.abs(f) <= N, name=f"|n|<={N}")

    def complement(self) -> "ProjectionMask":
        p = self.predicate
        return ProjectionMask(lambda f: ~np.asarray(p(f), bool), name=f"not {self.name}")

    def intersect(self, other: "ProjectionMask") -> "ProjectionMask":
        p, q = self.predicate, other.predicate
        return ProjectionMask(lambda f: np.asarray(p(f), bool) & np.asarray(q(f), bool),
                              name=f"{self.name} & {other.name}")


def _check_dyadic(N):
    if N < 1 or (N & (N - 1)) != 0:
        raise ValueError(f"dyadic cutoff must be a power of two, got {N}")


def project_mask(u, Q: ProjectionMask):
    c = as_array(u)
    return _wrap(u, np.where(Q(n_max_of(c)), c, 0))


def project_dyadic(u, N: int):
    """P_N: keep |n| in (N/2, N]."""
    return project_mask(u, ProjectionMask.dyadic(N))


def project_le(u, N: int):
    """P_{<=N}: keep |n| <= N."""
    return project_mask(u, ProjectionMask.low(N))


def scale_frequency(u, k: int, s: float):
    """T_s^k: multiply g_k and g_{-k} by s (only g_0 when k = 0)."""
    if s < 0:
        raise ValueError("scaling factor must be nonnegative")
    c = np.array(as_array(u), dtype=complex, copy=True)
    n_max = n_max_of(c)
    k = abs(int(k))
    if k <= n_max:
        c[..., n_max + k] *= s
        if k:
            c[..., n_max - k] *= s
    return _wrap(u, c)


def sobolev_norm(u, sigma: float = 0.49):
    """(sum_n <n>^{2 sigma} |g_n|^2 / <n>^2)^{1/2}; sigma = 0 gives the L2 norm."""
    c = as_array(u)
    w = japanese_bracket(frequencies(n_max_of(c))) ** (2.0 * sigma - 2.0)
    return np.sqrt(np.abs(c) ** 2 @ w)
