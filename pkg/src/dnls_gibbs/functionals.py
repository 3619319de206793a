"""Mass, momentum, energy and the quartic remainder f_N.

Notation: a_n = g_n/<n> are the Fourier coefficients of u, and all integrals
carry the 1/(2 pi) normalisation. With B = a * a (self-convolution, indexed by
k = n1 + n2) the quartic quantities collapse to one-dimensional sums:

    int |u|^4                     = sum_k |B(k)|^2
    f_N = -(3i/2) int ubar^2 u u_x = (3/4) sum_k k |B_N(k)|^2

where B_N is built from P_{<=N} a. The second line follows by symmetrising
n2 -> (n1 + n2)/2 inside sum n2 a_{n1} a_{n2} abar_{n3} abar_{n4}.

Every functional has two independent evaluation paths: ``method="sum"`` uses
exact coefficient convolutions, ``method="grid"`` uses dealiased grid
quadrature of the defining integrand. ``method="naive"`` (f_N only) loops over
the quadruples directly and is meant as an oracle for small N.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numba as nb
import numpy as np
import scipy.fft as sfft

from .torus_field import (FourierField, ProjectionMask, as_array, frequencies,
                          japanese_bracket, n_max_of)

log = logging.getLogger(__name__)

IMAG_TOL = 1e-12


# -- plumbing -----------------------------------------------------------------

def weighted(u) -> np.ndarray:
    c = as_array(u)
    return c / japanese_bracket(frequencies(n_max_of(c)))


def _low(a: np.ndarray, N: int | None) -> np.ndarray:
    """Restrict weighted coefficients to |n| <= N (shrinks the array)."""
    n = n_max_of(a)
    if N is None or N >= n:
        return a
    if N < 0:
        raise ValueError("cutoff must be nonnegative")
    return a[..., n - N:n + N + 1]


def _out(x, u):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _real(z, what: str, tol: float = IMAG_TOL):
    z = np.asarray(z)
    scale = np.maximum(1.0, np.abs(z.real))
    resid = np.abs(z.imag) / scale
    worst = float(resid.max()) if resid.size else 0.0
    if worst > tol:
        raise ArithmeticError(f"{what}: imaginary residue {worst:.3e} exceeds {tol:.0e}")
    log.debug("%s imaginary residue %.3e", what, worst)
    return z.real


@dataclass(frozen=True)
class QuadratureGrid:
    """M equispaced points on [0, 2 pi); averages equal (1/2 pi) int exactly
    for trigonometric polynomials of degree < M."""
    M: int

    @classmethod
    def for_degree(cls, n_max: int, order: int) -> "QuadratureGrid":
        """Smallest power of two >= order * n_max + 1 (order 4: quartic, 6: sextic)."""
        need = order * n_max + 1
        return cls(1 << max(0, int(np.ceil(np.log2(need)))))

    def values(self, a: np.ndarray, derivative: int = 0) -> np.ndarray:
        n = n_max_of(a)
        if 2 * n + 1 > self.M:
            raise ValueError(f"grid of {self.M} points cannot hold frequencies up to {n}")
        f = frequencies(n)
        if derivative:
            a = a * (1j * f) ** derivative
        c = np.zeros(a.shape[:-1] + (self.M,), dtype=complex)
        c[..., f % self.M] = a
        return sfft.ifft(c, axis=-1, norm="forward")

    def coefficients(self, v: np.ndarray, n: int) -> np.ndarray:
        """Fourier coefficients -n..n of grid values (inverse of ``values``)."""
        c = sfft.fft(v, axis=-1, norm="forward")
        return c[..., frequencies(n) % self.M]

    @staticmethod
    def mean(v: np.ndarray) -> np.ndarray:
        return v.mean(axis=-1)


@nb.njit(cache=True)
def _conv_batch(x, y):
    """Direct linear convolution along the last axis of 2-d arrays."""
    b, nx = x.shape
    ny = y.shape[1]
    out = np.zeros((b, nx + ny - 1), dtype=np.complex128)
    for s in range(b):
        for i in range(nx):
            xi = x[s, i]
            for j in range(ny):
                out[s, i + j] += xi * y[s, j]
    return out


def convolve(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact coefficient convolution; index 0 of the result is n_x + n_y lowest."""
    shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    xb = np.broadcast_to(x, shape + x.shape[-1:]).reshape(-1, x.shape[-1])
    yb = np.broadcast_to(y, shape + y.shape[-1:]).reshape(-1, y.shape[-1])
    out = _conv_batch(np.ascontiguousarray(xb, dtype=complex), np.ascontiguousarray(yb, dtype=complex))
    return out.reshape(shape + out.shape[-1:])


# -- coefficient scaling ------------------------------------------------------

@dataclass(frozen=True)
class CoefficientScaling:
    """Even, bounded multiplier n -> c(n) applied to g_n."""
    c: Callable[[np.ndarray], np.ndarray]
    bound: float = 1.0
    name: str = "c"

    def __call__(self, n_max: int) -> np.ndarray:
        f = frequencies(n_max)
        v = np.broadcast_to(np.asarray(self.c(f), dtype=float), f.shape).copy()
        if not np.array_equal(v, v[::-1]):
            raise ValueError(f"scaling {self.name} is not even")
        if np.any(np.abs(v) > self.bound * (1 + 1e-15)):
            raise ValueError(f"scaling {self.name} exceeds its bound {self.bound}")
        return v

    @classmethod
    def constant(cls, t: float) -> "CoefficientScaling":
        return cls(lambda f: np.full(f.shape, float(t)), bound=abs(float(t)), name=f"const {t}")

    @classmethod
    def ones(cls) -> "CoefficientScaling":
        return cls.constant(1.0)

    @classmethod
    def frequency_pair(cls, k: int, s: float) -> "CoefficientScaling":
        """c(n) = s on |n| = k and 1 elsewhere, which reproduces T_s^k."""
        k = abs(int(k))
        return cls(lambda f: np.where(np.abs(f) == k, float(s), 1.0), bound=max(1.0, abs(s)),
                   name=f"T_{s}^{k}")


# -- quadratic ----------------------------------------------------------------

def mass(u, method: str = "sum"):
    a = weighted(u)
    if method == "sum":
        return _out(np.sum(np.abs(a) ** 2, axis=-1), u)
    if method == "grid":
        g = QuadratureGrid.for_degree(n_max_of(a), 2)
        return _out(g.mean(np.abs(g.values(a)) ** 2), u)
    raise ValueError(f"unknown method {method!r}")


def kinetic(u):
    """int |u_x|^2 = sum n^2 |a_n|^2."""
    a = weighted(u)
    f = frequencies(n_max_of(a))
    return _out(np.abs(a) ** 2 @ (f.astype(float) ** 2), u)


# -- quartic ------------------------------------------------------------------

def _pair_sums(a):
    """B(k) = sum_{n1+n2=k} a_{n1} a_{n2} for k = -2n..2n."""
    return convolve(a, a)


def l4_power(u, N: int | None = None, method: str = "sum"):
    """int |P_{<=N} u|^4."""
    a = _low(weighted(u), N)
    if method == "sum":
        return _out(np.sum(np.abs(_pair_sums(a)) ** 2, axis=-1), u)
    if method == "grid":
        g = QuadratureGrid.for_degree(n_max_of(a), 4)
        return _out(g.mean(np.abs(g.values(a)) ** 4), u)
    raise ValueError(f"unknown method {method!r}")


def f_N(u, N: int | None = None, method: str = "grid"):
    """Quartic remainder -(3i/2) int (P ubar)^2 (P u) d_x(P u), P = P_{<=N}.

    ``N=None`` uses every stored frequency.
    """
    a = _low(weighted(u), N)
    n = n_max_of(a)
    if method == "sum":
        k = np.arange(-2 * n, 2 * n + 1, dtype=float)
        return _out(0.75 * (np.abs(_pair_sums(a)) ** 2 @ k), u)
    if method == "grid":
        g = QuadratureGrid.for_degree(n, 4)
        v = g.values(a)
        vx = g.values(a, 1)
        z = g.mean(-1.5j * np.conj(v) ** 2 * v * vx)
        return _out(_real(z, "f_N"), u)
    if method == "grid-square":
        # the (-3i/4) int ubar^2 d_x(u^2) form, derivative taken spectrally
        g = QuadratureGrid.for_degree(n, 4)
        v = g.values(a)
        sq = g.coefficients(v * v, 2 * n)
        dsq = g.values(sq, 1)
        z = g.mean(-0.75j * np.conj(v) ** 2 * dsq)
        return _out(_real(z, "f_N"), u)
    if method == "naive":
        return _out(_f_naive(np.atleast_2d(a)).reshape(a.shape[:-1]), u)
    raise ValueError(f"unknown method {method!r}")


def _f_naive(a):
    """(3/2) sum_{n1+n2=n3+n4} n2 a_{n1} a_{n2} abar_{n3} abar_{n4}, explicit loop."""
    n = n_max_of(a)
    out = np.zeros(a.shape[0], dtype=complex)
    idx = frequencies(n)
    for n1 in idx:
        for n2 in idx:
            for n3 in idx:
                n4 = n1 + n2 - n3
                if abs(n4) > n:
                    continue
                out += (n2 * a[:, n1 + n] * a[:, n2 + n]
                        * np.conj(a[:, n3 + n]) * np.conj(a[:, n4 + n]))
    return _real(1.5 * out, "f_N naive")


def scaled_chaos(u, N: int | None, c: CoefficientScaling, method: str = "grid"):
    """S_{4,N}: f_N evaluated with g_n replaced by c(n) g_n."""
    g = as_array(u)
    return f_N(g * c(n_max_of(g)), N, method)


def momentum(u, method: str = "sum"):
    """(1/2) int |u|^4 + int i ubar u_x."""
    a = weighted(u)
    if method == "sum":
        f = frequencies(n_max_of(a)).astype(float)
        return _out(0.5 * np.sum(np.abs(_pair_sums(a)) ** 2, axis=-1) - np.abs(a) ** 2 @ f, u)
    if method == "grid":
        g = QuadratureGrid.for_degree(n_max_of(a), 4)
        v = g.values(a)
        vx = g.values(a, 1)
        z = g.mean(0.5 * np.abs(v) ** 4 + 1j * np.conj(v) * vx)
        return _out(_real(z, "momentum"), u)
    raise ValueError(f"unknown method {method!r}")


# -- sextic -------------------------------------------------------------------

def l6_power(u, N: int | None = None, method: str = "sum"):
    """int |P_{<=N} u|^6."""
    a = _low(weighted(u), N)
    if method == "sum":
        return _out(np.sum(np.abs(convolve(_pair_sums(a), a)) ** 2, axis=-1), u)
    if method == "grid":
        g = QuadratureGrid.for_degree(n_max_of(a), 6)
        return _out(g.mean(np.abs(g.values(a)) ** 6), u)
    raise ValueError(f"unknown method {method!r}")


def energy(u, method: str = "sum"):
    """int |u_x|^2 + (3/4) i int ubar^2 d_x(u^2) + (1/2) int |u|^6."""
    a = weighted(u)
    if method == "sum":
        c = as_array(u)
        return _out(kinetic(c) - f_N(c, None, "sum") + 0.5 * l6_power(c, None, "sum"), u)
    if method == "grid":
        n = n_max_of(a)
        g = QuadratureGrid.for_degree(n, 6)
        v = g.values(a)
        vx = g.values(a, 1)
        dsq = g.values(g.coefficients(v * v, 2 * n), 1)
        z = g.mean(np.abs(vx) ** 2 + 0.75j * np.conj(v) ** 2 * dsq + 0.5 * np.abs(v) ** 6)
        return _out(_real(z, "energy"), u)
    raise ValueError(f"unknown method {method!r}")


def sextic_weight(u, N: int | None = None):
    """(1/2) int |u_N|^6, the damping term of the Gibbs density."""
    return 0.5 * l6_power(u, N, "grid")


# -- decompositions -----------------------------------------------------------

def projected_quadrilinear(u, N: int | None, Q1: ProjectionMask, Q2: ProjectionMask,
                           Q3: ProjectionMask, Q4: ProjectionMask):
    """-(3i/2) int d_x(P_Q1 u_N) (P_Q2 u_N) (P_Q3 ubar_N) (P_Q4 ubar_N); complex in general."""
    a = _low(weighted(u), N)
    n = n_max_of(a)
    g = QuadratureGrid.for_degree(n, 4)
    p = [np.where(Q(n), a, 0) for Q in (Q1, Q2, Q3, Q4)]
    z = g.mean(g.values(p[0], 1) * g.values(p[1]) * np.conj(g.values(p[2])) * np.conj(g.values(p[3])))
    z = -1.5j * z
    return complex(z) if np.ndim(z) == 0 else z


def g_decomposition(u, N: int | None, k: int) -> np.ndarray:
    """(G_k^0, ..., G_k^4): the parts of f_N with exactly j indices in {k, -k}.

    Uses f_N(T_s^k u) = sum_j s^j G_k^j: with v = P_{+-k} u_N and w = u_N - v the
    integrand ubar^2 u u_x becomes a degree-4 polynomial in s whose coefficients
    are multiplied out exactly on the grid. Output has a trailing axis of 5.
    """
    a = _low(weighted(u), N)
    n = n_max_of(a)
    on = np.abs(frequencies(n)) == abs(int(k))
    g = QuadratureGrid.for_degree(n, 4)
    av = np.where(on, a, 0)
    aw = a - av
    V, W = g.values(av), g.values(aw)
    Vx, Wx = g.values(av, 1), g.values(aw, 1)
    cV, cW = np.conj(V), np.conj(W)
    # polynomial coefficients in s, lowest degree first
    sq = [cW * cW, 2 * cV * cW, cV * cV]
    cubic = [sq[0] * W, sq[0] * V + sq[1] * W, sq[1] * V + sq[2] * W, sq[2] * V]
    quart = [cubic[0] * Wx]
    for j in range(1, 4):
        quart.append(cubic[j] * Wx + cubic[j - 1] * Vx)
    quart.append(cubic[3] * Vx)
    out = np.stack([_real(-1.5j * g.mean(q), f"G^{j}") for j, q in enumerate(quart)], axis=-1)
    return out


def g4_closed_form(u, k: int):
    """(3k/2)(|g_k|^4 - |g_{-k}|^4)/<k>^4."""
    c = as_array(u)
    n = n_max_of(c)
    k = abs(int(k))
    if k > n or k == 0:
        return _out(np.zeros(c.shape[:-1]), u)
    return _out(1.5 * k * (np.abs(c[..., n + k]) ** 4 - np.abs(c[..., n - k]) ** 4)
                / (1.0 + k * k) ** 2, u)


# -- convolution sum ----------------------------------------------------------

def convolution_sum(n: int, cutoff: int = 10**6) -> tuple[float, float]:
    """S_n = sum_m 1/(<m>^2 <n-m>^2), truncated at |m| <= cutoff.

    Returns (value, tail bound). The tail bound uses 1/(<m>^2<n-m>^2) <=
    1/(m^2 (|m|-|n|)^2) for |m| > cutoff >= 2|n| and is added to the value
    as a one-sided midpoint estimate (half the bound).
    """
    n = int(n)
    if cutoff < 2 * abs(n) + 1:
        raise ValueError("cutoff must exceed 2|n|")
    m = np.arange(-cutoff, cutoff + 1, dtype=float)
    terms = 1.0 / ((1.0 + m * m) * (1.0 + (n - m) ** 2))
    # pairwise summation of the sorted terms keeps the rounding near 1e-16
    value = float(np.sort(terms).sum())
    L = cutoff - abs(n)
    bound = 2.0 / (3.0 * L ** 3)
    return value + 0.5 * bound, 0.5 * bound


def convolution_sum_closed_form(n: int) -> float:
    """2 pi coth(pi)/(4 + n^2) + [n = 0] pi^2/(2 sinh^2 pi), from the Fourier
    series of 1/(1 + m^2) (a hyperbolic cosine) squared."""
    v = 2.0 * np.pi / np.tanh(np.pi) / (4.0 + n * n)
    if n == 0:
        v += np.pi ** 2 / (2.0 * np.sinh(np.pi) ** 2)
    return v
