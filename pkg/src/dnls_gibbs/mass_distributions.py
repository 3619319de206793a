"""Densities of partial masses and the shell-limit constants.

Under the base measure the mass is a sum of independent exponentials,
|g_n|^2/<n>^2 ~ Exp(mean 1/<n>^2), so the characteristic function of any
partial mass is the product

    Phi(xi) = prod_n 1 / (1 - i xi / <n>^2)

over the retained frequencies. Two families are used:

    p_N: frequencies |n| >= N              (kind "tail")
    P_N: every frequency except +-N        (kind "except")
    block mass: frequencies |n| <= N       (kind "head", never has a tail)

The infinite product is evaluated exactly for |n| <= K and the remaining
factors by exp(i xi tau_K), tau_K = sum of the omitted 1/<n>^2; the next
order, exp(-xi^2 tau2_K / 2), is available behind ``second_order``. A
"truncated" spec has no tail at all and describes the mass of the n_max-mode
system that the Monte Carlo code samples.

"Distribution function" is read as probability density throughout; the
thin-shell Monte Carlo checks test exactly that reading.

Inversion is a trapezoid rule in xi on [0, Xi], using Phi(-xi) = conj Phi(xi):

    p(x) = (1/pi) Re int_0^Xi e^{-i xi x} Phi(xi) dxi,

evaluated on a uniform x-grid by one chirp-z transform.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

PI_COTH_PI = np.pi / np.tanh(np.pi)                          # sum_n 1/<n>^2
SUM_INV_BRACKET4 = 0.5 * PI_COTH_PI + 0.5 * (np.pi / np.sinh(np.pi)) ** 2   # sum_n 1/<n>^4

XI_MAX = 200.0
DXI = 0.01
X_STEP = 0.005
# p_0 carries ~8e-5 of its mass beyond x = 12, so the default grid runs to 40
X_MAX = 40.0
NOISE_FLOOR = 1e-9


@dataclass(frozen=True)
class CharFunctionSpec:
    kind: str = "tail"      # "tail": |n| >= N;  "except": all n except +-N;  "head": |n| <= N
    N: int = 0
    K: int = 512
    tail: bool = True
    second_order: bool = False

    def __post_init__(self):
        if self.kind not in ("tail", "except", "head"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "head":
            object.__setattr__(self, "K", self.N)
            object.__setattr__(self, "tail", False)
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        if self.tail and self.K < 64 and self.kind != "head":
            raise ValueError("a tail-corrected product needs K >= 64")
        if self.kind == "except" and self.N > self.K:
            raise ValueError("excluded frequency beyond the exact range K")

    @classmethod
    def p(cls, N: int = 0, **kw) -> "CharFunctionSpec":
        return cls("tail", N, **kw)

    @classmethod
    def P(cls, N: int, **kw) -> "CharFunctionSpec":
        return cls("except", N, **kw)

    @classmethod
    def truncated(cls, n_max: int, kind: str = "tail", N: int = 0) -> "CharFunctionSpec":
        """Mass of the sampled n_max-mode system, no tail."""
        return cls(kind, N, K=n_max, tail=False)

    def modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Retained |n| <= K as (weights 1/<n>^2, multiplicities)."""
        n = np.arange(self.K + 1)
        mult = np.where(n == 0, 1, 2)
        if self.kind == "tail":
            keep = n >= self.N
        elif self.kind == "head":
            keep = n <= self.N
        else:
            keep = n != self.N
        return 1.0 / (1.0 + n[keep] ** 2.0), mult[keep]

    def _excluded_low(self):
        # frequencies |n| <= K that the full series has but this spec drops
        n = np.arange(self.K + 1)
        mult = np.where(n == 0, 1, 2)
        drop = n < self.N if self.kind == "tail" else n == self.N
        return 1.0 / (1.0 + n[drop] ** 2.0), mult[drop]

    def tail_moments(self) -> tuple[float, float]:
        """(tau, tau2): sums of 1/<n>^2 and 1/<n>^4 over retained |n| > K."""
        if not self.tail:
            return 0.0, 0.0
        n = np.arange(self.K + 1)
        mult = np.where(n == 0, 1, 2)
        w = 1.0 / (1.0 + n ** 2.0)
        tau = PI_COTH_PI - float(mult @ w)
        tau2 = SUM_INV_BRACKET4 - float(mult @ (w * w))
        return max(tau, 0.0), max(tau2, 0.0)

    def mean(self) -> float:
        w, mult = self.modes()
        return float(mult @ w) + self.tail_moments()[0]

    def variance(self) -> float:
        w, mult = self.modes()
        return float(mult @ (w * w)) + self.tail_moments()[1]


def char_function(spec: CharFunctionSpec, xi) -> np.ndarray:
    """Phi(xi) = E exp(i xi mass) for the partial mass described by ``spec``."""
    xi = np.asarray(xi, dtype=float)
    w, mult = spec.modes()
    tau, tau2 = spec.tail_moments()
    flat = xi.ravel()
    logphi = np.empty(flat.shape, dtype=complex)
    step = max(1, 2**21 // max(1, w.size))
    for s in range(0, flat.size, step):
        x = flat[s:s + step, None]
        logphi[s:s + step] = -(np.log1p(-1j * x * w) @ mult)
    logphi += 1j * flat * tau
    if spec.second_order:
        logphi -= 0.5 * flat * flat * tau2
    return np.exp(logphi).reshape(xi.shape)


@functools.lru_cache(maxsize=8)
def _base_phi(K: int, tail: bool, second_order: bool, Xi: float, dxi: float):
    # all-frequency product on the xi grid; other specs divide factors out
    xi = np.arange(int(round(Xi / dxi)) + 1) * dxi
    return xi, char_function(CharFunctionSpec("tail", 0, K, tail, second_order), xi)


@functools.lru_cache(maxsize=16)
def _head_phi(N: int, Xi: float, dxi: float):
    xi = np.arange(int(round(Xi / dxi)) + 1) * dxi
    return xi, char_function(CharFunctionSpec("head", N), xi)


def _phi_on_grid(spec: CharFunctionSpec, Xi: float, dxi: float):
    if spec.kind == "head":
        return _head_phi(spec.N, float(Xi), float(dxi))
    xi, phi = _base_phi(spec.K, spec.tail, spec.second_order, float(Xi), float(dxi))
    w, mult = spec._excluded_low()
    if w.size:
        phi = phi * np.exp(np.log1p(-1j * xi[:, None] * w) @ mult)
    return xi, phi


def _trapezoid_weights(n):
    t = np.ones(n)
    t[0] = t[-1] = 0.5
    return t


def _check_decay(phi, Xi):
    if abs(phi[-1]) >= 1e-8:
        raise ValueError(f"|Phi({Xi})| = {abs(phi[-1]):.2e} is not below 1e-8; increase Xi")


@dataclass(frozen=True)
class DensityCurve:
    grid: np.ndarray
    values: np.ndarray
    spec: CharFunctionSpec | None = field(default=None, compare=False)

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def total_mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    @property
    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.values, self.grid))

    def cdf(self) -> np.ndarray:
        """Cumulative trapezoid integral from the left end of the grid."""
        v = self.values
        c = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * self.dx)])
        return c

    def cdf_at(self, x) -> np.ndarray:
        self._in_range(x)
        return np.interp(x, self.grid, self.cdf())

    def __call__(self, x) -> np.ndarray:
        self._in_range(x)
        return np.interp(x, self.grid, self.values)

    def _in_range(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.grid[0]) or np.any(x > self.grid[-1]):
            raise ValueError(f"x outside the tabulated range [{self.grid[0]}, {self.grid[-1]}]")

    def check(self, tol: float = 1e-6):
        """Raise if the curve goes below the noise floor or is not normalised."""
        if self.values.min() < -NOISE_FLOOR:
            raise ArithmeticError(f"density dips to {self.values.min():.2e}")
        if abs(self.total_mass - 1) > tol:
            raise ArithmeticError(f"total mass {self.total_mass:.10f} not within {tol} of 1")
        return self

    def to_csv(self) -> str:
        rows = ["x,value"] + [f"{x!r},{v!r}" for x, v in zip(self.grid.tolist(), self.values.tolist())]
        return "\n".join(rows) + "\n"


def default_grid() -> np.ndarray:
    return np.arange(int(round(X_MAX / X_STEP)) + 1) * X_STEP


def invert_density(spec: CharFunctionSpec, x_grid=None, Xi: float = XI_MAX,
                   dxi: float = DXI) -> DensityCurve:
    """Tabulate the density of ``spec`` on a uniform grid (default [0, 40], step 0.005)."""
    x = default_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    if x.size < 2 or not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=1e-12):
        raise ValueError("x_grid must be uniform with at least two points")
    xi, phi = _phi_on_grid(spec, Xi, dxi)
    _check_decay(phi, Xi)
    dx = x[1] - x[0]
    a = _trapezoid_weights(xi.size) * phi * np.exp(-1j * xi * x[0])
    s = signal.czt(a, m=x.size, w=np.exp(-1j * dxi * dx), a=1.0)
    vals = s.real * dxi / np.pi
    curve = DensityCurve(x, vals, spec)
    if x_grid is None:
        curve.check()
    return curve


def density_at(spec: CharFunctionSpec, x, Xi: float = XI_MAX, dxi: float = DXI) -> np.ndarray:
    """Direct trapezoid evaluation of the density at arbitrary points."""
    x = np.asarray(x, dtype=float)
    xi, phi = _phi_on_grid(spec, Xi, dxi)
    _check_decay(phi, Xi)
    a = _trapezoid_weights(xi.size) * phi
    flat = x.ravel()
    out = np.empty(flat.size)
    step = max(1, 2**22 // xi.size)
    for s in range(0, flat.size, step):
        out[s:s + step] = (np.exp(-1j * flat[s:s + step, None] * xi) @ a).real
    return (out * dxi / np.pi).reshape(x.shape)


@functools.lru_cache(maxsize=4)
def p0_curve(K: int = 512) -> DensityCurve:
    """Density of the full mass (tail-corrected)."""
    return invert_density(CharFunctionSpec.p(0, K=K))


def p0_at(m, K: int = 512):
    """p_0(m), refusing points outside the tabulated grid."""
    curve = p0_curve(K)
    curve._in_range(m)
    return density_at(curve.spec, m)


def density_difference_decay(N_list=(2, 4, 8, 16), K: int = 512) -> list[dict]:
    """sup and L2 distances between P_N and p_0, with successive ratios."""
    base = invert_density(CharFunctionSpec.p(0, K=K))
    rows = []
    for N in N_list:
        c = invert_density(CharFunctionSpec.P(N, K=K))
        d = np.abs(c.values - base.values)
        rows.append({"N": int(N), "sup": float(d.max()),
                     "l2": float(np.sqrt(np.trapezoid(d * d, base.grid))),
                     "bracket_sq": 1.0 + N * N})
    for prev, row in zip(rows, rows[1:]):
        row["ratio"] = prev["sup"] / row["sup"]
        row["bracket_ratio"] = row["bracket_sq"] / prev["bracket_sq"]
    return rows


# -- shell-limit constants ------------------------------------------------------

def _gauss(a, b, n=160):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * w


def _shell_spec(k, K, tail):
    return CharFunctionSpec("except", k, K, tail)


def _x_integral(spec, m, b2, kernel, top):
    # int_0^{min(b2 m, top)} P(m - x/b2) kernel(x) dx / b2, split where kernel peaks
    top = min(b2 * m, top)
    pts = [0.0] + [v for v in (4.0, 12.0) if v < top] + [top]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        x, w = _gauss(a, b, 96)
        total += w @ (density_at(spec, m - x / b2) * kernel(x))
    return float(total / b2)


def shell_limit(m: float, k: int, K: int = 512, tail: bool = True) -> float:
    """lim_{s->1} mu(Gamma^k_{m,s}) / (s^2 - 1/s^2).

    k = 0:  int_0^m P_0(y) (m-y) e^{-(m-y)} dy
    k >= 1: (1/<k>^2) int_0^{<k>^2 m} P_k(m - y/<k>^2) y^2 e^{-y} dy
    ``tail=False`` uses the density of the K-mode truncated system.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    kernel = (lambda x: x * np.exp(-x)) if k == 0 else (lambda x: x * x * np.exp(-x))
    return _x_integral(_shell_spec(k, K, tail), m, 1.0 + k * k, kernel, 80.0)


def shell_limit_k0(m: float, K: int = 512, tail: bool = True) -> dict:
    """Limit constant for k = 0 with the lower bound (m e^{-m}/2) mu(mass < m/2)."""
    value = shell_limit(m, 0, K, tail)
    cdf_half = float(p0_curve(K).cdf_at(m / 2)) if tail else float(
        invert_density(CharFunctionSpec.truncated(K)).cdf_at(m / 2))
    return {"m": m, "k": 0, "value": value, "lower_bound": m * np.exp(-m) / 2 * cdf_half}


def shell_limit_k(m: float, k: int, K: int = 512, tail: bool = True) -> dict:
    """Limit constant for k >= 1 with the lower bound
    (m^2 e^{-m} / 4<k>^2) int_{m/2}^m P_k(m - y/<k>^2) dy."""
    if k < 1:
        raise ValueError("k must be at least 1; use shell_limit_k0 for k = 0")
    value = shell_limit(m, k, K, tail)
    b2 = 1.0 + k * k
    y, w = _gauss(m / 2, m, 32)
    inner = float(w @ density_at(_shell_spec(k, K, tail), m - y / b2))
    return {"m": m, "k": k, "value": value,
            "lower_bound": m * m * np.exp(-m) / (4 * b2) * inner,
            "scaled": value * b2}


def shell_probability(m: float, k: int, s: float, K: int = 512, tail: bool = True) -> float:
    """Exact mu(Gamma^k_{m,s}) at finite s by quadrature.

    With y the mass without +-k and r^2 = |g_k|^2 + |g_{-k}|^2 (Gamma(d, 1),
    d = 1 for k = 0 else 2), membership means
    <k>^2 (m-y)/s^2 < r^2 <= <k>^2 s^2 (m-y).
    """
    if not s > 1:
        raise ValueError("s must exceed 1")
    sf = (lambda x: np.exp(-x)) if k == 0 else (lambda x: (1 + x) * np.exp(-x))
    kernel = lambda x: sf(x / (s * s)) - sf(x * s * s)
    return _x_integral(_shell_spec(k, K, tail), m, 1.0 + k * k, kernel, 80.0 * s * s)


def uniform_lower_bound_window(m: float, N_list=(1, 2, 4, 8, 16, 32, 64), K: int = 512,
                               span: tuple = (0.5, 2.0), points: int = 61,
                               floor: float = 1e-6) -> dict:
    """Window [m_lo, m_hi] around m on which
    C0(x) = min_N int_{x/2}^x P_N(x - y/<N>^2) dy stays above ``floor``."""
    if m <= 0:
        raise ValueError("m must be positive")
    xs = np.linspace(span[0] * m, span[1] * m, points)
    t, wt = np.polynomial.legendre.leggauss(24)
    curves = {}
    for N in N_list:
        b2 = 1.0 + N * N
        y = 0.5 * xs[:, None] * (1.5 + 0.5 * t[None, :])      # nodes on [x/2, x]
        vals = density_at(CharFunctionSpec.P(N, K=K), xs[:, None] - y / b2)
        curves[int(N)] = (vals @ wt) * 0.25 * xs
    C0 = np.min(np.stack(list(curves.values())), axis=0)
    ok = C0 > floor
    i = int(np.argmin(np.abs(xs - m)))
    if not ok[i]:
        return {"m": m, "ok": False, "window": None, "x": xs, "C0": C0, "curves": curves}
    lo = i
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = i
    while hi < xs.size - 1 and ok[hi + 1]:
        hi += 1
    return {"m": m, "ok": True, "window": (float(xs[lo]), float(xs[hi])), "x": xs,
            "C0": C0, "curves": curves}
