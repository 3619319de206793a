"""Mass-conditioned measures and the scaling identities.

Notation (all at a finite cutoff n_max, default 256):

    mass    = sum_n |g_n|^2/<n>^2
    r_k^2   = |g_k|^2 + |g_{-k}|^2  (|g_0|^2 for k = 0);  d = 1 for k = 0, else 2
    y_k     = mass - r_k^2/<k>^2, the mass without +-k
    A_m     = {mass <= m}
    Gamma^k_{m,s} = {mass(T_s^k u) > m >= mass(T_{1/s}^k u)}
    mu_m^eps = mu conditioned on mass in (m - eps, m + eps)

r_k^2 is Gamma(d, 1) and independent of y_k. Three facts drive every estimator:

  change of variables (exact at finite s):
      mu(1_Gamma F) = E[1_A (s^{2d} e^{(1-s^2) r^2} F(T_s u) - s^{-2d} e^{(1-s^{-2}) r^2} F(T_{1/s} u))]

  interior formula for nu_m^k = lim nu^k_{m,s}:
      E_nu[F] = E[1_A ((d - r^2) F + dF/2)] / E[1_A (d - r^2)],  dF = d/ds F(T_s^k u) at s = 1

  radial form of the same numerator. With rho = r^2 and the angle fixed,
  ((d - rho) F + rho dF/drho) rho^{d-1} e^{-rho} = d/drho (F rho^d e^{-rho}),
  so integrating rho over [0, R^2], R^2 = <k>^2 (m - y_k), gives
      E[1_A ((d - r^2) F + dF/2)] = E[1_{y_k < m} R^{2d} e^{-R^2} F(T^k_{R/r} u)],
  which only uses fields of mass exactly m and stays accurate for large k.

The denominators equal C(m, k) = lim mu(Gamma^k_{m,s})/(s^2 - 1/s^2), computed
by quadrature in mass_distributions, and C(m, k)/p_0(m) = c_{k,m}/<k>^2 with
c_{k,m} = E_{mu_m}[r_k^2]. Summing over k gives the decomposition

    m E_{mu_m}[F] = sum_k (c_{k,m}/<k>^2) E_{nu_m^k}[F].

Samplers scan candidates in index order. A cheap screen on the moduli alone
(with a 1e-9 relative margin) picks the candidates whose phases are drawn; the
exact predicate is then evaluated on the complex coefficients, and it is the
same predicate ``ConditionalBatch.verify`` re-checks. Small masses are reached
with the exponentially tilted proposal of ``chaos_stats.TiltedProposal``
(weights exp(lambda (mass - m))), plain rejection otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import functionals as fn
from . import rng
from .chaos_stats import TiltedProposal, tilt_parameter
from .mass_distributions import CharFunctionSpec, density_at, shell_limit, shell_probability
from .stats import Estimate, ess, richardson_weights, top_weight_share
from .torus_field import FourierField, frequencies, n_max_of

log = logging.getLogger(__name__)

N_MAX = 256
EPS_LADDER = (0.1, 0.05, 0.02)
S_LADDER = (1.1, 1.05, 1.025)
MARGIN = 1e-9
MIN_ACCEPTANCE = 1e-5
FD_STEP = 1e-3


# -- specs and samples ---------------------------------------------------------------

@dataclass(frozen=True)
class ShellSpec:
    m: float
    mode: str = "thin"          # "thin" (eps) or "scaling" (k, s)
    eps: float | None = None
    k: int | None = None
    s: float | None = None
    n_max: int = N_MAX

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass level must be positive")
        if self.mode == "thin":
            if self.eps is None or not self.eps > 0:
                raise ValueError("thin shell needs eps > 0")
        elif self.mode == "scaling":
            if self.k is None or self.k < 0:
                raise ValueError("scaling shell needs k >= 0")
            if self.s is None or not 1 < self.s <= 2:
                raise ValueError("scaling shell needs s in (1, 2]")
            if self.k > self.n_max:
                raise ValueError("scaled frequency beyond the cutoff")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def thin(cls, m, eps, n_max=N_MAX):
        return cls(m, "thin", eps=eps, n_max=n_max)

    @classmethod
    def scaling(cls, m, k, s, n_max=N_MAX):
        return cls(m, "scaling", k=k, s=s, n_max=n_max)

    def contains(self, mass, rk2=None) -> np.ndarray:
        """The defining inequalities, evaluated on exact masses."""
        mass = np.asarray(mass)
        if self.mode == "thin":
            return (mass > self.m - self.eps) & (mass < self.m + self.eps)
        return in_gamma(mass, rk2, self.k, self.s, self.m)


def bracket2(k):
    return 1.0 + np.asarray(k, dtype=float) ** 2


def in_gamma(mass, rk2, k, s, m):
    """mass(T_s^k u) > m >= mass(T_{1/s}^k u)."""
    b2 = bracket2(k)
    up = mass + (s * s - 1.0) * rk2 / b2
    down = mass + (1.0 / (s * s) - 1.0) * rk2 / b2
    return (up > m) & (down <= m)


def radius_sq(g, k):
    """r_k^2 for every row of g (last axis holds -n_max..n_max)."""
    n = n_max_of(g)
    if k == 0:
        return np.abs(g[..., n]) ** 2
    return np.abs(g[..., n + k]) ** 2 + np.abs(g[..., n - k]) ** 2


def scale_rows(g, k, s):
    """T^k_s applied row by row with a per-row factor s (array or scalar)."""
    g = np.array(g, dtype=complex, copy=True)
    n = n_max_of(g)
    s = np.asarray(s, dtype=float)
    if k > n:
        return g
    g[..., n + k] *= s
    if k:
        g[..., n - k] *= s
    return g


@dataclass(frozen=True)
class ConditionalSample:
    field: FourierField
    importance_weight: float
    conditioning: ShellSpec


@dataclass
class ConditionalBatch:
    """Accepted draws: low coefficients (|n| <= keep), exact full masses, weights."""
    spec: ShellSpec
    coeffs: np.ndarray
    mass: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    candidates: int
    seed: int
    keep: int

    def __len__(self):
        return self.indices.size

    def __getitem__(self, i) -> ConditionalSample:
        return ConditionalSample(FourierField(self.keep, self.coeffs[i]),
                                 float(self.weights[i]), self.spec)

    @property
    def acceptance(self) -> float:
        return len(self) / self.candidates if self.candidates else 0.0

    def verify(self) -> bool:
        """Re-evaluate the conditioning predicate on every stored sample."""
        rk2 = None
        if self.spec.mode == "scaling":
            if self.spec.k > self.keep:
                raise ValueError("scaled frequency not stored")
            rk2 = radius_sq(self.coeffs, self.spec.k)
        mass = self.mass
        if self.keep == self.spec.n_max:
            mass = fn.mass(self.coeffs)
        return bool(np.all(self.spec.contains(mass, rk2)))


# -- candidate scans -------------------------------------------------------------------

class _Moduli:
    """Screening quantities computed from |g_n|^2 of a chunk."""

    def __init__(self, E, n_max):
        self.E = E
        self.n_max = n_max
        self.mass = E @ (1.0 / bracket2(frequencies(n_max)))

    def rk2(self, k):
        n = self.n_max
        return self.E[:, n] if k == 0 else self.E[:, n + k] + self.E[:, n - k]


def scan(seed: int, samples: int, n_max: int, screen: Callable[[_Moduli], np.ndarray],
         proposal: TiltedProposal | None = None, start: int = 0):
    """Yield (indices, coefficients) of screened candidates, chunk by chunk."""
    f = frequencies(n_max)
    sd = np.sqrt(proposal.variances) if proposal is not None and proposal.lam > 0 else None
    for s, c in rng.chunks(samples):
        E = rng.exponentials(seed, start + s, c, f)
        if sd is not None:
            E *= sd * sd
        sel = np.flatnonzero(screen(_Moduli(E, n_max)))
        if sel.size == 0:
            continue
        g = rng.complex_gaussians_at(seed, start + s + sel, f)
        if sd is not None:
            g *= sd
        yield start + s + sel, g


def _proposal_for(m, n_max, kind="auto"):
    if kind == "plain" or (kind == "auto" and m >= 1):
        return None
    return TiltedProposal(tilt_parameter(m, n_max), n_max)


def _log_weights(proposal, mass, m):
    if proposal is None:
        return np.zeros(np.shape(mass))
    return proposal.lam * (np.asarray(mass) - m)


def predicted_thin_acceptance(m, eps, n_max=N_MAX) -> float:
    x = np.linspace(max(0.0, m - eps), m + eps, 201)
    v = density_at(CharFunctionSpec.truncated(n_max), x)
    return float(np.trapezoid(v, x))


def _collect(spec, count, seed, keep, proposal, member, screen, max_candidates):
    parts, masses, idxs, lw = [], [], [], []
    got = 0
    scanned = 0
    block = 1 << 16
    while got < count:
        if scanned >= max_candidates:
            raise RuntimeError(f"only {got} of {count} accepted in {scanned} candidates")
        n = min(block, max_candidates - scanned)
        for idx, g in scan(seed, n, spec.n_max, screen, proposal, start=scanned):
            mass = fn.mass(g)
            ok = member(g, mass)
            if not np.any(ok):
                continue
            idx, g, mass = idx[ok], g[ok], mass[ok]
            take = min(count - got, idx.size)
            parts.append(fn._low(g[:take], keep))
            masses.append(mass[:take])
            idxs.append(idx[:take])
            lw.append(_log_weights(proposal, mass[:take], spec.m))
            got += take
            if got >= count:
                scanned = int(idx[take - 1]) + 1
                break
        else:
            scanned += n
    coeffs = np.concatenate(parts) if parts else np.zeros((0, 2 * keep + 1), complex)
    lw = np.concatenate(lw) if lw else np.zeros(0)
    w = np.exp(lw - lw.max()) if lw.size else lw
    return ConditionalBatch(spec, coeffs, np.concatenate(masses) if masses else np.zeros(0),
                            np.concatenate(idxs) if idxs else np.zeros(0, int), w,
                            scanned, seed, keep)


def sample_thin_shell(spec: ShellSpec, count: int, seed: int, keep: int | None = None,
                      proposal: str = "auto", max_candidates: int = 10**8) -> ConditionalBatch:
    """First ``count`` candidates (by index) with mass in (m - eps, m + eps)."""
    if spec.mode != "thin":
        raise ValueError("need a thin-shell spec")
    acc = predicted_thin_acceptance(spec.m, spec.eps, spec.n_max)
    prop = _proposal_for(spec.m, spec.n_max, proposal)
    if prop is None and acc < MIN_ACCEPTANCE:
        raise ValueError(f"predicted acceptance {acc:.2e} below {MIN_ACCEPTANCE:g}; "
                         "widen eps or use the tilted proposal")
    lo, hi = spec.m - spec.eps, spec.m + spec.eps
    screen = lambda mo: (mo.mass > lo * (1 - MARGIN)) & (mo.mass < hi * (1 + MARGIN))
    member = lambda g, mass: spec.contains(mass)
    return _collect(spec, count, seed, spec.n_max if keep is None else keep, prop,
                    member, screen, max_candidates)


def sample_scaling_shell(spec: ShellSpec, count: int, seed: int, keep: int | None = None,
                         max_candidates: int = 10**8) -> ConditionalBatch:
    """First ``count`` candidates (by index) in Gamma^k_{m,s}; exact draws from nu^k_{m,s}."""
    if spec.mode != "scaling":
        raise ValueError("need a scaling spec")
    k, s, m = spec.k, spec.s, spec.m
    b2 = bracket2(k)
    screen = lambda mo: _gamma_screen(mo.mass, mo.rk2(k), b2, s, m)
    member = lambda g, mass: in_gamma(mass, radius_sq(g, k), k, s, m)
    keep = spec.n_max if keep is None else max(keep, k)
    try:
        return _collect(spec, count, seed, keep, None, member, screen, max_candidates)
    except RuntimeError as err:
        C = shell_limit(m, k, spec.n_max, tail=False)
        raise RuntimeError(f"{err}; expected acceptance about {(s * s - 1 / s / s) * C:.2e}") from err


def _gamma_screen(mass, rk2, b2, s, m):
    up = mass + (s * s - 1.0) * rk2 / b2
    down = mass + (1.0 / (s * s) - 1.0) * rk2 / b2
    return (up > m * (1 - MARGIN)) & (down <= m * (1 + MARGIN))


def shell_overlap(m: float, s: float, samples: int, seed: int, n_max: int = N_MAX) -> dict:
    """Fraction of Gamma_{m,s} (k = 0) that also lies in Gamma^1_{m,s}; descriptive."""
    both = only0 = 0
    screen = lambda mo: _gamma_screen(mo.mass, mo.rk2(0), 1.0, s, m)
    for idx, g in scan(seed, samples, n_max, screen):
        mass = fn.mass(g)
        g0 = in_gamma(mass, radius_sq(g, 0), 0, s, m)
        g1 = in_gamma(mass, radius_sq(g, 1), 1, s, m)
        only0 += int(np.count_nonzero(g0))
        both += int(np.count_nonzero(g0 & g1))
    return {"in_gamma0": only0, "in_both": both,
            "overlap_fraction": both / only0 if only0 else float("nan")}


def scaling_nesting(mass, rk2, k, s, m) -> np.ndarray:
    """Pointwise A_{m,s} <= A_m <= A_{m,1/s}, where A_{m,s} = {mass(T_s^k u) <= m}."""
    b2 = bracket2(k)
    in_s = mass + (s * s - 1.0) * rk2 / b2 <= m
    in_1 = mass <= m
    in_inv = mass + (1.0 / (s * s) - 1.0) * rk2 / b2 <= m
    return (~in_s | in_1) & (~in_1 | in_inv)


def scaling_shell_acceptance(m: float, k: int, samples: int, seed: int,
                             s_list=(1.1, 1.05), n_max: int = N_MAX, tol: float = 3.0) -> dict:
    """mu(Gamma^k_{m,s})/(s^2 - 1/s^2) by MC against the quadrature limit C(m, k).

    One scan serves every s; the finite-s quadrature value is reported beside it.
    """
    b2 = bracket2(k)
    smax = max(s_list)
    hits = np.zeros(len(s_list), dtype=np.int64)
    nested = True
    for idx, g in scan(seed, samples, n_max, lambda mo: _gamma_screen(mo.mass, mo.rk2(k), b2, smax, m)):
        mass, r2 = fn.mass(g), radius_sq(g, k)
        for j, s in enumerate(s_list):
            hits[j] += np.count_nonzero(in_gamma(mass, r2, k, s, m))
            nested &= bool(np.all(scaling_nesting(mass, r2, k, s, m)))
    C = shell_limit(m, k, n_max, tail=False)
    rows = []
    for s, h in zip(s_list, hits):
        scale = s * s - 1.0 / (s * s)
        p = h / samples
        est = Estimate(p / scale, float(np.sqrt(p * (1 - p) / samples)) / scale)
        z = (est.value - C) / est.stderr if est.stderr > 0 else float("inf")
        rows.append({"s": s, "hits": int(h), "estimate": est.as_dict(),
                     "finite_s_quadrature": shell_probability(m, k, s, n_max, tail=False) / scale,
                     "z": float(z), "pass": bool(abs(z) <= tol)})
    return {"m": m, "k": k, "samples": samples, "seed": seed, "shell_limit": C,
            "nesting_ok": nested, "rows": rows, "pass": all(r["pass"] for r in rows)}


def thin_shell_density(m: float, eps: float, samples: int, seed: int, n_max: int = N_MAX,
                       tol: float = 3.0) -> dict:
    """mu(|mass - m| < eps)/(2 eps) by plain MC against the inverted density."""
    hits = 0
    for idx, g in scan(seed, samples, n_max,
                       lambda mo: np.abs(mo.mass - m) < eps * (1 + MARGIN)):
        hits += int(np.count_nonzero(np.abs(fn.mass(g) - m) < eps))
    p = hits / samples
    est = Estimate(p / (2 * eps), float(np.sqrt(p * (1 - p) / samples)) / (2 * eps))
    spec = CharFunctionSpec.truncated(n_max)
    curve = float(density_at(spec, m))
    shell_mean = predicted_thin_acceptance(m, eps, n_max) / (2 * eps)
    z = (est.value - shell_mean) / est.stderr if est.stderr > 0 else float("inf")
    return {"m": m, "eps": eps, "samples": samples, "seed": seed, "hits": hits,
            "estimate": est.as_dict(), "curve_at_m": curve, "curve_shell_average": shell_mean,
            "z": float(z), "pass": bool(abs(z) <= tol)}


# -- observables -----------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderObservable:
    """F depending only on g_n, |n| <= N_F; evaluators act on rows of coefficients."""
    name: str
    N_F: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    s_derivative: Callable[[np.ndarray, int], np.ndarray] | None = None
    bound: Callable[[float], float] | None = None     # sup |F| on {mass <= m}
    nonnegative: bool = False

    def _low(self, g):
        n = n_max_of(g)
        if n < self.N_F:
            raise ValueError(f"{self.name} needs coefficients up to {self.N_F}")
        return g[..., n - self.N_F:n + self.N_F + 1]

    def __call__(self, g) -> np.ndarray:
        g = g.coeffs if isinstance(g, FourierField) else np.asarray(g)
        return np.asarray(self.evaluator(self._low(g)), dtype=float)

    def ds(self, g, k: int) -> np.ndarray:
        """d/ds F(T_s^k u) at s = 1."""
        g = np.asarray(g.coeffs if isinstance(g, FourierField) else g)
        if k > self.N_F:
            return np.zeros(g.shape[:-1])
        low = self._low(g)
        if self.s_derivative is not None:
            return np.asarray(self.s_derivative(low, k), dtype=float)
        return self.ds_numeric(low, k)

    def ds_numeric(self, g, k: int, h: float = FD_STEP) -> np.ndarray:
        """Central differences at h and h/2 combined by Richardson (O(h^4))."""
        def D(t):
            return (self.evaluator(scale_rows(g, k, 1 + t))
                    - self.evaluator(scale_rows(g, k, 1 - t))) / (2 * t)
        return (4 * D(h / 2) - D(h)) / 3


def _mass_low(g):
    return fn.mass(g)


def _obs_one():
    return CylinderObservable("one", 0, lambda g: np.ones(g.shape[:-1]),
                              lambda g, k: np.zeros(g.shape[:-1]), lambda m: 1.0, True)


def _obs_exp_mass8():
    def ds(g, k):
        return -2.0 * radius_sq(g, k) / bracket2(k) * np.exp(-_mass_low(g))
    return CylinderObservable("exp_neg_mass8", 8, lambda g: np.exp(-_mass_low(g)), ds,
                              lambda m: 1.0, True)


def _obs_re_g1():
    def ds(g, k):
        n = n_max_of(g)
        return g[..., n + 1].real if k == 1 else np.zeros(g.shape[:-1])
    return CylinderObservable("re_g1", 1, lambda g: g[..., n_max_of(g) + 1].real, ds,
                              lambda m: np.sqrt(2 * m))


def _obs_l4_u4():
    def ds(g, k):
        # l4 = sum |B|^2, B = a*a, and d/ds B(T_s a) = 2 a * (a restricted to +-k)
        a = fn.weighted(g)
        n = n_max_of(a)
        ak = np.zeros_like(a)
        ak[..., n + k] = a[..., n + k]
        ak[..., n - k] = a[..., n - k]
        B = fn.convolve(a, a)
        dB = 2 * fn.convolve(a, ak)
        return 2 * np.sum((np.conj(B) * dB).real, axis=-1)
    return CylinderObservable("l4_u4", 4, lambda g: fn.l4_power(g, None, "sum"), ds,
                              lambda m: 9.0 * m * m, True)


def _obs_exp_f8():
    def ds(g, k):
        G = fn.g_decomposition(g, None, k)
        return np.exp(fn.f_N(g, None)) * (G @ np.arange(5.0))
    return CylinderObservable("exp_f8", 8, lambda g: np.exp(fn.f_N(g, None)), ds, None, True)


def regression_suite() -> list[CylinderObservable]:
    return [_obs_one(), _obs_exp_mass8(), _obs_re_g1(), _obs_l4_u4(), _obs_exp_f8()]


def observable_by_name(name: str) -> CylinderObservable:
    extra = {"mass4": CylinderObservable("mass4", 4, _mass_low,
                                         lambda g, k: 2.0 * radius_sq(g, k) / bracket2(k),
                                         lambda m: m, True),
             "abs_gk_sq3": abs_gk_sq(3)}
    for obs in regression_suite():
        extra[obs.name] = obs
    if name not in extra:
        raise KeyError(f"unknown observable {name!r}")
    return extra[name]


def abs_gk_sq(k: int) -> CylinderObservable:
    """F = |g_k|^2 (one side of the pair only)."""
    def ev(g):
        return np.abs(g[..., n_max_of(g) + k]) ** 2

    def ds(g, j):
        return 2 * ev(g) if j == k else np.zeros(g.shape[:-1])
    return CylinderObservable(f"abs_g{k}_sq", k, ev, ds, lambda m: bracket2(k) * m, True)


def _as_list(F):
    return [F] if isinstance(F, CylinderObservable) else list(F)


# -- estimator plumbing --------------------------------------------------------------------

def _mean_over(x, n) -> tuple[float, np.ndarray]:
    """Mean over n candidates of values that are x on the members, 0 elsewhere.

    Returns the mean and the influence values on the members; the omitted
    zeros contribute (n - len(x)) mean^2 to the sum of squares.
    """
    mu = float(np.sum(x)) / n
    return mu, np.asarray(x, dtype=float) - mu


def _mean_se(x, n) -> Estimate:
    mu, psi = _mean_over(x, n)
    ss = float(np.sum(psi * psi)) + (n - np.size(x)) * mu * mu
    return Estimate(mu, float(np.sqrt(ss / (n * (n - 1)))) if n > 1 else float("inf"))


def _ratio(num, den, n) -> tuple[float, np.ndarray]:
    """sum(num)/sum(den) over members with its influence values (zeros elsewhere)."""
    D = float(np.sum(den)) / n
    if D == 0:
        return float("nan"), np.zeros(np.shape(num))
    r = float(np.sum(num)) / float(np.sum(den))
    return r, (np.asarray(num) - r * np.asarray(den)) / D


def _se(psi, n) -> float:
    return float(np.sqrt(np.sum(np.asarray(psi) ** 2)) / n)


def _est(val, psi, n) -> Estimate:
    return Estimate(float(val), _se(psi, n))


def _z(a: Estimate, b: Estimate) -> float:
    s = np.hypot(a.stderr, b.stderr)
    if s == 0:
        return 0.0 if a.value == b.value else float("inf")
    return float((a.value - b.value) / s)


# -- change of variables ------------------------------------------------------------------

def change_of_variables_check(F, m: float, k: int, s: float, samples: int, seed: int,
                              n_max: int = N_MAX, tol: float = 3.0) -> dict:
    """Both sides of the finite-s change of variables, on independent samples."""
    if not 1 < s <= 2:
        raise ValueError("s must lie in (1, 2]")
    obs = _as_list(F)
    b2 = bracket2(k)
    d = 1 if k == 0 else 2
    lhs_vals = {o.name: [] for o in obs}
    rhs_vals = {o.name: [] for o in obs}
    seed_l = rng.derive_seed(seed, f"cov-lhs/{m}/{k}/{s}")
    seed_r = rng.derive_seed(seed, f"cov-rhs/{m}/{k}/{s}")
    lhs_hits = rhs_hits = 0
    for idx, g in scan(seed_l, samples, n_max, lambda mo: _gamma_screen(mo.mass, mo.rk2(k), b2, s, m)):
        ok = in_gamma(fn.mass(g), radius_sq(g, k), k, s, m)
        g = g[ok]
        lhs_hits += g.shape[0]
        for o in obs:
            lhs_vals[o.name].append(o(g))
    for idx, g in scan(seed_r, samples, n_max, lambda mo: mo.mass <= m * (1 + MARGIN)):
        ok = fn.mass(g) <= m
        g = g[ok]
        rhs_hits += g.shape[0]
        r2 = radius_sq(g, k)
        up = s ** (2 * d) * np.exp((1 - s * s) * r2)
        down = s ** (-2 * d) * np.exp((1 - 1 / (s * s)) * r2)
        gu, gd = scale_rows(g, k, s), scale_rows(g, k, 1 / s)
        for o in obs:
            rhs_vals[o.name].append(up * o(gu) - down * o(gd))
    rows = []
    for o in obs:
        L = _mean_se(np.concatenate(lhs_vals[o.name]) if lhs_vals[o.name] else [], samples)
        R = _mean_se(np.concatenate(rhs_vals[o.name]) if rhs_vals[o.name] else [], samples)
        z = _z(L, R)
        rows.append({"observable": o.name, "lhs": L.as_dict(), "rhs": R.as_dict(), "z": z,
                     "pass": bool(abs(z) <= tol)})
    return {"identity": "change_of_variables", "m": m, "k": k, "s": s, "samples": samples,
            "seed": seed, "lhs_hits": lhs_hits, "rhs_hits": rhs_hits, "rows": rows,
            "pass": all(r["pass"] for r in rows)}


# -- nu_m^k --------------------------------------------------------------------------------

def _interior(obs, m, k, samples, seed, n_max):
    d = 1 if k == 0 else 2
    num = {o.name: [] for o in obs}
    den = []
    for idx, g in scan(seed, samples, n_max, lambda mo: mo.mass <= m * (1 + MARGIN)):
        g = g[fn.mass(g) <= m]
        r2 = radius_sq(g, k)
        den.append(d - r2)
        for o in obs:
            num[o.name].append((d - r2) * o(g) + 0.5 * o.ds(g, k))
    den = np.concatenate(den) if den else np.zeros(0)
    out = {}
    D = _mean_se(den, samples)
    if abs(D.value) <= 2 * D.stderr:
        raise ArithmeticError(f"interior denominator {D.value:.3e} +- {D.stderr:.1e} "
                              "is not distinguishable from 0; shell too improbable")
    for o in obs:
        r, psi = _ratio(np.concatenate(num[o.name]), den, samples)
        out[o.name] = _est(r, psi, samples)
    return out, D


def _radial_terms(g, mass, k, m, obs):
    """Weights R^{2d} e^{-R^2} 1_{y_k < m} and F at the rescaled fields."""
    d = 1 if k == 0 else 2
    b2 = bracket2(k)
    r2 = radius_sq(g, k)
    y = mass - r2 / b2
    inside = y < m
    R2 = np.where(inside, b2 * (m - y), 0.0)
    w = np.where(inside, R2 ** d * np.exp(-R2), 0.0)
    vals = {}
    for o in obs:
        if k > o.N_F:
            vals[o.name] = o(g)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = np.where(r2 > 0, np.sqrt(R2 / r2), 0.0)
            gs = scale_rows(g, k, fac)
            if k == 0 and np.any(r2 == 0):
                # direction undefined at g_0 = 0: any unit phase gives the same law
                n = n_max_of(gs)
                gs[r2 == 0, n] = np.sqrt(R2[r2 == 0])
            vals[o.name] = o(gs)
    return w, vals


def _radial(obs, m, ks, samples, seed, n_max):
    """Radial estimates of E_nu[F] for every k in ks from one scan."""
    ks = list(ks)
    b2 = bracket2(ks)

    def screen(mo):
        r = np.stack([mo.rk2(k) for k in ks], axis=1) / b2
        return (mo.mass - r.max(axis=1)) < m * (1 + MARGIN)
    W = {k: [] for k in ks}
    V = {(k, o.name): [] for k in ks for o in obs}
    for idx, g in scan(seed, samples, n_max, screen):
        mass = fn.mass(g)
        for k in ks:
            w, vals = _radial_terms(g, mass, k, m, obs)
            W[k].append(w)
            for o in obs:
                V[(k, o.name)].append(vals[o.name])
    est, dens, infl = {}, {}, {}
    for k in ks:
        w = np.concatenate(W[k]) if W[k] else np.zeros(0)
        dens[k] = _mean_se(w, samples)
        for o in obs:
            v = np.concatenate(V[(k, o.name)]) if V[(k, o.name)] else np.zeros(0)
            r, psi = _ratio(w * v, w, samples)
            est[(k, o.name)] = _est(r, psi, samples)
            infl[(k, o.name)] = psi
    return est, dens, infl


def _extrapolation(obs, m, k, samples, seed, n_max, ladder=S_LADDER):
    b2 = bracket2(k)
    smax = max(ladder)
    F = {o.name: [] for o in obs}
    memb = []
    for idx, g in scan(seed, samples, n_max, lambda mo: _gamma_screen(mo.mass, mo.rk2(k), b2, smax, m)):
        mass, r2 = fn.mass(g), radius_sq(g, k)
        cols = np.stack([in_gamma(mass, r2, k, s, m) for s in ladder], axis=1)
        keep = cols.any(axis=1)
        memb.append(cols[keep])
        for o in obs:
            F[o.name].append(o(g[keep]))
    memb = np.concatenate(memb) if memb else np.zeros((0, len(ladder)), bool)
    out = {}
    h = np.log(np.asarray(ladder))
    c1, c2 = richardson_weights(h[-2], h[-1], 2.0)
    for o in obs:
        v = np.concatenate(F[o.name]) if F[o.name] else np.zeros(0)
        raw, psis = [], []
        for j in range(len(ladder)):
            ind = memb[:, j].astype(float)
            if ind.sum() == 0:
                raise ArithmeticError(f"no samples in the s = {ladder[j]} shell")
            r, psi = _ratio(ind * v, ind, samples)
            raw.append(_est(r, psi, samples))
            psis.append(psi)
        val = c1 * raw[-2].value + c2 * raw[-1].value
        out[o.name] = {"value": _est(val, c1 * psis[-2] + c2 * psis[-1], samples),
                       "raw": {float(s): e.as_dict() for s, e in zip(ladder, raw)},
                       "hits": [int(c) for c in memb.sum(axis=0)]}
    return out


def nu_k_expectation(F, m: float, k: int, method: str = "both", samples: int = 10**6,
                     seed: int = 0, n_max: int = N_MAX) -> dict:
    """E_{nu_m^k}[F] by 'interior', 'extrapolation', 'radial', 'both' (the first two) or 'all'."""
    obs = _as_list(F)
    methods = {"both": ("interior", "extrapolation"),
               "all": ("interior", "extrapolation", "radial")}.get(method, (method,))
    res = {"m": m, "k": k, "samples": samples, "seed": seed, "methods": list(methods),
           "shell_limit": shell_limit(m, k, n_max, tail=False)}
    per = {o.name: {} for o in obs}
    if "interior" in methods:
        est, D = _interior(obs, m, k, samples, rng.derive_seed(seed, f"nu-int/{m}/{k}"), n_max)
        res["interior_denominator"] = D.as_dict()
        for o in obs:
            per[o.name]["interior"] = est[o.name].as_dict()
    if "radial" in methods:
        est, dens, _ = _radial(obs, m, [k], samples, rng.derive_seed(seed, f"nu-rad/{m}/{k}"), n_max)
        res["radial_denominator"] = dens[k].as_dict()
        for o in obs:
            per[o.name]["radial"] = est[(k, o.name)].as_dict()
    if "extrapolation" in methods:
        ex = _extrapolation(obs, m, k, samples, rng.derive_seed(seed, f"nu-ext/{m}/{k}"), n_max)
        for o in obs:
            per[o.name]["extrapolation"] = ex[o.name]["value"].as_dict()
            per[o.name]["extrapolation_raw"] = ex[o.name]["raw"]
    for o in obs:
        p = per[o.name]
        if "interior" in p and "extrapolation" in p:
            p["z_interior_vs_extrapolation"] = _z(Estimate(**p["interior"]),
                                                  Estimate(**p["extrapolation"]))
    res["observables"] = per
    return res


# -- thin-shell estimates --------------------------------------------------------------------

def _thin_scan(m, samples, seed, n_max, ladder, proposal, fields):
    """Members of the widest shell: masses, weights, membership columns, requested fields."""
    eps_max = max(ladder)
    lo, hi = m - eps_max, m + eps_max
    out = {"mass": [], "cols": [], "lw": [], **{key: [] for key in fields}}
    screen = lambda mo: (mo.mass > lo * (1 - MARGIN)) & (mo.mass < hi * (1 + MARGIN))
    for idx, g in scan(seed, samples, n_max, screen, proposal):
        mass = fn.mass(g)
        cols = np.stack([(mass > m - e) & (mass < m + e) for e in ladder], axis=1)
        keep = cols[:, 0] | cols.any(axis=1)
        g, mass, cols = g[keep], mass[keep], cols[keep]
        out["mass"].append(mass)
        out["cols"].append(cols)
        out["lw"].append(_log_weights(proposal, mass, m))
        for key, fun in fields.items():
            out[key].append(fun(g))
    cat = {}
    for key, v in out.items():
        cat[key] = np.concatenate(v) if v else np.zeros((0, len(ladder)) if key == "cols" else 0)
    lw = cat.pop("lw")
    cat["w"] = np.exp(lw) if lw.size else lw
    return cat


def _thin_ratio(num, den, cols, samples, ladder):
    """Per-eps ratios and the eps^2 Richardson value from the two smallest eps."""
    raw, psis = [], []
    for j in range(len(ladder)):
        ind = cols[:, j]
        if not np.any(ind):
            raise ArithmeticError(f"no samples in the eps = {ladder[j]} shell")
        r, psi = _ratio(np.where(ind, num, 0.0), np.where(ind, den, 0.0), samples)
        raw.append(r)
        psis.append(psi)
    c1, c2 = richardson_weights(ladder[-2], ladder[-1], 2.0)
    val = c1 * raw[-2] + c2 * raw[-1]
    return val, c1 * psis[-2] + c2 * psis[-1], raw, psis


def radon_nikodym_check(F, m: float, k: int, samples: int, seed: int, n_max: int = N_MAX,
                        nu_method: str = "interior", ladder=EPS_LADDER, tol: float = 3.0) -> dict:
    """E_{nu_m^k}[F] against E_{mu_m}[r_k^2 F]/E_{mu_m}[r_k^2] from thin shells."""
    obs = _as_list(F)
    fields = {"r2": lambda g: radius_sq(g, k)}
    for o in obs:
        fields[o.name] = o
    th = _thin_scan(m, samples, rng.derive_seed(seed, f"rn-thin/{m}/{k}"), n_max, ladder,
                    None, fields)
    nu = nu_k_expectation(obs, m, k, nu_method, samples, seed, n_max)
    rows = []
    for o in obs:
        val, psi, raw, _ = _thin_ratio(th["r2"] * th[o.name], th["r2"], th["cols"], samples, ladder)
        T = _est(val, psi, samples)
        N = Estimate(**nu["observables"][o.name][nu_method])
        z = _z(T, N)
        rows.append({"observable": o.name, "thin_shell": T.as_dict(),
                     "thin_shell_raw": dict(zip(map(float, ladder), raw)),
                     "nu": N.as_dict(), "z": z, "pass": bool(abs(z) <= tol)})
    # c_{k,m} = E_{mu_m}[r_k^2] against C(m,k) <k>^2 / p_0(m)
    cval, cpsi, _, _ = _thin_ratio(th["r2"], np.ones_like(th["r2"]), th["cols"], samples, ladder)
    p0 = float(density_at(CharFunctionSpec.truncated(n_max), m))
    return {"identity": "radon_nikodym", "m": m, "k": k, "samples": samples, "seed": seed,
            "nu_method": nu_method, "rows": rows, "pass": all(r["pass"] for r in rows),
            "c_km": _est(cval, cpsi, samples).as_dict(),
            "c_km_quadrature": nu["shell_limit"] * float(bracket2(k)) / p0,
            "shell_members": [int(c) for c in th["cols"].sum(axis=0)]}


def c_km_profile(m: float, ks: Sequence[int], samples: int, seed: int, n_max: int = N_MAX,
                 eps: float = 0.05) -> dict:
    """E_{mu_m^eps}[r_k^2] for each k, from one thin-shell scan."""
    fields = {f"r2_{k}": (lambda g, k=k: radius_sq(g, k)) for k in ks}
    th = _thin_scan(m, samples, seed, n_max, (eps,), None, fields)
    out = {}
    n = th["mass"].size
    for k in ks:
        x = th[f"r2_{k}"]
        out[int(k)] = Estimate(float(x.mean()), float(x.std(ddof=1) / np.sqrt(n))).as_dict()
    return {"m": m, "eps": eps, "members": n, "c": out}


def decomposition_check(F, m: float, K_max: int, samples: int, seed: int, n_max: int = N_MAX,
                        ladder=EPS_LADDER, tol: float = 3.0) -> dict:
    """m E_{mu_m}[F] against sum_{k <= K_max} (c_{k,m}/<k>^2) E_{nu_m^k}[F].

    c_{k,m} and the left side come from one thin-shell scan, the nu_m^k from
    one radial scan of mu. The omitted k > K_max are bounded by
    sqrt(E[mass_{>K}^2] E[F^2]) on the shell.
    """
    obs = _as_list(F)
    ks = list(range(K_max + 1))
    b2 = bracket2(ks)
    fhi = frequencies(n_max)
    hi_w = np.where(np.abs(fhi) > K_max, 1.0 / bracket2(fhi), 0.0)
    fields = {"r2": lambda g: np.stack([radius_sq(g, k) for k in ks], axis=1),
              "mass_hi": lambda g: np.abs(g) ** 2 @ hi_w}
    for o in obs:
        fields[o.name] = o
    th = _thin_scan(m, samples, rng.derive_seed(seed, f"dec-thin/{m}"), n_max, ladder, None, fields)
    ones = np.ones(th["mass"].size)
    c, cpsi = [], []
    for j in range(len(ks)):
        v, p, _, _ = _thin_ratio(th["r2"][:, j], ones, th["cols"], samples, ladder)
        c.append(v)
        cpsi.append(p)
    c = np.array(c)
    nu, dens, nu_psi = _radial(obs, m, ks, samples, rng.derive_seed(seed, f"dec-rad/{m}"), n_max)
    rows = []
    for o in obs:
        fval, fpsi, _, _ = _thin_ratio(th[o.name], ones, th["cols"], samples, ladder)
        nuv = np.array([nu[(k, o.name)].value for k in ks])
        rhs = float(np.sum(c * nuv / b2))
        lhs = m * fval
        psi_thin = sum(nuv[j] / b2[j] * cpsi[j] for j in range(len(ks))) - m * fpsi
        se_thin = _se(psi_thin, samples)
        # the radial scan is a different sample: combine its influence separately
        se_rad = np.sqrt(sum((c[j] / b2[j] * _se(nu_psi[(k, o.name)], samples)) ** 2
                             for j, k in enumerate(ks)))
        # terms within the radial scan are correlated; bound by the sum of
        # absolute contributions when that is larger
        se_rad_abs = sum(abs(c[j] / b2[j]) * _se(nu_psi[(k, o.name)], samples)
                         for j, k in enumerate(ks))
        se_rad = float(np.sqrt(se_rad ** 2)) if se_rad >= se_rad_abs else float(se_rad)
        se_comb = float(np.hypot(se_thin, se_rad))
        sh = th["cols"][:, -1]
        tail = float(np.sqrt(np.mean(th["mass_hi"][sh] ** 2) * np.mean(th[o.name][sh] ** 2)))
        diff = lhs - rhs
        rows.append({"observable": o.name, "lhs": lhs, "rhs": rhs, "diff": diff,
                     "stderr": se_comb, "tail_budget": tail,
                     "pass": bool(abs(diff) <= tol * se_comb + tail)})
    return {"identity": "decomposition", "m": m, "K_max": K_max, "samples": samples,
            "seed": seed, "rows": rows, "pass": all(r["pass"] for r in rows),
            "c_over_b2_sum": float(np.sum(c / b2))}


# -- marginals -----------------------------------------------------------------------------

def _mixture_cdf(spec, a, b, x):
    """int_a^b density(spec) over an interval, vectorised over shifts x."""
    t, w = np.polynomial.legendre.leggauss(24)
    lo = np.maximum(a - x, 0.0)
    hi = np.maximum(b - x, 0.0)
    nodes = 0.5 * (hi - lo)[..., None] * t + 0.5 * (hi + lo)[..., None]
    vals = density_at(spec, nodes)
    return 0.5 * (hi - lo) * (vals @ w)


def marginal_density_check(m: float, N_marg: int, samples: int, seed: int, eps: float = 0.02,
                           bins: int = 20, n_max: int = N_MAX, tol: float = 5.0,
                           mixture_nodes: int = 16) -> dict:
    """Histograms of rho_k = r_k^2 (k <= N_marg) on the eps-shell against the exact
    eps-mixture

        rho^{d-1} e^{-rho} P(y_k in (m - eps - rho/<k>^2, m + eps - rho/<k>^2)) / mu(shell),

    y_k the mass without +-k. The fixed-mass marginal

        rho^{d-1} e^{-rho} P_k(m' - rho/<k>^2) / p_0(m')

    is reported at m' = m; its p_0-weighted average over (m - eps, m + eps),
    computed by quadrature in m', must reproduce the mixture.
    """
    if N_marg > 8:
        raise ValueError("N_marg <= 8")
    ks = list(range(N_marg + 1))
    fields = {f"r2_{k}": (lambda g, k=k: radius_sq(g, k)) for k in ks}
    fhead = frequencies(n_max)
    head_w = np.where(np.abs(fhead) <= N_marg, 1.0 / bracket2(fhead), 0.0)
    fields["y"] = lambda g: np.abs(g) ** 2 @ head_w
    th = _thin_scan(m, samples, seed, n_max, (eps,), None, fields)
    n = th["mass"].size
    full = CharFunctionSpec.truncated(n_max)
    shell_p = float(_mixture_cdf(full, m - eps, m + eps, np.zeros(1))[0])
    mq, wq = np.polynomial.legendre.leggauss(mixture_nodes)
    mq = m + eps * mq
    wq = eps * wq
    p0q = density_at(full, mq)
    p0 = float(density_at(full, m))
    t, w = np.polynomial.legendre.leggauss(8)
    rows = []
    for k in ks:
        b2 = float(bracket2(k))
        d = 1 if k == 0 else 2
        rho = th[f"r2_{k}"]
        edges = np.linspace(0.0, b2 * (m + eps), bins + 1)
        counts, _ = np.histogram(rho, edges)
        spec = CharFunctionSpec("except", k, n_max, False)

        def fixed(x, mm):
            inside = x / b2 < mm
            return np.where(inside, density_at(spec, np.clip(mm - x / b2, 0, None)), 0.0)
        mix_p, lim_p, avg_p = [], [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x = 0.5 * (b - a) * t + 0.5 * (b + a)
            dens = x ** (d - 1) * np.exp(-x)
            h = 0.5 * (b - a)
            mix = _mixture_cdf(spec, m - eps, m + eps, x / b2)
            mix_p.append(h * np.sum(w * dens * mix) / shell_p)
            lim_p.append(h * np.sum(w * dens * fixed(x, m)) / p0)
            # p_0-weighted average of the fixed-mass marginals over the shell
            per_m = np.array([h * np.sum(w * dens * fixed(x, mm)) for mm in mq])
            avg_p.append(float(wq @ per_m) / shell_p)
        mix_p = np.array(mix_p)
        emp = counts / n
        se = np.sqrt(np.maximum(mix_p * (1 - mix_p), 1.0 / n) / n)
        zmax = float(np.max(np.abs(emp - mix_p) / se))
        gap = float(np.max(np.abs(mix_p - np.array(avg_p))))
        rows.append({"k": k, "edges": edges.tolist(), "empirical": emp.tolist(),
                     "mixture": mix_p.tolist(), "fixed_mass": [float(v) for v in lim_p],
                     "fixed_mass_total": float(np.sum(lim_p)),
                     "mixture_average_gap": gap, "max_z": zmax, "pass": bool(zmax <= tol)})
    return {"m": m, "eps": eps, "members": n, "rows": rows,
            "block_mass_max": float(th["y"].max()) if n else 0.0,
            "block_mass_below": bool(np.all(th["y"] < m + eps)),
            "pass": all(r["pass"] for r in rows)}


# -- covariance ------------------------------------------------------------------------------

def covariance_positivity(m: float, k: int, j, p: float, samples: int, seed: int,
                          N: int = 16, n_max: int = N_MAX, tol: float = 4.0) -> dict:
    """Cov(e^{p G_k^j(u_N)}, r_k^2) on {sum_{|n| != k} |g_n|^2/<n>^2 <= m}.

    ``j`` may be a single index or a list; one scan serves all of them.
    """
    js = [j] if np.isscalar(j) else list(j)
    if any(i not in range(5) for i in js):
        raise ValueError("j must be in 0..4")
    b2 = bracket2(k)
    X, Y = [], []
    for idx, g in scan(seed, samples, n_max, lambda mo: mo.mass - mo.rk2(k) / b2 <= m * (1 + MARGIN)):
        r2 = radius_sq(g, k)
        ok = fn.mass(g) - r2 / b2 <= m
        g, r2 = g[ok], r2[ok]
        G = fn.g_decomposition(fn._low(g, N), None, k)[..., js]
        X.append(np.exp(p * G))
        Y.append(r2)
    X = np.concatenate(X) if X else np.zeros((0, len(js)))
    Y = np.concatenate(Y) if Y else np.zeros(0)
    n = Y.size
    if n < 2:
        raise ArithmeticError("conditioning set is empty in this sample")
    rows = []
    dy = Y - Y.mean()
    for col, jj in enumerate(js):
        dx = X[:, col] - X[:, col].mean()
        cov = float(np.mean(dx * dy))
        se = float(np.std(dx * dy, ddof=1) / np.sqrt(n))
        rows.append({"j": jj, "cov": cov, "stderr": se, "z": cov / se if se > 0 else 0.0,
                     "pass": bool(cov >= -tol * se)})
    out = {"m": m, "k": k, "p": p, "N": N, "members": n, "samples": samples, "seed": seed,
           "rows": rows, "pass": all(r["pass"] for r in rows)}
    if np.isscalar(j):
        out.update({key: rows[0][key] for key in ("j", "cov", "stderr", "z")})
    return out


def gamma_covariance_check(samples: int, seed: int) -> dict:
    """Cov(r^2, r^4) for r^2 ~ Gamma(2, 1); exact value E r^6 - E r^2 E r^4 = 24 - 12 = 12."""
    r2 = np.empty(samples)
    for s, c in rng.chunks(samples):
        r2[s:s + c] = rng.exponentials(seed, s, c, np.array([-1, 1]), rng.STREAM_AUX).sum(axis=1)
    x, y = r2, r2 * r2
    dx, dy = x - x.mean(), y - y.mean()
    cov = float(np.mean(dx * dy))
    se = float(np.std(dx * dy, ddof=1) / np.sqrt(samples))
    return {"cov": cov, "stderr": se, "exact": 12.0, "rel_error": abs(cov - 12.0) / 12.0}


# -- exponential moments and chaos on the shell ---------------------------------------------------

def exp_moment_fixed_mass(m: float, p: float, N: int, samples: int, seed: int,
                          eps_list=(0.1, 0.05), n_max: int = N_MAX, proposal: str = "auto") -> dict:
    """E_{mu_m^eps}[e^{p f_N}] and E_{mu_m^eps}[e^{p f_N - (1/2) int |u_N|^6}] per eps."""
    prop = _proposal_for(m, n_max, proposal)
    ladder = tuple(sorted(eps_list, reverse=True))
    fields = {"f": lambda g: fn.f_N(fn._low(g, N), None),
              "sextic": lambda g: fn.sextic_weight(fn._low(g, N), None)}
    th = _thin_scan(m, samples, seed, n_max, ladder, prop, fields)
    rows = []
    for j, eps in enumerate(ladder):
        ind = th["cols"][:, j]
        w = th["w"][ind]
        f = th["f"][ind]
        if w.size == 0:
            raise ArithmeticError(f"no samples in the eps = {eps} shell")
        ef = np.exp(p * f)
        efs = np.exp(p * f - th["sextic"][ind])
        W = w.sum()
        val = float(w @ ef / W)
        psi = w * (ef - val) / W
        val_s = float(w @ efs / W)
        psi_s = w * (efs - val_s) / W
        mean_f = float(w @ f / W)
        contrib = w * ef
        heavy = top_weight_share(contrib, 1e-3) > 0.5
        if heavy:
            log.warning("top 0.1%% of weights carry more than half the sum (N=%d, eps=%g)", N, eps)
        rows.append({"eps": eps, "value": val, "stderr": float(np.sqrt(np.sum(psi ** 2))),
                     "psi_value": val_s, "psi_stderr": float(np.sqrt(np.sum(psi_s ** 2))),
                     "mean_f": mean_f, "jensen_floor": float(np.exp(p * mean_f)),
                     "jensen_ok": bool(val >= np.exp(p * mean_f) * (1 - 1e-12)),
                     "ess": float(ess(w)), "members": int(w.size), "heavy_tail": bool(heavy),
                     "finite": bool(np.isfinite(val))})
    return {"m": m, "p": p, "N": N, "samples": samples, "seed": seed,
            "proposal": "plain" if prop is None else "tilted",
            "lambda": 0.0 if prop is None else prop.lam, "rows": rows}


def chaos_l2_fixed_mass(m: float, N: int, M: int, samples: int, seed: int, eps: float = 0.05,
                        n_max: int = N_MAX, proposal: str = "auto") -> dict:
    """E_{mu_m^eps}|f_N - f_M|^2."""
    if M < N:
        raise ValueError("need M >= N")
    prop = _proposal_for(m, n_max, proposal)
    fields = {"d": lambda g: fn.f_N(fn._low(g, M), None) - fn.f_N(fn._low(g, N), None)}
    th = _thin_scan(m, samples, seed, n_max, (eps,), prop, fields)
    w = th["w"]
    x = th["d"] ** 2
    if w.size == 0:
        raise ArithmeticError("empty shell")
    W = w.sum()
    val = float(w @ x / W)
    se = float(np.sqrt(np.sum((w * (x - val) / W) ** 2)))
    return {"m": m, "N": N, "M": M, "eps": eps, "value": val, "stderr": se,
            "members": int(w.size), "ess": float(ess(w)), "samples": samples, "seed": seed}


# -- two-dimensional scaling demo ----------------------------------------------------------------

def _disk_rule(res):
    r, wr = np.polynomial.legendre.leggauss(res)
    r = 0.5 * (r + 1)
    wr = 0.5 * wr * r                  # polar area element r dr
    th = 2 * np.pi * np.arange(2 * res) / (2 * res)
    wt = np.full(th.size, 2 * np.pi / th.size)
    R, T = np.meshgrid(r, th, indexing="ij")
    return R * np.cos(T), R * np.sin(T), np.outer(wr, wt)


def disk_scaling_demo(f: Callable, resolution: int = 64, h: float = 1e-3) -> dict:
    """Three routes to the normalised circle average of f.

    scaling:     (1/pi) d/dr at r = 1 of int_D r f(sqrt(r) x, sqrt(r) y) dA
    divergence:  (1/2pi) int_D (2 f + x f_x + y f_y) dA
    circle:      (1/2pi) int_0^{2pi} f(cos t, sin t) dt

    Also the one-variable forms: (1/pi) d/ds at s = 1 of int_D s f(s x, y) dA is
    the integral of f against 2x^2 sigma, and likewise for y; their average is
    the circle average since x^2 + y^2 = 1 there.
    """
    X, Y, W = _disk_rule(resolution)
    I = lambda r: float(np.sum(W * r * f(np.sqrt(r) * X, np.sqrt(r) * Y)))

    def deriv(fun):
        D = lambda t: (fun(1 + t) - fun(1 - t)) / (2 * t)
        return (4 * D(h / 2) - D(h)) / 3
    scaling = deriv(I) / np.pi
    e = 1e-5
    fx = (f(X + e, Y) - f(X - e, Y)) / (2 * e)
    fy = (f(X, Y + e) - f(X, Y - e)) / (2 * e)
    divergence = float(np.sum(W * (2 * f(X, Y) + X * fx + Y * fy))) / (2 * np.pi)
    t = 2 * np.pi * np.arange(4 * resolution) / (4 * resolution)
    cx, cy = np.cos(t), np.sin(t)
    circle = float(np.mean(f(cx, cy)))
    Jx = lambda s: float(np.sum(W * s * f(s * X, Y)))
    Jy = lambda s: float(np.sum(W * s * f(X, s * Y)))
    x_scaling = deriv(Jx) / np.pi
    y_scaling = deriv(Jy) / np.pi
    x_circle = float(np.mean(2 * cx * cx * f(cx, cy)))
    y_circle = float(np.mean(2 * cy * cy * f(cx, cy)))
    routes = [scaling, divergence, circle]
    return {"scaling": scaling, "divergence": divergence, "circle": circle,
            "max_route_gap": float(max(routes) - min(routes)),
            "x_scaling": x_scaling, "x_circle": x_circle,
            "y_scaling": y_scaling, "y_circle": y_circle,
            "half_sum_gap": float(abs(0.5 * (x_circle + y_circle) - circle)),
            "one_variable_gap": float(max(abs(x_scaling - x_circle), abs(y_scaling - y_circle)))}
