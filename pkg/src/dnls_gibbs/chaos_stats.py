"""Gaussian tails, chaos L^p norms and the cut-off exponential density.

The chaos S_{4,N} is f_N evaluated with g_n replaced by c(n) g_n:

    S_{4,N} = sum_{n1+n2=n3+n4, |n_i|<=N} K(n1,n2;n3,n4) g1 g2 gbar3 gbar4,
    K = (3/4)(n1+n2) w1 w2 w3 w4,   w_n = c(n)/<n>.

D = S_{4,M} - S_{4,N} is the same sum over tuples inside the M-cube but not
inside the N-cube. For complex Gaussians E g gbar = 1, E g g = 0, and Wick's
theorem sums E[g_x1 g_x2 gbar_y1 gbar_y2 gbar_x3 gbar_x4 g_y3 g_y4] over the 24
matchings of the g's with the gbar's. Using the symmetries of K they fall in
three groups:

    4 matchings pairing each quadruple with itself:         4 (sum_b h(b))^2
    4 matchings pairing the two quadruples across:          4 sum K^2
    16 mixed matchings (one internal pair on each side):    16 sum_b h(b)^2

with h(b) = sum_a K(a,b;a,b). For a single mode this gives 24 K^2 = K^2 E|g|^8.
sum K^2 over a cube collapses to (9/16) sum_k k^2 T(k)^2 with
T(k) = sum_{n1+n2=k} w_{n1}^2 w_{n2}^2, so the whole computation is O(M^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import functionals as fn
from . import rng
from .functionals import CoefficientScaling
from .mass_distributions import CharFunctionSpec, invert_density
from .stats import Estimate, mean_se, ratio, se_of, wilson
from .torus_field import (SampleBatch, frequencies, japanese_bracket, sample_coefficients,
                          _check_dyadic)

MAX_EXACT_M = 128
MIN_ACCEPTANCE = 1e-5


@dataclass
class TailEstimate:
    lam: float
    empirical_prob: float
    bound: float
    sample_count: int
    wilson_interval: tuple
    applicable: bool = True
    exact: float | None = None
    hits: int = 0

    @property
    def violation(self) -> bool:
        """The whole 99% interval lies above the bound."""
        return self.applicable and self.wilson_interval[0] > self.bound

    def as_dict(self):
        d = dict(self.__dict__)
        d["wilson_interval"] = list(self.wilson_interval)
        d["violation"] = self.violation
        return d


def _block(N):
    f = frequencies(N)
    return f[(2 * np.abs(f) > N) & (np.abs(f) <= N)]


def _tail(hits, n, lam, bound, applicable, exact=None):
    return TailEstimate(float(lam), hits / n if n else float("nan"), float(bound), int(n),
                        wilson(hits, n, 0.99), bool(applicable), exact, int(hits))


def gaussian_block_tail(N: int, lam: float, samples: int, seed: int) -> TailEstimate:
    """P(sum_{n~N} |g_n|^2 > lam) against e^{-lam/4} (valid for lam > 4 N ln 2).

    The block has N frequencies, so the sum is Gamma(N, 1) and its exact tail
    is reported too.
    """
    _check_dyadic(N)
    f = _block(N)
    hits = 0
    for s, c in rng.chunks(samples):
        hits += int(np.count_nonzero(rng.exponentials(seed, s, c, f).sum(axis=1) > lam))
    return _tail(hits, samples, lam, np.exp(-lam / 4), lam > 4 * N * np.log(2),
                 float(special.gammaincc(f.size, lam)))


def dyadic_l2_tail(batch: SampleBatch, N: int, lam: float, variance_cap: float = 1.0,
                   c: CoefficientScaling | None = None) -> TailEstimate:
    """mu(||P_N u||^2 > lam) against e^{-N^2 lam / (16 M^2)}, M the cap on |c|.

    Valid for lam > 16 M^2 ln 2 / N. Only the moduli are drawn.
    """
    _check_dyadic(N)
    if N > batch.n_max:
        raise ValueError("dyadic block beyond the batch cutoff")
    f = _block(N)
    w = 1.0 / japanese_bracket(f) ** 2
    if c is not None:
        cv = c(batch.n_max)[f + batch.n_max]
        if np.any(np.abs(cv) > variance_cap * (1 + 1e-15)):
            raise ValueError("coefficient scaling exceeds the variance cap")
        w = w * cv * cv
    hits = 0
    for s, n in rng.chunks(batch.count):
        e = rng.exponentials(batch.seed, batch.start + s, n, f)
        hits += int(np.count_nonzero(e @ w > lam))
    bound = np.exp(-N * N * lam / (16 * variance_cap ** 2))
    return _tail(hits, batch.count, lam, bound, lam > 16 * variance_cap ** 2 * np.log(2) / N)


# -- exact chaos L2 -------------------------------------------------------------

def _cube_sum_K2(w2, n):
    # (9/16) sum_k k^2 T(k)^2 over the n-cube
    v = w2[len(w2) // 2 - n:len(w2) // 2 + n + 1]
    T = np.convolve(v, v)
    k = np.arange(-2 * n, 2 * n + 1, dtype=float)
    return 9.0 / 16.0 * float(np.sum(k * k * T * T))


def chaos_l2_exact(N: int, M: int, c: CoefficientScaling | None = None) -> float:
    """E |S_{4,M} - S_{4,N}|^2 by Wick pairings, exact up to rounding."""
    if M < N:
        raise ValueError("need M >= N")
    if M > MAX_EXACT_M:
        raise ValueError(f"exact enumeration limited to M <= {MAX_EXACT_M}")
    if M == N:
        return 0.0
    f = frequencies(M)
    w = 1.0 / japanese_bracket(f)
    if c is not None:
        w = w * c(M)
    w2 = w * w
    sumK2 = _cube_sum_K2(w2, M) - _cube_sum_K2(w2, N)
    # h(b) = (3/4) w_b^2 sum_a (a + b) w_a^2 over a with max(|a|, |b|) in (N, M]
    a = f.astype(float)
    inside = np.maximum(np.abs(f)[:, None], np.abs(f)[None, :]) > N      # [b, a]
    h = 0.75 * w2 * np.sum(inside * (a[None, :] + a[:, None]) * w2[None, :], axis=1)
    H = float(h.sum())
    return 4 * H * H + 4 * sumK2 + 16 * float(np.sum(h * h))


def _wick_bruteforce(N: int, M: int, w: np.ndarray) -> float:
    """Direct permanent-sum oracle for tiny M (test use)."""
    f = frequencies(M)
    idx = range(-M, M + 1)
    tuples = []
    for n1 in idx:
        for n2 in idx:
            for n3 in idx:
                n4 = n1 + n2 - n3
                if abs(n4) > M:
                    continue
                if max(abs(n1), abs(n2), abs(n3), abs(n4)) <= N:
                    continue
                K = 0.75 * (n1 + n2) * w[n1 + M] * w[n2 + M] * w[n3 + M] * w[n4 + M]
                tuples.append((n1, n2, n3, n4, K))
    import itertools
    total = 0.0
    for (a1, a2, a3, a4, Ka) in tuples:
        for (b1, b2, b3, b4, Kb) in tuples:
            xs = (a1, a2, b3, b4)
            ys = (a3, a4, b1, b2)
            perm = sum(all(xs[i] == ys[p[i]] for i in range(4))
                       for p in itertools.permutations(range(4)))
            total += Ka * Kb * perm
    del f
    return total


# -- Monte Carlo ----------------------------------------------------------------

def _chaos_values(seed, samples, N, M, c):
    """S_{4,N} and S_{4,M} for samples 0..samples-1 (coefficients up to M)."""
    sN = np.empty(samples)
    sM = np.empty(samples)
    scale = (c or CoefficientScaling.ones())(M)
    for s, n in rng.chunks(samples, 4096):
        g = sample_coefficients(seed, s, n, M) * scale
        sM[s:s + n] = fn.f_N(g, M)
        sN[s:s + n] = sM[s:s + n] if N == M else fn.f_N(g, N)
    return sN, sM


@dataclass
class ChaosNormReport:
    N: int
    M: int
    exact_l2_sq: float | None
    mc_l2_sq: Estimate
    lp_ratios: dict = field(default_factory=dict)
    samples: int = 0
    seed: int = 0

    @property
    def z(self) -> float:
        if self.exact_l2_sq is None or self.mc_l2_sq.stderr == 0:
            return 0.0 if self.exact_l2_sq in (None, self.mc_l2_sq.value) else float("inf")
        return (self.mc_l2_sq.value - self.exact_l2_sq) / self.mc_l2_sq.stderr

    def as_dict(self):
        return {"N": self.N, "M": self.M, "exact_l2_sq": self.exact_l2_sq,
                "mc_l2_sq": self.mc_l2_sq.as_dict(), "z": self.z,
                "lp_ratios": self.lp_ratios, "samples": self.samples, "seed": self.seed}


def lp_ratio(x, p: float) -> Estimate:
    """||x||_p / ||x||_2 with a delta-method standard error."""
    x = np.asarray(x, dtype=float)
    a = np.abs(x) ** p
    b = x * x
    A, B = a.mean(), b.mean()
    if B == 0:
        return Estimate(float("nan"), float("nan"))
    r = A ** (1 / p) / np.sqrt(B)
    # d log r = dA/(pA) - dB/(2B)
    psi = r * ((a - A) / (p * A) - (b - B) / (2 * B))
    return Estimate(float(r), se_of(psi))


def chaos_l2_mc(N: int, M: int, c: CoefficientScaling | None = None, samples: int = 10**5,
                seed: int = 0, p_list=(4, 6)) -> ChaosNormReport:
    sN, sM = _chaos_values(seed, samples, N, M, c)
    d = sM - sN
    est = mean_se(d * d)
    exact = chaos_l2_exact(N, M, c) if M <= MAX_EXACT_M else None
    ratios = {}
    if np.any(d != 0):
        ratios = {int(p): lp_ratio(d, p).as_dict() for p in p_list}
    return ChaosNormReport(N, M, exact, est, ratios, samples, seed)


def hypercontractivity_check(N: int, p: float, samples: int, seed: int,
                             slack: float = 3.0) -> dict:
    """||S_{4,N}||_p / ||S_{4,N}||_2 against sqrt(5) (p-1)^2."""
    if p not in (4, 6, 8):
        raise ValueError("p must be 4, 6 or 8")
    s, _ = _chaos_values(seed, samples, N, N, None)
    est = lp_ratio(s, p)
    bound = np.sqrt(5.0) * (p - 1) ** 2
    ok = bool(np.isfinite(est.value) and est.value - slack * est.stderr <= bound)
    return {"N": N, "p": p, "ratio": est.value, "stderr": est.stderr, "bound": float(bound),
            "ok": ok, "samples": samples, "seed": seed}


# -- small-ball proposal ----------------------------------------------------------

def tilt_parameter(m: float, n_max: int) -> float:
    """lambda >= 0 with sum_n 1/(<n>^2 + lambda) = m (0 when m exceeds the mean mass)."""
    b2 = 1.0 + frequencies(n_max).astype(float) ** 2
    g = lambda lam: np.sum(1.0 / (b2 + lam)) - m
    if g(0.0) <= 0:
        return 0.0
    hi = 1.0
    while g(hi) > 0:
        hi *= 2
    from scipy.optimize import brentq
    return float(brentq(g, 0.0, hi, xtol=1e-12))


@dataclass(frozen=True)
class TiltedProposal:
    """g_n = sqrt(v_n) g'_n with v_n = <n>^2/(<n>^2 + lambda); dmu/dq = Z e^{lambda mass}."""
    lam: float
    n_max: int

    @property
    def variances(self) -> np.ndarray:
        b2 = 1.0 + frequencies(self.n_max).astype(float) ** 2
        return b2 / (b2 + self.lam)

    @property
    def log_z(self) -> float:
        return float(np.sum(np.log(self.variances)))

    def log_weight(self, mass) -> np.ndarray:
        return self.log_z + self.lam * np.asarray(mass)

    def mass_weights(self) -> np.ndarray:
        # mass of a proposal draw as a linear form in the |g'_n|^2
        return self.variances / (1.0 + frequencies(self.n_max).astype(float) ** 2)

    def coefficients(self, seed, indices) -> np.ndarray:
        g = rng.complex_gaussians_at(seed, indices, frequencies(self.n_max))
        return g * np.sqrt(self.variances)


def density_lp_estimate(N: int, m: float, p: float, c: CoefficientScaling | None = None,
                        samples: int = 10**5, seed: int = 0, proposal: str = "auto") -> dict:
    """int 1_{||u_N||^2 < m} e^{p S_{4,N}} dmu, and the same with the sextic factor.

    ``proposal``: "plain" rejection from mu, "tilted" exponential tilting
    toward mass m (the default for m <= 0.5).
    """
    if m <= 0:
        return {"value": 0.0, "stderr": 0.0, "psi_value": 0.0, "psi_stderr": 0.0,
                "acceptance": 0.0, "proposal": "none", "N": N, "m": m, "p": p}
    if proposal == "auto":
        proposal = "tilted" if m <= 0.5 else "plain"
    tp = TiltedProposal(tilt_parameter(m, N) if proposal == "tilted" else 0.0, N)
    mw = tp.mass_weights()
    f = frequencies(N)
    cv = (c or CoefficientScaling.ones())(N)
    num = np.zeros(samples)
    psi = np.zeros(samples)
    inside_count = 0
    for s, n in rng.chunks(samples):
        mass = rng.exponentials(seed, s, n, f) @ mw
        idx = np.flatnonzero(mass < m * (1 + 1e-9))
        if idx.size == 0:
            continue
        g = tp.coefficients(seed, s + idx)
        exact_mass = fn.mass(g)
        ok = exact_mass < m
        idx, g, exact_mass = idx[ok], g[ok], exact_mass[ok]
        inside_count += idx.size
        logw = tp.log_weight(exact_mass) if tp.lam > 0 else 0.0
        S = fn.f_N(g * cv, N)
        num[s + idx] = np.exp(logw + p * S)
        psi[s + idx] = np.exp(logw + p * S - fn.sextic_weight(g, N))
    acc = inside_count / samples
    if acc < MIN_ACCEPTANCE:
        raise ValueError(f"acceptance {acc:.2e} below {MIN_ACCEPTANCE:g}: raise m or use "
                         "the tilted small-ball proposal")
    e1, e2 = mean_se(num), mean_se(psi)
    return {"value": e1.value, "stderr": e1.stderr, "psi_value": e2.value,
            "psi_stderr": e2.stderr, "acceptance": acc, "proposal": proposal,
            "lambda": tp.lam, "N": N, "m": m, "p": p, "samples": samples, "seed": seed}


def mass_cdf(m: float, n_max: int) -> float:
    """mu(mass < m) for the n_max-mode system, from the inverted density."""
    x = np.linspace(0.0, max(m, 1e-6), 4001)
    curve = invert_density(CharFunctionSpec.truncated(n_max), x)
    return float(np.trapezoid(np.maximum(curve.values, 0.0), x))


# -- chaos tails ------------------------------------------------------------------

def chaos_tail_decay(N: int, M: int, lambda_grid, samples: int, seed: int,
                     min_hits: int = 20) -> dict:
    """Empirical P(|S_{4,M} - S_{4,N}| > lam) per lam with log-linear fits.

    ``slope_sqrt_lambda`` regresses log P on lam^{1/2};
    ``slope_scaled`` regresses on N^{1/4} lam^{1/2}. Points with fewer than
    ``min_hits`` exceedances are left out of the fits.
    """
    if M < 2 * N:
        raise ValueError("need M >= 2N")
    sN, sM = _chaos_values(seed, samples, N, M, None)
    d = np.abs(sM - sN)
    lam = np.asarray(lambda_grid, dtype=float)
    hits = np.array([np.count_nonzero(d > l) for l in lam])
    prob = hits / samples
    rows = [{"lambda": float(l), "prob": float(pr), "hits": int(h),
             "wilson": list(wilson(int(h), samples))} for l, pr, h in zip(lam, prob, hits)]
    use = (hits >= min_hits) & (lam > 0)
    out = {"N": N, "M": M, "rows": rows, "samples": samples, "seed": seed,
           "slope_sqrt_lambda": None, "slope_scaled": None}
    if np.count_nonzero(use) >= 2:
        x = np.sqrt(lam[use])
        y = np.log(prob[use])
        out["slope_sqrt_lambda"] = float(np.polyfit(x, y, 1)[0])
        out["slope_scaled"] = float(np.polyfit(N ** 0.25 * x, y, 1)[0])
    return out
