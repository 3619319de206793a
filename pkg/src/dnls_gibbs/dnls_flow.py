"""Galerkin-truncated derivative NLS and the invariance harness.

The truncated equation is

    u_t = i u_xx + P_{<=N} d_x(|u|^2 u),   u = P_{<=N} u,

stepped with integrating-factor RK4: the linear symbol e^{-i n^2 t} is applied
exactly and RK4 handles the projected nonlinearity, evaluated on a grid of
M >= 4N + 1 points so the cubic product is projected without aliasing.

The state is the vector of Fourier coefficients a_n = g_n/<n> of u, with any
leading batch axes; ``FourierField`` inputs are converted on the way in and out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from . import functionals as fn
from .chaos_stats import TiltedProposal, tilt_parameter
from .functionals import QuadratureGrid
from .torus_field import (FourierField, as_array, frequencies, japanese_bracket,
                          n_max_of, sample_coefficients)
from .stats import ess, weighted_mean_diff


class FlowBlowup(FloatingPointError):
    """Non-finite state; ``state`` holds the last finite coefficients."""

    def __init__(self, msg, state=None, t=None):
        super().__init__(msg)
        self.state = state
        self.t = t


@dataclass(frozen=True)
class FlowConfig:
    n_max: int
    T: float = 1.0
    dt: float | None = None
    nonlinear: bool = True
    dt_cap: float = 0.1  # dt <= dt_cap / N^2

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        if self.dt is None:
            object.__setattr__(self, "dt", 0.05 / max(1, self.n_max) ** 2)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.dt > self.dt_cap / max(1, self.n_max) ** 2 * (1 + 1e-12):
            raise ValueError(f"dt = {self.dt} exceeds {self.dt_cap}/N^2")

    @property
    def grid(self) -> QuadratureGrid:
        return QuadratureGrid.for_degree(max(1, self.n_max), 4)

    @property
    def steps(self) -> int:
        return int(np.ceil(abs(self.T) / self.dt - 1e-9))


class Stepper:
    """Precomputed IFRK4 stepper for a fixed cutoff and step."""

    def __init__(self, n_max: int, dt: float, nonlinear: bool = True):
        self.n_max = n_max
        self.dt = dt
        self.nonlinear = nonlinear
        f = frequencies(n_max).astype(float)
        self.ik = 1j * f
        self.grid = QuadratureGrid.for_degree(max(1, n_max), 4)
        self.E = np.exp(-0.5j * f * f * dt)
        self.E2 = self.E * self.E

    def rhs(self, a: np.ndarray) -> np.ndarray:
        """P_{<=N} d_x(|u|^2 u) in coefficient space."""
        if not self.nonlinear:
            return np.zeros_like(a)
        v = self.grid.values(a)
        return self.ik * self.grid.coefficients(np.abs(v) ** 2 * v, self.n_max)

    def __call__(self, a: np.ndarray) -> np.ndarray:
        h, E, E2 = self.dt, self.E, self.E2
        k1 = self.rhs(a)
        k2 = self.rhs(E * (a + 0.5 * h * k1))
        k3 = self.rhs(E * a + 0.5 * h * k2)
        k4 = self.rhs(E2 * a + h * E * k3)
        return E2 * a + (h / 6.0) * (E2 * k1 + 2.0 * E * (k2 + k3) + k4)


def to_state(u) -> np.ndarray:
    return fn.weighted(u)


def from_state(a: np.ndarray, like=None):
    g = a * japanese_bracket(frequencies(n_max_of(a)))
    if isinstance(like, FourierField):
        return FourierField(like.n_max, g)
    return g


def _integrate(a, n_max, dt, steps, nonlinear, every=0):
    stepper = Stepper(n_max, dt, nonlinear)
    snaps = [a] if every else []
    for i in range(steps):
        nxt = stepper(a)
        if not np.all(np.isfinite(nxt)):
            raise FlowBlowup(f"non-finite state after step {i + 1}", state=a, t=i * dt)
        a = nxt
        if every and (i + 1) % every == 0:
            snaps.append(a)
    return a, snaps


def step(u, cfg: FlowConfig):
    """One IFRK4 step of size cfg.dt."""
    a = to_state(u)
    _check_cutoff(a, cfg)
    out, _ = _integrate(a, cfg.n_max, cfg.dt, 1, cfg.nonlinear)
    return from_state(out, u)


def _check_cutoff(a, cfg):
    if n_max_of(a) != cfg.n_max:
        raise ValueError(f"field cutoff {n_max_of(a)} differs from flow cutoff {cfg.n_max}")


@dataclass
class Trajectory:
    times: np.ndarray
    final: object
    snapshots: list = field(default_factory=list, repr=False)
    drift: dict = field(default_factory=dict)  # |change| per unit time


def evolve(u0, cfg: FlowConfig, every: int = 0, backward: bool = False) -> Trajectory:
    """Integrate to time T (or -T when ``backward``) in cfg.steps equal steps.

    ``every`` > 0 keeps a snapshot every that many steps. The returned drift
    entries are |Q(T) - Q(0)|/T for mass, momentum and energy (maximum over
    the batch).
    """
    a0 = to_state(u0)
    _check_cutoff(a0, cfg)
    n = cfg.steps
    dt = (cfg.T / n if n else cfg.dt) * (-1.0 if backward else 1.0)
    a, snaps = _integrate(a0, cfg.n_max, dt, n, cfg.nonlinear, every)
    T = abs(dt) * n
    drift = {}
    for name, q in (("mass", fn.mass), ("momentum", fn.momentum), ("energy", fn.energy)):
        d = np.abs(np.asarray(q(from_state(a), "grid")) - np.asarray(q(from_state(a0), "grid")))
        drift[name] = float(np.max(d)) / T if T > 0 else 0.0
    times = np.arange(0, n + 1, every) * dt if every else np.array([0.0, n * dt])
    return Trajectory(times=times, final=from_state(a, u0),
                      snapshots=[from_state(s, u0) for s in snaps], drift=drift)


def observed_order(u0, cfg: FlowConfig, refinements: int = 3) -> dict:
    """Convergence order from terminal errors at dt, dt/2, ... against dt/64."""
    a0 = to_state(u0)
    base = cfg.steps
    ref, _ = _integrate(a0, cfg.n_max, cfg.T / (base * 64), base * 64, cfg.nonlinear)
    errs = []
    for r in range(refinements):
        steps = base * 2 ** r
        a, _ = _integrate(a0, cfg.n_max, cfg.T / steps, steps, cfg.nonlinear)
        errs.append(float(np.max(np.abs(a - ref))))
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    return {"dt": [cfg.T / (base * 2 ** r) for r in range(refinements)],
            "errors": errs.tolist(), "orders": orders.tolist()}


def liouville_check(u0, cfg: FlowConfig, h: float = 1e-6) -> float:
    """|log det J| of the time-T map on real coordinates (Re a_n, Im a_n).

    The Jacobian is built by central differences; all 2 d perturbed copies are
    integrated together as one batch. If the determinant comes out
    non-positive or non-finite, h is enlarged tenfold (twice at most).
    """
    a0 = np.asarray(to_state(u0))
    _check_cutoff(a0, cfg)
    if cfg.n_max > 6:
        raise ValueError("Jacobian check is limited to n_max <= 6")
    d = a0.size
    for attempt in range(3):
        basis = np.concatenate([np.eye(d), 1j * np.eye(d)])  # 2d real directions
        batch = np.concatenate([a0 + h * basis, a0 - h * basis])
        n = cfg.steps
        out, _ = _integrate(batch, cfg.n_max, cfg.T / n if n else cfg.dt, n, cfg.nonlinear)
        diff = (out[:2 * d] - out[2 * d:]) / (2 * h)
        J = np.concatenate([diff.real, diff.imag], axis=1).T  # columns: directions
        sign, logdet = np.linalg.slogdet(J)
        if sign > 0 and np.isfinite(logdet):
            return abs(float(logdet))
        h *= 10
    raise ArithmeticError("finite-difference Jacobian is singular or ill-conditioned")


# -- invariance harness -------------------------------------------------------

def observable_u1_sq(a):
    n = n_max_of(a)
    return np.abs(a[..., n + 1]) ** 2


def observable_l4(a):
    return fn.l4_power(from_state(a), None, "grid")


def observable_re_u0(a):
    return a[..., n_max_of(a)].real


def observable_mass(a):
    return np.sum(np.abs(a) ** 2, axis=-1)


OBSERVABLES = {
    "abs_u1_sq": observable_u1_sq,
    "l4_power": observable_l4,
    "re_u0": observable_re_u0,
    "mass": observable_mass,
}


@dataclass
class InvarianceReport:
    observables: list
    mean_0: list
    mean_T: list
    stderr: list
    z: list
    drift: dict
    ess: float
    accepted: int
    samples: int
    seed: int
    T: float
    evolved: int = 0
    resampled: int = 0

    def as_dict(self):
        return dict(self.__dict__)


def gibbs_weights(g: np.ndarray, N: int, m: float) -> np.ndarray:
    """Psi_N = 1_{mass < m} exp(f_N - (1/2) int |u_N|^6), zero off the mass ball."""
    mass = fn.mass(g)
    w = np.zeros(g.shape[:-1])
    inside = mass < m
    if np.any(inside):
        gi = g[inside]
        w[inside] = np.exp(fn.f_N(gi, N) - fn.sextic_weight(gi, N))
    return w


def systematic_resample(w: np.ndarray, R: int, u: float) -> np.ndarray:
    """Counts per sample from systematic resampling with offset u in [0, 1)."""
    c = np.cumsum(w / np.sum(w))
    c[-1] = 1.0
    idx = np.searchsorted(c, (u + np.arange(R)) / R, side="right")
    return np.bincount(idx, minlength=w.size)


def _evolve_chunks(a0, N, T, dt, chunk=128):
    cfg = FlowConfig(N, T=T, dt=dt)
    n = cfg.steps
    out = np.empty_like(a0)
    for s in range(0, a0.shape[0], chunk):
        out[s:s + chunk], _ = _integrate(a0[s:s + chunk], N, T / n, n, True)
    return out


def invariance_harness(m: float, N: int, T: float, samples: int, seed: int,
                       observables=("abs_u1_sq", "l4_power", "re_u0"),
                       dt: float | None = None, min_ess: float = 100.0,
                       proposal: str = "tilted", evolve: int | None = None) -> InvarianceReport:
    """Self-normalised comparison of Psi_N-weighted means at t = 0 and t = T.

    The z-score of each observable uses the paired difference O(u_T) - O(u_0)
    on the same weighted samples, so it measures the change under the flow.
    Only samples inside the mass ball carry weight, so only those are evolved.

    With ``proposal="tilted"`` the draws come from the Gaussian with variances
    <n>^2/(<n>^2 + lambda), lambda chosen so the mean mass is m, and carry the
    extra factor e^{lambda mass} (the normalising constant cancels).

    With ``evolve=R`` and more weighted samples than R, R draws are taken by
    systematic resampling in proportion to the weights and only the distinct
    ones are evolved, with their multiplicities as weights. The standard error
    then carries both sources of noise, Var(D) (1/ESS + 1/R).
    """
    g = sample_coefficients(seed, 0, samples, N)
    lam = 0.0
    if proposal == "tilted":
        lam = tilt_parameter(m, N)
        g = g * np.sqrt(TiltedProposal(lam, N).variances)
    elif proposal != "plain":
        raise ValueError(f"unknown proposal {proposal!r}")
    w = gibbs_weights(g, N, m)
    if lam > 0:
        inside = w > 0
        w[inside] *= np.exp(lam * (fn.mass(g[inside]) - m))
    keep = w > 0
    if not np.any(keep):
        raise ValueError("no sample falls inside the mass ball")
    wk = w[keep]
    e = ess(wk)
    if e < min_ess:
        raise ValueError(f"effective sample size {e:.1f} below {min_ess}")
    gk = g[keep]
    R = 0
    if evolve is not None and evolve < wk.size:
        R = int(evolve)
        u = float(rng.uniforms(seed, 0, 1, np.array([0]), rng.STREAM_AUX)[0][0, 0])
        counts = systematic_resample(wk, R, u)
        sel = counts > 0
        gk, wk = gk[sel], counts[sel].astype(float)
    a0 = to_state(gk)
    aT = _evolve_chunks(a0, N, T, dt) if T > 0 else a0.copy()
    names, m0, mT, se, z = [], [], [], [], []
    for name in observables:
        f = OBSERVABLES[name]
        o0, oT = f(a0), f(aT)
        mean0, meanT, d, sd = weighted_mean_diff(wk, o0, oT)
        if R:
            x = oT - o0
            var = float(wk @ (x - d) ** 2 / wk.sum())
            sd = float(np.sqrt(var * (1.0 / e + 1.0 / R)))
        names.append(name)
        m0.append(mean0)
        mT.append(meanT)
        se.append(sd)
        z.append(0.0 if sd == 0 else d / sd)
    drift = {}
    for qname, q in (("mass", fn.mass), ("momentum", fn.momentum), ("energy", fn.energy)):
        q0 = np.asarray(q(from_state(a0), "grid"))
        qT = np.asarray(q(from_state(aT), "grid"))
        drift[qname] = float(np.max(np.abs(qT - q0))) / T if T > 0 else 0.0
    return InvarianceReport(names, m0, mT, se, z, drift, float(e), int(keep.sum()),
                            samples, seed, T, int(a0.shape[0]), R)
