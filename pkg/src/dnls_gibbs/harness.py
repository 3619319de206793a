"""Experiment registry, configs and artifacts.

A config is a TOML file

    experiment = "chaos_decay"
    seed = 1
    [params]
    N_list = [8, 16, 32, 64]

Unknown experiment ids, unknown parameter names, wrongly typed values and
out-of-range values are configuration errors (exit code 2). Every artifact
embeds the resolved config and its sha256, and holds no timestamps, so a rerun
with the same config reproduces it byte for byte.

Each experiment returns CSV rows with a fixed column set, a JSON report and a
verdict. ``anchor`` is a search phrase locating the construction being tested
in the source text, or "plumbing".
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import chaos_stats as cs
from . import dnls_flow as fl
from . import fixed_mass as fm
from . import functionals as fn
from . import mass_distributions as md
from . import rng
from .stats import mean_se
from .torus_field import frequencies, sample_coefficients, sample_mass

log = logging.getLogger(__name__)

OUT_ENV = "DNLS_GIBBS_OUT"
DEFAULT_OUT = "results"


class ConfigError(ValueError):
    pass


@dataclass
class Outcome:
    rows: list
    report: dict
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class Experiment:
    id: str
    anchor: str
    run: Callable[[dict, int], Outcome]
    defaults: dict
    columns: tuple
    fast: dict = field(default_factory=dict)
    criterion: int | None = None
    check: Callable[[dict], None] | None = None
    summary: str = ""


REGISTRY: dict[str, Experiment] = {}


def register(id, anchor, defaults, columns, fast=None, criterion=None, check=None):
    def deco(fun):
        REGISTRY[id] = Experiment(id, anchor, fun, dict(defaults), tuple(columns),
                                  dict(fast or {}), criterion, check,
                                  (fun.__doc__ or "").strip().splitlines()[0])
        return fun
    return deco


# -- configs --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int = 0
    out: str | None = None

    def as_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "params": self.params}

    def canonical(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict, out: str | None = None) -> "ExperimentConfig":
        return validate(d, out)


def _typed(name, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{name} must be a list")
        return value
    return value


def validate(d: dict, out: str | None = None) -> ExperimentConfig:
    if not isinstance(d, dict) or "experiment" not in d:
        raise ConfigError("config needs an 'experiment' key")
    unknown_top = set(d) - {"experiment", "seed", "params", "out"}
    if unknown_top:
        raise ConfigError(f"unknown config keys {sorted(unknown_top)}")
    eid = d["experiment"]
    if eid not in REGISTRY:
        raise ConfigError(f"unknown experiment id {eid!r}; see 'run --list'")
    exp = REGISTRY[eid]
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an integer in [0, 2**64)")
    raw = d.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("params must be a table")
    extra = set(raw) - set(exp.defaults)
    if extra:
        raise ConfigError(f"unknown parameters for {eid}: {sorted(extra)}")
    params = dict(exp.defaults)
    for k, v in raw.items():
        params[k] = _typed(k, v, exp.defaults[k])
    for k, v in params.items():
        if k in ("samples", "fields", "hyper_samples", "aux_samples", "seeds") and v < 1:
            raise ConfigError(f"{k} must be positive")
        if k == "m" and not v > 0:
            raise ConfigError("m must be positive")
    if exp.check is not None:
        try:
            exp.check(params)
        except ValueError as err:
            raise ConfigError(str(err)) from err
    return ExperimentConfig(eid, params, seed, out if out is not None else d.get("out"))


def load_config(path, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            d = tomllib.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"no such config: {path}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from err
    if seed is not None:
        d["seed"] = seed
    return validate(d, out)


def config_for(eid: str, seed: int = 0, fast: bool = False, **overrides) -> ExperimentConfig:
    if eid not in REGISTRY:
        raise ConfigError(f"unknown experiment id {eid!r}")
    params = dict(REGISTRY[eid].fast) if fast else {}
    params.update(overrides)
    return validate({"experiment": eid, "seed": seed, "params": params})


# -- artifacts ------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if hasattr(x, "as_dict"):
        return _jsonable(x.as_dict())
    return x


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: _cell(r.get(c)) for c in columns})
    return buf.getvalue()


def _cell(v):
    v = _jsonable(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    return "" if v is None else v


def output_dir(out: str | None = None) -> Path:
    return Path(out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def execute(cfg: ExperimentConfig, write: bool = True) -> tuple[Outcome, dict]:
    exp = REGISTRY[cfg.experiment]
    t0 = time.perf_counter()
    outcome = exp.run(dict(cfg.params), cfg.seed)
    elapsed = time.perf_counter() - t0
    log.info("%s finished in %.1f s: %s", cfg.experiment, elapsed,
             "pass" if outcome.passed else "FAIL")
    doc = {"experiment": cfg.experiment, "anchor": exp.anchor, "criterion": exp.criterion,
           "config": cfg.as_dict(), "config_sha256": cfg.sha256(),
           "verdict": "pass" if outcome.passed else "fail", "note": outcome.note,
           "columns": list(exp.columns), "rows": outcome.rows, "report": outcome.report}
    doc = _jsonable(doc)
    paths = {}
    if write:
        d = output_dir(cfg.out)
        d.mkdir(parents=True, exist_ok=True)
        stem = f"{cfg.experiment}-{cfg.sha256()[:12]}"
        pj, pc = d / f"{stem}.json", d / f"{stem}.csv"
        pj.write_text(json.dumps(doc, indent=1) + "\n")
        pc.write_text(_csv_text(exp.columns, outcome.rows))
        paths = {"json": str(pj), "csv": str(pc)}
    return outcome, {"paths": paths, "elapsed": elapsed, "doc": doc}


def run_suite(name: str, out: str | None = None, seed: int = 0) -> dict:
    """``fast``: every experiment at small sizes. ``full``: every acceptance criterion."""
    if name not in ("fast", "full"):
        raise ConfigError("suite must be 'fast' or 'full'")
    if name == "fast":
        ids = list(REGISTRY)
    else:
        ids = sorted((e.id for e in REGISTRY.values() if e.criterion), key=lambda i: REGISTRY[i].criterion)
    rows = []
    for eid in ids:
        cfg = config_for(eid, seed, fast=(name == "fast"))
        cfg = ExperimentConfig(cfg.experiment, cfg.params, cfg.seed, out)
        outcome, meta = execute(cfg)
        rows.append({"criterion": REGISTRY[eid].criterion, "experiment": eid,
                     "anchor": REGISTRY[eid].anchor,
                     "verdict": "pass" if outcome.passed else "fail", "note": outcome.note,
                     "seconds": round(meta["elapsed"], 2), "artifact": meta["paths"].get("json", "")})
    d = output_dir(out)
    d.mkdir(parents=True, exist_ok=True)
    report = {"suite": name, "seed": seed, "rows": rows,
              "passed": all(r["verdict"] == "pass" for r in rows)}
    (d / f"suite-{name}.json").write_text(json.dumps(report, indent=1) + "\n")
    cols = ("criterion", "experiment", "anchor", "verdict", "note", "seconds", "artifact")
    (d / f"suite-{name}.csv").write_text(_csv_text(cols, rows))
    return report


# -- experiments ----------------------------------------------------------------------

@register("sampler_moments", "select our initial data",
          {"samples": 10**6, "freqs": [-5, -1, 0, 1, 3, 17, 64], "n_max": 64,
           "second_tol": 0.003, "fourth_tol": 0.01, "z_tol": 3.0},
          ("quantity", "n", "estimate", "stderr", "target", "tolerance", "pass"),
          fast={"samples": 10**5, "second_tol": 0.01, "fourth_tol": 0.04}, criterion=1)
def _sampler_moments(p, seed):
    """E|g_n|^2, E|g_n|^4 per frequency and the mean truncated mass."""
    f = np.asarray(p["freqs"], dtype=np.int64)
    if np.any(np.abs(f) > p["n_max"]):
        raise ConfigError("freqs must lie within n_max")
    rows = []
    e2, e4 = np.zeros(f.size), np.zeros(f.size)
    s2, s4 = np.zeros(f.size), np.zeros(f.size)
    n = p["samples"]
    for s, c in rng.chunks(n):
        g = rng.complex_gaussians(seed, s, c, f)
        a = np.abs(g) ** 2
        e2 += a.sum(0)
        e4 += (a * a).sum(0)
        s2 += (a * a).sum(0)
        s4 += (a ** 4).sum(0)
    m2, m4 = e2 / n, e4 / n
    se2 = np.sqrt((s2 / n - m2 ** 2) / (n - 1))
    se4 = np.sqrt((s4 / n - m4 ** 2) / (n - 1))
    for j, fr in enumerate(f):
        rows.append({"quantity": "E|g|^2", "n": int(fr), "estimate": m2[j], "stderr": se2[j],
                     "target": 1.0, "tolerance": p["second_tol"],
                     "pass": bool(abs(m2[j] - 1) <= p["second_tol"])})
        rows.append({"quantity": "E|g|^4", "n": int(fr), "estimate": m4[j], "stderr": se4[j],
                     "target": 2.0, "tolerance": p["fourth_tol"],
                     "pass": bool(abs(m4[j] - 2) <= p["fourth_tol"])})
    mass = sample_mass(seed, 0, n, p["n_max"])
    est = mean_se(mass)
    target = float(np.sum(1.0 / (1.0 + frequencies(p["n_max"]).astype(float) ** 2)))
    rows.append({"quantity": "E mass", "n": p["n_max"], "estimate": est.value,
                 "stderr": est.stderr, "target": target,
                 "tolerance": p["z_tol"] * est.stderr,
                 "pass": bool(abs(est.value - target) <= p["z_tol"] * est.stderr)})
    return Outcome(rows, {"full_series_mean": md.PI_COTH_PI},
                   all(r["pass"] for r in rows))


@register("functionals_dual_path", "the main conserved quantities are",
          {"fields": 1000, "n_max": 32, "tol": 1e-10, "field_scale": 0.5},
          ("functional", "max_abs_gap", "max_rel_gap", "tolerance", "pass"),
          fast={"fields": 100}, criterion=2)
def _functionals_dual_path(p, seed):
    """Fourier-sum against grid quadrature, and single-mode closed forms."""
    g = sample_coefficients(seed, 0, p["fields"], p["n_max"]) * p["field_scale"]
    rows = []
    for name, q in (("mass", fn.mass), ("momentum", fn.momentum), ("energy", fn.energy),
                    ("f_N", fn.f_N)):
        a, b = np.asarray(q(g, method="sum")), np.asarray(q(g, method="grid"))
        gap = np.abs(a - b)
        rel = float(np.max(gap / np.maximum(1.0, np.abs(a))))
        rows.append({"functional": name, "max_abs_gap": float(gap.max()), "max_rel_gap": rel,
                     "tolerance": p["tol"], "pass": bool(rel <= p["tol"])})
    # a single mode at n = 1: a = g/sqrt 2
    z = sample_coefficients(seed, p["fields"], p["fields"], 1)
    single = np.zeros_like(z)
    single[:, 2] = z[:, 2]
    A = np.abs(z[:, 2]) ** 2 / 2
    for name, got, want in (
            ("f_N single mode", fn.f_N(single, None, "grid"), 0.375 * np.abs(z[:, 2]) ** 4),
            ("energy single mode", fn.energy(single, "grid"), A - 1.5 * A ** 2 + 0.5 * A ** 3)):
        gap = np.abs(np.asarray(got) - want)
        rel = float(np.max(gap / np.maximum(1.0, np.abs(want))))
        rows.append({"functional": name, "max_abs_gap": float(gap.max()), "max_rel_gap": rel,
                     "tolerance": p["tol"], "pass": bool(rel <= p["tol"])})
    return Outcome(rows, {}, all(r["pass"] for r in rows))


def _check_dyadic_list(p):
    for N in p.get("N_list", []):
        if N < 1 or N & (N - 1):
            raise ValueError("N_list entries must be powers of two")


@register("chaos_decay", "is even in each entry",
          {"N_list": [8, 16, 32, 64], "mc_max_N": 32, "samples": 10**5, "z_tol": 4.0,
           "spread_tol": 1.5},
          ("N", "M", "exact", "mc", "stderr", "z", "N_times_exact"),
          fast={"N_list": [8, 16], "samples": 2 * 10**4}, criterion=3, check=_check_dyadic_list)
def _chaos_decay(p, seed):
    """Exact and MC values of ||S_{4,N} - S_{4,2N}||_2^2 with the N-scaled constant."""
    rows = []
    for N in p["N_list"]:
        ex = cs.chaos_l2_exact(N, 2 * N)
        row = {"N": N, "M": 2 * N, "exact": ex, "mc": None, "stderr": None, "z": None,
               "N_times_exact": N * ex}
        if N <= p["mc_max_N"]:
            r = cs.chaos_l2_mc(N, 2 * N, samples=p["samples"], seed=rng.derive_seed(seed, f"N{N}"))
            row.update({"mc": r.mc_l2_sq.value, "stderr": r.mc_l2_sq.stderr, "z": r.z})
        rows.append(row)
    scaled = np.array([r["N_times_exact"] for r in rows])
    spread = float(scaled.max() / scaled.min())
    z_ok = all(abs(r["z"]) <= p["z_tol"] for r in rows if r["z"] is not None)
    rep = {"sup_N_times_exact": float(scaled.max()), "spread": spread, "mc_ok": z_ok}
    return Outcome(rows, rep, bool(spread <= p["spread_tol"] and z_ok))


@register("tail_bounds", "Given dyadic",
          {"cases": [[8, 40.0], [16, 60.0]], "samples": 10**6, "hyper_N": 8, "hyper_p": 4,
           "hyper_samples": 10**5, "slack": 3.0},
          ("case", "N", "lambda_or_p", "estimate", "wilson_low", "wilson_high", "bound",
           "exact", "pass"),
          fast={"samples": 2 * 10**5, "hyper_samples": 2 * 10**4}, criterion=4)
def _tail_bounds(p, seed):
    """Block Gaussian tails against e^{-lam/4}; hypercontractive ratio of S_4."""
    rows = []
    for N, lam in p["cases"]:
        t = cs.gaussian_block_tail(int(N), float(lam), p["samples"],
                                   rng.derive_seed(seed, f"tail/{N}/{lam}"))
        rows.append({"case": "block_tail", "N": int(N), "lambda_or_p": float(lam),
                     "estimate": t.empirical_prob, "wilson_low": t.wilson_interval[0],
                     "wilson_high": t.wilson_interval[1], "bound": t.bound, "exact": t.exact,
                     "pass": bool(t.applicable and not t.violation)})
    h = cs.hypercontractivity_check(p["hyper_N"], p["hyper_p"], p["hyper_samples"],
                                    rng.derive_seed(seed, "hyper"), p["slack"])
    rows.append({"case": "hypercontractivity", "N": h["N"], "lambda_or_p": h["p"],
                 "estimate": h["ratio"], "wilson_low": h["ratio"] - p["slack"] * h["stderr"],
                 "wilson_high": h["ratio"] + p["slack"] * h["stderr"], "bound": h["bound"],
                 "exact": None, "pass": h["ok"]})
    return Outcome(rows, {}, all(r["pass"] for r in rows))


@register("density_machinery", "relating to the mass",
          {"m": 1.0, "eps": 0.05, "samples": 10**6, "N_list": [2, 4, 8, 16],
           "ratio_low": 3.0, "ratio_high": 5.5, "total_tol": 1e-6, "mean_tol": 1e-4, "z_tol": 3.0},
          ("check", "value", "reference", "stderr", "pass"),
          fast={"samples": 2 * 10**5}, criterion=5)
def _density_machinery(p, seed):
    """Inverted p_0 normalisation and mean, thin-shell p_0(m), ||P_N - p_0|| decay."""
    curve = md.p0_curve()
    rows = [{"check": "total mass", "value": curve.total_mass, "reference": 1.0, "stderr": None,
             "pass": bool(abs(curve.total_mass - 1) <= p["total_tol"])},
            {"check": "mean", "value": curve.mean, "reference": md.PI_COTH_PI, "stderr": None,
             "pass": bool(abs(curve.mean - md.PI_COTH_PI) <= p["mean_tol"])}]
    th = fm.thin_shell_density(p["m"], p["eps"], p["samples"], rng.derive_seed(seed, "thin"))
    rows.append({"check": f"thin-shell p_0({p['m']})", "value": th["estimate"]["value"],
                 "reference": th["curve_shell_average"], "stderr": th["estimate"]["stderr"],
                 "pass": bool(abs(th["z"]) <= p["z_tol"])})
    dec = md.density_difference_decay(tuple(p["N_list"]))
    for r in dec:
        ratio = r.get("ratio")
        rows.append({"check": f"sup|P_{r['N']} - p_0|", "value": r["sup"],
                     "reference": ratio, "stderr": None,
                     "pass": bool(ratio is None or p["ratio_low"] <= ratio <= p["ratio_high"])})
    return Outcome(rows, {"thin_shell": th, "decay": dec, "p0_full_at_m": float(md.p0_at(p["m"]))},
                   all(r["pass"] for r in rows))


def _check_cov_cases(p):
    for m, k, s in p["cases"]:
        if not m > 0 or k < 0 or not 1 < s <= 2:
            raise ValueError("cases need m > 0, k >= 0, s in (1, 2]")


@register("divergence_by_scaling", "an integrable, measurable function",
          {"cases": [[1.0, 0, 1.2], [1.0, 2, 1.2], [1.0, 4, 1.05]], "samples": 10**6,
           "z_tol": 3.0, "disk_resolution": 64, "disk_tol": 1e-6},
          ("case", "observable", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "z", "pass"),
          fast={"samples": 2 * 10**5}, criterion=6, check=_check_cov_cases)
def _divergence_by_scaling(p, seed):
    """Finite-s change of variables on the regression suite; the disk demo."""
    rows, reps = [], []
    suite = fm.regression_suite()
    for m, k, s in p["cases"]:
        r = fm.change_of_variables_check(suite, float(m), int(k), float(s), p["samples"],
                                         rng.derive_seed(seed, f"cov/{m}/{k}/{s}"), tol=p["z_tol"])
        reps.append(r)
        for x in r["rows"]:
            rows.append({"case": f"m={m} k={k} s={s}", "observable": x["observable"],
                         "lhs": x["lhs"]["value"], "lhs_stderr": x["lhs"]["stderr"],
                         "rhs": x["rhs"]["value"], "rhs_stderr": x["rhs"]["stderr"],
                         "z": x["z"], "pass": x["pass"]})
    tests = {"one": lambda x, y: np.ones_like(x), "x^2": lambda x, y: x * x,
             "x^2+3y^4": lambda x, y: x * x + 3 * y ** 4,
             "exp(x)cos(2y)+xy^3": lambda x, y: np.exp(x) * np.cos(2 * y) + x * y ** 3}
    for name, f in tests.items():
        d = fm.disk_scaling_demo(f, p["disk_resolution"])
        gap = max(d["max_route_gap"], d["one_variable_gap"], d["half_sum_gap"])
        rows.append({"case": "disk", "observable": name, "lhs": d["scaling"], "lhs_stderr": 0.0,
                     "rhs": d["circle"], "rhs_stderr": 0.0, "z": gap,
                     "pass": bool(gap <= p["disk_tol"])})
        reps.append({"disk": name, **d})
    return Outcome(rows, {"checks": reps}, all(r["pass"] for r in rows))


@register("fixed_mass_identities",
          "c_{k,m}dν^k_m = (|g_k|² + |g_{−k}|²)dμ_m; non-negative μ-measurable function",
          {"m": 1.0, "rn_k": [0, 2], "K_max": 64, "shell_k": [0, 2, 8], "samples": 10**6,
           "z_tol": 3.0, "nu_method": "radial"},
          ("check", "k", "observable", "estimate", "reference", "stderr", "allowance", "pass"),
          fast={"samples": 10**5, "rn_k": [2], "K_max": 16, "shell_k": [2]}, criterion=7)
def _fixed_mass_identities(p, seed):
    """Radon-Nikodym relation, decomposition of mu_m, shell-limit quadratures."""
    m, tol = p["m"], p["z_tol"]
    suite = fm.regression_suite() + [fm.observable_by_name("mass4")]
    rows, reps = [], {}
    for k in p["rn_k"]:
        r = fm.radon_nikodym_check(suite, m, int(k), p["samples"], rng.derive_seed(seed, f"rn/{k}"),
                                   nu_method=p["nu_method"], tol=tol)
        reps[f"radon_nikodym_k{k}"] = r
        for x in r["rows"]:
            se = float(np.hypot(x["thin_shell"]["stderr"], x["nu"]["stderr"]))
            rows.append({"check": "radon_nikodym", "k": k, "observable": x["observable"],
                         "estimate": x["thin_shell"]["value"], "reference": x["nu"]["value"],
                         "stderr": se, "allowance": tol * se, "pass": x["pass"]})
    d = fm.decomposition_check(fm.regression_suite(), m, p["K_max"], p["samples"],
                               rng.derive_seed(seed, "decomposition"), tol=tol)
    reps["decomposition"] = d
    for x in d["rows"]:
        rows.append({"check": "decomposition", "k": p["K_max"], "observable": x["observable"],
                     "estimate": x["lhs"], "reference": x["rhs"], "stderr": x["stderr"],
                     "allowance": tol * x["stderr"] + x["tail_budget"], "pass": x["pass"]})
    for k in p["shell_k"]:
        r = fm.scaling_shell_acceptance(m, int(k), p["samples"], rng.derive_seed(seed, f"shell/{k}"),
                                        tol=tol)
        reps[f"shell_k{k}"] = r
        for x in r["rows"]:
            se = x["estimate"]["stderr"]
            rows.append({"check": f"shell_limit s={x['s']}", "k": k, "observable": "one",
                         "estimate": x["estimate"]["value"], "reference": r["shell_limit"],
                         "stderr": se, "allowance": tol * se,
                         "pass": bool(x["pass"] and r["nesting_ok"])})
    return Outcome(rows, reps, all(r["pass"] for r in rows))


@register("covariance_positivity", "non-negative covariance over any set",
          {"m": 1.0, "k_list": [1, 2, 4], "j_list": [1, 2, 3, 4], "p": 1.0, "N": 16,
           "samples": 10**6, "tol": 4.0, "aux_samples": 4 * 10**6, "aux_rel_tol": 1e-2},
          ("k", "j", "cov", "stderr", "z", "members", "pass"),
          fast={"samples": 10**5, "k_list": [2], "aux_samples": 10**6, "aux_rel_tol": 3e-2},
          criterion=8)
def _covariance_positivity(p, seed):
    """Cov(e^{p G_k^j}, r_k^2) >= -tol stderr; Gamma(2,1) auxiliary moment."""
    rows = []
    for k in p["k_list"]:
        r = fm.covariance_positivity(p["m"], int(k), list(p["j_list"]), p["p"], p["samples"],
                                     rng.derive_seed(seed, f"cov/{k}"), N=p["N"], tol=p["tol"])
        for x in r["rows"]:
            rows.append({"k": k, "j": x["j"], "cov": x["cov"], "stderr": x["stderr"],
                         "z": x["z"], "members": r["members"], "pass": x["pass"]})
    aux = fm.gamma_covariance_check(p["aux_samples"], rng.derive_seed(seed, "gamma"))
    rows.append({"k": None, "j": "aux Cov(r^2, r^4)", "cov": aux["cov"], "stderr": aux["stderr"],
                 "z": (aux["cov"] - 12.0) / aux["stderr"], "members": p["aux_samples"],
                 "pass": bool(aux["rel_error"] <= p["aux_rel_tol"])})
    return Outcome(rows, {"aux": aux}, all(r["pass"] for r in rows))


@register("exp_moments", "some finite constant depending on m, p",
          {"m": 0.5, "p": 1.0, "N_list": [16, 32, 64], "eps_list": [0.1, 0.05],
           "samples": 10**6, "min_ess": 1000.0, "z_tol": 3.0, "require_stable": True},
          ("N", "eps", "value", "stderr", "psi_value", "psi_stderr", "ess", "jensen_floor",
           "z_vs_previous_N", "pass"),
          fast={"samples": 5 * 10**4, "N_list": [16, 32], "require_stable": False}, criterion=9)
def _exp_moments(p, seed):
    """E_{mu_m^eps} e^{p f_N} across N: finiteness, ESS, Jensen floor, stability."""
    rows, reps = [], []
    prev = {}
    stable = True
    for N in p["N_list"]:
        r = fm.exp_moment_fixed_mass(p["m"], p["p"], int(N), p["samples"],
                                     rng.derive_seed(seed, f"exp/{N}"), tuple(p["eps_list"]))
        reps.append(r)
        for x in r["rows"]:
            z = None
            if x["eps"] in prev:
                v0, s0 = prev[x["eps"]]
                z = (x["value"] - v0) / float(np.hypot(x["stderr"], s0))
                stable &= abs(z) <= p["z_tol"]
            prev[x["eps"]] = (x["value"], x["stderr"])
            ok = bool(x["finite"] and x["ess"] >= p["min_ess"] and x["jensen_ok"])
            rows.append({"N": N, "eps": x["eps"], "value": x["value"], "stderr": x["stderr"],
                         "psi_value": x["psi_value"], "psi_stderr": x["psi_stderr"],
                         "ess": x["ess"], "jensen_floor": x["jensen_floor"],
                         "z_vs_previous_N": z, "pass": ok})
    per_row = all(r["pass"] for r in rows)
    note = "" if stable else "values move with N by more than the combined error"
    return Outcome(rows, {"runs": reps, "stable_in_N": bool(stable), "per_row_ok": per_row},
                   bool(per_row and (stable or not p["require_stable"])), note)


@register("flow_invariance", "density of our measure",
          {"order_N": 8, "order_T": 0.5, "order_low": 3.7, "order_high": 4.3,
           "drift_N": 32, "drift_T": 1.0, "drift_tol": 1e-8,
           "liouville_N": 4, "liouville_T": 1.0, "liouville_tol": 1e-3,
           "m": 1.0, "N": 16, "T": 1.0, "samples": 100000, "evolve": 1000, "seeds": 3,
           "z_tol": 5.0, "energy_drift_tol": 1e-6, "field_scale": 0.5},
          ("check", "seed", "observable", "value", "reference", "pass"),
          fast={"samples": 30000, "evolve": 100, "seeds": 1, "drift_N": 16, "order_N": 4},
          criterion=10)
def _flow_invariance(p, seed):
    """Integrator order, mass drift, Liouville, Gibbs-weighted invariance at N = 16."""
    rows = []
    u = sample_coefficients(rng.derive_seed(seed, "order"), 0, 1, p["order_N"])[0] * p["field_scale"]
    od = fl.observed_order(u, fl.FlowConfig(p["order_N"], T=p["order_T"],
                                            dt=0.1 / p["order_N"] ** 2))
    order = od["orders"][-1]
    rows.append({"check": "order", "seed": seed, "observable": "terminal error",
                 "value": order, "reference": [p["order_low"], p["order_high"]],
                 "pass": bool(p["order_low"] <= order <= p["order_high"])})
    u = sample_coefficients(rng.derive_seed(seed, "drift"), 0, 4, p["drift_N"]) * p["field_scale"]
    tr = fl.evolve(u, fl.FlowConfig(p["drift_N"], T=p["drift_T"]))
    rows.append({"check": "mass drift", "seed": seed, "observable": "mass",
                 "value": tr.drift["mass"], "reference": p["drift_tol"],
                 "pass": bool(tr.drift["mass"] < p["drift_tol"])})
    for N in range(1, p["liouville_N"] + 1):
        u = sample_coefficients(rng.derive_seed(seed, f"liouville/{N}"), 0, 1, N)[0] * p["field_scale"]
        ld = fl.liouville_check(u, fl.FlowConfig(N, T=p["liouville_T"]))
        rows.append({"check": "liouville", "seed": seed, "observable": f"|log det J| N={N}",
                     "value": ld, "reference": p["liouville_tol"],
                     "pass": bool(ld < p["liouville_tol"])})
    conservation = all(r["pass"] for r in rows)
    reports, zs, energy = [], [], []
    for i in range(p["seeds"]):
        s = rng.derive_seed(seed, f"invariance/{i}")
        r = fl.invariance_harness(p["m"], p["N"], p["T"], p["samples"], s, evolve=p["evolve"])
        reports.append(r.as_dict())
        energy.append(r.drift["energy"])
        for name, z in zip(r.observables, r.z):
            zs.append(z)
            rows.append({"check": "invariance z", "seed": s, "observable": name, "value": z,
                         "reference": p["z_tol"], "pass": bool(abs(z) <= p["z_tol"])})
    max_energy = float(max(energy))
    if max_energy < p["energy_drift_tol"]:
        passed = conservation and all(abs(z) <= p["z_tol"] for z in zs)
        note = ""
    else:
        passed = conservation
        note = (f"energy drift {max_energy:.2e} per unit time exceeds {p['energy_drift_tol']:g}: "
                "the truncated flow does not conserve the energy, so invariance of the "
                "truncated Gibbs weight is not expected; verdict rests on conservation and Liouville")
    return Outcome(rows, {"order": od, "invariance": reports, "max_energy_drift": max_energy,
                          "flagged": bool(max_energy >= p["energy_drift_tol"])}, passed, note)


# -- further experiments (not acceptance criteria) -------------------------------------------

@register("nu_k_methods", "depends on finitely many frequencies",
          {"m": 1.0, "k": 3, "samples": 10**6, "z_tol": 3.0},
          ("observable", "interior", "interior_stderr", "extrapolation", "extrapolation_stderr",
           "radial", "radial_stderr", "z", "pass"),
          fast={"samples": 10**5})
def _nu_k_methods(p, seed):
    """E_{nu_m^k}[F] by interior formula, s-extrapolation and the radial form."""
    obs = fm.regression_suite() + [fm.abs_gk_sq(p["k"])] if p["k"] <= 8 else fm.regression_suite()
    r = fm.nu_k_expectation(obs, p["m"], p["k"], "all", p["samples"], seed)
    rows = []
    for name, v in r["observables"].items():
        z = v.get("z_interior_vs_extrapolation", 0.0)
        rows.append({"observable": name,
                     "interior": v["interior"]["value"], "interior_stderr": v["interior"]["stderr"],
                     "extrapolation": v["extrapolation"]["value"],
                     "extrapolation_stderr": v["extrapolation"]["stderr"],
                     "radial": v["radial"]["value"], "radial_stderr": v["radial"]["stderr"],
                     "z": z, "pass": bool(abs(z) <= p["z_tol"])})
    den = r["interior_denominator"]
    zden = (den["value"] - r["shell_limit"]) / den["stderr"]
    rows.append({"observable": "denominator", "interior": den["value"],
                 "interior_stderr": den["stderr"], "extrapolation": None,
                 "extrapolation_stderr": None, "radial": r["radial_denominator"]["value"],
                 "radial_stderr": r["radial_denominator"]["stderr"], "z": zden,
                 "pass": bool(abs(zden) <= p["z_tol"])})
    return Outcome(rows, r, all(x["pass"] for x in rows))


@register("marginal_density", "exists and equals",
          {"m": 1.0, "N_marg": 2, "eps": 0.02, "mixture_eps": 0.2, "samples": 10**6,
           "z_tol": 5.0, "gap_tol": 1e-8},
          ("eps", "k", "max_z", "mixture_average_gap", "fixed_mass_total", "pass"),
          fast={"samples": 2 * 10**5, "N_marg": 1})
def _marginal_density(p, seed):
    """Thin-shell histograms of r_k^2 against the quadrature marginals."""
    rows, reps = [], []
    for eps in (p["eps"], p["mixture_eps"]):
        r = fm.marginal_density_check(p["m"], p["N_marg"], p["samples"],
                                      rng.derive_seed(seed, f"marg/{eps}"), eps=eps, tol=p["z_tol"])
        reps.append(r)
        for x in r["rows"]:
            rows.append({"eps": eps, "k": x["k"], "max_z": x["max_z"],
                         "mixture_average_gap": x["mixture_average_gap"],
                         "fixed_mass_total": x["fixed_mass_total"],
                         "pass": bool(x["pass"] and x["mixture_average_gap"] <= p["gap_tol"]
                                      and r["block_mass_below"])})
    return Outcome(rows, {"runs": reps}, all(x["pass"] for x in rows))


@register("chaos_l2_fixed_mass", "decomposition of μ_m",
          {"m": 1.0, "N_list": [8, 16, 32], "eps": 0.05, "samples": 10**6, "z_tol": 3.0},
          ("N", "M", "value", "stderr", "N_times_value", "N_times_stderr"),
          fast={"samples": 3 * 10**5, "N_list": [8, 16, 32]}, check=_check_dyadic_list)
def _chaos_l2_fixed_mass(p, seed):
    """E_{mu_m^eps}|f_N - f_2N|^2 and the boundedness of N times it."""
    rows = []
    for N in p["N_list"]:
        r = fm.chaos_l2_fixed_mass(p["m"], N, 2 * N, p["samples"], rng.derive_seed(seed, f"N{N}"),
                                   p["eps"])
        rows.append({"N": N, "M": 2 * N, "value": r["value"], "stderr": r["stderr"],
                     "N_times_value": N * r["value"], "N_times_stderr": N * r["stderr"]})
    nv = np.array([r["N_times_value"] for r in rows])
    ns = np.array([r["N_times_stderr"] for r in rows])
    finite = bool(np.all(np.isfinite(nv)) and np.all(nv > 0))
    # bounded: the increments of N v do not grow along the dyadic grid
    inc = np.diff(nv)
    inc_se = np.hypot(ns[1:], ns[:-1])
    bounded = all(inc[i + 1] <= max(inc[i], 0.0) + p["z_tol"] * np.hypot(inc_se[i + 1], inc_se[i])
                  for i in range(inc.size - 1))
    non_increasing = all(inc[i] <= p["z_tol"] * inc_se[i] for i in range(inc.size))
    rep = {"bounded": bool(bounded), "non_increasing": bool(non_increasing),
           "increments": inc.tolist()}
    return Outcome(rows, rep, finite and bool(bounded))


@register("shell_limits", "the set of functions",
          {"m": 1.0, "k_list": [0, 1, 2, 4, 8, 16, 32, 64], "n_max": 256},
          ("k", "limit_truncated", "limit_with_tail", "lower_bound", "scaled_by_bracket"),
          fast={"k_list": [0, 1, 2, 8]})
def _shell_limits(p, seed):
    """Quadrature table of C(m, k) with its lower bounds."""
    rows = []
    for k in p["k_list"]:
        info = md.shell_limit_k0(p["m"]) if k == 0 else md.shell_limit_k(p["m"], k)
        trunc = md.shell_limit(p["m"], k, p["n_max"], tail=False)
        rows.append({"k": k, "limit_truncated": trunc, "limit_with_tail": info["value"],
                     "lower_bound": info["lower_bound"], "scaled_by_bracket": trunc * (1 + k * k)})
    ok = all(r["lower_bound"] <= r["limit_with_tail"] for r in rows)
    return Outcome(rows, {}, ok)


@register("disk_demo", "emulate the divergence theorem through scaling",
          {"resolution": 64, "tol": 1e-6},
          ("f", "scaling", "divergence", "circle", "x_scaling", "x_circle", "y_scaling",
           "y_circle", "pass"))
def _disk_demo(p, seed):
    """Three routes to the circle average on the unit disk."""
    rows = []
    for name, f in (("1", lambda x, y: np.ones_like(x)), ("x^2", lambda x, y: x * x),
                    ("x^2+3y^4", lambda x, y: x * x + 3 * y ** 4)):
        d = fm.disk_scaling_demo(f, p["resolution"])
        gap = max(d["max_route_gap"], d["one_variable_gap"], d["half_sum_gap"])
        rows.append({"f": name, **{k: d[k] for k in ("scaling", "divergence", "circle", "x_scaling",
                                                     "x_circle", "y_scaling", "y_circle")},
                     "pass": bool(gap <= p["tol"])})
    return Outcome(rows, {}, all(r["pass"] for r in rows))


@register("sampler_smoke", "plumbing",
          {"m": 1.0, "eps": 0.05, "k": 2, "s": 1.1, "count": 200, "n_max": 256},
          ("sampler", "accepted", "candidates", "acceptance", "predicted", "verified"))
def _sampler_smoke(p, seed):
    """Draw from both conditional samplers and re-check membership."""
    thin = fm.sample_thin_shell(fm.ShellSpec.thin(p["m"], p["eps"], p["n_max"]), p["count"], seed)
    sc = fm.sample_scaling_shell(fm.ShellSpec.scaling(p["m"], p["k"], p["s"], p["n_max"]),
                                 p["count"], seed)
    pred_thin = fm.predicted_thin_acceptance(p["m"], p["eps"], p["n_max"])
    pred_sc = md.shell_probability(p["m"], p["k"], p["s"], p["n_max"], tail=False)
    rows = [{"sampler": "thin", "accepted": len(thin), "candidates": thin.candidates,
             "acceptance": thin.acceptance, "predicted": pred_thin, "verified": thin.verify()},
            {"sampler": "scaling", "accepted": len(sc), "candidates": sc.candidates,
             "acceptance": sc.acceptance, "predicted": pred_sc, "verified": sc.verify()}]
    return Outcome(rows, {}, all(r["verified"] for r in rows))


def listing() -> list[dict]:
    return [{"id": e.id, "criterion": e.criterion, "anchor": e.anchor, "summary": e.summary,
             "columns": list(e.columns)} for e in REGISTRY.values()]
