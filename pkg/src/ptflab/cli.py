"""``ptf-lab``: batch runner for the analysis and generator experiments.

Every subcommand accepts ``--config FILE.toml``.  Keys are flag names with
dashes replaced by underscores, either at top level or under a table named
after the subcommand.  Explicit flags override the file.  Results are written
only after the whole run succeeds; exit codes are 0 (ok), 2 (invalid
configuration or input) and 3 (runtime failure, including non-finite output).
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, _parallel
from .analysis import anticoncentration as ac
from .analysis import diffuse as dif
from .analysis import invariance as inv
from .analysis import regularity as reg
from .analysis import sensitivity as sens
from .analysis.reports import Report, reports_to_csv, reports_to_json
from .hermite import derivative_norm_check, expand
from .kwise import KWiseFamily, Seed, exponent_vectors, parse_seed, reference_moment
from .poly import (
    MultilinearPoly,
    Poly,
    as_poly,
    from_json,
    influence,
    influence_by_restriction,
    is_tau_regular,
    multilinearize,
    random_poly,
)
from .prg import (
    BernoulliPrgSpec,
    GaussianPrgSpec,
    bernoulli_prg_moments,
    fooling_gaps,
    gaussian_prg_moments,
    independent_marginal_moments,
    max_monomial_deviation,
    prg_batch,
)
from .tensor import decompose_quadratic, low_rank_approx, svd_oracle_residual
from .walsh import fwht, popcounts

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
POLY_TAG = 7


class ConfigError(ValueError):
    """Invalid configuration or unreadable input."""


# ---------------------------------------------------------------------------
# value parsing


def _floats(v) -> list[float]:
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, str):
        return [float(x) for x in v.split(",") if x.strip()]
    return [float(x) for x in v]


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _seed(cfg) -> Seed:
    return Seed(parse_seed(cfg["seed"]), 0)


def _load_json_source(text: str):
    t = text.strip()
    if t.startswith("{") or t.startswith("["):
        return json.loads(t)
    try:
        return json.loads(Path(t).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read polynomial file {t!r}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{t!r} is not valid JSON: {e}") from e


def load_poly(cfg: dict, key: str = "poly", index: int = 0):
    """Resolve a polynomial source: inline JSON, a file, ``random`` or ``gl-extremal``."""
    src = str(cfg.get(key) or "random")
    n, d = int(cfg["n"]), int(cfg["d"])
    if src == "random":
        _require(n >= 1 and d >= 0, "random polynomials need n >= 1 and d >= 0")
        rng = _parallel.block_rng(parse_seed(cfg["seed"]), POLY_TAG, index)
        return random_poly(n, d, rng, cfg.get("family", "dense"))
    if src == "gl-extremal":
        _require(n >= 1 and d >= 1, "gl-extremal needs n >= 1 and d >= 1")
        return sens.gl_extremal(n, d)
    try:
        data = _load_json_source(src)
        if isinstance(data, list):
            if index >= len(data):
                raise ConfigError(f"{key} lists {len(data)} polynomials, asked for #{index}")
            data = data[index]
        return from_json(data)
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise ConfigError(f"malformed polynomial JSON: {e}") from e


def load_poly_list(cfg: dict, key: str) -> list:
    data = _load_json_source(str(cfg[key]))
    if not isinstance(data, list):
        data = [data]
    try:
        return [from_json(x) for x in data]
    except (KeyError, TypeError) as e:
        raise ConfigError(f"malformed polynomial JSON: {e}") from e


def poly_hash(p) -> str:
    """Short content hash of a polynomial's canonical JSON."""
    text = json.dumps(p.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _mode(cfg) -> str:
    return "exact" if cfg.get("exact") else "mc"


# ---------------------------------------------------------------------------
# subcommand handlers; each returns a list of reports


def cmd_hermite(cfg) -> list[Report]:
    p = as_poly(load_poly(cfg))
    h = expand(p)
    out = [Report("hermite", c, params={"index": ";".join(map(str, a)) or "0", "degree": sum(a)})
           for a, c in h.coeffs.items()]
    for k, w in sorted(h.level_weights().items()):
        out.append(Report("hermite_level", w, params={"index": "", "degree": k}))
    for k in range(1, min(int(cfg["k"]), p.degree) + 1):
        lhs, rhs = derivative_norm_check(p, k)
        out.append(Report("derivative_norm", lhs, params={"index": "", "degree": k, "rhs": rhs}))
    return out


def cmd_influence(cfg) -> list[Report]:
    p = load_poly(cfg)
    out = []
    for i in range(p.n):
        params = {"i": i}
        if isinstance(p, MultilinearPoly) and p.n <= 20:
            params["by_restriction"] = influence_by_restriction(p, i)
        out.append(Report("influence", influence(p, i), params=params))
    return out


def cmd_regular(cfg) -> list[Report]:
    p = multilinearize(load_poly(cfg))
    tau = float(cfg["tau"])
    _require(tau > 0, "tau must be positive")
    _require(p.variance > 0, "tau-regularity is undefined for a zero-variance polynomial")
    ok, witness = is_tau_regular(p, tau)
    ratio = float(np.max(p.influences()) / p.variance) if p.n else 0.0
    return [Report("regular", ratio, params={"tau": tau, "regular": ok,
                                             "witness": "" if witness is None else witness})]


def cmd_prg_gauss(cfg) -> list[Report]:
    n, k, N, d = int(cfg["n"]), int(cfg["k"]), int(cfg["N"]), int(cfg["d"])
    _require(n >= 1 and N >= 1 and k >= 2, "need n >= 1, N >= 1, k >= 2")
    cap = int(cfg["degree_cap"])
    m = min(n, int(cfg["coords"]))
    exps = [e + (0,) * (n - m) for e in exponent_vectors(m, cap) if sum(e) > 0]
    out = []
    if cfg.get("enumerate"):
        prime = int(cfg["prime"]) if cfg.get("prime") else None
        _require(prime is not None, "--enumerate needs a small --prime for the inner family")
        fam = KWiseFamily(n, k, "gaussian", prime=prime, refine_bits=int(cfg["refine_bits"]))
        spec = GaussianPrgSpec(n, d, N, k, fam)
        prg = gaussian_prg_moments(spec, exps)
        ref = independent_marginal_moments(spec, exps)
        for e, a, b in zip(exps, prg, ref):
            out.append(Report("prg-gauss", float(a - b), params={
                "exponent": ";".join(map(str, e[:m])), "prg_moment": float(a), "independent_moment": float(b)}))
        return out
    spec = GaussianPrgSpec(n, d, N, k)
    samples = int(cfg["samples"])
    seed = _seed(cfg)
    X = _batched(spec, samples, seed, cfg)
    for e in exps:
        v = np.prod(X[:, :m] ** np.array(e[:m]), axis=1)
        ref = math.prod(reference_moment("gaussian", x) for x in e[:m])
        out.append(Report("prg-gauss", float(v.mean() - ref), float(v.std(ddof=1) / math.sqrt(samples)),
                          samples, seed.master, params={"exponent": ";".join(map(str, e[:m])),
                                                        "prg_moment": float(v.mean()), "independent_moment": ref}))
    return out


def _batched(spec, samples: int, seed: Seed, cfg) -> np.ndarray:
    sizes = _parallel.block_sizes(samples, 1 << 12)
    parts = _parallel.run_blocks(lambda b: prg_batch(spec, _parallel.block_rng(seed.master, seed.stream, 1, b),
                                                     sizes[b]), len(sizes), cfg.get("threads"))
    return np.concatenate(parts)


def cmd_prg_bern(cfg) -> list[Report]:
    n, a, k, d = int(cfg["n"]), int(cfg["a"]), int(cfg["k"]), int(cfg["d"])
    _require(1 <= n <= 24, "prg-bern needs 1 <= n <= 24")
    _require(k >= 4 * d, f"k={k} must be at least 4d={4 * d}")
    spec = BernoulliPrgSpec(n, d, a, k)
    cap = int(cfg["degree_cap"])
    params = {"n": n, "a": a, "k": k, "degree_cap": cap, "seed_bits": spec.seed_bits}
    if cfg.get("enumerate"):
        mom = bernoulli_prg_moments(spec)
        return [Report("prg-bern", max_monomial_deviation(mom, cap), params=params)]
    samples = int(cfg["samples"])
    seed = _seed(cfg)
    X = _batched(spec, samples, seed, cfg)
    v = ((X < 0).astype(np.int64) << np.arange(n)).sum(axis=1)
    mom = fwht(np.bincount(v, minlength=1 << n).astype(np.float64)) / samples
    sel = (popcounts(n) <= cap) & (np.arange(1 << n) > 0)
    dev = float(np.max(np.abs(mom[sel]))) if sel.any() else 0.0
    return [Report("prg-bern", dev, 1.0 / math.sqrt(samples), samples, seed.master, params=params)]


def cmd_fool(cfg) -> list[Report]:
    n, d, k = int(cfg["n"]), int(cfg["d"]), int(cfg["k"])
    kind = cfg["prg"]
    _require(kind in ("gauss", "bern"), "--prg must be gauss or bern")
    if kind == "gauss":
        spec = GaussianPrgSpec(n, d, int(cfg["N"]), k)
    else:
        _require(n <= 24, "the hypercube reference needs n <= 24")
        spec = BernoulliPrgSpec(n, d, int(cfg["a"]), k)
    count = int(cfg["count"])
    _require(count >= 1, "--count must be positive")
    polys = [load_poly(cfg, index=i) for i in range(count)]
    mode = "enumerate" if cfg.get("enumerate") else "monte_carlo"
    seed = _seed(cfg)
    res = fooling_gaps(spec, polys, mode, int(cfg["samples"]), seed, threads=cfg.get("threads"))
    return [Report("fool", r.gap, r.stderr, "exact" if mode == "enumerate" else r.samples, seed.master,
                   params={"prg": kind, "instance": i, "poly_hash": poly_hash(polys[i]), "prg_mean": r.prg_mean, "reference_mean": r.reference_mean})
            for i, r in enumerate(res)]


def _deltas(cfg) -> list[float]:
    ds = _floats(cfg["delta"])
    for x in ds:
        _require(0.0 <= x <= 1.0, f"delta must lie in [0, 1], got {x}")
    return ds


def cmd_ns(cfg) -> list[Report]:
    p = load_poly(cfg)
    mode = _mode(cfg)
    _require(mode != "exact" or p.n <= sens.MAX_NS_EXACT, f"exact ns needs n <= {sens.MAX_NS_EXACT}")
    return [sens.noise_sensitivity(p, x, mode, int(cfg["samples"]), _seed(cfg), cfg.get("threads"))
            for x in _deltas(cfg)]


def cmd_gns(cfg) -> list[Report]:
    p = load_poly(cfg)
    return [sens.gaussian_noise_sensitivity(p, x, int(cfg["samples"]), _seed(cfg), cfg.get("threads"))
            for x in _deltas(cfg)]


def cmd_as(cfg) -> list[Report]:
    p = load_poly(cfg)
    mode = _mode(cfg)
    _require(mode != "exact" or p.n <= sens.MAX_AS_EXACT, f"exact as needs n <= {sens.MAX_AS_EXACT}")
    r = sens.average_sensitivity(p, mode, int(cfg["samples"]), _seed(cfg), cfg.get("threads"))
    if str(cfg.get("poly")) == "gl-extremal":
        n, d = int(cfg["n"]), int(cfg["d"])
        f = sens.gl_formula(n, d)
        r.params.update(n=n, d=d, formula=float(f))
        if mode == "exact":
            r.params["equal"] = sens.average_sensitivity_exact(p) == f
    return [r]


def cmd_gas(cfg) -> list[Report]:
    p = load_poly(cfg)
    methods = ["direct", "coupling"] if cfg["method"] == "both" else [cfg["method"]]
    for m in methods:
        _require(m in ("direct", "coupling"), f"unknown method {m!r}")
    return [sens.gaussian_average_sensitivity(p, int(cfg["samples"]), _seed(cfg), m, cfg.get("threads"))
            for m in methods]


def _eps(cfg) -> list[float]:
    es = _floats(cfg["eps"])
    for e in es:
        _require(0.0 <= e < 1.0, f"eps must lie in [0, 1), got {e}")
    return es


def _rows(kind, rows, samples, seed, extra=None) -> list[Report]:
    return [Report(kind, r.frequency, r.stderr, samples, seed.master,
                   params={"eps": r.eps, "bound": r.bound, "holds": r.holds, **(extra or {})}) for r in rows]


def cmd_cw(cfg) -> list[Report]:
    p = load_poly(cfg)
    seed, samples = _seed(cfg), int(cfg["samples"])
    return _rows("cw", ac.anticoncentration_check(p, _eps(cfg), samples, seed, cfg.get("threads")), samples, seed)


def cmd_tails(cfg) -> list[Report]:
    p = load_poly(cfg)
    seed, samples = _seed(cfg), int(cfg["samples"])
    t = ac.tail_and_weak_anticoncentration(p, samples, seed, threads=cfg.get("threads"))
    out = [Report("tail", f, se, samples, seed.master, params={"level": N}) for N, (f, se) in t.tails.items()]
    out.append(Report("weak", t.weak_lower, t.weak_stderr, samples, seed.master,
                      params={"level": 0.5, "bound": t.weak_bound, "holds": t.weak_holds}))
    for h in ac.hypercontractivity_check(p, int(cfg["t"])):
        out.append(Report("hypercontractivity", h.lhs, params={"measure": h.measure, "t": h.t, "bound": h.rhs,
                                                               "holds": h.holds}))
    return out


def cmd_strong_ac(cfg) -> list[Report]:
    polys = [load_poly(cfg)]
    if cfg.get("poly2"):
        polys.append(load_poly(cfg, "poly2"))
    seed, samples = _seed(cfg), int(cfg["samples"])
    rows = ac.strong_anticoncentration_check(polys, [e for e in _eps(cfg) if e > 0], samples, seed,
                                             threads=cfg.get("threads"))
    return _rows("strong-ac", rows, samples, seed, {"k": len(polys)})


def _tuple_q(cfg) -> list:
    if cfg.get("q"):
        return load_poly_list(cfg, "q")
    m = int(cfg["m"])
    _require(1 <= m <= dif.MAX_M, f"m must be in 1..{dif.MAX_M}")
    return [Poly.var(i, m) for i in range(m)]


def cmd_diffuse(cfg) -> list[Report]:
    qs = _tuple_q(cfg)
    _require(1 <= len(qs) <= dif.MAX_M, f"diffuse needs 1..{dif.MAX_M} polynomials")
    seed, samples = _seed(cfg), int(cfg["samples"])
    out = []
    for e in _eps(cfg):
        _require(e > 0, "eps must be positive")
        c = dif.diffuse_certify(qs, e, cfg["method"], samples, seed, threads=cfg.get("threads"))
        out.append(Report("diffuse", c.N_bound, 0.0, samples, seed.master, params={
            "eps": e, "m": c.m, "method": c.method, "worst_box": " ".join(f"{v:.6g}" for v in c.worst_box)}))
    return out


def cmd_chain(cfg) -> list[Report]:
    qs = _tuple_q(cfg)
    h = load_poly_list(cfg, "h")[0] if cfg.get("h") else Poly(len(qs), {(i,): 1.0 for i in range(len(qs))})
    seed, samples = _seed(cfg), int(cfg["samples"])
    out = []
    for e in _eps(cfg):
        r = dif.derivative_chain_check(h, qs, e, samples, seed, threads=cfg.get("threads"))
        out.append(Report("chain", r["frequency"], r["stderr"], samples, seed.master,
                          params={"eps": e, "bound": r["bound"]}))
    return out


def cmd_tree(cfg) -> list[Report]:
    p = multilinearize(load_poly(cfg))
    _require(p.n <= reg.MAX_TREE_VARS, f"tree needs n <= {reg.MAX_TREE_VARS}")
    tau, M, cap = float(cfg["tau"]), int(cfg["M"]), int(cfg["depth_cap"])
    _require(tau > 0 and cap >= 0, "need tau > 0 and depth_cap >= 0")
    t = reg.regularity_tree(p, tau, M, cap)
    params = {"tau": tau, "M": M, "depth_cap": cap, "leaves": len(t.leaves), "depth": t.depth,
              "regular_mass": t.mass(reg.REGULAR), "low_variance_mass": t.mass(reg.LOW_VARIANCE),
              "irregular_mass": t.irregular_mass}
    return [Report("tree", t.good_mass, params=params)]


def cmd_tensor_lowrank(cfg) -> list[Report]:
    n, k, eps = int(cfg["n"]), int(cfg["k"]), float(cfg["noise"])
    _require(n >= 1 and k >= 1 and eps >= 0, "need n >= 1, k >= 1, noise >= 0")
    seed = parse_seed(cfg["seed"])
    out = []
    for i in range(int(cfg["count"])):
        rng = _parallel.block_rng(seed, POLY_TAG, i)
        r = max(k - 1, 0)
        B = rng.standard_normal((n, r)) @ rng.standard_normal((r, n)) + eps * rng.standard_normal((n, n))
        res = low_rank_approx(B, k, max(eps, 1e-300), rng)
        oracle = svd_oracle_residual(B, len(res.factors))
        out.append(Report("tensor-lowrank", res.residual, params={
            "instance": i, "n": n, "k": k, "noise": eps, "rank": len(res.factors), "oracle": oracle,
            "wedge_norm": res.wedge_norm}))
    return out


def cmd_quad_decomp(cfg) -> list[Report]:
    p = as_poly(load_poly(cfg))
    _require(p.degree == 2, "quad-decomp needs a degree-2 polynomial")
    dec = decompose_quadratic(p)
    rec = dec.reconstruct()
    diff = max((abs(rec.coefficient(kk) - p.coefficient(kk)) for kk in set(p.terms) | set(rec.terms)), default=0.0)
    scale = max((abs(c) for c in p.terms.values()), default=1.0)
    return [Report("quad-decomp", diff / scale, params={"factors": len(dec.factors)})]


def cmd_invariance(cfg) -> list[Report]:
    p = load_poly(cfg)
    _require(p.n <= inv.MAX_VARS, f"invariance needs n <= {inv.MAX_VARS}")
    grid = _floats(cfg["t"])
    _require(len(grid) > 0, "empty t grid")
    return [inv.invariance_distance(p, grid, int(cfg["samples"]), _seed(cfg), cfg.get("threads"))]


# ---------------------------------------------------------------------------
# command table

POLY_ARGS = {"poly": ("random", str, "polynomial: inline JSON, JSON file, 'random' or 'gl-extremal'"),
             "n": (6, int, "number of variables"), "d": (2, int, "degree"),
             "family": ("dense", str, "random family: dense, multilinear or homogeneous")}
MC_ARGS = {"samples": (100_000, int, "Monte Carlo sample count")}
EXACT = {"exact": (False, bool, "exact enumeration instead of Monte Carlo")}
EPS = {"eps": ("0.1,0.01", str, "comma-separated eps values")}
Q_ARGS = {"q": (None, str, "JSON list of polynomials (default: the first m coordinates)"),
          "m": (1, int, "tuple size when --q is omitted")}

COMMANDS: dict[str, tuple[str, Callable, dict]] = {
    "hermite": ("Hermite expansion and derivative-norm identity", cmd_hermite, {**POLY_ARGS, "k": (2, int, "max k")}),
    "influence": ("per-variable influences", cmd_influence, POLY_ARGS),
    "regular": ("tau-regularity test", cmd_regular, {**POLY_ARGS, "tau": (0.1, float, "tau")}),
    "prg-gauss": ("Gaussian generator moment check", cmd_prg_gauss, {
        **POLY_ARGS, **MC_ARGS, "N": (16, int, "blocks"), "k": (4, int, "independence"),
        "degree_cap": (4, int, "max total degree"), "coords": (2, int, "coordinates in the moment check"),
        "enumerate": (False, bool, "exact seed enumeration"), "prime": (None, int, "inner prime for --enumerate"),
        "refine_bits": (0, int, "refinement bits for --enumerate")}),
    "prg-bern": ("Bernoulli generator moment check", cmd_prg_bern, {
        "n": (8, int, "output length"), "d": (1, int, "target degree"), "a": (2, int, "buckets"),
        "k": (4, int, "inner independence"), "degree_cap": (8, int, "max monomial degree"),
        "enumerate": (False, bool, "exact seed enumeration"), **MC_ARGS}),
    "fool": ("fooling gaps of a generator", cmd_fool, {
        **POLY_ARGS, **MC_ARGS, "prg": ("bern", str, "gauss or bern"), "N": (16, int, "Gaussian blocks"),
        "a": (2, int, "Bernoulli buckets"), "k": (8, int, "independence"), "count": (1, int, "polynomials"),
        "enumerate": (False, bool, "exact seed enumeration")}),
    "ns": ("noise sensitivity", cmd_ns, {**POLY_ARGS, **MC_ARGS, **EXACT,
                                         "delta": ("0.1", str, "comma-separated delta values")}),
    "gns": ("Gaussian noise sensitivity", cmd_gns, {**POLY_ARGS, **MC_ARGS,
                                                    "delta": ("0.1", str, "comma-separated delta values")}),
    "as": ("average sensitivity", cmd_as, {**POLY_ARGS, **MC_ARGS, **EXACT}),
    "gas": ("Gaussian average sensitivity", cmd_gas, {**POLY_ARGS, **MC_ARGS,
                                                      "method": ("direct", str, "direct, coupling or both")}),
    "cw": ("anticoncentration envelope", cmd_cw, {**POLY_ARGS, **MC_ARGS, **EPS}),
    "tails": ("tails, weak anticoncentration and hypercontractivity", cmd_tails,
              {**POLY_ARGS, **MC_ARGS, "t": (4, int, "moment order")}),
    "strong-ac": ("strong anticoncentration", cmd_strong_ac, {
        **POLY_ARGS, **MC_ARGS, **EPS, "poly2": (None, str, "second polynomial (k = 2)")}),
    "diffuse": ("diffuse-set certificate", cmd_diffuse, {
        **MC_ARGS, **EPS, **Q_ARGS, "method": ("grid", str, "grid or sample")}),
    "chain": ("derivative chain failure frequency", cmd_chain, {
        **MC_ARGS, **EPS, **Q_ARGS, "h": (None, str, "outer polynomial JSON (default: sum of variables)")}),
    "tree": ("regularity decision tree", cmd_tree, {
        **POLY_ARGS, "tau": (0.05, float, "tau"), "M": (2, int, "variance exponent"),
        "depth_cap": (64, int, "depth cap")}),
    "tensor-lowrank": ("low-rank construction vs SVD oracle", cmd_tensor_lowrank, {
        "n": (8, int, "matrix size"), "k": (2, int, "wedge order"), "noise": (1e-3, float, "noise level"),
        "count": (1, int, "instances")}),
    "quad-decomp": ("quadratic decomposition", cmd_quad_decomp, POLY_ARGS),
    "invariance": ("hypercube vs Gaussian CDF distance", cmd_invariance, {
        **POLY_ARGS, **MC_ARGS, "t": ("-2,-1,0,1,2", str, "comma-separated t grid")}),
}
COMMON = {"seed": ("0", str, "master seed (decimal or 0x hex)"), "threads": (None, int, "threads; 0 = all cores"),
          "out": (None, str, "output directory"), "format": ("both", str, "csv, json or both")}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptf-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ptf-lab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (help_, _, args) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="TOML configuration file")
        for key, (default, typ, h) in {**COMMON, **args}.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                sp.add_argument(flag, dest=key, action="store_true", help=h)
            else:
                sp.add_argument(flag, dest=key, type=typ, help=f"{h} (default: {default})")
    return ap


def resolve_config(ns: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then the TOML file, then explicit flags."""
    command = ns.command
    args = {**COMMON, **COMMANDS[command][2]}
    cfg: dict[str, Any] = {k: v[0] for k, v in args.items()}
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    path = getattr(ns, "config", None)
    if path:
        try:
            data = tomllib.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path!r}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"invalid TOML in {path!r}: {e}") from e
        table = {k: v for k, v in data.items() if not isinstance(v, dict)}
        table.update(data.get(command, {}))
        for k, v in table.items():
            key = k.replace("-", "_")
            if key not in args:
                raise ConfigError(f"unknown key {k!r} for {command}")
            cfg[key] = v
    cfg.update(given)
    for key, (_, typ, _) in args.items():
        v = cfg[key]
        if v is None or typ is str:
            continue
        try:
            cfg[key] = typ(v)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{key}: expected {typ.__name__}, got {v!r}") from e
    if cfg.get("threads") is None and os.environ.get(_parallel.THREADS_ENV):
        cfg["threads"] = _parallel.resolve_threads()
    if cfg.get("threads") is not None:
        _require(cfg["threads"] >= 0, "threads must be non-negative")
    if "samples" in cfg:
        _require(cfg["samples"] >= 2, "samples must be at least 2")
    _require(cfg["format"] in ("csv", "json", "both"), "format must be csv, json or both")
    try:
        parse_seed(cfg["seed"])
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return cfg


def _git_hash() -> str | None:
    try:
        r = subprocess.run(["git", "rev-parse", "HEAD"], cwd=Path(__file__).resolve().parent,
                           capture_output=True, text=True, timeout=5)
        return r.stdout.strip() or None if r.returncode == 0 else None
    except (OSError, subprocess.SubprocessError):
        return None


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def run(cfg: dict[str, Any]) -> tuple[list[Report], float]:
    t0 = time.perf_counter()
    reports = COMMANDS[cfg["command"]][1](cfg)
    for r in reports:
        r.params = {k: _jsonable(v) for k, v in r.params.items()}
        r.check_finite()
        for k, v in r.params.items():
            if isinstance(v, float) and math.isnan(v):
                raise FloatingPointError(f"{r.kind}: NaN in {k}")
    return reports, (time.perf_counter() - t0) * 1e3


def write_outputs(cfg: dict[str, Any], reports: list[Report], total_ms: float, started: str):
    """Results carry no timing data; timings live in the manifest only."""
    timings = [r.wall_ms for r in reports]
    for r in reports:
        r.wall_ms = ""
    out = cfg.get("out")
    csv_text = reports_to_csv(reports)
    if not out:
        sys.stdout.write(csv_text)
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    stem = cfg["command"]
    if cfg["format"] in ("csv", "both"):
        (d / f"{stem}.csv").write_text(csv_text, newline="")
    if cfg["format"] in ("json", "both"):
        (d / f"{stem}.json").write_text(reports_to_json(reports) + "\n")
    manifest = {"command": stem, "config": cfg, "version": __version__, "git": _git_hash(),
                "started": started, "timings": {"total_ms": total_ms, "rows_ms": timings},
                "threads": _parallel.resolve_threads(cfg.get("threads"))}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        cfg = resolve_config(ns)
        cfg["command"] = ns.command
    except ConfigError as e:
        print(f"ptf-lab: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        with np.errstate(invalid="ignore"):
            reports, total_ms = run(cfg)
    except ValueError as e:
        print(f"ptf-lab: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except FloatingPointError as e:
        print(f"ptf-lab: aborted, non-finite result: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        print(f"ptf-lab: runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        write_outputs(cfg, reports, total_ms, started)
    except OSError as e:
        print(f"ptf-lab: cannot write output: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
