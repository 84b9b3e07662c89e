"""Experiment configs, runners and report writers."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import importlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import conc, constants, lornorm, ostats, tailcmp
from ..dist import Pareto, QuantileStar, SymPareto, Uniform, Weibull2, parse_law
from .fitting import (
    ConstantFit,
    fit_constant,
    fit_rate_to_curve,
    fit_threshold_multiplier,
    stability_ratio,
)
from .montecarlo import binomial_se, map_chunks, mc_survival, mc_values, wilson_interval

OPERATIONS = ("verify", "tail-compare", "order-stats", "norms", "fit-constants")
THEOREMS = ("linear-weibull", "weibull-sharp", "weibull-robust", "power-lorentz", "power-lipp")


@dataclass
class ExperimentConfig:
    operation: str = "verify"
    theorem: str = "linear-weibull"
    law: str = "weibull2:q=0.5"
    f: str = "normalized-sum"
    n: int = 64
    trials: int = 10000
    t_grid: tuple = ()
    seed: int = 0
    workers: int = 1
    q: float = 0.5
    p: float | None = None
    overrides: dict = field(default_factory=dict)
    # tail-compare
    op: str = "witness"
    t: float | None = None
    s: float | None = None
    x: float | None = None
    R: float | None = None
    T: float = 1.0
    # order-stats
    branch: str = "quadrature"
    # norms
    r: float = 1.0
    vector: tuple = ()
    mode: str = "exact"
    # fit-constants
    cells: str = "all"
    json_out: str | None = None
    csv_out: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        overrides = {}
        for key, raw in data.items():
            key = key.replace("-", "_")
            if key.startswith("const_"):
                overrides[key[len("const_"):]] = float(raw)
                continue
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw)
        cfg = cls(**kwargs)
        cfg.overrides.update(overrides)
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Flat ``key = value`` file; ``#`` comments; keys ``const_<name>`` override constants."""
        text = Path(path).read_text()
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str
        parser.read_string("[experiment]\n" + text)
        return cls.from_mapping(dict(parser["experiment"]))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("json_out")
        d.pop("csv_out")
        d.pop("workers")  # results do not depend on it
        return d


_INT_KEYS = {"n", "trials", "seed", "workers"}
_FLOAT_KEYS = {"q", "p", "t", "s", "x", "R", "T", "r"}
_LIST_KEYS = {"t_grid", "vector"}


def _coerce(key, raw):
    if raw is None or isinstance(raw, (int, float, tuple, list, dict)) and not isinstance(raw, bool):
        if key in _LIST_KEYS and raw is not None:
            return tuple(float(v) for v in raw)
        return raw
    raw = str(raw).strip()
    if raw.lower() in ("", "none"):
        return None
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _LIST_KEYS:
        return parse_vector(raw)
    return raw


def parse_vector(text: str) -> tuple:
    """Comma/space separated reals, or ``@path`` to a file with one real per line."""
    text = text.strip()
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    parts = text.replace(",", " ").split()
    return tuple(float(p) for p in parts)


def parse_function(spec: str, n: int) -> conc.FunctionOracle:
    """``normalized-sum``, ``l2norm``, ``softmax[:beta]``, ``linear:<file or list>``, ``plugin:module:attr``."""
    name, _, arg = spec.partition(":")
    if name == "normalized-sum":
        return conc.normalized_sum_oracle(n)
    if name == "l2norm":
        return conc.l2norm_oracle(n)
    if name == "softmax":
        return conc.softmax_oracle(n, float(arg) if arg else 1.0)
    if name == "linear":
        a = np.array(parse_vector(arg if not Path(arg).is_file() else "@" + arg))
        if a.size != n:
            raise ValueError(f"linear coefficients have length {a.size}, expected n={n}")
        return conc.linear_oracle(a)
    if name == "plugin":
        module, _, attr = arg.partition(":")
        factory = getattr(importlib.import_module(module), attr)
        return factory(n)
    raise ValueError(f"unknown function spec {spec!r}")


# ---------------------------------------------------------------------------
# JSON / CSV


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if hasattr(obj, "_asdict"):
        return _jsonable(obj._asdict())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if dataclasses.is_dataclass(obj):
        return _jsonable(dataclasses.asdict(obj))
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_json(report: dict, path) -> None:
    Path(path).write_text(dumps_report(report))


def rows_to_csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _csv_cell(v):
    v = _jsonable(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


# ---------------------------------------------------------------------------
# verify


def default_t_grid(scale: float, points: int = 20, top: float = 5.0) -> np.ndarray:
    return np.linspace(top / points, top, points) * scale


def _law_scale(law) -> float:
    try:
        if isinstance(law, Weibull2):
            return math.sqrt(law.variance())
        if isinstance(law, SymPareto) and law.alpha > 2:
            return math.sqrt(2.0 / ((law.alpha - 1.0) * (law.alpha - 2.0)))
    except (AttributeError, ValueError):
        pass
    return 1.0


def verify(cfg: ExperimentConfig) -> dict:
    """Empirical survival of ``|f(X) - M f(X)|`` against one theorem's bound."""
    if cfg.theorem not in THEOREMS:
        raise ValueError(f"theorem must be one of {THEOREMS}")
    law = parse_law(cfg.law)
    oracle = parse_function(cfg.f, cfg.n)
    emp = mc_survival(oracle, law, cfg.n, cfg.trials, cfg.seed, cfg.workers)
    if cfg.t_grid:
        t_grid = np.asarray(cfg.t_grid, dtype=float)
    elif cfg.theorem in ("linear-weibull", "weibull-sharp"):
        t_grid = default_t_grid(_law_scale(law) * _l2(oracle))
    else:
        t_grid = np.linspace(0.25, 4.0, 20)
    runner = {
        "linear-weibull": _verify_weibull_rate,
        "weibull-sharp": _verify_weibull_rate,
        "weibull-robust": _verify_weibull_robust,
        "power-lorentz": _verify_power,
        "power-lipp": _verify_power,
    }[cfg.theorem]
    grid, fit, name = runner(cfg, oracle, emp, t_grid)
    passed = all(g["bound_prob"] >= g["empirical_prob"] for g in grid)
    return {
        "theorem": cfg.theorem,
        "config": cfg.to_dict(),
        "constants": constants.snapshot(),
        "median": emp.median,
        "excluded": emp.excluded,
        "grid": grid,
        "fitted_constant": {"name": name, "value": fit.value, "status": fit.status},
        "pass": bool(passed and fit.status == "ok"),
    }


def _l2(oracle) -> float:
    return float(np.linalg.norm(oracle.coord_sup)) if oracle.coord_sup is not None else 1.0


def _verify_weibull_rate(cfg, oracle, emp, t_grid):
    q = cfg.q
    if cfg.theorem == "linear-weibull":
        if oracle.linear_coeffs is None:
            raise ValueError("linear-weibull needs a linear f")
        a = oracle.linear_coeffs
        l2, linf = float(np.linalg.norm(a)), float(np.abs(a).max())
    else:
        prof = conc.lip_profile(oracle, (2, math.inf), seed=cfg.seed)
        l2, linf = prof.sharp(2), prof.sharp(math.inf)

    def prob_of(c, t):
        return conc._weibull_prob(t, l2, linf, q, c)

    curve = emp.curve(t_grid)
    fit = fit_rate_to_curve(prob_of, t_grid, curve["ci_high"])
    c_reg = constants.get("weibull_c_q")
    grid = []
    for i, t in enumerate(t_grid):
        grid.append({"t": float(t), "threshold": float(t), "bound_prob": prob_of(c_reg, t),
                     "fitted_bound_prob": prob_of(fit.value, t) if fit.value > 0 else 2.0,
                     "empirical_prob": float(curve["prob"][i]),
                     "ci": [float(curve["ci_low"][i]), float(curve["ci_high"][i])]})
    return grid, fit, "weibull_c_q"


def _threshold_grid(emp, t_grid, unit, prob, C_reg):
    grid = []
    for t in t_grid:
        thr = C_reg * unit(t)
        k = int(emp.exceed_count(thr))
        lo, hi = wilson_interval(k, emp.deviations.size)
        grid.append({"t": float(t), "threshold": float(thr), "bound_prob": float(prob(t)),
                     "empirical_prob": k / emp.deviations.size, "ci": [float(lo), float(hi)]})
    return grid


def _verify_weibull_robust(cfg, oracle, emp, t_grid):
    prof = conc.lip_profile(oracle, (2, math.inf), seed=cfg.seed)

    def unit(t):
        return conc.weibull_theorem_bound(prof, t, cfg.q, cfg.n, "robust", C=1.0)[0]

    def prob(t):
        return 2.0 * math.exp(-t * t / 2.0)

    fit, resolved = fit_threshold_multiplier(unit, prob, emp, t_grid)
    grid = _threshold_grid(emp, t_grid, unit, prob, constants.get("weibull_C_q"))
    for g, r in zip(grid, resolved):
        g["resolved"] = bool(r)
    return grid, fit, "weibull_C_q"


def _verify_power(cfg, oracle, emp, t_grid):
    q = cfg.q
    if cfg.theorem == "power-lorentz":
        if oracle.coord_sup is None:
            raise ValueError("power-lorentz needs the coordinate sups of the gradient")
        sharp = oracle.coord_sup

        def unit(t):
            return conc.power_theorem_bound(sharp, t, q, form="lorentz", C_q=1.0)[0]
        name = "power_C_q"
    else:
        p = cfg.p if cfg.p is not None else 4.0 * q / (q - 2.0)
        lip_p = conc.lip_profile(oracle, (p,), seed=cfg.seed).lip(p)

        def unit(t):
            return conc.power_theorem_bound(None, t, q, cfg.n, "lipschitz-p", p=p, lip_p=lip_p, C_pq=1.0)[0]
        name = "power_C_pq"

    def prob(t):
        return constants.get("power_C_prob") * math.exp(-t * t / 2.0)

    fit, resolved = fit_threshold_multiplier(unit, prob, emp, t_grid)
    grid = _threshold_grid(emp, t_grid, unit, prob, constants.get(name))
    for g, r in zip(grid, resolved):
        g["resolved"] = bool(r)
        g["fitted_threshold"] = float(fit.value * unit(g["t"])) if math.isfinite(fit.value) else "nan"
    return grid, fit, name


# ---------------------------------------------------------------------------
# tail-compare / order-stats / norms


def tail_compare(cfg: ExperimentConfig) -> dict:
    law = parse_law(cfg.law)
    inputs = {"law": cfg.law, "t": cfg.t, "s": cfg.s, "x": cfg.x, "R": cfg.R, "p": cfg.p, "T": cfg.T}
    checks = []
    if cfg.op == "witness":
        res = tailcmp.optimal_linear_witness(law, cfg.t, exact_atoms=True)
        cert = {"threshold": cfg.t, "prob": res.minimum, "slope": res.a}
        checks.append({"name": "bracket_width", "pass": True, "worst_point": res.bracket_width})
    elif cfg.op == "conditional":
        res = tailcmp.conditional_tail_bound(law, cfg.s)
        cert = {"threshold": res.threshold, "prob": res.prob, "branch": res.branch}
    elif cfg.op == "envelope":
        cert = {"threshold": tailcmp.quantile_envelope(law, cfg.x), "prob": 1.0 - cfg.x}
    elif cfg.op == "ratio":
        res = tailcmp.ratio_tail_bound(law, cfg.x, cfg.R, cfg.p, cfg.T)
        cert = {"threshold": res.threshold, "factor": res.factor}
        checks.extend(res.checks)
    else:
        raise ValueError("op must be witness, conditional, envelope or ratio")
    return {"operation": f"tail-compare:{cfg.op}", "inputs": inputs, "certificate": cert, "checks": checks}


def order_stats(cfg: ExperimentConfig) -> dict:
    n, t = cfg.n, cfg.t if cfg.t is not None else 2.0
    env = ostats.order_stat_envelope(n, t)
    joint = env.joint

    def run_max(rng, m):
        g = ostats.renyi_sample(n, rng, size=m)
        fail = np.any(g > joint, axis=1).sum()
        fail_renyi = np.any(g > env.renyi, axis=1).sum()
        return np.concatenate(([fail, fail_renyi], g.max(axis=0)))

    parts = np.array(map_chunks(run_max, cfg.trials, cfg.seed, stream_id=5, workers=cfg.workers))
    failures = int(parts[:, 0].sum())
    renyi_failures = int(parts[:, 1].sum())
    emp_max = parts[:, 2:].max(axis=0)
    freq = failures / cfg.trials
    lo, hi = wilson_interval(failures, cfg.trials)
    rows = [{"k": int(k), "top": float(a), "bottom": float(b), "renyi": float(c), "empirical_max": float(e)}
            for k, a, b, c, e in zip(env.k, env.top, env.bottom, env.renyi, emp_max)]
    return {"operation": "order-stats", "inputs": {"n": n, "t": t, "trials": cfg.trials, "seed": cfg.seed},
            "failure_frequency": freq, "se": binomial_se(freq, cfg.trials), "ci": [float(lo), float(hi)],
            "allowed": ostats.TOP_BOTTOM_PREFACTOR * math.exp(-t * t / 2.0),
            "prob_top_bottom": env.prob_top_bottom, "prob_renyi": env.prob_renyi,
            "renyi_failure_frequency": renyi_failures / cfg.trials,
            "trimmed_sum": _trimmed_sum_entry(cfg, n, t),
            "per_k": rows}


def _trimmed_sum_entry(cfg, n, t):
    """Bound on the full sum of ``n`` draws from ``cfg.law`` by the selected branch."""
    lam = max(t, 2.0)
    try:
        res = ostats.trimmed_sum_bound(QuantileStar(parse_law(cfg.law)), n, 0, n - 1, lam, cfg.branch,
                                       p=cfg.p, T=cfg.T)
    except (ValueError, ArithmeticError) as exc:
        return {"law": cfg.law, "branch": cfg.branch, "error": f"{type(exc).__name__}: {exc}"}
    return {"law": cfg.law, "branch": cfg.branch, "lambda": lam, "value": res.value,
            "prob": res.prob, "flags": res.flags}


def norms(cfg: ExperimentConfig) -> dict:
    x = np.asarray(cfg.vector, dtype=float)
    if x.size == 0:
        raise ValueError("empty vector")
    params = lornorm.LorentzParams(cfg.r, cfg.q, x.size)
    primal = lornorm.primal_norm(x, params, cfg.mode)
    dual = lornorm.dual_norm(x, params)
    return {"operation": "norms", "inputs": {"r": cfg.r, "q": cfg.q, "vector": list(x), "mode": cfg.mode},
            "primal": primal, "dual": dual,
            "box_dual": lornorm.box_dual(x, cfg.r)}


# ---------------------------------------------------------------------------
# constant fitting


def fit_weibull_rate(n_values=(64, 256, 1024), trials: int = 100000, seed: int = 0,
                     workers: int = 1, q: float = 0.5) -> ConstantFit:
    """Largest ``c_q`` for the linear bound on ``n^{-1/2} sum X_i``, Weibull(q) coordinates."""
    per_cell, cells = [], []
    law = Weibull2(q)
    for n in n_values:
        cfg = ExperimentConfig(theorem="linear-weibull", law=f"weibull2:q={q}", n=n, trials=trials,
                               seed=seed, workers=workers, q=q)
        rep = verify(cfg)
        per_cell.append(rep["fitted_constant"]["value"])
        cells.append({"n": n, "law": repr(law), "f": "normalized-sum"})
    flags = [] if all(np.isfinite(per_cell)) else ["fit failure in some cell"]
    return ConstantFit("weibull_c_q", float(min(per_cell)), cells, per_cell, stability_ratio(per_cell), flags)


def fit_threshold_constant(theorem: str, name: str, law: str, q: float, n_values,
                           trials: int = 100000, seed: int = 0, workers: int = 1) -> ConstantFit:
    """Smallest threshold multiplier for ``theorem`` on ``n^{-1/2} sum X_i``, maximised over ``n``."""
    per_cell, cells, flags = [], [], []
    for n in n_values:
        cfg = ExperimentConfig(theorem=theorem, law=law, n=n, trials=trials, seed=seed,
                               workers=workers, q=q)
        rep = verify(cfg)
        per_cell.append(rep["fitted_constant"]["value"])
        cells.append({"n": n, "law": law, "f": "normalized-sum"})
        if rep["fitted_constant"]["status"] != "ok":
            flags.append(f"n={n}: {rep['fitted_constant']['status']}")
    return ConstantFit(name, float(max(per_cell)), cells, per_cell, stability_ratio(per_cell), flags)


def fit_power_lorentz(n_values=(256, 1024), trials: int = 100000, seed: int = 0,
                      workers: int = 1, alpha: float = 3.0) -> ConstantFit:
    """Smallest ``C_q`` in the Lorentz-form power bound for ``n^{-1/2} sum X_i``."""
    return fit_threshold_constant("power-lorentz", "power_C_q", f"sympareto:alpha={alpha:g}", alpha,
                                  n_values, trials, seed, workers)


def fit_power_lipp(n_values=(256, 1024), trials: int = 100000, seed: int = 0,
                   workers: int = 1, alpha: float = 3.0) -> ConstantFit:
    """Smallest ``C_{p,q}`` in the Lipschitz-p power bound for ``n^{-1/2} sum X_i``."""
    return fit_threshold_constant("power-lipp", "power_C_pq", f"sympareto:alpha={alpha:g}", alpha,
                                  n_values, trials, seed, workers)


def fit_weibull_robust(n_values=(64, 256, 1024), trials: int = 100000, seed: int = 0,
                       workers: int = 1, q: float = 0.5) -> ConstantFit:
    """Smallest ``C_q`` in the robust Weibull-type threshold for ``n^{-1/2} sum X_i``."""
    return fit_threshold_constant("weibull-robust", "weibull_C_q", f"weibull2:q={q:g}", q,
                                  n_values, trials, seed, workers)


def trimmed_sums_sample(p: float, n: int, trials: int, seed: int, j_values, workers: int = 1) -> dict:
    """Sums of all but the ``j`` largest of ``n`` Pareto(p) draws, per ``j``."""
    law = Pareto(p)
    j_values = tuple(j_values)

    def run(rng, m):
        s = np.sort(law.sample(rng, (m, n)), axis=1)
        c = np.cumsum(s, axis=1)
        return np.column_stack([c[:, n - j - 1] for j in j_values])

    vals = mc_values(run, trials, seed, stream_id=7, workers=workers, chunk=512)
    return {j: vals[:, i] for i, j in enumerate(j_values)}


def trimmed_level(lam: float) -> float:
    """Quantile level ``1 - (pi^2/3) exp(-lam^2/2)`` of the trimmed-sum event."""
    return 1.0 - ostats.TOP_BOTTOM_PREFACTOR * math.exp(-lam * lam / 2.0)


def fit_pareto_trimmed(p: float = 3.0, n_values=(1000, 10000), j_values=(0, 4, 16),
                       lams=(2.0, 3.0), trials: int = 10000, seed: int = 0,
                       workers: int = 1) -> ConstantFit:
    """Smallest ``C`` with the Pareto trimmed-sum bound above the empirical quantile.

    One cell per ``j``; each cell takes the worst case over ``n`` and ``lambda``.
    """
    need = {j: 0.0 for j in j_values}
    for n in n_values:
        sums = trimmed_sums_sample(p, n, trials, seed, j_values, workers)
        for j in j_values:
            for lam in lams:
                emp = float(np.quantile(sums[j], trimmed_level(lam)))
                unit = ostats.pareto_trimmed_bound(p, n, j, lam, C=1.0).value
                need[j] = max(need[j], emp / unit)
    per_cell = [need[j] for j in j_values]
    cells = [{"j": j, "n": list(n_values), "p": p, "lams": list(lams)} for j in j_values]
    return ConstantFit("pareto_trimmed_C", float(max(per_cell)), cells, per_cell, stability_ratio(per_cell))


def fit_fast_growth(p: float = 3.0, n: int = 1000, j_values=(0, 4, 16), lams=(2.0, 3.0),
                    trials: int = 10000, seed: int = 0, workers: int = 1) -> ConstantFit:
    """Smallest ``C`` with the fast-growth trimmed-sum bound (k = n-1) above the empirical quantile."""
    sums = trimmed_sums_sample(p, n, trials, seed, j_values, workers)
    law = Pareto(p)
    per_cell, cells = [], []
    for j in j_values:
        best = 0.0
        for lam in lams:
            emp = float(np.quantile(sums[j], trimmed_level(lam)))

            def ok(C, lam=lam, emp=emp):
                return ostats.trimmed_sum_bound(law, n, j, n - 1, lam, "fast-growth", p=p, T=1.0, C=C).value >= emp
            best = max(best, fit_constant(ok).value)
        per_cell.append(best)
        cells.append({"j": j, "n": n, "p": p, "lams": list(lams)})
    return ConstantFit("fast_growth_C", float(max(per_cell)), cells, per_cell, stability_ratio(per_cell))


def fit_renyi(n_values=(50, 500), t_values=(1.5, 2.0, 3.0), trials: int = 20000,
              seed: int = 0, workers: int = 1) -> list:
    """Smallest slopes ``c`` for ranks ``k <= n/2`` and ``k > n/2``.

    Each slot gets half of the failure budget ``C exp(-t^2/2)``, so the
    all-rank event fails with frequency at most the full budget.
    """
    C = constants.get("renyi_C")
    samples = {n: mc_values(lambda rng, m, n=n: ostats.renyi_sample(n, rng, size=m), trials, seed,
                            stream_id=11, workers=workers) for n in n_values}
    fits = []
    for slot, name in (("low", "renyi_c_low"), ("high", "renyi_c_high")):
        per_cell, cells = [], []
        for n in n_values:
            g = samples[n]
            k = np.arange(1, n + 1, dtype=float)
            mask = k <= n / 2.0 if slot == "low" else k > n / 2.0
            for t in t_values:
                spread = ostats._renyi_spread(n, k, t)[mask]
                budget = 0.5 * C * math.exp(-t * t / 2.0)
                if budget >= 1.0:
                    continue

                def ok(c, spread=spread, g=g, budget=budget):
                    env = 1.0 - (n - k[mask]) / n * np.exp(-c * spread)
                    return np.mean(np.any(g[:, mask] > env, axis=1)) <= budget
                per_cell.append(fit_constant(ok).value)
                cells.append({"n": n, "t": t})
        fits.append(ConstantFit(name, float(max(per_cell)), cells, per_cell, stability_ratio(per_cell)))
    return fits


def fit_poisson(q: float = 4.0, n: int = 16, delta: float = math.exp(-2.0), vectors: int = 20,
                trials: int = 4000, seed: int = 0) -> ConstantFit:
    """Smallest ``C_q`` with ``[x]_delta <= C_q |x|_{r,q/2}``, ``r = delta^{-2/q} log(1/delta)``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(13,)))
    r = delta ** (-2.0 / q) * math.log(1.0 / delta)
    per_cell, cells = [], []
    for i in range(vectors):
        kind = i % 4
        if kind == 0:
            x = rng.random(n)
        elif kind == 1:
            x = np.ones(n)
        elif kind == 2:
            x = np.zeros(n)
            x[0] = 1.0
        else:
            x = np.arange(1, n + 1, dtype=float) ** -rng.uniform(0.2, 2.0)
        est = lornorm.poisson_norm_estimate(x, delta, q=q, trials=trials, rng=rng)
        norm = lornorm.primal_norm(x, lornorm.LorentzParams(max(r, 1.0), q / 2.0, n)).value
        per_cell.append((est.value + 3.0 * est.se) / norm)
        cells.append({"kind": ["random", "ones", "unit", "power"][kind]})
    return ConstantFit("poisson_C_q", float(max(per_cell)), cells, per_cell, stability_ratio(per_cell))


FITTERS = {
    "weibull_c_q": fit_weibull_rate,
    "weibull_C_q": fit_weibull_robust,
    "power_C_q": fit_power_lorentz,
    "power_C_pq": fit_power_lipp,
    "pareto_trimmed_C": fit_pareto_trimmed,
    "fast_growth_C": fit_fast_growth,
    "renyi": fit_renyi,
    "poisson_C_q": fit_poisson,
}


def fit_constants(cfg: ExperimentConfig) -> dict:
    names = list(FITTERS) if cfg.cells in ("all", None) else [c.strip() for c in cfg.cells.split(",")]
    out = []
    for name in names:
        fitter = FITTERS[name]
        kwargs = {"seed": cfg.seed}
        if name != "poisson_C_q":
            kwargs["workers"] = cfg.workers
        res = fitter(**kwargs)
        out.extend(res if isinstance(res, list) else [res])
    return {"operation": "fit-constants", "seed": cfg.seed, "fits": [f.to_dict() for f in out]}


# ---------------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Dispatch on ``cfg.operation``; writes JSON/CSV when paths are set.

    Failures are captured as ``{"error": ...}`` reports.
    """
    runners = {"verify": verify, "tail-compare": tail_compare, "order-stats": order_stats,
               "norms": norms, "fit-constants": fit_constants}
    if cfg.operation not in runners:
        raise ValueError(f"operation must be one of {sorted(runners)}")
    try:
        with constants.override(**cfg.overrides):
            report = runners[cfg.operation](cfg)
        report["status"] = "ok"
    except Exception as exc:  # report-valued failure
        report = {"operation": cfg.operation, "status": "error",
                  "error": f"{type(exc).__name__}: {exc}", "config": cfg.to_dict()}
    if cfg.json_out:
        write_json(report, cfg.json_out)
    if cfg.csv_out:
        rows, cols = report_rows(report)
        Path(cfg.csv_out).write_text(rows_to_csv(rows, cols))
    return report


def report_rows(report: dict):
    if "grid" in report:
        rows = [{**g, "ci_low": g["ci"][0], "ci_high": g["ci"][1]} for g in report["grid"]]
        return rows, ["t", "threshold", "bound_prob", "empirical_prob", "ci_low", "ci_high"]
    if "per_k" in report:
        return report["per_k"], ["k", "top", "bottom", "renyi", "empirical_max"]
    if report.get("operation") == "norms" and "primal" in report:
        rows = [{"norm": k, **report[k]._asdict()} for k in ("primal", "dual", "box_dual")]
        return rows, ["norm", "value", "method", "error_factor"]
    if "fits" in report:
        return report["fits"], ["name", "value", "stability", "per_cell"]
    flat = [{"key": k, "value": v} for k, v in sorted(_jsonable(report).items()) if not isinstance(v, (dict, list))]
    return flat, ["key", "value"]
