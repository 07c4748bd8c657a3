"""Experiment runners: one function per config kind, each returning an ExperimentResult."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from chaoscon.chaos.moments import (
    ENUMERATION_CAP,
    brute_force_enumerate,
    chaos_samples,
    decoupled_undecoupled_compare,
    empirical_moments,
    exact_chaos_moments,
    exp_integrability,
    tail_certificate,
)
from chaoscon.chaos.norms import all_subsets, moment_bound_euclidean, norm_T_I, norm_T_N_I_p_grid
from chaoscon.chaos.tensors import ChaosSpec, CoefficientTensor
from chaoscon.distributions import (
    ClassMParams,
    check_class_m,
    check_equivalence_ii,
    check_subgaussian,
    derive_ii_constants,
    find_subgaussian_constants,
)
from chaoscon.entropy import DiscreteProductMeasure, PhiFunction, check_tensorization, herbst_tail_check, lsi_ratio
from chaoscon.harness import config as cfgmod
from chaoscon.reports import SCHEMA_VERSION, BoundReport, to_jsonable
from chaoscon.rng import RandomStream

__all__ = ["ExperimentResult", "Table", "RUNNERS", "overall_verdict", "run_experiment"]


@dataclass
class Table:
    columns: list[str]
    rows: list[list]
    docs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"columns": self.columns, "docs": {c: self.docs.get(c, "") for c in self.columns}, "rows": self.rows}

    @classmethod
    def from_dict(cls, data: dict) -> "Table":
        return cls(list(data["columns"]), [list(r) for r in data["rows"]], dict(data.get("docs", {})))

    @classmethod
    def from_report(cls, report: BoundReport) -> "Table":
        header, rows = report.rows()
        return cls(header, rows, report.column_descriptions())


@dataclass
class ExperimentResult:
    name: str
    verdict: str
    table: Table
    figure: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return to_jsonable({
            "name": self.name,
            "verdict": self.verdict,
            "table": self.table.to_dict(),
            "figure": self.figure,
            "details": self.details,
            "failures": self.failures,
        })


def overall_verdict(verdicts: list[str]) -> str:
    if "fail" in verdicts:
        return "fail"
    if "inconclusive" in verdicts or not verdicts:
        return "inconclusive"
    return "pass" if "pass" in verdicts else "report"


def _bound_result(name, report: BoundReport, figure: dict) -> ExperimentResult:
    return ExperimentResult(name, report.verdict, Table.from_report(report), figure, report.to_dict(),
                            list(report.failures))


# -- distributions ----------------------------------------------------------

def run_class_m(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    dist = cfgmod.build_distribution(p["distribution"])
    params = ClassMParams(p["m"], p["sigma_sq"])
    grid = np.sort(cfgmod.build_grid(p["grid"]))
    reports = []
    for check in p["checks"]:
        if check == "class_m":
            reports.append(check_class_m(dist, params, grid, p["quad_step"]))
        elif check == "equivalence_ii":
            C, alpha = derive_ii_constants(params)
            reports.append(check_equivalence_ii(dist, params.m, p.get("C", C), p.get("alpha", alpha), grid))
        else:
            found = find_subgaussian_constants(dist, grid)
            if found is None:
                return ExperimentResult(cfg["name"], "inconclusive", Table(["x"], [[x] for x in grid]),
                                        failures=[{"check": check, "reason": "no subgaussian constants found"}])
            reports.append(check_subgaussian(dist, found[0], found[1], grid))
    columns = ["x"]
    docs = {"x": "grid point (x >= m)"}
    cols = [grid]
    for r in reports:
        columns.append(f"{r.check}_margin_upper")
        docs[columns[-1]] = f"normalized slack of the {r.check} inequality on the right tail"
        cols.append(r.margin_upper)
        if r.margin_lower.size:
            columns.append(f"{r.check}_margin_lower")
            docs[columns[-1]] = f"normalized slack of the {r.check} inequality on the left tail"
            cols.append(r.margin_lower)
    rows = [list(map(float, row)) for row in zip(*cols)]
    failed = any(r.failed for r in reports)
    verdict = "inconclusive" if failed else ("pass" if all(r.passed for r in reports) else "fail")
    figure = {"x": "x", "y": columns[1:], "title": "class M check margins", "xlabel": "x",
              "ylabel": "normalized slack", "hline": 0.0}
    return ExperimentResult(cfg["name"], verdict, Table(columns, rows, docs), figure,
                            {"checks": [r.to_dict() for r in reports]},
                            [{"check": r.check, "diagnostics": r.diagnostics} for r in reports if r.failed])


# -- entropy ----------------------------------------------------------------

def random_product_instance(rng: np.random.Generator, max_factors: int, max_atoms: int):
    k = int(rng.integers(1, max_factors + 1))
    factors = []
    for _ in range(k):
        m = int(rng.integers(2, max_atoms + 1))
        probs = rng.dirichlet(np.ones(m))
        probs /= math.fsum(probs)
        factors.append((np.arange(m, dtype=float), probs))
    measure = DiscreteProductMeasure(factors)
    xi = rng.exponential(1.0, measure.shape) * (rng.random(measure.shape) > 0.2)
    return measure, xi


def run_tensorization(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    rng = stream.split(0).generator()
    rows = []
    for i in range(p["instances"]):
        measure, xi = random_product_instance(rng, p["max_factors"], p["max_atoms"])
        for kind in p["phi"]:
            res = check_tensorization(measure, xi, PhiFunction(kind))
            rows.append([i, kind, measure.n_factors, "x".join(map(str, measure.shape)), res.lhs, res.rhs,
                         res.rhs - res.lhs, bool(res.holds)])
    n_fail = sum(1 for r in rows if not r[-1])
    columns = ["instance", "phi", "factors", "shape", "lhs", "rhs", "slack", "holds"]
    docs = {
        "instance": "random instance index",
        "phi": "Phi kind (square or x_log_x)",
        "factors": "number of product factors",
        "shape": "atoms per factor",
        "lhs": "Phi-entropy of xi under the product law",
        "rhs": "sum over factors of the expected one-coordinate Phi-entropy",
        "slack": "rhs - lhs",
        "holds": "lhs <= rhs + 1e-12",
    }
    figure = {"x": "lhs", "y": ["rhs"], "kind": "scatter", "title": "tensorization: rhs against lhs",
              "xlabel": "Ent_Phi(xi)", "ylabel": "sum of coordinate entropies", "diagonal": True}
    return ExperimentResult(cfg["name"], "pass" if n_fail == 0 else "fail", Table(columns, rows, docs), figure,
                            {"instances": p["instances"], "failures": n_fail})


def _product_inputs(p: dict):
    dist = cfgmod.build_distribution(p["distribution"])
    f = cfgmod.build_function(p["function"], p["dim"])
    return [dist] * p["dim"], f


def run_lsi(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    dists, f = _product_inputs(p)
    rep = lsi_ratio(dists, f, cfgmod.build_grid(p["lambda_grid"]), cfg["samples"], stream.split(0),
                    p["n_resamples"])
    report = rep.to_bound_report()
    if "max_ratio" in p:
        report.verdicts = [bool(r <= p["max_ratio"] + 3.0 * s) for r, s in zip(rep.ratio, rep.std_error)]
        report.notes.append(f"pass iff ratio <= {p['max_ratio']:g} + 3 SE")
    report.extras = {"max_ratio": rep.max_ratio, "argmax_lambda": rep.max_lambda}
    figure = {"x": "lambda", "y": ["empirical"], "yerr": {"empirical": "std_error"}, "logx": True,
              "title": "log-Sobolev ratio", "xlabel": "lambda", "ylabel": "R(lambda)"}
    return _bound_result(cfg["name"], report, figure)


def run_herbst(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    dists, f = _product_inputs(p)
    report = herbst_tail_check(dists, f, p["C"], cfgmod.build_grid(p["t_grid"]), cfg["samples"], stream.split(0))
    figure = {"x": "t", "y": ["empirical", "bound_upper"], "yerr": {"empirical": "std_error"}, "logy": True,
              "title": "Herbst tail bound", "xlabel": "t", "ylabel": "probability"}
    return _bound_result(cfg["name"], report, figure)


# -- chaos ------------------------------------------------------------------

def _enumerable(spec: ChaosSpec) -> bool:
    signs = spec.n * spec.d if spec.decoupled else spec.n
    return spec.is_rademacher and signs <= ENUMERATION_CAP


def run_chaos_moments(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    spec = cfgmod.build_chaos(p["chaos"])
    ps = [float(x) for x in cfgmod.build_grid(p["p_grid"])]
    centered = p["centered"]
    notes = []
    oracle = exact_chaos_moments(spec, ps, centered) if _enumerable(spec) else None
    if cfg["exact"]:
        if oracle is None:
            raise ValueError("exact mode needs an enumerable Rademacher chaos")
        emp, se, n_used = list(oracle), [0.0] * len(ps), 0
        notes.append("exact mode: moments from full enumeration")
    else:
        z = chaos_samples(spec, cfg["samples"], stream.split(0))
        est = empirical_moments(z, ps, centered, stream.split(1), p["n_resamples"])
        emp, se, n_used = [e.value for e in est], [e.std_error for e in est], cfg["samples"]
    verdicts = None
    columns = {}
    docs = {}
    if oracle is not None:
        verdicts = [bool(abs(e - o) <= 3.0 * s + 1e-12 * max(1.0, abs(o))) for e, o, s in zip(emp, oracle, se)]
        columns["oracle"] = oracle
        docs["oracle"] = "exact moment by enumeration of all sign patterns"
        notes.append("pass iff |empirical - oracle| <= 3 SE at every p")
    bound = None
    if p["bound"] == "euclidean":
        norms = {I: norm_T_I(spec, I, p["n_outer"], p["restarts"], stream.split(2)) for I in
                 all_subsets(spec.d, include_empty=False)}
        bound = [moment_bound_euclidean(norms, q, spec.d) for q in ps]
        for I, est in norms.items():
            notes.append(f"||T||_{set(I) or '{}'} = {est.value:.6g} +- {est.std_error:.2g} ({est.outer})")
        docs["bound_upper"] = "sum over nonempty I of p^(|I|/2) ||T||_I (constant omitted)"
        if not centered:
            notes.append("the bound shape controls ||Z - EZ||_p; raw moments also carry |EZ|")
    report = BoundReport(
        quantity=("||Z - EZ||_p" if centered else "||Z||_p"), grid_name="p", grid=ps, empirical=emp,
        std_error=se, bound_upper=bound, verdicts=verdicts, seeds=[stream.label], n_samples=n_used, notes=notes,
        columns=columns, column_docs=docs,
    )
    ys = ["empirical"] + (["oracle"] if oracle is not None else []) + (["bound_upper"] if bound else [])
    figure = {"x": "p", "y": ys, "yerr": {"empirical": "std_error"}, "logx": True, "logy": True,
              "title": "chaos moments", "xlabel": "p", "ylabel": "moment"}
    return _bound_result(cfg["name"], report, figure)


def _n_funcs_for(spec: ChaosSpec, p: dict):
    if "n_funcs" in p:
        return cfgmod.build_n_funcs(p["n_funcs"])
    return None


def run_logconcave(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    spec = cfgmod.build_chaos(p["chaos"])
    ps = [float(x) for x in cfgmod.build_grid(p["p_grid"])]
    n_funcs = _n_funcs_for(spec, p)
    if cfg["exact"]:
        emp, se, n_used = exact_chaos_moments(spec, ps), [0.0] * len(ps), 0
    else:
        z = chaos_samples(spec, cfg["samples"], stream.split(0))
        est = empirical_moments(z, ps, False, stream.split(1), p["n_resamples"])
        emp, se, n_used = [e.value for e in est], [e.std_error for e in est], cfg["samples"]
    per_subset = {I: norm_T_N_I_p_grid(spec, I, ps, n_funcs, p["n_outer"], p["restarts"], stream.split(2))
                  for I in all_subsets(spec.d)}
    shape = [sum(per_subset[I][j].value for I in per_subset) for j in range(len(ps))]
    report = BoundReport(
        quantity="||Z||_p", grid_name="p", grid=ps, empirical=emp, std_error=se, bound_upper=shape,
        seeds=[stream.label], n_samples=n_used,
        columns={f"norm_I_{''.join(map(str, I)) or 'empty'}": [e.value for e in per_subset[I]] for I in per_subset},
        column_docs={"bound_upper": "sum over all I of ||T||_{N,I,p}",
                     **{f"norm_I_{''.join(map(str, I)) or 'empty'}": f"||T||_(N,I,p) for I = {set(I) or '{}'}"
                        for I in per_subset}},
    )
    ratios = report.ratio_upper
    finite = ratios[np.isfinite(ratios)]
    failures = []
    if finite.size == 0:
        band = math.nan
        verdict_ok = all(e == 0 for e in emp)
        report.notes.append("all bound shapes vanish")
    else:
        band = float(finite.max() / finite.min()) if finite.min() > 0 else math.inf
        verdict_ok = band <= p["band_limit"]
    report.verdicts = [bool(verdict_ok)] * len(ps)
    report.extras = {"r_lo": float(finite.min()) if finite.size else None,
                     "r_hi": float(finite.max()) if finite.size else None,
                     "band": band, "band_limit": p["band_limit"],
                     "flagged_draws": {"".join(map(str, I)) or "empty": per_subset[I][0].n_flagged
                                       for I in per_subset}}
    report.notes.append(f"pass iff r_hi / r_lo <= {p['band_limit']:g}")
    report.failures = failures
    figure = {"x": "p", "y": ["ratio_upper"], "logx": True, "title": "moment / bound shape",
              "xlabel": "p", "ylabel": "ratio"}
    return _bound_result(cfg["name"], report, figure)


def run_tail_certificate(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    spec = cfgmod.build_chaos(p["chaos"])
    M = p["M"]
    if isinstance(M, dict):
        q = M["quantile"]
        if cfg["exact"]:
            dist = brute_force_enumerate(spec)
            M = float(dist.support[np.searchsorted(np.cumsum(dist.probs), q - 1e-12)])
        else:
            M = float(np.quantile(chaos_samples(spec, cfg["samples"], stream.split(1)), q))
    L_grid = cfgmod.build_grid(p["L_grid"]) if "L_grid" in p else None
    report = tail_certificate(spec, M, p["alpha"], cfgmod.build_grid(p["t_grid"]), L_grid, cfg["samples"],
                              stream.split(0), exact=cfg["exact"])
    figure = {"x": "t", "y": ["empirical", "bound_upper"], "logy": True, "title": "tail certificate",
              "xlabel": "t", "ylabel": "probability"}
    return _bound_result(cfg["name"], report, figure)


def run_decouple(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    tensor = cfgmod.build_tensor(p["tensor"])
    gen = cfgmod.build_distribution(p["generator"])
    report = decoupled_undecoupled_compare(tensor, gen, cfgmod.build_grid(p["p_grid"]), max(cfg["samples"], 2),
                                           stream.split(0), exact=True if cfg["exact"] else None,
                                           n_resamples=p["n_resamples"])
    figure = {"x": "p", "y": ["ratio_upper"], "logx": True, "title": "decoupled / undecoupled moments",
              "xlabel": "p", "ylabel": "ratio"}
    return _bound_result(cfg["name"], report, figure)


def _trend_specs(p: dict) -> list[tuple[int, ChaosSpec]]:
    if "specs" in p:
        return [(s.n, s) for s in map(cfgmod.build_chaos, p["specs"])]
    fam = p["family"]
    out = []
    for n in fam["n"]:
        if fam["kind"] == "normalized_ones":
            d = fam.get("d", 1)
            t = CoefficientTensor(np.ones((n,) * d) / n ** (d / 2.0))
        else:
            d = fam.get("d", 2)
            t = CoefficientTensor.identity(n, d).scaled(1.0 / math.sqrt(n))
        out.append((n, ChaosSpec.rademacher([t])))
    return out


def run_exp_trend(cfg: dict, stream: RandomStream) -> ExperimentResult:
    p = cfg["params"]
    alphas = [float(a) for a in cfgmod.build_grid(p["alpha_grid"])]
    rows = []
    flagged = []
    for j, (n, spec) in enumerate(_trend_specs(p)):
        res = exp_integrability(spec, alphas, max(cfg["samples"], 2), stream.split(j),
                                exact=True if cfg["exact"] else None)
        method = "exact" if (cfg["exact"] or _enumerable(spec)) else "mc"
        for a, v, s, lv, of in zip(res["alpha"], res["value"], res["std_error"], res["log_value"],
                                   res["overflow"]):
            rows.append([n, a, v, s, lv, bool(of), method])
            if of:
                flagged.append({"n": n, "alpha": a, "reason": "overflow: value reported in log space only"})
    columns = ["n", "alpha", "value", "std_error", "log_value", "overflow", "method"]
    docs = {
        "n": "side length of the spec in the nested family",
        "alpha": "exponent alpha in E exp(alpha Z^(2/d))",
        "value": "estimate of E exp(alpha Z^(2/d))",
        "std_error": "standard error (0 for exact enumeration)",
        "log_value": "natural log of the estimate",
        "overflow": "true when the value exceeds the double range",
        "method": "exact enumeration or Monte Carlo",
    }
    figure = {"x": "alpha", "y": ["log_value"], "group": "n", "title": "exponential integrability trend",
              "xlabel": "alpha", "ylabel": "log E exp(alpha Z^(2/d))"}
    return ExperimentResult(cfg["name"], "report", Table(columns, rows, docs), figure,
                            {"notes": ["report only: finiteness is observed as a trend"], "flagged": flagged})


RUNNERS: dict[str, Callable[[dict, RandomStream], ExperimentResult]] = {
    "class-m-check": run_class_m,
    "entropy-tensorization": run_tensorization,
    "lsi-ratio": run_lsi,
    "herbst": run_herbst,
    "chaos-moments": run_chaos_moments,
    "logconcave-bounds": run_logconcave,
    "tail-certificate": run_tail_certificate,
    "decouple-compare": run_decouple,
    "exp-integrability-trend": run_exp_trend,
}

NUMERIC_ERRORS = (ValueError, ArithmeticError, np.linalg.LinAlgError, AssertionError)


def run_experiment(cfg: dict, timing: bool = False) -> dict:
    """Run one resolved config and return the report dict."""
    start = time.perf_counter()
    stream = RandomStream(cfg["seed"])
    try:
        with np.errstate(over="ignore", under="ignore"):
            result = RUNNERS[cfg["kind"]](cfg, stream)
    except NUMERIC_ERRORS as exc:
        result = ExperimentResult(cfg["name"], "inconclusive", Table([], []),
                                  failures=[{"error": type(exc).__name__, "message": str(exc)}])
    elapsed = time.perf_counter() - start
    return {
        "version": SCHEMA_VERSION,
        "config": cfg,
        "results": [result.to_dict()],
        "verdict": overall_verdict([result.verdict]),
        "timing": {"enabled": True, "seconds": round(elapsed, 3)} if timing else {"enabled": False},
    }
