"""Sampling-side quantities for chaoses: moments, exact laws, tails, integrability."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from chaoscon.chaos.tensors import ChaosSpec, CoefficientTensor, evaluate_chaos, sample_chaos_inputs, sign_patterns
from chaoscon.distributions import DistributionSpec
from chaoscon.oracles import ExactDistribution, binomial_se, bootstrap_ci, weighted_moment
from chaoscon.reports import BoundReport
from chaoscon.rng import RandomStream, as_stream

__all__ = [
    "ENUMERATION_CAP",
    "MomentEstimate",
    "brute_force_enumerate",
    "chaos_samples",
    "decoupled_undecoupled_compare",
    "empirical_moment",
    "empirical_moments",
    "exact_chaos_moments",
    "exp_integrability",
    "tail_certificate",
]

ENUMERATION_CAP = 20  # signs, i.e. 2^20 outcomes


@dataclass
class MomentEstimate:
    value: float
    std_error: float
    p: float
    centered: bool
    n_samples: int
    failure: str | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "p": self.p, "centered": self.centered,
                "n_samples": self.n_samples, "failure": self.failure}


def empirical_moments(samples, p_grid: Sequence[float], centered: bool = False,
                      stream: RandomStream | int | None = None, n_resamples: int = 500) -> list[MomentEstimate]:
    """||z||_p (or ||z - mean||_p) for each p, with one shared bootstrap."""
    z = np.asarray(samples, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("no samples")
    ps = [float(p) for p in p_grid]
    if any(p < 1 for p in ps):
        raise ValueError("p must be >= 1")
    if not np.all(np.isfinite(z)):
        return [MomentEstimate(math.nan, math.nan, p, centered, z.size, "non-finite samples") for p in ps]

    def stat(values, weights):
        return np.array([weighted_moment(values, weights, p, centered) for p in ps])

    est, se = bootstrap_ci(z, stat, n_resamples, stream)
    out = []
    for p, e, s in zip(ps, np.atleast_1d(est), np.atleast_1d(se)):
        failure = None if np.isfinite(e) and np.isfinite(s) else "p-th power overflow"
        out.append(MomentEstimate(float(e), float(s), p, centered, z.size, failure))
    return out


def empirical_moment(samples, p: float, centered: bool = False, stream: RandomStream | int | None = None,
                     n_resamples: int = 500) -> MomentEstimate:
    return empirical_moments(samples, [p], centered, stream, n_resamples)[0]


def brute_force_enumerate(spec: ChaosSpec) -> ExactDistribution:
    """Exact law of Z for sign generators, by running over every sign pattern."""
    if not spec.is_rademacher:
        raise ValueError("enumeration needs Rademacher generators")
    signs = spec.n * spec.d if spec.decoupled else spec.n
    if signs > ENUMERATION_CAP:
        raise ValueError(f"{signs} signs exceed the enumeration cap of {ENUMERATION_CAP}")
    if not spec.family:
        return ExactDistribution.point_mass(0.0)
    rows = spec.d if spec.decoupled else 1
    values = []
    for block in sign_patterns(signs):
        x = block.reshape(block.shape[0], rows, spec.n)
        values.append(np.atleast_1d(evaluate_chaos(spec, x)))
    return ExactDistribution.from_values(np.concatenate(values))


def exact_chaos_moments(spec: ChaosSpec, p_grid: Sequence[float], centered: bool = False) -> list[float]:
    dist = brute_force_enumerate(spec)
    return [weighted_moment(dist.support, dist.probs, float(p), centered) for p in p_grid]


def chaos_samples(spec: ChaosSpec, n_samples: int, stream: RandomStream | int | None = None,
                  chunk: int = 100_000) -> np.ndarray:
    """n_samples draws of Z; chunk j of the output comes from stream.split(j)."""
    stream = as_stream(stream)
    out = np.empty(n_samples)
    if not spec.family:
        out[:] = 0.0
        return out
    for j, start in enumerate(range(0, n_samples, chunk)):
        m = min(chunk, n_samples - start)
        x = sample_chaos_inputs(spec, m, stream.split(j))
        out[start:start + m] = evaluate_chaos(spec, x)
    return out


@dataclass
class _TailRow:
    t: float
    threshold: float
    tail: float
    std_error: float
    bound: float


def tail_certificate(spec: ChaosSpec, M: float, alpha: float, t_grid: Sequence[float],
                     L_grid: Sequence[float] | None = None, n_samples: int = 200_000,
                     stream: RandomStream | int | None = None, exact: bool = False) -> BoundReport:
    """Least L on a grid with P(Z > L M t^{d/2}) <= e^{-alpha t} at every t (3-sigma rule).

    The report rows hold, per t, the tail at the least passing L.  Grid points
    whose target probability is below 1/N cannot be resolved by N samples;
    they are dropped with a note.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    ts = np.array(sorted(float(t) for t in t_grid))
    if ts.size == 0 or ts[0] < 1:
        raise ValueError("t values must be >= 1")
    notes: list[str] = []
    if exact:
        dist = brute_force_enumerate(spec)
        support, probs, N = dist.support, dist.probs, None
    else:
        z = np.sort(chaos_samples(spec, n_samples, stream))
        N = z.size
        keep = N * np.exp(-alpha * ts) >= 1.0
        if not np.all(keep):
            notes.append(f"dropped t > {ts[keep].max() if np.any(keep) else ts[0]:g}: "
                         f"target e^(-alpha t) below 1/N with N={N}")
            ts = ts[keep]

    def tail_at(level):
        level = np.asarray(level, dtype=float)
        if exact:
            return np.array([probs[support > v].sum() for v in np.ravel(level)]).reshape(level.shape), \
                np.zeros(level.shape)
        frac = (N - np.searchsorted(z, level, side="right")) / N
        return frac, binomial_se(frac, N)

    d = spec.d
    p_M, se_M = tail_at(np.array([M]))
    notes.append(f"P(Z > M) = {float(p_M[0]):.6g} +- {float(se_M[0]):.2g}")
    if L_grid is None:
        L_grid = np.geomspace(0.125, 64.0, 28)
    L_grid = np.sort(np.asarray(L_grid, dtype=float))
    bound = np.exp(-alpha * ts)
    seeds = [as_stream(stream).label] if not exact else []
    failures = []
    chosen = None
    if ts.size and M > 0:
        for L in L_grid:
            tail, se = tail_at(L * M * ts ** (d / 2.0))
            if np.all(tail <= bound + 3.0 * se):
                chosen = float(L)
                break
    if chosen is None:
        failures.append({"reason": "no L on the grid passes" if M > 0 else "M must be positive"})
        tail, se = (np.full(ts.shape, math.nan), np.full(ts.shape, math.nan))
    else:
        tail, se = tail_at(chosen * M * ts ** (d / 2.0))
    return BoundReport(
        quantity="P(Z > L M t^(d/2))",
        grid_name="t",
        grid=ts.tolist(),
        empirical=np.asarray(tail, dtype=float).tolist(),
        std_error=np.asarray(se, dtype=float).tolist(),
        bound_upper=bound.tolist(),
        verdicts=[bool(v) for v in (np.asarray(tail) <= bound + 3.0 * np.asarray(se))] if chosen else None,
        seeds=seeds,
        n_samples=N or 0,
        notes=notes + ([f"least passing L = {chosen:g}"] if chosen is not None else []),
        columns={"threshold": ((chosen or math.nan) * M * ts ** (d / 2.0)).tolist()},
        column_docs={"threshold": "L * M * t^(d/2) at the least passing L"},
        failures=failures,
        extras={"L": chosen, "M": M, "alpha": alpha, "tail_at_M": float(p_M[0]), "tail_at_M_se": float(se_M[0])},
    )


def decoupled_undecoupled_compare(tensor: CoefficientTensor, generator: DistributionSpec, p_grid: Sequence[float],
                                  n_samples: int = 200_000, stream: RandomStream | int | None = None,
                                  exact: bool | None = None, n_resamples: int = 200) -> BoundReport:
    """Moments of the decoupled and undecoupled chaos built from one tensor, side by side."""
    if not (tensor.symmetric and tensor.zero_diagonal):
        raise ValueError("the tensor must be symmetric with zero diagonal")
    dec = ChaosSpec.iid([tensor], generator, decoupled=True)
    und = ChaosSpec.iid([tensor], generator, decoupled=False)
    ps = [float(p) for p in p_grid]
    rademacher = generator.kind == "rademacher"
    if exact is None:
        exact = rademacher and tensor.n * tensor.d <= ENUMERATION_CAP
    stream = as_stream(stream)
    if exact:
        m_dec = exact_chaos_moments(dec, ps)
        m_und = exact_chaos_moments(und, ps)
        se_dec = se_und = [0.0] * len(ps)
        n_used = 0
        seeds = []
    else:
        zd = chaos_samples(dec, n_samples, stream.split(0))
        zu = chaos_samples(und, n_samples, stream.split(1))
        ed = empirical_moments(zd, ps, stream=stream.split(2), n_resamples=n_resamples)
        eu = empirical_moments(zu, ps, stream=stream.split(3), n_resamples=n_resamples)
        m_dec, se_dec = [e.value for e in ed], [e.std_error for e in ed]
        m_und, se_und = [e.value for e in eu], [e.std_error for e in eu]
        n_used = n_samples
        seeds = [stream.label]
    return BoundReport(
        quantity="||Z_decoupled||_p",
        grid_name="p",
        grid=ps,
        empirical=list(m_dec),
        std_error=list(se_dec),
        bound_upper=list(m_und),
        verdicts=None,
        seeds=seeds,
        n_samples=n_used,
        notes=["report only: the equivalence constant is not explicit",
               "bound_upper holds the undecoupled moment; ratio_upper = decoupled / undecoupled"],
        columns={"undecoupled_std_error": list(se_und)},
        column_docs={"bound_upper": "moment of the undecoupled chaos",
                     "ratio_upper": "decoupled / undecoupled moment",
                     "undecoupled_std_error": "standard error of the undecoupled moment"},
    )


def exp_integrability(spec: ChaosSpec, alpha_grid: Sequence[float], n_samples: int = 200_000,
                      stream: RandomStream | int | None = None, exact: bool | None = None,
                      n_resamples: int = 200) -> dict:
    """E exp(alpha Z^(2/d)) per alpha, computed in log space.

    Returns a dict of lists: alpha, value, std_error, log_value, overflow.
    """
    alphas = [float(a) for a in alpha_grid]
    if exact is None:
        signs = spec.n * spec.d if spec.decoupled else spec.n
        exact = spec.is_rademacher and signs <= ENUMERATION_CAP
    if exact:
        dist = brute_force_enumerate(spec)
        z, w = dist.support, dist.probs
    else:
        z = chaos_samples(spec, n_samples, stream)
        w = None
    g = np.abs(z) ** (2.0 / spec.d)
    out = {"alpha": alphas, "value": [], "std_error": [], "log_value": [], "overflow": []}
    for j, a in enumerate(alphas):
        if exact:
            log_v = float(logsumexp(a * g, b=w))
            se = 0.0
        else:
            log_v = float(logsumexp(a * g) - math.log(g.size))
            # SE of the mean computed relative to the largest term, then rescaled
            top = float(np.max(a * g))
            rel = np.exp(a * g - top)
            se_rel = float(np.std(rel, ddof=1) / math.sqrt(g.size))
            se = se_rel * math.exp(top) if top < 700 else math.inf
        overflow = log_v > 700
        out["log_value"].append(log_v)
        out["value"].append(math.inf if overflow else math.exp(log_v))
        out["std_error"].append(se if not overflow else math.inf)
        out["overflow"].append(bool(overflow))
    return out
