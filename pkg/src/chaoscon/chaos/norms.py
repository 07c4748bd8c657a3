"""The quantities ||T||_I and ||T||_{N,I,p}, the function phi and the bound shapes.

Factors are numbered 0..d-1.  For a subset I the factors outside I are
drawn at random (or enumerated, for sign generators) and the factors in I
are optimized over their balls.  Every sweep over a grid of levels p reuses
one set of outer draws, and the per-draw optima are cross-seeded between
neighbouring levels so that the estimates are monotone in p and satisfy
the sqrt-scaling between levels draw by draw.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from chaoscon.chaos.ascent import sup_over_balls_batch
from chaoscon.chaos.constraints import BallConstraint, TailFunctionN
from chaoscon.chaos.tensors import ChaosSpec, contract_axes, sample_chaos_inputs, sign_patterns
from chaoscon.rng import RandomStream, as_stream

__all__ = [
    "EXACT_OUTER_CAP",
    "NormEstimate",
    "all_subsets",
    "default_n_funcs",
    "moment_bound_euclidean",
    "moment_bound_logconcave",
    "norm_T_I",
    "norm_T_N_I_p",
    "norm_T_N_I_p_grid",
    "phi_curve",
    "phi_of_t",
]

EXACT_OUTER_CAP = 12  # outer sign count enumerated under outer="auto"
EXACT_OUTER_MAX = 20
_MAX_PASSES = 12


@dataclass
class NormEstimate:
    value: float
    std_error: float
    subset: tuple
    level: float | None
    n_outer: int
    outer: str
    n_flagged: int = 0
    per_draw: np.ndarray = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "subset": list(self.subset),
            "level": self.level,
            "n_outer": self.n_outer,
            "outer": self.outer,
            "n_flagged": self.n_flagged,
        }


def all_subsets(d: int, include_empty: bool = True) -> list[tuple]:
    out = []
    for r in range(0 if include_empty else 1, d + 1):
        out.extend(itertools.combinations(range(d), r))
    return out


def _check_subset(spec: ChaosSpec, subset) -> tuple:
    subset = tuple(sorted(set(int(k) for k in subset)))
    if any(k < 0 or k >= spec.d for k in subset):
        raise ValueError(f"subset {subset} has factors outside 0..{spec.d - 1}")
    return subset


def default_n_funcs(spec: ChaosSpec):
    """d x n matrix of N-functions; only sign generators have a canonical choice."""
    if spec.is_rademacher:
        f = TailFunctionN.rademacher()
        return [[f] * spec.n for _ in range(spec.d)]
    raise ValueError("N-functions must be supplied for generators other than Rademacher")


def _n_matrix(spec: ChaosSpec, n_funcs):
    if n_funcs is None:
        return default_n_funcs(spec)
    if isinstance(n_funcs, TailFunctionN):
        return [[n_funcs] * spec.n for _ in range(spec.d)]
    rows = [list(r) if not isinstance(r, TailFunctionN) else [r] * spec.n for r in n_funcs]
    if len(rows) == 1 and spec.d > 1:
        rows = rows * spec.d
    if len(rows) != spec.d or any(len(r) != spec.n for r in rows):
        raise ValueError(f"N-functions must form a {spec.d} x {spec.n} matrix")
    return rows


def _outer_draws(spec: ChaosSpec, subset, n_outer, stream, outer):
    """(x, weights, mode); x has shape (N, d, n), rows in ``subset`` unused."""
    outer_rows = [k for k in range(spec.d) if k not in subset]
    if not outer_rows:
        return np.zeros((1, spec.d, spec.n)), np.ones(1), "none"
    signs = len(outer_rows) * spec.n if spec.decoupled else spec.n
    rademacher = spec.is_rademacher
    if outer == "auto":
        outer = "exact" if rademacher and signs <= EXACT_OUTER_CAP else "mc"
    if outer == "exact":
        if not rademacher:
            raise ValueError("exact outer enumeration needs Rademacher generators")
        if signs > EXACT_OUTER_MAX:
            raise ValueError(f"exact outer enumeration over {signs} signs exceeds the cap of {EXACT_OUTER_MAX}")
        pats = np.concatenate(list(sign_patterns(signs)), axis=0)
        x = np.zeros((pats.shape[0], spec.d, spec.n))
        if spec.decoupled:
            for j, k in enumerate(outer_rows):
                x[:, k, :] = pats[:, j * spec.n:(j + 1) * spec.n]
        else:
            x[:, outer_rows, :] = pats[:, None, :]
        return x, np.full(pats.shape[0], 1.0 / pats.shape[0]), "exact"
    if outer != "mc":
        raise ValueError(f"unknown outer mode {outer!r}")
    if n_outer < 2:
        raise ValueError("Monte Carlo outer averaging needs at least 2 draws")
    x = sample_chaos_inputs(spec, n_outer, as_stream(stream).split(0))
    return x, np.full(n_outer, 1.0 / n_outer), "mc"


def _summarize(per_draw, weights, mode):
    value = float(np.dot(weights, per_draw))
    if mode == "mc":
        se = float(np.std(per_draw, ddof=1) / math.sqrt(per_draw.size))
    else:
        se = 0.0
    return value, se


def _grid_per_draw(spec, subset, levels, builder, x, restarts, stream):
    """Per-draw sup over T for every level: array (L, N) and the flagged count."""
    L, N = len(levels), x.shape[0]
    outer_rows = [k for k in range(spec.d) if k not in subset]
    best = np.zeros((L, N))
    if not spec.family:
        return best, 0
    if not subset:
        v = np.zeros(N)
        for t in spec.family:
            v = np.maximum(v, np.abs(contract_axes(t.entries, x, outer_rows)))
        return np.broadcast_to(v, (L, N)).copy(), 0
    rstream = as_stream(stream).split(1)
    flagged = np.zeros(N, dtype=bool)
    mask = sum(1 << k for k in subset)
    for ti, t in enumerate(spec.family):
        forms = contract_axes(t.entries, x, outer_rows)
        vals = np.full((L, N), -np.inf)
        args: list = [None] * L
        cons = [[builder(k, lev) for k in subset] for lev in levels]
        for step in range(_MAX_PASSES):
            changed = False
            ascending = step % 2 == 0
            order = range(L) if ascending else range(L - 1, -1, -1)
            for j in order:
                warm = []
                if args[j] is not None:
                    warm.append(args[j])
                nb = j - 1 if ascending else j + 1
                if 0 <= nb < L and args[nb] is not None:
                    if ascending or levels[j] is None:
                        warm.append(args[nb])
                    else:
                        f = math.sqrt(levels[j] / levels[nb])
                        warm.append([a * f for a in args[nb]])
                n_random = restarts if step == 0 else 1
                v, arg, agree, _, _ = sup_over_balls_batch(
                    forms, cons[j], n_random, rstream.split(mask).split(ti).split(j), warm)
                if step == 0 and len(subset) > 1:
                    flagged |= agree < 2
                better = v > vals[j] + 1e-12 * np.maximum(np.abs(vals[j]), 1.0) if args[j] is not None \
                    else np.ones(N, dtype=bool)
                if np.any(better):
                    changed = changed or args[j] is not None
                    vals[j] = np.where(better, v, vals[j])
                    args[j] = [np.where(better[:, None], a, old) if old is not None else a
                               for a, old in zip(arg, args[j] or [None] * len(arg))]
            if len(subset) == 1 or L == 1:
                break
            if step > 0 and not changed:
                break
        best = np.maximum(best, vals)
    return best, int(flagged.sum())


def _euclid_builder(spec):
    return lambda k, level: BallConstraint.euclidean(spec.n)


def _akp_builder(spec, n_funcs):
    rows = _n_matrix(spec, n_funcs)
    return lambda k, level: BallConstraint.a_k_p(rows[k], level)


def norm_T_I(spec: ChaosSpec, subset, n_outer: int = 2000, restarts: int = 20,
             stream: RandomStream | int | None = None, outer: str = "auto") -> NormEstimate:
    """||T||_I: expected sup over T and over unit vectors in the factors of I."""
    spec = spec.as_decoupled()
    subset = _check_subset(spec, subset)
    x, w, mode = _outer_draws(spec, subset, n_outer, stream, outer)
    per, flagged = _grid_per_draw(spec, subset, [None], _euclid_builder(spec), x, restarts, stream)
    value, se = _summarize(per[0], w, mode)
    return NormEstimate(value, se, subset, None, x.shape[0], mode, flagged, per[0], w)


def norm_T_N_I_p_grid(spec: ChaosSpec, subset, p_grid: Sequence[float], n_funcs=None, n_outer: int = 2000,
                      restarts: int = 20, stream: RandomStream | int | None = None,
                      outer: str = "auto") -> list[NormEstimate]:
    """||T||_{N,I,p} along a grid of levels, all on one set of outer draws."""
    spec = spec.as_decoupled()
    subset = _check_subset(spec, subset)
    levels = [float(p) for p in p_grid]
    if any(p < 1 for p in levels):
        raise ValueError("levels p must be >= 1")
    order = np.argsort(levels, kind="stable")
    sorted_levels = [levels[i] for i in order]
    x, w, mode = _outer_draws(spec, subset, n_outer, stream, outer)
    per, flagged = _grid_per_draw(spec, subset, sorted_levels, _akp_builder(spec, n_funcs), x, restarts, stream)
    out: list = [None] * len(levels)
    for j, i in enumerate(order):
        value, se = _summarize(per[j], w, mode)
        out[i] = NormEstimate(value, se, subset, sorted_levels[j], x.shape[0], mode, flagged, per[j], w)
    return out


def norm_T_N_I_p(spec: ChaosSpec, subset, p: float, n_funcs=None, n_outer: int = 2000, restarts: int = 20,
                 stream: RandomStream | int | None = None, outer: str = "auto") -> NormEstimate:
    """||T||_{N,I,p}: as ||T||_I with the unit balls replaced by A_{k,p}."""
    return norm_T_N_I_p_grid(spec, subset, [p], n_funcs, n_outer, restarts, stream, outer)[0]


def _combine(parts: list) -> tuple[float, float]:
    """Sum of estimates; draws shared between Monte Carlo parts are summed per draw."""
    value = sum(e.value for e in parts)
    mc = [e for e in parts if e.outer == "mc"]
    if not mc:
        return value, 0.0
    sizes = {e.per_draw.size for e in mc}
    if len(sizes) == 1:
        total = np.sum([e.per_draw for e in mc], axis=0)
        return value, float(np.std(total, ddof=1) / math.sqrt(total.size))
    return value, float(math.sqrt(sum(e.std_error ** 2 for e in mc)))


def phi_curve(spec: ChaosSpec, t_grid: Sequence[float], n_funcs=None, n_outer: int = 2000, restarts: int = 20,
              stream: RandomStream | int | None = None, outer: str = "auto") -> list[tuple[float, float]]:
    """phi(t) = sum over all subsets I of ||T||_{N,I,t}, as (value, std_error) per t.

    For Rademacher and gaussian_like N each A_t grows like sqrt(t), so
    phi(xt) <= t^{d/2} phi(x).  Exponential N grows A_t linearly far out,
    and that inequality can then fail.
    """
    spec = spec.as_decoupled()
    per_subset = [norm_T_N_I_p_grid(spec, I, t_grid, n_funcs, n_outer, restarts, stream, outer)
                  for I in all_subsets(spec.d)]
    return [_combine([row[j] for row in per_subset]) for j in range(len(t_grid))]


def phi_of_t(spec: ChaosSpec, t: float, n_funcs=None, n_outer: int = 2000, restarts: int = 20,
             stream: RandomStream | int | None = None, outer: str = "auto") -> tuple[float, float]:
    return phi_curve(spec, [t], n_funcs, n_outer, restarts, stream, outer)[0]


def _norm_lookup(norms: Mapping, subset):
    for key in (tuple(subset), frozenset(subset), ",".join(map(str, subset))):
        if key in norms:
            v = norms[key]
            return float(v.value if isinstance(v, NormEstimate) else v)
    raise KeyError(subset)


def moment_bound_euclidean(norms: Mapping, p: float, d: int) -> float:
    """sum over nonempty I of p^{|I|/2} ||T||_I; the constant K_d is left out."""
    total = 0.0
    for I in all_subsets(d, include_empty=False):
        try:
            v = _norm_lookup(norms, I)
        except KeyError:
            raise ValueError(f"no value supplied for subset {I}") from None
        total += p ** (len(I) / 2.0) * v
    return total


def moment_bound_logconcave(norms: Mapping, d: int) -> tuple[float, float]:
    """(lower, upper) shapes, both equal to sum over all I of ||T||_{N,I,p} at one level p."""
    total = 0.0
    for I in all_subsets(d, include_empty=True):
        try:
            total += _norm_lookup(norms, I)
        except KeyError:
            raise ValueError(f"no value supplied for subset {I}") from None
    return total, total
