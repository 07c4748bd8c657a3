"""Ground-truth machinery shared by every verdict.

Exact finite distributions and their moments, the bootstrap, a fine-grid
maximizer used to certify the block-ascent optimizer, and the explicit
constant conversions between the tail form and the moment form of
concentration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .rng import RandomStream, as_stream

__all__ = [
    "ExactDistribution",
    "GridResult",
    "box_ball_linear_max",
    "multilinear_sup_oracle",
    "binomial_se",
    "bootstrap_ci",
    "exact_moment",
    "grid_polish_max",
    "moment_to_tail",
    "tail_to_moment",
    "weighted_moment",
]

PROB_TOL = 1e-12
GRID_MAX_DIM = 6
_MAX_MOVES = 40  # accepted moves per step size in the polish


@dataclass(frozen=True)
class ExactDistribution:
    """Finite law: sorted, duplicate-free support with matching probabilities."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if support.shape != probs.shape or support.ndim != 1:
            raise ValueError("support and probs must be 1-D arrays of equal length")
        if np.any(probs < 0):
            raise ValueError("negative probability")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        if support.size > 1 and np.any(np.diff(support) <= 0):
            raise ValueError("support must be sorted ascending without duplicates")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_values(cls, values, weights=None, decimals: int = 12) -> "ExactDistribution":
        """Collapse (value, weight) pairs; values equal after rounding merge."""
        values = np.asarray(values, dtype=float).ravel()
        if weights is None:
            weights = np.full(values.size, 1.0 / values.size)
        weights = np.asarray(weights, dtype=float).ravel()
        keys = np.round(values, decimals)
        keys[keys == 0] = 0.0  # fold -0.0
        support, inverse = np.unique(keys, return_inverse=True)
        probs = np.bincount(inverse, weights=weights, minlength=support.size)
        return cls(support, probs / probs.sum())

    @classmethod
    def point_mass(cls, value: float = 0.0) -> "ExactDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def upper_tail(self, x: float, strict: bool = False) -> float:
        mask = self.support > x if strict else self.support >= x
        return float(self.probs[mask].sum())

    def map(self, fn) -> "ExactDistribution":
        return ExactDistribution.from_values(fn(self.support), self.probs)

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ExactDistribution":
        return cls(np.asarray(data["support"]), np.asarray(data["probs"]))


def weighted_moment(values, weights, p: float, centered: bool) -> float:
    """(sum_j w_j |v_j - c|^p)^(1/p) with c the weighted mean if centered.

    Powers are taken after dividing by the largest deviation, so no
    intermediate overflows for large p.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    dev = values - np.dot(weights, values) if centered else values
    dev = np.abs(dev)
    top = dev.max(initial=0.0)
    if top == 0.0:
        return 0.0
    scaled = np.dot(weights, (dev / top) ** p)
    return float(top * scaled ** (1.0 / p))


def exact_moment(dist: ExactDistribution, p: float, centered: bool = False) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    return weighted_moment(dist.support, dist.probs, p, centered)


def binomial_se(p_hat, n: int):
    p_hat = np.asarray(p_hat, dtype=float)
    return np.sqrt(np.clip(p_hat * (1.0 - p_hat), 0.0, None) / n)


def bootstrap_ci(
    samples,
    statistic: Callable[[np.ndarray, np.ndarray], float],
    n_resamples: int = 500,
    stream: RandomStream | int | None = None,
) -> tuple[float, float]:
    """Plug-in estimate and bootstrap standard error of ``statistic``.

    ``statistic(values, weights)`` receives the data and probability weights
    summing to one; a resample is represented by its multiplicity weights.
    One-dimensional samples with few distinct values are compressed first,
    which leaves the bootstrap law unchanged and makes 10^6-sample runs cheap.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n == 0:
        raise ValueError("bootstrap needs at least one sample")
    rng = as_stream(stream).generator()

    def finish(estimate, boot):
        estimate = np.asarray(estimate, dtype=float)
        se = np.asarray(boot, dtype=float).std(axis=0, ddof=1) if n_resamples > 1 else np.zeros_like(estimate)
        if estimate.ndim == 0:
            return float(estimate), float(se)
        return estimate, se

    if samples.ndim == 1:
        uniq, counts = np.unique(samples, return_counts=True)
        if uniq.size <= max(64, n // 8):
            freq = counts / n
            draws = rng.multinomial(n, freq, size=n_resamples) / n
            return finish(statistic(uniq, freq), [statistic(uniq, w) for w in draws])

    boot = []
    for _ in range(n_resamples):
        w = np.bincount(rng.integers(0, n, n), minlength=n) / n
        boot.append(statistic(samples, w))
    return finish(statistic(samples, np.full(n, 1.0 / n)), boot)


@dataclass
class GridResult:
    value: float
    argmax: np.ndarray
    resolution: float
    grid_value: float
    n_feasible: int
    resolution_bound: float = math.inf
    history: list = field(default_factory=list)


def _retract_rows(trials, coords, blocks, member, radial=None):
    """Radially shrink, row by row, the block holding coords[r] until the row is feasible.

    ``radial(b, segs)`` may give the largest feasible scale of each segment
    of block b in closed form; otherwise the scale is found by bisection.
    """
    ok = np.asarray(member(trials), dtype=bool)
    if np.all(ok):
        return trials
    trials = trials.copy()
    bad = np.nonzero(~ok)[0]
    block_of = [next(i for i, (lo, hi) in enumerate(blocks) if lo <= coords[r] < hi) for r in bad]
    if radial is not None:
        for r, b in zip(bad, block_of):
            lo, hi = blocks[b]
            seg = trials[r, lo:hi]
            trials[r, lo:hi] = seg * min(1.0, float(radial(b, seg[None, :])[0]))
        return trials
    spans = [blocks[b] for b in block_of]
    lo_r = np.zeros(bad.size)
    hi_r = np.ones(bad.size)
    base = trials[bad].copy()
    mask = np.zeros_like(base)
    for i, (lo, hi) in enumerate(spans):
        mask[i, lo:hi] = 1.0
    for _ in range(50):
        mid = 0.5 * (lo_r + hi_r)
        cand = base * (1.0 - mask) + base * mask * mid[:, None]
        good = np.asarray(member(cand), dtype=bool)
        lo_r = np.where(good, mid, lo_r)
        hi_r = np.where(good, hi_r, mid)
    trials[bad] = base * (1.0 - mask) + base * mask * lo_r[:, None]
    return trials


def _extend_rows(trials, coords, blocks, radial):
    """Push the block touched by each row out to the boundary along its ray.

    Without this, a pattern search on a ball stalls wherever every inward
    move loses norm and every outward move is retracted.
    """
    out = trials.copy()
    block_of = np.array([next(i for i, (lo, hi) in enumerate(blocks) if lo <= c < hi) for c in coords])
    for b, (lo, hi) in enumerate(blocks):
        rows = np.nonzero(block_of == b)[0]
        scale = np.asarray(radial(b, out[rows, lo:hi]), dtype=float)
        scale = np.where(np.isfinite(scale), scale, 1.0)
        out[rows, lo:hi] *= scale[:, None]
    return out


def grid_polish_max(
    objective: Callable[[np.ndarray], np.ndarray],
    dim: int,
    member: Callable[[np.ndarray], np.ndarray],
    resolution: float = 0.05,
    polish_steps: int = 30,
    blocks: Sequence[tuple[int, int]] | None = None,
    lipschitz: float = math.inf,
    max_points: int = 250_000,
    n_starts: int = 4,
    radial: Callable[[int, np.ndarray], np.ndarray] | None = None,
) -> GridResult:
    """Brute-force lower-bound certificate for ``sup objective`` on a set in [-1,1]^dim.

    ``objective`` and ``member`` are vectorized over rows of an (M, dim)
    array.  The set must be star-shaped about 0 blockwise (every feasible set
    used here is).  The best grid points are then polished by a coordinate
    pattern search whose infeasible trial points are radially retracted into
    the block they touch.  Every reported value is attained at a point that
    passes ``member``, so it never exceeds the supremum over that set.
    """
    if dim > GRID_MAX_DIM:
        raise ValueError(f"grid oracle is capped at dimension {GRID_MAX_DIM}, got {dim}")
    if dim == 0:
        val = float(np.asarray(objective(np.zeros((1, 0))))[0])
        return GridResult(val, np.zeros(0), 0.0, val, 1, 0.0)

    per_axis = int(round(2.0 / resolution)) + 1
    per_axis = max(3, min(per_axis, int(max_points ** (1.0 / dim))))
    if per_axis % 2 == 0:
        per_axis -= 1  # keep 0 on the grid
    h = 2.0 / (per_axis - 1)
    axis = np.linspace(-1.0, 1.0, per_axis)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    feasible = mesh[np.asarray(member(mesh), dtype=bool)]
    vals = np.asarray(objective(feasible), dtype=float)
    order = np.argsort(-vals, kind="stable")
    grid_value = float(vals[order[0]])
    if blocks is None:
        blocks = [(0, dim)]

    coords = np.repeat(np.arange(dim), 2)
    signs = np.tile([1.0, -1.0], dim)
    best_val, best_x = grid_value, feasible[order[0]].copy()
    for start in order[:n_starts]:
        x = feasible[start].copy()
        fx = float(vals[start])
        step = h
        for _ in range(polish_steps):
            for _ in range(_MAX_MOVES):
                trials = np.repeat(x[None, :], 2 * dim, axis=0)
                trials[np.arange(2 * dim), coords] += signs * step
                trials = _retract_rows(trials, coords, blocks, member, radial)
                if radial is not None:
                    trials = np.vstack([trials, _extend_rows(trials, coords, blocks, radial)])
                ft = np.asarray(objective(trials), dtype=float)
                j = int(np.argmax(ft))
                if ft[j] > fx + 1e-13 * max(1.0, abs(fx)):
                    x, fx = trials[j], float(ft[j])
                else:
                    break
            step *= 0.5
        if fx > best_val:
            best_val, best_x = fx, x
    return GridResult(
        value=best_val,
        argmax=best_x,
        resolution=h,
        grid_value=grid_value,
        n_feasible=int(feasible.shape[0]),
        resolution_bound=lipschitz * h * math.sqrt(dim),
    )


def tail_to_moment(c_tail: float, k_tail: float, alpha: float, p_max: float = 1e6) -> float:
    """K'' with ||xi - E xi||_p <= K'' p^(1/alpha) for all p >= 1.

    Integrates P(|xi - E xi| >= t) <= C' exp(-t^alpha / K'), which gives
    E|xi - E xi|^p <= C' K'^(p/alpha) Gamma(p/alpha + 1), then takes the
    supremum over p of the resulting ratio to p^(1/alpha).
    """
    if alpha <= 0 or c_tail <= 0:
        raise ValueError("alpha and C' must be positive")
    if k_tail == 0:
        return 0.0
    p = np.geomspace(1.0, p_max, 4000)
    log_ratio = (math.log(c_tail) + gammaln(p / alpha + 1.0)) / p - np.log(p) / alpha
    limit = -(1.0 + math.log(alpha)) / alpha  # p -> infinity, Stirling
    return float(np.exp(max(log_ratio.max(), limit)) * k_tail ** (1.0 / alpha))


def moment_to_tail(k_moment: float, alpha: float) -> tuple[float, float]:
    """(C', K') with P(|xi - E xi| >= t) <= C' exp(-t^alpha / K') for all t >= 0.

    Chebyshev at order p = (t / (e K''))^alpha gives exp(-(t / (e K''))^alpha)
    for t >= e K''; below that, C' = e keeps the bound above 1.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if k_moment < 0:
        raise ValueError("K'' must be nonnegative")
    return math.e, (math.e * k_moment) ** alpha


def tail_bound(c_tail: float, k_tail: float, alpha: float, t):
    t = np.asarray(t, dtype=float)
    if k_tail == 0:
        return np.where(t > 0, 0.0, min(1.0, c_tail))
    return c_tail * np.exp(-np.abs(t) ** alpha / k_tail)


def box_ball_linear_max(c, p: float) -> np.ndarray:
    """sup of <c, a> over {sum a^2 <= p, |a_i| <= 1}, by trying every saturated set.

    At an optimum some set S of coordinates sits at |a_i| = 1 and the rest
    are proportional to c; each S gives one candidate, kept when it is
    feasible.  Exponential in n, which is the point: it shares nothing with
    the water-filling solver.  Rows of a 2-D ``c`` are independent.
    """
    c = np.abs(np.atleast_2d(np.asarray(c, dtype=float)))
    top = np.max(c, axis=1, keepdims=True, initial=0.0)
    c = c / np.where(top > 0, top, 1.0)  # homogeneous; keeps squares representable
    n = c.shape[1]
    sat = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(bool)  # (S, n)
    k = sat.sum(axis=1)
    sat, k = sat[k <= p], k[k <= p]
    free = ~sat
    free_sq = (c * c) @ free.T  # (rows, S)
    sat_sum = c @ sat.T
    largest_free = np.max(np.where(free[None, :, :], c[:, None, :], 0.0), axis=2)
    # free part a = c sqrt((p-k)/|c_free|^2) must stay in the box
    ok = largest_free**2 * (p - k) <= free_sq
    val = sat_sum + np.sqrt((p - k) * free_sq)
    return np.max(np.where(ok, val, 0.0), axis=1) * top[:, 0]


def multilinear_sup_oracle(form, kinds: Sequence[str], p: float = 1.0, resolution: float = 0.05,
                           max_points: int = 250_000) -> GridResult:
    """Grid certificate for sup |form(a_1, ..., a_m)| over a product of balls.

    ``kinds[b]`` is ``"euclidean"`` (unit ball) or ``"box_ball"``
    ({sum a^2 <= p, |a_i| <= 1}).  Blocks 1..m-1 are gridded; the last
    block is eliminated exactly (Euclidean norm, or :func:`box_ball_linear_max`).
    """
    form = np.asarray(form, dtype=float)
    m = form.ndim
    n = form.shape
    if len(kinds) != m:
        raise ValueError("one kind per block")

    def last(c):
        return np.linalg.norm(c, axis=1) if kinds[-1] == "euclidean" else box_ball_linear_max(c, p)

    if m == 1:
        v = float(last(form[None, :])[0])
        return GridResult(v, np.zeros(0), 0.0, v, 1, 0.0)
    bounds = []
    lo = 0
    for b in range(m - 1):
        bounds.append((lo, lo + n[b]))
        lo += n[b]
    dim = lo

    def contract(x):
        out = np.broadcast_to(form, (x.shape[0],) + form.shape)
        for b, (s, e) in enumerate(bounds):
            out = np.einsum("ri...,ri->r...", out, x[:, s:e])
        return out

    def objective(x):
        return last(contract(x))

    def in_block(b, seg):
        seg = np.atleast_2d(seg)
        sq = np.sum(seg * seg, axis=1)
        if kinds[b] == "euclidean":
            return sq <= 1.0
        return (sq <= p) & np.all(np.abs(seg) <= 1.0, axis=1)

    def member(x):
        ok = np.ones(x.shape[0], dtype=bool)
        for b, (s, e) in enumerate(bounds):
            ok &= in_block(b, x[:, s:e])
        return ok

    def radial(b, seg):
        norm = np.linalg.norm(seg, axis=1)
        with np.errstate(divide="ignore"):
            scale = np.where(norm > 0, 1.0 / norm, np.inf)
            if kinds[b] != "euclidean":
                scale = np.minimum(scale * math.sqrt(p), 1.0 / np.max(np.abs(seg), axis=1))
        # step just inside, so rounding never leaves the set
        return scale * (1.0 - 1e-15)

    radius = [1.0 if k == "euclidean" else math.sqrt(min(p, nb)) for k, nb in zip(kinds, n)]
    lip = float(np.linalg.norm(form)) * float(np.prod(radius)) / min(radius[:-1]) * math.sqrt(m - 1)
    return grid_polish_max(objective, dim, member, resolution, blocks=bounds, lipschitz=lip,
                           max_points=max_points, radial=radial)
