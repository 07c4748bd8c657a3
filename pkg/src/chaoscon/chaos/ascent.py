"""Block-coordinate ascent for suprema of multilinear forms over products of balls."""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from chaoscon.chaos.constraints import BallConstraint, solve_ball_argmax
from chaoscon.rng import as_stream

__all__ = ["AscentResult", "sup_over_balls", "sup_over_balls_batch"]

MAX_SWEEPS = 500
REL_TOL = 1e-10
AGREE_TOL = 1e-6


@dataclass
class AscentResult:
    value: float
    argmax: list
    sweeps: int
    n_agree: int
    restarts: int
    exact: bool
    flagged: bool
    restart_values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))


def _contract_except(forms: np.ndarray, points: list, skip: int) -> np.ndarray:
    """Contract batched forms (B, n_0, ..., n_{m-1}) with every block but ``skip``."""
    m = forms.ndim - 1
    letters = string.ascii_lowercase[:m]
    operands = [forms]
    subs = ["z" + letters]
    for k in range(m):
        if k != skip:
            operands.append(points[k])
            subs.append("z" + letters[k])
    return np.einsum(",".join(subs) + "->z" + letters[skip], *operands, optimize=True)


def _evaluate(forms, points):
    out = _contract_except(forms, points, forms.ndim - 2)
    return np.einsum("zi,zi->z", out, points[-1])


def _initial_points(forms, constraints, restarts, stream, warm_starts):
    """Leading-singular-vector start, then warm starts, then restarts - 1 random ones."""
    B = forms.shape[0]
    m = forms.ndim - 1
    rng = stream.generator()
    top = []
    for k in range(m):
        unfold = np.moveaxis(forms, k + 1, 1).reshape(B, forms.shape[k + 1], -1)
        u, _, _ = np.linalg.svd(unfold, full_matrices=False)
        top.append(u[:, :, 0])
    raw = [top]
    raw += [[np.broadcast_to(np.asarray(w[k], dtype=float), (B, forms.shape[k + 1])) for k in range(m)]
            for w in warm_starts]
    raw += [[rng.standard_normal((B, forms.shape[k + 1])) for k in range(m)] for _ in range(max(restarts, 1) - 1)]
    starts = []
    for j, pts in enumerate(raw):
        warm = 1 <= j <= len(warm_starts)
        feas = []
        for k in range(m):
            v = np.array(pts[k], dtype=float)
            if not (warm and np.all(constraints[k].contains(v))):
                v = np.asarray(solve_ball_argmax(v, constraints[k]).argmax).reshape(v.shape)
            feas.append(v)
        starts.append(feas)
    return starts


def sup_over_balls_batch(forms, constraints: Sequence[BallConstraint], restarts: int = 20, stream=None,
                         warm_starts=(), max_sweeps: int = MAX_SWEEPS):
    """Batched version of :func:`sup_over_balls`; ``forms`` has a leading batch axis.

    Returns (values, argmax points per block, n_agree, exact flags, sweeps).
    """
    forms = np.asarray(forms, dtype=float)
    B = forms.shape[0]
    m = forms.ndim - 1
    if m < 1:
        raise ValueError("need at least one block")
    if len(constraints) != m:
        raise ValueError(f"{m} blocks but {len(constraints)} constraints")
    for k in range(m):
        if constraints[k].n != forms.shape[k + 1]:
            raise ValueError(f"block {k}: side {forms.shape[k + 1]} vs constraint on R^{constraints[k].n}")
    if m == 1:
        sol = solve_ball_argmax(forms, constraints[0])
        return (np.asarray(sol.value), [np.asarray(sol.argmax)], np.ones(B, dtype=int),
                np.asarray(sol.exact), 0)

    stream = as_stream(stream)
    starts = _initial_points(forms, constraints, restarts, stream, warm_starts)
    R = len(starts)
    # stack restarts along the batch axis: index r*B + b
    big = np.concatenate([forms] * R, axis=0)
    points = [np.concatenate([s[k] for s in starts], axis=0) for k in range(m)]
    value = _evaluate(big, points)
    active = np.ones(big.shape[0], dtype=bool)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        before = value.copy()
        idx = np.nonzero(active)[0]
        sub_pts = [p[idx] for p in points]
        sub_forms = big[idx]
        sub_val = value[idx]
        for k in range(m):
            lin = _contract_except(sub_forms, sub_pts, k)
            sol = solve_ball_argmax(lin, constraints[k])
            better = sol.value >= sub_val
            sub_pts[k] = np.where(better[:, None], sol.argmax, sub_pts[k])
            sub_val = np.where(better, sol.value, sub_val)
        for k in range(m):
            points[k][idx] = sub_pts[k]
        value[idx] = sub_val
        if np.any(value < before - REL_TOL * np.maximum(np.abs(before), 1e-300)):
            raise AssertionError("block ascent decreased its objective")
        change = (value - before) / np.maximum(np.abs(value), 1e-300)
        active &= change >= REL_TOL
        if not np.any(active):
            break

    per = value.reshape(R, B)
    best_r = np.argmax(per, axis=0)
    best = per[best_r, np.arange(B)]
    agree = np.sum(per >= best - AGREE_TOL * np.maximum(np.abs(best), 1e-300), axis=0)
    arg = [points[k].reshape(R, B, -1)[best_r, np.arange(B)] for k in range(m)]
    return best, arg, agree, np.zeros(B, dtype=bool), sweeps


def sup_over_balls(form, constraints: Sequence[BallConstraint], restarts: int = 20, stream=None,
                   warm_starts=()) -> AscentResult:
    """sup of |form(alpha_1, ..., alpha_m)| with alpha_k ranging over constraints[k].

    A single block is solved exactly.  Otherwise block-coordinate ascent runs
    from the leading-singular-vector start plus random feasible starts; the
    result is flagged when fewer than two starts reach the best value.
    """
    form = np.asarray(form, dtype=float)
    if form.ndim == 1:
        sol = solve_ball_argmax(form, constraints[0])
        return AscentResult(float(sol.value), [sol.argmax], 0, 1, 1, bool(sol.exact), False,
                            np.array([sol.value]))
    vals, arg, agree, _, sweeps = sup_over_balls_batch(form[None], constraints, restarts, stream, warm_starts)
    n_starts = max(restarts, 1) + len(warm_starts)
    return AscentResult(
        value=float(vals[0]),
        argmax=[a[0] for a in arg],
        sweeps=sweeps,
        n_agree=int(agree[0]),
        restarts=n_starts,
        exact=False,
        flagged=bool(n_starts >= 2 and agree[0] < 2),
    )
