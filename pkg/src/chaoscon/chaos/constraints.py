"""Feasible sets for the inner suprema and exact linear maximization over them.

Two kinds of per-factor constraint appear: the closed Euclidean unit ball
and the body A_{k,p} = {alpha : sum_i Ntilde_i(alpha_i) <= p}, where
Ntilde(t) = t^2 on [-1, 1] and N(|t|) outside, N being the (normalized)
log-tail function of the generating variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["BallConstraint", "BallSolution", "TailFunctionN", "solve_ball_argmax"]

MEMBERSHIP_RTOL = 1e-12
_BISECTION_STEPS = 200


@dataclass(frozen=True, eq=False)
class TailFunctionN:
    """N(t) = -log P(|X| >= t) for a symmetric variable with log-concave tails.

    ``rademacher``: 0 up to 1, infinite beyond.  ``exponential``: N(t) = t.
    ``gaussian_like``: N(t) = t^2.  ``tabulated``: piecewise linear through
    (knots, values), starting at (0, 0) and extended linearly past the last
    knot.
    """

    kind: str
    knots: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("rademacher", "exponential", "gaussian_like", "tabulated"):
            raise ValueError(f"unknown N kind {self.kind!r}")
        if self.kind == "tabulated":
            t = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2:
                raise ValueError("tabulated N needs matching knot and value lists (>= 2 points)")
            if t[0] != 0 or v[0] != 0:
                raise ValueError("tabulated N must start at (0, 0)")
            if np.any(np.diff(t) <= 0):
                raise ValueError("knots must increase strictly")
            slopes = np.diff(v) / np.diff(t)
            if np.any(slopes < 0):
                raise ValueError("N must be nondecreasing")
            if np.any(np.diff(slopes) < -1e-12):
                raise ValueError("N must be convex")
            object.__setattr__(self, "knots", tuple(t.tolist()))
            object.__setattr__(self, "values", tuple(v.tolist()))
            level = self.normalization_level()
            if abs(level - 1.0) > 1e-9:
                raise ValueError(f"N is not normalized: inf{{t : N(t) >= 1}} = {level:.12g}")
            if self.values[-1] <= self.values[-2]:
                raise ValueError("tabulated N must increase past its last knot")

    @classmethod
    def exponential(cls) -> "TailFunctionN":
        return cls("exponential")

    @classmethod
    def rademacher(cls) -> "TailFunctionN":
        return cls("rademacher")

    @classmethod
    def gaussian_like(cls) -> "TailFunctionN":
        return cls("gaussian_like")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "tabulated":
            out.update(knots=list(self.knots), values=list(self.values))
        return out

    @classmethod
    def from_dict(cls, data) -> "TailFunctionN":
        if isinstance(data, str):
            return cls(data)
        return cls(data["kind"], tuple(data.get("knots", ())), tuple(data.get("values", ())))

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        if self.kind == "rademacher":
            return np.where(t <= 1.0, 0.0, np.inf)
        if self.kind == "exponential":
            return t
        if self.kind == "gaussian_like":
            return t * t
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        last_slope = (v[-1] - v[-2]) / (k[-1] - k[-2])
        return np.where(t <= k[-1], np.interp(t, k, v), v[-1] + last_slope * (t - k[-1]))

    def tilde(self, t):
        """Ntilde(t): t^2 for |t| <= 1, N(|t|) otherwise."""
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(invalid="ignore"):
            return np.where(t <= 1.0, t * t, self(np.maximum(t, 1.0)))

    def normalization_level(self) -> float:
        """inf{t : N(t) >= 1}, located by bisection."""
        lo, hi = 0.0, 1.0
        while float(self(hi)) < 1.0:
            lo, hi = hi, 2.0 * hi
            if hi > 1e12:
                return math.inf
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(self(mid)) >= 1.0:
                hi = mid
            else:
                lo = mid
        return hi

    def tilde_inverse(self, b):
        """Largest s >= 0 with Ntilde(s) <= b."""
        b = np.maximum(np.asarray(b, dtype=float), 0.0)
        low = np.sqrt(np.minimum(b, 1.0))
        if self.kind == "rademacher":
            return low
        if self.kind == "exponential":
            high = b
        elif self.kind == "gaussian_like":
            high = np.sqrt(b)
        else:
            k = np.asarray(self.knots)
            v = np.asarray(self.values)
            last_slope = (v[-1] - v[-2]) / (k[-1] - k[-2])
            # first knot where the table passes level b, counting plateaus to their right end
            inside = np.interp(b, v, k, right=np.nan)
            plateau_end = np.array([k[v <= bb].max() if np.any(v <= bb) else 0.0 for bb in np.ravel(b)])
            inside = np.maximum(np.nan_to_num(inside, nan=0.0), plateau_end.reshape(np.shape(b)))
            beyond = k[-1] + (b - v[-1]) / last_slope
            high = np.where(b <= v[-1], inside, beyond)
        return np.where(b <= 1.0, low, np.maximum(high, 1.0))

    @property
    def tilde_convex(self) -> bool:
        """Whether Ntilde is convex, i.e. N has right slope >= 2 at t = 1."""
        if self.kind in ("rademacher", "gaussian_like"):
            return True
        if self.kind == "exponential":
            return False
        return float(self(1.0 + 1e-9) - self(1.0)) / 1e-9 >= 2.0 - 1e-6

    def best_response(self, a, lam, cap, piece: str = "both"):
        """argmax of a*s - lam*Ntilde(s) over s in [0, cap], for a >= 0.

        ``piece`` restricts s to [0, 1] ("low") or [1, cap] ("high").  Ties
        resolve to the smaller s.
        """
        a = np.asarray(a, dtype=float)
        lam = np.broadcast_to(np.asarray(lam, dtype=float), a.shape)
        cap = np.broadcast_to(np.asarray(cap, dtype=float), a.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            free = np.where(lam > 0, a / (2.0 * np.where(lam > 0, lam, 1.0)), np.inf)
        s_low = np.where(a > 0, np.minimum(free, np.minimum(cap, 1.0)), 0.0)
        if self.kind == "rademacher" or piece == "low":
            return s_low
        if self.kind == "exponential":
            s_up = np.where(a > lam, cap, 1.0)
        elif self.kind == "gaussian_like":
            s_up = np.clip(free, 1.0, cap)
        else:
            k = np.asarray(self.knots)
            cands = np.broadcast_to(np.concatenate([[1.0], k[k > 1.0]]), a.shape + (int(np.sum(k > 1.0)) + 1,))
            cands = np.concatenate([np.minimum(cands, cap[..., None]), cap[..., None]], axis=-1)
            vals = a[..., None] * cands - lam[..., None] * self.tilde(cands)
            s_up = np.take_along_axis(cands, np.argmax(vals, axis=-1)[..., None], axis=-1)[..., 0]
        s_up = np.maximum(s_up, 1.0)
        if piece == "high":
            return s_up
        val_low = a * s_low - lam * s_low * s_low
        val_up = a * s_up - lam * self.tilde(s_up)
        return np.where((cap > 1.0) & (val_up > val_low), s_up, s_low)


@dataclass(frozen=True, eq=False)
class BallConstraint:
    """Per-factor feasible set: ``euclidean_unit`` or ``a_k_p``."""

    kind: str
    n: int
    n_funcs: tuple = ()
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("euclidean_unit", "a_k_p"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "a_k_p":
            funcs = self.n_funcs
            if isinstance(funcs, TailFunctionN):
                funcs = (funcs,) * self.n
            funcs = tuple(funcs)
            if len(funcs) != self.n:
                raise ValueError(f"need {self.n} N-functions, got {len(funcs)}")
            if self.p < 1:
                raise ValueError("level p must be >= 1")
            object.__setattr__(self, "n_funcs", funcs)

    @classmethod
    def euclidean(cls, n: int) -> "BallConstraint":
        return cls("euclidean_unit", n)

    @classmethod
    def a_k_p(cls, n_funcs, p: float, n: int | None = None) -> "BallConstraint":
        if isinstance(n_funcs, TailFunctionN):
            if n is None:
                raise ValueError("n is required with a single N-function")
            return cls("a_k_p", n, n_funcs, float(p))
        return cls("a_k_p", len(n_funcs), tuple(n_funcs), float(p))

    def with_level(self, p: float) -> "BallConstraint":
        return self if self.kind == "euclidean_unit" else BallConstraint("a_k_p", self.n, self.n_funcs, float(p))

    def _groups(self):
        groups: dict[int, list[int]] = {}
        first: dict[int, TailFunctionN] = {}
        for i, f in enumerate(self.n_funcs):
            key = next((k for k, g in first.items() if g is f or (g.kind == f.kind and g.to_dict() == f.to_dict())), None)
            if key is None:
                key = len(first)
                first[key] = f
            groups.setdefault(key, []).append(i)
        return [(first[k], np.array(idx)) for k, idx in groups.items()]

    def budget(self, alpha) -> np.ndarray:
        """sum_i Ntilde_i(alpha_i) along the last axis."""
        alpha = np.asarray(alpha, dtype=float)
        total = np.zeros(alpha.shape[:-1])
        for f, idx in self._groups():
            total = total + f.tilde(alpha[..., idx]).sum(axis=-1)
        return total

    def contains(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        if self.kind == "euclidean_unit":
            return np.linalg.norm(alpha, axis=-1) <= 1.0 + MEMBERSHIP_RTOL
        return self.budget(alpha) <= self.p * (1.0 + MEMBERSHIP_RTOL)

    def to_dict(self) -> dict:
        if self.kind == "euclidean_unit":
            return {"kind": self.kind, "n": self.n}
        return {"kind": self.kind, "n": self.n, "p": self.p, "n_funcs": [f.to_dict() for f in self.n_funcs]}


@dataclass
class BallSolution:
    argmax: np.ndarray
    value: np.ndarray
    dual_bound: np.ndarray
    exact: np.ndarray


def _per_group(constraint, fn, *arrays):
    out = np.zeros(arrays[0].shape)
    for f, idx in constraint._groups():
        out[..., idx] = fn(f, *(a[..., idx] for a in arrays))
    return out


def solve_ball_argmax(c, constraint: BallConstraint) -> BallSolution:
    """Maximize <c, alpha> over the constraint set; rows of a 2-D ``c`` are independent.

    A_{k,p} is handled by dual bisection on the multiplier lam: each
    coordinate plays its best response to |c_i| s - lam Ntilde_i(s) and lam
    is bisected until the budget sum Ntilde_i = p is met (or the
    unconstrained box point is already feasible).  Any budget left at the
    end, which happens when a best response jumps, goes to the single
    coordinate that gains most from it.  ``dual_bound`` is the Lagrangian
    upper bound and ``exact`` marks rows where the two agree.
    """
    c = np.asarray(c, dtype=float)
    single = c.ndim == 1
    c2 = np.atleast_2d(c)
    if c2.shape[-1] != constraint.n:
        raise ValueError(f"vector of length {c2.shape[-1]} for a constraint on R^{constraint.n}")

    if constraint.kind == "euclidean_unit":
        norm = np.linalg.norm(c2, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            arg = np.where(norm[:, None] > 0, c2 / np.where(norm > 0, norm, 1.0)[:, None], 0.0)
        sol = BallSolution(arg, norm, norm.copy(), np.ones(norm.shape, dtype=bool))
    else:
        sol = _solve_akp(c2, constraint)
    if single:
        return BallSolution(sol.argmax[0], float(sol.value[0]), float(sol.dual_bound[0]), bool(sol.exact[0]))
    return sol


def _dual_solve(a, cons: BallConstraint, cap, pieces):
    """Lagrangian solve with per-coordinate piece restrictions ("both"/"low"/"high")."""
    p = cons.p
    rows, n = a.shape
    groups = [(f, idx) for f, idx in cons._groups()]

    def respond(lam):
        out = np.zeros(a.shape)
        lam_b = np.broadcast_to(np.asarray(lam, dtype=float)[:, None], a.shape)
        for f, idx in groups:
            for piece in ("both", "low", "high"):
                sel = idx[np.array([pieces[i] == piece for i in idx], dtype=bool)]
                if sel.size:
                    out[:, sel] = f.best_response(a[:, sel], lam_b[:, sel], cap[:, sel], piece)
        return out

    s = respond(np.zeros(rows))
    feasible0 = cons.budget(s) <= p
    lam_lo = np.zeros(rows)
    lam_hi = np.maximum(np.linalg.norm(a, axis=1) / (2.0 * math.sqrt(p)), a.max(axis=1, initial=0.0))
    lam_hi = np.where(lam_hi > 0, lam_hi, 1.0)
    for _ in range(200):
        over = cons.budget(respond(lam_hi)) > p
        if not np.any(over):
            break
        lam_hi = np.where(over, 2.0 * lam_hi, lam_hi)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lam_lo + lam_hi)
        over = cons.budget(respond(mid)) > p
        lam_lo = np.where(over, mid, lam_lo)
        lam_hi = np.where(over, lam_hi, mid)
        if np.all(lam_hi - lam_lo <= 1e-16 * np.maximum(lam_hi, 1e-300)):
            break
    lam = np.where(feasible0, 0.0, lam_hi)
    s = np.where(feasible0[:, None], s, respond(lam))
    dual = lam * p + np.sum(a * s, axis=1) - lam * cons.budget(s)

    # hand any unused budget to the coordinate that gains most from it
    leftover = np.maximum(p - cons.budget(s), 0.0)
    if np.any(leftover > 0):
        tilde_s = _per_group(cons, lambda f, x: f.tilde(x), s)
        grown = _per_group(
            cons, lambda f, ts, lo, cc: np.minimum(f.tilde_inverse(ts + lo), cc), tilde_s,
            np.broadcast_to(leftover[:, None], s.shape), cap,
        )
        low_only = np.array([pc == "low" for pc in pieces])
        grown[:, low_only] = np.minimum(grown[:, low_only], 1.0)
        gain = a * (grown - s)
        j = np.argmax(gain, axis=1)
        rows_idx = np.arange(rows)
        candidate = s.copy()
        candidate[rows_idx, j] = grown[rows_idx, j]
        ok = cons.contains(candidate) & (gain[rows_idx, j] > 0)
        s = np.where(ok[:, None], candidate, s)
    value = np.sum(a * s, axis=1)
    return s, value, np.maximum(dual, value)


def _closed(value, dual):
    return value >= dual - 1e-9 * np.maximum(1.0, np.abs(dual))


def _water_fill(a, p):
    """Closed form over {sum s^2 <= p, 0 <= s_i <= 1}: saturate the k largest, scale the rest."""
    rows, n = a.shape
    if p >= n:
        return np.where(a > 0, 1.0, 0.0)
    order = np.argsort(-a, axis=1, kind="stable")
    sa = np.take_along_axis(a, order, axis=1)
    tail_sq = np.cumsum((sa * sa)[:, ::-1], axis=1)[:, ::-1]
    s_sorted = np.zeros_like(a)
    done = np.zeros(rows, dtype=bool)
    for k in range(0, min(n, int(math.floor(p))) + 1):
        if k == n:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.sqrt(tail_sq[:, k] / (p - k))
        upper_ok = np.ones(rows, dtype=bool) if k == 0 else sa[:, k - 1] >= lam
        valid = ~done & upper_ok & (sa[:, k] <= lam) & (lam > 0)
        if np.any(valid):
            cand = np.zeros((int(valid.sum()), n))
            cand[:, :k] = 1.0
            cand[:, k:] = sa[valid, k:] / lam[valid, None]
            s_sorted[valid] = cand
            done |= valid
    zero = ~done & (sa[:, 0] == 0)
    done |= zero
    # numerical ties at a boundary: fall back on the nearest k
    if not np.all(done):
        for r in np.nonzero(~done)[0]:
            best, best_v = None, -1.0
            for k in range(0, min(n - 1, int(math.floor(p))) + 1):
                lam = math.sqrt(tail_sq[r, k] / (p - k)) if tail_sq[r, k] > 0 else 1.0
                cand = np.concatenate([np.ones(k), np.minimum(sa[r, k:] / lam, 1.0)])
                if np.sum(cand * cand) <= p * (1 + MEMBERSHIP_RTOL) and cand @ sa[r] > best_v:
                    best, best_v = cand, cand @ sa[r]
            s_sorted[r] = best
    out = np.empty_like(a)
    np.put_along_axis(out, order, s_sorted, axis=1)
    return out


def _exponential_fill(a, p):
    """Exact optimum when every coordinate has N(t) = t.

    Either all coordinates stay in [0, 1] (a water-fill), or exactly one
    coordinate j goes past 1.  In the latter case the multiplier equals a_j,
    which pins the others at min(1, a_i / 2a_j); if that overspends, s_j
    sticks at 1 and the rest water-fill the remaining p - 1.
    """
    rows, n = a.shape
    best = _water_fill(a, p)
    best_v = np.sum(a * best, axis=1)
    for j in range(n):
        others = np.delete(np.arange(n), j)
        aj = a[:, j]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            r = np.where(aj[:, None] > 0, np.minimum(1.0, a[:, others] / (2.0 * aj[:, None])), 0.0)
        used = 1.0 + np.sum(r * r, axis=1)
        cand = np.zeros_like(a)
        fits = used <= p
        cand[:, others] = r
        cand[:, j] = 1.0 + np.maximum(p - used, 0.0)
        if not np.all(fits) and others.size:
            rest = _water_fill(a[:, others], p - 1.0) if p > 1.0 else np.zeros((rows, others.size))
            cand[~fits] = 0.0
            cand[np.ix_(~fits, others)] = rest[~fits]
            cand[~fits, j] = 1.0
        v = np.sum(a * cand, axis=1)
        better = v > best_v
        best = np.where(better[:, None], cand, best)
        best_v = np.where(better, v, best_v)
    return best


def _solve_akp(c, cons: BallConstraint) -> BallSolution:
    a = np.abs(c)
    sign = np.where(c < 0, -1.0, 1.0)
    n = cons.n
    kinds = {f.kind for f in cons.n_funcs}
    if kinds == {"rademacher"}:
        s = _water_fill(a, cons.p)
        value = np.sum(a * s, axis=1)
        return BallSolution(sign * s, value, value.copy(), np.ones(value.shape, dtype=bool))
    if kinds == {"exponential"}:
        s = _exponential_fill(a, cons.p)
        value = np.sum(a * s, axis=1)
        return BallSolution(sign * s, value, value.copy(), np.ones(value.shape, dtype=bool))
    if kinds == {"gaussian_like"}:
        norm = np.linalg.norm(a, axis=1)
        r = math.sqrt(cons.p)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(norm[:, None] > 0, r * a / np.where(norm > 0, norm, 1.0)[:, None], 0.0)
        value = r * norm
        return BallSolution(sign * s, value, value.copy(), np.ones(value.shape, dtype=bool))
    cap = _per_group(cons, lambda f, x: np.broadcast_to(f.tilde_inverse(cons.p), x.shape), a)
    s, value, dual = _dual_solve(a, cons, cap, ["both"] * n)
    exact = _closed(value, dual)
    nonconvex = [i for i, f in enumerate(cons.n_funcs) if not f.tilde_convex]
    if nonconvex and not np.all(exact):
        # Ntilde fails to be convex only through its kink at 1.  Splitting each
        # such coordinate into its [0,1] and [1,cap] pieces gives convex
        # subproblems; with linear N (exponential kind) two coordinates above 1
        # can always be merged, so "at most one above 1" loses nothing.
        todo = ~exact
        sub = a[todo]
        sub_cap = cap[todo]
        best_s, best_v, sub_exact = s[todo], value[todo], np.ones(sub.shape[0], dtype=bool)
        base = ["both"] * n
        for i in nonconvex:
            base[i] = "low"
        choices = [list(base)]
        for j in nonconvex:
            alt = list(base)
            alt[j] = "high"
            choices.append(alt)
        for pieces in choices:
            ss, vv, dd = _dual_solve(sub, cons, sub_cap, pieces)
            sub_exact &= _closed(vv, dd)
            better = vv > best_v
            best_s = np.where(better[:, None], ss, best_s)
            best_v = np.where(better, vv, best_v)
        linear_only = all(cons.n_funcs[i].kind == "exponential" for i in nonconvex)
        s[todo], value[todo] = best_s, best_v
        dual[todo] = np.where(sub_exact & linear_only, best_v, dual[todo])
        exact[todo] = sub_exact & linear_only
    return BallSolution(sign * s, value, dual, exact)
