"""One-dimensional laws and membership tests for the class M(m, sigma^2).

A law is in M(m, sigma^2) when, for every x >= m,

    int_x^inf  y * P(X >= y) dy  <=  sigma^2 * P(X >= x),

together with the mirrored condition on the left tail.  Every check below
evaluates an inequality of this kind on a finite grid and reports the
normalized slack at each grid point; left-tail checks run the right-tail
code on the reflected law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from .rng import RandomStream, as_stream

__all__ = [
    "ClassMParams",
    "DistributionSpec",
    "MembershipReport",
    "check_class_m",
    "check_density_criterion",
    "check_equivalence_ii",
    "check_subgaussian",
    "default_grid",
    "derive_ii_constants",
    "find_subgaussian_constants",
    "two_sided_tail",
    "upper_tail",
]

DEFAULT_TOLERANCE = 1e-9
TAIL_CUTOFF = 1e-14
TRUNCATION_CAP = 1e6
REPORT_VERSION = 1

KINDS = ("gaussian", "rademacher", "uniform", "two_point", "discrete", "exp_power", "custom")


@dataclass(frozen=True)
class DistributionSpec:
    """A law on the real line given by its kind and parameters.

    Use the constructors (:meth:`gaussian`, :meth:`rademacher`, ...) rather
    than building instances by hand.  ``custom`` laws carry their own tail
    callables and cannot be serialized.
    """

    kind: str
    params: dict = field(default_factory=dict)
    atoms: np.ndarray | None = field(default=None, repr=False, compare=False)
    probs: np.ndarray | None = field(default=None, repr=False, compare=False)
    _upper: Callable | None = field(default=None, repr=False, compare=False)
    _lower: Callable | None = field(default=None, repr=False, compare=False)
    _sampler: Callable | None = field(default=None, repr=False, compare=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0) -> "DistributionSpec":
        if sd <= 0:
            raise ValueError("sd must be positive")
        return cls("gaussian", {"mean": float(mean), "sd": float(sd)})

    @classmethod
    def rademacher(cls) -> "DistributionSpec":
        return cls("rademacher", {}, np.array([-1.0, 1.0]), np.array([0.5, 0.5]))

    @classmethod
    def uniform(cls, a: float = -1.0, b: float = 1.0) -> "DistributionSpec":
        if not b > a:
            raise ValueError("uniform needs a < b")
        return cls("uniform", {"a": float(a), "b": float(b)})

    @classmethod
    def two_point(cls, v1: float, p1: float, v2: float) -> "DistributionSpec":
        if not 0.0 <= p1 <= 1.0:
            raise ValueError("p1 must lie in [0, 1]")
        atoms, probs = _merge_atoms([v1, v2], [p1, 1.0 - p1])
        return cls("two_point", {"v1": float(v1), "p1": float(p1), "v2": float(v2)}, atoms, probs)

    @classmethod
    def discrete(cls, atoms: Sequence[float], probs: Sequence[float]) -> "DistributionSpec":
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("discrete probabilities must be nonnegative and sum to 1")
        a, p = _merge_atoms(atoms, probs)
        return cls("discrete", {"atoms": [float(v) for v in atoms], "probs": [float(v) for v in probs]}, a, p)

    @classmethod
    def exp_power(cls, r: float, scale: float = 1.0) -> "DistributionSpec":
        """Density proportional to exp(-|x/scale|^r / r)."""
        if r <= 0 or scale <= 0:
            raise ValueError("exp_power needs r > 0 and scale > 0")
        return cls("exp_power", {"r": float(r), "scale": float(scale)})

    @classmethod
    def custom(cls, upper: Callable, lower: Callable, sampler: Callable | None = None, name: str = "custom"):
        """Law given directly by x -> P(X >= x) and x -> P(X <= x)."""
        return cls("custom", {"name": name}, None, None, upper, lower, sampler)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise TypeError("custom distributions are not serializable")
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        data = dict(data)
        kind = data.pop("kind", None)
        builders = {
            "gaussian": cls.gaussian,
            "rademacher": cls.rademacher,
            "uniform": cls.uniform,
            "two_point": cls.two_point,
            "discrete": cls.discrete,
            "exp_power": cls.exp_power,
        }
        if kind not in builders:
            raise ValueError(f"unknown distribution kind {kind!r}")
        return builders[kind](**data)

    # -- tails --------------------------------------------------------------

    @property
    def is_discrete(self) -> bool:
        return self.atoms is not None

    def upper_tail(self, x):
        """mu([x, inf)), vectorized."""
        x = np.asarray(x, dtype=float)
        if self.is_discrete:
            tail = np.concatenate([np.cumsum(self.probs[::-1])[::-1], [0.0]])
            out = tail[np.searchsorted(self.atoms, x, side="left")]
            return np.minimum(out, 1.0)
        k = self.kind
        if k == "gaussian":
            return stats.norm.sf((x - self.params["mean"]) / self.params["sd"])
        if k == "uniform":
            a, b = self.params["a"], self.params["b"]
            return np.clip((b - x) / (b - a), 0.0, 1.0)
        if k == "exp_power":
            r, s = self.params["r"], self.params["scale"]
            half = 0.5 * special.gammaincc(1.0 / r, (np.abs(x) / s) ** r / r)
            return np.where(x >= 0, half, 1.0 - half)
        if k == "custom":
            return np.asarray(np.vectorize(self._upper, otypes=[float])(x))
        raise ValueError(f"unsupported kind {k!r}")

    def lower_tail(self, x):
        """mu((-inf, x]), vectorized."""
        if self.kind == "custom":
            return np.asarray(np.vectorize(self._lower, otypes=[float])(np.asarray(x, dtype=float)))
        return self.reflect().upper_tail(-np.asarray(x, dtype=float))

    def cdf(self, x):
        return self.lower_tail(x)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "gaussian":
            return stats.norm.pdf(x, self.params["mean"], self.params["sd"])
        if k == "uniform":
            a, b = self.params["a"], self.params["b"]
            return np.where((x >= a) & (x <= b), 1.0 / (b - a), 0.0)
        if k == "exp_power":
            r, s = self.params["r"], self.params["scale"]
            norm = 2.0 * s * r ** (1.0 / r) * math.gamma(1.0 + 1.0 / r)
            return np.exp(-np.abs(x / s) ** r / r) / norm
        return None

    def reflect(self) -> "DistributionSpec":
        """Law of -X."""
        k = self.kind
        if k == "gaussian":
            return DistributionSpec.gaussian(-self.params["mean"], self.params["sd"])
        if k == "uniform":
            return DistributionSpec.uniform(-self.params["b"], -self.params["a"])
        if k in ("rademacher", "exp_power"):
            return self
        if self.is_discrete:
            return DistributionSpec.discrete(-self.atoms[::-1], self.probs[::-1])
        if k == "custom":
            sampler = None if self._sampler is None else (lambda g, n, s=self._sampler: -s(g, n))
            return DistributionSpec.custom(
                lambda x: self._lower(-x), lambda x: self._upper(-x), sampler, self.params["name"] + "_reflected"
            )
        raise ValueError(f"unsupported kind {k!r}")

    def breakpoints(self) -> np.ndarray:
        """Points where the tail function is not smooth."""
        if self.is_discrete:
            return self.atoms.copy()
        if self.kind == "uniform":
            return np.array([self.params["a"], self.params["b"]])
        return np.zeros(0)

    @property
    def bounded_support(self) -> tuple[float, float] | None:
        if self.is_discrete:
            return float(self.atoms[0]), float(self.atoms[-1])
        if self.kind == "uniform":
            return self.params["a"], self.params["b"]
        return None

    # -- sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator | RandomStream | int, size) -> np.ndarray:
        if not isinstance(rng, np.random.Generator):
            rng = as_stream(rng).generator()
        k = self.kind
        if k == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size).astype(float) - 1.0
        if self.is_discrete:
            cdf = np.cumsum(self.probs)
            idx = np.searchsorted(cdf, rng.random(size), side="right")
            return self.atoms[np.minimum(idx, self.atoms.size - 1)]
        if k == "gaussian":
            return rng.normal(self.params["mean"], self.params["sd"], size=size)
        if k == "uniform":
            return rng.uniform(self.params["a"], self.params["b"], size=size)
        if k == "exp_power":
            r, s = self.params["r"], self.params["scale"]
            mag = s * (r * rng.gamma(1.0 / r, 1.0, size=size)) ** (1.0 / r)
            return np.where(rng.random(size) < 0.5, -mag, mag)
        if k == "custom" and self._sampler is not None:
            return np.asarray(self._sampler(rng, size), dtype=float)
        raise ValueError(f"kind {k!r} has no sampler")

    def moment(self, p: float) -> float | None:
        """E|X|^p where a closed form is available."""
        if self.is_discrete:
            return float(np.dot(self.probs, np.abs(self.atoms) ** p))
        if self.kind == "gaussian" and self.params["mean"] == 0.0:
            sd = self.params["sd"]
            return sd**p * 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
        return None


def _merge_atoms(atoms, probs):
    atoms = np.asarray(atoms, dtype=float)
    probs = np.asarray(probs, dtype=float)
    uniq, inv = np.unique(atoms, return_inverse=True)
    merged = np.bincount(inv, weights=probs, minlength=uniq.size)
    keep = merged > 0
    return uniq[keep], merged[keep]


def upper_tail(dist: DistributionSpec, x):
    return dist.upper_tail(x)


def two_sided_tail(dist: DistributionSpec, t):
    """P(|X| >= t); equals 1 for t <= 0."""
    t = np.asarray(t, dtype=float)
    tp = np.where(t > 0, t, 1.0)
    both = dist.upper_tail(tp) + dist.lower_tail(-tp)
    return np.where(t > 0, np.minimum(both, 1.0), 1.0)


@dataclass(frozen=True)
class ClassMParams:
    m: float
    sigma_sq: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be positive")
        if self.sigma_sq < 0:
            raise ValueError("sigma_sq must be nonnegative")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)


@dataclass
class MembershipReport:
    """Per-grid-point slack of a tested inequality (nonnegative means pass)."""

    check: str
    grid: np.ndarray
    margin_upper: np.ndarray
    margin_lower: np.ndarray
    tolerance: float = DEFAULT_TOLERANCE
    diagnostics: list[str] = field(default_factory=list)
    failed: bool = False
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.failed:
            return False
        margins = np.concatenate([self.margin_upper, self.margin_lower])
        return bool(np.all(margins >= -self.tolerance))

    @property
    def worst_point(self) -> float | None:
        best = None
        for margins in (self.margin_upper, self.margin_lower):
            if margins.size:
                j = int(np.argmin(margins))
                if best is None or margins[j] < best[0]:
                    best = (margins[j], float(self.grid[j]))
        return None if best is None else best[1]

    @property
    def min_margin(self) -> float:
        margins = np.concatenate([self.margin_upper, self.margin_lower])
        return float(margins.min()) if margins.size else 0.0

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "check": self.check,
            "grid": self.grid.tolist(),
            "margin_upper": self.margin_upper.tolist(),
            "margin_lower": self.margin_lower.tolist(),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "failed": self.failed,
            "worst_point": self.worst_point,
            "diagnostics": list(self.diagnostics),
            "details": {k: np.asarray(v).tolist() for k, v in self.details.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MembershipReport":
        if data.get("version") != REPORT_VERSION:
            raise ValueError(f"unsupported report version {data.get('version')!r}")
        return cls(
            check=data["check"],
            grid=np.asarray(data["grid"], dtype=float),
            margin_upper=np.asarray(data["margin_upper"], dtype=float),
            margin_lower=np.asarray(data["margin_lower"], dtype=float),
            tolerance=data["tolerance"],
            diagnostics=list(data["diagnostics"]),
            failed=data["failed"],
            details={k: np.asarray(v) for k, v in data["details"].items()},
        )


def normalized_slack(rhs, lhs):
    """(rhs - lhs) divided by the larger magnitude of the two sides; 0 when both vanish."""
    rhs = np.asarray(rhs, dtype=float)
    lhs = np.asarray(lhs, dtype=float)
    scale = np.maximum(np.abs(rhs), np.abs(lhs))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(scale > 0, (rhs - lhs) / np.where(scale > 0, scale, 1.0), 0.0)
    return out


def default_grid(params: ClassMParams, num: int = 200) -> np.ndarray:
    return np.geomspace(params.m, params.m + 5.0 * params.sigma + 5.0, num)


# -- quadrature -----------------------------------------------------------


def _simpson_segments(f, a, b, rtol=1e-12, max_rounds=60):
    """Vectorized adaptive Simpson: integral of f over each [a_j, b_j]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total = np.zeros(a.size)
    owner = np.arange(a.size)
    lo, hi = a.copy(), b.copy()
    fa, fb = f(lo), f(hi)
    mid = 0.5 * (lo + hi)
    fm = f(mid)
    whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)
    for _ in range(max_rounds):
        if lo.size == 0:
            break
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (fa + 4.0 * flm + fm)
        right = (hi - mid) / 6.0 * (fm + 4.0 * frm + fb)
        refined = left + right
        err = np.abs(refined - whole)
        done = err <= 15.0 * rtol * np.abs(refined) + 1e-300
        done |= (hi - lo) < 1e-12 * np.maximum(1.0, np.abs(lo))
        np.add.at(total, owner[done], refined[done] + (refined[done] - whole[done]) / 15.0)
        keep = ~done
        owner = np.concatenate([owner[keep], owner[keep]])
        new_lo = np.concatenate([lo[keep], mid[keep]])
        new_hi = np.concatenate([mid[keep], hi[keep]])
        new_fa = np.concatenate([fa[keep], fm[keep]])
        new_fb = np.concatenate([fm[keep], fb[keep]])
        new_fm = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        lo, hi, fa, fb, fm = new_lo, new_hi, new_fa, new_fb, new_fm
        mid = 0.5 * (lo + hi)
    if lo.size:
        np.add.at(total, owner, whole)
    return total


def _truncation_point(dist: DistributionSpec, start: float) -> float | None:
    support = dist.bounded_support
    if support is not None:
        return max(start, support[1])
    x = max(start, 1.0)
    while dist.upper_tail(x) >= TAIL_CUTOFF:
        x *= 2.0
        if x > TRUNCATION_CAP:
            return None
    return x


def weighted_tail_integral(dist: DistributionSpec, grid, quad_step: float = 0.1):
    """int_x^inf y * mu([y, inf)) dy for each x of an ascending grid.

    Returns ``None`` when the tail does not fall below the cutoff before the
    truncation cap, i.e. the integral cannot be certified finite.
    """
    grid = np.asarray(grid, dtype=float)
    if quad_step <= 0:
        raise ValueError("quad_step must be positive")
    x_max = _truncation_point(dist, float(grid.max()))
    if x_max is None:
        return None
    x0 = float(grid.min())
    panels = np.arange(x0, x_max, quad_step)
    bps = dist.breakpoints()
    bps = bps[(bps > x0) & (bps < x_max)]
    knots = np.unique(np.concatenate([grid, panels, bps, [x_max]]))
    seg = _simpson_segments(lambda y: y * dist.upper_tail(y), knots[:-1], knots[1:])
    from_knot = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    return from_knot[np.searchsorted(knots, grid)]


# -- membership checks ------------------------------------------------------


def _class_m_side(dist, sigma_sq, grid, quad_step):
    integral = weighted_tail_integral(dist, grid, quad_step)
    if integral is None:
        return None
    tail = dist.upper_tail(grid)
    rhs = sigma_sq * tail
    # E X^2 1{X >= t} = t^2 P(X >= t) + 2 int_t^inf y P(X >= y) dy
    second = grid**2 * tail + 2.0 * integral
    second_rhs = (grid**2 + 2.0 * sigma_sq) * tail
    return {
        "lhs": integral,
        "rhs": rhs,
        "margin": normalized_slack(rhs, integral),
        "second_moment": second,
        "second_moment_rhs": second_rhs,
        "second_moment_margin": normalized_slack(second_rhs, second),
    }


def check_class_m(
    dist: DistributionSpec,
    params: ClassMParams,
    grid=None,
    quad_step: float = 0.1,
    tolerance: float = DEFAULT_TOLERANCE,
) -> MembershipReport:
    """Test membership of ``dist`` in M(m, sigma^2) on a grid of x >= m."""
    grid = default_grid(params) if grid is None else np.sort(np.asarray(grid, dtype=float))
    if np.any(grid < params.m):
        raise ValueError("every grid point must be >= m")
    upper = _class_m_side(dist, params.sigma_sq, grid, quad_step)
    lower = _class_m_side(dist.reflect(), params.sigma_sq, grid, quad_step)
    if upper is None or lower is None:
        side = "right" if upper is None else "left"
        return MembershipReport(
            "class_m",
            grid,
            np.zeros(0),
            np.zeros(0),
            tolerance,
            diagnostics=[
                f"{side} tail stays above {TAIL_CUTOFF:g} up to x = {TRUNCATION_CAP:g}; "
                "weighted tail integral not certified finite"
            ],
            failed=True,
        )
    details = {f"upper_{k}": v for k, v in upper.items() if k != "margin"}
    details.update({f"lower_{k}": v for k, v in lower.items() if k != "margin"})
    return MembershipReport("class_m", grid, upper["margin"], lower["margin"], tolerance, details=details)


def derive_ii_constants(params: ClassMParams) -> tuple[float, float]:
    """Constants (C, alpha) of the shifted-tail condition implied by M(m, sigma^2)."""
    return 2.0 * params.sigma_sq, 0.5


def check_equivalence_ii(
    dist: DistributionSpec,
    m: float,
    C: float,
    alpha: float,
    grid=None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> MembershipReport:
    """Check mu([x + C/x, inf)) <= alpha * mu([x, inf)) and its mirror for x in grid."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not C > 0:
        raise ValueError("C must be positive")
    grid = np.geomspace(m, m + 10.0, 200) if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid < m):
        raise ValueError("every grid point must be >= m")
    margins = []
    details = {}
    for name, law in (("upper", dist), ("lower", dist.reflect())):
        rhs = alpha * law.upper_tail(grid)
        lhs = law.upper_tail(grid + C / grid)
        margins.append(normalized_slack(rhs, lhs))
        details[f"{name}_lhs"], details[f"{name}_rhs"] = lhs, rhs
    return MembershipReport("equivalence_ii", grid, margins[0], margins[1], tolerance, details=details)


def check_subgaussian(
    dist: DistributionSpec, C1: float, C2: float, grid, tolerance: float = DEFAULT_TOLERANCE
) -> MembershipReport:
    """Check P(|X| >= t) <= C1 exp(-t^2 / C2) on grid; slack stored in margin_upper."""
    if C1 < 1:
        raise ValueError("C1 must be >= 1")
    if not C2 > 0:
        raise ValueError("C2 must be positive")
    grid = np.asarray(grid, dtype=float)
    prob = two_sided_tail(dist, grid)
    bound = C1 * np.exp(-(grid**2) / C2)
    return MembershipReport(
        "subgaussian",
        grid,
        normalized_slack(bound, prob),
        np.zeros(0),
        tolerance,
        details={"tail": prob, "bound": bound},
    )


def find_subgaussian_constants(dist: DistributionSpec, grid, c2_grid=None, c1_cap: float = 10.0):
    """Sweep C2 and return the first (C1, C2) with C1 <= c1_cap covering the grid.

    C1 is the least value >= 1 making the bound hold at every grid point.
    Returns ``None`` when no C2 in the sweep works.
    """
    grid = np.asarray(grid, dtype=float)
    c2_grid = np.geomspace(0.05, 100.0, 200) if c2_grid is None else np.asarray(c2_grid, dtype=float)
    prob = two_sided_tail(dist, grid)
    for c2 in c2_grid:
        with np.errstate(over="ignore"):
            need = prob * np.exp(grid**2 / c2)
        need = np.where(prob > 0, need, 0.0)
        c1 = max(1.0, float(need.max()))
        if math.isfinite(c1) and c1 <= c1_cap:
            return c1 * (1.0 + 1e-12), float(c2)
    return None


def check_density_criterion(
    v_prime: Callable, params: ClassMParams, grid=None, tolerance: float = DEFAULT_TOLERANCE
) -> MembershipReport:
    """Sufficient condition for a density exp(-V): V'(x) >= x/sigma^2 and V'(-x) <= -x/sigma^2."""
    if params.sigma_sq == 0:
        raise ValueError("density criterion is undefined for sigma_sq = 0")
    grid = default_grid(params) if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid < params.m):
        raise ValueError("every grid point must be >= m")
    vp = np.vectorize(v_prime, otypes=[float])
    need = grid / params.sigma_sq
    right = vp(grid)
    left = vp(-grid)
    return MembershipReport(
        "density_criterion",
        grid,
        normalized_slack(right, need),
        normalized_slack(-left, need),
        tolerance,
        details={"v_prime_right": right, "v_prime_left": left},
    )
