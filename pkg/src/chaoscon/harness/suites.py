"""Built-in batteries: the self-test configs and the brute-force oracle suite."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from chaoscon.chaos.ascent import sup_over_balls
from chaoscon.chaos.constraints import BallConstraint, TailFunctionN, solve_ball_argmax
from chaoscon.chaos.moments import brute_force_enumerate, exact_chaos_moments
from chaoscon.chaos.norms import norm_T_I, norm_T_N_I_p
from chaoscon.chaos.tensors import ChaosSpec, CoefficientTensor, evaluate_chaos
from chaoscon.oracles import ExactDistribution, exact_moment, grid_polish_max, multilinear_sup_oracle
from chaoscon.rng import RandomStream

__all__ = ["SELFTEST_CONFIGS", "oracle_suite"]

_identity2 = {"tensors": [{"kind": "identity", "n": 2, "d": 2}]}

SELFTEST_CONFIGS: list[dict] = [
    {"kind": "class-m-check", "name": "gaussian-class-m",
     "params": {"distribution": {"kind": "gaussian"}, "m": 1.0, "sigma_sq": 1.0}},
    {"kind": "entropy-tensorization", "name": "tensorization", "params": {"instances": 100}},
    {"kind": "herbst", "name": "herbst-gaussian", "samples": 100_000,
     "params": {"distribution": {"kind": "gaussian"}, "dim": 1, "function": {"kind": "coordinate", "index": 0},
                "C": 0.5, "t_grid": [1.0, 2.0, 3.0]}},
    {"kind": "lsi-ratio", "name": "lsi-gaussian-linear", "samples": 20_000,
     "params": {"distribution": {"kind": "gaussian"}, "dim": 2,
                "function": {"kind": "linear", "weights": [0.6, 0.8]}, "n_resamples": 50}},
    {"kind": "chaos-moments", "name": "identity-exact", "exact": True,
     "params": {"chaos": _identity2, "p_grid": [1, 2, 4]}},
    {"kind": "chaos-moments", "name": "identity-mc", "samples": 50_000,
     "params": {"chaos": _identity2, "p_grid": [1, 2, 4, 8], "bound": "euclidean", "n_resamples": 100}},
    {"kind": "logconcave-bounds", "name": "sandwich-small", "samples": 50_000,
     "params": {"chaos": {"tensors": [{"kind": "random", "n": 4, "d": 2, "seed": 1}]}, "p_grid": [1, 2, 4, 8],
                "n_outer": 200, "restarts": 5, "n_resamples": 100}},
    {"kind": "tail-certificate", "name": "linear-tail", "samples": 50_000,
     "params": {"chaos": {"tensors": [{"kind": "normalized_ones", "n": 8, "d": 1}]}, "alpha": 1.0,
                "t_grid": [1, 2, 3, 4]}},
    {"kind": "decouple-compare", "name": "decouple-off-diagonal", "exact": True,
     "params": {"tensor": {"kind": "off_diagonal_ones", "n": 3, "d": 2}, "generator": {"kind": "rademacher"},
                "p_grid": [1, 2, 4, 8]}},
    {"kind": "exp-integrability-trend", "name": "exp-trend",
     "params": {"alpha_grid": [0.05, 0.1, 0.2], "family": {"kind": "normalized_ones", "d": 1, "n": [4, 8, 16]}}},
]


def _close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def oracle_suite(seed: int = 0, n_forms: int = 10) -> list[tuple[str, bool, str]]:
    """(name, passed, detail) for every brute-force cross-check."""
    out: list[tuple[str, bool, str]] = []

    def record(name: str, fn: Callable[[], tuple[bool, str]]):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))

    ident = ChaosSpec.rademacher([CoefficientTensor.identity(2, 2)])

    def enum_identity():
        dist = brute_force_enumerate(ident)
        return (np.allclose(dist.support, [0, 2]) and np.allclose(dist.probs, [0.5, 0.5]),
                f"support {dist.support.tolist()} probs {dist.probs.tolist()}")

    def enum_linear():
        dist = brute_force_enumerate(ChaosSpec.rademacher([CoefficientTensor(np.array([1.0, 1.0]))]))
        return np.allclose(dist.support, [0, 2]) and np.allclose(dist.probs, [0.5, 0.5]), str(dist.support)

    def moment_4():
        got = exact_moment(ExactDistribution(np.array([-2.0, 0, 2]), np.array([0.25, 0.5, 0.25])), 4)
        return _close(got, 8 ** 0.25), f"{got!r} vs 8^(1/4)"

    def chaos_moment_4():
        got = exact_chaos_moments(ident, [4])[0]
        return _close(got, 8 ** 0.25), f"{got!r}"

    def evaluate():
        v = evaluate_chaos(ident, np.array([[1.0, 1.0], [1.0, -1.0]]))
        return v == 0.0, f"{v}"

    def water_fill():
        r = BallConstraint.a_k_p(TailFunctionN.rademacher(), 2.0, 2)
        v2 = solve_ball_argmax(np.array([3.0, 1.0]), r).value
        r1 = BallConstraint.a_k_p(TailFunctionN.rademacher(), 1.0, 2)
        v1 = solve_ball_argmax(np.array([3.0, 1.0]), r1).value
        g2 = grid_polish_max(lambda a: a @ np.array([3.0, 1.0]), 2,
                             lambda a: (np.sum(a * a, axis=1) <= 2.0) & np.all(np.abs(a) <= 1.0, axis=1),
                             resolution=1e-3).value
        return _close(v2, 4.0) and _close(v1, math.sqrt(10)) and v2 >= g2 - 1e-9, f"{v2}, {v1}, grid {g2}"

    def norms_identity():
        vals = [norm_T_I(ident, I).value for I in [(0, 1), (), (0,)]]
        vp = norm_T_N_I_p(ident, (0, 1), 2.0).value
        ok = all(_close(a, b) for a, b in zip(vals + [vp], [1.0, 1.0, math.sqrt(2), 2.0]))
        return ok, f"{vals} / A_2: {vp}"

    def forms():
        stream = RandomStream(seed)
        worst = math.inf
        over = 0.0
        for i in range(n_forms):
            rng = stream.split(i).generator()
            d = int(rng.integers(2, 4))
            n = int(rng.integers(2, 5 if d == 2 else 4))
            kind = "euclidean" if i % 2 == 0 else "box_ball"
            p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
            form = rng.standard_normal((n,) * d)
            cons = BallConstraint.euclidean(n) if kind == "euclidean" else \
                BallConstraint.a_k_p(TailFunctionN.rademacher(), p, n)
            asc = sup_over_balls(form, [cons] * d, 20, stream.split(i).split(1)).value
            grid = multilinear_sup_oracle(form, [kind] * d, p)
            worst = min(worst, (asc - grid.value) / grid.value)
            over = max(over, (asc - grid.value) - grid.resolution_bound)
        return worst >= -1e-4 and over <= 0, f"min relative gap {worst:.3g}, max excess over bound {over:.3g}"

    record("enumerate identity 2x2", enum_identity)
    record("enumerate linear (1,1)", enum_linear)
    record("exact moment {-2,0,2} p=4", moment_4)
    record("identity chaos moment p=4", chaos_moment_4)
    record("evaluate identity at ((1,1),(1,-1))", evaluate)
    record("water-fill against grid", water_fill)
    record("identity norms", norms_identity)
    record(f"ascent against grid oracle ({n_forms} forms)", forms)
    return out
