"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE k: PASS|FAIL`` line (also collected in
the pytest terminal summary) and then asserts.  Tolerances are the contract
values; none of them is relaxed here.  Run just this file with

    pytest tests/test_acceptance.py -v
"""

from __future__ import annotations

import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from acceptance_log import baseline, record
from fixtures import enumeration_fixtures, sandwich_fixture

from chaoscon.chaos import (
    TailFunctionN,
    all_subsets,
    chaos_samples,
    empirical_moments,
    exact_chaos_moments,
    moment_bound_euclidean,
    norm_T_I,
    norm_T_N_I_p_grid,
    phi_curve,
)
from chaoscon.convex import ConvexFunctionSpec
from chaoscon.distributions import ClassMParams, DistributionSpec, check_class_m, check_equivalence_ii
from chaoscon.entropy import DiscreteProductMeasure, PhiFunction, check_tensorization, herbst_tail_check
from chaoscon.harness.suites import oracle_suite
from chaoscon.oracles import multilinear_sup_oracle
from chaoscon.rng import RandomStream

P_GRID = [1, 2, 4, 8, 16, 32]


def test_criterion_1_class_m_explicit_constants():
    g = DistributionSpec.gaussian()
    grid = np.linspace(1.0, 6.0, 200)
    start = time.perf_counter()
    rep_m = check_class_m(g, ClassMParams(1.0, 1.0), grid)
    rep_ii = check_equivalence_ii(g, 1.0, 2.0, 0.5, grid)
    elapsed = time.perf_counter() - start
    worst = min(rep_m.min_margin, rep_ii.min_margin)
    ok = rep_m.passed and rep_ii.passed and worst >= -1e-9 and elapsed < 5.0
    record(1, ok, f"min slack {worst:.3g}, {elapsed:.2f}s")
    assert ok


def _random_instance(rng: np.random.Generator):
    k = int(rng.integers(1, 5))
    factors = []
    for _ in range(k):
        a = int(rng.integers(1, 6))
        factors.append((np.sort(rng.normal(size=a)), rng.dirichlet(np.ones(a))))
    measure = DiscreteProductMeasure(factors)
    xi = rng.exponential(size=measure.shape) * (rng.random(measure.shape) > 0.2)
    return measure, xi * rng.choice([1e-3, 1.0, 1e3])


def test_criterion_2_tensorization():
    rng = RandomStream(2024).generator()
    start = time.perf_counter()
    failures = 0
    worst = -math.inf
    for _ in range(1000):
        measure, xi = _random_instance(rng)
        for kind in ("square", "x_log_x"):
            res = check_tensorization(measure, xi, PhiFunction(kind))
            worst = max(worst, res.lhs - res.rhs)
            failures += not (res.lhs <= res.rhs + 1e-12)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 30.0
    record(2, ok, f"{failures} failures in 2000 checks, max lhs-rhs {worst:.3g}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_herbst_gaussian():
    rep = herbst_tail_check(DistributionSpec.gaussian(), ConvexFunctionSpec.linear([1.0]), 0.5,
                            [1.0, 2.0, 3.0], n_samples=1_000_000, stream=RandomStream(3))
    bound = np.exp(-np.asarray(rep.grid) ** 2 / 2.0)
    ok = bool(np.all(rep.empirical <= bound + 3.0 * rep.std_error)) and np.allclose(rep.bound_upper, bound)
    detail = ", ".join(f"t={t:g}: {e:.4g}<={b:.4g}" for t, e, b in zip(rep.grid, rep.empirical, bound))
    record(3, ok, detail)
    assert ok


def _oracle_norm(spec, subset) -> float:
    """E over every outer sign pattern of the grid-oracle sup, max over the family."""
    d, n = spec.d, spec.n
    outer = [k for k in range(d) if k not in subset]
    total = 0.0
    patterns = list(itertools.product([-1.0, 1.0], repeat=n * len(outer)))
    for s in patterns:
        best = 0.0
        for t in spec.family:
            form = t.entries
            for j, k in reversed(list(enumerate(outer))):
                form = np.tensordot(form, np.asarray(s[j * n:(j + 1) * n]), axes=([k], [0]))
            best = max(best, multilinear_sup_oracle(form, ["euclidean"] * len(subset)).value)
        total += best
    return total / len(patterns)


@pytest.mark.slow
def test_criterion_4_oracle_equivalence():
    fixtures = enumeration_fixtures()
    ps = [1, 2, 4, 8]
    misses = []
    n_moment = 0
    for name, spec in fixtures:
        exact = exact_chaos_moments(spec, ps)
        for seed in range(5):
            stream = RandomStream(seed)
            z = chaos_samples(spec, 1_000_000, stream.split(0))
            for est, ex in zip(empirical_moments(z, ps, stream=stream.split(1)), exact):
                n_moment += 1
                if abs(est.value - ex) > 3.0 * est.std_error + 1e-12:
                    misses.append(f"{name} seed {seed} p={est.p:g} ({(est.value - ex) / est.std_error:+.2f} SE)")

    worst_rel = 0.0
    n_norm = skipped = 0
    for name, spec in fixtures:
        for subset in all_subsets(spec.d, include_empty=False):
            if (len(subset) - 1) * spec.n > 6:  # grid oracle dimension cap
                skipped += 1
                continue
            n_norm += 1
            got = norm_T_I(spec, subset, outer="exact", stream=RandomStream(0)).value
            want = _oracle_norm(spec, subset)
            worst_rel = max(worst_rel, abs(got - want) / max(want, 1e-12))
    ok = not misses and worst_rel <= 1e-4 and len(fixtures) >= 20
    record(4, ok, f"{len(fixtures)} fixtures, {len(misses)}/{n_moment} moment checks beyond 3 SE"
                  f"{' (' + '; '.join(misses) + ')' if misses else ''}; "
                  f"{n_norm} norms, worst relative gap {worst_rel:.2g} ({skipped} subsets over the oracle cap)")
    assert ok


def _sandwich_ratios():
    spec = sandwich_fixture()
    moments = np.array(exact_chaos_moments(spec, P_GRID))
    total = np.zeros(len(P_GRID))
    for subset in all_subsets(2):
        ests = norm_T_N_I_p_grid(spec, subset, P_GRID, stream=RandomStream(5), outer="exact")
        total += [e.value for e in ests]
    return moments / total


def test_criterion_5_bound_sandwich():
    ratios = _sandwich_ratios()
    r_lo, r_hi = float(ratios.min()), float(ratios.max())
    band = baseline("criterion_5_band", [r_lo, r_hi])
    inside = bool(np.all(ratios >= band[0] * (1 - 1e-6)) and np.all(ratios <= band[1] * (1 + 1e-6)))
    ok = r_hi / r_lo <= 20.0 and inside
    record(5, ok, f"ratios {np.round(ratios, 4).tolist()}, r_hi/r_lo {r_hi / r_lo:.3f}, "
                  f"baseline band [{band[0]:.4f}, {band[1]:.4f}]")
    assert ok


@pytest.mark.slow
def test_criterion_6_moment_growth_shape():
    spec = sandwich_fixture(gaussian=True)
    root = RandomStream(6)
    z = chaos_samples(spec, 1_000_000, root.split(0))
    moments = empirical_moments(z, P_GRID, centered=True, stream=root.split(1))
    norms = {}
    for j, subset in enumerate(all_subsets(2, include_empty=False)):
        norms[subset] = norm_T_I(spec, subset, n_outer=2000, stream=root.split(2 + j)).value
    ratios = np.array([m.value / moment_bound_euclidean(norms, p, 2) for m, p in zip(moments, P_GRID)])
    ceiling = baseline("criterion_6_ceiling", float(ratios.max()))
    trend = ratios[-1] / ratios[0]
    ok = bool(np.all(ratios <= ceiling * (1 + 1e-6))) and trend < 2.0
    record(6, ok, f"ratios {np.round(ratios, 4).tolist()}, last/first {trend:.3f}, baseline ceiling {ceiling:.4f}")
    assert ok


def test_criterion_7_scaling_inequality():
    fixtures = [(name, spec, None) for name, spec in enumeration_fixtures()]
    fixtures.append(("sandwich-rademacher", sandwich_fixture(), None))
    fixtures.append(("sandwich-gaussian", sandwich_fixture(gaussian=True), TailFunctionN.gaussian_like()))
    ts = [1, 2, 4, 8, 16]
    worst = -math.inf
    where = ""
    for name, spec, n_funcs in fixtures:
        curve = dict(zip(ts, phi_curve(spec, ts, n_funcs=n_funcs, n_outer=500, stream=RandomStream(7))))
        for x in (1, 2, 4):
            for t in (1, 2, 4):
                (lhs, s_l), (rhs, s_r) = curve[x * t], curve[x]
                scale = t ** (spec.d / 2)
                excess = lhs - scale * rhs - 3.0 * math.hypot(s_l, scale * s_r)
                if excess > worst:
                    worst, where = excess, f"{name} x={x} t={t}"
    ok = worst <= 0.0
    record(7, ok, f"{len(fixtures)} fixtures, worst excess {worst:.3g} at {where}")
    assert ok


def test_criterion_8_optimizer_cross_validation():
    start = time.perf_counter()
    results = dict((name, (ok, detail)) for name, ok, detail in oracle_suite(seed=8, n_forms=50))
    elapsed = time.perf_counter() - start
    ok_forms, detail = results["ascent against grid oracle (50 forms)"]
    ok = ok_forms and elapsed < 60.0
    record(8, ok, f"{detail}, {elapsed:.1f}s")
    assert ok


def test_criterion_9_selftest_determinism(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for out in dirs:
        proc = subprocess.run([sys.executable, "-m", "chaoscon", "selftest", "--seed", "42", "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode in (0, 2, 3), proc.stderr
    files = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*") if p.is_file())
    other = sorted(p.relative_to(dirs[1]) for p in dirs[1].rglob("*") if p.is_file())
    same = files == other and all((dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files)
    ok = same and len(files) > 0
    record(9, ok, f"{len(files)} files compared byte for byte")
    assert ok
