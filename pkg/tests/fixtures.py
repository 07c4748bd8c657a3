"""Shared fixture instances for the test suite.

Enumeration-sized Rademacher chaoses are generated by a fixed rule rather
than picked by hand: every (d, n) with n*d <= 12 from the list below, each in
three coefficient flavours (identity-like, random signs, random Gaussian),
with a two-tensor family for the random flavours.
"""

from __future__ import annotations

import numpy as np

from chaoscon.chaos import ChaosSpec, CoefficientTensor

ENUM_SHAPES = [(1, 3), (1, 6), (1, 12), (2, 2), (2, 3), (2, 4), (2, 6), (3, 2), (3, 3), (3, 4)]


def _identity_like(n: int, d: int) -> CoefficientTensor:
    if d == 1:
        return CoefficientTensor(np.ones(n) / np.sqrt(n))
    return CoefficientTensor.identity(n, d)


def enumeration_fixtures() -> list[tuple[str, ChaosSpec]]:
    out = []
    for d, n in ENUM_SHAPES:
        seed = 1000 * d + n
        out.append((f"d{d}n{n}-identity", ChaosSpec.rademacher([_identity_like(n, d)], d=d, n=n)))
        signs = [CoefficientTensor.random(n, d, stream=seed + j, kind="sign") for j in range(2)]
        out.append((f"d{d}n{n}-signs", ChaosSpec.rademacher(signs, d=d, n=n)))
        gauss = [CoefficientTensor.random(n, d, stream=seed + 10 + j, kind="gaussian") for j in range(2)]
        out.append((f"d{d}n{n}-gauss", ChaosSpec.rademacher(gauss, d=d, n=n)))
    return out


def sandwich_fixture(gaussian: bool = False) -> ChaosSpec:
    """d=2, n=8 random-sign coefficient matrix."""
    t = CoefficientTensor.random(8, 2, stream=20240, kind="sign")
    if gaussian:
        from chaoscon.distributions import DistributionSpec
        return ChaosSpec.iid([t], DistributionSpec.gaussian(), d=2, n=8)
    return ChaosSpec.rademacher([t], d=2, n=8)
