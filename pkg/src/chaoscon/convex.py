"""Convex functions as finite maxima of affine pieces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RandomStream, as_stream

__all__ = ["ConvexFunctionSpec"]


@dataclass(frozen=True)
class ConvexFunctionSpec:
    """f(x) = max_j (<a_j, x> + b_j).

    The subgradient at x is the slope of the active piece, ties going to
    the lowest index.
    """

    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        slopes = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        intercepts = np.asarray(self.intercepts, dtype=float).reshape(-1)
        if slopes.shape[0] != intercepts.shape[0]:
            raise ValueError("need one intercept per affine piece")
        if slopes.shape[0] == 0:
            raise ValueError("need at least one affine piece")
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "intercepts", intercepts)

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    @property
    def n_pieces(self) -> int:
        return self.slopes.shape[0]

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.slopes, axis=1).max())

    @classmethod
    def linear(cls, a) -> "ConvexFunctionSpec":
        a = np.asarray(a, dtype=float)
        return cls(a[None, :], np.zeros(1))

    @classmethod
    def constant(cls, c: float, dim: int) -> "ConvexFunctionSpec":
        return cls(np.zeros((1, dim)), np.array([float(c)]))

    @classmethod
    def seminorm(cls, vectors) -> "ConvexFunctionSpec":
        """max_j |<v_j, x>|."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(np.concatenate([v, -v]), np.zeros(2 * v.shape[0]))

    @classmethod
    def random(cls, dim: int, pieces: int, stream: RandomStream | int | None = None, unit: bool = True,
               intercept_scale: float = 0.0) -> "ConvexFunctionSpec":
        rng = as_stream(stream).generator()
        a = rng.standard_normal((pieces, dim))
        if unit:
            a /= np.linalg.norm(a, axis=1, keepdims=True)
        b = intercept_scale * rng.standard_normal(pieces)
        return cls(a, b)

    def _scores(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.slopes.T + self.intercepts

    def __call__(self, x):
        return self._scores(x).max(axis=-1)

    def active(self, x):
        return np.argmax(self._scores(x), axis=-1)

    def subgradient(self, x):
        return self.slopes[self.active(x)]

    def to_rows(self) -> list[list[float]]:
        return [[*a.tolist(), float(b)] for a, b in zip(self.slopes, self.intercepts)]

    @classmethod
    def from_rows(cls, rows) -> "ConvexFunctionSpec":
        arr = np.atleast_2d(np.asarray(rows, dtype=float))
        return cls(arr[:, :-1], arr[:, -1])
