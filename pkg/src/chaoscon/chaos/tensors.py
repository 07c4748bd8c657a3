"""Coefficient tensors, chaos specifications, evaluation and I/O."""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from ..distributions import DistributionSpec
from ..rng import RandomStream, as_stream

__all__ = [
    "ChaosSpec",
    "CoefficientTensor",
    "contract_axes",
    "evaluate_chaos",
    "read_tensor_binary",
    "read_tensor_text",
    "sample_chaos_inputs",
    "sign_patterns",
    "write_tensor_binary",
    "write_tensor_text",
]

MAX_ORDER = 4
BINARY_MAGIC = b"CHAOSTEN"
BINARY_VERSION = 1
_HEADER = struct.Struct("<8sHBBI")  # magic, version, d, flags, n -> 16 bytes
_FLAG_SYMMETRIC = 1
_FLAG_ZERO_DIAGONAL = 2


def _is_symmetric(entries: np.ndarray) -> bool:
    return all(
        np.array_equal(entries, np.transpose(entries, perm))
        for perm in itertools.permutations(range(entries.ndim))
    )


def _distinct_mask(n: int, d: int) -> np.ndarray:
    idx = np.indices((n,) * d)
    mask = np.ones((n,) * d, dtype=bool)
    for a, b in itertools.combinations(range(d), 2):
        mask &= idx[a] != idx[b]
    return mask


@dataclass(frozen=True, eq=False)
class CoefficientTensor:
    """Dense d-way coefficient array t[i_1, ..., i_d] with side n."""

    entries: np.ndarray
    symmetric: bool = False
    zero_diagonal: bool = False

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if not 1 <= entries.ndim <= MAX_ORDER:
            raise ValueError(f"order must be between 1 and {MAX_ORDER}, got {entries.ndim}")
        if len(set(entries.shape)) != 1:
            raise ValueError(f"all sides must be equal, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("entries must be finite")
        if self.symmetric and not _is_symmetric(entries):
            raise ValueError("tensor flagged symmetric is not permutation invariant")
        if self.zero_diagonal and np.any(entries[~_distinct_mask(entries.shape[0], entries.ndim)] != 0):
            raise ValueError("tensor flagged zero_diagonal has entries with repeated indices")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def d(self) -> int:
        return self.entries.ndim

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def scaled(self, c: float) -> "CoefficientTensor":
        return CoefficientTensor(c * self.entries, self.symmetric, self.zero_diagonal)

    @classmethod
    def identity(cls, n: int, d: int = 2) -> "CoefficientTensor":
        e = np.zeros((n,) * d)
        for i in range(n):
            e[(i,) * d] = 1.0
        return cls(e, symmetric=True)

    @classmethod
    def zeros(cls, n: int, d: int) -> "CoefficientTensor":
        return cls(np.zeros((n,) * d), symmetric=True, zero_diagonal=True)

    @classmethod
    def off_diagonal_ones(cls, n: int, d: int = 2) -> "CoefficientTensor":
        return cls(_distinct_mask(n, d).astype(float), symmetric=True, zero_diagonal=True)

    @classmethod
    def random(cls, n: int, d: int, stream: RandomStream | int | None = None, kind: str = "sign",
               symmetrize: bool = False) -> "CoefficientTensor":
        """Random coefficients (``sign``: iid +-1, ``gaussian``: iid N(0,1)).

        With ``symmetrize`` the array is averaged over index permutations and
        cleared on repeated-index entries (an undecoupled-ready tensor).
        """
        rng = as_stream(stream).generator()
        shape = (n,) * d
        if kind == "sign":
            e = 2.0 * rng.integers(0, 2, size=shape) - 1.0
        elif kind == "gaussian":
            e = rng.standard_normal(shape)
        else:
            raise ValueError(f"unknown random tensor kind {kind!r}")
        if not symmetrize:
            return cls(e)
        perms = list(itertools.permutations(range(d)))
        e = sum(np.transpose(e, p) for p in perms) / len(perms)
        e = np.where(_distinct_mask(n, d), e, 0.0)
        return cls(e, symmetric=True, zero_diagonal=True)


@dataclass(frozen=True, eq=False)
class ChaosSpec:
    """Finite family T of coefficient tensors plus the generating variables.

    ``generators`` holds d rows of n laws (row k generates X^(k)); an
    undecoupled chaos has a single row, used for every factor.
    """

    family: tuple[CoefficientTensor, ...]
    generators: tuple[tuple[DistributionSpec, ...], ...]
    decoupled: bool = True
    d: int = field(default=0)
    n: int = field(default=0)

    def __post_init__(self):
        family = tuple(self.family)
        generators = tuple(tuple(row) for row in self.generators)
        d = self.d or (family[0].d if family else 0)
        n = self.n or (family[0].n if family else 0)
        if not (1 <= d <= MAX_ORDER and n >= 1):
            raise ValueError("an empty family needs explicit d and n")
        for t in family:
            if (t.d, t.n) != (d, n):
                raise ValueError(f"tensor of shape (d={t.d}, n={t.n}) does not match (d={d}, n={n})")
        if self.decoupled:
            if len(generators) != d:
                raise ValueError("a decoupled chaos needs one generator row per factor")
        else:
            if len(generators) != 1:
                raise ValueError("an undecoupled chaos takes a single generator row")
            for t in family:
                if not (t.symmetric and t.zero_diagonal):
                    raise ValueError("undecoupled chaos needs symmetric, zero-diagonal tensors")
        if any(len(row) != n for row in generators):
            raise ValueError(f"every generator row needs n = {n} laws")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "generators", generators)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "n", n)

    @classmethod
    def iid(cls, family: Sequence[CoefficientTensor], dist: DistributionSpec, d: int | None = None,
            n: int | None = None, decoupled: bool = True) -> "ChaosSpec":
        family = tuple(family)
        d = d or family[0].d
        n = n or family[0].n
        rows = d if decoupled else 1
        return cls(family, tuple((dist,) * n for _ in range(rows)), decoupled, d, n)

    @classmethod
    def rademacher(cls, family, d=None, n=None, decoupled=True) -> "ChaosSpec":
        return cls.iid(family, DistributionSpec.rademacher(), d, n, decoupled)

    def row(self, k: int) -> tuple[DistributionSpec, ...]:
        return self.generators[k] if self.decoupled else self.generators[0]

    @property
    def is_rademacher(self) -> bool:
        return all(g.kind == "rademacher" for row in self.generators for g in row)

    def as_decoupled(self) -> "ChaosSpec":
        if self.decoupled:
            return self
        return ChaosSpec(self.family, (self.generators[0],) * self.d, True, self.d, self.n)

    def scaled(self, c: float) -> "ChaosSpec":
        return ChaosSpec(tuple(t.scaled(c) for t in self.family), self.generators, self.decoupled, self.d, self.n)


def sample_chaos_inputs(spec: ChaosSpec, n_samples: int, stream: RandomStream | int | None) -> np.ndarray:
    """(N, d, n) generator draws; undecoupled rows are copies of row 0."""
    stream = as_stream(stream)
    rows = spec.d if spec.decoupled else 1
    out = np.empty((n_samples, rows, spec.n))
    for k in range(rows):
        row = spec.generators[k]
        sub = stream.split(k)
        if all(g == row[0] for g in row):
            out[:, k, :] = row[0].sample(sub.generator(), (n_samples, spec.n))
        else:
            for i, g in enumerate(row):
                out[:, k, i] = g.sample(sub.split(i).generator(), n_samples)
    if not spec.decoupled:
        out = np.repeat(out, spec.d, axis=1)
    return out


def contract_axes(entries: np.ndarray, x: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``entries`` against x[:, k, :] for each k in ``axes``.

    Axes are contracted from the innermost (highest index) outwards.  The
    result has shape (N, n, ..., n), one trailing axis per remaining index
    in ascending order.
    """
    axes = sorted(axes, reverse=True)
    n_samples = x.shape[0]
    remaining = list(range(entries.ndim))
    if not axes:
        return np.broadcast_to(entries, (n_samples,) + entries.shape).copy()
    k = axes[0]
    v = np.moveaxis(np.tensordot(entries, x[:, k, :], axes=([k], [1])), -1, 0)
    remaining.remove(k)
    for k in axes[1:]:
        pos = 1 + remaining.index(k)
        v = np.einsum("N...i,Ni->N...", np.moveaxis(v, pos, -1), x[:, k, :])
        remaining.remove(k)
    return v


def evaluate_chaos(spec: ChaosSpec, x) -> np.ndarray | float:
    """sup over T of |sum t_{i_1..i_d} x^(1)_{i_1} ... x^(d)_{i_d}|.

    ``x`` is (d, n) or a batch (N, d, n); undecoupled specs also accept a
    single row (n,), (1, n) or (N, 1, n).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 2
    if x.ndim == 1:
        x = x[None, :]
    if single:
        x = x[None, ...]
    if x.ndim != 3 or x.shape[2] != spec.n:
        raise ValueError(f"input has shape {x.shape}, expected (N, {spec.d}, {spec.n})")
    if x.shape[1] == 1 and not spec.decoupled:
        x = np.repeat(x, spec.d, axis=1)
    if x.shape[1] != spec.d:
        raise ValueError(f"input has {x.shape[1]} rows, expected {spec.d}")
    out = np.zeros(x.shape[0])
    for t in spec.family:
        out = np.maximum(out, np.abs(contract_axes(t.entries, x, range(spec.d))))
    return float(out[0]) if single else out


def sign_patterns(m: int, chunk: int = 1 << 16) -> Iterator[np.ndarray]:
    """All 2^m sign vectors in blocks of at most ``chunk`` rows."""
    total = 1 << m
    bits = np.arange(m)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        yield 1.0 - 2.0 * ((idx[:, None] >> bits) & 1).astype(float)


# -- I/O ---------------------------------------------------------------------


def write_tensor_text(tensors: Sequence[CoefficientTensor] | CoefficientTensor, path) -> None:
    """Plain-text coefficient format; one block per tensor, blocks separated by '---'.

    Each block: ``d <d>``, ``n <n>``, ``flags <names or none>``, then rows of
    0-based indices followed by the value (zero entries omitted).
    """
    if isinstance(tensors, CoefficientTensor):
        tensors = [tensors]
    lines = []
    for j, t in enumerate(tensors):
        if j:
            lines.append("---")
        flags = [name for name, on in (("symmetric", t.symmetric), ("zero_diagonal", t.zero_diagonal)) if on]
        lines += [f"d {t.d}", f"n {t.n}", "flags " + (" ".join(flags) or "none")]
        for idx in zip(*np.nonzero(t.entries)):
            lines.append(" ".join(map(str, idx)) + f" {float(t.entries[idx])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_tensor_text(path) -> list[CoefficientTensor]:
    blocks, current = [], []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "---":
            blocks.append(current)
            current = []
        else:
            current.append(line)
    blocks.append(current)
    out = []
    for block in blocks:
        if not block:
            continue
        header = {}
        rows = []
        for line in block:
            key, _, rest = line.partition(" ")
            if key in ("d", "n", "flags"):
                header[key] = rest.split()
            else:
                rows.append(line.split())
        try:
            d, n = int(header["d"][0]), int(header["n"][0])
        except KeyError as exc:
            raise ValueError(f"tensor block is missing header field {exc}") from None
        flags = set(header.get("flags", [])) - {"none"}
        unknown = flags - {"symmetric", "zero_diagonal"}
        if unknown:
            raise ValueError(f"unknown tensor flags {sorted(unknown)}")
        entries = np.zeros((n,) * d)
        for row in rows:
            if len(row) != d + 1:
                raise ValueError(f"row {' '.join(row)!r} needs {d} indices and a value")
            idx = tuple(int(v) for v in row[:d])
            if any(not 0 <= i < n for i in idx):
                raise ValueError(f"index {idx} out of range for n = {n}")
            entries[idx] = float(row[d])
        out.append(CoefficientTensor(entries, "symmetric" in flags, "zero_diagonal" in flags))
    return out


def write_tensor_binary(t: CoefficientTensor, path) -> None:
    """16-byte header (magic, version, d, flags, n) then n^d little-endian float64, row-major."""
    flags = (_FLAG_SYMMETRIC if t.symmetric else 0) | (_FLAG_ZERO_DIAGONAL if t.zero_diagonal else 0)
    header = _HEADER.pack(BINARY_MAGIC, BINARY_VERSION, t.d, flags, t.n)
    Path(path).write_bytes(header + t.entries.astype("<f8").tobytes(order="C"))


def read_tensor_binary(path) -> CoefficientTensor:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("file too short for a tensor header")
    magic, version, d, flags, n = _HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise ValueError("bad magic: not a coefficient tensor file")
    if version != BINARY_VERSION:
        raise ValueError(f"unsupported tensor format version {version}")
    expected = _HEADER.size + 8 * n**d
    if len(data) != expected:
        raise ValueError(f"payload has {len(data) - _HEADER.size} bytes, expected {expected - _HEADER.size}")
    entries = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape((n,) * d)
    return CoefficientTensor(entries, bool(flags & _FLAG_SYMMETRIC), bool(flags & _FLAG_ZERO_DIAGONAL))
