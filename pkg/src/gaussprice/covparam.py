"""Coordinates on symmetric matrices and covariance multiindices.

A symmetric n x n matrix is parametrized by its upper triangle, indexed by
the pairs ``(i, j)`` with ``i <= j``.  Pairs are 0-based in code; the JSON
formats and the CLI use 1-based pairs.  The pairs are stored in row-major
upper-triangle order::

    (0,0), (0,1), ..., (0,n-1), (1,1), (1,2), ..., (n-1,n-1)
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy.linalg import cho_solve

from .errors import DimensionMismatch, InvalidParameter, NotPositiveDefinite, NotSymmetric

Pair = tuple[int, int]

DEFAULT_PD_TOL = 1e-10
POWER_ITERATIONS = 20
POWER_TOL = 1e-12


@lru_cache(maxsize=None)
def index_pairs(n: int) -> tuple[Pair, ...]:
    """All pairs ``(i, j)`` with ``0 <= i <= j < n`` in storage order."""
    if n < 1:
        raise InvalidParameter(f"dimension must be positive, got {n}")
    return tuple((i, j) for i in range(n) for j in range(i, n))


@lru_cache(maxsize=None)
def _pair_position(n: int) -> dict[Pair, int]:
    return {p: k for k, p in enumerate(index_pairs(n))}


def pair_index(n: int, i: int, j: int) -> int:
    """Storage position of the pair {i, j} (order of i and j is irrelevant)."""
    if i > j:
        i, j = j, i
    try:
        return _pair_position(n)[(i, j)]
    except KeyError:
        raise InvalidParameter(f"pair ({i}, {j}) out of range for n={n}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CovCoords:
    """A point of R^I: one real value per upper-triangle pair."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values).reshape(-1)
        if vals.size != len(index_pairs(self.n)):
            raise DimensionMismatch(
                f"expected {len(index_pairs(self.n))} coordinates for n={self.n}, got {vals.size}"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_mapping(cls, n: int, entries: Mapping[Pair, float]) -> "CovCoords":
        vals = np.zeros(len(index_pairs(n)))
        seen = set()
        for (i, j), v in entries.items():
            if i > j:
                raise InvalidParameter(f"pair ({i}, {j}) must satisfy i <= j")
            vals[pair_index(n, i, j)] = v
            seen.add((i, j))
        if len(seen) != vals.size:
            raise InvalidParameter(f"expected all {vals.size} pairs for n={n}, got {len(seen)}")
        return cls(n, vals)

    def __getitem__(self, pair: Pair) -> float:
        return float(self.values[pair_index(self.n, *pair)])

    def items(self):
        return zip(index_pairs(self.n), (float(v) for v in self.values))

    def shifted(self, pair: Pair, delta: float) -> "CovCoords":
        vals = self.values.copy()
        vals[pair_index(self.n, *pair)] += delta
        return CovCoords(self.n, vals)

    def __eq__(self, other):
        return (
            isinstance(other, CovCoords)
            and other.n == self.n
            and np.array_equal(other.values, self.values)
        )

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "entries": [{"i": i + 1, "j": j + 1, "v": v} for (i, j), v in self.items()],
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "CovCoords":
        if isinstance(obj, str):
            obj = json.loads(obj)
        n = int(obj["n"])
        entries = {}
        for e in obj["entries"]:
            key = (int(e["i"]) - 1, int(e["j"]) - 1)
            if key in entries:
                raise InvalidParameter(f"duplicate entry ({key[0] + 1}, {key[1] + 1})")
            entries[key] = float(e["v"])
        return cls.from_mapping(n, entries)


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """A real symmetric matrix; symmetry is exact by construction."""

    data: np.ndarray

    def __post_init__(self):
        d = _frozen(self.data)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise DimensionMismatch(f"expected a non-empty square matrix, got shape {d.shape}")
        if not np.array_equal(d, d.T):
            raise NotSymmetric("matrix is not exactly symmetric")
        object.__setattr__(self, "data", d)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[float]]) -> "SymMatrix":
        return cls(np.array([list(r) for r in rows], dtype=float))

    def __eq__(self, other):
        return isinstance(other, SymMatrix) and np.array_equal(self.data, other.data)

    def to_json(self) -> dict:
        return {"n": self.n, "rows": self.data.tolist()}

    @classmethod
    def from_json(cls, obj: dict | str) -> "SymMatrix":
        if isinstance(obj, str):
            obj = json.loads(obj)
        rows = obj["rows"]
        n = int(obj.get("n", len(rows)))
        if len(rows) != n or any(len(r) != n for r in rows):
            raise DimensionMismatch(f"'rows' is not an {n}x{n} matrix")
        return cls.from_rows(rows)


@dataclass(frozen=True, eq=False)
class CovMatrix:
    """A symmetric positive definite matrix with its Cholesky factor."""

    sym: SymMatrix
    chol: np.ndarray
    sigma_min: float

    @property
    def n(self) -> int:
        return self.sym.n

    @property
    def data(self) -> np.ndarray:
        return self.sym.data


def omega_pack(coords: CovCoords) -> SymMatrix:
    n = coords.n
    out = np.empty((n, n))
    for (i, j), v in coords.items():
        out[i, j] = v
        out[j, i] = v
    return SymMatrix(out)


def omega_unpack(sym: SymMatrix) -> CovCoords:
    n = sym.n
    rows, cols = zip(*index_pairs(n))
    return CovCoords(n, sym.data[list(rows), list(cols)])


def _smallest_eigenvalue(S: np.ndarray, L: np.ndarray) -> float:
    # inverse power iteration through the Cholesky factor; Rayleigh quotient estimate
    n = S.shape[0]
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ S @ v)
    for _ in range(POWER_ITERATIONS):
        w = cho_solve((L, True), v)
        v = w / np.linalg.norm(w)
        new = float(v @ S @ v)
        if abs(new - lam) <= POWER_TOL * max(abs(new), 1e-300):
            lam = new
            break
        lam = new
    return lam


def validate_pd(sym: SymMatrix, tol: float = DEFAULT_PD_TOL) -> CovMatrix:
    """Certify positive definiteness with floor ``tol * max(diag)``.

    Raises NotPositiveDefinite when the Cholesky factorization of ``S`` or of
    the shifted matrix ``S - floor * I`` fails.
    """
    if not tol > 0:
        raise InvalidParameter(f"tol must be positive, got {tol}")
    S = sym.data
    if not np.all(np.isfinite(S)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    scale = float(np.max(np.diag(S)))
    if not scale > 0:
        raise NotPositiveDefinite("largest diagonal entry is not positive")
    floor = tol * scale
    try:
        L = np.linalg.cholesky(S)
        np.linalg.cholesky(S - floor * np.eye(sym.n))
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(
            f"matrix is not positive definite with margin {floor:.3g}"
        ) from None
    if not np.all(np.diag(L) > 0):
        raise NotPositiveDefinite("Cholesky factor has a non-positive diagonal")
    sigma_min = _smallest_eigenvalue(S, L)
    if sigma_min < floor:
        raise NotPositiveDefinite(f"smallest eigenvalue {sigma_min:.3g} below {floor:.3g}")
    L.setflags(write=False)
    return CovMatrix(sym, L, sigma_min)


def covariance(rows, tol: float = DEFAULT_PD_TOL) -> CovMatrix:
    """Shorthand: validated covariance from nested rows."""
    return validate_pd(SymMatrix.from_rows(rows), tol)


def sigma_alpha(alpha: float) -> SymMatrix:
    """The unit-variance 2x2 correlation matrix [[1, a], [a, 1]]."""
    return SymMatrix(np.array([[1.0, alpha], [alpha, 1.0]]))


@dataclass(frozen=True, eq=False)
class CovMultiindex:
    """A multiindex over upper-triangle pairs (derivative orders in R^I)."""

    n: int
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != len(index_pairs(self.n)):
            raise DimensionMismatch(
                f"expected {len(index_pairs(self.n))} counts for n={self.n}, got {len(counts)}"
            )
        if any(c < 0 for c in counts):
            raise InvalidParameter("multiindex entries must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def zero(cls, n: int) -> "CovMultiindex":
        return cls(n, (0,) * len(index_pairs(n)))

    @classmethod
    def unit(cls, n: int, i: int, j: int, k: int = 1) -> "CovMultiindex":
        counts = [0] * len(index_pairs(n))
        counts[pair_index(n, i, j)] = k
        return cls(n, tuple(counts))

    @classmethod
    def from_mapping(cls, n: int, entries: Mapping[Pair, int]) -> "CovMultiindex":
        counts = [0] * len(index_pairs(n))
        for (i, j), k in entries.items():
            if i > j:
                raise InvalidParameter(f"pair ({i}, {j}) must satisfy i <= j")
            counts[pair_index(n, i, j)] += k
        return cls(n, tuple(counts))

    def __getitem__(self, pair: Pair) -> int:
        return self.counts[pair_index(self.n, *pair)]

    def __add__(self, other: "CovMultiindex") -> "CovMultiindex":
        if other.n != self.n:
            raise DimensionMismatch("multiindices of different dimension")
        return CovMultiindex(self.n, tuple(a + b for a, b in zip(self.counts, other.counts)))

    def __eq__(self, other):
        return isinstance(other, CovMultiindex) and (self.n, self.counts) == (other.n, other.counts)

    def __hash__(self):
        return hash((self.n, self.counts))

    def items(self):
        return zip(index_pairs(self.n), self.counts)

    def directions(self) -> list[Pair]:
        """Pairs repeated by multiplicity, in storage order."""
        return [p for p, k in self.items() for _ in range(k)]

    @property
    def order(self) -> int:
        return sum(self.counts)

    def flatten(self) -> tuple[int, ...]:
        return flatten(self)

    def parallel_weight(self) -> int:
        return parallel_weight(self)

    def to_json(self) -> list[dict]:
        return [{"i": i + 1, "j": j + 1, "k": k} for (i, j), k in self.items() if k]


def flatten(beta: CovMultiindex) -> tuple[int, ...]:
    """The multiindex sum of beta(i, j) * (e_i + e_j) over all pairs."""
    out = [0] * beta.n
    for (i, j), k in beta.items():
        out[i] += k
        out[j] += k
    return tuple(out)


def parallel_weight(beta: CovMultiindex) -> int:
    """Total order carried by diagonal pairs (i, i)."""
    return sum(k for (i, j), k in beta.items() if i == j)
