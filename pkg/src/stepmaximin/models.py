"""Joint distribution families for one-sided simultaneous testing.

All families are exchangeable location families on the statistic scale: the
observed vector is X_i = theta_i + B_i where B is the family's centered law.

* iid-normal: B_i independent standard normal.
* equicorr-normal: B_i = sqrt(rho) * Z + sqrt(1 - rho) * Z_i with a shared
  factor Z, so every pair of coordinates has correlation rho (0 <= rho < 1).
* iid-uniform: B_i independent Uniform(0, 1).  This family is a reference
  scale for null computations only; it has no location structure, so any
  shifted-parameter operation on it is an error.

Parameter components live on the extended real line.  A component of -inf
(+inf) means that coordinate sits below (above) every finite threshold with
probability one; sampled columns for such components are emitted as the
matching signed infinity without consuming any randomness, which keeps a
fixed random-stream layout for the finite columns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
from scipy.special import ndtr, ndtri, roots_hermite

__all__ = [
    "Family",
    "ModelSpec",
    "ThetaVector",
    "SampleMatrix",
    "UnsupportedShiftError",
    "marginal_cdf",
    "marginal_quantile",
    "sample",
    "max_cdf_null",
    "null_rect_cdf",
    "null_orthant_survival",
    "reflect_threshold",
]


class UnsupportedShiftError(ValueError):
    """A shifted (non-null) evaluation was requested on the uniform family."""


class Family(str, Enum):
    IID_NORMAL = "iid-normal"
    EQUICORR_NORMAL = "equicorr-normal"
    IID_UNIFORM = "iid-uniform"


@dataclass(frozen=True)
class ModelSpec:
    """Dimension k plus the family (and correlation for the one-factor case)."""

    k: int
    family: Family
    rho: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        rho = float(self.rho)
        if fam is Family.EQUICORR_NORMAL:
            if not 0.0 <= rho < 1.0:
                raise ValueError(f"rho must lie in [0, 1), got {rho}")
        elif rho != 0.0:
            raise ValueError(f"rho is only meaningful for {Family.EQUICORR_NORMAL.value}")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def iid_normal(cls, k: int) -> "ModelSpec":
        return cls(k=k, family=Family.IID_NORMAL)

    @classmethod
    def equicorr_normal(cls, k: int, rho: float) -> "ModelSpec":
        return cls(k=k, family=Family.EQUICORR_NORMAL, rho=rho)

    @classmethod
    def iid_uniform_null(cls, k: int) -> "ModelSpec":
        return cls(k=k, family=Family.IID_UNIFORM)

    @property
    def supports_shift(self) -> bool:
        return self.family is not Family.IID_UNIFORM

    def with_k(self, k: int) -> "ModelSpec":
        return ModelSpec(k=k, family=self.family, rho=self.rho)


@dataclass(frozen=True)
class ThetaVector:
    """Parameter vector; components may be -inf or +inf sentinels."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        for v in vals:
            if math.isnan(v):
                raise ValueError("theta components must not be NaN")
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, values: Iterable[float]) -> "ThetaVector":
        return cls(tuple(values))

    @classmethod
    def constant(cls, k: int, value: float) -> "ThetaVector":
        return cls((float(value),) * k)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    @property
    def finite_indices(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.values) if math.isfinite(v))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class SampleMatrix:
    """reps x k matrix of sampled statistics (sentinel columns hold +-inf)."""

    values: np.ndarray
    reps: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != self.reps:
            raise ValueError("values must be a (reps, k) array")
        object.__setattr__(self, "values", arr)

    @property
    def k(self) -> int:
        return int(self.values.shape[1])


def _coerce_theta(model: ModelSpec, theta: ThetaVector | Sequence[float]) -> ThetaVector:
    tv = theta if isinstance(theta, ThetaVector) else ThetaVector.of(theta)
    if len(tv) != model.k:
        raise ValueError(f"theta has length {len(tv)}, model has k={model.k}")
    return tv


def _require_null_component(model: ModelSpec, theta_i: float) -> None:
    if model.family is Family.IID_UNIFORM and theta_i != 0.0:
        raise UnsupportedShiftError(
            "the uniform reference family supports theta = 0 only"
        )


def marginal_cdf(model: ModelSpec, theta_i: float, x: float) -> float:
    """P(X_i <= x) for a single coordinate with parameter component theta_i.

    Sentinels resolve first: theta_i = -inf gives 1 (the statistic is below
    any finite level almost surely) and theta_i = +inf gives 0.  Both normal
    families have marginal law N(theta_i, 1); the one-factor construction
    does not change per-coordinate variance.
    """
    theta_i = float(theta_i)
    if math.isnan(theta_i) or math.isnan(x):
        raise ValueError("NaN inputs are not allowed")
    if theta_i == -math.inf:
        return 1.0
    if theta_i == math.inf:
        return 0.0
    if model.family is Family.IID_UNIFORM:
        _require_null_component(model, theta_i)
        return float(min(1.0, max(0.0, x)))
    return float(ndtr(x - theta_i))


def marginal_quantile(model: ModelSpec, theta_i: float, p: float) -> float:
    """Inverse of marginal_cdf in x for fixed finite theta_i; p in (0, 1)."""
    theta_i = float(theta_i)
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly in (0, 1), got {p}")
    if not math.isfinite(theta_i):
        raise ValueError("quantiles are undefined at sentinel parameters")
    if model.family is Family.IID_UNIFORM:
        _require_null_component(model, theta_i)
        return p
    return theta_i + float(ndtri(p))


# --- Gauss-Hermite machinery for the one-factor family -----------------------

_GH_START = 64
_GH_CAP = 8192
_GH_TOL = 1e-10


@lru_cache(maxsize=None)
def _gh_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    # physicists' nodes re-scaled so that sum(w * f(z)) = E[f(Z)], Z ~ N(0,1)
    x, w = roots_hermite(n)
    return math.sqrt(2.0) * x, w / math.sqrt(math.pi)


def gauss_hermite_expectation(fn: Callable[[np.ndarray], np.ndarray]) -> float:
    """E[fn(Z)] for standard normal Z, doubling the node count until two
    successive results agree within 1e-10."""
    prev = None
    n = _GH_START
    while n <= _GH_CAP:
        z, w = _gh_nodes(n)
        cur = float(np.dot(w, fn(z)))
        if prev is not None and abs(cur - prev) < _GH_TOL:
            return cur
        prev = cur
        n *= 2
    raise RuntimeError("Gauss-Hermite quadrature failed to converge")


def conditional_null_cdf(model: ModelSpec, thresholds: np.ndarray, z: np.ndarray) -> np.ndarray:
    """For the one-factor family: P(X_i <= t | Z = z) at theta = 0, as an
    array of shape thresholds.shape + z.shape."""
    rho = model.rho
    t = np.asarray(thresholds, dtype=float)
    scale = math.sqrt(1.0 - rho)
    return ndtr((t[..., None] - math.sqrt(rho) * z) / scale)


def null_rect_cdf(model: ModelSpec, thresholds: Sequence[float]) -> float:
    """P(X_1 <= t_1, ..., X_j <= t_j) at theta = 0 for the first j coordinates."""
    t = np.asarray(list(thresholds), dtype=float)
    if t.size == 0 or t.size > model.k:
        raise ValueError("need 1 <= len(thresholds) <= k")
    if np.isnan(t).any():
        raise ValueError("NaN thresholds are not allowed")
    if model.family is Family.IID_UNIFORM:
        return float(np.prod(np.clip(t, 0.0, 1.0)))
    if model.family is Family.IID_NORMAL or model.rho == 0.0:
        return float(np.prod(ndtr(t)))
    return min(1.0, max(0.0, gauss_hermite_expectation(
        lambda z: np.prod(conditional_null_cdf(model, t, z), axis=0)
    )))


def null_orthant_survival(model: ModelSpec, thresholds: Sequence[float]) -> float:
    """P(X_1 > t_1, ..., X_j > t_j) at theta = 0."""
    t = np.asarray(list(thresholds), dtype=float)
    if t.size == 0 or t.size > model.k:
        raise ValueError("need 1 <= len(thresholds) <= k")
    if np.isnan(t).any():
        raise ValueError("NaN thresholds are not allowed")
    if model.family is Family.IID_UNIFORM:
        return float(np.prod(1.0 - np.clip(t, 0.0, 1.0)))
    if model.family is Family.IID_NORMAL or model.rho == 0.0:
        # survival computed as Phi(-t) to keep precision in the tails
        return float(np.prod(ndtr(-t)))
    return min(1.0, max(0.0, gauss_hermite_expectation(
        lambda z: np.prod(1.0 - conditional_null_cdf(model, t, z), axis=0)
    )))


def max_cdf_null(model: ModelSpec, j: int, t: float) -> float:
    """P(max(X_1, ..., X_j) <= t) at theta = 0.

    This is the quantity whose (1 - alpha) root gives the stepdown constant
    for j active hypotheses.
    """
    if not 1 <= j <= model.k:
        raise ValueError(f"need 1 <= j <= k={model.k}, got j={j}")
    t = float(t)
    if math.isnan(t):
        raise ValueError("threshold must not be NaN")
    if model.family is Family.IID_UNIFORM:
        return float(min(1.0, max(0.0, t)) ** j)
    if model.family is Family.IID_NORMAL or model.rho == 0.0:
        return float(ndtr(t) ** j)
    return min(1.0, max(0.0, gauss_hermite_expectation(
        lambda z: conditional_null_cdf(model, np.array(t), z) ** j
    )))


def reflect_threshold(model: ModelSpec, x: float) -> float:
    """Threshold image under the symmetry that maps the centered law to itself
    with order reversed: negation for the normal families, mirroring about the
    interval midpoint for the uniform family."""
    if model.family is Family.IID_UNIFORM:
        return 1.0 - x
    return -x


# --- sampling ----------------------------------------------------------------

def _replicate_budget(model: ModelSpec, n_finite: int) -> tuple[int, int]:
    """(used, padded) uniform draws consumed per replicate.

    The padded budget is a multiple of 4 so that any replicate offset maps to
    a whole number of counter blocks of the underlying generator; that makes
    the substream of replicate r a pure function of (seed, r) regardless of
    how replicates are batched across workers.
    """
    used = n_finite
    if model.family is Family.EQUICORR_NORMAL and n_finite > 0:
        used += 1
    padded = 4 * ((used + 3) // 4)
    return used, padded


def _uniform_block(seed: int, first_rep: int, reps: int, padded: int) -> np.ndarray:
    bit_gen = np.random.Philox(key=np.uint64(seed))
    if first_rep:
        bit_gen.advance(first_rep * padded // 4)
    u = np.random.Generator(bit_gen).random((reps, padded))
    # random() can return exactly 0.0; nudge it into (0, 1) so the normal
    # inverse transform stays finite
    return np.where(u == 0.0, 0.5 ** 54, u)


def sample(
    model: ModelSpec,
    theta: ThetaVector | Sequence[float],
    reps: int,
    seed: int,
    *,
    first_rep: int = 0,
) -> SampleMatrix:
    """Draw a reps x k matrix of statistics at the given parameter.

    Deterministic in (model, theta, reps, seed).  Replicate r consumes a fixed
    block of the counter-based stream derived from (seed, r), so splitting the
    replicate range across workers (via first_rep) reproduces the exact same
    rows.  Sentinel components emit +-inf columns without consuming draws.
    """
    tv = _coerce_theta(model, theta)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if model.family is Family.IID_UNIFORM:
        for v in tv:
            _require_null_component(model, v)

    finite = list(tv.finite_indices)
    values = np.empty((reps, model.k), dtype=float)
    for i, v in enumerate(tv):
        if v == math.inf:
            values[:, i] = math.inf
        elif v == -math.inf:
            values[:, i] = -math.inf

    used, padded = _replicate_budget(model, len(finite))
    if used:
        u = _uniform_block(seed, first_rep, reps, padded)[:, :used]
        shifts = np.array([tv[i] for i in finite], dtype=float)
        if model.family is Family.IID_UNIFORM:
            values[:, finite] = u
        elif model.family is Family.EQUICORR_NORMAL:
            common = ndtri(u[:, 0])
            own = ndtri(u[:, 1:])
            rho = model.rho
            base = math.sqrt(rho) * common[:, None] + math.sqrt(1.0 - rho) * own
            values[:, finite] = base + shifts
        else:
            values[:, finite] = ndtri(u) + shifts
    return SampleMatrix(values=values, reps=reps)
