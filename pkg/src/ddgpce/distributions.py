"""Dependent input laws and sampling.

Dependence is modelled by a Gaussian copula: correlated standard normals
``Z ~ N(0, R)`` are pushed through each marginal's quantile function.  For
normal marginals this is exactly a multivariate normal with correlation R.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import ConfigError, NumericalError

CHUNK = 4096
SCHEMES = ("mcs", "qmc", "lhs")
_SOBOL_MAXDIM = 21201


@dataclass(frozen=True)
class Marginal:
    """A univariate law.

    ``kind`` is one of ``"normal"`` (params mean, std), ``"uniform"``
    (lower, upper) or ``"lognormal"`` (mean, cov).  Lognormal parameters are
    the mean and coefficient of variation of the variable itself.
    """

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind == "normal":
            if not self.b > 0:
                raise ConfigError(f"normal std must be positive, got {self.b}")
        elif self.kind == "uniform":
            if not self.b > self.a:
                raise ConfigError(f"uniform bounds need upper > lower, got [{self.a}, {self.b}]")
        elif self.kind == "lognormal":
            if not (self.a > 0 and self.b > 0):
                raise ConfigError(
                    f"lognormal needs mean > 0 and cov > 0, got mean={self.a}, cov={self.b}"
                )
        else:
            raise ConfigError(f"unknown marginal kind {self.kind!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ConfigError("marginal parameters must be finite")

    @classmethod
    def normal(cls, mean, std):
        return cls("normal", float(mean), float(std))

    @classmethod
    def uniform(cls, lower, upper):
        return cls("uniform", float(lower), float(upper))

    @classmethod
    def lognormal(cls, mean, cov):
        return cls("lognormal", float(mean), float(cov))

    @property
    def log_params(self) -> tuple[float, float]:
        """(mu_ln, sigma_ln) of the underlying normal, by moment matching."""
        s2 = math.log1p(self.b**2)
        return math.log(self.a) - 0.5 * s2, math.sqrt(s2)

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        return self.a

    @property
    def std(self) -> float:
        if self.kind == "normal":
            return self.b
        if self.kind == "uniform":
            return (self.b - self.a) / math.sqrt(12.0)
        return self.a * self.b

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        return self.from_normal(ndtri(u))

    def from_normal(self, z):
        """Quantile function composed with the standard normal CDF."""
        z = np.asarray(z, dtype=float)
        if self.kind == "normal":
            return self.a + self.b * z
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * ndtr(z)
        mu, s = self.log_params
        return np.exp(mu + s * z)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "normal":
            return ndtr((x - self.a) / self.b)
        if self.kind == "uniform":
            return np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        mu, s = self.log_params
        with np.errstate(divide="ignore"):
            return np.where(x > 0, ndtr((np.log(np.maximum(x, 1e-300)) - mu) / s), 0.0)

    def to_dict(self) -> dict:
        names = {"normal": ("mean", "std"), "uniform": ("lower", "upper"), "lognormal": ("mean", "cov")}
        k1, k2 = names[self.kind]
        return {"kind": self.kind, k1: self.a, k2: self.b}

    @classmethod
    def from_dict(cls, d: dict) -> "Marginal":
        kind = d.get("kind")
        try:
            if kind == "normal":
                return cls.normal(d["mean"], d["std"])
            if kind == "uniform":
                return cls.uniform(d["lower"], d["upper"])
            if kind == "lognormal":
                return cls.lognormal(d["mean"], d["cov"])
        except KeyError as exc:
            raise ConfigError(f"marginal {d} is missing parameter {exc}") from None
        raise ConfigError(f"unknown marginal kind {kind!r}")


@dataclass(frozen=True, eq=False)
class RandomInputModel:
    """Joint law of the N-dimensional input: marginals plus copula correlation."""

    marginals: tuple[Marginal, ...]
    correlation: np.ndarray = None
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        marginals = tuple(self.marginals)
        object.__setattr__(self, "marginals", marginals)
        N = len(marginals)
        if N < 1:
            raise ConfigError("input model needs at least one marginal")
        R = np.eye(N) if self.correlation is None else np.array(self.correlation, dtype=float)
        if R.shape != (N, N):
            raise ConfigError(f"correlation must be {N}x{N}, got {R.shape}")
        if not np.all(np.isfinite(R)):
            raise ConfigError("correlation has non-finite entries")
        if not np.allclose(R, R.T, rtol=0, atol=1e-12):
            raise ConfigError("correlation matrix is not symmetric")
        if not np.all(np.diag(R) == 1.0):
            raise ConfigError("correlation matrix must have a unit diagonal")
        if np.any(np.abs(R) > 1.0):
            raise ConfigError("correlation entries must lie in [-1, 1]")
        R = 0.5 * (R + R.T)
        try:
            chol = np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise ConfigError("correlation matrix is not positive definite") from None
        object.__setattr__(self, "correlation", R)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def independent(cls, marginals: Sequence[Marginal]) -> "RandomInputModel":
        return cls(tuple(marginals))

    @classmethod
    def equicorrelated(cls, marginals: Sequence[Marginal], rho: float) -> "RandomInputModel":
        N = len(marginals)
        R = np.full((N, N), float(rho))
        np.fill_diagonal(R, 1.0)
        return cls(tuple(marginals), R)

    @property
    def dimension(self) -> int:
        return len(self.marginals)

    @property
    def is_independent(self) -> bool:
        return bool(np.array_equal(self.correlation, np.eye(self.dimension)))

    @property
    def cholesky(self) -> np.ndarray:
        return self._chol

    @property
    def means(self) -> np.ndarray:
        return np.array([m.mean for m in self.marginals])

    @property
    def stds(self) -> np.ndarray:
        return np.array([m.std for m in self.marginals])

    def covariance(self) -> np.ndarray:
        """Covariance of X; exact only when all marginals are normal."""
        if any(m.kind != "normal" for m in self.marginals):
            raise ConfigError("covariance() requires all-normal marginals")
        s = self.stds
        return self.correlation * np.outer(s, s)

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Map points of the open unit cube to input realizations."""
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        if self.is_independent:
            for i, m in enumerate(self.marginals):
                out[:, i] = m.ppf(u[:, i])
        else:
            z = ndtri(u) @ self._chol.T
            for i, m in enumerate(self.marginals):
                out[:, i] = m.from_normal(z[:, i])
        return out

    def induced_pearson(self) -> np.ndarray:
        """Pearson correlation of X implied by the copula correlation.

        Closed form for normal and lognormal pairs; NaN where no closed form
        is implemented (pairs involving a uniform).
        """
        N = self.dimension
        out = np.full((N, N), np.nan)
        for i, mi in enumerate(self.marginals):
            for j, mj in enumerate(self.marginals):
                r = self.correlation[i, j]
                if i == j:
                    out[i, j] = 1.0
                elif r == 0.0:
                    out[i, j] = 0.0
                elif mi.kind == "normal" and mj.kind == "normal":
                    out[i, j] = r
                elif mi.kind == "lognormal" and mj.kind == "lognormal":
                    si, sj = mi.log_params[1], mj.log_params[1]
                    out[i, j] = math.expm1(r * si * sj) / math.sqrt(
                        math.expm1(si * si) * math.expm1(sj * sj)
                    )
                elif {mi.kind, mj.kind} == {"normal", "lognormal"}:
                    s = (mi if mi.kind == "lognormal" else mj).log_params[1]
                    out[i, j] = r * s / math.sqrt(math.expm1(s * s))
        return out

    def to_dict(self) -> dict:
        d = {"marginals": [m.to_dict() for m in self.marginals]}
        if not self.is_independent:
            d["correlation"] = {"matrix": self.correlation.tolist()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RandomInputModel":
        marginals = []
        for entry in d.get("marginals", []):
            reps = int(entry.get("repeat", 1))
            spec = entry.get("marginal", entry)
            marginals.extend([Marginal.from_dict(spec)] * reps)
        N = len(marginals)
        corr = d.get("correlation")
        if corr is None:
            return cls(tuple(marginals))
        if "matrix" in corr:
            return cls(tuple(marginals), np.array(corr["matrix"], dtype=float))
        R = np.eye(N)
        if "equicorrelation" in corr:
            R[:] = float(corr["equicorrelation"])
            np.fill_diagonal(R, 1.0)
        for block in corr.get("blocks", []):
            idx = np.array(block["indices"], dtype=int)
            if idx.size and (idx.min() < 0 or idx.max() >= N):
                raise ConfigError(f"correlation block indices out of range 0..{N - 1}")
            R[np.ix_(idx, idx)] = float(block["rho"])
            R[idx, idx] = 1.0
        return cls(tuple(marginals), R)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    scheme: str
    seed: int
    points: np.ndarray
    probabilities: np.ndarray

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def to_csv(self, path) -> None:
        N = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(N)] + ["p"])
            for row, p in zip(self.points, self.probabilities):
                w.writerow([repr(float(v)) for v in row] + [repr(float(p))])


def _sobol_engine(dimension: int, seed: int, scramble: bool = True):
    if dimension > _SOBOL_MAXDIM:
        raise ConfigError(
            f"Sobol sequence supports at most {_SOBOL_MAXDIM} dimensions, got {dimension}"
        )
    engine = qmc.Sobol(dimension, scramble=scramble, seed=seed if scramble else None)
    if not scramble:
        engine.fast_forward(1)  # the raw origin maps to -inf under most inverse CDFs
    return engine


def _open_interval(u):
    tiny = np.finfo(float).tiny
    return np.clip(u, tiny, np.nextafter(1.0, 0.0))


def _sobol_draw(engine, n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return _open_interval(engine.random(n))


def sobol_unit(count: int, dimension: int, seed: int = 0, scramble: bool = True) -> np.ndarray:
    """``count`` Sobol points with an Owen-type scramble seeded by ``seed``.

    ``scramble=False`` returns the raw sequence after the origin instead.
    The raw sequence is kept for checks against direction numbers; its
    truncations to non-powers of two carry a visible bias in high moments.
    """
    if count < 1 or dimension < 1:
        raise ConfigError("count and dimension must be positive")
    return _sobol_draw(_sobol_engine(dimension, seed, scramble), count)


def _mcs_uniform(rng, n, d):
    # Strictly inside (0, 1): midpoints of a 2**-53 grid.
    k = rng.integers(0, 2**53, size=(n, d), dtype=np.int64)
    return (k + 0.5) * 2.0**-53


def unit_blocks(scheme: str, count: int, dimension: int, seed: int, block: int = CHUNK) -> Iterator[np.ndarray]:
    """Stream unit-cube points in fixed-size blocks (the last may be shorter)."""
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown sampling scheme {scheme!r}; expected one of {SCHEMES}")
    if count < 1:
        raise ConfigError(f"sample count must be positive, got {count}")
    if scheme == "qmc":
        engine = _sobol_engine(dimension, seed)
        for start in range(0, count, block):
            yield _sobol_draw(engine, min(block, count - start))
    elif scheme == "mcs":
        rng = np.random.default_rng(seed)
        for start in range(0, count, block):
            yield _mcs_uniform(rng, min(block, count - start), dimension)
    else:
        rng = np.random.default_rng(seed)
        u = np.empty((count, dimension))
        for i in range(dimension):
            u[:, i] = (rng.permutation(count) + 0.5) / count
        for start in range(0, count, block):
            yield u[start : start + block]


def input_blocks(model: RandomInputModel, scheme: str, count: int, seed: int, block: int = CHUNK):
    for u in unit_blocks(scheme, count, model.dimension, seed, block):
        yield model.transform(u)


def sample(model: RandomInputModel, scheme: str = "mcs", count: int = 10_000, seed: int = 0) -> SampleBatch:
    """Draw ``count`` input realizations with uniform probabilities 1/count."""
    points = np.concatenate(list(input_blocks(model, scheme, count, seed)), axis=0)
    if not np.all(np.isfinite(points)):
        raise NumericalError("non-finite input sample produced")
    return SampleBatch(scheme, int(seed), points, np.full(count, 1.0 / count))


@dataclass(frozen=True)
class EmpiricalMoments:
    mean: np.ndarray
    std: np.ndarray
    correlation: np.ndarray


def empirical_moments(batch) -> EmpiricalMoments:
    """Unbiased per-dimension mean/std and the Pearson correlation matrix.

    Correlations involving a constant column are reported as NaN.
    """
    x = batch.points if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ConfigError("empirical moments need at least two samples")
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = cov / np.outer(std, std)
    corr[np.outer(std, std) == 0] = np.nan
    idx = np.arange(x.shape[1])
    corr[idx, idx] = np.where(std > 0, 1.0, np.nan)
    return EmpiricalMoments(mean, std, np.clip(corr, -1.0, 1.0))


def derive_seed(seed: int, tag: str) -> int:
    """A reproducible sub-seed for a named pipeline stream."""
    key = int.from_bytes(tag.encode(), "little") % (2**63)
    return int(np.random.SeedSequence([int(seed), key]).generate_state(1, np.uint64)[0] >> 1)
