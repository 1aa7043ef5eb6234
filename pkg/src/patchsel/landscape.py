"""Landscapes, patch-selection strategies and dispersal rate matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidStrategy,
    NonPositiveKappa,
    NotPositiveSemidefinite,
    NoUniqueStationary,
)

TOL_PSD = 1e-10
TOL_SIMPLEX = 1e-9
TOL_SUPPORT = 1e-12


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must have {ndim} dimension(s), got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Landscape:
    """Patch growth rates ``mu``, competition strengths ``kappa`` and noise covariance ``sigma``.

    Use :func:`build_landscape` to construct a validated instance.
    """

    n: int
    mu: np.ndarray
    kappa: np.ndarray
    sigma: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Landscape):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.kappa, other.kappa)
            and np.array_equal(self.sigma, other.sigma)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.mu.tobytes(), self.kappa.tobytes(), self.sigma.tobytes()))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.sigma)

    @property
    def is_positive_definite(self) -> bool:
        w = self.eigenvalues
        scale = max(float(np.max(np.abs(w))), 1.0)
        return bool(w[0] > TOL_PSD * scale)

    @cached_property
    def gamma(self) -> np.ndarray:
        """Noise loading matrix with ``gamma.T @ gamma == sigma``."""
        if self.is_positive_definite:
            try:
                return np.linalg.cholesky(self.sigma).T.copy()
            except np.linalg.LinAlgError:
                pass
        w, v = np.linalg.eigh(self.sigma)
        return np.sqrt(np.clip(w, 0.0, None))[:, None] * v.T

    def noise_loading(self, alpha: "Strategy | np.ndarray") -> np.ndarray:
        """Vector ``g`` such that ``g @ dB`` is the noise felt by a strategy."""
        return self.gamma @ _as_vector(alpha)

    def regularized(self, eps: float) -> "Landscape":
        """Copy with ``sigma + eps * I``."""
        return build_landscape(self.n, self.mu, self.kappa, self.sigma + eps * np.eye(self.n))

    def with_kappa(self, kappa: Sequence[float]) -> "Landscape":
        return build_landscape(self.n, self.mu, kappa, self.sigma)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mu": self.mu.tolist(),
            "kappa": self.kappa.tolist(),
            "sigma": self.sigma.tolist(),
        }


def build_landscape(n: int, mu, kappa, sigma) -> Landscape:
    """Validate and freeze landscape inputs.

    ``sigma`` is symmetrized as ``(sigma + sigma.T) / 2`` before the
    positive-semidefinite check, which uses a tolerance relative to the
    largest eigenvalue.
    """
    n = int(n)
    if n < 1:
        raise DimensionMismatch(f"patch count must be >= 1, got {n}")
    mu = np.array(mu, dtype=float).reshape(-1)
    kappa = np.array(kappa, dtype=float).reshape(-1)
    sigma = np.array(sigma, dtype=float)
    if sigma.ndim == 0 and n == 1:
        sigma = sigma.reshape(1, 1)
    if mu.shape != (n,) or kappa.shape != (n,) or sigma.shape != (n, n):
        raise DimensionMismatch(
            f"expected mu, kappa of length {n} and sigma {n}x{n}; "
            f"got {mu.shape}, {kappa.shape}, {sigma.shape}"
        )
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(kappa)) and np.all(np.isfinite(sigma))):
        raise DimensionMismatch("landscape entries must be finite")
    if np.any(kappa <= 0):
        raise NonPositiveKappa(f"kappa must be strictly positive, got {kappa.tolist()}")
    sigma = 0.5 * (sigma + sigma.T)
    w = np.linalg.eigvalsh(sigma)
    scale = max(float(np.max(np.abs(w))), 1.0)
    if w[0] < -TOL_PSD * scale:
        raise NotPositiveSemidefinite(w[0])
    return Landscape(n, _frozen(mu, 1, "mu"), _frozen(kappa, 1, "kappa"), _frozen(sigma, 2, "sigma"))


def symmetric_landscape(n: int = 2, a: float = 1.0, sigma2: float = 1.0, kappa: float = 1.0) -> Landscape:
    """Equal growth, equal competition, uncorrelated equal-variance noise."""
    return build_landscape(n, np.full(n, a), np.full(n, kappa), sigma2 * np.eye(n))


@dataclass(frozen=True, eq=False)
class Strategy:
    """Patch-selection frequencies on the probability simplex.

    Inputs within ``TOL_SIMPLEX`` of the simplex are renormalized; anything
    further away raises :class:`InvalidStrategy`.
    """

    alpha: np.ndarray = field()

    def __init__(self, alpha):
        a = np.array(alpha, dtype=float).reshape(-1)
        if a.size == 0 or not np.all(np.isfinite(a)):
            raise InvalidStrategy(f"strategy must be a finite nonempty vector, got {alpha!r}")
        if np.any(a < -TOL_SIMPLEX):
            raise InvalidStrategy(f"negative frequency in {a.tolist()}")
        total = a.sum()
        if abs(total - 1.0) > TOL_SIMPLEX:
            raise InvalidStrategy(f"frequencies sum to {total!r}, not 1")
        a = np.clip(a, 0.0, None)
        a = a / a.sum()
        if not np.any(a > TOL_SUPPORT):
            raise InvalidStrategy("strategy has empty support")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        return self.alpha.size

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.alpha > TOL_SUPPORT))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Strategy):
            return NotImplemented
        return np.array_equal(self.alpha, other.alpha)

    def __hash__(self) -> int:
        return hash(self.alpha.tobytes())

    def __repr__(self) -> str:
        return f"Strategy({self.alpha.tolist()})"

    def __array__(self, dtype=None, copy=None):
        return self.alpha if dtype is None else self.alpha.astype(dtype)

    @classmethod
    def vertex(cls, n: int, i: int) -> "Strategy":
        e = np.zeros(n)
        e[i] = 1.0
        return cls(e)

    @classmethod
    def uniform(cls, n: int) -> "Strategy":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def two_patch(cls, a1: float) -> "Strategy":
        return cls([a1, 1.0 - a1])


def _as_vector(x) -> np.ndarray:
    return x.alpha if isinstance(x, Strategy) else np.asarray(x, dtype=float)


def kappa_inner(x, y, L: Landscape) -> float:
    """Competition-weighted inner product ``sum_i kappa_i x_i y_i``."""
    x = _as_vector(x)
    y = _as_vector(y)
    if x.shape != (L.n,) or y.shape != (L.n,):
        raise DimensionMismatch(f"vectors must have length {L.n}, got {x.shape} and {y.shape}")
    return float(np.sum(L.kappa * x * y))


@dataclass(frozen=True, eq=False)
class DispersalMatrix:
    """Movement rate matrix ``d`` (rows sum to zero) scaled by speed ``delta``."""

    d: np.ndarray
    delta: float = 1.0

    def __init__(self, d, delta: float = 1.0):
        d = np.array(d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionMismatch(f"rate matrix must be square, got shape {d.shape}")
        off = d - np.diag(np.diag(d))
        if np.any(off < 0):
            raise InvalidStrategy("off-diagonal dispersal rates must be nonnegative")
        scale = max(float(np.max(np.abs(d))), 1.0)
        if np.any(np.abs(d.sum(axis=1)) > 1e-12 * scale * d.shape[0]):
            raise InvalidStrategy("dispersal matrix rows must sum to zero")
        if delta < 0:
            raise InvalidStrategy(f"dispersal speed must be >= 0, got {delta}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "delta", float(delta))

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @classmethod
    def from_offdiagonal(cls, rates, delta: float = 1.0) -> "DispersalMatrix":
        rates = np.array(rates, dtype=float)
        np.fill_diagonal(rates, 0.0)
        np.fill_diagonal(rates, -rates.sum(axis=1))
        return cls(rates, delta)


def dispersal_stationary(D: DispersalMatrix) -> Strategy:
    """Stationary distribution ``alpha`` of the rate matrix, ``alpha @ d == 0``.

    Solved in the least-squares sense on ``d.T`` with a normalization row
    appended; a rank-deficient system means the chain is reducible.
    """
    n = D.n
    A = np.vstack([D.d.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    rank = np.linalg.matrix_rank(A)
    if rank < n:
        raise NoUniqueStationary(n - rank)
    alpha, *_ = np.linalg.lstsq(A, b, rcond=None)
    return Strategy(alpha)
