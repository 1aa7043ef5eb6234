"""Closed-form growth rates, stationary laws, invasion rates and outcome classification."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateNoise, DegenerateStrategy, DimensionMismatch, NoStationaryDistribution
from .landscape import Landscape, _as_vector, kappa_inner

TOL_ZERO = 1e-9
TOL_DEGENERATE = 1e-12


def _check(L: Landscape, *vectors: np.ndarray) -> None:
    for v in vectors:
        if v.shape != (L.n,):
            raise DimensionMismatch(f"strategy length {v.shape} does not match {L.n} patches")


def noise_variance(L: Landscape, a) -> float:
    """``a . Sigma a``: variance rate of the log-abundance of a strategy."""
    a = _as_vector(a)
    _check(L, a)
    return float(a @ L.sigma @ a)


def stochastic_growth_rate(L: Landscape, a) -> float:
    """Long-run growth rate ``a.mu - a.Sigma a / 2`` of a rare population."""
    a = _as_vector(a)
    _check(L, a)
    return float(a @ L.mu - 0.5 * (a @ L.sigma @ a))


@dataclass(frozen=True)
class GammaStationary:
    theta: float
    k: float

    @property
    def mean(self) -> float:
        return self.k * self.theta

    def frozen(self):
        """The matching ``scipy.stats.gamma`` distribution."""
        from scipy import stats

        return stats.gamma(a=self.k, scale=self.theta)


def stationary_gamma(L: Landscape, a) -> GammaStationary:
    """Gamma law of total abundance for a persisting monomorphic population."""
    a = _as_vector(a)
    r = stochastic_growth_rate(L, a)
    s = noise_variance(L, a)
    if s <= 0:
        raise DegenerateNoise("strategy feels no noise; the stationary law is a point mass")
    if r <= 0:
        raise NoStationaryDistribution(f"stochastic growth rate {r:.6g} is not positive")
    q = kappa_inner(a, a, L)
    return GammaStationary(theta=s / (2.0 * q), k=2.0 * float(a @ L.mu) / s - 1.0)


def stationary_mean(L: Landscape, a) -> float:
    """Long-run time-averaged abundance; zero for a non-persisting strategy."""
    a = _as_vector(a)
    r = stochastic_growth_rate(L, a)
    return max(r, 0.0) / kappa_inner(a, a, L)


def invasion_rate(L: Landscape, resident, invader) -> float:
    """Growth rate of a rare ``invader`` against a resident at stationarity."""
    a = _as_vector(resident)
    b = _as_vector(invader)
    _check(L, a, b)
    r_b = stochastic_growth_rate(L, b)
    r_a = stochastic_growth_rate(L, a)
    if r_a <= 0:
        return r_b
    return r_b - kappa_inner(a, b, L) / kappa_inner(a, a, L) * r_a


def invasion_gradient(L: Landscape, a) -> np.ndarray:
    """Partial derivatives of ``invasion_rate(L, a, b)`` in ``b`` at ``b = a``.

    The simplex constraint is ignored; the resident is assumed to persist.
    """
    a = _as_vector(a)
    _check(L, a)
    q = kappa_inner(a, a, L)
    return L.mu - L.sigma @ a - L.kappa * a * stochastic_growth_rate(L, a) / q


def competitive_effects(L: Landscape, a, b) -> tuple[float, float]:
    """Return ``(C_ab, C_ba)``: the effect of ``a`` on ``b`` and of ``b`` on ``a``."""
    a = _as_vector(a)
    b = _as_vector(b)
    qa = kappa_inner(a, a, L)
    qb = kappa_inner(b, b, L)
    if qa <= 0 or qb <= 0:
        raise DegenerateStrategy("strategy has zero competition norm")
    ab = kappa_inner(a, b, L)
    return ab / qb, ab / qa


class Outcome(str, enum.Enum):
    COEXISTENCE = "Coexistence"
    ALPHA_EXCLUDES_BETA = "AlphaExcludesBeta"
    BETA_EXCLUDES_ALPHA = "BetaExcludesAlpha"
    BOTH_EXTINCT = "BothExtinct"
    BOUNDARY = "Boundary"
    DEGENERATE = "Degenerate"

    def mirrored(self) -> "Outcome":
        return {
            Outcome.ALPHA_EXCLUDES_BETA: Outcome.BETA_EXCLUDES_ALPHA,
            Outcome.BETA_EXCLUDES_ALPHA: Outcome.ALPHA_EXCLUDES_BETA,
        }.get(self, self)


@dataclass(frozen=True)
class InvasionReport:
    r_alpha: float
    r_beta: float
    i_ab: float
    i_ba: float
    c_ab: float
    c_ba: float
    outcome: Outcome

    FIELDS = ("r_alpha", "r_beta", "i_ab", "i_ba", "c_ab", "c_ba", "outcome")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outcome"] = self.outcome.value
        return d


def _decide(r_a: float, r_b: float, i_ab: float, i_ba: float, tol: float) -> Outcome:
    if r_a <= 0 and r_b <= 0:
        return Outcome.BOTH_EXTINCT
    if i_ab > tol and i_ba > tol:
        return Outcome.COEXISTENCE
    if r_a > tol and i_ab < -tol:
        return Outcome.ALPHA_EXCLUDES_BETA
    if r_b > tol and i_ba < -tol:
        return Outcome.BETA_EXCLUDES_ALPHA
    return Outcome.BOUNDARY


def classify_outcome(L: Landscape, a, b, tol_zero: float = TOL_ZERO) -> InvasionReport:
    """Invasion rates both ways and the resulting long-run outcome.

    Exclusion needs the excluding strategy to persist on its own and the
    other to have a negative invasion rate; coexistence needs both invasion
    rates positive. Anything within ``tol_zero`` of a decision threshold is
    reported as ``Boundary``.
    """
    av = _as_vector(a)
    bv = _as_vector(b)
    _check(L, av, bv)
    r_a = stochastic_growth_rate(L, av)
    r_b = stochastic_growth_rate(L, bv)
    i_ab = invasion_rate(L, av, bv)
    i_ba = invasion_rate(L, bv, av)
    c_ab, c_ba = competitive_effects(L, av, bv)
    if np.max(np.abs(av - bv)) < TOL_DEGENERATE:
        outcome = Outcome.DEGENERATE
    else:
        outcome = _decide(r_a, r_b, i_ab, i_ba, tol_zero)
    return InvasionReport(r_a, r_b, i_ab, i_ba, c_ab, c_ba, outcome)
