"""Evolutionarily stable patch-selection strategies.

A strategy is an ESS when every other strategy has a negative invasion rate
against it. Candidates come from three places: pure-strategy inequalities,
a bisection of the two-patch selection gradient, and (for more patches) a
multiplicative fixed-point iteration with face enumeration as a fallback.
Every candidate is checked against sampled alternative strategies before it
is returned.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .analytic import TOL_DEGENERATE, TOL_ZERO, invasion_gradient, stochastic_growth_rate
from .errors import (
    IndexOutOfRange,
    NoPersistentStrategy,
    NonpersistentStrategy,
    NoViablePatch,
    SigmaNotPositiveDefinite,
)
from .landscape import TOL_SUPPORT, Landscape, Strategy, _as_vector, kappa_inner
from .rng import DEFAULT_SEED, keyed_rng

log = logging.getLogger(__name__)

TOL_RESIDUAL = 1e-10
# the invasion rate vanishes quadratically at an ESS, so alternatives closer than
# sqrt(machine epsilon) have rates below double-precision resolution
TOL_RESOLVE = math.sqrt(np.finfo(float).eps)


class EssKind(str, enum.Enum):
    PURE = "PureESS"
    MIXED = "MixedESS"
    NOT_FOUND = "NotFound"


@dataclass(frozen=True)
class Certificate:
    samples: int
    checked: int
    violations: int
    worst: float
    worst_beta: tuple[float, ...] | None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "checked": self.checked,
            "violations": self.violations,
            "worst": self.worst,
            "worst_beta": list(self.worst_beta) if self.worst_beta is not None else None,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class EssOptions:
    tol_residual: float = TOL_RESIDUAL
    xtol: float = 1e-12
    eta: float = 0.1
    max_iter: int = 20000
    verify_samples: int = 1000
    seed: int = DEFAULT_SEED
    tol_zero: float = TOL_ZERO
    regularize: float | None = None


@dataclass(frozen=True)
class EssResult:
    strategy: Strategy
    support: tuple[int, ...]
    residuals: np.ndarray
    residual_norm: float
    kind: EssKind
    certificate: Certificate | None
    landscape: Landscape
    trace: list[str] = field(default_factory=list)

    @property
    def lam(self) -> float:
        """Lagrange multiplier of the simplex constraint, ``-a.Sigma a / 2``."""
        a = self.strategy.alpha
        return -0.5 * float(a @ self.landscape.sigma @ a)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.alpha.tolist(),
            "support": list(self.support),
            "residuals": self.residuals.tolist(),
            "residual_norm": self.residual_norm,
            "lambda": self.lam,
            "kind": self.kind.value,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "trace_length": len(self.trace),
        }


def pure_ess_check(L: Landscape, i: int) -> bool:
    """Whether staying in patch ``i`` (0-based) resists every other strategy.

    Strict inequality ``mu_j - s_jj/2 < -s_jj/2 + s_ij - s_ii/2`` for all ``j != i``.
    """
    if not 0 <= i < L.n:
        raise IndexOutOfRange(f"patch index {i} outside 0..{L.n - 1}")
    return all(pure_ess_margins(L, i)[j] > 0 for j in range(L.n) if j != i)


def pure_ess_margins(L: Landscape, i: int) -> np.ndarray:
    """Slack in each pure-ESS inequality; positive means satisfied. Entry ``i`` is 0."""
    S = L.sigma
    m = -S.diagonal() / 2 + S[i] - S[i, i] / 2 - (L.mu - S.diagonal() / 2)
    m[i] = 0.0
    return m


def _residual_full(L: Landscape, a: np.ndarray) -> np.ndarray:
    return invasion_gradient(L, a) + 0.5 * float(a @ L.sigma @ a)


def ess_residual(L: Landscape, a) -> np.ndarray:
    """Stationarity residuals of the invasion rate on the support of ``a``.

    Entry ``i`` is ``mu_i - kappa_i a_i (a.(2 mu - Sigma a)) / (2<a,a>_kappa)
    - (Sigma a)_i + a.Sigma a / 2``; all vanish at an ESS.
    """
    a = _as_vector(a)
    if stochastic_growth_rate(L, a) <= 0:
        raise NonpersistentStrategy("residuals need a persisting resident")
    sup = Strategy(a).support
    return _residual_full(L, a)[list(sup)]


def _score(L: Landscape, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Invasion rates of each row of ``b`` against resident ``a``."""
    r_b = b @ L.mu - 0.5 * np.einsum("pi,ij,pj->p", b, L.sigma, b)
    r_a = stochastic_growth_rate(L, a)
    if r_a <= 0:
        return r_b
    return r_b - (b @ (L.kappa * a)) / kappa_inner(a, a, L) * r_a


def _deterministic_betas(n: int) -> np.ndarray:
    rows = list(np.eye(n))
    for i, j in itertools.combinations(range(n), 2):
        m = np.zeros(n)
        m[i] = m[j] = 0.5
        rows.append(m)
    return np.array(rows)


def verify_ess(
    L: Landscape, a, samples: int = 1000, seed: int = DEFAULT_SEED, tol_zero: float = TOL_ZERO
) -> Certificate:
    """Monte Carlo check that no sampled strategy can invade ``a``.

    Alternatives are all vertices and edge midpoints plus ``samples`` uniform
    draws from the simplex. An alternative ``b`` counts as a violation when
    its invasion rate is at least ``-tol_zero * |b - a|^2``; the invasion
    rate vanishes quadratically at an ESS, so the tolerance shrinks with it.
    Alternatives within :data:`TOL_RESOLVE` of ``a`` (max norm) are skipped
    because their rates cannot be told apart from rounding noise.
    """
    a = _as_vector(a)
    n = L.n
    betas = _deterministic_betas(n)
    if samples > 0:
        betas = np.vstack([betas, keyed_rng(seed, 0xE55).dirichlet(np.ones(n), size=samples)])
    far = np.max(np.abs(betas - a), axis=1) >= max(TOL_DEGENERATE, TOL_RESOLVE)
    betas = betas[far]
    rates = _score(L, a, betas)
    dist2 = np.sum((betas - a) ** 2, axis=1)
    bad = rates >= -tol_zero * dist2
    if betas.shape[0]:
        k = int(np.argmax(rates + tol_zero * dist2))
        worst, worst_beta = float(rates[k]), tuple(betas[k].tolist())
    else:
        worst, worst_beta = -math.inf, None
    return Certificate(int(samples), int(betas.shape[0]), int(bad.sum()), worst, worst_beta)


def deterministic_limit_ess(L: Landscape) -> Strategy:
    """Occupancy proportional to carrying capacity ``mu_i / kappa_i`` over patches with ``mu_i > 0``."""
    w = np.where(L.mu > 0, L.mu / L.kappa, 0.0)
    if not np.any(w > 0):
        raise NoViablePatch("no patch has positive intrinsic growth")
    return Strategy(w / w.sum())


def two_patch_gradient_gap(L: Landscape, a1: float) -> float:
    """Difference of invasion-rate partial derivatives at ``b = a = (a1, 1 - a1)``."""
    g = invasion_gradient(L, np.array([a1, 1.0 - a1]))
    return float(g[0] - g[1])


def two_patch_fixed_point(L: Landscape, a) -> np.ndarray:
    """Right-hand side of the uncorrelated two-patch ESS fixed-point relation.

    ``(mu_i + a.Sigma a / 2) / (kappa_i (mu.a - a.Sigma a / 2) / <a,a>_kappa + s_ii)``;
    an interior ESS of an uncorrelated landscape maps to itself.
    """
    a = _as_vector(a)
    s = float(a @ L.sigma @ a)
    m = (float(L.mu @ a) - s / 2) / kappa_inner(a, a, L)
    return (L.mu + s / 2) / (L.kappa * m + L.sigma.diagonal())


# ---------------------------------------------------------------- solver


def _make_result(L, alpha, kind, opts, trace, certificate=None) -> EssResult:
    s = Strategy(alpha)
    res = ess_residual(L, s) if stochastic_growth_rate(L, s) > 0 else np.full(len(s.support), np.nan)
    norm = float(np.max(np.abs(res))) if res.size else 0.0
    if certificate is None:
        certificate = verify_ess(L, s, opts.verify_samples, opts.seed, opts.tol_zero)
    return EssResult(s, s.support, res, norm, kind, certificate, L, trace)


def _accept(result: EssResult, opts: EssOptions) -> bool:
    if not result.certificate.passed:
        return False
    return result.kind == EssKind.PURE or result.residual_norm <= opts.tol_residual


def _solve_face(L: Landscape, support: tuple[int, ...], start: np.ndarray | None) -> np.ndarray | None:
    S = list(support)
    k = len(S)
    x0 = np.full(k, 1.0 / k) if start is None else np.clip(start[S], 1e-6, None)
    x0 = x0 / x0.sum()

    def eqs(x):
        a = np.zeros(L.n)
        a[S] = x
        res = _residual_full(L, a)[S]
        return np.concatenate([res[:-1], [x.sum() - 1.0]])

    sol = optimize.root(eqs, x0, method="hybr", options={"xtol": 1e-14})
    x = sol.x
    if not np.all(np.isfinite(x)) or np.any(x <= TOL_SUPPORT):
        return None
    a = np.zeros(L.n)
    a[S] = x / x.sum()
    if stochastic_growth_rate(L, a) <= 0:
        return None
    full = _residual_full(L, a)
    off = [j for j in range(L.n) if j not in S]
    if off and np.any(full[off] >= 0):
        return None
    return a


def _fixed_point(L: Landscape, opts: EssOptions, trace: list[str]) -> np.ndarray:
    a = np.full(L.n, 1.0 / L.n)
    eta = opts.eta

    def metric(v):
        return float(np.max(np.abs(v * _residual_full(L, v))))

    m = metric(a)
    for it in range(opts.max_iter):
        if m < opts.tol_residual * 1e-2 or eta < 1e-12:
            break
        trial = a * np.exp(eta * _residual_full(L, a))
        trial /= trial.sum()
        mt = metric(trial)
        if mt > m:
            eta /= 2
            continue
        a, m = trial, mt
    trace.append(f"fixed-point: {it + 1} iterations, metric {m:.3g}, eta {eta:.3g}")
    return a


def solve_ess(L: Landscape, opts: EssOptions | None = None) -> EssResult:
    """Find an evolutionarily stable strategy for ``L``.

    Order of search: pure strategies; for two patches, bisection of
    :func:`two_patch_gradient_gap`; otherwise a multiplicative fixed-point
    iteration followed by enumeration of simplex faces. If nothing passes
    certification the best candidate is returned with ``kind=NotFound``.
    """
    opts = opts or EssOptions()
    if opts.regularize:
        L = L.regularized(opts.regularize)
    if not L.is_positive_definite:
        raise SigmaNotPositiveDefinite(
            f"smallest covariance eigenvalue {L.eigenvalues[0]:.3g}; pass a regularization"
        )
    n = L.n
    screen = [stochastic_growth_rate(L, np.eye(n)[i]) for i in range(n)]
    screen.append(stochastic_growth_rate(L, np.full(n, 1.0 / n)))
    if max(screen) <= 0:
        raise NoPersistentStrategy("no vertex or uniform strategy has a positive growth rate")

    trace: list[str] = []
    candidates: list[EssResult] = []

    for i in range(n):
        if pure_ess_check(L, i) and screen[i] > 0:
            r = _make_result(L, np.eye(n)[i], EssKind.PURE, opts, trace)
            trace.append(f"pure {i}: certificate violations {r.certificate.violations}")
            if r.certificate.passed:
                return r
            candidates.append(r)

    if n == 2:
        found = _solve_two_patch(L, opts, trace)
        candidates.extend(found)
    else:
        a = _fixed_point(L, opts, trace)
        sup = tuple(int(j) for j in np.flatnonzero(a > 1e-6))
        polished = _solve_face(L, sup, a) if len(sup) > 1 else None
        if polished is not None:
            candidates.append(_make_result(L, polished, EssKind.MIXED, opts, trace))
        if not any(_accept(c, opts) for c in candidates):
            for k in range(n, 1, -1):
                for face in itertools.combinations(range(n), k):
                    a_face = _solve_face(L, face, a)
                    if a_face is None:
                        continue
                    trace.append(f"face {face}: candidate {np.round(a_face, 6).tolist()}")
                    candidates.append(_make_result(L, a_face, EssKind.MIXED, opts, trace))
                    if _accept(candidates[-1], opts):
                        break
                if any(_accept(c, opts) for c in candidates):
                    break

    candidates = [_reduce_face(L, c, opts, trace) for c in candidates]
    good = [c for c in candidates if _accept(c, opts)]
    if good:
        best = min(good, key=lambda c: (c.certificate.violations, c.residual_norm))
        return EssResult(best.strategy, best.support, best.residuals, best.residual_norm, best.kind, best.certificate, L, trace)
    if candidates:
        best = min(candidates, key=lambda c: (c.certificate.violations, np.nan_to_num(c.residual_norm, nan=np.inf)))
        trace.append("no candidate passed certification")
        return EssResult(best.strategy, best.support, best.residuals, best.residual_norm, EssKind.NOT_FOUND, best.certificate, L, trace)
    # nothing to certify: report the persisting vertex closest to satisfying the pure-ESS inequalities
    viable = [i for i in range(n) if screen[i] > 0]
    if viable:
        i = max(viable, key=lambda i: min(np.delete(pure_ess_margins(L, i), i)))
        a = np.eye(n)[i]
    else:
        a = np.full(n, 1.0 / n)
    trace.append("no candidate found")
    return _make_result(L, a, EssKind.NOT_FOUND, opts, trace)


def _reduce_face(L: Landscape, c: EssResult, opts: EssOptions, trace: list[str]) -> EssResult:
    # components in (0, tol_support) are dropped by Strategy; nothing to re-solve unless
    # the candidate has tiny-but-present mass that fails certification
    a = c.strategy.alpha
    tiny = (a > 0) & (a <= 1e-9)
    if not np.any(tiny) or _accept(c, opts):
        return c
    face = tuple(int(j) for j in np.flatnonzero(a > 1e-9))
    if len(face) == 1:
        alt = _make_result(L, np.eye(L.n)[face[0]], EssKind.PURE, opts, trace)
    else:
        sol = _solve_face(L, face, a)
        if sol is None:
            return c
        alt = _make_result(L, sol, EssKind.MIXED, opts, trace)
    trace.append(f"reduced face {face}: violations {alt.certificate.violations}")
    return alt if (alt.certificate.violations, alt.residual_norm) < (c.certificate.violations, c.residual_norm) else c


def _solve_two_patch(L: Landscape, opts: EssOptions, trace: list[str]) -> list[EssResult]:
    def g(x):
        return two_patch_gradient_gap(L, x)

    grid = np.linspace(0.0, 1.0, 1001)
    vals = np.array([g(x) for x in grid])
    changes = [k for k in range(len(grid) - 1) if vals[k] > 0 >= vals[k + 1] or vals[k] < 0 <= vals[k + 1]]
    if len(changes) > 1:
        trace.append(f"gradient gap changes sign {len(changes)} times")
        log.info("two-patch gradient gap has %d sign changes", len(changes))

    brackets = []
    if vals[0] > 0 and vals[-1] < 0:
        brackets.append((0.0, 1.0))
    brackets.extend((grid[k], grid[k + 1]) for k in changes)
    out = []
    seen: list[float] = []
    for lo, hi in brackets:
        if g(lo) == 0:
            root = lo
        elif g(hi) == 0:
            root = hi
        else:
            root = optimize.bisect(g, lo, hi, xtol=opts.xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
        if any(abs(root - s) < 1e-9 for s in seen):
            continue
        seen.append(root)
        a = np.array([root, 1.0 - root])
        if not (0 < root < 1) or stochastic_growth_rate(L, a) <= 0:
            trace.append(f"root a1={root!r} rejected (boundary or non-persisting)")
            continue
        r = _make_result(L, a, EssKind.MIXED, opts, trace)
        trace.append(f"bisection root a1={root!r}: residual {r.residual_norm:.3g}, violations {r.certificate.violations}")
        out.append(r)
        if _accept(r, opts):
            break
    return out
