"""Grid sweeps over strategy pairs or a landscape parameter."""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .analytic import InvasionReport, Outcome, classify_outcome, stationary_mean, TOL_ZERO
from .errors import InvalidConfig
from .ess import EssOptions, solve_ess
from .io import write_csv
from .landscape import Landscape, Strategy, build_landscape

_PARAM = re.compile(r"^(mu|kappa)_(\d+)$|^sigma_(\d)(\d)$|^noise$")


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep and how finely.

    ``kind="strategy"`` walks a grid of first-patch frequencies for a resident
    (``alpha1``) and an invader (``beta1``) on a two-patch landscape.
    ``kind="ess"`` varies one landscape parameter (``mu_i``, ``kappa_i``,
    ``sigma_ij`` with 1-based indices, or ``noise`` to scale the whole
    covariance) and solves for the ESS at each value.
    """

    landscape: Landscape
    kind: str = "strategy"
    resolution: int = 101
    alpha_range: tuple[float, float] = (0.0, 1.0)
    beta_range: tuple[float, float] = (0.0, 1.0)
    param: str | None = None
    values: tuple[float, ...] = ()
    tol_zero: float = TOL_ZERO
    ess_options: EssOptions = field(default_factory=EssOptions)
    workers: int = 1

    def __post_init__(self):
        if self.kind not in ("strategy", "ess"):
            raise InvalidConfig(f"unknown sweep kind {self.kind!r}")
        if self.kind == "strategy":
            if self.landscape.n != 2:
                raise InvalidConfig("strategy sweeps need a two-patch landscape")
            if self.resolution < 1:
                raise InvalidConfig("resolution must be >= 1")
            for lo, hi in (self.alpha_range, self.beta_range):
                if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
                    raise InvalidConfig("swept frequencies must stay within [0, 1]")
        else:
            if self.param is None or not _PARAM.match(self.param):
                raise InvalidConfig(f"unknown sweep parameter {self.param!r}")
            if len(self.values) < 1:
                raise InvalidConfig("ESS sweep needs at least one parameter value")

    def axis(self, rng: tuple[float, float]) -> np.ndarray:
        return np.linspace(rng[0], rng[1], self.resolution)


def with_parameter(L: Landscape, name: str, value: float) -> Landscape:
    m = _PARAM.match(name)
    if m is None:
        raise InvalidConfig(f"unknown sweep parameter {name!r}")
    mu, kappa, sigma = L.mu.copy(), L.kappa.copy(), L.sigma.copy()
    if m.group(1):
        i = int(m.group(2)) - 1
        if not 0 <= i < L.n:
            raise InvalidConfig(f"parameter index out of range in {name!r}")
        (mu if m.group(1) == "mu" else kappa)[i] = value
    elif m.group(3):
        i, j = int(m.group(3)) - 1, int(m.group(4)) - 1
        if not (0 <= i < L.n and 0 <= j < L.n):
            raise InvalidConfig(f"parameter index out of range in {name!r}")
        sigma[i, j] = sigma[j, i] = value
    else:
        sigma = sigma * value
    return build_landscape(L.n, mu, kappa, sigma)


def strategy_rows(spec: SweepSpec):
    """Rows ``(alpha1, beta1, report)`` in row-major order over ``(alpha1, beta1)``."""
    a_axis = spec.axis(spec.alpha_range)
    b_axis = spec.axis(spec.beta_range)
    L = spec.landscape

    def row(a1: float) -> list[tuple[float, float, InvasionReport]]:
        a = Strategy.two_patch(a1)
        return [(a1, b1, classify_outcome(L, a, Strategy.two_patch(b1), spec.tol_zero)) for b1 in b_axis]

    for block in _ordered_map(row, a_axis, spec.workers):
        yield from block


def ess_rows(spec: SweepSpec):
    def one(v: float):
        L = with_parameter(spec.landscape, spec.param, v)
        r = solve_ess(L, spec.ess_options)
        return v, r, stationary_mean(r.landscape, r.strategy)

    yield from _ordered_map(one, spec.values, spec.workers)


def _ordered_map(fn, items, workers: int):
    if workers <= 1:
        for it in items:
            yield fn(it)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, items)


STRATEGY_HEADER = ["alpha1", "beta1", *InvasionReport.FIELDS]


def sweep_grid(spec: SweepSpec, stream: IO[str], comment: str | None = None) -> int:
    """Write the sweep as CSV to ``stream`` and return the number of rows."""
    count = 0

    def counted(rows):
        nonlocal count
        for r in rows:
            count += 1
            yield r

    if spec.kind == "strategy":
        rows = ([a1, b1, *(getattr(rep, f) for f in InvasionReport.FIELDS)] for a1, b1, rep in strategy_rows(spec))
        write_csv(stream, STRATEGY_HEADER, counted(rows), comment)
    else:
        n = spec.landscape.n
        header = [spec.param, *(f"alpha{i + 1}" for i in range(n)), "kind", "mean_abundance"]
        rows = ([v, *r.strategy.alpha, r.kind.value, mean] for v, r, mean in ess_rows(spec))
        write_csv(stream, header, counted(rows), comment)
    return count


def coexistence_count(spec: SweepSpec) -> int:
    return sum(rep.outcome == Outcome.COEXISTENCE for _, _, rep in strategy_rows(spec))
