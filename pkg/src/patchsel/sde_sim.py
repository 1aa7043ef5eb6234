"""Sample paths of the monomorphic, dimorphic, linearized and dispersal systems.

All coupled equations draw from a single ``n``-dimensional standard Gaussian
increment per step, mapped through the landscape's noise loading, so every
pairwise noise correlation is realized exactly. Positivity-constrained
equations are integrated in log space; the dispersal system has an
inter-patch transfer term and is integrated with plain Euler instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numba
import numpy as np

from .errors import (
    BurnInTooLong,
    DimensionMismatch,
    InvalidConfig,
    NonPositiveInitial,
    NoUniqueStationary,
    StepTooLarge,
    UnstableStep,
)
from .landscape import DispersalMatrix, Landscape, _as_vector, build_landscape, dispersal_stationary, kappa_inner
from .rng import DEFAULT_SEED, keyed_rng

LOG_EULER = "LogEuler"
EULER = "Euler"
EXTINCTION_LEVEL = 1e-12
OVERFLOW_GUARD = 10.0
CHUNK_STEPS = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    """Time grid, seed and ensemble size.

    ``burn_in`` defaults to 10% of ``t_max``. Only every ``record_every``-th
    grid point is stored on the trajectory; summary statistics always use the
    full grid.
    """

    dt: float = 1e-3
    t_max: float = 1000.0
    burn_in: float | None = None
    seed: int = DEFAULT_SEED
    replicates: int = 8
    scheme: str = LOG_EULER
    record_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.dt <= self.t_max):
            raise InvalidConfig(f"need 0 < dt <= t_max, got dt={self.dt}, t_max={self.t_max}")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", 0.1 * self.t_max)
        if not (0 <= self.burn_in < self.t_max):
            raise InvalidConfig(f"need 0 <= burn_in < t_max, got {self.burn_in}")
        if self.replicates < 1:
            raise InvalidConfig("replicates must be >= 1")
        if self.scheme not in (LOG_EULER, EULER):
            raise InvalidConfig(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise InvalidConfig("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def burn_steps(self) -> int:
        return min(int(math.ceil(self.burn_in / self.dt - 1e-9)), self.n_steps - 1)

    def with_(self, **changes) -> "SimConfig":
        if "t_max" in changes and "burn_in" not in changes:
            changes["burn_in"] = None
        return replace(self, **changes)


@dataclass(frozen=True)
class TrajectoryStats:
    time_average: np.ndarray
    log_slope: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    final: np.ndarray
    extinct: tuple[bool, ...]
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "time_average": self.time_average.tolist(),
            "log_slope": self.log_slope.tolist(),
            "minimum": self.minimum.tolist(),
            "maximum": self.maximum.tolist(),
            "final": self.final.tolist(),
            "extinct": list(self.extinct),
        }
        d.update({k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.extra.items()})
        return d


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    labels: tuple[str, ...]
    stats: TrajectoryStats
    dt: float
    replicate: int = 0

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def component(self, name_or_index) -> np.ndarray:
        i = self.labels.index(name_or_index) if isinstance(name_or_index, str) else int(name_or_index)
        return self.states[:, i]

    def value_at(self, t: float, component=0) -> float:
        i = int(np.searchsorted(self.times, t - 1e-9 * max(1.0, abs(t))))
        return float(self.component(component)[min(i, len(self.times) - 1)])


def standard_increments(cfg: SimConfig, dim: int, replicate: int = 0):
    """Yield chunks of standard normal draws, shape ``(steps, dim)``, for one replicate."""
    rng = keyed_rng(cfg.seed, replicate)
    remaining = cfg.n_steps
    while remaining > 0:
        m = min(CHUNK_STEPS, remaining)
        yield rng.standard_normal((m, dim))
        remaining -= m


def _chunks_from(increments: np.ndarray, cfg: SimConfig, dim: int):
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (cfg.n_steps, dim):
        raise DimensionMismatch(f"expected increments of shape {(cfg.n_steps, dim)}, got {increments.shape}")
    for start in range(0, cfg.n_steps, CHUNK_STEPS):
        yield increments[start : start + CHUNK_STEPS]


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True, nogil=True)
def _pair_chunk(state, prm, gx, gy, Z, sqdt, dt, log_scheme, y_on, guard, stride, k0, burn_k, rec, pos, acc):
    # state: (x, y) in log space for LogEuler, arithmetic otherwise
    # prm: mux, muy, sx, sy, axx, axy, ayx, ayy
    # acc: sum_x, sum_y, min_x, max_x, min_y, max_y
    n = Z.shape[1]
    for j in range(Z.shape[0]):
        k = k0 + j
        if log_scheme:
            x = math.exp(state[0])
            y = math.exp(state[1]) if y_on else 0.0
        else:
            x = state[0]
            y = state[1]
        if k >= burn_k:
            acc[0] += x
            acc[1] += y
        nx = 0.0
        ny = 0.0
        for i in range(n):
            nx += gx[i] * Z[j, i]
            ny += gy[i] * Z[j, i]
        nx *= sqdt
        ny *= sqdt
        if log_scheme:
            inc = (prm[0] - 0.5 * prm[2] - prm[4] * x - prm[5] * y) * dt + nx
            if not abs(inc) <= guard:
                return 1, pos, k
            state[0] += inc
            if y_on:
                inc = (prm[1] - 0.5 * prm[3] - prm[6] * x - prm[7] * y) * dt + ny
                if not abs(inc) <= guard:
                    return 1, pos, k
                state[1] += inc
            xn = math.exp(state[0])
            yn = math.exp(state[1]) if y_on else 0.0
        else:
            xn = x + x * (prm[0] - prm[4] * x - prm[5] * y) * dt + x * nx
            yn = y + y * (prm[1] - prm[6] * x - prm[7] * y) * dt + y * ny
            if not (xn > 0.0) or (y > 0.0 and not (yn > 0.0)):
                return 2, pos, k
            state[0] = xn
            state[1] = yn
        if xn < acc[2]:
            acc[2] = xn
        if xn > acc[3]:
            acc[3] = xn
        if yn < acc[4]:
            acc[4] = yn
        if yn > acc[5]:
            acc[5] = yn
        if (k + 1) % stride == 0:
            rec[pos, 0] = xn
            rec[pos, 1] = yn
            pos += 1
    return 0, pos, k0 + Z.shape[0]


@numba.njit(cache=True, nogil=True)
def _dispersal_chunk(state, mu, kappa, drate, delta, gamma, target, Z, sqdt, dt, stride, k0, burn_k, rec, pos, acc, occ):
    # acc: per-patch sums; occ: per-patch fraction sums, then error sum in the last slot
    n = state.shape[0]
    new = np.empty(n)
    for j in range(Z.shape[0]):
        k = k0 + j
        if k >= burn_k:
            tot = 0.0
            for i in range(n):
                acc[i] += state[i]
                tot += state[i]
            err = 0.0
            for i in range(n):
                f = state[i] / tot
                occ[i] += f
                d = abs(f - target[i])
                if d > err:
                    err = d
            occ[n] += err
        for i in range(n):
            flow = 0.0
            for m in range(n):
                flow += state[m] * drate[m, i]
            noise = 0.0
            for m in range(n):
                noise += Z[j, m] * gamma[m, i]
            noise *= sqdt
            new[i] = state[i] + (state[i] * (mu[i] - kappa[i] * state[i]) + delta * flow) * dt + state[i] * noise
        for i in range(n):
            if not (new[i] > 0.0):
                return 2, pos, k
            state[i] = new[i]
        if (k + 1) % stride == 0:
            for i in range(n):
                rec[pos, i] = state[i]
            pos += 1
    return 0, pos, k0 + Z.shape[0]


@numba.njit(cache=True, nogil=True)
def _logistic_closed_form(z0, drift, sigma, kappa, dW, dt):
    # Z_t = z0 e^{Y_t} / (1 + z0 kappa int_0^t e^{Y_s} ds), Y_t = drift t + sigma W_t,
    # evaluated as z0 / (e^{-Y_t} + z0 kappa J_t) with J_t = e^{-Y_t} int_0^t e^{Y_s} ds;
    # Y is interpolated linearly between grid points
    m = dW.shape[0]
    out = np.empty(m + 1)
    out[0] = z0
    y = 0.0
    J = 0.0
    for k in range(m):
        y_new = y + drift * dt + sigma * dW[k]
        d = y_new - y
        # exact integral of e^{Y} with Y linear across the step
        w = dt if d == 0.0 else -dt * math.expm1(-d) / d
        J = J * math.exp(-d) + w
        y = y_new
        out[k + 1] = z0 / (math.exp(-y) + z0 * kappa * J)
    return out


# ---------------------------------------------------------------- drivers


def _run_pair(L, gx, gy, prm, x0, y0, cfg, replicate, increments, labels):
    if not x0 > 0:
        raise NonPositiveInitial(f"initial abundance must be > 0, got {x0}")
    if y0 < 0:
        raise NonPositiveInitial(f"initial abundance must be >= 0, got {y0}")
    log_scheme = cfg.scheme == LOG_EULER
    y_on = y0 > 0
    if log_scheme:
        state = np.array([math.log(x0), math.log(y0) if y_on else -np.inf])
    else:
        state = np.array([float(x0), float(y0)])
    N = cfg.n_steps
    stride = cfg.record_every
    rec = np.empty((N // stride + 1, 2))
    rec[0] = (x0, y0)
    acc = np.array([0.0, 0.0, x0, x0, y0, y0])
    pos, k = 1, 0
    sqdt = math.sqrt(cfg.dt)
    chunks = _chunks_from(increments, cfg, L.n) if increments is not None else standard_increments(cfg, L.n, replicate)
    for Z in chunks:
        status, pos, k = _pair_chunk(
            state, prm, gx, gy, np.ascontiguousarray(Z), sqdt, cfg.dt, log_scheme, y_on,
            OVERFLOW_GUARD, stride, k, cfg.burn_steps, rec, pos, acc,
        )
        if status:
            raise UnstableStep(f"step {k} left the stable range (dt={cfg.dt} too large?)")
    times = np.arange(pos) * (stride * cfg.dt)
    if log_scheme:
        lx, ly = state
    else:
        lx = math.log(state[0])
        ly = math.log(state[1]) if y_on else -np.inf
    span = N * cfg.dt
    window = (N - cfg.burn_steps) * 1.0
    ncomp = len(labels)
    final = np.array([math.exp(lx), math.exp(ly) if y_on else 0.0])[:ncomp]
    stats = TrajectoryStats(
        time_average=(acc[:2] / window)[:ncomp],
        log_slope=np.array([(lx - math.log(x0)) / span, (ly - math.log(y0)) / span if y_on else -np.inf])[:ncomp],
        minimum=acc[[2, 4]][:ncomp],
        maximum=acc[[3, 5]][:ncomp],
        final=final,
        extinct=tuple(bool(v < EXTINCTION_LEVEL) for v in final),
    )
    return Trajectory(times, rec[:pos, :ncomp].copy(), labels, stats, cfg.dt, replicate)


def _pair_params(L, a, b, cross: float = 1.0, self_b: float = 1.0, cross_a: float | None = None):
    c = kappa_inner(a, b, L)
    return np.array(
        [
            float(a @ L.mu),
            float(b @ L.mu),
            float(a @ L.sigma @ a),
            float(b @ L.sigma @ b),
            kappa_inner(a, a, L),
            (cross if cross_a is None else cross_a) * c,
            cross * c,
            self_b * kappa_inner(b, b, L),
        ]
    )


def simulate_monomorphic(L: Landscape, a, x0: float, cfg: SimConfig, replicate: int = 0, increments=None) -> Trajectory:
    """Total abundance of a single population playing strategy ``a``.

    ``increments`` optionally supplies the standard normal draws, shape
    ``(cfg.n_steps, L.n)``, in place of the keyed stream.
    """
    a = _as_vector(a)
    if a.shape != (L.n,):
        raise DimensionMismatch(f"strategy length {a.shape} does not match {L.n} patches")
    gx = L.noise_loading(a)
    prm = _pair_params(L, a, a, cross=0.0, self_b=0.0)
    return _run_pair(L, gx, gx, prm, x0, 0.0, cfg, replicate, increments, ("x",))


def simulate_dimorphic(L: Landscape, a, b, x0: float, y0: float, cfg: SimConfig, replicate: int = 0, increments=None) -> Trajectory:
    """Two competing populations sharing one landscape and one noise source."""
    a = _as_vector(a)
    b = _as_vector(b)
    if a.shape != (L.n,) or b.shape != (L.n,):
        raise DimensionMismatch("strategy lengths do not match the landscape")
    prm = _pair_params(L, a, b)
    if y0 == 0:
        prm[5] = 0.0
    return _run_pair(L, L.noise_loading(a), L.noise_loading(b), prm, x0, y0, cfg, replicate, increments, ("x", "y"))


@dataclass(frozen=True)
class InvasionEstimate:
    trajectories: list[Trajectory]
    slope: float
    stderr: float

    @property
    def slopes(self) -> np.ndarray:
        return np.array([t.stats.log_slope[1] for t in self.trajectories])


def simulate_linearized_invasion(
    L: Landscape, resident, invader, x0: float, y0: float, cfg: SimConfig, workers: int = 1
) -> InvasionEstimate:
    """Resident at full nonlinearity, invader without self-limitation.

    The invader's log-slope, averaged over ``cfg.replicates``, estimates the
    invasion rate.
    """
    a = _as_vector(resident)
    b = _as_vector(invader)
    if not (x0 > 0 and y0 > 0):
        raise NonPositiveInitial("linearized invasion needs x0 > 0 and y0 > 0")
    prm = _pair_params(L, a, b, cross_a=0.0, self_b=0.0)
    gx, gy = L.noise_loading(a), L.noise_loading(b)

    def one(r):
        return _run_pair(L, gx, gy, prm, x0, y0, cfg, r, None, ("x", "y"))

    trajs = _map(one, range(cfg.replicates), workers)
    slopes = np.array([t.stats.log_slope[1] for t in trajs])
    stderr = float(slopes.std(ddof=1) / math.sqrt(len(slopes))) if len(slopes) > 1 else float("nan")
    return InvasionEstimate(trajs, float(slopes.mean()), stderr)


def simulate_dispersal(L: Landscape, D: DispersalMatrix, x0, cfg: SimConfig, replicate: int = 0, increments=None) -> Trajectory:
    """Patch abundances coupled by explicit dispersal at speed ``D.delta``.

    Plain Euler in arithmetic space; a step that would leave the positive
    orthant raises :class:`UnstableStep` rather than being clamped. The
    ``extra`` statistics hold the time-averaged occupancy fractions and, when
    the rate matrix has a unique stationary distribution, the time average of
    the largest deviation of the fractions from it.
    """
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.shape != (L.n,) or D.n != L.n:
        raise DimensionMismatch("initial state and dispersal matrix must match the landscape")
    if not np.all(x0 > 0):
        raise NonPositiveInitial("all initial patch abundances must be > 0")
    try:
        target = dispersal_stationary(D).alpha.copy()
    except NoUniqueStationary:
        target = np.full(L.n, np.nan)
    N = cfg.n_steps
    stride = cfg.record_every
    rec = np.empty((N // stride + 1, L.n))
    rec[0] = x0
    state = x0.copy()
    acc = np.zeros(L.n)
    occ = np.zeros(L.n + 1)
    pos, k = 1, 0
    chunks = _chunks_from(increments, cfg, L.n) if increments is not None else standard_increments(cfg, L.n, replicate)
    for Z in chunks:
        status, pos, k = _dispersal_chunk(
            state, L.mu, L.kappa, D.d, D.delta, np.ascontiguousarray(L.gamma), target,
            np.ascontiguousarray(Z), math.sqrt(cfg.dt), cfg.dt, stride, k, cfg.burn_steps, rec, pos, acc, occ,
        )
        if status:
            raise UnstableStep(f"patch abundance left the positive orthant at step {k} (dt={cfg.dt})")
    window = float(N - cfg.burn_steps)
    states = rec[:pos].copy()
    stats = TrajectoryStats(
        time_average=acc / window,
        log_slope=(np.log(state) - np.log(x0)) / (N * cfg.dt),
        minimum=states.min(axis=0),
        maximum=states.max(axis=0),
        final=state.copy(),
        extinct=tuple(bool(v < EXTINCTION_LEVEL) for v in state),
        extra={
            "occupancy_mean": occ[: L.n] / window,
            "occupancy_error": float(occ[L.n] / window),
            "stationary": target,
        },
    )
    labels = tuple(f"x{i + 1}" for i in range(L.n))
    return Trajectory(np.arange(pos) * (stride * cfg.dt), states, labels, stats, cfg.dt, replicate)


def exact_logistic_oracle(
    mu: float, kappa: float, sigma2: float, z0: float, cfg: SimConfig, replicate: int = 0, increments=None
) -> Trajectory:
    """Closed-form single-patch logistic solution along a sampled Brownian path.

    The path is built from the same keyed stream that
    :func:`simulate_monomorphic` uses on a one-patch landscape, so both can
    be compared draw for draw. The time integral uses the log path interpolated
    linearly between grid points.
    """
    if not z0 > 0:
        raise NonPositiveInitial(f"initial abundance must be > 0, got {z0}")
    if sigma2 < 0:
        raise InvalidConfig("sigma2 must be >= 0")
    if increments is None:
        Z = np.concatenate(list(standard_increments(cfg, 1, replicate)), axis=0)
    else:
        Z = np.asarray(increments, dtype=float)
        if Z.shape != (cfg.n_steps, 1):
            raise DimensionMismatch(f"expected increments of shape {(cfg.n_steps, 1)}, got {Z.shape}")
    dW = Z[:, 0] * math.sqrt(cfg.dt)
    path = _logistic_closed_form(float(z0), mu - 0.5 * sigma2, math.sqrt(sigma2), float(kappa), dW, cfg.dt)
    stride = cfg.record_every
    states = path[::stride, None].copy()
    burn = cfg.burn_steps
    T = cfg.n_steps * cfg.dt
    stats = TrajectoryStats(
        time_average=np.array([path[burn:-1].mean()]),
        log_slope=np.array([(math.log(path[-1]) - math.log(z0)) / T if path[-1] > 0 else -np.inf]),
        minimum=np.array([path.min()]),
        maximum=np.array([path.max()]),
        final=np.array([path[-1]]),
        extinct=(bool(path[-1] < EXTINCTION_LEVEL),),
    )
    return Trajectory(np.arange(len(states)) * (stride * cfg.dt), states, ("z",), stats, cfg.dt, replicate)


def single_patch(mu: float, kappa: float, sigma2: float) -> Landscape:
    return build_landscape(1, [mu], [kappa], [[sigma2]])


@dataclass(frozen=True)
class ComparisonReport:
    fraction: float
    points: int
    violations: int
    max_excess: float
    trajectory: Trajectory
    decoupled: Trajectory

    def to_dict(self) -> dict:
        return {"fraction": self.fraction, "points": self.points, "violations": self.violations, "max_excess": self.max_excess}


def comparison_step_bound(L: Landscape, a, b) -> float:
    return 1e-3 / max(kappa_inner(a, a, L), kappa_inner(b, b, L))


def coupled_comparison(
    L: Landscape, a, b, x0: float, y0: float, cfg: SimConfig, replicate: int = 0, cross_scale: float = 1.0
) -> ComparisonReport:
    """Run the competing pair and its decoupled counterpart on identical noise.

    Returns the fraction of recorded grid points where both competing
    abundances are dominated by their decoupled versions. ``cross_scale``
    multiplies the cross-competition coefficient (0 switches it off).
    """
    a = _as_vector(a)
    b = _as_vector(b)
    if not (x0 > 0 and y0 > 0):
        raise NonPositiveInitial("comparison needs x0 > 0 and y0 > 0")
    bound = comparison_step_bound(L, a, b)
    if cfg.dt > bound:
        raise StepTooLarge(f"dt={cfg.dt} exceeds the comparison bound {bound:.3g}")
    gx, gy = L.noise_loading(a), L.noise_loading(b)
    full = _run_pair(L, gx, gy, _pair_params(L, a, b, cross=cross_scale), x0, y0, cfg, replicate, None, ("x", "y"))
    free = _run_pair(L, gx, gy, _pair_params(L, a, b, cross=0.0), x0, y0, cfg, replicate, None, ("x", "y"))
    ok = np.all(full.states <= free.states, axis=1)
    excess = float(np.max(full.states - free.states))
    return ComparisonReport(float(ok.mean()), int(ok.size), int((~ok).sum()), excess, full, free)


def _h_values(values: np.ndarray, h) -> np.ndarray:
    if h in ("identity", None):
        return values
    if h == "log":
        return np.log(values)
    if isinstance(h, tuple) and len(h) == 2 and h[0] == "indicator_above":
        return (values > h[1]).astype(float)
    if callable(h):
        return np.asarray(h(values), dtype=float)
    raise InvalidConfig(f"unknown function tag {h!r}")


def time_average(traj: Trajectory, h="identity", burn_in: float = 0.0, component=0) -> float:
    """Left Riemann average of ``h(state)`` over recorded points after ``burn_in``.

    ``h`` is ``"identity"``, ``"log"`` or ``("indicator_above", K)``.
    """
    if burn_in >= traj.t_max:
        raise BurnInTooLong(f"burn_in={burn_in} is not shorter than the horizon {traj.t_max}")
    keep = traj.times[:-1] >= burn_in - 1e-12
    values = traj.component(component)[:-1][keep]
    if values.size == 0:
        values = traj.component(component)[-1:]
    return float(np.mean(_h_values(values, h)))


def ensemble(fn: Callable[..., Trajectory], *args, cfg: SimConfig, workers: int = 1, **kwargs) -> list[Trajectory]:
    """Run ``fn(*args, cfg, replicate=r)`` for every replicate.

    Results come back in replicate order and are identical for any number of
    workers.
    """
    return _map(lambda r: fn(*args, cfg, replicate=r, **kwargs), range(cfg.replicates), workers)


def _map(fn, items: Sequence[int] | range, workers: int):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def log_slope_estimate(trajs: Sequence[Trajectory], component=0) -> tuple[float, float]:
    """Mean and standard error of the per-replicate log-slopes."""
    i = trajs[0].labels.index(component) if isinstance(component, str) else component
    s = np.array([t.stats.log_slope[i] for t in trajs])
    se = float(s.std(ddof=1) / math.sqrt(len(s))) if len(s) > 1 else float("nan")
    return float(s.mean()), se

