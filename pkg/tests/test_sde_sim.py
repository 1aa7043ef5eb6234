import math

import numpy as np
import pytest

from patchsel.errors import BurnInTooLong, InvalidConfig, NonPositiveInitial, StepTooLarge, UnstableStep
from patchsel.landscape import DispersalMatrix, build_landscape, symmetric_landscape
from patchsel.sde_sim import (
    EULER,
    SimConfig,
    Trajectory,
    TrajectoryStats,
    coupled_comparison,
    ensemble,
    exact_logistic_oracle,
    simulate_dimorphic,
    simulate_dispersal,
    simulate_linearized_invasion,
    simulate_monomorphic,
    single_patch,
    standard_increments,
    time_average,
)

from conftest import random_landscape, random_strategy

SINK = build_landscape(2, [0.2, 1], [1, 1], np.diag([1.0, 0.0]))


@pytest.mark.parametrize(
    "kwargs",
    [dict(dt=0), dict(dt=2, t_max=1), dict(t_max=10, burn_in=10), dict(replicates=0), dict(scheme="Milstein"), dict(record_every=0)],
)
def test_config_validation(kwargs):
    with pytest.raises(InvalidConfig):
        SimConfig(**kwargs)


def test_config_defaults():
    cfg = SimConfig()
    assert (cfg.dt, cfg.t_max, cfg.burn_in, cfg.replicates, cfg.seed) == (1e-3, 1000.0, 100.0, 8, 42)
    assert cfg.n_steps == 1_000_000 and cfg.burn_steps == 100_000
    assert cfg.with_(t_max=50).burn_in == 5.0


def test_nonpositive_initial(sym):
    with pytest.raises(NonPositiveInitial):
        simulate_monomorphic(sym, [0.5, 0.5], 0.0, SimConfig(t_max=1))


def test_unstable_step_is_reported():
    L = single_patch(1.0, 1.0, 1.0)
    with pytest.raises(UnstableStep):
        simulate_monomorphic(L, [1.0], 1e6, SimConfig(dt=0.1, t_max=1))


def test_monomorphic_time_average(sym):
    traj = simulate_monomorphic(sym, [0.5, 0.5], 1.0, SimConfig(t_max=5000, burn_in=500, record_every=100))
    assert traj.stats.time_average[0] == pytest.approx(1.5, abs=0.05)


def test_sink_extinction_rate():
    traj = simulate_monomorphic(SINK, [1, 0], 1.0, SimConfig(t_max=5000, record_every=1000))
    assert traj.stats.log_slope[0] == pytest.approx(-0.3, abs=0.03)
    assert traj.stats.extinct == (True,)


def test_trajectory_grid(sym):
    cfg = SimConfig(dt=1e-3, t_max=2.0, record_every=10)
    traj = simulate_monomorphic(sym, [0.5, 0.5], 1.0, cfg)
    assert traj.states.shape == (201, 1)
    np.testing.assert_allclose(np.diff(traj.times), 0.01, rtol=1e-12)
    assert traj.times[-1] == pytest.approx(2.0)


def test_log_scheme_positivity(rng):
    for _ in range(10):
        n = int(rng.integers(1, 4))
        L = random_landscape(rng, n)
        a, b = random_strategy(rng, n), random_strategy(rng, n)
        traj = simulate_dimorphic(L, a, b, 0.5, 0.5, SimConfig(t_max=50, seed=int(rng.integers(1 << 31))))
        assert np.all(traj.states > 0)
        assert np.all(traj.stats.minimum > 0)


def test_reproducible_and_seed_sensitive(sym):
    cfg = SimConfig(t_max=20)
    t1 = simulate_dimorphic(sym, [0.3, 0.7], [0.7, 0.3], 1, 1, cfg, replicate=3)
    t2 = simulate_dimorphic(sym, [0.3, 0.7], [0.7, 0.3], 1, 1, cfg, replicate=3)
    t3 = simulate_dimorphic(sym, [0.3, 0.7], [0.7, 0.3], 1, 1, cfg.with_(seed=7), replicate=3)
    assert np.array_equal(t1.states, t2.states)
    assert not np.array_equal(t1.states, t3.states)


def test_supplied_increments_match_keyed_stream(sym):
    # spans several internal chunks
    cfg = SimConfig(t_max=200)
    Z = np.concatenate(list(standard_increments(cfg, 2, replicate=1)))
    a = simulate_monomorphic(sym, [0.5, 0.5], 1.0, cfg, replicate=1)
    b = simulate_monomorphic(sym, [0.5, 0.5], 1.0, cfg, increments=Z)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.stats.time_average, b.stats.time_average)


def test_ensemble_independent_of_workers(sym):
    cfg = SimConfig(t_max=20, replicates=6)
    serial = ensemble(simulate_monomorphic, sym, [0.5, 0.5], 1.0, cfg=cfg, workers=1)
    threaded = ensemble(simulate_monomorphic, sym, [0.5, 0.5], 1.0, cfg=cfg, workers=4)
    for s, t in zip(serial, threaded):
        assert np.array_equal(s.states, t.states)
    assert len({s.states[-1, 0] for s in serial}) == 6


def test_record_stride_does_not_change_statistics(sym):
    cfg = SimConfig(t_max=50)
    fine = simulate_monomorphic(sym, [0.5, 0.5], 1.0, cfg)
    coarse = simulate_monomorphic(sym, [0.5, 0.5], 1.0, cfg.with_(record_every=100))
    assert np.array_equal(fine.states[::100], coarse.states)
    assert np.array_equal(fine.stats.time_average, coarse.stats.time_average)


def test_noise_correlation_realized():
    L = build_landscape(3, [1, 1, 1], [1, 1, 1], [[1.0, 0.4, -0.2], [0.4, 2.0, 0.3], [-0.2, 0.3, 0.5]])
    a, b = np.array([0.6, 0.3, 0.1]), np.array([0.1, 0.2, 0.7])
    cfg = SimConfig(t_max=1000)
    Z = np.concatenate(list(standard_increments(cfg, 3)))
    assert Z.shape[0] == 1_000_000
    u, v = Z @ L.noise_loading(a), Z @ L.noise_loading(b)
    expected = a @ L.sigma @ b / math.sqrt((a @ L.sigma @ a) * (b @ L.sigma @ b))
    assert np.corrcoef(u, v)[0, 1] == pytest.approx(expected, abs=0.01)
    assert np.var(u) == pytest.approx(a @ L.sigma @ a, rel=0.01)


def test_invader_absent_reproduces_monomorphic(sym):
    cfg = SimConfig(t_max=50)
    mono = simulate_monomorphic(sym, [0.3, 0.7], 1.0, cfg, replicate=2)
    di = simulate_dimorphic(sym, [0.3, 0.7], [0.7, 0.3], 1.0, 0.0, cfg, replicate=2)
    assert np.array_equal(mono.states[:, 0], di.states[:, 0])
    assert np.all(di.states[:, 1] == 0.0)


def test_coexistence_pair_persists(sym):
    traj = simulate_dimorphic(sym, [0.3, 0.7], [0.7, 0.3], 1, 1, SimConfig(t_max=2000, burn_in=200, record_every=1000))
    assert np.all(traj.stats.time_average > 0.2)


def test_linearized_invasion_examples(sym):
    est = simulate_linearized_invasion(sym, [0.5, 0.5], [1, 0], 1, 1, SimConfig(t_max=500, replicates=20))
    assert abs(est.slope + 0.25) <= 3 * est.stderr
    same = simulate_linearized_invasion(sym, [0.5, 0.5], [0.5, 0.5], 1, 1, SimConfig(t_max=200, replicates=4))
    assert same.slope == pytest.approx(0.0, abs=0.05)
    dead = simulate_linearized_invasion(SINK, [1, 0], [0, 1], 1, 1, SimConfig(t_max=200, replicates=4))
    assert dead.slope == pytest.approx(1.0, abs=1e-9)


def test_comparison_domination(sym):
    cfg = SimConfig(dt=1e-4, t_max=20, record_every=10)
    rep = coupled_comparison(sym, [0.3, 0.7], [0.7, 0.3], 1, 1, cfg)
    assert rep.fraction == 1.0 and rep.violations == 0


def test_comparison_without_cross_competition_is_exact(sym):
    cfg = SimConfig(dt=1e-4, t_max=5)
    rep = coupled_comparison(sym, [0.3, 0.7], [0.7, 0.3], 1, 1, cfg, cross_scale=0.0)
    assert np.array_equal(rep.trajectory.states, rep.decoupled.states)


def test_comparison_step_bound(sym):
    with pytest.raises(StepTooLarge):
        coupled_comparison(sym, [0.3, 0.7], [0.7, 0.3], 1, 1, SimConfig(dt=1e-2, t_max=1))


def _constant(c, n=11):
    times = np.linspace(0, 1, n)
    stats = TrajectoryStats(*(np.array([c]),) * 5, extinct=(False,))
    return Trajectory(times, np.full((n, 1), c), ("x",), stats, 0.1)


def test_time_average_helpers():
    tr = _constant(2.5)
    assert time_average(tr) == 2.5
    assert time_average(tr, "log") == pytest.approx(math.log(2.5))
    assert time_average(tr, ("indicator_above", 3.0)) == 0.0
    with pytest.raises(BurnInTooLong):
        time_average(tr, burn_in=1.0)


def test_time_average_of_simulation(sym):
    traj = simulate_monomorphic(sym, [0.5, 0.5], 1.0, SimConfig(t_max=5000, record_every=10))
    assert time_average(traj, burn_in=500) == pytest.approx(1.5, abs=0.05)


def test_single_patch_dispersal_matches_euler_monomorphic():
    L = single_patch(1.0, 1.0, 1.0)
    cfg = SimConfig(t_max=50, scheme=EULER)
    mono = simulate_monomorphic(L, [1.0], 1.0, cfg, replicate=4)
    disp = simulate_dispersal(L, DispersalMatrix(np.zeros((1, 1))), [1.0], cfg, replicate=4)
    np.testing.assert_allclose(disp.states, mono.states, rtol=1e-13)


def test_fast_dispersal_balances_symmetric_patches(sym):
    D = DispersalMatrix([[-1, 1], [1, -1]], delta=100)
    traj = simulate_dispersal(sym, D, [0.5, 0.5], SimConfig(t_max=200, record_every=1000))
    assert traj.stats.extra["occupancy_mean"][0] == pytest.approx(0.5, abs=0.05)


def test_isolated_sink_patch_declines():
    L = build_landscape(2, [0.2, 1], [1, 1], np.eye(2))
    D = DispersalMatrix(np.zeros((2, 2)), delta=0.0)
    traj = simulate_dispersal(L, D, [1, 1], SimConfig(t_max=1000, record_every=1000))
    assert traj.stats.log_slope[0] == pytest.approx(-0.3, abs=0.05)


def test_logistic_oracle_noise_free_limits():
    cfg = SimConfig(dt=1e-3, t_max=20, record_every=100)
    tr = exact_logistic_oracle(1.0, 1.0, 1e-8, 0.1, cfg)
    assert tr.value_at(20.0) == pytest.approx(1.0, abs=1e-3)
    fixed = exact_logistic_oracle(2.0, 0.5, 0.0, 4.0, cfg)
    np.testing.assert_allclose(fixed.states, 4.0, rtol=1e-9)


def test_logistic_oracle_matches_deterministic_solution():
    mu, kappa, z0 = 2.0, 0.5, 0.3
    cfg = SimConfig(dt=1e-4, t_max=5)
    tr = exact_logistic_oracle(mu, kappa, 0.0, z0, cfg)
    t = tr.times
    exact = mu * z0 * np.exp(mu * t) / (mu + kappa * z0 * np.expm1(mu * t))
    np.testing.assert_allclose(tr.states[:, 0], exact, rtol=1e-7)


def _log_drift_coefficient(path, dW, mu, sigma2, dt):
    # regress the drift left over after removing mu - sigma^2/2 and the noise on -Z dt
    resid = np.diff(np.log(path)) - (mu - sigma2 / 2) * dt - math.sqrt(sigma2) * dW
    x = -path[:-1] * dt
    return float(resid @ x / (x @ x))


def test_closed_form_coefficient_is_kappa_not_carrying_capacity():
    # numerically differentiate the candidate solution against the logistic SDE
    mu, kappa, sigma2, z0 = 2.0, 0.5, 1.0, 0.3
    cfg = SimConfig(dt=1e-5, t_max=10)
    Z = np.concatenate(list(standard_increments(cfg, 1)))
    dW = Z[:, 0] * math.sqrt(cfg.dt)
    path = exact_logistic_oracle(mu, kappa, sigma2, z0, cfg, increments=Z).states[:, 0]
    assert _log_drift_coefficient(path, dW, mu, sigma2, cfg.dt) == pytest.approx(kappa, rel=1e-3)
    # printed variant with mu/kappa in front of the integral solves a different equation
    Y = np.concatenate([[0.0], np.cumsum((mu - sigma2 / 2) * cfg.dt + math.sqrt(sigma2) * dW)])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * cfg.dt * (np.exp(Y[1:]) + np.exp(Y[:-1])))])
    printed = z0 * np.exp(Y) / (1 + z0 * (mu / kappa) * integral)
    coef = _log_drift_coefficient(printed, dW, mu, sigma2, cfg.dt)
    assert coef == pytest.approx(mu / kappa, rel=1e-3)
    assert abs(coef - kappa) > 1.0


def test_log_euler_converges_to_closed_form():
    L = single_patch(1.0, 1.0, 1.0)
    errs = []
    for dt in (2e-4, 1e-4):
        cfg = SimConfig(dt=dt, t_max=10)
        Z = np.concatenate(list(standard_increments(cfg.with_(dt=5e-5), 1)))
        Zc = Z.reshape(-1, int(round(dt / 5e-5)), 1).sum(axis=1) / math.sqrt(dt / 5e-5)
        sim = simulate_monomorphic(L, [1.0], 0.5, cfg, increments=Zc).states[:, 0]
        ref = exact_logistic_oracle(1.0, 1.0, 1.0, 0.5, cfg.with_(dt=5e-5), increments=Z).states[:: int(round(dt / 5e-5)), 0]
        errs.append(np.max(np.abs(sim - ref) / ref))
    assert errs[1] < errs[0] <= 0.04
