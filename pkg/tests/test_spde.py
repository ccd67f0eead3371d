import math
from dataclasses import replace

import numpy as np
import pytest

from fracburst.errors import ConfigError, DomainError
from fracburst.mlf import ml_eval
from fracburst.params import PhysParams
from fracburst.spectral import GridSpec, SpectralField, besov_norm, besov_overlap_bounds, sobolev_seminorm
from fracburst.spde import (
    MildIntegrator,
    SimConfig,
    initial_vorticity,
    monitors,
    run_ensemble,
    run_realization,
    semigroup_cell_weights,
)
from fracburst.spde import _linear_weights

from oracles import mild_noise_variance, navier_stokes_2d_rk4

PARAMS = PhysParams(1.2, 0.4, 0.25, nu=0.5)
HEAT = PhysParams(2.0, 1.0, 0.0, nu=0.05, relaxed=True)


def small_3d(**kw):
    base = dict(dt=0.01, t_end=0.1, noise_amplitude=0.3, noise_cutoff=3, init_cutoff=3)
    base.update(kw)
    return SimConfig(GridSpec(3, 8), PARAMS, **base)


def coeffs_of(values, grid):
    return np.fft.fftn(values, axes=tuple(range(-grid.dim, 0))) / grid.n**grid.dim


def test_zero_data_stays_zero():
    cfg = small_3d(initial="zero", noise_amplitude=0.0, t_end=0.05)
    integ = MildIntegrator(cfg)
    for _ in range(cfg.steps):
        assert not np.any(integ.step().values)


def test_zero_velocity_silences_multiplicative_noise():
    cfg = small_3d(initial="zero", noise_amplitude=1.0, t_end=0.05)
    res = run_realization(cfg, 0)
    assert res.status == "ok" and not np.any(res.final)


def test_cell_weights_sum_to_relaxation_integral():
    lam = np.array([0.0, 0.3, 2.0])
    D = semigroup_cell_weights(lam, 0.6, 0.1, 20)
    assert D[0].tolist() == [0.0, 0.0, 0.0]
    assert np.allclose(np.sum(D, axis=0)[0], 2.0)
    h = 2.0
    expect = h * ml_eval(0.6, 2.0, -lam[1:] * h**0.6)
    assert np.allclose(np.sum(D, axis=0)[1:], expect, rtol=1e-12)


def test_single_mode_follows_mittag_leffler_law():
    grid = GridSpec(3, 16)
    cfg = SimConfig(grid, PARAMS, dt=0.01, t_end=2.0, nonlinear=False, initial="mode", init_mode=(2, 1, 0))
    integ = MildIntegrator(cfg)
    idx = (slice(None), 2, 1, 0)
    c0 = integ.w0.coeffs[idx]
    lam = PARAMS.nu * (grid.k_min * math.sqrt(5.0)) ** PARAMS.alpha
    worst = 0.0
    for m in range(1, cfg.steps + 1):
        c = integ.step().coeffs[idx]
        law = ml_eval(PARAMS.beta, 1.0, -lam * (m * cfg.dt) ** PARAMS.beta)
        worst = max(worst, float(np.max(np.abs(c - law * c0)) / np.max(np.abs(c0))))
    assert cfg.steps == 200
    assert worst <= 1e-6


def _taylor_green_error(initial, dt):
    grid = GridSpec(2, 64)
    cfg = SimConfig(grid, HEAT, dt=dt, t_end=1.0, initial=initial, init_cutoff=6, seed=5)
    w0 = initial_vorticity(cfg)
    res = run_realization(cfg, 0)
    ref = navier_stokes_2d_rk4(w0.values[0], grid.L, HEAT.nu, 1.0, 1e-3)
    return float(np.max(np.abs(res.final[0] - ref)) / np.max(np.abs(ref)))


def test_taylor_green_matches_classical_solver():
    # amplitude 1, unit wavenumber: one turnover is t = 1
    assert _taylor_green_error("taylor-green", 0.01) <= 1e-4


def test_generic_flow_converges_to_classical_solver():
    e1 = _taylor_green_error("random", 0.02)
    e2 = _taylor_green_error("random", 0.01)
    assert e2 < 0.02
    assert 1.7 < e1 / e2 < 2.3


def test_repeat_runs_are_bit_identical():
    cfg = small_3d(ensemble=1, seed=42)
    assert run_ensemble(cfg).digest() == run_ensemble(cfg).digest()


def test_workers_do_not_change_results():
    cfg = small_3d(ensemble=3, seed=7, t_end=0.05)
    assert run_ensemble(cfg, workers=2).digest() == run_ensemble(cfg, workers=1).digest()


def test_seed_changes_noise():
    cfg = small_3d(seed=1)
    assert run_ensemble(cfg).digest() != run_ensemble(replace(cfg, seed=2)).digest()


def test_noise_variance_matches_ito_isometry():
    grid = GridSpec(2, 16)
    p = PhysParams(1.3, 0.6, 0.0, nu=0.5, relaxed=True)
    amp, speed = 0.7, 1.5
    cfg = SimConfig(grid, p, dt=0.05, t_end=0.5, noise_amplitude=amp, noise_cutoff=3, nonlinear=False,
                    frozen_velocity=speed, initial="zero", seed=3)
    weights, init = _linear_weights(cfg), initial_vorticity(cfg)
    n_real = 400
    acc = np.zeros(grid.shape)
    for r in range(n_real):
        acc += np.abs(coeffs_of(run_realization(cfg, r, weights, init).final[0], grid)) ** 2
    acc /= n_real
    band = (grid.index_sq > 0) & (grid.index_sq <= 9)
    expect = np.zeros(grid.shape)
    for k in np.unique(grid.kmag[band]):
        var = mild_noise_variance(p.nu * k**p.alpha, p.beta, cfg.dt, cfg.steps)[-1]
        expect[band & (grid.kmag == k)] = var * (amp * speed ** (1 + p.gamma)) ** 2 * k**2
    ratio = acc[band].sum() / expect[band].sum()
    # 14 independent complex modes x 400 draws: standard error ~1.3%
    assert ratio == pytest.approx(1.0, abs=0.06)
    assert np.all(acc[~band] < 1e-28)


def test_ensemble_mean_converges_at_monte_carlo_rate():
    grid = GridSpec(2, 16)
    p = PhysParams(1.3, 0.6, 0.25, nu=0.5)
    base = SimConfig(grid, p, dt=0.05, t_end=0.5, noise_amplitude=0.5, noise_cutoff=5, nonlinear=False,
                     initial="mode", init_mode=(1, 2, 0))
    det = run_ensemble(replace(base, noise_amplitude=0.0)).mean_field.values
    sizes = (16, 64, 256)
    errs = []
    for N in sizes:
        sq = [
            np.mean((run_ensemble(replace(base, ensemble=N, seed=10 * N + b)).mean_field.values - det) ** 2)
            for b in range(4)
        ]
        errs.append(math.sqrt(np.mean(sq)))
    slope = np.polyfit(np.log(sizes), np.log(errs), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_vorticity_stays_solenoidal():
    cfg = SimConfig(GridSpec(3, 16), PARAMS, dt=0.01, t_end=1.0, noise_amplitude=0.5, noise_cutoff=4, seed=9,
                    output_every=50)
    res = run_realization(cfg, 0)
    assert res.status == "ok"
    assert res.max_divergence <= 1e-8


def test_ensemble_series_invariants():
    stats = run_ensemble(small_3d(ensemble=3, output_every=2))
    table = stats.table()
    lengths = {len(v) for v in table.values()}
    assert lengths == {6}
    for name in ("P_estimate", "vortex_monitor", "noise_monitor"):
        assert np.all(table[name] >= 0)
    assert np.all((stats.blowup_fraction >= 0) & (stats.blowup_fraction <= 1))
    assert stats.failures == 0 and np.all(stats.alive == 3)


def test_p_estimate_is_max_of_mean_square():
    cfg = small_3d(ensemble=2, seed=4)
    w, init = _linear_weights(cfg), initial_vorticity(cfg)
    finals = [run_realization(cfg, r, w, init).final for r in range(2)]
    mean_sq = np.mean([np.sum(f**2, axis=0) for f in finals], axis=0)
    assert run_ensemble(cfg).P_estimate[-1] == pytest.approx(float(mean_sq.max()), rel=1e-12)


def test_threshold_crossing_flags_blowup():
    cfg = small_3d(ensemble=2, blowup_threshold=1e-3)
    stats = run_ensemble(cfg)
    assert stats.blowup_fraction[-1] == 1.0
    assert stats.failures == 0
    res = run_realization(cfg, 0)
    assert res.status == "blowup" and res.t_stop == pytest.approx(cfg.dt)
    assert np.all(np.isnan(res.sq[1:]))


def test_non_finite_state_is_failure_not_blowup():
    cfg = small_3d(ensemble=2, init_amplitude=1e200, blowup_threshold=math.inf, noise_amplitude=0.0)
    res = run_realization(cfg, 0)
    assert res.status == "failed" and "non-finite" in res.message
    stats = run_ensemble(cfg)
    assert stats.failures == 2
    assert stats.blowup_fraction[-1] == 0.0
    assert stats.mean_field is None


def test_monitors_vanish_on_zero_field():
    assert monitors(SpectralField.zeros(GridSpec(3, 8), 3), PARAMS) == (0.0, 0.0)


def test_monitors_are_homogeneous():
    cfg = SimConfig(GridSpec(3, 16), PARAMS, initial="mode", init_mode=(1, 1, 2))
    w = initial_vorticity(cfg)
    v1, n1 = monitors(w, PARAMS)
    v2, n2 = monitors(w.with_coeffs(2 * w.coeffs), PARAMS)
    assert v2 == pytest.approx(4 * v1, rel=1e-12)
    assert n2 == pytest.approx(2 ** (2 * (1 + PARAMS.gamma)) * n1, rel=1e-12)


def test_noise_monitor_is_lp_integral():
    grid = GridSpec(2, 32)
    f = SpectralField.from_values(grid, np.full(grid.shape, 3.0))
    p = PhysParams(1.2, 0.5, 0.25)
    assert monitors(f, p)[1] == pytest.approx(3.0**2.5 * grid.L**2, rel=1e-12)


def test_vortex_monitor_within_overlap_of_fourier_sum():
    cfg = SimConfig(GridSpec(3, 16), PARAMS, init_cutoff=7, seed=21)
    w = initial_vorticity(cfg)
    s = 3 / PARAMS.alpha - 1
    lo, hi = besov_overlap_bounds(s)
    ratio = math.sqrt(monitors(w, PARAMS)[0]) / sobolev_seminorm(w, s)
    assert lo * (1 - 1e-9) <= ratio <= hi * (1 + 1e-9)
    assert monitors(w, PARAMS)[0] == pytest.approx(besov_norm(w, s).value ** 2, rel=1e-14)


@pytest.mark.parametrize(
    "kw",
    [
        dict(dt=0.0),
        dict(t_end=0.105),
        dict(ensemble=0),
        dict(noise_cutoff=5),
        dict(noise_amplitude=-1.0),
        dict(seed=2**64),
        dict(biot_savart="other"),
        dict(initial="spiral"),
        dict(t_end=50.0),
    ],
)
def test_config_validation(kw):
    with pytest.raises(DomainError):
        small_3d(**kw)


def test_config_rejects_one_dimension():
    with pytest.raises(DomainError):
        SimConfig(GridSpec(1, 16), PARAMS)


def test_memory_budget_enforced():
    with pytest.raises(ConfigError, match="budget"):
        SimConfig(GridSpec(3, 32), PARAMS, dt=0.001, t_end=1.0, memory_budget=2**30)


def test_config_dict_round_trips_fields():
    cfg = small_3d(frozen_velocity=1.0)
    d = cfg.as_dict()
    assert d["grid"]["n"] == 8 and d["frozen_velocity"] == 1.0 and d["init_mode"] == [1, 0, 0]
    assert "frozen_velocity" not in small_3d().as_dict()
