"""Memory ledgers, the IMEX stepper and run classification."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grushinlab import memsolver as ms
from grushinlab import odereduce as od
from grushinlab.grushin import Field, GrushinDims

SMALL = ms.GridSpec(8, 8, 16, 16)


def small_config(**kw):
    base = dict(grid=SMALL, dt=0.01, horizon=0.5)
    base.update(kw)
    return ms.SimConfig(**base)


# ---------------------------------------------------------------------------
# kernel weights


def test_weights_gamma_zero_are_steps():
    np.testing.assert_allclose(ms.kernel_weights(5, 0.1, 0.0), 0.1, rtol=1e-15)


@given(n=st.integers(1, 400), dt=st.floats(1e-4, 1.0), g=st.floats(0.0, 0.95))
def test_weights_sum_to_kernel_integral(n, dt, g):
    w = ms.kernel_weights(n, dt, g)
    assert w.sum() == pytest.approx((n * dt) ** (1 - g) / (1 - g), rel=1e-12)
    assert np.all(w > 0)
    assert np.all(np.diff(w) >= -1e-12 * w.max())


def test_weights_from_irregular_times_match_direct_formula():
    times = np.array([0.0, 0.1, 0.35, 0.4, 1.0])
    g = 0.3
    direct = ((times[-1] - times[:-1]) ** (1 - g) - (times[-1] - times[1:]) ** (1 - g)) / (1 - g)
    np.testing.assert_allclose(ms.kernel_weights_from_times(times, g), direct, rtol=1e-14)


def test_weights_keep_accuracy_for_tiny_early_steps():
    steps = np.array([1e-12, 1e6])
    w = ms.kernel_weights_from_steps(steps, 0.5)
    assert w[0] == pytest.approx(0.5e-12 / 1e3, rel=1e-9)


def test_weights_validate():
    with pytest.raises(ValueError):
        ms.kernel_weights(0, 0.1, 0.5)
    with pytest.raises(ValueError):
        ms.kernel_weights(3, 0.1, 1.0)


def test_exact_memory_of_one():
    ledger = ms.ExactLedger(0.5, (1,), capacity=2)
    for j in range(101):
        ledger.record(j * 0.01, np.ones(1))
    assert ledger.count == 101
    assert ledger.memory()[0] == pytest.approx(2.0, rel=1e-12)


def test_exact_memory_gamma_zero_is_running_integral():
    ledger = ms.ExactLedger(0.0, (2,))
    for j in range(11):
        ledger.record(j * 0.1, np.array([1.0, j * 0.1]))
    # left-endpoint rule on g = t over [0, 1]
    np.testing.assert_allclose(ledger.memory(), [1.0, 0.45], rtol=1e-12)


def test_ledger_refuses_over_limit():
    with pytest.raises(ms.LedgerError):
        ms.ExactLedger(0.5, (1024, 1024), capacity=1024)
    cfg = ms.SimConfig(grid=ms.GridSpec(24, 48, 512, 512), kappa1=1.0, dt=1e-3, horizon=10.0)
    with pytest.raises(ms.LedgerError):
        cfg.make_ledger((512, 512))
    # no memory term, no ledger to refuse
    assert isinstance(ms.SimConfig(kappa1=0.0, dt=1e-3).make_ledger((512, 512)), ms.NullLedger)


def test_memory_term_contract():
    ledger = ms.ExactLedger(0.5, (1,))
    ledger.record(0.0, np.ones(1))
    ledger.record(0.1, np.ones(1))
    assert ms.memory_term(ledger, 1)[0] > 0
    with pytest.raises(ms.LedgerError):
        ms.memory_term(ledger, 3)


@pytest.mark.parametrize("gamma", [0.2, 0.5, 0.8])
def test_soe_kernel_accuracy(gamma):
    horizon, dt = 10.0, 0.01
    rates, weights = ms.soe_modes(gamma, horizon, dt)
    t = np.geomspace(dt, horizon, 200)
    approx = np.exp(-np.outer(t, rates)) @ weights
    assert np.max(np.abs(approx * t**gamma - 1)) < 1e-6


def test_soe_validation():
    with pytest.raises(ValueError):
        ms.soe_modes(0.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        ms.soe_modes(0.5, 1.0, 0.1, modes=4)
    with pytest.raises(ms.LedgerError):
        ms.SOELedger(0.5, (1,), np.ones(8), -np.ones(8))


def test_soe_ledger_tracks_exact_ledger():
    gamma, dt, n = 0.4, 0.01, 300
    rates, weights = ms.soe_modes(gamma, n * dt, dt)
    exact = ms.ExactLedger(gamma, (3,))
    soe = ms.SOELedger(gamma, (3,), rates, weights)
    for j in range(n + 1):
        g = np.array([1.0, math.sin(j * dt), math.exp(-j * dt)])
        exact.record(j * dt, g)
        soe.record(j * dt, g)
    np.testing.assert_allclose(soe.memory(), exact.memory(), rtol=1e-5)


# ---------------------------------------------------------------------------
# configuration


def test_config_validation():
    with pytest.raises(ValueError):
        ms.SimConfig(gamma=1.0)
    with pytest.raises(ValueError):
        ms.SimConfig(p1=1.0)
    with pytest.raises(ValueError):
        ms.SimConfig(memory_mode="fast")
    with pytest.raises(ValueError):
        ms.SimConfig(blowup_threshold=0.5)
    with pytest.raises(ValueError):
        ms.InitialData("triangle")


def test_initial_profiles():
    grid = SMALL.build(GrushinDims(1, 1))
    assert np.all(ms.InitialData("zero").sample(grid) == 0)
    assert np.all(ms.InitialData("constant", 3.0).sample(grid) == 3.0)
    bump = ms.InitialData("gaussian-bump", 2.0, 1.0).sample(grid)
    assert bump.max() == pytest.approx(2.0 * math.exp(-2 * 0.25**2))
    plateau = ms.InitialData("plateau", 1.0, 2.0).sample(grid)
    assert set(np.unique(plateau)) == {0.0, 1.0}


# ---------------------------------------------------------------------------
# runs


def test_zero_data_stays_zero():
    out = ms.run(small_config(kappa1=1.0, kappa2=1.0, initial=ms.InitialData("zero")))
    assert out.kind == "GlobalToHorizon"
    assert np.all(out.sup_norm == 0) and np.all(out.final.values == 0)


def test_heat_flow_sup_norm_nonincreasing_and_positive():
    out = ms.run(small_config(kappa1=0.0, kappa2=0.0, horizon=2.0))
    assert np.all(np.diff(out.sup_norm) <= 1e-15)
    assert np.all(out.final.values > 0)


@pytest.mark.parametrize("mode", ["exact", "soe"])
def test_positivity_with_reaction(mode):
    cfg = small_config(kappa1=1.0, kappa2=1.0, p1=1.5, p2=2.5, gamma=0.3, memory_mode=mode,
                       initial=ms.InitialData("plateau", 0.7, 2.0))
    grid = cfg.make_grid()
    state = ms.initial_state(cfg, grid)
    stepper = ms.IMEXStepper(cfg, grid)
    for _ in range(30):
        state = ms.step(state, cfg, stepper)
        assert state.u.min() >= -1e-12


@pytest.mark.parametrize("solver", ["direct", "krylov"])
def test_linear_solvers_agree(solver):
    ref = ms.run(small_config(kappa2=1.0, p2=2.0, horizon=0.3))
    out = ms.run(small_config(kappa2=1.0, p2=2.0, horizon=0.3, linear_solver=solver))
    np.testing.assert_allclose(out.final.values, ref.final.values, rtol=1e-8, atol=1e-12)


def test_comparison_principle():
    lo = ms.run(small_config(kappa1=1.0, initial=ms.InitialData("gaussian-bump", 0.5)))
    hi = ms.run(small_config(kappa1=1.0, initial=ms.InitialData("gaussian-bump", 0.8)))
    assert np.all(hi.final.values >= lo.final.values)


def test_spatially_constant_data_matches_scalar_reduction():
    cfg = ms.SimConfig(grid=SMALL, gamma=0.5, p1=2.0, p2=3.0, kappa1=1.0, kappa2=0.5, diffusion=False,
                       initial=ms.InitialData("constant", 0.4), dt=1e-3, horizon=1.0)
    pde = ms.run(cfg)
    ode = od.run_ode(od.OdeConfig(a=0, b=1.0, c=0.5, gamma=0.5, p1=2.0, p2=3.0, f0=0.4, dt=1e-3, horizon=1.0))
    assert pde.times.shape == ode.times.shape
    np.testing.assert_allclose(pde.sup_norm, ode.values, rtol=1e-12)


def test_local_blowup_classified():
    cfg = ms.SimConfig(grid=SMALL, kappa2=1.0, p2=2.0, diffusion=False, initial=ms.InitialData("constant", 1.0),
                       dt=1e-3, horizon=5.0)
    out = ms.run(cfg)
    assert out.kind == "BlownUp"
    assert out.t_star == pytest.approx(1.0, rel=0.02)
    assert out.line.startswith("OUTCOME BlownUp ")


def test_step_underflow_without_adaptivity_checks_growth():
    cfg = ms.SimConfig(grid=SMALL, kappa2=1.0, p2=2.0, diffusion=False, initial=ms.InitialData("constant", 1.0),
                       dt=1e-3, horizon=5.0, blowup_threshold=1e300, dt_min=1e-6)
    out = ms.run(cfg)
    assert out.kind == "BlownUp"
    assert "underflow" in out.reason


def test_soe_mode_close_to_exact():
    out = {}
    for mode in ("exact", "soe"):
        cfg = small_config(kappa1=1.0, kappa2=0.0, gamma=0.5, initial=ms.InitialData("gaussian-bump", 0.5),
                           horizon=1.0, memory_mode=mode)
        out[mode] = ms.run(cfg).sup_norm
    np.testing.assert_allclose(out["soe"], out["exact"], rtol=1e-4)


def test_run_deterministic():
    cfg = small_config(kappa1=1.0, memory_mode="soe")
    a, b = ms.run(cfg), ms.run(cfg)
    assert np.array_equal(a.sup_norm, b.sup_norm) and np.array_equal(a.final.values, b.final.values)


def test_step_helper_matches_run():
    cfg = small_config(kappa1=1.0, kappa2=1.0, horizon=0.05)
    grid = cfg.make_grid()
    state = ms.initial_state(cfg, grid)
    stepper = ms.IMEXStepper(cfg, grid)
    for _ in range(5):
        state = ms.step(state, cfg, stepper)
    assert state.step_index == 5
    np.testing.assert_allclose(state.u, ms.run(cfg).final.values, rtol=1e-14)


@given(scale=st.floats(0.01, 100.0))
def test_norms_homogeneous(scale):
    grid = SMALL.build(GrushinDims(2, 1))
    u = Field(grid, ms.InitialData("gaussian-bump").sample(grid))
    sup, l1 = ms.norms(u)
    sup2, l12 = ms.norms(u * -scale)
    assert sup2 == pytest.approx(scale * sup, rel=1e-12)
    assert l12 == pytest.approx(scale * l1, rel=1e-12)
