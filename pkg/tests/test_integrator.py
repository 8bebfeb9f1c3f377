import math

import numpy as np
import pytest

from _helpers import run_preset
from pdflow.dynamics import SystemState, affine_field, pack
from pdflow.integrator import (
    AffineField,
    IntegrationBudgetError,
    IntegratorConfig,
    PoisonedStateError,
    StiffnessError,
    available_backends,
    integrate,
    integrate_rk4,
    trajectory_csv_text,
)

HAS_COMPILED = "compiled" in available_backends()
needs_compiled = pytest.mark.skipif(not HAS_COMPILED, reason="compiled kernel not built")


def decay(t, z):
    return -z


def oscillator(t, z):
    return np.array([z[1], -z[0]])


class TestAdaptive:
    def test_exponential_decay_defaults(self):
        traj = integrate(decay, 0.0, 5.0, np.array([1.0]), samples=100)
        err = np.max(np.abs(traj.flat[:, 0] - np.exp(-traj.times)))
        assert err < 1e-6

    def test_constant_rhs_polynomial_exact(self):
        traj = integrate(lambda t, z: np.array([2.0]), 0.0, 7.0, np.array([1.0]), samples=30)
        assert np.allclose(traj.flat[:, 0], 1.0 + 2.0 * traj.times, rtol=0, atol=1e-12)

    def test_oscillator_energy_drift(self):
        z0 = np.array([1.0, 0.0])
        traj = integrate(oscillator, 0.0, 20.0 * math.pi, z0, samples=200)
        energy = 0.5 * (traj.flat[:, 0] ** 2 + traj.flat[:, 1] ** 2)
        assert np.max(np.abs(energy - 0.5)) < 1e-5

    def test_error_scales_with_rtol(self):
        errs = []
        for rtol in (1e-4, 1e-6, 1e-8):
            cfg = IntegratorConfig(rtol=rtol, atol=1e-14)
            traj = integrate(decay, 0.0, 5.0, np.array([1.0]), cfg=cfg, samples=50)
            errs.append(np.max(np.abs(traj.flat[:, 0] - np.exp(-traj.times))))
        assert errs[1] < errs[0] / 10.0
        assert errs[2] < errs[1] / 10.0

    def test_deterministic_bytes(self):
        runs = [integrate(oscillator, 0.0, 10.0, np.array([1.0, 0.0]), samples=64)
                for _ in range(2)]
        assert runs[0].flat.tobytes() == runs[1].flat.tobytes()
        assert runs[0].times.tobytes() == runs[1].times.tobytes()
        assert runs[0].stats == runs[1].stats

    def test_dense_samples_match_restarted_integration(self):
        cfg = IntegratorConfig()
        traj = integrate(oscillator, 0.0, 10.0, np.array([1.0, 0.0]), cfg=cfg, samples=40)
        for idx in (7, 19, 33):
            t_i = traj.times[idx]
            direct = integrate(oscillator, 0.0, t_i, np.array([1.0, 0.0]), cfg=cfg,
                               samples=[0.0, t_i])
            tol = 10.0 * (cfg.atol + cfg.rtol * np.abs(direct.flat[-1]))
            assert np.all(np.abs(traj.flat[idx] - direct.flat[-1]) <= tol)

    def test_sample_layout(self):
        traj = integrate(decay, 1.0, 100.0, np.array([1.0]), samples=50)
        assert traj.times[0] == 1.0 and traj.times[-1] == 100.0
        assert np.all(np.diff(traj.times) > 0)
        # log spacing: constant ratio
        ratios = traj.times[1:] / traj.times[:-1]
        assert np.allclose(ratios, ratios[0], rtol=1e-9)

    def test_explicit_samples(self):
        traj = integrate(decay, 0.0, 5.0, np.array([1.0]), samples=[1.0, 2.0, 3.0])
        assert np.allclose(traj.times, [0.0, 1.0, 2.0, 3.0, 5.0])
        with pytest.raises(ValueError):
            integrate(decay, 0.0, 5.0, np.array([1.0]), samples=[3.0, 2.0])
        with pytest.raises(ValueError):
            integrate(decay, 0.0, 5.0, np.array([1.0]), samples=[6.0])

    def test_budget_error(self):
        cfg = IntegratorConfig(max_steps=3)
        with pytest.raises(IntegrationBudgetError):
            integrate(decay, 0.0, 50.0, np.array([1.0]), cfg=cfg, samples=10)

    def test_stiffness_error_on_blowup(self):
        def singular(t, z):
            return z / (2.5 - t)

        with pytest.raises(StiffnessError):
            integrate(singular, 0.0, 5.0, np.array([1.0]), samples=10)

    def test_poisoned_field(self):
        def bad(t, z):
            return np.array([np.nan])

        with pytest.raises(PoisonedStateError):
            integrate(bad, 0.0, 1.0, np.array([1.0]), samples=10)
        with pytest.raises(PoisonedStateError):
            integrate(decay, 0.0, 1.0, np.array([np.inf]), samples=10)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            IntegratorConfig(rtol=-1.0)
        with pytest.raises(ValueError):
            IntegratorConfig(h_init=1.0, h_max=0.5)


class TestRK4:
    def test_decay_tight(self):
        traj = integrate_rk4(decay, 0.0, 5.0, np.array([1.0]), h=1e-3, samples=20)
        err = np.max(np.abs(traj.flat[:, 0] - np.exp(-traj.times)))
        assert err < 1e-10

    def test_fourth_order_convergence(self):
        # halving h cuts the global error ~16x (measured on the decay ODE; at
        # a full oscillator period the x-error is amplitude-dominated and
        # shows order 5 instead)
        def final_err(h):
            traj = integrate_rk4(decay, 0.0, 5.0, np.array([1.0]), h=h, samples=[5.0])
            return abs(traj.flat[-1, 0] - math.exp(-5.0))

        ratio = final_err(0.02) / final_err(0.01)
        assert 12.0 < ratio < 20.0

    def test_cross_check_against_adaptive(self):
        run = run_preset("example1-strong", eps="on", T=10)
        field = affine_field(run.kind, run.params, run.prob)
        z0 = pack(run.init)
        rk4 = integrate_rk4(field, 1.0, 10.0, z0, h=1e-3, samples=[1.0, 10.0])
        assert np.max(np.abs(run.traj.flat[-1] - rk4.flat[-1])) < 1e-6


class TestBackends:
    @needs_compiled
    def test_backends_agree_on_affine_field(self):
        run = run_preset("example1-strong", eps="on", T=10)
        field = affine_field(run.kind, run.params, run.prob)
        z0 = pack(run.init)
        tc = integrate(field, 1.0, 10.0, z0, samples=50, backend="compiled")
        tp = integrate(field, 1.0, 10.0, z0, samples=50, backend="python")
        assert tc.stats["backend"] == "compiled"
        assert tp.stats["backend"] == "python"
        assert tc.stats["n_accepted"] == tp.stats["n_accepted"]
        assert np.max(np.abs(tc.flat - tp.flat)) < 1e-8

    @needs_compiled
    def test_rk4_backends_agree(self):
        run = run_preset("example1-strong", eps="on", T=5)
        field = affine_field(run.kind, run.params, run.prob)
        z0 = pack(run.init)
        tc = integrate_rk4(field, 1.0, 5.0, z0, h=1e-2, samples=10, backend="compiled")
        tp = integrate_rk4(field, 1.0, 5.0, z0, h=1e-2, samples=10, backend="python")
        assert np.max(np.abs(tc.flat - tp.flat)) < 1e-10

    @needs_compiled
    def test_compiled_requires_affine(self):
        with pytest.raises(RuntimeError):
            integrate(decay, 0.0, 1.0, np.array([1.0]), samples=10, backend="compiled")

    def test_affine_field_shape_validation(self):
        with pytest.raises(ValueError):
            AffineField([1.0], [0.0], np.zeros((1, 2, 3)), np.zeros((1, 2)))


class TestTrajectoryCSV:
    def test_header_and_format(self):
        run = run_preset("example1-strong", eps="on", T=2)
        text = trajectory_csv_text(run.traj, (3, 1, 1))
        lines = text.strip().splitlines()
        assert lines[0] == "t,x_0,x_1,x_2,y_0,lam_0,vx_0,vx_1,vx_2,vy_0"
        first = lines[1].split(",")
        assert first[0] == "1"
        assert len(first) == 10
        # 17 significant digits round-trip exactly
        for cell in lines[2].split(","):
            v = float(cell)
            assert format(v, ".17g") == cell

    def test_width_mismatch_rejected(self):
        run = run_preset("example1-strong", eps="on", T=2)
        with pytest.raises(ValueError):
            trajectory_csv_text(run.traj, (2, 1, 1))
