import math

import numpy as np
import pytest

from _helpers import run_preset
from pdflow.analysis import (
    bounded_ratio,
    energies,
    fit_rate,
    integral_estimates,
    metrics,
    metrics_csv_text,
    tikhonov_path,
)
from pdflow.dynamics import SystemParams
from pdflow.integrator import Trajectory
from pdflow.problem import ReferenceSolution, builtin, solve_saddle_point
from pdflow.schedules import Curve


@pytest.fixture(scope="module")
def strong_run():
    return run_preset("example1-strong", eps="on")


@pytest.fixture(scope="module")
def r04_run():
    return run_preset("example2-compare", system="pd-r0.4")


def frozen_trajectory(prob, refs, n=50):
    """A fake trajectory pinned at the saddle point with zero velocities."""
    ts = np.geomspace(1.0, 10.0, n)
    z = np.concatenate([refs.x_star, refs.y_star, refs.lambda_star,
                        np.zeros(prob.n1), np.zeros(prob.n2)])
    return Trajectory(times=ts, flat=np.tile(z, (n, 1)), stats={})


class TestMetrics:
    def test_frozen_at_saddle_all_zero(self):
        prob = builtin("example2")
        refs = solve_saddle_point(prob)
        ms = metrics(frozen_trajectory(prob, refs), prob, refs)
        for name in ("lag_gap", "phi_err", "feas", "gradf_gap", "gradg_gap",
                      "minnorm_dist", "vel_norm"):
            assert np.max(np.abs(ms.series(name))) < 1e-12

    def test_initial_values_example1(self, strong_run):
        ms = metrics(strong_run.traj, strong_run.prob, strong_run.refs)
        # Phi(x0, y0) = 49 + 5 and Phi* = 0
        assert ms.phi_err[0] == pytest.approx(54.0, abs=1e-12)
        assert ms.feas[0] == pytest.approx(10.0, abs=1e-12)
        assert ms.minnorm_dist[0] == pytest.approx(2.0, abs=1e-12)

    def test_gap_nonnegative(self, strong_run, r04_run):
        for run in (strong_run, r04_run):
            ms = metrics(run.traj, run.prob, run.refs)
            assert np.min(ms.lag_gap) >= -1e-9

    def test_domination_inequalities(self, r04_run):
        prob = r04_run.prob
        ms = metrics(r04_run.traj, prob, r04_run.refs)
        assert np.max(0.5 * ms.feas**2 - ms.lag_gap) <= 1e-9
        grad_bound = ms.gradf_gap**2 / (2 * prob.l1) + ms.gradg_gap**2 / (2 * prob.l2)
        assert np.max(grad_bound - ms.lag_gap) <= 1e-9

    def test_missing_min_norm_reference(self):
        prob = builtin("example2")
        refs = solve_saddle_point(prob)
        bare = ReferenceSolution(x_star=refs.x_star, y_star=refs.y_star,
                                 lambda_star=refs.lambda_star, phi_star=refs.phi_star,
                                 kkt_residual=refs.kkt_residual)
        ms = metrics(frozen_trajectory(prob, refs), prob, bare)
        assert np.all(np.isnan(ms.minnorm_dist))


class TestEnergies:
    def test_zero_at_saddle(self):
        prob = builtin("example2")
        refs = solve_saddle_point(prob)
        params = SystemParams(gamma=10.0, delta=0.2, beta=Curve.constant(1.0),
                              eps=Curve.zero())
        er = energies(frozen_trajectory(prob, refs), prob, refs, params)
        assert np.max(np.abs(er.E)) < 1e-12
        assert np.max(np.abs(er.Ehat)) < 1e-12
        assert er.monotonicity_violation == 0.0

    def test_etilde_is_scaled_energy(self, r04_run):
        er = energies(r04_run.traj, r04_run.prob, r04_run.refs, r04_run.params)
        bvals = r04_run.params.beta.values(r04_run.traj.times)
        assert np.allclose(er.Etilde * bvals, er.E, rtol=1e-13, atol=1e-13)

    def test_energy_reconstructed_from_definition(self, r04_run):
        # recompute E at a few samples straight from its definition
        run = r04_run
        er = energies(run.traj, run.prob, run.refs, run.params)
        refs, prob = run.refs, run.prob
        gamma, delta = run.params.gamma, run.params.delta
        l_star = prob.aug_lagrangian(refs.x_star, refs.y_star, refs.lambda_star)
        for i in (0, 10, 100, 199):
            t = run.traj.times[i]
            z = run.traj.flat[i]
            x, y, lam = z[:2], z[2:4], z[4:6]
            vx, vy = z[6:8], z[8:10]
            bval = run.params.beta.value(t)
            eval_ = run.params.eps.value(t)
            gap = prob.aug_lagrangian(x, y, refs.lambda_star) - l_star
            e = bval * (gap + 0.5 * eval_ * (x @ x + y @ y))
            e += 0.5 * np.sum(((x - refs.x_star) / delta + vx) ** 2)
            e += 0.5 * np.sum(((y - refs.y_star) / delta + vy) ** 2)
            coef = (delta * gamma - 1.0) / (2.0 * delta**2)
            e += coef * (np.sum((x - refs.x_star) ** 2) + np.sum((y - refs.y_star) ** 2))
            e += np.sum((lam - refs.lambda_star) ** 2) / (2.0 * delta)
            assert er.E[i] == pytest.approx(e, rel=1e-12, abs=1e-12)

    def test_ehat_identity(self, strong_run):
        # Ehat equals the min-norm-referenced Etilde minus eps/2 * |(xb,yb)|^2
        run = strong_run
        er = energies(run.traj, run.prob, run.refs, run.params)
        refs = run.refs
        bar_refs = ReferenceSolution(
            x_star=refs.x_bar, y_star=refs.y_bar, lambda_star=refs.lambda_star,
            phi_star=refs.phi_star, kkt_residual=refs.kkt_residual,
            x_bar=refs.x_bar, y_bar=refs.y_bar)
        er_bar = energies(run.traj, run.prob, bar_refs, run.params)
        evals_ = run.params.eps.values(run.traj.times)
        shift = 0.5 * evals_ * (np.sum(refs.x_bar**2) + np.sum(refs.y_bar**2))
        assert np.allclose(er.Ehat, er_bar.Etilde - shift, rtol=1e-10, atol=1e-10)

    def test_nonnegative_when_margin_holds(self, r04_run):
        er = energies(r04_run.traj, r04_run.prob, r04_run.refs, r04_run.params)
        assert not er.sign_indefinite
        assert np.min(er.E) >= -1e-12
        assert np.min(er.Etilde) >= -1e-12

    def test_corrected_descent_on_valid_regime(self, r04_run):
        er = energies(r04_run.traj, r04_run.prob, r04_run.refs, r04_run.params)
        scale = max(1.0, float(np.max(np.abs(er.corrected))))
        assert er.monotonicity_violation <= 1e-6 * scale

    def test_sign_indefinite_flagged(self):
        prob = builtin("example2")
        refs = solve_saddle_point(prob)
        params = SystemParams(gamma=1.0, delta=0.5, beta=Curve.constant(1.0),
                              eps=Curve.zero())
        er = energies(frozen_trajectory(prob, refs), prob, refs, params)
        assert er.sign_indefinite


class TestIntegralEstimates:
    def test_frozen_at_saddle_zero(self):
        prob = builtin("example2")
        refs = solve_saddle_point(prob)
        params = SystemParams(gamma=10.0, delta=0.2, beta=Curve.constant(1.0),
                              eps=Curve.zero())
        ie = integral_estimates(frozen_trajectory(prob, refs), prob, refs, params)
        for arr in ie.as_dict().values():
            assert np.max(np.abs(arr)) < 1e-12

    def test_running_integrals_nondecreasing(self, strong_run):
        ie = integral_estimates(strong_run.traj, strong_run.prob, strong_run.refs,
                                strong_run.params)
        for name, arr in ie.as_dict().items():
            assert np.min(np.diff(arr)) >= -1e-12, name

    def test_saturation_on_valid_regime(self, strong_run):
        # bounded integrals: the last decade contributes under 5% of the total
        ie = integral_estimates(strong_run.traj, strong_run.prob, strong_run.refs,
                                strong_run.params)
        ts = strong_run.traj.times
        cut = np.searchsorted(ts, ts[-1] / 10.0)
        for name, arr in ie.as_dict().items():
            assert arr[-1] > 0
            assert (arr[-1] - arr[cut]) / arr[-1] < 0.05, name


class TestRateFit:
    def test_exact_power(self):
        ts = np.geomspace(1, 100, 60)
        fit = fit_rate(ts, 1.0 / ts, (1.0, 100.0))
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_scaled_power(self):
        ts = np.geomspace(1, 100, 60)
        fit = fit_rate(ts, 5.0 * ts**-0.5, (1.0, 100.0))
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(5.0), abs=1e-12)

    def test_modulated_power(self):
        # the sin(ln t) modulation biases the fit by a phase-dependent amount;
        # over the two decades [10, 1000] the bias stays inside +-0.1
        ts = np.geomspace(10, 1000, 200)
        vals = (2.0 + np.sin(np.log(ts))) / ts
        fit = fit_rate(ts, vals, (10.0, 1000.0))
        assert abs(fit.slope + 1.0) < 0.1

    def test_nonpositive_dropped(self):
        ts = np.geomspace(1, 100, 40)
        vals = 1.0 / ts
        vals[5] = 0.0
        fit = fit_rate(ts, vals, (1.0, 100.0))
        assert fit.dropped_nonpositive == 1
        assert fit.n_samples == 39

    def test_too_few_samples(self):
        ts = np.geomspace(1, 100, 8)
        with pytest.raises(ValueError):
            fit_rate(ts, 1.0 / ts, (1.0, 100.0))


class TestBoundedRatio:
    def test_exact_inverse_weight(self):
        ts = np.geomspace(1, 100, 100)
        beta = Curve.power(1, 0.4)
        ratio = bounded_ratio(ts, 1.0 / beta.values(ts), beta, (1, 10), (50, 100))
        assert ratio == pytest.approx(1.0, rel=1e-12)

    def test_faster_decay(self):
        ts = np.geomspace(1, 100, 100)
        beta = Curve.power(1, 0.4)
        ratio = bounded_ratio(ts, beta.values(ts) ** -2, beta, (1, 10), (50, 100))
        assert ratio < 1.0

    def test_empty_window(self):
        ts = np.geomspace(1, 100, 100)
        with pytest.raises(ValueError):
            bounded_ratio(ts, 1.0 / ts, Curve.power(1, 1.0), (0.1, 0.5), (50, 100))

    def test_nonfinite_weight_dropped(self):
        ts = np.geomspace(1, 100, 100)

        def w(t):
            lt = math.log(t)
            return (math.inf, math.inf) if lt == 0.0 else (t / lt, 0.0)

        ratio = bounded_ratio(ts, 1.0 / ts, Curve.user(w, t0=1.0), (1, 10), (50, 100))
        assert math.isfinite(ratio)


class TestTikhonovPath:
    def test_example1_gap_is_state_norm(self, strong_run):
        # with lambda_bar = 0 the regularized minimizer sits at the origin for
        # every eps, so the path gap is the primal norm itself
        run = strong_run
        tp = tikhonov_path(run.traj, run.prob, np.zeros(1), run.params.eps)
        X = run.traj.flat[:, :3]
        Y = run.traj.flat[:, 3:4]
        norms = np.sqrt(np.sum(X**2, axis=1) + np.sum(Y**2, axis=1))
        assert np.allclose(tp.path_gap, norms, rtol=1e-10, atol=1e-12)
        assert not tp.skipped.any()
        assert np.min(tp.residual) >= -1e-9

    def test_zero_eps_skipped(self, strong_run):
        tp = tikhonov_path(strong_run.traj, strong_run.prob, np.zeros(1), Curve.zero())
        assert tp.skipped.all()
        assert np.all(np.isnan(tp.path_gap))

    def test_residual_sweep_on_probe_states(self):
        prob = builtin("example2")
        refs = solve_saddle_point(prob)
        rng = np.random.default_rng(31)
        ts = np.geomspace(1.0, 10.0, 100)
        flat = np.hstack([
            rng.standard_normal((100, 4)) * 2.0,  # x, y probes
            rng.standard_normal((100, 2)),        # lam (unused by the path)
            np.zeros((100, 4)),
        ])
        traj = Trajectory(times=ts, flat=flat, stats={})
        tp = tikhonov_path(traj, prob, refs.lambda_star, Curve.power(1, -1.0))
        assert np.min(tp.residual) >= -1e-9


class TestMetricsCSV:
    def test_header_and_rows(self, strong_run):
        ms = metrics(strong_run.traj, strong_run.prob, strong_run.refs)
        er = energies(strong_run.traj, strong_run.prob, strong_run.refs, strong_run.params)
        text = metrics_csv_text(ms, er)
        lines = text.strip().splitlines()
        assert lines[0] == ("t,lag_gap,phi_err,feas,gradf_gap,gradg_gap,"
                            "minnorm_dist,E,Etilde,Ehat,corrected")
        assert len(lines) == 1 + strong_run.traj.n_samples
        assert len(lines[1].split(",")) == 11

    def test_energies_optional(self, strong_run):
        ms = metrics(strong_run.traj, strong_run.prob, strong_run.refs)
        text = metrics_csv_text(ms, None)
        assert "NaN" in text.splitlines()[1] or "nan" in text.splitlines()[1]
