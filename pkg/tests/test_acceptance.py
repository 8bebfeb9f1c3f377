"""Acceptance gate: one test per criterion, each printing a PASS line with its
timing.  Run with `pytest tests/test_acceptance.py -v -s`.

Every tolerance is pinned here, straight from the package contract; the
criteria cover reference solutions, integrator oracles, strong convergence
with and without the Tikhonov term, bounded-ratio rate certification,
pointwise inequality suites, Lyapunov descent, power-pair order predictions,
regularization-path properties, baseline comparisons, and byte determinism.
"""

import math
import time

import numpy as np
import pytest

from _helpers import run_preset
from pdflow.analysis import bounded_ratio, energies, metrics
from pdflow.cli import main as cli_main
from pdflow.dynamics import affine_field, pack
from pdflow.integrator import integrate, integrate_rk4
from pdflow.problem import builtin, solve_saddle_point, tikhonov_minimizer, \
    tikhonov_inequality_residual
from pdflow.schedules import Curve, validate_regimes


def report(num, name, elapsed, budget):
    print(f"ACCEPTANCE {num:2d} {name}: PASS ({elapsed:.2f}s < {budget:.0f}s budget)")
    assert elapsed < budget, f"criterion {num} exceeded its {budget}s runtime budget"


def test_01_reference_optimum_example2():
    start = time.perf_counter()
    refs = solve_saddle_point(builtin("example2"))
    assert abs(refs.phi_star - 0.6) < 1e-9
    assert refs.kkt_residual < 1e-10
    report(1, "Example 2 reference optimum", time.perf_counter() - start, 1.0)


def test_02_integrator_oracles():
    start = time.perf_counter()
    traj = integrate(lambda t, z: -z, 0.0, 5.0, np.array([1.0]), samples=100)
    err = np.max(np.abs(traj.flat[:, 0] - np.exp(-traj.times)))
    assert err < 1e-6

    run = run_preset("example1-strong", eps="on", T=10)
    field = affine_field(run.kind, run.params, run.prob)
    rk4 = integrate_rk4(field, 1.0, 10.0, pack(run.init), h=1e-3, samples=[1.0, 10.0])
    gap = np.max(np.abs(run.traj.flat[-1] - rk4.flat[-1]))
    assert gap < 1e-6
    report(2, "integrator oracles (exp decay, RK4 cross-check)",
           time.perf_counter() - start, 5.0)


def test_03_strong_convergence_with_tikhonov():
    start = time.perf_counter()
    for mned in ("5,1,1,5", "50,10,15,10"):
        run = run_preset("example1-strong", eps="on", mned=mned)
        ms = metrics(run.traj, run.prob, run.refs)
        d = ms.minnorm_dist
        assert d[-1] < 0.1 * d[0], f"minnorm_dist(30) not small for mned={mned}"
        late = d[ms.times >= 10.0]
        assert np.max(np.diff(late)) <= 1e-6, f"series not decreasing on [10,30] for {mned}"
    report(3, "strong convergence with Tikhonov term", time.perf_counter() - start, 30.0)


def test_04_no_tikhonov_ablation():
    start = time.perf_counter()
    finals = []
    for mned in ("5,1,1,5", "50,10,15,10"):
        run = run_preset("example1-strong", eps="off", mned=mned)
        ms = metrics(run.traj, run.prob, run.refs)
        finals.append(ms.minnorm_dist[-1])
    assert max(finals) > 0.2, f"ablation should miss the minimal-norm solution, got {finals}"
    report(4, "ablation without Tikhonov term", time.perf_counter() - start, 30.0)


def test_05_rate_bounds():
    start = time.perf_counter()
    run = run_preset("example2-compare", system="pd-r0.4")
    ms = metrics(run.traj, run.prob, run.refs)
    ratio_gap = bounded_ratio(ms.times, ms.lag_gap, Curve.power(1, 0.4), (1, 10), (50, 100))
    ratio_feas = bounded_ratio(ms.times, ms.feas, Curve.power(1, 0.2), (1, 10), (50, 100))
    assert ratio_gap <= 2.0
    assert ratio_feas <= 2.0
    report(5, "bounded-ratio rate certification", time.perf_counter() - start, 30.0)


def test_06_inequality_suite_on_all_presets():
    start = time.perf_counter()
    runs = [
        run_preset("example1-fig1"),
        run_preset("example1-strong", eps="on"),
        run_preset("example1-strong", eps="off"),
        run_preset("example1-strong", eps="on", mned="50,10,15,10"),
        run_preset("example1-strong", eps="off", mned="50,10,15,10"),
        run_preset("example2-compare", system="pd-r0"),
        run_preset("example2-compare", system="pd-r0.1"),
        run_preset("example2-compare", system="pd-r0.4"),
        run_preset("example2-compare", system="second-order-dual"),
        run_preset("example2-compare", system="rescaled-alm"),
    ]
    for run in runs:
        ms = metrics(run.traj, run.prob, run.refs)
        feas_dom = np.max(0.5 * ms.feas**2 - ms.lag_gap)
        assert feas_dom <= 1e-9, f"feasibility domination violated: {feas_dom}"
        grad_dom = np.max(ms.gradf_gap**2 / (2 * run.prob.l1)
                          + ms.gradg_gap**2 / (2 * run.prob.l2) - ms.lag_gap)
        assert grad_dom <= 1e-9, f"gradient domination violated: {grad_dom}"
    report(6, "pointwise inequality suite on all presets",
           time.perf_counter() - start, 60.0)


def test_07_lyapunov_descent():
    start = time.perf_counter()
    run = run_preset("example2-compare", system="pd-r0.4")
    regime = validate_regimes(run.params.beta, run.params.eps,
                              run.params.gamma, run.params.delta, t0=run.t0)
    assert regime.conditions["growth_bound_from_t0"]
    assert regime.conditions["damping_margin"]
    er = energies(run.traj, run.prob, run.refs, run.params)
    scale = max(1.0, float(np.max(np.abs(er.corrected))))
    assert er.monotonicity_violation <= 1e-6 * scale
    assert er.Etilde[-1] < 0.01 * er.Etilde[0]
    report(7, "Lyapunov descent and scaled-energy decay",
           time.perf_counter() - start, 30.0)


def test_08_power_pair_order_certification():
    start = time.perf_counter()
    run = run_preset("rate-order", r2=2.5)
    ms = metrics(run.traj, run.prob, run.refs)
    ratio = bounded_ratio(ms.times, ms.lag_gap, Curve.power(1, 1.5), (1, 10), (50, 100))
    assert ratio <= 2.0

    run = run_preset("rate-order", r2=3.0)
    ms = metrics(run.traj, run.prob, run.refs)

    def log_corrected(t):
        lt = math.log(t)
        if lt == 0.0:
            return (math.inf, math.inf)
        return (t * t / lt, (2.0 * t * lt - t) / lt**2)

    ratio = bounded_ratio(ms.times, ms.lag_gap, Curve.user(log_corrected, t0=1.0),
                          (1, 10), (50, 100))
    assert ratio <= 2.0
    report(8, "power-pair gap-order certification", time.perf_counter() - start, 60.0)


def test_09_tikhonov_path_properties():
    start = time.perf_counter()
    prob = builtin("example2")
    refs = solve_saddle_point(prob)
    xb, yb = refs.x_bar, refs.y_bar
    prev_dist = math.inf
    for eps in (1.0, 0.1, 0.01, 1e-4):
        x_eps, y_eps = tikhonov_minimizer(prob, refs.lambda_star, eps)
        assert np.linalg.norm(x_eps) <= np.linalg.norm(xb) + 1e-9
        assert np.linalg.norm(y_eps) <= np.linalg.norm(yb) + 1e-9
        dist = math.sqrt(np.sum((x_eps - xb) ** 2) + np.sum((y_eps - yb) ** 2))
        assert dist < prev_dist
        prev_dist = dist
    rng = np.random.default_rng(2024)
    for _ in range(100):
        eps = 10.0 ** rng.uniform(-4, 0)
        x_eps, y_eps = tikhonov_minimizer(prob, refs.lambda_star, eps)
        x = rng.standard_normal(2) * 3.0
        y = rng.standard_normal(2) * 3.0
        resid = tikhonov_inequality_residual(prob, refs.lambda_star, eps, x, y,
                                             x_eps, y_eps, xb, yb)
        assert resid >= -1e-9
    report(9, "Tikhonov path properties", time.perf_counter() - start, 30.0)


def test_10_comparison_ordering():
    start = time.perf_counter()
    finals = {}
    for name in ("pd-r0.4", "second-order-dual", "rescaled-alm"):
        run = run_preset("example2-compare", system=name)
        ms = metrics(run.traj, run.prob, run.refs)
        finals[name] = (ms.phi_err[-1], ms.feas[-1])
    for baseline in ("second-order-dual", "rescaled-alm"):
        assert finals["pd-r0.4"][0] <= finals[baseline][0], (
            f"phi_err ordering vs {baseline}: {finals}")
        assert finals["pd-r0.4"][1] <= finals[baseline][1], (
            f"feasibility ordering vs {baseline}: {finals}")
    report(10, "comparison ordering against baselines", time.perf_counter() - start, 60.0)


def test_11_byte_determinism(tmp_path):
    start = time.perf_counter()
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        code = cli_main(["run", "--preset", "example1-strong", "--eps", "on",
                         "--out", str(out)])
        assert code == 0
        outs.append(out)
    for name in ("trajectory.csv", "metrics.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    report(11, "byte-identical reruns", time.perf_counter() - start, 60.0)
