"""Trajectory post-processing: gap metrics, Lyapunov energies, rate fits.

Everything here is pure post-processing over an immutable Trajectory; the
quantities mirror the Lyapunov machinery used to certify the decay rates:

* the primal-dual gap L_aug(x, y, lam*) - L_aug(x*, y*, lam*),
* the scaled energy E, its normalization Etilde = E / beta, the min-norm
  variant Ehat built from the regularized augmented Lagrangian, and the
  descent-corrected series E - const * integral(beta * eps), which is
  nonincreasing whenever the damping/growth hypotheses hold,
* four running integral estimates that must stay bounded,
* log-log slope fits and bounded weighted ratios used to certify O(.) decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import SystemParams, SystemKind
from .integrator import Trajectory
from .problem import (
    ReferenceSolution,
    SeparableProblem,
    min_norm_solution,
    tikhonov_inequality_residual,
    tikhonov_minimizer,
)
from .schedules import Curve, cumulative_integral

__all__ = [
    "MetricSeries",
    "EnergyReport",
    "IntegralEstimates",
    "RateFit",
    "TikhonovPath",
    "metrics",
    "energies",
    "integral_estimates",
    "fit_rate",
    "bounded_ratio",
    "tikhonov_path",
    "metrics_csv_text",
]


def _blocks(traj: Trajectory, prob: SeparableProblem):
    n1, n2, m = prob.n1, prob.n2, prob.m
    Z = traj.flat
    X = Z[:, :n1]
    Y = Z[:, n1:n1 + n2]
    L = Z[:, n1 + n2:n1 + n2 + m]
    VX = Z[:, n1 + n2 + m:2 * n1 + n2 + m]
    VY = Z[:, 2 * n1 + n2 + m:2 * n1 + 2 * n2 + m]
    return X, Y, L, VX, VY


def _sqnorm_rows(M: np.ndarray) -> np.ndarray:
    return np.sum(M * M, axis=1)


@dataclass
class MetricSeries:
    times: np.ndarray
    lag_gap: np.ndarray        # augmented-Lagrangian gap at lam*
    phi_err: np.ndarray        # |Phi(x,y) - Phi*|
    feas: np.ndarray           # |Ax + By - b|
    gradf_gap: np.ndarray      # |grad f(x) - grad f(x*)|
    gradg_gap: np.ndarray
    minnorm_dist: np.ndarray   # |(x,y) - (x_bar, y_bar)|; NaN without min-norm refs
    vel_norm: np.ndarray       # |(x', y')|

    def series(self, name: str) -> np.ndarray:
        return getattr(self, name)


def metrics(traj: Trajectory, prob: SeparableProblem, refs: ReferenceSolution) -> MetricSeries:
    """Pointwise convergence metrics against a frozen reference solution."""
    X, Y, L, VX, VY = _blocks(traj, prob)
    S = traj.n_samples
    xs, ys, lam_s = refs.x_star, refs.y_star, refs.lambda_star
    l_star = prob.aug_lagrangian(xs, ys, lam_s)
    gfs = prob.f.grad(xs)
    ggs = prob.g.grad(ys)

    lag_gap = np.empty(S)
    phi_err = np.empty(S)
    gradf_gap = np.empty(S)
    gradg_gap = np.empty(S)
    for i in range(S):
        lag_gap[i] = prob.aug_lagrangian(X[i], Y[i], lam_s) - l_star
        phi_err[i] = abs(prob.phi(X[i], Y[i]) - refs.phi_star)
        gradf_gap[i] = float(np.linalg.norm(prob.f.grad(X[i]) - gfs))
        gradg_gap[i] = float(np.linalg.norm(prob.g.grad(Y[i]) - ggs))

    res = X @ prob.A.T + Y @ prob.B.T - prob.b
    feas = np.sqrt(_sqnorm_rows(res))
    if refs.x_bar is not None and refs.y_bar is not None:
        minnorm_dist = np.sqrt(_sqnorm_rows(X - refs.x_bar) + _sqnorm_rows(Y - refs.y_bar))
    else:
        minnorm_dist = np.full(S, np.nan)
    vel_norm = np.sqrt(_sqnorm_rows(VX) + _sqnorm_rows(VY))
    return MetricSeries(
        times=traj.times.copy(),
        lag_gap=lag_gap,
        phi_err=phi_err,
        feas=feas,
        gradf_gap=gradf_gap,
        gradg_gap=gradg_gap,
        minnorm_dist=minnorm_dist,
        vel_norm=vel_norm,
    )


@dataclass
class EnergyReport:
    times: np.ndarray
    E: np.ndarray
    Etilde: np.ndarray
    Ehat: Optional[np.ndarray]
    corrected: np.ndarray          # E - (|x_bar|^2+|y_bar|^2)/(2 delta) * int(beta eps)
    vel_refine: np.ndarray         # sqrt(beta) * |((x,y)-(x*,y*))/delta + (x',y')|
    monotonicity_violation: float  # max positive increment of corrected
    sign_indefinite: bool          # delta*gamma <= 1: E may lose nonnegativity
    flags: list = field(default_factory=list)


def energies(traj: Trajectory, prob: SeparableProblem, refs: ReferenceSolution,
             params: SystemParams) -> EnergyReport:
    """Lyapunov energies along the trajectory (Tikhonov system only)."""
    params.validate(SystemKind.TIKHONOV_PD)
    gamma, delta = float(params.gamma), float(params.delta)
    beta_c, eps_c = params.beta, params.eps
    X, Y, L, VX, VY = _blocks(traj, prob)
    ts = traj.times
    S = traj.n_samples
    flags: list[str] = []

    bvals = beta_c.values(ts)
    evals_ = eps_c.values(ts)
    xs, ys, lam_s = refs.x_star, refs.y_star, refs.lambda_star
    l_star = prob.aug_lagrangian(xs, ys, lam_s)
    gap = np.array([prob.aug_lagrangian(X[i], Y[i], lam_s) - l_star for i in range(S)])

    sq_x = _sqnorm_rows(X)
    sq_y = _sqnorm_rows(Y)
    dev_x = _sqnorm_rows((X - xs) / delta + VX)
    dev_y = _sqnorm_rows((Y - ys) / delta + VY)
    dist_x = _sqnorm_rows(X - xs)
    dist_y = _sqnorm_rows(Y - ys)
    dist_l = _sqnorm_rows(L - lam_s)
    coef = (delta * gamma - 1.0) / (2.0 * delta**2)

    E = (
        bvals * (gap + 0.5 * evals_ * (sq_x + sq_y))
        + 0.5 * (dev_x + dev_y)
        + coef * (dist_x + dist_y)
        + dist_l / (2.0 * delta)
    )
    Etilde = E / bvals
    vel_refine = np.sqrt(bvals) * np.sqrt(dev_x + dev_y)

    if refs.x_bar is not None and refs.y_bar is not None:
        xb, yb = refs.x_bar, refs.y_bar
        # the dual solution set is shared by every primal solution, so the
        # saddle multiplier doubles as the min-norm one
        l_eps_bar = np.array([
            prob.aug_lagrangian(xb, yb, lam_s) + 0.5 * evals_[i] * (
                float(xb @ xb) + float(yb @ yb))
            for i in range(S)
        ])
        l_eps_traj = np.array([
            prob.aug_lagrangian(X[i], Y[i], lam_s) + 0.5 * evals_[i] * (sq_x[i] + sq_y[i])
            for i in range(S)
        ])
        devb_x = _sqnorm_rows((X - xb) / delta + VX)
        devb_y = _sqnorm_rows((Y - yb) / delta + VY)
        Ehat = (
            l_eps_traj - l_eps_bar
            + (0.5 * (devb_x + devb_y) + coef * (_sqnorm_rows(X - xb) + _sqnorm_rows(Y - yb))
               + _sqnorm_rows(L - lam_s) / (2.0 * delta)) / bvals
        )
        norm_bar = float(xb @ xb + yb @ yb)
    else:
        Ehat = None
        norm_bar = float(xs @ xs + ys @ ys)
        flags.append("min-norm reference missing: Ehat omitted, corrected uses (x*, y*)")

    running = cumulative_integral("beta_eps", ts, beta=beta_c, eps=eps_c)
    corrected = E - (norm_bar / (2.0 * delta)) * running
    incs = np.diff(corrected)
    violation = float(max(0.0, incs.max())) if incs.size else 0.0

    sign_indefinite = delta * gamma <= 1.0
    if sign_indefinite:
        flags.append("delta*gamma <= 1: energy may be sign-indefinite")
    return EnergyReport(
        times=ts.copy(),
        E=E,
        Etilde=Etilde,
        Ehat=Ehat,
        corrected=corrected,
        vel_refine=vel_refine,
        monotonicity_violation=violation,
        sign_indefinite=sign_indefinite,
        flags=flags,
    )


@dataclass
class IntegralEstimates:
    times: np.ndarray
    velocity: np.ndarray     # int (delta*gamma-1)/delta (|x'|^2+|y'|^2)
    gap: np.ndarray          # int (beta/delta - beta') * lag_gap
    tikhonov: np.ndarray     # int beta*eps/(2 delta) (|x-x*|^2+|y-y*|^2)
    feasibility: np.ndarray  # int beta |Ax+By-b|^2

    def as_dict(self) -> dict:
        return {
            "velocity": self.velocity,
            "gap": self.gap,
            "tikhonov": self.tikhonov,
            "feasibility": self.feasibility,
        }


def _cumtrapz(vals: np.ndarray, ts: np.ndarray) -> np.ndarray:
    out = np.zeros_like(vals)
    out[1:] = np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts))
    return out


def integral_estimates(traj: Trajectory, prob: SeparableProblem, refs: ReferenceSolution,
                       params: SystemParams) -> IntegralEstimates:
    """Running trapezoid integrals of the four bounded-energy integrands."""
    params.validate(SystemKind.TIKHONOV_PD)
    gamma, delta = float(params.gamma), float(params.delta)
    X, Y, L, VX, VY = _blocks(traj, prob)
    ts = traj.times
    S = traj.n_samples
    bvals = params.beta.values(ts)
    bders = params.beta.derivatives(ts)
    evals_ = params.eps.values(ts)
    lam_s = refs.lambda_star
    l_star = prob.aug_lagrangian(refs.x_star, refs.y_star, lam_s)
    gap = np.array([prob.aug_lagrangian(X[i], Y[i], lam_s) - l_star for i in range(S)])
    res = X @ prob.A.T + Y @ prob.B.T - prob.b

    f_vel = ((delta * gamma - 1.0) / delta) * (_sqnorm_rows(VX) + _sqnorm_rows(VY))
    f_gap = (bvals / delta - bders) * gap
    f_tik = (bvals * evals_ / (2.0 * delta)) * (
        _sqnorm_rows(X - refs.x_star) + _sqnorm_rows(Y - refs.y_star)
    )
    f_feas = bvals * _sqnorm_rows(res)
    return IntegralEstimates(
        times=ts.copy(),
        velocity=_cumtrapz(f_vel, ts),
        gap=_cumtrapz(f_gap, ts),
        tikhonov=_cumtrapz(f_tik, ts),
        feasibility=_cumtrapz(f_feas, ts),
    )


@dataclass
class RateFit:
    window: tuple
    slope: float
    intercept: float
    r2: float
    n_samples: int
    dropped_nonpositive: int = 0

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "n_samples": self.n_samples,
            "dropped_nonpositive": self.dropped_nonpositive,
        }


def fit_rate(times, values, window: tuple) -> RateFit:
    """Least-squares line through (ln t, ln v) inside the window.

    Nonpositive values are dropped (shrinking the window) with a count kept;
    fewer than 10 usable samples is an error.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    mask = (times >= lo) & (times <= hi)
    t_w, v_w = times[mask], values[mask]
    pos = v_w > 0.0
    dropped = int(np.sum(~pos))
    t_w, v_w = t_w[pos], v_w[pos]
    if t_w.size < 10:
        raise ValueError(f"rate fit needs >= 10 positive samples in window, got {t_w.size}")
    lt, lv = np.log(t_w), np.log(v_w)
    At = np.vstack([lt, np.ones_like(lt)]).T
    (slope, intercept), residuals, _, _ = np.linalg.lstsq(At, lv, rcond=None)
    ss_res = float(residuals[0]) if residuals.size else float(np.sum((lv - At @ [slope, intercept]) ** 2))
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(
        window=(float(lo), float(hi)),
        slope=float(slope),
        intercept=float(intercept),
        r2=r2,
        n_samples=int(t_w.size),
        dropped_nonpositive=dropped,
    )


def bounded_ratio(times, values, weight: Curve, early: tuple, late: tuple) -> float:
    """max over the late window of weight*value divided by the early max.

    A ratio <= 1 + tol certifies empirically that value = O(1/weight).
    Samples where the weighted value is not finite (e.g. a log-corrected
    weight diverging at the window edge) are dropped.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    w = weight.values(times)
    wv = w * values
    finite = np.isfinite(wv)
    m_early = (times >= early[0]) & (times <= early[1]) & finite
    m_late = (times >= late[0]) & (times <= late[1]) & finite
    if not m_early.any() or not m_late.any():
        raise ValueError("empty early or late window for bounded_ratio")
    peak_early = float(np.max(wv[m_early]))
    peak_late = float(np.max(wv[m_late]))
    if peak_early <= 0.0:
        raise ValueError("early window peak must be positive")
    return peak_late / peak_early


@dataclass
class TikhonovPath:
    times: np.ndarray
    path_gap: np.ndarray    # |(x(t), y(t)) - (x_eps(t), y_eps(t))|; NaN where skipped
    residual: np.ndarray    # strong-convexity inequality slack (>= 0 up to numerics)
    skipped: np.ndarray     # True where eps(t) <= 0


def tikhonov_path(traj: Trajectory, prob: SeparableProblem, lambda_bar,
                  eps: Curve) -> TikhonovPath:
    """Distance to the Tikhonov-regularized minimizer along the trajectory."""
    X, Y, _, _, _ = _blocks(traj, prob)
    ts = traj.times
    S = traj.n_samples
    x_bar, y_bar = min_norm_solution(prob, lambda_star=lambda_bar)
    path_gap = np.full(S, np.nan)
    residual = np.full(S, np.nan)
    skipped = np.zeros(S, dtype=bool)
    for i in range(S):
        e = eps.value(float(ts[i]))
        if e <= 0.0:
            skipped[i] = True
            continue
        x_eps, y_eps = tikhonov_minimizer(prob, lambda_bar, e)
        path_gap[i] = math.sqrt(
            float(np.sum((X[i] - x_eps) ** 2) + np.sum((Y[i] - y_eps) ** 2))
        )
        residual[i] = tikhonov_inequality_residual(
            prob, lambda_bar, e, X[i], Y[i], x_eps, y_eps, x_bar, y_bar
        )
    return TikhonovPath(times=ts.copy(), path_gap=path_gap, residual=residual, skipped=skipped)


def _fmt17(x: float) -> str:
    return format(float(x), ".17g")


def metrics_csv_text(mset: MetricSeries, erep: Optional[EnergyReport]) -> str:
    """CSV with the fixed metric/energy column layout."""
    header = "t,lag_gap,phi_err,feas,gradf_gap,gradg_gap,minnorm_dist,E,Etilde,Ehat,corrected"
    S = mset.times.size
    nan = float("nan")
    lines = [header]
    for i in range(S):
        row = [
            mset.times[i], mset.lag_gap[i], mset.phi_err[i], mset.feas[i],
            mset.gradf_gap[i], mset.gradg_gap[i], mset.minnorm_dist[i],
        ]
        if erep is not None:
            row.extend([
                erep.E[i], erep.Etilde[i],
                erep.Ehat[i] if erep.Ehat is not None else nan,
                erep.corrected[i],
            ])
        else:
            row.extend([nan, nan, nan, nan])
        lines.append(",".join(_fmt17(v) for v in row))
    return "\n".join(lines) + "\n"
