"""Right-hand sides of the primal-dual flows and their flat state layout.

Three system variants are provided:

* ``TIKHONOV_PD`` -- two damped second-order primal equations driven by the
  time-scaled augmented-Lagrangian gradient plus a Tikhonov term, and one
  first-order dual equation with velocity extrapolation:

      x'' = -gamma x' - beta(t) (grad_x L_aug(x,y,lam) + eps(t) x)
      y'' = -gamma y' - beta(t) (grad_y L_aug(x,y,lam) + eps(t) y)
      lam' = beta(t) (A (x + delta x') + B (y + delta y') - b)

* ``SECOND_ORDER_DUAL`` -- comparison flow with a second-order dual equation,
  curve-valued damping gamma(t) and extrapolation delta(t), and no time
  scaling (a beta curve is rejected for this variant).

* ``RESCALED_ALM`` -- comparison flow with second-order dual equation, time
  scaling beta(t), extrapolation a(t) and penalty weight mu.

States pack flat as (x, y, lam, vx, vy[, vlam]); the trailing dual-velocity
block exists only for the second-order-dual variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .integrator import (
    AffineField,
    IntegratorConfig,
    PoisonedStateError,
    Trajectory,
    integrate,
)
from .problem import SeparableProblem
from .schedules import Curve, validate_role

__all__ = [
    "SystemKind",
    "SystemParams",
    "SystemState",
    "pack",
    "unpack",
    "state_dim",
    "has_dual_velocity",
    "vector_field",
    "field_closure",
    "affine_field",
    "existence_constants",
    "ExistenceConstants",
    "simulate",
]


class SystemKind(str, Enum):
    TIKHONOV_PD = "tikhonov_pd"
    SECOND_ORDER_DUAL = "second_order_dual"
    RESCALED_ALM = "rescaled_alm"


@dataclass(frozen=True)
class SystemParams:
    """Parameter set; which fields apply depends on the system variant.

    TIKHONOV_PD: gamma, delta scalar; beta, eps curves.
    SECOND_ORDER_DUAL: gamma, delta curves; nothing else.
    RESCALED_ALM: gamma, beta, a curves; mu scalar.
    """

    gamma: object = None
    delta: object = None
    beta: Optional[Curve] = None
    eps: Optional[Curve] = None
    a: Optional[Curve] = None
    mu: float = 0.0

    def validate(self, kind: SystemKind) -> list[str]:
        """Raise on structural errors; return non-fatal warnings."""
        warnings = []
        if kind == SystemKind.TIKHONOV_PD:
            if not isinstance(self.gamma, (int, float)) or self.gamma <= 0.0:
                raise ValueError("tikhonov_pd requires scalar gamma > 0")
            if not isinstance(self.delta, (int, float)) or self.delta <= 0.0:
                raise ValueError("tikhonov_pd requires scalar delta > 0")
            if not isinstance(self.beta, Curve) or not isinstance(self.eps, Curve):
                raise ValueError("tikhonov_pd requires beta and eps curves")
            validate_role(self.beta, "beta")
            validate_role(self.eps, "eps")
            if self.a is not None or self.mu != 0.0:
                raise ValueError("tikhonov_pd takes no extrapolation curve a or penalty mu")
            if 1.0 / self.delta >= self.gamma:
                warnings.append(
                    f"1/delta = {1.0 / self.delta:g} >= gamma = {self.gamma:g}: "
                    "rate-theorem damping margin violated"
                )
        elif kind == SystemKind.SECOND_ORDER_DUAL:
            if not isinstance(self.gamma, Curve) or not isinstance(self.delta, Curve):
                raise ValueError("second_order_dual requires gamma(t) and delta(t) curves")
            if self.beta is not None:
                raise ValueError("second_order_dual carries no time scaling: beta must be None")
            if self.eps is not None or self.a is not None or self.mu != 0.0:
                raise ValueError("second_order_dual takes only gamma and delta curves")
        elif kind == SystemKind.RESCALED_ALM:
            if not isinstance(self.gamma, Curve):
                raise ValueError("rescaled_alm requires a gamma(t) curve")
            if not isinstance(self.beta, Curve) or not isinstance(self.a, Curve):
                raise ValueError("rescaled_alm requires beta(t) and a(t) curves")
            validate_role(self.beta, "beta")
            if self.delta is not None:
                raise ValueError("rescaled_alm uses the a(t) curve, not delta")
            if self.eps is not None:
                raise ValueError("rescaled_alm carries no Tikhonov term")
            if self.mu < 0.0:
                raise ValueError("penalty weight mu must be nonnegative")
        else:  # pragma: no cover
            raise ValueError(f"unknown system kind {kind}")
        return warnings


@dataclass
class SystemState:
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    vlam: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        self.lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        self.vx = np.atleast_1d(np.asarray(self.vx, dtype=float))
        self.vy = np.atleast_1d(np.asarray(self.vy, dtype=float))
        if self.vlam is not None:
            self.vlam = np.atleast_1d(np.asarray(self.vlam, dtype=float))
        if self.x.shape != self.vx.shape or self.y.shape != self.vy.shape:
            raise ValueError("velocity blocks must match their position blocks")


def has_dual_velocity(kind: SystemKind) -> bool:
    return kind in (SystemKind.SECOND_ORDER_DUAL, SystemKind.RESCALED_ALM)


def state_dim(prob: SeparableProblem, kind: SystemKind) -> int:
    base = 2 * prob.n1 + 2 * prob.n2 + prob.m
    return base + prob.m if has_dual_velocity(kind) else base


def pack(state: SystemState) -> np.ndarray:
    parts = [state.x, state.y, state.lam, state.vx, state.vy]
    if state.vlam is not None:
        parts.append(state.vlam)
    return np.concatenate(parts)


def unpack(z: np.ndarray, prob: SeparableProblem) -> SystemState:
    """Inverse of pack; the dual-velocity block is inferred from the length."""
    z = np.asarray(z, dtype=float)
    n1, n2, m = prob.n1, prob.n2, prob.m
    base = 2 * n1 + 2 * n2 + m
    if z.shape != (base,) and z.shape != (base + m,):
        raise ValueError(f"flat state has length {z.shape}, expected {base} or {base + m}")
    i0, i1, i2, i3, i4 = n1, n1 + n2, n1 + n2 + m, 2 * n1 + n2 + m, base
    return SystemState(
        x=z[:i0].copy(),
        y=z[i0:i1].copy(),
        lam=z[i1:i2].copy(),
        vx=z[i2:i3].copy(),
        vy=z[i3:i4].copy(),
        vlam=z[i4:].copy() if z.shape[0] > base else None,
    )


def vector_field(kind: SystemKind, params: SystemParams, prob: SeparableProblem,
                 t: float, state: SystemState) -> SystemState:
    """Time derivative of the packed state, returned in the same layout."""
    for block in (state.x, state.y, state.lam, state.vx, state.vy):
        if not np.all(np.isfinite(block)):
            raise PoisonedStateError("non-finite value in system state")
    if state.vlam is not None and not np.all(np.isfinite(state.vlam)):
        raise PoisonedStateError("non-finite value in system state")
    f = field_closure(kind, params, prob)
    dz = f(t, pack(state))
    return unpack(dz, prob)


def field_closure(kind: SystemKind, params: SystemParams, prob: SeparableProblem):
    """f(t, z_flat) -> dz_flat for the generic (oracle-capable) path."""
    params.validate(kind)
    n1, n2, m = prob.n1, prob.n2, prob.m
    A, B, b = prob.A, prob.B, prob.b
    fg, gg = prob.f.grad, prob.g.grad
    i1, i2, i3, i4 = n1, n1 + n2, n1 + n2 + m, 2 * n1 + n2 + m
    i5 = 2 * n1 + 2 * n2 + m

    if kind == SystemKind.TIKHONOV_PD:
        gamma, delta, beta, eps = params.gamma, params.delta, params.beta, params.eps

        def rhs(t, z):
            x, y, lam = z[:i1], z[i1:i2], z[i2:i3]
            vx, vy = z[i3:i4], z[i4:i5]
            bval = beta.value(t)
            eval_ = eps.value(t)
            res = A @ x + B @ y - b
            dz = np.empty_like(z)
            dz[:i1] = vx
            dz[i1:i2] = vy
            dz[i2:i3] = bval * (A @ (x + delta * vx) + B @ (y + delta * vy) - b)
            dz[i3:i4] = -gamma * vx - bval * (fg(x) + A.T @ lam + A.T @ res + eval_ * x)
            dz[i4:i5] = -gamma * vy - bval * (gg(y) + B.T @ lam + B.T @ res + eval_ * y)
            return dz

        return rhs

    if kind == SystemKind.SECOND_ORDER_DUAL:
        gamma_c, delta_c = params.gamma, params.delta

        def rhs(t, z):
            x, y, lam = z[:i1], z[i1:i2], z[i2:i3]
            vx, vy, vlam = z[i3:i4], z[i4:i5], z[i5:]
            gval = gamma_c.value(t)
            dval = delta_c.value(t)
            res = A @ x + B @ y - b
            lam_ex = lam + dval * vlam
            dz = np.empty_like(z)
            dz[:i1] = vx
            dz[i1:i2] = vy
            dz[i2:i3] = vlam
            dz[i3:i4] = -gval * vx - (fg(x) + A.T @ lam_ex + A.T @ res)
            dz[i4:i5] = -gval * vy - (gg(y) + B.T @ lam_ex + B.T @ res)
            dz[i5:] = -gval * vlam + (A @ (x + dval * vx) + B @ (y + dval * vy) - b)
            return dz

        return rhs

    gamma_c, beta_c, a_c, mu = params.gamma, params.beta, params.a, params.mu

    def rhs(t, z):
        x, y, lam = z[:i1], z[i1:i2], z[i2:i3]
        vx, vy, vlam = z[i3:i4], z[i4:i5], z[i5:]
        gval = gamma_c.value(t)
        bval = beta_c.value(t)
        aval = a_c.value(t)
        res = A @ x + B @ y - b
        lam_ex = lam + aval * vlam + mu * res
        dz = np.empty_like(z)
        dz[:i1] = vx
        dz[i1:i2] = vy
        dz[i2:i3] = vlam
        dz[i3:i4] = -gval * vx - bval * (fg(x) + A.T @ lam_ex)
        dz[i4:i5] = -gval * vy - bval * (gg(y) + B.T @ lam_ex)
        dz[i5:] = -gval * vlam + bval * (A @ (x + aval * vx) + B @ (y + aval * vy) - b)
        return dz

    return rhs


def affine_field(kind: SystemKind, params: SystemParams,
                 prob: SeparableProblem) -> Optional[AffineField]:
    """Exact affine-in-state representation, or None when unavailable.

    Requires quadratic blocks and power-family schedules; every preset
    satisfies this, enabling the compiled backend.
    """
    params.validate(kind)
    if not prob.is_quadratic:
        return None
    n1, n2, m = prob.n1, prob.n2, prob.m
    A, B, b = prob.A, prob.B, prob.b
    Pf, qf = prob.f.P, prob.f.q
    Pg, qg = prob.g.P, prob.g.q
    ix = slice(0, n1)
    iy = slice(n1, n1 + n2)
    il = slice(n1 + n2, n1 + n2 + m)
    ivx = slice(n1 + n2 + m, 2 * n1 + n2 + m)
    ivy = slice(2 * n1 + n2 + m, 2 * n1 + 2 * n2 + m)
    base = 2 * n1 + 2 * n2 + m

    def _power(curve):
        return curve.power_coeffs() if (curve is not None and curve.is_power) else None

    if kind == SystemKind.TIKHONOV_PD:
        pb, pe = _power(params.beta), _power(params.eps)
        if pb is None or pe is None:
            return None
        gamma, delta = float(params.gamma), float(params.delta)
        n = base
        terms = []
        M = np.zeros((n, n))
        M[ix, ivx] = np.eye(n1)
        M[iy, ivy] = np.eye(n2)
        M[ivx, ivx] = -gamma * np.eye(n1)
        M[ivy, ivy] = -gamma * np.eye(n2)
        terms.append((1.0, 0.0, M, np.zeros(n)))

        M = np.zeros((n, n))
        v = np.zeros(n)
        M[il, ix] = A
        M[il, iy] = B
        M[il, ivx] = delta * A
        M[il, ivy] = delta * B
        v[il] = -b
        M[ivx, ix] = -(Pf + A.T @ A)
        M[ivx, iy] = -A.T @ B
        M[ivx, il] = -A.T
        v[ivx] = -(qf - A.T @ b)
        M[ivy, ix] = -B.T @ A
        M[ivy, iy] = -(Pg + B.T @ B)
        M[ivy, il] = -B.T
        v[ivy] = -(qg - B.T @ b)
        terms.append((pb[0], pb[1], M, v))

        if pe[0] != 0.0:
            M = np.zeros((n, n))
            M[ivx, ix] = -np.eye(n1)
            M[ivy, iy] = -np.eye(n2)
            terms.append((pb[0] * pe[0], pb[1] + pe[1], M, np.zeros(n)))
        return _stack(terms)

    ivl = slice(base, base + m)
    n = base + m

    if kind == SystemKind.SECOND_ORDER_DUAL:
        pg_, pd_ = _power(params.gamma), _power(params.delta)
        if pg_ is None or pd_ is None:
            return None
        terms = []
        M = np.zeros((n, n))
        v = np.zeros(n)
        M[ix, ivx] = np.eye(n1)
        M[iy, ivy] = np.eye(n2)
        M[il, ivl] = np.eye(m)
        M[ivx, ix] = -(Pf + A.T @ A)
        M[ivx, iy] = -A.T @ B
        M[ivx, il] = -A.T
        v[ivx] = -(qf - A.T @ b)
        M[ivy, ix] = -B.T @ A
        M[ivy, iy] = -(Pg + B.T @ B)
        M[ivy, il] = -B.T
        v[ivy] = -(qg - B.T @ b)
        M[ivl, ix] = A
        M[ivl, iy] = B
        v[ivl] = -b
        terms.append((1.0, 0.0, M, v))

        M = np.zeros((n, n))
        M[ivx, ivx] = -np.eye(n1)
        M[ivy, ivy] = -np.eye(n2)
        M[ivl, ivl] = -np.eye(m)
        terms.append((pg_[0], pg_[1], M, np.zeros(n)))

        M = np.zeros((n, n))
        M[ivx, ivl] = -A.T
        M[ivy, ivl] = -B.T
        M[ivl, ivx] = A
        M[ivl, ivy] = B
        terms.append((pd_[0], pd_[1], M, np.zeros(n)))
        return _stack(terms)

    pg_, pb, pa = _power(params.gamma), _power(params.beta), _power(params.a)
    if pg_ is None or pb is None or pa is None:
        return None
    mu = float(params.mu)
    terms = []
    M = np.zeros((n, n))
    M[ix, ivx] = np.eye(n1)
    M[iy, ivy] = np.eye(n2)
    M[il, ivl] = np.eye(m)
    terms.append((1.0, 0.0, M, np.zeros(n)))

    M = np.zeros((n, n))
    M[ivx, ivx] = -np.eye(n1)
    M[ivy, ivy] = -np.eye(n2)
    M[ivl, ivl] = -np.eye(m)
    terms.append((pg_[0], pg_[1], M, np.zeros(n)))

    M = np.zeros((n, n))
    v = np.zeros(n)
    M[ivx, ix] = -(Pf + mu * A.T @ A)
    M[ivx, iy] = -mu * A.T @ B
    M[ivx, il] = -A.T
    v[ivx] = -(qf - mu * A.T @ b)
    M[ivy, ix] = -mu * B.T @ A
    M[ivy, iy] = -(Pg + mu * B.T @ B)
    M[ivy, il] = -B.T
    v[ivy] = -(qg - mu * B.T @ b)
    M[ivl, ix] = A
    M[ivl, iy] = B
    v[ivl] = -b
    terms.append((pb[0], pb[1], M, v))

    M = np.zeros((n, n))
    M[ivx, ivl] = -A.T
    M[ivy, ivl] = -B.T
    M[ivl, ivx] = A
    M[ivl, ivy] = B
    terms.append((pb[0] * pa[0], pb[1] + pa[1], M, np.zeros(n)))
    return _stack(terms)


def _stack(terms) -> AffineField:
    cs = [t[0] for t in terms]
    rs = [t[1] for t in terms]
    Ms = np.stack([t[2] for t in terms])
    vs = np.stack([t[3] for t in terms])
    return AffineField(cs, rs, Ms, vs)


class ExistenceConstants(NamedTuple):
    C1: float
    C2: float
    C3: float
    K: float
    S: float


def existence_constants(prob: SeparableProblem, params: SystemParams,
                        t: float) -> ExistenceConstants:
    """Lipschitz/growth constants of the flattened first-order field.

    Spectral norms throughout.  K bounds the state-Lipschitz modulus and S
    the affine growth, both evaluated at time t; they certify global
    existence and uniqueness of the trajectory.
    """
    params.validate(SystemKind.TIKHONOV_PD)
    gamma, delta = float(params.gamma), float(params.delta)
    A, B, b = prob.A, prob.B, prob.b
    nA = np.linalg.norm(A, 2)
    nB = np.linalg.norm(B, 2)
    nAtA = np.linalg.norm(A.T @ A, 2)
    nBtA = np.linalg.norm(B.T @ A, 2)
    nAtB = np.linalg.norm(A.T @ B, 2)
    nBtB = np.linalg.norm(B.T @ B, 2)
    # spectral norm is transpose-invariant; written out to mirror the constants
    nAt, nBt = nA, nB
    C1 = max(1.0 + gamma, nAt + nBt, nA + nAtA + nBtA + prob.l1, nB + nAtB + nBtB + prob.l2)
    gf0 = float(np.linalg.norm(prob.f.grad(np.zeros(prob.n1))))
    gg0 = float(np.linalg.norm(prob.g.grad(np.zeros(prob.n2))))
    nAtb = float(np.linalg.norm(A.T @ b))
    nBtb = float(np.linalg.norm(B.T @ b))
    C2 = max(prob.l1 + prob.l2, gf0 + gg0 + nAtb + nBtb)
    C3 = max(1.0 + gamma, nAt + nBt, nA + nAtA + nBtA, nB + nBtB + nAtB,
             float(np.linalg.norm(b)), C2)
    bval = params.beta.value(t)
    eval_ = params.eps.value(t)
    K = 2.0 * C1 + delta * bval * (nA + nB) + 3.0 * C1 * bval + 2.0 * bval * eval_
    S = 2.0 * C3 + delta * bval * (nA + nB) + 5.0 * C3 * bval + 2.0 * bval * eval_
    return ExistenceConstants(C1=C1, C2=C2, C3=C3, K=K, S=S)


def simulate(prob: SeparableProblem, kind: SystemKind, params: SystemParams,
             t0: float, T: float, init: SystemState,
             cfg: Optional[IntegratorConfig] = None, samples=200,
             backend: Optional[str] = None) -> Trajectory:
    """Integrate one system and return the sampled trajectory."""
    if has_dual_velocity(kind) and init.vlam is None:
        raise ValueError(f"{kind.value} needs an initial dual velocity block")
    if not has_dual_velocity(kind) and init.vlam is not None:
        raise ValueError(f"{kind.value} does not carry a dual velocity block")
    z0 = pack(init)
    if z0.shape[0] != state_dim(prob, kind):
        raise ValueError("initial state does not match the problem dimensions")
    field = affine_field(kind, params, prob)
    if field is None:
        field = field_closure(kind, params, prob)
    traj = integrate(field, t0, T, z0, cfg=cfg, samples=samples, backend=backend)
    traj.stats["system"] = kind.value
    return traj
