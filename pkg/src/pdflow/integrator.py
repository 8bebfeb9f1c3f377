"""Adaptive embedded Runge-Kutta 5(4) integration with dense sampling.

The stepper uses the Dormand-Prince coefficient pair (the embedded pair
behind MATLAB's ode45), a PI step-size controller (safety 0.9, per-step
growth clamped to [0.2, 5.0]), and the classical 4th-order continuous
extension of the pair for sample interpolation.  A fixed-step RK4 routine is
provided purely as an independent cross-check.

Two backends implement the identical algorithm: a compiled kernel
(pdflow._kernels, Cython) for affine time-varying fields, and a pure-Python
fallback that also accepts arbitrary callables.  The backend is chosen at
import and can be pinned with the PDFLOW_BACKEND environment variable
("compiled" or "python").  Results are bitwise deterministic per backend;
across backends they agree to integration tolerance only.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

try:  # compiled hot loop; optional
    from . import _kernels
except ImportError:  # pragma: no cover - exercised only on pure-Python installs
    _kernels = None

__all__ = [
    "AffineField",
    "IntegratorConfig",
    "Trajectory",
    "IntegrationBudgetError",
    "StiffnessError",
    "PoisonedStateError",
    "integrate",
    "integrate_rk4",
    "available_backends",
    "default_backend",
    "trajectory_csv_text",
]


class IntegrationBudgetError(RuntimeError):
    """max_steps exhausted before reaching the final time."""


class StiffnessError(RuntimeError):
    """Step size underflowed (below 1e-14 of the current time)."""


class PoisonedStateError(RuntimeError):
    """NaN or Inf encountered in the state or the vector field."""


# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# 4th-order continuous-extension coefficients
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

# PI controller: h *= safety * err_prev^PI_BETA / err^PI_EXPO, clamped
PI_BETA = 0.04
PI_EXPO = 0.2 - 0.75 * PI_BETA
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
ERR_TINY = 1e-30


class AffineField:
    """Right-hand side dz/dt = sum_k c_k t^{r_k} (M_k z + v_k).

    This is the native input of the compiled kernel; quadratic problems with
    power-family schedules reduce to it exactly.
    """

    def __init__(self, coeff_c, coeff_r, mats, vecs):
        self.c = np.ascontiguousarray(coeff_c, dtype=float)
        self.r = np.ascontiguousarray(coeff_r, dtype=float)
        self.M = np.ascontiguousarray(mats, dtype=float)
        self.v = np.ascontiguousarray(vecs, dtype=float)
        k, n, n2 = self.M.shape
        if n != n2 or self.c.shape != (k,) or self.r.shape != (k,) or self.v.shape != (k, n):
            raise ValueError("inconsistent affine-field term shapes")

    @property
    def dim(self) -> int:
        return self.M.shape[1]

    def __call__(self, t: float, z: np.ndarray) -> np.ndarray:
        w = self.c * t**self.r
        return np.tensordot(w, self.M, axes=1) @ z + w @ self.v


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    h_init: float = 1e-3
    h_max: Optional[float] = None  # None -> (T - t0) / 10
    max_steps: int = 5_000_000
    safety: float = 0.9

    def __post_init__(self):
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ValueError("rtol and atol must be positive")
        if self.h_init <= 0.0:
            raise ValueError("h_init must be positive")
        if self.h_max is not None and self.h_init > self.h_max:
            raise ValueError("h_init must not exceed h_max")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if not (0.0 < self.safety <= 1.0):
            raise ValueError("safety must lie in (0, 1]")


@dataclass
class Trajectory:
    """Sampled solution: strictly increasing times spanning [t0, T]."""

    times: np.ndarray
    flat: np.ndarray  # (n_samples, state_dim)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.flat = np.asarray(self.flat, dtype=float)
        if self.times.ndim != 1 or self.flat.shape[0] != self.times.shape[0]:
            raise ValueError("times and states must have matching sample counts")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(self.flat)):
            raise PoisonedStateError("non-finite value in sampled states")

    @property
    def n_samples(self) -> int:
        return self.times.shape[0]

    @property
    def state_dim(self) -> int:
        return self.flat.shape[1]


def available_backends() -> list[str]:
    return ["compiled", "python"] if _kernels is not None else ["python"]


def default_backend() -> str:
    env = os.environ.get("PDFLOW_BACKEND", "").strip().lower()
    if env:
        if env not in ("compiled", "python"):
            raise ValueError(f"PDFLOW_BACKEND must be 'compiled' or 'python', got {env!r}")
        if env == "compiled" and _kernels is None:
            raise RuntimeError("PDFLOW_BACKEND=compiled but the compiled kernel is not built")
        return env
    return "compiled" if _kernels is not None else "python"


def _resolve_samples(samples, t0: float, T: float) -> np.ndarray:
    if isinstance(samples, int):
        if samples < 2:
            raise ValueError("need at least 2 samples")
        ts = np.geomspace(t0, T, samples) if t0 > 0.0 else np.linspace(t0, T, samples)
    else:
        ts = np.asarray(list(samples), dtype=float)
        if ts.ndim != 1 or ts.size == 0:
            raise ValueError("explicit samples must be a non-empty 1-d sequence")
        if np.any(np.diff(ts) <= 0.0):
            raise ValueError("explicit samples must be strictly increasing")
        if ts[0] < t0 or ts[-1] > T:
            raise ValueError("explicit samples must lie within [t0, T]")
        if ts[0] > t0:
            ts = np.concatenate([[t0], ts])
        if ts[-1] < T:
            ts = np.concatenate([ts, [T]])
    ts[0], ts[-1] = t0, T
    return np.ascontiguousarray(ts)


def _pick_backend(field_obj, backend: Optional[str]) -> str:
    chosen = backend if backend is not None else default_backend()
    if chosen == "compiled":
        if _kernels is None:
            raise RuntimeError("compiled backend requested but pdflow._kernels is not built")
        if not isinstance(field_obj, AffineField):
            if backend is None:
                return "python"  # generic callable: silently use the fallback
            raise RuntimeError("compiled backend only integrates AffineField right-hand sides")
    return chosen


def integrate(field_obj: Union[AffineField, Callable], t0: float, T: float, z0,
              cfg: Optional[IntegratorConfig] = None,
              samples: Union[int, Sequence[float]] = 200,
              backend: Optional[str] = None) -> Trajectory:
    """Integrate dz/dt = field(t, z) from t0 to T and sample densely.

    samples: an int requests that many log-spaced instants (linear when
    t0 <= 0); a sequence is used as-is (t0 and T are added if missing).
    The result is bitwise deterministic for fixed inputs and backend.
    """
    cfg = cfg or IntegratorConfig()
    if T <= t0:
        raise ValueError("T must exceed t0")
    z0 = np.ascontiguousarray(z0, dtype=float)
    if z0.ndim != 1:
        raise ValueError("initial state must be a flat vector")
    if not np.all(np.isfinite(z0)):
        raise PoisonedStateError("non-finite initial state")
    ts = _resolve_samples(samples, t0, T)
    h_max = cfg.h_max if cfg.h_max is not None else (T - t0) / 10.0
    chosen = _pick_backend(field_obj, backend)
    if chosen == "compiled":
        out, na, nr, nfev, h_final, status, bad_t = _kernels.dopri5_affine(
            field_obj.c, field_obj.r, field_obj.M, field_obj.v,
            t0, T, z0, cfg.rtol, cfg.atol, min(cfg.h_init, h_max), h_max,
            cfg.max_steps, cfg.safety, ts,
        )
        _raise_status(status, bad_t)
    else:
        f = field_obj
        out, na, nr, nfev, h_final = _dopri5_python(
            f, t0, T, z0, cfg.rtol, cfg.atol, min(cfg.h_init, h_max), h_max,
            cfg.max_steps, cfg.safety, ts,
        )
    stats = {
        "method": "dopri5",
        "backend": chosen,
        "n_accepted": int(na),
        "n_rejected": int(nr),
        "n_rhs_evals": int(nfev),
        "h_final": float(h_final),
    }
    return Trajectory(times=ts, flat=out, stats=stats)


def integrate_rk4(field_obj: Union[AffineField, Callable], t0: float, T: float, z0,
                  h: float, samples: Union[int, Sequence[float]] = 200,
                  backend: Optional[str] = None) -> Trajectory:
    """Classical fixed-step RK4 cross-check.

    Each inter-sample interval is covered by equal sub-steps of size <= h, so
    every sample instant is hit exactly without interpolation.
    """
    if T <= t0:
        raise ValueError("T must exceed t0")
    if h <= 0.0:
        raise ValueError("step size must be positive")
    z0 = np.ascontiguousarray(z0, dtype=float)
    if not np.all(np.isfinite(z0)):
        raise PoisonedStateError("non-finite initial state")
    ts = _resolve_samples(samples, t0, T)
    chosen = _pick_backend(field_obj, backend)
    if chosen == "compiled":
        out, nsteps, status, bad_t = _kernels.rk4_affine(
            field_obj.c, field_obj.r, field_obj.M, field_obj.v, z0, h, ts
        )
        _raise_status(status, bad_t)
    else:
        out, nsteps = _rk4_python(field_obj, z0, h, ts)
    stats = {
        "method": "rk4",
        "backend": chosen,
        "n_accepted": int(nsteps),
        "n_rejected": 0,
        "n_rhs_evals": int(4 * nsteps),
        "h_final": float(h),
    }
    return Trajectory(times=ts, flat=out, stats=stats)


def _raise_status(status: int, bad_t: float) -> None:
    if status == 1:
        raise IntegrationBudgetError(f"max_steps exhausted at t={bad_t:g}")
    if status == 2:
        raise StiffnessError(f"step size underflow at t={bad_t:g} (stiff problem?)")
    if status == 3:
        raise PoisonedStateError(f"non-finite state or derivative at t={bad_t:g}")


# ---------------------------------------------------------------------------
# Pure-Python backend
# ---------------------------------------------------------------------------


def _dopri5_python(f, t0, T, z0, rtol, atol, h_init, h_max, max_steps, safety, ts):
    n = z0.size
    S = ts.size
    out = np.empty((S, n))
    out[0] = z0
    i_s = 1

    t = t0
    y = z0.copy()
    h = min(h_init, h_max, T - t0)
    facold = 1e-4
    last_rejected = False
    naccept = nreject = 0

    k1 = np.asarray(f(t, y), dtype=float)
    nfev = 1
    if not np.all(np.isfinite(k1)):
        raise PoisonedStateError(f"non-finite state or derivative at t={t:g}")

    while t < T:
        if naccept + nreject >= max_steps:
            raise IntegrationBudgetError(f"max_steps exhausted at t={t:g}")
        if h < max(1e-14 * abs(t), 1e-300):
            raise StiffnessError(f"step size underflow at t={t:g} (stiff problem?)")
        clamped = False
        if h >= T - t:
            h = T - t
            clamped = True

        k2 = f(t + C2 * h, y + h * (A21 * k1))
        k3 = f(t + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = f(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = f(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        ynew = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = f(t + h, ynew)
        nfev += 6

        errv = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = math.sqrt(float(np.mean((errv / sc) ** 2)))

        if not math.isfinite(err):
            if np.all(np.isfinite(y)) and np.all(np.isfinite(k1)):
                err = 1e10  # trial overshoot: treat as a rejected step
            else:
                raise PoisonedStateError(f"non-finite state or derivative at t={t:g}")

        if err <= 1.0:
            t_new = T if clamped else t + h
            # 4th-order continuous extension of the accepted step
            if i_s < S and ts[i_s] <= t_new:
                ydiff = ynew - y
                bspl = h * k1 - ydiff
                r4 = ydiff - h * k7 - bspl
                r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
                while i_s < S and ts[i_s] <= t_new:
                    theta = (ts[i_s] - t) / h
                    if theta >= 1.0 - 1e-12:
                        out[i_s] = ynew
                    else:
                        out[i_s] = y + theta * (
                            ydiff + (1.0 - theta) * (bspl + theta * (r4 + (1.0 - theta) * r5))
                        )
                    i_s += 1
            err_c = max(err, ERR_TINY)
            factor = safety * facold**PI_BETA / err_c**PI_EXPO
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if last_rejected:
                factor = min(factor, 1.0)
            facold = max(err, 1e-4)
            t = t_new
            y = ynew
            k1 = np.asarray(k7, dtype=float)  # FSAL
            naccept += 1
            last_rejected = False
            h *= factor
        else:
            factor = max(MIN_FACTOR, safety / max(err, ERR_TINY) ** PI_EXPO)
            h *= factor
            nreject += 1
            last_rejected = True

    return out, naccept, nreject, nfev, h


def _rk4_python(f, z0, h, ts):
    y = z0.copy()
    out = np.empty((ts.size, z0.size))
    out[0] = y
    nsteps = 0
    for i in range(1, ts.size):
        ta, tb = ts[i - 1], ts[i]
        nsub = max(1, int(math.ceil((tb - ta) / h - 1e-12)))
        hs = (tb - ta) / nsub
        t = ta
        for _ in range(nsub):
            k1 = f(t, y)
            k2 = f(t + 0.5 * hs, y + 0.5 * hs * k1)
            k3 = f(t + 0.5 * hs, y + 0.5 * hs * k2)
            k4 = f(t + hs, y + hs * k3)
            y = y + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += hs
        if not np.all(np.isfinite(y)):
            raise PoisonedStateError(f"non-finite state or derivative at t={t:g}")
        out[i] = y
        nsteps += nsub
    return out, nsteps


# ---------------------------------------------------------------------------
# CSV form
# ---------------------------------------------------------------------------


def _fmt17(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv_text(traj: Trajectory, dims: tuple[int, int, int]) -> str:
    """CSV with header t,x_0..,y_0..,lam_0..,vx_0..,vy_0..(,vlam_0..)."""
    n1, n2, m = dims
    base = 2 * n1 + 2 * n2 + m
    if traj.state_dim == base:
        blocks = [("x", n1), ("y", n2), ("lam", m), ("vx", n1), ("vy", n2)]
    elif traj.state_dim == base + m:
        blocks = [("x", n1), ("y", n2), ("lam", m), ("vx", n1), ("vy", n2), ("vlam", m)]
    else:
        raise ValueError(f"state width {traj.state_dim} does not match dims {dims}")
    header = ["t"]
    for name, size in blocks:
        header.extend(f"{name}_{i}" for i in range(size))
    lines = [",".join(header)]
    for i in range(traj.n_samples):
        row = [_fmt17(traj.times[i])]
        row.extend(_fmt17(v) for v in traj.flat[i])
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
