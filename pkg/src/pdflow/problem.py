"""Separable linearly constrained convex problem instances.

A problem is  min f(x) + g(y)  subject to  A x + B y = b  with smooth convex
f, g.  Quadratic blocks (0.5 x'Px + q'x + c) get exact dense-linear-algebra
reference solutions: a saddle point, the minimal-norm primal solution, and
Tikhonov-regularized minimizers.  General oracles may be simulated but carry
no built-in reference solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DimensionError",
    "UnsupportedSpecError",
    "SolverFailureError",
    "QuadraticSpec",
    "OracleSpec",
    "SeparableProblem",
    "ReferenceSolution",
    "solve_saddle_point",
    "min_norm_solution",
    "tikhonov_minimizer",
    "tikhonov_inequality_residual",
    "builtin",
    "problem_to_json",
    "problem_from_json",
]

KKT_TOL = 1e-10
MIN_NORM_VERIFY_TOL = 1e-8
TIKHONOV_STATIONARITY_TOL = 1e-10


class DimensionError(ValueError):
    """Operands with mutually inconsistent shapes."""


class UnsupportedSpecError(TypeError):
    """Operation requires quadratic blocks but got a general oracle."""


class SolverFailureError(RuntimeError):
    """Reference solve did not reach the required residual."""


def _vec(v, length, name):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1 or v.shape[0] != length:
        raise DimensionError(f"{name} must be a vector of length {length}, got shape {v.shape}")
    return v


class QuadraticSpec:
    """Convex quadratic block 0.5 x'Px + q'x + c with P symmetric PSD."""

    def __init__(self, P, q=None, c: float = 0.0):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if P.shape[0] != P.shape[1]:
            raise DimensionError(f"P must be square, got {P.shape}")
        scale = np.linalg.norm(P, 2) if P.size else 0.0
        if np.linalg.norm(P - P.T, 2) > 1e-12 * max(scale, 1.0):
            raise ValueError("P must be symmetric")
        eigs = np.linalg.eigvalsh(P)
        if eigs.size and eigs[0] < -1e-10 * max(scale, 1.0):
            raise ValueError(f"P must be positive semidefinite (min eigenvalue {eigs[0]:g})")
        self.P = P
        self.q = np.zeros(P.shape[0]) if q is None else _vec(q, P.shape[0], "q")
        self.c = float(c)
        self.lipschitz = float(eigs[-1]) if eigs.size else 0.0

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def value(self, x) -> float:
        x = _vec(x, self.dim, "x")
        return float(0.5 * x @ self.P @ x + self.q @ x + self.c)

    def grad(self, x) -> np.ndarray:
        x = _vec(x, self.dim, "x")
        return self.P @ x + self.q


class OracleSpec:
    """General smooth convex block given by value/gradient callables."""

    def __init__(self, dim: int, value: Callable, grad: Callable, lipschitz: float):
        if dim <= 0:
            raise DimensionError("oracle dimension must be positive")
        if lipschitz <= 0.0:
            raise ValueError("gradient Lipschitz constant must be positive")
        self.dim = int(dim)
        self._value = value
        self._grad = grad
        self.lipschitz = float(lipschitz)

    def value(self, x) -> float:
        return float(self._value(_vec(x, self.dim, "x")))

    def grad(self, x) -> np.ndarray:
        return np.asarray(self._grad(_vec(x, self.dim, "x")), dtype=float)


class SeparableProblem:
    """Immutable instance of min f(x)+g(y) s.t. Ax+By=b."""

    def __init__(self, f_spec, g_spec, A, B, b, l1: Optional[float] = None,
                 l2: Optional[float] = None, name: str = ""):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[0] != B.shape[0]:
            raise DimensionError(f"A and B must have equal row counts, got {A.shape} vs {B.shape}")
        m = A.shape[0]
        b = _vec(b, m, "b")
        if f_spec.dim != A.shape[1]:
            raise DimensionError(f"f block dim {f_spec.dim} != A columns {A.shape[1]}")
        if g_spec.dim != B.shape[1]:
            raise DimensionError(f"g block dim {g_spec.dim} != B columns {B.shape[1]}")
        self.f = f_spec
        self.g = g_spec
        self.A = A
        self.B = B
        self.b = b
        self.n1 = A.shape[1]
        self.n2 = B.shape[1]
        self.m = m
        self.l1 = float(l1) if l1 is not None else float(f_spec.lipschitz)
        self.l2 = float(l2) if l2 is not None else float(g_spec.lipschitz)
        if self.l1 < f_spec.lipschitz - 1e-12 * max(1.0, f_spec.lipschitz):
            raise ValueError("l1 underestimates the gradient Lipschitz constant of f")
        if self.l2 < g_spec.lipschitz - 1e-12 * max(1.0, g_spec.lipschitz):
            raise ValueError("l2 underestimates the gradient Lipschitz constant of g")
        if self.l1 <= 0.0:
            self.l1 = 1.0  # f constant: any positive constant is valid
        if self.l2 <= 0.0:
            self.l2 = 1.0
        self.name = name

    @property
    def is_quadratic(self) -> bool:
        return isinstance(self.f, QuadraticSpec) and isinstance(self.g, QuadraticSpec)

    def _check(self, x, y, lam):
        return (_vec(x, self.n1, "x"), _vec(y, self.n2, "y"), _vec(lam, self.m, "lam"))

    def residual(self, x, y) -> np.ndarray:
        x = _vec(x, self.n1, "x")
        y = _vec(y, self.n2, "y")
        return self.A @ x + self.B @ y - self.b

    def phi(self, x, y) -> float:
        return self.f.value(x) + self.g.value(y)

    def lagrangian(self, x, y, lam) -> float:
        x, y, lam = self._check(x, y, lam)
        return self.phi(x, y) + float(lam @ self.residual(x, y))

    def aug_lagrangian(self, x, y, lam) -> float:
        x, y, lam = self._check(x, y, lam)
        res = self.residual(x, y)
        return self.phi(x, y) + float(lam @ res) + 0.5 * float(res @ res)

    def grad_aug_lagrangian(self, x, y, lam) -> tuple[np.ndarray, np.ndarray]:
        x, y, lam = self._check(x, y, lam)
        res = self.residual(x, y)
        gx = self.f.grad(x) + self.A.T @ lam + self.A.T @ res
        gy = self.g.grad(y) + self.B.T @ lam + self.B.T @ res
        return gx, gy

    def kkt_residual(self, x, y, lam) -> float:
        x, y, lam = self._check(x, y, lam)
        rx = self.f.grad(x) + self.A.T @ lam
        ry = self.g.grad(y) + self.B.T @ lam
        rc = self.residual(x, y)
        return math.sqrt(float(rx @ rx) + float(ry @ ry) + float(rc @ rc))


@dataclass
class ReferenceSolution:
    """A saddle point plus (when known) the minimal-norm primal pair."""

    x_star: np.ndarray
    y_star: np.ndarray
    lambda_star: np.ndarray
    phi_star: float
    kkt_residual: float
    x_bar: Optional[np.ndarray] = None
    y_bar: Optional[np.ndarray] = None
    unique: bool = True


def _require_quadratic(prob: SeparableProblem, op: str):
    if not prob.is_quadratic:
        raise UnsupportedSpecError(f"{op} requires quadratic f and g blocks")


def solve_saddle_point(prob: SeparableProblem) -> ReferenceSolution:
    """Solve the stationarity-plus-feasibility system for one saddle point.

    Singular systems (non-unique saddle sets) get the least-squares
    minimum-norm solution and are flagged non-unique.
    """
    _require_quadratic(prob, "solve_saddle_point")
    n1, n2, m = prob.n1, prob.n2, prob.m
    n = n1 + n2 + m
    K = np.zeros((n, n))
    K[:n1, :n1] = prob.f.P
    K[n1:n1 + n2, n1:n1 + n2] = prob.g.P
    K[:n1, n1 + n2:] = prob.A.T
    K[n1:n1 + n2, n1 + n2:] = prob.B.T
    K[n1 + n2:, :n1] = prob.A
    K[n1 + n2:, n1:n1 + n2] = prob.B
    rhs = np.concatenate([-prob.f.q, -prob.g.q, prob.b])
    sol, _, rank, _ = np.linalg.lstsq(K, rhs, rcond=None)
    x, y, lam = sol[:n1], sol[n1:n1 + n2], sol[n1 + n2:]
    res = prob.kkt_residual(x, y, lam)
    if res >= KKT_TOL:
        raise SolverFailureError(
            f"saddle-point solve left residual {res:.3e} >= {KKT_TOL:g} "
            "(infeasible, unbounded, or numerically rank-deficient instance)"
        )
    x_bar, y_bar = min_norm_solution(prob, lambda_star=lam)
    return ReferenceSolution(
        x_star=x,
        y_star=y,
        lambda_star=lam,
        phi_star=prob.phi(x, y),
        x_bar=x_bar,
        y_bar=y_bar,
        kkt_residual=res,
        unique=bool(rank == n),
    )


def min_norm_solution(prob: SeparableProblem,
                      lambda_star: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Projection of the origin onto the primal solution set.

    With a dual solution fixed, the solution set is the affine set cut out by
    primal stationarity and feasibility; the least-norm point of that system
    is found by a second minimum-norm solve and then verified.
    """
    _require_quadratic(prob, "min_norm_solution")
    if lambda_star is None:
        lambda_star = solve_saddle_point(prob).lambda_star
    lam = _vec(lambda_star, prob.m, "lambda_star")
    n1, n2, m = prob.n1, prob.n2, prob.m
    M = np.zeros((n1 + n2 + m, n1 + n2))
    M[:n1, :n1] = prob.f.P
    M[n1:n1 + n2, n1:] = prob.g.P
    M[n1 + n2:, :n1] = prob.A
    M[n1 + n2:, n1:] = prob.B
    rhs = np.concatenate([-prob.f.q - prob.A.T @ lam, -prob.g.q - prob.B.T @ lam, prob.b])
    sol, _, _, _ = np.linalg.lstsq(M, rhs, rcond=None)
    x_bar, y_bar = sol[:n1], sol[n1:]
    err = np.linalg.norm(M @ sol - rhs)
    if err >= MIN_NORM_VERIFY_TOL:
        raise SolverFailureError(
            f"minimal-norm solve verification failed: stationarity/feasibility residual {err:.3e}"
        )
    return x_bar, y_bar


def tikhonov_minimizer(prob: SeparableProblem, lambda_bar, eps: float
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Unique minimizer of the eps-regularized augmented Lagrangian.

    Minimizes aug_lagrangian(x, y, lambda_bar) + eps/2 (|x|^2 + |y|^2) via a
    single symmetric positive-definite solve and verifies first-order
    stationarity to 1e-10.
    """
    _require_quadratic(prob, "tikhonov_minimizer")
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    lam = _vec(lambda_bar, prob.m, "lambda_bar")
    n1, n2 = prob.n1, prob.n2
    H = np.zeros((n1 + n2, n1 + n2))
    H[:n1, :n1] = prob.f.P + prob.A.T @ prob.A + eps * np.eye(n1)
    H[:n1, n1:] = prob.A.T @ prob.B
    H[n1:, :n1] = prob.B.T @ prob.A
    H[n1:, n1:] = prob.g.P + prob.B.T @ prob.B + eps * np.eye(n2)
    rhs = np.concatenate([
        -prob.f.q - prob.A.T @ lam + prob.A.T @ prob.b,
        -prob.g.q - prob.B.T @ lam + prob.B.T @ prob.b,
    ])
    sol = np.linalg.solve(H, rhs)
    x_eps, y_eps = sol[:n1], sol[n1:]
    gx, gy = prob.grad_aug_lagrangian(x_eps, y_eps, lam)
    stat = math.sqrt(float(np.sum((gx + eps * x_eps) ** 2) + np.sum((gy + eps * y_eps) ** 2)))
    if stat >= TIKHONOV_STATIONARITY_TOL * max(1.0, float(np.linalg.norm(rhs))):
        raise SolverFailureError(f"Tikhonov minimizer stationarity residual {stat:.3e}")
    return x_eps, y_eps


def tikhonov_inequality_residual(prob: SeparableProblem, lambda_bar, eps: float,
                                 x, y, x_eps, y_eps, x_bar, y_bar) -> float:
    """Slack of the strong-convexity lower bound tying probe points to the
    regularized minimizer and the minimal-norm pair (nonnegative in exact
    arithmetic)."""
    def l_eps(u, v):
        return prob.aug_lagrangian(u, v, lambda_bar) + 0.5 * eps * (
            float(u @ u) + float(v @ v)
        )

    x = _vec(x, prob.n1, "x")
    y = _vec(y, prob.n2, "y")
    dist2 = float(np.sum((x - x_eps) ** 2) + np.sum((y - y_eps) ** 2))
    norm_gap = float(x_eps @ x_eps - x_bar @ x_bar + y_eps @ y_eps - y_bar @ y_bar)
    return l_eps(x, y) - l_eps(x_bar, y_bar) - 0.5 * eps * dist2 - 0.5 * eps * norm_gap


# ---------------------------------------------------------------------------
# Built-in instances
# ---------------------------------------------------------------------------


def builtin(name: str, **params) -> SeparableProblem:
    """Construct a named instance.

    example1(m, n, e, d): objective (m x1 + n x2 + e x3)^2 + d y^2 with the
    single constraint m x1 - n x2 + e x3 + d y = 0; every parameter nonzero.
    example2: strongly convex QP |x-(1,1)|^2 + |y|^2 with x - y = (x2, 0).
    random_qp(seed, dims): reproducible strongly convex instance.
    """
    if name == "example1":
        m = float(params.pop("m", 5.0))
        n = float(params.pop("n", 1.0))
        e = float(params.pop("e", 1.0))
        d = float(params.pop("d", 5.0))
        _reject_extra(params)
        if 0.0 in (m, n, e, d):
            raise ValueError("example1 parameters m, n, e, d must all be nonzero")
        a = np.array([m, n, e])
        f = QuadraticSpec(2.0 * np.outer(a, a))
        g = QuadraticSpec(np.array([[2.0 * d]]))
        A = np.array([[m, -n, e]])
        B = np.array([[d]])
        return SeparableProblem(f, g, A, B, np.zeros(1), name=f"example1({m:g},{n:g},{e:g},{d:g})")
    if name == "example2":
        _reject_extra(params)
        f = QuadraticSpec(2.0 * np.eye(2), q=np.array([-2.0, -2.0]), c=2.0)
        g = QuadraticSpec(2.0 * np.eye(2))
        A = np.array([[1.0, -1.0], [0.0, 1.0]])
        B = -np.eye(2)
        return SeparableProblem(f, g, A, B, np.zeros(2), name="example2")
    if name == "random_qp":
        seed = int(params.pop("seed", 0))
        dims = tuple(params.pop("dims", (4, 3, 2)))
        _reject_extra(params)
        n1, n2, m = (int(v) for v in dims)
        if min(n1, n2, m) <= 0 or m > n1 + n2:
            raise ValueError(f"random_qp dims must be positive with m <= n1+n2, got {dims}")
        rng = np.random.default_rng(seed)
        Gf = rng.standard_normal((n1, n1))
        Gg = rng.standard_normal((n2, n2))
        f = QuadraticSpec(Gf @ Gf.T + np.eye(n1), q=rng.standard_normal(n1))
        g = QuadraticSpec(Gg @ Gg.T + np.eye(n2), q=rng.standard_normal(n2))
        A = rng.standard_normal((m, n1))
        B = rng.standard_normal((m, n2))
        b = A @ rng.standard_normal(n1) + B @ rng.standard_normal(n2)
        return SeparableProblem(f, g, A, B, b, name=f"random_qp(seed={seed},dims={dims})")
    raise ValueError(f"unknown builtin problem {name!r}")


def _reject_extra(params):
    if params:
        raise ValueError(f"unexpected parameters: {sorted(params)}")


# ---------------------------------------------------------------------------
# JSON form
# ---------------------------------------------------------------------------


def _quad_to_json(spec: QuadraticSpec) -> dict:
    return {"P": spec.P.tolist(), "q": spec.q.tolist(), "c": spec.c}


def problem_to_json(prob: SeparableProblem) -> dict:
    """Row-major JSON document; only quadratic blocks are serializable."""
    _require_quadratic(prob, "problem_to_json")
    return {
        "f": _quad_to_json(prob.f),
        "g": _quad_to_json(prob.g),
        "A": prob.A.tolist(),
        "B": prob.B.tolist(),
        "b": prob.b.tolist(),
    }


def problem_from_json(doc: dict) -> SeparableProblem:
    f = QuadraticSpec(doc["f"]["P"], doc["f"].get("q"), doc["f"].get("c", 0.0))
    g = QuadraticSpec(doc["g"]["P"], doc["g"].get("q"), doc["g"].get("c", 0.0))
    return SeparableProblem(f, g, doc["A"], doc["B"], doc["b"])
